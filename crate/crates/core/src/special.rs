//! Scalar normal special functions: density, distribution function,
//! quantile, and the bivariate normal density and upper orthant probability.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// 1/√(2π)
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
#[inline]
pub fn phi(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal distribution function.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// `Φ(hi) − Φ(lo)` evaluated on whichever side of the mean keeps precision.
#[inline]
pub fn norm_interval(lo: f64, hi: f64) -> f64 {
    if lo > 0.0 {
        norm_cdf(-lo) - norm_cdf(-hi)
    } else {
        norm_cdf(hi) - norm_cdf(lo)
    }
}

// Wichura's AS241 (PPND16) rational approximations.
const SPLIT1: f64 = 0.425;
const SPLIT2: f64 = 5.0;
const CONST1: f64 = 0.180625;
const CONST2: f64 = 1.6;

const A: [f64; 8] = [
    3.387_132_872_796_366_608,
    1.331_416_678_917_843_774_5e2,
    1.971_590_950_306_551_442_7e3,
    1.373_169_376_550_946_112_5e4,
    4.592_195_393_154_987_145_7e4,
    6.726_577_092_700_870_085_3e4,
    3.343_057_558_358_812_810_5e4,
    2.509_080_928_730_122_672_7e3,
];
const B: [f64; 8] = [
    1.0,
    4.231_333_070_160_091_125_2e1,
    6.871_870_074_920_579_083e2,
    5.394_196_021_424_751_107_7e3,
    2.121_379_430_158_659_586_7e4,
    3.930_789_580_009_271_061e4,
    2.872_908_573_572_194_267_4e4,
    5.226_495_278_852_854_561e3,
];
const C: [f64; 8] = [
    1.423_437_110_749_683_577_34,
    4.630_337_846_156_545_295_9,
    5.769_497_221_460_691_405_5,
    3.647_848_324_763_204_605_04,
    1.270_458_252_452_368_382_58,
    2.417_807_251_774_506_117_7e-1,
    2.272_384_498_926_918_458_33e-2,
    7.745_450_142_783_414_076_4e-4,
];
const D: [f64; 8] = [
    1.0,
    2.053_191_626_637_758_821_87,
    1.676_384_830_183_803_849_4,
    6.897_673_349_851_000_045_5e-1,
    1.481_039_764_274_800_745_9e-1,
    1.519_866_656_361_645_719_66e-2,
    5.475_938_084_995_344_946e-4,
    1.050_750_071_644_416_843_24e-9,
];
const E: [f64; 8] = [
    6.657_904_643_501_103_777_2,
    5.463_784_911_164_114_369_9,
    1.784_826_539_917_291_335_8,
    2.965_605_718_285_048_912_3e-1,
    2.653_218_952_657_612_309_3e-2,
    1.242_660_947_388_078_438_6e-3,
    2.711_555_568_743_487_578_15e-5,
    2.010_334_399_292_288_132_65e-7,
];
const F: [f64; 8] = [
    1.0,
    5.998_322_065_558_879_376_9e-1,
    1.369_298_809_227_358_053_1e-1,
    1.487_536_129_085_061_485_25e-2,
    7.868_691_311_456_132_591e-4,
    1.846_318_317_510_054_681_8e-5,
    1.421_511_758_316_445_888_7e-7,
    2.044_263_103_389_939_785_64e-15,
];

#[inline]
fn poly(c: &[f64; 8], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
}

/// Standard normal quantile for `0 < p < 1`; `p ∈ {0, 1}` is a domain error.
pub fn norm_inv(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain { what: format!("quantile argument {p} outside (0, 1)") });
    }
    Ok(norm_inv_unchecked(p))
}

/// Quantile without the domain check; the caller guarantees `0 < p < 1`.
#[inline]
pub(crate) fn norm_inv_unchecked(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= SPLIT1 {
        let r = CONST1 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let x = if r <= SPLIT2 {
        let r = r - CONST2;
        poly(&C, r) / poly(&D, r)
    } else {
        let r = r - SPLIT2;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

/// Bivariate standard normal density with correlation `rho`.
pub fn bvn_pdf(x: f64, y: f64, rho: f64) -> Result<f64> {
    if !(rho.abs() < 1.0) {
        return Err(Error::CorrelationOutOfRange { rho });
    }
    let om = (1.0 - rho) * (1.0 + rho);
    let q = (x * x - 2.0 * rho * x * y + y * y) / om;
    Ok((-0.5 * q).exp() / (2.0 * PI * om.sqrt()))
}

/// Gauss–Legendre nodes and weights on (−1, 1), nodes ascending.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // Chebyshev-like initial guess, refined by Newton iterations.
        let mut x = -(PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((x, w));
    }
    out
}

fn bvn_rule(abs_rho: f64) -> &'static [(f64, f64)] {
    static RULES: OnceLock<[Vec<(f64, f64)>; 3]> = OnceLock::new();
    let rules = RULES.get_or_init(|| {
        // Only the negative half is used; the integrands are evaluated at ±x.
        let half = |n: usize| gauss_legendre(n).into_iter().take(n / 2).collect::<Vec<_>>();
        [half(6), half(12), half(20)]
    });
    if abs_rho < 0.3 {
        &rules[0]
    } else if abs_rho < 0.75 {
        &rules[1]
    } else {
        &rules[2]
    }
}

/// `P(X > h, Y > k)` for a standard bivariate normal with correlation `r`.
///
/// Drezner–Wesolowsky with Genz's double-precision refinements; accurate to
/// about 1e-15 absolute.
pub fn bvn_upper(h: f64, k: f64, r: f64) -> f64 {
    if h == f64::INFINITY || k == f64::INFINITY {
        return 0.0;
    }
    if h == f64::NEG_INFINITY {
        return norm_cdf(-k);
    }
    if k == f64::NEG_INFINITY {
        return norm_cdf(-h);
    }
    let rule = bvn_rule(r.abs());
    let two_pi = 2.0 * PI;
    let mut k = k;
    let mut hk = h * k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        let hs = (h * h + k * k) / 2.0;
        let asr = r.asin();
        for &(x, w) in rule {
            for sgn in [1.0, -1.0] {
                let sn = (asr * (sgn * x + 1.0) / 2.0).sin();
                bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
        }
        return bvn * asr / (2.0 * two_pi) + norm_cdf(-h) * norm_cdf(-k);
    }
    if r < 0.0 {
        k = -k;
        hk = -hk;
    }
    if r.abs() < 1.0 {
        let a_s = (1.0 - r) * (1.0 + r);
        let mut a = a_s.sqrt();
        let b_s = (h - k) * (h - k);
        let c = (4.0 - hk) / 8.0;
        let d = (12.0 - hk) / 16.0;
        bvn = a
            * (-(b_s / a_s + hk) / 2.0).exp()
            * (1.0 - c * (b_s - a_s) * (1.0 - d * b_s / 5.0) / 3.0 + c * d * a_s * a_s / 5.0);
        if hk > -160.0 {
            let b = b_s.sqrt();
            bvn -= (-hk / 2.0).exp()
                * two_pi.sqrt()
                * norm_cdf(-b / a)
                * b
                * (1.0 - c * b_s * (1.0 - d * b_s / 5.0) / 3.0);
        }
        a /= 2.0;
        for &(x, w) in rule {
            let xs = (a * (x + 1.0)).powi(2);
            let rs = (1.0 - xs).sqrt();
            bvn += a
                * w
                * ((-b_s / (2.0 * xs) - hk / (1.0 + rs)).exp() / rs
                    - (-(b_s / xs + hk) / 2.0).exp() * (1.0 + c * xs * (1.0 + d * xs)));
            let xs = a_s * (1.0 - x).powi(2) / 4.0;
            let rs = (1.0 - xs).sqrt();
            bvn += a
                * w
                * (-(b_s / xs + hk) / 2.0).exp()
                * ((-hk * (1.0 - rs) / (2.0 * (1.0 + rs))).exp() / rs
                    - (1.0 + c * xs * (1.0 + d * xs)));
        }
        bvn = -bvn / two_pi;
    }
    if r > 0.0 {
        bvn + norm_cdf(-h.max(k))
    } else {
        let mut bvn = -bvn;
        if k > h {
            if h < 0.0 {
                bvn += norm_cdf(k) - norm_cdf(h);
            } else {
                bvn += norm_cdf(-h) - norm_cdf(-k);
            }
        }
        bvn
    }
}

/// `P(lower ≤ (X, Y) ≤ upper)` for a standard bivariate normal.
pub fn bvn_rect(lower: [f64; 2], upper: [f64; 2], r: f64) -> f64 {
    let p = bvn_upper(lower[0], lower[1], r) - bvn_upper(upper[0], lower[1], r)
        - bvn_upper(lower[0], upper[1], r)
        + bvn_upper(upper[0], upper[1], r);
    p.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values computed with 40-digit arithmetic.
    const CDF_REF: [(f64, f64); 7] = [
        (-8.0, 6.220_960_574_271_784_1e-16),
        (-5.0, 2.866_515_718_791_939_1e-7),
        (-2.5, 0.006_209_665_325_776_135_2),
        (-1.0, 0.158_655_253_931_457_05),
        (0.3, 0.617_911_422_188_952_63),
        (1.959963985, 0.975_000_000_026_881_56),
        (4.0, 0.999_968_328_758_166_88),
    ];

    const INV_REF: [(f64, f64); 10] = [
        (1e-300, -37.047_096_299_361_199),
        (1e-20, -9.262_340_089_798_407_6),
        (1e-10, -6.361_340_902_404_056_2),
        (0.001, -3.090_232_306_167_813_5),
        (0.02425, -1.972_961_051_311_884_9),
        (0.3, -0.524_400_512_708_040_78),
        (0.5, 0.0),
        (0.7, 0.524_400_512_708_040_78),
        (0.975, 1.959_963_984_540_054_2),
        (0.999, 3.090_232_306_167_813_5),
    ];

    const BVN_REF: [(f64, f64, f64, f64); 11] = [
        (0.0, 0.0, 0.5, 0.333_333_333_333_333_33),
        (-1.0, 0.5, 0.3, 0.283_138_420_244_480_95),
        (1.5, -0.7, -0.6, 0.019_372_920_128_727_256),
        (0.2, 0.1, 0.95, 0.388_048_645_521_993_36),
        (-0.3, 1.2, -0.95, 0.000_062_327_977_035_758_66),
        (2.0, 2.0, 0.99, 0.019_711_642_648_668_946),
        (-2.0, -1.0, -0.999, 0.818_594_614_120_363_74),
        (1.0, -1.0, -0.5, 0.096_141_159_221_793_218),
        (-1.5, -1.5, 0.8, 0.901_241_203_785_663_99),
        (3.0, -3.0, 0.1, 0.001_349_340_535_713_764_6),
        (0.5, 0.5, -0.93, 0.000_175_631_302_369_381_75),
    ];

    #[test]
    fn density_and_cdf_at_zero() {
        assert_eq!(norm_cdf(0.0), 0.5);
        assert!((phi(0.0) - 0.398_942_280_401_432_7).abs() < 1e-16);
    }

    #[test]
    fn cdf_matches_reference() {
        for (x, want) in CDF_REF {
            let got = norm_cdf(x);
            assert!(((got - want) / want).abs() < 1e-14, "Phi({x}) = {got}, want {want}");
        }
        assert!((norm_cdf(1.959963985) - 0.975).abs() < 1e-9);
    }

    #[test]
    fn cdf_tails_absolute() {
        for i in 0..=160 {
            let x = -8.0 + 0.1 * i as f64;
            assert!((norm_cdf(x) + norm_cdf(-x) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn quantile_matches_reference() {
        for (p, want) in INV_REF {
            let got = norm_inv(p).unwrap();
            assert!((got - want).abs() <= 1e-14 * want.abs().max(1.0), "inv({p}) = {got}");
        }
    }

    #[test]
    fn quantile_domain() {
        assert!(norm_inv(0.0).is_err());
        assert!(norm_inv(1.0).is_err());
        assert!(norm_inv(f64::NAN).is_err());
    }

    #[test]
    fn quantile_roundtrip() {
        // Above about x = 5 the spacing of doubles near 1 dominates, so the
        // positive side goes through the complement.
        for i in 0..=1200 {
            let x = -6.0 + 0.01 * i as f64;
            let back = if x <= 0.0 {
                norm_inv(norm_cdf(x)).unwrap()
            } else {
                -norm_inv(norm_cdf(-x)).unwrap()
            };
            assert!((back - x).abs() < 1e-9, "x = {x}, back = {back}");
        }
    }

    #[test]
    fn bvn_density() {
        assert!((bvn_pdf(0.0, 0.0, 0.0).unwrap() - 0.159_154_943_091_895_34).abs() < 1e-15);
        let want = 1.0 / (2.0 * PI * 0.75f64.sqrt());
        assert!((bvn_pdf(0.0, 0.0, 0.5).unwrap() - want).abs() < 1e-15);
        assert!((want - 0.183_776_298).abs() < 1e-8);
        assert!(matches!(bvn_pdf(0.0, 0.0, 1.0), Err(Error::CorrelationOutOfRange { .. })));
    }

    #[test]
    fn bvn_upper_matches_reference() {
        for (h, k, r, want) in BVN_REF {
            let got = bvn_upper(h, k, r);
            assert!((got - want).abs() < 1e-14, "bvn_upper({h},{k},{r}) = {got}, want {want}");
        }
    }

    #[test]
    fn bvn_upper_infinite_limits() {
        assert_eq!(bvn_upper(f64::INFINITY, 0.0, 0.3), 0.0);
        assert_eq!(bvn_upper(f64::NEG_INFINITY, 0.0, 0.3), 0.5);
        assert!((bvn_rect([f64::NEG_INFINITY; 2], [f64::INFINITY; 2], 0.7) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let rule = gauss_legendre(10);
        let s: f64 = rule.iter().map(|(x, w)| w * x.powi(18)).sum();
        assert!((s - 2.0 / 19.0).abs() < 1e-15);
        let total: f64 = rule.iter().map(|(_, w)| w).sum();
        assert!((total - 2.0).abs() < 1e-14);
    }
}
