//! Independent oracles shared by the integration tests: adaptive
//! Gauss–Kronrod quadrature and a seeded generator of random problems.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use tmvn_core::{QmcConfig, SymMatrix, TruncatedMvnSpec};

pub const INF: f64 = f64::INFINITY;

// Kronrod 15-point nodes/weights and the embedded 7-point Gauss weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> Vec<f64>>(f: &mut F, a: f64, b: f64, m: usize) -> (Vec<f64>, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut k = vec![0.0; m];
    let mut g = vec![0.0; m];
    let fc = f(c);
    for t in 0..m {
        k[t] += WGK[7] * fc[t];
        g[t] += WG[3] * fc[t];
    }
    for j in 0..7 {
        let f1 = f(c - h * XGK[j]);
        let f2 = f(c + h * XGK[j]);
        for t in 0..m {
            k[t] += WGK[j] * (f1[t] + f2[t]);
            if j % 2 == 1 {
                g[t] += WG[j / 2] * (f1[t] + f2[t]);
            }
        }
    }
    let err = k.iter().zip(&g).map(|(x, y)| (x - y).abs() * h).fold(0.0, f64::max);
    (k.into_iter().map(|v| v * h).collect(), err)
}

/// Adaptive vector-valued integral of `f` over `[a, b]` (finite), global
/// bisection of the worst interval until the summed error is below `tol`.
pub fn integrate_vec<F: FnMut(f64) -> Vec<f64>>(mut f: F, a: f64, b: f64, m: usize, tol: f64) -> Vec<f64> {
    let mut parts = vec![(a, b, gk15(&mut f, a, b, m))];
    for _ in 0..2000 {
        let total: f64 = parts.iter().map(|p| p.2 .1).sum();
        if total <= tol {
            break;
        }
        let (idx, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2 .1.partial_cmp(&y.1 .2 .1).unwrap())
            .unwrap();
        let (lo, hi, _) = parts.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        parts.push((lo, mid, gk15(&mut f, lo, mid, m)));
        parts.push((mid, hi, gk15(&mut f, mid, hi, m)));
    }
    let mut out = vec![0.0; m];
    for p in &parts {
        for t in 0..m {
            out[t] += p.2 .0[t];
        }
    }
    out
}

pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> f64 {
    integrate_vec(|x| vec![f(x)], a, b, 1, tol)[0]
}

/// Replaces infinite bounds by `centre ± width·sd`.
pub fn finite_range(lo: f64, hi: f64, centre: f64, sd: f64, width: f64) -> (f64, f64) {
    (lo.max(centre - width * sd), hi.min(centre + width * sd))
}

pub fn std_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

pub fn std_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Untruncated moments oracle for d = 2 by nested quadrature:
/// returns `(α, mean, cov)` of the truncated law.
pub fn quad_moments_2d(spec: &TruncatedMvnSpec) -> (f64, [f64; 2], [[f64; 2]; 2]) {
    let mu = spec.mean();
    let c = spec.cov();
    let (s1, s2) = (c.get(0, 0).sqrt(), c.get(1, 1).sqrt());
    let rho = c.get(0, 1) / (s1 * s2);
    let om = 1.0 - rho * rho;
    let (a, b) = (spec.lower(), spec.upper());
    let (x0, x1) = finite_range(a[0], b[0], mu[0], s1, 12.0);
    let (y0, y1) = finite_range(a[1], b[1], mu[1], s2, 12.0);
    let norm = 1.0 / (2.0 * std::f64::consts::PI * s1 * s2 * om.sqrt());
    let v = integrate_vec(
        |x| {
            let zx = (x - mu[0]) / s1;
            integrate_vec(
                |y| {
                    let zy = (y - mu[1]) / s2;
                    let p = norm * (-(zx * zx - 2.0 * rho * zx * zy + zy * zy) / (2.0 * om)).exp();
                    vec![p, p * x, p * y, p * x * x, p * x * y, p * y * y]
                },
                y0,
                y1,
                6,
                1e-14,
            )
        },
        x0,
        x1,
        6,
        1e-13,
    );
    let alpha = v[0];
    let m = [v[1] / alpha, v[2] / alpha];
    let cov = [
        [v[3] / alpha - m[0] * m[0], v[4] / alpha - m[0] * m[1]],
        [v[4] / alpha - m[0] * m[1], v[5] / alpha - m[1] * m[1]],
    ];
    (alpha, m, cov)
}

/// Seeded generator for random problems.
pub struct SpecGen {
    pub rng: ChaCha8Rng,
}

impl SpecGen {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Random correlation matrix from a Gaussian factor plus a ridge.
    pub fn corr(&mut self, d: usize, ridge: f64) -> SymMatrix {
        let a: Vec<Vec<f64>> =
            (0..d).map(|_| (0..d).map(|_| self.rng.sample(StandardNormal)).collect()).collect();
        let mut s = vec![vec![0.0; d]; d];
        for i in 0..d {
            for j in 0..d {
                s[i][j] = (0..d).map(|k| a[i][k] * a[j][k]).sum::<f64>() + if i == j { ridge } else { 0.0 };
            }
        }
        let inv: Vec<f64> = (0..d).map(|i| 1.0 / s[i][i].sqrt()).collect();
        let rows: Vec<Vec<f64>> =
            (0..d).map(|i| (0..d).map(|j| s[i][j] * inv[i] * inv[j]).collect()).collect();
        SymMatrix::from_rows(&rows).unwrap()
    }

    pub fn cov(&mut self, d: usize) -> SymMatrix {
        let r = self.corr(d, d as f64 * 0.5);
        let sd: Vec<f64> = (0..d).map(|_| self.rng.random_range(0.5..2.0)).collect();
        r.scaled(&sd)
    }

    /// Box side for one coordinate, in sd units around the mean. `kind`
    /// chooses double, lower-only, upper-only, or unbounded.
    fn side(&mut self, mu: f64, sd: f64, allow_free: bool) -> (f64, f64) {
        let kinds = if allow_free { 4 } else { 3 };
        let lo = mu + sd * self.rng.random_range(-2.0..0.5);
        let hi = lo + sd * self.rng.random_range(0.5..3.0);
        match self.rng.random_range(0..kinds) {
            0 => (lo, hi),
            1 => (lo, INF),
            2 => (-INF, hi),
            _ => (-INF, INF),
        }
    }

    /// Random spec of order `d` with `α ≥ min_alpha`.
    pub fn spec(&mut self, d: usize, min_alpha: f64, allow_free: bool) -> TruncatedMvnSpec {
        loop {
            let cov = self.cov(d);
            let mean: Vec<f64> = (0..d).map(|_| self.rng.random_range(-1.0..1.0)).collect();
            let (mut lo, mut hi) = (vec![0.0; d], vec![0.0; d]);
            for i in 0..d {
                let (l, h) = self.side(mean[i], cov.get(i, i).sqrt(), allow_free);
                lo[i] = l;
                hi[i] = h;
            }
            let spec = TruncatedMvnSpec::new(mean, cov, lo, hi).unwrap();
            if spec.alpha(&QmcConfig::default()).unwrap().value >= min_alpha {
                return spec;
            }
        }
    }

    /// d = 2 problem with `|ρ| ≤ max_rho` and `α ≥ min_alpha`.
    pub fn spec2(&mut self, max_rho: f64, min_alpha: f64) -> TruncatedMvnSpec {
        loop {
            let rho = self.rng.random_range(-max_rho..max_rho);
            let sd = [self.rng.random_range(0.5..2.0), self.rng.random_range(0.5..2.0)];
            let cov = SymMatrix::from_rows(&[
                vec![sd[0] * sd[0], rho * sd[0] * sd[1]],
                vec![rho * sd[0] * sd[1], sd[1] * sd[1]],
            ])
            .unwrap();
            let mean = vec![self.rng.random_range(-1.0..1.0), self.rng.random_range(-1.0..1.0)];
            let s0 = self.side(mean[0], sd[0], false);
            let s1 = self.side(mean[1], sd[1], true);
            let spec = TruncatedMvnSpec::new(mean, cov, vec![s0.0, s1.0], vec![s0.1, s1.1]).unwrap();
            if spec.alpha(&QmcConfig::default()).unwrap().value >= min_alpha {
                return spec;
            }
        }
    }

    pub fn permutation(&mut self, d: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..d).collect();
        for i in (1..d).rev() {
            let j = self.rng.random_range(0..=i);
            p.swap(i, j);
        }
        p
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn flat(m: &SymMatrix) -> Vec<f64> {
    m.to_rows().into_iter().flatten().collect()
}

pub fn example1() -> TruncatedMvnSpec {
    TruncatedMvnSpec::new(
        vec![0.5, 0.5],
        SymMatrix::from_rows(&[vec![1.0, 1.2], vec![1.2, 2.0]]).unwrap(),
        vec![-1.0, -INF],
        vec![0.5, 1.0],
    )
    .unwrap()
}

pub fn example2() -> TruncatedMvnSpec {
    TruncatedMvnSpec::new(
        vec![0.0; 3],
        SymMatrix::from_rows(&[
            vec![1.1, 1.2, 0.0],
            vec![1.2, 2.0, -0.8],
            vec![0.0, -0.8, 3.0],
        ])
        .unwrap(),
        vec![-1.0, -INF, -INF],
        vec![0.5, INF, INF],
    )
    .unwrap()
}

pub fn example3_omega() -> SymMatrix {
    SymMatrix::from_rows(&[
        vec![1.0, 0.2, 0.3, 0.0, 0.0],
        vec![0.2, 1.0, -0.1, 0.0, 0.0],
        vec![0.3, -0.1, 1.0, 0.4, 0.5],
        vec![0.0, 0.0, 0.4, 1.0, 0.2],
        vec![0.0, 0.0, 0.5, 0.2, 1.0],
    ])
    .unwrap()
}

pub fn example3_box() -> (Vec<f64>, Vec<f64>) {
    (vec![-2.0, -1.0, 0.0, -INF, -INF], vec![1.0, 1.0, 1.0, INF, INF])
}
