mod common;

use common::*;
use tmvn_core::special::{bvn_pdf, norm_cdf};
use tmvn_core::*;

fn spec3() -> TruncatedMvnSpec {
    TruncatedMvnSpec::new(
        vec![0.3, -0.2, 0.1],
        SymMatrix::from_rows(&[
            vec![1.5, 0.6, -0.4],
            vec![0.6, 2.0, 0.7],
            vec![-0.4, 0.7, 0.8],
        ])
        .unwrap(),
        vec![-1.0, -2.0, -0.5],
        vec![1.5, 0.5, INF],
    )
    .unwrap()
}

// Bivariate marginal through first- and second-order partial coefficients
// on the standardized scale, written out by hand for d = 3.
fn recursion_route(spec: &TruncatedMvnSpec, q: usize, r: usize, x: f64, y: f64, alpha: f64) -> f64 {
    let s = 3 - q - r;
    let c = spec.cov();
    let sd = |i: usize| c.get(i, i).sqrt();
    let rho = |i: usize, j: usize| c.get(i, j) / (sd(i) * sd(j));
    let (rqr, rsq, rsr) = (rho(q, r), rho(s, q), rho(s, r));
    let beta_sq_r = (rsq - rsr * rqr) / (1.0 - rqr * rqr);
    let beta_sr_q = (rsr - rsq * rqr) / (1.0 - rqr * rqr);
    let rho_sr_q = (rsr - rsq * rqr) / ((1.0 - rsq * rsq) * (1.0 - rqr * rqr)).sqrt();
    let cq = (x - spec.mean()[q]) / sd(q);
    let cr = (y - spec.mean()[r]) / sd(r);
    let denom = ((1.0 - rsq * rsq) * (1.0 - rho_sr_q * rho_sr_q)).sqrt();
    let z = |bound: f64| {
        if bound.is_infinite() {
            bound
        } else {
            ((bound - spec.mean()[s]) / sd(s) - beta_sq_r * cq - beta_sr_q * cr) / denom
        }
    };
    let mass = norm_cdf(z(spec.upper()[s])) - norm_cdf(z(spec.lower()[s]));
    bvn_pdf(cq, cr, rqr).unwrap() * mass / alpha / (sd(q) * sd(r))
}

#[test]
fn schur_route_matches_partial_coefficient_route() {
    let cfg = QmcConfig::default();
    let spec = spec3().with_alpha(&cfg).unwrap();
    let alpha = spec.alpha(&cfg).unwrap().value;
    for (q, r) in [(0, 1), (1, 0), (0, 2), (2, 1)] {
        for (x, y) in [(0.0f64, 0.0f64), (-0.7, 0.3), (1.2, -1.5), (0.4, 0.45)] {
            let (x, y) = (
                x.clamp(spec.lower()[q], spec.upper()[q]),
                y.clamp(spec.lower()[r], spec.upper()[r]),
            );
            let got = marginal_pdf_2d(&spec, q, r, x, y, &cfg).unwrap().density;
            let want = recursion_route(&spec, q, r, x, y, alpha);
            assert!((got - want).abs() < 1e-10, "({q},{r}) at ({x},{y}): {got} vs {want}");
        }
    }
}

#[test]
fn example2_bivariate_marginal_matches_quadrature() {
    // F_{2,3}(0, 0) by integrating the joint density over x1, divided by α.
    let cfg = QmcConfig::default();
    let spec = example2();
    let alpha = spec.alpha(&cfg).unwrap().value;
    let omega = spec.cov().inverse().unwrap();
    let det = {
        let l = tmvn_core::cholesky(spec.cov()).unwrap();
        l.log_det().exp()
    };
    let norm = 1.0 / ((2.0 * std::f64::consts::PI).powi(3) * det).sqrt();
    let joint = |x1: f64| {
        let v = [x1, 0.0, 0.0];
        let q: f64 = (0..3).map(|i| (0..3).map(|j| v[i] * omega.get(i, j) * v[j]).sum::<f64>()).sum();
        norm * (-0.5 * q).exp()
    };
    let want = integrate(joint, -1.0, 0.5, 1e-14) / alpha;
    let got = marginal_pdf_2d(&spec, 1, 2, 0.0, 0.0, &cfg).unwrap().density;
    assert!((got - want).abs() < 1e-10, "{got} vs {want}");
}

#[test]
fn example1_alpha_matches_quadrature() {
    let spec = example1();
    let (alpha, _, _) = quad_moments_2d(&spec);
    let got = spec.alpha(&QmcConfig::default()).unwrap();
    assert!(got.error_estimate <= 1e-6);
    assert!((got.value - alpha).abs() < 1e-10);
}

#[test]
fn example1_sampler_means() {
    let spec = example1();
    let want = [-0.152, -0.388];
    let rej = estimate_moments(&rejection_sample(&spec, 10_000, 1).unwrap()).unwrap();
    let gib = estimate_moments(&gibbs_sample(&spec, 10_000, 1000, 1, 1).unwrap()).unwrap();
    for e in [rej, gib] {
        for i in 0..2 {
            assert!((e.mean[i] - want[i]).abs() < 4.0 * e.mean_se[i], "{:?}", e.mean);
        }
    }
    let rows = trace_export(&spec, 10_000, 100, 1, SampleMethod::Rejection).unwrap();
    assert_eq!(rows.len(), 100);
    let last = rows.last().unwrap();
    for i in 0..2 {
        assert!((last.mean[i] - want[i]).abs() < 4.0 * last.mean_half_width[i] / sampler::Z95);
    }
}

#[test]
fn example3_zeros_and_statuses() {
    let (lo, hi) = example3_box();
    let omega = example3_omega();
    let r = truncated_precision_report(&omega, None, &lo, &hi, &QmcConfig::default()).unwrap();
    assert_eq!(r.truncated_set, vec![0, 1, 2]);
    for i in 0..5 {
        for j in 0..5 {
            if omega.get(i, j) == 0.0 {
                assert_eq!(r.entry_status[i][j], EntryStatus::ZeroPreserved);
                assert!(r.omega_after.get(i, j).abs() <= 1e-4);
            }
        }
    }
    for i in 0..3 {
        assert_eq!(r.entry_status[i][i], EntryStatus::Changed);
    }
    let back = precision_matrix(&omega.inverse().unwrap()).unwrap();
    assert!(max_abs_diff(&flat(&back), &flat(&omega)) < 1e-9);
}

#[test]
fn example3_full_truncation_probe_reports_deviation() {
    // All five variables boxed; the probe only measures.
    let omega = example3_omega();
    let spec = TruncatedMvnSpec::new(
        vec![0.0; 5],
        omega.inverse().unwrap(),
        vec![-2.0, -1.0, 0.0, -1.0, -1.5],
        vec![1.0, 1.0, 1.0, 2.0, 1.0],
    )
    .unwrap();
    let p = conjecture_probe(&spec, &QmcConfig::default()).unwrap();
    assert!(p.max_deviation.is_finite() && p.max_deviation >= 0.0);
    println!("full-truncation off-diagonal deviation: {:.3e} at {:?}", p.max_deviation, p.argmax);
}
