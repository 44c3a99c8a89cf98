use super::*;
use nalgebra::dvector;
use proptest::prelude::*;

fn v(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

// Composite Simpson rule on [-L, L]; independent of the closed forms.
fn simpson(f: impl Fn(f64) -> f64, half_width: f64, intervals: usize) -> f64 {
    let h = 2.0 * half_width / intervals as f64;
    let mut sum = f(-half_width) + f(half_width);
    for k in 1..intervals {
        let x = -half_width + k as f64 * h;
        sum += if k % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    sum * h / 3.0
}

fn gaussian_quadrature_moments(lambda: f64) -> (f64, f64, f64) {
    let weight = |x: f64| (-0.5 * x * x - lambda * x).exp();
    let z = simpson(weight, 40.0, 40_000);
    let m1 = simpson(|x| x * weight(x), 40.0, 40_000) / z;
    let m2 = simpson(|x| x * x * weight(x), 40.0, 40_000) / z;
    (z.ln(), m1, m2 - m1 * m1)
}

#[test]
fn bernoulli_log_partition_values() {
    let b = ExponentialFamily::bernoulli();
    assert!((b.log_partition(&dvector![0.0]).unwrap() - 2f64.ln()).abs() < 1e-15);
    // Two-term sum: 1 + e^{-ln 3}.
    let two_term = (1.0 + (-(3f64.ln())).exp()).ln();
    let got = b.log_partition(&dvector![3f64.ln()]).unwrap();
    assert!((got - two_term).abs() < 1e-15);
    assert!((got - (4.0f64 / 3.0).ln()).abs() < 1e-15);
}

#[test]
fn bernoulli_moments_and_density() {
    let b = ExponentialFamily::bernoulli();
    let l3 = dvector![3f64.ln()];
    assert!((b.mean_parameters(&dvector![0.0]).unwrap()[0] - 0.5).abs() < 1e-15);
    assert!((b.mean_parameters(&l3).unwrap()[0] - 0.25).abs() < 1e-15);
    assert!((b.covariance(&dvector![0.0]).unwrap()[(0, 0)] - 0.25).abs() < 1e-15);
    assert!((b.covariance(&l3).unwrap()[(0, 0)] - 0.1875).abs() < 1e-15);

    let one = Microstate::Label("1".into());
    let zero = Microstate::Index(0);
    assert!((b.log_density(&dvector![0.0], &one).unwrap() - 0.5f64.ln()).abs() < 1e-15);
    assert!((b.log_density(&l3, &one).unwrap() - 0.25f64.ln()).abs() < 1e-15);
    assert!((b.log_density(&l3, &zero).unwrap() - 0.75f64.ln()).abs() < 1e-15);
}

#[test]
fn bernoulli_closed_form_matches_table() {
    let b = ExponentialFamily::bernoulli();
    let t = b.tabulated_view().unwrap();
    assert!(t.closed_form().is_none());
    for &l in &[-30.0, -3.0, -0.2, 0.0, 0.7, 5.0, 40.0] {
        let lam = dvector![l];
        let (mc, mt) = (b.moments(&lam).unwrap(), t.moments(&lam).unwrap());
        assert!(rel(mc.log_partition, mt.log_partition) < 1e-10, "logZ at {l}");
        assert!(rel(mc.mean[0], mt.mean[0]) < 1e-10, "mean at {l}");
        assert!(rel(mc.covariance[(0, 0)], mt.covariance[(0, 0)]) < 1e-10, "cov at {l}");
    }
}

#[test]
fn gaussian_mean_against_quadrature() {
    let g = ExponentialFamily::gaussian_mean(1).unwrap();
    let half_log_two_pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
    assert!((g.log_partition(&dvector![0.0]).unwrap() - half_log_two_pi).abs() < 1e-15);
    assert!((g.mean_parameters(&dvector![2.0]).unwrap()[0] + 2.0).abs() < 1e-15);
    for &l in &[-1.5, 0.0, 2.0] {
        let (log_z, mean, var) = gaussian_quadrature_moments(l);
        let m = g.moments(&dvector![l]).unwrap();
        assert!(rel(m.log_partition, log_z) < 1e-10);
        assert!((m.mean[0] - mean).abs() < 1e-10);
        assert!((m.covariance[(0, 0)] - var).abs() < 1e-10);
        // Normalization of the closed-form density.
        let total = simpson(
            |x| g.log_density(&dvector![l], &Microstate::Point(vec![x])).unwrap().exp(),
            40.0,
            40_000,
        );
        assert!((total - 1.0).abs() < 1e-8);
    }
}

#[test]
fn ideal_gas_natural_domain() {
    let gas = ExponentialFamily::ideal_gas(2.0).unwrap();
    assert!(matches!(gas.log_partition(&dvector![0.0, 0.0]), Err(Error::Domain(_))));
    assert!(matches!(gas.log_partition(&dvector![-1.0, 0.0]), Err(Error::Domain(_))));
    let lam = dvector![0.75, 0.3];
    let m = gas.moments(&lam).unwrap();
    // Mean particle number equals log Z for the grand-canonical ideal gas.
    assert!(rel(m.mean[1], m.log_partition) < 1e-15);
    assert!(rel(m.mean[0], 1.5 * m.mean[1] / 0.75) < 1e-15);
    let e_only = ExponentialFamily::ideal_gas_energy(1.0, 1.0).unwrap();
    assert!(matches!(e_only.mean_parameters(&dvector![-0.1]), Err(Error::Domain(_))));
    assert!(rel(e_only.mean_parameters(&dvector![0.5]).unwrap()[0], 3.0) < 1e-15);
    assert!(matches!(
        gas.log_density(&lam, &Microstate::Index(0)),
        Err(Error::Unsupported(_))
    ));
}

#[test]
fn log_partition_does_not_overflow() {
    let fam = ExponentialFamily::tabulated(
        vec!["a".into(), "b".into(), "c".into()],
        vec![1.0, 2.0, 0.5],
        vec![vec![0.0], vec![1.0], vec![2.0]],
    )
    .unwrap();
    let lz = fam.log_partition(&dvector![-1000.0]).unwrap();
    assert!((lz - (2000.0 + 0.5f64.ln())).abs() < 1e-9);
    assert!(fam.mean_parameters(&dvector![1000.0]).unwrap()[0].abs() < 1e-300);
}

#[test]
fn unknown_microstates_are_rejected() {
    let b = ExponentialFamily::bernoulli();
    let lam = dvector![0.0];
    assert!(matches!(
        b.log_density(&lam, &Microstate::Label("2".into())),
        Err(Error::UnknownMicrostate(_))
    ));
    assert!(matches!(b.log_density(&lam, &Microstate::Index(2)), Err(Error::UnknownMicrostate(_))));
    let g = ExponentialFamily::gaussian_mean(2).unwrap();
    assert!(matches!(
        g.log_density(&dvector![0.0, 0.0], &Microstate::Point(vec![1.0])),
        Err(Error::UnknownMicrostate(_))
    ));
}

#[test]
fn degenerate_tables_are_rejected() {
    // Second statistic is an affine function of the first.
    let err = ExponentialFamily::tabulated(
        vec!["a".into(), "b".into(), "c".into()],
        vec![1.0; 3],
        vec![vec![0.0, 1.0], vec![1.0, 3.0], vec![2.0, 5.0]],
    )
    .unwrap_err();
    assert!(matches!(err, Error::SingularModel(_)));
    // Constant statistic.
    let err = ExponentialFamily::tabulated(
        vec!["a".into(), "b".into()],
        vec![1.0; 2],
        vec![vec![1.0], vec![1.0]],
    )
    .unwrap_err();
    assert!(matches!(err, Error::SingularModel(_)));
    let err = ExponentialFamily::tabulated(vec!["a".into(), "a".into()], vec![1.0; 2], vec![vec![0.0], vec![1.0]])
        .unwrap_err();
    assert!(matches!(err, Error::InvalidFamily(_)));
    let err = ExponentialFamily::tabulated(vec!["a".into()], vec![1.0], vec![vec![0.0]]).unwrap_err();
    assert!(matches!(err, Error::InvalidFamily(_)));
}

#[test]
fn json_documents() {
    let fam = ExponentialFamily::from_json_str(
        r#"{"points": [0, 1, "two"], "weights": [1, 2.5, 1], "stats": [[0, 1], [1, 0], [2, 2]]}"#,
    )
    .unwrap();
    assert_eq!(fam.dim(), 2);
    match fam.space() {
        MicrostateSpace::Discrete { labels, weights } => {
            assert_eq!(labels, &["0", "1", "two"]);
            assert_eq!(weights, &[1.0, 2.5, 1.0]);
        }
        _ => panic!("expected a discrete space"),
    }

    let err = ExponentialFamily::from_json_str(
        "{\"points\": [0, 1],\n \"weights\": [1, 0],\n \"stats\": [[0], [1]]}",
    )
    .unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("line 2"), "{msg}");
    assert!(msg.contains("strictly positive"), "{msg}");

    let err = ExponentialFamily::from_json_str(
        r#"{"points": [0, 1], "weights": [1, 1], "stats": [[0], [1]], "extra": 1}"#,
    )
    .unwrap_err();
    assert!(err.to_string().contains("extra"));

    let err = ExponentialFamily::from_json_str(r#"{"points": [0, 1], "weights": [1, 1], "stats": [[0], [1, 2]]}"#)
        .unwrap_err();
    assert!(matches!(err, Error::InvalidFamily(_)));
}

fn three_state() -> ExponentialFamily {
    ExponentialFamily::tabulated(
        vec!["a".into(), "b".into(), "c".into(), "d".into()],
        vec![1.0, 0.5, 2.0, 1.5],
        vec![vec![0.0, 1.0], vec![1.0, -1.0], vec![2.0, 0.5], vec![-1.0, 0.0]],
    )
    .unwrap()
}

proptest! {
    #[test]
    fn tabulated_density_normalizes(l1 in -5.0f64..5.0, l2 in -5.0f64..5.0) {
        let fam = three_state();
        let lam = v(&[l1, l2]);
        let total: f64 = (0..4)
            .map(|i| fam.log_density(&lam, &Microstate::Index(i)).unwrap().exp())
            .sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mean_is_negative_gradient_of_log_partition(l1 in -3.0f64..3.0, l2 in -3.0f64..3.0) {
        let fam = three_state();
        let lam = v(&[l1, l2]);
        let mean = fam.mean_parameters(&lam).unwrap();
        let h = 1e-5;
        for j in 0..2 {
            let mut up = lam.clone();
            let mut dn = lam.clone();
            up[j] += h;
            dn[j] -= h;
            let fd = -(fam.log_partition(&up).unwrap() - fam.log_partition(&dn).unwrap()) / (2.0 * h);
            prop_assert!((fd - mean[j]).abs() <= 1e-6 * mean[j].abs().max(1e-2));
        }
    }

    #[test]
    fn covariance_is_hessian_of_log_partition(l1 in -2.0f64..2.0, l2 in -2.0f64..2.0) {
        let fam = three_state();
        let lam = v(&[l1, l2]);
        let cov = fam.covariance(&lam).unwrap();
        prop_assert_eq!(cov.clone(), cov.transpose());
        let h = 1e-4;
        let lz = |d0: f64, d1: f64| fam.log_partition(&v(&[l1 + d0, l2 + d1])).unwrap();
        let mut hess = DMatrix::zeros(2, 2);
        for i in 0..2 {
            for j in 0..2 {
                let e = |k: usize, s: f64| if k == 0 { (s, 0.0) } else { (0.0, s) };
                let (a0, a1) = e(i, h);
                let (b0, b1) = e(j, h);
                hess[(i, j)] = (lz(a0 + b0, a1 + b1) - lz(a0 - b0, a1 - b1) - lz(-a0 + b0, -a1 + b1)
                    + lz(-a0 - b0, -a1 - b1))
                    / (4.0 * h * h);
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                prop_assert!((hess[(i, j)] - cov[(i, j)]).abs() <= 1e-5 * cov.amax());
            }
        }
    }

    #[test]
    fn ideal_gas_covariance_is_hessian(le in 0.2f64..3.0, ln in -2.0f64..2.0) {
        let gas = ExponentialFamily::ideal_gas(1.5).unwrap();
        let lam = v(&[le, ln]);
        let cov = gas.covariance(&lam).unwrap();
        let h = 1e-6;
        for j in 0..2 {
            let mut up = lam.clone();
            let mut dn = lam.clone();
            up[j] += h;
            dn[j] -= h;
            let col = -(gas.mean_parameters(&up).unwrap() - gas.mean_parameters(&dn).unwrap()) / (2.0 * h);
            for i in 0..2 {
                prop_assert!((col[i] - cov[(i, j)]).abs() <= 1e-6 * cov.amax());
            }
        }
    }
}
