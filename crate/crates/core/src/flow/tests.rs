use super::*;
use crate::family::ExponentialFamily;
use nalgebra::dvector;
use proptest::prelude::*;

fn bernoulli_exact(a0: f64, tau: f64) -> f64 {
    (a0.sqrt().asin() + 0.5 * tau).sin().powi(2)
}

#[test]
fn velocity_examples() {
    let b = ExponentialFamily::bernoulli();
    let v = velocity_field(&b, &dvector![0.25]).unwrap()[0];
    assert!((v - 0.1875f64.sqrt()).abs() < 1e-12);
    assert!((v - 0.43301).abs() < 1e-5);
    let w = velocity_field(&b, &dvector![0.75]).unwrap()[0];
    assert!((v + w).abs() < 1e-12);
    let g = ExponentialFamily::gaussian_mean(1).unwrap();
    assert!((velocity_field(&g, &dvector![-2.0]).unwrap()[0] - 1.0).abs() < 1e-12);
    let err = velocity_field(&b, &dvector![0.5]).unwrap_err();
    assert!(matches!(err, Error::AtEquilibrium { .. }));
}

#[test]
fn bernoulli_relaxation_reaches_the_maximum_at_pi_over_six() {
    let b = ExponentialFamily::bernoulli();
    let traj = integrate(&b, &dvector![0.25], &IntegratorOptions::new(2.0)).unwrap();
    assert_eq!(traj.status, TerminalStatus::EquilibriumReached);
    let last = traj.terminal();
    assert!((last.a[0] - 0.5).abs() < 1e-4, "{}", last.a[0]);
    assert!((last.tau - std::f64::consts::FRAC_PI_6).abs() < 1e-3, "{}", last.tau);
    for s in &traj.samples {
        let exact = bernoulli_exact(0.25, s.tau.min(std::f64::consts::FRAC_PI_6));
        assert!((s.a[0] - exact).abs() < 1e-6, "tau {}: {} vs {exact}", s.tau, s.a[0]);
    }
}

#[test]
fn gaussian_relaxation_is_a_straight_unit_speed_line() {
    let g = ExponentialFamily::gaussian_mean(1).unwrap();
    let traj = integrate(&g, &dvector![-2.0], &IntegratorOptions::new(3.0)).unwrap();
    assert_eq!(traj.status, TerminalStatus::EquilibriumReached);
    let last = traj.terminal();
    assert!(last.a[0].abs() < 1e-6, "{}", last.a[0]);
    assert!((last.tau - 2.0).abs() < 1e-6, "{}", last.tau);
}

#[test]
fn starting_at_equilibrium_is_an_error() {
    let b = ExponentialFamily::bernoulli();
    let err = integrate(&b, &dvector![0.5], &IntegratorOptions::new(1.0)).unwrap_err();
    assert!(matches!(err, Error::AtEquilibrium { .. }), "{err:?}");
}

#[test]
fn budget_exhaustion_lands_on_tau_max() {
    let b = ExponentialFamily::bernoulli();
    let traj = integrate(&b, &dvector![0.25], &IntegratorOptions::new(0.2345)).unwrap();
    assert_eq!(traj.status, TerminalStatus::TauBudgetExhausted);
    let last = traj.terminal();
    assert_eq!(last.tau, 0.2345);
    assert!((last.a[0] - bernoulli_exact(0.25, 0.2345)).abs() < 1e-10);

    // A budget that ends inside the final approach.
    let tau_max = std::f64::consts::FRAC_PI_6 - 1e-3;
    let traj = integrate(&b, &dvector![0.25], &IntegratorOptions::new(tau_max)).unwrap();
    assert_eq!(traj.status, TerminalStatus::TauBudgetExhausted);
    assert_eq!(traj.terminal().tau, tau_max);
    assert!((traj.terminal().a[0] - bernoulli_exact(0.25, tau_max)).abs() < 1e-8);
}

#[test]
fn record_every_keeps_first_and_last() {
    let b = ExponentialFamily::bernoulli();
    let full = integrate(&b, &dvector![0.25], &IntegratorOptions::new(2.0)).unwrap();
    let mut opts = IntegratorOptions::new(2.0);
    opts.record_every = 7;
    let sparse = integrate(&b, &dvector![0.25], &opts).unwrap();
    assert!(sparse.len() < full.len() / 5);
    assert_eq!(sparse.samples[0].tau, 0.0);
    assert_eq!(sparse.terminal().tau, full.terminal().tau);
    assert_eq!(sparse.terminal().a, full.terminal().a);
}

#[test]
fn invalid_options_are_listed() {
    let opts = IntegratorOptions { h: 0.0, tau_max: -1.0, sigma_eq: f64::NAN, record_every: 0 };
    match opts.validate().unwrap_err() {
        Error::Validation(list) => assert_eq!(list.len(), 4),
        other => panic!("{other:?}"),
    }
}

#[test]
fn fourth_order_convergence() {
    let b = ExponentialFamily::bernoulli();
    let tau_max = 0.4;
    let exact = bernoulli_exact(0.25, tau_max);
    let errors: Vec<f64> = [4e-3, 2e-3, 1e-3]
        .iter()
        .map(|&h| {
            let traj = integrate(&b, &dvector![0.25], &IntegratorOptions::new(tau_max).with_step(h)).unwrap();
            (traj.terminal().a[0] - exact).abs()
        })
        .collect();
    let order = (errors[0] / errors[2]).log2() / 2.0;
    assert!(order >= 3.5, "errors {errors:?}, order {order}");
}

#[test]
fn entropy_production_examples() {
    let b = ExponentialFamily::bernoulli();
    let traj = integrate(&b, &dvector![0.25], &IntegratorOptions::new(2.0)).unwrap();
    assert!(entropy_production_check(&traj).unwrap().max_residual <= 1e-4);

    let g = ExponentialFamily::gaussian_mean(1).unwrap();
    let traj = integrate(&g, &dvector![-2.0], &IntegratorOptions::new(3.0)).unwrap();
    for s in &traj.samples {
        assert!((s.sigma - s.a[0].abs()).abs() < 1e-12);
    }
    let report = entropy_production_check(&traj).unwrap();
    assert!(report.max_residual <= 1e-6, "{report:?}");

    let single = Trajectory { samples: traj.samples[..1].to_vec(), status: TerminalStatus::TauBudgetExhausted };
    assert!(matches!(entropy_production_check(&single), Err(Error::TooFewSamples { got: 1, .. })));
}

#[test]
fn clock_inversion() {
    let b = ExponentialFamily::bernoulli();
    let traj = integrate(&b, &dvector![0.25], &IntegratorOptions::new(2.0)).unwrap();
    let tau = clock_invert(&traj, 0, 0.4).unwrap();
    let exact = 2.0 * (0.4f64.sqrt().asin() - 0.25f64.sqrt().asin());
    assert!((tau - exact).abs() < 1e-6, "{tau} vs {exact}");
    assert!(matches!(clock_invert(&traj, 0, 0.9), Err(Error::Domain(_))));
    assert!(matches!(clock_invert(&traj, 1, 0.4), Err(Error::Dimension { .. })));
}

#[test]
fn csv_has_header_and_full_precision() {
    let b = ExponentialFamily::bernoulli();
    let traj = integrate(&b, &dvector![0.25], &IntegratorOptions::new(0.01)).unwrap();
    let mut out = Vec::new();
    traj.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "tau,A_1,lambda_1,S,sigma,speed");
    let first: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(first[1], 0.25);
    assert_eq!(first[2], traj.samples[0].lambda[0]);
    assert_eq!(first[5], traj.samples[0].speed);
    assert_eq!(text.lines().count(), traj.len() + 1);
    assert_eq!(fmt_num(0.1).parse::<f64>().unwrap(), 0.1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bernoulli_flow_invariants(a0 in 0.02f64..0.98) {
        prop_assume!((a0 - 0.5).abs() > 1e-3);
        let b = ExponentialFamily::bernoulli();
        let traj = integrate(&b, &dvector![a0], &IntegratorOptions::new(4.0)).unwrap();
        prop_assert_eq!(&traj.status, &TerminalStatus::EquilibriumReached);
        for w in traj.samples.windows(2) {
            prop_assert!(w[1].entropy >= w[0].entropy - MONOTONICITY_SLACK);
            prop_assert!(w[1].tau > w[0].tau);
        }
        for s in &traj.samples[..traj.len() - 1] {
            prop_assert!((s.speed - 1.0).abs() <= 1e-6);
        }
        let arclength = 2.0 * (0.5f64.sqrt().asin() - a0.sqrt().asin()).abs();
        prop_assert!((traj.terminal().tau - arclength).abs() < 1e-3);
    }
}
