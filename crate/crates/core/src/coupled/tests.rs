use super::*;
use crate::duality::entropy;
use nalgebra::dvector;

fn bernoulli_pair() -> CompositeSystem {
    let b = ExponentialFamily::bernoulli();
    CompositeSystem::new(b.clone(), b, dvector![1.0]).unwrap()
}

fn gas_pair() -> CompositeSystem {
    let g = ExponentialFamily::ideal_gas(1.0).unwrap();
    CompositeSystem::new(g.clone(), g, dvector![4.0, 2.0]).unwrap()
}

#[test]
fn composite_entropy_examples() {
    let cs = bernoulli_pair();
    let s = composite_entropy(&cs, &dvector![0.5]).unwrap();
    assert!((s - 2.0 * 2f64.ln()).abs() < 1e-14);

    let gas = gas_pair();
    let single = ExponentialFamily::ideal_gas(1.0).unwrap();
    let expected = entropy(&single, &dvector![1.0, 1.0]).unwrap() + entropy(&single, &dvector![3.0, 1.0]).unwrap();
    assert!((composite_entropy(&gas, &dvector![1.0, 1.0]).unwrap() - expected).abs() < 1e-13);

    assert!(composite_entropy(&cs, &dvector![1.0]).is_err());
    assert!(composite_entropy(&gas, &dvector![4.0, 1.0]).is_err());
}

#[test]
fn composite_metric_examples() {
    let cs = bernoulli_pair();
    assert!((composite_metric(&cs, &dvector![0.5]).unwrap().matrix()[(0, 0)] - 8.0).abs() < 1e-10);
    assert!((composite_metric(&cs, &dvector![0.25]).unwrap().matrix()[(0, 0)] - 32.0 / 3.0).abs() < 1e-9);
}

#[test]
fn coupled_velocity_examples() {
    let cs = bernoulli_pair();
    assert!(matches!(coupled_velocity(&cs, &dvector![0.5]), Err(Error::AtEquilibrium { .. })));
    let point = cs.state(&dvector![0.25], None).unwrap();
    assert!((point.lambda[0] - 2.0 * 3f64.ln()).abs() < 1e-10);
    assert!(coupled_velocity(&cs, &dvector![0.25]).unwrap()[0] > 0.0);

    let e = ExponentialFamily::ideal_gas_energy(1.0, 1.0).unwrap();
    let energy = CompositeSystem::new(e.clone(), e, dvector![4.0]).unwrap();
    let point = energy.state(&dvector![1.0], None).unwrap();
    assert!((point.natural[0][0] - 1.5).abs() < 1e-12);
    assert!((point.natural[1][0] - 0.5).abs() < 1e-12);
    assert!(coupled_velocity(&energy, &dvector![1.0]).unwrap()[0] > 0.0);
}

#[test]
fn mismatched_subsystems_are_rejected() {
    let b = ExponentialFamily::bernoulli();
    let g = ExponentialFamily::ideal_gas(1.0).unwrap();
    assert!(CompositeSystem::new(b.clone(), g, dvector![1.0]).is_err());
    let renamed = b.clone().with_statistic_names(vec!["y".into()]).unwrap();
    assert!(matches!(
        CompositeSystem::new(b, renamed, dvector![1.0]),
        Err(Error::InvalidFamily(_))
    ));
}

#[test]
fn bernoulli_pair_relaxes_to_the_midpoint() {
    let cs = bernoulli_pair();
    let ct = integrate_coupled(&cs, &dvector![0.25], &IntegratorOptions::new(3.0)).unwrap();
    assert_eq!(ct.trajectory.status, flow::TerminalStatus::EquilibriumReached);
    assert!((ct.terminal().a[0] - 0.5).abs() < 1e-4);
    assert!((ct.terminal().a_prime[0] - 0.5).abs() < 1e-4);
}

#[test]
fn gas_pair_conserves_and_equalizes() {
    let cs = gas_pair();
    let ct = integrate_coupled(&cs, &dvector![1.0, 0.5], &IntegratorOptions::new(10.0)).unwrap();
    assert_eq!(ct.trajectory.status, flow::TerminalStatus::EquilibriumReached);
    assert!(ct.samples.iter().all(|s| s.conservation_residual <= 1e-12));
    let last = ct.terminal();
    assert!((&last.a - dvector![2.0, 1.0]).amax() < 1e-3, "{}", last.a);
    assert!((&last.lambda - &last.lambda_prime).amax() < 1e-6);
    for w in ct.samples.windows(2) {
        assert!(w[1].total_entropy >= w[0].total_entropy - flow::MONOTONICITY_SLACK);
    }
}

#[test]
fn coupled_csv_layout() {
    let cs = gas_pair();
    let ct = integrate_coupled(&cs, &dvector![1.0, 0.5], &IntegratorOptions::new(0.05)).unwrap();
    let mut out = Vec::new();
    ct.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "tau,A_1,A_2,Aprime_1,Aprime_2,lambda_1,lambda_2,lambdaprime_1,lambdaprime_2,S_T,sigma,conservation_residual"
    );
    assert_eq!(text.lines().count(), ct.samples.len() + 1);
}
