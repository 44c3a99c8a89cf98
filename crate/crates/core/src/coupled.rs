//! Two subsystems exchanging conserved quantities.
//!
//! The partner state is eliminated by substitution, `A' = A_T - A`, so the
//! composite is a manifold over the first subsystem's coordinates with
//! entropy `S(A) + S'(A_T - A)`, gradient `lambda - lambda'` and metric
//! `g(A) + g'(A_T - A)`.

use std::io::Write;

use nalgebra::DVector;

use crate::duality::{StateManifold, StatePoint};
use crate::error::{check_dim, Error, Result};
use crate::family::ExponentialFamily;
use crate::flow::{self, fmt_num, IntegratorOptions, Trajectory};
use crate::geometry::MetricTensor;

#[derive(Debug, Clone)]
pub struct CompositeSystem {
    first: ExponentialFamily,
    second: ExponentialFamily,
    total: DVector<f64>,
}

impl CompositeSystem {
    /// Statistics are paired by position and must carry the same names.
    pub fn new(first: ExponentialFamily, second: ExponentialFamily, total: DVector<f64>) -> Result<Self> {
        check_dim(first.dim(), second.dim())?;
        check_dim(first.dim(), total.len())?;
        if first.statistic_names() != second.statistic_names() {
            return Err(Error::InvalidFamily(format!(
                "subsystem statistics do not pair up: {:?} vs {:?}",
                first.statistic_names(),
                second.statistic_names()
            )));
        }
        if total.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidFamily("conserved totals must be finite".into()));
        }
        Ok(Self { first, second, total })
    }

    pub fn first(&self) -> &ExponentialFamily {
        &self.first
    }

    pub fn second(&self) -> &ExponentialFamily {
        &self.second
    }

    pub fn total(&self) -> &DVector<f64> {
        &self.total
    }

    /// `A' = A_T - A`.
    pub fn partner(&self, a: &DVector<f64>) -> DVector<f64> {
        &self.total - a
    }
}

impl StateManifold for CompositeSystem {
    fn dim(&self) -> usize {
        self.first.dim()
    }

    fn state(&self, a: &DVector<f64>, near: Option<&StatePoint>) -> Result<StatePoint> {
        check_dim(self.dim(), a.len())?;
        let warm = |i: usize| near.and_then(|p| p.natural.get(i));
        let own = self.first.state_warm(a, warm(0))?;
        let other = self.second.state_warm(&self.partner(a), warm(1))?;
        let g = own.metric.matrix() + other.metric.matrix();
        Ok(StatePoint {
            a: a.clone(),
            lambda: &own.lambda - &other.lambda,
            entropy: own.entropy + other.entropy,
            metric: MetricTensor::new(g)?,
            natural: vec![own.lambda, other.lambda],
        })
    }

    fn entropy_at(&self, a: &DVector<f64>) -> Result<f64> {
        composite_entropy(self, a)
    }

    fn describe(&self) -> String {
        format!("coupled({}, {})", self.first.describe(), self.second.describe())
    }
}

/// `S(A) + S'(A_T - A)`.
pub fn composite_entropy(cs: &CompositeSystem, a: &DVector<f64>) -> Result<f64> {
    check_dim(cs.dim(), a.len())?;
    Ok(cs.first.entropy_at(a)? + cs.second.entropy_at(&cs.partner(a))?)
}

pub fn composite_metric(cs: &CompositeSystem, a: &DVector<f64>) -> Result<MetricTensor> {
    Ok(cs.state(a, None)?.metric)
}

/// `g^-1 (lambda - lambda') / sigma_T` with the composite metric.
pub fn coupled_velocity(cs: &CompositeSystem, a: &DVector<f64>) -> Result<DVector<f64>> {
    flow::velocity_field(cs, a)
}

#[derive(Debug, Clone)]
pub struct CoupledSample {
    pub tau: f64,
    pub a: DVector<f64>,
    pub a_prime: DVector<f64>,
    pub lambda: DVector<f64>,
    pub lambda_prime: DVector<f64>,
    pub total_entropy: f64,
    pub sigma: f64,
    pub speed: f64,
    /// `max |A + A' - A_T|`.
    pub conservation_residual: f64,
}

#[derive(Debug, Clone)]
pub struct CoupledTrajectory {
    /// The flow on the composite manifold; its `lambda` is `lambda - lambda'`.
    pub trajectory: Trajectory,
    pub samples: Vec<CoupledSample>,
}

impl CoupledTrajectory {
    pub fn from_trajectory(cs: &CompositeSystem, trajectory: Trajectory) -> Self {
        let samples = trajectory
            .samples
            .iter()
            .map(|s| {
                let a_prime = cs.partner(&s.a);
                let conservation_residual = (&s.a + &a_prime - &cs.total).amax();
                CoupledSample {
                    tau: s.tau,
                    a: s.a.clone(),
                    a_prime,
                    lambda: s.natural[0].clone(),
                    lambda_prime: s.natural[1].clone(),
                    total_entropy: s.entropy,
                    sigma: s.sigma,
                    speed: s.speed,
                    conservation_residual,
                }
            })
            .collect();
        Self { trajectory, samples }
    }

    pub fn terminal(&self) -> &CoupledSample {
        self.samples.last().expect("trajectories hold at least the initial state")
    }

    /// Writes `tau,A_*,Aprime_*,lambda_*,lambdaprime_*,S_T,sigma,conservation_residual`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let n = self.trajectory.dim();
        let mut header = vec!["tau".to_string()];
        for prefix in ["A", "Aprime", "lambda", "lambdaprime"] {
            header.extend((1..=n).map(|i| format!("{prefix}_{i}")));
        }
        header.extend(["S_T", "sigma", "conservation_residual"].map(String::from));
        writeln!(out, "{}", header.join(","))?;
        for s in &self.samples {
            let mut row = vec![fmt_num(s.tau)];
            for v in [&s.a, &s.a_prime, &s.lambda, &s.lambda_prime] {
                row.extend(v.iter().map(|x| fmt_num(*x)));
            }
            row.extend([s.total_entropy, s.sigma, s.conservation_residual].map(fmt_num));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

pub fn integrate_coupled(
    cs: &CompositeSystem,
    a0: &DVector<f64>,
    opts: &IntegratorOptions,
) -> Result<CoupledTrajectory> {
    let trajectory = flow::integrate(cs, a0, opts)?;
    Ok(CoupledTrajectory::from_trajectory(cs, trajectory))
}

#[cfg(test)]
mod tests;
