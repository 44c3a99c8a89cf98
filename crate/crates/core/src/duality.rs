//! Legendre duality between expectation coordinates `A` and natural
//! coordinates `lambda`, and the entropy surface `S(A)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::family::{ClosedForm, ExponentialFamily};
use crate::geometry::MetricTensor;

/// Residual tolerance `||mean(lambda) - A||_inf` for [`solve_lambda`].
pub const SOLVE_TOLERANCE: f64 = 1e-10;
/// Newton iteration budget.
pub const MAX_NEWTON_STEPS: usize = 200;
/// Backtracking budget per Newton step.
pub const MAX_HALVINGS: usize = 50;
/// Sufficient-decrease constant of the line search.
pub const ARMIJO: f64 = 1e-4;
/// `||lambda||` beyond which the target mean is declared unattainable.
pub const DIVERGENCE_THRESHOLD: f64 = 1e8;

/// A fully evaluated point on a state manifold.
///
/// `lambda` is the entropy gradient `dS/dA` in the manifold's own
/// coordinates. For a single family these are its natural coordinates; for a
/// coupled pair they are the force differences. `natural` keeps the natural
/// coordinates of each underlying family so later solves can warm start.
#[derive(Debug, Clone)]
pub struct StatePoint {
    pub a: DVector<f64>,
    pub lambda: DVector<f64>,
    pub entropy: f64,
    pub metric: MetricTensor,
    pub natural: Vec<DVector<f64>>,
}

impl StatePoint {
    /// Magnitude of the entropy gradient, `(lambda . g^-1 . lambda)^{1/2}`.
    pub fn sigma(&self) -> f64 {
        self.metric.inverse_norm_squared(&self.lambda).max(0.0).sqrt()
    }
}

/// A Riemannian manifold of states carrying an entropy function whose
/// negative Hessian (in the expectation chart) is the metric.
pub trait StateManifold {
    fn dim(&self) -> usize;

    /// Evaluates entropy, gradient and metric at `a`. `near` is a previously
    /// evaluated nearby point used to warm start inner solves.
    fn state(&self, a: &DVector<f64>, near: Option<&StatePoint>) -> Result<StatePoint>;

    fn entropy_at(&self, a: &DVector<f64>) -> Result<f64> {
        Ok(self.state(a, None)?.entropy)
    }

    fn describe(&self) -> String;
}

impl<M: StateManifold + ?Sized> StateManifold for &M {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn state(&self, a: &DVector<f64>, near: Option<&StatePoint>) -> Result<StatePoint> {
        (**self).state(a, near)
    }

    fn entropy_at(&self, a: &DVector<f64>) -> Result<f64> {
        (**self).entropy_at(a)
    }

    fn describe(&self) -> String {
        (**self).describe()
    }
}

/// Inverts `A = -d log Z / d lambda` by damped Newton iteration on the convex
/// function `log Z(lambda) + lambda . A`.
///
/// Thermodynamic closed forms are inverted analytically.
pub fn solve_lambda(
    family: &ExponentialFamily,
    a: &DVector<f64>,
    init: Option<&DVector<f64>>,
) -> Result<DVector<f64>> {
    family.check_mean_feasible(a)?;
    if let Some(form) = family.closed_form().filter(|f| f.is_thermodynamic()) {
        return Ok(thermodynamic_surface(form, a).lambda);
    }
    let mut lambda = match init {
        Some(l) => {
            check_dim(family.dim(), l.len())?;
            l.clone()
        }
        None => DVector::zeros(family.dim()),
    };
    // A warm start outside the natural domain is replaced by the origin.
    if family.check_natural_domain(&lambda).is_err() {
        lambda = DVector::zeros(family.dim());
    }
    let objective = |log_z: f64, lambda: &DVector<f64>| log_z + lambda.dot(a);

    let mut moments = newton_moments(family, &lambda)?;
    let mut residual = &moments.mean - a;
    for iteration in 0..MAX_NEWTON_STEPS {
        let converged = residual.amax() <= SOLVE_TOLERANCE;
        let chol = moments.covariance.clone().cholesky().ok_or_else(|| {
            Error::InfeasibleMean(format!(
                "covariance lost definiteness at lambda = {:?} while solving for A = {:?}",
                lambda.as_slice(),
                a.as_slice()
            ))
        })?;
        // Gradient of the objective is A - mean; Newton direction solves C d = mean - A.
        let direction = chol.solve(&residual);
        let slope = -residual.dot(&direction);
        let f0 = objective(moments.log_partition, &lambda);

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial = &lambda + &direction * step;
            if let Ok(m) = newton_moments(family, &trial) {
                let f1 = objective(m.log_partition, &trial);
                let trial_residual = &m.mean - a;
                let sufficient = f1 <= f0 + ARMIJO * step * slope;
                // Near the optimum f is flat to rounding; fall back to the residual.
                let polishing = trial_residual.amax() < residual.amax();
                if sufficient || polishing {
                    accepted = Some((trial, m, trial_residual));
                    break;
                }
            }
            step *= 0.5;
        }

        match accepted {
            Some((trial, m, r)) => {
                let improved = r.amax() <= residual.amax();
                if converged {
                    // One polishing step past the tolerance, kept only if it helps.
                    if improved {
                        lambda = trial;
                    }
                    return Ok(lambda);
                }
                lambda = trial;
                moments = m;
                residual = r;
            }
            None if converged => return Ok(lambda),
            None => {
                return Err(Error::NoConvergence {
                    iterations: iteration + 1,
                    residual: residual.amax(),
                })
            }
        }
        if lambda.norm() > DIVERGENCE_THRESHOLD {
            return Err(Error::InfeasibleMean(format!(
                "multipliers diverged (||lambda|| > {DIVERGENCE_THRESHOLD:e}) for A = {:?}",
                a.as_slice()
            )));
        }
    }
    if residual.amax() <= SOLVE_TOLERANCE {
        return Ok(lambda);
    }
    Err(Error::NoConvergence {
        iterations: MAX_NEWTON_STEPS,
        residual: residual.amax(),
    })
}

fn newton_moments(family: &ExponentialFamily, lambda: &DVector<f64>) -> Result<crate::family::Moments> {
    family.moments_unchecked(lambda).map_err(|e| match e {
        Error::Domain(msg) => Error::InfeasibleMean(msg),
        other => other,
    })
}

/// Maximized entropy `S(A) = log Z(lambda) + lambda . A`.
pub fn entropy(family: &ExponentialFamily, a: &DVector<f64>) -> Result<f64> {
    if let Some(form) = family.closed_form().filter(|f| f.is_thermodynamic()) {
        family.check_mean_feasible(a)?;
        return Ok(thermodynamic_surface(form, a).entropy);
    }
    let lambda = solve_lambda(family, a, None)?;
    Ok(family.log_partition(&lambda)? + lambda.dot(a))
}

/// `dS/dA`, which coincides with the natural coordinates `lambda(A)`.
pub fn entropy_gradient(family: &ExponentialFamily, a: &DVector<f64>) -> Result<DVector<f64>> {
    solve_lambda(family, a, None)
}

pub(crate) struct Surface {
    pub entropy: f64,
    pub lambda: DVector<f64>,
    pub metric: DMatrix<f64>,
    pub inverse: DMatrix<f64>,
}

/// Entropy surface of the ideal-gas families with its exact first and
/// second derivatives. `a` must already be feasible.
pub(crate) fn thermodynamic_surface(form: &ClosedForm, a: &DVector<f64>) -> Surface {
    match *form {
        ClosedForm::IdealGas { volume } => {
            let (e, n) = (a[0], a[1]);
            let entropy = n * ((volume / n).ln() + 1.5 * (e / n).ln()) + 2.5 * n;
            let lambda = DVector::from_vec(vec![1.5 * n / e, (volume / n).ln() + 1.5 * (e / n).ln()]);
            let metric = DMatrix::from_row_slice(
                2,
                2,
                &[1.5 * n / (e * e), -1.5 / e, -1.5 / e, 2.5 / n],
            );
            // Covariance of (E, N) at the dual point.
            let inverse = DMatrix::from_row_slice(2, 2, &[5.0 * e * e / (3.0 * n), e, e, n]);
            Surface { entropy, lambda, metric, inverse }
        }
        ClosedForm::IdealGasEnergy { volume, particles: n } => {
            let e = a[0];
            let entropy = n * ((volume / n).ln() + 1.5 * (e / n).ln()) + 2.5 * n;
            Surface {
                entropy,
                lambda: DVector::from_element(1, 1.5 * n / e),
                metric: DMatrix::from_element(1, 1, 1.5 * n / (e * e)),
                inverse: DMatrix::from_element(1, 1, e * e / (1.5 * n)),
            }
        }
        _ => unreachable!("not a thermodynamic closed form"),
    }
}

impl ExponentialFamily {
    /// Full state at `a`, warm-starting the solve from `warm` natural coordinates.
    pub fn state_warm(&self, a: &DVector<f64>, warm: Option<&DVector<f64>>) -> Result<StatePoint> {
        check_dim(self.dim(), a.len())?;
        if let Some(form) = self.closed_form().filter(|f| f.is_thermodynamic()) {
            self.check_mean_feasible(a)?;
            let s = thermodynamic_surface(form, a);
            return Ok(StatePoint {
                a: a.clone(),
                natural: vec![s.lambda.clone()],
                lambda: s.lambda,
                entropy: s.entropy,
                metric: MetricTensor::from_parts(s.metric, s.inverse)?,
            });
        }
        let lambda = solve_lambda(self, a, warm)?;
        let moments = self.moments(&lambda)?;
        Ok(StatePoint {
            a: a.clone(),
            entropy: moments.log_partition + lambda.dot(a),
            metric: MetricTensor::from_inverse(moments.covariance)?,
            natural: vec![lambda.clone()],
            lambda,
        })
    }
}

impl StateManifold for ExponentialFamily {
    fn dim(&self) -> usize {
        ExponentialFamily::dim(self)
    }

    fn state(&self, a: &DVector<f64>, near: Option<&StatePoint>) -> Result<StatePoint> {
        self.state_warm(a, near.and_then(|p| p.natural.first()))
    }

    fn entropy_at(&self, a: &DVector<f64>) -> Result<f64> {
        entropy(self, a)
    }

    fn describe(&self) -> String {
        ExponentialFamily::describe(self)
    }
}
