//! Fisher-Rao geometry of a state manifold: metric, gradient magnitude,
//! Levi-Civita connection, covariant acceleration of the flow and the
//! field-strength tensor of the unit velocity field.

use nalgebra::{DMatrix, DVector};

use crate::duality::{StateManifold, StatePoint};
use crate::error::{check_dim, Error, Result};
use crate::flow;

/// Relative finite-difference step; actual steps are `step * (|A_i| + 1)`.
pub const DEFAULT_FD_STEP: f64 = 1e-5;
/// Below this gradient magnitude the unit velocity field is too
/// ill-conditioned to differentiate.
pub const FIELD_STRENGTH_SIGMA_FLOOR: f64 = 1e-6;

/// Symmetric positive-definite metric with its inverse and Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTensor {
    g: DMatrix<f64>,
    g_inv: DMatrix<f64>,
    chol: DMatrix<f64>,
}

fn symmetrized(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

fn check_symmetric(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::SingularModel(format!("{what} is not square")));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularModel(format!("{what} has non-finite entries")));
    }
    let asym = (m - m.transpose()).amax();
    if asym > 1e-12 * m.amax().max(f64::MIN_POSITIVE) {
        return Err(Error::SingularModel(format!("{what} is not symmetric (asymmetry {asym:e})")));
    }
    Ok(())
}

impl MetricTensor {
    pub fn new(g: DMatrix<f64>) -> Result<Self> {
        check_symmetric(&g, "metric")?;
        let g = symmetrized(g);
        let chol = g
            .clone()
            .cholesky()
            .ok_or_else(|| Error::SingularModel("metric is not positive definite".into()))?;
        let g_inv = symmetrized(chol.inverse());
        Ok(Self { chol: chol.unpack(), g, g_inv })
    }

    /// Builds the metric as the inverse of a covariance matrix, keeping the
    /// covariance itself as the exact inverse metric.
    pub fn from_inverse(g_inv: DMatrix<f64>) -> Result<Self> {
        check_symmetric(&g_inv, "inverse metric")?;
        let g_inv = symmetrized(g_inv);
        let g = symmetrized(
            g_inv
                .clone()
                .cholesky()
                .ok_or_else(|| Error::SingularModel("covariance is not positive definite".into()))?
                .inverse(),
        );
        let chol = g
            .clone()
            .cholesky()
            .ok_or_else(|| Error::SingularModel("metric is not positive definite".into()))?;
        Ok(Self { chol: chol.unpack(), g, g_inv })
    }

    /// Metric and inverse both known analytically.
    pub fn from_parts(g: DMatrix<f64>, g_inv: DMatrix<f64>) -> Result<Self> {
        check_symmetric(&g, "metric")?;
        check_symmetric(&g_inv, "inverse metric")?;
        check_dim(g.nrows(), g_inv.nrows())?;
        let g = symmetrized(g);
        let chol = g
            .clone()
            .cholesky()
            .ok_or_else(|| Error::SingularModel("metric is not positive definite".into()))?;
        Ok(Self { chol: chol.unpack(), g, g_inv: symmetrized(g_inv) })
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.g_inv
    }

    /// Lower-triangular `L` with `g = L L^T`.
    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.chol
    }

    /// `g(u, v)`.
    pub fn inner(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        (u.transpose() * &self.g * v)[0]
    }

    pub fn norm_squared(&self, v: &DVector<f64>) -> f64 {
        self.inner(v, v)
    }

    /// `w . g^-1 . w` for a one-form `w`.
    pub fn inverse_norm_squared(&self, w: &DVector<f64>) -> f64 {
        (w.transpose() * &self.g_inv * w)[0]
    }

    /// Index raising: `g^-1 w`.
    pub fn raise(&self, w: &DVector<f64>) -> DVector<f64> {
        &self.g_inv * w
    }

    /// Index lowering: `g v`.
    pub fn lower(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.g * v
    }
}

/// Christoffel symbols of the second kind, `gamma[alpha][beta][gamma]`,
/// symmetric in the two lower indices.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionCoefficients {
    dim: usize,
    values: Vec<f64>,
}

impl ConnectionCoefficients {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, upper: usize, lower1: usize, lower2: usize) -> f64 {
        self.values[(upper * self.dim + lower1) * self.dim + lower2]
    }

    /// `Gamma^alpha_{beta gamma} u^beta v^gamma`.
    pub fn contract(&self, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let n = self.dim;
        DVector::from_fn(n, |alpha, _| {
            let mut acc = 0.0;
            for beta in 0..n {
                for gamma in 0..n {
                    acc += self.get(alpha, beta, gamma) * u[beta] * v[gamma];
                }
            }
            acc
        })
    }

    /// Nested `[upper][lower1][lower2]` representation.
    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.dim)
            .map(|a| {
                (0..self.dim)
                    .map(|b| (0..self.dim).map(|c| self.get(a, b, c)).collect())
                    .collect()
            })
            .collect()
    }
}

pub fn metric<M: StateManifold + ?Sized>(manifold: &M, a: &DVector<f64>) -> Result<MetricTensor> {
    Ok(manifold.state(a, None)?.metric)
}

pub fn sigma<M: StateManifold + ?Sized>(manifold: &M, a: &DVector<f64>) -> Result<f64> {
    Ok(manifold.state(a, None)?.sigma())
}

pub(crate) fn fd_steps(a: &DVector<f64>, step: f64) -> DVector<f64> {
    a.map(|x| step * (x.abs() + 1.0))
}

fn shifted_state<M: StateManifold + ?Sized>(
    manifold: &M,
    a: &DVector<f64>,
    near: Option<&StatePoint>,
) -> Result<StatePoint> {
    manifold.state(a, near).map_err(|e| {
        if e.is_infeasible() {
            Error::StepTooLarge(format!("A = {:?}: {e}", a.as_slice()))
        } else {
            e
        }
    })
}

fn shifted_entropy<M: StateManifold + ?Sized>(manifold: &M, a: &DVector<f64>) -> Result<f64> {
    manifold.entropy_at(a).map_err(|e| {
        if e.is_infeasible() {
            Error::StepTooLarge(format!("A = {:?}: {e}", a.as_slice()))
        } else {
            e
        }
    })
}

/// Negative central finite-difference Hessian of the entropy. Independent of
/// the analytic metric; used to check it.
pub fn fd_metric_oracle<M: StateManifold + ?Sized>(
    manifold: &M,
    a: &DVector<f64>,
    step: f64,
) -> Result<DMatrix<f64>> {
    check_dim(manifold.dim(), a.len())?;
    let n = a.len();
    let h = fd_steps(a, step);
    let s = |shift: &[(usize, f64)]| -> Result<f64> {
        let mut p = a.clone();
        for &(i, d) in shift {
            p[i] += d;
        }
        shifted_entropy(manifold, &p)
    };
    let centre = manifold.entropy_at(a)?;
    let mut hess = DMatrix::zeros(n, n);
    for i in 0..n {
        hess[(i, i)] = (s(&[(i, h[i])])? - 2.0 * centre + s(&[(i, -h[i])])?) / (h[i] * h[i]);
        for j in 0..i {
            let v = (s(&[(i, h[i]), (j, h[j])])? - s(&[(i, h[i]), (j, -h[j])])?
                - s(&[(i, -h[i]), (j, h[j])])?
                + s(&[(i, -h[i]), (j, -h[j])])?)
                / (4.0 * h[i] * h[j]);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    Ok(-hess)
}

/// Fourth-order central difference `d/dt f(t)` at `t = 0`.
fn central_difference<T>(f: impl Fn(f64) -> Result<T>, h: f64) -> Result<T>
where
    T: std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let near = f(h)? - f(-h)?;
    let far = f(2.0 * h)? - f(-2.0 * h)?;
    Ok((near * 8.0 - far) * (1.0 / (12.0 * h)))
}

/// Central differences of the metric, `dg[k] = d g / d A^k`.
fn metric_derivatives<M: StateManifold + ?Sized>(
    manifold: &M,
    base: &StatePoint,
    step: f64,
) -> Result<Vec<DMatrix<f64>>> {
    let a = &base.a;
    let h = fd_steps(a, step);
    (0..a.len())
        .map(|k| {
            central_difference(
                |d| {
                    let mut p = a.clone();
                    p[k] += d;
                    Ok(shifted_state(manifold, &p, Some(base))?.metric.matrix().clone())
                },
                h[k],
            )
        })
        .collect()
}

/// Levi-Civita connection from finite differences of the exact metric.
pub fn christoffel<M: StateManifold + ?Sized>(
    manifold: &M,
    a: &DVector<f64>,
    step: f64,
) -> Result<ConnectionCoefficients> {
    check_dim(manifold.dim(), a.len())?;
    let base = manifold.state(a, None)?;
    christoffel_at(manifold, &base, step)
}

pub(crate) fn christoffel_at<M: StateManifold + ?Sized>(
    manifold: &M,
    base: &StatePoint,
    step: f64,
) -> Result<ConnectionCoefficients> {
    let n = base.a.len();
    let dg = metric_derivatives(manifold, base, step)?;
    let g_inv = base.metric.inverse();
    let mut values = vec![0.0; n * n * n];
    for beta in 0..n {
        for gamma in beta..n {
            // First kind: Gamma_{delta beta gamma}.
            let first: Vec<f64> = (0..n)
                .map(|delta| {
                    0.5 * (dg[beta][(delta, gamma)] + dg[gamma][(delta, beta)] - dg[delta][(beta, gamma)])
                })
                .collect();
            for alpha in 0..n {
                let v: f64 = (0..n).map(|delta| g_inv[(alpha, delta)] * first[delta]).sum();
                values[(alpha * n + beta) * n + gamma] = v;
                values[(alpha * n + gamma) * n + beta] = v;
            }
        }
    }
    Ok(ConnectionCoefficients { dim: n, values })
}

/// Absolute derivative `D A_dot / d tau = dA_dot/dtau + Gamma A_dot A_dot` of
/// the unit velocity field along itself. `a_dot` defaults to the flow
/// velocity at `a`.
pub fn covariant_acceleration<M: StateManifold + ?Sized>(
    manifold: &M,
    a: &DVector<f64>,
    a_dot: Option<&DVector<f64>>,
    step: f64,
) -> Result<DVector<f64>> {
    check_dim(manifold.dim(), a.len())?;
    let base = manifold.state(a, None)?;
    let velocity = match a_dot {
        Some(v) => {
            check_dim(a.len(), v.len())?;
            v.clone()
        }
        None => flow::velocity_of(&base, flow::SIGMA_MIN)?,
    };
    let eps = step * (a.amax() + 1.0);
    let field = |p: DVector<f64>| -> Result<DVector<f64>> {
        let s = shifted_state(manifold, &p, Some(&base))?;
        flow::velocity_of(&s, flow::SIGMA_MIN)
    };
    let transport = central_difference(|d| field(a + &velocity * d), eps)?;
    let gamma = christoffel_at(manifold, &base, step)?;
    Ok(transport + gamma.contract(&velocity, &velocity))
}

/// `f_{ab} = u_{a;b} - u_{b;a}` for the lowered unit velocity
/// `u = lambda / sigma`. Connection terms cancel, so `f` is the exterior
/// derivative of `u`; it is antisymmetric by construction.
pub fn field_strength<M: StateManifold + ?Sized>(
    manifold: &M,
    a: &DVector<f64>,
    step: f64,
) -> Result<DMatrix<f64>> {
    check_dim(manifold.dim(), a.len())?;
    let base = manifold.state(a, None)?;
    let sigma = base.sigma();
    if sigma < FIELD_STRENGTH_SIGMA_FLOOR {
        return Err(Error::AtEquilibrium { sigma });
    }
    let n = a.len();
    let h = fd_steps(a, step);
    let mut jac = DMatrix::zeros(n, n);
    for b in 0..n {
        let du = central_difference(
            |d| {
                let mut p = a.clone();
                p[b] += d;
                let s = shifted_state(manifold, &p, Some(&base))?;
                Ok(&s.lambda / s.sigma())
            },
            h[b],
        )?;
        jac.set_column(b, &du);
    }
    Ok(&jac - jac.transpose())
}

/// `g^{ab} f_{bc} A_dot^c`, the acceleration predicted by the field strength.
pub fn field_force<M: StateManifold + ?Sized>(
    manifold: &M,
    a: &DVector<f64>,
    step: f64,
) -> Result<DVector<f64>> {
    let base = manifold.state(a, None)?;
    let velocity = flow::velocity_of(&base, flow::SIGMA_MIN)?;
    let f = field_strength(manifold, a, step)?;
    Ok(base.metric.raise(&(f * velocity)))
}
