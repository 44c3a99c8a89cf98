//! Transport coefficients of the intrinsic dynamics.
//!
//! With an external clock rate `dtau/dt`, fluxes are `dA/dt = L lambda` with
//! `L = (dtau/dt) g^-1 / sigma`. The analytic `L` is symmetric because the
//! inverse metric is. The empirical estimate regresses finite-difference
//! fluxes on forces over a window of trajectory samples.

use nalgebra::{DMatrix, DVector};
use serde_json::json;

use crate::duality::{StateManifold, StatePoint};
use crate::error::{check_dim, Error, Result};
use crate::flow::{self, centred_derivative, Trajectory};

/// Samples per regression window when the caller does not choose one.
pub const DEFAULT_WINDOW: usize = 5;
/// Largest admissible condition number of the force matrix.
pub const CONDITION_LIMIT: f64 = 1e8;
/// Windows touching states with smaller `sigma` carry no usable force signal.
pub const FORCE_SIGMA_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct OnsagerReport {
    pub l: DMatrix<f64>,
    pub clock_rate: f64,
    pub asymmetry: f64,
    pub empirical_l: Option<DMatrix<f64>>,
    /// Sample range `[start, end)` used for the empirical fit.
    pub window: Option<(usize, usize)>,
}

impl OnsagerReport {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "L": rows(&self.l),
            "asymmetry": self.asymmetry,
            "empirical_L": self.empirical_l.as_ref().map(rows),
            "window": self.window.map(|(a, b)| vec![a, b]),
            "clock_rate": self.clock_rate,
        })
    }
}

pub(crate) fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// `max |L_ab - L_ba|`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).amax()
}

fn check_clock_rate(clock_rate: f64) -> Result<()> {
    if clock_rate.is_finite() && clock_rate > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("clock rate must be finite and > 0, got {clock_rate}")))
    }
}

/// `clock_rate * g^-1 / sigma` at an evaluated state.
pub fn transport_matrix(point: &StatePoint, clock_rate: f64) -> Result<DMatrix<f64>> {
    check_clock_rate(clock_rate)?;
    let sigma = point.sigma();
    if sigma.is_nan() || sigma < flow::SIGMA_MIN {
        return Err(Error::AtEquilibrium { sigma });
    }
    Ok(point.metric.inverse() * (clock_rate / sigma))
}

pub fn onsager_matrix<M: StateManifold + ?Sized>(
    manifold: &M,
    a: &DVector<f64>,
    clock_rate: f64,
) -> Result<OnsagerReport> {
    check_dim(manifold.dim(), a.len())?;
    let l = transport_matrix(&manifold.state(a, None)?, clock_rate)?;
    Ok(OnsagerReport {
        asymmetry: asymmetry(&l),
        l,
        clock_rate,
        empirical_l: None,
        window: None,
    })
}

/// Relative residual `|dA/dt - L lambda| / |dA/dt|` of the flux law, with
/// the flux taken from the flow field.
pub fn flux_law_residual<M: StateManifold + ?Sized>(
    manifold: &M,
    a: &DVector<f64>,
    clock_rate: f64,
) -> Result<f64> {
    let point = manifold.state(a, None)?;
    let flux = flow::velocity_of(&point, flow::SIGMA_MIN)? * clock_rate;
    let predicted = transport_matrix(&point, clock_rate)? * &point.lambda;
    Ok((&flux - predicted).norm() / flux.norm())
}

/// One flux/force observation taken from a trajectory.
#[derive(Debug, Clone)]
pub struct FluxForce {
    pub tau: f64,
    pub a: DVector<f64>,
    pub flux: DVector<f64>,
    pub force: DVector<f64>,
    pub sigma: f64,
}

fn flux_at(traj: &Trajectory, k: usize, clock_rate: f64) -> DVector<f64> {
    let s = &traj.samples;
    let t = [s[k - 1].tau, s[k].tau, s[k + 1].tau];
    DVector::from_fn(traj.dim(), |i, _| {
        clock_rate * centred_derivative(t, [s[k - 1].a[i], s[k].a[i], s[k + 1].a[i]])
    })
}

/// Observations at samples `start..start + len`; fluxes are centred
/// differences, so the window must leave one sample on either side.
pub fn flux_force_window(traj: &Trajectory, clock_rate: f64, start: usize, len: usize) -> Result<Vec<FluxForce>> {
    check_clock_rate(clock_rate)?;
    let n = traj.dim();
    if len < n + 2 {
        return Err(Error::TooFewSamples { got: len, needed: n + 2 });
    }
    if start == 0 || start + len + 1 > traj.len() {
        return Err(Error::TooFewSamples {
            got: traj.len(),
            needed: start.max(1) + len + 1,
        });
    }
    (start..start + len)
        .map(|k| {
            let s = &traj.samples[k];
            if s.sigma < FORCE_SIGMA_FLOOR {
                return Err(Error::IllConditioned(format!(
                    "sample {k} has sigma = {:e}, forces vanish near equilibrium",
                    s.sigma
                )));
            }
            Ok(FluxForce {
                tau: s.tau,
                a: s.a.clone(),
                flux: flux_at(traj, k, clock_rate),
                force: s.lambda.clone(),
                sigma: s.sigma,
            })
        })
        .collect()
}

/// Observation interpolated to the point where `sigma` first falls to `level`.
pub fn flux_force_at_sigma(traj: &Trajectory, clock_rate: f64, level: f64) -> Result<FluxForce> {
    check_clock_rate(clock_rate)?;
    let s = &traj.samples;
    let k = (1..s.len().saturating_sub(2))
        .find(|&k| s[k].sigma >= level && s[k + 1].sigma < level)
        .ok_or_else(|| {
            Error::Domain(format!("sigma never crosses {level:e} in the trajectory interior"))
        })?;
    let w = (s[k].sigma - level) / (s[k].sigma - s[k + 1].sigma);
    let lerp = |x: &DVector<f64>, y: &DVector<f64>| x + (y - x) * w;
    Ok(FluxForce {
        tau: s[k].tau + w * (s[k + 1].tau - s[k].tau),
        a: lerp(&s[k].a, &s[k + 1].a),
        flux: lerp(&flux_at(traj, k, clock_rate), &flux_at(traj, k + 1, clock_rate)),
        force: lerp(&s[k].lambda, &s[k + 1].lambda),
        sigma: level,
    })
}

/// Least-squares `L` with `flux ~ L force` over all observations.
pub fn fit_transport(observations: &[FluxForce]) -> Result<DMatrix<f64>> {
    let Some(first) = observations.first() else {
        return Err(Error::TooFewSamples { got: 0, needed: 1 });
    };
    let n = first.force.len();
    if observations.len() < n {
        return Err(Error::TooFewSamples { got: observations.len(), needed: n });
    }
    let forces = DMatrix::from_fn(observations.len(), n, |r, c| observations[r].force[c]);
    let fluxes = DMatrix::from_fn(observations.len(), n, |r, c| observations[r].flux[c]);
    let svd = forces.clone().svd(true, true);
    let (largest, smallest) = (svd.singular_values.max(), svd.singular_values.min());
    let condition = largest / smallest;
    if condition.is_nan() || condition > CONDITION_LIMIT {
        return Err(Error::IllConditioned(format!(
            "force matrix condition number {condition:e} exceeds {CONDITION_LIMIT:e}"
        )));
    }
    let lt = svd
        .solve(&fluxes, 0.0)
        .map_err(|e| Error::IllConditioned(e.to_string()))?;
    Ok(lt.transpose())
}

/// Sliding-window estimate of `L` from a single trajectory.
///
/// In expectation coordinates `d lambda / d tau = -lambda / sigma` along a
/// trajectory, so the forces keep a fixed direction and only the
/// one-dimensional case is identifiable. Multidimensional estimates pool
/// observations from several trajectories through [`fit_transport`].
pub fn empirical_onsager(traj: &Trajectory, clock_rate: f64, start: usize, len: usize) -> Result<DMatrix<f64>> {
    fit_transport(&flux_force_window(traj, clock_rate, start, len)?)
}
