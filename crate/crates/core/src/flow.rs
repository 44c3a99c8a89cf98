//! Unit-speed entropy-gradient flow in intrinsic time.
//!
//! The field is `A_dot = g^-1 lambda / sigma`. It has unit metric speed
//! everywhere, so the state reaches the entropy maximum after a finite
//! arclength and the direction is discontinuous there. The bulk of the
//! trajectory is integrated with classical RK4 in `tau`; once the remaining
//! arclength (which is `sigma` to leading order) drops below a few base
//! steps, the integrator switches to the smooth unnormalized field
//! `dA/ds = g^-1 lambda`, `dtau/ds = sigma`, which traces the same curve and
//! approaches the maximum exponentially in `s`.

use std::io::Write;

use nalgebra::DVector;

use crate::duality::{StateManifold, StatePoint};
use crate::error::{check_dim, Error, Result};

/// Gradient magnitude below which the flow direction is undefined.
pub const SIGMA_MIN: f64 = 1e-10;
/// Largest accepted `|g(A_dot, A_dot) - 1|` after a step.
pub const SPEED_RESIDUAL_LIMIT: f64 = 1e-8;
pub const MAX_STEP_HALVINGS: usize = 20;
/// Allowed entropy decrease per step (rounding).
pub const MONOTONICITY_SLACK: f64 = 1e-10;
/// Final approach starts once `sigma < APPROACH_SWITCH * h`.
const APPROACH_SWITCH: f64 = 4.0;
/// Step in the unnormalized parameter `s` during the final approach.
const APPROACH_STEP: f64 = 0.1;

pub(crate) fn velocity_of(point: &StatePoint, sigma_min: f64) -> Result<DVector<f64>> {
    let sigma = point.sigma();
    if sigma.is_nan() || sigma < sigma_min {
        return Err(Error::AtEquilibrium { sigma });
    }
    Ok(point.metric.raise(&point.lambda) / sigma)
}

/// Unit-speed flow direction `g^-1 lambda / sigma` at `a`.
pub fn velocity_field<M: StateManifold + ?Sized>(manifold: &M, a: &DVector<f64>) -> Result<DVector<f64>> {
    check_dim(manifold.dim(), a.len())?;
    velocity_of(&manifold.state(a, None)?, SIGMA_MIN)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorOptions {
    /// Base step in intrinsic time.
    pub h: f64,
    pub tau_max: f64,
    /// Equilibrium is declared once `sigma < sigma_eq`.
    pub sigma_eq: f64,
    /// Keep every `record_every`-th step (the first and last states are always kept).
    pub record_every: usize,
}

impl IntegratorOptions {
    pub fn new(tau_max: f64) -> Self {
        Self { h: 1e-3, tau_max, sigma_eq: 1e-8, record_every: 1 }
    }

    pub fn with_step(mut self, h: f64) -> Self {
        self.h = h;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.h.is_finite() && self.h > 0.0) {
            problems.push(format!("h must be finite and > 0, got {}", self.h));
        }
        if !(self.tau_max.is_finite() && self.tau_max > 0.0) {
            problems.push(format!("tau_max must be finite and > 0, got {}", self.tau_max));
        }
        if !(self.sigma_eq.is_finite() && self.sigma_eq > 0.0) {
            problems.push(format!("sigma_eq must be finite and > 0, got {}", self.sigma_eq));
        }
        if self.record_every == 0 {
            problems.push("record_every must be >= 1".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TerminalStatus {
    EquilibriumReached,
    TauBudgetExhausted,
    Failed(String),
}

impl TerminalStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            TerminalStatus::EquilibriumReached => "equilibrium-reached",
            TerminalStatus::TauBudgetExhausted => "tau-budget-exhausted",
            TerminalStatus::Failed(_) => "error",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Sample {
    pub tau: f64,
    pub a: DVector<f64>,
    /// Entropy gradient in the manifold's coordinates.
    pub lambda: DVector<f64>,
    pub entropy: f64,
    pub sigma: f64,
    /// `g(A_dot, A_dot)` of the flow field at the sample.
    pub speed: f64,
    pub natural: Vec<DVector<f64>>,
}

impl Sample {
    fn from_state(point: &StatePoint, tau: f64) -> Self {
        let speed = velocity_of(point, SIGMA_MIN)
            .map(|v| point.metric.norm_squared(&v))
            .unwrap_or(f64::NAN);
        Self {
            tau,
            a: point.a.clone(),
            lambda: point.lambda.clone(),
            entropy: point.entropy,
            sigma: point.sigma(),
            speed,
            natural: point.natural.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub status: TerminalStatus,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, |s| s.a.len())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn terminal(&self) -> &Sample {
        self.samples.last().expect("trajectories hold at least the initial state")
    }

    /// Linear interpolation of `A` at intrinsic time `tau`; `None` outside
    /// the recorded range.
    pub fn a_at(&self, tau: f64) -> Option<DVector<f64>> {
        let (first, last) = (self.samples.first()?, self.samples.last()?);
        if tau < first.tau || tau > last.tau {
            return None;
        }
        let k = self.samples.partition_point(|s| s.tau <= tau);
        if k >= self.samples.len() {
            return Some(last.a.clone());
        }
        let (lo, hi) = (&self.samples[k - 1], &self.samples[k]);
        let t = (tau - lo.tau) / (hi.tau - lo.tau);
        Some(&lo.a + (&hi.a - &lo.a) * t)
    }

    /// Writes `tau,A_1..A_n,lambda_1..lambda_n,S,sigma,speed`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let n = self.dim();
        let mut header = vec!["tau".to_string()];
        header.extend((1..=n).map(|i| format!("A_{i}")));
        header.extend((1..=n).map(|i| format!("lambda_{i}")));
        header.extend(["S", "sigma", "speed"].map(String::from));
        writeln!(out, "{}", header.join(","))?;
        for s in &self.samples {
            let mut row = vec![fmt_num(s.tau)];
            row.extend(s.a.iter().map(|v| fmt_num(*v)));
            row.extend(s.lambda.iter().map(|v| fmt_num(*v)));
            row.extend([s.entropy, s.sigma, s.speed].map(fmt_num));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Numbers in CSV and text output carry 17 significant digits.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Integrates the flow from `a0`. Failures after the first step are returned
/// as errors; see [`integrate_partial`] to keep the partial trajectory.
pub fn integrate<M: StateManifold + ?Sized>(
    manifold: &M,
    a0: &DVector<f64>,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    let (trajectory, failure) = run(manifold, a0, opts)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(trajectory),
    }
}

/// Like [`integrate`], but a failure mid-run ends the trajectory with
/// [`TerminalStatus::Failed`] and is returned alongside it.
pub fn integrate_partial<M: StateManifold + ?Sized>(
    manifold: &M,
    a0: &DVector<f64>,
    opts: &IntegratorOptions,
) -> Result<(Trajectory, Option<Error>)> {
    run(manifold, a0, opts)
}

fn run<M: StateManifold + ?Sized>(
    manifold: &M,
    a0: &DVector<f64>,
    opts: &IntegratorOptions,
) -> Result<(Trajectory, Option<Error>)> {
    opts.validate()?;
    check_dim(manifold.dim(), a0.len())?;
    let mut current = manifold.state(a0, None)?;
    let sigma0 = current.sigma();
    if sigma0 < opts.sigma_eq.max(SIGMA_MIN) {
        return Err(Error::AtEquilibrium { sigma: sigma0 });
    }

    let stepper = Stepper { manifold, opts };
    let mut tau = 0.0;
    let mut samples = vec![Sample::from_state(&current, tau)];
    let mut recorded_last = true;
    let mut steps = 0usize;
    let mut failure = None;
    let status = loop {
        if current.sigma() < opts.sigma_eq {
            break TerminalStatus::EquilibriumReached;
        }
        if tau >= opts.tau_max {
            break TerminalStatus::TauBudgetExhausted;
        }
        let step = if current.sigma() < APPROACH_SWITCH * opts.h {
            stepper.approach_step(&current, tau)
        } else {
            stepper.tau_step(&current, tau)
        };
        match step {
            Ok((next, next_tau)) => {
                current = next;
                tau = next_tau;
                steps += 1;
                recorded_last = steps.is_multiple_of(opts.record_every);
                if recorded_last {
                    samples.push(Sample::from_state(&current, tau));
                }
            }
            Err(e) => {
                let reason = e.to_string();
                failure = Some(e);
                break TerminalStatus::Failed(reason);
            }
        }
    };
    if !recorded_last {
        samples.push(Sample::from_state(&current, tau));
    }
    Ok((Trajectory { samples, status }, failure))
}

struct Stepper<'a, M: ?Sized> {
    manifold: &'a M,
    opts: &'a IntegratorOptions,
}

impl<M: StateManifold + ?Sized> Stepper<'_, M> {
    fn snap(&self, tau: f64) -> f64 {
        if (self.opts.tau_max - tau).abs() <= 1e-12 * self.opts.tau_max.max(1.0) {
            self.opts.tau_max
        } else {
            tau
        }
    }

    fn acceptable(&self, from: &StatePoint, to: &StatePoint) -> std::result::Result<(), String> {
        if to.entropy < from.entropy - MONOTONICITY_SLACK {
            return Err(format!("entropy decreased by {:e}", from.entropy - to.entropy));
        }
        if to.sigma() < self.opts.sigma_eq {
            return Ok(());
        }
        let v = velocity_of(to, SIGMA_MIN).map_err(|e| e.to_string())?;
        let residual = (to.metric.norm_squared(&v) - 1.0).abs();
        if residual > SPEED_RESIDUAL_LIMIT {
            return Err(format!("unit-speed residual {residual:e}"));
        }
        Ok(())
    }

    fn tau_step(&self, current: &StatePoint, tau: f64) -> Result<(StatePoint, f64)> {
        let mut h = self.opts.h.min(self.opts.tau_max - tau);
        let mut reason = String::new();
        for _ in 0..=MAX_STEP_HALVINGS {
            match self.rk4_tau(current, h) {
                Ok(next) => match self.acceptable(current, &next) {
                    Ok(()) => return Ok((next, self.snap(tau + h))),
                    Err(r) => reason = r,
                },
                Err(e) => reason = e.to_string(),
            }
            h *= 0.5;
        }
        Err(Error::StepCollapse { halvings: MAX_STEP_HALVINGS, tau, reason })
    }

    fn rk4_tau(&self, current: &StatePoint, h: f64) -> Result<StatePoint> {
        let a = &current.a;
        let eval = |p: DVector<f64>| self.manifold.state(&p, Some(current));
        let k1 = velocity_of(current, SIGMA_MIN)?;
        let s2 = eval(a + &k1 * (0.5 * h))?;
        let k2 = velocity_of(&s2, SIGMA_MIN)?;
        let s3 = eval(a + &k2 * (0.5 * h))?;
        let k3 = velocity_of(&s3, SIGMA_MIN)?;
        let s4 = eval(a + &k3 * h)?;
        let k4 = velocity_of(&s4, SIGMA_MIN)?;
        let next = a + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        self.manifold.state(&next, Some(&s4))
    }

    /// One RK4 step of size `ds` on `dA/ds = g^-1 lambda`, `dtau/ds = sigma`.
    fn rk4_s(&self, current: &StatePoint, ds: f64) -> Result<(StatePoint, f64)> {
        let a = &current.a;
        let field = |p: &StatePoint| (p.metric.raise(&p.lambda), p.sigma());
        let eval = |p: DVector<f64>| self.manifold.state(&p, Some(current));
        let (k1, t1) = field(current);
        let s2 = eval(a + &k1 * (0.5 * ds))?;
        let (k2, t2) = field(&s2);
        let s3 = eval(a + &k2 * (0.5 * ds))?;
        let (k3, t3) = field(&s3);
        let s4 = eval(a + &k3 * ds)?;
        let (k4, t4) = field(&s4);
        let next = a + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (ds / 6.0);
        let dtau = (t1 + 2.0 * t2 + 2.0 * t3 + t4) * (ds / 6.0);
        Ok((self.manifold.state(&next, Some(&s4))?, dtau))
    }

    fn approach_step(&self, current: &StatePoint, tau: f64) -> Result<(StatePoint, f64)> {
        let mut ds = APPROACH_STEP;
        let mut reason = String::new();
        for _ in 0..=MAX_STEP_HALVINGS {
            match self.rk4_s(current, ds) {
                Ok((next, dtau)) => match self.acceptable(current, &next) {
                    Ok(()) if tau + dtau <= self.opts.tau_max => return Ok((next, self.snap(tau + dtau))),
                    Ok(()) => return self.land_on_budget(current, tau, ds),
                    Err(r) => reason = r,
                },
                Err(e) => reason = e.to_string(),
            }
            ds *= 0.5;
        }
        Err(Error::StepCollapse { halvings: MAX_STEP_HALVINGS, tau, reason })
    }

    // Bisects the approach step so the trajectory ends exactly at tau_max.
    fn land_on_budget(&self, current: &StatePoint, tau: f64, ds_over: f64) -> Result<(StatePoint, f64)> {
        let target = self.opts.tau_max - tau;
        let (mut lo, mut hi) = (0.0, ds_over);
        let mut best = None;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            let (next, dtau) = self.rk4_s(current, mid)?;
            if dtau <= target {
                lo = mid;
            } else {
                hi = mid;
            }
            let close = (dtau - target).abs() <= 1e-13 * self.opts.tau_max.max(1.0);
            best = Some(next);
            if close {
                break;
            }
        }
        Ok((best.expect("at least one bisection step"), self.opts.tau_max))
    }
}

/// Worst deviation between the recorded `sigma` and the centred estimate
/// of `dS/dtau`.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyProductionReport {
    pub max_residual: f64,
    pub at_index: usize,
}

/// Three-point derivative at the middle of a non-uniform stencil.
pub(crate) fn centred_derivative(t: [f64; 3], y: [f64; 3]) -> f64 {
    let h1 = t[1] - t[0];
    let h2 = t[2] - t[1];
    -h2 / (h1 * (h1 + h2)) * y[0] + (h2 - h1) / (h1 * h2) * y[1] + h1 / (h2 * (h1 + h2)) * y[2]
}

pub fn entropy_production_check(traj: &Trajectory) -> Result<EntropyProductionReport> {
    let s = &traj.samples;
    if s.len() < 3 {
        return Err(Error::TooFewSamples { got: s.len(), needed: 3 });
    }
    let mut report = EntropyProductionReport { max_residual: 0.0, at_index: 1 };
    for k in 1..s.len() - 1 {
        let rate = centred_derivative(
            [s[k - 1].tau, s[k].tau, s[k + 1].tau],
            [s[k - 1].entropy, s[k].entropy, s[k + 1].entropy],
        );
        let residual = (rate - s[k].sigma).abs();
        if residual > report.max_residual {
            report = EntropyProductionReport { max_residual: residual, at_index: k };
        }
    }
    Ok(report)
}

/// Reads the trajectory as a clock: the intrinsic time at which component
/// `component` of `A` takes `value`. The component must be strictly
/// monotone along the trajectory.
pub fn clock_invert(traj: &Trajectory, component: usize, value: f64) -> Result<f64> {
    let n = traj.dim();
    if component >= n {
        return Err(Error::Dimension { expected: n, got: component + 1 });
    }
    let values: Vec<f64> = traj.samples.iter().map(|s| s.a[component]).collect();
    if values.len() < 2 {
        return Err(Error::TooFewSamples { got: values.len(), needed: 2 });
    }
    let increasing = values.windows(2).all(|w| w[1] > w[0]);
    let decreasing = values.windows(2).all(|w| w[1] < w[0]);
    if !increasing && !decreasing {
        return Err(Error::Monotonicity { component });
    }
    let (lo, hi) = if increasing {
        (values[0], values[values.len() - 1])
    } else {
        (values[values.len() - 1], values[0])
    };
    if !(value >= lo && value <= hi) {
        return Err(Error::Domain(format!(
            "clock value {value} outside the recorded range [{lo}, {hi}]"
        )));
    }
    let k = values
        .windows(2)
        .position(|w| (w[0] <= value && value <= w[1]) || (w[1] <= value && value <= w[0]))
        .expect("value lies within the monotone range");
    let (t0, t1) = (traj.samples[k].tau, traj.samples[k + 1].tau);
    let frac = (value - values[k]) / (values[k + 1] - values[k]);
    Ok(t0 + frac * (t1 - t0))
}

#[cfg(test)]
mod tests;
