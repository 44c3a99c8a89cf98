//! Alternative coordinate charts on a state manifold.
//!
//! The metric transforms as a tensor and the entropy gradient as a one-form,
//! so the flow, arclength and entropy are chart-independent.

use nalgebra::{DMatrix, DVector};

use crate::duality::{StateManifold, StatePoint};
use crate::error::{check_dim, Error, Result};
use crate::geometry::MetricTensor;

/// A diffeomorphism between new coordinates `B` and the expectation
/// coordinates `A` of a base manifold.
pub trait Chart {
    fn to_base(&self, b: &DVector<f64>) -> Result<DVector<f64>>;
    fn to_chart(&self, a: &DVector<f64>) -> Result<DVector<f64>>;
    /// `dA/dB` evaluated at `b`.
    fn jacobian(&self, b: &DVector<f64>) -> DMatrix<f64>;
    fn name(&self) -> String;
}

/// `B_i = A_i^2` on the positive orthant.
#[derive(Debug, Clone, Copy, Default)]
pub struct SquareChart;

impl Chart for SquareChart {
    fn to_base(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        if b.iter().any(|v| v.is_nan() || *v <= 0.0) {
            return Err(Error::InfeasibleMean(format!(
                "square chart needs B > 0, got {:?}",
                b.as_slice()
            )));
        }
        Ok(b.map(f64::sqrt))
    }

    fn to_chart(&self, a: &DVector<f64>) -> Result<DVector<f64>> {
        if a.iter().any(|v| v.is_nan() || *v <= 0.0) {
            return Err(Error::InfeasibleMean(format!(
                "square chart needs A > 0, got {:?}",
                a.as_slice()
            )));
        }
        Ok(a.map(|v| v * v))
    }

    fn jacobian(&self, b: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_diagonal(&b.map(|v| 0.5 / v.sqrt()))
    }

    fn name(&self) -> String {
        "square".into()
    }
}

/// A manifold expressed in the coordinates of a [`Chart`].
#[derive(Debug, Clone)]
pub struct Reparametrized<M, C> {
    pub base: M,
    pub chart: C,
}

impl<M: StateManifold, C: Chart> Reparametrized<M, C> {
    pub fn new(base: M, chart: C) -> Self {
        Self { base, chart }
    }
}

impl<M: StateManifold, C: Chart> StateManifold for Reparametrized<M, C> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn state(&self, b: &DVector<f64>, near: Option<&StatePoint>) -> Result<StatePoint> {
        check_dim(self.dim(), b.len())?;
        let a = self.chart.to_base(b)?;
        let base = self.base.state(&a, near)?;
        let jac = self.chart.jacobian(b);
        let g = jac.transpose() * base.metric.matrix() * &jac;
        Ok(StatePoint {
            a: b.clone(),
            lambda: jac.transpose() * &base.lambda,
            entropy: base.entropy,
            metric: MetricTensor::new(g)?,
            natural: base.natural,
        })
    }

    fn entropy_at(&self, b: &DVector<f64>) -> Result<f64> {
        self.base.entropy_at(&self.chart.to_base(b)?)
    }

    fn describe(&self) -> String {
        format!("{} in {} chart", self.base.describe(), self.chart.name())
    }
}
