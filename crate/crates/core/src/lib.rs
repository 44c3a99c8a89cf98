//! Maximum-entropy state manifolds with the Fisher-Rao metric, the
//! unit-speed entropy-gradient flow in intrinsic time, transport
//! coefficients and conservation-constrained coupled relaxation.

pub mod chart;
pub mod cli;
pub mod coupled;
pub mod duality;
pub mod error;
pub mod family;
pub mod flow;
pub mod geometry;
pub mod onsager;

pub use chart::{Chart, Reparametrized, SquareChart};
pub use coupled::{integrate_coupled, CompositeSystem, CoupledSample, CoupledTrajectory};
pub use duality::{entropy, entropy_gradient, solve_lambda, StateManifold, StatePoint};
pub use error::{Error, Result};
pub use family::{ClosedForm, ExponentialFamily, Microstate, MicrostateSpace, Moments, SufficientStatistics};
pub use flow::{integrate, integrate_partial, IntegratorOptions, Sample, TerminalStatus, Trajectory};
pub use geometry::{ConnectionCoefficients, MetricTensor};
pub use onsager::{onsager_matrix, OnsagerReport};
