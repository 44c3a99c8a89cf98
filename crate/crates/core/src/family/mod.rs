//! Exponential-family models built on a prior measure over microstates.
//!
//! A family is defined by a microstate space carrying a prior weight `m(x)`
//! and `n` sufficient statistics `a(x)`. For natural coordinates `lambda` the
//! distribution is `p(x) = m(x) exp(-lambda . a(x)) / Z(lambda)`. Discrete
//! spaces are evaluated exactly by summation; continuous and thermodynamic
//! families are admitted only through closed forms.

mod json;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};

pub use json::TabulatedDocument;

/// Analytic families with closed-form partition functions.
#[derive(Debug, Clone, PartialEq)]
pub enum ClosedForm {
    /// `x` in {0, 1}, `m = 1`, `a(x) = x`.
    Bernoulli,
    /// `x` in R^dim, `m(x) = exp(-|x|^2 / 2)`, `a(x) = x`.
    GaussianMean { dim: usize },
    /// Monatomic ideal gas in a vessel of fixed volume, state `(E, N)`.
    ///
    /// Specified by its entropy surface
    /// `S(E, N) = N [ln(V/N) + 3/2 ln(E/N)] + 5/2 N` (k_B = 1). The matching
    /// log-partition function is the grand-canonical one,
    /// `log Z = V exp(-lambda_N) (3 / (2 lambda_E))^{3/2}`, defined for `lambda_E > 0`.
    IdealGas { volume: f64 },
    /// Ideal gas with the particle number frozen; state `E` only.
    IdealGasEnergy { volume: f64, particles: f64 },
}

impl ClosedForm {
    pub fn dim(&self) -> usize {
        match self {
            ClosedForm::Bernoulli | ClosedForm::IdealGasEnergy { .. } => 1,
            ClosedForm::GaussianMean { dim } => *dim,
            ClosedForm::IdealGas { .. } => 2,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            ClosedForm::Bernoulli => "bernoulli",
            ClosedForm::GaussianMean { .. } => "gaussian-mean",
            ClosedForm::IdealGas { .. } => "ideal-gas",
            ClosedForm::IdealGasEnergy { .. } => "ideal-gas-energy",
        }
    }

    /// True for families defined through their entropy surface rather than a
    /// microstate measure.
    pub fn is_thermodynamic(&self) -> bool {
        matches!(
            self,
            ClosedForm::IdealGas { .. } | ClosedForm::IdealGasEnergy { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MicrostateSpace {
    /// Finitely many labelled microstates with positive prior weights.
    Discrete { labels: Vec<String>, weights: Vec<f64> },
    /// A space known only through a closed form.
    Analytic(ClosedForm),
}

impl MicrostateSpace {
    pub fn len(&self) -> Option<usize> {
        match self {
            MicrostateSpace::Discrete { labels, .. } => Some(labels.len()),
            MicrostateSpace::Analytic(_) => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == Some(0)
    }
}

/// Values of the sufficient statistics. For discrete spaces this is the
/// `points x n` table of `a(x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStatistics {
    dim: usize,
    table: Option<DMatrix<f64>>,
}

impl SufficientStatistics {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn table(&self) -> Option<&DMatrix<f64>> {
        self.table.as_ref()
    }

    /// Statistic vector `a(x_i)` of the `i`-th tabulated microstate.
    pub fn evaluate(&self, index: usize) -> Option<DVector<f64>> {
        let table = self.table.as_ref()?;
        (index < table.nrows()).then(|| table.row(index).transpose())
    }
}

/// A microstate used as an argument to [`ExponentialFamily::log_density`].
#[derive(Debug, Clone, PartialEq)]
pub enum Microstate {
    Index(usize),
    Label(String),
    Point(Vec<f64>),
}

/// Log-partition value together with the first two cumulants.
#[derive(Debug, Clone)]
pub struct Moments {
    pub log_partition: f64,
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentialFamily {
    space: MicrostateSpace,
    stats: SufficientStatistics,
    closed_form: Option<ClosedForm>,
    names: Vec<String>,
}

impl ExponentialFamily {
    /// Builds a discrete family from labelled microstates, prior weights and
    /// one row of statistic values per microstate.
    pub fn tabulated(labels: Vec<String>, weights: Vec<f64>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let points = labels.len();
        if points < 2 {
            return Err(Error::InvalidFamily(format!(
                "a tabulated family needs at least 2 microstates, got {points}"
            )));
        }
        if weights.len() != points || rows.len() != points {
            return Err(Error::InvalidFamily(format!(
                "{} labels, {} weights and {} statistic rows do not match",
                points,
                weights.len(),
                rows.len()
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for label in &labels {
            if !seen.insert(label.as_str()) {
                return Err(Error::InvalidFamily(format!("duplicate microstate label {label:?}")));
            }
        }
        for (i, w) in weights.iter().enumerate() {
            if !(w.is_finite() && *w > 0.0) {
                return Err(Error::InvalidFamily(format!("weights[{i}] = {w} must be finite and > 0")));
            }
        }
        let dim = rows[0].len();
        if dim == 0 {
            return Err(Error::InvalidFamily("at least one statistic is required".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::InvalidFamily(format!(
                    "stats[{i}] has {} entries, expected {dim}",
                    row.len()
                )));
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidFamily(format!("stats[{i}][{j}] is not finite")));
            }
        }
        let table = DMatrix::from_fn(points, dim, |i, j| rows[i][j]);
        check_affine_rank(&table)?;
        Ok(Self {
            space: MicrostateSpace::Discrete { labels, weights },
            stats: SufficientStatistics { dim, table: Some(table) },
            closed_form: None,
            names: default_names(dim),
        })
    }

    pub fn bernoulli() -> Self {
        let mut family = Self::tabulated(
            vec!["0".into(), "1".into()],
            vec![1.0, 1.0],
            vec![vec![0.0], vec![1.0]],
        )
        .expect("bernoulli table is valid");
        family.closed_form = Some(ClosedForm::Bernoulli);
        family.names = vec!["x".into()];
        family
    }

    pub fn gaussian_mean(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidFamily("gaussian-mean needs dim >= 1".into()));
        }
        Ok(Self::analytic(ClosedForm::GaussianMean { dim }, default_names(dim)))
    }

    pub fn ideal_gas(volume: f64) -> Result<Self> {
        check_positive("volume", volume)?;
        Ok(Self::analytic(
            ClosedForm::IdealGas { volume },
            vec!["E".into(), "N".into()],
        ))
    }

    pub fn ideal_gas_energy(volume: f64, particles: f64) -> Result<Self> {
        check_positive("volume", volume)?;
        check_positive("particles", particles)?;
        Ok(Self::analytic(
            ClosedForm::IdealGasEnergy { volume, particles },
            vec!["E".into()],
        ))
    }

    fn analytic(form: ClosedForm, names: Vec<String>) -> Self {
        Self {
            stats: SufficientStatistics { dim: form.dim(), table: None },
            space: MicrostateSpace::Analytic(form.clone()),
            closed_form: Some(form),
            names,
        }
    }

    /// Renames the statistics; used to check positional pairing of coupled systems.
    pub fn with_statistic_names(mut self, names: Vec<String>) -> Result<Self> {
        check_dim(self.dim(), names.len())?;
        self.names = names;
        Ok(self)
    }

    /// The same family evaluated by explicit summation over its table,
    /// ignoring any closed form. `None` for analytic-only spaces.
    pub fn tabulated_view(&self) -> Option<Self> {
        self.stats.table.as_ref()?;
        Some(Self { closed_form: None, ..self.clone() })
    }

    pub fn dim(&self) -> usize {
        self.stats.dim
    }

    pub fn space(&self) -> &MicrostateSpace {
        &self.space
    }

    pub fn statistics(&self) -> &SufficientStatistics {
        &self.stats
    }

    pub fn closed_form(&self) -> Option<&ClosedForm> {
        self.closed_form.as_ref()
    }

    pub fn statistic_names(&self) -> &[String] {
        &self.names
    }

    /// Short description, e.g. `bernoulli` or `tabulated(5 points, n=2)`.
    pub fn describe(&self) -> String {
        match (&self.closed_form, &self.space) {
            (Some(form), _) => form.tag().to_string(),
            (None, MicrostateSpace::Discrete { labels, .. }) => {
                format!("tabulated({} points, n={})", labels.len(), self.dim())
            }
            (None, MicrostateSpace::Analytic(form)) => form.tag().to_string(),
        }
    }

    /// Rejects `lambda` outside the natural-parameter domain.
    pub fn check_natural_domain(&self, lambda: &DVector<f64>) -> Result<()> {
        check_dim(self.dim(), lambda.len())?;
        if lambda.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("lambda = {:?} is not finite", lambda.as_slice())));
        }
        match self.closed_form {
            Some(ClosedForm::IdealGas { .. }) | Some(ClosedForm::IdealGasEnergy { .. })
                if lambda[0] <= 0.0 =>
            {
                Err(Error::Domain(format!(
                    "ideal gas requires lambda_E > 0, got {}",
                    lambda[0]
                )))
            }
            _ => Ok(()),
        }
    }

    /// Necessary conditions for `a` to be an attainable mean. Exact for the
    /// closed forms; for tables it checks the coordinate-wise open range of
    /// the statistics, leaving hull exterior points to the solver.
    pub fn check_mean_feasible(&self, a: &DVector<f64>) -> Result<()> {
        check_dim(self.dim(), a.len())?;
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::InfeasibleMean(format!("A = {:?} is not finite", a.as_slice())));
        }
        let ok = match (&self.closed_form, &self.stats.table) {
            (Some(ClosedForm::Bernoulli), _) => a[0] > 0.0 && a[0] < 1.0,
            (Some(ClosedForm::GaussianMean { .. }), _) => true,
            (Some(ClosedForm::IdealGas { .. }), _) => a[0] > 0.0 && a[1] > 0.0,
            (Some(ClosedForm::IdealGasEnergy { .. }), _) => a[0] > 0.0,
            (None, Some(table)) => (0..self.dim()).all(|j| {
                let col = table.column(j);
                a[j] > col.min() && a[j] < col.max()
            }),
            (None, None) => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InfeasibleMean(format!(
                "A = {:?} lies outside the attainable means of {}",
                a.as_slice(),
                self.describe()
            )))
        }
    }

    /// `log Z(lambda)`, evaluated with a max shift for discrete families.
    pub fn log_partition(&self, lambda: &DVector<f64>) -> Result<f64> {
        self.check_natural_domain(lambda)?;
        let value = match &self.closed_form {
            Some(form) => closed_log_partition(form, lambda),
            None => self.tabulated_moments(lambda, false).log_partition,
        };
        finite_or_domain(value, lambda)
    }

    /// Mean parameters `A = -d log Z / d lambda`.
    pub fn mean_parameters(&self, lambda: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.moments_unchecked(lambda)?.mean)
    }

    /// Covariance of the statistics, `d^2 log Z / d lambda^2`. Fails if the
    /// matrix is not numerically positive definite.
    pub fn covariance(&self, lambda: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self.moments(lambda)?.covariance)
    }

    /// All of `log Z`, mean and covariance in one pass.
    pub fn moments(&self, lambda: &DVector<f64>) -> Result<Moments> {
        let m = self.moments_unchecked(lambda)?;
        if m.covariance.clone().cholesky().is_none() {
            return Err(Error::SingularModel(format!(
                "covariance of {} at lambda = {:?} is not positive definite",
                self.describe(),
                lambda.as_slice()
            )));
        }
        Ok(m)
    }

    pub(crate) fn moments_unchecked(&self, lambda: &DVector<f64>) -> Result<Moments> {
        self.check_natural_domain(lambda)?;
        let m = match &self.closed_form {
            Some(form) => closed_moments(form, lambda),
            None => self.tabulated_moments(lambda, true),
        };
        finite_or_domain(m.log_partition, lambda)?;
        if m.mean.iter().chain(m.covariance.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "moments overflow at lambda = {:?}",
                lambda.as_slice()
            )));
        }
        Ok(m)
    }

    /// `log p(x | lambda) = log m(x) - lambda . a(x) - log Z(lambda)`.
    pub fn log_density(&self, lambda: &DVector<f64>, x: &Microstate) -> Result<f64> {
        let log_z = self.log_partition(lambda)?;
        match (&self.space, x) {
            (MicrostateSpace::Discrete { labels, weights }, _) => {
                let index = match x {
                    Microstate::Index(i) if *i < labels.len() => *i,
                    Microstate::Label(l) => labels
                        .iter()
                        .position(|s| s == l)
                        .ok_or_else(|| Error::UnknownMicrostate(format!("no microstate labelled {l:?}")))?,
                    other => {
                        return Err(Error::UnknownMicrostate(format!(
                            "{other:?} is not a microstate of {}",
                            self.describe()
                        )))
                    }
                };
                let a = self.stats.evaluate(index).expect("index checked");
                Ok(weights[index].ln() - lambda.dot(&a) - log_z)
            }
            (MicrostateSpace::Analytic(ClosedForm::GaussianMean { dim }), Microstate::Point(p))
                if p.len() == *dim =>
            {
                let x = DVector::from_column_slice(p);
                Ok(-0.5 * x.norm_squared() - lambda.dot(&x) - log_z)
            }
            (MicrostateSpace::Analytic(form), _) if form.is_thermodynamic() => Err(Error::Unsupported(
                format!("{} has no microstate representation", form.tag()),
            )),
            (_, other) => Err(Error::UnknownMicrostate(format!(
                "{other:?} is not a microstate of {}",
                self.describe()
            ))),
        }
    }

    fn tabulated_moments(&self, lambda: &DVector<f64>, with_moments: bool) -> Moments {
        let (weights, table) = match (&self.space, &self.stats.table) {
            (MicrostateSpace::Discrete { weights, .. }, Some(table)) => (weights, table),
            _ => unreachable!("tabulated evaluation on an analytic space"),
        };
        let n = self.dim();
        let exponents: Vec<f64> = weights
            .iter()
            .enumerate()
            .map(|(i, w)| w.ln() - (table.row(i) * lambda)[0])
            .collect();
        let anchor = exponents
            .iter()
            .enumerate()
            .fold(0, |best, (i, e)| if *e > exponents[best] { i } else { best });
        let shift = exponents[anchor];
        let unnormalized: Vec<f64> = exponents.iter().map(|e| (e - shift).exp()).collect();
        let rest: f64 = unnormalized
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != anchor)
            .map(|(_, u)| u)
            .sum();
        let total = 1.0 + rest;
        let log_partition = shift + rest.ln_1p();
        if !with_moments {
            return Moments {
                log_partition,
                mean: DVector::zeros(0),
                covariance: DMatrix::zeros(0, 0),
            };
        }
        // Centre on the most probable microstate so small variances survive.
        let origin = table.row(anchor).transpose();
        let mut offset = DVector::zeros(n);
        let mut second = DMatrix::zeros(n, n);
        for (i, u) in unnormalized.iter().enumerate() {
            let d = table.row(i).transpose() - &origin;
            offset += &d * (u / total);
            second += &d * d.transpose() * (u / total);
        }
        let covariance = second - &offset * offset.transpose();
        let mean = origin + offset;
        Moments { log_partition, mean, covariance }
    }
}

fn closed_log_partition(form: &ClosedForm, lambda: &DVector<f64>) -> f64 {
    match form {
        ClosedForm::Bernoulli => softplus(-lambda[0]),
        ClosedForm::GaussianMean { dim } => {
            0.5 * (*dim as f64) * (2.0 * std::f64::consts::PI).ln() + 0.5 * lambda.norm_squared()
        }
        ClosedForm::IdealGas { volume } => {
            volume * (-lambda[1]).exp() * (1.5 / lambda[0]).powf(1.5)
        }
        ClosedForm::IdealGasEnergy { volume, particles } => {
            let n = *particles;
            n * (volume / n).ln() + 1.5 * n * (1.5 / lambda[0]).ln() + n
        }
    }
}

fn closed_moments(form: &ClosedForm, lambda: &DVector<f64>) -> Moments {
    let log_partition = closed_log_partition(form, lambda);
    let (mean, covariance) = match form {
        ClosedForm::Bernoulli => {
            let (p, q) = (logistic(-lambda[0]), logistic(lambda[0]));
            (DVector::from_element(1, p), DMatrix::from_element(1, 1, p * q))
        }
        ClosedForm::GaussianMean { dim } => (-lambda.clone(), DMatrix::identity(*dim, *dim)),
        ClosedForm::IdealGas { .. } => {
            // log Z equals the mean particle number N.
            let n = log_partition;
            let le = lambda[0];
            let e = 1.5 * n / le;
            let cov = DMatrix::from_row_slice(2, 2, &[3.75 * n / (le * le), e, e, n]);
            (DVector::from_vec(vec![e, n]), cov)
        }
        ClosedForm::IdealGasEnergy { particles, .. } => {
            let le = lambda[0];
            let e = 1.5 * particles / le;
            (
                DVector::from_element(1, e),
                DMatrix::from_element(1, 1, 1.5 * particles / (le * le)),
            )
        }
    };
    Moments { log_partition, mean, covariance }
}

/// `ln(1 + e^x)` without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `1 / (1 + e^{-x})` without overflow.
pub(crate) fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn finite_or_domain(value: f64, lambda: &DVector<f64>) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Domain(format!(
            "log Z is not finite at lambda = {:?}",
            lambda.as_slice()
        )))
    }
}

fn check_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidFamily(format!("{name} must be finite and > 0, got {value}")))
    }
}

fn default_names(dim: usize) -> Vec<String> {
    (1..=dim).map(|i| format!("a_{i}")).collect()
}

// The covariance is singular iff the statistics are affinely dependent over
// the support, so the rank test runs on the centered table.
fn check_affine_rank(table: &DMatrix<f64>) -> Result<()> {
    let (points, dim) = table.shape();
    if points < dim + 1 {
        return Err(Error::SingularModel(format!(
            "{dim} statistics need at least {} microstates, got {points}",
            dim + 1
        )));
    }
    let mean = table.row_mean();
    let centered = DMatrix::from_fn(points, dim, |i, j| table[(i, j)] - mean[j]);
    let sv = centered.singular_values();
    let largest = sv.max();
    let smallest = sv.min();
    if largest == 0.0 || smallest <= 1e-10 * largest {
        return Err(Error::SingularModel(format!(
            "statistics table has affine rank below {dim} (singular values {:?})",
            sv.as_slice()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests;
