use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::Deserialize;

use crate::coupled::CompositeSystem;
use crate::error::{Error, Result};
use crate::family::ExponentialFamily;
use crate::flow::IntegratorOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Single,
    Coupled,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Single => "single",
            Mode::Coupled => "coupled",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: String,
    mode: Mode,
    #[serde(default)]
    family: Option<FamilySpec>,
    #[serde(default)]
    families: Option<Vec<FamilySpec>>,
    #[serde(rename = "A0")]
    a0: Vec<f64>,
    #[serde(rename = "A_total", default)]
    a_total: Option<Vec<f64>>,
    integrator: IntegratorSpec,
    #[serde(default)]
    outputs: OutputSpec,
    #[serde(default)]
    analyses: Vec<AnalysisSpec>,
}

/// Either a closed form with its parameters or a path to a tabulated JSON
/// document (relative to the config file).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    #[serde(default)]
    pub closed_form: Option<String>,
    #[serde(default)]
    pub tabulated: Option<PathBuf>,
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub volume: Option<f64>,
    #[serde(default)]
    pub particles: Option<f64>,
    #[serde(default)]
    pub names: Option<Vec<String>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct IntegratorSpec {
    #[serde(default = "default_h")]
    h: f64,
    tau_max: f64,
    #[serde(default = "default_sigma_eq")]
    sigma_eq: f64,
    #[serde(default = "default_record_every")]
    record_every: usize,
}

fn default_h() -> f64 {
    1e-3
}

fn default_sigma_eq() -> f64 {
    1e-8
}

fn default_record_every() -> usize {
    1
}

fn default_clock_rate() -> f64 {
    1.0
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub trajectory_csv: Option<PathBuf>,
    #[serde(default)]
    pub summary_json: Option<PathBuf>,
    #[serde(default)]
    pub onsager_json: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum AnalysisSpec {
    Onsager {
        #[serde(default = "default_clock_rate")]
        clock_rate: f64,
        #[serde(default)]
        window_start: Option<usize>,
        #[serde(default)]
        window_len: Option<usize>,
    },
    EntropyProductionCheck,
    GeometryProbe { points: Vec<Vec<f64>> },
}

#[derive(Debug, Clone)]
pub enum Model {
    Single(ExponentialFamily),
    Coupled(CompositeSystem),
}

impl Model {
    pub fn dim(&self) -> usize {
        match self {
            Model::Single(f) => f.dim(),
            Model::Coupled(cs) => cs.first().dim(),
        }
    }
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub name: String,
    pub mode: Mode,
    pub model: Model,
    pub a0: DVector<f64>,
    pub integrator: IntegratorOptions,
    pub outputs: OutputSpec,
    pub analyses: Vec<AnalysisSpec>,
}

impl ScenarioConfig {
    pub fn trajectory_path(&self) -> PathBuf {
        self.outputs
            .trajectory_csv
            .clone()
            .unwrap_or_else(|| PathBuf::from(format!("{}.csv", self.name)))
    }

    pub fn summary_path(&self) -> PathBuf {
        self.outputs
            .summary_json
            .clone()
            .unwrap_or_else(|| PathBuf::from(format!("{}.summary.json", self.name)))
    }

    pub fn onsager_path(&self) -> PathBuf {
        self.outputs
            .onsager_json
            .clone()
            .unwrap_or_else(|| PathBuf::from(format!("{}.onsager.json", self.name)))
    }
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config_str(&text, base).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Parses a scenario document; tabulated family paths resolve against `base_dir`.
pub fn parse_config_str(text: &str, base_dir: &Path) -> Result<ScenarioConfig> {
    let mut de = serde_json::Deserializer::from_str(text);
    let raw: RawConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        Error::Parse(format!(
            "at `{path}` (line {}, column {}): {inner}",
            inner.line(),
            inner.column()
        ))
    })?;
    validate(raw, base_dir)
}

fn validate(raw: RawConfig, base_dir: &Path) -> Result<ScenarioConfig> {
    let mut problems = Vec::new();
    if raw.name.trim().is_empty() {
        problems.push("name must not be empty".to_string());
    }
    if raw.name.contains(['/', '\\']) {
        problems.push(format!("name {:?} must not contain path separators", raw.name));
    }
    let integrator = IntegratorOptions {
        h: raw.integrator.h,
        tau_max: raw.integrator.tau_max,
        sigma_eq: raw.integrator.sigma_eq,
        record_every: raw.integrator.record_every,
    };
    if let Err(Error::Validation(list)) = integrator.validate() {
        problems.extend(list.into_iter().map(|p| format!("integrator.{p}")));
    }
    if raw.a0.is_empty() || raw.a0.iter().any(|v| !v.is_finite()) {
        problems.push(format!("A0 must be a non-empty list of finite numbers, got {:?}", raw.a0));
    }

    let mut build = |spec: &FamilySpec, at: &str| match build_family(spec, base_dir) {
        Ok(f) => Some(f),
        Err(e) => {
            problems.push(format!("{at}: {e}"));
            None
        }
    };
    let model = match raw.mode {
        Mode::Single => {
            let family = match (&raw.family, &raw.families) {
                (Some(spec), None) => build(spec, "family"),
                (None, _) => {
                    problems.push("single mode requires \"family\"".into());
                    None
                }
                (Some(_), Some(_)) => {
                    problems.push("single mode takes \"family\", not \"families\"".into());
                    None
                }
            };
            if raw.a_total.is_some() {
                problems.push("\"A_total\" is only valid in coupled mode".into());
            }
            family.map(Model::Single)
        }
        Mode::Coupled => {
            let pair = match (&raw.families, &raw.family) {
                (Some(list), None) if list.len() == 2 => {
                    let first = build(&list[0], "families[0]");
                    let second = build(&list[1], "families[1]");
                    first.zip(second)
                }
                (Some(list), None) => {
                    problems.push(format!("coupled mode requires exactly 2 families, got {}", list.len()));
                    None
                }
                (_, Some(_)) => {
                    problems.push("coupled mode takes \"families\", not \"family\"".into());
                    None
                }
                (None, None) => {
                    problems.push("coupled mode requires \"families\"".into());
                    None
                }
            };
            let total = match &raw.a_total {
                Some(t) if t.iter().all(|v| v.is_finite()) => Some(DVector::from_column_slice(t)),
                Some(t) => {
                    problems.push(format!("A_total must be finite, got {t:?}"));
                    None
                }
                None => {
                    problems.push("coupled mode requires \"A_total\"".into());
                    None
                }
            };
            match (pair, total) {
                (Some((first, second)), Some(total)) => match CompositeSystem::new(first, second, total) {
                    Ok(cs) => Some(Model::Coupled(cs)),
                    Err(e) => {
                        problems.push(format!("families: {e}"));
                        None
                    }
                },
                _ => None,
            }
        }
    };

    if let Some(model) = &model {
        let n = model.dim();
        if raw.a0.len() != n {
            problems.push(format!("A0 has {} entries, the model has dimension {n}", raw.a0.len()));
        }
        for (i, analysis) in raw.analyses.iter().enumerate() {
            match analysis {
                AnalysisSpec::Onsager { clock_rate, window_len, .. } => {
                    if !(clock_rate.is_finite() && *clock_rate > 0.0) {
                        problems.push(format!("analyses[{i}].onsager.clock_rate must be > 0"));
                    }
                    if let Some(len) = window_len {
                        if *len < n + 2 {
                            problems.push(format!("analyses[{i}].onsager.window_len must be >= {}", n + 2));
                        }
                    }
                }
                AnalysisSpec::GeometryProbe { points } => {
                    for (j, p) in points.iter().enumerate() {
                        if p.len() != n || p.iter().any(|v| !v.is_finite()) {
                            problems.push(format!(
                                "analyses[{i}].geometry_probe.points[{j}] must hold {n} finite numbers"
                            ));
                        }
                    }
                }
                AnalysisSpec::EntropyProductionCheck => {}
            }
        }
    }

    match model {
        Some(model) if problems.is_empty() => Ok(ScenarioConfig {
            name: raw.name,
            mode: raw.mode,
            model,
            a0: DVector::from_column_slice(&raw.a0),
            integrator,
            outputs: raw.outputs,
            analyses: raw.analyses,
        }),
        _ => Err(Error::Validation(problems)),
    }
}

pub fn build_family(spec: &FamilySpec, base_dir: &Path) -> Result<ExponentialFamily> {
    let family = match (&spec.closed_form, &spec.tabulated) {
        (Some(_), Some(_)) => {
            return Err(Error::InvalidFamily(
                "give either \"closed_form\" or \"tabulated\", not both".into(),
            ))
        }
        (None, None) => {
            return Err(Error::InvalidFamily("one of \"closed_form\" or \"tabulated\" is required".into()))
        }
        (None, Some(path)) => {
            reject_params(spec, &["dim", "volume", "particles"])?;
            ExponentialFamily::from_json_file(base_dir.join(path))?
        }
        (Some(tag), None) => match tag.as_str() {
            "bernoulli" => {
                reject_params(spec, &["dim", "volume", "particles"])?;
                ExponentialFamily::bernoulli()
            }
            "gaussian-mean" => {
                reject_params(spec, &["volume", "particles"])?;
                ExponentialFamily::gaussian_mean(spec.dim.unwrap_or(1))?
            }
            "ideal-gas" => {
                reject_params(spec, &["dim", "particles"])?;
                ExponentialFamily::ideal_gas(required(spec.volume, "volume")?)?
            }
            "ideal-gas-energy" => {
                reject_params(spec, &["dim"])?;
                ExponentialFamily::ideal_gas_energy(
                    required(spec.volume, "volume")?,
                    required(spec.particles, "particles")?,
                )?
            }
            other => {
                return Err(Error::InvalidFamily(format!(
                    "unknown closed form {other:?} (expected bernoulli, gaussian-mean, ideal-gas or ideal-gas-energy)"
                )))
            }
        },
    };
    match &spec.names {
        Some(names) => family.with_statistic_names(names.clone()),
        None => Ok(family),
    }
}

fn required(value: Option<f64>, key: &str) -> Result<f64> {
    value.ok_or_else(|| Error::InvalidFamily(format!("missing \"{key}\"")))
}

fn reject_params(spec: &FamilySpec, keys: &[&str]) -> Result<()> {
    let present = |key: &str| match key {
        "dim" => spec.dim.is_some(),
        "volume" => spec.volume.is_some(),
        "particles" => spec.particles.is_some(),
        _ => false,
    };
    match keys.iter().find(|k| present(k)) {
        Some(key) => Err(Error::InvalidFamily(format!("\"{key}\" does not apply to this family"))),
        None => Ok(()),
    }
}
