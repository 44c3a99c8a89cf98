use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DVector;
use serde_json::{json, Map, Value};

use super::config::{AnalysisSpec, Model, ScenarioConfig};
use crate::coupled::CoupledTrajectory;
use crate::duality::StateManifold;
use crate::error::{Error, Result};
use crate::flow::{self, Trajectory};
use crate::geometry::{self, DEFAULT_FD_STEP};
use crate::onsager::{self, DEFAULT_WINDOW, FORCE_SIGMA_FLOOR};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Directory that relative output paths resolve against.
    pub output_dir: PathBuf,
    /// Adds `wall_time_ms` to the summary, which makes it non-reproducible.
    pub timing: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub summary: Option<Value>,
    pub artifacts: Vec<PathBuf>,
    pub diagnostic: Option<String>,
}

impl RunOutcome {
    fn failed(err: &Error) -> Self {
        Self {
            exit_code: EXIT_NUMERICAL,
            summary: None,
            artifacts: Vec::new(),
            diagnostic: Some(format!("{}: {err}", err.kind())),
        }
    }
}

/// Runs one scenario and writes its artifacts. Numerical failures map to
/// exit code 2; a failure after the first step still writes the partial
/// trajectory and a summary with status `error`.
pub fn run_scenario(cfg: &ScenarioConfig, opts: &RunOptions) -> RunOutcome {
    let started = Instant::now();
    let manifold: &dyn StateManifold = match &cfg.model {
        Model::Single(f) => f,
        Model::Coupled(cs) => cs,
    };
    let (trajectory, failure) = match flow::integrate_partial(manifold, &cfg.a0, &cfg.integrator) {
        Ok(pair) => pair,
        Err(e) => return RunOutcome::failed(&e),
    };
    match write_artifacts(cfg, opts, manifold, &trajectory, failure.as_ref(), started) {
        Ok((summary, artifacts)) => RunOutcome {
            exit_code: if failure.is_some() { EXIT_NUMERICAL } else { EXIT_OK },
            summary: Some(summary),
            artifacts,
            diagnostic: failure.map(|e| format!("{}: {e}", e.kind())),
        },
        Err(e) => RunOutcome::failed(&e),
    }
}

fn resolve(opts: &RunOptions, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        opts.output_dir.join(path)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| Error::Io(e.into()))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn write_artifacts(
    cfg: &ScenarioConfig,
    opts: &RunOptions,
    manifold: &dyn StateManifold,
    trajectory: &Trajectory,
    failure: Option<&Error>,
    started: Instant,
) -> Result<(Value, Vec<PathBuf>)> {
    let mut artifacts = Vec::new();

    let csv_path = resolve(opts, &cfg.trajectory_path());
    let mut csv = create(&csv_path)?;
    let coupled = match &cfg.model {
        Model::Coupled(cs) => {
            let ct = CoupledTrajectory::from_trajectory(cs, trajectory.clone());
            ct.write_csv(&mut csv)?;
            Some(ct)
        }
        Model::Single(_) => {
            trajectory.write_csv(&mut csv)?;
            None
        }
    };
    csv.flush()?;
    artifacts.push(csv_path);

    let mut analyses = Map::new();
    if failure.is_none() {
        for analysis in &cfg.analyses {
            match analysis {
                AnalysisSpec::Onsager { clock_rate, window_start, window_len } => {
                    let report = onsager_analysis(manifold, trajectory, *clock_rate, *window_start, *window_len);
                    let configured = cfg.onsager_path();
                    let path = resolve(opts, &configured);
                    write_json(&path, &report)?;
                    artifacts.push(path);
                    let name = configured.to_string_lossy().replace('\\', "/");
                    analyses.insert("onsager".into(), json!({ "report": name }));
                }
                AnalysisSpec::EntropyProductionCheck => {
                    let value = match flow::entropy_production_check(trajectory) {
                        Ok(r) => json!({
                            "max_residual": r.max_residual,
                            "at_index": r.at_index,
                            "at_tau": trajectory.samples[r.at_index].tau,
                        }),
                        Err(e) => error_json(&e),
                    };
                    analyses.insert("entropy_production_check".into(), value);
                }
                AnalysisSpec::GeometryProbe { points } => {
                    let probes: Vec<Value> = points
                        .iter()
                        .map(|p| match probe(manifold, &DVector::from_column_slice(p)) {
                            Ok(v) => v,
                            Err(e) => error_json(&e),
                        })
                        .collect();
                    analyses.insert("geometry_probe".into(), Value::Array(probes));
                }
            }
        }
    }

    let last = trajectory.terminal();
    let mut summary = Map::new();
    summary.insert("name".into(), json!(cfg.name));
    summary.insert("mode".into(), json!(cfg.mode.as_str()));
    summary.insert("terminal_status".into(), json!(trajectory.status.as_str()));
    summary.insert("terminal_tau".into(), json!(last.tau));
    summary.insert("terminal_A".into(), json!(last.a.as_slice()));
    summary.insert("terminal_S".into(), json!(last.entropy));
    summary.insert("terminal_sigma".into(), json!(last.sigma));
    summary.insert("samples".into(), json!(trajectory.len()));
    if let Some(ct) = &coupled {
        let t = ct.terminal();
        summary.insert("terminal_A_prime".into(), json!(t.a_prime.as_slice()));
        let worst = ct.samples.iter().map(|s| s.conservation_residual).fold(0.0, f64::max);
        summary.insert("max_conservation_residual".into(), json!(worst));
    }
    if let Some(e) = failure {
        summary.insert("error".into(), error_json(e));
    }
    summary.insert("analyses".into(), Value::Object(analyses));
    if opts.timing {
        summary.insert("wall_time_ms".into(), json!(started.elapsed().as_secs_f64() * 1e3));
    }
    let summary = Value::Object(summary);
    let path = resolve(opts, &cfg.summary_path());
    write_json(&path, &summary)?;
    artifacts.push(path);
    Ok((summary, artifacts))
}

fn error_json(e: &Error) -> Value {
    json!({ "error": e.kind(), "message": e.to_string() })
}

/// Default window: the first `max(5, n + 2)` interior samples whose forces
/// are above the noise floor.
fn default_window(trajectory: &Trajectory, len: usize) -> Option<usize> {
    let s = &trajectory.samples;
    (1..s.len().saturating_sub(len)).find(|&k| s[k..k + len].iter().all(|x| x.sigma >= FORCE_SIGMA_FLOOR))
}

fn onsager_analysis(
    manifold: &dyn StateManifold,
    trajectory: &Trajectory,
    clock_rate: f64,
    window_start: Option<usize>,
    window_len: Option<usize>,
) -> Value {
    let n = trajectory.dim();
    let len = window_len.unwrap_or(DEFAULT_WINDOW.max(n + 2));
    let start = window_start.or_else(|| default_window(trajectory, len));
    let center = start
        .map(|s| (s + len / 2).min(trajectory.len() - 1))
        .unwrap_or(0);
    let at = &trajectory.samples[center].a;
    let mut report = match onsager::onsager_matrix(manifold, at, clock_rate) {
        Ok(r) => r,
        Err(e) => return error_json(&e),
    };
    let mut empirical_error = None;
    match start {
        Some(s) => match onsager::empirical_onsager(trajectory, clock_rate, s, len) {
            Ok(l) => {
                report.empirical_l = Some(l);
                report.window = Some((s, s + len));
            }
            Err(e) => empirical_error = Some(error_json(&e)),
        },
        None => {
            empirical_error = Some(error_json(&Error::TooFewSamples {
                got: trajectory.len(),
                needed: len + 2,
            }))
        }
    }
    let mut value = report.to_json();
    let obj = value.as_object_mut().expect("report serializes to an object");
    obj.insert("center_index".into(), json!(center));
    obj.insert("center_A".into(), json!(at.as_slice()));
    obj.insert("window_is_default".into(), json!(window_start.is_none() && window_len.is_none()));
    obj.insert("empirical_error".into(), empirical_error.unwrap_or(Value::Null));
    value
}

/// Metric, forces, `sigma` and connection coefficients at a point.
pub fn probe(manifold: &dyn StateManifold, a: &DVector<f64>) -> Result<Value> {
    let point = manifold.state(a, None)?;
    let gamma = geometry::christoffel_at(&manifold, &point, DEFAULT_FD_STEP)?;
    Ok(json!({
        "A": a.as_slice(),
        "lambda": point.lambda.as_slice(),
        "S": point.entropy,
        "sigma": point.sigma(),
        "metric": onsager::rows(point.metric.matrix()),
        "christoffel": gamma.to_nested(),
    }))
}
