use super::*;
use std::path::Path;

const MINIMAL: &str = r#"{"name":"b","mode":"single","family":{"closed_form":"bernoulli"},"A0":[0.25],"integrator":{"tau_max":2.0}}"#;

fn parse(text: &str) -> crate::error::Result<ScenarioConfig> {
    parse_config_str(text, Path::new("."))
}

fn problems(text: &str) -> Vec<String> {
    match parse(text).unwrap_err() {
        Error::Validation(list) => list,
        other => panic!("expected a validation error, got {other:?}"),
    }
}

#[test]
fn minimal_config_fills_defaults() {
    let cfg = parse(MINIMAL).unwrap();
    assert_eq!(cfg.name, "b");
    assert_eq!(cfg.mode, Mode::Single);
    assert_eq!(cfg.integrator, crate::flow::IntegratorOptions::new(2.0));
    assert!(cfg.analyses.is_empty());
    assert_eq!(cfg.trajectory_path(), Path::new("b.csv"));
    assert_eq!(cfg.summary_path(), Path::new("b.summary.json"));
}

#[test]
fn unknown_keys_name_the_key_and_line() {
    let text = "{\"name\":\"b\",\"mode\":\"single\",\"family\":{\"closed_form\":\"bernoulli\"},\"A0\":[0.25],\n\"integrator\":{\"taumax\":2.0}}";
    match parse(text).unwrap_err() {
        Error::Parse(msg) => {
            assert!(msg.contains("taumax"), "{msg}");
            assert!(msg.contains("integrator"), "{msg}");
            assert!(msg.contains("line 2"), "{msg}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn coupled_mode_requires_totals() {
    let text = r#"{"name":"c","mode":"coupled","families":[{"closed_form":"bernoulli"},{"closed_form":"bernoulli"}],"A0":[0.25],"integrator":{"tau_max":2.0}}"#;
    let list = problems(text);
    assert!(list.iter().any(|p| p.contains("A_total")), "{list:?}");
}

#[test]
fn every_violation_is_listed() {
    let text = r#"{"name":"","mode":"single","family":{"closed_form":"bernoulli"},"A0":[0.25, 0.1],
        "integrator":{"h":-1,"tau_max":0,"sigma_eq":0},
        "analyses":[{"onsager":{"clock_rate":0}},{"geometry_probe":{"points":[[0.1,0.2]]}}]}"#;
    let list = problems(text);
    assert!(list.len() >= 7, "{list:?}");
    for needle in ["name", "integrator.h", "integrator.tau_max", "integrator.sigma_eq", "A0", "clock_rate", "geometry_probe"] {
        assert!(list.iter().any(|p| p.contains(needle)), "missing {needle}: {list:?}");
    }
}

#[test]
fn family_specs() {
    let base = Path::new(".");
    let spec = |json: &str| -> FamilySpec { serde_json::from_str(json).unwrap() };
    assert_eq!(config::build_family(&spec(r#"{"closed_form":"gaussian-mean","dim":3}"#), base).unwrap().dim(), 3);
    assert_eq!(config::build_family(&spec(r#"{"closed_form":"ideal-gas","volume":2}"#), base).unwrap().dim(), 2);
    for bad in [
        r#"{"closed_form":"ideal-gas"}"#,
        r#"{"closed_form":"bernoulli","volume":1}"#,
        r#"{"closed_form":"poisson"}"#,
        r#"{}"#,
        r#"{"closed_form":"bernoulli","tabulated":"x.json"}"#,
        r#"{"tabulated":"does-not-exist.json"}"#,
    ] {
        assert!(config::build_family(&spec(bad), base).is_err(), "{bad}");
    }
}

#[test]
fn analyses_parse() {
    let text = r#"{"name":"b","mode":"single","family":{"closed_form":"bernoulli"},"A0":[0.25],"integrator":{"tau_max":2.0},
        "analyses":[{"onsager":{}}, "entropy_production_check", {"geometry_probe":{"points":[[0.3]]}}]}"#;
    let cfg = parse(text).unwrap();
    assert_eq!(
        cfg.analyses,
        vec![
            AnalysisSpec::Onsager { clock_rate: 1.0, window_start: None, window_len: None },
            AnalysisSpec::EntropyProductionCheck,
            AnalysisSpec::GeometryProbe { points: vec![vec![0.3]] },
        ]
    );
}

#[test]
fn run_writes_consistent_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse(MINIMAL).unwrap();
    let opts = RunOptions { output_dir: dir.path().to_path_buf(), timing: false };
    let outcome = run_scenario(&cfg, &opts);
    assert_eq!(outcome.exit_code, EXIT_OK);
    let summary = outcome.summary.unwrap();
    assert_eq!(summary["terminal_status"], "equilibrium-reached");
    assert!(summary.get("wall_time_ms").is_none());
    let tau = summary["terminal_tau"].as_f64().unwrap();
    assert!((tau - std::f64::consts::FRAC_PI_6).abs() < 1e-3);

    let csv = std::fs::read_to_string(dir.path().join("b.csv")).unwrap();
    let last: Vec<f64> = csv.lines().last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(last[0], tau);
    assert_eq!(last[1], summary["terminal_A"][0].as_f64().unwrap());
    assert_eq!(last[3], summary["terminal_S"].as_f64().unwrap());

    let timed = run_scenario(&cfg, &RunOptions { timing: true, ..opts });
    assert!(timed.summary.unwrap().get("wall_time_ms").is_some());
}

#[test]
fn run_from_equilibrium_fails_with_exit_two() {
    let text = MINIMAL.replace("0.25", "0.5");
    let cfg = parse(&text).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let outcome = run_scenario(&cfg, &RunOptions { output_dir: dir.path().into(), timing: false });
    assert_eq!(outcome.exit_code, EXIT_NUMERICAL);
    assert!(outcome.diagnostic.unwrap().starts_with("AtEquilibriumError"));
}
