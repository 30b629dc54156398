use super::*;

fn parse(text: &str) -> ScenarioConfig {
    ScenarioConfig::from_json(text).unwrap()
}

const TWO_LAB: &str = r#"{
    "kind": "two_lab", "dim": 4, "statistics": "both",
    "meter": {"observable": [1, 2, 3, 4]}, "modes": [0, 1], "shots": 2000
}"#;

#[test]
fn two_lab_complete_meter_sums_both_modes() {
    let r = run_scenario(&parse(TWO_LAB)).unwrap();
    assert!(r.passed, "{:?}", r.failed_checks().collect::<Vec<_>>());
    let rows = &r.tables["expectations"];
    for row in rows.as_array().unwrap() {
        assert!((row["expectation"].as_f64().unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(row["noise"], "remote mode contributes");
    }
    assert!(r.check("boson.complete_expectation").unwrap().passed);
}

#[test]
fn two_lab_incomplete_meter_ignores_remote_particle() {
    let cfg = parse(
        r#"{"kind": "two_lab", "dim": 4, "statistics": "both",
            "meter": {"observable": [1, 2, 3, 4], "registered": [0]}, "modes": [0, 1]}"#,
    );
    let r = run_scenario(&cfg).unwrap();
    assert!(r.passed, "{:?}", r.failed_checks().collect::<Vec<_>>());
    assert!(r.check("fermion.no_remote_contribution").unwrap().passed);
    let dist = &r.tables["boson.distribution"];
    assert!((dist["no_response"].as_f64().unwrap()).abs() < 1e-12);
}

#[test]
fn detector_grid_born_zero() {
    let cfg = parse(
        r#"{"kind": "detector_grid", "cells": 64, "detectors": [[0, 16], [32, 48]],
            "states": [{"label": "inside", "support": [4, 12]}, {"label": "between", "support": [20, 28]}],
            "shots": 10000}"#,
    );
    let r = run_scenario(&cfg).unwrap();
    assert!(r.passed, "{:?}", r.failed_checks().collect::<Vec<_>>());
    assert!(r.check("state.between.born_zero").unwrap().passed);
    let states = r.tables["states"].as_array().unwrap();
    assert!((states[0]["response_probability"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((states[0]["detector_probabilities"][0].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(states[1]["no_response_frequency"].as_f64().unwrap(), 1.0);
    assert_eq!(states[1]["class"], "null");
    assert!(r.files.iter().any(|f| f.name == "state.between.frequencies.csv"));
}

#[test]
fn equivalence_instance_and_violation() {
    let ok = parse(
        r#"{"kind": "equivalence", "instance": {"dim": 3, "statistics": "both", "environment": [0],
            "psi": [0, 1, 1], "meter": {"observable": [1, 2, 3], "registered": [1, 2]}}}"#,
    );
    let r = run_scenario(&ok).unwrap();
    assert!(r.passed, "{:?}", r.failed_checks().collect::<Vec<_>>());
    assert_eq!(r.verdict, "pass");

    let text = r#"{"kind": "equivalence", "instance": {"dim": 3, "statistics": "boson", "environment": [1],
            "psi": 1, "meter": {"observable": [1, 2, 3], "registered": [1, 2]}}}"#;
    let err = run_scenario(&parse(text)).unwrap_err();
    assert!(matches!(err, Error::PreparationViolation(_)));

    let mut v: serde_json::Value = serde_json::from_str(text).unwrap();
    v["expect_violation"] = true.into();
    let r = run_scenario(&ScenarioConfig::from_json(&v.to_string()).unwrap()).unwrap();
    assert!(r.passed);
    assert_eq!(r.verdict, "violation demonstrated");
    assert_eq!(exit_code(&Ok(r)), 0);
}

#[test]
fn equivalence_sweep_is_deterministic() {
    let cfg = parse(
        r#"{"kind": "equivalence", "seed": 42,
            "sweep": {"trials": 12, "dims": [2, 3, 4], "env_particles": [1, 2], "statistics": "both"}}"#,
    );
    let a = run_scenario(&cfg).unwrap();
    let b = run_scenario(&cfg).unwrap();
    assert!(a.passed, "{:?}", a.failed_checks().collect::<Vec<_>>());
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    assert_eq!(a.files, b.files);
}

#[test]
fn dynamics_admissible_and_breaking() {
    let good = parse(
        r#"{"kind": "dynamics", "dim": 3, "statistics": "both", "environment": [0], "psi": [0, 0.6, 0.8],
            "meter": {"observable": [1, 2, 3], "registered": [1, 2]},
            "hamiltonian": {"type": "admissible_random"}, "times": {"start": 0.05, "stop": 1.0, "count": 20}}"#,
    );
    let r = run_scenario(&good).unwrap();
    assert!(r.passed, "{:?}", r.failed_checks().collect::<Vec<_>>());

    let bad = parse(
        r#"{"kind": "dynamics", "dim": 3, "statistics": "boson", "environment": [0], "psi": 1,
            "meter": {"observable": [1, 2, 3], "registered": [1, 2]}, "expect_violation": true,
            "hamiltonian": {"type": "additive", "single": [[0, 1, 0], [1, 0, 0], [0, 0, 0]]},
            "times": [0.25, 0.5, 1.0]}"#,
    );
    let r = run_scenario(&bad).unwrap();
    assert!(r.passed);
    assert!(r.files.iter().any(|f| f.name == "boson.dynamics.csv"));
}

#[test]
fn separation_check_verdicts() {
    let text = r#"{"kind": "separation_check", "dim": 3, "statistics": "boson",
        "environment": [{"label": "atom", "factors": [0]}, {"label": "pair", "factors": [1, 2]}], "psi": 1}"#;
    assert!(matches!(
        run_scenario(&parse(text)),
        Err(Error::PreparationViolation(_))
    ));
    let mut v: serde_json::Value = serde_json::from_str(text).unwrap();
    v["expect_violation"] = true.into();
    let r = run_scenario(&ScenarioConfig::from_json(&v.to_string()).unwrap()).unwrap();
    assert!(r.passed, "{:?}", r.failed_checks().collect::<Vec<_>>());

    let ok = r#"{"kind": "separation_check", "dim": 3, "statistics": "both",
        "environment": [{"label": "atom", "factors": [0]}], "psi": [0, 1, [0, 1]]}"#;
    let r = run_scenario(&parse(ok)).unwrap();
    assert!(r.passed, "{:?}", r.failed_checks().collect::<Vec<_>>());
}

#[test]
fn invalid_configs_rejected() {
    for bad in [
        r#"{"kind": "two_lab", "dim": 4, "statistics": "boson", "meter": {"observable": [1, 2, 3]}, "modes": [0, 1]}"#,
        r#"{"kind": "two_lab", "dim": 4, "statistics": "boson", "meter": {"observable": [1, 2, 3, 4]}, "modes": [0, 4]}"#,
        r#"{"kind": "two_lab", "dim": 4, "statistics": "boson", "meter": {"observable": [1, 2, 3, 4]}, "modes": [1, 1]}"#,
        r#"{"kind": "detector_grid", "cells": 8, "detectors": [[0, 4], [3, 6]], "states": [{"label": "a", "support": [0, 2]}]}"#,
        r#"{"kind": "equivalence"}"#,
        r#"{"kind": "teleport", "dim": 2}"#,
        r#"{"kind": "two_lab", "dim": 4, "statistics": "boson", "meter": {"observable": [1, 2, 3, 4]}, "modes": [0, 1], "shots": 0}"#,
    ] {
        assert!(matches!(ScenarioConfig::from_json(bad), Err(Error::Config(_))), "{bad}");
    }
}

#[test]
fn overrides_apply_and_revalidate() {
    let cfg = apply_overrides(parse(TWO_LAB), Some(9), Some(50), Some(1e-9)).unwrap();
    assert_eq!((cfg.seed, cfg.shots, cfg.tolerance), (9, 50, Some(1e-9)));
    assert!(apply_overrides(parse(TWO_LAB), None, Some(0), None).is_err());
}

#[test]
fn emitted_report_is_byte_stable() {
    let cfg = parse(TWO_LAB);
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    emit_report(&run_scenario(&cfg).unwrap(), &a).unwrap();
    emit_report(&run_scenario(&cfg).unwrap(), &b).unwrap();
    for name in ["report.json", "boson.frequencies.csv", "fermion.frequencies.json"] {
        assert_eq!(
            std::fs::read(a.join(name)).unwrap(),
            std::fs::read(b.join(name)).unwrap()
        );
    }
    let csv = std::fs::read_to_string(a.join("boson.frequencies.csv")).unwrap();
    assert!(csv.starts_with("outcome,count,frequency\n"));
    assert!(csv.lines().last().unwrap().starts_with("no_response,"));
}
