//! Running a scenario from a JSON config and writing its report.
//!
//! `cargo run --example run_scenario -- configs/two_lab_complete.json /tmp/out`

use std::path::PathBuf;

use imlab::scenario::{emit_report, run_scenario, ScenarioConfig};

fn main() -> imlab::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = args.next().map_or_else(
        || PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/detector_grid.json")),
        PathBuf::from,
    );
    let out = args
        .next()
        .map_or_else(|| std::env::temp_dir().join("imlab-example"), PathBuf::from);
    let cfg = ScenarioConfig::load(&config)?;
    let report = run_scenario(&cfg)?;
    for check in &report.checks {
        println!("{:<5} {}", if check.passed { "ok" } else { "FAIL" }, check.name);
    }
    for path in emit_report(&report, &out)? {
        println!("wrote {}", path.display());
    }
    println!("verdict: {}", report.verdict);
    Ok(())
}
