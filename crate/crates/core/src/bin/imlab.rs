use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use imlab::scenario::{apply_overrides, configure_threads_from_env, emit_report, run_scenario, ScenarioConfig};
use imlab::{Error, Result};

#[derive(Parser)]
#[command(
    name = "imlab",
    version,
    about = "Run registration scenarios with indistinguishable particles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    #[command(name = "two_lab", alias = "two-lab")]
    TwoLab(RunArgs),
    #[command(name = "detector_grid", alias = "detector-grid")]
    DetectorGrid(RunArgs),
    Equivalence(RunArgs),
    Dynamics(RunArgs),
    #[command(name = "separation_check", alias = "separation-check")]
    SeparationCheck(RunArgs),
    /// Parse and check a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run every `*.json` config in a directory.
    Suite {
        #[arg(long)]
        dir: PathBuf,
        /// Defaults to `<dir>/out`; each config writes to a subdirectory named after its file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run_one(kind: &str, a: &RunArgs) -> Result<i32> {
    let cfg = ScenarioConfig::load(&a.config)?;
    if cfg.kind() != kind {
        return Err(Error::Config(format!(
            "{} holds a {} scenario, not {kind}",
            a.config.display(),
            cfg.kind()
        )));
    }
    let cfg = apply_overrides(cfg, a.seed, a.shots, a.tol)?;
    let report = run_scenario(&cfg)?;
    emit_report(&report, &a.out)?;
    for c in report.failed_checks() {
        eprintln!("failed: {}", c.name);
    }
    println!("{}: {}", report.scenario, report.verdict);
    Ok(report.exit_code())
}

fn suite(dir: &Path, out: Option<&Path>) -> Result<i32> {
    let mut configs: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json") && p.file_stem().is_some_and(|s| s != "schema"))
        .collect();
    configs.sort();
    if configs.is_empty() {
        return Err(Error::Config(format!("no configs in {}", dir.display())));
    }
    let out = out.map_or_else(|| dir.join("out"), Path::to_path_buf);
    let mut code = 0;
    for path in &configs {
        let stem = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        let outcome = ScenarioConfig::load(path).and_then(|cfg| {
            let report = run_scenario(&cfg)?;
            emit_report(&report, &out.join(&stem))?;
            Ok(report)
        });
        match &outcome {
            Ok(r) => println!("{stem}: {}", r.verdict),
            Err(e) => println!("{stem}: error: {e}"),
        }
        code = code.max(imlab::scenario::exit_code(&outcome));
    }
    Ok(code)
}

fn dispatch(cli: &Cli) -> Result<i32> {
    configure_threads_from_env()?;
    match &cli.command {
        Command::TwoLab(a) => run_one("two_lab", a),
        Command::DetectorGrid(a) => run_one("detector_grid", a),
        Command::Equivalence(a) => run_one("equivalence", a),
        Command::Dynamics(a) => run_one("dynamics", a),
        Command::SeparationCheck(a) => run_one("separation_check", a),
        Command::Validate { config } => {
            let cfg = ScenarioConfig::load(config)?;
            println!("{}: valid {} config", config.display(), cfg.kind());
            Ok(0)
        }
        Command::Suite { dir, out } => suite(dir, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
