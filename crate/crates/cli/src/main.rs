#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gvf_fleet::checks;
use gvf_fleet::sim::{compute_metrics, run_scenario, scenarios, MetricsSummary, ScenarioConfig, SimError, Telemetry};
use gvf_fleet::Error;
use serde::Serialize;

mod plot;

#[derive(Parser)]
#[command(name = "gvf-fleet", version, about = "Run, check and plot coordinated fleet scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write telemetry and metrics.
    Run(RunArgs),
    /// Run the acceptance suite on the bundled scenarios.
    Check,
    /// Render SVG plots from a telemetry CSV.
    Plot(PlotArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario JSON file, or the name of a bundled scenario.
    #[arg(long)]
    scenario: String,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    enable_safety: Option<bool>,
}

#[derive(Args)]
struct PlotArgs {
    /// Telemetry CSV written by `run`.
    #[arg(long)]
    telemetry: PathBuf,
    /// Output directory; defaults to the directory of the CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Acceptance,
    Runtime(String),
    Disconnected(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Acceptance => 3,
            Failure::Runtime(_) => 4,
            Failure::Disconnected(_) => 5,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Disconnected(_) => Failure::Disconnected(e.to_string()),
            Error::Infeasible(_) | Error::Diverged(_) => Failure::Runtime(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

fn io_failure(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Config(format!("{}: {e}", path.display()))
}

#[derive(Serialize)]
struct Provenance<'a> {
    scenario: &'a str,
    source: &'a str,
    dt: f64,
    duration: f64,
    seed: u64,
    safety_enabled: bool,
    version: &'static str,
    aborted: Option<String>,
}

#[derive(Serialize)]
struct MetricsFile<'a> {
    provenance: Provenance<'a>,
    metrics: &'a MetricsSummary,
}

fn load_scenario(arg: &str) -> Result<ScenarioConfig, Failure> {
    let path = Path::new(arg);
    let text = if path.exists() {
        fs::read_to_string(path).map_err(io_failure(path))?
    } else if let Some(text) = scenarios::bundled(arg.trim_end_matches(".json")) {
        text.to_string()
    } else {
        return Err(Failure::Config(format!("scenario {arg} not found")));
    };
    Ok(ScenarioConfig::from_json(&text)?)
}

fn apply_overrides(cfg: &mut ScenarioConfig, args: &RunArgs) -> Result<(), Failure> {
    if let Some(dt) = args.dt {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Failure::Config(format!("--dt must be positive, got {dt}")));
        }
        cfg.dt = dt;
    }
    if let Some(d) = args.duration {
        if !(d >= 0.0) || !d.is_finite() {
            return Err(Failure::Config(format!("--duration must be nonnegative, got {d}")));
        }
        cfg.duration = d;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(on) = args.enable_safety {
        cfg.safety.enabled = on;
    }
    cfg.validate()?;
    Ok(())
}

fn write_telemetry(tel: &Telemetry, path: &Path) -> Result<(), Failure> {
    let file = File::create(path).map_err(io_failure(path))?;
    let mut out = BufWriter::new(file);
    tel.write_csv(&mut out)?;
    out.flush().map_err(io_failure(path))
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let mut cfg = load_scenario(&args.scenario)?;
    apply_overrides(&mut cfg, &args)?;
    let (tel, aborted) = match run_scenario(&cfg) {
        Ok(tel) => (tel, None),
        Err(SimError::Load(e)) => return Err(e.into()),
        Err(SimError::Aborted { t, source, partial }) => (*partial, Some(format!("aborted at t = {t}: {source}"))),
    };
    fs::create_dir_all(&args.out).map_err(io_failure(&args.out))?;
    let csv_path = args.out.join(&cfg.outputs.telemetry);
    write_telemetry(&tel, &csv_path)?;
    let metrics = compute_metrics(&tel)?;
    let file = MetricsFile {
        provenance: Provenance {
            scenario: &cfg.name,
            source: &args.scenario,
            dt: cfg.dt,
            duration: cfg.duration,
            seed: cfg.seed,
            safety_enabled: cfg.safety.enabled,
            version: env!("CARGO_PKG_VERSION"),
            aborted: aborted.clone(),
        },
        metrics: &metrics,
    };
    let json_path = args.out.join(&cfg.outputs.metrics);
    let json = serde_json::to_string_pretty(&file).map_err(|e| Failure::Config(e.to_string()))?;
    fs::write(&json_path, json + "\n").map_err(io_failure(&json_path))?;
    println!("wrote {} and {}", csv_path.display(), json_path.display());
    match aborted {
        Some(msg) => Err(Failure::Runtime(msg)),
        None => Ok(()),
    }
}

fn check() -> Result<(), Failure> {
    let reports = checks::run_all();
    for r in &reports {
        println!("{r}");
    }
    if reports.iter().all(|r| r.passed) {
        Ok(())
    } else {
        Err(Failure::Acceptance)
    }
}

fn plot_cmd(args: PlotArgs) -> Result<(), Failure> {
    let file = File::open(&args.telemetry).map_err(io_failure(&args.telemetry))?;
    let tel = Telemetry::read_csv(std::io::BufReader::new(file))?;
    if tel.is_empty() {
        return Err(Failure::Config(format!("{} holds no records", args.telemetry.display())));
    }
    let out = match args.out {
        Some(dir) => dir,
        None => args.telemetry.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    let out = if out.as_os_str().is_empty() { PathBuf::from(".") } else { out };
    fs::create_dir_all(&out).map_err(io_failure(&out))?;
    for (name, svg) in plot::render_all(&tel) {
        let path = out.join(name);
        fs::write(&path, svg).map_err(io_failure(&path))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Check => check(),
        Command::Plot(args) => plot_cmd(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Config(m) | Failure::Runtime(m) | Failure::Disconnected(m) => eprintln!("error: {m}"),
                Failure::Acceptance => eprintln!("error: acceptance criteria failed"),
            }
            ExitCode::from(f.code())
        }
    }
}
