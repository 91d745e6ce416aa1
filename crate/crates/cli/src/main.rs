mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gridgsp::gridsim::ProfileShape;
use gridgsp::threat::StressKind;

use crate::config::{snake, Layer, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "gridgsp", version, about = "Graph signal processing for power-grid anomaly detection")]
struct Cli {
    /// JSON file with run-configuration keys (same names as the flags, `T` for steps).
    #[arg(long, global = true, env = "GRIDGSP_CONFIG", value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(flatten)]
    layer: Layer,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Domain {
    /// Bus angles on the bus graph.
    Bus,
    /// Branch flows on the line graph.
    Line,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Gft,
    Smoothness,
    Vfed,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Read a case, print a summary and write it as native JSON.
    ParseCase(ParseCaseArgs),
    /// Graph Fourier transform of one signal row.
    Spectrum(SpectrumArgs),
    /// DC power-flow telemetry over a load profile.
    Simulate(SimulateArgs),
    /// Corrupt a signal with a cyber attack.
    Inject(InjectArgs),
    /// Run one detector over a signal.
    Detect(DetectArgs),
    /// Monte-Carlo evaluation of all detectors.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct ParseCaseArgs {
    /// Case file; overrides the configured case.
    pub input: Option<PathBuf>,
    /// `bus_id,x,y` CSV of bus coordinates.
    #[arg(long, value_name = "PATH")]
    pub coords: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    /// Signal CSV with a `t` column followed by one column per vertex.
    #[arg(long, value_name = "PATH")]
    pub signal: PathBuf,
    /// Zero-based row to transform.
    #[arg(long, default_value_t = 0)]
    pub step: usize,
    #[arg(long, value_enum, default_value_t = Domain::Bus)]
    pub graph: Domain,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Load profile: daily, flat or ramp.
    #[arg(long, value_parser = snake::<ProfileShape>, default_value = "daily")]
    pub profile: ProfileShape,
    /// Zero-based branch-table position to trip.
    #[arg(long, requires = "fail_step")]
    pub fail_branch: Option<usize>,
    /// First step without the tripped branch.
    #[arg(long, requires = "fail_branch")]
    pub fail_step: Option<usize>,
}

#[derive(Debug, Args)]
pub struct InjectArgs {
    #[arg(long, value_name = "PATH")]
    pub signal: PathBuf,
    /// dos, replay or fdia.
    #[arg(long, value_parser = snake::<StressKind>)]
    pub kind: StressKind,
    /// Zero-based vertex positions, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub targets: Vec<usize>,
    /// First attacked step.
    #[arg(long)]
    pub start: usize,
    /// Last attacked step, inclusive.
    #[arg(long)]
    pub end: usize,
    /// FDIA magnitude as a multiple of each vertex's range.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Steps back that a replay reads from [default: --start].
    #[arg(long)]
    pub replay_offset: Option<usize>,
    /// Clean history whose per-vertex ranges scale FDIA [default: --signal].
    #[arg(long, value_name = "PATH")]
    pub ranges: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("baseline").required(true).args(["model", "history"])))]
pub struct DetectArgs {
    #[arg(long, value_name = "PATH")]
    pub signal: PathBuf,
    #[arg(long, value_enum)]
    pub method: Method,
    /// Persisted baseline model JSON.
    #[arg(long, value_name = "PATH")]
    pub model: Option<PathBuf>,
    /// Clean history CSV to fit a baseline from; the model is saved as model.json.
    #[arg(long, value_name = "PATH")]
    pub history: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Domain::Bus)]
    pub graph: Domain,
    /// First scored step [default: mean window].
    #[arg(long)]
    pub from: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Experiment plan JSON; missing keys take their defaults.
    #[arg(long, value_name = "PATH")]
    pub plan: Option<PathBuf>,
    /// Scenarios per alpha block.
    #[arg(long)]
    pub n_scenarios: Option<usize>,
    /// Clean training runs per graph.
    #[arg(long)]
    pub training_runs: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let argv: Vec<String> = std::env::args().collect();
    let result = RunConfig::resolve(cli.config.as_deref(), cli.layer).and_then(|cfg| {
        let name = match &cli.command {
            Command::ParseCase(_) => "parse-case",
            Command::Spectrum(_) => "spectrum",
            Command::Simulate(_) => "simulate",
            Command::Inject(_) => "inject",
            Command::Detect(_) => "detect",
            Command::Evaluate(_) => "evaluate",
        };
        match &cli.command {
            Command::ParseCase(a) => commands::parse_case(&cfg, a),
            Command::Spectrum(a) => commands::spectrum(&cfg, a),
            Command::Simulate(a) => commands::simulate(&cfg, a),
            Command::Inject(a) => commands::inject(&cfg, a),
            Command::Detect(a) => commands::detect(&cfg, a),
            Command::Evaluate(a) => commands::evaluate(&cfg, a),
        }?;
        commands::write_meta(&cfg, name, &argv)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
