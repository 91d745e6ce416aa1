use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use gridgsp::cases::ieee118;
use gridgsp::detect::{fit_baseline, gamma_statistic, run_detector, BaselineModel, DetectionReport, DetectorId};
use gridgsp::gridsim::{LineFailure, ProfileConfig, SimulationConfig};
use gridgsp::harness::{ExperimentPlan, ExperimentResult};
use gridgsp::threat::{inject as corrupt, RangeTable, StressKind, StressScenario};
use gridgsp::topology::{
    apply_coordinates, build_bus_graph, build_line_graph, parse_coordinates_csv, parse_matpower_case,
    read_native_case, write_native_case,
};
use gridgsp::{eigendecompose, Error, GridCase, GridGraph, TimeVaryingSignal};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::{DetectArgs, Domain, EvaluateArgs, InjectArgs, Method, ParseCaseArgs, SimulateArgs, SpectrumArgs};

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads `path` and parses it, attaching the path to any error.
fn load<T>(path: &Path, parse: impl FnOnce(&str) -> gridgsp::Result<T>) -> CliResult<T> {
    let text = read(path)?;
    parse(&text).map_err(|e| CliError::in_file(path, e))
}

fn write(dir: &Path, name: &str, contents: &str) -> CliResult<()> {
    let io = |source| CliError::Io {
        path: dir.join(name),
        source,
    };
    fs::create_dir_all(dir).map_err(io)?;
    fs::write(dir.join(name), contents).map_err(io)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(Error::from)? + "\n";
    write(dir, name, &text)
}

fn load_case_file(path: &Path) -> CliResult<GridCase> {
    let native = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    load(path, |t| if native { read_native_case(t) } else { parse_matpower_case(t) })
}

fn load_case(cfg: &RunConfig) -> CliResult<GridCase> {
    match &cfg.case {
        Some(p) => load_case_file(p),
        None => Ok(ieee118()?),
    }
}

fn load_signal(path: &Path) -> CliResult<TimeVaryingSignal> {
    load(path, TimeVaryingSignal::from_csv)
}

fn graph_for(cfg: &RunConfig, case: &GridCase, domain: Domain) -> CliResult<GridGraph> {
    Ok(match domain {
        Domain::Bus => build_bus_graph(case, cfg.weighting)?,
        Domain::Line => build_line_graph(case)?,
    })
}

/// `meta.json` holds everything that legitimately differs between reruns.
pub fn write_meta(cfg: &RunConfig, command: &str, argv: &[String]) -> CliResult<()> {
    #[derive(Serialize)]
    struct Meta<'a> {
        command: &'a str,
        version: &'a str,
        argv: &'a [String],
        started_unix_ms: u128,
    }
    let started_unix_ms = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis());
    write_json(
        &cfg.out,
        "meta.json",
        &Meta {
            command,
            version: env!("CARGO_PKG_VERSION"),
            argv,
            started_unix_ms,
        },
    )?;
    write_json(&cfg.out, "run_config.json", cfg)
}

pub fn parse_case(cfg: &RunConfig, args: &ParseCaseArgs) -> CliResult<()> {
    let mut case = match &args.input {
        Some(p) => load_case_file(p)?,
        None => load_case(cfg)?,
    };
    if let Some(path) = &args.coords {
        let coords = load(path, parse_coordinates_csv)?;
        apply_coordinates(&mut case, &coords).map_err(|e| CliError::in_file(path, e))?;
    }
    let graph = build_bus_graph(&case, cfg.weighting)?;
    let in_service = case.in_service_branches().len();
    let slack = case.slack_index().map(|i| case.buses[i].id.to_string());
    println!("buses {}", case.buses.len());
    println!("branches {} in service, {} out", in_service, case.branches.len() - in_service);
    println!("slack bus {}", slack.as_deref().unwrap_or("none"));
    println!("total load {:.4} pu on base {} MVA", case.buses.iter().map(|b| b.p_load).sum::<f64>(), case.base_mva);
    println!("bus graph components {}", graph.component_count());
    write(&cfg.out, "case.json", &(write_native_case(&case)? + "\n"))
}

pub fn spectrum(cfg: &RunConfig, args: &SpectrumArgs) -> CliResult<()> {
    let case = load_case(cfg)?;
    let graph = graph_for(cfg, &case, args.graph)?;
    let basis = eigendecompose(&graph)?;
    let signal = load_signal(&args.signal)?;
    if args.step >= signal.steps() {
        let e = Error::Config(format!("step {} outside [0, {})", args.step, signal.steps()));
        return Err(CliError::in_file(&args.signal, e));
    }
    let x = signal.row(args.step);
    let coefficients = basis.gft(x).map_err(|e| CliError::in_file(&args.signal, e))?;
    let cut = cfg.detector.lambda_cut;
    let gamma = gamma_statistic(&basis, x, cut)?;
    let total: f64 = coefficients.iter().map(|c| c * c).sum();
    let high: f64 = coefficients
        .iter()
        .zip(basis.normalized_frequencies())
        .filter(|(_, &f)| f > cut)
        .map(|(c, _)| c * c)
        .sum();
    println!("gamma {gamma:?}");
    println!("high_band_energy_fraction {:?}", if total > 0.0 { high / total } else { 0.0 });
    write(&cfg.out, "spectrum.csv", &basis.spectrum_csv(&coefficients)?)
}

pub fn simulate(cfg: &RunConfig, args: &SimulateArgs) -> CliResult<()> {
    #[derive(Serialize)]
    struct Record<'a> {
        #[serde(flatten)]
        config: &'a SimulationConfig,
        /// Branch-table position of each `line_flows.csv` column.
        line_branches: &'a [usize],
        max_balance_residual: f64,
    }
    let case = load_case(cfg)?;
    let config = SimulationConfig {
        steps: cfg.steps,
        profile: ProfileConfig {
            shape: args.profile,
            noise_sigma: cfg.noise_sigma,
        },
        failure: args
            .fail_branch
            .zip(args.fail_step)
            .map(|(branch, step)| LineFailure { branch, step }),
        seed: cfg.seed,
    };
    let sim = config.run(&case)?;
    write(&cfg.out, "bus_angles.csv", &sim.bus_angles.to_csv())?;
    write(&cfg.out, "line_flows.csv", &sim.line_flows.to_csv())?;
    write_json(
        &cfg.out,
        "simulation.json",
        &Record {
            config: &config,
            line_branches: &sim.line_branches,
            max_balance_residual: sim.max_balance_residual,
        },
    )?;
    println!(
        "{} steps, {} buses, {} branches, max balance residual {:e}",
        config.steps,
        sim.bus_angles.width(),
        sim.line_flows.width(),
        sim.max_balance_residual
    );
    Ok(())
}

pub fn inject(cfg: &RunConfig, args: &InjectArgs) -> CliResult<()> {
    let signal = load_signal(&args.signal)?;
    let mut scenario = StressScenario::new(args.kind, args.targets.clone(), args.start, args.end, cfg.seed)?;
    let ranges = match args.kind {
        StressKind::Fdia => {
            scenario = scenario.with_alpha(args.alpha);
            let history = match &args.ranges {
                Some(p) => load_signal(p)?,
                None => signal.clone(),
            };
            Some(RangeTable::from_history(&history))
        }
        StressKind::Replay => {
            scenario = scenario.with_replay_offset(args.replay_offset.unwrap_or(args.start));
            None
        }
        _ => None,
    };
    let corrupted = corrupt(&signal, &scenario, ranges.as_ref()).map_err(|e| CliError::in_file(&args.signal, e))?;
    write(&cfg.out, "corrupted.csv", &corrupted.to_csv())?;
    write_json(&cfg.out, "truth.json", &scenario)?;
    println!(
        "{} on {:?} over steps [{}, {}]",
        args.kind.name(),
        args.targets,
        args.start,
        args.end
    );
    Ok(())
}

pub fn detect(cfg: &RunConfig, args: &DetectArgs) -> CliResult<()> {
    #[derive(Serialize)]
    struct Labelled<'a> {
        #[serde(flatten)]
        report: &'a DetectionReport,
        /// Graph labels (bus ids on the bus graph) of `located`.
        located_labels: Vec<u32>,
    }
    let case = load_case(cfg)?;
    let graph = graph_for(cfg, &case, args.graph)?;
    let basis = eigendecompose(&graph)?;
    let signal = load_signal(&args.signal)?;
    let model = match (&args.model, &args.history) {
        (Some(path), _) => {
            let mut model = load(path, BaselineModel::from_json)?;
            // Thresholds apply at detection time, so explicit ones override the file.
            let e = &cfg.explicit;
            let c = &mut model.config;
            c.gamma_threshold = e.gamma_threshold.unwrap_or(c.gamma_threshold);
            c.smoothness_threshold = e.smoothness_threshold.unwrap_or(c.smoothness_threshold);
            c.energy_threshold = e.energy_threshold.unwrap_or(c.energy_threshold);
            c.validate()?;
            model
        }
        (None, Some(path)) => {
            let history = load_signal(path)?;
            let model = fit_baseline(&history, &basis, &graph, cfg.detector).map_err(|e| CliError::in_file(path, e))?;
            write(&cfg.out, "model.json", &(model.to_json()? + "\n"))?;
            model
        }
        (None, None) => unreachable!("clap requires one of --model or --history"),
    };
    if model.n() != graph.n() {
        return Err(Error::DimensionMismatch {
            expected: graph.n(),
            found: model.n(),
        }
        .into());
    }
    if signal.width() != graph.n() {
        let e = Error::DimensionMismatch {
            expected: graph.n(),
            found: signal.width(),
        };
        return Err(CliError::in_file(&args.signal, e));
    }
    let detector = match args.method {
        Method::Gft => DetectorId::Gft,
        Method::Smoothness => DetectorId::LocalSmoothness,
        Method::Vfed => DetectorId::Vfed,
    };
    let from = args.from.unwrap_or(model.config.mean_window);
    let report = run_detector(detector, &model, &basis, &graph, &signal, from, 0)?;
    let located_labels: Vec<u32> = report.located.iter().map(|&v| graph.labels()[v]).collect();
    println!(
        "{} {} ({} alarmed steps), located {:?}",
        detector.name(),
        if report.stressed() { "stressed" } else { "normal" },
        report.alarms.len(),
        located_labels
    );
    write_json(
        &cfg.out,
        "report.json",
        &Labelled {
            report: &report,
            located_labels,
        },
    )
}

pub fn evaluate(cfg: &RunConfig, args: &EvaluateArgs) -> CliResult<()> {
    let mut plan = match &args.plan {
        Some(p) => load(p, |t| Ok(serde_json::from_str::<ExperimentPlan>(t)?))?,
        None => ExperimentPlan::default(),
    };
    let e = &cfg.explicit;
    plan.seed = e.seed.unwrap_or(plan.seed);
    plan.steps = e.steps.unwrap_or(plan.steps);
    plan.n_scenarios = args.n_scenarios.unwrap_or(plan.n_scenarios);
    let t = &mut plan.training;
    t.runs = args.training_runs.unwrap_or(t.runs);
    t.noise_sigma = e.noise_sigma.unwrap_or(t.noise_sigma);
    t.weighting = e.weighting.unwrap_or(t.weighting);
    let d = &mut t.detector;
    d.lambda_cut = e.lambda_cut.unwrap_or(d.lambda_cut);
    d.gamma_threshold = e.gamma_threshold.unwrap_or(d.gamma_threshold);
    d.smoothness_threshold = e.smoothness_threshold.unwrap_or(d.smoothness_threshold);
    d.energy_threshold = e.energy_threshold.unwrap_or(d.energy_threshold);
    d.mean_window = e.mean_window.unwrap_or(d.mean_window);
    d.energy_likelihood = e.energy_likelihood.unwrap_or(d.energy_likelihood);

    let case = load_case(cfg)?;
    let result: ExperimentResult = gridgsp::harness::run_experiment(&plan, &case)?;
    result.write(&cfg.out)?;
    write_json(&cfg.out, "plan.json", &plan)?;
    print!("{}", result.metrics.curves_csv());
    Ok(())
}
