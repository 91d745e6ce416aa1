//! Run configuration, layered as built-in defaults < `--config` file <
//! `GRIDGSP_*` environment variables < command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use gridgsp::detect::{DetectorConfig, EnergyLikelihood};
use gridgsp::gridsim::{DEFAULT_NOISE_SIGMA, DEFAULT_STEPS};
use gridgsp::topology::Weighting;
use gridgsp::Error;

use crate::error::{CliError, CliResult};

/// Parses a snake_case enum name the same way the JSON config does.
pub fn snake<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_owned())).map_err(|e| e.to_string())
}

/// One configuration layer. Every key is optional so layers can be stacked;
/// the same struct reads the config file and the flags.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    /// Case file, MATPOWER `.m` or native `.json` [default: built-in IEEE 118].
    #[arg(long, global = true, env = "GRIDGSP_CASE", value_name = "PATH", help_heading = "Run configuration")]
    pub case: Option<PathBuf>,

    /// Bus-graph edge weights: inverse_reactance, inverse_distance or unit.
    #[arg(long, global = true, env = "GRIDGSP_WEIGHTING", value_parser = snake::<Weighting>, help_heading = "Run configuration")]
    pub weighting: Option<Weighting>,

    /// High-pass cutoff on normalized frequency, in [0, 1).
    #[arg(long, global = true, env = "GRIDGSP_LAMBDA_CUT", help_heading = "Run configuration")]
    pub lambda_cut: Option<f64>,

    #[arg(long, global = true, env = "GRIDGSP_GAMMA_THRESHOLD", help_heading = "Run configuration")]
    pub gamma_threshold: Option<f64>,

    #[arg(long, global = true, env = "GRIDGSP_SMOOTHNESS_THRESHOLD", help_heading = "Run configuration")]
    pub smoothness_threshold: Option<f64>,

    #[arg(long, global = true, env = "GRIDGSP_ENERGY_THRESHOLD", help_heading = "Run configuration")]
    pub energy_threshold: Option<f64>,

    /// Rolling-mean window in steps; also the first scored step.
    #[arg(long, global = true, env = "GRIDGSP_MEAN_WINDOW", help_heading = "Run configuration")]
    pub mean_window: Option<usize>,

    /// Energy likelihood: squared_normal or piecewise_gamma.
    #[arg(long, global = true, env = "GRIDGSP_ENERGY_LIKELIHOOD", value_parser = snake::<EnergyLikelihood>, help_heading = "Run configuration")]
    pub energy_likelihood: Option<EnergyLikelihood>,

    /// Relative load noise per bus and step.
    #[arg(long, global = true, env = "GRIDGSP_NOISE_SIGMA", help_heading = "Run configuration")]
    pub noise_sigma: Option<f64>,

    /// Steps per simulated run.
    #[arg(long = "steps", global = true, env = "GRIDGSP_T", value_name = "T", help_heading = "Run configuration")]
    #[serde(rename = "T")]
    pub steps: Option<usize>,

    #[arg(long, global = true, env = "GRIDGSP_SEED", help_heading = "Run configuration")]
    pub seed: Option<u64>,

    /// Output directory [default: out].
    #[arg(long, global = true, env = "GRIDGSP_OUT", value_name = "DIR", help_heading = "Run configuration")]
    pub out: Option<PathBuf>,
}

impl Layer {
    /// Keys set in `self` win over those in `below`.
    fn over(self, below: Layer) -> Layer {
        Layer {
            case: self.case.or(below.case),
            weighting: self.weighting.or(below.weighting),
            lambda_cut: self.lambda_cut.or(below.lambda_cut),
            gamma_threshold: self.gamma_threshold.or(below.gamma_threshold),
            smoothness_threshold: self.smoothness_threshold.or(below.smoothness_threshold),
            energy_threshold: self.energy_threshold.or(below.energy_threshold),
            mean_window: self.mean_window.or(below.mean_window),
            energy_likelihood: self.energy_likelihood.or(below.energy_likelihood),
            noise_sigma: self.noise_sigma.or(below.noise_sigma),
            steps: self.steps.or(below.steps),
            seed: self.seed.or(below.seed),
            out: self.out.or(below.out),
        }
    }

    fn from_file(path: &Path) -> CliResult<Layer> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut layer: Layer = serde_json::from_str(&text).map_err(|e| CliError::in_file(path, e.into()))?;
        // Paths inside a config file are relative to the file itself.
        let base = path.parent().unwrap_or(Path::new(""));
        layer.case = layer.case.map(|c| base.join(c));
        layer.out = layer.out.map(|o| base.join(o));
        Ok(layer)
    }
}

/// Fully resolved configuration for one invocation.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub case: Option<PathBuf>,
    pub weighting: Weighting,
    pub detector: DetectorConfig,
    pub noise_sigma: f64,
    #[serde(rename = "T")]
    pub steps: usize,
    pub seed: u64,
    pub out: PathBuf,
    /// Keys set by a file, the environment or a flag, as opposed to defaults.
    #[serde(skip)]
    pub explicit: Layer,
}

impl RunConfig {
    pub fn resolve(config_file: Option<&Path>, flags: Layer) -> CliResult<RunConfig> {
        let file = match config_file {
            Some(p) => Layer::from_file(p)?,
            None => Layer::default(),
        };
        let explicit = flags.over(file);
        let defaults = DetectorConfig::default();
        let l = explicit.clone();
        let cfg = RunConfig {
            case: l.case,
            weighting: l.weighting.unwrap_or_default(),
            detector: DetectorConfig {
                lambda_cut: l.lambda_cut.unwrap_or(defaults.lambda_cut),
                gamma_threshold: l.gamma_threshold.unwrap_or(defaults.gamma_threshold),
                smoothness_threshold: l.smoothness_threshold.unwrap_or(defaults.smoothness_threshold),
                energy_threshold: l.energy_threshold.unwrap_or(defaults.energy_threshold),
                mean_window: l.mean_window.unwrap_or(defaults.mean_window),
                energy_likelihood: l.energy_likelihood.unwrap_or(defaults.energy_likelihood),
                sigma_floor: defaults.sigma_floor,
            },
            noise_sigma: l.noise_sigma.unwrap_or(DEFAULT_NOISE_SIGMA),
            steps: l.steps.unwrap_or(DEFAULT_STEPS),
            seed: l.seed.unwrap_or(0),
            out: l.out.unwrap_or_else(|| PathBuf::from("out")),
            explicit,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> CliResult<()> {
        if let Some(case) = &self.case {
            if !case.is_file() {
                return Err(Error::Config(format!("case file {} does not exist", case.display())).into());
            }
        }
        self.detector.validate()?;
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::Config(format!("noise_sigma {} must be finite and >= 0", self.noise_sigma)).into());
        }
        if self.steps == 0 {
            return Err(Error::Config("T must be at least 1".into()).into());
        }
        Ok(())
    }
}
