//! Monte-Carlo evaluation of the detectors on simulated IEEE-style grids.
//!
//! An experiment trains one baseline per graph domain from clean daily runs,
//! draws scenarios from a seeded plan, corrupts them, runs the detectors and
//! scores verdicts and locations against ground truth.
//!
//! Scenario draws depend only on `(seed, scenario index)`, never on α, so an
//! α sweep compares the same scenarios under different attack strengths.
//! Work is spread over rayon but every reduction runs in index order, which
//! keeps results bit-identical regardless of thread count.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::{
    run_detector, BaselineModel, BaselineTrainer, DensityCounts, DetectionReport, DetectorConfig, DetectorId,
    SupportStats,
};
use crate::error::{Error, Result};
use crate::gridsim::{simulate, synth_profile, DcNetwork, LineFailure, LoadProfile, ProfileShape, Simulation};
use crate::spectral::{eigendecompose, SpectralBasis};
use crate::threat::{inject, RangeTable, StressKind, StressScenario};
use crate::topology::{build_bus_graph, build_line_graph, GridCase, GridGraph, Weighting};

const STREAM_TRAINING: u64 = 0x7472_6169_6e00_0000;
const STREAM_SCENARIO: u64 = 0x7363_656e_0000_0000;

/// SplitMix64 finaliser over `(base, stream, index)`.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackMix {
    pub none: f64,
    pub dos: f64,
    pub replay: f64,
    pub fdia: f64,
    pub line_failure: f64,
}

impl Default for AttackMix {
    /// Half normal, the rest split evenly over the three cyber attacks.
    fn default() -> Self {
        AttackMix {
            none: 0.5,
            dos: 1.0 / 6.0,
            replay: 1.0 / 6.0,
            fdia: 1.0 / 6.0,
            line_failure: 0.0,
        }
    }
}

impl AttackMix {
    pub fn only(kind: StressKind) -> Self {
        let mut mix = AttackMix {
            none: 0.0,
            dos: 0.0,
            replay: 0.0,
            fdia: 0.0,
            line_failure: 0.0,
        };
        *mix.weight_mut(kind) = 1.0;
        mix
    }

    /// Half normal, half line failures.
    pub fn line_failures() -> Self {
        AttackMix {
            none: 0.5,
            line_failure: 0.5,
            ..AttackMix::only(StressKind::None)
        }
    }

    fn weight_mut(&mut self, kind: StressKind) -> &mut f64 {
        match kind {
            StressKind::None => &mut self.none,
            StressKind::Dos => &mut self.dos,
            StressKind::Replay => &mut self.replay,
            StressKind::Fdia => &mut self.fdia,
            StressKind::LineFailure => &mut self.line_failure,
        }
    }

    pub fn weight(&self, kind: StressKind) -> f64 {
        match kind {
            StressKind::None => self.none,
            StressKind::Dos => self.dos,
            StressKind::Replay => self.replay,
            StressKind::Fdia => self.fdia,
            StressKind::LineFailure => self.line_failure,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let weights = StressKind::ALL.map(|k| self.weight(k));
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Config("attack_mix weights must be non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("attack_mix sums to {total}, expected 1")));
        }
        Ok(())
    }

    fn draw(&self, u: f64) -> StressKind {
        let mut acc = 0.0;
        for kind in StressKind::ALL {
            acc += self.weight(kind);
            if u < acc && self.weight(kind) > 0.0 {
                return kind;
            }
        }
        StressKind::ALL
            .into_iter()
            .rev()
            .find(|&k| self.weight(k) > 0.0)
            .unwrap_or(StressKind::None)
    }
}

/// Clean history used to fit the baselines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingPlan {
    /// Independent clean runs, each one full load cycle.
    pub runs: usize,
    /// Steps per run; also the period of the load cycle scenarios are cut from.
    pub steps: usize,
    pub noise_sigma: f64,
    pub profile: ProfileShape,
    pub weighting: Weighting,
    pub detector: DetectorConfig,
    pub seed: u64,
}

impl Default for TrainingPlan {
    fn default() -> Self {
        TrainingPlan {
            runs: 1600,
            steps: 288,
            noise_sigma: crate::gridsim::DEFAULT_NOISE_SIGMA,
            profile: ProfileShape::Daily,
            weighting: Weighting::InverseReactance,
            detector: DetectorConfig::default(),
            seed: 1,
        }
    }
}

/// How a scenario's located vertices are read from its alarms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocateRule {
    /// Vertices flagged at any alarmed step.
    #[default]
    Union,
    /// Vertices flagged at the first alarmed step.
    FirstAlarm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentPlan {
    pub n_scenarios: usize,
    pub attack_mix: AttackMix,
    /// One block of `n_scenarios` per value; empty means a single block
    /// without FDIA.
    pub alpha_grid: Vec<f64>,
    /// Inclusive `[min, max]` number of attacked vertices.
    pub targets_per_attack: [usize; 2],
    #[serde(rename = "T")]
    pub steps: usize,
    pub seed: u64,
    pub locate_rule: LocateRule,
    pub training: TrainingPlan,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        ExperimentPlan {
            n_scenarios: 500,
            attack_mix: AttackMix::default(),
            alpha_grid: vec![1.0, 2.0, 3.0, 4.0, 5.0],
            targets_per_attack: [1, 1],
            steps: 48,
            seed: 2024,
            locate_rule: LocateRule::default(),
            training: TrainingPlan::default(),
        }
    }
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        self.attack_mix.validate()?;
        self.training.detector.validate()?;
        if self.n_scenarios == 0 {
            return Err(Error::Config("n_scenarios must be at least 1".into()));
        }
        let [lo, hi] = self.targets_per_attack;
        if lo == 0 || lo > hi {
            return Err(Error::Config(format!("targets_per_attack [{lo}, {hi}] is not a valid range")));
        }
        if self.attack_mix.fdia > 0.0 && self.alpha_grid.is_empty() {
            return Err(Error::Config("fdia scenarios need a non-empty alpha_grid".into()));
        }
        if self.alpha_grid.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::Config("alpha values must be finite and >= 0".into()));
        }
        let window = self.training.detector.mean_window;
        if self.steps / 4 < window {
            return Err(Error::Config(format!(
                "T = {} leaves fewer than mean_window = {window} clean steps before the earliest attack",
                self.steps
            )));
        }
        if self.steps * 3 / 4 < self.steps / 4 + 4 {
            return Err(Error::Config(format!("T = {} cannot fit a 5-step attack window", self.steps)));
        }
        if self.training.runs == 0 || self.training.steps < self.steps {
            return Err(Error::Config("training runs must be at least as long as T".into()));
        }
        Ok(())
    }

    fn alphas(&self) -> Vec<Option<f64>> {
        if self.alpha_grid.is_empty() {
            vec![None]
        } else {
            self.alpha_grid.iter().map(|&a| Some(a)).collect()
        }
    }

    fn needs_line_graph(&self) -> bool {
        self.attack_mix.line_failure > 0.0
    }

    /// First step scored by every detector.
    pub fn eval_start(&self) -> usize {
        self.training.detector.mean_window
    }
}

/// Fitted baselines and graph domains shared by every scenario.
#[derive(Debug, Clone)]
pub struct ExperimentContext {
    pub case: GridCase,
    pub training: TrainingPlan,
    pub bus_graph: GridGraph,
    pub bus_basis: SpectralBasis,
    pub bus_model: BaselineModel,
    pub line: Option<LineDomain>,
    pub ranges: RangeTable,
    slack: usize,
    feasible_failures: Vec<usize>,
    day: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LineDomain {
    pub graph: GridGraph,
    pub basis: SpectralBasis,
    pub model: BaselineModel,
    /// Branch-table position → line-graph vertex.
    pub vertex_of_branch: HashMap<usize, usize>,
}

fn training_run(case: &GridCase, training: &TrainingPlan, day: &[f64], i: usize) -> Result<Simulation> {
    let profile = LoadProfile::for_case(case, day.to_vec(), training.noise_sigma)?;
    simulate(case, &profile, None, derive_seed(training.seed, STREAM_TRAINING, i as u64))
}

impl ExperimentContext {
    /// Builds the graph domains and fits baselines from the plan's training runs.
    pub fn prepare(plan: &ExperimentPlan, case: &GridCase) -> Result<Self> {
        plan.validate()?;
        let training = plan.training.clone();
        let bus_graph = build_bus_graph(case, training.weighting)?;
        let bus_basis = eigendecompose(&bus_graph)?;
        let line_parts = if plan.needs_line_graph() {
            let g = build_line_graph(case)?;
            let b = eigendecompose(&g)?;
            Some((g, b))
        } else {
            None
        };
        let day = synth_profile(training.steps, training.profile);

        let bus_trainer = BaselineTrainer::new(&bus_basis, &bus_graph, training.detector)?;
        let line_trainer = line_parts
            .as_ref()
            .map(|(g, b)| BaselineTrainer::new(b, g, training.detector))
            .transpose()?;

        type FirstPass = (SupportStats, Option<SupportStats>, RangeTable);
        let first: Vec<FirstPass> = (0..training.runs)
            .into_par_iter()
            .map(|i| {
                let sim = training_run(case, &training, &day, i)?;
                let bus = bus_trainer.support(&sim.bus_angles)?;
                let line = line_trainer.as_ref().map(|t| t.support(&sim.line_flows)).transpose()?;
                Ok((bus, line, RangeTable::from_history(&sim.bus_angles)))
            })
            .collect::<Result<_>>()?;
        let mut bus_support = bus_trainer.empty_support();
        let mut line_support = line_trainer.as_ref().map(|t| t.empty_support());
        let mut ranges = RangeTable::empty(bus_graph.n());
        for (b, l, r) in &first {
            bus_support.merge(b)?;
            if let (Some(acc), Some(l)) = (line_support.as_mut(), l) {
                acc.merge(l)?;
            }
            ranges.merge(r)?;
        }
        drop(first);

        let second: Vec<(DensityCounts, Option<DensityCounts>)> = (0..training.runs)
            .into_par_iter()
            .map(|i| {
                let sim = training_run(case, &training, &day, i)?;
                let bus = bus_trainer.counts(&bus_support, &sim.bus_angles)?;
                let line = match (&line_trainer, &line_support) {
                    (Some(t), Some(s)) => Some(t.counts(s, &sim.line_flows)?),
                    _ => None,
                };
                Ok((bus, line))
            })
            .collect::<Result<_>>()?;
        let mut bus_counts = bus_trainer.empty_counts(&bus_support);
        let mut line_counts = match (&line_trainer, &line_support) {
            (Some(t), Some(s)) => Some(t.empty_counts(s)),
            _ => None,
        };
        for (b, l) in &second {
            bus_counts.merge(b)?;
            if let (Some(acc), Some(l)) = (line_counts.as_mut(), l) {
                acc.merge(l)?;
            }
        }
        let bus_model = bus_trainer.finish(&bus_support, &bus_counts)?;
        let line_model = match (&line_trainer, &line_support, &line_counts) {
            (Some(t), Some(s), Some(c)) => Some(t.finish(s, c)?),
            _ => None,
        };

        let line = match (line_parts, line_model) {
            (Some((graph, basis)), Some(model)) => {
                let vertex_of_branch = graph
                    .labels()
                    .iter()
                    .enumerate()
                    .map(|(v, &k)| (k as usize, v))
                    .collect();
                Some(LineDomain {
                    graph,
                    basis,
                    model,
                    vertex_of_branch,
                })
            }
            _ => None,
        };

        let feasible_failures = case
            .in_service_branches()
            .into_iter()
            .filter(|&k| DcNetwork::new(case, &[k]).is_ok())
            .collect();
        Ok(ExperimentContext {
            case: case.clone(),
            training,
            bus_graph,
            bus_basis,
            bus_model,
            line,
            ranges,
            slack: case
                .slack_index()
                .ok_or_else(|| Error::Validation("case has no slack bus".into()))?,
            feasible_failures,
            day,
        })
    }

    /// Branch-table positions whose loss keeps the network connected.
    pub fn feasible_failures(&self) -> &[usize] {
        &self.feasible_failures
    }

    fn check_plan(&self, plan: &ExperimentPlan) -> Result<()> {
        plan.validate()?;
        if plan.training != self.training {
            return Err(Error::Config("plan training section differs from the fitted context".into()));
        }
        if plan.needs_line_graph() && self.line.is_none() {
            return Err(Error::Config("context was fitted without the line graph".into()));
        }
        Ok(())
    }
}

/// Everything needed to rebuild one scenario's signals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRecord {
    pub id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub truth: StressScenario,
    /// Start of the scenario within the load cycle.
    pub profile_offset: usize,
    pub sim_seed: u64,
}

/// Draws the plan's scenarios. Index `i` of every α block shares all draws
/// except α itself.
pub fn generate_scenarios(plan: &ExperimentPlan, ctx: &ExperimentContext) -> Result<Vec<ScenarioRecord>> {
    ctx.check_plan(plan)?;
    let n_bus = ctx.case.buses.len();
    let pool: Vec<usize> = (0..n_bus).filter(|&v| v != ctx.slack).collect();
    let [t_min, t_max] = plan.targets_per_attack;
    if t_max > pool.len() {
        return Err(Error::Config(format!(
            "{t_max} targets requested but only {} attackable buses",
            pool.len()
        )));
    }
    if plan.needs_line_graph() && ctx.feasible_failures.is_empty() {
        return Err(Error::InfeasibleTopology("every single-branch outage islands the network".into()));
    }
    let steps = plan.steps;
    let (lo, hi) = (steps / 4, steps * 3 / 4);

    let active = ctx.case.in_service_branches();
    let mut base = Vec::with_capacity(plan.n_scenarios);
    for i in 0..plan.n_scenarios {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(plan.seed, STREAM_SCENARIO, i as u64));
        let kind = plan.attack_mix.draw(rng.random());
        let profile_offset = rng.random_range(0..ctx.training.steps);
        let sim_seed: u64 = rng.random();
        let attack_seed: u64 = rng.random();
        let t_start = rng.random_range(lo..=hi - 4);
        let t_end = rng.random_range(t_start + 4..=hi);
        let count = rng.random_range(t_min..=t_max);
        let targets: Vec<usize> = sample(&mut rng, pool.len(), count).into_iter().map(|j| pool[j]).collect();
        let replay_offset = rng.random_range(1..=t_start);
        let branch = loop {
            let k = active[rng.random_range(0..active.len())];
            if ctx.feasible_failures.contains(&k) || ctx.feasible_failures.is_empty() {
                break k;
            }
        };
        let truth = match kind {
            StressKind::None => StressScenario::normal(attack_seed),
            StressKind::Dos | StressKind::Fdia => StressScenario::new(kind, targets, t_start, t_end, attack_seed)?,
            StressKind::Replay => {
                StressScenario::new(kind, targets, t_start, t_end, attack_seed)?.with_replay_offset(replay_offset)
            }
            StressKind::LineFailure => {
                StressScenario::new(kind, vec![branch], t_start, steps - 1, attack_seed)?
            }
        };
        base.push((truth, profile_offset, sim_seed));
    }

    let mut out = Vec::with_capacity(plan.n_scenarios * plan.alphas().len());
    for (b, alpha) in plan.alphas().into_iter().enumerate() {
        for (i, (truth, profile_offset, sim_seed)) in base.iter().enumerate() {
            let mut truth = truth.clone();
            let alpha = match (truth.kind, alpha) {
                (StressKind::Fdia, Some(a)) => {
                    truth.alpha = Some(a);
                    Some(a)
                }
                _ => alpha,
            };
            out.push(ScenarioRecord {
                id: b * plan.n_scenarios + i,
                alpha,
                truth,
                profile_offset: *profile_offset,
                sim_seed: *sim_seed,
            });
        }
    }
    Ok(out)
}

/// Clean and corrupted signals of one scenario on the graph its detectors use.
#[derive(Debug, Clone)]
pub struct RealizedScenario {
    pub clean: crate::gridsim::TimeVaryingSignal,
    pub corrupted: crate::gridsim::TimeVaryingSignal,
    /// Line-flow signal of a normal scenario, for the line-failure block.
    pub clean_flows: Option<crate::gridsim::TimeVaryingSignal>,
}

impl ScenarioRecord {
    pub fn realize(&self, ctx: &ExperimentContext, steps: usize) -> Result<RealizedScenario> {
        let period = ctx.day.len();
        let multipliers = (0..steps).map(|t| ctx.day[(self.profile_offset + t) % period]).collect();
        let profile = LoadProfile::for_case(&ctx.case, multipliers, ctx.training.noise_sigma)?;
        match self.truth.kind {
            StressKind::LineFailure => {
                let failure = LineFailure {
                    branch: self.truth.targets[0],
                    step: self.truth.t_start,
                };
                let clean = simulate(&ctx.case, &profile, None, self.sim_seed)?.line_flows;
                let corrupted = simulate(&ctx.case, &profile, Some(failure), self.sim_seed)?.line_flows;
                Ok(RealizedScenario {
                    clean,
                    corrupted,
                    clean_flows: None,
                })
            }
            _ => {
                let sim = simulate(&ctx.case, &profile, None, self.sim_seed)?;
                let corrupted = inject(&sim.bus_angles, &self.truth, Some(&ctx.ranges))?;
                Ok(RealizedScenario {
                    clean: sim.bus_angles,
                    corrupted,
                    clean_flows: Some(sim.line_flows),
                })
            }
        }
    }
}

/// Detector outputs for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReports {
    pub scenario: usize,
    /// Detectors run on bus angles (cyber block).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bus: Vec<DetectionReport>,
    /// Detectors run on line flows (line-failure block).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub line: Vec<DetectionReport>,
}

const LINE_DETECTORS: [DetectorId; 2] = [DetectorId::LocalSmoothness, DetectorId::Vfed];

fn evaluate_scenario(plan: &ExperimentPlan, ctx: &ExperimentContext, rec: &ScenarioRecord) -> Result<ScenarioReports> {
    let signals = rec.realize(ctx, plan.steps)?;
    let from = plan.eval_start();
    let mut out = ScenarioReports {
        scenario: rec.id,
        bus: Vec::new(),
        line: Vec::new(),
    };
    let line_detectors = |flows: &crate::gridsim::TimeVaryingSignal| -> Result<Vec<DetectionReport>> {
        let line = ctx
            .line
            .as_ref()
            .ok_or_else(|| Error::Config("line-failure scenario without a line graph".into()))?;
        LINE_DETECTORS
            .iter()
            .map(|&d| run_detector(d, &line.model, &line.basis, &line.graph, flows, from, rec.id))
            .collect()
    };
    if rec.truth.kind == StressKind::LineFailure {
        out.line = line_detectors(&signals.corrupted)?;
        return Ok(out);
    }
    if cyber_block_active(plan) {
        out.bus = DetectorId::ALL
            .iter()
            .map(|&d| run_detector(d, &ctx.bus_model, &ctx.bus_basis, &ctx.bus_graph, &signals.corrupted, from, rec.id))
            .collect::<Result<_>>()?;
    }
    if rec.truth.kind == StressKind::None && plan.needs_line_graph() {
        if let Some(flows) = &signals.clean_flows {
            out.line = line_detectors(flows)?;
        }
    }
    Ok(out)
}

fn cyber_block_active(plan: &ExperimentPlan) -> bool {
    let m = &plan.attack_mix;
    m.dos + m.replay + m.fdia > 0.0 || m.line_failure == 0.0
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KindCounts {
    pub scenarios: usize,
    pub detected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorMetrics {
    pub scenarios: usize,
    pub attacked: usize,
    pub normal: usize,
    pub detected: usize,
    pub missed: usize,
    pub false_alarms: usize,
    pub clean_passed: usize,
    /// Correct verdicts over all scenarios.
    pub detection_accuracy: f64,
    /// Detected over attacked.
    pub detection_rate: f64,
    /// Flagged normal over normal.
    pub false_positive_rate: f64,
    /// Detected attacks whose located set covers every target within `k`
    /// hops, over detected attacks; index `k` = 0 (exact) ..= 3.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub locating_rate_by_hops: Option<Vec<f64>>,
    /// Detected attacks whose located set meets the targets at all.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub locating_rate_overlap: Option<f64>,
    pub by_kind: BTreeMap<String, KindCounts>,
}

impl DetectorMetrics {
    pub fn locating_rate(&self, hops: usize) -> Option<f64> {
        self.locating_rate_by_hops.as_ref().and_then(|v| v.get(hops).copied())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Bus-angle detectors over normal and cyber-attack scenarios.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub cyber: BTreeMap<String, DetectorMetrics>,
    /// Line-flow detectors over normal and line-failure scenarios.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub line_failure: BTreeMap<String, DetectorMetrics>,
}

impl MetricsBlock {
    pub fn cyber(&self, d: DetectorId) -> Option<&DetectorMetrics> {
        self.cyber.get(d.name())
    }

    pub fn line_failure(&self, d: DetectorId) -> Option<&DetectorMetrics> {
        self.line_failure.get(d.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub n_scenarios: usize,
    pub blocks: Vec<MetricsBlock>,
}

impl MetricsTable {
    pub fn block(&self, alpha: Option<f64>) -> Option<&MetricsBlock> {
        self.blocks.iter().find(|b| b.alpha == alpha)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// `alpha,detector,accuracy,fpr,loc_exact,loc_1hop`, cyber blocks only.
    pub fn curves_csv(&self) -> String {
        let mut out = String::from("alpha,detector,accuracy,fpr,loc_exact,loc_1hop\n");
        for block in &self.blocks {
            let alpha = block.alpha.map(|a| format!("{a:?}")).unwrap_or_default();
            for (name, m) in &block.cyber {
                let loc = |k| m.locating_rate(k).map(|v| format!("{v:?}")).unwrap_or_default();
                let _ = writeln!(
                    out,
                    "{alpha},{name},{:?},{:?},{},{}",
                    m.detection_accuracy,
                    m.false_positive_rate,
                    loc(0),
                    loc(1)
                );
            }
        }
        out
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

const MAX_HOPS: usize = 3;

/// Scores one detector's reports against ground truth on `graph`.
///
/// `vertex_of` maps a ground-truth target to a graph vertex (identity for
/// bus targets, branch position → line vertex for line failures).
pub fn score(
    detector: DetectorId,
    reports: &[&DetectionReport],
    truths: &[&StressScenario],
    graph: &GridGraph,
    vertex_of: impl Fn(usize) -> Option<usize>,
    rule: LocateRule,
) -> Result<DetectorMetrics> {
    if reports.len() != truths.len() {
        return Err(Error::mismatch(truths.len(), reports.len()));
    }
    let mut m = DetectorMetrics {
        scenarios: reports.len(),
        attacked: 0,
        normal: 0,
        detected: 0,
        missed: 0,
        false_alarms: 0,
        clean_passed: 0,
        detection_accuracy: 0.0,
        detection_rate: 0.0,
        false_positive_rate: 0.0,
        locating_rate_by_hops: None,
        locating_rate_overlap: None,
        by_kind: BTreeMap::new(),
    };
    let mut located = [0usize; MAX_HOPS + 1];
    let mut overlap = 0usize;
    for (report, truth) in reports.iter().zip(truths) {
        if report.detector != detector {
            return Err(Error::Config(format!(
                "report for {} scored as {}",
                report.detector.name(),
                detector.name()
            )));
        }
        let kind = m.by_kind.entry(truth.kind.name().to_string()).or_default();
        kind.scenarios += 1;
        if report.stressed() {
            kind.detected += 1;
        }
        if !truth.is_attack() {
            m.normal += 1;
            if report.stressed() {
                m.false_alarms += 1;
            } else {
                m.clean_passed += 1;
            }
            continue;
        }
        m.attacked += 1;
        if !report.stressed() {
            m.missed += 1;
            continue;
        }
        m.detected += 1;
        let flagged = match rule {
            LocateRule::Union => &report.located[..],
            LocateRule::FirstAlarm => report.first_located(),
        };
        let targets = truth
            .targets
            .iter()
            .map(|&t| vertex_of(t).ok_or_else(|| Error::Config(format!("target {t} is not a graph vertex"))))
            .collect::<Result<Vec<_>>>()?;
        let nearest: Vec<Option<usize>> = targets
            .iter()
            .map(|&t| {
                let hops = graph.hop_distances_from(t);
                flagged.iter().filter_map(|&v| hops.get(v).copied().flatten()).min()
            })
            .collect();
        for (k, slot) in located.iter_mut().enumerate() {
            if nearest.iter().all(|d| d.is_some_and(|d| d <= k)) {
                *slot += 1;
            }
        }
        if nearest.iter().any(|d| d == &Some(0)) {
            overlap += 1;
        }
    }
    m.detection_accuracy = ratio(m.detected + m.clean_passed, m.scenarios);
    m.detection_rate = ratio(m.detected, m.attacked);
    m.false_positive_rate = ratio(m.false_alarms, m.normal);
    if detector.locates() {
        m.locating_rate_by_hops = Some(located.iter().map(|&c| ratio(c, m.detected)).collect());
        m.locating_rate_overlap = Some(ratio(overlap, m.detected));
    }
    Ok(m)
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub metrics: MetricsTable,
    pub scenarios: Vec<ScenarioRecord>,
    pub reports: Vec<ScenarioReports>,
}

impl ExperimentContext {
    /// Generates, corrupts, detects and scores every scenario of `plan`.
    pub fn evaluate(&self, plan: &ExperimentPlan) -> Result<ExperimentResult> {
        let scenarios = generate_scenarios(plan, self)?;
        let reports: Vec<ScenarioReports> = scenarios
            .par_iter()
            .map(|rec| evaluate_scenario(plan, self, rec))
            .collect::<Result<_>>()?;

        let mut blocks = Vec::new();
        for (b, alpha) in plan.alphas().into_iter().enumerate() {
            let range = b * plan.n_scenarios..(b + 1) * plan.n_scenarios;
            let recs = &scenarios[range.clone()];
            let reps = &reports[range];
            let mut block = MetricsBlock {
                alpha,
                cyber: BTreeMap::new(),
                line_failure: BTreeMap::new(),
            };
            for d in DetectorId::ALL {
                let pairs: Vec<(&DetectionReport, &StressScenario)> = recs
                    .iter()
                    .zip(reps)
                    .filter(|(r, _)| r.truth.kind != StressKind::LineFailure)
                    .filter_map(|(r, rep)| rep.bus.iter().find(|x| x.detector == d).map(|x| (x, &r.truth)))
                    .collect();
                if !pairs.is_empty() {
                    let (rs, ts): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
                    block.cyber.insert(
                        d.name().to_string(),
                        score(d, &rs, &ts, &self.bus_graph, Some, plan.locate_rule)?,
                    );
                }
            }
            if let Some(line) = &self.line {
                for d in LINE_DETECTORS {
                    let pairs: Vec<(&DetectionReport, &StressScenario)> = recs
                        .iter()
                        .zip(reps)
                        .filter(|(r, _)| matches!(r.truth.kind, StressKind::None | StressKind::LineFailure))
                        .filter_map(|(r, rep)| rep.line.iter().find(|x| x.detector == d).map(|x| (x, &r.truth)))
                        .collect();
                    if !pairs.is_empty() {
                        let (rs, ts): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
                        block.line_failure.insert(
                            d.name().to_string(),
                            score(
                                d,
                                &rs,
                                &ts,
                                &line.graph,
                                |k| line.vertex_of_branch.get(&k).copied(),
                                plan.locate_rule,
                            )?,
                        );
                    }
                }
            }
            blocks.push(block);
        }
        Ok(ExperimentResult {
            metrics: MetricsTable {
                n_scenarios: plan.n_scenarios,
                blocks,
            },
            scenarios,
            reports,
        })
    }
}

/// Trains, generates, detects and scores in one call.
pub fn run_experiment(plan: &ExperimentPlan, case: &GridCase) -> Result<ExperimentResult> {
    ExperimentContext::prepare(plan, case)?.evaluate(plan)
}

impl ExperimentResult {
    /// Writes `metrics.json`, `curves.csv`, `scenarios/NNNN.json` and
    /// `reports/NNNN.json` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir.join("scenarios"))?;
        fs::create_dir_all(dir.join("reports"))?;
        fs::write(dir.join("metrics.json"), self.metrics.to_json()?)?;
        fs::write(dir.join("curves.csv"), self.metrics.curves_csv())?;
        for (rec, rep) in self.scenarios.iter().zip(&self.reports) {
            let name = format!("{:04}.json", rec.id);
            fs::write(dir.join("scenarios").join(&name), serde_json::to_string_pretty(rec)? + "\n")?;
            fs::write(dir.join("reports").join(&name), serde_json::to_string_pretty(rep)? + "\n")?;
        }
        Ok(())
    }
}
