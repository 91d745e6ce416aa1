//! Baseline estimation and the three stress detectors.
//!
//! * the high-pass GFT detector scores the summed magnitude of graph-frequency
//!   content above a cutoff against its clean-history density;
//! * the local-smoothness detector scores every vertex's `(Lx)(n)/x(n)`
//!   against that vertex's clean-history density;
//! * the energy detector scores each vertex's energy `x(n)²` (the vertex
//!   marginal of the vertex-frequency energy distribution) against a
//!   likelihood centred on the recent rolling mean.
//!
//! Densities are fixed-width histograms with `⌈√samples⌉` bins and zero
//! density outside the observed support, so anything never seen in training
//! has likelihood 0.
//!
//! Training can run over one in-memory history with [`fit_baseline`] or
//! stream over many independent runs with [`BaselineTrainer`], whose
//! partial results merge in any order.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridsim::TimeVaryingSignal;
use crate::gsp::{local_smoothness, LocalSmoothness};
use crate::spectral::SpectralBasis;
use crate::topology::GridGraph;

pub const DEFAULT_THRESHOLD: f64 = 0.005;
pub const DEFAULT_LAMBDA_CUT: f64 = 0.5;
pub const DEFAULT_MEAN_WINDOW: usize = 12;
pub const SIGMA_FLOOR: f64 = 1e-6;
/// Lower clamp on the energy argument, guarding the `1/√y` singularity.
pub const Y_FLOOR: f64 = 1e-12;
pub const MIN_DENSITY_SAMPLES: usize = 100;

/// Histogram pdf estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDensity {
    lo: f64,
    hi: f64,
    bin_width: f64,
    /// Density per bin; empty when every sample was identical.
    densities: Vec<f64>,
    sample_count: usize,
}

impl EmpiricalDensity {
    pub fn fit(samples: &[f64]) -> Result<Self> {
        let mut span = Span::default();
        for &v in samples {
            span.add(v);
        }
        let mut counts = HistogramCounts::new(&span);
        for &v in samples {
            counts.add(&span, v);
        }
        EmpiricalDensity::from_counts(&span, &counts)
    }

    fn from_counts(span: &Span, counts: &HistogramCounts) -> Result<Self> {
        if span.count < MIN_DENSITY_SAMPLES {
            return Err(Error::InsufficientHistory {
                needed: MIN_DENSITY_SAMPLES,
                available: span.count,
            });
        }
        let total: u64 = counts.bins.iter().sum();
        if total as usize != span.count {
            return Err(Error::Numerical {
                message: "histogram counts do not match the support pass".into(),
                residual: (total as f64 - span.count as f64).abs(),
            });
        }
        if span.is_degenerate() {
            return Ok(EmpiricalDensity {
                lo: span.lo,
                hi: span.hi,
                bin_width: 0.0,
                densities: Vec::new(),
                sample_count: span.count,
            });
        }
        let width = span.bin_width();
        let norm = span.count as f64 * width;
        Ok(EmpiricalDensity {
            lo: span.lo,
            hi: span.hi,
            bin_width: width,
            densities: counts.bins.iter().map(|&c| c as f64 / norm).collect(),
            sample_count: span.count,
        })
    }

    pub fn is_degenerate(&self) -> bool {
        self.densities.is_empty()
    }

    pub fn bin_count(&self) -> usize {
        self.densities.len().max(1)
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Density at `v`. A degenerate density is infinite at its single value
    /// (to within a relative 1e-12) and zero elsewhere.
    pub fn density(&self, v: f64) -> f64 {
        if self.is_degenerate() {
            let tol = 1e-12 * self.lo.abs().max(1.0);
            return if (v - self.lo).abs() <= tol { f64::INFINITY } else { 0.0 };
        }
        if !(v >= self.lo && v <= self.hi) {
            return 0.0;
        }
        let idx = (((v - self.lo) / self.bin_width) as usize).min(self.densities.len() - 1);
        self.densities[idx]
    }

    /// Probability mass held in bins whose density is below `threshold`, that
    /// is, the in-sample flag rate of a `density < threshold` test.
    pub fn mass_below(&self, threshold: f64) -> f64 {
        if self.is_degenerate() {
            return 0.0;
        }
        self.densities
            .iter()
            .filter(|&&d| d < threshold)
            .map(|d| d * self.bin_width)
            .sum()
    }

    pub fn integral(&self) -> f64 {
        if self.is_degenerate() {
            1.0
        } else {
            self.densities.iter().sum::<f64>() * self.bin_width
        }
    }
}

/// Observed range and sample count of one feature.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Span {
    lo: f64,
    hi: f64,
    count: usize,
}

impl Default for Span {
    fn default() -> Self {
        Span {
            lo: f64::INFINITY,
            hi: f64::NEG_INFINITY,
            count: 0,
        }
    }
}

impl Span {
    fn add(&mut self, v: f64) {
        self.lo = self.lo.min(v);
        self.hi = self.hi.max(v);
        self.count += 1;
    }

    fn merge(&mut self, other: &Span) {
        self.lo = self.lo.min(other.lo);
        self.hi = self.hi.max(other.hi);
        self.count += other.count;
    }

    fn is_degenerate(&self) -> bool {
        self.hi <= self.lo
    }

    fn bins(&self) -> usize {
        ((self.count as f64).sqrt().ceil() as usize).max(1)
    }

    fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.bins() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
struct HistogramCounts {
    bins: Vec<u64>,
}

impl HistogramCounts {
    fn new(span: &Span) -> Self {
        let n = if span.is_degenerate() { 1 } else { span.bins() };
        HistogramCounts { bins: vec![0; n] }
    }

    fn add(&mut self, span: &Span, v: f64) {
        let idx = if span.is_degenerate() {
            0
        } else {
            (((v - span.lo) / span.bin_width()) as usize).min(self.bins.len() - 1)
        };
        self.bins[idx] += 1;
    }

    fn merge(&mut self, other: &HistogramCounts) {
        for (a, b) in self.bins.iter_mut().zip(&other.bins) {
            *a += b;
        }
    }
}

/// Welford accumulator with the pairwise merge rule.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn add(&mut self, v: f64) {
        self.count += 1;
        let d = v - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (v - self.mean);
    }

    fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let d = other.mean - self.mean;
        self.mean += d * other.count as f64 / n;
        self.m2 += other.m2 + d * d * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    fn sample_std(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).sqrt()
        }
    }
}

/// Likelihood used for a vertex's energy `y = x²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyLikelihood {
    /// Exact density of `x²` for `x ~ N(μ, σ²)`.
    #[default]
    SquaredNormal,
    /// The piece-wise form in [`piecewise_gamma_pdf`].
    PiecewiseGamma,
}

impl EnergyLikelihood {
    pub fn pdf(self, y: f64, mu: f64, sigma: f64) -> f64 {
        match self {
            EnergyLikelihood::SquaredNormal => squared_normal_pdf(y, mu, sigma),
            EnergyLikelihood::PiecewiseGamma => piecewise_gamma_pdf(y, mu, sigma),
        }
    }
}

/// `1/(2σ√(2πy)) · [e^{−(y−μ)/(2σ²)}·u(y−μ) + e^{−(μ−y)/(2σ²)}·u(μ−y)]`
/// with the unit step `u(0) = ½`, so `y = μ` takes half of each branch.
///
/// `y` is clamped to [`Y_FLOOR`]. Note the exponent is linear in `y − μ`
/// over `σ²`, so the expression is not scale-consistent and does not
/// integrate to one in general.
pub fn piecewise_gamma_pdf(y: f64, mu: f64, sigma: f64) -> f64 {
    let y = y.max(Y_FLOOR);
    let pre = 1.0 / (2.0 * sigma * (2.0 * PI * y).sqrt());
    let two_var = 2.0 * sigma * sigma;
    let step = |v: f64| {
        if v > 0.0 {
            1.0
        } else if v == 0.0 {
            0.5
        } else {
            0.0
        }
    };
    pre * ((-(y - mu) / two_var).exp() * step(y - mu) + (-(mu - y) / two_var).exp() * step(mu - y))
}

/// `1/(2σ√(2πy)) · [e^{−(√y−μ)²/(2σ²)} + e^{−(√y+μ)²/(2σ²)}]`, the density of
/// `x²` when `x ~ N(μ, σ²)`. `y` is clamped to [`Y_FLOOR`].
pub fn squared_normal_pdf(y: f64, mu: f64, sigma: f64) -> f64 {
    let y = y.max(Y_FLOOR);
    let r = y.sqrt();
    let pre = 1.0 / (2.0 * sigma * (2.0 * PI * y).sqrt());
    let two_var = 2.0 * sigma * sigma;
    pre * ((-(r - mu).powi(2) / two_var).exp() + (-(r + mu).powi(2) / two_var).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    /// Normalized-frequency cutoff of the high-pass filter, in `[0, 1)`.
    pub lambda_cut: f64,
    pub gamma_threshold: f64,
    pub smoothness_threshold: f64,
    pub energy_threshold: f64,
    /// Steps in the rolling mean preceding each scored step.
    pub mean_window: usize,
    pub sigma_floor: f64,
    pub energy_likelihood: EnergyLikelihood,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            lambda_cut: DEFAULT_LAMBDA_CUT,
            gamma_threshold: DEFAULT_THRESHOLD,
            smoothness_threshold: DEFAULT_THRESHOLD,
            energy_threshold: DEFAULT_THRESHOLD,
            mean_window: DEFAULT_MEAN_WINDOW,
            sigma_floor: SIGMA_FLOOR,
            energy_likelihood: EnergyLikelihood::default(),
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.lambda_cut) {
            return Err(Error::Config(format!("lambda_cut {} outside [0, 1)", self.lambda_cut)));
        }
        for (name, v) in [
            ("gamma_threshold", self.gamma_threshold),
            ("smoothness_threshold", self.smoothness_threshold),
            ("energy_threshold", self.energy_threshold),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("{name} {v} outside (0, 1)")));
            }
        }
        if self.mean_window == 0 {
            return Err(Error::Config("mean_window must be at least 1".into()));
        }
        if !(self.sigma_floor > 0.0) {
            return Err(Error::Config("sigma_floor must be positive".into()));
        }
        Ok(())
    }
}

/// Clean-history statistics shared by all three detectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    pub gamma_density: EmpiricalDensity,
    /// `None` for vertices that had fewer than [`MIN_DENSITY_SAMPLES`] unmasked
    /// smoothness values (for instance a slack bus pinned at zero angle);
    /// such vertices are never flagged by the smoothness detector.
    pub smoothness_densities: Vec<Option<EmpiricalDensity>>,
    /// Per-vertex standard deviation of `x − rolling mean`, floored.
    pub sigma: Vec<f64>,
    #[serde(flatten)]
    pub config: DetectorConfig,
}

impl BaselineModel {
    pub fn n(&self) -> usize {
        self.sigma.len()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: BaselineModel = serde_json::from_str(text)?;
        model.config.validate()?;
        if model.smoothness_densities.len() != model.sigma.len() {
            return Err(Error::mismatch(model.sigma.len(), model.smoothness_densities.len()));
        }
        Ok(model)
    }
}

/// `γ = Σ_k |X̂_k|` over components whose normalized frequency exceeds the cutoff.
pub fn gamma_statistic(basis: &SpectralBasis, x: &[f64], lambda_cut: f64) -> Result<f64> {
    let spectrum = basis.gft(x)?;
    Ok(gamma_from_spectrum(basis, &spectrum, lambda_cut))
}

fn gamma_from_spectrum(basis: &SpectralBasis, spectrum: &[f64], lambda_cut: f64) -> f64 {
    basis
        .normalized_frequencies()
        .iter()
        .zip(spectrum)
        .filter(|(&f, _)| f > lambda_cut)
        .map(|(_, c)| c.abs())
        .sum()
}

/// Mean of rows `[t − window, t)` per vertex.
fn rolling_mean(signal: &TimeVaryingSignal, t: usize, window: usize) -> Result<Vec<f64>> {
    if t < window {
        return Err(Error::InsufficientHistory {
            needed: window,
            available: t,
        });
    }
    let mut mean = vec![0.0; signal.width()];
    for tau in t - window..t {
        for (m, v) in mean.iter_mut().zip(signal.row(tau)) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= window as f64;
    }
    Ok(mean)
}

/// Mergeable first-pass statistics: feature ranges and residual moments.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportStats {
    gamma: Span,
    smoothness: Vec<Span>,
    residual: Vec<Moments>,
}

impl SupportStats {
    pub fn merge(&mut self, other: &SupportStats) -> Result<()> {
        if other.smoothness.len() != self.smoothness.len() {
            return Err(Error::mismatch(self.smoothness.len(), other.smoothness.len()));
        }
        self.gamma.merge(&other.gamma);
        for (a, b) in self.smoothness.iter_mut().zip(&other.smoothness) {
            a.merge(b);
        }
        for (a, b) in self.residual.iter_mut().zip(&other.residual) {
            a.merge(b);
        }
        Ok(())
    }

    pub fn step_count(&self) -> usize {
        self.gamma.count
    }
}

/// Mergeable second-pass statistics: histogram counts over fixed supports.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityCounts {
    gamma: HistogramCounts,
    smoothness: Vec<HistogramCounts>,
}

impl DensityCounts {
    pub fn merge(&mut self, other: &DensityCounts) -> Result<()> {
        if other.smoothness.len() != self.smoothness.len() {
            return Err(Error::mismatch(self.smoothness.len(), other.smoothness.len()));
        }
        self.gamma.merge(&other.gamma);
        for (a, b) in self.smoothness.iter_mut().zip(&other.smoothness) {
            a.merge(b);
        }
        Ok(())
    }
}

/// Two-pass baseline fitting over any number of clean runs.
///
/// Pass one collects supports with [`support`](Self::support); pass two bins
/// the same runs with [`counts`](Self::counts). Both results merge, so runs
/// may be processed in parallel and combined in a fixed order.
#[derive(Debug, Clone, Copy)]
pub struct BaselineTrainer<'a> {
    basis: &'a SpectralBasis,
    graph: &'a GridGraph,
    config: DetectorConfig,
}

impl<'a> BaselineTrainer<'a> {
    pub fn new(basis: &'a SpectralBasis, graph: &'a GridGraph, config: DetectorConfig) -> Result<Self> {
        config.validate()?;
        if basis.n() != graph.n() {
            return Err(Error::mismatch(graph.n(), basis.n()));
        }
        Ok(BaselineTrainer { basis, graph, config })
    }

    fn for_each_step(
        &self,
        run: &TimeVaryingSignal,
        mut visit: impl FnMut(f64, &LocalSmoothness),
    ) -> Result<()> {
        if run.width() != self.graph.n() {
            return Err(Error::mismatch(self.graph.n(), run.width()));
        }
        for x in run.rows() {
            let gamma = gamma_statistic(self.basis, x, self.config.lambda_cut)?;
            let smooth = local_smoothness(self.graph, x)?;
            visit(gamma, &smooth);
        }
        Ok(())
    }

    pub fn empty_support(&self) -> SupportStats {
        let n = self.graph.n();
        SupportStats {
            gamma: Span::default(),
            smoothness: vec![Span::default(); n],
            residual: vec![Moments::default(); n],
        }
    }

    pub fn support(&self, run: &TimeVaryingSignal) -> Result<SupportStats> {
        let mut stats = self.empty_support();
        self.for_each_step(run, |gamma, smooth| {
            stats.gamma.add(gamma);
            for (n, span) in stats.smoothness.iter_mut().enumerate() {
                if let Some(s) = smooth.get(n) {
                    span.add(s);
                }
            }
        })?;
        let window = self.config.mean_window;
        for t in window..run.steps() {
            let mean = rolling_mean(run, t, window)?;
            for (n, m) in stats.residual.iter_mut().enumerate() {
                m.add(run.get(t, n) - mean[n]);
            }
        }
        Ok(stats)
    }

    pub fn empty_counts(&self, support: &SupportStats) -> DensityCounts {
        DensityCounts {
            gamma: HistogramCounts::new(&support.gamma),
            smoothness: support.smoothness.iter().map(HistogramCounts::new).collect(),
        }
    }

    pub fn counts(&self, support: &SupportStats, run: &TimeVaryingSignal) -> Result<DensityCounts> {
        let mut counts = self.empty_counts(support);
        self.for_each_step(run, |gamma, smooth| {
            counts.gamma.add(&support.gamma, gamma);
            for (n, (c, span)) in counts.smoothness.iter_mut().zip(&support.smoothness).enumerate() {
                if let Some(s) = smooth.get(n) {
                    c.add(span, s);
                }
            }
        })?;
        Ok(counts)
    }

    pub fn finish(&self, support: &SupportStats, counts: &DensityCounts) -> Result<BaselineModel> {
        let gamma_density = EmpiricalDensity::from_counts(&support.gamma, &counts.gamma)?;
        let smoothness_densities = support
            .smoothness
            .iter()
            .zip(&counts.smoothness)
            .map(|(span, c)| {
                if span.count < MIN_DENSITY_SAMPLES {
                    Ok(None)
                } else {
                    EmpiricalDensity::from_counts(span, c).map(Some)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let sigma = support
            .residual
            .iter()
            .map(|m| m.sample_std().max(self.config.sigma_floor))
            .collect();
        Ok(BaselineModel {
            gamma_density,
            smoothness_densities,
            sigma,
            config: self.config,
        })
    }
}

/// Fits all three detectors' statistics from one clean history of at least
/// [`MIN_DENSITY_SAMPLES`] steps.
pub fn fit_baseline(
    history: &TimeVaryingSignal,
    basis: &SpectralBasis,
    graph: &GridGraph,
    config: DetectorConfig,
) -> Result<BaselineModel> {
    if history.steps() < MIN_DENSITY_SAMPLES {
        return Err(Error::InsufficientHistory {
            needed: MIN_DENSITY_SAMPLES,
            available: history.steps(),
        });
    }
    let trainer = BaselineTrainer::new(basis, graph, config)?;
    let support = trainer.support(history)?;
    let counts = trainer.counts(&support, history)?;
    trainer.finish(&support, &counts)
}

/// Alarm when the clean-history density of `γ(x)` falls below its threshold.
pub fn detect_gft(model: &BaselineModel, basis: &SpectralBasis, x: &[f64]) -> Result<bool> {
    let gamma = gamma_statistic(basis, x, model.config.lambda_cut)?;
    Ok(model.gamma_density.density(gamma) < model.config.gamma_threshold)
}

/// Vertices whose smoothness density falls below the threshold, ascending.
/// An empty set means no alarm.
pub fn detect_local_smoothness(model: &BaselineModel, graph: &GridGraph, x: &[f64]) -> Result<Vec<usize>> {
    if model.n() != graph.n() {
        return Err(Error::mismatch(graph.n(), model.n()));
    }
    let smooth = local_smoothness(graph, x)?;
    Ok(flag_smoothness(model, &smooth))
}

fn flag_smoothness(model: &BaselineModel, smooth: &LocalSmoothness) -> Vec<usize> {
    model
        .smoothness_densities
        .iter()
        .enumerate()
        .filter_map(|(n, density)| {
            let s = smooth.get(n)?;
            let density = density.as_ref()?;
            (density.density(s) < model.config.smoothness_threshold).then_some(n)
        })
        .collect()
}

/// Vertices at step `t` whose energy `x(n,t)²` is unlikely given the mean of
/// the preceding `mean_window` steps and the fitted residual spread.
///
/// The vertex marginal of the vertex-frequency energy distribution is
/// exactly `x(n)²`, so it is read off the signal without a transform.
pub fn detect_vfed(model: &BaselineModel, signal: &TimeVaryingSignal, t: usize) -> Result<Vec<usize>> {
    if signal.width() != model.n() {
        return Err(Error::mismatch(model.n(), signal.width()));
    }
    let mean = rolling_mean(signal, t, model.config.mean_window)?;
    let x = signal.row(t);
    let likelihood = model.config.energy_likelihood;
    Ok((0..model.n())
        .filter(|&n| {
            let p = likelihood.pdf(x[n] * x[n], mean[n], model.sigma[n]);
            p < model.config.energy_threshold
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorId {
    Gft,
    LocalSmoothness,
    Vfed,
}

impl DetectorId {
    pub const ALL: [DetectorId; 3] = [DetectorId::Gft, DetectorId::LocalSmoothness, DetectorId::Vfed];

    pub fn name(self) -> &'static str {
        match self {
            DetectorId::Gft => "gft",
            DetectorId::LocalSmoothness => "local_smoothness",
            DetectorId::Vfed => "vfed",
        }
    }

    pub fn locates(self) -> bool {
        self != DetectorId::Gft
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Normal,
    Stressed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepAlarm {
    pub t: usize,
    pub located: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub detector: DetectorId,
    /// Join key into the scenario ground truth.
    pub scenario: usize,
    pub verdict: Verdict,
    pub alarms: Vec<StepAlarm>,
    /// Union of the per-step located sets, ascending.
    pub located: Vec<usize>,
}

impl DetectionReport {
    pub fn from_alarms(detector: DetectorId, scenario: usize, alarms: Vec<StepAlarm>) -> Self {
        let mut located: Vec<usize> = alarms.iter().flat_map(|a| a.located.iter().copied()).collect();
        located.sort_unstable();
        located.dedup();
        DetectionReport {
            detector,
            scenario,
            verdict: if alarms.is_empty() { Verdict::Normal } else { Verdict::Stressed },
            alarms,
            located,
        }
    }

    pub fn stressed(&self) -> bool {
        self.verdict == Verdict::Stressed
    }

    pub fn first_located(&self) -> &[usize] {
        self.alarms.first().map_or(&[], |a| &a.located)
    }
}

/// Runs one detector over steps `[from, signal.steps())`.
pub fn run_detector(
    detector: DetectorId,
    model: &BaselineModel,
    basis: &SpectralBasis,
    graph: &GridGraph,
    signal: &TimeVaryingSignal,
    from: usize,
    scenario: usize,
) -> Result<DetectionReport> {
    let mut alarms = Vec::new();
    for t in from..signal.steps() {
        let x = signal.row(t);
        let located = match detector {
            DetectorId::Gft => {
                if detect_gft(model, basis, x)? {
                    alarms.push(StepAlarm { t, located: Vec::new() });
                }
                continue;
            }
            DetectorId::LocalSmoothness => detect_local_smoothness(model, graph, x)?,
            DetectorId::Vfed => detect_vfed(model, signal, t)?,
        };
        if !located.is_empty() {
            alarms.push(StepAlarm { t, located });
        }
    }
    Ok(DetectionReport::from_alarms(detector, scenario, alarms))
}
