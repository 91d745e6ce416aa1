//! DC power flow and synthetic time-varying grid telemetry.
//!
//! Bus voltage angles are graph signals on the bus-vertex graph; branch real
//! power flows are graph signals on the line-vertex graph. A single branch
//! may be tripped part-way through a run, in which case its flow column reads
//! zero from the failure step on while the column layout stays fixed.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::GridCase;

/// Load noise used when a config does not set one.
pub const DEFAULT_NOISE_SIGMA: f64 = 0.01;
/// Steps per simulated run when a config does not set one.
pub const DEFAULT_STEPS: usize = 288;

/// `T × N` samples; row `t` is the graph signal at step `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeVaryingSignal {
    width: usize,
    data: Vec<f64>,
    pub dt_label: String,
}

impl TimeVaryingSignal {
    pub fn zeros(steps: usize, width: usize) -> Self {
        TimeVaryingSignal {
            width,
            data: vec![0.0; steps * width],
            dt_label: "step".into(),
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * width);
        for (t, r) in rows.iter().enumerate() {
            if r.len() != width {
                return Err(Error::mismatch(width, r.len()));
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!("row {t} has a non-finite value")));
            }
            data.extend_from_slice(r);
        }
        Ok(TimeVaryingSignal {
            width,
            data,
            dt_label: "step".into(),
        })
    }

    pub fn steps(&self) -> usize {
        if self.width == 0 {
            0
        } else {
            self.data.len() / self.width
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.width..(t + 1) * self.width]
    }

    pub fn row_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.data[t * self.width..(t + 1) * self.width]
    }

    pub fn get(&self, t: usize, n: usize) -> f64 {
        self.data[t * self.width + n]
    }

    pub fn set(&mut self, t: usize, n: usize, value: f64) {
        self.data[t * self.width + n] = value;
    }

    pub fn column(&self, n: usize) -> Vec<f64> {
        (0..self.steps()).map(|t| self.get(t, n)).collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.width.max(1))
    }

    /// CSV with header `t,v1,…,vN`, one row per step.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for n in 1..=self.width {
            let _ = write!(out, ",v{n}");
        }
        out.push('\n');
        for (t, row) in self.rows().enumerate() {
            let _ = write!(out, "{t}");
            for v in row {
                let _ = write!(out, ",{v:?}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader.headers()?.clone();
        let width = headers.len().saturating_sub(1);
        let expected_header = headers.get(0) == Some("t")
            && headers.iter().skip(1).enumerate().all(|(i, h)| h == format!("v{}", i + 1));
        if !expected_header {
            return Err(Error::parse(1, "expected header `t,v1,...,vN`"));
        }
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            if rec.len() != width + 1 {
                return Err(Error::parse(line, format!("{} fields, expected {}", rec.len(), width + 1)));
            }
            let row = rec
                .iter()
                .skip(1)
                .map(|f| f.parse::<f64>().map_err(|_| Error::parse(line, format!("not a number: `{f}`"))))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        let mut sig = TimeVaryingSignal::from_rows(&rows)?;
        if rows.is_empty() {
            sig.width = width;
        }
        Ok(sig)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileShape {
    Flat,
    #[default]
    Daily,
    Ramp,
}

/// Load multiplier sequence of length `steps`.
///
/// `daily` is `1 + 0.25 sin(2πt/T − π/2)`, trough at `t = 0` and peak at `T/2`;
/// `ramp` rises linearly from 0.9 to 1.1.
pub fn synth_profile(steps: usize, shape: ProfileShape) -> Vec<f64> {
    match shape {
        ProfileShape::Flat => vec![1.0; steps],
        ProfileShape::Daily => (0..steps)
            .map(|t| 1.0 + 0.25 * (2.0 * PI * t as f64 / steps as f64 - PI / 2.0).sin())
            .collect(),
        ProfileShape::Ramp => (0..steps)
            .map(|t| {
                if steps == 1 {
                    0.9
                } else {
                    0.9 + 0.2 * t as f64 / (steps - 1) as f64
                }
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadProfile {
    base_loads: Vec<f64>,
    multipliers: Vec<f64>,
    noise_sigma: f64,
}

impl LoadProfile {
    pub fn new(base_loads: Vec<f64>, multipliers: Vec<f64>, noise_sigma: f64) -> Result<Self> {
        if multipliers.is_empty() {
            return Err(Error::Config("load profile needs at least one step".into()));
        }
        if multipliers.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(Error::Config("load multipliers must be positive".into()));
        }
        if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
            return Err(Error::Config(format!("noise_sigma must be >= 0, got {noise_sigma}")));
        }
        Ok(LoadProfile {
            base_loads,
            multipliers,
            noise_sigma,
        })
    }

    /// Base loads taken from the case's bus table.
    pub fn for_case(case: &GridCase, multipliers: Vec<f64>, noise_sigma: f64) -> Result<Self> {
        LoadProfile::new(case.buses.iter().map(|b| b.p_load).collect(), multipliers, noise_sigma)
    }

    pub fn steps(&self) -> usize {
        self.multipliers.len()
    }

    pub fn base_loads(&self) -> &[f64] {
        &self.base_loads
    }

    pub fn multipliers(&self) -> &[f64] {
        &self.multipliers
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DcSolution {
    /// Bus angles in radians, slack at 0.
    pub theta: Vec<f64>,
    /// Per-branch flow `(θ_from − θ_to) / x`; zero for branches not in service.
    pub flows: Vec<f64>,
    /// Net injections after the slack has absorbed the mismatch.
    pub injections: Vec<f64>,
}

/// Reduced susceptance matrix of one topology, factored once and reused.
#[derive(Debug, Clone)]
pub struct DcNetwork {
    n: usize,
    slack: usize,
    /// Bus position → row of the reduced system (`None` for the slack).
    reduced: Vec<Option<usize>>,
    /// `(from, to, reactance)` per branch, `None` when not in service here.
    branches: Vec<Option<(usize, usize, f64)>>,
    factor: Option<Cholesky<f64, Dyn>>,
}

impl DcNetwork {
    /// Network of the case's in-service branches minus `removed` (table positions).
    pub fn new(case: &GridCase, removed: &[usize]) -> Result<Self> {
        let n = case.buses.len();
        let slack = case
            .slack_index()
            .ok_or_else(|| Error::Validation("case has no slack bus".into()))?;
        let index = case.bus_index();
        let branches: Vec<Option<(usize, usize, f64)>> = case
            .branches
            .iter()
            .enumerate()
            .map(|(k, br)| {
                (br.in_service() && !removed.contains(&k))
                    .then(|| (index[&br.from_bus], index[&br.to_bus], br.reactance))
            })
            .collect();

        let mut adj = vec![Vec::new(); n];
        for &(i, j, _) in branches.iter().flatten() {
            adj[i].push(j);
            adj[j].push(i);
        }
        let mut seen = vec![false; n];
        seen[slack] = true;
        let mut queue = VecDeque::from([slack]);
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        if let Some(lost) = seen.iter().position(|s| !s) {
            return Err(Error::InfeasibleTopology(format!(
                "bus {} is islanded from the slack bus",
                case.buses[lost].id
            )));
        }

        let mut reduced = vec![None; n];
        let mut next = 0;
        for (i, r) in reduced.iter_mut().enumerate() {
            if i != slack {
                *r = Some(next);
                next += 1;
            }
        }
        let m = n - 1;
        let factor = if m == 0 {
            None
        } else {
            let mut b = DMatrix::<f64>::zeros(m, m);
            for &(i, j, x) in branches.iter().flatten() {
                let w = 1.0 / x;
                if let Some(ri) = reduced[i] {
                    b[(ri, ri)] += w;
                }
                if let Some(rj) = reduced[j] {
                    b[(rj, rj)] += w;
                }
                if let (Some(ri), Some(rj)) = (reduced[i], reduced[j]) {
                    b[(ri, rj)] -= w;
                    b[(rj, ri)] -= w;
                }
            }
            Some(Cholesky::new(b).ok_or_else(|| {
                Error::InfeasibleTopology("reduced susceptance matrix is singular".into())
            })?)
        };
        Ok(DcNetwork {
            n,
            slack,
            reduced,
            branches,
            factor,
        })
    }

    pub fn bus_count(&self) -> usize {
        self.n
    }

    /// Solves `B'θ = P` with the slack angle fixed at zero.
    /// The slack entry of `injections` is ignored and replaced by the balancing value.
    pub fn solve(&self, injections: &[f64]) -> Result<DcSolution> {
        if injections.len() != self.n {
            return Err(Error::mismatch(self.n, injections.len()));
        }
        let mut balanced = injections.to_vec();
        balanced[self.slack] = 0.0;
        balanced[self.slack] = -balanced.iter().sum::<f64>();

        let mut theta = vec![0.0; self.n];
        if let Some(factor) = &self.factor {
            let rhs = DVector::from_iterator(
                self.n - 1,
                (0..self.n).filter(|&i| i != self.slack).map(|i| balanced[i]),
            );
            let sol = factor.solve(&rhs);
            for (i, r) in self.reduced.iter().enumerate() {
                if let Some(r) = r {
                    theta[i] = sol[*r];
                }
            }
        }
        let flows = self
            .branches
            .iter()
            .map(|b| b.map_or(0.0, |(i, j, x)| (theta[i] - theta[j]) / x))
            .collect();
        Ok(DcSolution {
            theta,
            flows,
            injections: balanced,
        })
    }

    /// Largest `|P_n − Σ outgoing flows|` over buses.
    pub fn balance_residual(&self, sol: &DcSolution) -> f64 {
        let mut net = vec![0.0; self.n];
        for (b, f) in self.branches.iter().zip(&sol.flows) {
            if let Some((i, j, _)) = b {
                net[*i] += f;
                net[*j] -= f;
            }
        }
        net.iter()
            .zip(&sol.injections)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// One-shot DC power flow on the case's in-service network.
pub fn dc_power_flow(case: &GridCase, injections: &[f64]) -> Result<DcSolution> {
    DcNetwork::new(case, &[])?.solve(injections)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineFailure {
    /// Branch-table position of the tripped branch.
    pub branch: usize,
    pub step: usize,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub bus_angles: TimeVaryingSignal,
    /// Columns follow the pre-failure in-service branches, in table order.
    pub line_flows: TimeVaryingSignal,
    pub line_branches: Vec<usize>,
    pub max_balance_residual: f64,
}

/// Runs one DC power flow per profile step.
///
/// Loads at step `t` are `base · m(t) · (1 + ε)`, `ε ~ N(0, σ²)` drawn per bus.
/// From `failure.step` on, the failed branch is removed from the network.
pub fn simulate(
    case: &GridCase,
    profile: &LoadProfile,
    failure: Option<LineFailure>,
    seed: u64,
) -> Result<Simulation> {
    let n = case.buses.len();
    if profile.base_loads.len() != n {
        return Err(Error::mismatch(n, profile.base_loads.len()));
    }
    let steps = profile.steps();
    let base = DcNetwork::new(case, &[])?;
    let line_branches = case.in_service_branches();
    let failed = match failure {
        None => None,
        Some(f) => {
            if f.step >= steps {
                return Err(Error::Config(format!("failure step {} outside [0, {steps})", f.step)));
            }
            if !line_branches.contains(&f.branch) {
                return Err(Error::Config(format!("branch {} is not in service", f.branch)));
            }
            Some((f.step, DcNetwork::new(case, &[f.branch])?))
        }
    };

    let noise = Normal::new(0.0, profile.noise_sigma)
        .map_err(|e| Error::Config(format!("noise distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut angles = TimeVaryingSignal::zeros(steps, n);
    let mut flows = TimeVaryingSignal::zeros(steps, line_branches.len());
    let mut worst = 0.0_f64;
    let mut injections = vec![0.0; n];

    for t in 0..steps {
        let m = profile.multipliers[t];
        for (p, &load) in injections.iter_mut().zip(&profile.base_loads) {
            let eps = if profile.noise_sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            *p = -load * m * (1.0 + eps);
        }
        let net = match &failed {
            Some((step, reduced)) if t >= *step => reduced,
            _ => &base,
        };
        let sol = net.solve(&injections)?;
        worst = worst.max(net.balance_residual(&sol));
        angles.row_mut(t).copy_from_slice(&sol.theta);
        for (col, &k) in flows.row_mut(t).iter_mut().zip(&line_branches) {
            *col = sol.flows[k];
        }
    }
    angles.dt_label = "step".into();
    flows.dt_label = "step".into();
    Ok(Simulation {
        bus_angles: angles,
        line_flows: flows,
        line_branches,
        max_balance_residual: worst,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileConfig {
    #[serde(default)]
    pub shape: ProfileShape,
    #[serde(default = "default_noise")]
    pub noise_sigma: f64,
}

fn default_noise() -> f64 {
    DEFAULT_NOISE_SIGMA
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig {
            shape: ProfileShape::Daily,
            noise_sigma: DEFAULT_NOISE_SIGMA,
        }
    }
}

/// `{T, profile: {shape, noise_sigma}, failure?: {branch, step}, seed}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    #[serde(rename = "T", default = "default_steps")]
    pub steps: usize,
    #[serde(default)]
    pub profile: ProfileConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<LineFailure>,
    #[serde(default)]
    pub seed: u64,
}

fn default_steps() -> usize {
    DEFAULT_STEPS
}

impl SimulationConfig {
    pub fn run(&self, case: &GridCase) -> Result<Simulation> {
        if self.steps == 0 {
            return Err(Error::Config("T must be at least 1".into()));
        }
        let profile = LoadProfile::for_case(
            case,
            synth_profile(self.steps, self.profile.shape),
            self.profile.noise_sigma,
        )?;
        simulate(case, &profile, self.failure, self.seed)
    }
}
