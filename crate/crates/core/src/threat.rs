//! Attack injection on clean time-varying signals.
//!
//! Every injector touches only the `targets × [t_start, t_end]` block of the
//! signal; everything else is copied bit for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridsim::TimeVaryingSignal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StressKind {
    None,
    Dos,
    Replay,
    Fdia,
    LineFailure,
}

impl StressKind {
    pub const ALL: [StressKind; 5] = [
        StressKind::None,
        StressKind::Dos,
        StressKind::Replay,
        StressKind::Fdia,
        StressKind::LineFailure,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StressKind::None => "none",
            StressKind::Dos => "dos",
            StressKind::Replay => "replay",
            StressKind::Fdia => "fdia",
            StressKind::LineFailure => "line_failure",
        }
    }
}

/// Ground truth of one scenario.
///
/// `targets` are zero-based vertex positions of the graph the signal lives on;
/// for a line failure it holds the single failed branch-table position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StressScenario {
    pub kind: StressKind,
    pub targets: Vec<usize>,
    pub t_start: usize,
    pub t_end: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replay_offset: Option<usize>,
    pub seed: u64,
}

impl StressScenario {
    pub fn normal(seed: u64) -> Self {
        StressScenario {
            kind: StressKind::None,
            targets: Vec::new(),
            t_start: 0,
            t_end: 0,
            alpha: None,
            replay_offset: None,
            seed,
        }
    }

    pub fn new(kind: StressKind, targets: Vec<usize>, t_start: usize, t_end: usize, seed: u64) -> Result<Self> {
        let s = StressScenario {
            kind,
            targets,
            t_start,
            t_end,
            alpha: None,
            replay_offset: None,
            seed,
        };
        s.check_shape()?;
        Ok(s)
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn with_replay_offset(mut self, offset: usize) -> Self {
        self.replay_offset = Some(offset);
        self
    }

    pub fn is_attack(&self) -> bool {
        self.kind != StressKind::None
    }

    fn check_shape(&self) -> Result<()> {
        if self.t_start > self.t_end {
            return Err(Error::Config(format!(
                "attack window [{}, {}] is empty",
                self.t_start, self.t_end
            )));
        }
        if self.kind != StressKind::None && self.targets.is_empty() {
            return Err(Error::Config(format!("{} scenario has no targets", self.kind.name())));
        }
        let mut sorted = self.targets.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.targets.len() {
            return Err(Error::Config("duplicate attack targets".into()));
        }
        Ok(())
    }

    /// Checks the scenario against a signal with `steps` rows and `width` columns.
    pub fn validate(&self, steps: usize, width: usize) -> Result<()> {
        self.check_shape()?;
        if self.kind == StressKind::None {
            return Ok(());
        }
        if self.t_end >= steps {
            return Err(Error::Config(format!("window end {} outside [0, {steps})", self.t_end)));
        }
        if self.kind != StressKind::LineFailure {
            if let Some(&bad) = self.targets.iter().find(|&&n| n >= width) {
                return Err(Error::Config(format!("target vertex {bad} outside [0, {width})")));
            }
        }
        match self.kind {
            StressKind::Fdia => match self.alpha {
                Some(a) if a.is_finite() && a >= 0.0 => {}
                _ => return Err(Error::Config("fdia needs a finite alpha >= 0".into())),
            },
            StressKind::Replay => match self.replay_offset {
                Some(0) | None => return Err(Error::Config("replay needs replay_offset >= 1".into())),
                Some(o) if o > self.t_start => {
                    return Err(Error::Config(format!(
                        "replay_offset {o} reaches before step 0 from t_start {}",
                        self.t_start
                    )))
                }
                Some(_) => {}
            },
            _ => {}
        }
        Ok(())
    }

    fn expect(&self, kind: StressKind, signal: &TimeVaryingSignal) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Config(format!(
                "expected a {} scenario, got {}",
                kind.name(),
                self.kind.name()
            )));
        }
        self.validate(signal.steps(), signal.width())
    }
}

/// Per-vertex `max − min` of a clean history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeTable {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl RangeTable {
    /// Table with nothing observed yet; every range reads 0.
    pub fn empty(width: usize) -> Self {
        RangeTable {
            lo: vec![f64::INFINITY; width],
            hi: vec![f64::NEG_INFINITY; width],
        }
    }

    /// Table with the given ranges, anchored at zero.
    pub fn from_ranges(ranges: Vec<f64>) -> Self {
        RangeTable {
            lo: vec![0.0; ranges.len()],
            hi: ranges,
        }
    }

    pub fn from_history(history: &TimeVaryingSignal) -> Self {
        let mut table = RangeTable::empty(history.width());
        for row in history.rows() {
            table.observe(row);
        }
        table
    }

    pub fn observe(&mut self, row: &[f64]) {
        for ((lo, hi), &v) in self.lo.iter_mut().zip(&mut self.hi).zip(row) {
            *lo = lo.min(v);
            *hi = hi.max(v);
        }
    }

    pub fn merge(&mut self, other: &RangeTable) -> Result<()> {
        if other.len() != self.len() {
            return Err(Error::mismatch(self.len(), other.len()));
        }
        for (lo, v) in self.lo.iter_mut().zip(&other.lo) {
            *lo = lo.min(*v);
        }
        for (hi, v) in self.hi.iter_mut().zip(&other.hi) {
            *hi = hi.max(*v);
        }
        Ok(())
    }

    pub fn get(&self, n: usize) -> Option<f64> {
        let (lo, hi) = (self.lo.get(n)?, self.hi[n]);
        Some(if hi >= *lo { hi - lo } else { 0.0 })
    }

    pub fn len(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.is_empty()
    }
}

/// `θ + (−1)^d · α · u · range`.
pub fn falsify(theta: f64, alpha: f64, u: f64, d: bool, range: f64) -> f64 {
    let sign = if d { -1.0 } else { 1.0 };
    theta + sign * alpha * u * range
}

/// Zeroes the targeted entries over the window.
pub fn inject_dos(signal: &TimeVaryingSignal, scenario: &StressScenario) -> Result<TimeVaryingSignal> {
    scenario.expect(StressKind::Dos, signal)?;
    let mut out = signal.clone();
    for t in scenario.t_start..=scenario.t_end {
        for &n in &scenario.targets {
            out.set(t, n, 0.0);
        }
    }
    Ok(out)
}

/// Replays each target's own value from `replay_offset` steps earlier.
pub fn inject_replay(signal: &TimeVaryingSignal, scenario: &StressScenario) -> Result<TimeVaryingSignal> {
    scenario.expect(StressKind::Replay, signal)?;
    let offset = scenario.replay_offset.unwrap_or(0);
    let mut out = signal.clone();
    for t in scenario.t_start..=scenario.t_end {
        for &n in &scenario.targets {
            out.set(t, n, signal.get(t - offset, n));
        }
    }
    Ok(out)
}

/// Falsifies targeted entries, redrawing the sign and magnitude per (vertex, step)
/// from the scenario seed.
pub fn inject_fdia(
    signal: &TimeVaryingSignal,
    scenario: &StressScenario,
    ranges: &RangeTable,
) -> Result<TimeVaryingSignal> {
    scenario.expect(StressKind::Fdia, signal)?;
    let alpha = scenario.alpha.unwrap_or(0.0);
    let target_ranges = scenario
        .targets
        .iter()
        .map(|&n| {
            ranges
                .get(n)
                .ok_or_else(|| Error::Config(format!("no range entry for vertex {n}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut out = signal.clone();
    for t in scenario.t_start..=scenario.t_end {
        for (&n, &range) in scenario.targets.iter().zip(&target_ranges) {
            let d: bool = rng.random();
            let u: f64 = rng.random();
            out.set(t, n, falsify(signal.get(t, n), alpha, u, d, range));
        }
    }
    Ok(out)
}

/// Dispatches on the scenario kind. `none` returns the clean signal; line
/// failures happen inside the simulator and cannot be injected afterwards.
pub fn inject(
    signal: &TimeVaryingSignal,
    scenario: &StressScenario,
    ranges: Option<&RangeTable>,
) -> Result<TimeVaryingSignal> {
    match scenario.kind {
        StressKind::None => Ok(signal.clone()),
        StressKind::Dos => inject_dos(signal, scenario),
        StressKind::Replay => inject_replay(signal, scenario),
        StressKind::Fdia => {
            let ranges = ranges.ok_or_else(|| Error::Config("fdia needs a range table".into()))?;
            inject_fdia(signal, scenario, ranges)
        }
        StressKind::LineFailure => Err(Error::Config(
            "line failures are produced by the simulator, not injected".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_signal(steps: usize, width: usize) -> TimeVaryingSignal {
        let rows: Vec<Vec<f64>> = (0..steps)
            .map(|t| (0..width).map(|n| 1.0 + t as f64 * 0.1 + n as f64).collect())
            .collect();
        TimeVaryingSignal::from_rows(&rows).unwrap()
    }

    fn untouched_outside(clean: &TimeVaryingSignal, bad: &TimeVaryingSignal, s: &StressScenario) {
        for t in 0..clean.steps() {
            for n in 0..clean.width() {
                let inside = (s.t_start..=s.t_end).contains(&t) && s.targets.contains(&n);
                if !inside {
                    assert_eq!(clean.get(t, n).to_bits(), bad.get(t, n).to_bits());
                }
            }
        }
    }

    #[test]
    fn falsify_substitution() {
        assert_eq!(falsify(10.0, 0.5, 1.0, false, 20.0), 20.0);
        assert_eq!(falsify(10.0, 0.5, 1.0, true, 20.0), 0.0);
        assert_eq!(falsify(10.0, 0.0, 0.7, true, 20.0), 10.0);
        assert_eq!(falsify(10.0, 3.0, 0.0, false, 20.0), 10.0);
    }

    #[test]
    fn dos_zeroes_window() {
        let clean = ramp_signal(80, 118);
        let s = StressScenario::new(StressKind::Dos, vec![99], 50, 60, 1).unwrap();
        let bad = inject_dos(&clean, &s).unwrap();
        for t in 50..=60 {
            assert_eq!(bad.get(t, 99), 0.0);
        }
        untouched_outside(&clean, &bad, &s);

        let all = StressScenario::new(StressKind::Dos, (0..118).collect(), 5, 6, 1).unwrap();
        let bad = inject_dos(&clean, &all).unwrap();
        assert!(bad.row(5).iter().chain(bad.row(6)).all(|&v| v == 0.0));
    }

    #[test]
    fn scenario_invariants() {
        assert!(StressScenario::new(StressKind::Dos, vec![1], 6, 5, 0).is_err());
        assert!(StressScenario::new(StressKind::Dos, vec![], 1, 5, 0).is_err());
        assert!(StressScenario::new(StressKind::Dos, vec![1, 1], 1, 5, 0).is_err());
        let clean = ramp_signal(10, 3);
        let s = StressScenario::new(StressKind::Dos, vec![3], 1, 5, 0).unwrap();
        assert!(inject_dos(&clean, &s).is_err());
        let s = StressScenario::new(StressKind::Dos, vec![0], 1, 10, 0).unwrap();
        assert!(inject_dos(&clean, &s).is_err());
    }

    #[test]
    fn replay_copies_the_past() {
        let clean = ramp_signal(40, 4);
        let s = StressScenario::new(StressKind::Replay, vec![2], 20, 30, 0)
            .unwrap()
            .with_replay_offset(10);
        let bad = inject_replay(&clean, &s).unwrap();
        for t in 20..=30 {
            assert_eq!(bad.get(t, 2), clean.get(t - 10, 2));
        }
        untouched_outside(&clean, &bad, &s);

        let flat = TimeVaryingSignal::from_rows(&vec![vec![0.3; 4]; 40]).unwrap();
        let s = StressScenario::new(StressKind::Replay, vec![0, 3], 20, 30, 0)
            .unwrap()
            .with_replay_offset(11);
        assert_eq!(inject_replay(&flat, &s).unwrap(), flat);

        let early = StressScenario::new(StressKind::Replay, vec![0], 3, 5, 0)
            .unwrap()
            .with_replay_offset(4);
        assert!(matches!(inject_replay(&clean, &early), Err(Error::Config(_))));
    }

    #[test]
    fn fdia_bounded_and_reproducible() {
        let clean = ramp_signal(30, 5);
        let ranges = RangeTable::from_history(&clean);
        let s = StressScenario::new(StressKind::Fdia, vec![1, 4], 8, 20, 77)
            .unwrap()
            .with_alpha(2.0);
        let a = inject_fdia(&clean, &s, &ranges).unwrap();
        let b = inject_fdia(&clean, &s, &ranges).unwrap();
        assert_eq!(a, b);
        untouched_outside(&clean, &a, &s);
        let mut changed = 0;
        for t in 8..=20 {
            for &n in &s.targets {
                let delta = (a.get(t, n) - clean.get(t, n)).abs();
                assert!(delta <= 2.0 * ranges.get(n).unwrap() + 1e-12);
                changed += usize::from(delta > 0.0);
            }
        }
        assert!(changed > 20);

        let zero = s.clone().with_alpha(0.0);
        assert_eq!(inject_fdia(&clean, &zero, &ranges).unwrap(), clean);
        assert!(inject_fdia(&clean, &s, &RangeTable::from_ranges(vec![1.0; 2])).is_err());
    }

    #[test]
    fn ground_truth_json() {
        let s = StressScenario::new(StressKind::Fdia, vec![3], 4, 9, 5)
            .unwrap()
            .with_alpha(4.0);
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(
            text,
            r#"{"kind":"fdia","targets":[3],"t_start":4,"t_end":9,"alpha":4.0,"seed":5}"#
        );
        let back: StressScenario = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
    }
}
