//! Acceptance suite: one line per criterion, non-zero exit if any hard
//! requirement fails. Soft targets are reported as `warn` on the same line.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gridgsp::cases::ieee118;
use gridgsp::detect::{gamma_statistic, piecewise_gamma_pdf, DetectorId};
use gridgsp::gridsim::{dc_power_flow, simulate, synth_profile, LineFailure, LoadProfile, ProfileShape};
use gridgsp::gsp::{local_smoothness, vfed};
use gridgsp::harness::{AttackMix, DetectorMetrics, ExperimentContext, ExperimentPlan, ExperimentResult};
use gridgsp::threat::{inject_fdia, StressKind, StressScenario};
use gridgsp::topology::{build_bus_graph, BranchRecord, BranchStatus, BusRecord, BusType, GraphKind, Weighting};
use gridgsp::{eigendecompose, GridCase, GridGraph};

struct Outcome {
    pass: bool,
    detail: String,
    warnings: Vec<String>,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Outcome {
            pass,
            detail,
            warnings: Vec::new(),
        }
    }

    fn soft(mut self, ok: bool, what: String) -> Self {
        if !ok {
            self.warnings.push(what);
        }
        self
    }
}

fn random_signal(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn within(elapsed: Duration, budget_secs: u64) -> bool {
    elapsed <= Duration::from_secs(budget_secs)
}

fn spectral_identities() -> Outcome {
    let started = Instant::now();
    let case = ieee118().unwrap();
    let g = build_bus_graph(&case, Weighting::InverseReactance).unwrap();
    let basis = eigendecompose(&g).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut round_trip, mut parseval, mut marginal) = (0.0_f64, 0.0_f64, 0.0_f64);
    for _ in 0..100 {
        let x = random_signal(&mut rng, g.n());
        let spectrum = basis.gft(&x).unwrap();
        let back = basis.igft(&spectrum).unwrap();
        round_trip = round_trip.max(x.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        let ex: f64 = x.iter().map(|v| v * v).sum();
        let es: f64 = spectrum.iter().map(|v| v * v).sum();
        parseval = parseval.max((ex - es).abs() / ex);
        let e = vfed(&basis, &x).unwrap();
        for (m, v) in e.vertex_marginal().iter().zip(&x) {
            marginal = marginal.max((m - v * v).abs());
        }
    }
    let elapsed = started.elapsed();
    Outcome::new(
        round_trip < 1e-9 && parseval < 1e-9 && marginal < 1e-9 && within(elapsed, 10),
        format!(
            "round trip {round_trip:.1e}, Parseval {parseval:.1e}, marginal {marginal:.1e}, {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn random_connected_graph(rng: &mut ChaCha8Rng) -> GridGraph {
    let n = rng.random_range(2..=20);
    let mut edges = Vec::new();
    for v in 1..n {
        edges.push((rng.random_range(0..v), v, rng.random_range(0.1..5.0)));
    }
    for _ in 0..rng.random_range(0..=n) {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        if a != b && !edges.iter().any(|&(i, j, _)| (i, j) == (a, b) || (i, j) == (b, a)) {
            edges.push((a, b, rng.random_range(0.1..5.0)));
        }
    }
    GridGraph::from_weighted_edges(GraphKind::BusVertex, n, edges, (1..=n as u32).collect()).unwrap()
}

fn oracle_equivalence() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let (mut gft_err, mut vfed_err) = (0.0_f64, 0.0_f64);
    for _ in 0..200 {
        let g = random_connected_graph(&mut rng);
        let basis = eigendecompose(&g).unwrap();
        let u = basis.eigenvectors();
        let n = g.n();
        let x = random_signal(&mut rng, n);
        let spectrum = basis.gft(&x).unwrap();
        for k in 0..n {
            let literal: f64 = (0..n).map(|m| x[m] * u[(m, k)]).sum();
            gft_err = gft_err.max((literal - spectrum[k]).abs());
        }
        let e = vfed(&basis, &x).unwrap();
        for row in 0..n {
            for k in 0..n {
                let literal: f64 = (0..n).map(|m| x[row] * x[m] * u[(m, k)] * u[(row, k)]).sum();
                vfed_err = vfed_err.max((literal - e.get(row, k)).abs());
            }
        }
    }
    let elapsed = started.elapsed();
    Outcome::new(
        gft_err < 1e-12 && vfed_err < 1e-12 && within(elapsed, 10),
        format!("GFT {gft_err:.1e}, VFED {vfed_err:.1e} over 200 graphs, {:.2}s", elapsed.as_secs_f64()),
    )
}

fn smoothness_gap(g: &GridGraph) -> f64 {
    let basis = eigendecompose(g).unwrap();
    let mut worst = 0.0_f64;
    for k in 0..g.n() {
        let uk = basis.eigenvector(k);
        let s = local_smoothness(g, &uk).unwrap();
        for n in 0..g.n() {
            if let Some(v) = s.get(n) {
                worst = worst.max((v - basis.eigenvalues()[k]).abs());
            }
        }
    }
    worst
}

fn eigen_structure() -> Outcome {
    let path = GridGraph::from_weighted_edges(GraphKind::BusVertex, 3, [(0, 1, 1.0), (1, 2, 1.0)], vec![1, 2, 3]).unwrap();
    let basis = eigendecompose(&path).unwrap();
    let path_err = basis
        .eigenvalues()
        .iter()
        .zip([0.0, 1.0, 3.0])
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    let case = ieee118().unwrap();
    let g = build_bus_graph(&case, Weighting::InverseReactance).unwrap();
    let big = eigendecompose(&g).unwrap();
    let lambda1 = big.eigenvalues()[0];
    let u1 = big.eigenvector(0);
    let flat = 1.0 / (g.n() as f64).sqrt();
    let u1_err = u1.iter().map(|v| (v - flat).abs()).fold(0.0, f64::max);

    let gap = smoothness_gap(&path);
    Outcome::new(
        path_err < 1e-10 && lambda1.abs() < 1e-8 && u1_err < 1e-8 && gap < 1e-8,
        format!(
            "path-3 eigenvalues {path_err:.1e}, IEEE 118 λ1 {lambda1:.1e} (u1 off constant by {u1_err:.1e}), local smoothness vs λ {gap:.1e}"
        ),
    )
}

fn power_flow_conservation() -> Outcome {
    let case = ieee118().unwrap();
    let day = synth_profile(288, ProfileShape::Daily);
    let profile = LoadProfile::for_case(&case, day, 0.01).unwrap();
    let normal = simulate(&case, &profile, None, 5).unwrap();
    let branch = case.in_service_branches()[7];
    let failed = simulate(&case, &profile, Some(LineFailure { branch, step: 100 }), 5).unwrap();
    let residual = normal.max_balance_residual.max(failed.max_balance_residual);

    let bus = |id, bus_type, p_load| BusRecord {
        id,
        bus_type,
        p_load,
        coords: None,
    };
    let two = GridCase::new(
        100.0,
        vec![bus(1, BusType::Slack, 0.0), bus(2, BusType::Pq, 1.0)],
        vec![BranchRecord {
            from_bus: 1,
            to_bus: 2,
            reactance: 0.1,
            status: BranchStatus::InService,
        }],
    )
    .unwrap();
    let theta2 = dc_power_flow(&two, &[0.0, -1.0]).unwrap().theta[1];
    Outcome::new(
        residual <= 1e-8 && (theta2 + 0.1).abs() < 1e-12,
        format!("max balance residual {residual:.1e} over 576 steps, 2-bus θ2 = {theta2:?}"),
    )
}

fn cyber(result: &ExperimentResult, alpha: f64, d: DetectorId) -> DetectorMetrics {
    result.metrics.block(Some(alpha)).unwrap().cyber(d).unwrap().clone()
}

fn accuracy_trend(result: &ExperimentResult, elapsed: Duration) -> Outcome {
    let alphas = [1.0, 2.0, 3.0, 4.0, 5.0];
    let mut ok = within(elapsed, 600);
    let mut parts = Vec::new();
    for d in DetectorId::ALL {
        let acc: Vec<f64> = alphas.iter().map(|&a| cyber(result, a, d).detection_accuracy).collect();
        let drops: Vec<f64> = acc.windows(2).map(|w| w[0] - w[1]).filter(|&v| v > 0.0).collect();
        ok &= drops.len() <= 1 && drops.iter().all(|&v| v <= 0.03);
        let shown: Vec<String> = acc.iter().map(|v| format!("{v:.3}")).collect();
        parts.push(format!("{} [{}]", d.name(), shown.join(" ")));
    }
    let ls = cyber(result, 4.0, DetectorId::LocalSmoothness).detection_accuracy;
    let gft = cyber(result, 4.0, DetectorId::Gft).detection_accuracy;
    ok &= ls >= gft;
    Outcome::new(
        ok,
        format!("accuracy by α: {}; {:.1}s", parts.join(", "), elapsed.as_secs_f64()),
    )
}

fn locating_comparison(result: &ExperimentResult) -> Outcome {
    let vfed = cyber(result, 4.0, DetectorId::Vfed).locating_rate(0).unwrap();
    let ls = cyber(result, 4.0, DetectorId::LocalSmoothness).locating_rate(0).unwrap();
    Outcome::new(vfed > ls, format!("locating at α = 4: vfed {vfed:.3}, local smoothness {ls:.3}"))
        .soft((vfed - 0.91).abs() <= 0.10, format!("vfed {vfed:.3} outside 0.91 ± 0.10"))
        .soft((ls - 0.85).abs() <= 0.10, format!("local smoothness {ls:.3} outside 0.85 ± 0.10"))
}

fn line_failure_block(result: &ExperimentResult) -> Outcome {
    let block = result.metrics.block(None).unwrap();
    let ls = block.line_failure(DetectorId::LocalSmoothness).unwrap();
    let vf = block.line_failure(DetectorId::Vfed).unwrap();
    let (two, three) = (ls.locating_rate(2).unwrap(), ls.locating_rate(3).unwrap());
    let (vtwo, vthree) = (vf.locating_rate(2).unwrap(), vf.locating_rate(3).unwrap());
    let det_order = vf.detection_rate < ls.detection_rate;
    let fpr_order = vf.false_positive_rate > ls.false_positive_rate;
    let mut out = Outcome::new(
        det_order && fpr_order && three >= two && vthree >= vtwo,
        format!(
            "local smoothness det {:.3} fpr {:.3} 2-hop {two:.3} 3-hop {three:.3}; vfed det {:.3} fpr {:.3} 2-hop {vtwo:.3} 3-hop {vthree:.3}",
            ls.detection_rate, ls.false_positive_rate, vf.detection_rate, vf.false_positive_rate
        ),
    );
    if !det_order {
        out.detail += "; vfed detection not below local smoothness";
    }
    if !fpr_order {
        out.detail += "; vfed fpr not above local smoothness";
    }
    out.soft(ls.detection_rate >= 0.85, format!("local smoothness det {:.3} < 0.85", ls.detection_rate))
        .soft(ls.false_positive_rate <= 0.10, format!("local smoothness fpr {:.3} > 0.10", ls.false_positive_rate))
        .soft((vf.detection_rate - 0.80).abs() <= 0.10, format!("vfed det {:.3} far from 0.80", vf.detection_rate))
        .soft((vf.false_positive_rate - 0.25).abs() <= 0.10, format!("vfed fpr {:.3} far from 0.25", vf.false_positive_rate))
        .soft(two >= 0.45, format!("2-hop {two:.3} < 0.45"))
        .soft(three >= 0.55, format!("3-hop {three:.3} < 0.55"))
}

fn fdia_high_frequency(ctx: &ExperimentContext) -> Outcome {
    let case = &ctx.case;
    let day = synth_profile(288, ProfileShape::Daily);
    let profile = LoadProfile::for_case(case, day, 0.01).unwrap();
    let angles = simulate(case, &profile, None, 99).unwrap().bus_angles;
    let slack = case.slack_index().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut raised = 0;
    for i in 0..100 {
        let t = rng.random_range(0..angles.steps());
        let target = loop {
            let v = rng.random_range(0..angles.width());
            if v != slack {
                break v;
            }
        };
        let scenario = StressScenario::new(StressKind::Fdia, vec![target], t, t, i).unwrap().with_alpha(4.0);
        let corrupted = inject_fdia(&angles, &scenario, &ctx.ranges).unwrap();
        let clean = gamma_statistic(&ctx.bus_basis, angles.row(t), 0.5).unwrap();
        let attacked = gamma_statistic(&ctx.bus_basis, corrupted.row(t), 0.5).unwrap();
        if attacked > clean {
            raised += 1;
        }
    }
    Outcome::new(raised >= 95, format!("γ raised in {raised}/100 FDIA snapshots"))
}

fn determinism(first: &ExperimentResult, second: &ExperimentResult) -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    first.write(a.path()).unwrap();
    second.write(b.path()).unwrap();
    let ma = std::fs::read(a.path().join("metrics.json")).unwrap();
    let mb = std::fs::read(b.path().join("metrics.json")).unwrap();
    Outcome::new(ma == mb, format!("metrics.json {} vs {} bytes, identical: {}", ma.len(), mb.len(), ma == mb))
}

fn energy_density() -> Outcome {
    let at_mean = piecewise_gamma_pdf(1.0, 1.0, 1.0);
    let expected = 1.0 / (2.0 * (2.0 * PI).sqrt());
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let mut worst = 0.0_f64;
    for _ in 0..50 {
        let mu = rng.random_range(0.5..5.0);
        let sigma = rng.random_range(0.2..3.0);
        let delta = rng.random_range(0.0..mu);
        let below = piecewise_gamma_pdf(mu - delta, mu, sigma) * (mu - delta).sqrt();
        let above = piecewise_gamma_pdf(mu + delta, mu, sigma) * (mu + delta).sqrt();
        worst = worst.max((below - above).abs());
    }
    let gap = (at_mean - expected).abs();
    Outcome::new(
        gap < 1e-12 && worst < 1e-12,
        format!("p(1; 1, 1) off by {gap:.1e}, symmetry off by {worst:.1e}"),
    )
}

fn main() {
    let case = ieee118().unwrap();
    let mut outcomes: Vec<(u8, &str, Outcome)> = vec![
        (1, "spectral identities", spectral_identities()),
        (2, "oracle equivalence", oracle_equivalence()),
        (3, "eigen-structure", eigen_structure()),
        (4, "power-flow conservation", power_flow_conservation()),
    ];

    let sweep = ExperimentPlan::default();
    let started = Instant::now();
    let ctx = ExperimentContext::prepare(&sweep, &case).unwrap();
    let first = ctx.evaluate(&sweep).unwrap();
    let sweep_time = started.elapsed();
    outcomes.push((5, "accuracy trend in α", accuracy_trend(&first, sweep_time)));

    let locating = ExperimentPlan {
        n_scenarios: 3000,
        alpha_grid: vec![4.0],
        ..ExperimentPlan::default()
    };
    outcomes.push((6, "locating at α = 4", locating_comparison(&ctx.evaluate(&locating).unwrap())));

    let lines = ExperimentPlan {
        n_scenarios: 3000,
        attack_mix: AttackMix::line_failures(),
        alpha_grid: Vec::new(),
        ..ExperimentPlan::default()
    };
    let line_ctx = ExperimentContext::prepare(&lines, &case).unwrap();
    outcomes.push((7, "line-failure block", line_failure_block(&line_ctx.evaluate(&lines).unwrap())));

    outcomes.push((8, "FDIA raises γ", fdia_high_frequency(&ctx)));

    let second = ExperimentContext::prepare(&sweep, &case).unwrap().evaluate(&sweep).unwrap();
    outcomes.push((9, "determinism", determinism(&first, &second)));
    outcomes.push((10, "energy density", energy_density()));

    let mut failed = 0;
    for (id, name, o) in &outcomes {
        let status = if o.pass { "PASS" } else { "FAIL" };
        let warn = if o.warnings.is_empty() {
            String::new()
        } else {
            format!(" | warn: {}", o.warnings.join("; "))
        };
        println!("criterion {id:>2} {status} {name}: {}{warn}", o.detail);
        failed += usize::from(!o.pass);
    }
    println!("{} of {} criteria passed", outcomes.len() - failed, outcomes.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
