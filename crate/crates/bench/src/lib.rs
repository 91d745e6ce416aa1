//! Shared fixtures for the criterion benches.

use gridgsp::cases::ieee118;
use gridgsp::detect::{fit_baseline, BaselineModel, DetectorConfig};
use gridgsp::gridsim::{ProfileConfig, ProfileShape, SimulationConfig};
use gridgsp::topology::{build_bus_graph, Weighting};
use gridgsp::{eigendecompose, GridCase, GridGraph, SpectralBasis, TimeVaryingSignal};

pub struct Fixture {
    pub case: GridCase,
    pub graph: GridGraph,
    pub basis: SpectralBasis,
    /// 48 steps of bus angles on a daily profile.
    pub signal: TimeVaryingSignal,
    pub model: BaselineModel,
}

pub fn simulation(steps: usize, seed: u64) -> SimulationConfig {
    SimulationConfig {
        steps,
        profile: ProfileConfig {
            shape: ProfileShape::Daily,
            noise_sigma: 0.01,
        },
        failure: None,
        seed,
    }
}

/// IEEE 118 with a baseline fitted on one clean simulated day.
pub fn ieee118_fixture() -> Fixture {
    let case = ieee118().expect("built-in case");
    let graph = build_bus_graph(&case, Weighting::InverseReactance).expect("bus graph");
    let basis = eigendecompose(&graph).expect("eigendecomposition");
    let history = simulation(288, 1).run(&case).expect("history").bus_angles;
    let model = fit_baseline(&history, &basis, &graph, DetectorConfig::default()).expect("baseline");
    let signal = simulation(48, 2).run(&case).expect("signal").bus_angles;
    Fixture {
        case,
        graph,
        basis,
        signal,
        model,
    }
}
