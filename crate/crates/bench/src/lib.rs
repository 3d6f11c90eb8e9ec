//! Benchmark fixtures.

use statematch::engine::{phi0_grid, ExperimentPlan, ExperimentRecord};
use statematch::noise::NoiseSpec;
use statematch::{build_circuit, transpile_circuit, CouplingMap, NativeCircuit, ProtocolConfig};

pub const EPSILON: f64 = 0.973;
pub const THETA0: f64 = std::f64::consts::PI / 8.0;

pub fn native(n: u32, phi0: f64) -> NativeCircuit {
    let cfg = ProtocolConfig::new(EPSILON, THETA0, phi0, n).expect("valid config");
    let ir = build_circuit(&cfg).expect("circuit");
    transpile_circuit(&ir, &CouplingMap::linear(cfg.n_qubits())).expect("transpile")
}

/// Misrotations on every qubit and CR pair of `circuit`, plus depolarizing.
pub fn noisy(circuit: &NativeCircuit) -> NoiseSpec {
    let mut spec = NoiseSpec::ideal();
    for (k, &q) in circuit.physical.iter().enumerate() {
        spec.alphas.insert(q, 0.01 * (k as f64 + 1.0));
    }
    for pair in circuit.cr_pairs() {
        spec.lambdas.insert(pair, -0.015);
    }
    spec.per_step_dep = vec![0.02; circuit.n_iterations as usize];
    spec
}

pub fn plan(n: u32, points: usize) -> ExperimentPlan {
    ExperimentPlan::new(EPSILON, THETA0, n, phi0_grid(points), 2000, 5)
}

pub fn records(points: usize, noise: &NoiseSpec, seed: u64) -> Vec<ExperimentRecord> {
    statematch::engine::run_experiment(&plan(1, points), noise, seed).expect("experiment")
}
