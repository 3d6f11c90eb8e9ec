//! Exact and noisy execution of protocol circuits, plus shot sampling.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates;
use crate::noise::{damping_kraus, sqrt_x_with_error, DensityMatrix, NoiseSpec};
use crate::protocol::{build_circuit, CircuitIR, IrOp, ProtocolConfig};
use crate::qmath::{apply_1q, apply_2q, C64, ONE, ZERO};
use crate::transpile::{cnot_from_cr, transpile_with_layout, CouplingMap, NativeCircuit, NativeGate};

pub const STATEVECTOR_MAX_QUBITS: usize = 12;
pub const DENSITY_MAX_QUBITS: usize = 5;

fn check_size(n: usize, limit: usize, backend: &'static str) -> Result<()> {
    if n > limit {
        Err(Error::SizeCap {
            qubits: n,
            limit,
            backend,
        })
    } else {
        Ok(())
    }
}

fn ground_state(n: usize) -> Vec<C64> {
    let mut amps = vec![ZERO; 1 << n];
    amps[0] = ONE;
    amps
}

/// Circuits the statevector backend can execute from `|0…0⟩`.
pub trait Executable {
    fn n_qubits(&self) -> usize;
    fn statevector(&self) -> Result<Vec<C64>>;
}

impl Executable for CircuitIR {
    fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    fn statevector(&self) -> Result<Vec<C64>> {
        let n = self.n_qubits;
        check_size(n, STATEVECTOR_MAX_QUBITS, "statevector")?;
        let mut amps = ground_state(n);
        let mut u_eps = Vec::new();
        for op in &self.ops {
            match *op {
                IrOp::StatePrepY { theta, qubit } => apply_1q(&mut amps, n, qubit, &gates::ry(theta)),
                IrOp::Phase { phi, qubit } => apply_1q(&mut amps, n, qubit, &gates::phase(phi)),
                IrOp::UEps {
                    epsilon,
                    kept,
                    measured,
                } => {
                    if !u_eps.iter().any(|(e, _)| *e == epsilon) {
                        u_eps.push((epsilon, crate::protocol::build_u_eps(epsilon)?));
                    }
                    let u = &u_eps.iter().find(|(e, _)| *e == epsilon).unwrap().1;
                    apply_2q(&mut amps, n, kept, measured, u);
                }
                IrOp::Barrier { .. } => {}
            }
        }
        Ok(amps)
    }
}

impl Executable for NativeCircuit {
    fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    fn statevector(&self) -> Result<Vec<C64>> {
        run_statevector_coherent(self, &NoiseSpec::ideal())
    }
}

/// `U|0…0⟩` in the computational basis, qubit 0 most significant.
pub fn run_statevector<C: Executable + ?Sized>(circuit: &C) -> Result<Vec<C64>> {
    circuit.statevector()
}

/// Statevector run with the misrotations of `noise` substituted into every
/// `√X` and CR gate. Incoherent parts of `noise` are ignored.
pub fn run_statevector_coherent(circuit: &NativeCircuit, noise: &NoiseSpec) -> Result<Vec<C64>> {
    let n = circuit.n_qubits;
    check_size(n, STATEVECTOR_MAX_QUBITS, "statevector")?;
    let kernels = Kernels::new(circuit, noise);
    let mut amps = ground_state(n);
    for g in &circuit.gates {
        match *g {
            NativeGate::SqrtX { qubit } => apply_1q(&mut amps, n, qubit, kernels.sqrt_x(qubit)),
            NativeGate::Rz { angle, qubit } => apply_1q(&mut amps, n, qubit, &gates::rz(angle)),
            NativeGate::Cr { control, target } => {
                apply_2q(&mut amps, n, control, target, kernels.cnot(control, target))
            }
            NativeGate::Swap { .. } | NativeGate::Barrier { .. } => {}
        }
    }
    Ok(amps)
}

/// Gate matrices with misrotations resolved per wire and pair.
struct Kernels {
    sqrt_x: Vec<crate::qmath::ComplexMatrix>,
    cnot: BTreeMap<(usize, usize), crate::qmath::ComplexMatrix>,
}

impl Kernels {
    fn new(circuit: &NativeCircuit, noise: &NoiseSpec) -> Self {
        let phys = &circuit.physical;
        let sqrt_x = phys
            .iter()
            .map(|&p| match noise.alpha(p) {
                0.0 => gates::sqrt_x(),
                a => sqrt_x_with_error(a),
            })
            .collect();
        let mut cnot = BTreeMap::new();
        for g in &circuit.gates {
            if let NativeGate::Cr { control, target } = *g {
                cnot.entry((control, target)).or_insert_with(|| {
                    match noise.lambda(phys[control], phys[target]) {
                        0.0 => gates::cnot(),
                        l => cnot_from_cr(l),
                    }
                });
            }
        }
        Kernels { sqrt_x, cnot }
    }

    fn sqrt_x(&self, q: usize) -> &crate::qmath::ComplexMatrix {
        &self.sqrt_x[q]
    }

    fn cnot(&self, c: usize, t: usize) -> &crate::qmath::ComplexMatrix {
        &self.cnot[&(c, t)]
    }
}

/// Probability mass on basis states where every post-selected qubit reads 0;
/// the kept qubit is unconstrained.
pub fn success_from_unitary_column(amps: &[C64], kept_qubit: usize, postselect_qubits: &[usize]) -> f64 {
    let probs: Vec<f64> = amps.iter().map(|a| a.norm_sqr()).collect();
    postselected_mass(&probs, kept_qubit, postselect_qubits, &[])
}

/// Mass on the all-zeros post-selection pattern after independent
/// per-qubit confusion (`readout[i]` belongs to `postselect_qubits[i]`).
fn postselected_mass(
    probs: &[f64],
    _kept_qubit: usize,
    postselect_qubits: &[usize],
    readout: &[(f64, f64)],
) -> f64 {
    let n = probs.len().trailing_zeros() as usize;
    let masks: Vec<usize> = postselect_qubits.iter().map(|&q| 1 << (n - 1 - q)).collect();
    let noisy = readout.iter().any(|&(a, b)| a != 0.0 || b != 0.0);
    probs
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            if !noisy {
                return if masks.iter().all(|m| i & m == 0) { p } else { 0.0 };
            }
            let weight: f64 = masks
                .iter()
                .zip(readout)
                .map(|(m, &(p01, p10))| if i & m == 0 { 1.0 - p01 } else { p10 })
                .product();
            p * weight
        })
        .sum()
}

fn readout_for(circuit: &NativeCircuit, noise: &NoiseSpec) -> Vec<(f64, f64)> {
    circuit
        .postselect_qubits
        .iter()
        .map(|&q| {
            noise
                .readout
                .get(&circuit.physical[q])
                .copied()
                .unwrap_or((0.0, 0.0))
        })
        .collect()
}

/// Density evolution: misrotated gates, depolarizing at each layer barrier,
/// damping on the post-selected qubits (or all, if requested) at the end.
pub fn run_density(circuit: &NativeCircuit, noise: &NoiseSpec) -> Result<DensityMatrix> {
    check_size(circuit.n_qubits, DENSITY_MAX_QUBITS, "density")?;
    noise.validate()?;
    let kernels = Kernels::new(circuit, noise);
    let mut rho = DensityMatrix::ground(circuit.n_qubits);
    for g in &circuit.gates {
        match *g {
            NativeGate::SqrtX { qubit } => rho.apply_1q(qubit, kernels.sqrt_x(qubit)),
            NativeGate::Rz { angle, qubit } => rho.apply_1q(qubit, &gates::rz(angle)),
            NativeGate::Cr { control, target } => {
                rho.apply_2q(control, target, kernels.cnot(control, target))
            }
            NativeGate::Barrier { layer } => {
                let p = noise.dep(layer);
                if p != 0.0 {
                    rho.depolarize_mut(p);
                }
            }
            NativeGate::Swap { .. } => {}
        }
    }
    if noise.gamma != 0.0 {
        let kraus = damping_kraus(noise.gamma);
        let targets: Vec<usize> = if noise.damp_all_qubits {
            (0..circuit.n_qubits).collect()
        } else {
            circuit.postselect_qubits.clone()
        };
        for q in targets {
            rho.apply_kraus_1q(q, &kraus);
        }
    }
    Ok(rho)
}

/// Observed success probability of `circuit` under `noise`. Uses the
/// density backend when incoherent noise is present, the statevector
/// backend otherwise.
pub fn noisy_success_probability(circuit: &NativeCircuit, noise: &NoiseSpec) -> Result<f64> {
    noise.validate()?;
    let readout = readout_for(circuit, noise);
    let needs_density = noise.gamma != 0.0 || noise.per_step_dep.iter().any(|&p| p != 0.0);
    let probs: Vec<f64> = if needs_density {
        run_density(circuit, noise)?.diagonal()
    } else {
        run_statevector_coherent(circuit, noise)?
            .iter()
            .map(|a| a.norm_sqr())
            .collect()
    };
    let p = postselected_mass(&probs, circuit.kept_qubit, &circuit.postselect_qubits, &readout);
    Ok(p.clamp(0.0, 1.0))
}

/// Seed plus stream selector of an independent ChaCha8 sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed {
    pub seed: u64,
    pub stream: u64,
}

impl RngSeed {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngSeed { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// One binomial draw of the number of successes in `shots` trials.
pub fn sample_shots(p: f64, shots: u64, seed: RngSeed) -> Result<u64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain {
            name: "success probability",
            value: p,
            range: "[0, 1]",
        });
    }
    let dist = Binomial::new(shots, p).map_err(|e| Error::Records(e.to_string()))?;
    Ok(dist.sample(&mut seed.rng()))
}

/// One `(φ₀, run)` cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub device_label: String,
    pub qubit_set: Vec<usize>,
    pub n_iterations: u32,
    pub epsilon: f64,
    pub theta0: f64,
    pub phi0: f64,
    pub run_index: u32,
    pub shots: u64,
    pub success_count: u64,
}

impl ExperimentRecord {
    pub fn validate(&self) -> Result<()> {
        if self.shots == 0 {
            return Err(Error::Records("record with zero shots".into()));
        }
        if self.success_count > self.shots {
            return Err(Error::Records(format!(
                "{} successes out of {} shots",
                self.success_count, self.shots
            )));
        }
        Ok(())
    }

    pub fn estimate(&self) -> f64 {
        self.success_count as f64 / self.shots as f64
    }
}

/// Evenly spaced `φ₀ = 2πk/points`, `k = 0..points`.
pub fn phi0_grid(points: usize) -> Vec<f64> {
    (0..points).map(|k| TAU * k as f64 / points as f64).collect()
}

/// A sweep over `φ₀` at fixed `(ε, θ₀, n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentPlan {
    pub device_label: String,
    pub epsilon: f64,
    pub theta0: f64,
    pub n_iterations: u32,
    pub phi0: Vec<f64>,
    pub shots: u64,
    pub runs: u32,
    pub coupling: CouplingMap,
    /// `layout[logical] = physical`.
    pub layout: Vec<usize>,
}

impl ExperimentPlan {
    /// Chain coupling with the identity layout.
    pub fn new(epsilon: f64, theta0: f64, n_iterations: u32, phi0: Vec<f64>, shots: u64, runs: u32) -> Self {
        let n = 1usize << n_iterations.min(STATEVECTOR_MAX_QUBITS as u32);
        ExperimentPlan {
            device_label: "sim".into(),
            epsilon,
            theta0,
            n_iterations,
            phi0,
            shots,
            runs,
            coupling: CouplingMap::linear(n),
            layout: (0..n).collect(),
        }
    }

    pub fn config(&self, phi0: f64) -> Result<ProtocolConfig> {
        ProtocolConfig::new(self.epsilon, self.theta0, phi0, self.n_iterations)
    }

    /// Transpiled circuit for one grid point.
    pub fn circuit(&self, phi0: f64) -> Result<NativeCircuit> {
        let ir = build_circuit(&self.config(phi0)?)?;
        transpile_with_layout(&ir, &self.coupling, &self.layout)
    }

    pub fn circuits(&self) -> Result<Vec<NativeCircuit>> {
        self.phi0.par_iter().map(|&phi| self.circuit(phi)).collect()
    }
}

/// Simulates every `(φ₀, run)` cell. Cell `(i, r)` draws from stream
/// `i·runs + r`, so results do not depend on scheduling.
pub fn run_experiment(plan: &ExperimentPlan, noise: &NoiseSpec, seed: u64) -> Result<Vec<ExperimentRecord>> {
    if plan.shots == 0 || plan.runs == 0 {
        return Err(Error::Records("shots and runs must be positive".into()));
    }
    noise.validate()?;
    let cells: Vec<Vec<ExperimentRecord>> = plan
        .phi0
        .par_iter()
        .enumerate()
        .map(|(i, &phi0)| {
            let circuit = plan.circuit(phi0)?;
            let p = noisy_success_probability(&circuit, noise)?;
            (0..plan.runs)
                .map(|r| {
                    let stream = i as u64 * plan.runs as u64 + r as u64;
                    Ok(ExperimentRecord {
                        device_label: plan.device_label.clone(),
                        qubit_set: circuit.physical.clone(),
                        n_iterations: plan.n_iterations,
                        epsilon: plan.epsilon,
                        theta0: plan.theta0,
                        phi0,
                        run_index: r,
                        shots: plan.shots,
                        success_count: sample_shots(p, plan.shots, RngSeed::new(seed, stream))?,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(cells.into_iter().flatten().collect())
}
