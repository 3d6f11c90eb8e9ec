//! The state-matching protocol: the two-qubit unitary `U_ε`, the rational
//! map `z ↦ z²/ε` it induces on post-selected qubits, the closed-form
//! success probability, and the abstract multi-layer circuit.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmath::{bloch_to_z, c, BlochAngles, ComplexMatrix, ExtComplex, C64, ONE, ZERO};

/// Largest supported iteration count; `2^n` qubits are needed, and the
/// exponents in the closed forms grow as `2^{n+1}`.
pub const MAX_ITERATIONS: u32 = 20;

/// Defines one protocol instance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub epsilon: f64,
    pub theta0: f64,
    pub phi0: f64,
    pub n_iterations: u32,
}

impl ProtocolConfig {
    pub fn new(epsilon: f64, theta0: f64, phi0: f64, n_iterations: u32) -> Result<Self> {
        let cfg = Self {
            epsilon,
            theta0,
            phi0,
            n_iterations,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        check_epsilon(self.epsilon)?;
        if !self.theta0.is_finite() {
            return Err(Error::Domain {
                name: "theta0",
                value: self.theta0,
                range: "finite",
            });
        }
        if !self.phi0.is_finite() {
            return Err(Error::Domain {
                name: "phi0",
                value: self.phi0,
                range: "finite",
            });
        }
        if self.n_iterations == 0 || self.n_iterations > MAX_ITERATIONS {
            return Err(Error::Domain {
                name: "n_iterations",
                value: self.n_iterations as f64,
                range: "[1, 20]",
            });
        }
        Ok(())
    }

    pub fn with_phi0(mut self, phi0: f64) -> Self {
        self.phi0 = phi0;
        self
    }

    pub fn n_qubits(&self) -> usize {
        1 << self.n_iterations
    }
}

pub(crate) fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "epsilon",
            value: epsilon,
            range: "(0, 1]",
        })
    }
}

/// The 4x4 protocol unitary. The first tensor factor is the kept qubit and
/// the second is the one measured and post-selected on `0`.
pub fn build_u_eps(epsilon: f64) -> Result<ComplexMatrix> {
    check_epsilon(epsilon)?;
    let s = (1.0 - epsilon * epsilon).sqrt();
    let r = FRAC_1_SQRT_2;
    let e = c(epsilon, 0.0);
    Ok(ComplexMatrix::from_rows([
        [e, c(-r * s, 0.0), c(r * s, 0.0), ZERO],
        [ZERO, c(r, 0.0), c(r, 0.0), ZERO],
        [ZERO, ZERO, ZERO, ONE],
        [c(s, 0.0), c(r * epsilon, 0.0), c(-r * epsilon, 0.0), ZERO],
    ]))
}

/// One application of `z ↦ z²/ε`.
pub fn f_map(z: ExtComplex, epsilon: f64) -> ExtComplex {
    match z {
        ExtComplex::Infinity => ExtComplex::Infinity,
        ExtComplex::Finite(z) => ExtComplex::from_c64(z * z / epsilon),
    }
}

/// `n`-fold composition of [`f_map`].
pub fn iterate_f(z: ExtComplex, epsilon: f64, n: u32) -> ExtComplex {
    (0..n).fold(z, |acc, _| f_map(acc, epsilon))
}

/// Normalized state of the kept qubit after `n` successful iterations,
/// as `[amp(|0⟩), amp(|1⟩)]`.
pub fn theoretical_state(cfg: &ProtocolConfig) -> Result<[C64; 2]> {
    cfg.validate()?;
    let k = 2f64.powi(cfg.n_iterations as i32);
    let (sin_h, cos_h) = (cfg.theta0 / 2.0).sin_cos();
    // log-domain magnitudes so large n neither underflows nor divides 0/0
    let log_a = (k - 1.0) * cfg.epsilon.ln() + k * cos_h.abs().ln();
    let log_b = k * sin_h.abs().ln();
    let top = log_a.max(log_b);
    let a = (log_a - top).exp();
    let b = (log_b - top).exp();
    let norm = a.hypot(b);
    let phase = (k * cfg.phi0).rem_euclid(std::f64::consts::TAU);
    Ok([c(a / norm, 0.0), C64::from_polar(b / norm, phase)])
}

/// Ratio `amp(|1⟩)/amp(|0⟩)` of the ideal output, via the iterated map.
pub fn output_ratio(cfg: &ProtocolConfig) -> Result<ExtComplex> {
    cfg.validate()?;
    let theta = cfg.theta0.rem_euclid(std::f64::consts::TAU);
    let (theta, phi) = if theta > std::f64::consts::PI {
        (std::f64::consts::TAU - theta, cfg.phi0 + std::f64::consts::PI)
    } else {
        (theta, cfg.phi0)
    };
    let z = bloch_to_z(BlochAngles::new(theta, phi)?);
    Ok(iterate_f(z, cfg.epsilon, cfg.n_iterations))
}

/// Ideal probability that all `n` layers of post-selection succeed:
/// `ε^{2^{n+1}-2} cos^{2^{n+1}}(θ₀/2) + sin^{2^{n+1}}(θ₀/2)`.
pub fn success_probability(epsilon: f64, theta0: f64, n: u32) -> Result<f64> {
    ProtocolConfig::new(epsilon, theta0, 0.0, n)?;
    let k = 2f64.powi(n as i32 + 1);
    let (s, co) = (theta0 / 2.0).sin_cos();
    Ok(epsilon.powf(k - 2.0) * co.abs().powf(k) + s.abs().powf(k))
}

/// Abstract protocol operations. Decomposition into native gates lives in
/// [`crate::transpile`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum IrOp {
    /// `R_y(θ)` on one qubit.
    StatePrepY { theta: f64, qubit: usize },
    /// Phase gate `P(φ)` on one qubit.
    Phase { phi: f64, qubit: usize },
    /// `U_ε` with `kept` as the first tensor factor.
    UEps {
        epsilon: f64,
        kept: usize,
        measured: usize,
    },
    /// End of iteration layer `layer` (1-based).
    Barrier { layer: u32 },
}

impl IrOp {
    pub fn gate_id(&self) -> &'static str {
        match self {
            IrOp::StatePrepY { .. } => "STATE_PREP_Y",
            IrOp::Phase { .. } => "PHASE",
            IrOp::UEps { .. } => "U_EPS",
            IrOp::Barrier { .. } => "BARRIER",
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            IrOp::StatePrepY { theta, .. } => vec![theta],
            IrOp::Phase { phi, .. } => vec![phi],
            IrOp::UEps { epsilon, .. } => vec![epsilon],
            IrOp::Barrier { .. } => vec![],
        }
    }

    pub fn targets(&self) -> Vec<usize> {
        match *self {
            IrOp::StatePrepY { qubit, .. } | IrOp::Phase { qubit, .. } => vec![qubit],
            IrOp::UEps { kept, measured, .. } => vec![kept, measured],
            IrOp::Barrier { .. } => vec![],
        }
    }
}

/// Gate-level protocol circuit with deferred post-selection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitIR {
    pub n_qubits: usize,
    pub n_iterations: u32,
    pub ops: Vec<IrOp>,
    /// Qubits that must all read `0`, in the order their layer measures them.
    pub postselect_qubits: Vec<usize>,
    pub kept_qubit: usize,
}

impl CircuitIR {
    pub fn validate(&self) -> Result<()> {
        if self.n_qubits != 1usize << self.n_iterations {
            return Err(Error::Circuit(format!(
                "{} qubits for {} iterations (expected {})",
                self.n_qubits,
                self.n_iterations,
                1usize << self.n_iterations
            )));
        }
        for op in &self.ops {
            if let Some(&q) = op.targets().iter().find(|&&q| q >= self.n_qubits) {
                return Err(Error::Circuit(format!(
                    "{} targets qubit {q} of {}",
                    op.gate_id(),
                    self.n_qubits
                )));
            }
        }
        if self.postselect_qubits.contains(&self.kept_qubit) {
            return Err(Error::Circuit(format!(
                "kept qubit {} is also post-selected",
                self.kept_qubit
            )));
        }
        Ok(())
    }

    pub fn u_eps_count(&self) -> usize {
        self.ops
            .iter()
            .filter(|op| matches!(op, IrOp::UEps { .. }))
            .count()
    }
}

/// Lays out the `n`-iteration circuit: state preparation `P(φ₀)R_y(θ₀)` on
/// all `2^n` qubits, then layer `k` applies `U_ε` to qubits `(b, b + 2^{k-1})`
/// for every block start `b` in steps of `2^k`. All measurements are deferred
/// and qubit 0 is the one kept.
pub fn build_circuit(cfg: &ProtocolConfig) -> Result<CircuitIR> {
    cfg.validate()?;
    let n_qubits = cfg.n_qubits();
    let mut ops = Vec::with_capacity(3 * n_qubits);
    for qubit in 0..n_qubits {
        ops.push(IrOp::StatePrepY {
            theta: cfg.theta0,
            qubit,
        });
        ops.push(IrOp::Phase {
            phi: cfg.phi0,
            qubit,
        });
    }
    let mut postselect_qubits = Vec::with_capacity(n_qubits - 1);
    for layer in 1..=cfg.n_iterations {
        let block = 1usize << layer;
        let half = block >> 1;
        for kept in (0..n_qubits).step_by(block) {
            ops.push(IrOp::UEps {
                epsilon: cfg.epsilon,
                kept,
                measured: kept + half,
            });
            postselect_qubits.push(kept + half);
        }
        ops.push(IrOp::Barrier { layer });
    }
    let ir = CircuitIR {
        n_qubits,
        n_iterations: cfg.n_iterations,
        ops,
        postselect_qubits,
        kept_qubit: 0,
    };
    ir.validate()?;
    Ok(ir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::is_unitary;
    use std::f64::consts::{FRAC_PI_8, PI};

    #[test]
    fn u_eps_at_one() {
        let u = build_u_eps(1.0).unwrap();
        let r = FRAC_1_SQRT_2;
        let expect = [
            [1.0, 0.0, 0.0, 0.0],
            [0.0, r, r, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [0.0, r, -r, 0.0],
        ];
        for (i, row) in expect.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert!((u[(i, j)] - c(v, 0.0)).norm() < 1e-15, "({i},{j})");
            }
        }
    }

    #[test]
    fn u_eps_first_column() {
        let u = build_u_eps(0.973).unwrap();
        assert!((u[(0, 0)].re - 0.973).abs() < 1e-15);
        assert_eq!(u[(1, 0)], ZERO);
        assert_eq!(u[(2, 0)], ZERO);
        assert!((u[(3, 0)].re - (1.0f64 - 0.973 * 0.973).sqrt()).abs() < 1e-15);
        assert!((u[(3, 0)].re - 0.2308).abs() < 1e-4);
    }

    #[test]
    fn u_eps_unitary_and_domain() {
        for eps in [1e-6, 0.1, 0.5, 0.973, 1.0] {
            assert!(is_unitary(&build_u_eps(eps).unwrap(), 1e-12).unwrap());
        }
        assert!(build_u_eps(0.0).is_err());
        assert!(build_u_eps(1.2).is_err());
        assert!(build_u_eps(f64::NAN).is_err());
    }

    #[test]
    fn map_fixed_points_and_values() {
        let zero = ExtComplex::Finite(ZERO);
        assert_eq!(f_map(zero, 0.3), zero);
        let eps = 0.7;
        let fe = f_map(ExtComplex::Finite(c(eps, 0.0)), eps).finite().unwrap();
        assert!((fe - c(eps, 0.0)).norm() < 1e-15);
        let one = f_map(ExtComplex::Finite(ONE), 0.5).finite().unwrap();
        assert!((one - c(2.0, 0.0)).norm() < 1e-15);
        assert!(f_map(ExtComplex::Infinity, 0.5).is_infinite());
        // overflow is tagged, never a float infinity
        assert!(f_map(ExtComplex::Finite(c(1e200, 0.0)), 1e-10).is_infinite());
    }

    #[test]
    fn iterate_matches_closed_form() {
        for &(re, im, eps) in &[(0.3, -0.2, 0.9), (1.1, 0.4, 0.5), (-0.05, 0.7, 0.973)] {
            let z = c(re, im);
            let two = iterate_f(ExtComplex::Finite(z), eps, 2).finite().unwrap();
            let closed = z.powi(4) / eps.powi(3);
            assert!((two - closed).norm() < 1e-13 * closed.norm().max(1.0));
        }
        let z = C64::from_polar(0.2, PI / 5.0);
        let three = iterate_f(ExtComplex::Finite(z), 0.973, 3).finite().unwrap();
        let closed = z.powi(8) / 0.973f64.powi(7);
        assert!((three - closed).norm() < 1e-15);
        for n in 1..6 {
            assert_eq!(
                iterate_f(ExtComplex::Finite(ZERO), 0.4, n),
                ExtComplex::Finite(ZERO)
            );
        }
    }

    #[test]
    fn theoretical_state_poles() {
        let s = theoretical_state(&ProtocolConfig::new(0.9, 0.0, 1.0, 2).unwrap()).unwrap();
        assert!((s[0] - ONE).norm() < 1e-15 && s[1].norm() < 1e-15);
        let phi = 0.3;
        let s = theoretical_state(&ProtocolConfig::new(0.9, PI, phi, 2).unwrap()).unwrap();
        assert!(s[0].norm() < 1e-15);
        assert!((s[1] - C64::from_polar(1.0, 4.0 * phi)).norm() < 1e-14);
    }

    #[test]
    fn theoretical_state_ratio_is_iterated_map() {
        let cfg = ProtocolConfig::new(0.973, FRAC_PI_8, 0.7, 2).unwrap();
        let s = theoretical_state(&cfg).unwrap();
        let ratio = output_ratio(&cfg).unwrap().finite().unwrap();
        assert!((s[1] / s[0] - ratio).norm() < 1e-12 * ratio.norm().max(1.0));
        assert!(((s[0].norm_sqr() + s[1].norm_sqr()) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn theoretical_state_large_n_is_finite() {
        let s = theoretical_state(&ProtocolConfig::new(0.5, 1.2, 0.1, 18).unwrap()).unwrap();
        assert!(s.iter().all(|a| a.re.is_finite() && a.im.is_finite()));
        assert!(((s[0].norm_sqr() + s[1].norm_sqr()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn success_probability_reported_values() {
        let p1 = success_probability(0.973, FRAC_PI_8, 1).unwrap();
        assert!((p1 - 0.8775).abs() < 5e-4, "{p1}");
        let p2 = success_probability(0.973, FRAC_PI_8, 2).unwrap();
        assert!((p2 - 0.7267).abs() < 1e-3, "{p2}");
        let p3 = success_probability(0.973, 2.5571, 1).unwrap();
        assert!((p3 - 0.8474).abs() < 1e-3, "{p3}");
        for n in 1..5 {
            for eps in [0.2, 0.973] {
                assert!((success_probability(eps, PI, n).unwrap() - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn success_probability_decreases_with_n() {
        for &theta in &[0.1, 0.4, FRAC_PI_8, 1.0, 1.5] {
            let mut last = 1.0;
            for n in 1..6 {
                let p = success_probability(0.9, theta, n).unwrap();
                assert!(p < last, "theta {theta} n {n}");
                last = p;
            }
        }
    }

    #[test]
    fn circuit_shapes() {
        let one = build_circuit(&ProtocolConfig::new(0.9, 0.3, 0.0, 1).unwrap()).unwrap();
        assert_eq!(one.n_qubits, 2);
        assert_eq!(one.u_eps_count(), 1);
        assert_eq!(one.postselect_qubits, vec![1]);
        let two = build_circuit(&ProtocolConfig::new(0.9, 0.3, 0.0, 2).unwrap()).unwrap();
        assert_eq!(two.n_qubits, 4);
        assert_eq!(two.u_eps_count(), 3);
        assert_eq!(two.postselect_qubits, vec![1, 3, 2]);
        assert_eq!(two.kept_qubit, 0);
        let pairs: Vec<_> = two
            .ops
            .iter()
            .filter_map(|op| match *op {
                IrOp::UEps { kept, measured, .. } => Some((kept, measured)),
                _ => None,
            })
            .collect();
        assert_eq!(pairs, vec![(0, 1), (2, 3), (0, 2)]);
        let three = build_circuit(&ProtocolConfig::new(0.9, 0.3, 0.0, 3).unwrap()).unwrap();
        assert_eq!(three.u_eps_count(), 7);
        assert!(three.validate().is_ok());
    }

    #[test]
    fn invalid_circuit_detected() {
        let mut ir = build_circuit(&ProtocolConfig::new(0.9, 0.3, 0.0, 1).unwrap()).unwrap();
        ir.postselect_qubits.push(0);
        assert!(ir.validate().is_err());
        ir.postselect_qubits.pop();
        ir.ops.push(IrOp::Phase { phi: 0.1, qubit: 5 });
        assert!(ir.validate().is_err());
    }
}
