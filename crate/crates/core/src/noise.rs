//! Error channels and the noise model consumed by the density engine.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::gates;
use crate::qmath::{apply_1q, c, ComplexMatrix, ExtComplex, C64, ONE, ZERO};

/// Full noise model. Qubit keys are physical labels; `lambdas` is keyed by
/// ordered `(control, target)` pairs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NoiseSpec {
    /// Depolarizing probability after each iteration layer; missing layers are
    /// noiseless.
    pub per_step_dep: Vec<f64>,
    /// Amplitude damping on post-selected qubits before readout.
    pub gamma: f64,
    pub alphas: BTreeMap<usize, f64>,
    pub lambdas: BTreeMap<(usize, usize), f64>,
    /// `(p01, p10)`: probability of reading 1 for a true 0, and 0 for a true 1.
    pub readout: BTreeMap<usize, (f64, f64)>,
    /// Damp every qubit instead of only the post-selected ones.
    pub damp_all_qubits: bool,
}

fn check_prob(name: &'static str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value: p,
            range: "[0, 1]",
        })
    }
}

fn check_angle(name: &'static str, a: f64) -> Result<()> {
    if a.is_finite() && a.abs() < FRAC_PI_2 {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value: a,
            range: "(-π/2, π/2)",
        })
    }
}

impl NoiseSpec {
    pub fn ideal() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        for &p in &self.per_step_dep {
            check_prob("depolarizing probability", p)?;
        }
        check_prob("gamma", self.gamma)?;
        for &a in self.alphas.values() {
            check_angle("alpha", a)?;
        }
        for (&(ctl, tgt), &l) in &self.lambdas {
            if ctl == tgt {
                return Err(Error::Noise(format!("lambda on degenerate pair {ctl},{tgt}")));
            }
            check_angle("lambda", l)?;
        }
        for &(p01, p10) in self.readout.values() {
            check_prob("p01", p01)?;
            check_prob("p10", p10)?;
        }
        Ok(())
    }

    pub fn alpha(&self, qubit: usize) -> f64 {
        self.alphas.get(&qubit).copied().unwrap_or(0.0)
    }

    pub fn lambda(&self, control: usize, target: usize) -> f64 {
        self.lambdas.get(&(control, target)).copied().unwrap_or(0.0)
    }

    pub fn dep(&self, layer: u32) -> f64 {
        layer
            .checked_sub(1)
            .and_then(|k| self.per_step_dep.get(k as usize))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn has_coherent(&self) -> bool {
        self.alphas.values().chain(self.lambdas.values()).any(|&a| a != 0.0)
    }

    pub fn has_incoherent(&self) -> bool {
        self.per_step_dep.iter().any(|&p| p != 0.0)
            || self.gamma != 0.0
            || self.readout.values().any(|&(a, b)| a != 0.0 || b != 0.0)
    }

    /// Same spec without misrotations.
    pub fn incoherent_part(&self) -> Self {
        NoiseSpec {
            alphas: BTreeMap::new(),
            lambdas: BTreeMap::new(),
            ..self.clone()
        }
    }
}

/// Density matrix stored row-major, so that it doubles as a `2n`-qubit vector
/// whose first `n` qubits index rows.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    data: Vec<C64>,
}

impl DensityMatrix {
    /// `|0…0⟩⟨0…0|`.
    pub fn ground(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        let mut data = vec![ZERO; dim * dim];
        data[0] = ONE;
        DensityMatrix { n_qubits, data }
    }

    pub fn from_pure(amps: &[C64]) -> Result<Self> {
        let dim = amps.len();
        if !dim.is_power_of_two() {
            return Err(Error::Dimension(format!("state length {dim} is not a power of two")));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::Dimension(format!("state has norm² {norm}")));
        }
        let mut data = Vec::with_capacity(dim * dim);
        for a in amps {
            for b in amps {
                data.push(a * b.conj());
            }
        }
        Ok(DensityMatrix {
            n_qubits: dim.trailing_zeros() as usize,
            data,
        })
    }

    /// Validating constructor; see [`DensityMatrix::check`].
    pub fn from_matrix(m: &ComplexMatrix) -> Result<Self> {
        if !m.is_square() || !m.rows().is_power_of_two() {
            return Err(Error::Dimension(format!(
                "density matrix must be square with power-of-two size, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        let rho = DensityMatrix {
            n_qubits: m.rows().trailing_zeros() as usize,
            data: m.as_slice().to_vec(),
        };
        rho.check(1e-10, 1e-9)?;
        Ok(rho)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.dim() + j]
    }

    pub fn to_matrix(&self) -> ComplexMatrix {
        ComplexMatrix::from_vec(self.dim(), self.dim(), self.data.clone()).expect("finite entries")
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|i| self.get(i, i)).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i).re).collect()
    }

    pub fn purity(&self) -> f64 {
        // Tr(ρ²) = Σ|ρ_ij|² for Hermitian ρ
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Checks unit trace and Hermiticity within `tol` and eigenvalues above
    /// `-psd_tol`.
    pub fn check(&self, tol: f64, psd_tol: f64) -> Result<()> {
        let tr = self.trace();
        if (tr - ONE).norm() > tol {
            return Err(Error::Dimension(format!("trace {tr} differs from 1")));
        }
        let d = self.dim();
        for i in 0..d {
            for j in 0..i {
                if (self.get(i, j) - self.get(j, i).conj()).norm() > tol {
                    return Err(Error::Dimension("density matrix is not Hermitian".into()));
                }
            }
        }
        let m = DMatrix::from_fn(d, d, |i, j| (self.get(i, j) + self.get(j, i).conj()) * 0.5);
        let min = m
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min < -psd_tol {
            return Err(Error::Dimension(format!("negative eigenvalue {min}")));
        }
        Ok(())
    }

    /// `ρ ↦ UρU†` for a single-qubit `u`.
    pub fn apply_1q(&mut self, q: usize, u: &ComplexMatrix) {
        let n = self.n_qubits;
        apply_1q(&mut self.data, 2 * n, q, u);
        apply_1q(&mut self.data, 2 * n, n + q, &u.conj());
    }

    /// `ρ ↦ UρU†` for a two-qubit `u` on `(a, b)`.
    pub fn apply_2q(&mut self, a: usize, b: usize, u: &ComplexMatrix) {
        let n = self.n_qubits;
        crate::qmath::apply_2q(&mut self.data, 2 * n, a, b, u);
        crate::qmath::apply_2q(&mut self.data, 2 * n, n + a, n + b, &u.conj());
    }

    /// `ρ ↦ Σ_k E_k ρ E_k†` on qubit `q`.
    pub fn apply_kraus_1q(&mut self, q: usize, kraus: &[ComplexMatrix]) {
        let n = self.n_qubits;
        let mut acc = vec![ZERO; self.data.len()];
        for e in kraus {
            let mut part = self.data.clone();
            apply_1q(&mut part, 2 * n, q, e);
            apply_1q(&mut part, 2 * n, n + q, &e.conj());
            for (a, p) in acc.iter_mut().zip(part) {
                *a += p;
            }
        }
        self.data = acc;
    }

    /// Global depolarizing in place.
    pub fn depolarize_mut(&mut self, p: f64) {
        let d = self.dim();
        for z in self.data.iter_mut() {
            *z *= 1.0 - p;
        }
        for i in 0..d {
            self.data[i * d + i] += p / d as f64;
        }
    }
}

/// `(1-p)·ρ + p·I/D`.
pub fn depolarize(rho: &DensityMatrix, p: f64) -> Result<DensityMatrix> {
    check_prob("depolarizing probability", p)?;
    let mut out = rho.clone();
    out.depolarize_mut(p);
    Ok(out)
}

/// Single depolarizing probability equivalent to applying each of `ps` in
/// sequence: `Σ_{j<n} p_j Π_{l>j}(1-p_l) + p_n`.
pub fn compose_depolarizing(ps: &[f64]) -> Result<f64> {
    for &p in ps {
        check_prob("depolarizing probability", p)?;
    }
    let Some((&last, head)) = ps.split_last() else {
        return Ok(0.0);
    };
    let mut total = last;
    for (j, &p) in head.iter().enumerate() {
        total += p * ps[j + 1..].iter().map(|q| 1.0 - q).product::<f64>();
    }
    Ok(total)
}

/// Success probability after depolarizing with total probability `p_dep` on
/// a register of dimension `dim`: `(1-p_dep)·p_s + 2·p_dep/D`.
pub fn analytic_ps_dep(ps_ideal: f64, p_dep: f64, dim: usize) -> f64 {
    (1.0 - p_dep) * ps_ideal + 2.0 * p_dep / dim as f64
}

/// Kraus pair `E₀ = diag(1, √(1-γ))`, `E₁ = √γ·|0⟩⟨1|`.
pub fn damping_kraus(gamma: f64) -> [ComplexMatrix; 2] {
    let e0 = ComplexMatrix::diag(&[ONE, c((1.0 - gamma).sqrt(), 0.0)]);
    let mut e1 = ComplexMatrix::zeros(2, 2);
    e1[(0, 1)] = c(gamma.sqrt(), 0.0);
    [e0, e1]
}

pub fn amplitude_damp(rho: &DensityMatrix, gamma: f64) -> Result<DensityMatrix> {
    check_prob("gamma", gamma)?;
    if rho.n_qubits() != 1 {
        return Err(Error::Dimension(format!(
            "amplitude damping acts on one qubit, got {}",
            rho.n_qubits()
        )));
    }
    let mut out = rho.clone();
    out.apply_kraus_1q(0, &damping_kraus(gamma));
    Ok(out)
}

/// Decay probability `1 - e^{-t/T₁}` after time `t`.
pub fn gamma_from_t1(t: f64, t1: f64) -> Result<f64> {
    if !(t1 > 0.0) || !t1.is_finite() {
        return Err(Error::Domain {
            name: "T1",
            value: t1,
            range: "(0, ∞)",
        });
    }
    if !(t >= 0.0) {
        return Err(Error::Domain {
            name: "t",
            value: t,
            range: "[0, ∞]",
        });
    }
    Ok(-(-t / t1).exp_m1())
}

/// One-iteration success probability with the measured qubit damped:
/// `(ε² + |z|⁴ + 2γ|z|² + γ(1-ε²)) / (1+|z|²)²`.
pub fn analytic_ps_ad(z: ExtComplex, epsilon: f64, gamma: f64) -> f64 {
    match z {
        ExtComplex::Infinity => 1.0,
        ExtComplex::Finite(z) => {
            let r = z.norm_sqr();
            let e2 = epsilon * epsilon;
            (e2 + r * r + 2.0 * gamma * r + gamma * (1.0 - e2)) / ((1.0 + r) * (1.0 + r))
        }
    }
}

/// `R_x(π/2 + α)`.
pub fn sqrt_x_with_error(alpha: f64) -> ComplexMatrix {
    gates::rx(PI / 2.0 + alpha)
}

/// Observed post-selection rate when each of `pattern_size` measured qubits
/// misreads independently. Exact for one qubit; for more, failing
/// configurations are approximated as having a single excited qubit.
pub fn readout_flip(p_success_true: f64, p01: f64, p10: f64, pattern_size: usize) -> f64 {
    if pattern_size == 0 {
        return p_success_true;
    }
    let keep = (1.0 - p01).powi(pattern_size as i32 - 1);
    p_success_true * keep * (1.0 - p01) + (1.0 - p_success_true) * p10 * keep
}
