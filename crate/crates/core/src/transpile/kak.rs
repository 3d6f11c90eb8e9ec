//! Two-CNOT synthesis for two-qubit unitaries with a vanishing canonical
//! coordinate, via the magic-basis (KAK) decomposition.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use nalgebra::{Matrix4, SymmetricEigen, Vector4};

use crate::error::{Error, Result};
use crate::gates;
use crate::protocol::build_u_eps;
use crate::qmath::{c, is_unitary, kron, ComplexMatrix, C64, I, ZERO};

/// `U ≅ (A₁⊗A₂)·CNOT·(R_x(hx)⊗R_y(hy))·CNOT·(B₁⊗B₂)`, CNOT controlled on the
/// first factor.
#[derive(Clone, Debug)]
pub struct TwoCnotDecomposition {
    pub b1: ComplexMatrix,
    pub b2: ComplexMatrix,
    pub hx: f64,
    pub hy: f64,
    pub a1: ComplexMatrix,
    pub a2: ComplexMatrix,
}

/// One element of the decomposed sequence, in time order.
#[derive(Clone, Debug)]
pub enum LocalOp {
    /// Single-qubit unitary on wire 0 or 1.
    Single { wire: usize, matrix: ComplexMatrix },
    /// CNOT with wire 0 as control.
    Cnot,
}

impl TwoCnotDecomposition {
    pub fn cnot_count(&self) -> usize {
        2
    }

    pub fn sequence(&self) -> Vec<LocalOp> {
        let single = |wire, matrix: &ComplexMatrix| LocalOp::Single {
            wire,
            matrix: matrix.clone(),
        };
        vec![
            single(0, &self.b1),
            single(1, &self.b2),
            LocalOp::Cnot,
            single(0, &gates::rx(self.hx)),
            single(1, &gates::ry(self.hy)),
            LocalOp::Cnot,
            single(0, &self.a1),
            single(1, &self.a2),
        ]
    }

    pub fn assemble(&self) -> ComplexMatrix {
        let mut u = ComplexMatrix::identity(4);
        for op in self.sequence() {
            let g = match op {
                LocalOp::Single { wire: 0, matrix } => kron(&matrix, &ComplexMatrix::identity(2)),
                LocalOp::Single { matrix, .. } => kron(&ComplexMatrix::identity(2), &matrix),
                LocalOp::Cnot => gates::cnot(),
            };
            u = &g * &u;
        }
        u
    }
}

/// Decomposition of the protocol gate `U_ε` with the kept qubit first.
pub fn decompose_u_eps(epsilon: f64) -> Result<TwoCnotDecomposition> {
    decompose_two_cnot(&build_u_eps(epsilon)?)
}

fn magic() -> ComplexMatrix {
    let h = c(FRAC_1_SQRT_2, 0.0);
    let ih = I * FRAC_1_SQRT_2;
    ComplexMatrix::from_rows([
        [h, ZERO, ZERO, ih],
        [ZERO, ih, h, ZERO],
        [ZERO, ih, -h, ZERO],
        [h, ZERO, ZERO, -ih],
    ])
}

fn to_real(m: &ComplexMatrix, f: impl Fn(C64) -> f64) -> Matrix4<f64> {
    Matrix4::from_fn(|i, j| f(m[(i, j)]))
}

fn from_real(m: &Matrix4<f64>) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(4, 4);
    for i in 0..4 {
        for j in 0..4 {
            out[(i, j)] = c(m[(i, j)], 0.0);
        }
    }
    out
}

/// Real orthogonal `O` with `OᵀMO` diagonal, for complex symmetric unitary `M`.
fn diagonalize_symmetric_unitary(m: &ComplexMatrix) -> Result<Matrix4<f64>> {
    let (re, im) = (to_real(m, |z| z.re), to_real(m, |z| z.im));
    // Re and Im commute, so a generic real combination separates eigenspaces
    for r in [0.0, 1.0, 0.5772, 1.3, 2.9, 0.31] {
        let eig = SymmetricEigen::new(re + im * r);
        let o = eig.eigenvectors;
        let d = from_real(&o.transpose()) * m.clone() * from_real(&o);
        let off = (0..4)
            .flat_map(|i| (0..4).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| d[(i, j)].norm())
            .fold(0.0, f64::max);
        if off < 1e-12 {
            return Ok(o);
        }
    }
    Err(Error::Dimension("failed to diagonalize magic-basis product".into()))
}

/// Splits a 4x4 matrix that is (up to phase) `A⊗B` into its factors.
fn split_tensor(m: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let block = |r: usize, s: usize| {
        ComplexMatrix::from_rows([
            [m[(2 * r, 2 * s)], m[(2 * r, 2 * s + 1)]],
            [m[(2 * r + 1, 2 * s)], m[(2 * r + 1, 2 * s + 1)]],
        ])
    };
    let (mut best, mut norm) = ((0, 0), -1.0);
    for r in 0..2 {
        for s in 0..2 {
            let n = block(r, s).max_abs();
            if n > norm {
                best = (r, s);
                norm = n;
            }
        }
    }
    let b = block(best.0, best.1);
    let det = b.det()?;
    if det.norm() < 1e-12 {
        return Err(Error::Dimension("matrix is not a tensor product".into()));
    }
    let b = b.scale(det.sqrt().inv());
    let bd = b.dagger();
    let mut a = ComplexMatrix::zeros(2, 2);
    for r in 0..2 {
        for s in 0..2 {
            a[(r, s)] = (&bd * &block(r, s)).trace() / 2.0;
        }
    }
    Ok((a, b))
}

/// Two-CNOT decomposition of a 4x4 unitary. Fails with
/// [`Error::NotTwoCnot`] when no canonical coordinate vanishes modulo π/2.
pub fn decompose_two_cnot(u: &ComplexMatrix) -> Result<TwoCnotDecomposition> {
    if u.rows() != 4 || u.cols() != 4 || !is_unitary(u, 1e-10)? {
        return Err(Error::Dimension("two-qubit synthesis needs a 4x4 unitary".into()));
    }
    let q = magic();
    let qd = q.dagger();
    let det = u.det()?;
    let u4 = u.scale((det.ln() / 4.0).exp().inv());
    let ub = &(&qd * &u4) * &q;
    let mm = &ub.transpose() * &ub;

    let mut o = diagonalize_symmetric_unitary(&mm)?;
    if o.determinant() < 0.0 {
        o.set_column(0, &(-o.column(0)));
    }
    let oc = from_real(&o);
    let d = &(&oc.transpose() * &mm) * &oc;
    let mut theta = Vector4::from_fn(|k, _| d[(k, k)].arg() / 2.0);
    let k1b_of = |theta: &Vector4<f64>| {
        let phases: Vec<C64> = theta.iter().map(|t| C64::from_polar(1.0, -t)).collect();
        &(&ub * &oc) * &ComplexMatrix::diag(&phases)
    };
    let mut k1b = k1b_of(&theta);
    if k1b.det()?.re < 0.0 {
        theta[0] += PI;
        k1b = k1b_of(&theta);
    }
    let k1 = &(&q * &k1b) * &qd;
    let k2 = &(&q * &oc.transpose()) * &qd;

    // θ = a·diag(XX) + b·diag(YY) + c·diag(ZZ) + g in the magic basis
    let paulis = [gates::pauli_x(), gates::pauli_y(), gates::pauli_z()];
    let mut sys = Matrix4::zeros();
    for (col, p) in paulis.iter().enumerate() {
        let pp = &(&qd * &kron(p, p)) * &q;
        for k in 0..4 {
            sys[(k, col)] = pp[(k, k)].re;
        }
    }
    for k in 0..4 {
        sys[(k, 3)] = 1.0;
    }
    let coords = sys
        .lu()
        .solve(&theta)
        .ok_or_else(|| Error::Dimension("singular canonical system".into()))?;
    let abc = [coords[0], coords[1], coords[2]];

    let dist = |t: f64| (t - (t / FRAC_PI_2).round() * FRAC_PI_2).abs();
    let (zero, residual) = (0..3)
        .map(|k| (k, dist(abc[k])))
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .expect("three coordinates");
    if residual > 1e-8 {
        return Err(Error::NotTwoCnot(residual));
    }

    // exp(i·t·PP) = (i·PP)^k for t = kπ/2
    let k = ((abc[zero] / FRAC_PI_2).round() as i64).rem_euclid(4);
    let ipp = kron(&paulis[zero], &paulis[zero]).scale(I);
    let mut absorbed = ComplexMatrix::identity(4);
    for _ in 0..k {
        absorbed = &absorbed * &ipp;
    }

    // conjugate so the surviving terms are XX and YY
    let (frame, xa, yb) = match zero {
        0 => {
            let h = gates::hadamard();
            (kron(&h, &h), abc[2], abc[1])
        }
        1 => {
            let r = gates::rx(FRAC_PI_2);
            (kron(&r, &r), abc[0], abc[2])
        }
        _ => (ComplexMatrix::identity(4), abc[0], abc[1]),
    };

    // exp(i(a·XX + b·YY)) = (V⊗1)·CNOT·(R_x(-2a)⊗R_y(-2b))·CNOT·(V†⊗1)
    let v = kron(&gates::rx(-FRAC_PI_2), &ComplexMatrix::identity(2));
    let left = &(&(&k1 * &absorbed) * &frame) * &v;
    let right = &(&v.dagger() * &frame.dagger()) * &k2;
    let (a1, a2) = split_tensor(&left)?;
    let (b1, b2) = split_tensor(&right)?;
    Ok(TwoCnotDecomposition {
        b1,
        b2,
        hx: -2.0 * xa,
        hy: -2.0 * yb,
        a1,
        a2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::equal_up_to_global_phase;

    #[test]
    fn u_eps_reassembles() {
        for eps in [1.0, 0.973, 0.5, 0.1, 1e-3] {
            let dec = decompose_u_eps(eps).unwrap();
            let target = build_u_eps(eps).unwrap();
            assert!(
                equal_up_to_global_phase(&dec.assemble(), &target, 1e-10).unwrap(),
                "eps {eps}"
            );
            for m in [&dec.a1, &dec.a2, &dec.b1, &dec.b2] {
                assert!(is_unitary(m, 1e-10).unwrap());
            }
        }
    }

    #[test]
    fn local_and_cnot_inputs() {
        let local = kron(&gates::ry(0.3), &gates::rz(1.1));
        let dec = decompose_two_cnot(&local).unwrap();
        assert!(equal_up_to_global_phase(&dec.assemble(), &local, 1e-10).unwrap());
        let cx = gates::cnot();
        let dec = decompose_two_cnot(&cx).unwrap();
        assert!(equal_up_to_global_phase(&dec.assemble(), &cx, 1e-10).unwrap());
    }

    #[test]
    fn generic_gate_rejected() {
        let p = kron(&gates::pauli_x(), &gates::pauli_x()).scale(I * 0.3f64.sin());
        let xx = ComplexMatrix::identity(4).scale(c(0.3f64.cos(), 0.0)).add(&p);
        let q = kron(&gates::pauli_y(), &gates::pauli_y()).scale(I * 0.5f64.sin());
        let yy = ComplexMatrix::identity(4).scale(c(0.5f64.cos(), 0.0)).add(&q);
        let r = kron(&gates::pauli_z(), &gates::pauli_z()).scale(I * 0.2f64.sin());
        let zz = ComplexMatrix::identity(4).scale(c(0.2f64.cos(), 0.0)).add(&r);
        let u = &(&xx * &yy) * &zz;
        assert!(matches!(decompose_two_cnot(&u), Err(Error::NotTwoCnot(_))));
        assert!(decompose_two_cnot(&ComplexMatrix::identity(2)).is_err());
    }
}
