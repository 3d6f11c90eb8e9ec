//! Standard gate matrices. Qubit 0 is the most significant tensor factor.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::qmath::{c, ComplexMatrix, C64, I, ONE, ZERO};

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_rows([[ZERO, ONE], [ONE, ZERO]])
}

pub fn pauli_y() -> ComplexMatrix {
    ComplexMatrix::from_rows([[ZERO, -I], [I, ZERO]])
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_rows([[ONE, ZERO], [ZERO, -ONE]])
}

pub fn hadamard() -> ComplexMatrix {
    let h = c(FRAC_1_SQRT_2, 0.0);
    ComplexMatrix::from_rows([[h, h], [h, -h]])
}

pub fn rx(theta: f64) -> ComplexMatrix {
    let (s, co) = (theta / 2.0).sin_cos();
    ComplexMatrix::from_rows([[c(co, 0.0), c(0.0, -s)], [c(0.0, -s), c(co, 0.0)]])
}

pub fn ry(theta: f64) -> ComplexMatrix {
    let (s, co) = (theta / 2.0).sin_cos();
    ComplexMatrix::from_rows([[c(co, 0.0), c(-s, 0.0)], [c(s, 0.0), c(co, 0.0)]])
}

pub fn rz(theta: f64) -> ComplexMatrix {
    ComplexMatrix::diag(&[C64::from_polar(1.0, -theta / 2.0), C64::from_polar(1.0, theta / 2.0)])
}

/// Phase gate `diag(1, e^{iφ})`.
pub fn phase(phi: f64) -> ComplexMatrix {
    ComplexMatrix::diag(&[ONE, C64::from_polar(1.0, phi)])
}

/// `√X = e^{iπ/4} R_x(π/2)`.
pub fn sqrt_x() -> ComplexMatrix {
    let a = c(0.5, 0.5);
    let b = c(0.5, -0.5);
    ComplexMatrix::from_rows([[a, b], [b, a]])
}

pub fn sqrt_x_dg() -> ComplexMatrix {
    sqrt_x().dagger()
}

/// CNOT with the first tensor factor as control.
pub fn cnot() -> ComplexMatrix {
    ComplexMatrix::from_rows([
        [ONE, ZERO, ZERO, ZERO],
        [ZERO, ONE, ZERO, ZERO],
        [ZERO, ZERO, ZERO, ONE],
        [ZERO, ZERO, ONE, ZERO],
    ])
}

pub fn swap() -> ComplexMatrix {
    ComplexMatrix::from_rows([
        [ONE, ZERO, ZERO, ZERO],
        [ZERO, ZERO, ONE, ZERO],
        [ZERO, ONE, ZERO, ZERO],
        [ZERO, ZERO, ZERO, ONE],
    ])
}
