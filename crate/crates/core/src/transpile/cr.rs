//! Cross-resonance gate and the CNOT built from it.

use std::f64::consts::PI;

use crate::gates;
use crate::qmath::{c, kron, ComplexMatrix, C64, I, ONE};

/// Nominal CR strength for which the CNOT identity is exact.
pub const CR_NOMINAL: f64 = PI / 4.0;

/// Controlled rotation `|0⟩⟨0|⊗1 + |1⟩⟨1|⊗R_x(-t)`.
fn controlled_u(t: f64) -> ComplexMatrix {
    let (co, si) = ((t / 2.0).cos(), (t / 2.0).sin());
    let mut m = ComplexMatrix::identity(4);
    m[(2, 2)] = c(co, 0.0);
    m[(3, 3)] = c(co, 0.0);
    m[(2, 3)] = I * si;
    m[(3, 2)] = I * si;
    m
}

/// Anti-diagonal identity, i.e. `X⊗X`.
fn exchange() -> ComplexMatrix {
    let mut j = ComplexMatrix::zeros(4, 4);
    for k in 0..4 {
        j[(k, 3 - k)] = ONE;
    }
    j
}

/// `exp(-iβ Z⊗X)` with the first factor as control, assembled as
/// `J·CU(-2β)·J·CU(2β)`.
pub fn cr_gate(beta: f64) -> ComplexMatrix {
    let j = exchange();
    &(&(&j * &controlled_u(-2.0 * beta)) * &j) * &controlled_u(2.0 * beta)
}

/// Closed form of [`cr_gate`].
pub fn cr_gate_closed(beta: f64) -> ComplexMatrix {
    let (co, si) = (C64::new(beta.cos(), 0.0), C64::new(beta.sin(), 0.0));
    let zx = kron(&gates::pauli_z(), &gates::pauli_x());
    ComplexMatrix::identity(4).scale(co).sub(&zx.scale(I * si))
}

/// CNOT realized as `P(-π/2)⊗√X† · CR(π/4 + Λ)`; exact (up to phase) at Λ = 0.
pub fn cnot_from_cr(lambda: f64) -> ComplexMatrix {
    let local = kron(&gates::phase(-PI / 2.0), &gates::sqrt_x_dg());
    &local * &cr_gate(CR_NOMINAL + lambda)
}
