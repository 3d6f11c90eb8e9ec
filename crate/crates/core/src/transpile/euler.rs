//! Lowering of single-qubit unitaries to `R_z(x)·√X·R_z(y)·√X·R_z(w)`.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates;
use crate::qmath::{is_unitary, ComplexMatrix, I};

/// Angles of the `R_z(x)·√X·R_z(y)·√X·R_z(w)` pattern (matrix order, so
/// `R_z(w)` acts first).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EulerAngles {
    pub x: f64,
    pub y: f64,
    pub w: f64,
}

impl EulerAngles {
    pub fn matrix(&self) -> ComplexMatrix {
        let sx = gates::sqrt_x();
        &(&(&(&gates::rz(self.x) * &sx) * &gates::rz(self.y)) * &sx) * &gates::rz(self.w)
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn normalize_angle(t: f64) -> f64 {
    let r = t.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Entries below this modulus are treated as exact zeros when picking the
/// diagonal and anti-diagonal branches.
const DEGENERATE: f64 = 1e-15;

/// Solves `R_z(x)·√X·R_z(y)·√X·R_z(w) = e^{iπ/2}·a` (up to global phase) for
/// a unitary `a`.
///
/// With `A = e^{iπ/2}·a/√det(a)` the generic solution is
/// `y = 2·acos(√(A₁₂A₂₁))`, `x = i·log(A₁₁/(A₂₁ tan(y/2)))` and
/// `w = -i·log(-A₂₂/(A₂₁ tan(y/2)))`. `y` is evaluated as
/// `2·atan2(|A₁₁|, |A₂₁|)`, which is the same angle but stays accurate
/// near the poles, and `-A₂₂` is replaced by its unitary equivalent
/// `conj(A₁₁)` so that the phases of tiny entries never leak into the large
/// ones. Results are on the principal branch, wrapped into `(-π, π]`.
pub fn su2_to_native(a: &ComplexMatrix) -> Result<EulerAngles> {
    if a.rows() != 2 || a.cols() != 2 {
        return Err(Error::Dimension(format!(
            "single-qubit lowering needs a 2x2 matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if !is_unitary(a, 1e-10)? {
        return Err(Error::Dimension("single-qubit lowering needs a unitary".into()));
    }
    let det = a.det()?;
    let big_a = a.scale(I / det.sqrt());
    let (a11, a21) = (big_a[(0, 0)], big_a[(1, 0)]);
    let (s, c) = (a11.norm(), a21.norm());

    let (x, y, w) = if c <= DEGENERATE {
        // diagonal: y = π turns √X·R_z(π)·√X into Z, leaving pure phases
        let p = -2.0 * a11.arg();
        (p / 2.0, PI, p / 2.0)
    } else if s <= DEGENERATE {
        // anti-diagonal: y = 0 turns the √X pair into X
        let m = 2.0 * a21.arg();
        (m / 2.0, 0.0, -m / 2.0)
    } else {
        let y = 2.0 * s.atan2(c);
        let t = (y / 2.0).tan();
        let x = (I * (a11 / (a21 * t)).ln()).re;
        let w = (-I * (a11.conj() / (a21 * t)).ln()).re;
        (x, y, w)
    };
    Ok(EulerAngles {
        x: normalize_angle(x),
        y,
        w: normalize_angle(w),
    })
}

pub(crate) fn is_diagonal(m: &ComplexMatrix, tol: f64) -> bool {
    m[(0, 1)].norm() <= tol && m[(1, 0)].norm() <= tol
}

/// `R_z` angle equivalent (up to phase) to a diagonal 2x2 unitary.
pub(crate) fn diagonal_rz_angle(m: &ComplexMatrix) -> f64 {
    normalize_angle((m[(1, 1)] / m[(0, 0)]).arg())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::{c, equal_up_to_global_phase, phase_distance, C64, ZERO};

    fn check(a: &ComplexMatrix) {
        let e = su2_to_native(a).unwrap();
        assert!(e.x.is_finite() && e.y.is_finite() && e.w.is_finite());
        assert!(e.x > -PI && e.x <= PI && e.w > -PI && e.w <= PI);
        let target = a.scale(I);
        let d = phase_distance(&e.matrix(), &target).unwrap();
        assert!(d < 1e-9, "distance {d} for {a:?} -> {e:?}");
    }

    #[test]
    fn pattern_matches_closed_form() {
        // R_z(x)√X R_z(y)√X R_z(w) has entries e^{∓i(x±w)/2}·{sin,cos}(y/2)
        let (x, y, w) = (0.3, 1.1, -0.7);
        let m = EulerAngles { x, y, w }.matrix();
        let (s, co) = ((y / 2.0).sin(), (y / 2.0).cos());
        let expect = ComplexMatrix::from_rows([
            [C64::from_polar(s, -(x + w) / 2.0), C64::from_polar(co, -(x - w) / 2.0)],
            [C64::from_polar(co, (x - w) / 2.0), C64::from_polar(-s, (x + w) / 2.0)],
        ]);
        assert!(m.max_abs_diff(&expect).unwrap() < 1e-15);
    }

    #[test]
    fn named_gates() {
        check(&gates::hadamard());
        check(&gates::rx(PI / 2.0));
        check(&gates::ry(0.4));
        check(&gates::pauli_y());
        check(&(&gates::phase(0.7) * &gates::ry(PI / 8.0)));
    }

    #[test]
    fn degenerate_inputs() {
        check(&ComplexMatrix::identity(2));
        check(&gates::rz(0.9));
        check(&gates::pauli_z());
        check(&gates::pauli_x());
        check(&ComplexMatrix::from_rows([[ZERO, c(0.6, 0.8)], [c(0.0, 1.0), ZERO]]));
        check(&ComplexMatrix::diag(&[c(0.0, 1.0), c(-0.6, 0.8)]));
        // nearly degenerate in both directions
        check(&gates::rx(1e-13));
        check(&(&gates::rx(PI - 1e-13) * &gates::rz(0.3)));
        let diag = su2_to_native(&gates::rz(0.9)).unwrap();
        assert_eq!(diag.y, PI);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(su2_to_native(&ComplexMatrix::identity(4)).is_err());
        assert!(su2_to_native(&ComplexMatrix::identity(2).scale(c(2.0, 0.0))).is_err());
    }

    #[test]
    fn diagonal_helpers() {
        let m = gates::rz(0.4).scale(C64::from_polar(1.0, 0.2));
        assert!(is_diagonal(&m, 1e-15));
        assert!((diagonal_rz_angle(&m) - 0.4).abs() < 1e-15);
        assert!(equal_up_to_global_phase(&gates::rz(diagonal_rz_angle(&m)), &m, 1e-15).unwrap());
    }
}
