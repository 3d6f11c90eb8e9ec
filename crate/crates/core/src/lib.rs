//! Simulation and analysis of the iterated post-selective state-matching
//! benchmark.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod engine;
pub mod error;
pub mod gates;
pub mod noise;
pub mod protocol;
pub mod qmath;
pub mod transpile;

pub use error::{Error, Result};
pub use protocol::{build_circuit, success_probability, CircuitIR, IrOp, ProtocolConfig};
pub use qmath::{BlochAngles, ComplexMatrix, ExtComplex, C64};
pub use transpile::{transpile_circuit, CouplingMap, NativeCircuit, NativeGate};
