//! Lowering of the protocol circuit to `{√X, R_z, CR}` on a coupling graph.

mod cr;
mod euler;
mod kak;
mod native;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates;
use crate::protocol::{CircuitIR, IrOp};
use crate::qmath::ComplexMatrix;

pub use cr::{cnot_from_cr, cr_gate, cr_gate_closed, CR_NOMINAL};
pub use euler::{normalize_angle, su2_to_native, EulerAngles};
pub use kak::{decompose_two_cnot, decompose_u_eps, LocalOp, TwoCnotDecomposition};
pub use native::{NativeCircuit, NativeGate};

/// Undirected qubit connectivity.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CouplingMap {
    edges: BTreeSet<(usize, usize)>,
}

impl CouplingMap {
    pub fn from_edges(edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::Circuit(format!("self-loop on qubit {a}")));
            }
            set.insert((a.min(b), a.max(b)));
        }
        Ok(CouplingMap { edges: set })
    }

    /// Chain `0-1-…-(n-1)`.
    pub fn linear(n: usize) -> Self {
        CouplingMap {
            edges: (1..n).map(|q| (q - 1, q)).collect(),
        }
    }

    pub fn full(n: usize) -> Self {
        CouplingMap {
            edges: (0..n)
                .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
                .collect(),
        }
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn qubits(&self) -> BTreeSet<usize> {
        self.edges.iter().flat_map(|&(a, b)| [a, b]).collect()
    }

    /// Neighbours in ascending order.
    pub fn neighbors(&self, q: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| match (a == q, b == q) {
                (true, _) => Some(b),
                (_, true) => Some(a),
                _ => None,
            })
            .collect()
    }

    /// A shortest path from `a` to `b`, ties going to the lowest labels.
    pub fn shortest_path(&self, a: usize, b: usize) -> Option<Vec<usize>> {
        let mut prev = BTreeMap::new();
        let mut queue = VecDeque::from([a]);
        prev.insert(a, a);
        while let Some(q) = queue.pop_front() {
            if q == b {
                let mut path = vec![b];
                let mut cur = b;
                while cur != a {
                    cur = prev[&cur];
                    path.push(cur);
                }
                path.reverse();
                return Some(path);
            }
            for n in self.neighbors(q) {
                if let std::collections::btree_map::Entry::Vacant(e) = prev.entry(n) {
                    e.insert(q);
                    queue.push_back(n);
                }
            }
        }
        None
    }
}

impl fmt::Display for CouplingMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.edges.iter().map(|(a, b)| format!("{a}-{b}")).collect();
        f.write_str(&parts.join(","))
    }
}

impl FromStr for CouplingMap {
    type Err = Error;

    /// `"0-1,1-2"`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(CouplingMap::default());
        }
        let edge = |e: &str| -> Result<(usize, usize)> {
            let (a, b) = e
                .split_once('-')
                .ok_or_else(|| Error::Circuit(format!("bad coupling edge '{e}'")))?;
            let p = |x: &str| {
                x.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Circuit(format!("bad coupling edge '{e}'")))
            };
            Ok((p(a)?, p(b)?))
        };
        CouplingMap::from_edges(s.split(',').map(edge).collect::<Result<Vec<_>>>()?)
    }
}

enum Staged {
    One(usize, ComplexMatrix),
    Cx(usize, usize),
    Swap(usize, usize),
    Barrier(u32),
}

/// Transpiles with the identity initial layout (logical `q` on physical `q`).
pub fn transpile_circuit(ir: &CircuitIR, coupling: &CouplingMap) -> Result<NativeCircuit> {
    let layout: Vec<usize> = (0..ir.n_qubits).collect();
    transpile_with_layout(ir, coupling, &layout)
}

/// Transpiles with `layout[logical] = physical`.
///
/// Non-adjacent `U_ε` operands are brought together with SWAPs along a
/// shortest path, moving whichever operand gives the lower-labelled swaps.
/// Runs of single-qubit gates are fused and re-emitted as
/// `R_z·√X·R_z·√X·R_z`, a bare `R_z` when diagonal, or nothing when trivial.
/// The output register holds only the touched physical qubits, in ascending
/// label order.
pub fn transpile_with_layout(
    ir: &CircuitIR,
    coupling: &CouplingMap,
    layout: &[usize],
) -> Result<NativeCircuit> {
    ir.validate()?;
    if layout.len() != ir.n_qubits {
        return Err(Error::Circuit(format!(
            "layout has {} entries for {} qubits",
            layout.len(),
            ir.n_qubits
        )));
    }
    let distinct: BTreeSet<usize> = layout.iter().copied().collect();
    if distinct.len() != layout.len() {
        return Err(Error::Circuit("layout maps two qubits to one".into()));
    }

    let mut layout = layout.to_vec();
    let mut staged = Vec::new();
    let mut swap_count = 0;
    let mut decomps: Vec<(f64, TwoCnotDecomposition)> = Vec::new();
    for op in &ir.ops {
        match *op {
            IrOp::StatePrepY { theta, qubit } => {
                staged.push(Staged::One(layout[qubit], gates::ry(theta)))
            }
            IrOp::Phase { phi, qubit } => staged.push(Staged::One(layout[qubit], gates::phase(phi))),
            IrOp::Barrier { layer } => staged.push(Staged::Barrier(layer)),
            IrOp::UEps {
                epsilon,
                kept,
                measured,
            } => {
                for (a, b) in route(coupling, layout[kept], layout[measured])? {
                    staged.push(Staged::Swap(a, b));
                    staged.push(Staged::Cx(a, b));
                    staged.push(Staged::Cx(b, a));
                    staged.push(Staged::Cx(a, b));
                    for p in layout.iter_mut() {
                        if *p == a {
                            *p = b;
                        } else if *p == b {
                            *p = a;
                        }
                    }
                    swap_count += 1;
                }
                if !decomps.iter().any(|(e, _)| *e == epsilon) {
                    decomps.push((epsilon, decompose_u_eps(epsilon)?));
                }
                let dec = &decomps.iter().find(|(e, _)| *e == epsilon).unwrap().1;
                let wires = [layout[kept], layout[measured]];
                for step in dec.sequence() {
                    staged.push(match step {
                        LocalOp::Single { wire, matrix } => Staged::One(wires[wire], matrix),
                        LocalOp::Cnot => Staged::Cx(wires[0], wires[1]),
                    });
                }
            }
        }
    }

    let touched: BTreeSet<usize> = staged
        .iter()
        .flat_map(|s| match *s {
            Staged::One(q, _) => vec![q],
            Staged::Cx(a, b) | Staged::Swap(a, b) => vec![a, b],
            Staged::Barrier(_) => vec![],
        })
        .chain(layout.iter().copied())
        .collect();
    let physical: Vec<usize> = touched.into_iter().collect();
    let wire = |p: usize| physical.binary_search(&p).expect("touched qubit");

    let mut gates_out = Vec::new();
    let mut pending: BTreeMap<usize, ComplexMatrix> = BTreeMap::new();
    let flush = |q: usize, pending: &mut BTreeMap<usize, ComplexMatrix>, out: &mut Vec<NativeGate>| {
        if let Some(m) = pending.remove(&q) {
            lower_single(&m, wire(q), out)
        } else {
            Ok(())
        }
    };
    for s in staged {
        match s {
            Staged::One(q, m) => {
                let acc = match pending.remove(&q) {
                    Some(prev) => &m * &prev,
                    None => m,
                };
                pending.insert(q, acc);
            }
            Staged::Cx(a, b) => {
                flush(a, &mut pending, &mut gates_out)?;
                flush(b, &mut pending, &mut gates_out)?;
                gates_out.push(NativeGate::Cr {
                    control: wire(a),
                    target: wire(b),
                });
            }
            Staged::Swap(a, b) => gates_out.push(NativeGate::Swap {
                a: wire(a),
                b: wire(b),
            }),
            Staged::Barrier(layer) => gates_out.push(NativeGate::Barrier { layer }),
        }
    }
    let rest: Vec<usize> = pending.keys().copied().collect();
    for q in rest {
        flush(q, &mut pending, &mut gates_out)?;
    }

    let circuit = NativeCircuit {
        n_qubits: physical.len(),
        n_iterations: ir.n_iterations,
        gates: gates_out,
        kept_qubit: wire(layout[ir.kept_qubit]),
        postselect_qubits: ir.postselect_qubits.iter().map(|&q| wire(layout[q])).collect(),
        physical,
        coupling: coupling.clone(),
        swap_count,
    };
    circuit.validate()?;
    Ok(circuit)
}

/// Swaps (in order) that make `a` and `b` adjacent.
fn route(coupling: &CouplingMap, a: usize, b: usize) -> Result<Vec<(usize, usize)>> {
    if coupling.contains(a, b) {
        return Ok(Vec::new());
    }
    let path = coupling
        .shortest_path(a, b)
        .ok_or(Error::Disconnected(a, b))?;
    let l = path.len() - 1;
    let forward: Vec<(usize, usize)> = (0..l - 1).map(|k| (path[k], path[k + 1])).collect();
    let backward: Vec<(usize, usize)> = (2..=l).rev().map(|k| (path[k], path[k - 1])).collect();
    let key = |v: &[(usize, usize)]| -> Vec<(usize, usize)> {
        v.iter().map(|&(x, y)| (x.min(y), x.max(y))).collect()
    };
    Ok(if key(&backward) < key(&forward) {
        backward
    } else {
        forward
    })
}

const TRIVIAL_TOL: f64 = 1e-12;

fn lower_single(m: &ComplexMatrix, q: usize, out: &mut Vec<NativeGate>) -> Result<()> {
    if euler::is_diagonal(m, TRIVIAL_TOL) {
        let angle = euler::diagonal_rz_angle(m);
        if angle.abs() > TRIVIAL_TOL {
            out.push(NativeGate::Rz { angle, qubit: q });
        }
        return Ok(());
    }
    let e = su2_to_native(m)?;
    out.extend([
        NativeGate::Rz { angle: e.w, qubit: q },
        NativeGate::SqrtX { qubit: q },
        NativeGate::Rz { angle: e.y, qubit: q },
        NativeGate::SqrtX { qubit: q },
        NativeGate::Rz { angle: e.x, qubit: q },
    ]);
    Ok(())
}
