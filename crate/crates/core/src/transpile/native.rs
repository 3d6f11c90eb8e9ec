//! Native gate set and the transpiled circuit container.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::CouplingMap;
use crate::error::{Error, Result};

/// Native operation on compacted wires `0..n_qubits`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum NativeGate {
    SqrtX { qubit: usize },
    Rz { angle: f64, qubit: usize },
    /// CNOT compiled from a CR pulse; the engine applies `cnot_from_cr(Λ)`.
    Cr { control: usize, target: usize },
    /// Marks the start of a three-CNOT swap.
    Swap { a: usize, b: usize },
    /// End of iteration layer.
    Barrier { layer: u32 },
}

impl NativeGate {
    pub fn kind(&self) -> &'static str {
        match self {
            NativeGate::SqrtX { .. } => "SQRT_X",
            NativeGate::Rz { .. } => "RZ",
            NativeGate::Cr { .. } => "CR",
            NativeGate::Swap { .. } => "SWAP",
            NativeGate::Barrier { .. } => "BARRIER",
        }
    }

    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            NativeGate::SqrtX { qubit } | NativeGate::Rz { qubit, .. } => vec![qubit],
            NativeGate::Cr { control, target } => vec![control, target],
            NativeGate::Swap { a, b } => vec![a, b],
            NativeGate::Barrier { .. } => Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NativeCircuit {
    pub n_qubits: usize,
    pub n_iterations: u32,
    pub gates: Vec<NativeGate>,
    /// Physical label of every wire.
    pub physical: Vec<usize>,
    pub coupling: CouplingMap,
    pub kept_qubit: usize,
    pub postselect_qubits: Vec<usize>,
    pub swap_count: usize,
}

impl NativeCircuit {
    pub fn cnot_count(&self) -> usize {
        self.gates
            .iter()
            .filter(|g| matches!(g, NativeGate::Cr { .. }))
            .count()
    }

    /// CR gates as ordered physical `(control, target)` pairs, in gate order.
    pub fn cr_pairs(&self) -> Vec<(usize, usize)> {
        self.gates
            .iter()
            .filter_map(|g| match *g {
                NativeGate::Cr { control, target } => {
                    Some((self.physical[control], self.physical[target]))
                }
                _ => None,
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.physical.len() != self.n_qubits {
            return Err(Error::Circuit("wire labels do not match qubit count".into()));
        }
        let in_range = |q: usize| q < self.n_qubits;
        if !in_range(self.kept_qubit) || !self.postselect_qubits.iter().all(|&q| in_range(q)) {
            return Err(Error::Circuit("measurement wire out of range".into()));
        }
        for g in &self.gates {
            let qs = g.qubits();
            if !qs.iter().all(|&q| in_range(q)) {
                return Err(Error::Circuit(format!("{} acts outside the register", g.kind())));
            }
            if qs.len() == 2 {
                let (a, b) = (self.physical[qs[0]], self.physical[qs[1]]);
                if qs[0] == qs[1] || !self.coupling.contains(a, b) {
                    return Err(Error::Circuit(format!("{} on uncoupled pair {a},{b}", g.kind())));
                }
            }
        }
        Ok(())
    }

    /// Line format: `KIND angle q[,q2]` with physical qubit labels and `-` for
    /// an absent field, after a header of `#` lines.
    pub fn to_text(&self) -> String {
        let join = |qs: &[usize]| {
            qs.iter()
                .map(|q| q.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let phys = |qs: Vec<usize>| join(&qs.iter().map(|&q| self.physical[q]).collect::<Vec<_>>());
        let mut s = String::new();
        writeln!(s, "# native-circuit 1").unwrap();
        writeln!(s, "# wires {}", join(&self.physical)).unwrap();
        writeln!(s, "# iterations {}", self.n_iterations).unwrap();
        writeln!(s, "# kept {}", self.physical[self.kept_qubit]).unwrap();
        writeln!(s, "# postselect {}", phys(self.postselect_qubits.clone())).unwrap();
        writeln!(s, "# coupling {}", self.coupling).unwrap();
        writeln!(s, "# swaps {}", self.swap_count).unwrap();
        for g in &self.gates {
            let angle = match g {
                NativeGate::Rz { angle, .. } => format!("{angle}"),
                _ => "-".into(),
            };
            let qs = g.qubits();
            let target = if qs.is_empty() { "-".to_string() } else { phys(qs) };
            writeln!(s, "{} {} {}", g.kind(), angle, target).unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::Circuit(msg);
        let list = |v: &str| -> Result<Vec<usize>> {
            if v.is_empty() {
                return Ok(Vec::new());
            }
            v.split(',')
                .map(|x| x.trim().parse().map_err(|_| bad(format!("bad qubit list '{v}'"))))
                .collect()
        };
        let mut header = std::collections::HashMap::new();
        let mut body = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
                header.insert(k.to_string(), v.trim().to_string());
            } else {
                body.push((no + 1, line));
            }
        }
        let get = |k: &str| {
            header
                .get(k)
                .cloned()
                .ok_or_else(|| bad(format!("missing header '{k}'")))
        };
        let physical = list(&get("wires")?)?;
        let wire_of = |p: usize| {
            physical
                .iter()
                .position(|&x| x == p)
                .ok_or_else(|| bad(format!("qubit {p} is not a wire")))
        };
        let wires = |v: &str| -> Result<Vec<usize>> { list(v)?.into_iter().map(wire_of).collect() };
        let n_iterations = get("iterations")?
            .parse()
            .map_err(|_| bad("bad iteration count".into()))?;
        let kept_qubit = wire_of(get("kept")?.parse().map_err(|_| bad("bad kept qubit".into()))?)?;
        let postselect_qubits = wires(&get("postselect")?)?;
        let coupling: CouplingMap = get("coupling")?.parse()?;
        let swap_count = get("swaps")?.parse().map_err(|_| bad("bad swap count".into()))?;

        let mut gates = Vec::with_capacity(body.len());
        let mut layer = 0;
        for (no, line) in body {
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [kind, angle, target] = fields[..] else {
                return Err(bad(format!("line {no}: expected 3 fields")));
            };
            let qs = if target == "-" { Vec::new() } else { wires(target)? };
            let arity = |n: usize| {
                if qs.len() == n {
                    Ok(())
                } else {
                    Err(bad(format!("line {no}: {kind} takes {n} qubits")))
                }
            };
            let g = match kind {
                "SQRT_X" => {
                    arity(1)?;
                    NativeGate::SqrtX { qubit: qs[0] }
                }
                "RZ" => {
                    arity(1)?;
                    let angle: f64 = angle
                        .parse()
                        .map_err(|_| bad(format!("line {no}: bad angle '{angle}'")))?;
                    if !angle.is_finite() {
                        return Err(bad(format!("line {no}: non-finite angle")));
                    }
                    NativeGate::Rz { angle, qubit: qs[0] }
                }
                "CR" => {
                    arity(2)?;
                    NativeGate::Cr { control: qs[0], target: qs[1] }
                }
                "SWAP" => {
                    arity(2)?;
                    NativeGate::Swap { a: qs[0], b: qs[1] }
                }
                "BARRIER" => {
                    arity(0)?;
                    layer += 1;
                    NativeGate::Barrier { layer }
                }
                other => return Err(bad(format!("line {no}: unknown gate '{other}'"))),
            };
            gates.push(g);
        }
        let circuit = NativeCircuit {
            n_qubits: physical.len(),
            n_iterations,
            gates,
            physical,
            coupling,
            kept_qubit,
            postselect_qubits,
            swap_count,
        };
        circuit.validate()?;
        Ok(circuit)
    }
}
