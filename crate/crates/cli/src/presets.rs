//! Demonstration noise presets. The numbers are published fits to retired
//! devices, not calibrations of anything real.

use std::collections::BTreeMap;

use anyhow::{bail, Result};
use statematch::analysis::{AngleParam, CoherentModel};
use statematch::noise::NoiseSpec;
use statematch::CouplingMap;

use crate::config::Settings;

/// Angles are `(value, tolerance)` in fit-parameter order: `√X` angles by
/// qubit label, then CR angles by first use.
#[derive(Clone, Copy, Debug)]
pub struct Preset {
    pub name: &'static str,
    pub n_iterations: u32,
    pub angles: &'static [(f64, f64)],
    /// Total depolarizing probability, applied after the last layer.
    pub dep: f64,
    pub gamma: f64,
}

const fn p1(name: &'static str, angles: &'static [(f64, f64)], dep: f64, gamma: f64) -> Preset {
    Preset {
        name,
        n_iterations: 1,
        angles,
        dep,
        gamma,
    }
}

const fn p2(name: &'static str, angles: &'static [(f64, f64)], dep: f64) -> Preset {
    Preset {
        name,
        n_iterations: 2,
        angles,
        dep,
        gamma: 0.0,
    }
}

pub const PRESETS: &[Preset] = &[
    p1("nairobi-n1", &[(2.83e-2, 5.26e-2), (4.45e-2, 4.45e-2), (-1.78e-2, 7.25e-2)], 0.0, 1.21e-2),
    p1("lima-n1", &[(3.63e-2, 7.55e-2), (4.83e-2, 5.73e-2), (-2.63e-2, 6.68e-2)], 1.99e-2, 0.0),
    p1("manila-n1", &[(-0.55e-2, 4.38e-2), (0.29e-2, 3.88e-2), (0.06e-2, 6.43e-2)], 2.30e-2, 0.0),
    p1("quito-n1", &[(-4.30e-2, 4.30e-2), (1.22e-2, 5.48e-2), (1.26e-2, 8.13e-2)], 2.64e-2, 0.0),
    p1("oslo-n1", &[(3.44e-2, 3.44e-2), (0.61e-2, 7.85e-2), (-2.31e-2, 7.63e-2)], 6.46e-2, 0.0),
    p2(
        "nairobi-n2",
        &[
            (2.74e-2, 4.04e-2),
            (-2.98e-2, 4.33e-2),
            (5.04e-2, 5.04e-2),
            (4.05e-2, 4.05e-2),
            (0.73e-2, 7.22e-2),
            (3.78e-2, 9.62e-2),
            (-0.85e-2, 7.28e-2),
            (7.28e-2, 7.28e-2),
        ],
        6.42e-2,
    ),
    p2(
        "lima-n2",
        &[
            (3.58e-2, 3.58e-2),
            (2.11e-2, 3.25e-2),
            (3.99e-2, 3.99e-2),
            (-1.86e-2, 6.29e-2),
            (-4.42e-2, 5.05e-2),
            (3.13e-2, 9.53e-2),
            (8.44e-2, 8.44e-2),
            (3.33e-2, 8.44e-2),
        ],
        10.48e-2,
    ),
    p2(
        "bogota-n2",
        &[
            (4.47e-2, 4.47e-2),
            (0.83e-2, 4.05e-2),
            (3.24e-2, 3.24e-2),
            (5.27e-2, 6.56e-2),
            (-7.71e-2, 7.71e-2),
            (2.00e-2, 6.84e-2),
            (1.27e-2, 6.29e-2),
            (1.15e-2, 6.29e-2),
        ],
        12.77e-2,
    ),
    p2(
        "manila-n2",
        &[
            (4.38e-2, 4.38e-2),
            (2.34e-2, 3.88e-2),
            (-5.05e-2, 5.05e-2),
            (3.56e-2, 3.56e-2),
            (-4.50e-2, 6.43e-2),
            (8.32e-2, 30.18e-2),
            (-0.97e-2, 30.18e-2),
            (4.89e-2, 8.00e-2),
        ],
        14.60e-2,
    ),
    p2(
        "quito-n2",
        &[
            (-4.47e-2, 4.47e-2),
            (2.75e-2, 4.68e-2),
            (5.00e-2, 5.00e-2),
            (5.23e-2, 5.23e-2),
            (6.29e-2, 6.40e-2),
            (-2.08e-2, 9.87e-2),
            (-0.17e-2, 9.87e-2),
            (-7.54e-2, 7.71e-2),
        ],
        15.10e-2,
    ),
    p2(
        "santiago-n2",
        &[
            (7.71e-2, 7.71e-2),
            (-3.18e-2, 3.18e-2),
            (-3.52e-2, 3.52e-2),
            (4.58e-2, 4.58e-2),
            (-1.50e-2, 10.71e-2),
            (9.27e-2, 13.47e-2),
            (6.14e-2, 13.47e-2),
            (4.79e-2, 11.04e-2),
        ],
        16.90e-2,
    ),
    p2(
        "oslo-n2",
        &[
            (0.89e-2, 4.34e-2),
            (4.59e-2, 4.59e-2),
            (3.38e-2, 5.93e-2),
            (4.92e-2, 4.92e-2),
            (-5.90e-2, 7.47e-2),
            (-1.47e-2, 6.17e-2),
            (6.17e-2, 6.17e-2),
            (4.79e-2, 7.44e-2),
        ],
        23.21e-2,
    ),
];

impl Preset {
    pub fn lookup(name: &str) -> Result<&'static Preset> {
        match PRESETS.iter().find(|p| p.name == name) {
            Some(p) => Ok(p),
            None => {
                let names: Vec<_> = PRESETS.iter().map(|p| p.name).collect();
                bail!("unknown preset '{name}' (known: {})", names.join(", "))
            }
        }
    }

    /// Fit parameters of the configured circuit, paired with this preset's
    /// `(value, tolerance)` entries.
    fn bind(&self, s: &Settings) -> Result<Vec<(AngleParam, (f64, f64))>> {
        if s.n_iterations != self.n_iterations {
            bail!(
                "preset '{}' is for n = {}, config has n = {}",
                self.name,
                self.n_iterations,
                s.n_iterations
            );
        }
        let n = s.n_qubits();
        let coupling = s.coupling.clone().unwrap_or_else(|| CouplingMap::linear(n));
        let layout = s.layout.clone().unwrap_or_else(|| (0..n).collect());
        let model =
            CoherentModel::for_grid(s.epsilon, s.theta0, s.n_iterations, &[0.0], &coupling, &layout)?;
        if model.params().len() != self.angles.len() {
            bail!(
                "preset '{}' has {} angles but the circuit needs {}",
                self.name,
                self.angles.len(),
                model.params().len()
            );
        }
        Ok(model.params().iter().copied().zip(self.angles.iter().copied()).collect())
    }

    pub fn apply(&self, s: &Settings, spec: &mut NoiseSpec) -> Result<()> {
        for (param, (value, _)) in self.bind(s)? {
            match param {
                AngleParam::Alpha(q) => {
                    spec.alphas.insert(q, value);
                }
                AngleParam::Lambda(c, t) => {
                    spec.lambdas.insert((c, t), value);
                }
            }
        }
        if self.dep != 0.0 {
            let mut dep = vec![0.0; self.n_iterations as usize];
            dep[self.n_iterations as usize - 1] = self.dep;
            spec.per_step_dep = dep;
        }
        spec.gamma = self.gamma;
        Ok(())
    }

    pub fn tolerances(&self, s: &Settings) -> Result<BTreeMap<AngleParam, f64>> {
        Ok(self.bind(s)?.into_iter().map(|(p, (_, tol))| (p, tol)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_binds_to_its_circuit() {
        for p in PRESETS {
            let s = Settings {
                n_iterations: p.n_iterations,
                ..Settings::default()
            };
            let mut spec = NoiseSpec::ideal();
            p.apply(&s, &mut spec).unwrap();
            spec.validate().unwrap();
            assert_eq!(spec.alphas.len() + spec.lambdas.len(), p.angles.len(), "{}", p.name);
            let tol = p.tolerances(&s).unwrap();
            assert!(tol.values().all(|&t| t > 0.0 && t < std::f64::consts::FRAC_PI_2));
        }
    }

    #[test]
    fn mismatched_iterations_rejected() {
        let s = Settings::default();
        assert!(Preset::lookup("lima-n2").unwrap().apply(&s, &mut NoiseSpec::ideal()).is_err());
        assert!(Preset::lookup("nowhere-n1").is_err());
    }
}
