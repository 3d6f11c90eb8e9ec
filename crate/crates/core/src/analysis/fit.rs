//! Coherent-error forward model and the shift/coherent fitting pipeline.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lm::{minimize, parameter_sigma, LmOptions, LmResult};
use super::{aggregate, pick_model, sigma_stat, solve_shift, ShiftChoice, ShiftFit, ShiftModel};
use crate::engine::{run_statevector_coherent, success_from_unitary_column, ExperimentRecord};
use crate::error::{Error, Result};
use crate::noise::NoiseSpec;
use crate::protocol::{build_circuit, ProtocolConfig};
use crate::transpile::{transpile_with_layout, CouplingMap, NativeCircuit, NativeGate};

/// A fitted misrotation, keyed by physical qubit labels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum AngleParam {
    /// `√X` misrotation on a qubit.
    Alpha(usize),
    /// CR misrotation on an ordered `(control, target)` pair.
    Lambda(usize, usize),
}

impl fmt::Display for AngleParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AngleParam::Alpha(q) => write!(f, "alpha.{q}"),
            AngleParam::Lambda(c, t) => write!(f, "lambda.{c}-{t}"),
        }
    }
}

impl FromStr for AngleParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Noise(format!("bad angle name '{s}'"));
        if let Some(q) = s.strip_prefix("alpha.") {
            return q.parse().map(AngleParam::Alpha).map_err(|_| bad());
        }
        let pair = s.strip_prefix("lambda.").ok_or_else(bad)?;
        let (c, t) = pair.split_once('-').ok_or_else(bad)?;
        Ok(AngleParam::Lambda(
            c.parse().map_err(|_| bad())?,
            t.parse().map_err(|_| bad())?,
        ))
    }
}

impl From<AngleParam> for String {
    fn from(p: AngleParam) -> String {
        p.to_string()
    }
}

impl TryFrom<String> for AngleParam {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Success probability over a `φ₀` grid as a function of misrotation angles.
#[derive(Clone, Debug)]
pub struct CoherentModel {
    circuits: Vec<NativeCircuit>,
    params: Vec<AngleParam>,
}

impl CoherentModel {
    /// Parameters are the `√X` qubits in label order, then CR pairs in order
    /// of first use.
    pub fn new(circuits: Vec<NativeCircuit>) -> Result<Self> {
        if circuits.is_empty() {
            return Err(Error::Records("empty phi0 grid".into()));
        }
        let mut alphas = std::collections::BTreeSet::new();
        let mut pairs = Vec::new();
        for c in &circuits {
            for g in &c.gates {
                match *g {
                    NativeGate::SqrtX { qubit } => {
                        alphas.insert(c.physical[qubit]);
                    }
                    NativeGate::Cr { control, target } => {
                        let pair = (c.physical[control], c.physical[target]);
                        if !pairs.contains(&pair) {
                            pairs.push(pair);
                        }
                    }
                    _ => {}
                }
            }
        }
        let params = alphas
            .into_iter()
            .map(AngleParam::Alpha)
            .chain(pairs.into_iter().map(|(c, t)| AngleParam::Lambda(c, t)))
            .collect();
        Ok(CoherentModel { circuits, params })
    }

    /// Transpiles the protocol at every grid point.
    pub fn for_grid(
        epsilon: f64,
        theta0: f64,
        n_iterations: u32,
        phi0: &[f64],
        coupling: &CouplingMap,
        layout: &[usize],
    ) -> Result<Self> {
        let circuits = phi0
            .par_iter()
            .map(|&phi| {
                let ir = build_circuit(&ProtocolConfig::new(epsilon, theta0, phi, n_iterations)?)?;
                transpile_with_layout(&ir, coupling, layout)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(circuits)
    }

    pub fn params(&self) -> &[AngleParam] {
        &self.params
    }

    pub fn circuits(&self) -> &[NativeCircuit] {
        &self.circuits
    }

    pub fn noise(&self, x: &[f64]) -> NoiseSpec {
        let mut spec = NoiseSpec::ideal();
        for (p, &v) in self.params.iter().zip(x) {
            match *p {
                AngleParam::Alpha(q) => {
                    spec.alphas.insert(q, v);
                }
                AngleParam::Lambda(c, t) => {
                    spec.lambdas.insert((c, t), v);
                }
            }
        }
        spec
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.params.len() {
            return Err(Error::Dimension(format!(
                "{} angles for {} parameters",
                x.len(),
                self.params.len()
            )));
        }
        let noise = self.noise(x);
        self.circuits
            .iter()
            .map(|c| {
                let amps = run_statevector_coherent(c, &noise)?;
                Ok(success_from_unitary_column(&amps, c.kept_qubit, &c.postselect_qubits))
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoherentFit {
    pub values: Vec<f64>,
    pub sigma: Vec<f64>,
    pub bound_active: Vec<bool>,
    pub residual_rms: f64,
    pub curve: Vec<f64>,
    pub starts: usize,
}

const LATTICE: [f64; 5] = [0.0, -0.5, 0.5, -0.9, 0.9];
const MAX_STARTS: usize = 200;

/// Lattice of start points: 5 fractions of each bound per dimension, thinned
/// to at most 200 by even striding over the lattice index.
pub(crate) fn start_lattice(bounds: &[f64]) -> Vec<Vec<f64>> {
    let d = bounds.len();
    let total = 5u128.pow(d as u32);
    let picks: Vec<u128> = if total <= MAX_STARTS as u128 {
        (0..total).collect()
    } else {
        (0..MAX_STARTS as u128)
            .map(|k| k * total / MAX_STARTS as u128)
            .collect()
    };
    picks
        .into_iter()
        .map(|mut idx| {
            (0..d)
                .map(|k| {
                    let digit = (idx % 5) as usize;
                    idx /= 5;
                    LATTICE[digit] * bounds[k]
                })
                .collect()
        })
        .collect()
}

fn check_bounds(bounds: &[f64]) -> Result<()> {
    for &b in bounds {
        if !(b > 0.0 && b < FRAC_PI_2) {
            return Err(Error::Domain {
                name: "angle bound",
                value: b,
                range: "(0, π/2)",
            });
        }
    }
    Ok(())
}

/// Box-constrained least squares of the coherent model against `targets`
/// over the deterministic start lattice.
pub fn fit_coherent(
    targets: &[f64],
    model: &CoherentModel,
    bounds: &[f64],
    opts: &LmOptions,
) -> Result<CoherentFit> {
    fit_from_starts(targets, model, bounds, start_lattice(bounds), opts)
}

fn fit_from_starts(
    targets: &[f64],
    model: &CoherentModel,
    bounds: &[f64],
    starts: Vec<Vec<f64>>,
    opts: &LmOptions,
) -> Result<CoherentFit> {
    if bounds.len() != model.params().len() {
        return Err(Error::Dimension(format!(
            "{} bounds for {} parameters",
            bounds.len(),
            model.params().len()
        )));
    }
    if targets.len() != model.circuits().len() {
        return Err(Error::Dimension(format!(
            "{} targets for {} grid points",
            targets.len(),
            model.circuits().len()
        )));
    }
    check_bounds(bounds)?;
    let lo: Vec<f64> = bounds.iter().map(|b| -b).collect();
    let f = |x: &[f64]| model.evaluate(x);
    let runs: Vec<LmResult> = starts
        .par_iter()
        .map(|x0| minimize(&f, targets, x0, &lo, bounds, opts))
        .collect::<Result<_>>()?;
    let n_starts = runs.len();
    let best = runs
        .iter()
        .filter(|r| r.converged)
        .min_by(|a, b| a.cost.total_cmp(&b.cost));
    let Some(best) = best else {
        let any = runs
            .iter()
            .min_by(|a, b| a.cost.total_cmp(&b.cost))
            .expect("at least one start");
        return Err(Error::NotConverged {
            best_params: any.x.clone(),
            best_rms: (2.0 * any.cost / targets.len() as f64).sqrt(),
        });
    };
    let curve = model.evaluate(&best.x)?;
    Ok(CoherentFit {
        sigma: parameter_sigma(&best.jacobian, &best.residuals),
        bound_active: best
            .x
            .iter()
            .zip(bounds)
            .map(|(x, b)| x.abs() >= b * (1.0 - 1e-9))
            .collect(),
        residual_rms: (2.0 * best.cost / targets.len() as f64).sqrt(),
        values: best.x.clone(),
        curve,
        starts: n_starts,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitConfig {
    pub shift: ShiftChoice,
    /// Bound for angles absent from `bounds`.
    pub default_bound: f64,
    pub bounds: BTreeMap<AngleParam, f64>,
    /// Defaults to a chain over the `2^n` qubits.
    pub coupling: Option<CouplingMap>,
    /// Defaults to the identity layout.
    pub layout: Option<Vec<usize>>,
    /// Passes re-estimating the shift against the fitted coherent curve.
    pub max_refinements: usize,
    pub lm: LmOptions,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            shift: ShiftChoice::Auto,
            default_bound: 0.1,
            bounds: BTreeMap::new(),
            coupling: None,
            layout: None,
            max_refinements: 5,
            lm: LmOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedAngle {
    pub param: AngleParam,
    pub value: f64,
    pub tolerance: f64,
    pub sigma: f64,
    pub bound_active: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub shift_model: ShiftModel,
    pub shift_param: f64,
    pub shift_sigma: f64,
    pub angles: Vec<FittedAngle>,
    pub residual_rms: f64,
    pub sigma_stat: f64,
    pub refinements: usize,
    pub starts: usize,
    pub phi0: Vec<f64>,
    pub estimates: Vec<f64>,
    /// Coherent curve with the shift applied.
    pub fitted_curve: Vec<f64>,
}

impl FitResult {
    pub fn angle(&self, param: AngleParam) -> Option<&FittedAngle> {
        self.angles.iter().find(|a| a.param == param)
    }
}

/// Shift fit, data shift, coherent fit and shift back. The shift parameter
/// is then re-estimated against the mean of the fitted coherent curve
/// (instead of the ideal probability) and steps two and three repeated until
/// it settles.
pub fn fit_pipeline(records: &[ExperimentRecord], cfg: &FitConfig) -> Result<FitResult> {
    let agg = aggregate(records)?;
    let n = agg.n_iterations;
    let ps_ideal = agg.ps_ideal()?;
    let phi0 = agg.phi0();
    let estimates = agg.estimates();
    let n_qubits = 1usize << n;
    let coupling = cfg
        .coupling
        .clone()
        .unwrap_or_else(|| CouplingMap::linear(n_qubits));
    let layout = cfg
        .layout
        .clone()
        .unwrap_or_else(|| (0..n_qubits).collect());
    let model = CoherentModel::for_grid(agg.epsilon, agg.theta0, n, &phi0, &coupling, &layout)?;
    let bounds: Vec<f64> = model
        .params()
        .iter()
        .map(|p| cfg.bounds.get(p).copied().unwrap_or(cfg.default_bound))
        .collect();
    check_bounds(&bounds)?;

    let sigma = sigma_stat(ps_ideal, agg.shots_per_point);
    let sigma_mean = sigma / (estimates.len() as f64).sqrt();
    let model_kind = pick_model(cfg.shift, agg.mean, ps_ideal, sigma_mean);
    let fixed = match model_kind {
        ShiftModel::Depolarizing => ShiftChoice::Dep,
        ShiftModel::AmplitudeDamping => ShiftChoice::Ad,
    };
    // the first estimate only seeds refinement, so it may be clamped
    let lenient = |baseline: f64, prev: Option<ShiftFit>| -> Result<ShiftFit> {
        match solve_shift(agg.mean, baseline, sigma_mean, fixed, n) {
            Err(Error::ShiftOutOfRange { value, .. }) if value.is_finite() && cfg.max_refinements > 0 => {
                Ok(ShiftFit {
                    model: model_kind,
                    param: value.clamp(0.0, 1.0 - 1e-12),
                    sigma: prev.map_or(0.0, |p| p.sigma),
                })
            }
            other => other,
        }
    };
    let mut shift = lenient(ps_ideal, None)?;
    let mut starts = start_lattice(&bounds);
    let mut n_starts = 0;
    let mut refinements = 0;
    let coherent = loop {
        let shifted: Vec<f64> = estimates
            .iter()
            .map(|&y| model_kind.invert(y, shift.param, n))
            .collect();
        let fit = fit_from_starts(&shifted, &model, &bounds, starts, &cfg.lm)?;
        n_starts += fit.starts;
        if refinements >= cfg.max_refinements {
            break fit;
        }
        let baseline = fit.curve.iter().sum::<f64>() / fit.curve.len() as f64;
        let next = lenient(baseline, Some(shift))?;
        refinements += 1;
        let settled = (next.param - shift.param).abs() < 1e-10;
        shift = next;
        if settled {
            break fit;
        }
        starts = vec![fit.values.clone()];
    };

    let fitted_curve: Vec<f64> = coherent
        .curve
        .iter()
        .map(|&x| model_kind.apply(x, shift.param, n))
        .collect();
    let residual_rms = (fitted_curve
        .iter()
        .zip(&estimates)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / estimates.len() as f64)
        .sqrt();
    let angles = model
        .params()
        .iter()
        .enumerate()
        .map(|(k, &param)| FittedAngle {
            param,
            value: coherent.values[k],
            tolerance: bounds[k],
            sigma: coherent.sigma[k],
            bound_active: coherent.bound_active[k],
        })
        .collect();
    Ok(FitResult {
        shift_model: model_kind,
        shift_param: shift.param,
        shift_sigma: shift.sigma,
        angles,
        residual_rms,
        sigma_stat: sigma,
        refinements,
        starts: n_starts,
        phi0,
        estimates,
        fitted_curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::phi0_grid;
    use crate::protocol::success_probability;

    fn model(n: u32, points: usize) -> CoherentModel {
        CoherentModel::for_grid(
            0.973,
            std::f64::consts::PI / 8.0,
            n,
            &phi0_grid(points),
            &CouplingMap::linear(1 << n),
            &(0..1 << n).collect::<Vec<_>>(),
        )
        .unwrap()
    }

    #[test]
    fn parameter_counts() {
        assert_eq!(
            model(1, 4).params(),
            &[AngleParam::Alpha(0), AngleParam::Alpha(1), AngleParam::Lambda(0, 1)]
        );
        let m2 = model(2, 3);
        let alphas = m2.params().iter().filter(|p| matches!(p, AngleParam::Alpha(_))).count();
        assert_eq!((alphas, m2.params().len()), (4, 8));
    }

    #[test]
    fn zero_angles_reduce_to_ideal() {
        for n in [1, 2] {
            let m = model(n, 5);
            let ideal = success_probability(0.973, std::f64::consts::PI / 8.0, n).unwrap();
            for p in m.evaluate(&vec![0.0; m.params().len()]).unwrap() {
                assert!((p - ideal).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn names_round_trip() {
        for p in [AngleParam::Alpha(3), AngleParam::Lambda(1, 0)] {
            assert_eq!(p.to_string().parse::<AngleParam>().unwrap(), p);
        }
        assert!("beta.1".parse::<AngleParam>().is_err());
        assert!("lambda.1".parse::<AngleParam>().is_err());
    }

    #[test]
    fn lattice_size() {
        assert_eq!(start_lattice(&[0.1; 3]).len(), 125);
        let big = start_lattice(&[0.1; 8]);
        assert_eq!(big.len(), 200);
        assert_eq!(big[0], vec![0.0; 8]);
    }

    #[test]
    fn noiseless_curve_fits_back() {
        let m = model(1, 12);
        let truth = [0.02, -0.03, 0.01];
        let y = m.evaluate(&truth).unwrap();
        let fit = fit_coherent(&y, &m, &[0.05; 3], &LmOptions::default()).unwrap();
        assert!(fit.residual_rms < 1e-9, "{fit:?}");
    }
}
