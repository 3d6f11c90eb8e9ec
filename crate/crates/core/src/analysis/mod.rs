//! Benchmark metrics, fidelity-derived tolerance bounds and error-model fits.

mod fit;
pub mod lm;

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::engine::ExperimentRecord;
use crate::error::{Error, Result};
use crate::gates;
use crate::protocol::success_probability;
use crate::qmath::ComplexMatrix;
use crate::transpile::{cr_gate, CR_NOMINAL};

pub use fit::{
    fit_coherent, fit_pipeline, AngleParam, CoherentFit, CoherentModel, FitConfig, FitResult,
    FittedAngle,
};

/// `√(p(1-p)/M)`.
pub fn sigma_stat(p: f64, m: u64) -> f64 {
    (p * (1.0 - p) / m.max(1) as f64).max(0.0).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Phi0Estimate {
    pub phi0: f64,
    pub estimate: f64,
}

/// Records pooled per `φ₀`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub device_label: String,
    pub n_iterations: u32,
    pub epsilon: f64,
    pub theta0: f64,
    pub mean: f64,
    /// Population standard deviation of the per-point estimates.
    pub sigma_exp: f64,
    /// Total shots behind each point.
    pub shots_per_point: u64,
    pub per_phi0: Vec<Phi0Estimate>,
}

impl Aggregate {
    pub fn estimates(&self) -> Vec<f64> {
        self.per_phi0.iter().map(|e| e.estimate).collect()
    }

    pub fn phi0(&self) -> Vec<f64> {
        self.per_phi0.iter().map(|e| e.phi0).collect()
    }

    pub fn ps_ideal(&self) -> Result<f64> {
        success_probability(self.epsilon, self.theta0, self.n_iterations)
    }
}

/// Pools runs per `φ₀` (sorted ascending) and computes the grid mean and
/// population spread.
pub fn aggregate(records: &[ExperimentRecord]) -> Result<Aggregate> {
    let first = records
        .first()
        .ok_or_else(|| Error::Records("no records".into()))?;
    let mut points: Vec<(f64, u64, u64)> = Vec::new();
    for r in records {
        r.validate()?;
        if r.n_iterations != first.n_iterations
            || r.epsilon != first.epsilon
            || r.theta0 != first.theta0
            || r.device_label != first.device_label
        {
            return Err(Error::Records(
                "records mix devices or protocol settings".into(),
            ));
        }
        if !r.phi0.is_finite() {
            return Err(Error::Records("non-finite phi0".into()));
        }
        match points.iter_mut().find(|p| p.0 == r.phi0) {
            Some(p) => {
                p.1 += r.success_count;
                p.2 += r.shots;
            }
            None => points.push((r.phi0, r.success_count, r.shots)),
        }
    }
    let shots = points[0].2;
    if points.iter().any(|p| p.2 != shots) {
        return Err(Error::Records(
            "ragged grid: points have different total shots".into(),
        ));
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let per_phi0: Vec<Phi0Estimate> = points
        .iter()
        .map(|&(phi0, s, m)| Phi0Estimate {
            phi0,
            estimate: s as f64 / m as f64,
        })
        .collect();
    let k = per_phi0.len() as f64;
    let mean = per_phi0.iter().map(|e| e.estimate).sum::<f64>() / k;
    let var = per_phi0
        .iter()
        .map(|e| (e.estimate - mean).powi(2))
        .sum::<f64>()
        / k;
    Ok(Aggregate {
        device_label: first.device_label.clone(),
        n_iterations: first.n_iterations,
        epsilon: first.epsilon,
        theta0: first.theta0,
        mean,
        sigma_exp: var.sqrt(),
        shots_per_point: shots,
        per_phi0,
    })
}

/// `1 - |p̄ - p_s|/p_s`. Negative when the deviation exceeds 100%.
pub fn metric_f(ps_exp_mean: f64, ps_ideal: f64) -> f64 {
    1.0 - (ps_exp_mean - ps_ideal).abs() / ps_ideal
}

pub fn metric_s(sigma_exp: f64, sigma_stat: f64) -> Result<f64> {
    if !(sigma_stat > 0.0) {
        return Err(Error::Domain {
            name: "sigma_stat",
            value: sigma_stat,
            range: "(0, ∞)",
        });
    }
    Ok(sigma_exp / sigma_stat)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub device_label: String,
    pub n_iterations: u32,
    pub ps_ideal: f64,
    pub ps_exp_mean: f64,
    pub ratio: f64,
    pub f: f64,
    pub s: f64,
    pub sigma_stat: f64,
    pub sigma_exp: f64,
    pub shots_per_point: u64,
    /// Set when `f` fell below zero.
    pub f_below_zero: bool,
    pub per_phi0: Vec<Phi0Estimate>,
}

/// Metrics of one device/iteration data set, with `σ_stat` taken at the
/// ideal probability and the pooled shots per point.
pub fn metrics(records: &[ExperimentRecord]) -> Result<MetricReport> {
    let agg = aggregate(records)?;
    if agg.per_phi0.len() < 2 {
        return Err(Error::Records(format!(
            "insufficient grid: {} phi0 point(s), the spread needs at least 2",
            agg.per_phi0.len()
        )));
    }
    let ps_ideal = agg.ps_ideal()?;
    let sigma = sigma_stat(ps_ideal, agg.shots_per_point);
    let f = metric_f(agg.mean, ps_ideal);
    Ok(MetricReport {
        device_label: agg.device_label,
        n_iterations: agg.n_iterations,
        ps_ideal,
        ps_exp_mean: agg.mean,
        ratio: agg.mean / ps_ideal,
        f,
        s: metric_s(agg.sigma_exp, sigma)?,
        sigma_stat: sigma,
        sigma_exp: agg.sigma_exp,
        shots_per_point: agg.shots_per_point,
        f_below_zero: f < 0.0,
        per_phi0: agg.per_phi0,
    })
}

/// `|Tr(U†V)|²/D²`.
pub fn process_fidelity_unitary(u: &ComplexMatrix, v: &ComplexMatrix) -> Result<f64> {
    if !u.is_square() || (u.rows(), u.cols()) != (v.rows(), v.cols()) {
        return Err(Error::Dimension(format!(
            "fidelity of {}x{} against {}x{}",
            u.rows(),
            u.cols(),
            v.rows(),
            v.cols()
        )));
    }
    let d = u.rows() as f64;
    Ok((&u.dagger() * v).trace().norm_sqr() / (d * d))
}

/// `(D·F + 1)/(D + 1)`.
pub fn average_gate_fidelity(f_process: f64, dim: usize) -> f64 {
    let d = dim as f64;
    (d * f_process + 1.0) / (d + 1.0)
}

/// Reported gate errors of a set of qubits or pairs, summarized as
/// `f = F̄_av ± σ_F` with `F_av = 1 - ε_gate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityBundle {
    pub gate_errors: Vec<f64>,
    pub f_mean: f64,
    pub sigma_f: f64,
}

impl FidelityBundle {
    pub fn from_gate_errors(gate_errors: Vec<f64>) -> Result<Self> {
        if gate_errors.is_empty() {
            return Err(Error::Domain {
                name: "gate error count",
                value: 0.0,
                range: "at least one",
            });
        }
        for &e in &gate_errors {
            if !(0.0..=1.0).contains(&e) {
                return Err(Error::Domain {
                    name: "gate error",
                    value: e,
                    range: "[0, 1]",
                });
            }
        }
        let k = gate_errors.len() as f64;
        let f_mean = gate_errors.iter().map(|e| 1.0 - e).sum::<f64>() / k;
        let var = gate_errors
            .iter()
            .map(|e| (1.0 - e - f_mean).powi(2))
            .sum::<f64>()
            / k;
        Ok(FidelityBundle {
            gate_errors,
            f_mean,
            sigma_f: var.sqrt(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateKind {
    SqrtX,
    Cr,
}

/// Average gate fidelity of the misrotated gate against the ideal one.
pub fn misrotation_fidelity(kind: GateKind, angle: f64) -> f64 {
    match kind {
        GateKind::SqrtX => {
            let ideal = gates::rx(PI / 2.0);
            let f = process_fidelity_unitary(&ideal, &gates::rx(PI / 2.0 + angle)).expect("2x2");
            average_gate_fidelity(f, 2)
        }
        GateKind::Cr => {
            let f = process_fidelity_unitary(&cr_gate(CR_NOMINAL), &cr_gate(CR_NOMINAL + angle))
                .expect("4x4");
            average_gate_fidelity(f, 4)
        }
    }
}

/// Smallest positive angle whose average fidelity drops to `f̄ - σ_F`,
/// by bisection on `[0, π/2]`.
pub fn misrotation_bound(bundle: &FidelityBundle, kind: GateKind) -> Result<f64> {
    let target = bundle.f_mean - bundle.sigma_f;
    if !(target > 0.0 && target <= 1.0) {
        return Err(Error::NoToleranceRoot { target });
    }
    let g = |a: f64| misrotation_fidelity(kind, a) - target;
    if g(0.0) <= 0.0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, FRAC_PI_2);
    if g(hi) > 0.0 {
        return Err(Error::NoToleranceRoot { target });
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Incoherent error producing the average shift.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftModel {
    Depolarizing,
    AmplitudeDamping,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftChoice {
    /// Damping when the data lie clearly above the baseline, else depolarizing.
    #[default]
    Auto,
    Dep,
    Ad,
}

impl ShiftModel {
    fn check_supported(self, n_iterations: u32) -> Result<()> {
        if self == ShiftModel::AmplitudeDamping && n_iterations != 1 {
            return Err(Error::Unsupported(
                "amplitude-damping shift model is defined for one iteration only".into(),
            ));
        }
        Ok(())
    }

    /// Noise-free probability `x` mapped to the shifted value.
    pub fn apply(self, x: f64, param: f64, n_iterations: u32) -> f64 {
        match self {
            ShiftModel::Depolarizing => {
                let d = register_dim(n_iterations);
                (1.0 - param) * x + 2.0 * param / d
            }
            ShiftModel::AmplitudeDamping => x + param * (1.0 - x),
        }
    }

    /// Inverse of [`ShiftModel::apply`].
    pub fn invert(self, y: f64, param: f64, n_iterations: u32) -> f64 {
        match self {
            ShiftModel::Depolarizing => {
                let d = register_dim(n_iterations);
                (y - 2.0 * param / d) / (1.0 - param)
            }
            ShiftModel::AmplitudeDamping => (y - param) / (1.0 - param),
        }
    }

    /// Parameter moving `baseline` onto `mean`, with its derivative with
    /// respect to `mean`.
    fn solve(self, mean: f64, baseline: f64, n_iterations: u32) -> (f64, f64) {
        match self {
            ShiftModel::Depolarizing => {
                let span = baseline - 2.0 / register_dim(n_iterations);
                ((baseline - mean) / span, 1.0 / span.abs())
            }
            ShiftModel::AmplitudeDamping => {
                let span = 1.0 - baseline;
                ((mean - baseline) / span, 1.0 / span)
            }
        }
    }
}

/// `D = 2^(2^n)`.
pub fn register_dim(n_iterations: u32) -> f64 {
    2f64.powi(1 << n_iterations)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftFit {
    pub model: ShiftModel,
    pub param: f64,
    /// Propagated statistical uncertainty of `param`.
    pub sigma: f64,
}

pub(crate) fn pick_model(choice: ShiftChoice, mean: f64, baseline: f64, sigma_mean: f64) -> ShiftModel {
    match choice {
        ShiftChoice::Dep => ShiftModel::Depolarizing,
        ShiftChoice::Ad => ShiftModel::AmplitudeDamping,
        ShiftChoice::Auto if mean > baseline + sigma_mean => ShiftModel::AmplitudeDamping,
        ShiftChoice::Auto => ShiftModel::Depolarizing,
    }
}

/// Shift parameter that maps `baseline` onto the grid mean. `sigma_mean` is
/// the statistical uncertainty of the mean; deviations within it of the
/// wrong sign are read as zero rather than rejected.
pub fn solve_shift(
    mean: f64,
    baseline: f64,
    sigma_mean: f64,
    choice: ShiftChoice,
    n_iterations: u32,
) -> Result<ShiftFit> {
    let model = pick_model(choice, mean, baseline, sigma_mean);
    model.check_supported(n_iterations)?;
    if model == ShiftModel::Depolarizing && baseline <= 2.0 / register_dim(n_iterations) {
        return Err(Error::ShiftOutOfRange {
            param: "p_dep",
            value: f64::NAN,
            diagnostic: format!("baseline {baseline} is at or below the fully mixed value"),
        });
    }
    let (param, slope) = model.solve(mean, baseline, n_iterations);
    let sigma = slope * sigma_mean;
    let name = match model {
        ShiftModel::Depolarizing => "p_dep",
        ShiftModel::AmplitudeDamping => "gamma",
    };
    let param = if param < 0.0 && (mean - baseline).abs() <= sigma_mean {
        0.0
    } else {
        param
    };
    if !(0.0..1.0).contains(&param) {
        return Err(Error::ShiftOutOfRange {
            param: name,
            value: param,
            diagnostic: format!(
                "mean {mean:.6} against baseline {baseline:.6} (statistical sigma {sigma_mean:.2e})"
            ),
        });
    }
    Ok(ShiftFit {
        model,
        param,
        sigma,
    })
}

/// Step-one shift fit of aggregated records against `ps_ideal`.
pub fn fit_shift(records: &[ExperimentRecord], ps_ideal: f64, choice: ShiftChoice) -> Result<ShiftFit> {
    let agg = aggregate(records)?;
    let sigma_mean = sigma_stat(ps_ideal, agg.shots_per_point) / (agg.per_phi0.len() as f64).sqrt();
    solve_shift(agg.mean, ps_ideal, sigma_mean, choice, agg.n_iterations)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(phi0: f64, run: u32, shots: u64, count: u64) -> ExperimentRecord {
        ExperimentRecord {
            device_label: "t".into(),
            qubit_set: vec![0, 1],
            n_iterations: 1,
            epsilon: 0.973,
            theta0: PI / 8.0,
            phi0,
            run_index: run,
            shots,
            success_count: count,
        }
    }

    #[test]
    fn sigma_values() {
        assert_eq!(sigma_stat(0.0, 10), 0.0);
        assert_eq!(sigma_stat(1.0, 10), 0.0);
        assert!((sigma_stat(0.8775, 10_000) - 0.00328).abs() < 5e-6);
        assert!((sigma_stat(0.3, 400) / sigma_stat(0.3, 1600) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn aggregate_two_points() {
        let recs = vec![
            record(0.0, 0, 100, 75),
            record(1.0, 0, 100, 90),
            record(0.0, 1, 100, 85),
            record(1.0, 1, 100, 90),
        ];
        let agg = aggregate(&recs).unwrap();
        assert_eq!(agg.estimates(), vec![0.8, 0.9]);
        assert!((agg.mean - 0.85).abs() < 1e-15);
        assert!((agg.sigma_exp - 0.05).abs() < 1e-15);
        assert_eq!(agg.shots_per_point, 200);

        let ragged = vec![record(0.0, 0, 100, 75), record(1.0, 0, 200, 90)];
        assert!(aggregate(&ragged).is_err());
        assert!(aggregate(&[]).is_err());
        let flat = vec![record(0.0, 0, 100, 80), record(2.0, 0, 100, 80)];
        assert_eq!(aggregate(&flat).unwrap().sigma_exp, 0.0);
    }

    #[test]
    fn f_and_s() {
        assert_eq!(metric_f(0.7, 0.7), 1.0);
        assert!((metric_f(1.014, 1.0) - 0.986).abs() < 1e-12);
        assert!(metric_f(2.5, 1.0) < 0.0);
        assert_eq!(metric_s(0.2, 0.2).unwrap(), 1.0);
        assert!(metric_s(0.2, 0.0).is_err());
    }

    #[test]
    fn fidelities() {
        let id = ComplexMatrix::identity(2);
        let u = gates::rx(0.3);
        assert!((process_fidelity_unitary(&u, &u).unwrap() - 1.0).abs() < 1e-15);
        let f = process_fidelity_unitary(&u, &id).unwrap();
        assert!((f - (0.15f64).cos().powi(2)).abs() < 1e-15);
        let g = process_fidelity_unitary(&gates::rx(-0.3), &id).unwrap();
        assert!((f - g).abs() < 1e-14);
        assert!(process_fidelity_unitary(&u, &ComplexMatrix::identity(4)).is_err());
        assert_eq!(average_gate_fidelity(1.0, 2), 1.0);
        assert_eq!(average_gate_fidelity(1.0, 4), 1.0);
        let fa = average_gate_fidelity(f, 2);
        assert!((fa - (2.0 * (0.15f64).cos().powi(2) + 1.0) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn tolerance_bounds() {
        let bundle = |e: f64| FidelityBundle::from_gate_errors(vec![e]).unwrap();
        assert_eq!(misrotation_bound(&bundle(0.0), GateKind::SqrtX).unwrap(), 0.0);
        let mut last = 0.0;
        for e in [1e-5, 1e-4, 1e-3, 1e-2] {
            let b = misrotation_bound(&bundle(e), GateKind::Cr).unwrap();
            assert!(b > last);
            last = b;
        }
        // (2cos²(a/2)+1)/3 = 1 - ε  ⇔  ε = (2/3)·sin²(a/2)
        let e = 2.0 / 3.0 * (0.0526f64 / 2.0).sin().powi(2);
        let b = misrotation_bound(&bundle(e), GateKind::SqrtX).unwrap();
        assert!((b - 0.0526).abs() < 1e-9);
        assert!(matches!(
            misrotation_bound(&bundle(0.9), GateKind::SqrtX),
            Err(Error::NoToleranceRoot { .. })
        ));
        let spread = FidelityBundle::from_gate_errors(vec![1e-3, 3e-3]).unwrap();
        assert!((spread.f_mean - 0.998).abs() < 1e-15 && (spread.sigma_f - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn shift_solutions() {
        let ideal = 0.8775;
        let none = solve_shift(ideal, ideal, 1e-3, ShiftChoice::Auto, 1).unwrap();
        assert_eq!((none.model, none.param), (ShiftModel::Depolarizing, 0.0));
        let dep = ShiftModel::Depolarizing.apply(ideal, 0.0646, 1);
        let fit = solve_shift(dep, ideal, 1e-4, ShiftChoice::Auto, 1).unwrap();
        assert!((fit.param - 0.0646).abs() < 1e-12);
        let ad = ShiftModel::AmplitudeDamping.apply(ideal, 0.0121, 1);
        let fit = solve_shift(ad, ideal, 1e-4, ShiftChoice::Auto, 1).unwrap();
        assert_eq!(fit.model, ShiftModel::AmplitudeDamping);
        assert!((fit.param - 0.0121).abs() < 1e-12);
        assert!(matches!(
            solve_shift(0.99, ideal, 1e-4, ShiftChoice::Dep, 1),
            Err(Error::ShiftOutOfRange { .. })
        ));
        assert!(matches!(
            solve_shift(0.99, ideal, 1e-4, ShiftChoice::Ad, 2),
            Err(Error::Unsupported(_))
        ));
        for model in [ShiftModel::Depolarizing, ShiftModel::AmplitudeDamping] {
            let y = model.apply(0.7, 0.1, 1);
            assert!((model.invert(y, 0.1, 1) - 0.7).abs() < 1e-15);
        }
    }
}
