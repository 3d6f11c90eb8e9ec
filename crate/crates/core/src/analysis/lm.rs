//! Box-constrained Levenberg-Marquardt with a forward-difference Jacobian.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Relative cost decrease below which a step counts as converged.
    pub ftol: f64,
    /// Absolute step length below which a step counts as converged.
    pub xtol: f64,
    /// Projected-gradient norm below which the start point is optimal.
    pub gtol: f64,
    /// Relative finite-difference step.
    pub fd_step: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iter: 200,
            ftol: 1e-14,
            xtol: 1e-12,
            gtol: 1e-15,
            fd_step: 1e-7,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LmResult {
    pub x: Vec<f64>,
    pub residuals: Vec<f64>,
    pub cost: f64,
    pub jacobian: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn residuals(f: &dyn Fn(&[f64]) -> Result<Vec<f64>>, x: &[f64], y: &[f64]) -> Result<DVector<f64>> {
    let v = f(x)?;
    Ok(DVector::from_iterator(y.len(), v.iter().zip(y).map(|(a, b)| a - b)))
}

fn jacobian(
    f: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
    x: &[f64],
    r: &DVector<f64>,
    y: &[f64],
    hi: &[f64],
    step: f64,
) -> Result<DMatrix<f64>> {
    let mut j = DMatrix::zeros(r.len(), x.len());
    let mut xp = x.to_vec();
    for k in 0..x.len() {
        let mut h = step * x[k].abs().max(1.0);
        if x[k] + h > hi[k] {
            h = -h;
        }
        xp[k] = x[k] + h;
        let rp = residuals(f, &xp, y)?;
        j.set_column(k, &((rp - r) / h));
        xp[k] = x[k];
    }
    Ok(j)
}

fn clamp(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, &l), &h) in x.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(l, h);
    }
}

/// Minimizes `½|f(x) - y|²` over the box `[lo, hi]` from `x0`.
pub fn minimize(
    f: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
    y: &[f64],
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    opts: &LmOptions,
) -> Result<LmResult> {
    let d = x0.len();
    let mut x = x0.to_vec();
    clamp(&mut x, lo, hi);
    let mut r = residuals(f, &x, y)?;
    let mut cost = 0.5 * r.norm_squared();
    let mut mu = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    let mut jac = jacobian(f, &x, &r, y, hi, opts.fd_step)?;

    'outer: while iterations < opts.max_iter {
        iterations += 1;
        let g = jac.transpose() * &r;
        let a = jac.transpose() * &jac;
        // variables pinned at a bound with the gradient pointing outward
        let pinned: Vec<bool> = (0..d)
            .map(|k| (x[k] <= lo[k] && g[k] > 0.0) || (x[k] >= hi[k] && g[k] < 0.0))
            .collect();
        let pg = (0..d)
            .filter(|&k| !pinned[k])
            .map(|k| g[k].abs())
            .fold(0.0, f64::max);
        if pg <= opts.gtol * (1.0 + cost) || cost == 0.0 {
            converged = true;
            break;
        }
        loop {
            let mut m = a.clone();
            let mut rhs = -&g;
            for k in 0..d {
                if pinned[k] {
                    m.row_mut(k).fill(0.0);
                    m.column_mut(k).fill(0.0);
                    m[(k, k)] = 1.0;
                    rhs[k] = 0.0;
                } else {
                    m[(k, k)] += mu * a[(k, k)].max(1e-12);
                }
            }
            let Some(delta) = m.clone().cholesky().map(|c| c.solve(&rhs)) else {
                mu *= 4.0;
                if mu > 1e12 {
                    converged = true;
                    break 'outer;
                }
                continue;
            };
            let mut xn: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
            clamp(&mut xn, lo, hi);
            let step = xn
                .iter()
                .zip(&x)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let rn = residuals(f, &xn, y)?;
            let cn = 0.5 * rn.norm_squared();
            if cn < cost {
                let rel = (cost - cn) / cost;
                x = xn;
                r = rn;
                cost = cn;
                mu = (mu / 3.0).max(1e-15);
                if rel < opts.ftol || step < opts.xtol {
                    converged = true;
                    break 'outer;
                }
                jac = jacobian(f, &x, &r, y, hi, opts.fd_step)?;
                break;
            }
            mu *= 4.0;
            if mu > 1e12 || step < opts.xtol {
                // no descent left at machine precision
                converged = true;
                break 'outer;
            }
        }
    }
    Ok(LmResult {
        residuals: r.iter().copied().collect(),
        x,
        cost,
        jacobian: jac,
        iterations,
        converged,
    })
}

/// `s²·(JᵀJ)⁺` with `s² = |r|²/(m - d)`, as per-parameter standard errors.
pub fn parameter_sigma(jac: &DMatrix<f64>, residuals: &[f64]) -> Vec<f64> {
    let (m, d) = jac.shape();
    let dof = m.saturating_sub(d).max(1) as f64;
    let s2 = residuals.iter().map(|r| r * r).sum::<f64>() / dof;
    let a = jac.transpose() * jac;
    let svd = a.svd(true, true);
    let cutoff = svd.singular_values.max() * 1e-14;
    match svd.pseudo_inverse(cutoff) {
        Ok(inv) => (0..d).map(|k| (s2 * inv[(k, k)]).max(0.0).sqrt()).collect(),
        Err(_) => vec![f64::INFINITY; d],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_fit() {
        let t: Vec<f64> = (0..20).map(|k| k as f64 * 0.2).collect();
        let y: Vec<f64> = t.iter().map(|t| 2.0 * (-0.7 * t).exp()).collect();
        let f = |p: &[f64]| Ok(t.iter().map(|t| p[0] * (-p[1] * t).exp()).collect());
        let res = minimize(&f, &y, &[1.0, 0.1], &[0.0, 0.0], &[5.0, 5.0], &LmOptions::default()).unwrap();
        assert!(res.converged);
        assert!((res.x[0] - 2.0).abs() < 1e-8 && (res.x[1] - 0.7).abs() < 1e-8);
    }

    #[test]
    fn bound_becomes_active() {
        let y = [3.0, 3.0];
        let f = |p: &[f64]| Ok(vec![p[0], p[0]]);
        let res = minimize(&f, &y, &[0.0], &[-1.0], &[1.0], &LmOptions::default()).unwrap();
        assert_eq!(res.x, vec![1.0]);
        assert!(res.converged);
    }

    #[test]
    fn sigma_of_linear_model() {
        // y = a·x with unit-variance residual pattern
        let jac = DMatrix::from_column_slice(4, 1, &[1.0, 1.0, 1.0, 1.0]);
        let s = parameter_sigma(&jac, &[1.0, -1.0, 1.0, -1.0]);
        assert!((s[0] - (4.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-12);
    }
}
