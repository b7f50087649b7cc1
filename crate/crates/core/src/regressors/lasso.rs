use super::{center, check_xy, intercept, FitInfo, LinearAttributeMap};
use crate::error::{Error, Result};
use crate::exec;
use crate::tensor::Matrix;

pub(crate) const DEFAULT_LASSO_ALPHA: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LassoOptions {
    pub max_sweeps: usize,
    /// Converged once no coordinate moves more than this in a sweep.
    pub tol: f64,
}

impl Default for LassoOptions {
    fn default() -> Self {
        LassoOptions {
            max_sweeps: 10_000,
            tol: 1e-8,
        }
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Cyclic coordinate descent on `½N⁻¹‖Xw − y‖² + α‖w‖₁` using the Gram
/// matrix `G = XᵀX` and `c = Xᵀy` (both of centered data).
fn lasso_column(gram: &Matrix, xty: &[f64], n: f64, alpha: f64, opts: LassoOptions) -> (Vec<f64>, bool, usize) {
    let d = xty.len();
    let mut w = vec![0.0; d];
    // gw = G w, maintained incrementally
    let mut gw = vec![0.0; d];
    for sweep in 1..=opts.max_sweeps {
        let mut max_delta: f64 = 0.0;
        for j in 0..d {
            let gjj = gram[(j, j)];
            if gjj <= 0.0 {
                continue;
            }
            let rho = (xty[j] - gw[j] + gjj * w[j]) / n;
            let new = soft_threshold(rho, alpha) / (gjj / n);
            let delta = new - w[j];
            if delta != 0.0 {
                w[j] = new;
                for (k, g) in gw.iter_mut().enumerate() {
                    *g += delta * gram[(k, j)];
                }
                max_delta = max_delta.max(delta.abs());
            }
        }
        if max_delta < opts.tol {
            return (w, true, sweep);
        }
    }
    (w, false, opts.max_sweeps)
}

pub fn fit_lasso(x: &Matrix, y: &Matrix, alpha: f64) -> Result<LinearAttributeMap> {
    fit_lasso_with(x, y, alpha, LassoOptions::default())
}

/// Per-column Lasso; columns are fit in parallel. Non-convergence is
/// reported through `FitInfo::Lasso::converged`, not as an error.
pub fn fit_lasso_with(x: &Matrix, y: &Matrix, alpha: f64, opts: LassoOptions) -> Result<LinearAttributeMap> {
    check_xy(x, y, 1)?;
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Invalid(format!("lasso alpha must be > 0, got {alpha}")));
    }
    let (xc, x_mean) = center(x);
    let (yc, y_mean) = center(y);
    let gram = xc.matmul_tn(&xc)?;
    let xty = xc.matmul_tn(&yc)?;
    let n = x.rows() as f64;
    let cols = exec::map_range(y.cols(), |k| lasso_column(&gram, &xty.column(k), n, alpha, opts));
    let mut weights = Matrix::zeros(x.cols(), y.cols());
    let mut converged = true;
    let mut sweeps = Vec::with_capacity(cols.len());
    for (k, (w, ok, s)) in cols.into_iter().enumerate() {
        for (j, v) in w.into_iter().enumerate() {
            weights[(j, k)] = v;
        }
        converged &= ok;
        sweeps.push(s);
    }
    let intercept = intercept(&x_mean, &y_mean, &weights);
    Ok(LinearAttributeMap {
        weights,
        intercept,
        info: FitInfo::Lasso {
            alpha,
            converged,
            sweeps,
        },
    })
}

/// Largest violation of the Lasso optimality conditions for a fitted map:
/// with `g = Xᵀ(Xw + b − y)/N`, requires `|g_j| ≤ α` where `w_j = 0` and
/// `g_j = −α·sign(w_j)` elsewhere.
pub fn lasso_kkt_violation(x: &Matrix, y: &Matrix, map: &LinearAttributeMap, alpha: f64) -> Result<f64> {
    let resid = map.predict(x)?.sub(y)?;
    let grad = x.matmul_tn(&resid)?.scale(1.0 / x.rows() as f64);
    let mut worst: f64 = 0.0;
    for j in 0..grad.rows() {
        for k in 0..grad.cols() {
            let (g, w) = (grad[(j, k)], map.weights[(j, k)]);
            let v = if w == 0.0 {
                (g.abs() - alpha).max(0.0)
            } else {
                (g + alpha * w.signum()).abs()
            };
            worst = worst.max(v);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(0.5, 1.0), 0.0);
    }

    #[test]
    fn full_shrinkage() {
        let x = Matrix::from_fn(10, 3, |i, j| ((i * 3 + j) as f64 * 0.77).sin());
        let y = Matrix::from_fn(10, 1, |i, _| (i as f64 * 0.3).cos());
        let (xc, _) = center(&x);
        let (yc, _) = center(&y);
        let c = xc.matmul_tn(&yc).unwrap();
        let lambda_max = c.data().iter().map(|v| v.abs()).fold(0.0, f64::max) / 10.0;
        let map = fit_lasso(&x, &y, lambda_max).unwrap();
        assert!(map.weights.data().iter().all(|&w| w == 0.0));
        let map = fit_lasso(&x, &y, lambda_max * 0.5).unwrap();
        assert!(map.weights.data().iter().any(|&w| w != 0.0));
        assert!(fit_lasso(&x, &y, 0.0).is_err());
    }

    #[test]
    fn non_convergence_is_flagged() {
        let x = Matrix::from_fn(20, 4, |i, j| ((i * 5 + j * 3) as f64 * 0.41).sin());
        let y = Matrix::from_fn(20, 2, |i, k| ((i + k) as f64).cos());
        let opts = LassoOptions {
            max_sweeps: 1,
            tol: 0.0,
        };
        match fit_lasso_with(&x, &y, 1e-4, opts).unwrap().info {
            FitInfo::Lasso { converged, .. } => assert!(!converged),
            _ => unreachable!(),
        }
    }
}
