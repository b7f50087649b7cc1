//! Bayesian ridge regression by evidence maximization.
//!
//! Per column, alternates the posterior mean under the current noise
//! precision α and weight precision λ with the MacKay fixed-point updates
//!
//! ```text
//! γ = Σ_i α s_i / (λ + α s_i)
//! λ ← (γ + 2 λ₁) / (‖w‖² + 2 λ₂)
//! α ← (N − γ + 2 α₁) / (‖y − Xw‖² + 2 α₂)
//! ```
//!
//! where `s_i` are eigenvalues of `XᵀX` and the Gamma hyperpriors are
//! uninformative (`1e-6`).

use super::{center, check_xy, intercept, FitInfo, LinearAttributeMap};
use crate::error::Result;
use crate::exec;
use crate::tensor::linalg::symmetric_eigen;
use crate::tensor::{dot, Matrix};

const HYPER: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BayesOptions {
    pub max_iter: usize,
    /// Stop when both precisions change by less than this (relative).
    pub tol: f64,
}

impl Default for BayesOptions {
    fn default() -> Self {
        BayesOptions { max_iter: 300, tol: 1e-3 }
    }
}

struct Spectrum {
    values: Vec<f64>,
    vectors: Matrix,
}

impl Spectrum {
    /// `(XᵀX + (λ/α) I)⁻¹ Xᵀy` via the eigenbasis.
    fn posterior_mean(&self, xty: &[f64], alpha: f64, lambda: f64) -> Vec<f64> {
        let d = xty.len();
        let ratio = lambda / alpha;
        let proj: Vec<f64> = (0..d)
            .map(|i| {
                let v: f64 = (0..d).map(|r| self.vectors[(r, i)] * xty[r]).sum();
                v / (self.values[i].max(0.0) + ratio)
            })
            .collect();
        (0..d)
            .map(|r| (0..d).map(|i| self.vectors[(r, i)] * proj[i]).sum())
            .collect()
    }
}

fn sse(xc: &Matrix, y: &[f64], w: &[f64]) -> f64 {
    xc.row_iter()
        .zip(y)
        .map(|(row, &t)| {
            let e = t - dot(row, w);
            e * e
        })
        .sum()
}

fn fit_column(
    xc: &Matrix,
    spec: &Spectrum,
    y: &[f64],
    init: Option<(f64, f64)>,
    opts: BayesOptions,
) -> (Vec<f64>, f64, f64, usize) {
    let n = y.len() as f64;
    let xty: Vec<f64> = (0..xc.cols())
        .map(|j| xc.row_iter().zip(y).map(|(r, &t)| r[j] * t).sum())
        .collect();
    let var = y.iter().map(|v| v * v).sum::<f64>() / n;
    let (mut alpha, mut lambda) = init.unwrap_or((1.0 / (var + f64::EPSILON), 1.0));
    let mut iterations = 0;
    for it in 1..=opts.max_iter {
        iterations = it;
        let w = spec.posterior_mean(&xty, alpha, lambda);
        let gamma: f64 = spec
            .values
            .iter()
            .map(|&s| {
                let s = s.max(0.0);
                alpha * s / (lambda + alpha * s)
            })
            .sum();
        let new_lambda = (gamma + 2.0 * HYPER) / (dot(&w, &w) + 2.0 * HYPER);
        let new_alpha = (n - gamma + 2.0 * HYPER) / (sse(xc, y, &w) + 2.0 * HYPER);
        let change = ((new_alpha - alpha) / alpha)
            .abs()
            .max(((new_lambda - lambda) / lambda).abs());
        alpha = new_alpha;
        lambda = new_lambda;
        if change < opts.tol {
            break;
        }
    }
    (spec.posterior_mean(&xty, alpha, lambda), alpha, lambda, iterations)
}

fn spectrum(xc: &Matrix) -> Result<Spectrum> {
    let (values, vectors) = symmetric_eigen(&xc.matmul_tn(xc)?)?;
    Ok(Spectrum { values, vectors })
}

pub fn fit_bayes_ridge(x: &Matrix, y: &Matrix) -> Result<LinearAttributeMap> {
    fit_bayes_ridge_from(x, y, None, BayesOptions::default())
}

/// Like [`fit_bayes_ridge`], optionally starting every column from given
/// `(noise_precision, weight_precision)` pairs.
pub fn fit_bayes_ridge_from(
    x: &Matrix,
    y: &Matrix,
    init: Option<&[(f64, f64)]>,
    opts: BayesOptions,
) -> Result<LinearAttributeMap> {
    check_xy(x, y, 2)?;
    let (xc, x_mean) = center(x);
    let (yc, y_mean) = center(y);
    let spec = spectrum(&xc)?;
    let cols = exec::map_range(y.cols(), |k| fit_column(&xc, &spec, &yc.column(k), init.map(|p| p[k]), opts));
    let mut weights = Matrix::zeros(x.cols(), y.cols());
    let mut noise_precision = Vec::new();
    let mut weight_precision = Vec::new();
    let mut iterations = Vec::new();
    for (k, (w, a, l, it)) in cols.into_iter().enumerate() {
        for (j, v) in w.into_iter().enumerate() {
            weights[(j, k)] = v;
        }
        noise_precision.push(a);
        weight_precision.push(l);
        iterations.push(it);
    }
    let intercept = intercept(&x_mean, &y_mean, &weights);
    Ok(LinearAttributeMap {
        weights,
        intercept,
        info: FitInfo::BayesRidge {
            noise_precision,
            weight_precision,
            iterations,
        },
    })
}

/// Posterior-mean weights for fixed precisions, one pair per column.
pub fn bayes_posterior_weights(x: &Matrix, y: &Matrix, precisions: &[(f64, f64)]) -> Result<Matrix> {
    check_xy(x, y, 2)?;
    let (xc, _) = center(x);
    let (yc, _) = center(y);
    let spec = spectrum(&xc)?;
    let mut weights = Matrix::zeros(x.cols(), y.cols());
    for k in 0..y.cols() {
        let yk = yc.column(k);
        let xty: Vec<f64> = (0..xc.cols())
            .map(|j| xc.row_iter().zip(&yk).map(|(r, &t)| r[j] * t).sum())
            .collect();
        let (a, l) = precisions[k];
        for (j, v) in spec.posterior_mean(&xty, a, l).into_iter().enumerate() {
            weights[(j, k)] = v;
        }
    }
    Ok(weights)
}
