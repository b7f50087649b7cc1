//! Linear feature-to-attribute regressors used by the co-training panel.
//!
//! All three fit each attribute column independently on centered data and
//! carry an explicit intercept.

mod bayes;
mod lasso;
mod ridge;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numfmt;
use crate::tensor::Matrix;

pub use bayes::{bayes_posterior_weights, fit_bayes_ridge, fit_bayes_ridge_from, BayesOptions};
pub use lasso::{fit_lasso, fit_lasso_with, lasso_kkt_violation, LassoOptions};
pub use ridge::{fit_ridge, fit_ridge_cv, ridge_loo_scores, DEFAULT_RIDGE_GRID};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegressorKind {
    Lasso,
    RidgeCv,
    BayesRidge,
}

impl RegressorKind {
    pub const ALL: [RegressorKind; 3] = [RegressorKind::Lasso, RegressorKind::RidgeCv, RegressorKind::BayesRidge];

    pub fn name(self) -> &'static str {
        match self {
            RegressorKind::Lasso => "lasso",
            RegressorKind::RidgeCv => "ridge-cv",
            RegressorKind::BayesRidge => "bayes-ridge",
        }
    }
}

/// Hyperparameters found while fitting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum FitInfo {
    RidgeCv {
        #[serde(with = "numfmt::f64_17")]
        alpha: f64,
        /// Leave-one-out squared error per grid value, grid order.
        #[serde(with = "numfmt::vec17")]
        loo_scores: Vec<f64>,
    },
    Lasso {
        #[serde(with = "numfmt::f64_17")]
        alpha: f64,
        converged: bool,
        sweeps: Vec<usize>,
    },
    BayesRidge {
        /// Noise precision per attribute column.
        #[serde(with = "numfmt::vec17")]
        noise_precision: Vec<f64>,
        /// Weight precision per attribute column.
        #[serde(with = "numfmt::vec17")]
        weight_precision: Vec<f64>,
        iterations: Vec<usize>,
    },
}

/// `y = x W + b` with `W` of shape `d x K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearAttributeMap {
    #[serde(with = "numfmt::matrix17")]
    pub weights: Matrix,
    #[serde(with = "numfmt::vec17")]
    pub intercept: Vec<f64>,
    pub info: FitInfo,
}

impl LinearAttributeMap {
    pub fn kind(&self) -> RegressorKind {
        match self.info {
            FitInfo::RidgeCv { .. } => RegressorKind::RidgeCv,
            FitInfo::Lasso { .. } => RegressorKind::Lasso,
            FitInfo::BayesRidge { .. } => RegressorKind::BayesRidge,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        predict_attributes(self, x)
    }
}

pub fn predict_attributes(map: &LinearAttributeMap, x: &Matrix) -> Result<Matrix> {
    if x.cols() != map.input_dim() {
        return Err(Error::shape("predict_attributes", map.input_dim(), x.cols()));
    }
    let mut y = x.matmul(&map.weights)?;
    y.add_row_vector(&map.intercept)?;
    Ok(y)
}

/// Column-centered copy plus the column means.
pub(crate) fn center(m: &Matrix) -> (Matrix, Vec<f64>) {
    let mean = m.column_means();
    let mut c = m.clone();
    for r in 0..c.rows() {
        for (v, mu) in c.row_mut(r).iter_mut().zip(&mean) {
            *v -= mu;
        }
    }
    (c, mean)
}

pub(crate) fn check_xy(x: &Matrix, y: &Matrix, min_rows: usize) -> Result<()> {
    if x.rows() != y.rows() {
        return Err(Error::shape("regression rows", x.rows(), y.rows()));
    }
    if x.rows() < min_rows {
        return Err(Error::Invalid(format!("need at least {min_rows} samples, got {}", x.rows())));
    }
    Ok(())
}

/// `b = ȳ − x̄ W`.
pub(crate) fn intercept(x_mean: &[f64], y_mean: &[f64], w: &Matrix) -> Vec<f64> {
    (0..w.cols())
        .map(|k| y_mean[k] - (0..w.rows()).map(|j| x_mean[j] * w[(j, k)]).sum::<f64>())
        .collect()
}

/// Fits the given regressor with its default hyperparameters.
pub fn fit(kind: RegressorKind, x: &Matrix, y: &Matrix) -> Result<LinearAttributeMap> {
    match kind {
        RegressorKind::Lasso => fit_lasso(x, y, lasso::DEFAULT_LASSO_ALPHA),
        RegressorKind::RidgeCv => fit_ridge_cv(x, y, &DEFAULT_RIDGE_GRID),
        RegressorKind::BayesRidge => fit_bayes_ridge(x, y),
    }
}
