use super::{center, check_xy, intercept, FitInfo, LinearAttributeMap};
use crate::error::{Error, Result};
use crate::tensor::linalg::Cholesky;
use crate::tensor::Matrix;

pub const DEFAULT_RIDGE_GRID: [f64; 5] = [0.1, 0.5, 1.0, 5.0, 10.0];

struct RidgeSolve {
    weights: Matrix,
    chol: Cholesky,
}

fn solve(xc: &Matrix, yc: &Matrix, alpha: f64) -> Result<RidgeSolve> {
    let mut a = xc.matmul_tn(xc)?;
    for i in 0..a.rows() {
        a[(i, i)] += alpha;
    }
    let chol = Cholesky::factor(&a)?;
    let weights = chol.solve(&xc.matmul_tn(yc)?)?;
    Ok(RidgeSolve { weights, chol })
}

/// Closed-form ridge with an unpenalized intercept.
pub fn fit_ridge(x: &Matrix, y: &Matrix, alpha: f64) -> Result<LinearAttributeMap> {
    fit_ridge_cv(x, y, &[alpha])
}

/// Exact leave-one-out squared error summed over samples and columns, for
/// each alpha, using the hat-matrix shortcut `e_i / (1 − h_ii)`.
pub fn ridge_loo_scores(x: &Matrix, y: &Matrix, grid: &[f64]) -> Result<Vec<f64>> {
    check_xy(x, y, 2)?;
    let (xc, _) = center(x);
    let (yc, _) = center(y);
    let n = x.rows() as f64;
    grid.iter()
        .map(|&alpha| {
            let s = solve(&xc, &yc, alpha)?;
            let fitted = xc.matmul(&s.weights)?;
            let lev = s.chol.quad_forms(&xc);
            let mut score = 0.0;
            for i in 0..x.rows() {
                let h = lev[i] + 1.0 / n;
                if h >= 1.0 - 1e-12 {
                    return Ok(f64::INFINITY);
                }
                for k in 0..y.cols() {
                    let e = (yc[(i, k)] - fitted[(i, k)]) / (1.0 - h);
                    score += e * e;
                }
            }
            Ok(score)
        })
        .collect()
}

/// Ridge with alpha chosen from `grid` by leave-one-out error (first
/// minimum wins), refit on all rows.
pub fn fit_ridge_cv(x: &Matrix, y: &Matrix, grid: &[f64]) -> Result<LinearAttributeMap> {
    check_xy(x, y, 2)?;
    if grid.is_empty() {
        return Err(Error::Invalid("ridge alpha grid is empty".into()));
    }
    if let Some(bad) = grid.iter().find(|a| !(**a > 0.0) || !a.is_finite()) {
        return Err(Error::Invalid(format!("ridge alphas must be > 0, got {bad}")));
    }
    // a single candidate needs no selection
    let loo_scores = if grid.len() == 1 {
        Vec::new()
    } else {
        ridge_loo_scores(x, y, grid)?
    };
    let mut best = 0;
    for (i, s) in loo_scores.iter().enumerate() {
        if *s < loo_scores[best] {
            best = i;
        }
    }
    let alpha = grid[best];
    let (xc, x_mean) = center(x);
    let (yc, y_mean) = center(y);
    let weights = solve(&xc, &yc, alpha)?.weights;
    let intercept = intercept(&x_mean, &y_mean, &weights);
    Ok(LinearAttributeMap {
        weights,
        intercept,
        info: FitInfo::RidgeCv { alpha, loo_scores },
    })
}
