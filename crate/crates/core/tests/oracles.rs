//! Cross-checks against independent implementations: nalgebra for dense
//! linear algebra and brute-force recomputation elsewhere.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zeroshot::ect::class_feature_stats;
use zeroshot::eval::project_2d;
use zeroshot::regressors::{
    bayes_posterior_weights, fit_bayes_ridge, fit_ridge, fit_ridge_cv, ridge_loo_scores, FitInfo, DEFAULT_RIDGE_GRID,
};
use zeroshot::tensor::linalg::{symmetric_eigen, Cholesky};
use zeroshot::tensor::Matrix;

fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.data())
}

fn centered(m: &Matrix) -> Matrix {
    let means = m.column_means();
    Matrix::from_fn(m.rows(), m.cols(), |r, c| m[(r, c)] - means[c])
}

#[test]
fn cholesky_solve_matches_nalgebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in [1, 2, 5, 12] {
        let b = random(&mut rng, n + 3, n);
        let mut a = b.matmul_tn(&b).unwrap();
        for i in 0..n {
            a[(i, i)] += 0.1;
        }
        let rhs = random(&mut rng, n, 3);
        let ours = Cholesky::factor(&a).unwrap().solve(&rhs).unwrap();
        let theirs = to_na(&a).cholesky().unwrap().solve(&to_na(&rhs));
        for r in 0..n {
            for c in 0..3 {
                assert!((ours[(r, c)] - theirs[(r, c)]).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn symmetric_eigenvalues_match_nalgebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for n in [2, 4, 9, 16] {
        let b = random(&mut rng, n, n);
        let a = b.add(&b.transpose()).unwrap();
        let (values, vectors) = symmetric_eigen(&a).unwrap();
        let mut theirs: Vec<f64> = SymmetricEigen::new(to_na(&a)).eigenvalues.iter().copied().collect();
        theirs.sort_by(|x, y| y.partial_cmp(x).unwrap());
        for (x, y) in values.iter().zip(&theirs) {
            assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
        // A v = λ v column by column.
        let av = a.matmul(&vectors).unwrap();
        for c in 0..n {
            for r in 0..n {
                assert!((av[(r, c)] - values[c] * vectors[(r, c)]).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn projection_matches_scatter_eigenvectors() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = Matrix::from_fn(60, 5, |_, c| rng.random_range(-1.0..1.0) * (5 - c) as f64);
    let p = project_2d(&x).unwrap();
    let xc = centered(&x);
    let eig = SymmetricEigen::new(to_na(&xc.matmul_tn(&xc).unwrap()));
    let mut order: Vec<usize> = (0..5).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    for (axis, &idx) in order.iter().take(2).enumerate() {
        let lambda = eig.eigenvalues[idx];
        assert!((p.eigenvalues[axis] - lambda).abs() < 1e-6 * lambda);
        let v = eig.eigenvectors.column(idx);
        let cos: f64 = (0..5).map(|j| p.axes[(axis, j)] * v[j]).sum();
        assert!((cos.abs() - 1.0).abs() < 1e-6, "axis {axis}: |cos| {cos}");
    }
    assert!(!p.rank_deficient);
}

#[test]
fn ridge_matches_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = random(&mut rng, 40, 6);
    let y = random(&mut rng, 40, 3);
    let alpha = 0.7;
    let map = fit_ridge(&x, &y, alpha).unwrap();
    let (xc, yc) = (to_na(&centered(&x)), to_na(&centered(&y)));
    let lhs = xc.transpose() * &xc + DMatrix::identity(6, 6) * alpha;
    let w = lhs.lu().solve(&(xc.transpose() * yc)).unwrap();
    for r in 0..6 {
        for c in 0..3 {
            assert!((map.weights[(r, c)] - w[(r, c)]).abs() < 1e-10);
        }
    }
    // The intercept makes predictions exact at the means.
    let pred = map.predict(&Matrix::from_rows(&[x.column_means()]).unwrap()).unwrap();
    for (p, m) in pred.row(0).iter().zip(y.column_means()) {
        assert!((p - m).abs() < 1e-12);
    }
}

#[test]
fn ridge_loo_matches_brute_force_refits() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (n, d, k) = (15, 4, 2);
    let x = random(&mut rng, n, d);
    let y = random(&mut rng, n, k);
    let scores = ridge_loo_scores(&x, &y, &DEFAULT_RIDGE_GRID).unwrap();
    for (g, &alpha) in DEFAULT_RIDGE_GRID.iter().enumerate() {
        let mut sse = 0.0;
        for i in 0..n {
            let keep: Vec<usize> = (0..n).filter(|&r| r != i).collect();
            let map = fit_ridge(&x.select_rows(&keep), &y.select_rows(&keep), alpha).unwrap();
            let pred = map.predict(&x.select_rows(&[i])).unwrap();
            sse += pred.row(0).iter().zip(y.row(i)).map(|(p, t)| (p - t) * (p - t)).sum::<f64>();
        }
        assert!((scores[g] - sse).abs() < 1e-9 * sse.max(1.0), "alpha {alpha}: {} vs {sse}", scores[g]);
    }
    let cv = fit_ridge_cv(&x, &y, &DEFAULT_RIDGE_GRID).unwrap();
    let best = scores.iter().enumerate().fold(0, |b, (i, &s)| if s < scores[b] { i } else { b });
    match cv.info {
        FitInfo::RidgeCv { alpha, .. } => assert_eq!(alpha, DEFAULT_RIDGE_GRID[best]),
        other => panic!("unexpected fit info {other:?}"),
    }
}

fn bayes_precisions(info: &FitInfo) -> Vec<(f64, f64)> {
    match info {
        FitInfo::BayesRidge {
            noise_precision,
            weight_precision,
            ..
        } => noise_precision.iter().copied().zip(weight_precision.iter().copied()).collect(),
        other => panic!("unexpected fit info {other:?}"),
    }
}

#[test]
fn bayes_ridge_noiseless_recovers_least_squares() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x = random(&mut rng, 80, 5);
    let w_true = random(&mut rng, 5, 2);
    let y = x.matmul(&w_true).unwrap();
    let map = fit_bayes_ridge(&x, &y).unwrap();
    let ols = to_na(&x).svd(true, true).solve(&to_na(&y), 1e-12).unwrap();
    for r in 0..5 {
        for c in 0..2 {
            assert!((map.weights[(r, c)] - ols[(r, c)]).abs() < 1e-3);
        }
    }
}

#[test]
fn bayes_ridge_shrinks_pure_noise_and_is_a_fixed_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = random(&mut rng, 30, 8);
    let y = random(&mut rng, 30, 1);
    let map = fit_bayes_ridge(&x, &y).unwrap();
    let (xc, yc) = (to_na(&centered(&x)), to_na(&centered(&y)));
    let ols = (xc.transpose() * &xc).lu().solve(&(xc.transpose() * yc)).unwrap();
    let ours: f64 = map.weights.data().iter().map(|w| w * w).sum();
    assert!(ours < 0.5 * ols.norm_squared(), "{ours} vs {}", ols.norm_squared());

    let precisions = bayes_precisions(&map.info);
    let again = bayes_posterior_weights(&x, &y, &precisions).unwrap();
    assert!(again.max_abs_diff(&map.weights) < 1e-12);
}

#[test]
fn class_stats_match_direct_computation() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x = random(&mut rng, 30, 3);
    let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
    let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
    let stats = class_feature_stats(&x, &labels, &names).unwrap();
    for c in 0..3 {
        let rows: Vec<usize> = (0..30).filter(|&i| labels[i] == c).collect();
        for j in 0..3 {
            let col = DVector::from_iterator(rows.len(), rows.iter().map(|&i| x[(i, j)]));
            let mean = col.mean();
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / rows.len() as f64;
            assert!((stats.means[(c, j)] - mean).abs() < 1e-14);
            assert!((stats.stds[(c, j)] - var.sqrt()).abs() < 1e-14);
        }
    }
}
