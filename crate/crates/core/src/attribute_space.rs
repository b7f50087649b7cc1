//! Attribute-correlation transfer, class prototypes, and the two zero-shot
//! decision rules (latent-only and latent + attribute).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::linalg::Cholesky;
use crate::tensor::{dot, norm, Matrix};

/// Ridge coefficients expressing each unseen class's attributes as a
/// combination of seen-class attributes. `coefficients` is `U x S`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub coefficients: Matrix,
    pub lambda: f64,
}

impl CorrelationMatrix {
    pub fn num_unseen(&self) -> usize {
        self.coefficients.rows()
    }

    pub fn num_seen(&self) -> usize {
        self.coefficients.cols()
    }

    /// Applies the coefficients to per-seen-class rows: `β · rows`.
    pub fn transfer(&self, seen_rows: &Matrix) -> Result<Matrix> {
        if seen_rows.rows() != self.num_seen() {
            return Err(Error::shape("correlation transfer", self.num_seen(), seen_rows.rows()));
        }
        self.coefficients.matmul(seen_rows)
    }
}

/// Solves `min_β ‖a_u − Σ_c β_c a_c‖² + λ‖β‖²` for every unseen row at once,
/// sharing one Cholesky factorization of `A_s A_sᵀ + λI`.
pub fn ridge_correlation(a_seen: &Matrix, a_unseen: &Matrix, lambda: f64) -> Result<CorrelationMatrix> {
    if a_seen.cols() != a_unseen.cols() {
        return Err(Error::shape("ridge_correlation", a_seen.cols(), a_unseen.cols()));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Invalid(format!("ridge lambda must be >= 0, got {lambda}")));
    }
    let mut gram = a_seen.matmul_nt(a_seen)?;
    for i in 0..gram.rows() {
        gram[(i, i)] += lambda;
    }
    let chol = Cholesky::factor(&gram).map_err(|e| match e {
        Error::Singular(msg) if lambda == 0.0 => Error::Singular(format!(
            "seen attribute Gram matrix is singular ({msg}); use lambda > 0"
        )),
        other => other,
    })?;
    let rhs = a_seen.matmul_nt(a_unseen)?;
    let beta = chol.solve(&rhs)?.transpose();
    Ok(CorrelationMatrix {
        coefficients: beta,
        lambda,
    })
}

/// Value of the ridge objective for one unseen class.
pub fn ridge_objective(beta: &[f64], a_seen: &Matrix, a_u: &[f64], lambda: f64) -> f64 {
    let mut recon = vec![0.0; a_u.len()];
    for (c, &b) in beta.iter().enumerate() {
        for (r, a) in recon.iter_mut().zip(a_seen.row(c)) {
            *r += b * a;
        }
    }
    let resid: f64 = recon.iter().zip(a_u).map(|(r, a)| (a - r) * (a - r)).sum();
    resid + lambda * dot(beta, beta)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrototypeKind {
    Latent,
    Visual,
}

/// One vector per class, rows aligned with `class_names`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrototypeSet {
    pub class_names: Vec<String>,
    pub vectors: Matrix,
    pub kind: PrototypeKind,
}

impl PrototypeSet {
    pub fn len(&self) -> usize {
        self.class_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.class_names.is_empty()
    }
}

fn class_sums(rows: &Matrix, labels: &[usize], n_classes: usize) -> Result<(Matrix, Vec<usize>)> {
    if labels.len() != rows.rows() {
        return Err(Error::shape("class_means labels", rows.rows(), labels.len()));
    }
    let mut sums = Matrix::zeros(n_classes, rows.cols());
    let mut counts = vec![0usize; n_classes];
    for (i, &y) in labels.iter().enumerate() {
        if y >= n_classes {
            return Err(Error::Invalid(format!("label index {y} >= {n_classes}")));
        }
        counts[y] += 1;
        for (s, v) in sums.row_mut(y).iter_mut().zip(rows.row(i)) {
            *s += v;
        }
    }
    Ok((sums, counts))
}

/// Per-class arithmetic means; `labels[i]` indexes `class_names`.
pub fn class_means(rows: &Matrix, labels: &[usize], class_names: &[String]) -> Result<Matrix> {
    let (mut sums, counts) = class_sums(rows, labels, class_names.len())?;
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(Error::Invalid(format!("class '{}' has no samples", class_names[empty])));
    }
    for (c, &n) in counts.iter().enumerate() {
        sums.row_mut(c).iter_mut().for_each(|s| *s /= n as f64);
    }
    Ok(sums)
}

/// Seen-class latent prototypes (per-class mean latent vector).
pub fn latent_prototypes_seen(latents: &Matrix, labels: &[usize], class_names: &[String]) -> Result<PrototypeSet> {
    Ok(PrototypeSet {
        class_names: class_names.to_vec(),
        vectors: class_means(latents, labels, class_names)?,
        kind: PrototypeKind::Latent,
    })
}

/// Unseen-class prototypes `σ̄_u = Σ_c β_uc σ̄_c`.
pub fn latent_prototypes_unseen(
    corr: &CorrelationMatrix,
    seen: &PrototypeSet,
    unseen_names: &[String],
) -> Result<PrototypeSet> {
    if unseen_names.len() != corr.num_unseen() {
        return Err(Error::shape("unseen prototype names", corr.num_unseen(), unseen_names.len()));
    }
    Ok(PrototypeSet {
        class_names: unseen_names.to_vec(),
        vectors: corr.transfer(&seen.vectors)?,
        kind: seen.kind,
    })
}

pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::shape("cosine_similarity", u.len(), v.len()));
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::Invalid("cosine similarity of a zero vector".into()));
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Index of the maximum; the first wins ties.
pub fn argmax_first(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

pub fn latent_scores(latent: &[f64], protos: &PrototypeSet) -> Result<Vec<f64>> {
    if protos.is_empty() {
        return Err(Error::EmptyInput("no prototypes to compare against".into()));
    }
    protos
        .vectors
        .row_iter()
        .map(|p| cosine_similarity(latent, p))
        .collect()
}

/// Nearest prototype by cosine similarity; returns the row index in `protos`.
pub fn predict_latent(latent: &[f64], protos: &PrototypeSet) -> Result<usize> {
    Ok(argmax_first(&latent_scores(latent, protos)?))
}

pub fn combined_scores(
    sem_pred: &[f64],
    latent: &[f64],
    attributes: &Matrix,
    protos: &PrototypeSet,
) -> Result<Vec<f64>> {
    if attributes.rows() != protos.len() {
        return Err(Error::shape("combined prediction classes", protos.len(), attributes.rows()));
    }
    let lat = latent_scores(latent, protos)?;
    attributes
        .row_iter()
        .zip(lat)
        .map(|(a, l)| Ok(cosine_similarity(sem_pred, a)? + l))
        .collect()
}

/// `argmax_y S(sem_pred, a_y) + S(latent, σ̄_y)`, unweighted.
pub fn predict_combined(
    sem_pred: &[f64],
    latent: &[f64],
    attributes: &Matrix,
    protos: &PrototypeSet,
) -> Result<usize> {
    Ok(argmax_first(&combined_scores(sem_pred, latent, attributes, protos)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize, p: &str) -> Vec<String> {
        (0..n).map(|i| format!("{p}{i}")).collect()
    }

    #[test]
    fn orthonormal_seen_gives_indicator() {
        let a_seen = Matrix::identity(4).columns(0..4).select_rows(&[0, 1, 2]);
        let a_u = Matrix::from_rows(&[a_seen.row(1)]).unwrap();
        let corr = ridge_correlation(&a_seen, &a_u, 1e-12).unwrap();
        let expected = [0.0, 1.0, 0.0];
        for (b, e) in corr.coefficients.row(0).iter().zip(expected) {
            assert!((b - e).abs() < 1e-10);
        }
    }

    #[test]
    fn singular_without_ridge_errors() {
        let a_seen = Matrix::from_rows(&[[1.0, 0.0], [2.0, 0.0]]).unwrap();
        let a_u = Matrix::from_rows(&[[1.0, 1.0]]).unwrap();
        let err = ridge_correlation(&a_seen, &a_u, 0.0).unwrap_err();
        assert!(err.to_string().contains("lambda > 0"));
        assert!(ridge_correlation(&a_seen, &a_u, 1.0).is_ok());
    }

    #[test]
    fn prototypes() {
        let lat = Matrix::from_rows(&[[0.0, 0.0], [2.0, 2.0], [5.0, 1.0]]).unwrap();
        let p = latent_prototypes_seen(&lat, &[0, 0, 1], &names(2, "s")).unwrap();
        assert_eq!(p.vectors.row(0), &[1.0, 1.0]);
        assert_eq!(p.vectors.row(1), &[5.0, 1.0]);
        let err = latent_prototypes_seen(&lat, &[0, 0, 0], &names(2, "s")).unwrap_err();
        assert!(err.to_string().contains("s1"));

        let corr = CorrelationMatrix {
            coefficients: Matrix::from_rows(&[[0.0, 1.0], [0.0, 0.0]]).unwrap(),
            lambda: 1.0,
        };
        let u = latent_prototypes_unseen(&corr, &p, &names(2, "u")).unwrap();
        assert_eq!(u.vectors.row(0), p.vectors.row(1));
        assert_eq!(u.vectors.row(1), &[0.0, 0.0]);
    }

    #[test]
    fn cosine_cases() {
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let a = [0.3, -1.2, 2.0];
        let b = [1.1, 0.4, -0.7];
        let s = cosine_similarity(&a, &b).unwrap();
        let a7: Vec<f64> = a.iter().map(|x| x * 7.0).collect();
        assert!((cosine_similarity(&a7, &b).unwrap() - s).abs() < 1e-12);
        assert!(cosine_similarity(&[0.0, 0.0], &b[..2]).is_err());
    }

    #[test]
    fn latent_and_combined_rules() {
        let protos = PrototypeSet {
            class_names: names(3, "u"),
            vectors: Matrix::from_rows(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).unwrap(),
            kind: PrototypeKind::Latent,
        };
        assert_eq!(predict_latent(&[0.0, 1.0, 0.0], &protos).unwrap(), 1);
        assert_eq!(predict_latent(&[0.1, 3.0, 0.2], &protos).unwrap(), 1);
        // exact tie: first wins
        assert_eq!(predict_latent(&[1.0, 1.0, 0.0], &protos).unwrap(), 0);

        let attrs = Matrix::filled(3, 2, 1.0);
        let q = [0.2, 0.1, 0.9];
        assert_eq!(
            predict_combined(&[0.5, 0.5], &q, &attrs, &protos).unwrap(),
            predict_latent(&q, &protos).unwrap()
        );
        let attrs = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]).unwrap();
        assert_eq!(predict_combined(&[0.0, 1.0], &[0.0, 1.0, 0.0], &attrs, &protos).unwrap(), 1);
    }
}
