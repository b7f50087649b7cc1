//! Training objectives with analytic gradients.

use crate::error::{Error, Result};
use crate::tensor::Matrix;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Batch-hard triplet loss on squared Euclidean distances.
///
/// For every anchor that has at least one positive and one negative in the
/// batch, the farthest positive and nearest negative are selected (first
/// index on ties) and `[d²(a,p) - d²(a,n) + margin]₊` is averaged over those
/// anchors. Returns the loss and its gradient with respect to `latents`.
pub fn triplet_batch_hard(latents: &Matrix, labels: &[usize], margin: f64) -> Result<(f64, Matrix)> {
    let n = latents.rows();
    if labels.len() != n {
        return Err(Error::shape("triplet labels", n, labels.len()));
    }
    if !(margin > 0.0) {
        return Err(Error::Invalid(format!("triplet margin must be > 0, got {margin}")));
    }
    let dist: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| sq_dist(latents.row(i), latents.row(j))).collect())
        .collect();

    let mut triplets = Vec::new();
    for i in 0..n {
        let mut pos: Option<usize> = None;
        let mut neg: Option<usize> = None;
        for j in 0..n {
            if j == i {
                continue;
            }
            if labels[j] == labels[i] {
                if pos.is_none_or(|p| dist[i][j] > dist[i][p]) {
                    pos = Some(j);
                }
            } else if neg.is_none_or(|q| dist[i][j] < dist[i][q]) {
                neg = Some(j);
            }
        }
        if let (Some(p), Some(q)) = (pos, neg) {
            triplets.push((i, p, q));
        }
    }
    if triplets.is_empty() {
        return Err(Error::DegenerateBatch);
    }

    let scale = 1.0 / triplets.len() as f64;
    let mut loss = 0.0;
    let mut grad = Matrix::zeros(n, latents.cols());
    for &(a, p, q) in &triplets {
        let h = dist[a][p] - dist[a][q] + margin;
        if h <= 0.0 {
            continue;
        }
        loss += h * scale;
        for k in 0..latents.cols() {
            let (za, zp, zq) = (latents[(a, k)], latents[(p, k)], latents[(q, k)]);
            grad[(a, k)] += 2.0 * (zq - zp) * scale;
            grad[(p, k)] += -2.0 * (za - zp) * scale;
            grad[(q, k)] += 2.0 * (za - zq) * scale;
        }
    }
    Ok((loss, grad))
}

/// Gradients of [`attention_softmax`].
#[derive(Clone, Debug)]
pub struct AttentionGrads {
    pub sem_pred: Matrix,
    pub attention: Matrix,
}

/// Attention-weighted softmax cross-entropy over candidate classes.
///
/// Class score `s_y = Σ_k sem_pred[i,k] · attention[i,k] · attrs[y,k]`; the
/// loss is the mean negative log-probability of the true class.
pub fn attention_softmax(
    sem_pred: &Matrix,
    attention: &Matrix,
    class_attrs: &Matrix,
    labels: &[usize],
) -> Result<(f64, AttentionGrads)> {
    let (n, k) = sem_pred.shape();
    if attention.shape() != (n, k) {
        return Err(Error::shape("attention loss", format!("{n}x{k}"), format!("{:?}", attention.shape())));
    }
    if class_attrs.cols() != k {
        return Err(Error::shape("attention loss attributes", k, class_attrs.cols()));
    }
    if labels.len() != n {
        return Err(Error::shape("attention loss labels", n, labels.len()));
    }
    let c = class_attrs.rows();
    if let Some(&bad) = labels.iter().find(|&&y| y >= c) {
        return Err(Error::Invalid(format!("label index {bad} outside {c} candidate classes")));
    }
    let inv_n = 1.0 / n.max(1) as f64;
    let mut loss = 0.0;
    let mut g_sem = Matrix::zeros(n, k);
    let mut g_att = Matrix::zeros(n, k);
    let mut weighted = vec![0.0; k];
    let mut probs = vec![0.0; c];
    for i in 0..n {
        let (s, p) = (sem_pred.row(i), attention.row(i));
        for ((w, a), b) in weighted.iter_mut().zip(s).zip(p) {
            *w = a * b;
        }
        for (y, pr) in probs.iter_mut().enumerate() {
            *pr = crate::tensor::dot(&weighted, class_attrs.row(y));
        }
        let max = probs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = probs.iter().map(|v| (v - max).exp()).sum();
        let log_z = max + z.ln();
        loss -= (probs[labels[i]] - log_z) * inv_n;
        for pr in probs.iter_mut() {
            *pr = (*pr - log_z).exp();
        }
        probs[labels[i]] -= 1.0;
        // d score_y / d (s_k p_k) = attrs[y,k]
        for kk in 0..k {
            let dw: f64 = (0..c).map(|y| probs[y] * class_attrs[(y, kk)]).sum::<f64>() * inv_n;
            g_sem[(i, kk)] = dw * p[kk];
            g_att[(i, kk)] = dw * s[kk];
        }
    }
    Ok((
        loss,
        AttentionGrads {
            sem_pred: g_sem,
            attention: g_att,
        },
    ))
}

/// Element-mean binary cross-entropy of `logistic(logits)` against `targets`.
pub fn bce_with_logits(logits: &Matrix, targets: &Matrix) -> Result<(f64, Matrix)> {
    if logits.shape() != targets.shape() {
        return Err(Error::shape(
            "bce",
            format!("{:?}", logits.shape()),
            format!("{:?}", targets.shape()),
        ));
    }
    if let Some(t) = targets.data().iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::Invalid(format!("BCE target {t} outside [0, 1]")));
    }
    let inv = 1.0 / logits.data().len().max(1) as f64;
    let mut loss = 0.0;
    let grad = logits.zip_with(targets, |z, t| (logistic(z) - t) * inv)?;
    for (&z, &t) in logits.data().iter().zip(targets.data()) {
        loss += (z.max(0.0) - z * t + (-z.abs()).exp().ln_1p()) * inv;
    }
    Ok((loss, grad))
}

/// `lat + w_att·att + w_bce·bce`.
pub fn combined_loss(lat: f64, att: f64, bce: f64, w_att: f64, w_bce: f64) -> f64 {
    lat + w_att * att + w_bce * bce
}

pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Row-wise softmax.
pub fn softmax_rows(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    let cols = m.cols();
    for r in 0..m.rows() {
        let row = out.row_mut(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for x in row.iter_mut() {
            *x = (*x - max).exp();
            z += *x;
        }
        row.iter_mut().for_each(|x| *x /= z);
        debug_assert_eq!(row.len(), cols);
    }
    out
}

/// Backpropagates through a row-wise softmax given its output `p` and `dL/dp`.
pub fn softmax_rows_backward(p: &Matrix, grad_p: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(p.rows(), p.cols());
    for r in 0..p.rows() {
        let (pr, gr) = (p.row(r), grad_p.row(r));
        let s: f64 = pr.iter().zip(gr).map(|(a, b)| a * b).sum();
        for (o, (a, b)) in out.row_mut(r).iter_mut().zip(pr.iter().zip(gr)) {
            *o = a * (b - s);
        }
    }
    out
}
