use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{SfLfgaaModel, Variant};
use crate::dataset::{label_indices, ClassAttributeTable, FeatureDataset, SplitSpec};
use crate::error::{Error, Result};
use crate::tensor::loss::{attention_softmax, bce_with_logits, combined_loss, softmax_rows_backward, triplet_batch_hard};
use crate::tensor::{flatten_grads, Adam, Matrix};

/// Labeled training rows plus the attribute rows of their classes.
#[derive(Clone, Debug)]
pub struct TrainingSet {
    pub features: Matrix,
    /// Indices into `class_names`.
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
    /// `C x K`, row order of `class_names`.
    pub class_attributes: Matrix,
}

impl TrainingSet {
    pub fn new(features: Matrix, labels: Vec<usize>, class_names: Vec<String>, class_attributes: Matrix) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::shape("TrainingSet labels", features.rows(), labels.len()));
        }
        if class_attributes.rows() != class_names.len() {
            return Err(Error::shape("TrainingSet attributes", class_names.len(), class_attributes.rows()));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= class_names.len()) {
            return Err(Error::Invalid(format!("label index {bad} out of range")));
        }
        if features.rows() == 0 {
            return Err(Error::EmptyInput("training set has no rows".into()));
        }
        Ok(TrainingSet {
            features,
            labels,
            class_names,
            class_attributes,
        })
    }

    /// Seen-class labeled rows of a bundle.
    pub fn from_bundle(features: &FeatureDataset, table: &ClassAttributeTable, split: &SplitSpec) -> Result<Self> {
        let rows = features.rows_labeled_in(&split.seen);
        if rows.is_empty() {
            return Err(Error::EmptyInput("no labeled seen-class rows to train on".into()));
        }
        let subset = features.subset(&rows);
        let labels = label_indices(&subset.labels, &split.seen)
            .into_iter()
            .map(|l| l.expect("filtered to seen"))
            .collect();
        TrainingSet::new(subset.features, labels, split.seen.clone(), table.rows_for(&split.seen)?)
    }
}

/// Maps attribute rows into `[0, 1]` for use as BCE targets. Tables already
/// inside the unit interval are used as-is; otherwise `(a + 1) / 2`, clamped.
pub fn bce_targets(attrs: &Matrix) -> Matrix {
    if attrs.data().iter().all(|v| (0.0..=1.0).contains(v)) {
        attrs.clone()
    } else {
        attrs.map(|a| ((a + 1.0) / 2.0).clamp(0.0, 1.0))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub lat: f64,
    pub att: f64,
    pub bce: f64,
    pub total: f64,
    pub skipped_batches: usize,
    pub feedback_active: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,L_lat,L_att,L_BCE,total\n");
        for e in &self.epochs {
            s.push_str(&format!("{},{},{},{},{}\n", e.epoch, e.lat, e.att, e.bce, e.total));
        }
        s
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub(crate) struct LossParts {
    pub lat: f64,
    pub att: f64,
    pub bce: f64,
    pub total: f64,
}

/// Loss and gradients (in `params_mut` order) for one batch.
pub(crate) fn loss_and_grads(
    model: &SfLfgaaModel,
    x: &Matrix,
    labels: &[usize],
    class_attrs: &Matrix,
    targets: &Matrix,
    gamma: f64,
) -> Result<(LossParts, Vec<Vec<f64>>)> {
    let cfg = &model.config;
    let k = model.attr_dim();
    let f = model.forward_with_gamma(x, gamma)?;

    let (lat, mut d_adj) = triplet_batch_hard(&f.adjusted, labels, cfg.margin)?;
    let (att, ga) = attention_softmax(&f.sem_pred, &f.attention, class_attrs, labels)?;
    let d_sem = ga.sem_pred.scale(cfg.beta1);
    let d_attn = ga.attention.scale(cfg.beta1);

    let d_att_logits = softmax_rows_backward(&f.attention, &d_attn);
    let (g_att, d_att_in) = model.att_head.backward(&f.att_input, &d_att_logits)?;
    let (h1w, h2w) = (f.h1.cols(), f.h2.cols());
    let dh1_att = d_att_in.columns(0..h1w);
    let dh2_att = d_att_in.columns(h1w..h1w + h2w);
    let d_att_lat = d_att_in.columns(h1w + h2w..h1w + h2w + k);

    let mut d_latent_direct = None;
    if cfg.attention_uses_adjusted {
        d_adj.add_assign(&d_att_lat)?;
    } else {
        d_latent_direct = Some(d_att_lat);
    }

    let mut bce = 0.0;
    let mut g_sem = None;
    let mut d_latent = d_adj.clone();
    let mut dh2_sem = None;
    if let (Some(sem), Some(embed), Some(logits), Some(hidden)) =
        (&model.sem_embed, &f.embed, &f.embed_logits, &f.embed_hidden)
    {
        d_latent = d_adj.scale(1.0 - gamma);
        let batch_targets = targets.select_rows(labels);
        let (b, g_bce) = bce_with_logits(logits, &batch_targets)?;
        bce = b;
        let mut d_logits = g_bce.scale(cfg.beta2);
        for ((dl, &da), &e) in d_logits.data_mut().iter_mut().zip(d_adj.data()).zip(embed.data()) {
            *dl += gamma * da * e * (1.0 - e);
        }
        let acts = [hidden.clone(), logits.clone()];
        let (grads, dh2) = sem.backward(&f.h2, &acts, vec![None, Some(d_logits)])?;
        g_sem = Some(grads);
        dh2_sem = Some(dh2);
    }
    if let Some(extra) = d_latent_direct {
        d_latent.add_assign(&extra)?;
    }

    let d_aug = Matrix::hstack(&[&d_sem, &d_latent])?;
    let (g_aug, mut dh2) = model.aug_head.backward(&f.h2, &d_aug)?;
    dh2.add_assign(&dh2_att)?;
    if let Some(extra) = dh2_sem {
        dh2.add_assign(&extra)?;
    }
    let (g_trunk, _) = model
        .trunk
        .backward(x, &[f.h1.clone(), f.h2.clone()], vec![Some(dh1_att), Some(dh2)])?;

    let mut grads: Vec<Vec<f64>> = flatten_grads(&g_trunk).into_iter().map(<[f64]>::to_vec).collect();
    grads.push(g_aug.weights.into_data());
    grads.push(g_aug.bias);
    grads.push(g_att.weights.into_data());
    grads.push(g_att.bias);
    if let Some(gs) = g_sem {
        grads.extend(flatten_grads(&gs).into_iter().map(<[f64]>::to_vec));
    }

    let w_bce = if model.sem_embed.is_some() { cfg.beta2 } else { 0.0 };
    let total = combined_loss(lat, att, bce, cfg.beta1, w_bce);
    Ok((LossParts { lat, att, bce, total }, grads))
}

/// Mini-batch Adam training. Feedback is gated off for the first
/// `warmup_epochs` epochs. Batches without a valid triplet are skipped and
/// counted in the history.
pub fn train(model: &mut SfLfgaaModel, data: &TrainingSet) -> Result<TrainHistory> {
    let cfg = model.config.clone();
    cfg.validate()?;
    if data.features.cols() != model.input_dim() {
        return Err(Error::shape("training features", model.input_dim(), data.features.cols()));
    }
    if data.class_attributes.cols() != model.attr_dim() {
        return Err(Error::shape("class attributes", model.attr_dim(), data.class_attributes.cols()));
    }
    let targets = bce_targets(&data.class_attributes);
    let shapes = model.param_shapes();
    let mut adam = Adam::new(cfg.adam(), &shapes);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9E37_79B9_7F4A_7C15);
    let mut order: Vec<usize> = (0..data.features.rows()).collect();
    let mut history = TrainHistory::default();

    for epoch in 0..cfg.epochs {
        let feedback_active = epoch >= cfg.warmup_epochs && model.variant == Variant::SfLfgaa;
        let gamma = if feedback_active { cfg.gamma } else { 0.0 };
        order.shuffle(&mut shuffle_rng);
        let mut sums = LossParts::default();
        let mut used = 0usize;
        let mut skipped = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let x = data.features.select_rows(batch);
            let labels: Vec<usize> = batch.iter().map(|&i| data.labels[i]).collect();
            let (parts, grads) = match loss_and_grads(model, &x, &labels, &data.class_attributes, &targets, gamma) {
                Ok(v) => v,
                Err(Error::DegenerateBatch) => {
                    skipped += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let grad_refs: Vec<&[f64]> = grads.iter().map(Vec::as_slice).collect();
            adam.step(&mut model.params_mut(), &grad_refs)?;
            sums.lat += parts.lat;
            sums.att += parts.att;
            sums.bce += parts.bce;
            sums.total += parts.total;
            used += 1;
        }
        let denom = used.max(1) as f64;
        history.epochs.push(EpochStats {
            epoch: epoch + 1,
            lat: sums.lat / denom,
            att: sums.att / denom,
            bce: sums.bce / denom,
            total: sums.total / denom,
            skipped_batches: skipped,
            feedback_active,
        });
    }
    Ok(history)
}

/// Builds a model, trains it on the seen-class rows of a bundle.
pub fn train_on_bundle(
    features: &FeatureDataset,
    table: &ClassAttributeTable,
    split: &SplitSpec,
    config: &crate::model::TrainConfig,
    variant: Variant,
) -> Result<(SfLfgaaModel, TrainHistory)> {
    let data = TrainingSet::from_bundle(features, table, split)?;
    let mut model = SfLfgaaModel::new(features.dim(), table.dim(), config.clone(), variant)?;
    let history = train(&mut model, &data)?;
    Ok((model, history))
}
