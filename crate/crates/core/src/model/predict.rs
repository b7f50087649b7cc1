use serde::{Deserialize, Serialize};

use super::{PredictMode, SfLfgaaModel};
use crate::attribute_space::{
    argmax_first, combined_scores, latent_prototypes_seen, latent_prototypes_unseen, latent_scores,
    ridge_correlation, CorrelationMatrix, PrototypeSet,
};
use crate::dataset::{label_indices, ClassAttributeTable, FeatureDataset, SplitSpec};
use crate::error::{Error, Result};
use crate::exec;
use crate::tensor::Matrix;

/// Predicted classes plus the per-class score matrix (`N x classes`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub classes: Vec<String>,
    pub indices: Vec<usize>,
    pub scores: Matrix,
}

impl Prediction {
    pub fn labels(&self) -> Vec<String> {
        self.indices.iter().map(|&i| self.classes[i].clone()).collect()
    }

    /// Score of the chosen class for each sample.
    pub fn top_scores(&self) -> Vec<f64> {
        self.indices
            .iter()
            .enumerate()
            .map(|(r, &c)| self.scores[(r, c)])
            .collect()
    }
}

/// A trained model with its seen and transferred unseen prototypes.
#[derive(Clone, Debug)]
pub struct ZeroShotPredictor<'m> {
    model: &'m SfLfgaaModel,
    pub correlation: CorrelationMatrix,
    pub seen_prototypes: PrototypeSet,
    pub unseen_prototypes: PrototypeSet,
    pub seen_attributes: Matrix,
    pub unseen_attributes: Matrix,
}

impl<'m> ZeroShotPredictor<'m> {
    /// Builds prototypes from labeled seen-class rows (`seen_labels` index
    /// `seen_names`) and transfers them to the unseen classes.
    pub fn new(
        model: &'m SfLfgaaModel,
        seen_x: &Matrix,
        seen_labels: &[usize],
        seen_names: &[String],
        seen_attributes: Matrix,
        unseen_names: &[String],
        unseen_attributes: Matrix,
    ) -> Result<Self> {
        if seen_x.rows() == 0 {
            return Err(Error::EmptyInput("no seen-class samples for prototype construction".into()));
        }
        let latents = model.latents_for_prototypes(seen_x)?;
        let seen_prototypes = latent_prototypes_seen(&latents, seen_labels, seen_names)?;
        let correlation = ridge_correlation(&seen_attributes, &unseen_attributes, model.config.ridge_lambda)?;
        let unseen_prototypes = latent_prototypes_unseen(&correlation, &seen_prototypes, unseen_names)?;
        Ok(ZeroShotPredictor {
            model,
            correlation,
            seen_prototypes,
            unseen_prototypes,
            seen_attributes,
            unseen_attributes,
        })
    }

    /// Uses the seen-class labeled rows of `seen` and the table/split.
    pub fn from_bundle(
        model: &'m SfLfgaaModel,
        seen: &FeatureDataset,
        table: &ClassAttributeTable,
        split: &SplitSpec,
    ) -> Result<Self> {
        let rows = seen.rows_labeled_in(&split.seen);
        let subset = seen.subset(&rows);
        let labels: Vec<usize> = label_indices(&subset.labels, &split.seen)
            .into_iter()
            .map(|l| l.expect("filtered to seen"))
            .collect();
        ZeroShotPredictor::new(
            model,
            &subset.features,
            &labels,
            &split.seen,
            table.rows_for(&split.seen)?,
            &split.unseen,
            table.rows_for(&split.unseen)?,
        )
    }

    /// Replaces the transferred prototype of every unseen class that has
    /// rows in `x` (`labels` index the unseen classes) by the mean latent of
    /// those rows. Classes without rows keep their transferred prototype.
    pub fn anchor_unseen_prototypes(&mut self, x: &Matrix, labels: &[usize]) -> Result<()> {
        if labels.len() != x.rows() {
            return Err(Error::shape("anchor_unseen_prototypes labels", x.rows(), labels.len()));
        }
        let n = self.unseen_prototypes.len();
        if let Some(&bad) = labels.iter().find(|&&l| l >= n) {
            return Err(Error::Invalid(format!("unseen label index {bad} out of range")));
        }
        if x.rows() == 0 {
            return Ok(());
        }
        let latents = self.model.latents_for_prototypes(x)?;
        for c in 0..n {
            let rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
            if rows.is_empty() {
                continue;
            }
            let mean = latents.select_rows(&rows).column_means();
            self.unseen_prototypes.vectors.row_mut(c).copy_from_slice(&mean);
        }
        Ok(())
    }

    /// Swaps in previously computed unseen-class prototypes, for example
    /// those recorded by a co-training run.
    pub fn with_unseen_prototypes(mut self, protos: PrototypeSet) -> Result<Self> {
        if protos.class_names != self.unseen_prototypes.class_names {
            return Err(Error::Invalid(format!(
                "prototype classes {:?} do not match the split's unseen classes {:?}",
                protos.class_names, self.unseen_prototypes.class_names
            )));
        }
        if protos.vectors.shape() != self.unseen_prototypes.vectors.shape() {
            return Err(Error::shape(
                "unseen prototypes",
                format!("{:?}", self.unseen_prototypes.vectors.shape()),
                format!("{:?}", protos.vectors.shape()),
            ));
        }
        self.unseen_prototypes = protos;
        Ok(self)
    }

    pub fn model(&self) -> &SfLfgaaModel {
        self.model
    }

    /// Zero-shot prediction over the unseen classes.
    pub fn predict(&self, x: &Matrix, mode: PredictMode) -> Result<Prediction> {
        self.score(x, mode, &self.unseen_prototypes, &self.unseen_attributes)
    }

    /// The same decision rule restricted to the seen classes.
    pub fn predict_seen(&self, x: &Matrix, mode: PredictMode) -> Result<Prediction> {
        self.score(x, mode, &self.seen_prototypes, &self.seen_attributes)
    }

    fn score(&self, x: &Matrix, mode: PredictMode, protos: &PrototypeSet, attrs: &Matrix) -> Result<Prediction> {
        let f = self.model.forward_full(x)?;
        let latents = if self.model.config.prototypes_use_adjusted {
            &f.adjusted
        } else {
            &f.latent
        };
        let rows = exec::try_map_range(x.rows(), |i| match mode {
            PredictMode::Latent => latent_scores(latents.row(i), protos),
            PredictMode::Combined => combined_scores(f.sem_pred.row(i), latents.row(i), attrs, protos),
        })?;
        let indices = rows.iter().map(|r| argmax_first(r)).collect();
        Ok(Prediction {
            classes: protos.class_names.clone(),
            indices,
            scores: Matrix::from_rows(&rows)?,
        })
    }
}

impl SfLfgaaModel {
    pub(crate) fn latents_for_prototypes(&self, x: &Matrix) -> Result<Matrix> {
        let f = self.forward_full(x)?;
        Ok(if self.config.prototypes_use_adjusted {
            f.adjusted
        } else {
            f.latent
        })
    }
}

/// Predicts unseen classes for `query`, with prototypes from the labeled
/// seen-class rows of `seen`.
pub fn predict_batch(
    model: &SfLfgaaModel,
    query: &Matrix,
    seen: &FeatureDataset,
    table: &ClassAttributeTable,
    split: &SplitSpec,
    mode: PredictMode,
) -> Result<Prediction> {
    ZeroShotPredictor::from_bundle(model, seen, table, split)?.predict(query, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{gen_synthetic, SynthSpec};
    use crate::model::{TrainConfig, Variant};

    fn setup() -> (SfLfgaaModel, crate::dataset::SyntheticBundle) {
        let bundle = gen_synthetic(&SynthSpec {
            samples_per_class: 10,
            ..SynthSpec::default()
        })
        .unwrap();
        let cfg = TrainConfig {
            h1: 16,
            h2: 8,
            ..TrainConfig::default()
        };
        let model = SfLfgaaModel::new(bundle.features.dim(), bundle.attributes.dim(), cfg, Variant::SfLfgaa).unwrap();
        (model, bundle)
    }

    #[test]
    fn anchoring_replaces_only_classes_with_rows() {
        let (model, b) = setup();
        let mut p = ZeroShotPredictor::from_bundle(&model, &b.features, &b.attributes, &b.split).unwrap();
        let before = p.unseen_prototypes.vectors.clone();
        let pool = b.features.rows_not_in(&b.split.seen);
        let x = b.features.features.select_rows(&pool[..4]);
        p.anchor_unseen_prototypes(&x, &[2, 2, 0, 2]).unwrap();
        let lat = model.latents_for_prototypes(&x).unwrap();
        assert_eq!(p.unseen_prototypes.vectors.row(0), lat.row(2));
        assert_eq!(p.unseen_prototypes.vectors.row(1), before.row(1));
        let mean = lat.select_rows(&[0, 1, 3]).column_means();
        assert_eq!(p.unseen_prototypes.vectors.row(2), mean.as_slice());
    }

    #[test]
    fn bad_anchor_labels_leave_prototypes_untouched() {
        let (model, b) = setup();
        let mut p = ZeroShotPredictor::from_bundle(&model, &b.features, &b.attributes, &b.split).unwrap();
        let before = p.unseen_prototypes.clone();
        let x = b.features.features.select_rows(&[0, 1]);
        assert!(p.anchor_unseen_prototypes(&x, &[0, 3]).is_err());
        assert!(p.anchor_unseen_prototypes(&x, &[0]).is_err());
        assert_eq!(p.unseen_prototypes, before);
    }

    #[test]
    fn recorded_prototypes_must_match_the_split() {
        let (model, b) = setup();
        let p = ZeroShotPredictor::from_bundle(&model, &b.features, &b.attributes, &b.split).unwrap();
        let mut other = p.unseen_prototypes.clone();
        other.class_names.reverse();
        assert!(p.clone().with_unseen_prototypes(other).is_err());
        let same = p.unseen_prototypes.clone();
        let q = p.with_unseen_prototypes(same.clone()).unwrap();
        assert_eq!(q.unseen_prototypes, same);
    }
}
