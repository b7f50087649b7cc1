use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::panel::{build_panel, score_predictors, select_best_predictors, Panel, PredictorId, Target, View};
use super::stats::{class_feature_stats, synth_virtual_features, transfer_stats};
use super::vote::{assign_votes, assignment_precision, choose_threshold_between, Assignment};
use super::{Anchoring, EctConfig, TrunkDims};
use crate::dataset::{label_indices, validate_bundle, ClassAttributeTable, FeatureDataset, SplitSpec};
use crate::error::{Error, Result};
use crate::exec;
use crate::attribute_space::PrototypeSet;
use crate::model::{train, Prediction, SfLfgaaModel, TrainConfig, TrainingSet, Variant, ZeroShotPredictor};
use crate::numfmt;
use crate::tensor::Matrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabel {
    pub sample_id: String,
    pub class: String,
    pub votes: usize,
    /// Iteration (1-based) that produced the label.
    pub iteration: usize,
    /// Class chosen by each retained predictor, in `retained` order.
    pub ballots: Vec<String>,
}

/// Pseudo-labels of the most recent iteration, in pool order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabelSet {
    pub labels: Vec<PseudoLabel>,
}

impl PseudoLabelSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Label count per class, for every class in `classes`.
    pub fn census(&self, classes: &[String]) -> BTreeMap<String, usize> {
        let mut census: BTreeMap<String, usize> = classes.iter().map(|c| (c.clone(), 0)).collect();
        for l in &self.labels {
            *census.entry(l.class.clone()).or_default() += 1;
        }
        census
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictorScore {
    pub id: PredictorId,
    pub name: String,
    /// Held-out seen-class mean per-class top-1.
    #[serde(with = "numfmt::f64_17")]
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EctIteration {
    pub iteration: usize,
    pub threshold: usize,
    /// True when the threshold was fixed by the iteration schedule.
    pub forced: bool,
    pub pool_size: usize,
    /// Rows the networks were trained on this iteration.
    pub train_rows: usize,
    pub reliable_at_high: usize,
    pub reliable_at_low: usize,
    pub scores: Vec<PredictorScore>,
    pub retained: Vec<String>,
    pub primary_view: View,
    pub pseudo_count: usize,
    pub census: BTreeMap<String, usize>,
    /// Pseudo-label accuracy at each threshold on the same votes; only
    /// present when the pool carries ground truth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision_at_high: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision_at_low: Option<f64>,
}

/// Everything needed to audit or repeat a run, minus the network weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EctManifest {
    pub ect: EctConfig,
    pub train: TrainConfig,
    pub primary_view: View,
    pub iterations: Vec<EctIteration>,
    pub pseudo_labels: PseudoLabelSet,
    /// Panel of the last completed iteration.
    pub panel: Option<Panel>,
    /// Unseen-class prototypes of the primary model, anchored on the final
    /// pseudo-labels.
    pub unseen_prototypes: Option<PrototypeSet>,
    pub warnings: Vec<String>,
    /// Set when an iteration failed; earlier iterations are kept.
    pub aborted: Option<String>,
}

pub struct EctOutcome {
    pub primary: SfLfgaaModel,
    pub secondary: Option<SfLfgaaModel>,
    /// Ids of the unlabeled pool rows, in feature-file order.
    pub pool_ids: Vec<String>,
    /// Primary-model predictions for the pool with anchored prototypes.
    pub pool_predictions: Option<Prediction>,
    pub manifest: EctManifest,
}

struct SeenSplit {
    train_rows: Vec<usize>,
    train_labels: Vec<usize>,
    val_rows: Vec<usize>,
    val_labels: Vec<usize>,
}

/// Stratified hold-out: every class keeps at least two training rows.
fn split_seen(labels: &[Option<usize>], n_classes: usize, fraction: f64, seed: u64) -> Result<SeenSplit> {
    let mut by_class = vec![Vec::new(); n_classes];
    for (row, l) in labels.iter().enumerate() {
        if let Some(c) = l {
            by_class[*c].push(row);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = SeenSplit {
        train_rows: Vec::new(),
        train_labels: Vec::new(),
        val_rows: Vec::new(),
        val_labels: Vec::new(),
    };
    for (c, rows) in by_class.iter_mut().enumerate() {
        rows.shuffle(&mut rng);
        let n_val = ((rows.len() as f64 * fraction).round() as usize).min(rows.len().saturating_sub(2));
        let (val, tr) = rows.split_at(n_val);
        let mut val = val.to_vec();
        let mut tr = tr.to_vec();
        val.sort_unstable();
        tr.sort_unstable();
        split.val_labels.extend(std::iter::repeat_n(c, val.len()));
        split.val_rows.extend(val);
        split.train_labels.extend(std::iter::repeat_n(c, tr.len()));
        split.train_rows.extend(tr);
    }
    if split.val_rows.is_empty() {
        return Err(Error::EmptyInput("no seen-class rows could be held out for validation".into()));
    }
    Ok(split)
}

fn view_config(base: &TrainConfig, dims: TrunkDims, seed: u64) -> TrainConfig {
    TrainConfig {
        h1: dims.h1,
        h2: dims.h2,
        seed,
        ..base.clone()
    }
}

struct Context<'a> {
    features: &'a FeatureDataset,
    seen: Vec<String>,
    unseen: Vec<String>,
    seen_attrs: Matrix,
    unseen_attrs: Matrix,
    split: SeenSplit,
    pool_rows: Vec<usize>,
    pool_truth: Vec<Option<usize>>,
    ect: &'a EctConfig,
    train: &'a TrainConfig,
}

struct Round {
    models: [SfLfgaaModel; 2],
    record: EctIteration,
    pseudo: PseudoLabelSet,
    pseudo_rows: Vec<usize>,
    panel: Panel,
}

impl Context<'_> {
    /// Prototypes from the seen training rows, transferred to the unseen
    /// classes, then anchored on pseudo-labeled rows as configured.
    fn predictor<'m>(
        &self,
        model: &'m SfLfgaaModel,
        pseudo: &PseudoLabelSet,
        pseudo_rows: &[usize],
    ) -> Result<ZeroShotPredictor<'m>> {
        let x = &self.features.features;
        let mut p = ZeroShotPredictor::new(
            model,
            &x.select_rows(&self.split.train_rows),
            &self.split.train_labels,
            &self.seen,
            self.seen_attrs.clone(),
            &self.unseen,
            self.unseen_attrs.clone(),
        )?;
        let labels: Vec<usize> = pseudo.labels.iter().map(|l| self.unseen_index(&l.class)).collect();
        let anchor = match self.ect.anchoring {
            Anchoring::Off => false,
            Anchoring::PerClass => true,
            Anchoring::AllClasses => {
                let mut covered = vec![false; self.unseen.len()];
                labels.iter().for_each(|&c| covered[c] = true);
                covered.iter().all(|&c| c)
            }
        };
        if anchor {
            p.anchor_unseen_prototypes(&x.select_rows(pseudo_rows), &labels)?;
        }
        Ok(p)
    }

    fn unseen_index(&self, class: &str) -> usize {
        self.unseen.iter().position(|c| c == class).expect("pseudo class is unseen")
    }

    /// Seen training rows plus pseudo-labeled pool rows. Unseen classes
    /// join the label set only when they hold at least one pseudo-label.
    fn training_set(&self, pseudo: &PseudoLabelSet, pseudo_rows: &[usize]) -> Result<TrainingSet> {
        let mut names = self.seen.clone();
        let mut attrs = self.seen_attrs.clone();
        let mut rows = self.split.train_rows.clone();
        let mut labels = self.split.train_labels.clone();
        let mut extra: BTreeMap<usize, usize> = BTreeMap::new();
        for p in &pseudo.labels {
            extra.entry(self.unseen_index(&p.class)).or_insert(0);
        }
        for (slot, (u, idx)) in extra.iter_mut().enumerate() {
            *idx = self.seen.len() + slot;
            names.push(self.unseen[*u].clone());
            attrs = Matrix::vstack(&[&attrs, &self.unseen_attrs.select_rows(&[*u])])?;
        }
        for (p, &row) in pseudo.labels.iter().zip(pseudo_rows) {
            rows.push(row);
            labels.push(extra[&self.unseen_index(&p.class)]);
        }
        TrainingSet::new(self.features.features.select_rows(&rows), labels, names, attrs)
    }

    fn round(&self, iteration: usize, pseudo: &PseudoLabelSet, pseudo_rows: &[usize]) -> Result<Round> {
        let data = self.training_set(pseudo, pseudo_rows)?;
        let configs = [
            view_config(self.train, self.ect.view_a, self.train.seed),
            view_config(self.train, self.ect.view_b, self.train.seed.wrapping_add(1)),
        ];
        let (d, k) = (self.features.dim(), self.seen_attrs.cols());
        let fit_one = |cfg: &TrainConfig| -> Result<SfLfgaaModel> {
            let mut m = SfLfgaaModel::new(d, k, cfg.clone(), Variant::SfLfgaa)?;
            train(&mut m, &data)?;
            Ok(m)
        };
        let (ma, mb) = exec::join(|| fit_one(&configs[0]), || fit_one(&configs[1]));
        let models = [ma?, mb?];

        let x = &self.features.features;
        let seen_x = x.select_rows(&self.split.train_rows);
        let predictors = models
            .iter()
            .map(|m| self.predictor(m, pseudo, pseudo_rows))
            .collect::<Result<Vec<_>>>()?;

        let mut virtual_sets = Vec::with_capacity(2);
        for (v, p) in predictors.iter().enumerate() {
            let h = p.model().features(&seen_x)?;
            let seen_stats = class_feature_stats(&h, &self.split.train_labels, &self.seen)?;
            let unseen_stats = transfer_stats(&p.correlation, &seen_stats, &self.unseen)?;
            let seed = self.ect.seed.wrapping_add((iteration as u64) << 8 | v as u64);
            virtual_sets.push(synth_virtual_features(&unseen_stats, self.ect.n_virtual, seed)?);
        }
        let panel = build_panel([&virtual_sets[0], &virtual_sets[1]], &self.unseen_attrs)?;
        let nets = [&predictors[0], &predictors[1]];
        let mode = self.train.predict_mode;

        let val_x = x.select_rows(&self.split.val_rows);
        let val_votes = panel.votes(nets, &val_x, Target::Seen, mode)?;
        let scores = score_predictors(&val_votes, &self.split.val_labels, self.seen.len())?;
        let retained = select_best_predictors(&scores, self.ect.keep);
        let primary_view = if scores[1] > scores[0] { View::B } else { View::A };

        let pool_x = x.select_rows(&self.pool_rows);
        let pool_votes = panel.votes(nets, &pool_x, Target::Unseen, mode)?;
        let kept_votes: Vec<Vec<usize>> = retained.iter().map(|&p| pool_votes[p].clone()).collect();
        let at_high = assign_votes(&kept_votes, self.ect.high_threshold);
        let at_low = assign_votes(&kept_votes, self.ect.low_threshold);
        let reliable = |a: &[Option<Assignment>]| a.iter().filter(|x| x.is_some()).count();
        let forced = iteration >= self.ect.rule_switch_iteration;
        let threshold = if forced {
            self.ect.low_threshold
        } else {
            choose_threshold_between(
                reliable(&at_high),
                self.pool_rows.len(),
                self.ect.high_threshold,
                self.ect.low_threshold,
            )
        };
        let chosen = if threshold == self.ect.high_threshold { &at_high } else { &at_low };

        let pseudo_rows: Vec<usize> = chosen
            .iter()
            .enumerate()
            .filter_map(|(i, a)| a.map(|_| self.pool_rows[i]))
            .collect();
        let labels = chosen
            .iter()
            .enumerate()
            .filter_map(|(i, a)| {
                a.map(|a| PseudoLabel {
                    sample_id: self.features.sample_ids[self.pool_rows[i]].clone(),
                    class: self.unseen[a.class].clone(),
                    votes: a.votes,
                    iteration,
                    ballots: kept_votes.iter().map(|v| self.unseen[v[i]].clone()).collect(),
                })
            })
            .collect();
        let pseudo = PseudoLabelSet { labels };
        let ids = panel.entries.iter().map(|e| e.id).collect::<Vec<_>>();
        let record = EctIteration {
            iteration,
            threshold,
            forced,
            pool_size: self.pool_rows.len(),
            train_rows: data.features.rows(),
            reliable_at_high: reliable(&at_high),
            reliable_at_low: reliable(&at_low),
            scores: ids
                .iter()
                .zip(&scores)
                .map(|(&id, &score)| PredictorScore { id, name: id.name(), score })
                .collect(),
            retained: retained.iter().map(|&p| ids[p].name()).collect(),
            primary_view,
            pseudo_count: pseudo.len(),
            census: pseudo.census(&self.unseen),
            precision_at_high: assignment_precision(&at_high, &self.pool_truth),
            precision_at_low: assignment_precision(&at_low, &self.pool_truth),
        };
        Ok(Round {
            models,
            record,
            pseudo,
            pseudo_rows,
            panel,
        })
    }
}

/// Runs the co-training schedule. Rows of `features` that are not labeled
/// with a seen class form the unlabeled pool; any unseen-class labels they
/// carry are used only to report pseudo-label precision.
pub fn run_ect(
    features: &FeatureDataset,
    table: &ClassAttributeTable,
    split: &SplitSpec,
    ect: &EctConfig,
    train_config: &TrainConfig,
) -> Result<EctOutcome> {
    ect.validate()?;
    train_config.validate()?;
    validate_bundle(features, table, split).into_result()?;

    let seen_labels = label_indices(&features.labels, &split.seen);
    let pool_rows = features.rows_not_in(&split.seen);
    let mut warnings = Vec::new();

    if pool_rows.is_empty() {
        warnings.push("no unlabeled rows outside the seen classes; running plain training".to_string());
        let data = TrainingSet::from_bundle(features, table, split)?;
        let cfg = view_config(train_config, ect.view_a, train_config.seed);
        let mut model = SfLfgaaModel::new(features.dim(), table.dim(), cfg, Variant::SfLfgaa)?;
        train(&mut model, &data)?;
        return Ok(EctOutcome {
            primary: model,
            secondary: None,
            pool_ids: Vec::new(),
            pool_predictions: None,
            manifest: EctManifest {
                ect: ect.clone(),
                train: train_config.clone(),
                primary_view: View::A,
                iterations: Vec::new(),
                pseudo_labels: PseudoLabelSet::default(),
                panel: None,
                unseen_prototypes: None,
                warnings,
                aborted: None,
            },
        });
    }

    let pool_truth = label_indices(&features.subset(&pool_rows).labels, &split.unseen);
    let ctx = Context {
        features,
        seen: split.seen.clone(),
        unseen: split.unseen.clone(),
        seen_attrs: table.rows_for(&split.seen)?,
        unseen_attrs: table.rows_for(&split.unseen)?,
        split: split_seen(&seen_labels, split.seen.len(), ect.val_fraction, ect.seed)?,
        pool_rows,
        pool_truth,
        ect,
        train: train_config,
    };

    let mut pseudo = PseudoLabelSet::default();
    let mut pseudo_rows: Vec<usize> = Vec::new();
    let mut iterations = Vec::new();
    let mut last: Option<([SfLfgaaModel; 2], View, Panel)> = None;
    let mut aborted = None;
    for iteration in 1..=ect.max_iterations {
        match ctx.round(iteration, &pseudo, &pseudo_rows) {
            Ok(round) => {
                pseudo_rows = round.pseudo_rows;
                pseudo = round.pseudo;
                let view = round.record.primary_view;
                iterations.push(round.record);
                last = Some((round.models, view, round.panel));
            }
            Err(e) if last.is_some() => {
                aborted = Some(format!("iteration {iteration}: {e}"));
                break;
            }
            Err(e) => return Err(e),
        }
    }

    let ([ma, mb], primary_view, panel) = last.expect("at least one iteration completed");
    let (primary, secondary) = match primary_view {
        View::A => (ma, mb),
        View::B => (mb, ma),
    };
    let final_predictor = ctx.predictor(&primary, &pseudo, &pseudo_rows)?;
    let pool_predictions = final_predictor.predict(&features.features.select_rows(&ctx.pool_rows), train_config.predict_mode)?;
    let unseen_prototypes = final_predictor.unseen_prototypes.clone();
    let pool_ids = ctx.pool_rows.iter().map(|&r| features.sample_ids[r].clone()).collect();
    Ok(EctOutcome {
        primary,
        secondary: Some(secondary),
        pool_ids,
        pool_predictions: Some(pool_predictions),
        manifest: EctManifest {
            ect: ect.clone(),
            train: train_config.clone(),
            primary_view,
            iterations,
            pseudo_labels: pseudo,
            panel: Some(panel),
            unseen_prototypes: Some(unseen_prototypes),
            warnings,
            aborted,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_keeps_two_training_rows() {
        let labels: Vec<Option<usize>> = [0, 0, 0, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1].iter().map(|&c| Some(c)).collect();
        let s = split_seen(&labels, 2, 0.5, 3).unwrap();
        assert_eq!(s.train_labels.iter().filter(|&&c| c == 0).count(), 2);
        assert_eq!(s.val_labels.iter().filter(|&&c| c == 1).count(), 5);
        let mut all: Vec<usize> = s.train_rows.iter().chain(&s.val_rows).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..13).collect::<Vec<_>>());
    }
}
