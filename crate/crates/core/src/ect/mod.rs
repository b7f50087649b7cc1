//! Transductive ensemble co-training.
//!
//! Two networks with different trunk widths provide two feature views of
//! the data. Seen-class feature statistics are transferred to the unseen
//! classes through the attribute correlation and sampled to produce
//! virtual unseen-class features, on which three linear regressors per view
//! are fitted. The resulting eight predictors are ranked on held-out seen
//! samples, the best five vote on the unlabeled pool, and samples with
//! enough agreeing votes become pseudo-labeled training data for the next
//! round.

mod panel;
mod run;
mod stats;
mod vote;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use panel::{
    build_panel, score_predictors, select_best_predictors, Panel, PanelEntry, PredictorId, Target, View, PANEL_SIZE,
};
pub use run::{run_ect, EctIteration, EctManifest, EctOutcome, PredictorScore, PseudoLabel, PseudoLabelSet};
pub use stats::{class_feature_stats, synth_virtual_features, transfer_stats, ClassFeatureStats, VirtualFeatureSet};
pub use vote::{
    assign_votes, assignment_precision, choose_threshold, choose_threshold_between, vote_label, Assignment,
    HIGH_THRESHOLD, LOW_THRESHOLD,
};

/// Hidden widths of one trunk.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrunkDims {
    pub h1: usize,
    pub h2: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EctConfig {
    /// Virtual samples drawn per unseen class.
    pub n_virtual: usize,
    pub max_iterations: usize,
    pub high_threshold: usize,
    pub low_threshold: usize,
    /// First iteration (1-based) that always uses `low_threshold`.
    pub rule_switch_iteration: usize,
    /// Predictors kept out of the panel of eight.
    pub keep: usize,
    /// Seed for the validation split and virtual features.
    pub seed: u64,
    /// Share of each seen class held out for ranking predictors.
    pub val_fraction: f64,
    pub view_a: TrunkDims,
    pub view_b: TrunkDims,
    pub anchoring: Anchoring,
}

/// Where the unseen-class prototypes come from once pseudo-labels exist.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Anchoring {
    /// Always use the prototypes transferred from seen classes.
    Off,
    /// A class with pseudo-labels uses the mean latent of its pseudo-labeled
    /// rows; the others keep the transferred prototype.
    PerClass,
    /// Like `PerClass`, but only once every unseen class has pseudo-labels,
    /// so all unseen prototypes always come from the same estimator.
    AllClasses,
}

impl Default for EctConfig {
    fn default() -> Self {
        EctConfig {
            n_virtual: 100,
            max_iterations: 5,
            high_threshold: HIGH_THRESHOLD,
            low_threshold: LOW_THRESHOLD,
            rule_switch_iteration: 4,
            keep: 5,
            seed: 7,
            val_fraction: 0.2,
            view_a: TrunkDims { h1: 256, h2: 128 },
            view_b: TrunkDims { h1: 128, h2: 64 },
            anchoring: Anchoring::AllClasses,
        }
    }
}

impl EctConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Invalid(msg));
        if self.n_virtual == 0 || self.max_iterations == 0 {
            return bad("n_virtual and max_iterations must be >= 1".into());
        }
        if self.keep == 0 || self.keep > PANEL_SIZE {
            return bad(format!("keep must lie in 1..={PANEL_SIZE}, got {}", self.keep));
        }
        if self.low_threshold == 0 || self.low_threshold > self.high_threshold || self.high_threshold > self.keep {
            return bad(format!(
                "thresholds must satisfy 1 <= low ({}) <= high ({}) <= keep ({})",
                self.low_threshold, self.high_threshold, self.keep
            ));
        }
        if self.rule_switch_iteration == 0 || self.rule_switch_iteration > self.max_iterations {
            return bad(format!(
                "rule_switch_iteration ({}) must lie in 1..=max_iterations ({})",
                self.rule_switch_iteration, self.max_iterations
            ));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return bad(format!("val_fraction must lie in (0, 1), got {}", self.val_fraction));
        }
        for dims in [self.view_a, self.view_b] {
            if dims.h1 == 0 || dims.h2 == 0 {
                return bad("trunk widths must be >= 1".into());
            }
        }
        Ok(())
    }
}
