use serde::{Deserialize, Serialize};

use super::stats::VirtualFeatureSet;
use crate::attribute_space::{argmax_first, cosine_similarity};
use crate::error::{Error, Result};
use crate::eval::mean_per_class_from_indices;
use crate::exec;
use crate::model::{PredictMode, ZeroShotPredictor};
use crate::regressors::{fit, LinearAttributeMap, RegressorKind};
use crate::tensor::Matrix;

/// One of the two feature views, each the trunk output of its own network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum View {
    A,
    B,
}

impl View {
    pub const BOTH: [View; 2] = [View::A, View::B];

    pub fn index(self) -> usize {
        match self {
            View::A => 0,
            View::B => 1,
        }
    }

    fn suffix(self) -> &'static str {
        match self {
            View::A => "a",
            View::B => "b",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum PredictorId {
    Network { view: View },
    Regressor { kind: RegressorKind, view: View },
}

impl PredictorId {
    /// Fixed panel order: both networks, then the regressors on view A,
    /// then on view B.
    pub fn panel_order() -> Vec<PredictorId> {
        let mut ids = vec![PredictorId::Network { view: View::A }, PredictorId::Network { view: View::B }];
        for view in View::BOTH {
            ids.extend(RegressorKind::ALL.iter().map(|&kind| PredictorId::Regressor { kind, view }));
        }
        ids
    }

    pub fn view(self) -> View {
        match self {
            PredictorId::Network { view } | PredictorId::Regressor { view, .. } => view,
        }
    }

    pub fn name(self) -> String {
        match self {
            PredictorId::Network { view } => format!("net_{}", view.suffix()),
            PredictorId::Regressor { kind, view } => format!("{}_{}", kind.name(), view.suffix()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PanelEntry {
    pub id: PredictorId,
    /// Fitted map for regressor entries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<LinearAttributeMap>,
}

/// The eight predictors in panel order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub entries: Vec<PanelEntry>,
}

pub const PANEL_SIZE: usize = 8;

/// Fits the six regressors, each on the virtual features of its view with
/// the attribute row of the virtual class as target.
pub fn build_panel(virtual_sets: [&VirtualFeatureSet; 2], class_attributes: &Matrix) -> Result<Panel> {
    for set in virtual_sets {
        if set.stats.class_names.len() != class_attributes.rows() {
            return Err(Error::shape("panel class attributes", set.stats.class_names.len(), class_attributes.rows()));
        }
    }
    let ids = PredictorId::panel_order();
    let maps = exec::try_map_range(ids.len(), |i| match ids[i] {
        PredictorId::Network { .. } => Ok(None),
        PredictorId::Regressor { kind, view } => {
            let set = virtual_sets[view.index()];
            let targets = class_attributes.select_rows(&set.labels);
            fit(kind, &set.features, &targets)
                .map(Some)
                .map_err(|e| Error::Invalid(format!("fitting {}: {e}", ids[i].name())))
        }
    })?;
    Ok(Panel {
        entries: ids.into_iter().zip(maps).map(|(id, map)| PanelEntry { id, map }).collect(),
    })
}

/// Which label set a panel predicts into.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    Seen,
    Unseen,
}

/// Nearest attribute row by cosine for each predicted attribute vector.
fn nearest_attribute(pred: &Matrix, attrs: &Matrix) -> Result<Vec<usize>> {
    exec::try_map_range(pred.rows(), |i| {
        let scores = attrs
            .row_iter()
            .map(|a| cosine_similarity(pred.row(i), a))
            .collect::<Result<Vec<f64>>>()?;
        Ok(argmax_first(&scores))
    })
}

impl Panel {
    /// `votes[p][i]`: class index chosen by predictor `p` for row `i` of `x`.
    /// Networks use their own decision rule; regressors map the view's trunk
    /// features to attributes and pick the nearest class attribute row.
    pub fn votes(
        &self,
        networks: [&ZeroShotPredictor<'_>; 2],
        x: &Matrix,
        target: Target,
        mode: PredictMode,
    ) -> Result<Vec<Vec<usize>>> {
        let views = [networks[0].model().features(x)?, networks[1].model().features(x)?];
        exec::try_map_range(self.entries.len(), |p| {
            let entry = &self.entries[p];
            let net = networks[entry.id.view().index()];
            let tagged = |e: Error| Error::Invalid(format!("predictor {}: {e}", entry.id.name()));
            match &entry.map {
                None => {
                    let pred = match target {
                        Target::Seen => net.predict_seen(x, mode),
                        Target::Unseen => net.predict(x, mode),
                    };
                    pred.map(|p| p.indices).map_err(tagged)
                }
                Some(map) => {
                    let attrs = match target {
                        Target::Seen => &net.seen_attributes,
                        Target::Unseen => &net.unseen_attributes,
                    };
                    map.predict(&views[entry.id.view().index()])
                        .and_then(|a| nearest_attribute(&a, attrs))
                        .map_err(tagged)
                }
            }
        })
    }
}

/// Mean per-class top-1 of each predictor's votes against `truth`.
pub fn score_predictors(votes: &[Vec<usize>], truth: &[usize], n_classes: usize) -> Result<Vec<f64>> {
    if truth.is_empty() {
        return Err(Error::EmptyInput("validation split is empty".into()));
    }
    Ok(votes
        .iter()
        .map(|v| mean_per_class_from_indices(v, truth, n_classes).unwrap_or(0.0))
        .collect())
}

/// Indices of the `keep` best scores, in panel order. Equal scores favour
/// the earlier predictor.
pub fn select_best_predictors(scores: &[f64], keep: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = order.into_iter().take(keep).collect();
    kept.sort_unstable();
    kept
}
