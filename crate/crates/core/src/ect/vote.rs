use std::collections::BTreeMap;

/// Vote threshold used while reliable labels are plentiful.
pub const HIGH_THRESHOLD: usize = 4;
/// Relaxed vote threshold.
pub const LOW_THRESHOLD: usize = 3;

/// The class reaching `threshold` votes, if exactly one does.
pub fn vote_label<T: Ord + Clone>(votes: &[T], threshold: usize) -> Option<T> {
    let mut counts: BTreeMap<&T, usize> = BTreeMap::new();
    for v in votes {
        *counts.entry(v).or_default() += 1;
    }
    let mut winners = counts.into_iter().filter(|&(_, n)| n >= threshold);
    match (winners.next(), winners.next()) {
        (Some((label, _)), None) => Some(label.clone()),
        _ => None,
    }
}

/// [`HIGH_THRESHOLD`] when more than half the samples are reliable under
/// it, [`LOW_THRESHOLD`] otherwise.
pub fn choose_threshold(reliable_at_high: usize, n_samples: usize) -> usize {
    choose_threshold_between(reliable_at_high, n_samples, HIGH_THRESHOLD, LOW_THRESHOLD)
}

pub fn choose_threshold_between(reliable_at_high: usize, n_samples: usize, high: usize, low: usize) -> usize {
    if 2 * reliable_at_high > n_samples {
        high
    } else {
        low
    }
}

/// One sample's winning class and how many predictors chose it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Assignment {
    pub class: usize,
    pub votes: usize,
}

/// Votes every sample. `votes[p][i]` is predictor `p`'s class for sample `i`.
pub fn assign_votes(votes: &[Vec<usize>], threshold: usize) -> Vec<Option<Assignment>> {
    let n = votes.first().map_or(0, Vec::len);
    (0..n)
        .map(|i| {
            let column: Vec<usize> = votes.iter().map(|v| v[i]).collect();
            vote_label(&column, threshold).map(|class| Assignment {
                class,
                votes: column.iter().filter(|&&c| c == class).count(),
            })
        })
        .collect()
}

/// Fraction of assigned samples whose class matches `truth`, over samples
/// with known truth. `None` when no such sample is assigned.
pub fn assignment_precision(assignments: &[Option<Assignment>], truth: &[Option<usize>]) -> Option<f64> {
    let (mut hit, mut total) = (0usize, 0usize);
    for (a, t) in assignments.iter().zip(truth) {
        if let (Some(a), Some(t)) = (a, t) {
            total += 1;
            hit += usize::from(a.class == *t);
        }
    }
    (total > 0).then(|| hit as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(vote_label(&["A", "A", "A", "A", "B"], 4), Some("A"));
        assert_eq!(vote_label(&["A", "A", "A", "B", "B"], 4), None);
        assert_eq!(vote_label(&["A", "A", "A", "B", "B"], 3), Some("A"));
        assert_eq!(vote_label(&["A", "A", "B", "B", "C"], 2), None);
    }

    #[test]
    fn threshold_boundary() {
        assert_eq!(choose_threshold(60, 100), 4);
        assert_eq!(choose_threshold(50, 100), 3);
        assert_eq!(choose_threshold(0, 7), 3);
    }

    #[test]
    fn unanimous_panel_marks_everything() {
        let row = vec![2, 0, 1, 1];
        let votes = vec![row.clone(); 5];
        let a = assign_votes(&votes, 4);
        assert!(a.iter().zip(&row).all(|(a, &c)| *a == Some(Assignment { class: c, votes: 5 })));
    }
}
