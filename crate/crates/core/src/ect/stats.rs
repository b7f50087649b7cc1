use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::attribute_space::CorrelationMatrix;
use crate::error::{Error, Result};
use crate::exec;
use crate::numfmt;
use crate::tensor::Matrix;

/// Per-class feature mean and population standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassFeatureStats {
    pub class_names: Vec<String>,
    #[serde(with = "numfmt::matrix17")]
    pub means: Matrix,
    #[serde(with = "numfmt::matrix17")]
    pub stds: Matrix,
}

impl ClassFeatureStats {
    pub fn dim(&self) -> usize {
        self.means.cols()
    }
}

/// Two-pass mean and population std for each class in `class_names`.
pub fn class_feature_stats(features: &Matrix, labels: &[usize], class_names: &[String]) -> Result<ClassFeatureStats> {
    if labels.len() != features.rows() {
        return Err(Error::shape("class_feature_stats labels", features.rows(), labels.len()));
    }
    let (c, d) = (class_names.len(), features.cols());
    let mut counts = vec![0usize; c];
    let mut means = Matrix::zeros(c, d);
    for (row, &y) in features.row_iter().zip(labels) {
        if y >= c {
            return Err(Error::Invalid(format!("label index {y} out of range")));
        }
        counts[y] += 1;
        means.row_mut(y).iter_mut().zip(row).for_each(|(m, x)| *m += x);
    }
    for (k, &n) in counts.iter().enumerate() {
        if n < 2 {
            return Err(Error::Invalid(format!(
                "class '{}' has {n} samples; at least 2 are needed for a standard deviation",
                class_names[k]
            )));
        }
        means.row_mut(k).iter_mut().for_each(|m| *m /= n as f64);
    }
    let mut stds = Matrix::zeros(c, d);
    for (row, &y) in features.row_iter().zip(labels) {
        let mu = means.row(y).to_vec();
        stds.row_mut(y)
            .iter_mut()
            .zip(row.iter().zip(mu))
            .for_each(|(s, (x, m))| *s += (x - m) * (x - m));
    }
    for (k, &n) in counts.iter().enumerate() {
        stds.row_mut(k).iter_mut().for_each(|s| *s = (*s / n as f64).sqrt());
    }
    Ok(ClassFeatureStats {
        class_names: class_names.to_vec(),
        means,
        stds,
    })
}

/// Applies the attribute correlation to seen-class statistics. Stds that
/// come out negative (from negative coefficients) are clamped to zero.
pub fn transfer_stats(
    corr: &CorrelationMatrix,
    seen: &ClassFeatureStats,
    unseen_names: &[String],
) -> Result<ClassFeatureStats> {
    if unseen_names.len() != corr.num_unseen() {
        return Err(Error::shape("transfer_stats unseen classes", corr.num_unseen(), unseen_names.len()));
    }
    let means = corr.transfer(&seen.means)?;
    let stds = corr.transfer(&seen.stds)?.map(|s| s.max(0.0));
    Ok(ClassFeatureStats {
        class_names: unseen_names.to_vec(),
        means,
        stds,
    })
}

/// Gaussian samples around transferred class statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct VirtualFeatureSet {
    pub stats: ClassFeatureStats,
    pub n_per_class: usize,
    /// `(classes * n_per_class) x d`, grouped by class.
    pub features: Matrix,
    /// Class index of each row.
    pub labels: Vec<usize>,
}

/// Draws `n_per_class` samples from `N(mean, diag(std²))` for every class.
/// Each class uses its own stream derived from `seed`, so the output does
/// not depend on evaluation order.
pub fn synth_virtual_features(stats: &ClassFeatureStats, n_per_class: usize, seed: u64) -> Result<VirtualFeatureSet> {
    if n_per_class == 0 {
        return Err(Error::Invalid("n_per_class must be at least 1".into()));
    }
    let d = stats.dim();
    let blocks = exec::map_range(stats.class_names.len(), |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64);
        let (mu, sd) = (stats.means.row(c), stats.stds.row(c));
        let mut block = Vec::with_capacity(n_per_class * d);
        for _ in 0..n_per_class {
            for j in 0..d {
                let z: f64 = StandardNormal.sample(&mut rng);
                block.push(mu[j] + sd[j] * z);
            }
        }
        block
    });
    let rows = stats.class_names.len() * n_per_class;
    let features = Matrix::new(rows, d, blocks.concat())?;
    let labels = (0..rows).map(|r| r / n_per_class).collect();
    Ok(VirtualFeatureSet {
        stats: stats.clone(),
        n_per_class,
        features,
        labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    #[test]
    fn two_point_stats() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [2.0, 2.0]]).unwrap();
        let s = class_feature_stats(&x, &[0, 0], &names(1)).unwrap();
        assert_eq!(s.means.row(0), &[1.0, 1.0]);
        assert_eq!(s.stds.row(0), &[1.0, 1.0]);
    }

    #[test]
    fn singleton_class_rejected() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        assert!(class_feature_stats(&x, &[0, 0, 1], &names(2)).is_err());
    }

    #[test]
    fn negative_std_is_clamped() {
        let seen = ClassFeatureStats {
            class_names: names(2),
            means: Matrix::from_rows(&[[1.0], [2.0]]).unwrap(),
            stds: Matrix::from_rows(&[[1.0], [3.0]]).unwrap(),
        };
        let corr = CorrelationMatrix {
            coefficients: Matrix::from_rows(&[[1.0, -1.0]]).unwrap(),
            lambda: 1.0,
        };
        let u = transfer_stats(&corr, &seen, &names(1)).unwrap();
        assert_eq!(u.means.row(0), &[-1.0]);
        assert_eq!(u.stds.row(0), &[0.0]);
    }

    #[test]
    fn zero_std_reproduces_mean() {
        let stats = ClassFeatureStats {
            class_names: names(2),
            means: Matrix::from_rows(&[[0.25, -3.0], [1.5, 7.0]]).unwrap(),
            stds: Matrix::zeros(2, 2),
        };
        let v = synth_virtual_features(&stats, 4, 1).unwrap();
        for (row, &y) in v.features.row_iter().zip(&v.labels) {
            assert_eq!(row, stats.means.row(y));
        }
        assert_eq!(v, synth_virtual_features(&stats, 4, 1).unwrap());
    }
}
