//! The semantic-feedback latent-attribute network.
//!
//! A shared trunk (`d → h1 → h2`, ReLU) feeds three heads:
//!
//! * an augmented head `h2 → 2K` split into the attribute prediction and the
//!   latent attribute vector,
//! * an attention head over `[h1, h2, latent] → K` normalized by softmax,
//! * the semantic embedding module `h2 → h2 → K` with logistic output.
//!
//! The feedback rule pulls the latent vector toward the semantic embedding:
//! `adjusted = latent + γ (embed − latent)`. The [`Variant::Lfgaa`] baseline
//! has no semantic embedding module and therefore no feedback.

mod config;
mod persist;
mod predict;
mod train;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::loss::{logistic, softmax_rows};
use crate::tensor::{Activation, Dense, Matrix, Mlp};

pub use config::{PredictMode, TrainConfig};
pub use persist::{load_model, save_model, MODEL_FORMAT_VERSION};
pub use predict::{predict_batch, Prediction, ZeroShotPredictor};
pub use train::{bce_targets, train, train_on_bundle, EpochStats, TrainHistory, TrainingSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Full model with the semantic embedding module and feedback.
    SfLfgaa,
    /// Baseline without the semantic embedding module.
    Lfgaa,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SfLfgaaModel {
    pub config: TrainConfig,
    variant: Variant,
    trunk: Mlp,
    aug_head: Dense,
    att_head: Dense,
    sem_embed: Option<Mlp>,
}

/// Every intermediate tensor of one forward pass.
#[derive(Clone, Debug)]
pub struct Forward {
    pub h1: Matrix,
    pub h2: Matrix,
    pub sem_pred: Matrix,
    pub latent: Matrix,
    /// Semantic-embedding output in (0, 1); `None` for the baseline.
    pub embed: Option<Matrix>,
    pub embed_logits: Option<Matrix>,
    pub(crate) embed_hidden: Option<Matrix>,
    /// Latent after feedback at the γ used for this pass.
    pub adjusted: Matrix,
    pub(crate) att_input: Matrix,
    pub attention: Matrix,
}

/// `latent + γ (embed − latent)`.
pub fn apply_feedback(latent: &Matrix, embed: &Matrix, gamma: f64) -> Result<Matrix> {
    if !(gamma >= 0.0) {
        return Err(Error::Invalid(format!("feedback gamma must be >= 0, got {gamma}")));
    }
    latent.zip_with(embed, |s, z| s + gamma * (z - s))
}

impl SfLfgaaModel {
    /// Seeded Glorot initialization. The trunk, augmented head and attention
    /// head are drawn first, so both variants share them for equal seeds.
    pub fn new(input_dim: usize, attr_dim: usize, config: TrainConfig, variant: Variant) -> Result<Self> {
        config.validate()?;
        if input_dim == 0 || attr_dim < 2 {
            return Err(Error::Invalid(format!(
                "need input_dim >= 1 and attr_dim >= 2, got {input_dim} and {attr_dim}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let (h1, h2, k) = (config.h1, config.h2, attr_dim);
        let trunk = Mlp::new(&[input_dim, h1, h2], Activation::Relu, &mut rng);
        let aug_head = Dense::glorot(h2, 2 * k, &mut rng);
        let att_head = Dense::glorot(h1 + h2 + k, k, &mut rng);
        let sem_embed = match variant {
            Variant::SfLfgaa => Some(Mlp::new(&[h2, h2, k], Activation::Identity, &mut rng)),
            Variant::Lfgaa => None,
        };
        Ok(SfLfgaaModel {
            config,
            variant,
            trunk,
            aug_head,
            att_head,
            sem_embed,
        })
    }

    /// All-zero parameters.
    pub fn zeros(input_dim: usize, attr_dim: usize, config: TrainConfig, variant: Variant) -> Result<Self> {
        let mut m = SfLfgaaModel::new(input_dim, attr_dim, config, variant)?;
        for p in m.params_mut() {
            p.iter_mut().for_each(|x| *x = 0.0);
        }
        Ok(m)
    }

    pub(crate) fn from_parts(
        config: TrainConfig,
        variant: Variant,
        trunk: Mlp,
        aug_head: Dense,
        att_head: Dense,
        sem_embed: Option<Mlp>,
    ) -> Result<Self> {
        let dims = trunk.dims();
        if dims.len() != 3 {
            return Err(Error::Format(format!("trunk must have 2 layers, found {}", dims.len() - 1)));
        }
        let (h1, h2) = (dims[1], dims[2]);
        if aug_head.in_dim() != h2 || !aug_head.out_dim().is_multiple_of(2) {
            return Err(Error::Format("augmented head shape does not match trunk".into()));
        }
        let k = aug_head.out_dim() / 2;
        if att_head.in_dim() != h1 + h2 + k || att_head.out_dim() != k {
            return Err(Error::Format("attention head shape does not match trunk".into()));
        }
        match (&sem_embed, variant) {
            (Some(s), Variant::SfLfgaa) if s.input_dim() == h2 && s.output_dim() == k => {}
            (None, Variant::Lfgaa) => {}
            _ => return Err(Error::Format("semantic embedding module does not match variant".into())),
        }
        if config.h1 != h1 || config.h2 != h2 {
            return Err(Error::Format("config hidden dims disagree with stored layers".into()));
        }
        Ok(SfLfgaaModel {
            config,
            variant,
            trunk,
            aug_head,
            att_head,
            sem_embed,
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn input_dim(&self) -> usize {
        self.trunk.input_dim()
    }

    pub fn attr_dim(&self) -> usize {
        self.aug_head.out_dim() / 2
    }

    /// Dimension of the trunk output (the feature view used by ECT).
    pub fn feature_dim(&self) -> usize {
        self.trunk.output_dim()
    }

    pub fn trunk(&self) -> &Mlp {
        &self.trunk
    }

    pub fn aug_head(&self) -> &Dense {
        &self.aug_head
    }

    pub fn att_head(&self) -> &Dense {
        &self.att_head
    }

    pub fn sem_embed(&self) -> Option<&Mlp> {
        self.sem_embed.as_ref()
    }

    /// Parameter tensors in a fixed order: trunk, augmented head, attention
    /// head, semantic embedding module.
    pub(crate) fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.trunk.params_mut();
        out.push(self.aug_head.weights.data_mut());
        out.push(self.aug_head.bias.as_mut_slice());
        out.push(self.att_head.weights.data_mut());
        out.push(self.att_head.bias.as_mut_slice());
        if let Some(s) = self.sem_embed.as_mut() {
            out.extend(s.params_mut());
        }
        out
    }

    pub(crate) fn param_shapes(&mut self) -> Vec<usize> {
        self.params_mut().iter().map(|p| p.len()).collect()
    }

    /// Trunk output for `x` (the `h2` activations).
    pub fn features(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        self.trunk.output(x)
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_dim() {
            return Err(Error::shape("model input", self.input_dim(), x.cols()));
        }
        Ok(())
    }

    /// Forward pass with the trained feedback degree.
    pub fn forward_full(&self, x: &Matrix) -> Result<Forward> {
        self.forward_with_gamma(x, self.config.gamma)
    }

    pub(crate) fn forward_with_gamma(&self, x: &Matrix, gamma: f64) -> Result<Forward> {
        self.check_input(x)?;
        let mut trunk_acts = self.trunk.forward(x)?;
        let h2 = trunk_acts.pop().expect("two trunk layers");
        let h1 = trunk_acts.pop().expect("two trunk layers");
        let k = self.attr_dim();
        let aug = self.aug_head.forward(&h2)?;
        let sem_pred = aug.columns(0..k);
        let latent = aug.columns(k..2 * k);

        let (embed, embed_logits, embed_hidden, adjusted) = match &self.sem_embed {
            Some(sem) => {
                let mut acts = sem.forward(&h2)?;
                let logits = acts.pop().expect("two layers");
                let hidden = acts.pop().expect("two layers");
                let embed = logits.map(logistic);
                let adjusted = apply_feedback(&latent, &embed, gamma)?;
                (Some(embed), Some(logits), Some(hidden), adjusted)
            }
            None => (None, None, None, latent.clone()),
        };

        let att_latent = if self.config.attention_uses_adjusted {
            &adjusted
        } else {
            &latent
        };
        let att_input = Matrix::hstack(&[&h1, &h2, att_latent])?;
        let attention = softmax_rows(&self.att_head.forward(&att_input)?);
        Ok(Forward {
            h1,
            h2,
            sem_pred,
            latent,
            embed,
            embed_logits,
            embed_hidden,
            adjusted,
            att_input,
            attention,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> TrainConfig {
        TrainConfig {
            h1: 8,
            h2: 6,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_parameters_forward() {
        let m = SfLfgaaModel::zeros(5, 4, small_config(), Variant::SfLfgaa).unwrap();
        let x = Matrix::from_fn(3, 5, |i, j| (i * j) as f64 - 1.0);
        let f = m.forward_full(&x).unwrap();
        assert!(f.sem_pred.data().iter().all(|&v| v == 0.0));
        assert!(f.latent.data().iter().all(|&v| v == 0.0));
        assert!(f.attention.data().iter().all(|&v| (v - 0.25).abs() < 1e-15));
        assert!(f.embed.unwrap().data().iter().all(|&v| v == 0.5));
        assert_eq!(f.h1.shape(), (3, 8));
        assert_eq!(f.h2.shape(), (3, 6));
    }

    #[test]
    fn attention_is_simplex() {
        let m = SfLfgaaModel::new(5, 4, small_config(), Variant::SfLfgaa).unwrap();
        let x = Matrix::from_fn(7, 5, |i, j| ((i * 3 + j) as f64).sin() * 4.0);
        let f = m.forward_full(&x).unwrap();
        for row in f.attention.row_iter() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|&p| p >= 0.0));
        }
        for &e in f.embed.unwrap().data() {
            assert!(e > 0.0 && e < 1.0);
        }
        assert!(m.forward_full(&Matrix::zeros(1, 4)).is_err());
    }

    #[test]
    fn feedback_rule() {
        let s = Matrix::from_rows(&[[1.0, 1.0]]).unwrap();
        let z = Matrix::from_rows(&[[0.0, 2.0]]).unwrap();
        assert_eq!(apply_feedback(&s, &z, 0.0).unwrap(), s);
        assert_eq!(apply_feedback(&s, &z, 1.0).unwrap(), z);
        let a = apply_feedback(&s, &z, 0.01).unwrap();
        assert!((a[(0, 0)] - 0.99).abs() < 1e-15 && (a[(0, 1)] - 1.01).abs() < 1e-15);
        assert!(apply_feedback(&s, &Matrix::zeros(1, 3), 0.5).is_err());
    }

    #[test]
    fn variants_share_initial_heads() {
        let a = SfLfgaaModel::new(5, 4, small_config(), Variant::SfLfgaa).unwrap();
        let b = SfLfgaaModel::new(5, 4, small_config(), Variant::Lfgaa).unwrap();
        assert_eq!(a.trunk(), b.trunk());
        assert_eq!(a.aug_head(), b.aug_head());
        assert_eq!(a.att_head(), b.att_head());
        assert!(b.sem_embed().is_none());
    }
}
