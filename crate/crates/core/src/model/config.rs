use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::AdamConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictMode {
    /// Latent similarity only.
    Latent,
    /// Attribute similarity plus latent similarity.
    Combined,
}

impl std::str::FromStr for PredictMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "latent" => Ok(PredictMode::Latent),
            "combined" => Ok(PredictMode::Combined),
            other => Err(Error::Invalid(format!("unknown prediction mode '{other}'"))),
        }
    }
}

/// Hyperparameters for one network and its training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    /// Triplet margin.
    pub margin: f64,
    /// Weight of the attention softmax loss.
    pub beta1: f64,
    /// Weight of the semantic-embedding BCE loss.
    pub beta2: f64,
    /// Feedback degree.
    pub gamma: f64,
    /// Epochs trained before feedback is switched on.
    pub warmup_epochs: usize,
    pub h1: usize,
    pub h2: usize,
    /// Ridge strength for attribute-correlation transfer.
    pub ridge_lambda: f64,
    /// Feed the feedback-adjusted latent (rather than the raw one) to the attention head.
    pub attention_uses_adjusted: bool,
    /// Build prototypes and score queries from adjusted latents.
    pub prototypes_use_adjusted: bool,
    pub predict_mode: PredictMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 64,
            seed: 7,
            lr: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            margin: 1.0,
            beta1: 1.0,
            beta2: 0.1,
            gamma: 0.01,
            warmup_epochs: 5,
            h1: 256,
            h2: 128,
            ridge_lambda: 1.0,
            attention_uses_adjusted: true,
            prototypes_use_adjusted: true,
            predict_mode: PredictMode::Latent,
        }
    }
}

impl TrainConfig {
    /// The industrial-data preset differs only in feedback degree.
    pub fn industrial() -> Self {
        TrainConfig {
            gamma: 0.005,
            ..TrainConfig::default()
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            epsilon: 1e-8,
        }
    }

    /// No semantic-embedding gradient and no feedback path.
    pub fn is_lfgaa_equivalent(&self) -> bool {
        self.gamma == 0.0 && self.beta2 == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Invalid(msg));
        if self.epochs == 0 || self.batch_size == 0 || self.h1 == 0 || self.h2 == 0 {
            return bad("epochs, batch_size, h1 and h2 must be >= 1".into());
        }
        if self.warmup_epochs > self.epochs {
            return bad(format!(
                "warmup_epochs ({}) exceeds epochs ({})",
                self.warmup_epochs, self.epochs
            ));
        }
        if !(self.lr > 0.0) || !(self.margin > 0.0) {
            return bad("lr and margin must be > 0".into());
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("Adam betas must lie in [0, 1)".into());
        }
        for (name, v) in [("beta1", self.beta1), ("beta2", self.beta2), ("gamma", self.gamma)] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("{name} must be a finite value >= 0, got {v}"));
            }
        }
        if self.gamma > 1.0 {
            return bad(format!("gamma must be <= 1, got {}", self.gamma));
        }
        if !(self.ridge_lambda >= 0.0) {
            return bad("ridge_lambda must be >= 0".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_presets() {
        let c = TrainConfig::default();
        assert_eq!(c.lr, 0.001);
        assert_eq!(c.beta2, 0.1);
        assert_eq!(c.gamma, 0.01);
        assert_eq!(c.ridge_lambda, 1.0);
        assert_eq!((c.adam_beta1, c.adam_beta2), (0.9, 0.999));
        assert_eq!(TrainConfig::industrial().gamma, 0.005);
        c.validate().unwrap();
    }

    #[test]
    fn validation() {
        let c = TrainConfig {
            warmup_epochs: 60,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
        let c = TrainConfig {
            gamma: -0.1,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
        let c = TrainConfig {
            gamma: 0.0,
            beta2: 0.0,
            ..TrainConfig::default()
        };
        assert!(c.is_lfgaa_equivalent());
    }
}
