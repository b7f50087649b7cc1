use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam optimizer state over a fixed list of parameter tensors.
#[derive(Clone, Debug)]
pub struct Adam {
    config: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, shapes: &[usize]) -> Self {
        Adam {
            config,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    /// One bias-corrected update. Parameters are left untouched on error.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::shape("adam tensors", self.m.len(), params.len().min(grads.len())));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != self.m[i].len() || g.len() != self.m[i].len() {
                return Err(Error::shape("adam tensor", self.m[i].len(), p.len().min(g.len())));
            }
            if g.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("adam gradient"));
            }
        }
        self.t += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for j in 0..p.len() {
                m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
                v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
                let m_hat = m[j] / c1;
                let v_hat = v[j] / c2;
                p[j] -= lr * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_noop() {
        let mut w = vec![1.5, -2.0];
        let mut adam = Adam::new(AdamConfig::default(), &[2]);
        adam.step(&mut [&mut w], &[&[0.0, 0.0]]).unwrap();
        assert_eq!(w, vec![1.5, -2.0]);
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        for g in [3.0, -0.02, 1e4] {
            let mut w = vec![0.0];
            let mut adam = Adam::new(AdamConfig::default(), &[1]);
            adam.step(&mut [&mut w], &[&[g]]).unwrap();
            assert!((w[0] + 1e-3 * f64::signum(g)).abs() < 1e-9, "g={g}: {}", w[0]);
        }
    }

    #[test]
    fn quadratic_converges() {
        let cfg = AdamConfig {
            lr: 0.1,
            ..AdamConfig::default()
        };
        let mut w = vec![1.0];
        let mut adam = Adam::new(cfg, &[1]);
        for _ in 0..200 {
            let g = 2.0 * w[0];
            adam.step(&mut [&mut w], &[&[g]]).unwrap();
        }
        assert!(w[0].abs() < 0.05, "w = {}", w[0]);
    }

    #[test]
    fn non_finite_rejected_without_update() {
        let mut w = vec![1.0];
        let mut adam = Adam::new(AdamConfig::default(), &[1]);
        assert!(adam.step(&mut [&mut w], &[&[f64::NAN]]).is_err());
        assert_eq!(w[0], 1.0);
        assert_eq!(adam.step_count(), 0);
    }
}
