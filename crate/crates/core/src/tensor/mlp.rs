//! Fully connected networks with hand-written backpropagation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
}

impl Activation {
    fn apply(self, m: &mut Matrix) {
        if self == Activation::Relu {
            m.data_mut().iter_mut().for_each(|x| *x = x.max(0.0));
        }
    }

    /// Multiplies `grad` by the derivative, given post-activation outputs.
    fn backprop(self, grad: &mut Matrix, out: &Matrix) {
        if self == Activation::Relu {
            for (g, &o) in grad.data_mut().iter_mut().zip(out.data()) {
                if o <= 0.0 {
                    *g = 0.0;
                }
            }
        }
    }
}

/// Affine layer `y = x W + b` with `W` stored `in x out`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    /// Glorot-uniform weights, zero bias.
    pub fn glorot<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..fan_in * fan_out)
            .map(|_| rng.random_range(-limit..limit))
            .collect();
        Dense {
            weights: Matrix::new(fan_in, fan_out, data).expect("finite init"),
            bias: vec![0.0; fan_out],
        }
    }

    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Dense {
            weights: Matrix::zeros(fan_in, fan_out),
            bias: vec![0.0; fan_out],
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.in_dim() {
            return Err(Error::shape("dense forward", self.in_dim(), x.cols()));
        }
        let mut y = x.matmul(&self.weights)?;
        y.add_row_vector(&self.bias)?;
        Ok(y)
    }

    /// Given `dL/dy`, returns parameter gradients and `dL/dx`.
    pub fn backward(&self, x: &Matrix, grad_out: &Matrix) -> Result<(DenseGrad, Matrix)> {
        let weights = x.matmul_tn(grad_out)?;
        let bias = grad_out.column_sums();
        let grad_in = grad_out.matmul_nt(&self.weights)?;
        Ok((DenseGrad { weights, bias }, grad_in))
    }

    pub fn param_count(&self) -> usize {
        self.weights.data().len() + self.bias.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseGrad {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl DenseGrad {
    pub fn zeros_like(layer: &Dense) -> Self {
        DenseGrad {
            weights: Matrix::zeros(layer.in_dim(), layer.out_dim()),
            bias: vec![0.0; layer.out_dim()],
        }
    }
}

/// Multilayer perceptron: ReLU between layers, configurable output activation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Dense>,
    output: Activation,
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(dims: &[usize], output: Activation, rng: &mut R) -> Self {
        assert!(dims.len() >= 2, "an MLP needs at least input and output dims");
        let layers = dims.windows(2).map(|w| Dense::glorot(w[0], w[1], rng)).collect();
        Mlp { layers, output }
    }

    pub fn zeros(dims: &[usize], output: Activation) -> Self {
        assert!(dims.len() >= 2, "an MLP needs at least input and output dims");
        let layers = dims.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect();
        Mlp { layers, output }
    }

    pub fn from_layers(layers: Vec<Dense>, output: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Invalid("MLP with no layers".into()));
        }
        for (i, w) in layers.windows(2).enumerate() {
            if w[0].out_dim() != w[1].in_dim() {
                return Err(Error::shape(
                    "Mlp::from_layers",
                    format!("layer {} input {}", i + 1, w[0].out_dim()),
                    w[1].in_dim(),
                ));
            }
        }
        for l in &layers {
            if l.bias.len() != l.out_dim() {
                return Err(Error::shape("Mlp::from_layers bias", l.out_dim(), l.bias.len()));
            }
        }
        Ok(Mlp { layers, output })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(Dense::out_dim).unwrap_or(0)
    }

    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(Dense::out_dim))
            .collect()
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            self.output
        } else {
            Activation::Relu
        }
    }

    /// Post-activation output of every layer; the last entry is the network output.
    pub fn forward(&self, x: &Matrix) -> Result<Vec<Matrix>> {
        let mut acts: Vec<Matrix> = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let input = if i == 0 { x } else { &acts[i - 1] };
            let mut y = layer.forward(input)?;
            self.activation(i).apply(&mut y);
            acts.push(y);
        }
        Ok(acts)
    }

    pub fn output(&self, x: &Matrix) -> Result<Matrix> {
        Ok(self.forward(x)?.pop().expect("non-empty"))
    }

    /// Backpropagates gradients injected at any layer's output.
    ///
    /// `upstream[i]` is `dL/d acts[i]` (or `None` for zero). Returns per-layer
    /// parameter gradients and `dL/dx`.
    pub fn backward(
        &self,
        x: &Matrix,
        acts: &[Matrix],
        upstream: Vec<Option<Matrix>>,
    ) -> Result<(Vec<DenseGrad>, Matrix)> {
        let n = self.layers.len();
        if acts.len() != n || upstream.len() != n {
            return Err(Error::shape("Mlp::backward", n, acts.len().min(upstream.len())));
        }
        let mut upstream = upstream;
        let mut grads: Vec<Option<DenseGrad>> = vec![None; n];
        let mut g = upstream[n - 1]
            .take()
            .unwrap_or_else(|| Matrix::zeros(acts[n - 1].rows(), acts[n - 1].cols()));
        for l in (0..n).rev() {
            self.activation(l).backprop(&mut g, &acts[l]);
            let input = if l == 0 { x } else { &acts[l - 1] };
            let (pg, mut g_in) = self.layers[l].backward(input, &g)?;
            grads[l] = Some(pg);
            if l > 0 {
                if let Some(extra) = upstream[l - 1].take() {
                    g_in.add_assign(&extra)?;
                }
            }
            g = g_in;
        }
        Ok((grads.into_iter().map(|g| g.expect("filled")).collect(), g))
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    /// Mutable parameter slices in a fixed order (per layer: weights, bias).
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.data_mut(), l.bias.as_mut_slice()])
            .collect()
    }
}

/// Flattens layer gradients in the order of [`Mlp::params_mut`].
pub fn flatten_grads(grads: &[DenseGrad]) -> Vec<&[f64]> {
    grads
        .iter()
        .flat_map(|g| [g.weights.data(), g.bias.as_slice()])
        .collect()
}
