//! Dense linear algebra, MLPs with explicit gradients, losses, and Adam.

mod adam;
mod gradcheck;
pub mod linalg;
pub mod loss;
mod matrix;
mod mlp;

pub use adam::{Adam, AdamConfig};
pub use gradcheck::grad_check;
pub use matrix::{dot, norm, Matrix};
pub use mlp::{flatten_grads, Activation, Dense, DenseGrad, Mlp};
