//! Dense MLPs with analytic gradients and the Adam optimizer.
//!
//! This is the only learning engine in the crate: the output regressor, the encoder and
//! the decoder are all [`Mlp`]s trained with [`Adam`].

mod adam;
mod mlp;

pub use adam::{clip_grad_norm, Adam, AdamConfig};
pub use mlp::{Activation, Mlp, MlpSnapshot, Trace};

/// Default gradient-norm clip applied by the training loops.
pub const GRAD_CLIP_NORM: f64 = 10.0;
