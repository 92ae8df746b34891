//! Nonlinear state-space identification from input/output data.
//!
//! The identified model uses the window of the last `ell` input/output pairs as its state
//! and a learned MLP as the output map. The window evolves by a fixed linear shift, so the
//! only learned component is the output map, trained by output-error rollouts. An
//! autoencoder can then compress the window state, and the [`diagnostics`] module probes
//! the observability constants that make the window a valid state in the first place.
//!
//! Module map:
//!
//! - [`nn`]: MLPs, backpropagation, Adam.
//! - [`systems`]: benchmark plants (cascaded tanks, planar drone), references, controllers.
//! - [`datagen`]: closed-loop dataset generation and the on-disk dataset format.
//! - [`regressor`]: window state, shift matrices, output-error loss, training, rollouts.
//! - [`reduction`]: autoencoder state compression and reduced rollouts.
//! - [`diagnostics`]: Lipschitz and observability estimates, state inversion, error bounds.

// `!(a < b)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datagen;
pub mod diagnostics;
mod error;
pub mod exec;
mod json;
pub mod nn;
pub mod reduction;
pub mod regressor;
pub mod seed;
pub mod systems;

pub use error::{Error, Result};
