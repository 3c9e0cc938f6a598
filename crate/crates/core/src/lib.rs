//! VS-Net: a lightweight spatiotemporal saliency network for detecting
//! documents in video frames.
//!
//! The crate is layered bottom-up:
//!
//! * [`tensor`]: float64 tensors with reverse-mode autodiff.
//! * [`nn`]: separable convolution, pooling, upsampling, dropout, ADAM.
//! * [`temporal`]: approximate rank pooling over frame windows.
//! * [`model`]: the encoder / VAE bottleneck / decoder network and checkpoints.
//! * [`objectives`]: BCE + IoU training loss, IoU metrics, benchmarking.
//! * [`corpus`]: synthetic document videos, MIDV-style loader, augmentation.
//! * [`harness`]: training, evaluation, cross-validation, label propagation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corpus;
pub mod error;
pub mod harness;
pub mod model;
pub mod nn;
pub mod objectives;
pub mod temporal;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
