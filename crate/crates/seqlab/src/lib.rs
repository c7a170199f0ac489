//! A desk-scale workbench for neural sequence inference, built from first
//! principles on a tiny f64 autograd core.
//!
//! What lives where:
//!
//! - [`tensor`] — dense tensors, the recording tape, reverse-mode gradients,
//!   plain SGD.
//! - [`attention`] — scaled dot-product attention, role-guided attention
//!   masks, gated multi-head aggregation, sinusoidal positions.
//! - [`encoders`] — vanilla RNN, multi-scale CNN banks, dependency trees
//!   (CoNLL reader), major/surrounding sentence segmentation, structural
//!   block extraction and relation representations.
//! - [`compositionality`] — contextual phrase compositionality scoring over
//!   pretrained word vectors.
//! - [`eval`] — confusion-matrix metrics, BLEU, dataset splitting, k-fold
//!   cross-validation.
//! - [`harness`] — datasets, synthetic tasks, training/evaluation loops,
//!   and the machinery behind the `seqlab` CLI.
//!
//! The `examples/` directory has one runnable program per capability; start
//! there.

pub mod attention;
pub mod compositionality;
pub mod encoders;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod harness;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
