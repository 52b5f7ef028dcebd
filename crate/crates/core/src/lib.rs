//! Desk-scale laboratory for differentially private sequence-to-sequence
//! training at two privacy granularities (sentence vs. document), with the
//! accounting, membership-inference, and PII-exposure machinery needed to
//! measure how the granularity choice changes leakage.
//!
//! The crate is organized around the experiment pipeline:
//!
//! * [`corpus`] — dialogue corpora, granularity units, fake-PII replacement,
//!   synthetic corpus generation
//! * [`models`] — tiny differentiable models with closed-form per-example
//!   gradients (the memorization engine)
//! * [`dpsgd`] — per-example clipping, Gaussian noising, Poisson lots
//! * [`accountant`] — Rényi-DP accounting, noise calibration, group privacy
//! * [`attack`] — loss-threshold membership inference
//! * [`pii`] — regex + gazetteer PII detection and leakage percentage
//! * [`metrics`] — corpus BLEU and baseline rescaling

pub mod accountant;
pub mod attack;
pub mod corpus;
pub mod dpsgd;
mod error;
pub mod metrics;
pub mod models;
pub mod pii;
pub mod rng;
pub mod text;

pub use error::{Error, Result};
