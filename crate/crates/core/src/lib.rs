//! Desk-scale laboratory for how fine-tuning on spuriously correlated data
//! corrupts token representations, and how anchoring the language model to its
//! initialization prevents it.
//!
//! The pipeline: [`corpus`] generates planted-semantics sentences and the
//! biased/unbiased/challenging splits, [`model`] holds the one-block toy
//! language model, [`train`] fits it under five regimes, [`analysis`] runs the
//! nearest-neighbor and spurious-score diagnostics, and [`eval`] ties it all
//! into a reproducible benchmark.

pub mod analysis;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod model;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};

/// SplitMix64 finalizer over `seed ^ stream`; derives independent sub-seeds.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
