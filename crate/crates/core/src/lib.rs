//! Direct learning of decision factors for budget-constrained treatment
//! allocation.
//!
//! The crate covers the whole offline loop on randomized-trial data:
//! [`synth`] generates trials with known effects, [`learn`] fits scorers whose
//! outputs converge to CATE rank, ROI or marginal utility, [`solve`] turns
//! those into allocations under a budget, and [`eval`] scores rankings and
//! policies.

// `!(x > 0.0)` checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod error;
pub mod eval;
pub mod learn;
pub mod math;
pub mod solve;
pub mod stats;
pub mod synth;

pub use dataset::{ingest_csv, validate_dataset, RctDataset, RctSample, SchemaConfig};
pub use error::{Error, Result};

/// One step of the splitmix64 sequence; used to derive independent seeds
/// from a single run seed.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE5_E4B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for sub-stream `stage` of a run seeded with `seed`.
pub fn derive_seed(seed: u64, stage: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stage))
}
