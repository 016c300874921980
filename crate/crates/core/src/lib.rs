//! Reserve-price optimization for first-price auctions.
//!
//! The crate is organised around the pieces of a zeroth-order projected
//! gradient ascent loop on the seller's revenue curve:
//!
//! * [`market`]: value distributions, bidder response models, the
//!   multi-bidder to single-bidder reduction, and bid sampling at a reserve.
//! * [`estimators`]: discrete-gradient estimators built from paired bid
//!   batches at two perturbed reserves, including the variance-reduced
//!   demand/excess decompositions.
//! * [`demand`]: parametric demand curves (logistic, one-hidden-layer MLP)
//!   fitted to accumulated (reserve, cleared) observations.
//! * [`optimizer`]: the projected ascent loop, gradient-mapping diagnostics
//!   and sample-budget schedules.
//! * [`oracles`]: brute-force Monte Carlo and closed-form ground truth used
//!   to check everything above.
//!
//! The crate is `no_std` and only needs `alloc`. All randomness comes from a
//! caller-supplied [`rand::Rng`], so every result is reproducible from a seed.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod demand;
pub mod error;
pub mod estimators;
pub mod market;
pub mod optimizer;
pub mod oracles;
pub mod stats;

pub use error::{Error, Result};

/// Random stream used throughout the crate when a concrete generator is needed.
pub type StreamRng = rand_chacha::ChaCha8Rng;

/// Builds the random stream for unit of work `stream` under `master_seed`.
///
/// Streams with different indices are independent, so trials, grid points or
/// replications can run in any order (or in parallel) without changing results.
pub fn derive_stream(master_seed: u64, stream: u64) -> StreamRng {
    use rand::SeedableRng;
    let mut rng = StreamRng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}
