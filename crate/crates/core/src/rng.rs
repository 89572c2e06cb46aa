//! Seed derivation and complex-valued sampling.
//!
//! Every random quantity in a simulation is drawn from its own generator,
//! seeded from the run seed and a path of tags (trial index, stream kind,
//! measurement index, ...). Draws therefore never depend on evaluation order,
//! and a quantity keyed by `(l, k)` is the same whatever the sweep size.

use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::C64;

pub type SimRng = ChaCha8Rng;

/// Stream tags used by the simulation pipelines.
pub mod tag {
    pub const HARDWARE: u64 = 0x4857;
    pub const CHANNEL: u64 = 0x4348;
    pub const PRECODER: u64 = 0x5052;
    pub const PILOT: u64 = 0x5049;
    pub const COMBINER: u64 = 0x434f;
    pub const TX_NOISE: u64 = 0x5458;
    pub const RX_NOISE: u64 = 0x5258;
    pub const WEIGHTS: u64 = 0x5745;
    pub const MEASURE: u64 = 0x4d45;
    pub const TRIAL: u64 = 0x5452;
    pub const CSIT: u64 = 0x4353;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(base), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn keyed_rng(base: u64, tags: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(base, tags))
}

/// Circularly-symmetric complex Gaussian `CN(0, variance)`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = libm::sqrt(variance / 2.0);
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

/// Uniform phase on `[-π, π)`.
pub fn uniform_phase<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random_range(-PI..PI)
}

pub fn unit_phasor<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::from_polar(1.0, uniform_phase(rng))
}
