//! Reciprocity calibration for hybrid beamforming arrays.
//!
//! The crate models the transmit and receive front ends of a hybrid array as
//! diagonal matrices, simulates intra-array bi-directional measurements, and
//! recovers the diagonal calibration matrix `F = R^{-T} T` up to a complex
//! scalar. It builds without `std`; `alloc` is required.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod array;
pub mod calibration;
pub mod channel;
pub mod csit;
pub mod error;
pub mod estimation;
pub mod fully_connected;
pub mod linalg;
pub mod pipeline;
pub mod rng;

pub use error::{Error, RankCondition, Result};
