//! Computational core for selective state-space stereo refinement.
//!
//! Everything in this crate is pure and deterministic: selective scan
//! kernels with exact zero-order-hold discretization, the four-directional
//! cross-scan operator, correlation pyramids with interpolated lookup,
//! winner-take-all disparity, synthetic rectified-stereo scenes with exact
//! ground truth, and depth evaluation metrics. All internal accumulation is
//! in `f64`; serialization to single precision lives in the companion crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod config;
pub mod corr;
pub mod error;
pub mod features;
pub mod map;
pub mod metrics;
pub mod refine;
pub mod scan2d;
pub mod ssm;
pub mod synth;

pub use error::{CoreError, Result};
pub use map::{DisparityMap, FeatureMap2D};
