//! GAN-based synthetic fingerprint augmentation for RSS room classification.
//!
//! The pipeline: load RSS fingerprints ([`data`]), train one small GAN per room on a limited
//! sample ([`gan`]), append generated fingerprints to the real ones, train the room classifier
//! ([`classifier`]) and compare its test accuracy against the all-real baseline
//! ([`experiments`]).
//!
//! Network code is generic over [`Scalar`] (`f32` / `f64`); the aliases below pin the common
//! instantiations.

pub mod classifier;
pub mod data;
pub mod error;
pub mod experiments;
pub mod gan;
pub mod nn;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Matrix64 = nn::Matrix<f64>;
pub type Matrix32 = nn::Matrix<f32>;
pub type Mlp64 = nn::MlpParams<f64>;
pub type Mlp32 = nn::MlpParams<f32>;
pub type Adam64 = nn::AdamState<f64>;
pub type Adam32 = nn::AdamState<f32>;
