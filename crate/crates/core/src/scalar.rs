//! Scalar abstraction for the network engine.
//!
//! Everything numeric in [`crate::nn`], [`crate::classifier`] and [`crate::gan`] is generic over
//! [`Scalar`], implemented for `f32` and `f64`. Dataset ingestion stays in `f64` (raw dBm values)
//! and is converted at the network boundary.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};

pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssignOps
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Short tag written into model files.
    const NAME: &'static str;

    /// Lossy conversion from `f64`; literals and hyperparameters go through here.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Scalar")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {
    const NAME: &'static str = "f32";
}

impl Scalar for f64 {
    const NAME: &'static str = "f64";
}
