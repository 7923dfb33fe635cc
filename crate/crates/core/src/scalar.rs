//! Numeric abstraction shared by the metric, clustering and scoring code.
//!
//! Count-derived quantities (support, confidence, lift and their level-wise
//! decompositions) are generic over [`Scalar`], so the same code runs in
//! `f32`/`f64` or in exact rational arithmetic. Geometry and information
//! scores use [`num_traits::Float`] directly.

use std::fmt::Debug;

use num_rational::Ratio;
use num_traits::{FromPrimitive, Num};

/// A number type that metrics can be computed in.
pub trait Scalar: Num + Copy + PartialOrd + Debug + FromPrimitive + Send + Sync {
    /// Absolute tolerance for comparing two routes to the same quantity.
    const IDENTITY_TOLERANCE: f64 = 1e-12;

    /// Converts a transaction count into the scalar type.
    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("count not representable in scalar type")
    }

    fn to_f64(self) -> f64;

    /// Equality up to `tol`; exact types ignore the tolerance.
    fn close_to(self, other: Self, tol: f64) -> bool {
        (self.to_f64() - other.to_f64()).abs() <= tol
    }
}

impl Scalar for f32 {
    const IDENTITY_TOLERANCE: f64 = 1e-5;

    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn to_f64(self) -> f64 {
        self
    }
}

macro_rules! exact_scalar {
    ($($int:ty),*) => {$(
        impl Scalar for Ratio<$int> {
            const IDENTITY_TOLERANCE: f64 = 0.0;

            fn to_f64(self) -> f64 {
                *self.numer() as f64 / *self.denom() as f64
            }

            fn close_to(self, other: Self, _tol: f64) -> bool {
                self == other
            }
        }
    )*};
}

exact_scalar!(i64, i128);
