//! Minimal dense neural-network core: tensors, the layer kinds used by the
//! speaker network (2-D convolution, max pooling, affine, time-delay affine,
//! p-norm, softmax), hand-written backward passes, and finite-difference
//! gradient checking.
//!
//! Everything is generic over [`Real`] so the same code path runs in single
//! precision for training/extraction and in double precision for gradient
//! checks.

pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod matmul;
pub mod tensor;

pub use gradcheck::{relative_error, GradCheckReport};
pub use layers::{Affine, Conv2d, MaxPool2d, PNorm, TimeDelayAffine};
pub use loss::{softmax, softmax_xent};
pub use tensor::{Mat, Ten3};

use num_traits::Float;

/// Scalar type the network runs on. f32 for training and extraction,
/// f64 for gradient checking.
pub trait Real:
    Float
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
    + std::fmt::Debug
    + std::fmt::Display
    + Default
    + Send
    + Sync
    + 'static
{
    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f32 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        f64::from(self)
    }
}

impl Real for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

/// Shape or usage errors raised by layer operations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NnError {
    /// Kernel or pooling window does not fit the input, or widths mismatch.
    Shape(String),
    /// Class label outside [0, K).
    LabelOutOfRange { label: usize, classes: usize },
}

impl std::fmt::Display for NnError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NnError::Shape(msg) => write!(f, "shape error: {msg}"),
            NnError::LabelOutOfRange { label, classes } => {
                write!(f, "label {label} out of range for {classes} classes")
            }
        }
    }
}

impl std::error::Error for NnError {}
