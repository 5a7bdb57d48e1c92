//! Tensor-ring completion with variational Bayesian inference and automatic
//! rank determination, plus a fixed-rank ALS baseline and benchmark tooling.
//!
//! All tensors use a first-index-fastest linearization; see [`tensor`].

pub mod als;
pub mod bench;
pub mod config;
pub mod dtf;
pub mod error;
pub mod image_io;
pub mod index;
pub mod linalg;
pub mod model;
pub mod moments;
pub mod ring;
pub mod tensor;
pub mod vbi;

pub use error::{Error, Result};
pub use index::IndexSet;
pub use model::{Hyperpriors, ModelState};
pub use ring::TrCores;
pub use tensor::{DenseTensor, Shape};
pub use vbi::{FitTrace, VbiConfig};
