//! Hybrid convolutional + handcrafted-texture classifier for lodged /
//! non-lodged crop plot images.
//!
//! * [`tensor`]: dense tensors, reverse-mode autodiff and Adam.
//! * [`texture`]: GLCM contrast and rotation-invariant uniform LBP features.
//! * [`datapipe`]: images, manifests, preprocessing, splits, synthetic data.
//! * [`model`]: the network, prediction and the model file format.
//! * [`trainer`]: training loop, evaluation and latency benchmarking.

pub mod datapipe;
pub mod error;
pub mod model;
pub mod raster;
pub mod tensor;
pub mod texture;
pub mod trainer;

pub use error::{Error, Result};
