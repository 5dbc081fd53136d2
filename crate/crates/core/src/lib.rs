//! Benchmarks how PCA and autoencoder dimension reduction change the accuracy
//! and training time of classic learners on MNIST-style image data.

pub mod autoencoder;
pub mod bench;
pub mod classifiers;
pub mod cli;
pub mod clustering;
pub mod dataset;
pub mod error;
pub mod linalg;
pub mod pca;

pub use error::{Error, Result};
pub use linalg::Matrix;
