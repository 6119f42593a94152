//! Clustering of large collections of long time series.
//!
//! The crate composes feature-space representations (mean, Haar, Fourier,
//! PCA), dissimilarities (L2, max lagged Pearson correlation, dynamic time
//! warping), and k-medoids clustering, and scores competing pipelines with a
//! fidelity/within performance index built on Gaussian neighbor affinities.

pub mod clustering;
pub mod data;
pub mod distances;
pub mod error;
pub mod evaluation;
pub mod stats;
pub mod synth;
pub mod transforms;

pub use data::{CsvLayout, Dataset, Preprocessing, TimeSeriesRecord};
pub use error::{Error, Result};
pub use synth::{generate_synthetic, generate_synthetic_with_truth, SyntheticSpec, SyntheticTruth};
