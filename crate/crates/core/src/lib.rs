//! Claims-fraud detection toolkit.
//!
//! End to end: parse the three source tables plus provider labels
//! ([`schema`]), join and featurize them into a numeric matrix
//! ([`features`]), rebalance the training split ([`resample`]), fit five
//! from-scratch classifiers ([`classifiers`]), and score everything
//! ([`eval`]). [`synth`] generates schema-faithful synthetic tables with
//! planted fraud patterns so the whole pipeline runs without the public
//! dataset.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the
//! pipeline instantiates it at `f64`, aliased below.

pub mod dataset;
pub mod error;
pub mod fingerprint;
pub mod scalar;
pub mod schema;

pub mod classifiers;
pub mod eval;
pub mod features;
pub mod resample;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// The pipeline's concrete matrix type: 64-bit cells.
pub type Dataset64 = dataset::LabeledDataset<f64>;
/// The pipeline's concrete fitted-model type.
pub type Model64 = classifiers::TrainedModel<f64>;

use std::path::Path;

/// Writes bytes via a sibling temp file and rename, so partial writes never
/// land under the final name.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let err = |e: std::io::Error| Error::io(path.display().to_string(), e);
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(err)?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(err)?;
    std::fs::rename(&tmp, path).map_err(err)
}
