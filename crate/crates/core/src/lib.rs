//! Evaluation toolkit for acoustic-to-articulatory inversion.
//!
//! Features of every kind travel as [`FrameSequence`]s and are stored as AFV1
//! files (see [`afv`]). Corpora are described by JSON-lines manifests.

pub mod abx;
pub mod afv;
pub mod csv_import;
pub mod error;
pub mod frames;
pub mod manifest;
pub mod metrics;
pub mod pipeline;
pub mod preprocess;
pub mod report;
pub mod signal;
pub mod synthetic;
pub mod tract;

pub use error::{Error, Result};
pub use frames::{Articulator, FrameSequence, Interval, TrajectorySet, UtteranceRecord};
pub use manifest::{Manifest, ManifestEntry};
