//! Core of the aquaseg open-vocabulary segmentation pipeline.
//!
//! The pipeline consumes features exported by frozen encoders and never
//! touches model weights:
//!
//! 1. [`gmg`] builds a self-similarity attention prior from geometric-encoder
//!    features and uses it to correct vision-language patch features.
//! 2. [`csa`] averages per-category template embeddings and fuses them with a
//!    per-image reasoning embedding.
//! 3. [`mask_classifier`] scores every position against every category and
//!    produces a dense label map.
//! 4. [`metrics`] accumulates confusion matrices and derives aAcc, mIoU, mAcc
//!    and grouped mIoU.
//!
//! [`tensor_store`] is the boundary with the outside world: `.npy` tensors,
//! dataset manifests, category registries and reasoning records.

pub mod csa;
pub mod error;
pub mod gmg;
pub mod interp;
pub mod mask_classifier;
pub mod metrics;
pub mod tensor_store;

pub use error::{Error, Result};
pub use tensor_store::{CategoryRegistry, EmbeddingMatrix, FeatureGrid, LabelMap, IGNORE_LABEL};

/// Category registry shipped with the crate: 255 classes (background plus
/// 254 foreground categories) with taxonomy and commonness splits.
pub const AQUAOV255_REGISTRY_JSON: &str = include_str!("../data/aquaov255_registry.json");

/// The 100 underwater prompt templates, grouped under `#` headers.
pub const UNDERWATER_TEMPLATES_TXT: &str = include_str!("../data/templates.txt");
