//! Dataset manifests.
//!
//! ```json
//! {
//!   "version": 1,
//!   "categories": ["Background", "..."],
//!   "splits": {"taxonomy": {"Fish": [4, 5]}, "commonness": {"Common": [1]}},
//!   "template_embeddings": "text/templates.npy",
//!   "plain_embeddings": "text/plain.npy",
//!   "samples": [{
//!     "sample_id": "s0",
//!     "image_height": 12, "image_width": 12,
//!     "clip_features_path": "s0/clip.npy",
//!     "geo_features_path": "s0/geo_stage{stage}.npy",
//!     "gt_path": "s0/gt.npy",
//!     "reasoning_path": "s0/reasoning.json",
//!     "reasoning_embedding_path": "s0/reasoning_emb.npy"
//!   }]
//! }
//! ```
//!
//! Relative paths resolve against the manifest's directory. A `{stage}`
//! placeholder in `geo_features_path` is replaced by the configured
//! geometric encoder stage.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::npy;
use super::registry::{CategoryRegistry, RawRegistry};
use crate::error::{Error, Result};

pub const MANIFEST_VERSION: u32 = 1;
pub const STAGE_PLACEHOLDER: &str = "{stage}";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleManifest {
    pub sample_id: String,
    pub image_height: usize,
    pub image_width: usize,
    pub clip_features_path: PathBuf,
    geo_features_path: String,
    pub gt_path: PathBuf,
    pub reasoning_path: Option<PathBuf>,
    pub reasoning_embedding_path: Option<PathBuf>,
}

impl SampleManifest {
    /// Geometric feature path for one encoder stage.
    pub fn geo_features_path(&self, stage: u8) -> PathBuf {
        PathBuf::from(
            self.geo_features_path
                .replace(STAGE_PLACEHOLDER, &stage.to_string()),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub path: PathBuf,
    pub registry: CategoryRegistry,
    pub template_embeddings: Option<PathBuf>,
    pub plain_embeddings: Option<PathBuf>,
    pub samples: Vec<SampleManifest>,
}

#[derive(Deserialize)]
struct RawSample {
    sample_id: String,
    image_height: usize,
    image_width: usize,
    clip_features_path: String,
    geo_features_path: String,
    gt_path: String,
    #[serde(default)]
    reasoning_path: Option<String>,
    #[serde(default)]
    reasoning_embedding_path: Option<String>,
}

#[derive(Deserialize)]
struct RawManifest {
    version: u32,
    #[serde(flatten)]
    registry: RawRegistry,
    #[serde(default)]
    template_embeddings: Option<String>,
    #[serde(default)]
    plain_embeddings: Option<String>,
    samples: Vec<RawSample>,
}

/// Parses a manifest and validates its registry, without touching any
/// referenced file. Paths are resolved but may not exist yet.
pub fn parse_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let raw: RawManifest =
        serde_json::from_str(&text).map_err(|e| Error::schema(path, e.to_string()))?;
    if raw.version != MANIFEST_VERSION {
        return Err(Error::schema(
            path,
            format!("unsupported manifest version {} (expected {MANIFEST_VERSION})", raw.version),
        ));
    }
    let registry = CategoryRegistry::from_raw(raw.registry, path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let resolve = |p: &str| base.join(p);

    let mut samples = Vec::with_capacity(raw.samples.len());
    let mut ids = std::collections::HashSet::new();
    for s in raw.samples {
        if !ids.insert(s.sample_id.clone()) {
            return Err(Error::schema(path, format!("duplicate sample_id {:?}", s.sample_id)));
        }
        samples.push(SampleManifest {
            clip_features_path: resolve(&s.clip_features_path),
            geo_features_path: resolve(&s.geo_features_path).to_string_lossy().into_owned(),
            gt_path: resolve(&s.gt_path),
            reasoning_path: s.reasoning_path.as_deref().map(resolve),
            reasoning_embedding_path: s.reasoning_embedding_path.as_deref().map(resolve),
            sample_id: s.sample_id,
            image_height: s.image_height,
            image_width: s.image_width,
        });
    }

    Ok(Manifest {
        path: path.to_path_buf(),
        registry,
        template_embeddings: raw.template_embeddings.as_deref().map(resolve),
        plain_embeddings: raw.plain_embeddings.as_deref().map(resolve),
        samples,
    })
}

/// Parses and validates a manifest.
///
/// Every referenced tensor must exist and carry a well-formed header of the
/// right rank, and each ground-truth map must match its declared image size.
/// Payloads are not read here; the runner decodes them per sample.
/// `geo_stage` selects which geometric stage file must exist.
pub fn load_manifest(path: impl AsRef<Path>, geo_stage: u8) -> Result<Manifest> {
    let manifest = parse_manifest(path)?;
    let k = manifest.registry.len();
    let banks = manifest.template_embeddings.iter().chain(&manifest.plain_embeddings);
    for p in banks {
        let h = npy::read_header_only(p)?;
        if !(2..=3).contains(&h.shape.len()) || h.shape[0] != k {
            return Err(Error::schema(
                &manifest.path,
                format!(
                    "{} has shape {:?}; expected ({k}, templates, C) for {k} categories",
                    p.display(),
                    h.shape,
                ),
            ));
        }
    }
    for sample in &manifest.samples {
        validate_sample(sample, geo_stage)?;
    }
    Ok(manifest)
}

fn expect_rank(path: &Path, header: &npy::Header, rank: usize) -> Result<()> {
    if header.shape.len() != rank {
        return Err(Error::RankMismatch {
            path: path.to_path_buf(),
            expected: rank,
            found: header.shape.len(),
        });
    }
    Ok(())
}

fn validate_sample(sample: &SampleManifest, geo_stage: u8) -> Result<()> {
    let clip = npy::read_header_only(&sample.clip_features_path)?;
    expect_rank(&sample.clip_features_path, &clip, 3)?;
    let geo_path = sample.geo_features_path(geo_stage);
    let geo = npy::read_header_only(&geo_path)?;
    expect_rank(&geo_path, &geo, 3)?;

    let gt = npy::read_header_only(&sample.gt_path)?;
    expect_rank(&sample.gt_path, &gt, 2)?;
    if gt.shape != [sample.image_height, sample.image_width] {
        return Err(Error::schema(
            &sample.gt_path,
            format!(
                "ground truth is {:?}, sample {:?} declares {}x{}",
                gt.shape, sample.sample_id, sample.image_height, sample.image_width
            ),
        ));
    }
    // A missing reasoning record is tolerated; the runner falls back to
    // templates only. Its embedding, once referenced, must be a valid tensor.
    if let Some(p) = &sample.reasoning_embedding_path {
        npy::read_header_only(p)?;
    }
    Ok(())
}
