//! Pipeline orchestration over a manifest.
//!
//! Category text embeddings are averaged once per run. Each sample then goes
//! through interpolation, optional geometric correction, optional fusion with
//! its reasoning embedding, mask classification and accumulation into a local
//! confusion matrix. Local matrices are merged in manifest order, so the
//! report does not depend on the worker count.

use std::borrow::Cow;
use std::path::{Path, PathBuf};

use aquaseg_core::csa::{average_templates, fuse};
use aquaseg_core::gmg::{geometric_attention, interpolate_features, correct_features};
use aquaseg_core::mask_classifier::{mask_logits, upsample_argmax};
use aquaseg_core::metrics::{compute, ConfusionMatrix, MetricsReport};
use aquaseg_core::tensor_store::manifest::{load_manifest, Manifest, SampleManifest};
use aquaseg_core::tensor_store::reasoning::load_reasoning;
use aquaseg_core::tensor_store::{npy, TemplateEmbeddings};
use aquaseg_core::{EmbeddingMatrix, Error as CoreError, FeatureGrid, LabelMap};
use log::{debug, info, warn};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{BenchError, Result};
use crate::report::emit_report;

/// Directory under the output directory that receives prediction dumps.
pub const PREDICTIONS_DIR: &str = "predictions";

/// What happened to one sample, besides its prediction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SampleTrace {
    /// Attention rows that fell back to the identity.
    pub fallback_rows: usize,
    /// Whether a reasoning embedding was fused into the text embeddings.
    pub fused: bool,
}

/// A manifest prepared for prediction under one configuration.
pub struct Pipeline {
    config: RunConfig,
    manifest: Manifest,
    text: EmbeddingMatrix,
}

impl Pipeline {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let manifest = load_manifest(&config.manifest_path, config.gmg.geo_stage)?;
        let text = category_embeddings(&manifest, config.enable_templates)?;
        info!(
            "{} samples, {} categories, {} channels",
            manifest.samples.len(),
            manifest.registry.len(),
            text.channels()
        );
        Ok(Self {
            config,
            manifest,
            text,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    /// Normalized per-category text embeddings shared by every sample.
    pub fn text_embeddings(&self) -> &EmbeddingMatrix {
        &self.text
    }

    /// Dense prediction for one sample at its declared image size.
    pub fn predict(&self, sample: &SampleManifest) -> Result<(LabelMap, SampleTrace)> {
        self.predict_inner(sample).map_err(BenchError::sample(&sample.sample_id))
    }

    fn predict_inner(&self, sample: &SampleManifest) -> Result<(LabelMap, SampleTrace), CoreError> {
        let cfg = &self.config;
        let mut trace = SampleTrace::default();
        let v = FeatureGrid::load(&sample.clip_features_path)?;
        let geo = FeatureGrid::load(sample.geo_features_path(cfg.gmg.geo_stage))?;
        let resized = interpolate_features(&v, geo.height(), geo.width());
        let corrected = if cfg.enable_gmg {
            let attention = geometric_attention(&geo, &cfg.gmg);
            trace.fallback_rows = attention.fallback_rows().len();
            correct_features(&attention, &resized)?
        } else {
            resized
        };

        let text = match self.reasoning_embedding(sample)? {
            Some(r) if cfg.enable_csa => {
                trace.fused = true;
                Cow::Owned(fuse(&self.text, r.row(0), &cfg.fusion)?)
            }
            _ => Cow::Borrowed(&self.text),
        };
        let logits = mask_logits(&text, &corrected)?;
        let labels = upsample_argmax(&logits, sample.image_height, sample.image_width);
        Ok((labels, trace))
    }

    /// The sample's reasoning embedding, or `None` when the sample has no
    /// usable reasoning record. An unreadable record is not fatal; a record
    /// whose embedding tensor is corrupt is.
    fn reasoning_embedding(&self, sample: &SampleManifest) -> Result<Option<EmbeddingMatrix>, CoreError> {
        if !self.config.enable_csa {
            return Ok(None);
        }
        let Some(record_path) = &sample.reasoning_path else {
            return Ok(None);
        };
        if let Err(e) = load_reasoning(record_path) {
            warn!("{}: unusable reasoning record, using templates only: {e}", sample.sample_id);
            return Ok(None);
        }
        let Some(emb_path) = &sample.reasoning_embedding_path else {
            warn!(
                "{}: reasoning record has no precomputed embedding, using templates only",
                sample.sample_id
            );
            return Ok(None);
        };
        let emb = EmbeddingMatrix::load(emb_path)?;
        if emb.rows() != 1 {
            return Err(CoreError::ShapeMismatch(format!(
                "{}: reasoning embedding must be a single row, got {}",
                emb_path.display(),
                emb.rows()
            )));
        }
        Ok(Some(emb))
    }

    /// Prediction and ground-truth accumulation for one sample.
    fn evaluate_sample(&self, sample: &SampleManifest) -> Result<(ConfusionMatrix, SampleTrace)> {
        let (pred, trace) = self.predict(sample)?;
        let gt = LabelMap::load(&sample.gt_path).map_err(BenchError::sample(&sample.sample_id))?;
        let mut cm = ConfusionMatrix::new(self.manifest.registry.len());
        cm.accumulate(&pred, &gt)
            .map_err(BenchError::sample(&sample.sample_id))?;
        if self.config.dump_predictions {
            let path = prediction_path(&self.config.output_dir, &sample.sample_id);
            npy::write_file(&path, &pred.to_npy())
                .map_err(BenchError::sample(&sample.sample_id))?;
        }
        debug!(
            "{}: fallback rows {}, fused {}",
            sample.sample_id, trace.fallback_rows, trace.fused
        );
        Ok((cm, trace))
    }

    /// Runs every sample on `config.workers` threads and computes the report.
    pub fn evaluate(&self) -> Result<MetricsReport> {
        if self.config.dump_predictions {
            let dir = self.config.output_dir.join(PREDICTIONS_DIR);
            std::fs::create_dir_all(&dir).map_err(BenchError::output(&dir))?;
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.config.workers)
            .build()
            .map_err(|e| BenchError::Config(format!("cannot start worker pool: {e}")))?;
        let results: Vec<Result<(ConfusionMatrix, SampleTrace)>> = pool.install(|| {
            self.manifest
                .samples
                .par_iter()
                .map(|s| self.evaluate_sample(s))
                .collect()
        });

        let mut total = ConfusionMatrix::new(self.manifest.registry.len());
        let (mut fused, mut fallback) = (0, 0);
        for result in results {
            let (cm, trace) = result?;
            total.merge_from(&cm)?;
            fused += trace.fused as usize;
            fallback += trace.fallback_rows;
        }
        info!("fused reasoning into {fused} samples; {fallback} attention rows fell back to identity");
        Ok(compute(&total, &self.manifest.registry, self.manifest.samples.len())?)
    }
}

/// Template-averaged category embeddings, or the single plain-prompt bank
/// when templates are disabled.
fn category_embeddings(manifest: &Manifest, templates: bool) -> Result<EmbeddingMatrix> {
    let (path, what) = if templates {
        (&manifest.template_embeddings, "template_embeddings")
    } else {
        (&manifest.plain_embeddings, "plain_embeddings")
    };
    let path = path.as_ref().ok_or_else(|| {
        BenchError::Data(CoreError::SchemaError {
            path: manifest.path.clone(),
            reason: format!("manifest has no {what}, which this configuration needs"),
        })
    })?;
    let bank = TemplateEmbeddings::load(path)?;
    if !templates && bank.templates() != 1 {
        return Err(BenchError::Data(CoreError::SchemaError {
            path: path.clone(),
            reason: format!(
                "plain prompt bank must hold one embedding per category, found {}",
                bank.templates()
            ),
        }));
    }
    Ok(average_templates(&bank)?)
}

/// File that receives the dumped prediction of `sample_id`.
pub fn prediction_path(output_dir: &Path, sample_id: &str) -> PathBuf {
    let safe: String = sample_id
        .chars()
        .map(|c| if c == '/' || c == '\\' { '_' } else { c })
        .collect();
    output_dir.join(PREDICTIONS_DIR).join(format!("{safe}.npy"))
}

/// Evaluates the manifest and writes the report files.
pub fn run(config: &RunConfig) -> Result<MetricsReport> {
    let pipeline = Pipeline::new(config.clone())?;
    let report = pipeline.evaluate()?;
    emit_report(&report, &config.output_dir)?;
    Ok(report)
}
