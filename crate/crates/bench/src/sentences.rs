//! Sentence manifest for the text-embedding extractor.
//!
//! ```json
//! {
//!   "version": 1,
//!   "categories": ["Background", "..."],
//!   "templates": ["A photo of a {class} underwater.", "..."],
//!   "plain_template": "a photo of a {class}.",
//!   "reasoning": [{"sample_id": "s0", "sentence": "A photo of ..."}]
//! }
//! ```
//!
//! The extractor embeds every template with each `{class}` slot replaced by
//! every category name, giving the `K x T x C` template tensor, plus the plain
//! template for the `K x 1 x C` bank and one embedding per reasoning sentence.

use std::path::Path;

use aquaseg_core::csa::{build_reasoning_sentence, TemplateBank, PLAIN_TEMPLATE};
use aquaseg_core::tensor_store::manifest::parse_manifest;
use aquaseg_core::tensor_store::reasoning::load_reasoning;
use log::warn;
use serde::Serialize;

use crate::error::Result;

pub const SENTENCES_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReasoningSentence {
    pub sample_id: String,
    pub sentence: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SentenceManifest {
    pub version: u32,
    pub categories: Vec<String>,
    pub templates: Vec<String>,
    pub plain_template: String,
    pub reasoning: Vec<ReasoningSentence>,
}

/// Collects the sentences for `manifest_path`. Only the manifest and the
/// reasoning records are read, so this works before any tensor exists. Samples whose reasoning record
/// is missing or unreadable are skipped with a warning, matching the
/// runner's template-only fallback.
pub fn sentence_manifest(manifest_path: &Path, bank: &TemplateBank) -> Result<SentenceManifest> {
    let manifest = parse_manifest(manifest_path)?;
    let mut reasoning = Vec::new();
    for sample in &manifest.samples {
        let Some(path) = &sample.reasoning_path else {
            continue;
        };
        match load_reasoning(path) {
            Ok(record) => reasoning.push(ReasoningSentence {
                sample_id: sample.sample_id.clone(),
                sentence: build_reasoning_sentence(&record),
            }),
            Err(e) => warn!("{}: skipping reasoning record: {e}", sample.sample_id),
        }
    }
    Ok(SentenceManifest {
        version: SENTENCES_VERSION,
        categories: manifest.registry.names().to_vec(),
        templates: bank.templates().to_vec(),
        plain_template: PLAIN_TEMPLATE.to_string(),
        reasoning,
    })
}
