//! Category text embeddings: template averaging and reasoning fusion.
//!
//! Each category is described by a bank of underwater prompt templates whose
//! text embeddings are averaged into one unit vector per category. A per-image
//! reasoning embedding (the text embedding of a sentence built from the
//! image's [`ReasoningRecord`]) is then blended into every category row whose
//! cosine similarity to it clears a threshold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor_store::{l2_norm, EmbeddingMatrix, ReasoningRecord, TemplateEmbeddings};

pub const CLASS_SLOT: &str = "{class}";

/// Prompt used when the underwater template bank is switched off.
pub const PLAIN_TEMPLATE: &str = "a photo of a {class}.";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateGroup {
    pub name: String,
    /// Half-open range into [`TemplateBank::templates`].
    pub range: std::ops::Range<usize>,
}

/// Ordered prompt templates, optionally grouped under `#` headers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateBank {
    templates: Vec<String>,
    groups: Vec<TemplateGroup>,
}

impl TemplateBank {
    /// Parses `templates.txt`: one template per line, `# name` lines open a
    /// group, blank lines are skipped. Every template needs at least one
    /// `{class}` slot.
    pub fn parse(text: &str) -> Result<Self> {
        let mut templates = Vec::new();
        let mut groups: Vec<TemplateGroup> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('#') {
                if let Some(open) = groups.last_mut() {
                    open.range.end = templates.len();
                }
                groups.push(TemplateGroup {
                    name: name.trim().to_string(),
                    range: templates.len()..templates.len(),
                });
                continue;
            }
            if !line.contains(CLASS_SLOT) {
                return Err(Error::InvalidConfig(format!(
                    "template on line {} has no {CLASS_SLOT} slot: {line:?}",
                    lineno + 1
                )));
            }
            templates.push(line.to_string());
        }
        if let Some(open) = groups.last_mut() {
            open.range.end = templates.len();
        }
        if templates.is_empty() {
            return Err(Error::InvalidConfig("template bank is empty".into()));
        }
        Ok(Self { templates, groups })
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// The 100-template underwater bank bundled with the crate.
    pub fn underwater() -> Self {
        Self::parse(crate::UNDERWATER_TEMPLATES_TXT).expect("bundled templates are valid")
    }

    pub fn plain() -> Self {
        Self::parse(PLAIN_TEMPLATE).expect("plain template is valid")
    }

    pub fn templates(&self) -> &[String] {
        &self.templates
    }

    pub fn groups(&self) -> &[TemplateGroup] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    /// Every template with each slot replaced by `class`.
    pub fn instantiate(&self, class: &str) -> Vec<String> {
        self.templates
            .iter()
            .map(|t| t.replace(CLASS_SLOT, class))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    /// Upper clamp on the fusion weight.
    pub w_max: f64,
    /// Minimum cosine similarity for a category row to receive the reasoning
    /// embedding.
    pub tau: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self { w_max: 0.5, tau: 0.5 }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::InvalidConfig(format!("tau must be in [0, 1], got {}", self.tau)));
        }
        if !(self.w_max >= 0.0 && self.w_max.is_finite()) {
            return Err(Error::InvalidConfig(format!("w_max must be >= 0, got {}", self.w_max)));
        }
        Ok(())
    }
}

/// Mean over the template axis followed by per-row L2 normalization.
pub fn average_templates(bank: &TemplateEmbeddings) -> Result<EmbeddingMatrix> {
    let (k, t, c) = (bank.categories(), bank.templates(), bank.channels());
    if t == 0 {
        return Err(Error::ShapeMismatch("template embeddings hold zero templates".into()));
    }
    let mut values = vec![0.0; k * c];
    for cat in 0..k {
        let row = &mut values[cat * c..(cat + 1) * c];
        for tmpl in 0..t {
            for (r, &v) in row.iter_mut().zip(bank.embedding(cat, tmpl)) {
                *r += v;
            }
        }
        row.iter_mut().for_each(|r| *r /= t as f64);
        let norm = l2_norm(row);
        if norm < 1e-12 {
            return Err(Error::ZeroVector(format!(
                "template mean of category {cat} vanishes"
            )));
        }
        row.iter_mut().for_each(|r| *r /= norm);
    }
    Ok(EmbeddingMatrix::new_normalized(k, c, values))
}

/// Renders `"A photo of {Objects} that have attributes {Attributes} underwater."`.
///
/// Objects are joined with `", "`. Attributes are each object's list joined
/// with `", "`, concatenated in object order with the same separator; objects
/// without attributes contribute nothing.
pub fn build_reasoning_sentence(record: &ReasoningRecord) -> String {
    let objects = record.objects.join(", ");
    let attributes: Vec<String> = record
        .objects
        .iter()
        .filter_map(|o| record.attributes_of(o))
        .filter(|attrs| !attrs.is_empty())
        .map(|attrs| attrs.join(", "))
        .collect();
    format!(
        "A photo of {objects} that have attributes {} underwater.",
        attributes.join(", ")
    )
}

/// Cosine-gated fusion weights: `min(s, w_max)` where `s >= tau`, else 0.
pub fn fusion_weights(similarities: &[f64], cfg: &FusionConfig) -> Vec<f64> {
    similarities
        .iter()
        .map(|&s| if s >= cfg.tau { s.min(cfg.w_max) } else { 0.0 })
        .collect()
}

/// Blends the unit reasoning embedding into each category row.
///
/// `reasoning` is normalized before use, both for the similarity and for
/// the blend itself. Rows whose weight is zero are returned untouched.
pub fn fuse(
    text: &EmbeddingMatrix,
    reasoning: &[f64],
    cfg: &FusionConfig,
) -> Result<EmbeddingMatrix> {
    cfg.validate()?;
    let text = if text.is_normalized() {
        text.clone()
    } else {
        text.normalized()?
    };
    let c = text.channels();
    if reasoning.len() != c {
        return Err(Error::ShapeMismatch(format!(
            "reasoning embedding has {} channels, text embeddings have {c}",
            reasoning.len()
        )));
    }
    let norm = l2_norm(reasoning);
    if norm < 1e-12 {
        return Err(Error::ZeroVector("reasoning embedding".into()));
    }
    let reasoning: Vec<f64> = reasoning.iter().map(|v| v / norm).collect();

    let similarities: Vec<f64> = (0..text.rows())
        .map(|i| dot(text.row(i), &reasoning))
        .collect();
    let weights = fusion_weights(&similarities, cfg);

    let mut values = text.values().to_vec();
    for (i, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let row = &mut values[i * c..(i + 1) * c];
        for (r, &e) in row.iter_mut().zip(&reasoning) {
            *r += w * e;
        }
        let n = l2_norm(row);
        if n < 1e-12 {
            return Err(Error::ZeroVector(format!("fused row {i}")));
        }
        row.iter_mut().for_each(|r| *r /= n);
    }
    Ok(EmbeddingMatrix::new_normalized(text.rows(), c, values))
}

/// Template averaging, then fusion when a reasoning embedding is available.
pub fn csa_forward(
    bank: &TemplateEmbeddings,
    reasoning: Option<&[f64]>,
    cfg: &FusionConfig,
) -> Result<EmbeddingMatrix> {
    let averaged = average_templates(bank)?;
    match reasoning {
        Some(r) => fuse(&averaged, r, cfg),
        None => Ok(averaged),
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
