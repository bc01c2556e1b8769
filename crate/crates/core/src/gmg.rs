//! Geometric-guided correction of vision-language patch features.
//!
//! The geometric encoder's last-stage features define a self-similarity
//! matrix over positions. After mean-centering, scaling and thresholding it
//! becomes a row-stochastic attention map that mixes each patch feature with
//! the features of geometrically similar positions.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::resize_bilinear;
use crate::tensor_store::FeatureGrid;

/// Number of geometric encoder stages exported per image.
pub const GEO_STAGES: u8 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GmgConfig {
    /// Centering coefficient applied to the similarity mean.
    pub beta: f64,
    /// Positive scale applied after centering.
    pub gamma: f64,
    /// Which geometric encoder stage the features come from (0..=3).
    pub geo_stage: u8,
}

impl Default for GmgConfig {
    fn default() -> Self {
        Self {
            beta: 1.2,
            gamma: 3.0,
            geo_stage: GEO_STAGES - 1,
        }
    }
}

impl GmgConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidConfig(format!("gamma must be > 0, got {}", self.gamma)));
        }
        if !self.beta.is_finite() {
            return Err(Error::InvalidConfig(format!("beta must be finite, got {}", self.beta)));
        }
        if self.geo_stage >= GEO_STAGES {
            return Err(Error::InvalidConfig(format!(
                "geo_stage must be in 0..={}, got {}",
                GEO_STAGES - 1,
                self.geo_stage
            )));
        }
        Ok(())
    }
}

/// Symmetric `n x n` Gram matrix of position vectors, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    /// Arithmetic mean over all `n^2` entries, diagonal included.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Sharpened similarity logits; thresholded entries hold `-inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedLogits {
    n: usize,
    values: Vec<f64>,
}

impl MaskedLogits {
    pub fn from_values(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::ShapeMismatch(format!(
                "{n}x{n} logits need {} values, got {}",
                n * n,
                values.len()
            )));
        }
        if values.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(Error::NonFinite("masked logits may only hold finite values or -inf".into()));
        }
        Ok(Self { n, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    /// True where the entry survived thresholding.
    pub fn kept(&self, i: usize, j: usize) -> bool {
        self.values[i * self.n + j] != f64::NEG_INFINITY
    }
}

/// Row-stochastic attention over positions.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMap {
    n: usize,
    rows: Vec<f64>,
    fallback_rows: BTreeSet<usize>,
}

impl AttentionMap {
    pub fn identity(n: usize) -> Self {
        let mut rows = vec![0.0; n * n];
        for i in 0..n {
            rows[i * n + i] = 1.0;
        }
        Self {
            n,
            rows,
            fallback_rows: BTreeSet::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.n..(i + 1) * self.n]
    }

    pub fn values(&self) -> &[f64] {
        &self.rows
    }

    /// Rows where every logit was masked and the identity row was used.
    pub fn fallback_rows(&self) -> &BTreeSet<usize> {
        &self.fallback_rows
    }
}

/// `S = G^T G` over flattened positions. No normalization is applied to `G`.
pub fn self_similarity(geo: &FeatureGrid) -> SimilarityMatrix {
    let n = geo.positions();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        let gi = geo.position(i);
        for j in i..n {
            let dot: f64 = gi.iter().zip(geo.position(j)).map(|(a, b)| a * b).sum();
            values[i * n + j] = dot;
            values[j * n + i] = dot;
        }
    }
    SimilarityMatrix { n, values }
}

/// `gamma * (S - beta * mean(S))`, with negative entries replaced by `-inf`.
/// Entries that land exactly on zero are kept.
pub fn sharpen_and_mask(sim: &SimilarityMatrix, cfg: &GmgConfig) -> MaskedLogits {
    let shift = cfg.beta * sim.mean();
    let values = sim
        .values
        .iter()
        .map(|&s| {
            let v = cfg.gamma * (s - shift);
            if v < 0.0 {
                f64::NEG_INFINITY
            } else {
                v
            }
        })
        .collect();
    MaskedLogits { n: sim.n, values }
}

/// Row-wise softmax over the surviving entries. A row with no surviving
/// entry becomes the standard basis row `e_i`, leaving that position
/// uncorrected.
pub fn attention_from_logits(logits: &MaskedLogits) -> AttentionMap {
    let n = logits.n;
    let mut rows = vec![0.0; n * n];
    let mut fallback_rows = BTreeSet::new();
    for i in 0..n {
        let src = logits.row(i);
        let dst = &mut rows[i * n..(i + 1) * n];
        let max = src.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            dst[i] = 1.0;
            fallback_rows.insert(i);
            continue;
        }
        let mut total = 0.0;
        for (d, &s) in dst.iter_mut().zip(src) {
            // exp(-inf) == 0 takes care of masked entries.
            *d = (s - max).exp();
            total += *d;
        }
        dst.iter_mut().for_each(|d| *d /= total);
    }
    AttentionMap {
        n,
        rows,
        fallback_rows,
    }
}

/// Resamples patch features to the geometric grid's resolution.
pub fn interpolate_features(features: &FeatureGrid, height: usize, width: usize) -> FeatureGrid {
    resize_bilinear(features, height, width)
}

/// `A . V'` over flattened positions.
pub fn correct_features(attention: &AttentionMap, features: &FeatureGrid) -> Result<FeatureGrid> {
    let n = attention.n;
    if n != features.positions() {
        return Err(Error::ShapeMismatch(format!(
            "attention covers {n} positions, features have {}x{}",
            features.height(),
            features.width()
        )));
    }
    let c = features.channels();
    let mut out = vec![0.0; n * c];
    for i in 0..n {
        let dst = &mut out[i * c..(i + 1) * c];
        for (j, &w) in attention.row(i).iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (d, &v) in dst.iter_mut().zip(features.position(j)) {
                *d += w * v;
            }
        }
    }
    FeatureGrid::new(features.height(), features.width(), c, out)
}

/// Attention map built from geometric features alone.
pub fn geometric_attention(geo: &FeatureGrid, cfg: &GmgConfig) -> AttentionMap {
    attention_from_logits(&sharpen_and_mask(&self_similarity(geo), cfg))
}

/// Full correction: interpolate `features` to the geometric grid, then apply
/// the geometric attention map.
pub fn gmg_forward(features: &FeatureGrid, geo: &FeatureGrid, cfg: &GmgConfig) -> Result<FeatureGrid> {
    cfg.validate()?;
    let attention = geometric_attention(geo, cfg);
    let resized = interpolate_features(features, geo.height(), geo.width());
    correct_features(&attention, &resized)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const NEG: f64 = f64::NEG_INFINITY;

    fn grid(h: usize, w: usize, c: usize, data: &[f64]) -> FeatureGrid {
        FeatureGrid::new(h, w, c, data.to_vec()).unwrap()
    }

    fn cfg(beta: f64, gamma: f64) -> GmgConfig {
        GmgConfig {
            beta,
            gamma,
            ..GmgConfig::default()
        }
    }

    #[test]
    fn similarity_examples() {
        assert_eq!(self_similarity(&grid(1, 2, 1, &[1.0, 1.0])).values(), &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(self_similarity(&grid(1, 2, 1, &[1.0, 2.0])).values(), &[1.0, 2.0, 2.0, 4.0]);
        assert_eq!(
            self_similarity(&grid(1, 2, 2, &[1.0, 0.0, 0.0, 1.0])).values(),
            &[1.0, 0.0, 0.0, 1.0]
        );
    }

    #[test]
    fn sharpen_examples() {
        let ones = self_similarity(&grid(1, 2, 1, &[1.0, 1.0]));
        assert_eq!(sharpen_and_mask(&ones, &cfg(1.0, 3.0)).values(), &[0.0; 4]);

        let s = self_similarity(&grid(1, 2, 1, &[1.0, 2.0]));
        assert_eq!(s.mean(), 2.25);
        let m = sharpen_and_mask(&s, &cfg(1.2, 3.0));
        assert_eq!(&m.values()[..3], &[NEG, NEG, NEG]);
        assert_abs_diff_eq!(m.values()[3], 3.9, epsilon = 1e-12);

        let m6 = sharpen_and_mask(&s, &cfg(1.2, 6.0));
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(m.kept(i, j), m6.kept(i, j));
            }
        }
    }

    #[test]
    fn softmax_rows() {
        let logits = MaskedLogits::from_values(2, vec![0.0, 0.0, NEG, 3.9]).unwrap();
        let a = attention_from_logits(&logits);
        assert_eq!(a.row(0), &[0.5, 0.5]);
        assert_eq!(a.row(1), &[0.0, 1.0]);
        assert!(a.fallback_rows().is_empty());
    }

    #[test]
    fn all_masked_row_falls_back_to_identity() {
        let logits = MaskedLogits::from_values(2, vec![NEG, NEG, 1.0, 2.0]).unwrap();
        let a = attention_from_logits(&logits);
        assert_eq!(a.row(0), &[1.0, 0.0]);
        assert_eq!(a.fallback_rows().iter().copied().collect::<Vec<_>>(), vec![0]);
        assert_abs_diff_eq!(a.row(1).iter().sum::<f64>(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn masked_logits_reject_nan_and_positive_infinity() {
        assert!(MaskedLogits::from_values(1, vec![f64::NAN]).is_err());
        assert!(MaskedLogits::from_values(1, vec![f64::INFINITY]).is_err());
        assert!(MaskedLogits::from_values(2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn correction_examples() {
        let v = grid(1, 2, 1, &[2.0, 7.0]);
        let id = AttentionMap::identity(2);
        assert_eq!(correct_features(&id, &v).unwrap(), v);

        // The [1, 2] similarity example keeps only the (1, 1) entry, so row 0
        // falls back and row 1 attends to itself.
        let geo = grid(1, 2, 1, &[1.0, 2.0]);
        let a = geometric_attention(&geo, &cfg(1.2, 3.0));
        assert_eq!(a.row(0), &[1.0, 0.0]);
        assert_eq!(a.row(1), &[0.0, 1.0]);
        assert_eq!(correct_features(&a, &v).unwrap().data(), &[2.0, 7.0]);

        let constant = grid(2, 2, 2, &[3.0, -1.0, 3.0, -1.0, 3.0, -1.0, 3.0, -1.0]);
        let uniform = attention_from_logits(&MaskedLogits::from_values(4, vec![0.0; 16]).unwrap());
        let out = correct_features(&uniform, &constant).unwrap();
        for p in 0..4 {
            assert_abs_diff_eq!(out.position(p)[0], 3.0, epsilon = 1e-12);
            assert_abs_diff_eq!(out.position(p)[1], -1.0, epsilon = 1e-12);
        }

        assert!(matches!(
            correct_features(&AttentionMap::identity(3), &v),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn constant_geometry_with_unit_beta_averages_everything() {
        let geo = FeatureGrid::from_fn(2, 2, 3, |_, _, _| 1.0);
        let v = FeatureGrid::from_fn(2, 2, 2, |y, x, c| (y * 2 + x) as f64 + c as f64 * 10.0);
        let out = gmg_forward(&v, &geo, &cfg(1.0, 3.0)).unwrap();
        for p in 0..4 {
            assert_abs_diff_eq!(out.position(p)[0], 1.5, epsilon = 1e-12);
            assert_abs_diff_eq!(out.position(p)[1], 11.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn constant_geometry_with_large_beta_is_a_no_op() {
        let geo = FeatureGrid::from_fn(2, 2, 3, |_, _, _| 1.0);
        let v = FeatureGrid::from_fn(2, 2, 2, |y, x, c| (y * 2 + x) as f64 - c as f64);
        let a = geometric_attention(&geo, &cfg(1.2, 3.0));
        assert_eq!(a.fallback_rows().len(), 4);
        assert_eq!(gmg_forward(&v, &geo, &cfg(1.2, 3.0)).unwrap(), v);
    }

    #[test]
    fn config_validation() {
        assert!(GmgConfig::default().validate().is_ok());
        assert!(cfg(1.2, 0.0).validate().is_err());
        assert!(cfg(1.2, -1.0).validate().is_err());
        let bad_stage = GmgConfig {
            geo_stage: 4,
            ..GmgConfig::default()
        };
        assert!(bad_stage.validate().is_err());
    }
}
