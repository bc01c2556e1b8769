//! Per-position category scoring and dense label prediction.

use crate::csa::dot;
use crate::error::{Error, Result};
use crate::interp::resize_bilinear;
use crate::tensor_store::{l2_norm, EmbeddingMatrix, FeatureGrid, LabelMap};

/// Default softmax temperature (the usual CLIP logit scale of 100).
pub const DEFAULT_TEMPERATURE: f64 = 0.01;

/// Category scores laid out as `[category][y][x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitVolume {
    categories: usize,
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl LogitVolume {
    pub fn new(categories: usize, height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != categories * height * width {
            return Err(Error::ShapeMismatch(format!(
                "logit volume {categories}x{height}x{width} needs {} values, got {}",
                categories * height * width,
                values.len()
            )));
        }
        Ok(Self {
            categories,
            height,
            width,
            values,
        })
    }

    pub fn categories(&self) -> usize {
        self.categories
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Score plane of one category, row-major over positions.
    pub fn plane(&self, category: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.values[category * n..(category + 1) * n]
    }

    pub fn get(&self, category: usize, position: usize) -> f64 {
        self.values[category * self.height * self.width + position]
    }

    /// Index of the largest score at `position`; ties go to the lowest index.
    pub fn argmax_at(&self, position: usize) -> usize {
        let mut best = 0;
        for t in 1..self.categories {
            if self.get(t, position) > self.get(best, position) {
                best = t;
            }
        }
        best
    }

    /// Same data laid out as a grid with one channel per category.
    fn to_channel_grid(&self) -> FeatureGrid {
        FeatureGrid::from_fn(self.height, self.width, self.categories, |y, x, t| {
            self.get(t, y * self.width + x)
        })
    }
}

/// Cosine similarity between every category embedding and every position.
/// Position vectors are L2-normalized first; an all-zero position scores 0
/// against every category.
pub fn mask_logits(text: &EmbeddingMatrix, features: &FeatureGrid) -> Result<LogitVolume> {
    if text.channels() != features.channels() {
        return Err(Error::ShapeMismatch(format!(
            "text embeddings have {} channels, visual features have {}",
            text.channels(),
            features.channels()
        )));
    }
    let n = features.positions();
    let k = text.rows();
    let mut values = vec![0.0; k * n];
    for p in 0..n {
        let v = features.position(p);
        let norm = l2_norm(v);
        if norm == 0.0 {
            continue;
        }
        let unit: Vec<f64> = v.iter().map(|x| x / norm).collect();
        for t in 0..k {
            values[t * n + p] = dot(text.row(t), &unit);
        }
    }
    LogitVolume::new(k, features.height(), features.width(), values)
}

/// Softmax over categories of `logits / temperature` at every position.
pub fn softmax_over_categories(logits: &LogitVolume, temperature: f64) -> Result<LogitVolume> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "temperature must be > 0, got {temperature}"
        )));
    }
    let n = logits.height * logits.width;
    let k = logits.categories;
    let mut values = vec![0.0; k * n];
    for p in 0..n {
        let max = (0..k)
            .map(|t| logits.get(t, p))
            .fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for t in 0..k {
            let e = ((logits.get(t, p) - max) / temperature).exp();
            values[t * n + p] = e;
            total += e;
        }
        for t in 0..k {
            values[t * n + p] /= total;
        }
    }
    LogitVolume::new(k, logits.height, logits.width, values)
}

/// Bilinearly resamples every category plane to `height x width` and takes
/// the per-pixel argmax.
pub fn upsample_argmax(logits: &LogitVolume, height: usize, width: usize) -> LabelMap {
    assert!(height >= 1 && width >= 1, "target size must be at least 1x1");
    let labels = if (logits.height, logits.width) == (height, width) {
        (0..height * width)
            .map(|p| logits.argmax_at(p) as u16)
            .collect()
    } else {
        let grid = resize_bilinear(&logits.to_channel_grid(), height, width);
        (0..grid.positions())
            .map(|p| argmax_first(grid.position(p)) as u16)
            .collect()
    };
    LabelMap::new(height, width, labels).expect("label count matches target size")
}

fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
