//! Loading and validation of everything that crosses the encoder boundary.
//!
//! Tensors live in `.npy` files (see [`npy`]); manifests, registries and
//! reasoning records are versioned JSON. Everything returned from here has
//! already been checked against its invariants, so the math modules can
//! assume well-formed input.

pub mod manifest;
pub mod npy;
pub mod reasoning;
pub mod registry;

use std::path::Path;

use crate::error::{Error, Result};
pub use manifest::{load_manifest, parse_manifest, Manifest, SampleManifest};
pub use npy::{Dtype, NpyArray, NpyData};
pub use reasoning::{load_reasoning, ReasoningRecord};
pub use registry::{CategoryRegistry, Split};

/// Ground-truth pixels carrying this label are excluded from every metric.
pub const IGNORE_LABEL: u16 = 255;

/// A dense tensor promoted to working precision.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// Loads a floating-point (or integer) tensor, checking rank and finiteness.
pub fn load_tensor(path: impl AsRef<Path>, expected_rank: usize) -> Result<Tensor> {
    let path = path.as_ref();
    let raw = npy::read_file(path)?;
    if raw.rank() != expected_rank {
        return Err(Error::RankMismatch {
            path: path.to_path_buf(),
            expected: expected_rank,
            found: raw.rank(),
        });
    }
    let data = raw.data.to_f64();
    if let Some(index) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue {
            path: path.to_path_buf(),
            index,
        });
    }
    Ok(Tensor {
        shape: raw.shape,
        data,
    })
}

/// An `H x W x C` grid of embedding vectors, row-major over positions.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl FeatureGrid {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width * channels {
            return Err(Error::ShapeMismatch(format!(
                "feature grid {height}x{width}x{channels} needs {} values, got {}",
                height * width * channels,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature grid".into()));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(y, x, c));
                }
            }
        }
        Self {
            height,
            width,
            channels,
            data,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let t = load_tensor(path, 3)?;
        Ok(Self {
            height: t.shape[0],
            width: t.shape[1],
            channels: t.shape[2],
            data: t.data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Number of spatial positions, `H * W`.
    pub fn positions(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Channel vector at flattened position `p = y * W + x`.
    pub fn position(&self, p: usize) -> &[f64] {
        &self.data[p * self.channels..(p + 1) * self.channels]
    }

    pub fn at(&self, y: usize, x: usize) -> &[f64] {
        self.position(y * self.width + x)
    }

    pub fn to_npy(&self) -> NpyArray {
        NpyArray {
            shape: vec![self.height, self.width, self.channels],
            data: NpyData::F32(self.data.iter().map(|&v| v as f32).collect()),
        }
    }
}

/// A `rows x channels` matrix of embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    channels: usize,
    values: Vec<f64>,
    normalized: bool,
}

impl EmbeddingMatrix {
    pub fn new(rows: usize, channels: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * channels {
            return Err(Error::ShapeMismatch(format!(
                "embedding matrix {rows}x{channels} needs {} values, got {}",
                rows * channels,
                values.len()
            )));
        }
        Ok(Self {
            rows,
            channels,
            values,
            normalized: false,
        })
    }

    /// Builds a matrix whose rows the caller guarantees to be unit-norm.
    pub(crate) fn new_normalized(rows: usize, channels: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), rows * channels);
        Self {
            rows,
            channels,
            values,
            normalized: true,
        }
    }

    /// Loads a rank-2 tensor (`rows x C`). A rank-1 tensor of length C is
    /// accepted as a single row.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = npy::read_header_only(path)?;
        let t = if raw.shape.len() == 1 {
            load_tensor(path, 1)?
        } else {
            load_tensor(path, 2)?
        };
        let (rows, channels) = match t.shape[..] {
            [c] => (1, c),
            [r, c] => (r, c),
            _ => unreachable!(),
        };
        Self::new(rows, channels, t.data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.channels..(i + 1) * self.channels]
    }

    /// Returns a copy with every row scaled to unit L2 norm.
    pub fn normalized(&self) -> Result<Self> {
        let mut values = self.values.clone();
        for (i, row) in values.chunks_exact_mut(self.channels.max(1)).enumerate() {
            let norm = l2_norm(row);
            if norm < 1e-12 {
                return Err(Error::ZeroVector(format!("embedding row {i}")));
            }
            row.iter_mut().for_each(|v| *v /= norm);
        }
        Ok(Self::new_normalized(self.rows, self.channels, values))
    }
}

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Per-category template embeddings, `categories x templates x C`.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateEmbeddings {
    categories: usize,
    templates: usize,
    channels: usize,
    data: Vec<f64>,
}

impl TemplateEmbeddings {
    pub fn new(categories: usize, templates: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != categories * templates * channels {
            return Err(Error::ShapeMismatch(format!(
                "template embeddings {categories}x{templates}x{channels} need {} values, got {}",
                categories * templates * channels,
                data.len()
            )));
        }
        Ok(Self {
            categories,
            templates,
            channels,
            data,
        })
    }

    /// Loads a rank-3 tensor. A rank-2 tensor is read as a single-template
    /// bank (`categories x 1 x C`).
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let header = npy::read_header_only(path)?;
        if header.shape.len() == 2 {
            let t = load_tensor(path, 2)?;
            return Self::new(t.shape[0], 1, t.shape[1], t.data);
        }
        let t = load_tensor(path, 3)?;
        Self::new(t.shape[0], t.shape[1], t.shape[2], t.data)
    }

    pub fn categories(&self) -> usize {
        self.categories
    }

    pub fn templates(&self) -> usize {
        self.templates
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn embedding(&self, category: usize, template: usize) -> &[f64] {
        let start = (category * self.templates + template) * self.channels;
        &self.data[start..start + self.channels]
    }
}

/// Per-pixel category indices, row-major. [`IGNORE_LABEL`] marks pixels
/// without ground truth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    height: usize,
    width: usize,
    labels: Vec<u16>,
}

impl LabelMap {
    pub fn new(height: usize, width: usize, labels: Vec<u16>) -> Result<Self> {
        if labels.len() != height * width {
            return Err(Error::ShapeMismatch(format!(
                "label map {height}x{width} needs {} labels, got {}",
                height * width,
                labels.len()
            )));
        }
        Ok(Self {
            height,
            width,
            labels,
        })
    }

    /// Loads a rank-2 `u16` (or `u8`) tensor.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = npy::read_file(path)?;
        if raw.rank() != 2 {
            return Err(Error::RankMismatch {
                path: path.to_path_buf(),
                expected: 2,
                found: raw.rank(),
            });
        }
        let labels = match raw.data {
            NpyData::U16(v) => v,
            NpyData::U8(v) => v.into_iter().map(u16::from).collect(),
            other => {
                return Err(Error::UnsupportedDtype {
                    path: path.to_path_buf(),
                    descr: format!("{:?} (label maps must be u16 or u8)", other.dtype()),
                })
            }
        };
        Self::new(raw.shape[0], raw.shape[1], labels)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    /// Checks every non-ignore label is below `k`.
    pub fn validate(&self, k: usize) -> Result<()> {
        match self
            .labels
            .iter()
            .find(|&&l| l != IGNORE_LABEL && l as usize >= k)
        {
            Some(&label) => Err(Error::LabelOutOfRange { label, k }),
            None => Ok(()),
        }
    }

    pub fn to_npy(&self) -> NpyArray {
        NpyArray {
            shape: vec![self.height, self.width],
            data: NpyData::U16(self.labels.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, shape: Vec<usize>, data: NpyData) -> std::path::PathBuf {
        let path = dir.join(name);
        npy::write_file(&path, &NpyArray::new(shape, data).unwrap()).unwrap();
        path
    }

    #[test]
    fn loads_feature_grid_shape() {
        let dir = tempfile::tempdir().unwrap();
        let values: Vec<f32> = (0..16).map(|v| v as f32).collect();
        let p = write(dir.path(), "v.npy", vec![2, 2, 4], NpyData::F32(values));
        let grid = FeatureGrid::load(&p).unwrap();
        assert_eq!((grid.height(), grid.width(), grid.channels()), (2, 2, 4));
        assert_eq!(grid.at(1, 0), &[8.0, 9.0, 10.0, 11.0]);
    }

    #[test]
    fn rank_mismatch_names_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "m.npy", vec![2, 3], NpyData::F32(vec![0.0; 6]));
        match FeatureGrid::load(&p) {
            Err(Error::RankMismatch {
                path,
                expected: 3,
                found: 2,
            }) => assert_eq!(path, p),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn nan_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "n.npy", vec![1, 1, 3], NpyData::F32(vec![0.0, f32::NAN, 1.0]));
        assert!(matches!(
            load_tensor(&p, 3),
            Err(Error::NonFiniteValue { index: 1, .. })
        ));
        let p = write(dir.path(), "i.npy", vec![2], NpyData::F64(vec![f64::INFINITY, 0.0]));
        assert!(matches!(load_tensor(&p, 1), Err(Error::NonFiniteValue { index: 0, .. })));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            load_tensor("/nonexistent/x.npy", 3),
            Err(Error::MissingFile { .. })
        ));
    }

    #[test]
    fn label_map_from_u8_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "gt.npy", vec![1, 3], NpyData::U8(vec![0, 255, 2]));
        let map = LabelMap::load(&p).unwrap();
        assert_eq!(map.labels(), &[0, 255, 2]);
        assert!(map.validate(3).is_ok());
        assert!(matches!(map.validate(2), Err(Error::LabelOutOfRange { label: 2, k: 2 })));
        let f = write(dir.path(), "f.npy", vec![1, 1], NpyData::F32(vec![0.0]));
        assert!(matches!(LabelMap::load(&f), Err(Error::UnsupportedDtype { .. })));
    }

    #[test]
    fn embedding_matrix_rank_one_is_a_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "er.npy", vec![3], NpyData::F32(vec![3.0, 0.0, 4.0]));
        let e = EmbeddingMatrix::load(&p).unwrap();
        assert_eq!((e.rows(), e.channels()), (1, 3));
        let n = e.normalized().unwrap();
        assert!(n.is_normalized());
        assert_eq!(n.row(0), &[0.6, 0.0, 0.8]);
    }

    #[test]
    fn template_embeddings_accept_rank_two() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "t.npy", vec![2, 3], NpyData::F32(vec![1.0; 6]));
        let t = TemplateEmbeddings::load(&p).unwrap();
        assert_eq!((t.categories(), t.templates(), t.channels()), (2, 1, 3));
    }
}
