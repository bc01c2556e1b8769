//! Confusion-matrix accumulation and segmentation metrics.
//!
//! Per class `i`, with `counts[gt][pred]`:
//! `TP_i = counts[i][i]`, `FP_i` is column `i` minus the diagonal and `FN_i`
//! is row `i` minus the diagonal.
//!
//! * aAcc is `sum TP / total pixels`.
//! * IoU_i is `TP / (TP + FP + FN)`; a class with an empty union is absent.
//! * acc_i is `TP / (TP + FN)`; a class with no ground-truth pixels has none.
//! * mIoU and mAcc average over the classes that have a value.
//! * Grouped mIoU averages the IoU of a group's present members. Confusions
//!   between members of the same group still count as errors.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::tensor_store::{CategoryRegistry, LabelMap, IGNORE_LABEL};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            counts: vec![0; k * k],
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.k + pred]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Adds every pixel whose ground truth is not [`IGNORE_LABEL`].
    pub fn accumulate(&mut self, pred: &LabelMap, gt: &LabelMap) -> Result<()> {
        if (pred.height(), pred.width()) != (gt.height(), gt.width()) {
            return Err(Error::ShapeMismatch(format!(
                "prediction is {}x{}, ground truth is {}x{}",
                pred.height(),
                pred.width(),
                gt.height(),
                gt.width()
            )));
        }
        gt.validate(self.k)?;
        for (&p, &g) in pred.labels().iter().zip(gt.labels()) {
            if g == IGNORE_LABEL {
                continue;
            }
            if p as usize >= self.k {
                return Err(Error::LabelOutOfRange { label: p, k: self.k });
            }
            self.counts[g as usize * self.k + p as usize] += 1;
        }
        Ok(())
    }

    pub fn merge(&self, other: &ConfusionMatrix) -> Result<ConfusionMatrix> {
        let mut out = self.clone();
        out.merge_from(other)?;
        Ok(out)
    }

    pub fn merge_from(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if self.k != other.k {
            return Err(Error::ShapeMismatch(format!(
                "cannot merge confusion matrices over {} and {} categories",
                self.k, other.k
            )));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    fn true_positives(&self, i: usize) -> u64 {
        self.get(i, i)
    }

    fn false_positives(&self, i: usize) -> u64 {
        (0..self.k).map(|g| self.get(g, i)).sum::<u64>() - self.get(i, i)
    }

    fn false_negatives(&self, i: usize) -> u64 {
        (0..self.k).map(|p| self.get(i, p)).sum::<u64>() - self.get(i, i)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassScore {
    pub index: usize,
    pub name: String,
    /// `None` when the class appears in neither ground truth nor prediction.
    pub iou: Option<f64>,
    /// `None` when the class has no ground-truth pixels.
    pub acc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupScore {
    pub split: String,
    pub group: String,
    /// `None` when no member class is present.
    pub miou: Option<f64>,
    pub present: usize,
    pub members: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub sample_count: usize,
    pub pixel_count: u64,
    pub aacc: f64,
    pub miou: f64,
    pub macc: f64,
    pub per_class: Vec<ClassScore>,
    /// Grouped mIoU in registry split order, then group order.
    pub grouped: Vec<GroupScore>,
}

impl MetricsReport {
    pub fn group(&self, name: &str) -> Option<&GroupScore> {
        self.grouped.iter().find(|g| g.group == name)
    }

    pub fn iou(&self, class: usize) -> Option<f64> {
        self.per_class[class].iou
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Derives every metric from `cm`. `sample_count` is carried through for
/// reporting only.
pub fn compute(
    cm: &ConfusionMatrix,
    registry: &CategoryRegistry,
    sample_count: usize,
) -> Result<MetricsReport> {
    if registry.len() != cm.k() {
        return Err(Error::ShapeMismatch(format!(
            "registry has {} categories, confusion matrix {}",
            registry.len(),
            cm.k()
        )));
    }
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyMatrix);
    }
    let per_class: Vec<ClassScore> = (0..cm.k())
        .map(|i| {
            let tp = cm.true_positives(i);
            let fp = cm.false_positives(i);
            let fn_ = cm.false_negatives(i);
            let union = tp + fp + fn_;
            let support = tp + fn_;
            ClassScore {
                index: i,
                name: registry.name(i).to_string(),
                iou: (union > 0).then(|| tp as f64 / union as f64),
                acc: (support > 0).then(|| tp as f64 / support as f64),
            }
        })
        .collect();

    let correct: u64 = (0..cm.k()).map(|i| cm.true_positives(i)).sum();
    let miou = mean(per_class.iter().filter_map(|c| c.iou)).unwrap_or(0.0);
    let macc = mean(per_class.iter().filter_map(|c| c.acc)).unwrap_or(0.0);

    let grouped = registry
        .splits()
        .iter()
        .flat_map(|split| {
            split.groups.iter().map(|group| {
                let present: Vec<f64> = group
                    .members
                    .iter()
                    .filter_map(|&m| per_class[m].iou)
                    .collect();
                GroupScore {
                    split: split.name.clone(),
                    group: group.name.clone(),
                    miou: mean(present.iter().copied()),
                    present: present.len(),
                    members: group.members.len(),
                }
            })
        })
        .collect();

    Ok(MetricsReport {
        sample_count,
        pixel_count: total,
        aacc: correct as f64 / total as f64,
        miou,
        macc,
        per_class,
        grouped,
    })
}
