//! Brute-force reference implementations for testing.
//!
//! Nothing here depends on `aquaseg-core`. Grids are nested vectors indexed
//! `[y][x][channel]`, matrices are `Vec<Vec<f64>>`, and every routine is a
//! direct loop over the defining formula.

pub type Grid = Vec<Vec<Vec<f64>>>;
pub type Matrix = Vec<Vec<f64>>;

pub fn grid_from_flat(h: usize, w: usize, c: usize, flat: &[f64]) -> Grid {
    assert_eq!(flat.len(), h * w * c);
    (0..h)
        .map(|y| {
            (0..w)
                .map(|x| flat[(y * w + x) * c..(y * w + x + 1) * c].to_vec())
                .collect()
        })
        .collect()
}

pub fn flatten(grid: &Grid) -> Vec<f64> {
    grid.iter().flatten().flatten().copied().collect()
}

fn positions(grid: &Grid) -> Vec<&Vec<f64>> {
    grid.iter().flatten().collect()
}

/// Gram matrix of flattened position vectors.
pub fn similarity(geo: &Grid) -> Matrix {
    let pos = positions(geo);
    let n = pos.len();
    let mut s = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for c in 0..pos[i].len() {
                acc += pos[i][c] * pos[j][c];
            }
            s[i][j] = acc;
        }
    }
    s
}

/// Centered, scaled, thresholded logits; `None` marks a masked entry.
pub fn masked_logits(s: &Matrix, beta: f64, gamma: f64) -> Vec<Vec<Option<f64>>> {
    let n = s.len();
    let mut total = 0.0;
    for row in s {
        for v in row {
            total += v;
        }
    }
    let mean = total / (n * n) as f64;
    s.iter()
        .map(|row| {
            row.iter()
                .map(|&v| {
                    let t = gamma * (v - beta * mean);
                    if t >= 0.0 {
                        Some(t)
                    } else {
                        None
                    }
                })
                .collect()
        })
        .collect()
}

/// Softmax over unmasked entries; identity row where everything is masked.
pub fn attention(logits: &[Vec<Option<f64>>]) -> Matrix {
    let n = logits.len();
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        let kept: Vec<f64> = logits[i].iter().flatten().copied().collect();
        if kept.is_empty() {
            a[i][i] = 1.0;
            continue;
        }
        let max = kept.iter().cloned().fold(f64::MIN, f64::max);
        let z: f64 = kept.iter().map(|v| (v - max).exp()).sum();
        for j in 0..n {
            if let Some(v) = logits[i][j] {
                a[i][j] = (v - max).exp() / z;
            }
        }
    }
    a
}

/// Interpolation weights for one axis as a dense `out x in` matrix, using
/// corner alignment.
pub fn axis_weights(input: usize, output: usize) -> Matrix {
    let mut w = vec![vec![0.0; input]; output];
    for (o, row) in w.iter_mut().enumerate() {
        if output == 1 || input == 1 {
            row[0] = 1.0;
            continue;
        }
        let src = o as f64 * (input - 1) as f64 / (output - 1) as f64;
        let lo = (src.floor() as usize).min(input - 1);
        let frac = src - lo as f64;
        if lo + 1 < input && frac > 0.0 {
            row[lo] += 1.0 - frac;
            row[lo + 1] += frac;
        } else {
            row[lo] += 1.0;
        }
    }
    w
}

/// Separable bilinear resize through explicit weight matrices.
pub fn resize(grid: &Grid, out_h: usize, out_w: usize) -> Grid {
    let (h, w) = (grid.len(), grid[0].len());
    let c = grid[0][0].len();
    let wy = axis_weights(h, out_h);
    let wx = axis_weights(w, out_w);
    let mut out = vec![vec![vec![0.0; c]; out_w]; out_h];
    for oy in 0..out_h {
        for ox in 0..out_w {
            for iy in 0..h {
                for ix in 0..w {
                    let k = wy[oy][iy] * wx[ox][ix];
                    if k == 0.0 {
                        continue;
                    }
                    for ch in 0..c {
                        out[oy][ox][ch] += k * grid[iy][ix][ch];
                    }
                }
            }
        }
    }
    out
}

pub fn matmul_positions(a: &Matrix, grid: &Grid) -> Grid {
    let (h, w) = (grid.len(), grid[0].len());
    let c = grid[0][0].len();
    let pos = positions(grid);
    let mut out = vec![vec![vec![0.0; c]; w]; h];
    for i in 0..h * w {
        for j in 0..h * w {
            for ch in 0..c {
                out[i / w][i % w][ch] += a[i][j] * pos[j][ch];
            }
        }
    }
    out
}

/// The whole geometric correction.
pub fn gmg(features: &Grid, geo: &Grid, beta: f64, gamma: f64) -> Grid {
    let a = attention(&masked_logits(&similarity(geo), beta, gamma));
    let resized = resize(features, geo.len(), geo[0].len());
    matmul_positions(&a, &resized)
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn unit(v: &[f64]) -> Vec<f64> {
    let n = norm(v);
    v.iter().map(|x| x / n).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Mean over templates then normalize; `bank[category][template]`.
pub fn average_templates(bank: &[Vec<Vec<f64>>]) -> Matrix {
    bank.iter()
        .map(|templates| {
            let c = templates[0].len();
            let mut mean = vec![0.0; c];
            for t in templates {
                for ch in 0..c {
                    mean[ch] += t[ch] / templates.len() as f64;
                }
            }
            unit(&mean)
        })
        .collect()
}

/// Gated blend of a reasoning vector into unit text rows.
pub fn fuse(text: &Matrix, reasoning: &[f64], w_max: f64, tau: f64) -> Matrix {
    let r = unit(reasoning);
    text.iter()
        .map(|row| {
            let s = dot(row, &r);
            let w = if s >= tau { s.min(w_max) } else { 0.0 };
            if w == 0.0 {
                return row.clone();
            }
            let blended: Vec<f64> = row.iter().zip(&r).map(|(a, b)| a + w * b).collect();
            unit(&blended)
        })
        .collect()
}

/// Cosine logits `[category][y][x]` between text rows and position vectors.
pub fn cosine_logits(text: &Matrix, features: &Grid) -> Vec<Vec<Vec<f64>>> {
    text.iter()
        .map(|t| {
            features
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|v| {
                            let n = norm(v);
                            if n == 0.0 {
                                0.0
                            } else {
                                dot(t, v) / n
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// Resize logits per category, then argmax with ties to the lowest index.
pub fn predict(logits: &[Vec<Vec<f64>>], out_h: usize, out_w: usize) -> Vec<Vec<usize>> {
    let k = logits.len();
    let (h, w) = (logits[0].len(), logits[0][0].len());
    let as_grid: Grid = (0..h)
        .map(|y| (0..w).map(|x| (0..k).map(|t| logits[t][y][x]).collect()).collect())
        .collect();
    let resized = resize(&as_grid, out_h, out_w);
    resized
        .iter()
        .map(|row| {
            row.iter()
                .map(|scores| {
                    let mut best = 0;
                    for t in 1..k {
                        if scores[t] > scores[best] {
                            best = t;
                        }
                    }
                    best
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scores {
    pub aacc: f64,
    pub miou: f64,
    pub macc: f64,
    pub iou: Vec<Option<f64>>,
}

/// Metrics straight from label pairs, skipping `ignore` ground truth.
pub fn scores(pairs: &[(usize, usize)], k: usize, ignore: usize) -> Scores {
    let mut tp = vec![0u64; k];
    let mut gt_count = vec![0u64; k];
    let mut pred_count = vec![0u64; k];
    let mut total = 0u64;
    for &(pred, gt) in pairs {
        if gt == ignore {
            continue;
        }
        total += 1;
        gt_count[gt] += 1;
        pred_count[pred] += 1;
        if pred == gt {
            tp[gt] += 1;
        }
    }
    let iou: Vec<Option<f64>> = (0..k)
        .map(|i| {
            let union = gt_count[i] + pred_count[i] - tp[i];
            (union > 0).then(|| tp[i] as f64 / union as f64)
        })
        .collect();
    let acc: Vec<f64> = (0..k)
        .filter(|&i| gt_count[i] > 0)
        .map(|i| tp[i] as f64 / gt_count[i] as f64)
        .collect();
    let present: Vec<f64> = iou.iter().flatten().copied().collect();
    Scores {
        aacc: tp.iter().sum::<u64>() as f64 / total as f64,
        miou: present.iter().sum::<f64>() / present.len() as f64,
        macc: acc.iter().sum::<f64>() / acc.len() as f64,
        iou,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_examples() {
        let geo = vec![vec![vec![1.0], vec![2.0]]];
        assert_eq!(similarity(&geo), vec![vec![1.0, 2.0], vec![2.0, 4.0]]);
        let m = masked_logits(&similarity(&geo), 1.2, 3.0);
        assert_eq!(m[0], vec![None, None]);
        assert!((m[1][1].unwrap() - 3.9).abs() < 1e-12);
        let r = resize(&vec![vec![vec![0.0], vec![10.0]]], 1, 3);
        assert_eq!(r, vec![vec![vec![0.0], vec![5.0], vec![10.0]]]);
        let f = fuse(&vec![vec![0.8, 0.6]], &[1.0, 0.0], 0.5, 0.5);
        assert!((f[0][0] - 0.9079).abs() < 1e-4 && (f[0][1] - 0.4190).abs() < 1e-4);
    }
}
