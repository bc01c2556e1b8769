//! Corner-aligned bilinear resampling of feature grids.
//!
//! Output sample `i` of an axis with `out` samples reads the source at
//! `i * (in - 1) / (out - 1)`, so the first and last samples of both grids
//! coincide. A single-sample output axis reads source index 0.

use crate::tensor_store::FeatureGrid;

/// Source coordinate for output index `i`, split into (lower index, upper
/// index, fractional weight of the upper one).
fn axis_sample(i: usize, input: usize, output: usize) -> (usize, usize, f64) {
    if output <= 1 || input <= 1 {
        return (0, 0, 0.0);
    }
    let num = i * (input - 1);
    let den = output - 1;
    let lo = num / den;
    let rem = num % den;
    if rem == 0 || lo + 1 >= input {
        (lo, lo, 0.0)
    } else {
        (lo, lo + 1, rem as f64 / den as f64)
    }
}

/// Resamples every channel of `grid` to `height x width`.
pub fn resize_bilinear(grid: &FeatureGrid, height: usize, width: usize) -> FeatureGrid {
    assert!(height >= 1 && width >= 1, "target size must be at least 1x1");
    if (grid.height(), grid.width()) == (height, width) {
        return grid.clone();
    }
    let c = grid.channels();
    let rows: Vec<_> = (0..height)
        .map(|y| axis_sample(y, grid.height(), height))
        .collect();
    let cols: Vec<_> = (0..width)
        .map(|x| axis_sample(x, grid.width(), width))
        .collect();

    let mut data = Vec::with_capacity(height * width * c);
    for &(y0, y1, ty) in &rows {
        for &(x0, x1, tx) in &cols {
            let (a, b) = (grid.at(y0, x0), grid.at(y0, x1));
            let (d, e) = (grid.at(y1, x0), grid.at(y1, x1));
            for ch in 0..c {
                let top = (1.0 - tx) * a[ch] + tx * b[ch];
                let bottom = (1.0 - tx) * d[ch] + tx * e[ch];
                data.push((1.0 - ty) * top + ty * bottom);
            }
        }
    }
    FeatureGrid::new(height, width, c, data).expect("resampled grid is consistent")
}
