use serde::Serialize;

use crate::ensemble::Ensemble;
use crate::error::{Error, Result};

/// Lower percentile of the pooled sample used as histogram range.
pub const CLIP_LOW: f64 = 0.005;
/// Upper percentile of the pooled sample used as histogram range.
pub const CLIP_HIGH: f64 = 0.995;

/// Plug-in total-variation distance between projected histograms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TVEstimate {
    pub value: f64,
    /// 0-based mode indices of the projection.
    pub dims: Vec<usize>,
    pub bins_per_dim: usize,
    pub samples_per_side: usize,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

struct Axis {
    lo: f64,
    hi: f64,
    bins: usize,
}

impl Axis {
    /// Cell in `0..bins + 2`: underflow, `bins` interior cells, overflow.
    fn cell(&self, v: f64) -> usize {
        if v < self.lo {
            0
        } else if v > self.hi {
            self.bins + 1
        } else if self.hi == self.lo {
            1
        } else {
            let i = ((v - self.lo) / (self.hi - self.lo) * self.bins as f64).floor() as usize;
            1 + i.min(self.bins - 1)
        }
    }
}

/// `½ Σ_cells |p̂ - q̂|` over a common histogram of the projection onto
/// `dims`. Each axis spans the pooled 0.5%–99.5% percentile range with
/// `bins_per_dim` equal cells plus one underflow and one overflow cell. The
/// larger sample is truncated to the size of the smaller one.
pub fn estimate_tv(
    a: &Ensemble,
    b: &Ensemble,
    dims: &[usize],
    bins_per_dim: usize,
) -> Result<TVEstimate> {
    if a.n_modes() != b.n_modes() {
        return Err(Error::Usage(format!(
            "ensembles have {} and {} modes",
            a.n_modes(),
            b.n_modes()
        )));
    }
    if dims.is_empty() || dims.len() > 3 {
        return Err(Error::Usage(format!(
            "projection needs 1 to 3 dims, got {}",
            dims.len()
        )));
    }
    if let Some(d) = dims.iter().find(|d| **d >= a.n_modes()) {
        return Err(Error::Usage(format!(
            "projection dim {d} out of range for {} modes",
            a.n_modes()
        )));
    }
    if bins_per_dim == 0 {
        return Err(Error::Usage("bins_per_dim must be >= 1".into()));
    }
    let m = a.len().min(b.len());
    let axes: Vec<Axis> = dims
        .iter()
        .map(|&d| {
            let mut pooled: Vec<f64> = a
                .rows()
                .take(m)
                .chain(b.rows().take(m))
                .map(|r| r[d])
                .collect();
            pooled.sort_by(f64::total_cmp);
            Axis {
                lo: quantile_sorted(&pooled, CLIP_LOW),
                hi: quantile_sorted(&pooled, CLIP_HIGH),
                bins: bins_per_dim,
            }
        })
        .collect();
    let side = bins_per_dim + 2;
    let n_cells = side.pow(dims.len() as u32);
    let cell_of = |row: &[f64]| {
        dims.iter()
            .zip(&axes)
            .fold(0usize, |acc, (&d, ax)| acc * side + ax.cell(row[d]))
    };
    let mut diff = vec![0i64; n_cells];
    for r in a.rows().take(m) {
        diff[cell_of(r)] += 1;
    }
    for r in b.rows().take(m) {
        diff[cell_of(r)] -= 1;
    }
    let l1: i64 = diff.iter().map(|d| d.abs()).sum();
    Ok(TVEstimate {
        value: (l1 as f64 / (2.0 * m as f64)).clamp(0.0, 1.0),
        dims: dims.to_vec(),
        bins_per_dim,
        samples_per_side: m,
    })
}
