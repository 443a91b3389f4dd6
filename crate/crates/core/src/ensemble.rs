//! Ensembles of state samples taken at a common time.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where an ensemble came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub scheme: String,
    pub step: f64,
    pub model_hash: String,
}

/// `M` samples of an `N`-mode state at one time, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    time: f64,
    n_modes: usize,
    samples: Vec<f64>,
    path_ids: Vec<u64>,
    provenance: Provenance,
}

impl Ensemble {
    pub fn new(
        time: f64,
        n_modes: usize,
        samples: Vec<f64>,
        path_ids: Vec<u64>,
        provenance: Provenance,
    ) -> Result<Self> {
        if n_modes == 0 || !samples.len().is_multiple_of(n_modes) {
            return Err(Error::Usage(format!(
                "ensemble of {} values is not a multiple of {n_modes} modes",
                samples.len()
            )));
        }
        if samples.len() / n_modes != path_ids.len() {
            return Err(Error::Usage(
                "one path id per sample row is required".into(),
            ));
        }
        if samples.is_empty() {
            return Err(Error::Usage("ensemble needs at least one sample".into()));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::Usage("ensemble entries must be finite".into()));
        }
        Ok(Self {
            time,
            n_modes,
            samples,
            path_ids,
            provenance,
        })
    }

    /// Ensemble built from raw rows, with ids `0..M` and empty provenance.
    pub fn from_rows(time: f64, rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Usage("ragged ensemble rows".into()));
        }
        Self::new(
            time,
            n,
            rows.concat(),
            (0..rows.len() as u64).collect(),
            Provenance {
                seed: 0,
                scheme: "external".into(),
                step: 0.0,
                model_hash: String::new(),
            },
        )
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn len(&self) -> usize {
        self.path_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.path_ids.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.samples[i * self.n_modes..(i + 1) * self.n_modes]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.chunks_exact(self.n_modes)
    }

    /// Column of mode `k` (0-based).
    pub fn mode(&self, k: usize) -> Vec<f64> {
        self.rows().map(|r| r[k]).collect()
    }

    pub fn path_ids(&self) -> &[u64] {
        &self.path_ids
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// First `m` rows.
    pub fn truncated(&self, m: usize) -> Ensemble {
        let m = m.min(self.len());
        Ensemble {
            time: self.time,
            n_modes: self.n_modes,
            samples: self.samples[..m * self.n_modes].to_vec(),
            path_ids: self.path_ids[..m].to_vec(),
            provenance: self.provenance.clone(),
        }
    }
}

/// Snapshots as CSV with columns `time,path_id,mode_1..mode_N`. Each comment
/// line is emitted first, prefixed with `# `.
pub fn ensembles_to_csv(snapshots: &[Ensemble], comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        for line in c.lines() {
            let _ = writeln!(out, "# {line}");
        }
    }
    let n = snapshots.first().map_or(0, Ensemble::n_modes);
    out.push_str("time,path_id");
    for k in 1..=n {
        let _ = write!(out, ",mode_{k}");
    }
    out.push('\n');
    for e in snapshots {
        for (row, id) in e.rows().zip(e.path_ids()) {
            let _ = write!(out, "{},{}", e.time(), id);
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
    }
    out
}
