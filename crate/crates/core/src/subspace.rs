//! Per-epoch principal component analysis over the channel dimension.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A block of filtered samples, optionally with its fitted subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    pub index: usize,
    pub start_s: f64,
    /// Samples `[row][channel]`.
    pub data: DMatrix<f64>,
    /// Timestamps of the rows that carry data (the first `valid_rows`).
    pub timestamps: Vec<f64>,
    /// Row count a complete epoch would have had at the stream's rate.
    pub expected_rows: usize,
    /// Leading rows holding real data; the rest is zero padding.
    pub valid_rows: usize,
    pub partial: bool,
    /// Projections `[row][component]`; empty until fitted.
    pub projections: DMatrix<f64>,
    /// Unit principal directions `[channel][component]`; empty until fitted.
    pub directions: DMatrix<f64>,
    /// Variance captured by each retained component, non-increasing.
    pub explained_power: Vec<f64>,
}

impl Epoch {
    /// An unfitted epoch whose rows are all valid.
    pub fn raw(
        index: usize,
        start_s: f64,
        data: DMatrix<f64>,
        timestamps: Vec<f64>,
        expected_rows: usize,
        partial: bool,
    ) -> Self {
        let valid_rows = data.nrows();
        Epoch {
            index,
            start_s,
            data,
            timestamps,
            expected_rows,
            valid_rows,
            partial,
            projections: DMatrix::zeros(0, 0),
            directions: DMatrix::zeros(0, 0),
            explained_power: Vec::new(),
        }
    }

    pub fn channels(&self) -> usize {
        self.data.ncols()
    }

    /// Projection series of one component over the valid rows.
    pub fn projection(&self, component: usize) -> Vec<f64> {
        (0..self.valid_rows)
            .map(|r| self.projections[(r, component)])
            .collect()
    }
}

/// Which projections carry breath and which carry body motion (0-based).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubspaceSelection {
    pub breath_component: usize,
    pub motion_components: Vec<usize>,
}

impl Default for SubspaceSelection {
    fn default() -> Self {
        SubspaceSelection {
            breath_component: 0,
            motion_components: vec![2, 3, 4],
        }
    }
}

/// Fits PCA on the epoch's valid rows and projects onto the top `p` directions.
///
/// Directions are sign-aligned with `prev` (non-negative loading dot product);
/// without a previous epoch the largest-magnitude loading is made positive.
pub fn pca_fit_project(epoch: &Epoch, p: usize, prev: Option<&Epoch>) -> Result<Epoch> {
    let c = epoch.channels();
    if p == 0 || p > c {
        return Err(Error::Parameter(format!(
            "cannot retain {p} components from {c} channels"
        )));
    }
    let n = epoch.valid_rows;
    let mut out = epoch.clone();
    out.projections = DMatrix::zeros(epoch.data.nrows(), p);
    out.directions = DMatrix::zeros(c, p);
    out.explained_power = vec![0.0; p];
    if n == 0 {
        return Ok(out);
    }
    if epoch.data.rows(0, n).iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("epoch data".into()));
    }

    let x = epoch.data.rows(0, n);
    let mean: DVector<f64> = x.row_mean().transpose();
    let mut xc = x.into_owned();
    for mut row in xc.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = (xc.transpose() * &xc) / n as f64;
    if cov.trace() <= 0.0 {
        return Ok(out);
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let prev_dirs = prev
        .map(|e| &e.directions)
        .filter(|d| d.nrows() == c && d.ncols() >= p);
    for (j, &col) in order.iter().take(p).enumerate() {
        let mut v = eig.eigenvectors.column(col).into_owned();
        let flip = match prev_dirs.map(|d| d.column(j).dot(&v)) {
            Some(dot) if dot != 0.0 => dot < 0.0,
            _ => largest_loading(&v) < 0.0,
        };
        if flip {
            v.neg_mut();
        }
        out.directions.set_column(j, &v);
        out.explained_power[j] = eig.eigenvalues[col].max(0.0);
    }
    let proj = &xc * &out.directions;
    out.projections.rows_mut(0, n).copy_from(&proj);
    Ok(out)
}

fn largest_loading(v: &DVector<f64>) -> f64 {
    v.iter()
        .copied()
        .fold(0.0_f64, |best, x| if x.abs() > best.abs() { x } else { best })
}

/// Mean square of one projection over consecutive windows of `window` rows.
/// Only the epoch's valid rows are used; a short trailing window is kept.
pub fn projection_power(epoch: &Epoch, component: usize, window: usize) -> Result<Vec<f64>> {
    if window == 0 || window > epoch.data.nrows() {
        return Err(Error::Parameter(format!(
            "power window {window} must be in 1..={}",
            epoch.data.nrows()
        )));
    }
    if component >= epoch.projections.ncols() {
        return Err(Error::Parameter(format!(
            "component {component} has not been fitted"
        )));
    }
    let x = epoch.projection(component);
    Ok(x
        .chunks(window)
        .map(|w| w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64)
        .collect())
}
