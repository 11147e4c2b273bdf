//! Node-by-time observation panels, standardization and lagged inputs.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::hierarchy::Hierarchy;
use crate::matrix::Matrix;

/// Observations for every node of a hierarchy, one row per node in
/// canonical order and one column per timepoint.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPanel {
    nodes: Vec<u32>,
    times: Vec<i64>,
    values: Matrix,
    train_len: usize,
}

impl SeriesPanel {
    /// Timestamps default to `1..=T`.
    pub fn new(h: &Hierarchy, values: Matrix, train_len: usize) -> Result<Self> {
        let times = (1..=values.cols() as i64).collect();
        Self::with_times(h, values, train_len, times)
    }

    pub fn with_times(h: &Hierarchy, values: Matrix, train_len: usize, times: Vec<i64>) -> Result<Self> {
        if values.rows() != h.n_nodes() {
            return Err(Error::Shape(format!(
                "panel has {} rows but hierarchy has {} nodes",
                values.rows(),
                h.n_nodes()
            )));
        }
        let t = values.cols();
        if t < 2 {
            return Err(Error::Panel(format!("need at least 2 timepoints, got {t}")));
        }
        if train_len < 1 || train_len > t - 1 {
            return Err(Error::Panel(format!("train_len {train_len} outside [1, {}]", t - 1)));
        }
        if times.len() != t {
            return Err(Error::Panel(format!("{} timestamps for {t} columns", times.len())));
        }
        if let Some(w) = times.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::Panel(format!("timestamps not strictly increasing at {}", w[1])));
        }
        if !values.is_finite() {
            return Err(Error::Panel("non-finite observation".into()));
        }
        Ok(Self {
            nodes: h.node_ids().to_vec(),
            times,
            values,
            train_len,
        })
    }

    pub fn node_ids(&self) -> &[u32] {
        &self.nodes
    }

    pub fn times(&self) -> &[i64] {
        &self.times
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn n_nodes(&self) -> usize {
        self.values.rows()
    }

    pub fn len(&self) -> usize {
        self.values.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.values.cols() == 0
    }

    pub fn train_len(&self) -> usize {
        self.train_len
    }

    pub fn test_len(&self) -> usize {
        self.len() - self.train_len
    }

    /// Same data with a different training boundary.
    pub fn with_train_len(&self, train_len: usize) -> Result<Self> {
        if train_len < 1 || train_len > self.len() - 1 {
            return Err(Error::Panel(format!(
                "train_len {train_len} outside [1, {}]",
                self.len() - 1
            )));
        }
        Ok(Self {
            train_len,
            ..self.clone()
        })
    }

    /// Full observation vector `y_t` (column `t`, zero-based).
    pub fn observation(&self, t: usize) -> Vec<f64> {
        self.values.column(t)
    }

    /// Test-period columns.
    pub fn test_values(&self) -> Matrix {
        self.values.columns(self.train_len, self.len())
    }
}

/// Per-node affine map fitted on the training period.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Scaler {
    pub fn transform(&self, values: &Matrix) -> Matrix {
        self.map(values, |v, m, s| (v - m) / s)
    }

    pub fn inverse(&self, values: &Matrix) -> Matrix {
        self.map(values, |v, m, s| v * s + m)
    }

    fn map(&self, values: &Matrix, f: impl Fn(f64, f64, f64) -> f64) -> Matrix {
        assert_eq!(values.rows(), self.mean.len());
        let mut out = values.clone();
        for r in 0..out.rows() {
            let (m, s) = (self.mean[r], self.sd[r]);
            out.row_mut(r).iter_mut().for_each(|v| *v = f(*v, m, s));
        }
        out
    }
}

/// Standardizes every node row with its own training-period mean and
/// sample standard deviation (denominator n - 1), applied over the whole
/// series. Upper-level rows are scaled independently of their children, so
/// the result is generally no longer coherent.
pub fn standardize(panel: &SeriesPanel) -> Result<(SeriesPanel, Scaler)> {
    let n = panel.train_len;
    if n < 2 {
        return Err(Error::Panel("standardization needs at least 2 training points".into()));
    }
    let mut mean = Vec::with_capacity(panel.n_nodes());
    let mut sd = Vec::with_capacity(panel.n_nodes());
    for (r, &id) in panel.nodes.iter().enumerate() {
        let train = &panel.values.row(r)[..n];
        let m = train.iter().sum::<f64>() / n as f64;
        let ss: f64 = train.iter().map(|v| (v - m) * (v - m)).sum();
        let s = libm::sqrt(ss / (n - 1) as f64);
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::ZeroVariance(id));
        }
        mean.push(m);
        sd.push(s);
    }
    let scaler = Scaler { mean, sd };
    let out = SeriesPanel {
        values: scaler.transform(&panel.values),
        ..panel.clone()
    };
    Ok((out, scaler))
}

/// Which rows feed the lagged input vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputRows {
    /// Bottom-level nodes only.
    Bottom,
    /// Every node.
    All,
}

/// Lagged input for a forecast at zero-based column `t`:
/// `(y_{t-L}, ..., y_{t-1})` with the oldest lag first, each block in
/// canonical bottom order. Requires `L <= t <= T`.
pub fn lagged_input(panel: &SeriesPanel, h: &Hierarchy, t: usize, lag: usize) -> Result<Vec<f64>> {
    lagged_rows(panel, h, InputRows::Bottom, t, lag)
}

pub fn lagged_rows(panel: &SeriesPanel, h: &Hierarchy, rows: InputRows, t: usize, lag: usize) -> Result<Vec<f64>> {
    if lag == 0 || t < lag {
        return Err(Error::InsufficientLags { t, lag });
    }
    if t > panel.len() {
        return Err(Error::Panel(format!("timepoint {t} beyond panel length {}", panel.len())));
    }
    let first = match rows {
        InputRows::Bottom => h.n_upper(),
        InputRows::All => 0,
    };
    let width = panel.n_nodes() - first;
    let mut out = Vec::with_capacity(lag * width);
    for s in t - lag..t {
        for r in first..panel.n_nodes() {
            out.push(panel.values[(r, s)]);
        }
    }
    Ok(out)
}
