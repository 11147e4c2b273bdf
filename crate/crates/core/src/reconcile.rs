//! Reconciliation of base forecasts into coherent forecasts.
//!
//! Every method here is a reconciliation matrix `P` (|B| x |N|) followed by
//! aggregation: `y~ = S P y^`. MinT uses the sample covariance `W` of
//! in-sample base-forecast residuals:
//! `P = (S^T W^-1 S)^-1 S^T W^-1`.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};
use crate::hierarchy::{Hierarchy, SummingMatrix};
use crate::matrix::Matrix;
use crate::panel::SeriesPanel;

/// Initial ridge multiplier on `mean(diag(W))`.
pub const RIDGE_START: f64 = 1e-8;
/// Largest ridge multiplier tried before giving up.
pub const RIDGE_MAX: f64 = 1e-2;

/// `P`, mapping all-node base forecasts to bottom-level forecasts.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconciliationMatrix(pub Matrix);

impl ReconciliationMatrix {
    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    /// `S P y^` for every column of `base`.
    pub fn apply(&self, h: &Hierarchy, base: &Matrix) -> Result<Matrix> {
        if base.rows() != self.0.cols() {
            return Err(Error::Shape(format!(
                "base forecasts have {} rows, reconciliation expects {}",
                base.rows(),
                self.0.cols()
            )));
        }
        h.aggregate_bottom(&self.0.matmul(base))
    }
}

/// `P = [O, I]`.
pub fn bottom_up_matrix(h: &Hierarchy) -> ReconciliationMatrix {
    let (nb, nu) = (h.n_bottom(), h.n_upper());
    let mut p = Matrix::zeros(nb, h.n_nodes());
    for b in 0..nb {
        p[(b, nu + b)] = 1.0;
    }
    ReconciliationMatrix(p)
}

/// `P = [p, O]`.
pub fn top_down_matrix(h: &Hierarchy, proportions: &[f64]) -> Result<ReconciliationMatrix> {
    check_len("proportions", proportions.len(), h.n_bottom())?;
    let mut p = Matrix::zeros(h.n_bottom(), h.n_nodes());
    for (b, &v) in proportions.iter().enumerate() {
        p[(b, 0)] = v;
    }
    Ok(ReconciliationMatrix(p))
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Shape(format!("{what}: expected {want}, got {got}")));
    }
    Ok(())
}

/// Aggregates bottom-level base forecasts (`|B| x T`).
pub fn bottom_up(h: &Hierarchy, base_bottom: &Matrix) -> Result<Matrix> {
    h.aggregate_bottom(base_bottom)
}

/// `p_i = sum_t y_it / sum_t y_1t` over the training period.
///
/// On standardized panels the proportions need not be positive or sum to
/// one, since every row was scaled on its own.
pub fn historical_proportions(panel: &SeriesPanel, h: &Hierarchy) -> Result<Vec<f64>> {
    let n = panel.train_len();
    let values = panel.values();
    let root_total: f64 = values.row(0)[..n].iter().sum();
    if root_total == 0.0 || !root_total.is_finite() {
        return Err(Error::ZeroRootTotal);
    }
    Ok((h.n_upper()..h.n_nodes())
        .map(|r| values.row(r)[..n].iter().sum::<f64>() / root_total)
        .collect())
}

/// Splits a root-level forecast row by fixed proportions and aggregates.
pub fn top_down(h: &Hierarchy, root: &[f64], proportions: &[f64]) -> Result<Matrix> {
    check_len("proportions", proportions.len(), h.n_bottom())?;
    let mut bottom = Matrix::zeros(h.n_bottom(), root.len());
    for (b, &p) in proportions.iter().enumerate() {
        for (t, &r) in root.iter().enumerate() {
            bottom[(b, t)] = r * p;
        }
    }
    h.aggregate_bottom(&bottom)
}

/// Sample covariance (denominator n) of residual vectors `actual - fitted`,
/// one column per timepoint.
pub fn estimate_w_sample(actual: &Matrix, fitted: &Matrix) -> Result<Matrix> {
    if actual.shape() != fitted.shape() {
        return Err(Error::Shape("actual and fitted shapes differ".into()));
    }
    let (n_nodes, n_obs) = actual.shape();
    if n_obs < n_nodes + 1 {
        return Err(Error::TooFewResiduals {
            needed: n_nodes + 1,
            got: n_obs,
        });
    }
    let mut resid = Matrix::zeros(n_nodes, n_obs);
    for r in 0..n_nodes {
        for t in 0..n_obs {
            resid[(r, t)] = actual[(r, t)] - fitted[(r, t)];
        }
    }
    if !resid.is_finite() {
        return Err(Error::InvalidParameter("non-finite residual".into()));
    }
    let mean: Vec<f64> = (0..n_nodes)
        .map(|r| resid.row(r).iter().sum::<f64>() / n_obs as f64)
        .collect();
    let mut w = Matrix::zeros(n_nodes, n_nodes);
    for i in 0..n_nodes {
        for j in 0..=i {
            let mut acc = 0.0;
            for t in 0..n_obs {
                acc += (resid[(i, t)] - mean[i]) * (resid[(j, t)] - mean[j]);
            }
            let v = acc / n_obs as f64;
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
    Ok(w)
}

/// Output of [`mint_reconcile`].
#[derive(Debug, Clone, PartialEq)]
pub struct MintResult {
    pub forecasts: Matrix,
    pub p: ReconciliationMatrix,
    /// Ridge multiplier that made `W` factorizable.
    pub gamma: f64,
    /// `(max L_ii / min L_ii)^2` from the Cholesky factor of the inflated `W`.
    pub condition_estimate: f64,
}

fn to_dmatrix(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

fn from_dmatrix(m: &DMatrix<f64>) -> Matrix {
    let mut out = Matrix::zeros(m.nrows(), m.ncols());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out[(r, c)] = m[(r, c)];
        }
    }
    out
}

fn factor_with_ridge(w: &Matrix) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let n = w.rows();
    let scale = (0..n).map(|i| w[(i, i)]).sum::<f64>() / n as f64;
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::SingularCovariance { gamma: 0.0 });
    }
    let base = to_dmatrix(w);
    let mut gamma = RIDGE_START;
    while gamma <= RIDGE_MAX * (1.0 + 1e-9) {
        let mut inflated = base.clone();
        for i in 0..n {
            inflated[(i, i)] += gamma * scale;
        }
        if let Some(chol) = Cholesky::new(inflated) {
            return Ok((chol, gamma));
        }
        gamma *= 10.0;
    }
    Err(Error::SingularCovariance { gamma: RIDGE_MAX })
}

/// MinT reconciliation matrix for covariance `W` (|N| x |N|).
pub fn mint_matrix(h: &Hierarchy, w: &Matrix) -> Result<(ReconciliationMatrix, f64, f64)> {
    let n = h.n_nodes();
    if w.shape() != (n, n) {
        return Err(Error::Shape(format!("W must be {n}x{n}, got {:?}", w.shape())));
    }
    if !w.is_finite() {
        return Err(Error::InvalidParameter("non-finite covariance entry".into()));
    }
    let (chol, gamma) = factor_with_ridge(w)?;
    let diag: Vec<f64> = (0..n).map(|i| chol.l_dirty()[(i, i)]).collect();
    let (lo, hi) = diag
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &d| (lo.min(d), hi.max(d)));
    let condition_estimate = (hi / lo) * (hi / lo);

    let s = to_dmatrix(&h.summing_matrix().0);
    // X = W^-1 S, A = S^T X, P = A^-1 X^T
    let x = chol.solve(&s);
    let a = s.transpose() * &x;
    let a_chol = Cholesky::new(a).ok_or(Error::SingularCovariance { gamma })?;
    let p = a_chol.solve(&x.transpose());
    Ok((ReconciliationMatrix(from_dmatrix(&p)), gamma, condition_estimate))
}

/// Trace-minimizing reconciliation of all-node base forecasts
/// (`|N| x T`).
pub fn mint_reconcile(h: &Hierarchy, base_all: &Matrix, w: &Matrix) -> Result<MintResult> {
    let (p, gamma, condition_estimate) = mint_matrix(h, w)?;
    let forecasts = p.apply(h, base_all)?;
    Ok(MintResult {
        forecasts,
        p,
        gamma,
        condition_estimate,
    })
}

/// `max |S P S - S|`; zero for any `P` that keeps unbiased base forecasts
/// unbiased.
pub fn check_unbiasedness(p: &ReconciliationMatrix, s: &SummingMatrix) -> f64 {
    let sps = s.0.matmul(&p.0).matmul(&s.0);
    sps.max_abs_diff(&s.0)
}
