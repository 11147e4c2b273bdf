//! Forecast accuracy metrics and their aggregation across levels and trials.

use alloc::string::String;
use alloc::vec::Vec;
use alloc::{format, vec};

use crate::error::{Error, Result};
use crate::hierarchy::Hierarchy;
use crate::matrix::Matrix;

pub fn rmse(actual: &[f64], forecast: &[f64]) -> Result<f64> {
    if actual.len() != forecast.len() {
        return Err(Error::Shape(format!(
            "{} actual values vs {} forecasts",
            actual.len(),
            forecast.len()
        )));
    }
    if actual.is_empty() {
        return Err(Error::InvalidParameter("RMSE over an empty period".into()));
    }
    let ss: f64 = actual.iter().zip(forecast).map(|(y, f)| (y - f) * (y - f)).sum();
    Ok(libm::sqrt(ss / actual.len() as f64))
}

/// Level aggregates of per-node values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelSummary {
    pub root: f64,
    pub mid: f64,
    pub bottom: f64,
    /// Unweighted mean over every node, root included.
    pub average: f64,
}

impl LevelSummary {
    pub fn from_per_node(h: &Hierarchy, per_node: &[f64]) -> Self {
        let nu = h.n_upper();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        Self {
            root: per_node[0],
            mid: mean(&per_node[1..nu]),
            bottom: mean(&per_node[nu..]),
            average: mean(per_node),
        }
    }

    pub fn get(&self, level: LevelName) -> f64 {
        match level {
            LevelName::Root => self.root,
            LevelName::Mid => self.mid,
            LevelName::Bottom => self.bottom,
            LevelName::Average => self.average,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelName {
    Root,
    Mid,
    Bottom,
    Average,
}

impl LevelName {
    pub const ALL: [LevelName; 4] = [LevelName::Root, LevelName::Mid, LevelName::Bottom, LevelName::Average];

    pub fn label(self) -> &'static str {
        match self {
            LevelName::Root => "root",
            LevelName::Mid => "mid",
            LevelName::Bottom => "bottom",
            LevelName::Average => "average",
        }
    }
}

/// Test-period RMSE of one method, per node and per level.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub label: String,
    pub nodes: Vec<u32>,
    pub per_node: Vec<f64>,
    pub levels: LevelSummary,
}

impl EvalReport {
    /// `actual` and `forecast` are `|N| x |T^|` in canonical order.
    pub fn new(h: &Hierarchy, label: impl Into<String>, actual: &Matrix, forecast: &Matrix) -> Result<Self> {
        if actual.shape() != forecast.shape() || actual.rows() != h.n_nodes() {
            return Err(Error::Shape(format!(
                "actual {:?} and forecast {:?} must both be {} rows",
                actual.shape(),
                forecast.shape(),
                h.n_nodes()
            )));
        }
        let per_node = (0..actual.rows())
            .map(|r| rmse(actual.row(r), forecast.row(r)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_per_node(h, label, per_node))
    }

    pub fn from_per_node(h: &Hierarchy, label: impl Into<String>, per_node: Vec<f64>) -> Self {
        Self {
            label: label.into(),
            nodes: h.node_ids().to_vec(),
            levels: LevelSummary::from_per_node(h, &per_node),
            per_node,
        }
    }
}

/// Mean and confidence half-width of one quantity across trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub mean: f64,
    pub half_width: f64,
}

/// Per-node and per-level means over trials with `t * sd / sqrt(n)`
/// half-widths.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSummary {
    pub label: String,
    pub nodes: Vec<u32>,
    pub per_node: Vec<Interval>,
    pub root: Interval,
    pub mid: Interval,
    pub bottom: Interval,
    pub average: Interval,
    pub trials: usize,
}

/// Mean and `critical * sd / sqrt(n)` with the sample sd (n - 1).
pub fn interval(values: &[f64], critical: f64) -> Interval {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Interval {
        mean,
        half_width: critical * libm::sqrt(var) / libm::sqrt(n),
    }
}

impl TrialSummary {
    /// `critical` is the two-sided quantile for `reports.len() - 1` degrees
    /// of freedom (e.g. 2.045 for 30 trials at 95%).
    pub fn from_reports(reports: &[EvalReport], critical: f64) -> Result<Self> {
        if reports.len() < 2 {
            return Err(Error::TooFewTrials {
                needed: 2,
                got: reports.len(),
            });
        }
        let first = &reports[0];
        if reports.iter().any(|r| r.nodes != first.nodes) {
            return Err(Error::Shape("trial reports cover different nodes".into()));
        }
        let column = |f: &dyn Fn(&EvalReport) -> f64| {
            let v: Vec<f64> = reports.iter().map(f).collect();
            interval(&v, critical)
        };
        let per_node = (0..first.nodes.len()).map(|i| column(&|r| r.per_node[i])).collect();
        Ok(Self {
            label: first.label.clone(),
            nodes: first.nodes.clone(),
            per_node,
            root: column(&|r| r.levels.root),
            mid: column(&|r| r.levels.mid),
            bottom: column(&|r| r.levels.bottom),
            average: column(&|r| r.levels.average),
            trials: reports.len(),
        })
    }
}

/// First 1-based epoch whose value lies within `frac` of the final value.
pub fn first_epoch_within(trace: &[f64], frac: f64) -> Option<usize> {
    let last = *trace.last()?;
    trace
        .iter()
        .position(|v| libm::fabs(v - last) <= frac * libm::fabs(last))
        .map(|i| i + 1)
}

/// Subtracts `baseline` from every entry.
pub fn relative_to(values: &[f64], baseline: f64) -> Vec<f64> {
    values.iter().map(|v| v - baseline).collect()
}

/// Per-epoch test RMSE by level.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpochTrace {
    pub levels: Vec<LevelSummary>,
}

impl EpochTrace {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn series(&self, level: LevelName) -> Vec<f64> {
        self.levels.iter().map(|l| l.get(level)).collect()
    }

    /// Extends with copies of the last entry up to `len`.
    pub fn padded(&self, len: usize) -> Vec<LevelSummary> {
        let mut out = self.levels.clone();
        if let Some(&last) = out.last() {
            out.resize(len.max(out.len()), last);
        }
        out
    }
}

/// Column means of equal-length series after padding each with its last
/// value.
pub fn mean_padded(traces: &[EpochTrace]) -> Vec<LevelSummary> {
    let len = traces.iter().map(EpochTrace::len).max().unwrap_or(0);
    let mut acc = vec![
        LevelSummary {
            root: 0.0,
            mid: 0.0,
            bottom: 0.0,
            average: 0.0,
        };
        len
    ];
    let n = traces.iter().filter(|t| !t.is_empty()).count() as f64;
    for t in traces.iter().filter(|t| !t.is_empty()) {
        for (a, l) in acc.iter_mut().zip(t.padded(len)) {
            a.root += l.root / n;
            a.mid += l.mid / n;
            a.bottom += l.bottom / n;
            a.average += l.average / n;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[1.0, 2.0, 3.0], &[1.5, 2.5, 3.5]).unwrap(), 0.5);
        assert!((rmse(&[3.0, 4.0], &[0.0, 0.0]).unwrap() - 3.535_533_905_932_737_6).abs() < 1e-15);
        assert!(rmse(&[], &[]).is_err());
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn level_means() {
        let h = Hierarchy::small_example();
        let r = EvalReport::from_per_node(&h, "x", vec![7.0, 1.0, 3.0, 1.0, 2.0, 3.0, 6.0]);
        assert_eq!(r.levels.root, 7.0);
        assert_eq!(r.levels.mid, 2.0);
        assert_eq!(r.levels.bottom, 3.0);
        assert_eq!(r.levels.average, 23.0 / 7.0);
    }

    #[test]
    fn interval_two_points() {
        let iv = interval(&[0.0, 2.0], 12.706_204_736_174_7);
        assert_eq!(iv.mean, 1.0);
        assert!((iv.half_width - 12.706_204_736_174_7).abs() < 1e-12);
        assert_eq!(interval(&[3.0; 5], 2.776).half_width, 0.0);
    }

    #[test]
    fn summary_needs_two_trials() {
        let h = Hierarchy::small_example();
        let r = EvalReport::from_per_node(&h, "x", vec![1.0; 7]);
        assert!(matches!(
            TrialSummary::from_reports(&[r], 2.0),
            Err(Error::TooFewTrials { .. })
        ));
    }

    #[test]
    fn convergence_epoch() {
        assert_eq!(first_epoch_within(&[2.0, 1.5, 1.04, 1.0], 0.05), Some(3));
        assert_eq!(first_epoch_within(&[1.0], 0.05), Some(1));
        assert_eq!(first_epoch_within(&[], 0.05), None);
    }

    #[test]
    fn padded_mean() {
        let ls = |v| LevelSummary {
            root: v,
            mid: v,
            bottom: v,
            average: v,
        };
        let a = EpochTrace {
            levels: vec![ls(2.0), ls(1.0)],
        };
        let b = EpochTrace {
            levels: vec![ls(4.0), ls(3.0), ls(2.0)],
        };
        let m = mean_padded(&[a, b]);
        assert_eq!(m.iter().map(|l| l.root).collect::<Vec<_>>(), [3.0, 2.0, 1.5]);
    }
}
