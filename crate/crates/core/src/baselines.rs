//! Moving-average and exponential-smoothing forecasters.
//!
//! Both are one-step-ahead: the forecast for column `t` only reads actual
//! observations before `t`. Forecasts are produced up to and including
//! column `len`, one step past the end of the series.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::panel::SeriesPanel;

/// Forecasts for columns `first..first + values.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct OneStep {
    pub first: usize,
    pub values: Vec<f64>,
}

impl OneStep {
    pub fn at(&self, t: usize) -> Option<f64> {
        t.checked_sub(self.first).and_then(|k| self.values.get(k).copied())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BaselineChoice {
    MovingAverage(usize),
    ExponentialSmoothing(f64),
}

impl BaselineChoice {
    pub fn label(&self) -> alloc::string::String {
        match self {
            BaselineChoice::MovingAverage(n) => format!("MA({n})"),
            BaselineChoice::ExponentialSmoothing(a) => format!("ES({a:.2})"),
        }
    }

    pub fn forecast(&self, series: &[f64]) -> Result<OneStep> {
        match *self {
            BaselineChoice::MovingAverage(n) => ma_forecast(series, n),
            BaselineChoice::ExponentialSmoothing(a) => es_forecast(series, a),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BaselineGrid {
    MovingAverage(Vec<usize>),
    ExponentialSmoothing(Vec<f64>),
}

impl BaselineGrid {
    /// n in 1..=24.
    pub fn default_ma() -> Self {
        BaselineGrid::MovingAverage((1..=24).collect())
    }

    /// alpha in {0.00, 0.01, ..., 1.00}.
    pub fn default_es() -> Self {
        BaselineGrid::ExponentialSmoothing((0..=100).map(|k| k as f64 / 100.0).collect())
    }

    fn choices(&self) -> Vec<BaselineChoice> {
        match self {
            BaselineGrid::MovingAverage(g) => g.iter().map(|&n| BaselineChoice::MovingAverage(n)).collect(),
            BaselineGrid::ExponentialSmoothing(g) => {
                g.iter().map(|&a| BaselineChoice::ExponentialSmoothing(a)).collect()
            }
        }
    }
}

/// Mean of the previous `n` observations.
pub fn ma_forecast(series: &[f64], n: usize) -> Result<OneStep> {
    if n == 0 || n >= series.len() {
        return Err(Error::InvalidParameter(format!(
            "moving-average window {n} must be in [1, {})",
            series.len()
        )));
    }
    let values = (n..=series.len())
        .map(|t| series[t - n..t].iter().sum::<f64>() / n as f64)
        .collect();
    Ok(OneStep { first: n, values })
}

/// `f_t = alpha y_{t-1} + (1 - alpha) f_{t-1}`, seeded with `f_0 = y_0`.
/// The seed is not itself reported; forecasts start at column 1.
pub fn es_forecast(series: &[f64], alpha: f64) -> Result<OneStep> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!("smoothing parameter {alpha} outside [0, 1]")));
    }
    if series.len() < 2 {
        return Err(Error::InvalidParameter("exponential smoothing needs at least 2 points".into()));
    }
    let mut prev = series[0];
    let values = (1..=series.len())
        .map(|t| {
            prev = alpha * series[t - 1] + (1.0 - alpha) * prev;
            prev
        })
        .collect();
    Ok(OneStep { first: 1, values })
}

fn training_score(panel: &SeriesPanel, choice: BaselineChoice) -> Result<f64> {
    let values = panel.values();
    let train_len = panel.train_len();
    let mut total = 0.0;
    for r in 0..values.rows() {
        let series = values.row(r);
        let fc = choice.forecast(series)?;
        let (mut ss, mut count) = (0.0, 0usize);
        for (t, y) in series.iter().enumerate().take(train_len).skip(fc.first) {
            let e = y - fc.at(t).expect("forecast defined for t >= first");
            ss += e * e;
            count += 1;
        }
        if count == 0 {
            return Err(Error::InvalidParameter(format!(
                "{} leaves no training timepoints to score",
                choice.label()
            )));
        }
        total += libm::sqrt(ss / count as f64);
    }
    Ok(total / values.rows() as f64)
}

/// Picks the grid value minimizing mean training-period RMSE over all
/// nodes. Ties go to the shortest memory: smaller `n`, larger `alpha`.
pub fn select_param(panel: &SeriesPanel, grid: &BaselineGrid) -> Result<BaselineChoice> {
    let mut choices = grid.choices();
    if choices.is_empty() {
        return Err(Error::EmptyGrid);
    }
    choices.sort_by(|a, b| match (a, b) {
        (BaselineChoice::MovingAverage(x), BaselineChoice::MovingAverage(y)) => x.cmp(y),
        (BaselineChoice::ExponentialSmoothing(x), BaselineChoice::ExponentialSmoothing(y)) => y.total_cmp(x),
        _ => core::cmp::Ordering::Equal,
    });
    let mut best: Option<(f64, BaselineChoice)> = None;
    for c in choices {
        let score = training_score(panel, c)?;
        if best.is_none_or(|(s, _)| score < s) {
            best = Some((score, c));
        }
    }
    Ok(best.expect("grid is non-empty").1)
}

/// Forecasts every node over the test period.
pub fn forecast_test(panel: &SeriesPanel, choice: BaselineChoice) -> Result<Matrix> {
    let values = panel.values();
    let mut out = Matrix::zeros(values.rows(), panel.test_len());
    for r in 0..values.rows() {
        let fc = choice.forecast(values.row(r))?;
        for (k, t) in (panel.train_len()..panel.len()).enumerate() {
            out[(r, k)] = fc.at(t).ok_or_else(|| {
                Error::InvalidParameter(format!("{} undefined at column {t}", choice.label()))
            })?;
        }
    }
    Ok(out)
}
