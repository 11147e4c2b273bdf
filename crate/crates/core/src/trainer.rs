//! Structured-regularization objective and its backpropagation.
//!
//! For one timepoint with network output `u` (bottom-level forecasts) the
//! error is
//!
//! ```text
//! E_t = 1/2 |y_B - u|^2 + 1/2 |Lambda (y_U - H u)|^2
//! ```
//!
//! where `y_U` stacks the root and mid-level observations. Its gradient with
//! respect to `u` is `(u - y_B) + H^T Lambda^2 (H u - y_U)`, which is then
//! pushed through the hidden layer in the usual way. Training is full-batch
//! gradient descent: gradients are summed over every training timepoint,
//! one step of size `eta` is taken per epoch, and the run stops as soon as
//! an epoch fails to improve the objective by a relative margin `eps`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{Error, Result};
use crate::evaluate::rmse;
use crate::hierarchy::{Hierarchy, StructureMatrix};
use crate::matrix::Matrix;
use crate::neuralnet::{forward_into, init_params, Activation, ForwardTrace, NetworkDims, NetworkParams};
use crate::panel::{lagged_rows, InputRows, SeriesPanel};

/// Diagonal regularization weights, one per upper node (root first).
#[derive(Debug, Clone, PartialEq)]
pub struct RegWeights {
    lambda: Vec<f64>,
}

impl RegWeights {
    /// `lambda1` on the root, `lambda_m` on every mid-level node.
    pub fn new(h: &Hierarchy, lambda1: f64, lambda_m: f64) -> Result<Self> {
        let mut lambda = vec![lambda_m; h.n_upper()];
        lambda[0] = lambda1;
        Self::from_vec(lambda)
    }

    pub fn zero(h: &Hierarchy) -> Self {
        Self {
            lambda: vec![0.0; h.n_upper()],
        }
    }

    pub fn from_vec(lambda: Vec<f64>) -> Result<Self> {
        if let Some(l) = lambda.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "regularization weight {l} must be finite and >= 0"
            )));
        }
        Ok(Self { lambda })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.lambda
    }
}

/// What the network output is scored against.
#[derive(Debug, Clone, Copy)]
pub enum Objective<'a> {
    /// `1/2 |y - u|^2` against the trailing `u.len()` entries of `y_t`.
    Plain,
    /// Bottom-level residuals plus the weighted upper-level penalty.
    Structured {
        h: &'a StructureMatrix,
        reg: &'a RegWeights,
    },
}

/// Training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub eta: f64,
    pub eps: f64,
    /// Zero returns the initial parameters untouched.
    pub max_epochs: usize,
    pub activation: Activation,
    pub lag: usize,
    pub seed: u64,
    /// Defaults to twice the input width.
    pub hidden: Option<usize>,
    pub bias: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            eta: 1e-5,
            eps: 5e-5,
            max_epochs: 10_000,
            activation: Activation::Sigmoid,
            lag: 2,
            seed: 0,
            hidden: None,
            bias: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::InvalidParameter(format!("step size {} must be > 0", self.eta)));
        }
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(Error::InvalidParameter(format!("threshold {} must be > 0", self.eps)));
        }
        if self.lag == 0 {
            return Err(Error::InvalidParameter("lag must be >= 1".into()));
        }
        Ok(())
    }

    pub fn dims(&self, input: usize, output: usize) -> Result<NetworkDims> {
        NetworkDims::new(input, self.hidden.unwrap_or(2 * input), output, self.bias)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// An epoch improved the objective by less than the relative threshold.
    Converged,
    MaxEpochs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    pub params: NetworkParams,
    /// Objective after each epoch's update.
    pub objective: Vec<f64>,
    pub initial_objective: f64,
    pub epochs: usize,
    pub termination: Termination,
}

/// Per-parameter gradient, laid out like [`NetworkParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w2: Matrix,
    pub b2: Vec<f64>,
    pub w3: Matrix,
    pub b3: Vec<f64>,
}

impl Gradients {
    pub fn zeros(dims: NetworkDims) -> Self {
        let p = NetworkParams::zeros(dims);
        Self {
            w2: p.w2,
            b2: p.b2,
            w3: p.w3,
            b3: p.b3,
        }
    }

    fn clear(&mut self) {
        self.w2.as_mut_slice().fill(0.0);
        self.b2.fill(0.0);
        self.w3.as_mut_slice().fill(0.0);
        self.b3.fill(0.0);
    }

    /// Same order as [`NetworkParams::flatten`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::new();
        v.extend_from_slice(self.w2.as_slice());
        v.extend_from_slice(&self.b2);
        v.extend_from_slice(self.w3.as_slice());
        v.extend_from_slice(&self.b3);
        v
    }
}

fn check_target(objective: &Objective<'_>, u3_len: usize, y_len: usize) -> Result<()> {
    let ok = match objective {
        Objective::Plain => y_len >= u3_len,
        Objective::Structured { h, reg } => {
            let (nu, nb) = h.0.shape();
            nb == u3_len && y_len == nu + nb && reg.lambda.len() == nu
        }
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Shape(format!(
            "output of length {u3_len} incompatible with target of length {y_len}"
        )))
    }
}

/// Error for one timepoint; also writes `dE/du` into `delta3`.
fn error_and_delta(objective: &Objective<'_>, u3: &[f64], y: &[f64], delta3: &mut [f64]) -> f64 {
    match *objective {
        Objective::Plain => {
            let yb = &y[y.len() - u3.len()..];
            let mut ss = 0.0;
            for ((d, u), t) in delta3.iter_mut().zip(u3).zip(yb) {
                *d = u - t;
                ss += *d * *d;
            }
            0.5 * ss
        }
        Objective::Structured { h, reg } => {
            let nu = h.0.rows();
            let (yu, yb) = y.split_at(nu);
            let mut ss_b = 0.0;
            for ((d, u), t) in delta3.iter_mut().zip(u3).zip(yb) {
                *d = u - t;
                ss_b += *d * *d;
            }
            let mut ss_u = 0.0;
            for (k, (&l, &target)) in reg.lambda.iter().zip(yu).enumerate() {
                let row = h.0.row(k);
                let mut hu = 0.0;
                for (a, u) in row.iter().zip(u3) {
                    hu += a * u;
                }
                let r = hu - target;
                let weighted = l * r;
                ss_u += weighted * weighted;
                let w2 = l * l * r;
                for (d, a) in delta3.iter_mut().zip(row) {
                    *d += a * w2;
                }
            }
            0.5 * ss_b + 0.5 * ss_u
        }
    }
}

/// `E_t` for a given network output and full observation vector `y_t`
/// (upper nodes first, then bottoms).
pub fn error_at_t(u3: &[f64], y: &[f64], reg: &RegWeights, h: &StructureMatrix) -> Result<f64> {
    let objective = Objective::Structured { h, reg };
    check_target(&objective, u3.len(), y.len())?;
    let mut scratch = vec![0.0; u3.len()];
    Ok(error_and_delta(&objective, u3, y, &mut scratch))
}

/// `dE_t/du3 = (u3 - y_B) + H^T Lambda^2 (H u3 - y_U)`.
pub fn output_delta(u3: &[f64], y: &[f64], reg: &RegWeights, h: &StructureMatrix) -> Result<Vec<f64>> {
    let objective = Objective::Structured { h, reg };
    check_target(&objective, u3.len(), y.len())?;
    let mut delta = vec![0.0; u3.len()];
    error_and_delta(&objective, u3, y, &mut delta);
    Ok(delta)
}

/// `dE_t/du2 = (W3^T delta3) * f'(u2)`.
pub fn hidden_delta(delta3: &[f64], params: &NetworkParams, trace: &ForwardTrace, act: Activation) -> Vec<f64> {
    let mut out = vec![0.0; params.dims.hidden];
    hidden_delta_into(delta3, params, trace, act, &mut out);
    out
}

fn hidden_delta_into(delta3: &[f64], params: &NetworkParams, trace: &ForwardTrace, act: Activation, out: &mut [f64]) {
    params.w3.tr_mul_vec_into(delta3, out);
    for (d, &u) in out.iter_mut().zip(&trace.u2) {
        *d *= act.derivative(u);
    }
}

struct Workspace {
    trace: ForwardTrace,
    delta3: Vec<f64>,
    delta2: Vec<f64>,
}

impl Workspace {
    fn new(dims: NetworkDims) -> Self {
        Self {
            trace: ForwardTrace::new(dims),
            delta3: vec![0.0; dims.output],
            delta2: vec![0.0; dims.hidden],
        }
    }
}

fn accumulate(
    params: &NetworkParams,
    input: &[f64],
    y: &[f64],
    objective: &Objective<'_>,
    act: Activation,
    ws: &mut Workspace,
    grads: &mut Gradients,
) -> f64 {
    forward_into(params, input, act, &mut ws.trace);
    let e = error_and_delta(objective, &ws.trace.u3, y, &mut ws.delta3);
    hidden_delta_into(&ws.delta3, params, &ws.trace, act, &mut ws.delta2);

    let cols = params.dims.input;
    for (j, &d) in ws.delta2.iter().enumerate() {
        let row = &mut grads.w2.as_mut_slice()[j * cols..(j + 1) * cols];
        for (g, z) in row.iter_mut().zip(&ws.trace.z1) {
            *g += d * z;
        }
        grads.b2[j] += d;
    }
    let cols = params.dims.hidden;
    for (k, &d) in ws.delta3.iter().enumerate() {
        let row = &mut grads.w3.as_mut_slice()[k * cols..(k + 1) * cols];
        for (g, z) in row.iter_mut().zip(&ws.trace.z2) {
            *g += d * z;
        }
        grads.b3[k] += d;
    }
    e
}

/// Gradient of `E_t` with respect to every weight and bias.
pub fn gradients_at_t(
    params: &NetworkParams,
    input: &[f64],
    y: &[f64],
    objective: &Objective<'_>,
    act: Activation,
) -> Result<Gradients> {
    if input.len() != params.dims.input {
        return Err(Error::Shape(format!(
            "input has length {}, network expects {}",
            input.len(),
            params.dims.input
        )));
    }
    check_target(objective, params.dims.output, y.len())?;
    let mut ws = Workspace::new(params.dims);
    let mut g = Gradients::zeros(params.dims);
    accumulate(params, input, y, objective, act, &mut ws, &mut g);
    Ok(g)
}

/// `E_t` evaluated through a full forward pass.
pub fn objective_at_t(
    params: &NetworkParams,
    input: &[f64],
    y: &[f64],
    objective: &Objective<'_>,
    act: Activation,
) -> Result<f64> {
    check_target(objective, params.dims.output, y.len())?;
    let mut ws = Workspace::new(params.dims);
    forward_into(params, input, act, &mut ws.trace);
    Ok(error_and_delta(objective, &ws.trace.u3, y, &mut ws.delta3))
}

/// One training example: lagged input and the full observation vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: usize,
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

/// Examples for every column in `range`, inputs read from `rows`.
pub fn build_samples(
    panel: &SeriesPanel,
    h: &Hierarchy,
    rows: InputRows,
    lag: usize,
    range: Range<usize>,
) -> Result<Vec<Sample>> {
    range
        .map(|t| {
            Ok(Sample {
                t,
                input: lagged_rows(panel, h, rows, t, lag)?,
                target: panel.observation(t),
            })
        })
        .collect()
}

fn full_batch(
    params: &NetworkParams,
    samples: &[Sample],
    objective: &Objective<'_>,
    act: Activation,
    ws: &mut Workspace,
    grads: &mut Gradients,
) -> f64 {
    grads.clear();
    let mut total = 0.0;
    for s in samples {
        total += accumulate(params, &s.input, &s.target, objective, act, ws, grads);
    }
    total
}

fn step(params: &mut NetworkParams, grads: &Gradients, eta: f64) {
    let bias = params.dims.bias;
    let g = [grads.w2.as_slice(), &grads.b2[..], grads.w3.as_slice(), &grads.b3[..]];
    for (k, (p, g)) in params.blocks_mut().into_iter().zip(g).enumerate() {
        if k % 2 == 1 && !bias {
            continue;
        }
        for (w, d) in p.iter_mut().zip(g) {
            *w -= eta * d;
        }
    }
}

/// Full-batch gradient descent from `init`. `on_epoch(epoch, params)` is
/// called after every update with the 1-based epoch number.
pub fn fit<F>(
    init: NetworkParams,
    samples: &[Sample],
    objective: &Objective<'_>,
    cfg: &TrainConfig,
    mut on_epoch: F,
) -> Result<TrainResult>
where
    F: FnMut(usize, &NetworkParams),
{
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::InvalidParameter("no training samples".into()));
    }
    for s in samples {
        if s.input.len() != init.dims.input {
            return Err(Error::Shape(format!(
                "sample at column {} has input length {}, network expects {}",
                s.t,
                s.input.len(),
                init.dims.input
            )));
        }
        check_target(objective, init.dims.output, s.target.len())?;
    }

    let act = cfg.activation;
    let mut params = init;
    let mut ws = Workspace::new(params.dims);
    let mut grads = Gradients::zeros(params.dims);
    let initial_objective = full_batch(&params, samples, objective, act, &mut ws, &mut grads);
    if !initial_objective.is_finite() {
        return Err(Error::Divergence { epoch: 0 });
    }

    let mut trace = Vec::new();
    let mut incumbent = f64::INFINITY;
    let mut termination = Termination::MaxEpochs;
    for epoch in 1..=cfg.max_epochs {
        step(&mut params, &grads, cfg.eta);
        // gradients at the new point are reused by the next epoch
        let e = full_batch(&params, samples, objective, act, &mut ws, &mut grads);
        if !e.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        trace.push(e);
        on_epoch(epoch, &params);
        if e > (1.0 - cfg.eps) * incumbent {
            termination = Termination::Converged;
            break;
        }
        incumbent = e;
    }
    Ok(TrainResult {
        params,
        epochs: trace.len(),
        objective: trace,
        initial_objective,
        termination,
    })
}

fn train_with<F>(
    panel: &SeriesPanel,
    h: &Hierarchy,
    rows: InputRows,
    output: usize,
    objective: &Objective<'_>,
    cfg: &TrainConfig,
    on_epoch: F,
) -> Result<TrainResult>
where
    F: FnMut(usize, &NetworkParams),
{
    cfg.validate()?;
    if panel.train_len() <= cfg.lag {
        return Err(Error::InsufficientLags {
            t: panel.train_len(),
            lag: cfg.lag,
        });
    }
    let samples = build_samples(panel, h, rows, cfg.lag, cfg.lag..panel.train_len())?;
    let dims = cfg.dims(samples[0].input.len(), output)?;
    fit(init_params(dims, cfg.seed), &samples, objective, cfg, on_epoch)
}

/// Bottom-level network trained on the structured objective over the
/// training period. Inputs are lagged bottom-level observations.
pub fn train_structured<F>(
    panel: &SeriesPanel,
    h: &Hierarchy,
    reg: &RegWeights,
    cfg: &TrainConfig,
    on_epoch: F,
) -> Result<TrainResult>
where
    F: FnMut(usize, &NetworkParams),
{
    if reg.lambda.len() != h.n_upper() {
        return Err(Error::Shape(format!(
            "{} regularization weights for {} upper nodes",
            reg.lambda.len(),
            h.n_upper()
        )));
    }
    let sm = h.structure_matrix();
    let objective = Objective::Structured { h: &sm, reg };
    train_with(panel, h, InputRows::Bottom, h.n_bottom(), &objective, cfg, on_epoch)
}

/// Bottom-level network trained on bottom-level residuals alone.
pub fn train_bottom<F>(panel: &SeriesPanel, h: &Hierarchy, cfg: &TrainConfig, on_epoch: F) -> Result<TrainResult>
where
    F: FnMut(usize, &NetworkParams),
{
    train_with(panel, h, InputRows::Bottom, h.n_bottom(), &Objective::Plain, cfg, on_epoch)
}

/// Network producing base forecasts for every node from lagged
/// observations of every node.
pub fn train_all_nodes<F>(panel: &SeriesPanel, h: &Hierarchy, cfg: &TrainConfig, on_epoch: F) -> Result<TrainResult>
where
    F: FnMut(usize, &NetworkParams),
{
    train_with(panel, h, InputRows::All, h.n_nodes(), &Objective::Plain, cfg, on_epoch)
}

/// Network outputs for every column in `range`, one column each.
pub fn predict(
    params: &NetworkParams,
    panel: &SeriesPanel,
    h: &Hierarchy,
    rows: InputRows,
    cfg: &TrainConfig,
    range: Range<usize>,
) -> Result<Matrix> {
    let mut out = Matrix::zeros(params.dims.output, range.len());
    let mut trace = ForwardTrace::new(params.dims);
    for (k, t) in range.enumerate() {
        let input = lagged_rows(panel, h, rows, t, cfg.lag)?;
        if input.len() != params.dims.input {
            return Err(Error::Shape("input width does not match network".into()));
        }
        forward_into(params, &input, cfg.activation, &mut trace);
        out.set_column(k, &trace.u3);
    }
    Ok(out)
}

/// Coherent forecasts `S u3` for every column in `range`.
pub fn predict_bottom_up(
    params: &NetworkParams,
    panel: &SeriesPanel,
    h: &Hierarchy,
    cfg: &TrainConfig,
    range: Range<usize>,
) -> Result<Matrix> {
    let bottom = predict(params, panel, h, InputRows::Bottom, cfg, range)?;
    h.aggregate_bottom(&bottom)
}

/// `0.0, 0.1, ..., 3.0`.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..=30).map(|k| k as f64 / 10.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaScore {
    pub lambda1: f64,
    pub lambda_m: f64,
    /// Mean validation RMSE over all nodes.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaTuning {
    pub best: LambdaScore,
    pub scores: Vec<LambdaScore>,
}

/// Splits the training period into a fit prefix (first 75%) and a
/// validation tail.
pub fn holdout_split(panel: &SeriesPanel, lag: usize) -> Result<(usize, Range<usize>)> {
    let fit_len = panel.train_len() * 3 / 4;
    if fit_len <= lag || fit_len >= panel.train_len() {
        return Err(Error::Panel(format!(
            "training period of {} cannot be split for hold-out validation with lag {lag}",
            panel.train_len()
        )));
    }
    Ok((fit_len, fit_len..panel.train_len()))
}

/// Trains on the fit prefix and scores bottom-up forecasts on the
/// validation tail.
pub fn holdout_score(panel: &SeriesPanel, h: &Hierarchy, lambda1: f64, lambda_m: f64, cfg: &TrainConfig) -> Result<f64> {
    let (fit_len, validation) = holdout_split(panel, cfg.lag)?;
    let reg = RegWeights::new(h, lambda1, lambda_m)?;
    let fit_panel = panel.with_train_len(fit_len)?;
    let result = train_structured(&fit_panel, h, &reg, cfg, |_, _| {})?;
    let forecast = predict_bottom_up(&result.params, panel, h, cfg, validation.clone())?;
    let actual = panel.values().columns(validation.start, validation.end);
    let mut total = 0.0;
    for r in 0..actual.rows() {
        total += rmse(actual.row(r), forecast.row(r))?;
    }
    Ok(total / actual.rows() as f64)
}

/// Lowest score wins; ties go to smaller `lambda1 + lambda_m`, then smaller
/// `lambda1`.
pub fn pick_lambda(scores: &[LambdaScore]) -> Result<LambdaScore> {
    let key = |s: &LambdaScore| (s.score, s.lambda1 + s.lambda_m, s.lambda1);
    scores
        .iter()
        .copied()
        .min_by(|a, b| {
            let (ka, kb) = (key(a), key(b));
            ka.0.total_cmp(&kb.0)
                .then(ka.1.total_cmp(&kb.1))
                .then(ka.2.total_cmp(&kb.2))
        })
        .ok_or(Error::EmptyGrid)
}

/// Hold-out search over the product grid `grid1 x grid_m`.
pub fn tune_lambda(
    panel: &SeriesPanel,
    h: &Hierarchy,
    grid1: &[f64],
    grid_m: &[f64],
    cfg: &TrainConfig,
) -> Result<LambdaTuning> {
    if grid1.is_empty() || grid_m.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut scores = Vec::with_capacity(grid1.len() * grid_m.len());
    for &lambda1 in grid1 {
        for &lambda_m in grid_m {
            let score = holdout_score(panel, h, lambda1, lambda_m, cfg)?;
            scores.push(LambdaScore {
                lambda1,
                lambda_m,
                score,
            });
        }
    }
    let best = pick_lambda(&scores)?;
    Ok(LambdaTuning { best, scores })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuralnet::forward;

    fn fig1() -> (Hierarchy, StructureMatrix) {
        let h = Hierarchy::small_example();
        let s = h.structure_matrix();
        (h, s)
    }

    #[test]
    fn error_hand_example() {
        let (h, sm) = fig1();
        let reg = RegWeights::new(&h, 1.0, 1.0).unwrap();
        let y = [4.0, 2.0, 2.0, 1.0, 1.0, 1.0, 1.0];
        assert_eq!(error_at_t(&[0.0; 4], &y, &reg, &sm).unwrap(), 14.0);
    }

    #[test]
    fn error_without_regularization_is_bottom_rss() {
        let (h, sm) = fig1();
        let reg = RegWeights::zero(&h);
        let y = [9.0, -3.0, 5.0, 1.0, 2.0, 3.0, 4.0];
        let u = [0.5, 1.5, 2.0, 5.0];
        let rss = 0.5 * (0.25 + 0.25 + 1.0 + 1.0);
        assert_eq!(error_at_t(&u, &y, &reg, &sm).unwrap(), rss);
        let d = output_delta(&u, &y, &reg, &sm).unwrap();
        assert_eq!(d, [-0.5, -0.5, -1.0, 1.0]);
    }

    #[test]
    fn perfect_coherent_forecast_has_zero_error() {
        let (h, sm) = fig1();
        let reg = RegWeights::new(&h, 2.4, 0.7).unwrap();
        let y = [10.0, 3.0, 7.0, 1.0, 2.0, 3.0, 4.0];
        let u = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(error_at_t(&u, &y, &reg, &sm).unwrap(), 0.0);
        assert_eq!(output_delta(&u, &y, &reg, &sm).unwrap(), [0.0; 4]);
    }

    #[test]
    fn delta_matches_displayed_closed_form() {
        // -[H^T L^2, I] y + (I + H^T L^2 H) u, built with dense products
        let (h, sm) = fig1();
        let reg = RegWeights::new(&h, 0.7, 2.4).unwrap();
        let y = [1.3, -0.2, 0.8, 0.4, -1.1, 0.9, 0.05];
        let u = [0.3, -0.6, 1.2, -0.4];
        let hm = &sm.0;
        let l2: Vec<f64> = reg.as_slice().iter().map(|l| l * l).collect();
        let mut expected = vec![0.0; 4];
        for i in 0..4 {
            let mut v = -y[3 + i] + u[i];
            for k in 0..3 {
                v -= hm[(k, i)] * l2[k] * y[k];
                for j in 0..4 {
                    v += hm[(k, i)] * l2[k] * hm[(k, j)] * u[j];
                }
            }
            expected[i] = v;
        }
        let got = output_delta(&u, &y, &reg, &sm).unwrap();
        for (a, b) in got.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn negative_lambda_rejected() {
        let (h, _) = fig1();
        assert!(RegWeights::new(&h, -0.1, 1.0).is_err());
        assert!(RegWeights::new(&h, 0.0, f64::NAN).is_err());
    }

    #[test]
    fn hidden_delta_zero_cases() {
        let dims = NetworkDims::new(4, 8, 4, true).unwrap();
        let p = init_params(dims, 1);
        let trace = forward(&p, &[0.1, 0.2, 0.3, 0.4], Activation::Sigmoid).unwrap();
        assert_eq!(hidden_delta(&[0.0; 4], &p, &trace, Activation::Sigmoid), [0.0; 8]);

        let mut neg = p.clone();
        neg.w2 = Matrix::zeros(8, 4);
        neg.b2 = vec![-1.0; 8];
        let trace = forward(&neg, &[0.1, 0.2, 0.3, 0.4], Activation::Relu).unwrap();
        assert_eq!(hidden_delta(&[1.0, -2.0, 3.0, 0.5], &neg, &trace, Activation::Relu), [0.0; 8]);
    }

    #[test]
    fn zero_input_zero_bias_has_zero_w2_gradient() {
        let (h, sm) = fig1();
        let reg = RegWeights::new(&h, 1.0, 1.0).unwrap();
        let dims = NetworkDims::new(4, 8, 4, true).unwrap();
        let mut p = init_params(dims, 2);
        p.b2.fill(0.0);
        p.b3.fill(0.0);
        let y = [1.0, 0.5, 0.5, 0.2, 0.3, 0.1, 0.4];
        let g = gradients_at_t(&p, &[0.0; 4], &y, &Objective::Structured { h: &sm, reg: &reg }, Activation::Sigmoid)
            .unwrap();
        assert!(g.w2.as_slice().iter().all(|&v| v == 0.0));
        assert!(g.w3.as_slice().iter().any(|&v| v != 0.0));
    }

    #[test]
    fn zero_lambda_gradients_equal_plain_bitwise() {
        let (h, sm) = fig1();
        let reg = RegWeights::zero(&h);
        let dims = NetworkDims::new(4, 8, 4, true).unwrap();
        let p = init_params(dims, 5);
        let x = [0.3, -1.2, 0.8, 0.1];
        let y = [0.2, 1.4, -0.3, 0.9, -0.7, 0.05, 1.1];
        let a = gradients_at_t(&p, &x, &y, &Objective::Structured { h: &sm, reg: &reg }, Activation::Sigmoid).unwrap();
        let b = gradients_at_t(&p, &x, &y, &Objective::Plain, Activation::Sigmoid).unwrap();
        let bits = |g: &Gradients| g.flatten().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn zero_epochs_returns_initial_params() {
        let h = Hierarchy::small_example();
        let dims = NetworkDims::new(4, 8, 4, true).unwrap();
        let init = init_params(dims, 3);
        let samples = vec![Sample {
            t: 1,
            input: vec![0.1, 0.2, 0.3, 0.4],
            target: vec![1.0, 0.3, 0.7, 0.1, 0.2, 0.3, 0.4],
        }];
        let cfg = TrainConfig {
            max_epochs: 0,
            ..TrainConfig::default()
        };
        let sm = h.structure_matrix();
        let reg = RegWeights::new(&h, 1.0, 1.0).unwrap();
        let r = fit(init.clone(), &samples, &Objective::Structured { h: &sm, reg: &reg }, &cfg, |_, _| {}).unwrap();
        assert_eq!(r.params, init);
        assert_eq!(r.epochs, 0);
        assert!(r.objective.is_empty());
        assert_eq!(r.termination, Termination::MaxEpochs);
    }

    #[test]
    fn divergence_is_reported_with_epoch() {
        let dims = NetworkDims::new(1, 8, 1, true).unwrap();
        let sample = |x: f64| Sample {
            t: 1,
            input: vec![x],
            target: vec![0.0],
        };
        let cfg = TrainConfig {
            eta: 1.0,
            activation: Activation::Relu,
            ..TrainConfig::default()
        };
        // overflows before the first update
        let err = fit(init_params(dims, 1), &[sample(1e200)], &Objective::Plain, &cfg, |_, _| {}).unwrap_err();
        assert_eq!(err, Error::Divergence { epoch: 0 });
        // finite at the start, overflows after one step
        let err = fit(init_params(dims, 1), &[sample(1e120)], &Objective::Plain, &cfg, |_, _| {}).unwrap_err();
        assert_eq!(err, Error::Divergence { epoch: 1 });
    }

    #[test]
    fn lambda_tie_break() {
        let s = |lambda1, lambda_m, score| LambdaScore { lambda1, lambda_m, score };
        let best = pick_lambda(&[s(0.5, 0.5, 1.0), s(0.2, 0.3, 1.0), s(0.0, 0.5, 1.0), s(1.0, 1.0, 1.5)]).unwrap();
        assert_eq!((best.lambda1, best.lambda_m), (0.0, 0.5));
        assert_eq!(pick_lambda(&[]).unwrap_err(), Error::EmptyGrid);
    }

    #[test]
    fn default_grid_contains_reported_selections() {
        let g = default_lambda_grid();
        assert_eq!(g.len(), 31);
        for v in [0.0, 0.4, 1.2, 1.5, 2.1, 2.4] {
            assert!(g.contains(&v), "{v} missing");
        }
    }
}
