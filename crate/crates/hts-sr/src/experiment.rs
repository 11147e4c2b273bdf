//! Multi-trial benchmark runs, regularization sweeps and their tables.
//!
//! Every network trial is independent, so trials run in parallel on the
//! current rayon pool. Results are collected in input order, which keeps
//! output bytes independent of the thread count.

use std::collections::BTreeMap;

use hts_sr_core::baselines::{forecast_test, select_param, BaselineChoice, BaselineGrid};
use hts_sr_core::evaluate::{interval, mean_padded, EpochTrace, EvalReport, Interval, LevelSummary, TrialSummary};
use hts_sr_core::neuralnet::NetworkParams;
use hts_sr_core::panel::InputRows;
use hts_sr_core::reconcile::{check_unbiasedness, estimate_w_sample, mint_reconcile};
use hts_sr_core::trainer::{
    predict, predict_bottom_up, train_all_nodes, train_bottom, train_structured, tune_lambda, LambdaScore,
    LambdaTuning, Termination,
};
use hts_sr_core::{Hierarchy, RegWeights, SeriesPanel, TrainConfig};
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::config::{MethodName, SweepMode};
use crate::error::{Error, Result};

/// Two-sided 95% Student-t critical value with `n - 1` degrees of freedom.
pub fn t_critical(n: usize) -> f64 {
    assert!(n >= 2, "a t interval needs at least two observations");
    StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975)
}

pub const CI_DESCRIPTION: &str = "95% Student-t interval, n - 1 degrees of freedom: mean +/- t * sd / sqrt(n)";

/// Per-node and per-level means over trials with 95% half-widths.
pub fn summarize_trials(reports: &[EvalReport]) -> Result<TrialSummary> {
    if reports.len() < 2 {
        return Err(hts_sr_core::Error::TooFewTrials {
            needed: 2,
            got: reports.len(),
        }
        .into());
    }
    Ok(TrialSummary::from_reports(reports, t_critical(reports.len()))?)
}

/// 95% interval of the paired differences `a_i - b_i`.
pub fn paired_difference(a: &[f64], b: &[f64]) -> Result<Interval> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(hts_sr_core::Error::TooFewTrials {
            needed: 2,
            got: a.len().min(b.len()),
        }
        .into());
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    Ok(interval(&d, t_critical(d.len())))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MintDiagnostics {
    pub gamma: f64,
    pub condition_estimate: f64,
    pub sps_residual: f64,
}

/// One method evaluated once: a network trial or a deterministic baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    /// `None` for deterministic baselines.
    pub seed: Option<u64>,
    pub report: EvalReport,
    pub epochs: Option<usize>,
    pub termination: Option<Termination>,
    pub params: Option<NetworkParams>,
    /// Test RMSE by level after every epoch, when requested.
    pub trace: Option<EpochTrace>,
    pub mint: Option<MintDiagnostics>,
}

impl TrialOutcome {
    fn network(seed: u64, report: EvalReport, result: &hts_sr_core::TrainResult, trace: Option<EpochTrace>) -> Self {
        Self {
            seed: Some(seed),
            report,
            epochs: Some(result.epochs),
            termination: Some(result.termination),
            params: Some(result.params.clone()),
            trace,
            mint: None,
        }
    }
}

fn test_report(h: &Hierarchy, panel: &SeriesPanel, label: &str, forecast: &hts_sr_core::Matrix) -> hts_sr_core::Result<EvalReport> {
    EvalReport::new(h, label, &panel.test_values(), forecast)
}

/// Epoch hook recording the level RMSE of bottom-up test forecasts.
fn trace_hook<'a>(
    h: &'a Hierarchy,
    panel: &'a SeriesPanel,
    cfg: &'a TrainConfig,
    out: &'a mut Option<EpochTrace>,
) -> impl FnMut(usize, &NetworkParams) + 'a {
    let actual = panel.test_values();
    let range = panel.train_len()..panel.len();
    move |_, params| {
        if let Some(trace) = out.as_mut() {
            // the epoch's parameters are finite here; prediction cannot fail
            let f = predict_bottom_up(params, panel, h, cfg, range.clone()).expect("trace forecast");
            let r = EvalReport::new(h, "", &actual, &f).expect("trace evaluation");
            trace.levels.push(r.levels);
        }
    }
}

/// NN+BU: bottom-level network on bottom residuals, aggregated upward.
pub fn run_bottom_up(h: &Hierarchy, panel: &SeriesPanel, cfg: &TrainConfig, record_trace: bool) -> hts_sr_core::Result<TrialOutcome> {
    let mut trace = record_trace.then(EpochTrace::default);
    let result = train_bottom(panel, h, cfg, trace_hook(h, panel, cfg, &mut trace))?;
    let f = predict_bottom_up(&result.params, panel, h, cfg, panel.train_len()..panel.len())?;
    let report = test_report(h, panel, MethodName::NnBottomUp.label(), &f)?;
    Ok(TrialOutcome::network(cfg.seed, report, &result, trace))
}

/// NN+SR: bottom-level network on the structured objective.
pub fn run_structured(
    h: &Hierarchy,
    panel: &SeriesPanel,
    cfg: &TrainConfig,
    lambda1: f64,
    lambda_m: f64,
    record_trace: bool,
) -> hts_sr_core::Result<TrialOutcome> {
    let reg = RegWeights::new(h, lambda1, lambda_m)?;
    let mut trace = record_trace.then(EpochTrace::default);
    let result = train_structured(panel, h, &reg, cfg, trace_hook(h, panel, cfg, &mut trace))?;
    let f = predict_bottom_up(&result.params, panel, h, cfg, panel.train_len()..panel.len())?;
    let report = test_report(h, panel, MethodName::NnStructured.label(), &f)?;
    Ok(TrialOutcome::network(cfg.seed, report, &result, trace))
}

/// NN+MinT: all-node network whose base forecasts are reconciled with the
/// sample covariance of its in-sample one-step residuals.
pub fn run_mint(h: &Hierarchy, panel: &SeriesPanel, cfg: &TrainConfig) -> hts_sr_core::Result<TrialOutcome> {
    let result = train_all_nodes(panel, h, cfg, |_, _| {})?;
    let fitted = predict(&result.params, panel, h, InputRows::All, cfg, cfg.lag..panel.train_len())?;
    let actual = panel.values().columns(cfg.lag, panel.train_len());
    let w = estimate_w_sample(&actual, &fitted)?;
    let base = predict(&result.params, panel, h, InputRows::All, cfg, panel.train_len()..panel.len())?;
    let mint = mint_reconcile(h, &base, &w)?;
    let report = test_report(h, panel, MethodName::NnMint.label(), &mint.forecasts)?;
    let mut out = TrialOutcome::network(cfg.seed, report, &result, None);
    out.mint = Some(MintDiagnostics {
        gamma: mint.gamma,
        condition_estimate: mint.condition_estimate,
        sps_residual: check_unbiasedness(&mint.p, &h.summing_matrix()),
    });
    Ok(out)
}

fn run_baseline(h: &Hierarchy, panel: &SeriesPanel, grid: &BaselineGrid, label: &str) -> hts_sr_core::Result<(BaselineChoice, TrialOutcome)> {
    let choice = select_param(panel, grid)?;
    let f = forecast_test(panel, choice)?;
    let report = test_report(h, panel, label, &f)?;
    Ok((
        choice,
        TrialOutcome {
            seed: None,
            report,
            epochs: None,
            termination: None,
            params: None,
            trace: None,
            mint: None,
        },
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub enum LambdaSetting {
    Fixed { lambda1: f64, lambda_m: f64 },
    Tune { grid1: Vec<f64>, grid_m: Vec<f64>, seed: u64 },
}

/// Everything a benchmark run needs. `panel` is used as given, so
/// standardize it beforehand if required.
#[derive(Debug, Clone)]
pub struct BenchmarkSpec {
    pub hierarchy: Hierarchy,
    pub panel: SeriesPanel,
    pub methods: Vec<MethodName>,
    pub ma_grid: Vec<usize>,
    pub es_grid: Vec<f64>,
    pub lambda: LambdaSetting,
    /// The seed field is ignored; each trial uses its own.
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
    pub epoch_trace: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutcome {
    pub method: MethodName,
    /// Selected or configured hyperparameters, e.g. `n=3` or `lambda=(0,2.1)`.
    pub detail: String,
    pub trials: Vec<TrialOutcome>,
    /// Present for network methods with at least two trials.
    pub summary: Option<TrialSummary>,
}

impl MethodOutcome {
    pub fn label(&self) -> &'static str {
        self.method.label()
    }

    /// Mean per-node RMSE over trials.
    pub fn mean_per_node(&self) -> Vec<f64> {
        let n = self.trials.len() as f64;
        let mut acc = vec![0.0; self.trials[0].report.per_node.len()];
        for t in &self.trials {
            for (a, v) in acc.iter_mut().zip(&t.report.per_node) {
                *a += v / n;
            }
        }
        acc
    }

    pub fn averages(&self) -> Vec<f64> {
        self.trials.iter().map(|t| t.report.levels.average).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkOutcome {
    pub nodes: Vec<u32>,
    pub lambda1: f64,
    pub lambda_m: f64,
    pub tuning: Option<LambdaTuning>,
    pub methods: Vec<MethodOutcome>,
}

impl BenchmarkOutcome {
    pub fn method(&self, m: MethodName) -> Option<&MethodOutcome> {
        self.methods.iter().find(|o| o.method == m)
    }
}

fn fmt_weight(v: f64) -> String {
    format!("{v}")
}

/// Chooses NN+SR weights on the training period: each grid point is
/// scored on a hold-out tail, in parallel.
pub fn choose_lambda(h: &Hierarchy, panel: &SeriesPanel, grid1: &[f64], grid_m: &[f64], cfg: &TrainConfig) -> Result<LambdaTuning> {
    let points: Vec<(f64, f64)> = grid1.iter().flat_map(|&a| grid_m.iter().map(move |&b| (a, b))).collect();
    let scores = points
        .par_iter()
        .map(|&(l1, lm)| {
            tune_lambda(panel, h, &[l1], &[lm], cfg)
                .map(|t| t.best)
                .map_err(|source| Error::Method {
                    method: format!("lambda tuning at ({l1}, {lm})"),
                    source,
                })
        })
        .collect::<Result<Vec<LambdaScore>>>()?;
    let best = hts_sr_core::trainer::pick_lambda(&scores)?;
    Ok(LambdaTuning { best, scores })
}

pub fn run_benchmark(spec: &BenchmarkSpec) -> Result<BenchmarkOutcome> {
    let h = &spec.hierarchy;
    let panel = &spec.panel;
    let has = |m| spec.methods.contains(&m);

    let (lambda1, lambda_m, tuning) = match &spec.lambda {
        LambdaSetting::Fixed { lambda1, lambda_m } => (*lambda1, *lambda_m, None),
        LambdaSetting::Tune { grid1, grid_m, seed } if has(MethodName::NnStructured) => {
            let cfg = TrainConfig { seed: *seed, ..spec.train };
            let t = choose_lambda(h, panel, grid1, grid_m, &cfg)?;
            (t.best.lambda1, t.best.lambda_m, Some(t))
        }
        LambdaSetting::Tune { .. } => (0.0, 0.0, None),
    };

    let network: Vec<MethodName> = spec.methods.iter().copied().filter(|m| m.is_network()).collect();
    let units: Vec<(MethodName, u64)> = network
        .iter()
        .flat_map(|&m| spec.seeds.iter().map(move |&s| (m, s)))
        .collect();
    let trials: Vec<TrialOutcome> = units
        .par_iter()
        .map(|&(m, seed)| {
            let cfg = TrainConfig { seed, ..spec.train };
            let out = match m {
                MethodName::NnBottomUp => run_bottom_up(h, panel, &cfg, spec.epoch_trace),
                MethodName::NnStructured => run_structured(h, panel, &cfg, lambda1, lambda_m, spec.epoch_trace),
                MethodName::NnMint => run_mint(h, panel, &cfg),
                _ => unreachable!("baselines are not trials"),
            };
            out.map_err(|source| Error::Trial {
                method: m.label().into(),
                seed,
                source,
            })
        })
        .collect::<Result<_>>()?;
    let mut by_method: BTreeMap<MethodName, Vec<TrialOutcome>> = BTreeMap::new();
    for ((m, _), t) in units.iter().zip(trials) {
        by_method.entry(*m).or_default().push(t);
    }

    let mut methods = Vec::with_capacity(spec.methods.len());
    for &m in &spec.methods {
        let outcome = match m {
            MethodName::MovingAverage | MethodName::ExponentialSmoothing => {
                let grid = if m == MethodName::MovingAverage {
                    BaselineGrid::MovingAverage(spec.ma_grid.clone())
                } else {
                    BaselineGrid::ExponentialSmoothing(spec.es_grid.clone())
                };
                let (choice, trial) = run_baseline(h, panel, &grid, m.label()).map_err(|source| Error::Method {
                    method: m.label().into(),
                    source,
                })?;
                let detail = match choice {
                    BaselineChoice::MovingAverage(n) => format!("n={n}"),
                    BaselineChoice::ExponentialSmoothing(a) => format!("alpha={a}"),
                };
                MethodOutcome {
                    method: m,
                    detail,
                    trials: vec![trial],
                    summary: None,
                }
            }
            _ => {
                let trials = by_method.remove(&m).unwrap_or_default();
                let reports: Vec<EvalReport> = trials.iter().map(|t| t.report.clone()).collect();
                let summary = if reports.len() >= 2 { Some(summarize_trials(&reports)?) } else { None };
                let detail = match m {
                    MethodName::NnStructured => {
                        format!("lambda=({},{})", fmt_weight(lambda1), fmt_weight(lambda_m))
                    }
                    _ => String::new(),
                };
                MethodOutcome {
                    method: m,
                    detail,
                    trials,
                    summary,
                }
            }
        };
        methods.push(outcome);
    }
    Ok(BenchmarkOutcome {
        nodes: h.node_ids().to_vec(),
        lambda1,
        lambda_m,
        tuning,
        methods,
    })
}

/// Row labels in table order with the node or level each row shows.
fn table_rows(h: &Hierarchy) -> Vec<(String, TableRow)> {
    let mut rows = vec![("Root".to_string(), TableRow::Node(0))];
    for (k, id) in h.mid_ids().iter().enumerate() {
        rows.push((id.to_string(), TableRow::Node(1 + k)));
    }
    rows.push(("Mid-level".into(), TableRow::Mid));
    for (k, id) in h.bottom_ids().iter().enumerate() {
        rows.push((id.to_string(), TableRow::Node(h.n_upper() + k)));
    }
    rows.push(("Bottom-level".into(), TableRow::Bottom));
    rows.push(("Average".into(), TableRow::Average));
    rows
}

#[derive(Debug, Clone, Copy)]
enum TableRow {
    Node(usize),
    Mid,
    Bottom,
    Average,
}

fn summary_cell(s: &TrialSummary, row: TableRow) -> Interval {
    match row {
        TableRow::Node(i) => s.per_node[i],
        TableRow::Mid => s.mid,
        TableRow::Bottom => s.bottom,
        TableRow::Average => s.average,
    }
}

fn level_cell(l: &LevelSummary, per_node: &[f64], row: TableRow) -> f64 {
    match row {
        TableRow::Node(i) => per_node[i],
        TableRow::Mid => l.mid,
        TableRow::Bottom => l.bottom,
        TableRow::Average => l.average,
    }
}

/// RMSE table by node and level as CSV text. Network methods get a `±` column
/// holding the 95% half-width; deterministic baselines do not.
pub fn render_table(h: &Hierarchy, outcome: &BenchmarkOutcome) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["row".to_string()];
    for m in &outcome.methods {
        header.push(m.label().into());
        if m.summary.is_some() {
            header.push(format!("{} ±", m.label()));
        }
    }
    w.write_record(&header).expect("in-memory write");
    for (label, row) in table_rows(h) {
        let mut record = vec![label];
        for m in &outcome.methods {
            match &m.summary {
                Some(s) => {
                    let iv = summary_cell(s, row);
                    record.push(format!("{:.6}", iv.mean));
                    record.push(format!("{:.6}", iv.half_width));
                }
                None => {
                    let per_node = m.mean_per_node();
                    let levels = LevelSummary::from_per_node(h, &per_node);
                    record.push(format!("{:.6}", level_cell(&levels, &per_node, row)));
                }
            }
        }
        w.write_record(&record).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8 table")
}

/// Mean epoch traces of every traced method as `method,epoch,level,rmse`
/// CSV text. Traces that stop early are padded with their final value.
pub fn render_epoch_trace(outcome: &BenchmarkOutcome) -> String {
    use hts_sr_core::evaluate::LevelName;
    let mut out = String::from("method,epoch,level,rmse\n");
    for m in &outcome.methods {
        let traces: Vec<EpochTrace> = m.trials.iter().filter_map(|t| t.trace.clone()).collect();
        if traces.is_empty() {
            continue;
        }
        for (e, l) in mean_padded(&traces).iter().enumerate() {
            for level in LevelName::ALL {
                out.push_str(&format!("{},{},{},{:.6}\n", m.label(), e + 1, level.label(), l.get(level)));
            }
        }
    }
    out
}

#[derive(Serialize)]
struct LevelsRecord {
    root: f64,
    mid: f64,
    bottom: f64,
    average: f64,
}

impl From<LevelSummary> for LevelsRecord {
    fn from(l: LevelSummary) -> Self {
        Self {
            root: l.root,
            mid: l.mid,
            bottom: l.bottom,
            average: l.average,
        }
    }
}

#[derive(Serialize)]
struct TrialRecord {
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    per_node: BTreeMap<u32, f64>,
    levels: LevelsRecord,
    #[serde(skip_serializing_if = "Option::is_none")]
    epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    termination: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mint: Option<MintDiagnostics>,
}

#[derive(Serialize)]
struct IntervalRecord {
    mean: f64,
    half_width: f64,
}

impl From<Interval> for IntervalRecord {
    fn from(i: Interval) -> Self {
        Self {
            mean: i.mean,
            half_width: i.half_width,
        }
    }
}

#[derive(Serialize)]
struct SummaryRecord {
    trials: usize,
    per_node: BTreeMap<u32, IntervalRecord>,
    root: IntervalRecord,
    mid: IntervalRecord,
    bottom: IntervalRecord,
    average: IntervalRecord,
}

#[derive(Serialize)]
struct MethodRecord {
    method: &'static str,
    detail: String,
    trials: Vec<TrialRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    summary: Option<SummaryRecord>,
}

#[derive(Serialize)]
struct LambdaRecord {
    lambda1: f64,
    lambda_m: f64,
    source: &'static str,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    scores: Vec<ScoreRecord>,
}

#[derive(Serialize)]
struct ScoreRecord {
    lambda1: f64,
    lambda_m: f64,
    score: f64,
}

#[derive(Serialize)]
struct TrialsFile {
    confidence_interval: &'static str,
    rmse_scale: &'static str,
    lambda: LambdaRecord,
    methods: Vec<MethodRecord>,
}

fn termination_name(t: Termination) -> &'static str {
    match t {
        Termination::Converged => "converged",
        Termination::MaxEpochs => "max_epochs",
    }
}

/// Raw per-trial values and summaries as pretty JSON text.
pub fn render_trials_json(outcome: &BenchmarkOutcome, standardized: bool) -> String {
    let nodes = &outcome.nodes;
    let methods = outcome
        .methods
        .iter()
        .map(|m| MethodRecord {
            method: m.label(),
            detail: m.detail.clone(),
            trials: m
                .trials
                .iter()
                .map(|t| TrialRecord {
                    seed: t.seed,
                    per_node: nodes.iter().copied().zip(t.report.per_node.iter().copied()).collect(),
                    levels: t.report.levels.into(),
                    epochs: t.epochs,
                    termination: t.termination.map(termination_name),
                    mint: t.mint,
                })
                .collect(),
            summary: m.summary.as_ref().map(|s| SummaryRecord {
                trials: s.trials,
                per_node: nodes.iter().copied().zip(s.per_node.iter().map(|&i| i.into())).collect(),
                root: s.root.into(),
                mid: s.mid.into(),
                bottom: s.bottom.into(),
                average: s.average.into(),
            }),
        })
        .collect();
    let file = TrialsFile {
        confidence_interval: CI_DESCRIPTION,
        rmse_scale: if standardized { "standardized" } else { "raw" },
        lambda: LambdaRecord {
            lambda1: outcome.lambda1,
            lambda_m: outcome.lambda_m,
            source: if outcome.tuning.is_some() { "hold-out tuning" } else { "fixed" },
            scores: outcome
                .tuning
                .iter()
                .flat_map(|t| &t.scores)
                .map(|s| ScoreRecord {
                    lambda1: s.lambda1,
                    lambda_m: s.lambda_m,
                    score: s.score,
                })
                .collect(),
        },
        methods,
    };
    let mut text = serde_json::to_string_pretty(&file).expect("serializable trials");
    text.push('\n');
    text
}

/// One point of a regularization sweep curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub mode: SweepMode,
    pub x: f64,
    /// Mean over trials of `RMSE(x) - RMSE(0, 0)`, per level.
    pub relative: LevelSummary,
}

/// NN+SR RMSE along each mode's diagonal relative to the same trial's
/// unregularized fit, averaged over trials.
pub fn reg_sweep(
    h: &Hierarchy,
    panel: &SeriesPanel,
    cfg: &TrainConfig,
    modes: &[SweepMode],
    grid: &[f64],
    seeds: &[u64],
) -> Result<Vec<SweepPoint>> {
    if !grid.contains(&0.0) {
        return Err(Error::config("sweep.grid", "grid must contain 0"));
    }
    if seeds.is_empty() {
        return Err(Error::config("seeds", "at least one seed is required"));
    }
    // every distinct weight pair is trained once per seed
    let mut pairs: Vec<(f64, f64)> = vec![(0.0, 0.0)];
    for &m in modes {
        for &x in grid {
            let p = m.weights(x);
            if !pairs.contains(&p) {
                pairs.push(p);
            }
        }
    }
    let units: Vec<(u64, (f64, f64))> = seeds
        .iter()
        .flat_map(|&s| pairs.iter().map(move |&p| (s, p)))
        .collect();
    let levels: Vec<LevelSummary> = units
        .par_iter()
        .map(|&(seed, (l1, lm))| {
            let cfg = TrainConfig { seed, ..*cfg };
            run_structured(h, panel, &cfg, l1, lm, false)
                .map(|t| t.report.levels)
                .map_err(|source| Error::Trial {
                    method: format!("NN+SR({l1},{lm})"),
                    seed,
                    source,
                })
        })
        .collect::<Result<_>>()?;
    let lookup: BTreeMap<(u64, u64, u64), LevelSummary> = units
        .iter()
        .zip(&levels)
        .map(|(&(s, (a, b)), &l)| ((s, a.to_bits(), b.to_bits()), l))
        .collect();
    let n = seeds.len() as f64;
    let mut points = Vec::new();
    for &mode in modes {
        for &x in grid {
            let (a, b) = mode.weights(x);
            let mut acc = LevelSummary {
                root: 0.0,
                mid: 0.0,
                bottom: 0.0,
                average: 0.0,
            };
            for &s in seeds {
                let base = lookup[&(s, 0f64.to_bits(), 0f64.to_bits())];
                let at = lookup[&(s, a.to_bits(), b.to_bits())];
                acc.root += (at.root - base.root) / n;
                acc.mid += (at.mid - base.mid) / n;
                acc.bottom += (at.bottom - base.bottom) / n;
                acc.average += (at.average - base.average) / n;
            }
            points.push(SweepPoint { mode, x, relative: acc });
        }
    }
    Ok(points)
}

/// `mode,x,level,relative_rmse` CSV text.
pub fn render_sweep(points: &[SweepPoint]) -> String {
    use hts_sr_core::evaluate::LevelName;
    let mut out = String::from("mode,x,level,relative_rmse\n");
    for p in points {
        for level in LevelName::ALL {
            out.push_str(&format!("{},{},{},{:.6}\n", p.mode.label(), p.x, level.label(), p.relative.get(level)));
        }
    }
    out
}
