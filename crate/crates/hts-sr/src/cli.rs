//! Command-line entry points. Each `cmd_*` function is usable as a library
//! call; [`main`] parses arguments and maps errors to exit codes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use hts_sr_core::panel::standardize;
use hts_sr_core::reconcile::{
    bottom_up, check_unbiasedness, estimate_w_sample, historical_proportions, mint_reconcile, top_down,
    top_down_matrix,
};
use hts_sr_core::synthgen::{generate_dataset, Preset, PRNG_IDENTITY};
use hts_sr_core::trainer::{predict_bottom_up, train_structured, Termination};
use hts_sr_core::{Hierarchy, Matrix, RegWeights, SeriesPanel, TrainConfig};
use serde::Serialize;
use serde_json::json;

use crate::config::{load_config, DataSource, ExperimentConfig, LambdaConfig};
use crate::error::{Error, Result, EXIT_OK};
use crate::experiment::{self, BenchmarkSpec, LambdaSetting, CI_DESCRIPTION};
use crate::io::{self, Checkpoint};

/// Overrides the output directory of `run` and `sweep`.
pub const OUTPUT_DIR_ENV: &str = "HTS_SR_OUTPUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "hts-sr", version, about = "Structured-regularization forecasting of hierarchical time series")]
pub struct Cli {
    /// Worker threads for independent trials (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic benchmark panel and a JSON sidecar describing it.
    Generate(GenerateArgs),
    /// Train one NN+SR network and write its checkpoint and test RMSE.
    Train(TrainArgs),
    /// Make base forecasts coherent.
    Reconcile(ReconcileArgs),
    /// Run a full benchmark from a config or manifest file.
    Run(RunArgs),
    /// Sweep regularization weights from a config file.
    Sweep(RunArgs),
}

fn parse_preset(s: &str) -> std::result::Result<Preset, String> {
    Preset::from_name(s).ok_or_else(|| format!("unknown preset `{s}` (expected NgtvC, WeakC or PstvC)"))
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_parser = parse_preset)]
    pub preset: Preset,
    #[arg(long)]
    pub seed: u64,
    /// Panel CSV path; the sidecar is written next to it with a `.json`
    /// extension.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the hierarchy JSON here.
    #[arg(long)]
    pub hierarchy_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub panel: PathBuf,
    /// Hierarchy JSON; defaults to the thirteen-node benchmark tree.
    #[arg(long)]
    pub hierarchy: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    pub lambda1: f64,
    #[arg(long = "lambdaM", default_value_t = 0.0)]
    pub lambda_m: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub eta: f64,
    #[arg(long, default_value_t = 5e-5)]
    pub eps: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10_000)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 2)]
    pub lag: usize,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long, value_enum, default_value_t = ActivationArg::Sigmoid)]
    pub activation: ActivationArg,
    /// Training timepoints (default: first 70%).
    #[arg(long)]
    pub train_len: Option<usize>,
    /// Train on the panel as given instead of standardizing each node.
    #[arg(long)]
    pub raw: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ActivationArg {
    Sigmoid,
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReconcileMethod {
    Bu,
    Td,
    Mint,
}

#[derive(Debug, Args)]
pub struct ReconcileArgs {
    #[arg(long, value_enum)]
    pub method: ReconcileMethod,
    /// Base forecasts, one column per node. `bu` needs the bottom columns,
    /// `td` the root column and `mint` every column.
    #[arg(long)]
    pub base: PathBuf,
    #[arg(long)]
    pub hierarchy: Option<PathBuf>,
    /// In-sample residuals (one column per node) for estimating W; `mint` only.
    #[arg(long)]
    pub residuals: Option<PathBuf>,
    /// Historical panel for top-down proportions; `td` only.
    #[arg(long)]
    pub history: Option<PathBuf>,
    /// Training timepoints of the history panel used for proportions
    /// (default: first 70%).
    #[arg(long)]
    pub train_len: Option<usize>,
    /// Coherent forecasts CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Diagnostics JSON (default: next to `--out` with a `.json` extension).
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Experiment config, or the manifest.json of an earlier run.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides the config and the environment.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn hierarchy_or_default(path: Option<&Path>) -> Result<Hierarchy> {
    match path {
        Some(p) => io::load_hierarchy(p),
        None => Ok(Hierarchy::benchmark()),
    }
}

fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("json")
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let h = Hierarchy::benchmark();
    let panel = generate_dataset(args.preset, &h, args.seed)?;
    io::write_panel_csv(&panel, &args.out)?;
    let p = args.preset.params();
    let sidecar = json!({
        "preset": args.preset.name(),
        "seed": args.seed,
        "prng": PRNG_IDENTITY,
        "burn_in": p.burn_in,
        "len": p.len,
        "train_len": p.train_len,
        "hierarchy": io::HierarchyFile::from_hierarchy(&h),
    });
    io::write_json(&sidecar_path(&args.out), &sidecar)?;
    if let Some(path) = &args.hierarchy_out {
        io::write_hierarchy(&h, path)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct TrainEcho<'a> {
    panel: &'a Path,
    hierarchy: Option<&'a Path>,
    lambda1: f64,
    lambda_m: f64,
    eta: f64,
    eps: f64,
    seed: u64,
    max_epochs: usize,
    lag: usize,
    hidden: usize,
    activation: &'static str,
    train_len: usize,
    standardized: bool,
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let h = hierarchy_or_default(args.hierarchy.as_deref())?;
    let raw = io::load_panel_csv(&args.panel, &h, args.train_len)?;
    let panel = if args.raw { raw } else { standardize(&raw)?.0 };
    let cfg = TrainConfig {
        eta: args.eta,
        eps: args.eps,
        max_epochs: args.max_epochs,
        activation: match args.activation {
            ActivationArg::Sigmoid => hts_sr_core::Activation::Sigmoid,
            ActivationArg::Relu => hts_sr_core::Activation::Relu,
        },
        lag: args.lag,
        seed: args.seed,
        hidden: args.hidden,
        bias: true,
    };
    let reg = RegWeights::new(&h, args.lambda1, args.lambda_m)?;
    let result = train_structured(&panel, &h, &reg, &cfg, |_, _| {})?;
    let forecast = predict_bottom_up(&result.params, &panel, &h, &cfg, panel.train_len()..panel.len())?;
    let report = hts_sr_core::evaluate::EvalReport::new(&h, "NN+SR", &panel.test_values(), &forecast)?;

    let echo = TrainEcho {
        panel: &args.panel,
        hierarchy: args.hierarchy.as_deref(),
        lambda1: args.lambda1,
        lambda_m: args.lambda_m,
        eta: cfg.eta,
        eps: cfg.eps,
        seed: cfg.seed,
        max_epochs: cfg.max_epochs,
        lag: cfg.lag,
        hidden: result.params.dims.hidden,
        activation: cfg.activation.name(),
        train_len: panel.train_len(),
        standardized: !args.raw,
    };
    let out = json!({
        "config": echo,
        "result": {
            "epochs": result.epochs,
            "termination": match result.termination {
                Termination::Converged => "converged",
                Termination::MaxEpochs => "max_epochs",
            },
            "initial_objective": result.initial_objective,
            "objective": result.objective,
            "checkpoint": Checkpoint::new(&result.params, cfg.seed, cfg.activation, cfg.lag),
        },
        "test_rmse": {
            "per_node": h.node_ids().iter().copied().zip(report.per_node.iter().copied()).collect::<BTreeMap<u32, f64>>(),
            "root": report.levels.root,
            "mid": report.levels.mid,
            "bottom": report.levels.bottom,
            "average": report.levels.average,
        },
    });
    io::write_json(&args.out, &out)
}

fn column_rows(path: &Path, table: &io::WideTable, ids: &[u32]) -> Result<Matrix> {
    let mut m = Matrix::zeros(ids.len(), table.times.len());
    for (r, id) in ids.iter().enumerate() {
        let col = table
            .columns
            .get(id)
            .ok_or_else(|| Error::format(path, format!("missing column for node {id}")))?;
        m.row_mut(r).copy_from_slice(col);
    }
    Ok(m)
}

pub fn cmd_reconcile(args: &ReconcileArgs) -> Result<()> {
    let h = hierarchy_or_default(args.hierarchy.as_deref())?;
    let base = io::read_wide_csv(&args.base)?;
    let (coherent, diagnostics) = match args.method {
        ReconcileMethod::Bu => {
            let bottom = column_rows(&args.base, &base, h.bottom_ids())?;
            let y = bottom_up(&h, &bottom)?;
            let p = hts_sr_core::reconcile::bottom_up_matrix(&h);
            (y, json!({ "method": "bu", "sps_residual": check_unbiasedness(&p, &h.summing_matrix()) }))
        }
        ReconcileMethod::Td => {
            let history = args
                .history
                .as_deref()
                .ok_or_else(|| Error::config("--history", "top-down needs a historical panel"))?;
            let panel = io::load_panel_csv(history, &h, args.train_len)?;
            let props = historical_proportions(&panel, &h)?;
            let root = column_rows(&args.base, &base, &[h.root_id()])?;
            let y = top_down(&h, root.row(0), &props)?;
            let p = top_down_matrix(&h, &props)?;
            (
                y,
                json!({
                    "method": "td",
                    "proportions": h.bottom_ids().iter().copied().zip(props.iter().copied()).collect::<BTreeMap<u32, f64>>(),
                    "sps_residual": check_unbiasedness(&p, &h.summing_matrix()),
                }),
            )
        }
        ReconcileMethod::Mint => {
            let resid_path = args
                .residuals
                .as_deref()
                .ok_or_else(|| Error::config("--residuals", "MinT needs in-sample residuals"))?;
            let resid = io::read_wide_csv(resid_path)?;
            let r = column_rows(resid_path, &resid, h.node_ids())?;
            let w = estimate_w_sample(&r, &Matrix::zeros(r.rows(), r.cols()))?;
            let all = column_rows(&args.base, &base, h.node_ids())?;
            let m = mint_reconcile(&h, &all, &w)?;
            let sps = check_unbiasedness(&m.p, &h.summing_matrix());
            (
                m.forecasts,
                json!({
                    "method": "mint",
                    "sps_residual": sps,
                    "gamma": m.gamma,
                    "condition_estimate": m.condition_estimate,
                }),
            )
        }
    };
    let mut diagnostics = diagnostics;
    let coherence = h.check_coherence(&coherent, 1e-9)?;
    diagnostics["coherence_max_violation"] = json!(coherence.max_violation());
    io::write_matrix_csv(&args.out, h.node_ids(), &base.times, &coherent)?;
    let diag_path = args.diagnostics.clone().unwrap_or_else(|| sidecar_path(&args.out));
    io::write_json(&diag_path, &diagnostics)
}

/// Loads the panel named by a config, standardized if requested.
pub fn load_experiment_panel(cfg: &ExperimentConfig) -> Result<(Hierarchy, SeriesPanel)> {
    let h = hierarchy_or_default(cfg.hierarchy.as_deref())?;
    let raw = match &cfg.data {
        DataSource::Preset { name, seed } => {
            let preset = Preset::from_name(name).expect("validated preset");
            generate_dataset(preset, &h, *seed)?
        }
        DataSource::Csv { path, train_len } => io::load_panel_csv(path, &h, *train_len)?,
    };
    let panel = if cfg.standardize { standardize(&raw)?.0 } else { raw };
    Ok((h, panel))
}

fn output_dir(cli_out: Option<&Path>, cfg: &ExperimentConfig) -> Result<PathBuf> {
    if let Some(p) = cli_out {
        return Ok(p.to_path_buf());
    }
    if let Some(p) = std::env::var_os(OUTPUT_DIR_ENV) {
        return Ok(PathBuf::from(p));
    }
    cfg.output_dir
        .clone()
        .ok_or_else(|| Error::config("output_dir", format!("no output directory (use --out, {OUTPUT_DIR_ENV} or output_dir)")))
}

fn manifest(command: &str, cfg: &ExperimentConfig) -> serde_json::Value {
    let mut echo = serde_json::to_value(cfg).expect("serializable config");
    // the output location does not influence results
    echo.as_object_mut().expect("config object").remove("output_dir");
    json!({
        "tool": "hts-sr",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "prng": PRNG_IDENTITY,
        "confidence_interval": CI_DESCRIPTION,
        "config": echo,
    })
}

pub fn benchmark_spec(cfg: &ExperimentConfig) -> Result<BenchmarkSpec> {
    let (h, panel) = load_experiment_panel(cfg)?;
    let lambda = match &cfg.lambda {
        LambdaConfig::Fixed { lambda1, lambda_m } => LambdaSetting::Fixed {
            lambda1: *lambda1,
            lambda_m: *lambda_m,
        },
        LambdaConfig::Tune { grid1, grid_m, seed } => LambdaSetting::Tune {
            grid1: grid1.clone(),
            grid_m: grid_m.clone(),
            seed: *seed,
        },
    };
    Ok(BenchmarkSpec {
        hierarchy: h,
        panel,
        methods: cfg.methods.clone(),
        ma_grid: cfg.baselines.ma_grid.clone(),
        es_grid: cfg.baselines.es_grid.clone(),
        lambda,
        train: cfg.train.to_config()?,
        seeds: cfg.seeds.clone(),
        epoch_trace: cfg.epoch_trace,
    })
}

/// Runs the benchmark described by `config` and writes `manifest.json`,
/// `table.csv`, `trials.json`, `epoch_trace.csv` (when traced) and
/// `checkpoints/` into the output directory, which is returned.
pub fn cmd_run(args: &RunArgs) -> Result<PathBuf> {
    let cfg = load_config(&args.config)?;
    let out = output_dir(args.out.as_deref(), &cfg)?;
    let spec = benchmark_spec(&cfg)?;
    let outcome = experiment::run_benchmark(&spec)?;

    if cfg.checkpoints {
        let act = spec.train.activation;
        for m in &outcome.methods {
            for t in &m.trials {
                if let (Some(seed), Some(params)) = (t.seed, &t.params) {
                    let slug = m.label().to_ascii_lowercase().replace('+', "-");
                    let path = out.join("checkpoints").join(format!("{slug}_seed{seed}.json"));
                    io::write_checkpoint(&path, &Checkpoint::new(params, seed, act, spec.train.lag))?;
                }
            }
        }
    }
    if cfg.epoch_trace {
        io::write_atomic(&out.join("epoch_trace.csv"), experiment::render_epoch_trace(&outcome).as_bytes())?;
    }
    io::write_atomic(&out.join("trials.json"), experiment::render_trials_json(&outcome, cfg.standardize).as_bytes())?;
    io::write_atomic(&out.join("table.csv"), experiment::render_table(&spec.hierarchy, &outcome).as_bytes())?;
    io::write_json(&out.join("manifest.json"), &manifest("run", &cfg))?;
    Ok(out)
}

/// Runs the regularization sweep from `config` and writes `sweep.csv` and
/// `manifest.json`.
pub fn cmd_sweep(args: &RunArgs) -> Result<PathBuf> {
    let cfg = load_config(&args.config)?;
    let out = output_dir(args.out.as_deref(), &cfg)?;
    let (h, panel) = load_experiment_panel(&cfg)?;
    let train = cfg.train.to_config()?;
    let points = experiment::reg_sweep(&h, &panel, &train, &cfg.sweep.modes, &cfg.sweep.grid, &cfg.seeds)?;
    io::write_atomic(&out.join("sweep.csv"), experiment::render_sweep(&points).as_bytes())?;
    io::write_json(&out.join("manifest.json"), &manifest("sweep", &cfg))?;
    Ok(out)
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Train(a) => cmd_train(a),
        Command::Reconcile(a) => cmd_reconcile(a),
        Command::Run(a) => cmd_run(a).map(|dir| println!("wrote {}", dir.display())),
        Command::Sweep(a) => cmd_sweep(a).map(|dir| println!("wrote {}", dir.display())),
    }
}

/// Parses `std::env::args`, runs the command and returns the exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    let result = match cli.jobs {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli)),
            Err(e) => Err(Error::config("--jobs", e.to_string())),
        },
        None => dispatch(&cli),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
