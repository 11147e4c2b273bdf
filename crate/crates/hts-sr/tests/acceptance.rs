//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use hts_sr::cli::{cmd_run, RunArgs};
use hts_sr::config::MethodName;
use hts_sr::experiment::{self, paired_difference, BenchmarkSpec, LambdaSetting};
use hts_sr_core::baselines::{es_forecast, ma_forecast, select_param, BaselineChoice, BaselineGrid};
use hts_sr_core::evaluate::{first_epoch_within, LevelName};
use hts_sr_core::neuralnet::{init_params, Activation, NetworkDims, NetworkParams};
use hts_sr_core::panel::standardize;
use hts_sr_core::reconcile::{bottom_up, check_unbiasedness, estimate_w_sample, mint_reconcile};
use hts_sr_core::synthgen::{generate_custom, generate_dataset, generate_factors, Ar1, Preset, SynthParams};
use hts_sr_core::trainer::{gradients_at_t, predict_bottom_up, train_bottom, train_structured, Objective};
use hts_sr_core::{Hierarchy, Matrix, RegWeights, SeriesPanel, TrainConfig};

// Pinned tolerances.
const FD_STEP: f64 = 1e-6;
const FD_REL: f64 = 1e-5;
const FD_ABS: f64 = 1e-8;
const MINT_COHERENCE: f64 = 1e-9;
const SPS_TOL: f64 = 1e-8;
const LS_TOL: f64 = 1e-10;
const FIXED_POINT_TOL: f64 = 1e-12;
const SCALE_TOL: f64 = 1e-10;
const VARIANCE_REL: f64 = 0.05;
const CONVERGENCE_FRAC: f64 = 0.05;
const CONVERGENCE_MIN_SEEDS: usize = 20;

const NGTVC_SEED: u64 = 7;
const TRIALS: u64 = 30;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn ngtvc_panel() -> (Hierarchy, SeriesPanel) {
    let h = Hierarchy::benchmark();
    let raw = generate_dataset(Preset::NgtvC, &h, NGTVC_SEED).expect("preset panel");
    let (p, _) = standardize(&raw).expect("standardize");
    (h, p)
}

fn sigmoid(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

/// Structured objective written out with explicit loops and parent-map
/// ancestor walks.
fn oracle_objective(h: &Hierarchy, p: &NetworkParams, x: &[f64], y: &[f64], lambda: &[f64]) -> f64 {
    let d = p.dims;
    let z2: Vec<f64> = (0..d.hidden)
        .map(|j| sigmoid(p.b2[j] + (0..d.input).map(|i| p.w2[(j, i)] * x[i]).sum::<f64>()))
        .collect();
    let u: Vec<f64> = (0..d.output)
        .map(|k| p.b3[k] + (0..d.hidden).map(|j| p.w3[(k, j)] * z2[j]).sum::<f64>())
        .collect();
    let parent: BTreeMap<u32, u32> = h.parent_pairs().into_iter().collect();
    let nu = h.n_upper();
    let mut agg = vec![0.0; nu];
    for (b, &id) in h.bottom_ids().iter().enumerate() {
        let mut cur = id;
        while let Some(&up) = parent.get(&cur) {
            agg[h.index_of(up).unwrap()] += u[b];
            cur = up;
        }
    }
    let bottom: f64 = (0..d.output).map(|b| (y[nu + b] - u[b]).powi(2)).sum();
    let upper: f64 = (0..nu).map(|k| (lambda[k] * (y[k] - agg[k])).powi(2)).sum();
    0.5 * (bottom + upper)
}

fn perturbed(p: &NetworkParams, idx: usize, delta: f64) -> NetworkParams {
    let mut q = p.clone();
    let mut rest = idx;
    for block in q.blocks_mut() {
        if rest < block.len() {
            block[rest] += delta;
            break;
        }
        rest -= block.len();
    }
    q
}

fn criterion_1() -> Outcome {
    let h = Hierarchy::small_example();
    let sm = h.structure_matrix();
    let dims = NetworkDims::new(4, 8, 4, true).unwrap();
    let x = [0.4, -0.9, 1.3, -0.2];
    let y = [0.8, -1.1, 0.6, 0.3, -0.5, 1.2, -0.4];
    let mut worst = 0.0f64;
    let mut checked = 0;
    let mut failures = 0;
    for (k, lambda) in [0.0, 0.7, 2.4].into_iter().enumerate() {
        let params = init_params(dims, 100 + k as u64);
        let reg = RegWeights::new(&h, lambda, lambda).unwrap();
        let obj = Objective::Structured { h: &sm, reg: &reg };
        let g = gradients_at_t(&params, &x, &y, &obj, Activation::Sigmoid).unwrap().flatten();
        for (i, &a) in g.iter().enumerate() {
            let fd = (oracle_objective(&h, &perturbed(&params, i, FD_STEP), &x, &y, reg.as_slice())
                - oracle_objective(&h, &perturbed(&params, i, -FD_STEP), &x, &y, reg.as_slice()))
                / (2.0 * FD_STEP);
            let err = (a - fd).abs();
            let scale = a.abs().max(fd.abs());
            if !(err <= FD_ABS || err <= FD_REL * scale) {
                failures += 1;
            }
            if scale > 0.0 {
                worst = worst.max(err / scale.max(1e-3));
            }
            checked += 1;
        }
    }
    outcome(
        failures == 0,
        format!("{checked} partials at lambda in {{0, 0.7, 2.4}}, {failures} outside 1e-5 rel / 1e-8 abs (worst scaled error {worst:.1e})"),
    )
}

fn criterion_2() -> Outcome {
    let (h, p) = ngtvc_panel();
    let cfg = TrainConfig {
        max_epochs: 100,
        seed: 5,
        ..Default::default()
    };
    let test = p.train_len()..p.len();
    let record = |params: &NetworkParams, out: &mut Vec<(Vec<f64>, Vec<u64>)>| {
        let f = predict_bottom_up(params, &p, &h, &cfg, test.clone()).unwrap();
        let r = hts_sr_core::evaluate::EvalReport::new(&h, "", &p.test_values(), &f).unwrap();
        let bits = LevelName::ALL.iter().map(|&l| r.levels.get(l).to_bits()).collect();
        out.push((params.flatten(), bits));
    };
    let (mut sr, mut bu) = (Vec::new(), Vec::new());
    let a = train_structured(&p, &h, &RegWeights::zero(&h), &cfg, |_, w| record(w, &mut sr)).unwrap();
    let b = train_bottom(&p, &h, &cfg, |_, w| record(w, &mut bu)).unwrap();
    let same_params = sr.iter().zip(&bu).all(|(x, y)| {
        x.0.len() == y.0.len() && x.0.iter().zip(&y.0).all(|(u, v)| u.to_bits() == v.to_bits())
    });
    let same_trace = sr.iter().zip(&bu).all(|(x, y)| x.1 == y.1);
    let same_obj = a.objective.iter().map(|v| v.to_bits()).eq(b.objective.iter().map(|v| v.to_bits()));
    outcome(
        sr.len() == 100 && bu.len() == 100 && same_params && same_trace && same_obj,
        format!(
            "{} epochs; parameters bitwise equal: {same_params}, epoch traces bitwise equal: {same_trace}",
            sr.len()
        ),
    )
}

fn criterion_3() -> Outcome {
    let (h, p) = ngtvc_panel();
    let cfg = TrainConfig {
        max_epochs: 200,
        seed: 1,
        ..Default::default()
    };
    let bu_model = train_bottom(&p, &h, &cfg, |_, _| {}).unwrap();
    let bu = predict_bottom_up(&bu_model.params, &p, &h, &cfg, p.train_len()..p.len()).unwrap();
    let bu_violation = h.check_coherence(&bu, 0.0).unwrap().max_violation();

    // sample W from naive one-step residuals over the training period
    let v = p.values();
    let w = estimate_w_sample(&v.columns(1, p.train_len()), &v.columns(0, p.train_len() - 1)).unwrap();
    let base = v.columns(p.train_len(), p.len());
    let mint = mint_reconcile(&h, &base, &w).unwrap();
    let mint_violation = h.check_coherence(&mint.forecasts, MINT_COHERENCE).unwrap().max_violation();
    let sps = check_unbiasedness(&mint.p, &h.summing_matrix());
    outcome(
        bu_violation == 0.0 && mint_violation <= MINT_COHERENCE && sps <= SPS_TOL,
        format!("bottom-up violation {bu_violation:.1e}, MinT violation {mint_violation:.1e}, |SPS - S| {sps:.1e}"),
    )
}

fn lcg_matrix(rows: usize, cols: usize, salt: u64) -> Matrix {
    let mut s = salt.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let data = (0..rows * cols)
        .map(|_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        })
        .collect();
    Matrix::from_vec(rows, cols, data)
}

/// `S (S'S)^-1 S' y` with the normal equations solved by elimination.
fn ls_projection(s: &Matrix, y: &[f64]) -> Vec<f64> {
    let (n, m) = s.shape();
    let mut a: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..m).map(|j| (0..n).map(|r| s[(r, i)] * s[(r, j)]).sum()).collect())
        .collect();
    let mut b: Vec<f64> = (0..m).map(|i| (0..n).map(|r| s[(r, i)] * y[r]).sum()).collect();
    for c in 0..m {
        for r in 0..m {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in 0..m {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
    }
    let beta: Vec<f64> = (0..m).map(|i| b[i] / a[i][i]).collect();
    (0..n).map(|r| (0..m).map(|c| s[(r, c)] * beta[c]).sum()).collect()
}

fn criterion_4() -> Outcome {
    let h = Hierarchy::small_example();
    let s = h.summing_matrix().0;
    let base = lcg_matrix(7, 6, 1);
    let r = mint_reconcile(&h, &base, &Matrix::identity(7)).unwrap();
    let mut ls_err = 0.0f64;
    for t in 0..base.cols() {
        for (a, b) in r.forecasts.column(t).iter().zip(ls_projection(&s, &base.column(t))) {
            ls_err = ls_err.max((a - b).abs());
        }
    }

    let resid = lcg_matrix(7, 40, 2);
    let w = estimate_w_sample(&resid, &Matrix::zeros(7, 40)).unwrap();
    let coherent = bottom_up(&h, &lcg_matrix(4, 6, 3)).unwrap();
    let fixed_err = mint_reconcile(&h, &coherent, &w).unwrap().forecasts.max_abs_diff(&coherent);

    let mut w5 = w.clone();
    w5.as_mut_slice().iter_mut().for_each(|v| *v *= 5.0);
    let a = mint_reconcile(&h, &base, &w).unwrap().forecasts;
    let b = mint_reconcile(&h, &base, &w5).unwrap().forecasts;
    let scale_err = a.max_abs_diff(&b);
    outcome(
        ls_err <= LS_TOL && fixed_err <= FIXED_POINT_TOL && scale_err <= SCALE_TOL,
        format!("W=I vs least squares {ls_err:.1e}, fixed point {fixed_err:.1e}, W->5W {scale_err:.1e}"),
    )
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn criterion_5() -> Outcome {
    let ar = Ar1 { phi: 0.3, sigma: 0.3 };
    let long = SynthParams {
        factors: vec![(1, ar)],
        bottoms: Vec::new(),
        len: 100_000,
        train_len: 1,
        burn_in: 50,
    };
    let path = generate_factors(&long, 11).unwrap().retained();
    let row = path.row(0);
    let n = row.len() as f64;
    let mean = row.iter().sum::<f64>() / n;
    let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let target = 0.09 / (1.0 - 0.09);
    let var_rel = (var / target - 1.0).abs();

    let h = Hierarchy::benchmark();
    let with_len = |p: Preset| SynthParams {
        len: 10_000,
        train_len: 7_000,
        ..p.params()
    };
    let ngtv = generate_custom(&with_len(Preset::NgtvC), &h, 11).unwrap();
    let r56 = correlation(
        ngtv.values().row(h.index_of(5).unwrap()),
        ngtv.values().row(h.index_of(6).unwrap()),
    );
    let pstv = generate_custom(&with_len(Preset::PstvC), &h, 11).unwrap();
    let mut min_pstv = f64::INFINITY;
    for a in h.n_upper()..h.n_nodes() {
        for b in a + 1..h.n_nodes() {
            min_pstv = min_pstv.min(correlation(pstv.values().row(a), pstv.values().row(b)));
        }
    }
    outcome(
        var_rel <= VARIANCE_REL && r56 < 0.0 && min_pstv > 0.0,
        format!(
            "AR(1) variance {var:.5} vs {target:.5} ({:.2}% off), NgtvC corr(5,6) {r56:.3}, PstvC min bottom corr {min_pstv:.3}",
            100.0 * var_rel
        ),
    )
}

/// Shared NgtvC benchmark for the replication and convergence criteria.
fn ngtvc_benchmark() -> experiment::BenchmarkOutcome {
    let (h, p) = ngtvc_panel();
    let spec = BenchmarkSpec {
        hierarchy: h,
        panel: p,
        methods: vec![MethodName::NnBottomUp, MethodName::NnStructured],
        ma_grid: Vec::new(),
        es_grid: Vec::new(),
        lambda: LambdaSetting::Fixed {
            lambda1: 0.0,
            lambda_m: 2.1,
        },
        train: TrainConfig::default(),
        seeds: (0..TRIALS).collect(),
        epoch_trace: true,
    };
    experiment::run_benchmark(&spec).expect("benchmark run")
}

fn criterion_6(run: &experiment::BenchmarkOutcome) -> Outcome {
    let bu = run.method(MethodName::NnBottomUp).unwrap().averages();
    let sr = run.method(MethodName::NnStructured).unwrap().averages();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let d = paired_difference(&sr, &bu).unwrap();
    let (lo, hi) = (d.mean - d.half_width, d.mean + d.half_width);
    outcome(
        mean(&sr) < mean(&bu) && hi < 0.0,
        format!(
            "mean average RMSE NN+SR(0,2.1) {:.4} vs NN+BU {:.4}; paired difference 95% CI [{lo:.4}, {hi:.4}]",
            mean(&sr),
            mean(&bu)
        ),
    )
}

fn criterion_7(run: &experiment::BenchmarkOutcome) -> Outcome {
    let bu = &run.method(MethodName::NnBottomUp).unwrap().trials;
    let sr = &run.method(MethodName::NnStructured).unwrap().trials;
    let epoch = |t: &experiment::TrialOutcome| {
        first_epoch_within(&t.trace.as_ref().unwrap().series(LevelName::Mid), CONVERGENCE_FRAC).unwrap()
    };
    let faster = bu.iter().zip(sr).filter(|(b, s)| epoch(s) <= epoch(b)).count();
    outcome(
        faster >= CONVERGENCE_MIN_SEEDS,
        format!(
            "NN+SR mid-level RMSE within 5% of final no later than NN+BU on {faster}/{} seeds",
            bu.len()
        ),
    )
}

fn criterion_8() -> Outcome {
    let s: Vec<f64> = (0..50).map(|t| ((t * 13) % 17) as f64 * 0.5 - 2.0).collect();
    let ma1 = ma_forecast(&s, 1).unwrap();
    let es1 = es_forecast(&s, 1.0).unwrap();
    let naive_ok = (1..=s.len()).all(|t| ma1.at(t) == Some(s[t - 1]) && es1.at(t) == Some(s[t - 1]));
    let es0 = es_forecast(&s, 0.0).unwrap();
    let flat_ok = es0.values.iter().all(|&v| v == s[0]);

    let h = Hierarchy::small_example();
    let constant = h.aggregate_bottom(&Matrix::from_vec(4, 60, vec![2.5; 240])).unwrap();
    let p = SeriesPanel::new(&h, constant, 42).unwrap();
    let ma = select_param(&p, &BaselineGrid::default_ma()).unwrap();
    let es = select_param(&p, &BaselineGrid::default_es()).unwrap();
    let select_ok = ma == BaselineChoice::MovingAverage(1) && es == BaselineChoice::ExponentialSmoothing(1.0);
    outcome(
        naive_ok && flat_ok && select_ok,
        format!(
            "MA(1)=ES(1)=naive: {naive_ok}, ES(0) constant: {flat_ok}, selection on persistence data: {} / {}",
            ma.label(),
            es.label()
        ),
    )
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().expect("temp dir");
    let config = dir.path().join("config.json");
    std::fs::write(
        &config,
        r#"{
  "data": {"preset": {"name": "NgtvC", "seed": 3}},
  "lambda": {"fixed": {"lambda1": 0.5, "lambda_m": 1.0}},
  "train": {"eta": 1e-5, "eps": 5e-5, "max_epochs": 300, "activation": "sigmoid", "lag": 2, "hidden": null, "bias": true},
  "seeds": [0, 1, 2],
  "epoch_trace": true
}
"#,
    )
    .unwrap();
    let first = cmd_run(&RunArgs {
        config,
        out: Some(dir.path().join("first")),
    })
    .expect("first run");
    let second = cmd_run(&RunArgs {
        config: first.join("manifest.json"),
        out: Some(dir.path().join("second")),
    })
    .expect("second run");
    let same = |name: &str| {
        let a = std::fs::read(first.join(name)).unwrap();
        let b = std::fs::read(Path::new(&second).join(name)).unwrap();
        !a.is_empty() && a == b
    };
    let (table, trials) = (same("table.csv"), same("trials.json"));
    outcome(
        table && trials,
        format!("second run from the first run's manifest: table.csv identical: {table}, trials.json identical: {trials}"),
    )
}

fn report(n: usize, name: &str, f: impl FnOnce() -> Outcome, limit: Option<Duration>) -> bool {
    let start = Instant::now();
    let mut o = f();
    let took = start.elapsed();
    if let Some(limit) = limit {
        if took > limit {
            o.pass = false;
            o.detail.push_str(&format!("; runtime over {limit:?}"));
        }
    }
    println!(
        "criterion {n} [{name}]: {} ({:.2}s) {}",
        if o.pass { "PASS" } else { "FAIL" },
        took.as_secs_f64(),
        o.detail
    );
    o.pass
}

fn main() {
    let mut ok = true;
    ok &= report(1, "gradient correctness", criterion_1, Some(Duration::from_secs(1)));
    ok &= report(2, "zero-weight reduction", criterion_2, Some(Duration::from_secs(10)));
    ok &= report(3, "coherence", criterion_3, None);
    ok &= report(4, "MinT algebra", criterion_4, None);
    ok &= report(5, "generator statistics", criterion_5, Some(Duration::from_secs(30)));

    let start = Instant::now();
    let run = ngtvc_benchmark();
    let shared = start.elapsed();
    println!("(NgtvC benchmark: {TRIALS} trials each of NN+BU and NN+SR in {:.1}s)", shared.as_secs_f64());
    let over = shared > Duration::from_secs(15 * 60);
    ok &= report(6, "benchmark direction", || {
        let mut o = criterion_6(&run);
        if over {
            o.pass = false;
            o.detail.push_str("; benchmark over 15 min");
        }
        o
    }, None);
    ok &= report(7, "convergence speed", || criterion_7(&run), None);
    ok &= report(8, "baseline identities", criterion_8, None);
    ok &= report(9, "reproducibility", criterion_9, None);

    println!("acceptance: {}", if ok { "all criteria passed" } else { "FAILED" });
    if !ok {
        std::process::exit(1);
    }
}
