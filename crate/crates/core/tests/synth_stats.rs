use hts_sr_core::neuralnet::{init_params, NetworkDims};
use hts_sr_core::synthgen::{generate_custom, generate_factors, Ar1, Preset, SynthParams};
use hts_sr_core::Hierarchy;

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
    cov / (va * vb).sqrt()
}

fn long_preset(preset: Preset, len: usize) -> SynthParams {
    SynthParams {
        len,
        train_len: len / 2,
        ..preset.params()
    }
}

#[test]
fn ar1_long_run_variance() {
    let ar = Ar1 { phi: 0.3, sigma: 0.3 };
    let p = SynthParams {
        factors: vec![(1, ar)],
        bottoms: Vec::new(),
        len: 100_000,
        train_len: 1,
        burn_in: 50,
    };
    let expect = 0.09 / (1.0 - 0.09);
    let path = generate_factors(&p, 17).unwrap().retained();
    let v = variance(path.row(0));
    assert!((v / expect - 1.0).abs() < 0.05, "variance {v}, expected {expect}");
    assert!(mean(path.row(0)).abs() < 0.01);

    let white = SynthParams {
        factors: vec![(1, Ar1 { phi: 0.0, sigma: 0.5 })],
        ..p
    };
    let path = generate_factors(&white, 17).unwrap().retained();
    assert!((variance(path.row(0)).sqrt() / 0.5 - 1.0).abs() < 0.02);
}

#[test]
fn preset_correlation_signs() {
    let h = Hierarchy::benchmark();
    let ngtv = generate_custom(&long_preset(Preset::NgtvC, 10_000), &h, 5).unwrap();
    let (i5, i6) = (h.index_of(5).unwrap(), h.index_of(6).unwrap());
    let r = correlation(ngtv.values().row(i5), ngtv.values().row(i6));
    assert!(r < -0.3, "NgtvC corr(5, 6) = {r}");

    let pstv = generate_custom(&long_preset(Preset::PstvC, 10_000), &h, 5).unwrap();
    let bottoms: Vec<usize> = h.bottom_ids().iter().map(|&b| h.index_of(b).unwrap()).collect();
    for (k, &a) in bottoms.iter().enumerate() {
        for &b in &bottoms[k + 1..] {
            let r = correlation(pstv.values().row(a), pstv.values().row(b));
            assert!(r > 0.3, "PstvC corr({a}, {b}) = {r}");
        }
    }
}

#[test]
fn zero_noise_gives_zero_paths() {
    let h = Hierarchy::benchmark();
    let mut p = Preset::WeakC.params();
    for (_, ar) in p.factors.iter_mut() {
        ar.sigma = 0.0;
    }
    for b in p.bottoms.iter_mut() {
        b.ar.sigma = 0.0;
    }
    let panel = generate_custom(&p, &h, 3).unwrap();
    assert!(panel.values().as_slice().iter().all(|&v| v == 0.0));
}

#[test]
fn initial_weights_are_standard_normal() {
    let dims = NetworkDims::new(100, 1000, 1, false).unwrap();
    let p = init_params(dims, 99);
    let w = p.w2.as_slice();
    assert_eq!(w.len(), 100_000);
    assert!(mean(w).abs() < 0.02);
    assert!((variance(w).sqrt() - 1.0).abs() < 0.02);
}
