//! Synthetic benchmark panels driven by AR(1) common factors.
//!
//! Each root/mid node `i` owns a factor path `psi_i` following
//! `psi_t = phi_i psi_{t-1} + sigma_i xi`. Each bottom node mixes the root
//! factor and its parent's factor into its own AR(1) recursion:
//! `y_t = rho_i psi_{1,t} + theta_i psi_{m(i),t} + phi_i y_{t-1} + sigma_i xi`.
//! Upper levels are then summed from the bottoms.
//!
//! Randomness comes from ChaCha20 with one stream per (role, node) pair,
//! so adding a node never perturbs the draws of another.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::hierarchy::Hierarchy;
use crate::matrix::Matrix;
use crate::panel::SeriesPanel;

/// Recorded in output metadata so a run can be reproduced elsewhere.
pub const PRNG_IDENTITY: &str =
    "ChaCha20 (rand_chacha 0.9) seeded via seed_from_u64, stream = (role << 32) | node; normals via rand_distr 0.5 StandardNormal (ziggurat)";

pub const DEFAULT_BURN_IN: usize = 50;
pub const PRESET_LEN: usize = 100;
pub const PRESET_TRAIN_LEN: usize = 70;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum StreamRole {
    Factor = 0,
    Bottom = 1,
    NetworkInit = 2,
}

pub(crate) fn stream_rng(seed: u64, role: StreamRole, node: u32) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(((role as u64) << 32) | node as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ar1 {
    pub phi: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BottomModel {
    pub node: u32,
    pub ar: Ar1,
    /// Loading on the root factor.
    pub rho: f64,
    /// Loading on the parent's factor.
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    /// Root and mid-level factor processes, by node id.
    pub factors: Vec<(u32, Ar1)>,
    pub bottoms: Vec<BottomModel>,
    /// Retained timepoints.
    pub len: usize,
    pub train_len: usize,
    pub burn_in: usize,
}

impl SynthParams {
    fn validate(&self) -> Result<()> {
        let sigmas = self.factors.iter().map(|(_, a)| a.sigma).chain(self.bottoms.iter().map(|b| b.ar.sigma));
        for s in sigmas {
            if !(s >= 0.0) {
                return Err(Error::InvalidParameter(format!("noise sd {s} must be >= 0")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    NgtvC,
    WeakC,
    PstvC,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::NgtvC, Preset::WeakC, Preset::PstvC];

    pub fn name(self) -> &'static str {
        match self {
            Preset::NgtvC => "NgtvC",
            Preset::WeakC => "WeakC",
            Preset::PstvC => "PstvC",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name().eq_ignore_ascii_case(name))
    }

    /// `(rho, theta)` for bottom nodes 5..=13.
    pub fn loadings(self) -> [(f64, f64); 9] {
        match self {
            Preset::NgtvC => [
                (0.1, 1.0),
                (-0.1, -1.0),
                (1.0, 0.1),
                (0.1, 1.0),
                (-0.1, -1.0),
                (-1.0, 0.1),
                (0.1, 1.0),
                (-0.1, -1.0),
                (1.0, 0.1),
            ],
            Preset::WeakC => [(0.1, 0.1); 9],
            Preset::PstvC => [(1.0, 1.0); 9],
        }
    }

    pub fn params(self) -> SynthParams {
        let ar = Ar1 { phi: 0.3, sigma: 0.3 };
        SynthParams {
            factors: (1..=4).map(|i| (i, ar)).collect(),
            bottoms: self
                .loadings()
                .iter()
                .zip(5u32..)
                .map(|(&(rho, theta), node)| BottomModel { node, ar, rho, theta })
                .collect(),
            len: PRESET_LEN,
            train_len: PRESET_TRAIN_LEN,
            burn_in: DEFAULT_BURN_IN,
        }
    }
}

/// Factor paths including the burn-in prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPaths {
    pub nodes: Vec<u32>,
    /// One row per factor node, `burn_in + len` columns.
    pub psi: Matrix,
    pub burn_in: usize,
}

impl FactorPaths {
    /// The path after discarding the burn-in prefix.
    pub fn retained(&self) -> Matrix {
        self.psi.columns(self.burn_in, self.psi.cols())
    }

    fn row_of(&self, node: u32) -> Option<usize> {
        self.nodes.iter().position(|&n| n == node)
    }
}

fn ar1_path(ar: Ar1, steps: usize, mut innovation: impl FnMut() -> f64) -> Vec<f64> {
    let mut prev = 0.0;
    (0..steps)
        .map(|_| {
            prev = ar.phi * prev + ar.sigma * innovation();
            prev
        })
        .collect()
}

pub fn generate_factors(p: &SynthParams, seed: u64) -> Result<FactorPaths> {
    p.validate()?;
    let steps = p.burn_in + p.len;
    let mut psi = Matrix::zeros(p.factors.len(), steps);
    for (r, &(node, ar)) in p.factors.iter().enumerate() {
        let mut rng = stream_rng(seed, StreamRole::Factor, node);
        let path = ar1_path(ar, steps, || rng.sample::<f64, _>(StandardNormal));
        psi.row_mut(r).copy_from_slice(&path);
    }
    Ok(FactorPaths {
        nodes: p.factors.iter().map(|(n, _)| *n).collect(),
        psi,
        burn_in: p.burn_in,
    })
}

/// Bottom-level rows with the burn-in removed. `parent_of` maps each bottom
/// node to the factor node it loads on besides the root.
pub fn generate_bottom(
    p: &SynthParams,
    f: &FactorPaths,
    root: u32,
    parent_of: &BTreeMap<u32, u32>,
    seed: u64,
) -> Result<Matrix> {
    p.validate()?;
    let steps = p.burn_in + p.len;
    if f.psi.cols() != steps {
        return Err(Error::Shape(format!("factor paths have {} steps, need {steps}", f.psi.cols())));
    }
    let root_row = f
        .row_of(root)
        .ok_or_else(|| Error::InvalidParameter(format!("no factor for root {root}")))?;
    let mut out = Matrix::zeros(p.bottoms.len(), p.len);
    for (r, b) in p.bottoms.iter().enumerate() {
        let mid = *parent_of
            .get(&b.node)
            .ok_or_else(|| Error::InvalidParameter(format!("no parent factor for bottom node {}", b.node)))?;
        let mid_row = f
            .row_of(mid)
            .ok_or_else(|| Error::InvalidParameter(format!("no factor for node {mid}")))?;
        let mut rng = stream_rng(seed, StreamRole::Bottom, b.node);
        let mut prev = 0.0;
        for s in 0..steps {
            let xi: f64 = rng.sample(StandardNormal);
            let y = b.rho * f.psi[(root_row, s)] + b.theta * f.psi[(mid_row, s)] + b.ar.phi * prev + b.ar.sigma * xi;
            if s >= p.burn_in {
                out[(r, s - p.burn_in)] = y;
            }
            prev = y;
        }
    }
    Ok(out)
}

/// Generates a coherent panel for any two-level hierarchy whose bottom
/// nodes appear in `p.bottoms` (in canonical order) and whose root and mid
/// nodes appear in `p.factors`.
pub fn generate_custom(p: &SynthParams, h: &Hierarchy, seed: u64) -> Result<SeriesPanel> {
    let bottom_ids: Vec<u32> = p.bottoms.iter().map(|b| b.node).collect();
    if bottom_ids != h.bottom_ids() {
        return Err(Error::PresetMismatch(format!(
            "bottom nodes {:?} do not match hierarchy {:?}",
            bottom_ids,
            h.bottom_ids()
        )));
    }
    let parent_of: BTreeMap<u32, u32> = h.parent_pairs().into_iter().collect();
    let f = generate_factors(p, seed)?;
    let bottom = generate_bottom(p, &f, h.root_id(), &parent_of, seed)?;
    SeriesPanel::new(h, h.aggregate_bottom(&bottom)?, p.train_len)
}

/// One of the three benchmark datasets on the thirteen-node tree.
pub fn generate_dataset(preset: Preset, h: &Hierarchy, seed: u64) -> Result<SeriesPanel> {
    if *h != Hierarchy::benchmark() {
        return Err(Error::PresetMismatch(format!(
            "{} requires the 13-node benchmark tree",
            preset.name()
        )));
    }
    generate_custom(&preset.params(), h, seed)
}
