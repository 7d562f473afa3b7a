//! Brute-force reference computations for small instances.
//!
//! Nothing here calls the engine's numerical routines: supports, weights,
//! posteriors and winners are recomputed from raw traces with separate code,
//! so agreement with the engine is evidence rather than tautology.

pub mod counting;
pub mod cross_layer;
pub mod flip;
pub mod shapley;
pub mod synth;

use serde::Serialize;

use crate::network::Model;

pub use counting::{counting_estimator, empirical_mi, mutual_information, CountingEstimate};
pub use cross_layer::path_enumeration;
pub use flip::{sampled_flip_check, FlipCheck};
pub use shapley::{exact_shapley, MAX_SHAPLEY_HYPERCOLUMNS};
pub use synth::GenerativeTable;


/// Engine value, oracle value and their discrepancy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub engine: Vec<f64>,
    pub oracle: Vec<f64>,
    pub max_abs_discrepancy: f64,
    pub max_rel_discrepancy: f64,
}

impl OracleResult {
    pub fn new(engine: Vec<f64>, oracle: Vec<f64>) -> Self {
        let mut abs: f64 = 0.0;
        let mut rel: f64 = 0.0;
        for (e, o) in engine.iter().zip(&oracle) {
            let d = (e - o).abs();
            abs = abs.max(d);
            if o.abs() > 0.0 {
                rel = rel.max(d / o.abs());
            }
        }
        OracleResult {
            engine,
            oracle,
            max_abs_discrepancy: abs,
            max_rel_discrepancy: rel,
        }
    }
}

/// Per-input-hypercolumn evidence for hidden unit `(j, k)`, read straight
/// from the traces: `sum_m x_im (ln p_imjk - ln p_im - ln p_jk)`, zero for
/// masked pairs.
pub fn brute_contributions(model: &Model, x: &[f64], j: usize, k: usize) -> Vec<f64> {
    let cfg = model.config();
    let floor = cfg.probability_floor;
    let t = model.traces();
    let hidden_offset: usize = cfg.hidden[..j].iter().map(|h| h.size).sum();
    let b = hidden_offset + k;
    let ln_pb = t.post()[b].max(floor).ln();
    let mut out = Vec::with_capacity(cfg.input.len());
    let mut a = 0;
    for (i, hc) in cfg.input.iter().enumerate() {
        let mut phi = 0.0;
        if t.mask().get(i, j) {
            for m in 0..hc.size {
                let ln_pab = t.joint_at(a + m, b).max(floor * floor).ln();
                let ln_pa = t.pre()[a + m].max(floor).ln();
                phi += x[a + m] * (ln_pab - ln_pa - ln_pb);
            }
        }
        out.push(phi);
        a += hc.size;
    }
    out
}

/// Supports of every hidden unit recomputed from traces.
pub fn brute_support(model: &Model, x: &[f64]) -> Vec<f64> {
    let cfg = model.config();
    let floor = cfg.probability_floor;
    let mut out = Vec::new();
    let mut b = 0;
    for (j, hc) in cfg.hidden.iter().enumerate() {
        for k in 0..hc.size {
            let bias = model.traces().post()[b].max(floor).ln();
            out.push(bias + brute_contributions(model, x, j, k).iter().sum::<f64>());
            b += 1;
        }
    }
    out
}

/// Winning minicolumn of every hidden hypercolumn, from [`brute_support`].
pub fn brute_winners(model: &Model, x: &[f64]) -> Vec<usize> {
    let s = brute_support(model, x);
    let mut out = Vec::new();
    let mut a = 0;
    for hc in &model.config().hidden {
        out.push(first_max(&s[a..a + hc.size]));
        a += hc.size;
    }
    out
}

/// Index of the first maximum.
pub(crate) fn first_max(xs: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..xs.len() {
        if xs[i] > xs[best] {
            best = i;
        }
    }
    best
}
