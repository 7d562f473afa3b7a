//! Leaf totals of stacked attribution by listing every root-to-leaf path.

use crate::error::{Error, Result};
use crate::explain::cross_layer::{p16_cross_layer, DeepModel};
use crate::network::Model;

use super::{first_max, brute_support, OracleResult};

fn softmax_blocks(s: &[f64], sizes: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(s.len());
    let mut a = 0;
    for &m in sizes {
        let block = &s[a..a + m];
        let top = block.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = block.iter().map(|v| (v - top).exp()).collect();
        let z: f64 = e.iter().sum();
        out.extend(e.iter().map(|v| v / z));
        a += m;
    }
    out
}

fn hidden_sizes(model: &Model) -> Vec<usize> {
    model.config().hidden.iter().map(|h| h.size).collect()
}

/// `(signed, absolute)` shares of every input hypercolumn for unit `(j, k)`.
fn shares(model: &Model, x: &[f64], j: usize, k: usize) -> (Vec<f64>, Vec<f64>) {
    let phi = super::brute_contributions(model, x, j, k);
    let norm: f64 = phi.iter().map(|p| p.abs()).sum();
    if norm == 0.0 {
        return (vec![0.0; phi.len()], vec![0.0; phi.len()]);
    }
    (phi.iter().map(|p| p / norm).collect(), phi.iter().map(|p| p.abs() / norm).collect())
}

/// Compares the engine's cross-layer leaf totals (signed then absolute)
/// with totals summed over an explicit list of all paths.
pub fn path_enumeration(deep: &DeepModel, input: &[f64], target: (usize, usize)) -> Result<OracleResult> {
    let engine = p16_cross_layer(deep, input, target)?;
    let layers = &deep.layers;
    let n_layers = layers.len();
    // activity entering each layer, recomputed without the engine
    let mut xs = vec![input.to_vec()];
    for model in layers {
        let s = brute_support(model, xs.last().unwrap());
        xs.push(softmax_blocks(&s, &hidden_sizes(model)));
    }
    let fan: Vec<usize> = layers.iter().map(|m| m.config().input.len()).collect();
    let n_paths: usize = fan.iter().product();
    if n_paths > 1 << 20 {
        return Err(Error::SizeCap { size: n_paths, cap: 1 << 20 });
    }
    let leaves = fan[0];
    let mut signed = vec![0.0; leaves];
    let mut absolute = vec![0.0; leaves];
    // path[l] is the input hypercolumn chosen at layer l, walking down from
    // the last layer
    let mut path = vec![0usize; n_layers];
    for _ in 0..n_paths {
        let (mut j, mut k) = target;
        let (mut ps, mut pa) = (1.0, 1.0);
        for l in (0..n_layers).rev() {
            let (s, a) = shares(&layers[l], &xs[l], j, k);
            ps *= s[path[l]];
            pa *= a[path[l]];
            if l > 0 {
                j = path[l];
                let sizes = hidden_sizes(&layers[l - 1]);
                let start: usize = sizes[..j].iter().sum();
                k = first_max(&xs[l][start..start + sizes[j]]);
            }
        }
        signed[path[0]] += ps;
        absolute[path[0]] += pa;
        for l in 0..n_layers {
            path[l] += 1;
            if path[l] < fan[l] {
                break;
            }
            path[l] = 0;
        }
    }
    let engine_values = engine.leaves.signed.iter().chain(&engine.leaves.absolute).copied().collect();
    let oracle_values = signed.into_iter().chain(absolute).collect();
    Ok(OracleResult::new(engine_values, oracle_values))
}
