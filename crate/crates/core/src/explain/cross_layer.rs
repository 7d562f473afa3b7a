//! Attribution chained through stacked models.
//!
//! Each node is a hidden minicolumn with its exact additive decomposition.
//! Its children are the winning minicolumns of the previous layer's hidden
//! hypercolumns (which are this layer's inputs). Leaf totals over the raw
//! input hypercolumns multiply normalised shares `phi_i / sum |phi|` along
//! every path; both signed and absolute shares are carried.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::layout::argmax;
use crate::network::{ActivationState, Model};

/// Models where layer `l`'s hidden population is layer `l + 1`'s input.
#[derive(Debug, Clone)]
pub struct DeepModel {
    pub layers: Vec<Model>,
}

impl DeepModel {
    pub fn new(layers: Vec<Model>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::config("a stacked model needs at least one layer"));
        }
        for (l, pair) in layers.windows(2).enumerate() {
            if pair[0].hidden_layout() != pair[1].input_layout() {
                return Err(Error::config(format!(
                    "layer {l} hidden layout does not match layer {} input layout",
                    l + 1
                )));
            }
        }
        Ok(DeepModel { layers })
    }

    /// Forward pass through all layers; each layer reads the previous
    /// layer's posterior.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<ActivationState>> {
        let mut states: Vec<ActivationState> = Vec::with_capacity(self.layers.len());
        for model in &self.layers {
            let x = states.last().map_or(input, |s| &s.posterior[..]).to_vec();
            states.push(model.forward(&x)?);
        }
        Ok(states)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttributionNode {
    pub layer: usize,
    pub hypercolumn: usize,
    pub minicolumn: usize,
    pub support: f64,
    pub bias: f64,
    pub contributions: Vec<f64>,
    pub signed_shares: Vec<f64>,
    pub absolute_shares: Vec<f64>,
    /// One child per input hypercolumn of this layer; empty at layer 0.
    pub children: Vec<AttributionNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeafTotals {
    pub signed: Vec<f64>,
    pub absolute: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossLayer {
    pub root: AttributionNode,
    pub leaves: LeafTotals,
}

pub fn p16_cross_layer(deep: &DeepModel, input: &[f64], target: (usize, usize)) -> Result<CrossLayer> {
    let states = deep.forward(input)?;
    let last = deep.layers.len() - 1;
    let lh = deep.layers[last].hidden_layout();
    if target.0 >= lh.hypercolumns() || target.1 >= lh.size(target.0) {
        return Err(Error::argument(format!("target {target:?} out of range")));
    }
    let root = node(deep, &states, last, target.0, target.1);
    let n_leaves = deep.layers[0].input_layout().hypercolumns();
    let mut signed = vec![0.0; n_leaves];
    let mut absolute = vec![0.0; n_leaves];
    accumulate(&root, 1.0, 1.0, &mut signed, &mut absolute);
    Ok(CrossLayer {
        root,
        leaves: LeafTotals { signed, absolute },
    })
}

fn node(deep: &DeepModel, states: &[ActivationState], layer: usize, j: usize, k: usize) -> AttributionNode {
    let model = &deep.layers[layer];
    let state = &states[layer];
    let lh = model.hidden_layout();
    let b = lh.unit(j, k);
    let n_in = model.input_layout().hypercolumns();
    let contributions: Vec<f64> = (0..n_in).map(|i| state.contribution(i, b)).collect();
    let norm: f64 = contributions.iter().map(|c| c.abs()).sum();
    let share = |v: f64| if norm > 0.0 { v / norm } else { 0.0 };
    let children = if layer == 0 {
        Vec::new()
    } else {
        let prev = &states[layer - 1];
        let lp = deep.layers[layer - 1].hidden_layout();
        (0..n_in)
            .map(|i| node(deep, states, layer - 1, i, argmax(&prev.posterior[lp.range(i)])))
            .collect()
    };
    AttributionNode {
        layer,
        hypercolumn: j,
        minicolumn: k,
        support: state.support[b],
        bias: model.weights().bias()[b],
        signed_shares: contributions.iter().map(|&c| share(c)).collect(),
        absolute_shares: contributions.iter().map(|&c| share(c.abs())).collect(),
        contributions,
        children,
    }
}

fn accumulate(n: &AttributionNode, signed: f64, absolute: f64, out_s: &mut [f64], out_a: &mut [f64]) {
    for i in 0..n.contributions.len() {
        let (s, a) = (signed * n.signed_shares[i], absolute * n.absolute_shares[i]);
        match n.children.get(i) {
            Some(child) => accumulate(child, s, a, out_s, out_a),
            None => {
                out_s[i] += s;
                out_a[i] += a;
            }
        }
    }
}
