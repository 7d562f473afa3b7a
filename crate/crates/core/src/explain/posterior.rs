//! Posterior-level primitives: per-hypercolumn uncertainty, surprise and
//! winner margin.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::layout::Layout;
use crate::network::Model;
use crate::stats::entropy;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypercolumnPosterior {
    pub name: String,
    pub posterior: Vec<f64>,
    pub winner: usize,
    /// Nats.
    pub entropy: f64,
}

pub fn p3_posterior(model: &Model, posterior: &[f64]) -> Result<Vec<HypercolumnPosterior>> {
    let lh = model.hidden_layout();
    lh.check_len("hidden posterior", posterior.len())?;
    Ok(model
        .config()
        .hidden
        .iter()
        .zip(lh.ranges())
        .map(|(hc, r)| {
            let p = &posterior[r];
            HypercolumnPosterior {
                name: hc.name.clone(),
                posterior: p.to_vec(),
                winner: crate::layout::argmax(p),
                entropy: entropy(p),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Surprise {
    /// `-sum_j log pi_{jk*}`, nats.
    pub total: f64,
    pub per_hypercolumn: Vec<f64>,
}

pub fn p12_surprise(hidden: &Layout, posterior: &[f64]) -> Result<Surprise> {
    hidden.check_len("hidden posterior", posterior.len())?;
    let per: Vec<f64> = hidden
        .ranges()
        .map(|r| {
            let p = &posterior[r];
            -p[crate::layout::argmax(p)].ln()
        })
        .collect();
    Ok(Surprise {
        total: per.iter().sum(),
        per_hypercolumn: per,
    })
}

/// Gap between the two largest activations of hidden hypercolumn `j`.
pub fn p15_margin(hidden: &Layout, posterior: &[f64], j: usize) -> Result<f64> {
    hidden.check_len("hidden posterior", posterior.len())?;
    if j >= hidden.hypercolumns() {
        return Err(Error::argument(format!("hidden hypercolumn {j} out of range")));
    }
    let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &p in &posterior[hidden.range(j)] {
        if p > first {
            second = first;
            first = p;
        } else if p > second {
            second = p;
        }
    }
    Ok(first - second)
}
