//! Additive evidence: per-input-hypercolumn contributions, per-weight
//! evidence terms and the bias baseline of one hidden minicolumn.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::{ActivationState, Model};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttributionVector {
    pub hypercolumn: usize,
    pub minicolumn: usize,
    pub bias: f64,
    /// `phi_{i -> jk}` per input hypercolumn, nats.
    pub contributions: Vec<f64>,
    pub support: f64,
    /// `pi_im * w_imjk` per input unit; `None` where the connection is
    /// masked.
    pub evidence: Vec<Option<f64>>,
}

impl AttributionVector {
    /// `s - b - sum(phi)`; zero up to rounding.
    pub fn residual(&self) -> f64 {
        self.support - self.bias - self.contributions.iter().sum::<f64>()
    }
}

/// Decompose the support of hidden minicolumn `(j, k)` for a forward state.
pub fn attribute(model: &Model, state: &ActivationState, target: (usize, usize)) -> Result<AttributionVector> {
    let (j, k) = target;
    let lh = model.hidden_layout();
    let li = model.input_layout();
    if j >= lh.hypercolumns() || k >= lh.size(j) {
        return Err(Error::argument(format!("target ({j}, {k}) out of range")));
    }
    let b = lh.unit(j, k);
    let w = model.weights();
    Ok(AttributionVector {
        hypercolumn: j,
        minicolumn: k,
        bias: w.bias()[b],
        contributions: (0..li.hypercolumns()).map(|i| state.contribution(i, b)).collect(),
        support: state.support[b],
        evidence: (0..li.units())
            .map(|a| w.get(a, b).map(|wv| state.input[a] * wv))
            .collect(),
    })
}

/// One bar of the support decomposition chart.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bar {
    pub label: String,
    pub value: f64,
}

/// Prior, one bar per input attribute, and the total support.
pub fn support_bars(model: &Model, attr: &AttributionVector) -> Vec<Bar> {
    let mut bars = vec![Bar {
        label: "prior".into(),
        value: attr.bias,
    }];
    bars.extend(model.config().input.iter().zip(&attr.contributions).map(|(hc, &v)| Bar {
        label: hc.name.clone(),
        value: v,
    }));
    bars.push(Bar {
        label: "total".into(),
        value: attr.support,
    });
    bars
}
