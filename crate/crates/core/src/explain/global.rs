//! Model-level primitives: the usage-ranked connection graph, receptive
//! fields and tuning curves.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::learning::{candidate_usage, usage_score};
use crate::network::Model;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Connection {
    pub input: usize,
    pub hidden: usize,
    pub active: bool,
    /// Usage score; silent connections carry the usage they would have if
    /// switched on.
    pub usage: f64,
}

/// Every (input, hidden) hypercolumn pair, sorted by usage descending; equal
/// usages keep index order.
pub fn p4_p5_importance(model: &Model) -> Result<Vec<Connection>> {
    let traces = model.traces();
    let w = model.weights();
    let mask = traces.mask();
    let mut graph = Vec::with_capacity(mask.inputs() * mask.hiddens());
    for i in 0..mask.inputs() {
        for j in 0..mask.hiddens() {
            let active = mask.get(i, j);
            let usage = if active {
                usage_score(traces, w, i, j)?
            } else {
                candidate_usage(traces, w, i, j)
            };
            graph.push(Connection {
                input: i,
                hidden: j,
                active,
                usage,
            });
        }
    }
    graph.sort_by(|a, b| b.usage.total_cmp(&a.usage));
    Ok(graph)
}

/// Per input hypercolumn, the summed usage over its active connections.
pub fn feature_usage(model: &Model) -> Result<Vec<f64>> {
    let mut out = vec![0.0; model.input_layout().hypercolumns()];
    for c in p4_p5_importance(model)? {
        if c.active {
            out[c.input] += c.usage;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReceptiveField {
    pub hypercolumn: usize,
    pub minicolumn: usize,
    /// Number of inputs averaged (1 for a single query).
    pub reference_size: usize,
    /// `R(i, m) = pi_im * w_imjk * c_ij` per input unit, averaged over the
    /// reference inputs.
    pub values: Vec<f64>,
}

pub fn p6_receptive_field(model: &Model, target: (usize, usize), inputs: &[Vec<f64>]) -> Result<ReceptiveField> {
    let (j, k) = target;
    let lh = model.hidden_layout();
    let li = model.input_layout();
    if j >= lh.hypercolumns() || k >= lh.size(j) {
        return Err(Error::argument(format!("target ({j}, {k}) out of range")));
    }
    if inputs.is_empty() {
        return Err(Error::argument("receptive field needs at least one input"));
    }
    let b = lh.unit(j, k);
    let w = model.weights();
    let mut values = vec![0.0; li.units()];
    for x in inputs {
        li.check_simplices("reference input", x, crate::network::SIMPLEX_TOLERANCE)?;
        for (a, v) in values.iter_mut().enumerate() {
            if let Some(wv) = w.get(a, b) {
                *v += x[a] * wv;
            }
        }
    }
    let n = inputs.len() as f64;
    values.iter_mut().for_each(|v| *v /= n);
    Ok(ReceptiveField {
        hypercolumn: j,
        minicolumn: k,
        reference_size: inputs.len(),
        values,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuningCurve {
    pub hypercolumn: usize,
    pub minicolumn: usize,
    /// `mean[i][m]`: mean activation of the target over reference samples
    /// whose input hypercolumn `i` is in state `m`; `None` if no sample is.
    pub mean: Vec<Vec<Option<f64>>>,
}

pub fn p7_tuning_curve(model: &Model, target: (usize, usize), reference: &[Vec<usize>]) -> Result<TuningCurve> {
    let (j, k) = target;
    let lh = model.hidden_layout();
    let li = model.input_layout();
    if j >= lh.hypercolumns() || k >= lh.size(j) {
        return Err(Error::argument(format!("target ({j}, {k}) out of range")));
    }
    let b = lh.unit(j, k);
    let mut sum: Vec<Vec<f64>> = li.counts().iter().map(|&m| vec![0.0; m]).collect();
    let mut count: Vec<Vec<usize>> = li.counts().iter().map(|&m| vec![0; m]).collect();
    for states in reference {
        let p = model.forward_states(states)?.posterior[b];
        for (i, &m) in states.iter().enumerate() {
            sum[i][m] += p;
            count[i][m] += 1;
        }
    }
    let mean = sum
        .iter()
        .zip(&count)
        .map(|(s, c)| s.iter().zip(c).map(|(&s, &c)| (c > 0).then(|| s / c as f64)).collect())
        .collect();
    Ok(TuningCurve {
        hypercolumn: j,
        minicolumn: k,
        mean,
    })
}
