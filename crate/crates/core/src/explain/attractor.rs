//! Decision-trajectory diagnostics and reconstruction counterfactuals.

use serde::Serialize;

use crate::error::Result;
use crate::layout::Layout;
use crate::network::Model;
use crate::recurrent::{reconstruct, AttractorRun, Clamp, ReconstructionMode};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttractorDiagnostics {
    /// Settling step `T*`.
    pub settling_time: usize,
    /// `-log` of the runner-up activation in the dominant hypercolumn at
    /// `T*`; infinite when the runner-up is exactly 0.
    #[serde(with = "crate::config::extended_f64")]
    pub basin_width: f64,
    /// Summed Euclidean step lengths over the trajectory.
    pub trajectory_length: f64,
    pub converged: bool,
    /// Hidden hypercolumn with the largest winning activation at `T*`.
    pub dominant_hypercolumn: usize,
    /// Winner margin of every hidden hypercolumn at each step.
    pub margins: Vec<Vec<f64>>,
}

pub fn p8_diagnostics(run: &AttractorRun, hidden: &Layout) -> AttractorDiagnostics {
    let t_star = run.settling_step.min(run.trajectory.len() - 1);
    let state = &run.trajectory[t_star];
    let mut dominant = 0;
    let mut best = f64::NEG_INFINITY;
    let mut runner_up = 0.0;
    for (j, r) in hidden.ranges().enumerate() {
        let (first, second) = top_two(&state[r]);
        if first > best {
            best = first;
            dominant = j;
            runner_up = second;
        }
    }
    let trajectory_length = run
        .trajectory
        .windows(2)
        .map(|w| w[1].iter().zip(&w[0]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        .sum();
    let margins = run
        .trajectory
        .iter()
        .map(|s| {
            hidden
                .ranges()
                .map(|r| {
                    let (a, b) = top_two(&s[r]);
                    a - b
                })
                .collect()
        })
        .collect();
    AttractorDiagnostics {
        settling_time: t_star,
        basin_width: -runner_up.ln(),
        trajectory_length,
        converged: run.converged,
        dominant_hypercolumn: dominant,
        margins,
    }
}

fn top_two(xs: &[f64]) -> (f64, f64) {
    let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &x in xs {
        if x > first {
            second = first;
            first = x;
        } else if x > second {
            second = x;
        }
    }
    (first, second)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counterfactual {
    pub target: Clamp,
    pub query_winners: Vec<usize>,
    pub free_winners: Vec<usize>,
    pub counterfactual_winners: Vec<usize>,
    pub free: Vec<f64>,
    pub counterfactual: Vec<f64>,
    /// Input hypercolumns whose winner differs between the query and the
    /// clamped reconstruction.
    pub changed: Vec<usize>,
    /// Input hypercolumns whose winner differs between the free and the
    /// clamped reconstruction.
    pub changed_from_free: Vec<usize>,
    /// Hidden winners when the clamped reconstruction is fed forward.
    pub reclassified: Vec<usize>,
    /// Whether `reclassified` hits the target.
    pub valid: bool,
}

pub fn p9_counterfactual(model: &Model, input: &[f64], target: Clamp) -> Result<Counterfactual> {
    let li = model.input_layout();
    let free = reconstruct(model, input, ReconstructionMode::Free)?;
    let cf = reconstruct(model, input, ReconstructionMode::Clamped(target))?;
    let query_winners = li.winners(input);
    let free_winners = li.winners(&free.activity);
    let counterfactual_winners = li.winners(&cf.activity);
    let diff = |a: &[usize], b: &[usize]| -> Vec<usize> {
        a.iter().zip(b).enumerate().filter(|(_, (x, y))| x != y).map(|(i, _)| i).collect()
    };
    let reclassified = model.predict(&cf.activity)?;
    Ok(Counterfactual {
        target,
        changed: diff(&query_winners, &counterfactual_winners),
        changed_from_free: diff(&free_winners, &counterfactual_winners),
        valid: reclassified[target.hypercolumn] == target.minicolumn,
        reclassified,
        query_winners,
        free_winners,
        counterfactual_winners,
        free: free.activity,
        counterfactual: cf.activity,
    })
}
