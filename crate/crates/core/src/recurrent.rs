//! Hidden-to-hidden attractor dynamics and input reconstruction feedback.
//!
//! Recurrent weights come from joint traces over pairs of hidden units,
//! learned with the same rule as the feedforward weights. Units in the same
//! hypercolumn never feed each other. Reconstruction runs the feedforward
//! traces backwards: PMI is symmetric, so the hidden-to-input weight of a
//! pair equals its input-to-hidden weight.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::layout::Layout;
use crate::network::{soft_wta, soft_wta_into, Model};
use crate::traces::TraceState;

/// Joint traces over (hidden unit, hidden unit) pairs, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentTraces {
    pub(crate) joint: Vec<f64>,
    pub(crate) n: usize,
}

impl RecurrentTraces {
    pub fn uniform(hidden: &Layout) -> Self {
        let u = hidden.uniform_activity();
        let joint = u.iter().flat_map(|&a| u.iter().map(move |&b| a * b)).collect();
        RecurrentTraces {
            joint,
            n: hidden.units(),
        }
    }

    pub fn from_joint(hidden: &Layout, joint: Vec<f64>) -> Result<Self> {
        let n = hidden.units();
        if joint.len() != n * n {
            return Err(Error::Dimension {
                what: "recurrent joint traces",
                expected: n * n,
                got: joint.len(),
            });
        }
        let rt = RecurrentTraces { joint, n };
        rt.check_stored()?;
        Ok(rt)
    }

    pub fn joint(&self) -> &[f64] {
        &self.joint
    }

    pub fn check_stored(&self) -> Result<()> {
        if let Some(v) = self
            .joint
            .iter()
            .find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0 + 1e-9)
        {
            return Err(Error::invariant(format!("recurrent trace out of range: {v}")));
        }
        Ok(())
    }

    pub(crate) fn update(&mut self, hidden: &[f64], rate: f64) {
        for (a, &pa) in hidden.iter().enumerate() {
            let row = &mut self.joint[a * self.n..(a + 1) * self.n];
            for (p, &pb) in row.iter_mut().zip(hidden) {
                *p += rate * (pa * pb - *p);
            }
        }
    }

    /// Recurrent weights, using the hidden marginals of `traces`.
    pub fn weights(&self, traces: &TraceState, hidden: &Layout, floor: f64) -> Result<RecurrentWeights> {
        self.check_stored()?;
        let n = self.n;
        let post = traces.post();
        let mut weights = vec![0.0; n * n];
        for a in 0..n {
            let (ha, _) = hidden.locate(a);
            let pa = post[a].max(floor);
            for b in 0..n {
                if hidden.locate(b).0 == ha {
                    continue;
                }
                let pb = post[b].max(floor);
                weights[a * n + b] = (self.joint[a * n + b].max(floor * floor) / (pa * pb)).ln();
            }
        }
        Ok(RecurrentWeights { weights, n })
    }
}

/// Hidden-to-hidden weights; zero within a hypercolumn.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentWeights {
    weights: Vec<f64>,
    n: usize,
}

impl RecurrentWeights {
    #[inline]
    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.weights[from * self.n + to]
    }
}

/// A hidden hypercolumn held at a one-hot state during settling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Clamp {
    pub hypercolumn: usize,
    pub minicolumn: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttractorRun {
    /// `trajectory[t]` is the hidden posterior at step `t`, starting at 0.
    pub trajectory: Vec<Vec<f64>>,
    /// `update_norms[t]` is the max-norm of `trajectory[t + 1] - trajectory[t]`.
    pub update_norms: Vec<f64>,
    /// First `t` whose update norm is below tolerance; the step limit when
    /// the run did not converge.
    pub settling_step: usize,
    pub converged: bool,
    pub clamp: Option<Clamp>,
}

impl AttractorRun {
    pub fn final_state(&self) -> &[f64] {
        self.trajectory.last().expect("trajectory holds the initial state")
    }
}

fn require_recurrence(model: &Model) -> Result<()> {
    if model.recurrent_weights().is_none() {
        return Err(Error::config("recurrence disabled"));
    }
    Ok(())
}

/// Iterate `support = bias + drive + recurrent input`, then soft-WTA, on all
/// hidden hypercolumns at once until the max-norm update drops below the
/// configured tolerance or the step limit is hit.
///
/// `drive` is a fixed external evidence term per hidden unit (typically the
/// feedforward evidence of a query); `None` runs the memory on its own.
pub fn settle(
    model: &Model,
    drive: Option<&[f64]>,
    initial: &[f64],
    clamp: Option<Clamp>,
) -> Result<AttractorRun> {
    require_recurrence(model)?;
    let hidden = model.hidden_layout();
    let rec = model.config().recurrence.as_ref().expect("checked");
    let rw = model.recurrent_weights().expect("checked");
    hidden.check_simplices("initial hidden state", initial, crate::network::SIMPLEX_TOLERANCE)?;
    if let Some(d) = drive {
        hidden.check_len("settling drive", d.len())?;
    }
    if let Some(c) = clamp {
        check_clamp(hidden, c)?;
    }
    let n = hidden.units();
    let bias = model.weights().bias();

    let mut current = initial.to_vec();
    if let Some(c) = clamp {
        apply_clamp(hidden, &mut current, c);
    }
    let mut trajectory = vec![current.clone()];
    let mut update_norms = Vec::new();
    let mut support = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut settling_step = rec.max_steps;
    let mut converged = false;

    for t in 0..rec.max_steps {
        for b in 0..n {
            let mut s = bias[b] + drive.map_or(0.0, |d| d[b]);
            for (a, &pa) in current.iter().enumerate() {
                if pa != 0.0 {
                    s += pa * rw.get(a, b);
                }
            }
            support[b] = s;
        }
        soft_wta_into(&support, hidden, &mut next);
        if let Some(c) = clamp {
            apply_clamp(hidden, &mut next, c);
        }
        let norm = next
            .iter()
            .zip(&current)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        update_norms.push(norm);
        std::mem::swap(&mut current, &mut next);
        trajectory.push(current.clone());
        if norm < rec.tolerance {
            settling_step = t;
            converged = true;
            break;
        }
    }
    Ok(AttractorRun {
        trajectory,
        update_norms,
        settling_step,
        converged,
        clamp,
    })
}

fn check_clamp(hidden: &Layout, c: Clamp) -> Result<()> {
    if c.hypercolumn >= hidden.hypercolumns() || c.minicolumn >= hidden.size(c.hypercolumn) {
        return Err(Error::argument(format!(
            "clamp target ({}, {}) out of range",
            c.hypercolumn, c.minicolumn
        )));
    }
    Ok(())
}

fn apply_clamp(hidden: &Layout, state: &mut [f64], c: Clamp) {
    for u in hidden.range(c.hypercolumn) {
        state[u] = 0.0;
    }
    state[hidden.unit(c.hypercolumn, c.minicolumn)] = 1.0;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum ReconstructionMode {
    Free,
    Clamped(Clamp),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reconstruction {
    /// Reconstructed input activity, one simplex per input hypercolumn.
    pub activity: Vec<f64>,
    pub mode: ReconstructionMode,
    /// Hidden state the reconstruction was read from.
    pub hidden: Vec<f64>,
    /// Settling run; absent in single-pass mode.
    pub run: Option<AttractorRun>,
}

impl Reconstruction {
    pub fn winners(&self, input: &Layout) -> Vec<usize> {
        input.winners(&self.activity)
    }
}

/// One feedback pass: `s_im = log p_im + sum_j w_im,jk*` over the winning
/// minicolumn `k*` of every hidden hypercolumn, then soft-WTA per input
/// hypercolumn. Reading winners rather than soft activity makes the result
/// depend only on the decision.
pub fn feedback(model: &Model, hidden_state: &[f64]) -> Result<Vec<f64>> {
    let li = model.input_layout();
    let lh = model.hidden_layout();
    lh.check_len("hidden state", hidden_state.len())?;
    let winners: Vec<usize> = lh
        .winners(hidden_state)
        .into_iter()
        .enumerate()
        .map(|(j, k)| lh.unit(j, k))
        .collect();
    let floor = model.floor();
    let w = model.weights();
    let support: Vec<f64> = (0..li.units())
        .map(|a| {
            let mut s = model.traces().pre()[a].max(floor).ln();
            for &b in &winners {
                s += w.raw(a, b);
            }
            s
        })
        .collect();
    Ok(soft_wta(&support, li))
}

/// Reconstruct the input behind a query's hidden decision.
///
/// Free mode settles from the feedforward posterior; clamped mode first
/// forces `clamp` and holds it through settling. With `single_pass` set in
/// the recurrence config, settling is skipped.
pub fn reconstruct(model: &Model, input: &[f64], mode: ReconstructionMode) -> Result<Reconstruction> {
    require_recurrence(model)?;
    let lh = model.hidden_layout();
    let clamp = match mode {
        ReconstructionMode::Free => None,
        ReconstructionMode::Clamped(c) => {
            check_clamp(lh, c)?;
            Some(c)
        }
    };
    let ff = model.forward(input)?;
    let evidence: Vec<f64> = ff
        .support
        .iter()
        .zip(model.weights().bias())
        .map(|(s, b)| s - b)
        .collect();
    let single_pass = model.config().recurrence.as_ref().is_some_and(|r| r.single_pass);
    let (hidden, run) = if single_pass {
        let mut h = ff.posterior;
        if let Some(c) = clamp {
            apply_clamp(lh, &mut h, c);
        }
        (h, None)
    } else {
        let run = settle(model, Some(&evidence), &ff.posterior, clamp)?;
        (run.final_state().to_vec(), Some(run))
    };
    Ok(Reconstruction {
        activity: feedback(model, &hidden)?,
        mode,
        hidden,
        run,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{NetworkConfig, RecurrenceConfig};
    use crate::learning::update_traces;

    fn memory(patterns: &[Vec<usize>], hcs: usize, m: usize) -> Model {
        let cfg = NetworkConfig::new(&[2], &vec![m; hcs])
            .with_recurrence(RecurrenceConfig::default())
            .with_trace_time_constant(1e9);
        let mut model = Model::new(cfg).unwrap();
        let hidden = model.hidden_layout().clone();
        let input = model.input_layout().uniform_activity();
        for _ in 0..20 {
            for p in patterns {
                let h = hidden.one_hot(p).unwrap();
                update_traces(&mut model, &input, &h).unwrap();
            }
        }
        model.refresh().unwrap();
        model
    }

    #[test]
    fn stored_pattern_is_a_fixed_point() {
        let pats = vec![vec![0, 1, 2, 3], vec![3, 2, 1, 0], vec![1, 3, 0, 2]];
        let model = memory(&pats, 4, 4);
        let init = model.hidden_layout().one_hot(&pats[0]).unwrap();
        let run = settle(&model, None, &init, None).unwrap();
        assert!(run.converged);
        assert_eq!(run.settling_step, 0);
        assert_eq!(model.hidden_layout().winners(run.final_state()), pats[0]);
    }

    #[test]
    fn completes_a_corrupted_pattern() {
        let pats = vec![vec![0, 1, 2, 3, 0], vec![3, 2, 1, 0, 1], vec![1, 3, 0, 2, 2]];
        let model = memory(&pats, 5, 4);
        let mut cue = pats[1].clone();
        cue[0] = 0;
        let init = model.hidden_layout().one_hot(&cue).unwrap();
        let run = settle(&model, None, &init, None).unwrap();
        assert_eq!(model.hidden_layout().winners(run.final_state()), pats[1]);
        for s in &run.trajectory {
            model.hidden_layout().check_simplices("state", s, 1e-9).unwrap();
        }
    }

    #[test]
    fn clamped_hypercolumn_never_moves() {
        let pats = vec![vec![0, 1, 2], vec![2, 0, 1]];
        let model = memory(&pats, 3, 3);
        let init = model.hidden_layout().uniform_activity();
        let c = Clamp {
            hypercolumn: 1,
            minicolumn: 0,
        };
        let run = settle(&model, None, &init, Some(c)).unwrap();
        for s in &run.trajectory {
            assert_eq!(&s[3..6], &[1.0, 0.0, 0.0]);
        }
        assert_eq!(model.hidden_layout().winners(run.final_state()), pats[1]);
    }

    #[test]
    fn settle_requires_recurrence() {
        let model = Model::new(NetworkConfig::new(&[2], &[2])).unwrap();
        let err = settle(&model, None, &[0.5, 0.5], None).unwrap_err();
        assert!(err.to_string().contains("recurrence disabled"));
    }

    #[test]
    fn out_of_range_clamp_is_rejected() {
        let model = memory(&[vec![0, 1]], 2, 2);
        let c = Clamp {
            hypercolumn: 0,
            minicolumn: 5,
        };
        let err = reconstruct(&model, &[0.5, 0.5], ReconstructionMode::Clamped(c));
        assert!(matches!(err, Err(Error::Argument(_))));
    }
}
