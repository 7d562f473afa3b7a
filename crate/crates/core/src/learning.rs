//! Bayesian-Hebbian trace updates and usage-driven structural plasticity.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::Mask;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::network::{Model, SIMPLEX_TOLERANCE};
use crate::par::seeded_rng;
use crate::traces::{TraceState, WeightView};

/// Step size of the next trace update.
///
/// Until `tau_p` updates have been absorbed the traces are a plain running
/// mean; afterwards they are an exponential moving average with time
/// constant `tau_p`. Starting from the running mean removes the bias an EMA
/// has toward its initial value.
pub fn trace_rate(update_count: u64, tau_p: f64) -> f64 {
    (1.0 / tau_p).max(1.0 / (update_count as f64 + 1.0))
}

impl TraceState {
    /// Move every trace toward its target: `pi_im`, `pi_jk`, `pi_im * pi_jk`.
    /// Returns the mean absolute change over all updated traces.
    pub fn absorb(&mut self, input: &[f64], hidden: &[f64], tau_p: f64) -> Result<f64> {
        if !(tau_p > 0.0) {
            return Err(Error::config("trace time constant must be > 0"));
        }
        if input.len() != self.pre.len() {
            return Err(Error::Dimension {
                what: "input activity",
                expected: self.pre.len(),
                got: input.len(),
            });
        }
        if hidden.len() != self.post.len() {
            return Err(Error::Dimension {
                what: "hidden activity",
                expected: self.post.len(),
                got: hidden.len(),
            });
        }
        let r = trace_rate(self.update_count, tau_p);
        let mut total = 0.0;
        let mut count = 0usize;
        for (p, &x) in self.pre.iter_mut().zip(input) {
            let d = r * (x - *p);
            *p += d;
            total += d.abs();
        }
        for (p, &y) in self.post.iter_mut().zip(hidden) {
            let d = r * (y - *p);
            *p += d;
            total += d.abs();
        }
        count += self.pre.len() + self.post.len();
        let n_post = self.post.len();
        let hiddens = self.mask.hiddens();
        for (a, &x) in input.iter().enumerate() {
            let i = self.pre_hc[a];
            let row = &mut self.joint[a * n_post..(a + 1) * n_post];
            for (b, (p, &y)) in row.iter_mut().zip(hidden).enumerate() {
                if !self.tracked[i * hiddens + self.post_hc[b]] {
                    continue;
                }
                let d = r * (x * y - *p);
                *p += d;
                total += d.abs();
                count += 1;
            }
        }
        self.update_count += 1;
        Ok(total / count as f64)
    }
}

/// Absorb one (input, hidden) pair into a model's traces, recurrent traces
/// included. Weights are not refreshed; call [`Model::refresh`] before the
/// next inference.
pub fn update_traces(model: &mut Model, input: &[f64], hidden: &[f64]) -> Result<f64> {
    model
        .input_layout()
        .check_simplices("input activity", input, SIMPLEX_TOLERANCE)?;
    model
        .hidden_layout()
        .check_simplices("hidden activity", hidden, SIMPLEX_TOLERANCE)?;
    let tau_p = model.config().trace_time_constant;
    let (traces, recurrent) = model.parts_mut();
    let r = trace_rate(traces.update_count, tau_p);
    let d = traces.absorb(input, hidden, tau_p)?;
    if let Some(rt) = recurrent {
        rt.update(hidden, r);
    }
    Ok(d)
}

/// Mutual-information usage of connection `(i, j)`:
/// `U_ij = sum_{m,k} p_imjk w_imjk / sum_k c_ik`, where the denominator counts
/// the active outgoing connections of input hypercolumn `i`.
///
/// Defined for active and silent pairs alike (silent pairs read their
/// shadow traces); fails when input hypercolumn `i` has no active outgoing
/// connection.
pub fn usage_score(traces: &TraceState, weights: &WeightView, i: usize, j: usize) -> Result<f64> {
    let denom = traces.mask().active_outgoing(i);
    if denom == 0 {
        return Err(Error::UndefinedUsage { input: i, hidden: j });
    }
    Ok(usage_numerator(traces, weights, i, j) / denom as f64)
}

/// Usage a silent connection would have once switched on: the denominator
/// counts it as active.
pub fn candidate_usage(traces: &TraceState, weights: &WeightView, i: usize, j: usize) -> f64 {
    let mut denom = traces.mask().active_outgoing(i);
    if !traces.mask().get(i, j) {
        denom += 1;
    }
    usage_numerator(traces, weights, i, j) / denom as f64
}

fn usage_numerator(traces: &TraceState, weights: &WeightView, i: usize, j: usize) -> f64 {
    let li = weights.input_layout();
    let lh = weights.hidden_layout();
    let mut total = 0.0;
    for a in li.range(i) {
        for b in lh.range(j) {
            total += traces.joint_at(a, b) * weights.raw(a, b);
        }
    }
    total
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlasticityEvent {
    pub step: u64,
    pub hidden: usize,
    pub deactivated: usize,
    pub activated: usize,
    /// Silent usage over active usage at the moment of the swap.
    #[serde(with = "crate::config::extended_f64")]
    pub usage_ratio: f64,
}

/// One structural plasticity pass.
///
/// For each hidden hypercolumn, the silent connection with the highest
/// usage replaces the active connection with the lowest usage when the
/// former exceeds `rho` times the latter. Usages are clamped at 0 for the
/// comparison (negative values are estimation noise around zero mutual
/// information). Exact ties keep the incumbent; lowest index wins ties in
/// the arg-max / arg-min. All usages are read from the mask as it stood at
/// the start of the pass.
pub fn structural_step(
    traces: &TraceState,
    weights: &WeightView,
    rho: f64,
    step: u64,
) -> (Mask, Vec<PlasticityEvent>) {
    let mut mask = traces.mask().clone();
    let mut events = Vec::new();
    if rho.is_infinite() {
        return (mask, events);
    }
    let (inputs, hiddens) = (mask.inputs(), mask.hiddens());
    for j in 0..hiddens {
        let mut weakest: Option<(usize, f64)> = None;
        let mut strongest: Option<(usize, f64)> = None;
        for i in 0..inputs {
            let u = candidate_usage(traces, weights, i, j).max(0.0);
            if traces.mask().get(i, j) {
                if weakest.is_none_or(|(_, w)| u < w) {
                    weakest = Some((i, u));
                }
            } else if traces.is_tracked(i, j) && strongest.is_none_or(|(_, s)| u > s) {
                strongest = Some((i, u));
            }
        }
        if let (Some((off, ua)), Some((on, us))) = (weakest, strongest) {
            if us > rho * ua {
                mask.set(off, j, false);
                mask.set(on, j, true);
                events.push(PlasticityEvent {
                    step,
                    hidden: j,
                    deactivated: off,
                    activated: on,
                    usage_ratio: if ua > 0.0 { us / ua } else { f64::INFINITY },
                });
            }
        }
    }
    (mask, events)
}

/// Run a structural pass on a model and refresh its weights.
pub fn apply_structural_step(model: &mut Model) -> Result<Vec<PlasticityEvent>> {
    let rho = model.config().plasticity_threshold;
    let step = model.traces().update_count();
    let (mask, events) = structural_step(model.traces(), model.weights(), rho, step);
    if !events.is_empty() {
        model.traces_mut().set_mask(mask);
        model.refresh()?;
    }
    Ok(events)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Hidden activity is the teacher's one-hot label.
    Supervised,
    /// Hidden activity is the model's own soft-WTA output.
    Unsupervised,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub mode: Mode,
    pub epochs: usize,
    pub seed: u64,
    /// Present samples in a fresh seeded order every epoch.
    pub shuffle: bool,
    /// Relative jitter on initial joint traces (unsupervised mode only), so
    /// hidden minicolumns start out distinguishable.
    pub init_jitter: f64,
    /// Weight of the initial traces, in pseudo-updates, when training
    /// starts from an untrained model in unsupervised mode.
    pub prior_updates: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            mode: Mode::Supervised,
            epochs: 10,
            seed: 0,
            shuffle: true,
            init_jitter: 0.5,
            prior_updates: 20,
        }
    }
}

/// One line of the training log, written every swap interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogRecord {
    pub step: u64,
    pub epoch: usize,
    pub mean_abs_dp: f64,
    pub swaps: Vec<PlasticityEvent>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TrainOutcome {
    pub events: Vec<PlasticityEvent>,
    pub log: Vec<LogRecord>,
    /// Epoch (0-based) in which each event happened, parallel to `events`.
    pub event_epochs: Vec<usize>,
}

/// Train a model on a dataset per `opts`, running structural plasticity every
/// `swap_interval` updates.
pub fn train(model: &mut Model, data: &Dataset, opts: &TrainOptions) -> Result<TrainOutcome> {
    data.check(model.config())?;
    if opts.mode == Mode::Supervised && data.labels.is_none() {
        return Err(Error::data("supervised training needs label columns"));
    }
    if opts.mode == Mode::Unsupervised && model.traces().update_count() == 0 {
        jitter_initial_traces(model, opts)?;
    }
    let li = model.input_layout().clone();
    let lh = model.hidden_layout().clone();
    let interval = model.config().swap_interval as u64;
    let mut out = TrainOutcome::default();
    let mut dp_sum = 0.0;
    let mut dp_n = 0usize;
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..opts.epochs {
        if opts.shuffle {
            order.sort_unstable();
            order.shuffle(&mut seeded_rng(opts.seed, epoch as u64));
        }
        for &idx in &order {
            let x = li.one_hot(&data.inputs[idx])?;
            let y = match opts.mode {
                Mode::Supervised => lh.one_hot(&data.labels.as_ref().expect("checked")[idx])?,
                Mode::Unsupervised => model.forward(&x)?.posterior,
            };
            dp_sum += update_traces(model, &x, &y)?;
            dp_n += 1;
            let step = model.traces().update_count();
            let mut refreshed = false;
            if step % interval == 0 {
                model.refresh()?;
                refreshed = true;
                let swaps = apply_structural_step(model)?;
                out.events.extend(swaps.iter().cloned());
                out.event_epochs.extend(std::iter::repeat_n(epoch, swaps.len()));
                out.log.push(LogRecord {
                    step,
                    epoch,
                    mean_abs_dp: dp_sum / dp_n as f64,
                    swaps,
                });
                dp_sum = 0.0;
                dp_n = 0;
            }
            if opts.mode == Mode::Unsupervised && !refreshed {
                model.refresh()?;
            }
        }
    }
    model.refresh()?;
    Ok(out)
}

fn jitter_initial_traces(model: &mut Model, opts: &TrainOptions) -> Result<()> {
    let mut rng = seeded_rng(opts.seed, u64::MAX);
    let eta = opts.init_jitter;
    let traces = model.traces_mut();
    for p in traces.joint.iter_mut() {
        let u: f64 = rng.random_range(-1.0..1.0);
        *p = (*p * (1.0 + eta * u)).clamp(0.0, 1.0);
    }
    traces.update_count = opts.prior_updates;
    model.refresh()
}

/// Fraction of samples whose predicted winner matches the label, per hidden
/// hypercolumn averaged.
pub fn accuracy(model: &Model, data: &Dataset, rows: &[usize]) -> Result<f64> {
    let labels = data
        .labels
        .as_ref()
        .ok_or_else(|| Error::data("accuracy needs label columns"))?;
    if rows.is_empty() {
        return Ok(0.0);
    }
    let li = model.input_layout();
    let mut hits = 0usize;
    let mut total = 0usize;
    for &r in rows {
        let pred = model.predict(&li.one_hot(&data.inputs[r])?)?;
        for (p, l) in pred.iter().zip(&labels[r]) {
            hits += (p == l) as usize;
            total += 1;
        }
    }
    Ok(hits as f64 / total as f64)
}
