//! Spiking variant: Bernoulli spike trains filtered by leaky z-traces, with
//! p-traces estimated from the filtered activity.
//!
//! A unit with rate `pi` spikes in a step of `dt` ms with probability
//! `min(1, pi * f_max * dt / 1000)`. Its z-trace follows
//! `z <- z * exp(-dt / tau_z) + s`. The normalised trace
//! `z_hat = z * (1 - exp(-dt / tau_z)) / (f_max * dt / 1000)` has stationary
//! mean `pi`, which is what the p-traces and the saliency map read, so both
//! share units with the rate-based model.

use std::io::Write;

use rand::Rng;
use serde::Serialize;

use crate::config::{NetworkConfig, SpikingConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::layout::Layout;
use crate::learning::trace_rate;
use crate::par::seeded_rng;
use crate::traces::{TraceState, WeightView};

/// Per-step spike probability of a unit with rate `pi`.
pub fn spike_probability(pi: f64, cfg: &SpikingConfig) -> f64 {
    (pi * cfg.max_rate_hz * cfg.dt_ms / 1000.0).clamp(0.0, 1.0)
}

/// Stationary mean of the raw z-trace of a unit spiking with per-step
/// probability `p`: `p / (1 - exp(-dt / tau_z))`.
pub fn stationary_z(p: f64, dt_ms: f64, tau_z_ms: f64) -> f64 {
    p / (1.0 - (-dt_ms / tau_z_ms).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpikeTraceState {
    pub z_pre: Vec<f64>,
    pub z_post: Vec<f64>,
    pre: Vec<f64>,
    post: Vec<f64>,
    joint: Vec<f64>,
    update_count: u64,
    tau_p: f64,
    cfg: SpikingConfig,
    decay_pre: f64,
    decay_post: f64,
    scale_pre: f64,
    scale_post: f64,
}

impl SpikeTraceState {
    /// Zero z-traces and uniform p-traces for a network with a spiking
    /// section in its configuration.
    pub fn new(config: &NetworkConfig) -> Result<Self> {
        let cfg = config
            .spiking
            .clone()
            .ok_or_else(|| Error::config("spiking parameters missing from the configuration"))?;
        cfg.validate()?;
        let ts = TraceState::uniform(config);
        let unit_rate = cfg.max_rate_hz * cfg.dt_ms / 1000.0;
        let decay_pre = (-cfg.dt_ms / cfg.tau_z_pre_ms).exp();
        let decay_post = (-cfg.dt_ms / cfg.tau_z_post_ms).exp();
        Ok(SpikeTraceState {
            z_pre: vec![0.0; ts.pre.len()],
            z_post: vec![0.0; ts.post.len()],
            pre: ts.pre,
            post: ts.post,
            joint: ts.joint,
            update_count: 0,
            tau_p: config.trace_time_constant,
            decay_pre,
            decay_post,
            scale_pre: (1.0 - decay_pre) / unit_rate,
            scale_post: (1.0 - decay_post) / unit_rate,
            cfg,
        })
    }

    pub fn config(&self) -> &SpikingConfig {
        &self.cfg
    }

    pub fn update_count(&self) -> u64 {
        self.update_count
    }

    /// Rate-normalised pre-synaptic traces.
    pub fn normalized_pre(&self) -> Vec<f64> {
        self.z_pre.iter().map(|z| z * self.scale_pre).collect()
    }

    pub fn normalized_post(&self) -> Vec<f64> {
        self.z_post.iter().map(|z| z * self.scale_post).collect()
    }

    /// Draw one step of spikes from the given rates and integrate them.
    pub fn spike_step<R: Rng + ?Sized>(
        &mut self,
        rates_pre: &[f64],
        rates_post: &[f64],
        rng: &mut R,
    ) -> Result<(Vec<bool>, Vec<bool>)> {
        check_len("pre-synaptic rates", self.z_pre.len(), rates_pre.len())?;
        check_len("post-synaptic rates", self.z_post.len(), rates_post.len())?;
        let draw = |rates: &[f64], rng: &mut R| -> Vec<bool> {
            rates
                .iter()
                .map(|&pi| rng.random::<f64>() < spike_probability(pi, &self.cfg))
                .collect()
        };
        let s_pre = draw(rates_pre, rng);
        let s_post = draw(rates_post, rng);
        self.integrate(&s_pre, &s_post)?;
        Ok((s_pre, s_post))
    }

    /// Leaky integration of given spike vectors.
    pub fn integrate(&mut self, s_pre: &[bool], s_post: &[bool]) -> Result<()> {
        check_len("pre-synaptic spikes", self.z_pre.len(), s_pre.len())?;
        check_len("post-synaptic spikes", self.z_post.len(), s_post.len())?;
        for (z, &s) in self.z_pre.iter_mut().zip(s_pre) {
            *z = *z * self.decay_pre + if s { 1.0 } else { 0.0 };
        }
        for (z, &s) in self.z_post.iter_mut().zip(s_post) {
            *z = *z * self.decay_post + if s { 1.0 } else { 0.0 };
        }
        Ok(())
    }

    /// Move the p-traces toward the current normalised z-traces and their
    /// products.
    pub fn learn(&mut self) {
        let r = trace_rate(self.update_count, self.tau_p);
        let zi = self.normalized_pre();
        let zj = self.normalized_post();
        for (p, &x) in self.pre.iter_mut().zip(&zi) {
            *p += r * (x - *p);
        }
        for (p, &y) in self.post.iter_mut().zip(&zj) {
            *p += r * (y - *p);
        }
        let n = zj.len();
        for (a, &x) in zi.iter().enumerate() {
            for (p, &y) in self.joint[a * n..(a + 1) * n].iter_mut().zip(&zj) {
                *p += r * (x * y - *p);
            }
        }
        self.update_count += 1;
    }

    /// Export the p-traces as a rate-model trace state. Normalised traces
    /// can exceed 1 on single steps, so estimates are clamped into `[0, 1]`.
    pub fn to_trace_state(&self, config: &NetworkConfig) -> Result<TraceState> {
        let clamp = |v: &[f64]| v.iter().map(|x| x.clamp(0.0, 1.0)).collect::<Vec<_>>();
        TraceState::from_parts(
            config,
            clamp(&self.pre),
            clamp(&self.post),
            clamp(&self.joint),
            config.prior_mask(),
            self.update_count,
        )
    }
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension { what, expected, got });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Population {
    Input,
    Hidden,
}

/// Normalised z-traces and spikes of a recorded run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SpikeRecord {
    pub dt_ms: f64,
    pub n_pre: usize,
    pub n_post: usize,
    /// `[t * n_pre + a]`.
    pub z_pre: Vec<f64>,
    /// `[t * n_post + b]`.
    pub z_post: Vec<f64>,
    /// (step, population, unit) for every spike.
    pub spikes: Vec<(usize, Population, usize)>,
}

impl SpikeRecord {
    pub fn new(state: &SpikeTraceState) -> Self {
        SpikeRecord {
            dt_ms: state.cfg.dt_ms,
            n_pre: state.z_pre.len(),
            n_post: state.z_post.len(),
            ..Default::default()
        }
    }

    pub fn steps(&self) -> usize {
        self.z_pre.len().checked_div(self.n_pre).unwrap_or(0)
    }

    /// Append the state after step `t`, with that step's spikes.
    pub fn push(&mut self, state: &SpikeTraceState, s_pre: &[bool], s_post: &[bool]) {
        let t = self.steps();
        self.z_pre.extend(state.normalized_pre());
        self.z_post.extend(state.normalized_post());
        for (a, _) in s_pre.iter().enumerate().filter(|(_, s)| **s) {
            self.spikes.push((t, Population::Input, a));
        }
        for (b, _) in s_post.iter().enumerate().filter(|(_, s)| **s) {
            self.spikes.push((t, Population::Hidden, b));
        }
    }

    /// Instantaneous contribution `z_im(t) z_jk(t) w_imjk`; zero on masked
    /// pairs.
    pub fn pair_contribution(&self, weights: &WeightView, t: usize, pre: usize, post: usize) -> f64 {
        match weights.get(pre, post) {
            Some(w) => self.z_pre[t * self.n_pre + pre] * self.z_post[t * self.n_post + post] * w,
            None => 0.0,
        }
    }

    /// Line-delimited raster: `t_ms,population,hypercolumn,minicolumn`.
    pub fn write_raster<W: Write>(&self, mut out: W, input: &Layout, hidden: &Layout) -> Result<()> {
        writeln!(out, "t_ms,population,hypercolumn,minicolumn")?;
        for &(t, pop, u) in &self.spikes {
            let (layout, name) = match pop {
                Population::Input => (input, "input"),
                Population::Hidden => (hidden, "hidden"),
            };
            let (h, m) = layout.locate(u);
            writeln!(out, "{},{name},{h},{m}", t as f64 * self.dt_ms)?;
        }
        Ok(())
    }
}

/// Options for supervised spiking training: each sample is presented for
/// a fixed number of steps with the input one-hot and the label one-hot as
/// rates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpikeTrainOptions {
    pub presentation_steps: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Record spikes and traces for at most this many leading steps.
    pub record_steps: usize,
}

impl Default for SpikeTrainOptions {
    fn default() -> Self {
        SpikeTrainOptions {
            presentation_steps: 200,
            epochs: 1,
            seed: 0,
            record_steps: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpikeTrainOutcome {
    pub state: SpikeTraceState,
    pub traces: TraceState,
    pub record: SpikeRecord,
}

/// Present every sample in order, learning the p-traces on every step.
pub fn train_spiking(config: &NetworkConfig, data: &Dataset, opts: &SpikeTrainOptions) -> Result<SpikeTrainOutcome> {
    data.check(config)?;
    let labels = data
        .labels
        .as_ref()
        .ok_or_else(|| Error::data("spiking training needs label columns"))?;
    let mut state = SpikeTraceState::new(config)?;
    let mut record = SpikeRecord::new(&state);
    let (li, lh) = (config.input_layout(), config.hidden_layout());
    let mut rng = seeded_rng(opts.seed, 0);
    for _ in 0..opts.epochs {
        for (x, y) in data.inputs.iter().zip(labels) {
            let (rx, ry) = (li.one_hot(x)?, lh.one_hot(y)?);
            for _ in 0..opts.presentation_steps {
                let (sp, sq) = state.spike_step(&rx, &ry, &mut rng)?;
                state.learn();
                if record.steps() < opts.record_steps {
                    record.push(&state, &sp, &sq);
                }
            }
        }
    }
    let traces = state.to_trace_state(config)?;
    Ok(SpikeTrainOutcome { state, traces, record })
}

/// Evidence per hidden unit over time, with window totals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TemporalSaliency {
    pub window_steps: usize,
    /// `per_step[t][b] = sum_a z_a(t) z_b(t) w_ab` over connected inputs.
    pub per_step: Vec<Vec<f64>>,
    /// Sum of `per_step` over consecutive windows (the last one may be
    /// shorter).
    pub windows: Vec<Vec<f64>>,
    /// Window with the largest total evidence, per hidden unit.
    pub peak_window: Vec<usize>,
}

pub fn temporal_saliency(
    record: &SpikeRecord,
    weights: &WeightView,
    window_steps: usize,
) -> Result<TemporalSaliency> {
    let steps = record.steps();
    if window_steps == 0 || window_steps > steps {
        return Err(Error::argument(format!(
            "saliency window of {window_steps} steps does not fit a run of {steps} steps"
        )));
    }
    let n_post = record.n_post;
    let mut per_step = Vec::with_capacity(steps);
    for t in 0..steps {
        let zi = &record.z_pre[t * record.n_pre..(t + 1) * record.n_pre];
        let row: Vec<f64> = (0..n_post)
            .map(|b| {
                let zb = record.z_post[t * n_post + b];
                let mut s = 0.0;
                for (a, &za) in zi.iter().enumerate() {
                    if let Some(w) = weights.get(a, b) {
                        s += za * zb * w;
                    }
                }
                s
            })
            .collect();
        per_step.push(row);
    }
    let windows: Vec<Vec<f64>> = per_step
        .chunks(window_steps)
        .map(|chunk| {
            (0..n_post)
                .map(|b| chunk.iter().map(|r| r[b]).sum())
                .collect()
        })
        .collect();
    let peak_window = (0..n_post)
        .map(|b| {
            let col: Vec<f64> = windows.iter().map(|w| w[b]).collect();
            crate::layout::argmax(&col)
        })
        .collect();
    Ok(TemporalSaliency {
        window_steps,
        per_step,
        windows,
        peak_window,
    })
}
