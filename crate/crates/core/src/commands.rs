//! The operations behind each CLI subcommand. Every function is a pure
//! function of its inputs (and seed) and returns the documents to write.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use crate::config::{HypercolumnSpec, NetworkConfig};
use crate::config_xai::{efficiency, emit_ontology, fidelity, rho_sweep, temporal_scope, OntologyDocument, ParetoCurve};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::explain::certify::METRIC;
use crate::explain::{
    attribute, p12_surprise, p14_certified_radius, p15_margin, p16_cross_layer, p3_posterior, p4_p5_importance,
    p6_receptive_field, p7_tuning_curve, p8_diagnostics, p9_counterfactual, run_monitor, support_bars, DeepModel,
    Direction, DriftSettings,
};
use crate::layout::argmax;
use crate::learning::{accuracy, train, Mode, TrainOptions, TrainOutcome};
use crate::network::Model;
use crate::oracle::{sampled_flip_check, GenerativeTable};
use crate::par::{seeded_rng, Execution};
use crate::recurrent::{settle, Clamp, RecurrentTraces};
use crate::report::Report;
use crate::snapshot;
use crate::spiking::{temporal_saliency, train_spiking, SpikeRecord, SpikeTraceState, SpikeTrainOptions};
use crate::traces::TraceState;

/// Explanation primitive identifiers, in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Primitive {
    P1,
    P2,
    P3,
    P4,
    P5,
    P6,
    P7,
    P8,
    P9,
    P10,
    P11,
    P12,
    P13,
    P14,
    P15,
    P16,
}

impl Primitive {
    pub const ALL: [Primitive; 16] = [
        Primitive::P1,
        Primitive::P2,
        Primitive::P3,
        Primitive::P4,
        Primitive::P5,
        Primitive::P6,
        Primitive::P7,
        Primitive::P8,
        Primitive::P9,
        Primitive::P10,
        Primitive::P11,
        Primitive::P12,
        Primitive::P13,
        Primitive::P14,
        Primitive::P15,
        Primitive::P16,
    ];

    pub fn id(self) -> &'static str {
        ["p1", "p2", "p3", "p4", "p5", "p6", "p7", "p8", "p9", "p10", "p11", "p12", "p13", "p14", "p15", "p16"]
            [self as usize]
    }

    /// Comma-separated ids or `all`; result sorted and deduplicated.
    pub fn parse_list(text: &str) -> Result<Vec<Primitive>> {
        let mut out = Vec::new();
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if part.eq_ignore_ascii_case("all") {
                out.extend(Primitive::ALL);
            } else {
                out.push(part.parse()?);
            }
        }
        if out.is_empty() {
            return Err(Error::argument("no primitives selected"));
        }
        out.sort();
        out.dedup();
        Ok(out)
    }
}

impl FromStr for Primitive {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Primitive::ALL
            .into_iter()
            .find(|p| p.id().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::argument(format!("unknown primitive '{s}' (expected p1..p16 or all)")))
    }
}

/// Comma-separated floats; `inf` allowed.
pub fn parse_float_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.parse::<f64>()
                .ok()
                .filter(|v| !v.is_nan())
                .ok_or_else(|| Error::argument(format!("'{p}' is not a number")))
        })
        .collect()
}

/// `Name=state,Name=state,...` over every input hypercolumn. States are
/// declared labels or indices.
pub fn parse_query(config: &NetworkConfig, text: &str) -> Result<Vec<usize>> {
    let mut states = vec![None; config.input.len()];
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (name, value) = part
            .split_once('=')
            .ok_or_else(|| Error::argument(format!("query term '{part}' is not name=state")))?;
        let i = config
            .input
            .iter()
            .position(|h| h.name == name.trim())
            .ok_or_else(|| Error::data(format!("query names unknown attribute '{}'", name.trim())))?;
        let s = config.input[i]
            .state_index(value.trim())
            .ok_or_else(|| Error::data(format!("'{}' is not a state of attribute '{}'", value.trim(), name.trim())))?;
        states[i] = Some(s);
    }
    states
        .iter()
        .enumerate()
        .map(|(i, s)| s.ok_or_else(|| Error::data(format!("query is missing attribute '{}'", config.input[i].name))))
        .collect()
}

fn metadata() -> serde_json::Value {
    serde_json::json!({
        "units": "nats",
        "log_base": "e",
        "tie_breaking": "lowest index wins",
        "usage_denominator": "active outgoing connections of the input hypercolumn",
        "shapley_coalitions": "absent hypercolumn has its contribution removed",
        "perturbation_metric": METRIC,
        "saliency_indices": "z-traces per minicolumn",
    })
}

#[derive(Debug, Clone)]
pub struct ExplainOptions {
    pub primitives: Vec<Primitive>,
    pub seed: u64,
    /// Hidden unit to decompose; defaults to the winner of every hidden
    /// hypercolumn.
    pub target: Option<(usize, usize)>,
    /// Clamp for the counterfactual; defaults to the runner-up of hidden
    /// hypercolumn 0.
    pub counterfactual: Option<Clamp>,
    /// Reference set for receptive-field averages and tuning curves.
    pub reference: Option<Dataset>,
    /// Random perturbations checked against each certificate; 0 skips.
    pub flip_samples: usize,
    /// Simulated steps for temporal saliency.
    pub spike_steps: usize,
    pub saliency_window_ms: f64,
}

impl Default for ExplainOptions {
    fn default() -> Self {
        ExplainOptions {
            primitives: Primitive::ALL.to_vec(),
            seed: 0,
            target: None,
            counterfactual: None,
            reference: None,
            flip_samples: 1000,
            spike_steps: 1000,
            saliency_window_ms: 50.0,
        }
    }
}

#[derive(Serialize)]
struct QueryEcho<'a> {
    attribute: &'a str,
    state: String,
}

#[derive(Serialize)]
struct EvidenceTerm {
    attribute: String,
    state: String,
    /// `pi_im * w_imjk`, nats.
    evidence: f64,
}

/// Explanation report for one query (state index per input hypercolumn).
pub fn cmd_explain(model: &Model, query: &[usize], opts: &ExplainOptions) -> Result<Report> {
    let cfg = model.config();
    let (li, lh) = (model.input_layout(), model.hidden_layout());
    let x = li.one_hot(query)?;
    let state = model.forward(&x)?;
    let winners = lh.winners(&state.posterior);
    let targets: Vec<(usize, usize)> = match opts.target {
        Some((j, k)) => {
            if j >= lh.hypercolumns() || k >= lh.size(j) {
                return Err(Error::argument(format!("target ({j}, {k}) out of range")));
            }
            vec![(j, k)]
        }
        None => winners.iter().copied().enumerate().collect(),
    };
    let mut r = Report::new("explain", Some(opts.seed));
    r.set("snapshot_digest", snapshot::digest(model)?)?;
    r.set(
        "query",
        cfg.input
            .iter()
            .zip(query)
            .map(|(h, &s)| QueryEcho {
                attribute: &h.name,
                state: h.state_label(s),
            })
            .collect::<Vec<_>>(),
    )?;
    r.set("primitives", opts.primitives.iter().map(|p| p.id()).collect::<Vec<_>>())?;
    r.set("metadata", metadata())?;
    let attributions = targets
        .iter()
        .map(|&t| attribute(model, &state, t))
        .collect::<Result<Vec<_>>>()?;
    let unit_name = |j: usize, k: usize| format!("{}={}", cfg.hidden[j].name, cfg.hidden[j].state_label(k));
    let recurrence_off = cfg.recurrence.is_none();
    for &p in &opts.primitives {
        let id = p.id();
        match p {
            Primitive::P1 => {
                let v: Vec<serde_json::Value> = attributions
                    .iter()
                    .map(|a| {
                        let terms: Vec<EvidenceTerm> = a
                            .evidence
                            .iter()
                            .enumerate()
                            .filter_map(|(u, e)| {
                                let (i, m) = li.locate(u);
                                e.filter(|_| x[u] > 0.0).map(|ev| EvidenceTerm {
                                    attribute: cfg.input[i].name.clone(),
                                    state: cfg.input[i].state_label(m),
                                    evidence: ev,
                                })
                            })
                            .collect();
                        serde_json::json!({ "target": unit_name(a.hypercolumn, a.minicolumn), "terms": terms })
                    })
                    .collect();
                r.section(id, v)?;
            }
            Primitive::P2 => {
                let v: Vec<serde_json::Value> = attributions
                    .iter()
                    .map(|a| serde_json::json!({ "target": unit_name(a.hypercolumn, a.minicolumn), "bias": a.bias }))
                    .collect();
                r.section(id, v)?;
            }
            Primitive::P3 => r.section(id, p3_posterior(model, &state.posterior)?)?,
            Primitive::P4 | Primitive::P5 => {
                let graph = p4_p5_importance(model)?;
                let v: Vec<serde_json::Value> = graph
                    .iter()
                    .map(|c| {
                        serde_json::json!({
                            "input": cfg.input[c.input].name,
                            "hidden": cfg.hidden[c.hidden].name,
                            "active": c.active,
                            "usage": c.usage,
                        })
                    })
                    .collect();
                r.section(id, v)?;
            }
            Primitive::P6 => {
                let inputs: Vec<Vec<f64>> = match &opts.reference {
                    Some(d) => d.inputs.iter().map(|s| li.one_hot(s)).collect::<Result<_>>()?,
                    None => vec![x.clone()],
                };
                let fields = targets
                    .iter()
                    .map(|&t| p6_receptive_field(model, t, &inputs))
                    .collect::<Result<Vec<_>>>()?;
                r.section(id, fields)?;
            }
            Primitive::P7 => match &opts.reference {
                Some(d) => {
                    let curves = targets
                        .iter()
                        .map(|&t| p7_tuning_curve(model, t, &d.inputs))
                        .collect::<Result<Vec<_>>>()?;
                    r.section(id, curves)?;
                }
                None => r.unavailable(id, "no reference dataset"),
            },
            Primitive::P8 if recurrence_off => r.unavailable(id, "recurrence disabled"),
            Primitive::P8 => {
                let run = settle(model, Some(&state.evidence()), &state.posterior, None)?;
                let d = p8_diagnostics(&run, lh);
                if !d.converged {
                    r.warn(format!("non-convergence: settling did not reach tolerance in {} steps", d.settling_time));
                }
                r.section(id, d)?;
            }
            Primitive::P9 if recurrence_off => r.unavailable(id, "recurrence disabled"),
            Primitive::P9 => {
                let clamp = match opts.counterfactual {
                    Some(c) => c,
                    None => {
                        let post = &state.posterior[lh.range(0)];
                        let mut order: Vec<usize> = (0..post.len()).collect();
                        order.sort_by(|&a, &b| post[b].total_cmp(&post[a]));
                        Clamp {
                            hypercolumn: 0,
                            minicolumn: order.get(1).copied().unwrap_or(0),
                        }
                    }
                };
                r.section(id, p9_counterfactual(model, &x, clamp)?)?;
            }
            Primitive::P10 => match cfg.spiking {
                None => r.unavailable(id, "no spiking parameters"),
                Some(ref spk) => {
                    let window = ((opts.saliency_window_ms / spk.dt_ms).round() as usize).max(1);
                    let record = simulate_query(model, &x, &state.posterior, opts.spike_steps, opts.seed)?;
                    let sal = temporal_saliency(&record, model.weights(), window.min(record.steps()))?;
                    let v: Vec<serde_json::Value> = targets
                        .iter()
                        .map(|&(j, k)| {
                            let b = lh.unit(j, k);
                            let peak = sal.peak_window[b];
                            serde_json::json!({
                                "target": unit_name(j, k),
                                "window_ms": sal.window_steps as f64 * spk.dt_ms,
                                "window_totals": sal.windows.iter().map(|w| w[b]).collect::<Vec<_>>(),
                                "peak_window": peak,
                                "peak_start_ms": (peak * sal.window_steps) as f64 * spk.dt_ms,
                            })
                        })
                        .collect();
                    r.section(id, v)?;
                }
            },
            Primitive::P11 => {
                let v: Vec<serde_json::Value> = attributions
                    .iter()
                    .map(|a| {
                        serde_json::json!({
                            "target": unit_name(a.hypercolumn, a.minicolumn),
                            "bars": support_bars(model, a),
                        })
                    })
                    .collect();
                r.section(id, v)?;
            }
            Primitive::P12 => r.section(id, p12_surprise(lh, &state.posterior)?)?,
            Primitive::P13 => r.unavailable(id, "needs a live stream (see the monitor command)"),
            Primitive::P14 => {
                let mut v = Vec::new();
                for j in 0..lh.hypercolumns() {
                    let cert = p14_certified_radius(model, &x, j)?;
                    let check = if opts.flip_samples > 0 {
                        Some(sampled_flip_check(model, &x, j, cert.radius, opts.flip_samples, opts.seed)?)
                    } else {
                        None
                    };
                    if let Some(c) = &check {
                        if c.flips > 0 {
                            return Err(Error::invariant(format!(
                                "perturbation below the certified radius flipped hidden hypercolumn {j}"
                            )));
                        }
                    }
                    v.push(serde_json::json!({ "certificate": cert, "sampled_check": check }));
                }
                r.section(id, v)?;
            }
            Primitive::P15 => {
                let m = (0..lh.hypercolumns())
                    .map(|j| p15_margin(lh, &state.posterior, j))
                    .collect::<Result<Vec<_>>>()?;
                r.section(id, m)?;
            }
            Primitive::P16 => {
                let deep = DeepModel::new(vec![model.clone()])?;
                let v = targets
                    .iter()
                    .map(|&t| p16_cross_layer(&deep, &x, t))
                    .collect::<Result<Vec<_>>>()?;
                r.section(id, v)?;
            }
        }
    }
    Ok(r)
}

/// Settling trajectory of a query, one comma-separated hidden state per
/// line, step 0 first.
pub fn trajectory_lines(model: &Model, query: &[usize]) -> Result<String> {
    let x = model.input_layout().one_hot(query)?;
    let state = model.forward(&x)?;
    let run = settle(model, Some(&state.evidence()), &state.posterior, None)?;
    let mut s = String::new();
    for step in &run.trajectory {
        let line: Vec<String> = step.iter().map(|v| format!("{:.6}", crate::report::round_f64(*v))).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    Ok(s)
}

/// Spike trains of one query: input rates from the query, hidden rates
/// from the rate model's posterior.
fn simulate_query(model: &Model, x: &[f64], posterior: &[f64], steps: usize, seed: u64) -> Result<SpikeRecord> {
    let mut st = SpikeTraceState::new(model.config())?;
    let mut rec = SpikeRecord::new(&st);
    let mut rng = seeded_rng(seed, 1);
    for _ in 0..steps.max(1) {
        let (sp, sq) = st.spike_step(x, posterior, &mut rng)?;
        rec.push(&st, &sp, &sq);
    }
    Ok(rec)
}

pub struct TrainProducts {
    pub model: Model,
    /// Emitted from the configuration before any update.
    pub ontology: OntologyDocument,
    pub outcome: TrainOutcome,
    pub report: Report,
}

impl TrainProducts {
    /// `step,epoch,mean_abs_dp,swaps` per structural pass.
    pub fn log_csv(&self) -> String {
        let mut s = String::from("step,epoch,mean_abs_dp,swaps\n");
        for rec in &self.outcome.log {
            let _ = writeln!(s, "{},{},{:.9},{}", rec.step, rec.epoch, rec.mean_abs_dp, rec.swaps.len());
        }
        s
    }
}

pub fn cmd_train(config: NetworkConfig, data: &Dataset, opts: &TrainOptions, purpose: &str) -> Result<TrainProducts> {
    let ontology = emit_ontology(&config, purpose, crate::config_xai::DEFAULT_CREATED)?;
    data.check(&config)?;
    let mut model = Model::new(config)?;
    let outcome = train(&mut model, data, opts)?;
    let mut r = Report::new("train", Some(opts.seed));
    r.set("snapshot_digest", snapshot::digest(&model)?)?;
    r.set("ontology_digest", &ontology.digest)?;
    r.section("options", opts)?;
    r.section("samples", data.len())?;
    let all: Vec<usize> = (0..data.len()).collect();
    if data.labels.is_some() && opts.mode == Mode::Supervised {
        r.section("train_accuracy", accuracy(&model, data, &all)?)?;
    }
    r.section("structural_events", &outcome.events)?;
    r.section("active_connections", model.traces().mask().count())?;
    Ok(TrainProducts {
        model,
        ontology,
        outcome,
        report: r,
    })
}

pub fn cmd_audit(model: &Model, expert: Option<&[String]>, warn_fraction: f64) -> Result<Report> {
    let mut r = Report::new("audit", None);
    r.set("snapshot_digest", snapshot::digest(model)?)?;
    r.set("metadata", metadata())?;
    let graph = p4_p5_importance(model)?;
    r.section("p4_p5", graph)?;
    let eff = efficiency(model, warn_fraction);
    for &j in &eff.flagged {
        r.warn(format!(
            "hidden hypercolumn '{}' differentiation {:.6} is below {} of the median",
            model.config().hidden[j].name,
            eff.per_hypercolumn[j],
            warn_fraction
        ));
    }
    r.section("config_p2", eff)?;
    match expert {
        Some(list) => r.section("config_p4", fidelity(list, model)?)?,
        None => r.unavailable("config_p4", "no expert ranking supplied"),
    }
    match temporal_scope(model.config()) {
        Some(t) => r.section("config_p5", t)?,
        None => r.unavailable("config_p5", "no spiking parameters"),
    }
    Ok(r)
}

/// Runs the sweep and enforces the monotone connection count.
pub fn cmd_sweep(
    config: &NetworkConfig,
    data: &Dataset,
    grid: &[f64],
    seeds: &[u64],
    opts: &TrainOptions,
    exec: Execution,
) -> Result<ParetoCurve> {
    let curve = rho_sweep(config, data, grid, seeds, opts, exec)?;
    if !curve.monotone {
        return Err(Error::invariant("active-connection count increased along the rho grid"));
    }
    Ok(curve)
}

pub struct MonitorProducts {
    pub report: Report,
    /// `step,hypercolumn,minicolumn,direction,statistic` per alarm.
    pub events_csv: String,
}

/// CUSUM over the posterior of every streamed sample.
pub fn cmd_monitor(model: &Model, stream: &Dataset, settings: &DriftSettings) -> Result<MonitorProducts> {
    stream.check(model.config())?;
    let li = model.input_layout();
    let posts = stream
        .inputs
        .iter()
        .map(|s| Ok(model.forward(&li.one_hot(s)?)?.posterior))
        .collect::<Result<Vec<_>>>()?;
    let run = run_monitor(posts, settings)?;
    let lh = model.hidden_layout();
    let mut csv = String::from("step,hypercolumn,minicolumn,direction,statistic\n");
    for a in &run.alarms {
        let (j, k) = lh.locate(a.unit);
        let dir = match a.direction {
            Direction::Up => "up",
            Direction::Down => "down",
        };
        let _ = writeln!(csv, "{},{j},{k},{dir},{:.6}", a.step, a.statistic);
    }
    let mut r = Report::new("monitor", None);
    r.set("snapshot_digest", snapshot::digest(model)?)?;
    r.section("settings", settings)?;
    r.section(
        "summary",
        serde_json::json!({
            "samples": stream.len(),
            "monitored": run.monitored,
            "alarms": run.alarms.len(),
            "first_alarm_step": run.alarms.first().map(|a| a.step),
        }),
    )?;
    r.section("baseline", &run.baseline)?;
    r.section("sigma", &run.sigma)?;
    Ok(MonitorProducts { report: r, events_csv: csv })
}

pub fn cmd_ontology(config: &NetworkConfig, purpose: &str, created: &str) -> Result<String> {
    let mut s = emit_ontology(config, purpose, created)?.to_json()?;
    s.push('\n');
    Ok(s)
}

pub struct SpikeProducts {
    pub model: Model,
    pub raster: Vec<u8>,
    pub report: Report,
}

pub fn cmd_spike(config: NetworkConfig, data: &Dataset, opts: &SpikeTrainOptions) -> Result<SpikeProducts> {
    let out = train_spiking(&config, data, opts)?;
    let mut raster = Vec::new();
    out.record
        .write_raster(&mut raster, &config.input_layout(), &config.hidden_layout())?;
    // spike trains carry no recurrent learning; the memory starts uniform
    let recurrent = config
        .recurrence
        .as_ref()
        .map(|_| RecurrentTraces::uniform(&config.hidden_layout()));
    let model = Model::from_traces(config, out.traces, recurrent)?;
    let mut r = Report::new("spike", Some(opts.seed));
    r.set("snapshot_digest", snapshot::digest(&model)?)?;
    r.section("options", opts)?;
    r.section("steps", out.state.update_count())?;
    match temporal_scope(model.config()) {
        Some(t) => r.section("config_p5", t)?,
        None => r.unavailable("config_p5", "no spiking parameters"),
    }
    Ok(SpikeProducts { model, raster, report: r })
}

/// Synthetic task presets for `generate`.
pub fn preset(name: &str, noise: f64, seed: u64) -> Result<GenerativeTable> {
    match name {
        "fruit" => Ok(GenerativeTable::fruit(noise)),
        "graded" => Ok(GenerativeTable::graded_default()),
        "prototype" => Ok(GenerativeTable::prototype(8, 4, 4, noise, seed)),
        "coupled" => Ok(GenerativeTable::coupled_binary()),
        _ => Err(Error::argument(format!(
            "unknown preset '{name}' (expected fruit, graded, prototype, coupled or risk-demo)"
        ))),
    }
}

/// Hand-built financial risk model whose winning unit for the query
/// `Volatility=high, Volume=high, Momentum=up` decomposes into a prior of
/// -2.0 and contributions +1.8, -0.3, +0.9 nats (total 0.4).
pub fn risk_demo_model() -> Result<Model> {
    let input = vec![
        HypercolumnSpec::labelled("Volatility", &["low", "high"]),
        HypercolumnSpec::labelled("Volume", &["low", "high"]),
        HypercolumnSpec::labelled("Momentum", &["down", "up"]),
    ];
    let hidden = vec![HypercolumnSpec::labelled("Risk", &["crash", "normal"])];
    let config = NetworkConfig::from_specs(input, hidden);
    let p_crash = (-2.0f64).exp();
    let post = vec![p_crash, 1.0 - p_crash];
    // (marginal of the "high"/"up" state, contribution it adds to crash)
    let attrs = [(0.1, 1.8), (0.5, -0.3), (0.3, 0.9)];
    let mut pre = Vec::new();
    let mut joint = Vec::new();
    for (p_hi, phi) in attrs {
        let hi_crash = p_hi * p_crash * f64::exp(phi);
        let lo_crash = p_crash - hi_crash;
        pre.extend([1.0 - p_hi, p_hi]);
        joint.extend([lo_crash, (1.0 - p_hi) - lo_crash, hi_crash, p_hi - hi_crash]);
    }
    let traces = TraceState::from_parts(&config, pre, post, joint, config.prior_mask(), 0)?;
    Model::from_traces(config, traces, None)
}

pub const RISK_DEMO_QUERY: &str = "Volatility=high,Volume=high,Momentum=up";

/// Winner per hidden hypercolumn for a query, convenience for callers.
pub fn predict_states(model: &Model, query: &[usize]) -> Result<Vec<usize>> {
    let x = model.input_layout().one_hot(query)?;
    let s = model.forward(&x)?;
    Ok(model.hidden_layout().ranges().map(|r| argmax(&s.posterior[r])).collect())
}
