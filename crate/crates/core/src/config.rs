//! The declared network ontology: hypercolumn sizes and labels, the
//! connectivity prior, and the learning / settling / spiking constants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::Layout;

pub const DEFAULT_PLASTICITY_THRESHOLD: f64 = 2.0;
pub const DEFAULT_TRACE_TIME_CONSTANT: f64 = 1000.0;
pub const DEFAULT_SWAP_INTERVAL: usize = 100;
pub const DEFAULT_PROBABILITY_FLOOR: f64 = 1e-8;

/// One hypercolumn: an attribute with `size` discrete states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypercolumnSpec {
    pub name: String,
    pub size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<Vec<String>>,
}

impl HypercolumnSpec {
    pub fn new(name: impl Into<String>, size: usize) -> Self {
        HypercolumnSpec {
            name: name.into(),
            size,
            states: None,
        }
    }

    pub fn labelled(name: impl Into<String>, states: &[&str]) -> Self {
        HypercolumnSpec {
            name: name.into(),
            size: states.len(),
            states: Some(states.iter().map(|s| s.to_string()).collect()),
        }
    }

    /// Display label of state `m`; falls back to the index.
    pub fn state_label(&self, m: usize) -> String {
        match &self.states {
            Some(s) => s[m].clone(),
            None => m.to_string(),
        }
    }

    /// Resolve a state by label, or by index when the hypercolumn is unlabelled
    /// (numeric strings are accepted in both cases as a fallback).
    pub fn state_index(&self, value: &str) -> Option<usize> {
        let value = value.trim();
        if let Some(states) = &self.states {
            if let Some(i) = states.iter().position(|s| s == value) {
                return Some(i);
            }
        }
        value.parse::<usize>().ok().filter(|&i| i < self.size)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceConfig {
    /// Maximum settling steps T.
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    /// Settling tolerance on the max-norm of successive posteriors.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Read the input reconstruction after one feedback pass instead of
    /// after settling.
    #[serde(default)]
    pub single_pass: bool,
}

fn default_max_steps() -> usize {
    50
}

fn default_tolerance() -> f64 {
    1e-4
}

impl Default for RecurrenceConfig {
    fn default() -> Self {
        RecurrenceConfig {
            max_steps: default_max_steps(),
            tolerance: default_tolerance(),
            single_pass: false,
        }
    }
}

/// Constants of the spiking variant. Times in milliseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikingConfig {
    #[serde(default = "default_dt")]
    pub dt_ms: f64,
    #[serde(default = "default_tau_z")]
    pub tau_z_pre_ms: f64,
    #[serde(default = "default_tau_z")]
    pub tau_z_post_ms: f64,
    /// Firing rate of a fully active minicolumn, spikes per second.
    #[serde(default = "default_max_rate")]
    pub max_rate_hz: f64,
}

fn default_dt() -> f64 {
    1.0
}

fn default_tau_z() -> f64 {
    50.0
}

fn default_max_rate() -> f64 {
    100.0
}

impl Default for SpikingConfig {
    fn default() -> Self {
        SpikingConfig {
            dt_ms: default_dt(),
            tau_z_pre_ms: default_tau_z(),
            tau_z_post_ms: default_tau_z(),
            max_rate_hz: default_max_rate(),
        }
    }
}

impl SpikingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_ms > 0.0) || !self.dt_ms.is_finite() {
            return Err(Error::config("spiking time step must be > 0"));
        }
        if !(self.tau_z_pre_ms > 0.0 && self.tau_z_post_ms > 0.0) {
            return Err(Error::config("z-trace time constants must be > 0"));
        }
        if !(self.max_rate_hz > 0.0) || !self.max_rate_hz.is_finite() {
            return Err(Error::config("max firing rate must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub input: Vec<HypercolumnSpec>,
    pub hidden: Vec<HypercolumnSpec>,
    /// Connectivity prior, one row per input hypercolumn, one 0/1 column per
    /// hidden hypercolumn. Absent means fully connected.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub connectivity: Option<Vec<Vec<u8>>>,
    /// Usage ratio above which an active and a silent connection swap.
    #[serde(default = "default_rho", with = "extended_f64")]
    pub plasticity_threshold: f64,
    /// p-trace time constant, in update steps.
    #[serde(default = "default_tau_p")]
    pub trace_time_constant: f64,
    /// Learning steps between structural plasticity passes.
    #[serde(default = "default_swap_interval")]
    pub swap_interval: usize,
    #[serde(default = "default_floor")]
    pub probability_floor: f64,
    /// Upper bound on silent (input, hidden) hypercolumn pairs that keep
    /// shadow traces. Absent means all of them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shadow_cap: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recurrence: Option<RecurrenceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spiking: Option<SpikingConfig>,
}

fn default_rho() -> f64 {
    DEFAULT_PLASTICITY_THRESHOLD
}

fn default_tau_p() -> f64 {
    DEFAULT_TRACE_TIME_CONSTANT
}

fn default_swap_interval() -> usize {
    DEFAULT_SWAP_INTERVAL
}

fn default_floor() -> f64 {
    DEFAULT_PROBABILITY_FLOOR
}

impl NetworkConfig {
    /// Fully connected config with generated names (`in0`, `hid0`, ...).
    pub fn new(input: &[usize], hidden: &[usize]) -> Self {
        NetworkConfig {
            input: input
                .iter()
                .enumerate()
                .map(|(i, &m)| HypercolumnSpec::new(format!("in{i}"), m))
                .collect(),
            hidden: hidden
                .iter()
                .enumerate()
                .map(|(j, &m)| HypercolumnSpec::new(format!("hid{j}"), m))
                .collect(),
            connectivity: None,
            plasticity_threshold: DEFAULT_PLASTICITY_THRESHOLD,
            trace_time_constant: DEFAULT_TRACE_TIME_CONSTANT,
            swap_interval: DEFAULT_SWAP_INTERVAL,
            probability_floor: DEFAULT_PROBABILITY_FLOOR,
            shadow_cap: None,
            recurrence: None,
            spiking: None,
        }
    }

    pub fn from_specs(input: Vec<HypercolumnSpec>, hidden: Vec<HypercolumnSpec>) -> Self {
        let mut cfg = NetworkConfig::new(&[], &[]);
        cfg.input = input;
        cfg.hidden = hidden;
        cfg
    }

    pub fn with_mask(mut self, mask: &Mask) -> Self {
        self.connectivity = Some(mask.to_rows());
        self
    }

    pub fn with_recurrence(mut self, rec: RecurrenceConfig) -> Self {
        self.recurrence = Some(rec);
        self
    }

    pub fn with_spiking(mut self, spk: SpikingConfig) -> Self {
        self.spiking = Some(spk);
        self
    }

    pub fn with_trace_time_constant(mut self, tau_p: f64) -> Self {
        self.trace_time_constant = tau_p;
        self
    }

    pub fn with_plasticity_threshold(mut self, rho: f64) -> Self {
        self.plasticity_threshold = rho;
        self
    }

    pub fn input_layout(&self) -> Layout {
        Layout::new(self.input.iter().map(|h| h.size).collect::<Vec<_>>())
    }

    pub fn hidden_layout(&self) -> Layout {
        Layout::new(self.hidden.iter().map(|h| h.size).collect::<Vec<_>>())
    }

    pub fn prior_mask(&self) -> Mask {
        match &self.connectivity {
            Some(rows) => Mask::from_rows(rows, self.hidden.len()),
            None => Mask::full(self.input.len(), self.hidden.len()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input.is_empty() || self.hidden.is_empty() {
            return Err(Error::config(
                "at least one input and one hidden hypercolumn are required",
            ));
        }
        for (pop, hcs) in [("input", &self.input), ("hidden", &self.hidden)] {
            for hc in hcs.iter() {
                if hc.size < 2 {
                    return Err(Error::config(format!(
                        "{pop} hypercolumn '{}' has {} minicolumns; at least 2 required",
                        hc.name, hc.size
                    )));
                }
                if let Some(states) = &hc.states {
                    if states.len() != hc.size {
                        return Err(Error::config(format!(
                            "{pop} hypercolumn '{}' declares {} minicolumns but {} state labels",
                            hc.name,
                            hc.size,
                            states.len()
                        )));
                    }
                }
            }
        }
        if let Some(rows) = &self.connectivity {
            if rows.len() != self.input.len() {
                return Err(Error::config(format!(
                    "connectivity has {} rows, expected one per input hypercolumn ({})",
                    rows.len(),
                    self.input.len()
                )));
            }
            for (i, row) in rows.iter().enumerate() {
                if row.len() != self.hidden.len() {
                    return Err(Error::config(format!(
                        "connectivity row {i} has {} entries, expected {}",
                        row.len(),
                        self.hidden.len()
                    )));
                }
                if row.iter().any(|&c| c > 1) {
                    return Err(Error::config(format!(
                        "connectivity row {i} has entries other than 0/1"
                    )));
                }
            }
        }
        let mask = self.prior_mask();
        for j in 0..self.hidden.len() {
            if mask.active_incoming(j) == 0 {
                return Err(Error::config(format!(
                    "hidden hypercolumn '{}' has no active incoming connection",
                    self.hidden[j].name
                )));
            }
        }
        if self.plasticity_threshold.is_nan() || self.plasticity_threshold <= 1.0 {
            return Err(Error::config("plasticity threshold must be > 1"));
        }
        if !(self.trace_time_constant > 0.0) {
            return Err(Error::config("trace time constant must be > 0"));
        }
        if self.swap_interval == 0 {
            return Err(Error::config("swap interval must be >= 1"));
        }
        if !(self.probability_floor > 0.0 && self.probability_floor < 1.0) {
            return Err(Error::config("probability floor must lie in (0, 1)"));
        }
        if let Some(rec) = &self.recurrence {
            if rec.max_steps == 0 {
                return Err(Error::config("max settling steps must be >= 1"));
            }
            if !(rec.tolerance > 0.0) {
                return Err(Error::config("settling tolerance must be > 0"));
            }
        }
        if let Some(spk) = &self.spiking {
            spk.validate()?;
        }
        Ok(())
    }
}

/// Binary hypercolumn-level connectivity, indexed `(input, hidden)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mask {
    inputs: usize,
    hiddens: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn full(inputs: usize, hiddens: usize) -> Self {
        Mask {
            inputs,
            hiddens,
            bits: vec![true; inputs * hiddens],
        }
    }

    pub fn empty(inputs: usize, hiddens: usize) -> Self {
        Mask {
            inputs,
            hiddens,
            bits: vec![false; inputs * hiddens],
        }
    }

    fn from_rows(rows: &[Vec<u8>], hiddens: usize) -> Self {
        let mut m = Mask::empty(rows.len(), hiddens);
        for (i, row) in rows.iter().enumerate() {
            for (j, &c) in row.iter().enumerate().take(hiddens) {
                m.set(i, j, c == 1);
            }
        }
        m
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        (0..self.inputs)
            .map(|i| (0..self.hiddens).map(|j| self.get(i, j) as u8).collect())
            .collect()
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn hiddens(&self) -> usize {
        self.hiddens
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.hiddens + j]
    }

    pub fn set(&mut self, i: usize, j: usize, on: bool) {
        self.bits[i * self.hiddens + j] = on;
    }

    /// Number of active connections into hidden hypercolumn `j`.
    pub fn active_incoming(&self, j: usize) -> usize {
        (0..self.inputs).filter(|&i| self.get(i, j)).count()
    }

    /// Number of active connections out of input hypercolumn `i`.
    pub fn active_outgoing(&self, i: usize) -> usize {
        (0..self.hiddens).filter(|&j| self.get(i, j)).count()
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub(crate) fn from_bits(inputs: usize, hiddens: usize, bits: Vec<bool>) -> Self {
        debug_assert_eq!(bits.len(), inputs * hiddens);
        Mask {
            inputs,
            hiddens,
            bits,
        }
    }
}

/// Serde adapter for floats that may be infinite (`"inf"` in JSON).
pub mod extended_f64 {
    use serde::de::{self, Deserializer, Visitor};
    use serde::Serializer;
    use std::fmt;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = f64;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
                Ok(v)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
                match v.to_ascii_lowercase().as_str() {
                    "inf" | "infinity" | "+inf" => Ok(f64::INFINITY),
                    "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
                    other => other.parse().map_err(E::custom),
                }
            }
        }
        d.deserialize_any(V)
    }
}
