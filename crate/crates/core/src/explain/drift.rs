//! Two-sided CUSUM over live probability traces.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::learning::trace_rate;
use crate::stats::{mean, std_dev};

/// Smallest standard deviation used when deriving slack and threshold from
/// a baseline window, so a constant unit does not alarm on `0 >= 0`.
const SIGMA_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Alarm {
    pub step: u64,
    pub unit: usize,
    pub direction: Direction,
    pub statistic: f64,
}

/// CUSUM statistics per monitored trace.
///
/// `C+ <- max(0, C+ + (p - p_bar - k))`, `C- <- max(0, C- + (p_bar - p - k))`.
/// A statistic that reaches `h` raises an alarm and is reset to 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftMonitor {
    pub baseline: Vec<f64>,
    pub slack: Vec<f64>,
    pub threshold: Vec<f64>,
    pub c_pos: Vec<f64>,
    pub c_neg: Vec<f64>,
    pub step: u64,
    pub alarms: Vec<Alarm>,
}

impl DriftMonitor {
    pub fn new(baseline: Vec<f64>, slack: Vec<f64>, threshold: Vec<f64>) -> Result<Self> {
        let n = baseline.len();
        if slack.len() != n || threshold.len() != n {
            return Err(Error::argument("baseline, slack and threshold lengths differ"));
        }
        if slack.iter().chain(&threshold).any(|v| !(*v >= 0.0)) {
            return Err(Error::argument("CUSUM slack and threshold must be >= 0"));
        }
        Ok(DriftMonitor {
            c_pos: vec![0.0; n],
            c_neg: vec![0.0; n],
            baseline,
            slack,
            threshold,
            step: 0,
            alarms: Vec::new(),
        })
    }

    /// Same slack `k` and threshold `h` on every trace.
    pub fn uniform(baseline: Vec<f64>, k: f64, h: f64) -> Result<Self> {
        let n = baseline.len();
        DriftMonitor::new(baseline, vec![k; n], vec![h; n])
    }

    /// Baseline mean and standard deviation from a window of samples; slack
    /// and threshold in units of each trace's standard deviation.
    pub fn from_window(window: &[Vec<f64>], k_sigmas: f64, h_sigmas: f64) -> Result<(Self, Vec<f64>)> {
        let first = window
            .first()
            .ok_or_else(|| Error::argument("empty baseline window"))?;
        let n = first.len();
        let cols: Vec<Vec<f64>> = (0..n).map(|u| window.iter().map(|s| s[u]).collect()).collect();
        let baseline: Vec<f64> = cols.iter().map(|c| mean(c)).collect();
        let sigma: Vec<f64> = cols.iter().map(|c| std_dev(c).max(SIGMA_FLOOR)).collect();
        let slack = sigma.iter().map(|s| k_sigmas * s).collect();
        let threshold = sigma.iter().map(|s| h_sigmas * s).collect();
        Ok((DriftMonitor::new(baseline, slack, threshold)?, sigma))
    }

    /// Absorb one live sample; returns the alarms it raised.
    pub fn step(&mut self, live: &[f64]) -> Result<Vec<Alarm>> {
        if live.len() != self.baseline.len() {
            return Err(Error::Dimension {
                what: "live trace sample",
                expected: self.baseline.len(),
                got: live.len(),
            });
        }
        self.step += 1;
        let mut raised = Vec::new();
        for u in 0..live.len() {
            let d = live[u] - self.baseline[u];
            self.c_pos[u] = (self.c_pos[u] + d - self.slack[u]).max(0.0);
            self.c_neg[u] = (self.c_neg[u] - d - self.slack[u]).max(0.0);
            for (c, direction) in [(&mut self.c_pos[u], Direction::Up), (&mut self.c_neg[u], Direction::Down)] {
                if *c >= self.threshold[u] {
                    raised.push(Alarm {
                        step: self.step,
                        unit: u,
                        direction,
                        statistic: *c,
                    });
                    *c = 0.0;
                }
            }
        }
        self.alarms.extend(raised.iter().cloned());
        Ok(raised)
    }
}

/// Live p-trace of deployment-time activity: the same update rule as the
/// learning traces, with a short time constant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiveTrace {
    pub value: Vec<f64>,
    pub tau: f64,
    pub count: u64,
}

impl LiveTrace {
    /// Start at `initial` as if it had been seen `tau` times already.
    pub fn new(initial: Vec<f64>, tau: f64) -> Self {
        LiveTrace {
            value: initial,
            tau,
            count: tau.ceil() as u64,
        }
    }

    pub fn update(&mut self, sample: &[f64]) -> &[f64] {
        let r = trace_rate(self.count, self.tau);
        for (v, &x) in self.value.iter_mut().zip(sample) {
            *v += r * (x - *v);
        }
        self.count += 1;
        &self.value
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftSettings {
    /// Slack in baseline standard deviations.
    pub k_sigmas: f64,
    /// Threshold in baseline standard deviations.
    pub h_sigmas: f64,
    /// Number of leading samples used as the baseline.
    pub baseline_window: usize,
    /// Time constant of the live trace, in samples.
    pub live_tau: f64,
}

impl Default for DriftSettings {
    fn default() -> Self {
        DriftSettings {
            k_sigmas: 0.5,
            h_sigmas: 5.0,
            baseline_window: 1000,
            live_tau: 16.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonitorRun {
    pub baseline: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Samples monitored after the baseline window.
    pub monitored: u64,
    pub alarms: Vec<Alarm>,
}

/// Monitor a stream of per-query activity vectors: the first
/// `baseline_window` samples fix the baseline mean and spread, every later
/// sample updates the live trace, and the live trace feeds the CUSUM.
/// Alarm steps count monitored samples from 1.
pub fn run_monitor<I>(samples: I, settings: &DriftSettings) -> Result<MonitorRun>
where
    I: IntoIterator<Item = Vec<f64>>,
{
    let mut it = samples.into_iter();
    let window: Vec<Vec<f64>> = it.by_ref().take(settings.baseline_window).collect();
    if window.len() < settings.baseline_window || window.is_empty() {
        return Err(Error::argument(format!(
            "stream shorter than the baseline window of {}",
            settings.baseline_window
        )));
    }
    let (mut monitor, sigma) = DriftMonitor::from_window(&window, settings.k_sigmas, settings.h_sigmas)?;
    let mut live = LiveTrace::new(monitor.baseline.clone(), settings.live_tau);
    for s in it {
        let v = live.update(&s).to_vec();
        monitor.step(&v)?;
    }
    Ok(MonitorRun {
        baseline: monitor.baseline.clone(),
        sigma,
        monitored: monitor.step,
        alarms: monitor.alarms,
    })
}
