//! Feedforward inference: support computation and soft winner-take-all.

use crate::config::NetworkConfig;
use crate::error::{Error, Result};
use crate::layout::Layout;
use crate::recurrent::{RecurrentTraces, RecurrentWeights};
use crate::traces::{weights_from_traces, TraceState, WeightView};

/// Tolerance on input simplex sums.
pub const SIMPLEX_TOLERANCE: f64 = 1e-6;

/// Support of every hidden minicolumn together with its additive
/// per-input-hypercolumn decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct Support {
    pub support: Vec<f64>,
    /// `phi[i * n_hidden_units + b]`: evidence from input hypercolumn `i`
    /// for hidden unit `b`, in nats. Exactly zero on masked pairs.
    pub contributions: Vec<f64>,
    pub(crate) n_hidden_units: usize,
}

impl Support {
    pub fn contribution(&self, input_hc: usize, hidden_unit: usize) -> f64 {
        self.contributions[input_hc * self.n_hidden_units + hidden_unit]
    }

    /// The contribution vector over input hypercolumns for one hidden unit.
    pub fn contributions_for(&self, hidden_unit: usize) -> Vec<f64> {
        self.contributions
            .iter()
            .skip(hidden_unit)
            .step_by(self.n_hidden_units)
            .copied()
            .collect()
    }

    /// Total feedforward evidence per hidden unit (support minus bias).
    pub fn evidence(&self) -> Vec<f64> {
        let mut e = vec![0.0; self.n_hidden_units];
        for row in self.contributions.chunks(self.n_hidden_units) {
            for (acc, &phi) in e.iter_mut().zip(row) {
                *acc += phi;
            }
        }
        e
    }
}

/// `s_jk = b_jk + sum_i phi_{i->jk}` with
/// `phi_{i->jk} = sum_m pi_im w_imjk c_ij`.
///
/// The input must hold one simplex per input hypercolumn.
pub fn compute_support(weights: &WeightView, input: &[f64]) -> Result<Support> {
    weights
        .input
        .check_simplices("input activity", input, SIMPLEX_TOLERANCE)?;
    Ok(support_unchecked(weights, input))
}

pub(crate) fn support_unchecked(weights: &WeightView, input: &[f64]) -> Support {
    let li = &weights.input;
    let lh = &weights.hidden;
    let n_post = lh.units();
    let mut contributions = vec![0.0; li.hypercolumns() * n_post];
    for i in 0..li.hypercolumns() {
        let phi_row = &mut contributions[i * n_post..(i + 1) * n_post];
        for j in 0..lh.hypercolumns() {
            if !weights.mask.get(i, j) {
                continue;
            }
            for b in lh.range(j) {
                let mut phi = 0.0;
                for a in li.range(i) {
                    phi += input[a] * weights.weights[a * n_post + b];
                }
                phi_row[b] = phi;
            }
        }
    }
    let mut support = weights.bias.clone();
    for (b, s) in support.iter_mut().enumerate() {
        let mut total = 0.0;
        for i in 0..li.hypercolumns() {
            total += contributions[i * n_post + b];
        }
        *s += total;
    }
    Support {
        support,
        contributions,
        n_hidden_units: n_post,
    }
}

/// Per-hypercolumn softmax, stabilised by subtracting the block maximum.
pub fn soft_wta(support: &[f64], layout: &Layout) -> Vec<f64> {
    let mut out = vec![0.0; support.len()];
    soft_wta_into(support, layout, &mut out);
    out
}

pub(crate) fn soft_wta_into(support: &[f64], layout: &Layout, out: &mut [f64]) {
    for r in layout.ranges() {
        let block = &support[r.clone()];
        let max = block.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for (o, &s) in out[r.clone()].iter_mut().zip(block) {
            *o = (s - max).exp();
            z += *o;
        }
        for o in &mut out[r] {
            *o /= z;
        }
    }
}

/// Result of one inference pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationState {
    pub input: Vec<f64>,
    pub support: Vec<f64>,
    /// Same layout as [`Support::contributions`].
    pub contributions: Vec<f64>,
    pub posterior: Vec<f64>,
    /// Settling trajectory, recurrent runs only.
    pub trajectory: Option<Vec<Vec<f64>>>,
}

impl ActivationState {
    pub fn contribution(&self, input_hc: usize, hidden_unit: usize) -> f64 {
        let n = self.support.len();
        self.contributions[input_hc * n + hidden_unit]
    }

    /// Feedforward evidence per hidden unit: the support without its bias.
    pub fn evidence(&self) -> Vec<f64> {
        let n = self.support.len();
        let mut out = vec![0.0; n];
        for row in self.contributions.chunks_exact(n) {
            for (o, c) in out.iter_mut().zip(row) {
                *o += c;
            }
        }
        out
    }
}

/// A trained (or hand-built) network: configuration, traces and the derived
/// weights. Immutable for inference; learning goes through `&mut`.
#[derive(Debug, Clone)]
pub struct Model {
    config: NetworkConfig,
    input: Layout,
    hidden: Layout,
    traces: TraceState,
    weights: WeightView,
    recurrent: Option<RecurrentTraces>,
    recurrent_weights: Option<RecurrentWeights>,
}

impl Model {
    /// Untrained model with uniform traces.
    pub fn new(config: NetworkConfig) -> Result<Self> {
        config.validate()?;
        let traces = TraceState::uniform(&config);
        let recurrent = config
            .recurrence
            .as_ref()
            .map(|_| RecurrentTraces::uniform(&config.hidden_layout()));
        Model::from_traces(config, traces, recurrent)
    }

    pub fn from_traces(
        config: NetworkConfig,
        traces: TraceState,
        recurrent: Option<RecurrentTraces>,
    ) -> Result<Self> {
        config.validate()?;
        let input = config.input_layout();
        let hidden = config.hidden_layout();
        if recurrent.is_some() != config.recurrence.is_some() {
            return Err(Error::config(
                "recurrent traces must be present exactly when recurrence is enabled",
            ));
        }
        let weights = weights_from_traces(&traces, &input, &hidden, config.probability_floor)?;
        let recurrent_weights = match &recurrent {
            Some(rt) => Some(rt.weights(&traces, &hidden, config.probability_floor)?),
            None => None,
        };
        Ok(Model {
            config,
            input,
            hidden,
            traces,
            weights,
            recurrent,
            recurrent_weights,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn input_layout(&self) -> &Layout {
        &self.input
    }

    pub fn hidden_layout(&self) -> &Layout {
        &self.hidden
    }

    pub fn traces(&self) -> &TraceState {
        &self.traces
    }

    pub fn weights(&self) -> &WeightView {
        &self.weights
    }

    pub fn recurrent(&self) -> Option<&RecurrentTraces> {
        self.recurrent.as_ref()
    }

    pub fn recurrent_weights(&self) -> Option<&RecurrentWeights> {
        self.recurrent_weights.as_ref()
    }

    pub fn floor(&self) -> f64 {
        self.config.probability_floor
    }

    pub(crate) fn traces_mut(&mut self) -> &mut TraceState {
        &mut self.traces
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut TraceState, Option<&mut RecurrentTraces>) {
        (&mut self.traces, self.recurrent.as_mut())
    }

    /// Recompute weights after the traces changed.
    pub fn refresh(&mut self) -> Result<()> {
        self.weights = weights_from_traces(
            &self.traces,
            &self.input,
            &self.hidden,
            self.config.probability_floor,
        )?;
        if let Some(rt) = &self.recurrent {
            self.recurrent_weights =
                Some(rt.weights(&self.traces, &self.hidden, self.config.probability_floor)?);
        }
        Ok(())
    }

    /// One feedforward pass.
    pub fn forward(&self, input: &[f64]) -> Result<ActivationState> {
        let s = compute_support(&self.weights, input)?;
        let posterior = soft_wta(&s.support, &self.hidden);
        Ok(ActivationState {
            input: input.to_vec(),
            support: s.support,
            contributions: s.contributions,
            posterior,
            trajectory: None,
        })
    }

    /// Feedforward pass from categorical states (one per input hypercolumn).
    pub fn forward_states(&self, states: &[usize]) -> Result<ActivationState> {
        self.forward(&self.input.one_hot(states)?)
    }

    /// Winning hidden minicolumn per hidden hypercolumn.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<usize>> {
        Ok(self.hidden.winners(&self.forward(input)?.posterior))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn uniform_softmax() {
        let l = Layout::new(vec![3]);
        let p = soft_wta(&[0.0, 0.0, 0.0], &l);
        assert!(p.iter().all(|&x| close(x, 1.0 / 3.0, 1e-15)));
    }

    #[test]
    fn ln2_softmax() {
        let l = Layout::new(vec![2]);
        let p = soft_wta(&[std::f64::consts::LN_2, 0.0], &l);
        assert!(close(p[0], 2.0 / 3.0, 1e-15) && close(p[1], 1.0 / 3.0, 1e-15));
    }

    #[test]
    fn shifted_ln3_softmax() {
        let l = Layout::new(vec![2]);
        for c in [-40.0, 0.0, 7.5, 300.0] {
            let p = soft_wta(&[c, c + 3f64.ln()], &l);
            assert!(close(p[0], 0.25, 1e-12) && close(p[1], 0.75, 1e-12), "{c}: {p:?}");
        }
    }

    #[test]
    fn untrained_model_gives_prior_only_support() {
        let model = Model::new(NetworkConfig::new(&[3, 2], &[4, 2])).unwrap();
        let st = model.forward_states(&[1, 0]).unwrap();
        let expected = [0.25f64.ln(), 0.25f64.ln(), 0.25f64.ln(), 0.25f64.ln(), 0.5f64.ln(), 0.5f64.ln()];
        for (s, e) in st.support.iter().zip(expected) {
            assert!(close(*s, e, 1e-15));
        }
        assert!(st.posterior[..4].iter().all(|&p| close(p, 0.25, 1e-15)));
        assert!(st.posterior[4..].iter().all(|&p| close(p, 0.5, 1e-15)));
    }

    #[test]
    fn single_weight_support_by_hand() {
        // one input HC, pi one-hot on m = 1, w = 0.7, b = -1.0 -> s = -0.3
        let cfg = NetworkConfig::new(&[2], &[2]);
        let p_post = (-1.0f64).exp();
        let post = vec![p_post, 1.0 - p_post];
        let pre = vec![0.5, 0.5];
        let mut joint = vec![0.0; 4];
        for a in 0..2 {
            for b in 0..2 {
                joint[a * 2 + b] = pre[a] * post[b];
            }
        }
        joint[2] = 0.5 * p_post * 0.7f64.exp();
        let ts = TraceState::from_parts(&cfg, pre, post, joint, cfg.prior_mask(), 0).unwrap();
        let model = Model::from_traces(cfg, ts, None).unwrap();
        let st = model.forward(&[0.0, 1.0]).unwrap();
        assert!(close(st.support[0], -0.3, 1e-12), "{}", st.support[0]);
    }

    #[test]
    fn rejects_all_zero_input_hypercolumn() {
        let model = Model::new(NetworkConfig::new(&[2, 2], &[2])).unwrap();
        assert!(model.forward(&[1.0, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn rejects_wrong_dimension() {
        let model = Model::new(NetworkConfig::new(&[2, 2], &[2])).unwrap();
        assert!(matches!(
            model.forward(&[1.0, 0.0, 1.0]),
            Err(Error::Dimension { .. })
        ));
    }

    proptest! {
        #[test]
        fn softmax_is_shift_invariant(s in proptest::collection::vec(-50.0f64..50.0, 4), c in -100.0f64..100.0) {
            let l = Layout::new(vec![4]);
            let a = soft_wta(&s, &l);
            let shifted: Vec<f64> = s.iter().map(|x| x + c).collect();
            let b = soft_wta(&shifted, &l);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn softmax_is_a_simplex(s in proptest::collection::vec(-700.0f64..700.0, 6)) {
            let l = Layout::new(vec![2, 4]);
            let p = soft_wta(&s, &l);
            for r in l.ranges() {
                let sum: f64 = p[r.clone()].iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-9);
                prop_assert!(p[r].iter().all(|&x| (0.0..=1.0).contains(&x)));
            }
        }
    }
}
