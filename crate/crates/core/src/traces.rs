//! Probability traces and the weights / biases derived from them.

use crate::config::{Mask, NetworkConfig};
use crate::error::{Error, Result};
use crate::layout::Layout;

/// Slack allowed above 1 on stored traces before they count as corrupt.
const TRACE_UPPER_SLACK: f64 = 1e-9;

/// Running marginal and joint activation probabilities.
///
/// Joint traces are kept for every (input unit, hidden unit) pair, including
/// pairs whose hypercolumns are currently disconnected: those are the shadow
/// traces that let structural plasticity score silent connections. Stored
/// values are raw estimates in `[0, 1]`; the probability floor is applied when
/// they are read.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceState {
    pub(crate) pre: Vec<f64>,
    pub(crate) post: Vec<f64>,
    /// Row-major `[pre_unit * n_post + post_unit]`.
    pub(crate) joint: Vec<f64>,
    pub(crate) mask: Mask,
    pub(crate) tracked: Vec<bool>,
    pub(crate) update_count: u64,
    pub(crate) shadow_cap: Option<usize>,
    /// Hypercolumn of every input / hidden unit.
    pub(crate) pre_hc: Vec<usize>,
    pub(crate) post_hc: Vec<usize>,
}

impl TraceState {
    /// Uniform marginals and independent joints: every weight is zero and
    /// every bias is `log(1/M_j)`.
    pub fn uniform(config: &NetworkConfig) -> Self {
        let pre = config.input_layout().uniform_activity();
        let post = config.hidden_layout().uniform_activity();
        let joint = pre
            .iter()
            .flat_map(|&a| post.iter().map(move |&b| a * b))
            .collect();
        let mask = config.prior_mask();
        let tracked = tracked_pairs(&mask, config.shadow_cap);
        TraceState {
            pre,
            post,
            joint,
            mask,
            tracked,
            update_count: 0,
            shadow_cap: config.shadow_cap,
            pre_hc: unit_hypercolumns(&config.input_layout()),
            post_hc: unit_hypercolumns(&config.hidden_layout()),
        }
    }

    /// Assemble a trace state from explicit values (hand-built models,
    /// snapshot loading). Values must lie in `[0, 1]`.
    pub fn from_parts(
        config: &NetworkConfig,
        pre: Vec<f64>,
        post: Vec<f64>,
        joint: Vec<f64>,
        mask: Mask,
        update_count: u64,
    ) -> Result<Self> {
        let li = config.input_layout();
        let lh = config.hidden_layout();
        li.check_len("pre-synaptic marginal traces", pre.len())?;
        lh.check_len("post-synaptic marginal traces", post.len())?;
        if joint.len() != li.units() * lh.units() {
            return Err(Error::Dimension {
                what: "joint traces",
                expected: li.units() * lh.units(),
                got: joint.len(),
            });
        }
        if mask.inputs() != li.hypercolumns() || mask.hiddens() != lh.hypercolumns() {
            return Err(Error::config("mask shape does not match the configuration"));
        }
        let tracked = tracked_pairs(&mask, config.shadow_cap);
        let ts = TraceState {
            pre,
            post,
            joint,
            mask,
            tracked,
            update_count,
            shadow_cap: config.shadow_cap,
            pre_hc: unit_hypercolumns(&li),
            post_hc: unit_hypercolumns(&lh),
        };
        ts.check_stored()?;
        Ok(ts)
    }

    pub fn pre(&self) -> &[f64] {
        &self.pre
    }

    pub fn post(&self) -> &[f64] {
        &self.post
    }

    pub fn joint(&self) -> &[f64] {
        &self.joint
    }

    pub fn joint_at(&self, pre_unit: usize, post_unit: usize) -> f64 {
        self.joint[pre_unit * self.post.len() + post_unit]
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn update_count(&self) -> u64 {
        self.update_count
    }

    /// Whether the `(input hc, hidden hc)` pair keeps live traces.
    pub fn is_tracked(&self, i: usize, j: usize) -> bool {
        self.tracked[i * self.mask.hiddens() + j]
    }

    pub(crate) fn set_mask(&mut self, mask: Mask) {
        self.tracked = tracked_pairs(&mask, self.shadow_cap);
        self.mask = mask;
    }

    /// Stored values must be finite and inside `[0, 1]`.
    pub fn check_stored(&self) -> Result<()> {
        let bad = |v: &f64| !v.is_finite() || *v < 0.0 || *v > 1.0 + TRACE_UPPER_SLACK;
        if let Some(v) = self.pre.iter().find(|v| bad(v)) {
            return Err(Error::invariant(format!("pre-synaptic trace out of range: {v}")));
        }
        if let Some(v) = self.post.iter().find(|v| bad(v)) {
            return Err(Error::invariant(format!("post-synaptic trace out of range: {v}")));
        }
        if let Some(v) = self.joint.iter().find(|v| bad(v)) {
            return Err(Error::invariant(format!("joint trace out of range: {v}")));
        }
        Ok(())
    }
}

fn unit_hypercolumns(layout: &Layout) -> Vec<usize> {
    (0..layout.units()).map(|u| layout.locate(u).0).collect()
}

/// Active pairs are always tracked; silent pairs are tracked in index order
/// up to `cap`.
fn tracked_pairs(mask: &Mask, cap: Option<usize>) -> Vec<bool> {
    let mut budget = cap.unwrap_or(usize::MAX);
    mask.bits()
        .iter()
        .map(|&active| {
            if active {
                true
            } else if budget > 0 {
                budget -= 1;
                true
            } else {
                false
            }
        })
        .collect()
}

/// Biases `log p_jk` and weights `log p_imjk / (p_im p_jk)`, in nats.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightView {
    pub(crate) bias: Vec<f64>,
    /// Every pair, shadow pairs included; use [`WeightView::get`] for the
    /// masked view.
    pub(crate) weights: Vec<f64>,
    pub(crate) mask: Mask,
    pub(crate) input: Layout,
    pub(crate) hidden: Layout,
}

impl WeightView {
    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    /// Weight of an active connection; `None` when the hypercolumn pair is
    /// masked off.
    pub fn get(&self, pre_unit: usize, post_unit: usize) -> Option<f64> {
        let (i, _) = self.input.locate(pre_unit);
        let (j, _) = self.hidden.locate(post_unit);
        self.mask
            .get(i, j)
            .then(|| self.weights[pre_unit * self.hidden.units() + post_unit])
    }

    /// Weight regardless of the mask (shadow value for silent pairs).
    #[inline]
    pub fn raw(&self, pre_unit: usize, post_unit: usize) -> f64 {
        self.weights[pre_unit * self.hidden.units() + post_unit]
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn input_layout(&self) -> &Layout {
        &self.input
    }

    pub fn hidden_layout(&self) -> &Layout {
        &self.hidden
    }
}

/// Closed-form weights and biases from traces.
///
/// Marginals are read with the probability floor and joints with its
/// square, so a pair of units that never fired gets weight 0 rather than
/// `log(1 / floor)`.
///
/// Fails with [`Error::Invariant`] when a stored trace is outside `[0, 1]`,
/// which only a learning bug or a corrupt hand-built state can cause.
pub fn weights_from_traces(
    traces: &TraceState,
    input: &Layout,
    hidden: &Layout,
    floor: f64,
) -> Result<WeightView> {
    traces.check_stored()?;
    let read = |p: f64| p.max(floor);
    let joint_floor = floor * floor;
    let bias = traces.post.iter().map(|&p| read(p).ln()).collect();
    let n_post = traces.post.len();
    let mut weights = vec![0.0; traces.joint.len()];
    for (a, &pa) in traces.pre.iter().enumerate() {
        let pa = read(pa);
        let row = &traces.joint[a * n_post..(a + 1) * n_post];
        for (b, (&pab, &pb)) in row.iter().zip(&traces.post).enumerate() {
            weights[a * n_post + b] = (pab.max(joint_floor) / (pa * read(pb))).ln();
        }
    }
    Ok(WeightView {
        bias,
        weights,
        mask: traces.mask.clone(),
        input: input.clone(),
        hidden: hidden.clone(),
    })
}
