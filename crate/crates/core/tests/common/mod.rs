//! Random models and queries shared by the integration tests.
#![allow(dead_code)]

use bcpnn::{Mask, Model, NetworkConfig, TraceState};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn simplex(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..m).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Random shape: `inputs` input hypercolumns of 2..=5 states and 1..=3
/// hidden hypercolumns of 2..=5 minicolumns, with a random mask that leaves every
/// hidden hypercolumn at least one input.
pub fn random_config(rng: &mut ChaCha8Rng, inputs: usize) -> NetworkConfig {
    let ins: Vec<usize> = (0..inputs).map(|_| rng.random_range(2..=5)).collect();
    let hid: Vec<usize> = (0..rng.random_range(1..=3)).map(|_| rng.random_range(2..=5)).collect();
    let mut mask = Mask::full(ins.len(), hid.len());
    for i in 0..ins.len() {
        for j in 0..hid.len() {
            if rng.random::<f64>() < 0.2 {
                mask.set(i, j, false);
            }
        }
    }
    for j in 0..hid.len() {
        if mask.active_incoming(j) == 0 {
            mask.set(rng.random_range(0..ins.len()), j, true);
        }
    }
    NetworkConfig::new(&ins, &hid).with_mask(&mask)
}

/// Marginals drawn per hypercolumn and joints `p_a p_b exp(noise)`, with
/// some units pushed to zero so floors are exercised.
pub fn random_model(rng: &mut ChaCha8Rng, config: NetworkConfig) -> Model {
    let li = config.input_layout();
    let lh = config.hidden_layout();
    let draw = |layout: &bcpnn::Layout, rng: &mut ChaCha8Rng| -> Vec<f64> {
        let mut v = Vec::new();
        for h in 0..layout.hypercolumns() {
            let mut p = simplex(rng, layout.size(h));
            if rng.random::<f64>() < 0.1 {
                p[0] = 0.0;
            }
            v.extend(p);
        }
        v
    };
    let pre = draw(&li, rng);
    let post = draw(&lh, rng);
    let joint = pre
        .iter()
        .flat_map(|&a| post.iter().map(move |&b| (a, b)))
        .map(|(a, b)| (a * b * rng.random_range(-1.5f64..1.5).exp()).min(1.0))
        .collect();
    let mask = config.prior_mask();
    let ts = TraceState::from_parts(&config, pre, post, joint, mask, 1).unwrap();
    Model::from_traces(config, ts, None).unwrap()
}

/// One-hot or soft query.
pub fn random_query(rng: &mut ChaCha8Rng, model: &Model) -> Vec<f64> {
    let li = model.input_layout();
    let mut x = Vec::new();
    let soft = rng.random::<bool>();
    for h in 0..li.hypercolumns() {
        let m = li.size(h);
        if soft {
            x.extend(simplex(rng, m));
        } else {
            let s = rng.random_range(0..m);
            x.extend((0..m).map(|k| if k == s { 1.0 } else { 0.0 }));
        }
    }
    x
}
