//! Random total-variation-bounded perturbations of a query and a count of
//! how often the winner of one hidden hypercolumn changes.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::Model;
use crate::par::seeded_rng;

use super::{first_max, brute_support};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlipCheck {
    pub hypercolumn: usize,
    pub winner: usize,
    pub trials: usize,
    pub flips: usize,
    pub fraction: f64,
    /// Largest TV distance actually sampled.
    pub max_distance: f64,
}

fn winner_of(model: &Model, x: &[f64], j: usize) -> usize {
    let s = brute_support(model, x);
    let start: usize = model.config().hidden[..j].iter().map(|h| h.size).sum();
    first_max(&s[start..start + model.config().hidden[j].size])
}

/// Random simplex point from normalised exponential draws.
fn random_simplex(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..m).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// One direction `target - x`, with targets drawn from three families:
/// interior points of every hypercolumn, vertices of a random subset of
/// hypercolumns, and a single-minicolumn transfer in one hypercolumn.
fn direction(rng: &mut ChaCha8Rng, x: &[f64], sizes: &[usize]) -> Vec<f64> {
    let mut target = x.to_vec();
    let kind = rng.random_range(0..3);
    let pick = rng.random_range(0..sizes.len());
    let mut a = 0;
    for (i, &m) in sizes.iter().enumerate() {
        let slot = &mut target[a..a + m];
        match kind {
            0 => slot.copy_from_slice(&random_simplex(rng, m)),
            1 if rng.random::<bool>() => {
                slot.iter_mut().for_each(|v| *v = 0.0);
                slot[rng.random_range(0..m)] = 1.0;
            }
            2 if i == pick => {
                let (from, to) = (rng.random_range(0..m), rng.random_range(0..m));
                let q = slot[from];
                slot[from] -= q;
                slot[to] += q;
            }
            _ => {}
        }
        a += m;
    }
    target.iter().zip(x).map(|(t, v)| t - v).collect()
}

fn tv(delta: &[f64], sizes: &[usize]) -> f64 {
    let mut a = 0;
    let mut total = 0.0;
    for &m in sizes {
        total += 0.5 * delta[a..a + m].iter().map(|d| d.abs()).sum::<f64>();
        a += m;
    }
    total
}

/// Draws `n` perturbations `x + lambda * d` with TV distance strictly below
/// `delta` (any distance when `delta` is infinite) and reports the fraction
/// that change the winner of hidden hypercolumn `j`.
pub fn sampled_flip_check(model: &Model, x: &[f64], j: usize, delta: f64, n: usize, seed: u64) -> Result<FlipCheck> {
    let sizes: Vec<usize> = model.config().input.iter().map(|h| h.size).collect();
    if x.len() != sizes.iter().sum::<usize>() {
        return Err(Error::Dimension {
            what: "query",
            expected: sizes.iter().sum(),
            got: x.len(),
        });
    }
    if j >= model.config().hidden.len() {
        return Err(Error::argument(format!("hidden hypercolumn {j} out of range")));
    }
    if delta.is_nan() || delta < 0.0 {
        return Err(Error::argument("delta must be non-negative"));
    }
    let winner = winner_of(model, x, j);
    let mut rng = seeded_rng(seed, 0);
    let mut flips = 0;
    let mut max_distance: f64 = 0.0;
    for _ in 0..n {
        let d = direction(&mut rng, x, &sizes);
        let full = tv(&d, &sizes);
        if full == 0.0 {
            continue;
        }
        let budget = if delta.is_infinite() {
            full
        } else {
            delta * rng.random::<f64>()
        };
        let lambda = (budget / full).min(1.0);
        let y: Vec<f64> = x.iter().zip(&d).map(|(v, dv)| v + lambda * dv).collect();
        max_distance = max_distance.max(lambda * full);
        if winner_of(model, &y, j) != winner {
            flips += 1;
        }
    }
    Ok(FlipCheck {
        hypercolumn: j,
        winner,
        trials: n,
        flips,
        fraction: if n > 0 { flips as f64 / n as f64 } else { 0.0 },
        max_distance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::NetworkConfig;
    use crate::traces::TraceState;

    fn model() -> Model {
        let cfg = NetworkConfig::new(&[2, 3], &[2]);
        let pre = vec![0.5, 0.5, 0.3, 0.3, 0.4];
        let post = vec![0.5, 0.5];
        let joint = vec![0.35, 0.15, 0.15, 0.35, 0.2, 0.1, 0.1, 0.2, 0.2, 0.2];
        let ts = TraceState::from_parts(&cfg, pre, post, joint, cfg.prior_mask(), 0).unwrap();
        Model::from_traces(cfg, ts, None).unwrap()
    }

    #[test]
    fn zero_radius_never_flips() {
        let m = model();
        let x = m.input_layout().one_hot(&[0, 0]).unwrap();
        let r = sampled_flip_check(&m, &x, 0, 0.0, 500, 1).unwrap();
        assert_eq!(r.flips, 0);
        assert_eq!(r.max_distance, 0.0);
    }

    #[test]
    fn unbounded_radius_finds_flips() {
        let m = model();
        let x = m.input_layout().one_hot(&[0, 0]).unwrap();
        let r = sampled_flip_check(&m, &x, 0, f64::INFINITY, 2000, 1).unwrap();
        assert!(r.flips > 0);
    }

    #[test]
    fn deterministic_per_seed() {
        let m = model();
        let x = m.input_layout().one_hot(&[1, 2]).unwrap();
        let a = sampled_flip_check(&m, &x, 0, 0.5, 300, 5).unwrap();
        let b = sampled_flip_check(&m, &x, 0, 0.5, 300, 5).unwrap();
        assert_eq!(a, b);
    }
}
