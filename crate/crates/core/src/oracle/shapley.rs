//! Exact Shapley values by enumerating every coalition of input
//! hypercolumns. An absent hypercolumn has its evidence term removed.

use crate::error::{Error, Result};
use crate::network::Model;

use super::{brute_contributions, OracleResult};

pub const MAX_SHAPLEY_HYPERCOLUMNS: usize = 12;

/// Shapley value of every input hypercolumn for the support of hidden unit
/// `(j, k)`, compared against the engine's contributions.
pub fn exact_shapley(model: &Model, x: &[f64], target: (usize, usize)) -> Result<OracleResult> {
    let n = model.config().input.len();
    if n > MAX_SHAPLEY_HYPERCOLUMNS {
        return Err(Error::SizeCap {
            size: n,
            cap: MAX_SHAPLEY_HYPERCOLUMNS,
        });
    }
    let (j, k) = target;
    if j >= model.config().hidden.len() || k >= model.config().hidden[j].size {
        return Err(Error::argument(format!("target ({j}, {k}) out of range")));
    }
    let phi = brute_contributions(model, x, j, k);
    let value = |coalition: usize| -> f64 {
        (0..n).filter(|i| coalition >> i & 1 == 1).map(|i| phi[i]).sum()
    };
    let fact: Vec<f64> = (0..=n)
        .scan(1.0, |acc, i| {
            if i > 0 {
                *acc *= i as f64;
            }
            Some(*acc)
        })
        .collect();
    let mut shapley = vec![0.0; n];
    for (i, sv) in shapley.iter_mut().enumerate() {
        let bit = 1usize << i;
        for s in 0..(1usize << n) {
            if s & bit != 0 {
                continue;
            }
            let size = s.count_ones() as usize;
            let weight = fact[size] * fact[n - size - 1] / fact[n];
            *sv += weight * (value(s | bit) - value(s));
        }
    }
    let state = model.forward(x)?;
    let b = model.hidden_layout().unit(j, k);
    let engine = (0..n).map(|i| state.contribution(i, b)).collect();
    Ok(OracleResult::new(engine, shapley))
}
