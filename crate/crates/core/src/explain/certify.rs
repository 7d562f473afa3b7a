//! Certified radius of a hidden hypercolumn's winner under total-variation
//! reallocation of input mass.
//!
//! Moving mass `q` inside input hypercolumn `i` from minicolumn `m` to `m'`
//! changes `s_jk' - s_jk*` by `q * (d_im' - d_im)` with
//! `d_im = w_imjk' - w_imjk*`. For a fixed challenger `k'` the best recipient
//! in each input hypercolumn is the one with the largest `d`, every other
//! minicolumn is a donor with capacity `pi_im`, and the cheapest way to close
//! the gap is a fractional knapsack over donors sorted by rate. The radius is
//! the smallest such mass over challengers. Mass moved equals the TV
//! distance `sum_i 1/2 ||delta pi_i||_1`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::layout::argmax;
use crate::network::Model;

pub const METRIC: &str = "total-variation";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Move {
    pub input_hypercolumn: usize,
    pub from: usize,
    pub to: usize,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub hypercolumn: usize,
    pub winner: usize,
    /// Minimal TV mass that lets some challenger reach the winner's
    /// support; infinite when no reallocation can.
    #[serde(with = "crate::config::extended_f64")]
    pub radius: f64,
    /// Challenger reached at the radius.
    pub challenger: Option<usize>,
    pub metric: &'static str,
    /// Reallocation achieving the radius.
    pub moves: Vec<Move>,
}

struct Donor {
    rate: f64,
    capacity: f64,
    i: usize,
    from: usize,
    to: usize,
}

fn donors(model: &Model, input: &[f64], j: usize, winner: usize, challenger: usize) -> Vec<Donor> {
    let li = model.input_layout();
    let lh = model.hidden_layout();
    let w = model.weights();
    let (bw, bc) = (lh.unit(j, winner), lh.unit(j, challenger));
    let mut out = Vec::new();
    for i in 0..li.hypercolumns() {
        if !w.mask().get(i, j) {
            continue;
        }
        let d: Vec<f64> = li.range(i).map(|a| w.raw(a, bc) - w.raw(a, bw)).collect();
        let to = argmax(&d);
        for (m, a) in li.range(i).enumerate() {
            let rate = d[to] - d[m];
            if m != to && input[a] > 0.0 && rate > 0.0 {
                out.push(Donor {
                    rate,
                    capacity: input[a],
                    i,
                    from: m,
                    to,
                });
            }
        }
    }
    // stable: equal rates keep (i, m) order
    out.sort_by(|a, b| b.rate.total_cmp(&a.rate));
    out
}

/// Greedy fill of `donors` until `gap` is closed (`budget = None`) or
/// `budget` mass is spent. Returns (mass, gap closed, moves).
fn fill(donors: &[Donor], gap: f64, budget: Option<f64>) -> (f64, f64, Vec<Move>) {
    let mut mass = 0.0;
    let mut closed = 0.0;
    let mut moves = Vec::new();
    for d in donors {
        let q = match budget {
            None => {
                if closed >= gap {
                    break;
                }
                d.capacity.min((gap - closed) / d.rate)
            }
            Some(b) => {
                if mass >= b {
                    break;
                }
                d.capacity.min(b - mass)
            }
        };
        mass += q;
        closed += q * d.rate;
        moves.push(Move {
            input_hypercolumn: d.i,
            from: d.from,
            to: d.to,
            mass: q,
        });
    }
    (mass, closed, moves)
}

pub fn p14_certified_radius(model: &Model, input: &[f64], j: usize) -> Result<Certificate> {
    let lh = model.hidden_layout();
    if j >= lh.hypercolumns() {
        return Err(Error::argument(format!("hidden hypercolumn {j} out of range")));
    }
    let state = model.forward(input)?;
    let s = &state.support[lh.range(j)];
    let winner = argmax(s);
    let mut best = Certificate {
        hypercolumn: j,
        winner,
        radius: f64::INFINITY,
        challenger: None,
        metric: METRIC,
        moves: Vec::new(),
    };
    for k in (0..lh.size(j)).filter(|&k| k != winner) {
        let gap = s[winner] - s[k];
        let (mass, closed, moves) = if gap <= 0.0 {
            (0.0, 0.0, Vec::new())
        } else {
            let ds = donors(model, input, j, winner, k);
            fill(&ds, gap, None)
        };
        if closed >= gap && mass < best.radius {
            best.radius = mass;
            best.challenger = Some(k);
            best.moves = moves;
        }
    }
    Ok(best)
}

/// The input moved along the certificate's optimal direction by a total
/// mass of `radius + extra` (or less, if donors run out).
pub fn optimal_perturbation(model: &Model, input: &[f64], cert: &Certificate, extra: f64) -> Option<Vec<f64>> {
    let k = cert.challenger?;
    let ds = donors(model, input, cert.hypercolumn, cert.winner, k);
    let (_, _, moves) = fill(&ds, 0.0, Some(cert.radius + extra));
    Some(apply_moves(model, input, &moves))
}

pub fn apply_moves(model: &Model, input: &[f64], moves: &[Move]) -> Vec<f64> {
    let li = model.input_layout();
    let mut x = input.to_vec();
    for mv in moves {
        x[li.unit(mv.input_hypercolumn, mv.from)] -= mv.mass;
        x[li.unit(mv.input_hypercolumn, mv.to)] += mv.mass;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::NetworkConfig;
    use crate::traces::TraceState;

    #[test]
    fn zero_weights_are_uncertifiably_robust() {
        // independent traces give zero weights, so only the prior separates
        // the hidden minicolumns and no input reallocation can close the gap
        let cfg = NetworkConfig::new(&[2], &[3]);
        let (pre, post) = (vec![0.5, 0.5], vec![0.6, 0.3, 0.1]);
        let joint = pre.iter().flat_map(|a| post.iter().map(move |b| a * b)).collect();
        let ts = TraceState::from_parts(&cfg, pre, post, joint, cfg.prior_mask(), 0).unwrap();
        let model = Model::from_traces(cfg, ts, None).unwrap();
        let c = p14_certified_radius(&model, &[1.0, 0.0], 0).unwrap();
        assert_eq!(c.winner, 0);
        assert!(c.radius.is_infinite());
        assert_eq!(c.challenger, None);
    }

    #[test]
    fn tied_supports_have_zero_radius() {
        let model = Model::new(NetworkConfig::new(&[3, 2], &[3])).unwrap();
        let x = model.input_layout().one_hot(&[1, 0]).unwrap();
        let c = p14_certified_radius(&model, &x, 0).unwrap();
        assert_eq!(c.radius, 0.0);
        assert_eq!(c.challenger, Some(1));
    }

    #[test]
    fn single_hypercolumn_linear_case() {
        // one input HC with two states; hidden minicolumn 0 favoured by
        // state 0, minicolumn 1 by state 1
        let cfg = NetworkConfig::new(&[2], &[2]);
        let joint = vec![0.35, 0.15, 0.15, 0.35];
        let ts = TraceState::from_parts(&cfg, vec![0.5, 0.5], vec![0.5, 0.5], joint, cfg.prior_mask(), 0).unwrap();
        let model = Model::from_traces(cfg, ts, None).unwrap();
        let x = vec![0.8, 0.2];
        let c = p14_certified_radius(&model, &x, 0).unwrap();
        let w = |a, b| model.weights().raw(a, b);
        let gap = 0.8 * (w(0, 0) - w(0, 1)) + 0.2 * (w(1, 0) - w(1, 1));
        let rate = (w(1, 1) - w(1, 0)) - (w(0, 1) - w(0, 0));
        assert_eq!(c.winner, 0);
        assert!((c.radius - gap / rate).abs() < 1e-12);
        assert!((c.radius - 0.3).abs() < 1e-12);
        let y = optimal_perturbation(&model, &x, &c, 1e-6).unwrap();
        assert_eq!(model.predict(&y).unwrap(), vec![1]);
        let z = optimal_perturbation(&model, &x, &c, -1e-6).unwrap();
        assert_eq!(model.predict(&z).unwrap(), vec![0]);
    }
}
