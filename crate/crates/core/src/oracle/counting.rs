//! Frequency-count estimates of the probabilities behind each weight, with
//! add-one smoothing, and plug-in mutual information.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountingEstimate {
    pub samples: usize,
    /// Smoothed input unit marginals, flattened over input hypercolumns.
    pub pre: Vec<f64>,
    /// Smoothed hidden unit marginals, flattened over hidden hypercolumns.
    pub post: Vec<f64>,
    /// Smoothed joints, row-major `[pre unit][post unit]`.
    pub joint: Vec<f64>,
    /// `ln(joint / (pre * post))`, same layout as `joint`.
    pub weights: Vec<f64>,
}

impl CountingEstimate {
    pub fn weight(&self, pre_unit: usize, post_unit: usize) -> f64 {
        self.weights[pre_unit * self.post.len() + post_unit]
    }
}

fn offsets(sizes: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(sizes.len() + 1);
    let mut acc = 0;
    out.push(0);
    for &s in sizes {
        acc += s;
        out.push(acc);
    }
    out
}

fn check_rows(rows: &[Vec<usize>], sizes: &[usize], what: &str) -> Result<()> {
    for (r, row) in rows.iter().enumerate() {
        if row.len() != sizes.len() {
            return Err(Error::data(format!("{what} row {r}: {} states for {} hypercolumns", row.len(), sizes.len())));
        }
        for (h, (&s, &m)) in row.iter().zip(sizes).enumerate() {
            if s >= m {
                return Err(Error::data(format!("{what} row {r}: state {s} out of range for hypercolumn {h}")));
            }
        }
    }
    Ok(())
}

/// Counts every (input state, hidden state) co-occurrence over paired rows
/// and turns the smoothed frequencies into log-PMI weights.
pub fn counting_estimator(
    inputs: &[Vec<usize>],
    labels: &[Vec<usize>],
    input_sizes: &[usize],
    hidden_sizes: &[usize],
) -> Result<CountingEstimate> {
    if inputs.len() != labels.len() {
        return Err(Error::data(format!("{} input rows but {} label rows", inputs.len(), labels.len())));
    }
    check_rows(inputs, input_sizes, "input")?;
    check_rows(labels, hidden_sizes, "label")?;
    let (oi, oh) = (offsets(input_sizes), offsets(hidden_sizes));
    let (na, nb) = (oi[input_sizes.len()], oh[hidden_sizes.len()]);
    let mut ca = vec![0u64; na];
    let mut cb = vec![0u64; nb];
    let mut cab = vec![0u64; na * nb];
    for (x, y) in inputs.iter().zip(labels) {
        for (i, &m) in x.iter().enumerate() {
            ca[oi[i] + m] += 1;
        }
        for (j, &k) in y.iter().enumerate() {
            cb[oh[j] + k] += 1;
        }
        for (i, &m) in x.iter().enumerate() {
            for (j, &k) in y.iter().enumerate() {
                cab[(oi[i] + m) * nb + oh[j] + k] += 1;
            }
        }
    }
    let n = inputs.len() as f64;
    let mut pre = vec![0.0; na];
    for (i, &mi) in input_sizes.iter().enumerate() {
        for a in oi[i]..oi[i + 1] {
            pre[a] = (ca[a] as f64 + 1.0) / (n + mi as f64);
        }
    }
    let mut post = vec![0.0; nb];
    for (j, &mj) in hidden_sizes.iter().enumerate() {
        for b in oh[j]..oh[j + 1] {
            post[b] = (cb[b] as f64 + 1.0) / (n + mj as f64);
        }
    }
    let mut joint = vec![0.0; na * nb];
    let mut weights = vec![0.0; na * nb];
    for (i, &mi) in input_sizes.iter().enumerate() {
        for (j, &mj) in hidden_sizes.iter().enumerate() {
            let cells = (mi * mj) as f64;
            for a in oi[i]..oi[i + 1] {
                for b in oh[j]..oh[j + 1] {
                    let p = (cab[a * nb + b] as f64 + 1.0) / (n + cells);
                    joint[a * nb + b] = p;
                    weights[a * nb + b] = p.ln() - pre[a].ln() - post[b].ln();
                }
            }
        }
    }
    Ok(CountingEstimate {
        samples: inputs.len(),
        pre,
        post,
        joint,
        weights,
    })
}

/// Plug-in mutual information (nats) between two categorical streams.
pub fn empirical_mi(xs: &[usize], ys: &[usize], mx: usize, my: usize) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::data(format!("streams differ in length: {} vs {}", xs.len(), ys.len())));
    }
    if xs.is_empty() {
        return Err(Error::data("empty stream"));
    }
    let mut cxy = vec![0u64; mx * my];
    let mut cx = vec![0u64; mx];
    let mut cy = vec![0u64; my];
    for (&x, &y) in xs.iter().zip(ys) {
        if x >= mx || y >= my {
            return Err(Error::data(format!("state ({x}, {y}) outside {mx}x{my}")));
        }
        cxy[x * my + y] += 1;
        cx[x] += 1;
        cy[y] += 1;
    }
    let n = xs.len() as f64;
    let mut mi = 0.0;
    for x in 0..mx {
        for y in 0..my {
            let c = cxy[x * my + y] as f64;
            if c > 0.0 {
                mi += c / n * (c * n / (cx[x] as f64 * cy[y] as f64)).ln();
            }
        }
    }
    Ok(mi.max(0.0))
}

/// Mutual information (nats) of a joint probability table `p[x][y]`.
pub fn mutual_information(table: &[Vec<f64>]) -> f64 {
    let px: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let my = table.first().map_or(0, Vec::len);
    let py: Vec<f64> = (0..my).map(|y| table.iter().map(|r| r[y]).sum()).collect();
    let mut mi = 0.0;
    for (x, row) in table.iter().enumerate() {
        for (y, &p) in row.iter().enumerate() {
            if p > 0.0 {
                mi += p * (p / (px[x] * py[y])).ln();
            }
        }
    }
    mi
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repeated_pattern_weights_vanish() {
        let xs = vec![vec![1]; 100_000];
        let ys = vec![vec![0]; 100_000];
        let est = counting_estimator(&xs, &ys, &[2], &[2]).unwrap();
        assert!(est.weight(1, 0).abs() < 1e-4);
    }

    #[test]
    fn exact_table_counts_give_log_pmi() {
        // 10^4 rows laid out exactly in proportion {0.4, 0.1, 0.1, 0.4}
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (x, y, c) in [(0, 0, 4000), (0, 1, 1000), (1, 0, 1000), (1, 1, 4000)] {
            for _ in 0..c {
                xs.push(vec![x]);
                ys.push(vec![y]);
            }
        }
        let est = counting_estimator(&xs, &ys, &[2], &[2]).unwrap();
        let expected = (0.4f64 / 0.25).ln();
        assert!((expected - 0.470).abs() < 1e-3);
        assert!((est.weight(1, 1) - expected).abs() < 1e-3);
    }

    #[test]
    fn coupled_binary_streams_have_ln2() {
        let xs: Vec<usize> = (0..1000).map(|i| i % 2).collect();
        let mi = empirical_mi(&xs, &xs, 2, 2).unwrap();
        assert!((mi - 2f64.ln()).abs() < 1e-12);
        assert!((mutual_information(&[vec![0.5, 0.0], vec![0.0, 0.5]]) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn mismatched_rows_are_rejected() {
        assert!(counting_estimator(&[vec![0]], &[], &[2], &[2]).is_err());
        assert!(counting_estimator(&[vec![2]], &[vec![0]], &[2], &[2]).is_err());
    }
}
