//! Hypercolumn / minicolumn indexing.
//!
//! A population is a sequence of hypercolumns, each holding a fixed number of
//! minicolumns. All per-unit vectors in the crate are flat, hypercolumn-major:
//! unit `(h, m)` lives at `offset(h) + m`.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<usize>", into = "Vec<usize>")]
pub struct Layout {
    counts: Vec<usize>,
    offsets: Vec<usize>,
    units: usize,
}

impl From<Vec<usize>> for Layout {
    fn from(counts: Vec<usize>) -> Self {
        let mut offsets = Vec::with_capacity(counts.len());
        let mut acc = 0;
        for &c in &counts {
            offsets.push(acc);
            acc += c;
        }
        Layout {
            counts,
            offsets,
            units: acc,
        }
    }
}

impl From<Layout> for Vec<usize> {
    fn from(l: Layout) -> Self {
        l.counts
    }
}

impl Layout {
    pub fn new(counts: impl Into<Vec<usize>>) -> Self {
        Layout::from(counts.into())
    }

    /// Same number of minicolumns in every hypercolumn.
    pub fn uniform(hypercolumns: usize, minicolumns: usize) -> Self {
        Layout::from(vec![minicolumns; hypercolumns])
    }

    pub fn hypercolumns(&self) -> usize {
        self.counts.len()
    }

    pub fn units(&self) -> usize {
        self.units
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn size(&self, h: usize) -> usize {
        self.counts[h]
    }

    pub fn offset(&self, h: usize) -> usize {
        self.offsets[h]
    }

    pub fn range(&self, h: usize) -> Range<usize> {
        self.offsets[h]..self.offsets[h] + self.counts[h]
    }

    pub fn unit(&self, h: usize, m: usize) -> usize {
        debug_assert!(m < self.counts[h]);
        self.offsets[h] + m
    }

    /// Inverse of [`Layout::unit`].
    pub fn locate(&self, unit: usize) -> (usize, usize) {
        let h = match self.offsets.binary_search(&unit) {
            Ok(h) => {
                // zero-width hypercolumns never occur in validated layouts
                h
            }
            Err(ins) => ins - 1,
        };
        (h, unit - self.offsets[h])
    }

    pub fn ranges(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        (0..self.hypercolumns()).map(move |h| self.range(h))
    }

    pub fn check_len(&self, what: &'static str, got: usize) -> Result<()> {
        if got != self.units {
            return Err(Error::Dimension {
                what,
                expected: self.units,
                got,
            });
        }
        Ok(())
    }

    /// Per-hypercolumn uniform distribution.
    pub fn uniform_activity(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.units];
        for h in 0..self.hypercolumns() {
            let p = 1.0 / self.counts[h] as f64;
            v[self.range(h)].iter_mut().for_each(|x| *x = p);
        }
        v
    }

    /// One-hot activity from a state index per hypercolumn.
    pub fn one_hot(&self, states: &[usize]) -> Result<Vec<f64>> {
        if states.len() != self.hypercolumns() {
            return Err(Error::Dimension {
                what: "state vector",
                expected: self.hypercolumns(),
                got: states.len(),
            });
        }
        let mut v = vec![0.0; self.units];
        for (h, &s) in states.iter().enumerate() {
            if s >= self.counts[h] {
                return Err(Error::argument(format!(
                    "state {s} out of range for hypercolumn {h} with {} minicolumns",
                    self.counts[h]
                )));
            }
            v[self.offsets[h] + s] = 1.0;
        }
        Ok(v)
    }

    /// Winning minicolumn per hypercolumn; lowest index wins exact ties.
    pub fn winners(&self, activity: &[f64]) -> Vec<usize> {
        self.ranges().map(|r| argmax(&activity[r])).collect()
    }

    /// Validate that `activity` holds one probability simplex per hypercolumn.
    pub fn check_simplices(&self, what: &'static str, activity: &[f64], tol: f64) -> Result<()> {
        self.check_len(what, activity.len())?;
        for h in 0..self.hypercolumns() {
            let block = &activity[self.range(h)];
            if block.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::argument(format!(
                    "{what}: hypercolumn {h} has a negative or non-finite entry"
                )));
            }
            let sum: f64 = block.iter().sum();
            if (sum - 1.0).abs() > tol {
                return Err(Error::argument(format!(
                    "{what}: hypercolumn {h} sums to {sum}, not 1"
                )));
            }
        }
        Ok(())
    }
}

/// Index of the maximum; the lowest index wins exact ties.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_and_locate_are_inverse() {
        let l = Layout::new(vec![3, 4, 2]);
        assert_eq!(l.units(), 9);
        for u in 0..l.units() {
            let (h, m) = l.locate(u);
            assert_eq!(l.unit(h, m), u);
        }
        assert_eq!(l.locate(3), (1, 0));
        assert_eq!(l.locate(8), (2, 1));
    }

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
    }

    #[test]
    fn rejects_all_zero_simplex() {
        let l = Layout::new(vec![2, 2]);
        let err = l.check_simplices("input", &[1.0, 0.0, 0.0, 0.0], 1e-6);
        assert!(err.is_err());
    }

    #[test]
    fn serde_as_plain_counts() {
        let l = Layout::new(vec![2, 5]);
        let s = serde_json::to_string(&l).unwrap();
        assert_eq!(s, "[2,5]");
        let back: Layout = serde_json::from_str(&s).unwrap();
        assert_eq!(back, l);
    }
}
