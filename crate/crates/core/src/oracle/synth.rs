//! Labelled categorical data drawn from a declared class-conditional table,
//! so the information-theoretic ground truth is available in closed form.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{HypercolumnSpec, NetworkConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::par::seeded_rng;

use super::counting::mutual_information;

/// One class variable and conditionally independent attributes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerativeTable {
    pub class_name: String,
    pub class_labels: Vec<String>,
    pub class_prior: Vec<f64>,
    pub attributes: Vec<String>,
    pub state_labels: Vec<Vec<String>>,
    /// `tables[attribute][class][state]`: probability of `state` given `class`.
    pub tables: Vec<Vec<Vec<f64>>>,
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn numbered(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// Row with `1 - noise` on `hit` and `noise` spread evenly over all states.
fn noisy_row(states: usize, hit: usize, noise: f64) -> Vec<f64> {
    (0..states)
        .map(|m| noise / states as f64 + if m == hit { 1.0 - noise } else { 0.0 })
        .collect()
}

fn draw<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &q) in p.iter().enumerate() {
        acc += q;
        if u < acc {
            return i;
        }
    }
    p.len() - 1
}

impl GenerativeTable {
    pub fn validate(&self) -> Result<()> {
        let c = self.class_prior.len();
        if c == 0 || self.class_labels.len() != c {
            return Err(Error::config("class prior and labels must be non-empty and equal in length"));
        }
        if self.attributes.len() != self.tables.len() || self.attributes.len() != self.state_labels.len() {
            return Err(Error::config("attribute names, state labels and tables differ in length"));
        }
        let simplex = |p: &[f64]| p.iter().all(|&q| q >= 0.0) && (p.iter().sum::<f64>() - 1.0).abs() < 1e-9;
        if !simplex(&self.class_prior) {
            return Err(Error::config("class prior is not a distribution"));
        }
        for (a, t) in self.tables.iter().enumerate() {
            if t.len() != c {
                return Err(Error::config(format!("attribute {a}: {} class rows, expected {c}", t.len())));
            }
            for row in t {
                if row.len() != self.state_labels[a].len() || !simplex(row) {
                    return Err(Error::config(format!("attribute {a}: bad conditional row")));
                }
            }
        }
        Ok(())
    }

    /// Network shape matching the table: one input hypercolumn per attribute,
    /// one hidden hypercolumn for the class.
    pub fn config(&self) -> NetworkConfig {
        self.config_with_hidden(self.class_labels.len())
    }

    /// As [`config`](Self::config) but with `hidden_size` class minicolumns.
    pub fn config_with_hidden(&self, hidden_size: usize) -> NetworkConfig {
        let input = self
            .attributes
            .iter()
            .zip(&self.state_labels)
            .map(|(name, states)| HypercolumnSpec {
                name: name.clone(),
                size: states.len(),
                states: Some(states.clone()),
            })
            .collect();
        let hidden = if hidden_size == self.class_labels.len() {
            HypercolumnSpec {
                name: self.class_name.clone(),
                size: hidden_size,
                states: Some(self.class_labels.clone()),
            }
        } else {
            HypercolumnSpec::new(self.class_name.clone(), hidden_size)
        };
        NetworkConfig::from_specs(input, vec![hidden])
    }

    pub fn sample(&self, n: usize, seed: u64) -> Dataset {
        let mut rng = seeded_rng(seed, 0);
        let mut inputs = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let c = draw(&self.class_prior, &mut rng);
            inputs.push(self.tables.iter().map(|t| draw(&t[c], &mut rng)).collect());
            labels.push(vec![c]);
        }
        Dataset {
            inputs,
            labels: Some(labels),
        }
    }

    /// Joint table `p[state][class]` of one attribute with the class.
    pub fn joint_with_class(&self, attribute: usize) -> Vec<Vec<f64>> {
        let t = &self.tables[attribute];
        (0..self.state_labels[attribute].len())
            .map(|m| self.class_prior.iter().zip(t).map(|(pc, row)| pc * row[m]).collect())
            .collect()
    }

    /// Closed-form mutual information (nats) between an attribute and the class.
    pub fn mutual_information(&self, attribute: usize) -> f64 {
        mutual_information(&self.joint_with_class(attribute))
    }

    /// Colour, shape and size of four fruit classes. `noise` is the
    /// probability mass spread uniformly away from each class's prototype.
    pub fn fruit(noise: f64) -> Self {
        let protos = [[0, 0, 1], [1, 1, 1], [1, 2, 0], [2, 0, 2]];
        GenerativeTable {
            class_name: "Fruit".into(),
            class_labels: strings(&["apple", "banana", "lemon", "watermelon"]),
            class_prior: vec![0.25; 4],
            attributes: strings(&["Colour", "Shape", "Size"]),
            state_labels: vec![
                strings(&["red", "yellow", "green"]),
                strings(&["round", "long", "oval"]),
                strings(&["small", "medium", "large"]),
            ],
            tables: (0..3)
                .map(|a| protos.iter().map(|p| noisy_row(3, p[a], noise)).collect())
                .collect(),
        }
    }

    /// Four balanced classes and six four-state features; feature `f` copies
    /// the class with probability `reliability[f]` and is uniform otherwise.
    pub fn graded(reliability: &[f64]) -> Self {
        let classes = 4;
        GenerativeTable {
            class_name: "class".into(),
            class_labels: numbered("c", classes),
            class_prior: vec![1.0 / classes as f64; classes],
            attributes: numbered("f", reliability.len()),
            state_labels: vec![numbered("s", classes); reliability.len()],
            tables: reliability
                .iter()
                .map(|&q| (0..classes).map(|c| noisy_row(classes, c, 1.0 - q)).collect())
                .collect(),
        }
    }

    /// Default graded-informativeness task, most informative feature first.
    pub fn graded_default() -> Self {
        Self::graded(&[0.9, 0.75, 0.6, 0.45, 0.3, 0.15])
    }

    /// Random class prototypes over `attributes` features of `states`
    /// states each, with uniform `noise`.
    pub fn prototype(attributes: usize, states: usize, classes: usize, noise: f64, seed: u64) -> Self {
        let mut rng = seeded_rng(seed, 1);
        let tables = (0..attributes)
            .map(|_| {
                (0..classes)
                    .map(|_| noisy_row(states, rng.random_range(0..states), noise))
                    .collect()
            })
            .collect();
        GenerativeTable {
            class_name: "class".into(),
            class_labels: numbered("c", classes),
            class_prior: vec![1.0 / classes as f64; classes],
            attributes: numbered("a", attributes),
            state_labels: vec![numbered("s", states); attributes],
            tables,
        }
    }

    /// A binary class copied exactly by the first attribute and ignored by
    /// the second: mutual information `ln 2` and `0`.
    pub fn coupled_binary() -> Self {
        GenerativeTable {
            class_name: "y".into(),
            class_labels: strings(&["0", "1"]),
            class_prior: vec![0.5, 0.5],
            attributes: strings(&["copy", "coin"]),
            state_labels: vec![strings(&["0", "1"]), strings(&["0", "1"])],
            tables: vec![
                vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            ],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::empirical_mi;

    #[test]
    fn presets_validate() {
        for t in [
            GenerativeTable::fruit(0.0),
            GenerativeTable::fruit(0.3),
            GenerativeTable::graded_default(),
            GenerativeTable::prototype(8, 4, 4, 0.2, 3),
            GenerativeTable::coupled_binary(),
        ] {
            t.validate().unwrap();
            t.config().validate().unwrap();
        }
    }

    #[test]
    fn same_seed_same_stream() {
        let t = GenerativeTable::fruit(0.2);
        assert_eq!(t.sample(500, 9), t.sample(500, 9));
        assert_ne!(t.sample(500, 9), t.sample(500, 10));
    }

    #[test]
    fn noiseless_fruit_is_deterministic_given_class() {
        let t = GenerativeTable::fruit(0.0);
        let d = t.sample(200, 1);
        let labels = d.labels.as_ref().unwrap();
        for (x, y) in d.inputs.iter().zip(labels) {
            let c = y[0];
            for (a, &s) in x.iter().enumerate() {
                assert_eq!(t.tables[a][c][s], 1.0);
            }
        }
    }

    #[test]
    fn declared_ln2_is_recovered() {
        let t = GenerativeTable::coupled_binary();
        assert!((t.mutual_information(0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(t.mutual_information(1), 0.0);
        let d = t.sample(100_000, 4);
        let ys: Vec<usize> = d.labels.unwrap().iter().map(|y| y[0]).collect();
        let copy: Vec<usize> = d.inputs.iter().map(|x| x[0]).collect();
        let coin: Vec<usize> = d.inputs.iter().map(|x| x[1]).collect();
        assert!((empirical_mi(&copy, &ys, 2, 2).unwrap() - 2f64.ln()).abs() < 0.02);
        assert!(empirical_mi(&coin, &ys, 2, 2).unwrap() < 0.01);
    }

    #[test]
    fn graded_information_decreases() {
        let t = GenerativeTable::graded_default();
        let mi: Vec<f64> = (0..6).map(|a| t.mutual_information(a)).collect();
        assert!(mi.windows(2).all(|w| w[0] > w[1]), "{mi:?}");
    }
}
