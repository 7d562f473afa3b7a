//! Categorical datasets and their CSV form.
//!
//! A CSV file has a header row. Every input hypercolumn must appear as a
//! column with the same name; cells hold a declared state label (or a state
//! index for unlabelled hypercolumns). Columns named after hidden
//! hypercolumns, when all present, are the supervision labels. Other columns
//! are ignored.

use std::io::{Read, Write};

use crate::config::{HypercolumnSpec, NetworkConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    /// One state index per input hypercolumn, per sample.
    pub inputs: Vec<Vec<usize>>,
    /// One state index per hidden hypercolumn, per sample.
    pub labels: Option<Vec<Vec<usize>>>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Check that every sample fits the configuration.
    pub fn check(&self, config: &NetworkConfig) -> Result<()> {
        check_rows("input", &self.inputs, &config.input)?;
        if let Some(labels) = &self.labels {
            if labels.len() != self.inputs.len() {
                return Err(Error::data(format!(
                    "{} label rows for {} samples",
                    labels.len(),
                    self.inputs.len()
                )));
            }
            check_rows("label", labels, &config.hidden)?;
        }
        Ok(())
    }

    /// Rows `0..len` split into (train, held-out) with every fifth row held
    /// out.
    pub fn holdout_split(&self) -> (Vec<usize>, Vec<usize>) {
        (0..self.len()).partition(|i| i % 5 != 4)
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            inputs: rows.iter().map(|&r| self.inputs[r].clone()).collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| rows.iter().map(|&r| l[r].clone()).collect()),
        }
    }

    pub fn read_csv<R: Read>(reader: R, config: &NetworkConfig) -> Result<Dataset> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let find = |name: &str| header.iter().position(|h| h == name);

        let mut problems = Vec::new();
        let input_cols: Vec<Option<usize>> = config.input.iter().map(|hc| find(&hc.name)).collect();
        for (hc, col) in config.input.iter().zip(&input_cols) {
            if col.is_none() {
                problems.push(format!("attribute '{}' has no matching column", hc.name));
            }
        }
        if !problems.is_empty() {
            return Err(Error::data(format!(
                "{} (columns present: {})",
                problems.join("; "),
                header.join(", ")
            )));
        }
        let label_cols: Vec<Option<usize>> = config.hidden.iter().map(|hc| find(&hc.name)).collect();
        let supervised = label_cols.iter().all(Option::is_some);

        let mut inputs = Vec::new();
        let mut labels = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = line + 2;
            let parse = |hc: &HypercolumnSpec, col: usize| -> Result<usize> {
                let v = rec.get(col).unwrap_or("");
                hc.state_index(v).ok_or_else(|| {
                    Error::data(format!(
                        "row {row}, column '{}': unknown state '{v}' (expected one of {})",
                        hc.name,
                        state_list(hc)
                    ))
                })
            };
            let x = config
                .input
                .iter()
                .zip(&input_cols)
                .map(|(hc, c)| parse(hc, c.expect("checked")))
                .collect::<Result<Vec<_>>>()?;
            inputs.push(x);
            if supervised {
                let y = config
                    .hidden
                    .iter()
                    .zip(&label_cols)
                    .map(|(hc, c)| parse(hc, c.expect("checked")))
                    .collect::<Result<Vec<_>>>()?;
                labels.push(y);
            }
        }
        Ok(Dataset {
            inputs,
            labels: supervised.then_some(labels),
        })
    }

    pub fn read_csv_path(path: &std::path::Path, config: &NetworkConfig) -> Result<Dataset> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::data(format!("cannot open {}: {e}", path.display())))?;
        Dataset::read_csv(std::io::BufReader::new(file), config)
    }

    pub fn write_csv<W: Write>(&self, writer: W, config: &NetworkConfig) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = config.input.iter().map(|h| h.name.as_str()).collect();
        if self.labels.is_some() {
            header.extend(config.hidden.iter().map(|h| h.name.as_str()));
        }
        w.write_record(&header)?;
        for (r, x) in self.inputs.iter().enumerate() {
            let mut rec: Vec<String> = config
                .input
                .iter()
                .zip(x)
                .map(|(hc, &s)| hc.state_label(s))
                .collect();
            if let Some(labels) = &self.labels {
                rec.extend(config.hidden.iter().zip(&labels[r]).map(|(hc, &s)| hc.state_label(s)));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn state_list(hc: &HypercolumnSpec) -> String {
    match &hc.states {
        Some(s) => s.join(", "),
        None => format!("0..{}", hc.size - 1),
    }
}

fn check_rows(what: &str, rows: &[Vec<usize>], hcs: &[HypercolumnSpec]) -> Result<()> {
    for (r, row) in rows.iter().enumerate() {
        if row.len() != hcs.len() {
            return Err(Error::data(format!(
                "{what} row {r} has {} values, expected {}",
                row.len(),
                hcs.len()
            )));
        }
        for (hc, &s) in hcs.iter().zip(row) {
            if s >= hc.size {
                return Err(Error::data(format!(
                    "{what} row {r}: state {s} out of range for '{}'",
                    hc.name
                )));
            }
        }
    }
    Ok(())
}
