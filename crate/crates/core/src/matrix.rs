//! Row-major feature matrix with per-row speaker and label alignment.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    data: Vec<f64>,
    pub speakers: Vec<String>,
    pub labels: Vec<Label>,
    pub keys: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(names: Vec<String>) -> Self {
        FeatureMatrix {
            names,
            data: Vec::new(),
            speakers: Vec::new(),
            labels: Vec::new(),
            keys: Vec::new(),
        }
    }

    pub fn push_row(
        &mut self,
        key: impl Into<String>,
        speaker: impl Into<String>,
        label: Label,
        values: &[f64],
    ) -> Result<()> {
        if values.len() != self.names.len() {
            return Err(Error::Integrity(format!(
                "row has {} values, matrix has {} columns",
                values.len(),
                self.names.len()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Integrity(format!(
                "non-finite value in column {}",
                self.names[bad]
            )));
        }
        self.data.extend_from_slice(values);
        self.keys.push(key.into());
        self.speakers.push(speaker.into());
        self.labels.push(label);
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.n_cols();
        &self.data[i * d..(i + 1) * d]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let d = self.n_cols();
        &mut self.data[i * d..(i + 1) * d]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|i| self.row(i)[j]).collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        let d = self.n_cols().max(1);
        self.data.chunks(d).take(self.n_rows())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Rows in the given order; indices may repeat.
    pub fn select_rows(&self, indices: &[usize]) -> FeatureMatrix {
        let mut out = FeatureMatrix::new(self.names.clone());
        for &i in indices {
            out.data.extend_from_slice(self.row(i));
            out.keys.push(self.keys[i].clone());
            out.speakers.push(self.speakers[i].clone());
            out.labels.push(self.labels[i]);
        }
        out
    }

    pub fn select_columns(&self, names: &[String]) -> Result<FeatureMatrix> {
        let idx = names
            .iter()
            .map(|n| {
                self.column_index(n)
                    .ok_or_else(|| Error::Integrity(format!("unknown feature column {n}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut data = Vec::with_capacity(self.n_rows() * idx.len());
        for r in 0..self.n_rows() {
            let row = self.row(r);
            data.extend(idx.iter().map(|&j| row[j]));
        }
        Ok(FeatureMatrix {
            names: names.to_vec(),
            data,
            speakers: self.speakers.clone(),
            labels: self.labels.clone(),
            keys: self.keys.clone(),
        })
    }

    /// Rows whose speaker is in `speakers`, preserving order.
    pub fn filter_speakers(&self, speakers: &BTreeSet<String>) -> FeatureMatrix {
        let idx: Vec<usize> = (0..self.n_rows())
            .filter(|&i| speakers.contains(&self.speakers[i]))
            .collect();
        self.select_rows(&idx)
    }

    pub fn speaker_set(&self) -> BTreeSet<String> {
        self.speakers.iter().cloned().collect()
    }

    /// One row per speaker holding the mean of that speaker's rows, sorted by
    /// speaker id.
    pub fn speaker_means(&self) -> FeatureMatrix {
        let mut out = FeatureMatrix::new(self.names.clone());
        let d = self.n_cols();
        for spk in self.speaker_set() {
            let idx: Vec<usize> = (0..self.n_rows()).filter(|&i| self.speakers[i] == spk).collect();
            let mut acc = vec![0.0; d];
            for &i in &idx {
                for (a, v) in acc.iter_mut().zip(self.row(i)) {
                    *a += v;
                }
            }
            acc.iter_mut().for_each(|a| *a /= idx.len() as f64);
            out.data.extend_from_slice(&acc);
            out.keys.push(spk.clone());
            out.labels.push(self.labels[idx[0]]);
            out.speakers.push(spk);
        }
        out
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Per-feature values before imputation; `None` marks a missing feature.
#[derive(Debug, Clone, Default)]
pub struct RawRows {
    pub names: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
    pub keys: Vec<String>,
    pub speakers: Vec<String>,
    pub labels: Vec<Label>,
}

impl RawRows {
    /// Median of the present values of each column over `fit_rows`; columns
    /// with no present value get 0.
    pub fn column_medians(&self, fit_rows: &[usize]) -> Vec<f64> {
        (0..self.names.len())
            .map(|j| {
                let mut v: Vec<f64> = fit_rows.iter().filter_map(|&i| self.rows[i][j]).collect();
                if v.is_empty() {
                    0.0
                } else {
                    crate::stats::quantile_linear(&mut v, 0.5)
                }
            })
            .collect()
    }

    pub fn impute(&self, medians: &[f64]) -> Result<FeatureMatrix> {
        let mut m = FeatureMatrix::new(self.names.clone());
        for (i, row) in self.rows.iter().enumerate() {
            let vals: Vec<f64> = row
                .iter()
                .zip(medians)
                .map(|(v, med)| v.unwrap_or(*med))
                .collect();
            m.push_row(&self.keys[i], &self.speakers[i], self.labels[i], &vals)?;
        }
        Ok(m)
    }
}
