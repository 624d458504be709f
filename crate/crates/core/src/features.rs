//! Feature-set identifiers and per-segment feature vectors.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    Praat,
    Egemaps,
    SerDims,
    Wav2vec2,
    Roberta,
    Psycholing,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 6] = [
        FeatureSet::Wav2vec2,
        FeatureSet::SerDims,
        FeatureSet::Praat,
        FeatureSet::Egemaps,
        FeatureSet::Psycholing,
        FeatureSet::Roberta,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSet::Praat => "praat",
            FeatureSet::Egemaps => "egemaps",
            FeatureSet::SerDims => "ser_dims",
            FeatureSet::Wav2vec2 => "wav2vec2",
            FeatureSet::Roberta => "roberta",
            FeatureSet::Psycholing => "psycholing",
        }
    }

    /// Sets read from precomputed sidecar files rather than computed here.
    pub fn is_sidecar(self) -> bool {
        matches!(
            self,
            FeatureSet::Wav2vec2 | FeatureSet::SerDims | FeatureSet::Roberta
        )
    }

    /// Sets excluded from exploratory analysis (opaque embeddings).
    pub fn is_embedding(self) -> bool {
        matches!(self, FeatureSet::Wav2vec2 | FeatureSet::Roberta)
    }

    pub fn is_linguistic(self) -> bool {
        matches!(self, FeatureSet::Psycholing | FeatureSet::Roberta)
    }

    /// Fixed vector length, when the set has one.
    pub fn dim(self) -> usize {
        match self {
            FeatureSet::Praat => 39,
            FeatureSet::Egemaps => 88,
            FeatureSet::SerDims => 3,
            FeatureSet::Wav2vec2 => 1024,
            FeatureSet::Roberta => 768,
            FeatureSet::Psycholing => 51,
        }
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureSet {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        FeatureSet::ALL
            .into_iter()
            .find(|fs| fs.as_str() == s)
            .ok_or_else(|| format!("unknown feature set {s:?}"))
    }
}

/// Named feature values for one segment; `None` marks a missing feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub set: FeatureSet,
    pub names: Vec<String>,
    pub values: Vec<Option<f64>>,
}

impl FeatureVector {
    /// Non-finite values are stored as missing.
    pub fn new(set: FeatureSet, names: Vec<String>, values: Vec<Option<f64>>) -> Result<Self> {
        if names.len() != values.len() {
            return Err(Error::Integrity(format!(
                "{set}: {} names but {} values",
                names.len(),
                values.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(Error::Integrity(format!("{set}: duplicate feature name {dup}")));
        }
        let values = values
            .into_iter()
            .map(|v| v.filter(|x| x.is_finite()))
            .collect();
        Ok(FeatureVector { set, names, values })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .and_then(|i| self.values[i])
    }
}

/// Default column names for a fixed-dimension embedding set.
pub fn embedding_names(set: FeatureSet) -> Vec<String> {
    match set {
        FeatureSet::SerDims => vec!["arousal".into(), "valence".into(), "dominance".into()],
        _ => (0..set.dim())
            .map(|i| format!("{}_{i:04}", set.as_str()))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for fs in FeatureSet::ALL {
            assert_eq!(fs.as_str().parse::<FeatureSet>().unwrap(), fs);
        }
    }

    #[test]
    fn non_finite_becomes_missing() {
        let v = FeatureVector::new(
            FeatureSet::Praat,
            vec!["a".into(), "b".into()],
            vec![Some(f64::NAN), Some(1.0)],
        )
        .unwrap();
        assert_eq!(v.values, vec![None, Some(1.0)]);
        assert!(FeatureVector::new(FeatureSet::Praat, vec!["a".into(), "a".into()], vec![None, None]).is_err());
    }
}
