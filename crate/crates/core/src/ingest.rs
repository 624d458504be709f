//! Precomputed neural features read from per-segment sidecar files.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{embedding_names, FeatureSet, FeatureVector};

pub const INDEX_FILE: &str = "index.txt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidecarVector {
    pub set: FeatureSet,
    pub values: Vec<f64>,
}

impl SidecarVector {
    pub fn new(set: FeatureSet, values: Vec<f64>) -> Result<Self> {
        if !set.is_sidecar() {
            return Err(Error::Validation(format!("{set} is not read from sidecar files")));
        }
        if values.len() != set.dim() {
            return Err(Error::Integrity(format!(
                "{set} vector has {} values, expected {}",
                values.len(),
                set.dim()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Integrity(format!("{set} value {i} is not finite")));
        }
        Ok(SidecarVector { set, values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn into_feature_vector(self) -> FeatureVector {
        let names = embedding_names(self.set);
        FeatureVector::new(self.set, names, self.values.into_iter().map(Some).collect())
            .expect("sidecar dims match names")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SerDims {
    pub arousal: f64,
    pub valence: f64,
    pub dominance: f64,
}

impl TryFrom<&SidecarVector> for SerDims {
    type Error = Error;

    fn try_from(v: &SidecarVector) -> Result<Self> {
        match (v.set, v.values.as_slice()) {
            (FeatureSet::SerDims, &[arousal, valence, dominance]) => Ok(SerDims { arousal, valence, dominance }),
            _ => Err(Error::Integrity(format!("{} sidecar is not a SER triple", v.set))),
        }
    }
}

impl From<SerDims> for SidecarVector {
    fn from(d: SerDims) -> Self {
        SidecarVector { set: FeatureSet::SerDims, values: vec![d.arousal, d.valence, d.dominance] }
    }
}

pub fn sidecar_path(dir: &Path, segment_key: &str, set: FeatureSet) -> PathBuf {
    dir.join(format!("{segment_key}.{}.vec", set.as_str()))
}

/// Reads one sidecar. A missing file is `Ok(None)`; a malformed line or a
/// wrong dimension is an error.
pub fn read_sidecar(dir: &Path, segment_key: &str, set: FeatureSet) -> Result<Option<SidecarVector>> {
    let path = sidecar_path(dir, segment_key, set);
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(Error::io(path, e)),
    };
    let values = text
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| Error::format(&path, 1, format!("not a number: `{tok}`")))
        })
        .collect::<Result<Vec<f64>>>()?;
    SidecarVector::new(set, values)
        .map(Some)
        .map_err(|e| Error::Integrity(format!("{}: {e}", path.display())))
}

/// Writes values with shortest round-trip formatting, so re-reading is
/// bit-exact.
pub fn write_sidecar(dir: &Path, segment_key: &str, v: &SidecarVector) -> Result<PathBuf> {
    let path = sidecar_path(dir, segment_key, v.set);
    let mut line = String::with_capacity(v.values.len() * 20);
    for (i, x) in v.values.iter().enumerate() {
        if i > 0 {
            line.push(' ');
        }
        write!(line, "{x:?}").expect("writing to a string");
    }
    line.push('\n');
    std::fs::write(&path, line).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub fn write_index(dir: &Path, keys: &[String]) -> Result<()> {
    let path = dir.join(INDEX_FILE);
    let mut text = keys.join("\n");
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Error::io(path, e))
}

/// Keys listed in the directory's index file, if it has one.
pub fn read_index(dir: &Path) -> Result<Option<BTreeSet<String>>> {
    let path = dir.join(INDEX_FILE);
    match std::fs::read_to_string(&path) {
        Ok(t) => Ok(Some(t.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect())),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(Error::io(path, e)),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub set: Option<FeatureSet>,
    pub loaded: usize,
    /// Segment keys without a sidecar file; these segments are excluded.
    pub missing: Vec<String>,
}

/// Reads `set` for every key. Keys must agree with the directory index when
/// one exists.
pub fn ingest(dir: &Path, keys: &[String], set: FeatureSet) -> Result<(Vec<(String, SidecarVector)>, IngestReport)> {
    if let Some(index) = read_index(dir)? {
        let wanted: BTreeSet<&str> = keys.iter().map(String::as_str).collect();
        let listed: BTreeSet<&str> = index.iter().map(String::as_str).collect();
        if let Some(k) = wanted.difference(&listed).next() {
            return Err(Error::Integrity(format!(
                "segment {k} is not listed in {}",
                dir.join(INDEX_FILE).display()
            )));
        }
        if let Some(k) = listed.difference(&wanted).next() {
            return Err(Error::Integrity(format!("index lists {k}, which is not in the manifest")));
        }
    }
    let mut out = Vec::with_capacity(keys.len());
    let mut report = IngestReport { set: Some(set), ..Default::default() };
    for k in keys {
        match read_sidecar(dir, k, set)? {
            Some(v) => out.push((k.clone(), v)),
            None => report.missing.push(k.clone()),
        }
    }
    report.loaded = out.len();
    if !report.missing.is_empty() {
        warn!("{set}: {} of {} segments have no sidecar and are excluded", report.missing.len(), keys.len());
    }
    Ok((out, report))
}

/// Column-wise mean of frame-level vectors.
pub fn mean_pool(frames: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = frames
        .first()
        .ok_or_else(|| Error::Validation("cannot pool zero frames".into()))?;
    let d = first.len();
    if frames.iter().any(|f| f.len() != d) {
        return Err(Error::Integrity("frames differ in dimension".into()));
    }
    let mut acc = vec![0.0; d];
    for f in frames {
        for (a, x) in acc.iter_mut().zip(f) {
            *a += x;
        }
    }
    let n = frames.len() as f64;
    Ok(acc.into_iter().map(|a| a / n).collect())
}
