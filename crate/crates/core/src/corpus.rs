//! Corpus manifests, questionnaire label binarization, train/test
//! partitioning and seeded random oversampling.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

/// Exact manifest header, in order.
pub const MANIFEST_COLUMNS: [&str; 11] = [
    "corpus_id",
    "speaker_id",
    "sex",
    "instrument",
    "raw_score",
    "original_partition",
    "audio_path",
    "segment_start_s",
    "segment_end_s",
    "transcript_path",
    "sidecar_dir",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Instrument {
    #[serde(rename = "PHQ")]
    Phq,
    #[serde(rename = "BDI")]
    Bdi,
}

impl Instrument {
    pub fn max_score(self) -> u32 {
        match self {
            Instrument::Phq => 27,
            Instrument::Bdi => 63,
        }
    }
}

impl fmt::Display for Instrument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Instrument::Phq => "PHQ",
            Instrument::Bdi => "BDI",
        })
    }
}

impl FromStr for Instrument {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_uppercase().as_str() {
            "PHQ" | "PHQ8" | "PHQ-8" => Ok(Instrument::Phq),
            "BDI" | "BDI-II" => Ok(Instrument::Bdi),
            other => Err(format!("unknown instrument {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionnaireScore {
    pub instrument: Instrument,
    pub raw_score: u32,
}

impl QuestionnaireScore {
    pub fn new(instrument: Instrument, raw_score: u32) -> Result<Self> {
        if raw_score > instrument.max_score() {
            return Err(Error::Validation(format!(
                "{instrument} score {raw_score} outside [0, {}]",
                instrument.max_score()
            )));
        }
        Ok(QuestionnaireScore {
            instrument,
            raw_score,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Depression,
    NoDepression,
}

impl Label {
    pub fn is_positive(self) -> bool {
        self == Label::Depression
    }

    pub fn from_positive(positive: bool) -> Self {
        if positive {
            Label::Depression
        } else {
            Label::NoDepression
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Depression => "depression",
            Label::NoDepression => "no_depression",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sex {
    F,
    M,
    Unknown,
}

impl FromStr for Sex {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "F" | "f" => Ok(Sex::F),
            "M" | "m" => Ok(Sex::M),
            "" | "unknown" | "U" | "u" => Ok(Sex::Unknown),
            other => Err(format!("unknown sex {other:?}")),
        }
    }
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sex::F => "F",
            Sex::M => "M",
            Sex::Unknown => "unknown",
        })
    }
}

/// Partition a speaker belonged to in its source corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Partition {
    Train,
    Dev,
    Test,
    /// Corpus used as a whole (no original partitioning).
    All,
}

impl FromStr for Partition {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Partition::Train),
            "dev" | "development" => Ok(Partition::Dev),
            "test" => Ok(Partition::Test),
            "" | "all" => Ok(Partition::All),
            other => Err(format!("unknown partition {other:?}")),
        }
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Partition::Train => "train",
            Partition::Dev => "dev",
            Partition::Test => "test",
            Partition::All => "all",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerRecord {
    pub speaker_id: String,
    pub corpus_id: String,
    pub sex: Sex,
    pub score: Option<QuestionnaireScore>,
    pub label: Option<Label>,
    pub partition: Partition,
    /// Descriptive metadata only; never enters a feature matrix.
    pub edss: Option<f64>,
}

impl SpeakerRecord {
    pub fn new(
        corpus_id: impl Into<String>,
        speaker_id: impl Into<String>,
        sex: Sex,
        score: Option<QuestionnaireScore>,
        partition: Partition,
    ) -> Self {
        SpeakerRecord {
            speaker_id: speaker_id.into(),
            corpus_id: corpus_id.into(),
            sex,
            label: score.map(binarize_label),
            score,
            partition,
            edss: None,
        }
    }
}

/// One manifest row: a speech segment of one speaker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentStub {
    pub key: String,
    pub corpus_id: String,
    pub speaker_id: String,
    pub audio_path: Option<PathBuf>,
    pub start_s: Option<f64>,
    pub end_s: Option<f64>,
    pub transcript_path: Option<PathBuf>,
    pub sidecar_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default)]
pub struct Manifest {
    pub speakers: Vec<SpeakerRecord>,
    pub segments: Vec<SegmentStub>,
    /// Speakers dropped because their questionnaire value was missing.
    pub dropped_missing_score: usize,
}

impl Manifest {
    pub fn speaker(&self, corpus_id: &str, speaker_id: &str) -> Option<&SpeakerRecord> {
        self.speakers
            .iter()
            .find(|s| s.corpus_id == corpus_id && s.speaker_id == speaker_id)
    }

    pub fn label_of(&self, speaker_id: &str) -> Option<Label> {
        self.speakers
            .iter()
            .find(|s| s.speaker_id == speaker_id)
            .and_then(|s| s.label)
    }
}

pub fn binarize_label(score: QuestionnaireScore) -> Label {
    let depressed = match score.instrument {
        Instrument::Phq => score.raw_score >= 10,
        Instrument::Bdi => score.raw_score > 19,
    };
    Label::from_positive(depressed)
}

/// Segment key used to name sidecar files: `<corpus>-<speaker>-<nnnn>` where
/// `nnnn` is the ordinal of the row among that speaker's rows.
pub fn segment_key(corpus_id: &str, speaker_id: &str, ordinal: usize) -> String {
    format!("{corpus_id}-{speaker_id}-{ordinal:04}")
}

fn opt_cell(s: &str) -> Option<&str> {
    let t = s.trim();
    (!t.is_empty()).then_some(t)
}

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text, path)
}

pub fn parse_manifest(text: &str, path: &Path) -> Result<Manifest> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| Error::format(path, 1, e.to_string()))?
        .clone();
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got != MANIFEST_COLUMNS {
        return Err(Error::format(
            path,
            1,
            format!("header must be {}", MANIFEST_COLUMNS.join(",")),
        ));
    }

    let base = path.parent().unwrap_or(Path::new("."));
    let resolve = |p: &str| -> PathBuf {
        let pb = PathBuf::from(p);
        if pb.is_absolute() {
            pb
        } else {
            base.join(pb)
        }
    };

    let mut out = Manifest::default();
    let mut index: BTreeMap<(String, String), usize> = BTreeMap::new();
    let mut ordinals: BTreeMap<(String, String), usize> = BTreeMap::new();
    let mut dropped: BTreeSet<(String, String)> = BTreeSet::new();
    let mut seen_spans: HashSet<(String, String, String, String, String)> = HashSet::new();

    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::format(path, line, e.to_string()))?;
        if rec.len() != MANIFEST_COLUMNS.len() {
            return Err(Error::format(
                path,
                line,
                format!("expected {} cells, found {}", MANIFEST_COLUMNS.len(), rec.len()),
            ));
        }
        let cell = |j: usize| rec.get(j).unwrap_or("");
        let bad = |msg: String| Error::format(path, line, msg);

        let corpus_id = opt_cell(cell(0)).ok_or_else(|| bad("empty corpus_id".into()))?;
        let speaker_id = opt_cell(cell(1)).ok_or_else(|| bad("empty speaker_id".into()))?;
        let sex: Sex = cell(2).parse().map_err(bad)?;
        let partition: Partition = cell(5).parse().map_err(bad)?;
        let id = (corpus_id.to_string(), speaker_id.to_string());

        let score = match opt_cell(cell(4)) {
            None => None,
            Some(raw) => {
                let instrument: Instrument = cell(3).parse().map_err(bad)?;
                let value: u32 = raw
                    .parse()
                    .map_err(|_| bad(format!("raw_score {raw:?} is not a non-negative integer")))?;
                Some(QuestionnaireScore::new(instrument, value).map_err(|e| bad(e.to_string()))?)
            }
        };

        let start_s = parse_opt_f64(cell(7)).map_err(&bad)?;
        let end_s = parse_opt_f64(cell(8)).map_err(&bad)?;
        if let (Some(s), Some(e)) = (start_s, end_s) {
            if !(s >= 0.0 && e > s) {
                return Err(bad(format!("invalid segment span [{s}, {e}]")));
            }
        }
        let span_id = (
            corpus_id.to_string(),
            speaker_id.to_string(),
            cell(6).trim().to_string(),
            cell(7).trim().to_string(),
            cell(8).trim().to_string(),
        );
        // Rows without audio are told apart by their ordinal alone.
        if opt_cell(cell(6)).is_some() && !seen_spans.insert(span_id) {
            return Err(Error::Integrity(format!(
                "{}:{line}: duplicate segment for speaker_id {speaker_id}",
                path.display()
            )));
        }

        let Some(score) = score else {
            dropped.insert(id);
            continue;
        };
        if dropped.contains(&id) {
            return Err(Error::Integrity(format!(
                "{}:{line}: speaker_id {speaker_id} has both missing and present scores",
                path.display()
            )));
        }

        let candidate = SpeakerRecord::new(corpus_id, speaker_id, sex, Some(score), partition);
        match index.get(&id) {
            Some(&k) => {
                let prev = &out.speakers[k];
                if prev.sex != candidate.sex
                    || prev.score != candidate.score
                    || prev.partition != candidate.partition
                {
                    return Err(Error::Integrity(format!(
                        "{}:{line}: duplicate speaker_id {speaker_id} with conflicting metadata",
                        path.display()
                    )));
                }
            }
            None => {
                index.insert(id.clone(), out.speakers.len());
                out.speakers.push(candidate);
            }
        }

        let ord = ordinals.entry(id).or_insert(0);
        out.segments.push(SegmentStub {
            key: segment_key(corpus_id, speaker_id, *ord),
            corpus_id: corpus_id.to_string(),
            speaker_id: speaker_id.to_string(),
            audio_path: opt_cell(cell(6)).map(resolve),
            start_s,
            end_s,
            transcript_path: opt_cell(cell(9)).map(resolve),
            sidecar_dir: opt_cell(cell(10)).map(resolve),
        });
        *ord += 1;
    }
    for id in &dropped {
        if index.contains_key(id) {
            return Err(Error::Integrity(format!(
                "speaker_id {} has both missing and present scores",
                id.1
            )));
        }
    }
    out.dropped_missing_score = dropped.len();
    if out.dropped_missing_score > 0 {
        log::warn!(
            "{}: dropped {} speaker(s) with missing questionnaire values",
            path.display(),
            out.dropped_missing_score
        );
    }
    Ok(out)
}

fn parse_opt_f64(s: &str) -> std::result::Result<Option<f64>, String> {
    match opt_cell(s) {
        None => Ok(None),
        Some(t) => t
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(Some)
            .ok_or_else(|| format!("{t:?} is not a number")),
    }
}

/// Writes rows in manifest format. Paths are written as given.
pub fn write_manifest(path: &Path, rows: &[ManifestRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Serde(e.to_string()))?;
    w.write_record(MANIFEST_COLUMNS)
        .map_err(|e| Error::Serde(e.to_string()))?;
    for r in rows {
        let fmt_opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        let path_str = |p: &Option<PathBuf>| {
            p.as_ref()
                .map(|p| p.to_string_lossy().into_owned())
                .unwrap_or_default()
        };
        w.write_record([
            r.corpus_id.clone(),
            r.speaker_id.clone(),
            r.sex.to_string(),
            r.instrument.to_string(),
            r.raw_score.map(|s| s.to_string()).unwrap_or_default(),
            r.partition.to_string(),
            path_str(&r.audio_path),
            fmt_opt(r.start_s),
            fmt_opt(r.end_s),
            path_str(&r.transcript_path),
            path_str(&r.sidecar_dir),
        ])
        .map_err(|e| Error::Serde(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Denormalized manifest row used when writing manifests.
#[derive(Debug, Clone)]
pub struct ManifestRow {
    pub corpus_id: String,
    pub speaker_id: String,
    pub sex: Sex,
    pub instrument: Instrument,
    pub raw_score: Option<u32>,
    pub partition: Partition,
    pub audio_path: Option<PathBuf>,
    pub start_s: Option<f64>,
    pub end_s: Option<f64>,
    pub transcript_path: Option<PathBuf>,
    pub sidecar_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitName {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub name: SplitName,
    pub corpus_id: String,
    pub speaker_ids: BTreeSet<String>,
}

/// Which corpus supplies the training data; every other corpus becomes a
/// whole-corpus test split.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitPolicy {
    pub train_corpus: String,
}

/// Corpus A: train = original train ∪ dev, test = original test. Any other
/// corpus: one test split holding all of its speakers. Splits are ordered
/// train corpus first, then remaining corpora by id.
pub fn make_splits(records: &[SpeakerRecord], policy: &SplitPolicy) -> Result<Vec<DatasetSplit>> {
    let mut seen: BTreeMap<(&str, &str), Partition> = BTreeMap::new();
    for r in records {
        if let Some(prev) = seen.insert((&r.corpus_id, &r.speaker_id), r.partition) {
            if prev != r.partition {
                return Err(Error::Integrity(format!(
                    "speaker {} of corpus {} appears in partitions {prev} and {}",
                    r.speaker_id, r.corpus_id, r.partition
                )));
            }
        }
    }

    let mut train = BTreeSet::new();
    let mut test_a = BTreeSet::new();
    let mut others: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for r in records {
        if r.corpus_id == policy.train_corpus {
            match r.partition {
                Partition::Train | Partition::Dev => {
                    train.insert(r.speaker_id.clone());
                }
                Partition::Test => {
                    test_a.insert(r.speaker_id.clone());
                }
                Partition::All => {
                    return Err(Error::Integrity(format!(
                        "speaker {} of training corpus {} has no train/dev/test partition",
                        r.speaker_id, r.corpus_id
                    )))
                }
            }
        } else {
            others
                .entry(r.corpus_id.clone())
                .or_default()
                .insert(r.speaker_id.clone());
        }
    }
    if train.is_empty() {
        return Err(Error::Degenerate(format!(
            "training corpus {} has no train/dev speakers",
            policy.train_corpus
        )));
    }
    let mut out = vec![DatasetSplit {
        name: SplitName::Train,
        corpus_id: policy.train_corpus.clone(),
        speaker_ids: train,
    }];
    if !test_a.is_empty() {
        out.push(DatasetSplit {
            name: SplitName::Test,
            corpus_id: policy.train_corpus.clone(),
            speaker_ids: test_a,
        });
    }
    for (corpus_id, speaker_ids) in others {
        out.push(DatasetSplit {
            name: SplitName::Test,
            corpus_id,
            speaker_ids,
        });
    }
    Ok(out)
}

/// Unit resampled by the oversampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    /// A drawn speaker contributes all of its rows.
    #[default]
    Speaker,
    Row,
}

/// Random oversampling of the minority class with replacement up to the
/// majority count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OversamplePlan {
    pub seed: u64,
    #[serde(default)]
    pub granularity: Granularity,
}

impl OversamplePlan {
    pub fn new(seed: u64) -> Self {
        OversamplePlan {
            seed,
            granularity: Granularity::Speaker,
        }
    }
}

/// Row indices of the oversampled matrix: every original row in order, then
/// the resampled minority rows.
pub fn oversample_indices(m: &FeatureMatrix, plan: &OversamplePlan) -> Result<Vec<usize>> {
    // Units: groups of row indices sharing a label.
    let units: Vec<(Label, Vec<usize>)> = match plan.granularity {
        Granularity::Row => (0..m.n_rows()).map(|i| (m.labels[i], vec![i])).collect(),
        Granularity::Speaker => {
            let mut by_speaker: BTreeMap<&str, (Label, Vec<usize>)> = BTreeMap::new();
            for i in 0..m.n_rows() {
                let e = by_speaker
                    .entry(&m.speakers[i])
                    .or_insert_with(|| (m.labels[i], Vec::new()));
                if e.0 != m.labels[i] {
                    return Err(Error::Integrity(format!(
                        "speaker {} has rows with both labels",
                        m.speakers[i]
                    )));
                }
                e.1.push(i);
            }
            by_speaker.into_values().collect()
        }
    };
    let pos: Vec<&Vec<usize>> = units.iter().filter(|u| u.0.is_positive()).map(|u| &u.1).collect();
    let neg: Vec<&Vec<usize>> = units.iter().filter(|u| !u.0.is_positive()).map(|u| &u.1).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Degenerate(
            "oversampling needs both classes present".into(),
        ));
    }
    let deficit = pos.len().abs_diff(neg.len());
    let minority = if pos.len() < neg.len() { pos } else { neg };
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut out: Vec<usize> = (0..m.n_rows()).collect();
    for _ in 0..deficit {
        let u = minority[rng.gen_range(0..minority.len())];
        out.extend_from_slice(u);
    }
    Ok(out)
}

pub fn oversample(m: &FeatureMatrix, plan: &OversamplePlan) -> Result<FeatureMatrix> {
    Ok(m.select_rows(&oversample_indices(m, plan)?))
}
