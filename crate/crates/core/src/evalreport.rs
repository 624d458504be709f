//! Speaker-level evaluation: aggregation of segment scores, UAR, per-class
//! precision/recall, macro-F1, ROC/AUC, bootstrap confidence intervals, and
//! report emission.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::stats::quantile_sorted;

pub const DEFAULT_BOOTSTRAP_ITERATIONS: usize = 1000;
pub const DECISION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationRule {
    #[default]
    MeanScore,
    MajorityVote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerPrediction {
    pub speaker_id: String,
    pub aggregated_score: f64,
    pub predicted_label: Label,
    pub true_label: Label,
}

/// Collapses one speaker's segment scores. The decision threshold 0.5 is
/// inclusive for both rules.
pub fn aggregate_speaker(scores: &[f64], rule: AggregationRule) -> (f64, Label) {
    assert!(!scores.is_empty(), "speaker without segments");
    let agg = match rule {
        AggregationRule::MeanScore => scores.iter().sum::<f64>() / scores.len() as f64,
        AggregationRule::MajorityVote => {
            scores.iter().filter(|&&s| s >= DECISION_THRESHOLD).count() as f64 / scores.len() as f64
        }
    };
    (agg, Label::from_positive(agg >= DECISION_THRESHOLD))
}

/// Groups segment scores by speaker; output sorted by speaker id.
pub fn aggregate_by_speaker(
    speakers: &[String],
    labels: &[Label],
    scores: &[f64],
    rule: AggregationRule,
) -> Result<Vec<SpeakerPrediction>> {
    if speakers.len() != scores.len() || labels.len() != scores.len() {
        return Err(Error::Integrity("speaker/label/score lengths differ".into()));
    }
    let mut groups: BTreeMap<&str, (Label, Vec<f64>)> = BTreeMap::new();
    for ((s, &l), &sc) in speakers.iter().zip(labels).zip(scores) {
        let e = groups.entry(s).or_insert((l, Vec::new()));
        if e.0 != l {
            return Err(Error::Integrity(format!("speaker {s} has conflicting labels")));
        }
        e.1.push(sc);
    }
    Ok(groups
        .into_iter()
        .map(|(s, (truth, sc))| {
            let (agg, pred) = aggregate_speaker(&sc, rule);
            SpeakerPrediction {
                speaker_id: s.to_string(),
                aggregated_score: agg,
                predicted_label: pred,
                true_label: truth,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: usize,
    pub fn_: usize,
    pub fp: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a Label, &'a Label)>) -> Self {
        let mut c = Confusion::default();
        for (truth, pred) in pairs {
            match (truth.is_positive(), pred.is_positive()) {
                (true, true) => c.tp += 1,
                (true, false) => c.fn_ += 1,
                (false, true) => c.fp += 1,
                (false, false) => c.tn += 1,
            }
        }
        c
    }

    pub fn of(preds: &[SpeakerPrediction]) -> Self {
        Self::from_pairs(preds.iter().map(|p| (&p.true_label, &p.predicted_label)))
    }
}

/// Unweighted average recall in percent.
pub fn uar(preds: &[SpeakerPrediction]) -> Result<f64> {
    uar_confusion(&Confusion::of(preds))
}

pub fn uar_confusion(c: &Confusion) -> Result<f64> {
    if c.tp + c.fn_ == 0 {
        return Err(Error::Degenerate("UAR undefined: no depression speakers".into()));
    }
    if c.tn + c.fp == 0 {
        return Err(Error::Degenerate(
            "UAR undefined: no no_depression speakers".into(),
        ));
    }
    let rec_pos = c.tp as f64 / (c.tp + c.fn_) as f64;
    let rec_neg = c.tn as f64 / (c.tn + c.fp) as f64;
    Ok(50.0 * (rec_pos + rec_neg))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision_dep: f64,
    pub precision_no_dep: f64,
    pub recall_dep: f64,
    pub recall_no_dep: f64,
    /// Macro average of the two per-class F1 scores.
    pub f1_macro: f64,
    /// Set when a class received no predictions and its precision was
    /// reported as 0.
    pub precision_dep_undefined: bool,
    pub precision_no_dep_undefined: bool,
}

fn pct(num: usize, den: usize) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (100.0 * num as f64 / den as f64, false)
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn prf(preds: &[SpeakerPrediction]) -> Prf {
    prf_confusion(&Confusion::of(preds))
}

pub fn prf_confusion(c: &Confusion) -> Prf {
    let (pd, pd_u) = pct(c.tp, c.tp + c.fp);
    let (pn, pn_u) = pct(c.tn, c.tn + c.fn_);
    let (rd, _) = pct(c.tp, c.tp + c.fn_);
    let (rn, _) = pct(c.tn, c.tn + c.fp);
    Prf {
        precision_dep: pd,
        precision_no_dep: pn,
        recall_dep: rd,
        recall_no_dep: rn,
        f1_macro: (f1(pd, rd) + f1(pn, rn)) / 2.0,
        precision_dep_undefined: pd_u,
        precision_no_dep_undefined: pn_u,
    }
}

/// ROC over unique score thresholds (predict depression when score ≥
/// threshold), starting at (0, 0) and ending at (1, 1); AUC by trapezoid,
/// which equals the rank-average U / (n₊ n₋).
pub fn roc_auc(scores: &[f64], truths: &[Label]) -> Result<(Vec<(f64, f64)>, f64)> {
    if scores.len() != truths.len() {
        return Err(Error::Integrity("score/label lengths differ".into()));
    }
    let n_pos = truths.iter().filter(|t| t.is_positive()).count();
    let n_neg = truths.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Degenerate("ROC needs both classes present".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0u64, 0u64);
    // Twice the area in units of one positive × one negative.
    let mut area2: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let (tp0, fp0) = (tp, fp);
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if truths[order[i]].is_positive() {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area2 += (fp - fp0) * (tp + tp0);
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
    }
    let auc = area2 as f64 / (2 * n_pos * n_neg) as f64;
    Ok((points, auc))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCi {
    pub low: f64,
    pub high: f64,
    /// Resamples skipped because they held a single true class.
    pub skipped: usize,
    pub n_iter: usize,
}

/// Percentile bootstrap over speakers. Iteration `i` draws from a ChaCha
/// stream keyed by `(seed, i)`, so serial and parallel runs agree. The
/// interval is widened to include the point estimate when needed.
pub fn bootstrap_ci<F>(preds: &[SpeakerPrediction], metric: F, n_iter: usize, seed: u64) -> Result<BootstrapCi>
where
    F: Fn(&[SpeakerPrediction]) -> Result<f64> + Sync,
{
    if preds.len() < 2 {
        return Err(Error::Degenerate("bootstrap needs at least 2 speakers".into()));
    }
    let point = metric(preds)?;
    let n = preds.len();
    let draws: Vec<Option<f64>> = (0..n_iter)
        .into_par_iter()
        .map(|it| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(it as u64);
            let sample: Vec<SpeakerPrediction> =
                (0..n).map(|_| preds[rng.gen_range(0..n)].clone()).collect();
            let has_pos = sample.iter().any(|p| p.true_label.is_positive());
            let has_neg = sample.iter().any(|p| !p.true_label.is_positive());
            if has_pos && has_neg {
                metric(&sample).ok()
            } else {
                None
            }
        })
        .collect();
    let mut values: Vec<f64> = draws.iter().flatten().copied().collect();
    let skipped = n_iter - values.len();
    if values.is_empty() {
        return Err(Error::Degenerate("every bootstrap resample was single-class".into()));
    }
    values.sort_by(f64::total_cmp);
    let low = quantile_sorted(&values, 0.025).min(point);
    let high = quantile_sorted(&values, 0.975).max(point);
    Ok(BootstrapCi {
        low,
        high,
        skipped,
        n_iter,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskId {
    A,
    B,
    #[serde(rename = "C_A")]
    CA,
    #[serde(rename = "C_B")]
    CB,
}

impl TaskId {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskId::A => "A",
            TaskId::B => "B",
            TaskId::CA => "C_A",
            TaskId::CB => "C_B",
        }
    }

    pub fn uses_selection(self) -> bool {
        matches!(self, TaskId::CA | TaskId::CB)
    }

    pub fn evaluates_second_corpus(self) -> bool {
        matches!(self, TaskId::B | TaskId::CB)
    }
}

impl std::str::FromStr for TaskId {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "A" | "a" => Ok(TaskId::A),
            "B" | "b" => Ok(TaskId::B),
            "C_A" | "c_a" | "CA" => Ok(TaskId::CA),
            "C_B" | "c_b" | "CB" => Ok(TaskId::CB),
            other => Err(format!("unknown task {other:?}")),
        }
    }
}

impl std::fmt::Display for TaskId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task_id: TaskId,
    pub feature_set: String,
    pub model_family: String,
    pub test_corpus: String,
    pub features: Vec<String>,
    pub hyper_parameters: String,
    pub n_speakers: usize,
    pub uar_pct: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub f1_pct: f64,
    pub prf: Prf,
    pub roc_points: Vec<(f64, f64)>,
    pub auc: f64,
    pub n_bootstrap: usize,
    pub bootstrap_skipped: usize,
    pub seed: u64,
    pub config_hash: String,
}

impl EvalReport {
    /// Computes every metric from speaker predictions.
    #[allow(clippy::too_many_arguments)]
    pub fn from_predictions(
        task_id: TaskId,
        feature_set: &str,
        model_family: &str,
        test_corpus: &str,
        features: Vec<String>,
        hyper_parameters: String,
        preds: &[SpeakerPrediction],
        n_bootstrap: usize,
        seed: u64,
        config_hash: &str,
    ) -> Result<Self> {
        let uar_pct = uar(preds)?;
        let ci = bootstrap_ci(preds, uar, n_bootstrap, seed)?;
        let p = prf(preds);
        let scores: Vec<f64> = preds.iter().map(|p| p.aggregated_score).collect();
        let truths: Vec<Label> = preds.iter().map(|p| p.true_label).collect();
        let (roc_points, auc) = roc_auc(&scores, &truths)?;
        Ok(EvalReport {
            task_id,
            feature_set: feature_set.to_string(),
            model_family: model_family.to_string(),
            test_corpus: test_corpus.to_string(),
            features,
            hyper_parameters,
            n_speakers: preds.len(),
            uar_pct,
            ci_low: ci.low,
            ci_high: ci.high,
            f1_pct: p.f1_macro,
            prf: p,
            roc_points,
            auc,
            n_bootstrap,
            bootstrap_skipped: ci.skipped,
            seed,
            config_hash: config_hash.to_string(),
        })
    }

    pub fn stem(&self) -> String {
        format!(
            "{}_{}_{}_{}",
            self.task_id, self.feature_set, self.model_family, self.test_corpus
        )
    }

    pub fn report_file_name(&self) -> String {
        format!("report_{}.tsv", self.stem())
    }

    pub fn roc_file_name(&self) -> String {
        format!("roc_{}.csv", self.stem())
    }
}

pub const REPORT_COLUMNS: [&str; 20] = [
    "task",
    "feature_set",
    "model",
    "test_corpus",
    "n_speakers",
    "uar_pct",
    "uar_ci_low",
    "uar_ci_high",
    "f1_pct",
    "precision_dep_pct",
    "precision_no_dep_pct",
    "recall_dep_pct",
    "recall_no_dep_pct",
    "auc",
    "n_bootstrap",
    "bootstrap_skipped",
    "seed",
    "config_hash",
    "hyper_parameters",
    "features",
];

fn report_row(r: &EvalReport) -> String {
    format!(
        "{}\t{}\t{}\t{}\t{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.6}\t{}\t{}\t{}\t{}\t{}\t{}",
        r.task_id,
        r.feature_set,
        r.model_family,
        r.test_corpus,
        r.n_speakers,
        r.uar_pct,
        r.ci_low,
        r.ci_high,
        r.f1_pct,
        r.prf.precision_dep,
        r.prf.precision_no_dep,
        r.prf.recall_dep,
        r.prf.recall_no_dep,
        r.auc,
        r.n_bootstrap,
        r.bootstrap_skipped,
        r.seed,
        r.config_hash,
        r.hyper_parameters,
        r.features.join(";"),
    )
}

pub fn report_tsv(reports: &[EvalReport]) -> String {
    let mut s = REPORT_COLUMNS.join("\t");
    s.push('\n');
    for r in reports {
        s.push_str(&report_row(r));
        s.push('\n');
    }
    s
}

pub fn roc_csv(r: &EvalReport) -> String {
    let mut s = String::from("fpr,tpr\n");
    for (x, y) in &r.roc_points {
        let _ = writeln!(s, "{x:.6},{y:.6}");
    }
    s
}

/// Human-readable aligned table, one line per report.
pub fn aligned_table(reports: &[EvalReport]) -> String {
    let mut s = format!(
        "{:<4} {:<11} {:<4} {:<10} {:>18} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6}\n",
        "Task", "Feature", "Mod", "Test", "UAR[%] (95% CI)", "F1", "P.Dep", "P.No", "R.Dep", "R.No", "AUC"
    );
    for r in reports {
        let _ = writeln!(
            s,
            "{:<4} {:<11} {:<4} {:<10} {:>18} {:>6.1} {:>6.1} {:>6.1} {:>6.1} {:>6.1} {:>6.3}",
            r.task_id.as_str(),
            r.feature_set,
            r.model_family,
            r.test_corpus,
            format!("{:.1} ({:.1}-{:.1})", r.uar_pct, r.ci_low, r.ci_high),
            r.f1_pct,
            r.prf.precision_dep,
            r.prf.precision_no_dep,
            r.prf.recall_dep,
            r.prf.recall_no_dep,
            r.auc
        );
    }
    s
}

/// Writes `report_<...>.tsv` and `roc_<...>.csv` per report plus an aligned
/// `summary.txt`; returns the written paths.
pub fn write_reports(dir: &Path, reports: &[EvalReport]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: String, body: String| -> Result<()> {
        let p = dir.join(name);
        std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        written.push(p);
        Ok(())
    };
    for r in reports {
        put(r.report_file_name(), report_tsv(std::slice::from_ref(r)))?;
        put(r.roc_file_name(), roc_csv(r))?;
    }
    put("summary.txt".into(), aligned_table(reports))?;
    Ok(written)
}
