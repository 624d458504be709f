//! Robust scaling, three classifier families and speaker-grouped grid
//! search.

pub mod cv;
pub mod forest;
pub mod gbt;
pub mod scaler;
pub mod svm;
pub mod tree;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use log::debug;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{oversample_indices, Granularity, Label, OversamplePlan};
use crate::error::{Error, Result};
use crate::evalreport::{aggregate_by_speaker, AggregationRule};
use crate::matrix::FeatureMatrix;

pub use cv::{audit_fold, CvPlan, Fold, DEFAULT_FOLDS};
pub use forest::Forest;
pub use gbt::GbtModel;
pub use scaler::{fit_robust_scaler, fit_transform, RobustScalerParams};
pub use svm::SvmModel;

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelFamily {
    Svm,
    Rf,
    Gbt,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 3] = [ModelFamily::Svm, ModelFamily::Rf, ModelFamily::Gbt];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelFamily::Svm => "svm",
            ModelFamily::Rf => "rf",
            ModelFamily::Gbt => "gbt",
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelFamily {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        ModelFamily::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown model family {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Linear,
    Rbf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gamma {
    Scale,
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Gini,
    Entropy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum HyperParams {
    Svm {
        c: f64,
        kernel: Kernel,
        gamma: Gamma,
    },
    Rf {
        n_estimators: usize,
        criterion: Criterion,
        min_samples_split: usize,
        bootstrap: bool,
    },
    Gbt {
        n_estimators: usize,
        learning_rate: f64,
        max_depth: usize,
        colsample: f64,
        subsample: f64,
    },
}

impl HyperParams {
    pub fn family(&self) -> ModelFamily {
        match self {
            HyperParams::Svm { .. } => ModelFamily::Svm,
            HyperParams::Rf { .. } => ModelFamily::Rf,
            HyperParams::Gbt { .. } => ModelFamily::Gbt,
        }
    }

    pub fn n_estimators(&self) -> Option<usize> {
        match *self {
            HyperParams::Rf { n_estimators, .. } | HyperParams::Gbt { n_estimators, .. } => Some(n_estimators),
            HyperParams::Svm { .. } => None,
        }
    }

    fn with_n_estimators(mut self, n: usize) -> Self {
        match &mut self {
            HyperParams::Rf { n_estimators, .. } | HyperParams::Gbt { n_estimators, .. } => *n_estimators = n,
            HyperParams::Svm { .. } => {}
        }
        self
    }

    /// Equal for points that fit identical models (gamma is unused by the
    /// linear kernel).
    pub fn canonical(self) -> Self {
        match self {
            HyperParams::Svm { c, kernel: Kernel::Linear, .. } => {
                HyperParams::Svm { c, kernel: Kernel::Linear, gamma: Gamma::Scale }
            }
            p => p,
        }
    }

    /// Compact `key=value` rendering for reports.
    pub fn describe(&self) -> String {
        match *self {
            HyperParams::Svm { c, kernel, gamma } => {
                let k = if kernel == Kernel::Linear { "linear" } else { "rbf" };
                let g = if gamma == Gamma::Scale { "scale" } else { "auto" };
                format!("C={c};kernel={k};gamma={g}")
            }
            HyperParams::Rf { n_estimators, criterion, min_samples_split, bootstrap } => {
                let c = if criterion == Criterion::Gini { "gini" } else { "entropy" };
                format!("n_estimators={n_estimators};criterion={c};min_samples_split={min_samples_split};bootstrap={bootstrap}")
            }
            HyperParams::Gbt { n_estimators, learning_rate, max_depth, colsample, subsample } => format!(
                "n_estimators={n_estimators};learning_rate={learning_rate};max_depth={max_depth};colsample={colsample};subsample={subsample}"
            ),
        }
    }
}

/// Which hyper-parameter lists to search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    /// The full published lists.
    #[default]
    Full,
    /// A few points per family, for smoke runs.
    Quick,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperGrid {
    pub family: ModelFamily,
    pub points: Vec<HyperParams>,
}

impl HyperGrid {
    pub fn new(family: ModelFamily, kind: GridKind) -> Self {
        match kind {
            GridKind::Full => Self::full(family),
            GridKind::Quick => Self::quick(family),
        }
    }

    /// Cartesian product of the published lists, first list outermost.
    pub fn full(family: ModelFamily) -> Self {
        let mut points = Vec::new();
        match family {
            ModelFamily::Svm => {
                for c in [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0] {
                    for kernel in [Kernel::Linear, Kernel::Rbf] {
                        for gamma in [Gamma::Scale, Gamma::Auto] {
                            points.push(HyperParams::Svm { c, kernel, gamma });
                        }
                    }
                }
            }
            ModelFamily::Rf => {
                for n_estimators in [50, 100, 300, 500, 800, 1000] {
                    for criterion in [Criterion::Gini, Criterion::Entropy] {
                        for min_samples_split in [2, 3] {
                            for bootstrap in [true, false] {
                                points.push(HyperParams::Rf { n_estimators, criterion, min_samples_split, bootstrap });
                            }
                        }
                    }
                }
            }
            ModelFamily::Gbt => {
                for n_estimators in [200, 300, 450, 500] {
                    for learning_rate in [0.001, 0.01, 0.1, 0.2] {
                        for max_depth in [4, 5, 6] {
                            for colsample in [1.0, 0.3, 0.5] {
                                for subsample in [0.8, 1.0] {
                                    points.push(HyperParams::Gbt {
                                        n_estimators,
                                        learning_rate,
                                        max_depth,
                                        colsample,
                                        subsample,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        HyperGrid { family, points }
    }

    pub fn quick(family: ModelFamily) -> Self {
        let points = match family {
            ModelFamily::Svm => vec![
                HyperParams::Svm { c: 0.1, kernel: Kernel::Linear, gamma: Gamma::Scale },
                HyperParams::Svm { c: 1.0, kernel: Kernel::Rbf, gamma: Gamma::Scale },
            ],
            ModelFamily::Rf => [50, 100]
                .map(|n| HyperParams::Rf {
                    n_estimators: n,
                    criterion: Criterion::Gini,
                    min_samples_split: 2,
                    bootstrap: true,
                })
                .to_vec(),
            ModelFamily::Gbt => [50, 100]
                .map(|n| HyperParams::Gbt {
                    n_estimators: n,
                    learning_rate: 0.1,
                    max_depth: 4,
                    colsample: 1.0,
                    subsample: 0.8,
                })
                .to_vec(),
        };
        HyperGrid { family, points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Groups of grid indices that one fit can serve: identical canonical
    /// points, and points differing only in the number of trees. Groups are
    /// ordered by first appearance.
    fn fit_groups(&self) -> Vec<(HyperParams, Vec<usize>)> {
        let mut groups: Vec<(HyperParams, Vec<usize>)> = Vec::new();
        for (i, p) in self.points.iter().enumerate() {
            let key = p.canonical().with_n_estimators(0);
            match groups.iter_mut().find(|(k, _)| *k == key) {
                Some(g) => g.1.push(i),
                None => groups.push((key, vec![i])),
            }
        }
        groups
            .into_iter()
            .map(|(key, members)| {
                let max_n = members.iter().filter_map(|&i| self.points[i].n_estimators()).max().unwrap_or(0);
                (key.with_n_estimators(max_n), members)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub depression: f64,
    pub no_depression: f64,
}

impl ClassWeights {
    pub const UNIT: ClassWeights = ClassWeights { depression: 1.0, no_depression: 1.0 };

    pub fn of(&self, label: Label) -> f64 {
        if label.is_positive() {
            self.depression
        } else {
            self.no_depression
        }
    }
}

/// Balanced weights `n / (2 n_c)`.
pub fn class_weights(labels: &[Label]) -> Result<ClassWeights> {
    let n = labels.len() as f64;
    let pos = labels.iter().filter(|l| l.is_positive()).count() as f64;
    let neg = n - pos;
    if pos == 0.0 || neg == 0.0 {
        return Err(Error::Degenerate("class weights need both classes".into()));
    }
    Ok(ClassWeights { depression: n / (2.0 * pos), no_depression: n / (2.0 * neg) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Fitted {
    Svm(SvmModel),
    Rf(Forest),
    Gbt(GbtModel),
}

impl Fitted {
    pub fn score(&self, row: &[f64]) -> f64 {
        match self {
            Fitted::Svm(m) => m.score(row),
            Fitted::Rf(f) => f.score(row),
            Fitted::Gbt(g) => g.score(row),
        }
    }

    fn score_prefix(&self, row: &[f64], k: Option<usize>) -> f64 {
        match (self, k) {
            (Fitted::Rf(f), Some(k)) => f.score_prefix(row, k),
            (Fitted::Gbt(g), Some(k)) => g.score_prefix(row, k),
            _ => self.score(row),
        }
    }
}

fn fit_params(p: &HyperParams, m: &FeatureMatrix, row_weight: &[f64], seed: u64) -> Fitted {
    let x = m.data();
    let d = m.n_cols();
    let y: Vec<bool> = m.labels.iter().map(|l| l.is_positive()).collect();
    match *p {
        HyperParams::Svm { c, kernel, gamma } => {
            let g = svm::resolve_gamma(gamma, x, d);
            let c_row: Vec<f64> = row_weight.iter().map(|w| c * w).collect();
            Fitted::Svm(svm::fit(x, d, &y, &c_row, kernel, g))
        }
        HyperParams::Rf { n_estimators, criterion, min_samples_split, bootstrap } => {
            let fp = forest::ForestParams { n_estimators, criterion, min_samples_split, bootstrap };
            Fitted::Rf(forest::fit(x, d, &y, row_weight, &fp, seed))
        }
        HyperParams::Gbt { n_estimators, learning_rate, max_depth, colsample, subsample } => {
            let gp = gbt::GbtParams { n_estimators, learning_rate, max_depth, colsample, subsample };
            Fitted::Gbt(gbt::fit(x, d, &y, row_weight, &gp, seed))
        }
    }
}

/// Stream `(a, b)` of a base seed (splitmix64 finalizer).
pub fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const STREAM_OVERSAMPLE: u64 = 1;
const STREAM_MODEL: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub seed: u64,
    /// `None` disables oversampling.
    pub oversample: Option<Granularity>,
    pub class_weighting: bool,
    pub aggregation: AggregationRule,
}

impl TrainOptions {
    pub fn new(seed: u64) -> Self {
        TrainOptions {
            seed,
            oversample: Some(Granularity::Speaker),
            class_weighting: true,
            aggregation: AggregationRule::MeanScore,
        }
    }
}

/// Training rows after optional oversampling, with per-row weights from
/// the class weights of the rows before oversampling.
fn prepare(m: &FeatureMatrix, opts: &TrainOptions, stream: u64) -> Result<(FeatureMatrix, ClassWeights, Vec<f64>)> {
    let cw = if opts.class_weighting { class_weights(&m.labels)? } else { ClassWeights::UNIT };
    let data = match opts.oversample {
        Some(granularity) => {
            let plan = OversamplePlan { seed: derive_seed(opts.seed, STREAM_OVERSAMPLE, stream), granularity };
            m.select_rows(&oversample_indices(m, &plan)?)
        }
        None => m.clone(),
    };
    let w = data.labels.iter().map(|&l| cw.of(l)).collect();
    Ok((data, cw, w))
}

/// Speaker-level UAR over the classes present; the flag is set when only
/// one class is present.
fn fold_uar(m: &FeatureMatrix, scores: &[f64], rule: AggregationRule) -> Result<(f64, bool)> {
    let preds = aggregate_by_speaker(&m.speakers, &m.labels, scores, rule)?;
    let mut recalls = Vec::new();
    for positive in [true, false] {
        let of_class: Vec<_> = preds.iter().filter(|p| p.true_label.is_positive() == positive).collect();
        if !of_class.is_empty() {
            let hit = of_class.iter().filter(|p| p.predicted_label == p.true_label).count();
            recalls.push(hit as f64 / of_class.len() as f64);
        }
    }
    Ok((100.0 * recalls.iter().sum::<f64>() / recalls.len() as f64, recalls.len() < 2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPointResult {
    pub params: HyperParams,
    pub fold_uar: Vec<f64>,
    pub mean_uar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchReport {
    pub points: Vec<GridPointResult>,
    pub best: usize,
    /// Folds whose validation part held a single class.
    pub single_class_folds: Vec<usize>,
}

/// Index of the first maximum.
pub fn select_best(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if best.is_none_or(|b| s > scores[b]) {
            best = Some(i);
        }
    }
    best
}

/// Mean validation UAR of every grid point over the folds of `plan`.
pub fn grid_search(grid: &HyperGrid, m: &FeatureMatrix, plan: &CvPlan, opts: &TrainOptions) -> Result<GridSearchReport> {
    if grid.is_empty() {
        return Err(Error::Config(format!("empty {} grid", grid.family)));
    }
    let folds = plan.folds(m)?;
    for f in &folds {
        audit_fold(m, f)?;
    }
    let prepared = folds
        .iter()
        .map(|f| {
            let train = m.select_rows(&f.train);
            let val = m.select_rows(&f.validation);
            let (data, _, w) = prepare(&train, opts, f.index as u64)?;
            Ok((data, w, val))
        })
        .collect::<Result<Vec<_>>>()?;
    let groups = grid.fit_groups();
    let tasks: Vec<(usize, usize)> = (0..groups.len()).flat_map(|g| (0..folds.len()).map(move |f| (g, f))).collect();
    let results = tasks
        .par_iter()
        .map(|&(g, f)| {
            let (params, members) = &groups[g];
            let (data, w, val) = &prepared[f];
            let seed = derive_seed(opts.seed, STREAM_MODEL, f as u64);
            let fitted = fit_params(params, data, w, seed);
            members
                .iter()
                .map(|&i| {
                    let k = grid.points[i].n_estimators();
                    let scores: Vec<f64> = val.rows().map(|r| fitted.score_prefix(r, k)).collect();
                    fold_uar(val, &scores, opts.aggregation).map(|u| (i, u))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut fold_uar = vec![vec![0.0; folds.len()]; grid.len()];
    let mut single = vec![false; folds.len()];
    for (&(_, f), res) in tasks.iter().zip(results) {
        for (i, (u, one_class)) in res {
            fold_uar[i][f] = u;
            single[f] |= one_class;
        }
    }
    let points: Vec<GridPointResult> = grid
        .points
        .iter()
        .zip(fold_uar)
        .map(|(p, fu)| GridPointResult {
            params: *p,
            mean_uar: fu.iter().sum::<f64>() / fu.len() as f64,
            fold_uar: fu,
        })
        .collect();
    let means: Vec<f64> = points.iter().map(|p| p.mean_uar).collect();
    let best = select_best(&means).expect("grid is non-empty");
    debug!("{} grid: best {} with mean UAR {:.2}", grid.family, points[best].params.describe(), means[best]);
    Ok(GridSearchReport {
        points,
        best,
        single_class_folds: single.iter().enumerate().filter(|(_, &s)| s).map(|(i, _)| i).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub schema_version: u32,
    pub family: ModelFamily,
    pub hyper_parameters: HyperParams,
    pub class_weights: ClassWeights,
    pub feature_names: Vec<String>,
    /// Scaler of the training corpus, kept for provenance.
    pub scaler: Option<RobustScalerParams>,
    pub fitted: Fitted,
}

/// Refit of one grid point on all of `m`.
pub fn fit_final(params: HyperParams, m: &FeatureMatrix, opts: &TrainOptions) -> Result<TrainedModel> {
    let final_stream = u64::MAX;
    let (data, cw, w) = prepare(m, opts, final_stream)?;
    let fitted = fit_params(&params, &data, &w, derive_seed(opts.seed, STREAM_MODEL, final_stream));
    Ok(TrainedModel {
        schema_version: MODEL_SCHEMA_VERSION,
        family: params.family(),
        hyper_parameters: params,
        class_weights: cw,
        feature_names: m.names.clone(),
        scaler: None,
        fitted,
    })
}

/// Grid search followed by a refit of the best point on the full matrix.
pub fn train(grid: &HyperGrid, m: &FeatureMatrix, plan: &CvPlan, opts: &TrainOptions) -> Result<(TrainedModel, GridSearchReport)> {
    let report = grid_search(grid, m, plan, opts)?;
    let model = fit_final(report.points[report.best].params, m, opts)?;
    Ok((model, report))
}

impl TrainedModel {
    /// Per-row depression scores in `[0, 1]`.
    pub fn score(&self, m: &FeatureMatrix) -> Result<Vec<f64>> {
        if m.names != self.feature_names {
            return Err(Error::Integrity(format!(
                "model expects {} features ({}...), matrix has {}",
                self.feature_names.len(),
                self.feature_names.first().map(String::as_str).unwrap_or(""),
                m.n_cols()
            )));
        }
        Ok(m.rows().map(|r| self.fitted.score(r)).collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(|e| Error::Serde(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Serde(e.to_string()))?;
        let version = v.get("schema_version").and_then(|x| x.as_u64());
        if version != Some(MODEL_SCHEMA_VERSION as u64) {
            return Err(Error::Integrity(format!(
                "{}: model schema version {version:?}, expected {MODEL_SCHEMA_VERSION}",
                path.display()
            )));
        }
        serde_json::from_value(v).map_err(|e| Error::Serde(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn corpus(n_pos: usize, n_neg: usize, segs: usize, shift: f64, seed: u64) -> FeatureMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = FeatureMatrix::new(vec!["a".into(), "b".into()]);
        for s in 0..n_pos + n_neg {
            let pos = s < n_pos;
            let c = if pos { shift } else { -shift };
            for j in 0..segs {
                let row = [c + rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                m.push_row(format!("{s}-{j}"), format!("spk{s:03}"), Label::from_positive(pos), &row).unwrap();
            }
        }
        m
    }

    #[test]
    fn grid_cardinalities() {
        assert_eq!(HyperGrid::full(ModelFamily::Svm).len(), 24);
        assert_eq!(HyperGrid::full(ModelFamily::Rf).len(), 48);
        assert_eq!(HyperGrid::full(ModelFamily::Gbt).len(), 288);
        // 12 linear points collapse to 6
        assert_eq!(HyperGrid::full(ModelFamily::Svm).fit_groups().len(), 18);
        assert_eq!(HyperGrid::full(ModelFamily::Rf).fit_groups().len(), 8);
        assert_eq!(HyperGrid::full(ModelFamily::Gbt).fit_groups().len(), 72);
    }

    #[test]
    fn class_weight_examples() {
        let mut labels = vec![Label::Depression; 42];
        labels.extend(vec![Label::NoDepression; 93]);
        let w = class_weights(&labels).unwrap();
        assert!((w.depression - 135.0 / 84.0).abs() < 1e-12);
        assert!((w.no_depression - 135.0 / 186.0).abs() < 1e-12);
        assert!((w.depression / w.no_depression - 93.0 / 42.0).abs() < 1e-12);
        let balanced = class_weights(&[Label::Depression, Label::NoDepression]).unwrap();
        assert_eq!(balanced, ClassWeights::UNIT);
        assert!(class_weights(&[Label::Depression]).is_err());
    }

    #[test]
    fn separable_data_reaches_full_uar() {
        let m = corpus(10, 15, 4, 3.0, 1);
        let plan = CvPlan::new(&m, 5, 1).unwrap();
        for fam in ModelFamily::ALL {
            let r = grid_search(&HyperGrid::quick(fam), &m, &plan, &TrainOptions::new(3)).unwrap();
            assert_eq!(r.points[r.best].mean_uar, 100.0, "{fam}");
        }
    }

    #[test]
    fn training_is_deterministic() {
        let m = corpus(8, 12, 3, 0.4, 2);
        let plan = CvPlan::new(&m, 5, 4).unwrap();
        let opts = TrainOptions::new(11);
        for fam in ModelFamily::ALL {
            let (a, ra) = train(&HyperGrid::quick(fam), &m, &plan, &opts).unwrap();
            let (b, rb) = train(&HyperGrid::quick(fam), &m, &plan, &opts).unwrap();
            assert_eq!(a, b);
            assert_eq!(ra, rb);
        }
    }

    #[test]
    fn prefix_scores_match_direct_fit() {
        let m = corpus(8, 12, 3, 0.5, 5);
        let plan = CvPlan::new(&m, 5, 4).unwrap();
        let opts = TrainOptions::new(2);
        let grid = HyperGrid::quick(ModelFamily::Rf);
        let shared = grid_search(&grid, &m, &plan, &opts).unwrap();
        for (i, p) in grid.points.iter().enumerate() {
            let single = HyperGrid { family: ModelFamily::Rf, points: vec![*p] };
            let alone = grid_search(&single, &m, &plan, &opts).unwrap();
            assert_eq!(alone.points[0].fold_uar, shared.points[i].fold_uar);
        }
    }

    #[test]
    fn unit_class_weights_leave_forest_unchanged() {
        let m = corpus(10, 10, 2, 0.5, 6);
        let p = HyperParams::Rf { n_estimators: 10, criterion: Criterion::Entropy, min_samples_split: 2, bootstrap: true };
        let weighted = TrainOptions { oversample: None, ..TrainOptions::new(1) };
        let unweighted = TrainOptions { class_weighting: false, ..weighted };
        let a = fit_final(p, &m, &weighted).unwrap();
        let b = fit_final(p, &m, &unweighted).unwrap();
        assert_eq!(a.fitted, b.fitted);
        let s = HyperParams::Svm { c: 1.0, kernel: Kernel::Rbf, gamma: Gamma::Scale };
        let (Fitted::Svm(a), Fitted::Svm(b)) = (fit_final(s, &m, &weighted).unwrap().fitted, fit_final(s, &m, &unweighted).unwrap().fitted) else {
            unreachable!()
        };
        assert!((a.rho - b.rho).abs() <= 1e-6);
        assert!(a.coef.iter().zip(&b.coef).all(|(x, y)| (x - y).abs() <= 1e-6));
    }

    #[test]
    fn score_checks_schema_and_roundtrips() {
        let m = corpus(6, 6, 2, 2.0, 7);
        let p = HyperParams::Gbt { n_estimators: 20, learning_rate: 0.2, max_depth: 4, colsample: 1.0, subsample: 1.0 };
        let model = fit_final(p, &m, &TrainOptions::new(0)).unwrap();
        let scores = model.score(&m).unwrap();
        assert!(scores.iter().all(|s| (0.0..=1.0).contains(s)));
        for (s, l) in scores.iter().zip(&m.labels) {
            assert_eq!(*s > 0.5, l.is_positive());
        }
        let other = m.select_columns(&["b".to_string()]).unwrap();
        assert!(model.score(&other).is_err());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        model.save(&path).unwrap();
        assert_eq!(TrainedModel::load(&path).unwrap(), model);
        let text = std::fs::read_to_string(&path).unwrap().replacen("\"schema_version\":1", "\"schema_version\":99", 1);
        std::fs::write(&path, text).unwrap();
        assert!(matches!(TrainedModel::load(&path), Err(Error::Integrity(_))));
    }

    #[test]
    fn scores_are_row_permutation_equivariant() {
        let m = corpus(6, 6, 2, 1.0, 8);
        let p = HyperParams::Svm { c: 1.0, kernel: Kernel::Rbf, gamma: Gamma::Auto };
        let model = fit_final(p, &m, &TrainOptions::new(0)).unwrap();
        let order: Vec<usize> = (0..m.n_rows()).rev().collect();
        let a = model.score(&m).unwrap();
        let b = model.score(&m.select_rows(&order)).unwrap();
        assert!(order.iter().zip(&b).all(|(&i, s)| *s == a[i]));
    }

    proptest! {
        #[test]
        fn argmax_invariant_to_affine_rescaling(
            fold in proptest::collection::vec(proptest::collection::vec(0.0f64..100.0, 5), 1..30),
            a in 0.01f64..10.0,
            b in -50.0f64..50.0,
        ) {
            let mean = |v: &Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
            let raw: Vec<f64> = fold.iter().map(mean).collect();
            let scaled: Vec<f64> = fold.iter().map(|v| mean(&v.iter().map(|u| a * u + b).collect())).collect();
            let i = select_best(&raw).unwrap();
            let j = select_best(&scaled).unwrap();
            // equal up to floating-point near-ties
            prop_assert!(i == j || (raw[i] - raw[j]).abs() < 1e-9);
        }
    }
}
