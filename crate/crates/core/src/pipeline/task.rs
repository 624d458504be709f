use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::extract::{extract, load_corpus, write_segment_table, Corpus, FeatureTable, SEGMENTS_FILE};
use crate::corpus::{make_splits, DatasetSplit, SplitName, SplitPolicy};
use crate::error::{Error, Result};
use crate::evalreport::{aggregate_by_speaker, write_reports, EvalReport, TaskId};
use crate::features::FeatureSet;
use crate::matrix::{FeatureMatrix, RawRows};
use crate::modeling::{fit_transform, train, ClassWeights, CvPlan, GridSearchReport, HyperGrid, ModelFamily, RobustScalerParams, TrainedModel};
use crate::stats::{select_features, selected_names, write_results, FeatureTestResult};

pub const RUN_MANIFEST_FILE: &str = "run_manifest.json";

/// Matrices of one feature set, imputed and scaled per corpus.
#[derive(Debug, Clone)]
pub struct PreparedSet {
    pub set: FeatureSet,
    pub train: FeatureMatrix,
    /// `(corpus_id, matrix)` per evaluated test split.
    pub tests: Vec<(String, FeatureMatrix)>,
    /// Scaler of the training corpus, restricted to the used columns.
    pub scaler: Option<RobustScalerParams>,
    pub selection: Option<Vec<FeatureTestResult>>,
}

/// Speaker-level rank tests of every column of the training split.
pub fn analyze_matrix(train: &FeatureMatrix) -> Result<Vec<FeatureTestResult>> {
    select_features(&train.speaker_means())
}

fn corpus_matrix(table: &FeatureTable, corpus: &Corpus, corpus_id: &str, speakers: &BTreeSet<String>) -> Result<FeatureMatrix> {
    let mut raw = RawRows { names: table.names.clone(), ..Default::default() };
    for s in corpus.segments.iter().filter(|s| s.corpus_id == corpus_id && speakers.contains(&s.speaker_id)) {
        let Some(values) = table.rows.get(&s.key) else { continue };
        let label = corpus
            .manifest
            .speaker(corpus_id, &s.speaker_id)
            .and_then(|r| r.label)
            .ok_or_else(|| Error::Integrity(format!("segment {} has no labelled speaker", s.key)))?;
        raw.rows.push(values.clone());
        raw.keys.push(s.key.clone());
        raw.speakers.push(s.speaker_id.clone());
        raw.labels.push(label);
    }
    if raw.rows.is_empty() {
        return Err(Error::Degenerate(format!("{}: corpus {corpus_id} has no segments with features", table.set)));
    }
    let all: Vec<usize> = (0..raw.rows.len()).collect();
    raw.impute(&raw.column_medians(&all))
}

fn splits_for(cfg: &RunConfig, corpus: &Corpus) -> Result<Vec<DatasetSplit>> {
    let splits = make_splits(&corpus.manifest.speakers, &SplitPolicy { train_corpus: cfg.train_corpus.clone() })?;
    if !splits.iter().any(|s| s.name == SplitName::Test && s.corpus_id == cfg.train_corpus) {
        return Err(Error::Degenerate(format!("corpus {} has no test partition", cfg.train_corpus)));
    }
    if cfg.task.evaluates_second_corpus() && !splits.iter().any(|s| s.corpus_id != cfg.train_corpus) {
        return Err(Error::Degenerate(format!("task {} needs a second corpus besides {}", cfg.task, cfg.train_corpus)));
    }
    Ok(splits)
}

/// Builds the training and test matrices of one set. Imputation medians and
/// robust scalers are fitted per corpus over all of its speakers; selection
/// tasks keep only the columns passing the rank test on the training split.
pub fn prepare_set(cfg: &RunConfig, corpus: &Corpus, splits: &[DatasetSplit], table: &FeatureTable) -> Result<PreparedSet> {
    let mut by_corpus: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();
    for s in splits {
        by_corpus.entry(&s.corpus_id).or_default().extend(s.speaker_ids.iter().cloned());
    }
    let mut scaled: BTreeMap<&str, (Option<RobustScalerParams>, FeatureMatrix)> = BTreeMap::new();
    for (&cid, speakers) in &by_corpus {
        if cid != cfg.train_corpus && !cfg.task.evaluates_second_corpus() {
            continue;
        }
        let m = corpus_matrix(table, corpus, cid, speakers)?;
        let entry = if cfg.robust_scaling {
            let (p, m) = fit_transform(&m, cid)?;
            (Some(p), m)
        } else {
            (None, m)
        };
        scaled.insert(cid, entry);
    }
    let scaler = scaled[cfg.train_corpus.as_str()].0.clone();
    let mut train = None;
    let mut tests = Vec::new();
    for s in splits {
        let Some((_, m)) = scaled.get(s.corpus_id.as_str()) else { continue };
        let part = m.filter_speakers(&s.speaker_ids);
        if part.n_rows() == 0 {
            return Err(Error::Degenerate(format!("{}: {:?} split of {} has no rows", table.set, s.name, s.corpus_id)));
        }
        match s.name {
            SplitName::Train => train = Some(part),
            SplitName::Test => tests.push((s.corpus_id.clone(), part)),
        }
    }
    let mut train = train.ok_or_else(|| Error::Degenerate(format!("corpus {} has no training split", cfg.train_corpus)))?;
    let mut scaler = scaler;
    let mut selection = None;
    if cfg.task.uses_selection() {
        let results = analyze_matrix(&train)?;
        let keep = selected_names(&results);
        if keep.is_empty() {
            return Err(Error::Degenerate(format!(
                "{}: no feature of the training split passes p < 0.05 and r >= 0.30; task {} aborted",
                table.set, cfg.task
            )));
        }
        info!("{}: selected {}", table.set, keep.join(", "));
        train = train.select_columns(&keep)?;
        for (_, m) in tests.iter_mut() {
            *m = m.select_columns(&keep)?;
        }
        scaler = scaler.map(|p| p.select(&keep)).transpose()?;
        selection = Some(results);
    }
    Ok(PreparedSet { set: table.set, train, tests, scaler, selection })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub feature_set: FeatureSet,
    pub family: ModelFamily,
    pub hyper_parameters: String,
    pub cv_mean_uar: f64,
    pub class_weights: ClassWeights,
    pub single_class_folds: Vec<usize>,
    pub n_features: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub name: SplitName,
    pub corpus_id: String,
    pub n_speakers: usize,
}

/// Everything needed to trace a run back to its inputs. Contains no
/// timestamps, so equal runs write equal manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub task: TaskId,
    pub config_hash: String,
    pub seed: u64,
    pub config: RunConfig,
    pub dropped_missing_score: usize,
    pub n_segments: usize,
    pub splits: Vec<SplitRecord>,
    pub models: Vec<ModelRecord>,
    pub selected_features: BTreeMap<String, Vec<String>>,
    pub reports: Vec<String>,
}

pub fn task_dir(cfg: &RunConfig) -> PathBuf {
    cfg.paths.output_dir.join(format!("task_{}", cfg.task))
}

fn model_path(dir: &Path, set: FeatureSet, family: ModelFamily) -> PathBuf {
    dir.join("models").join(format!("{set}_{family}.json"))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Serde(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn mkdir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

/// Loaded corpus, splits and prepared matrices of every set of the task.
pub struct Prepared {
    pub corpus: Corpus,
    pub splits: Vec<DatasetSplit>,
    pub sets: Vec<PreparedSet>,
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let corpus = load_corpus(cfg)?;
    let splits = splits_for(cfg, &corpus)?;
    let tables = extract(cfg, &corpus, &cfg.task_feature_sets())?;
    let sets = tables.iter().map(|t| prepare_set(cfg, &corpus, &splits, t)).collect::<Result<_>>()?;
    Ok(Prepared { corpus, splits, sets })
}

/// Grid search and refit for every (set, family); models and per-point
/// validation scores are written under `<task dir>/models`.
pub fn train_stage(cfg: &RunConfig, prepared: &Prepared) -> Result<Vec<(TrainedModel, GridSearchReport)>> {
    let dir = task_dir(cfg);
    mkdir(&dir.join("models"))?;
    let opts = cfg.train_options();
    let mut out = Vec::new();
    for p in &prepared.sets {
        let plan = CvPlan::new(&p.train, cfg.cv_folds, cfg.seed)?;
        plan.audit(&p.train)?;
        for &family in &cfg.model_families {
            let grid = HyperGrid::new(family, cfg.grid);
            let started = std::time::Instant::now();
            let (mut model, report) = train(&grid, &p.train, &plan, &opts)?;
            info!(
                "{} {}: best {} (CV UAR {:.1}) in {:.1?}",
                p.set,
                family,
                model.hyper_parameters.describe(),
                report.points[report.best].mean_uar,
                started.elapsed()
            );
            model.scaler = p.scaler.clone();
            model.save(&model_path(&dir, p.set, family))?;
            write_json(&dir.join("models").join(format!("{}_{family}_grid.json", p.set)), &report)?;
            out.push((model, report));
        }
    }
    Ok(out)
}

pub fn evaluate_stage(cfg: &RunConfig, prepared: &Prepared, models: &[TrainedModel]) -> Result<Vec<EvalReport>> {
    let hash = cfg.hash();
    let mut reports = Vec::new();
    for p in &prepared.sets {
        for &family in &cfg.model_families {
            let model = models
                .iter()
                .find(|m| m.family == family && m.feature_names == p.train.names)
                .ok_or_else(|| Error::Integrity(format!("no trained {family} model for {}", p.set)))?;
            for (corpus_id, test) in &p.tests {
                let scores = model.score(test)?;
                let preds = aggregate_by_speaker(&test.speakers, &test.labels, &scores, cfg.aggregation)?;
                reports.push(EvalReport::from_predictions(
                    cfg.task,
                    p.set.as_str(),
                    family.as_str(),
                    corpus_id,
                    test.names.clone(),
                    model.hyper_parameters.describe(),
                    &preds,
                    cfg.n_bootstrap,
                    cfg.seed,
                    &hash,
                )?);
            }
        }
    }
    Ok(reports)
}

fn write_outputs(cfg: &RunConfig, prepared: &Prepared, trained: &[(TrainedModel, GridSearchReport)], reports: &[EvalReport]) -> Result<()> {
    let dir = task_dir(cfg);
    write_reports(&dir, reports)?;
    write_segment_table(&dir.join(SEGMENTS_FILE), &prepared.corpus.segments)?;
    let mut selected_features = BTreeMap::new();
    for p in &prepared.sets {
        if let Some(sel) = &p.selection {
            write_results(&dir.join(format!("selection_{}.tsv", p.set)), sel)?;
            selected_features.insert(p.set.to_string(), p.train.names.clone());
        }
    }
    let mut models = Vec::new();
    for (m, g) in trained {
        let set = prepared
            .sets
            .iter()
            .find(|p| p.train.names == m.feature_names)
            .map(|p| p.set)
            .ok_or_else(|| Error::Integrity("model without a matching feature set".into()))?;
        models.push(ModelRecord {
            feature_set: set,
            family: m.family,
            hyper_parameters: m.hyper_parameters.describe(),
            cv_mean_uar: g.points[g.best].mean_uar,
            class_weights: m.class_weights,
            single_class_folds: g.single_class_folds.clone(),
            n_features: m.feature_names.len(),
        });
    }
    let mut config = cfg.clone();
    config.paths.output_dir = PathBuf::new();
    config.paths.cache_dir = None;
    let manifest = RunManifest {
        task: cfg.task,
        config_hash: cfg.hash(),
        seed: cfg.seed,
        config,
        dropped_missing_score: prepared.corpus.manifest.dropped_missing_score,
        n_segments: prepared.corpus.segments.len(),
        splits: prepared
            .splits
            .iter()
            .map(|s| SplitRecord { name: s.name, corpus_id: s.corpus_id.clone(), n_speakers: s.speaker_ids.len() })
            .collect(),
        models,
        selected_features,
        reports: reports.iter().map(EvalReport::report_file_name).collect(),
    };
    write_json(&dir.join(RUN_MANIFEST_FILE), &manifest)
}

/// Trains and evaluates every (set, family) of the configured task and
/// writes reports, models, selection tables and the run manifest.
pub fn run_task(cfg: &RunConfig) -> Result<Vec<EvalReport>> {
    let prepared = prepare(cfg)?;
    let trained = train_stage(cfg, &prepared)?;
    let models: Vec<TrainedModel> = trained.iter().map(|(m, _)| m.clone()).collect();
    let reports = evaluate_stage(cfg, &prepared, &models)?;
    write_outputs(cfg, &prepared, &trained, &reports)?;
    Ok(reports)
}

/// Loads the models written by [`train_stage`] and evaluates them.
pub fn evaluate_saved(cfg: &RunConfig) -> Result<Vec<EvalReport>> {
    let prepared = prepare(cfg)?;
    let dir = task_dir(cfg);
    let mut models = Vec::new();
    for p in &prepared.sets {
        for &family in &cfg.model_families {
            models.push(TrainedModel::load(&model_path(&dir, p.set, family))?);
        }
    }
    let reports = evaluate_stage(cfg, &prepared, &models)?;
    write_reports(&dir, &reports)?;
    Ok(reports)
}

/// Speaker-level rank tests of every non-embedding set on the training
/// split, written as `analysis/selection_<set>.tsv`.
pub fn analyze(cfg: &RunConfig) -> Result<Vec<(FeatureSet, Vec<FeatureTestResult>)>> {
    let corpus = load_corpus(cfg)?;
    let splits = splits_for(cfg, &corpus)?;
    let sets: Vec<FeatureSet> = cfg.feature_sets.iter().copied().filter(|s| !s.is_embedding()).collect();
    let tables = extract(cfg, &corpus, &sets)?;
    let plain = RunConfig { task: TaskId::A, ..cfg.clone() };
    let dir = cfg.paths.output_dir.join("analysis");
    mkdir(&dir)?;
    let mut out = Vec::new();
    for t in &tables {
        let p = prepare_set(&plain, &corpus, &splits, t)?;
        let results = analyze_matrix(&p.train)?;
        write_results(&dir.join(format!("selection_{}.tsv", t.set)), &results)?;
        out.push((t.set, results));
    }
    Ok(out)
}
