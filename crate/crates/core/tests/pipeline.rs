use std::collections::BTreeSet;
use std::path::Path;

use depscreen::evalreport::TaskId;
use depscreen::features::FeatureSet;
use depscreen::modeling::{GridKind, ModelFamily};
use depscreen::pipeline::task::RUN_MANIFEST_FILE;
use depscreen::pipeline::{
    analyze, evaluate_saved, run_task, task_dir, AudioSpec, RunConfig, RunManifest, SynthSpec, TextSpec, CORPUS_A,
    CORPUS_B,
};
use depscreen::stats::selected_names;
use depscreen::textfeat::Language;
use depscreen::Error;

fn small_spec() -> SynthSpec {
    SynthSpec {
        n_train: 48,
        n_train_depressed: 16,
        n_test_a: 14,
        n_test_a_depressed: 5,
        n_b: 14,
        n_b_depressed: 4,
        segments_per_speaker: 3,
        audio: Some(AudioSpec::default()),
        text: Some(TextSpec::default()),
        embedding_shift: Some(1.5),
        ..SynthSpec::separable()
    }
}

fn config(dir: &Path, spec: &SynthSpec, task: TaskId, sets: &[FeatureSet]) -> RunConfig {
    let manifest = spec.generate().unwrap().write(&dir.join("corpus")).unwrap();
    let mut cfg = RunConfig {
        task,
        grid: GridKind::Quick,
        feature_sets: sets.to_vec(),
        n_bootstrap: 200,
        ..RunConfig::default()
    };
    cfg.languages.insert(CORPUS_B.into(), Language::De);
    cfg.paths.manifest = manifest;
    cfg.paths.output_dir = dir.join("out");
    cfg
}

fn manifest(cfg: &RunConfig) -> RunManifest {
    serde_json::from_str(&std::fs::read_to_string(task_dir(cfg).join(RUN_MANIFEST_FILE)).unwrap()).unwrap()
}

#[test]
fn task_a_reports_every_set_and_family() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &small_spec(), TaskId::A, &FeatureSet::ALL);
    let reports = run_task(&cfg).unwrap();
    assert_eq!(reports.len(), FeatureSet::ALL.len() * ModelFamily::ALL.len());
    for r in &reports {
        assert_eq!(r.test_corpus, CORPUS_A);
        assert_eq!(r.n_speakers, 14);
        assert!(task_dir(&cfg).join(r.report_file_name()).is_file(), "{}", r.report_file_name());
        assert!(r.ci_low <= r.uar_pct && r.uar_pct <= r.ci_high);
    }
    let m = manifest(&cfg);
    assert_eq!(m.models.len(), 18);
    assert_eq!(m.config_hash, cfg.hash());
    // The planted SER effect is near separable.
    let ser = reports.iter().filter(|r| r.feature_set == "ser_dims");
    assert!(ser.map(|r| r.uar_pct).fold(0.0, f64::max) >= 90.0);
}

#[test]
fn second_corpus_tasks_report_both_corpora() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path(), &small_spec(), TaskId::B, &[FeatureSet::SerDims]);
    cfg.model_families = vec![ModelFamily::Rf];
    let reports = run_task(&cfg).unwrap();
    let corpora: BTreeSet<&str> = reports.iter().map(|r| r.test_corpus.as_str()).collect();
    assert_eq!(corpora, BTreeSet::from([CORPUS_A, CORPUS_B]));
    let b = reports.iter().find(|r| r.test_corpus == CORPUS_B).unwrap();
    assert_eq!(b.n_speakers, 14);
}

#[test]
fn selection_tasks_train_on_the_analysis_selection() {
    let dir = tempfile::tempdir().unwrap();
    let sets = [FeatureSet::SerDims, FeatureSet::Psycholing, FeatureSet::Wav2vec2];
    let mut cfg = config(dir.path(), &small_spec(), TaskId::CA, &sets);
    cfg.model_families = vec![ModelFamily::Svm];

    let analysis = analyze(&cfg).unwrap();
    let reports = run_task(&cfg).unwrap();
    let m = manifest(&cfg);
    // Embedding sets are never selected from.
    assert!(analysis.iter().all(|(s, _)| !s.is_embedding()));
    assert!(reports.iter().all(|r| r.feature_set != "wav2vec2"));
    for (set, results) in &analysis {
        let picked = selected_names(results);
        assert!(!picked.is_empty(), "{set}");
        assert_eq!(m.selected_features[set.as_str()], picked, "{set}");
        let report = reports.iter().find(|r| r.feature_set == set.as_str()).unwrap();
        assert_eq!(report.features, picked);
    }
}

#[test]
fn c_b_on_planted_ser_keeps_only_valence() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path(), &SynthSpec::default(), TaskId::CB, &[FeatureSet::SerDims]);
    cfg.model_families = vec![ModelFamily::Svm];
    let reports = run_task(&cfg).unwrap();
    assert_eq!(reports.len(), 2);
    for r in &reports {
        assert_eq!(r.features, ["valence"]);
    }
}

#[test]
fn empty_selection_is_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SynthSpec { seed: 5, ..SynthSpec::null() };
    let mut cfg = config(dir.path(), &spec, TaskId::CA, &[FeatureSet::SerDims]);
    cfg.model_families = vec![ModelFamily::Rf];
    let err = run_task(&cfg).unwrap_err();
    assert!(matches!(err, Error::Degenerate(_)), "{err}");
    assert_eq!(err.exit_code(), 4);
}

#[test]
fn cached_rerun_and_saved_models_reproduce_reports() {
    let dir = tempfile::tempdir().unwrap();
    let sets = [FeatureSet::SerDims, FeatureSet::Praat, FeatureSet::Psycholing];
    let mut cfg = config(dir.path(), &small_spec(), TaskId::A, &sets);
    cfg.model_families = vec![ModelFamily::Gbt];

    let first = run_task(&cfg).unwrap();
    // Sidecar sets are read directly; computed sets are cached.
    for set in sets {
        assert_eq!(cfg.cache_dir().join(format!("{set}.json")).is_file(), set != FeatureSet::SerDims, "{set}");
    }
    let cached = run_task(&cfg).unwrap();
    assert_eq!(first, cached);
    assert_eq!(evaluate_saved(&cfg).unwrap(), first);
}

#[test]
fn every_oversampling_mode_runs() {
    use depscreen::pipeline::OversampleMode;
    let dir = tempfile::tempdir().unwrap();
    let base = config(dir.path(), &small_spec(), TaskId::A, &[FeatureSet::SerDims]);
    for mode in [OversampleMode::Speaker, OversampleMode::Row, OversampleMode::None] {
        let mut cfg = base.clone();
        cfg.oversample = mode;
        cfg.model_families = vec![ModelFamily::Rf];
        cfg.paths.output_dir = dir.path().join(format!("{mode:?}"));
        let reports = run_task(&cfg).unwrap();
        assert!(reports[0].uar_pct >= 90.0, "{mode:?}: {}", reports[0].uar_pct);
    }
}
