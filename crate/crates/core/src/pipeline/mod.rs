//! Configuration, synthetic corpora, cached feature extraction and the
//! four experimental tasks.

pub mod config;
pub mod extract;
pub mod synth;
pub mod task;

pub use config::{OversampleMode, Paths, RunConfig, OUTPUT_ENV};
pub use extract::{extract, load_corpus, Corpus, FeatureTable};
pub use synth::{shift_for_r, AudioSpec, SynthCorpus, SynthSpec, TextSpec, ValenceEffect, CORPUS_A, CORPUS_B};
pub use task::{analyze, analyze_matrix, evaluate_saved, prepare, prepare_set, run_task, task_dir, train_stage, PreparedSet, RunManifest};
