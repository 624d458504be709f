use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::audio::VadConfig;
use crate::corpus::Granularity;
use crate::error::{Error, Result};
use crate::evalreport::{AggregationRule, TaskId, DEFAULT_BOOTSTRAP_ITERATIONS};
use crate::features::FeatureSet;
use crate::modeling::{GridKind, ModelFamily, TrainOptions, DEFAULT_FOLDS};
use crate::textfeat::{Language, Lexicon};

/// Overrides `paths.output_dir` of every loaded config.
pub const OUTPUT_ENV: &str = "DEPSCREEN_OUTPUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OversampleMode {
    #[default]
    Speaker,
    Row,
    None,
}

impl OversampleMode {
    pub fn granularity(self) -> Option<Granularity> {
        match self {
            OversampleMode::Speaker => Some(Granularity::Speaker),
            OversampleMode::Row => Some(Granularity::Row),
            OversampleMode::None => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub manifest: PathBuf,
    pub output_dir: PathBuf,
    /// Defaults to `<output_dir>/cache`.
    pub cache_dir: Option<PathBuf>,
    /// Lexicon file per language code; built-in lexicons otherwise.
    pub lexicons: BTreeMap<String, PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            manifest: PathBuf::from("manifest.csv"),
            output_dir: PathBuf::from("out"),
            cache_dir: None,
            lexicons: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub task: TaskId,
    pub feature_sets: Vec<FeatureSet>,
    pub model_families: Vec<ModelFamily>,
    pub grid: GridKind,
    pub seed: u64,
    pub aggregation: AggregationRule,
    pub n_bootstrap: usize,
    pub cv_folds: usize,
    pub oversample: OversampleMode,
    pub class_weighting: bool,
    pub robust_scaling: bool,
    /// Corpus whose train and dev partitions form the training split.
    pub train_corpus: String,
    /// Transcript language per corpus id; English when absent.
    pub languages: BTreeMap<String, Language>,
    /// Split span-less recordings with the VAD.
    pub resegment: bool,
    pub vad: VadConfig,
    pub paths: Paths,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            task: TaskId::A,
            feature_sets: FeatureSet::ALL.to_vec(),
            model_families: ModelFamily::ALL.to_vec(),
            grid: GridKind::Full,
            seed: 42,
            aggregation: AggregationRule::MeanScore,
            n_bootstrap: DEFAULT_BOOTSTRAP_ITERATIONS,
            cv_folds: DEFAULT_FOLDS,
            oversample: OversampleMode::Speaker,
            class_weighting: true,
            robust_scaling: true,
            train_corpus: "daic".into(),
            languages: BTreeMap::new(),
            resegment: true,
            vad: VadConfig::default(),
            paths: Paths::default(),
        }
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("{}: {e}", origin.display())))?;
        let base = origin.parent().unwrap_or(Path::new("."));
        cfg.paths.manifest = resolve(base, &cfg.paths.manifest);
        cfg.paths.output_dir = resolve(base, &cfg.paths.output_dir);
        cfg.paths.cache_dir = cfg.paths.cache_dir.map(|p| resolve(base, &p));
        for p in cfg.paths.lexicons.values_mut() {
            *p = resolve(base, p);
        }
        if let Ok(out) = std::env::var(OUTPUT_ENV) {
            if !out.is_empty() {
                cfg.paths.output_dir = PathBuf::from(out);
            }
        }
        Ok(cfg)
    }

    /// Reads, resolves and validates a config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let cfg = Self::from_toml(&text, path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_sets.is_empty() || self.model_families.is_empty() {
            return Err(Error::Config("feature_sets and model_families must be non-empty".into()));
        }
        if self.cv_folds < 2 {
            return Err(Error::Config(format!("cv_folds must be at least 2, got {}", self.cv_folds)));
        }
        if self.n_bootstrap == 0 {
            return Err(Error::Config("n_bootstrap must be positive".into()));
        }
        self.vad.validate().map_err(|e| Error::Config(e.to_string()))?;
        if !self.paths.manifest.is_file() {
            return Err(Error::Config(format!("manifest {} does not exist", self.paths.manifest.display())));
        }
        for (lang, p) in &self.paths.lexicons {
            lang.parse::<Language>().map_err(|e| Error::Config(e.to_string()))?;
            if !p.is_file() {
                return Err(Error::Config(format!("lexicon {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    /// Feature sets the task actually uses: selection tasks skip the
    /// embedding sets.
    pub fn task_feature_sets(&self) -> Vec<FeatureSet> {
        self.feature_sets
            .iter()
            .copied()
            .filter(|fs| !(self.task.uses_selection() && fs.is_embedding()))
            .collect()
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.paths.cache_dir.clone().unwrap_or_else(|| self.paths.output_dir.join("cache"))
    }

    pub fn language_of(&self, corpus_id: &str) -> Language {
        self.languages.get(corpus_id).copied().unwrap_or(Language::En)
    }

    pub fn lexicon(&self, lang: Language) -> Result<Lexicon> {
        match self.paths.lexicons.get(lang.as_str()) {
            Some(p) => Lexicon::load(p, lang),
            None => Ok(Lexicon::builtin(lang)),
        }
    }

    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            seed: self.seed,
            oversample: self.oversample.granularity(),
            class_weighting: self.class_weighting,
            aggregation: self.aggregation,
        }
    }

    /// SHA-256 of the canonical JSON form. Output and cache locations do not
    /// influence results and are left out.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.paths.output_dir = PathBuf::new();
        c.paths.cache_dir = None;
        let json = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}
