use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use depscreen::evalreport::{aligned_table, EvalReport, TaskId};
use depscreen::features::FeatureSet;
use depscreen::modeling::{GridKind, ModelFamily};
use depscreen::pipeline::{self, task, AudioSpec, RunConfig, SynthSpec, TextSpec, CORPUS_B};
use depscreen::stats::selected_names;
use depscreen::textfeat::Language;
use depscreen::{Error, Result};

#[derive(Parser)]
#[command(name = "depscreen", version, about = "Speech-based depressive-mood screening pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic corpus and a matching run config.
    Synth(SynthArgs),
    /// Segment recordings and compute (or refresh cached) feature tables.
    Extract(RunArgs),
    /// Rank-test every non-embedding feature on the training split.
    Analyze(RunArgs),
    /// Grid-search and fit models for the configured task.
    Train(RunArgs),
    /// Evaluate previously trained models.
    Evaluate(RunArgs),
    /// Train and evaluate in one go.
    RunTask(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// Reference speaker counts with a valence effect of r = 0.66.
    Default,
    /// Near-separable valence effect.
    Separable,
    /// No planted effect.
    Null,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "default")]
    preset: Preset,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    segments_per_speaker: Option<usize>,
    /// Also write pulse-train audio with planted F0 and jitter effects.
    #[arg(long)]
    audio: bool,
    /// Also write template transcripts with planted lexical effects.
    #[arg(long)]
    transcripts: bool,
    /// Also write embedding sidecars with this planted shift.
    #[arg(long)]
    embedding_shift: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, short)]
    config: PathBuf,
    #[arg(long, value_parser = parse_task)]
    task: Option<TaskId>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_grid)]
    grid: Option<GridKind>,
    /// Comma-separated feature sets.
    #[arg(long, value_delimiter = ',', value_parser = parse_set)]
    feature_sets: Option<Vec<FeatureSet>>,
    /// Comma-separated model families.
    #[arg(long, value_delimiter = ',', value_parser = parse_family)]
    models: Option<Vec<ModelFamily>>,
    #[arg(long)]
    n_bootstrap: Option<usize>,
    #[arg(long, env = pipeline::OUTPUT_ENV)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    no_robust_scaling: bool,
}

fn parse_task(s: &str) -> std::result::Result<TaskId, String> {
    s.parse()
}

fn parse_set(s: &str) -> std::result::Result<FeatureSet, String> {
    s.parse()
}

fn parse_family(s: &str) -> std::result::Result<ModelFamily, String> {
    s.parse()
}

fn parse_grid(s: &str) -> std::result::Result<GridKind, String> {
    match s {
        "full" => Ok(GridKind::Full),
        "quick" => Ok(GridKind::Quick),
        other => Err(format!("unknown grid {other:?}, expected full or quick")),
    }
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(t) = self.task {
            cfg.task = t;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(g) = self.grid {
            cfg.grid = g;
        }
        if let Some(fs) = &self.feature_sets {
            cfg.feature_sets = fs.clone();
        }
        if let Some(m) = &self.models {
            cfg.model_families = m.clone();
        }
        if let Some(n) = self.n_bootstrap {
            cfg.n_bootstrap = n;
        }
        if let Some(o) = &self.output_dir {
            cfg.paths.output_dir = o.clone();
        }
        if self.no_robust_scaling {
            cfg.robust_scaling = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn synth(a: &SynthArgs) -> Result<()> {
    let mut spec = match a.preset {
        Preset::Default => SynthSpec::default(),
        Preset::Separable => SynthSpec::separable(),
        Preset::Null => SynthSpec::null(),
    };
    spec.seed = a.seed;
    if let Some(n) = a.segments_per_speaker {
        spec.segments_per_speaker = n;
    }
    if a.audio {
        spec.audio = Some(AudioSpec::default());
    }
    if a.transcripts {
        spec.text = Some(TextSpec::default());
    }
    spec.embedding_shift = a.embedding_shift;
    let manifest = spec.generate()?.write(&a.out)?;

    let mut cfg = RunConfig::default();
    cfg.paths.manifest = PathBuf::from(manifest.file_name().expect("manifest file name"));
    cfg.languages.insert(CORPUS_B.into(), Language::De);
    cfg.feature_sets = [FeatureSet::SerDims]
        .into_iter()
        .chain(spec.embedding_shift.map(|_| [FeatureSet::Wav2vec2, FeatureSet::Roberta]).into_iter().flatten())
        .chain(spec.audio.map(|_| [FeatureSet::Praat, FeatureSet::Egemaps]).into_iter().flatten())
        .chain(spec.text.map(|_| FeatureSet::Psycholing))
        .collect();
    let path = a.out.join("config.toml");
    std::fs::write(&path, cfg.to_toml()?).map_err(|e| Error::io(&path, e))?;
    println!("wrote {} and {}", manifest.display(), path.display());
    Ok(())
}

fn print_reports(reports: &[EvalReport], dir: &Path) {
    print!("{}", aligned_table(reports));
    println!("reports written to {}", dir.display());
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => synth(&a),
        Command::Extract(a) => {
            let cfg = a.config()?;
            let corpus = pipeline::load_corpus(&cfg)?;
            let tables = pipeline::extract(&cfg, &corpus, &cfg.feature_sets)?;
            std::fs::create_dir_all(&cfg.paths.output_dir).map_err(|e| Error::io(&cfg.paths.output_dir, e))?;
            let seg_path = cfg.paths.output_dir.join(pipeline::extract::SEGMENTS_FILE);
            pipeline::extract::write_segment_table(&seg_path, &corpus.segments)?;
            for t in tables {
                println!("{:<11} {:>5} features {:>7} segments", t.set, t.names.len(), t.rows.len());
            }
            Ok(())
        }
        Command::Analyze(a) => {
            let cfg = a.config()?;
            for (set, results) in pipeline::analyze(&cfg)? {
                let sel = selected_names(&results);
                println!("{set}: {} of {} selected: {}", sel.len(), results.len(), sel.join(", "));
            }
            Ok(())
        }
        Command::Train(a) => {
            let cfg = a.config()?;
            let prepared = pipeline::prepare(&cfg)?;
            for (m, g) in pipeline::train_stage(&cfg, &prepared)? {
                println!("{} {}: CV UAR {:.1}", m.family, m.hyper_parameters.describe(), g.points[g.best].mean_uar);
            }
            Ok(())
        }
        Command::Evaluate(a) => {
            let cfg = a.config()?;
            let reports = pipeline::evaluate_saved(&cfg)?;
            print_reports(&reports, &task::task_dir(&cfg));
            Ok(())
        }
        Command::RunTask(a) => {
            let cfg = a.config()?;
            info!("task {} with config hash {}", cfg.task, cfg.hash());
            let reports = pipeline::run_task(&cfg)?;
            print_reports(&reports, &task::task_dir(&cfg));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
