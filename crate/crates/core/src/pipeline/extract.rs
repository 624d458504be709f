use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use crate::acoustic::{egemaps_names, praat_names, SegmentAnalysis};
use crate::audio::{load_wav, resample, vad_segments, AudioBuffer, TARGET_RATE};
use crate::corpus::{load_manifest, Manifest, SegmentStub};
use crate::error::{Error, Result};
use crate::features::{embedding_names, FeatureSet, FeatureVector};
use crate::ingest::ingest;
use crate::textfeat::{psycholing_names, psycholing_vector, TranscriptSegment};

pub const SEGMENTS_FILE: &str = "segments.tsv";

/// Manifest plus the analysis segments derived from it.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub manifest: Manifest,
    pub segments: Vec<SegmentStub>,
    manifest_bytes: Vec<u8>,
}

/// Per-segment values of one feature set; segments without data are absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    pub set: FeatureSet,
    pub names: Vec<String>,
    pub rows: BTreeMap<String, Vec<Option<f64>>>,
}

impl FeatureTable {
    fn new(set: FeatureSet, names: Vec<String>) -> Self {
        FeatureTable { set, names, rows: BTreeMap::new() }
    }

    fn insert(&mut self, key: &str, v: FeatureVector) -> Result<()> {
        if v.names != self.names {
            return Err(Error::Integrity(format!("{}: segment {key} has a different feature inventory", self.set)));
        }
        self.rows.insert(key.to_string(), v.values);
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    digest: String,
    table: FeatureTable,
}

fn load_audio(path: &Path) -> Result<AudioBuffer> {
    let buf = load_wav(path)?;
    Ok(if buf.sample_rate() == TARGET_RATE { buf } else { resample(&buf, TARGET_RATE) })
}

/// Loads the manifest and splits span-less recordings into VAD segments
/// keyed `<row key>_<nnn>`.
pub fn load_corpus(cfg: &RunConfig) -> Result<Corpus> {
    let path = &cfg.paths.manifest;
    let manifest_bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let manifest = load_manifest(path)?;
    let expanded: Vec<Vec<SegmentStub>> = manifest
        .segments
        .par_iter()
        .map(|s| {
            let Some(audio) = s.audio_path.as_ref().filter(|_| cfg.resegment && s.start_s.is_none() && s.end_s.is_none())
            else {
                return Ok(vec![s.clone()]);
            };
            let buf = load_audio(audio)?;
            let sr = buf.sample_rate() as f64;
            let found = vad_segments(&buf, &cfg.vad)?;
            if found.is_empty() {
                warn!("{}: no speech found in {}", s.key, audio.display());
            }
            Ok(found
                .iter()
                .enumerate()
                .map(|(j, seg)| SegmentStub {
                    key: format!("{}_{j:03}", s.key),
                    start_s: Some(seg.start_sample as f64 / sr),
                    end_s: Some(seg.end_sample as f64 / sr),
                    ..s.clone()
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(Corpus { manifest, segments: expanded.into_iter().flatten().collect(), manifest_bytes })
}

pub fn write_segment_table(path: &Path, segments: &[SegmentStub]) -> Result<()> {
    let mut text = String::from("key\tcorpus_id\tspeaker_id\taudio_path\tstart_s\tend_s\n");
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_default();
    for s in segments {
        let audio = s.audio_path.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let _ = writeln!(
            text,
            "{}\t{}\t{}\t{audio}\t{}\t{}",
            s.key,
            s.corpus_id,
            s.speaker_id,
            opt(s.start_s),
            opt(s.end_s)
        );
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Digest of everything a computed set depends on.
fn input_digest(cfg: &RunConfig, corpus: &Corpus, set: FeatureSet) -> Result<String> {
    let mut h = Sha256::new();
    h.update(set.as_str().as_bytes());
    h.update(&corpus.manifest_bytes);
    let mut files: Vec<&PathBuf> = match set {
        FeatureSet::Praat | FeatureSet::Egemaps => {
            h.update(serde_json::to_vec(&(cfg.resegment, &cfg.vad)).map_err(|e| Error::Serde(e.to_string()))?);
            corpus.segments.iter().filter_map(|s| s.audio_path.as_ref()).collect()
        }
        FeatureSet::Psycholing => {
            h.update(serde_json::to_vec(&(&cfg.languages, &cfg.paths.lexicons)).map_err(|e| Error::Serde(e.to_string()))?);
            let mut f: Vec<&PathBuf> = corpus.segments.iter().filter_map(|s| s.transcript_path.as_ref()).collect();
            f.extend(cfg.paths.lexicons.values());
            f
        }
        _ => Vec::new(),
    };
    files.sort();
    files.dedup();
    for f in files {
        h.update(f.to_string_lossy().as_bytes());
        h.update(std::fs::read(f).map_err(|e| Error::io(f, e))?);
    }
    Ok(hex::encode(h.finalize()))
}

fn cache_path(cfg: &RunConfig, set: FeatureSet) -> PathBuf {
    cfg.cache_dir().join(format!("{}.json", set.as_str()))
}

fn read_cache(cfg: &RunConfig, set: FeatureSet, digest: &str) -> Option<FeatureTable> {
    let path = cache_path(cfg, set);
    let text = std::fs::read_to_string(&path).ok()?;
    match serde_json::from_str::<CacheEntry>(&text) {
        Ok(e) if e.digest == digest => {
            info!("{set}: cache hit at {}", path.display());
            Some(e.table)
        }
        Ok(_) => {
            warn!("{set}: cache at {} is stale, recomputing", path.display());
            None
        }
        Err(_) => {
            warn!("{set}: unreadable cache at {}, recomputing", path.display());
            None
        }
    }
}

fn write_cache(cfg: &RunConfig, table: &FeatureTable, digest: &str) -> Result<()> {
    let dir = cfg.cache_dir();
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let path = cache_path(cfg, table.set);
    let entry = CacheEntry { digest: digest.to_string(), table: table.clone() };
    let text = serde_json::to_string(&entry).map_err(|e| Error::Serde(e.to_string()))?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Praat and eGeMAPS-style tables, sharing one analysis per segment. Each
/// recording is decoded once.
fn acoustic_tables(corpus: &Corpus, want: &[FeatureSet]) -> Result<Vec<FeatureTable>> {
    let mut by_file: BTreeMap<&Path, Vec<&SegmentStub>> = BTreeMap::new();
    let mut missing = 0usize;
    for s in &corpus.segments {
        match &s.audio_path {
            Some(p) => by_file.entry(p.as_path()).or_default().push(s),
            None => missing += 1,
        }
    }
    if missing > 0 {
        warn!("{missing} segments have no audio and get no acoustic features");
    }
    let files: Vec<(&Path, Vec<&SegmentStub>)> = by_file.into_iter().collect();
    let results: Vec<Vec<(String, Vec<FeatureVector>)>> = files
        .par_iter()
        .map(|(path, segs)| {
            let buf = load_audio(path)?;
            segs.par_iter()
                .map(|s| {
                    let clip = match (s.start_s, s.end_s) {
                        (Some(a), Some(b)) => buf.slice_seconds(a, b),
                        (Some(a), None) => buf.slice_seconds(a, buf.duration_s()),
                        (None, Some(b)) => buf.slice_seconds(0.0, b),
                        (None, None) => buf.clone(),
                    };
                    let a = SegmentAnalysis::new(&clip);
                    let v = want
                        .iter()
                        .map(|set| match set {
                            FeatureSet::Praat => a.praat(),
                            _ => a.egemaps(),
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Ok((s.key.clone(), v))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut tables: Vec<FeatureTable> = want
        .iter()
        .map(|&set| {
            let names = if set == FeatureSet::Praat { praat_names() } else { egemaps_names() };
            FeatureTable::new(set, names)
        })
        .collect();
    for (key, vectors) in results.into_iter().flatten() {
        for (t, v) in tables.iter_mut().zip(vectors) {
            t.insert(&key, v)?;
        }
    }
    Ok(tables)
}

fn psycholing_table(cfg: &RunConfig, corpus: &Corpus) -> Result<FeatureTable> {
    let mut lexicons = BTreeMap::new();
    for s in &corpus.segments {
        let lang = cfg.language_of(&s.corpus_id);
        if let std::collections::btree_map::Entry::Vacant(e) = lexicons.entry(lang.as_str()) {
            e.insert(cfg.lexicon(lang)?);
        }
    }
    let with_text: Vec<(&SegmentStub, &PathBuf)> =
        corpus.segments.iter().filter_map(|s| s.transcript_path.as_ref().map(|p| (s, p))).collect();
    if with_text.len() < corpus.segments.len() {
        warn!("{} segments have no transcript and get no psycholinguistic features", corpus.segments.len() - with_text.len());
    }
    let vectors = with_text
        .par_iter()
        .map(|(s, p)| {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(*p, e))?;
            let lang = cfg.language_of(&s.corpus_id);
            let seg = TranscriptSegment { speaker_id: s.speaker_id.clone(), text, language: lang };
            Ok((s.key.clone(), psycholing_vector(&seg, &lexicons[lang.as_str()])?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = FeatureTable::new(FeatureSet::Psycholing, psycholing_names());
    for (k, v) in vectors {
        t.insert(&k, v)?;
    }
    Ok(t)
}

fn sidecar_table(corpus: &Corpus, set: FeatureSet) -> Result<FeatureTable> {
    let mut by_dir: BTreeMap<&Path, Vec<String>> = BTreeMap::new();
    for s in &corpus.segments {
        if let Some(d) = &s.sidecar_dir {
            by_dir.entry(d.as_path()).or_default().push(s.key.clone());
        }
    }
    let mut t = FeatureTable::new(set, embedding_names(set));
    for (dir, keys) in by_dir {
        let (vectors, _) = ingest(dir, &keys, set)?;
        for (k, v) in vectors {
            t.insert(&k, v.into_feature_vector())?;
        }
    }
    Ok(t)
}

/// One table per requested set, in request order. Computed sets go through
/// the cache in `cfg.cache_dir()`; sidecar sets are read directly.
pub fn extract(cfg: &RunConfig, corpus: &Corpus, sets: &[FeatureSet]) -> Result<Vec<FeatureTable>> {
    let mut done: BTreeMap<FeatureSet, FeatureTable> = BTreeMap::new();
    let mut digests = BTreeMap::new();
    let mut acoustic_todo = Vec::new();
    for &set in sets {
        if set.is_sidecar() || done.contains_key(&set) {
            continue;
        }
        let digest = input_digest(cfg, corpus, set)?;
        match read_cache(cfg, set, &digest) {
            Some(t) => {
                done.insert(set, t);
            }
            None if set == FeatureSet::Psycholing => {
                let t = psycholing_table(cfg, corpus)?;
                write_cache(cfg, &t, &digest)?;
                done.insert(set, t);
            }
            None => acoustic_todo.push(set),
        }
        digests.insert(set, digest);
    }
    if !acoustic_todo.is_empty() {
        let started = std::time::Instant::now();
        for t in acoustic_tables(corpus, &acoustic_todo)? {
            write_cache(cfg, &t, &digests[&t.set])?;
            done.insert(t.set, t);
        }
        info!("acoustic analysis of {} segments took {:.1?}", corpus.segments.len(), started.elapsed());
    }
    sets.iter()
        .map(|&set| match done.get(&set) {
            Some(t) => Ok(t.clone()),
            None => sidecar_table(corpus, set),
        })
        .collect()
}
