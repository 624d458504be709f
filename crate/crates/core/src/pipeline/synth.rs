//! Seeded synthetic corpora with planted class effects. Real screening
//! corpora are access-restricted, so every end-to-end test runs on these.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as StdNormal};

use crate::audio::{write_wav, AudioBuffer, TARGET_RATE};
use crate::corpus::{segment_key, write_manifest, Instrument, Label, ManifestRow, Partition, Sex};
use crate::error::{Error, Result};
use crate::features::{embedding_names, FeatureSet};
use crate::ingest::{write_index, write_sidecar, SerDims, SidecarVector};
use crate::matrix::FeatureMatrix;
use crate::modeling::derive_seed;
use crate::stats::{mann_whitney, cohen_r};
use crate::textfeat::{Language, Lexicon, Tag};

pub const CORPUS_A: &str = "daic";
pub const CORPUS_B: &str = "commitment";

/// Leading dimensions of each embedding set that carry the planted shift.
pub const EMBEDDING_SHIFTED_DIMS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValenceEffect {
    None,
    /// Shift calibrated so the speaker-level effect size on the training
    /// split is `r` in expectation.
    TargetR(f64),
    /// Shift in standard deviations of speaker means.
    Shift(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AudioSpec {
    pub segment_s: f64,
    pub gap_s: f64,
    /// Log-F0 shift of depressed speakers, in semitones.
    pub f0_shift_semitones: f64,
    pub jitter: f64,
    pub jitter_depressed: f64,
}

impl Default for AudioSpec {
    fn default() -> Self {
        AudioSpec { segment_s: 0.8, gap_s: 0.4, f0_shift_semitones: -2.0, jitter: 0.005, jitter_depressed: 0.012 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TextSpec {
    pub tokens_per_segment: usize,
    pub negative: f64,
    pub negative_depressed: f64,
    pub first_person: f64,
    pub first_person_depressed: f64,
}

impl Default for TextSpec {
    fn default() -> Self {
        TextSpec {
            tokens_per_segment: 24,
            negative: 0.03,
            negative_depressed: 0.09,
            first_person: 0.05,
            first_person_depressed: 0.11,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_train: usize,
    pub n_train_depressed: usize,
    pub n_test_a: usize,
    pub n_test_a_depressed: usize,
    pub n_b: usize,
    pub n_b_depressed: usize,
    pub female_share: f64,
    pub segments_per_speaker: usize,
    pub speaker_sd: f64,
    pub segment_sd: f64,
    pub valence: ValenceEffect,
    /// Standardized shifts of depressed speakers.
    pub arousal_shift: f64,
    pub dominance_shift: f64,
    /// Corpus B values are `location + scale * x`.
    pub b_location: f64,
    pub b_scale: f64,
    pub audio: Option<AudioSpec>,
    pub text: Option<TextSpec>,
    /// Shift of the leading embedding dimensions; `None` writes no embeddings.
    pub embedding_shift: Option<f64>,
}

impl Default for SynthSpec {
    /// Speaker counts of the two corpora, a valence effect of r = 0.66 and
    /// no other planted effect.
    fn default() -> Self {
        SynthSpec {
            seed: 1,
            n_train: 135,
            n_train_depressed: 42,
            n_test_a: 44,
            n_test_a_depressed: 13,
            n_b: 50,
            n_b_depressed: 4,
            female_share: 59.0 / 135.0,
            segments_per_speaker: 20,
            speaker_sd: 1.0,
            segment_sd: 1.0,
            valence: ValenceEffect::TargetR(0.66),
            arousal_shift: 0.0,
            dominance_shift: 0.0,
            b_location: 0.0,
            b_scale: 1.0,
            audio: None,
            text: None,
            embedding_shift: None,
        }
    }
}

/// Standardized mean difference giving effect size `r` in expectation for
/// a rank test on `n_pos` versus `n_neg` normal samples.
pub fn shift_for_r(r: f64, n_pos: usize, n_neg: usize) -> f64 {
    let (a, b) = (n_pos as f64, n_neg as f64);
    let n = a + b;
    let sd_u = (a * b * (n + 1.0) / 12.0).sqrt();
    let auc = (0.5 + r * n.sqrt() * sd_u / (a * b)).min(1.0 - 1e-12);
    let z = StdNormal::new(0.0, 1.0).expect("unit normal").inverse_cdf(auc);
    2f64.sqrt() * z
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpeaker {
    pub corpus_id: String,
    pub speaker_id: String,
    pub sex: Sex,
    pub partition: Partition,
    pub instrument: Instrument,
    pub raw_score: u32,
    pub depressed: bool,
    /// Arousal, valence, dominance per segment.
    pub ser: Vec<[f64; 3]>,
    /// Stream index for the speaker's audio, text and embeddings.
    stream: u64,
}

impl SynthSpeaker {
    pub fn label(&self) -> Label {
        Label::from_positive(self.depressed)
    }

    pub fn key(&self, j: usize) -> String {
        segment_key(&self.corpus_id, &self.speaker_id, j)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthCorpus {
    pub spec: SynthSpec,
    /// Raw shift applied to valence of depressed speakers.
    pub valence_shift: f64,
    pub speakers: Vec<SynthSpeaker>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spec: SynthSpec,
    pub valence_shift: f64,
    pub target_r: Option<f64>,
    /// Speaker-level effect sizes of the SER dims on the training split.
    pub realized_r: BTreeMap<String, f64>,
    pub speakers_per_corpus: BTreeMap<String, usize>,
}

fn score_for(instrument: Instrument, depressed: bool, rng: &mut ChaCha8Rng) -> u32 {
    match (instrument, depressed) {
        (Instrument::Phq, true) => rng.gen_range(10..=24),
        (Instrument::Phq, false) => rng.gen_range(0..=9),
        (Instrument::Bdi, true) => rng.gen_range(20..=63),
        (Instrument::Bdi, false) => rng.gen_range(0..=19),
    }
}

struct Group<'a> {
    corpus: &'a str,
    prefix: &'a str,
    n: usize,
    n_dep: usize,
    test: bool,
}

impl SynthSpec {
    /// Counts above, with a near-separable valence effect and tight
    /// segment noise.
    pub fn separable() -> Self {
        SynthSpec { valence: ValenceEffect::Shift(6.0), segment_sd: 0.3, ..Self::default() }
    }

    pub fn null() -> Self {
        SynthSpec { valence: ValenceEffect::None, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let pairs = [
            (self.n_train, self.n_train_depressed),
            (self.n_test_a, self.n_test_a_depressed),
            (self.n_b, self.n_b_depressed),
        ];
        if pairs.iter().any(|&(n, d)| d > n) {
            return Err(Error::Validation("more depressed speakers than speakers".into()));
        }
        if self.n_train_depressed == 0 || self.n_train_depressed == self.n_train {
            return Err(Error::Validation("the training split needs both classes".into()));
        }
        if self.segments_per_speaker == 0 {
            return Err(Error::Validation("segments_per_speaker must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.female_share) || self.speaker_sd <= 0.0 || self.segment_sd < 0.0 || self.b_scale <= 0.0 {
            return Err(Error::Validation("invalid synthetic spread parameters".into()));
        }
        if let ValenceEffect::TargetR(r) = self.valence {
            if !(0.0..1.0).contains(&r) {
                return Err(Error::Validation(format!("target r {r} outside [0, 1)")));
            }
        }
        Ok(())
    }

    /// Standardized valence shift.
    pub fn valence_d(&self) -> f64 {
        match self.valence {
            ValenceEffect::None => 0.0,
            ValenceEffect::Shift(d) => d,
            ValenceEffect::TargetR(r) => shift_for_r(r, self.n_train_depressed, self.n_train - self.n_train_depressed),
        }
    }

    /// Standard deviation of a speaker's mean over its segments.
    pub fn speaker_mean_sd(&self) -> f64 {
        (self.speaker_sd.powi(2) + self.segment_sd.powi(2) / self.segments_per_speaker as f64).sqrt()
    }

    pub fn generate(&self) -> Result<SynthCorpus> {
        self.validate()?;
        let sd = self.speaker_mean_sd();
        let valence_shift = -self.valence_d() * sd;
        let shifts = [-self.arousal_shift * sd, valence_shift, -self.dominance_shift * sd];
        let spk = Normal::new(0.0, self.speaker_sd).expect("positive sd");
        let seg = Normal::new(0.0, self.segment_sd).expect("non-negative sd");

        let groups = [
            Group { corpus: CORPUS_A, prefix: "a", n: self.n_train, n_dep: self.n_train_depressed, test: false },
            Group { corpus: CORPUS_A, prefix: "t", n: self.n_test_a, n_dep: self.n_test_a_depressed, test: true },
            Group { corpus: CORPUS_B, prefix: "b", n: self.n_b, n_dep: self.n_b_depressed, test: true },
        ];
        let mut speakers = Vec::new();
        for (gi, g) in groups.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, 100, gi as u64));
            let mut depressed: Vec<bool> = (0..g.n).map(|i| i < g.n_dep).collect();
            depressed.shuffle(&mut rng);
            let n_female = (self.female_share * g.n as f64).round() as usize;
            let mut female: Vec<bool> = (0..g.n).map(|i| i < n_female).collect();
            female.shuffle(&mut rng);
            let is_b = g.corpus == CORPUS_B;
            let instrument = if is_b { Instrument::Bdi } else { Instrument::Phq };
            let n_dev = g.n / 4;
            for i in 0..g.n {
                let partition = match (is_b, g.test) {
                    (true, _) => Partition::All,
                    (false, true) => Partition::Test,
                    (false, false) if i < g.n - n_dev => Partition::Train,
                    (false, false) => Partition::Dev,
                };
                let dep = depressed[i];
                let centre: [f64; 3] = std::array::from_fn(|k| spk.sample(&mut rng) + if dep { shifts[k] } else { 0.0 });
                let ser = (0..self.segments_per_speaker)
                    .map(|_| {
                        std::array::from_fn(|k| {
                            let x = centre[k] + seg.sample(&mut rng);
                            if is_b {
                                self.b_location + self.b_scale * x
                            } else {
                                x
                            }
                        })
                    })
                    .collect();
                speakers.push(SynthSpeaker {
                    corpus_id: g.corpus.to_string(),
                    speaker_id: format!("{}{:03}", g.prefix, i),
                    sex: if female[i] { Sex::F } else { Sex::M },
                    partition,
                    instrument,
                    raw_score: score_for(instrument, dep, &mut rng),
                    depressed: dep,
                    ser,
                    stream: speakers.len() as u64,
                });
            }
        }
        Ok(SynthCorpus { spec: self.clone(), valence_shift, speakers })
    }
}

impl SynthCorpus {
    /// Segment-level SER rows of the speakers of `corpus_id` whose partition
    /// is in `partitions`.
    pub fn ser_matrix(&self, corpus_id: &str, partitions: &[Partition]) -> FeatureMatrix {
        let mut m = FeatureMatrix::new(embedding_names(FeatureSet::SerDims));
        for s in self.speakers.iter().filter(|s| s.corpus_id == corpus_id && partitions.contains(&s.partition)) {
            for (j, v) in s.ser.iter().enumerate() {
                m.push_row(s.key(j), &s.speaker_id, s.label(), v).expect("finite synthetic values");
            }
        }
        m
    }

    /// Training split of corpus A.
    pub fn train_matrix(&self) -> FeatureMatrix {
        self.ser_matrix(CORPUS_A, &[Partition::Train, Partition::Dev])
    }

    pub fn ground_truth(&self) -> Result<GroundTruth> {
        let means = self.train_matrix().speaker_means();
        let mut realized_r = BTreeMap::new();
        for (j, name) in means.names.iter().enumerate() {
            let col = means.column(j);
            let (a, b): (Vec<f64>, Vec<f64>) = {
                let mut a = Vec::new();
                let mut b = Vec::new();
                for (v, l) in col.iter().zip(&means.labels) {
                    if l.is_positive() { a.push(*v) } else { b.push(*v) }
                }
                (a, b)
            };
            let mw = mann_whitney(&a, &b)?;
            realized_r.insert(name.clone(), cohen_r(mw.z, means.n_rows()));
        }
        let mut speakers_per_corpus = BTreeMap::new();
        for s in &self.speakers {
            *speakers_per_corpus.entry(s.corpus_id.clone()).or_insert(0) += 1;
        }
        Ok(GroundTruth {
            spec: self.spec.clone(),
            valence_shift: self.valence_shift,
            target_r: match self.spec.valence {
                ValenceEffect::TargetR(r) => Some(r),
                _ => None,
            },
            realized_r,
            speakers_per_corpus,
        })
    }

    /// Writes `manifest.csv`, per-corpus sidecar directories, optional audio
    /// and transcripts, and `ground_truth.json` under `dir`. Returns the
    /// manifest path.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let mkdir = |p: &Path| std::fs::create_dir_all(p).map_err(|e| Error::io(p, e));
        mkdir(dir)?;
        let spec = &self.spec;
        for corpus in [CORPUS_A, CORPUS_B] {
            mkdir(&dir.join("sidecars").join(corpus))?;
        }
        if spec.audio.is_some() {
            mkdir(&dir.join("audio"))?;
        }
        if spec.text.is_some() {
            mkdir(&dir.join("transcripts"))?;
        }

        let rows: Vec<Vec<ManifestRow>> = self
            .speakers
            .par_iter()
            .map(|s| self.write_speaker(dir, s))
            .collect::<Result<_>>()?;
        let rows: Vec<ManifestRow> = rows.into_iter().flatten().collect();

        for corpus in [CORPUS_A, CORPUS_B] {
            let keys: Vec<String> = self
                .speakers
                .iter()
                .filter(|s| s.corpus_id == corpus)
                .flat_map(|s| (0..s.ser.len()).map(|j| s.key(j)))
                .collect();
            write_index(&dir.join("sidecars").join(corpus), &keys)?;
        }
        let manifest = dir.join("manifest.csv");
        write_manifest(&manifest, &rows)?;
        let truth = serde_json::to_string_pretty(&self.ground_truth()?).map_err(|e| Error::Serde(e.to_string()))?;
        let p = dir.join("ground_truth.json");
        std::fs::write(&p, truth).map_err(|e| Error::io(&p, e))?;
        Ok(manifest)
    }

    fn write_speaker(&self, dir: &Path, s: &SynthSpeaker) -> Result<Vec<ManifestRow>> {
        let spec = &self.spec;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 200, s.stream));
        let n = s.ser.len();
        let side_rel = PathBuf::from("sidecars").join(&s.corpus_id);
        let side_dir = dir.join(&side_rel);
        for (j, v) in s.ser.iter().enumerate() {
            let d = SerDims { arousal: v[0], valence: v[1], dominance: v[2] };
            write_sidecar(&side_dir, &s.key(j), &SidecarVector::from(d))?;
        }
        if let Some(shift) = spec.embedding_shift {
            let unit = Normal::new(0.0, 1.0).expect("unit normal");
            for set in [FeatureSet::Wav2vec2, FeatureSet::Roberta] {
                let centre: Vec<f64> = (0..set.dim())
                    .map(|k| {
                        let planted = if s.depressed && k < EMBEDDING_SHIFTED_DIMS { shift } else { 0.0 };
                        0.5 * unit.sample(&mut rng) + planted
                    })
                    .collect();
                for j in 0..n {
                    let values = centre.iter().map(|c| c + unit.sample(&mut rng)).collect();
                    write_sidecar(&side_dir, &s.key(j), &SidecarVector::new(set, values)?)?;
                }
            }
        }

        let spans = match &spec.audio {
            Some(a) => {
                let (buf, spans) = speaker_audio(a, s, &mut rng);
                let p = dir.join("audio").join(format!("{}.wav", s.speaker_id));
                write_wav(&p, &buf)?;
                spans.into_iter().map(Some).collect()
            }
            None => vec![None; n],
        };
        let mut transcripts = vec![None; n];
        if let Some(t) = &spec.text {
            let lang = if s.corpus_id == CORPUS_B { Language::De } else { Language::En };
            let lex = Lexicon::builtin(lang);
            let pools = WordPools::new(&lex);
            for (j, slot) in transcripts.iter_mut().enumerate() {
                let rel = PathBuf::from("transcripts").join(format!("{}.txt", s.key(j)));
                let text = pools.segment(t, s.depressed, &mut rng);
                let p = dir.join(&rel);
                std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
                *slot = Some(rel);
            }
        }
        Ok((0..n)
            .map(|j| ManifestRow {
                corpus_id: s.corpus_id.clone(),
                speaker_id: s.speaker_id.clone(),
                sex: s.sex,
                instrument: s.instrument,
                raw_score: Some(s.raw_score),
                partition: s.partition,
                audio_path: spans[j].map(|_| PathBuf::from("audio").join(format!("{}.wav", s.speaker_id))),
                start_s: spans[j].map(|sp: (f64, f64)| sp.0),
                end_s: spans[j].map(|sp| sp.1),
                transcript_path: transcripts[j].clone(),
                sidecar_dir: Some(side_rel.clone()),
            })
            .collect())
    }
}

/// Two-pole resonator at `freq` with bandwidth `bw`, unit gain at DC.
fn resonate(x: &mut [f64], freq: f64, bw: f64, sr: f64) {
    let r = (-PI * bw / sr).exp();
    let a1 = 2.0 * r * (2.0 * PI * freq / sr).cos();
    let a2 = -r * r;
    let g = 1.0 - a1 - a2;
    let (mut y1, mut y2) = (0.0, 0.0);
    for v in x.iter_mut() {
        let y = g * *v + a1 * y1 + a2 * y2;
        y2 = y1;
        y1 = y;
        *v = y;
    }
}

/// Vowel-like segment: Gaussian glottal pulses whose periods alternate by
/// `jitter`, shaped by three formant resonators.
pub fn vowel(f0: f64, jitter: f64, seconds: f64, sr: u32) -> Vec<f64> {
    let sr_f = sr as f64;
    let n = (seconds * sr_f) as usize;
    let mut x = vec![0.0; n];
    let sigma = 0.0004 * sr_f;
    let period = sr_f / f0;
    let mut t = 0.5 * period;
    let mut k = 0usize;
    while t < n as f64 {
        let lo = (t - 5.0 * sigma).max(0.0) as usize;
        let hi = ((t + 5.0 * sigma) as usize).min(n - 1);
        for (i, v) in x.iter_mut().enumerate().take(hi + 1).skip(lo) {
            let d = (i as f64 - t) / sigma;
            *v += (-0.5 * d * d).exp();
        }
        let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
        t += period * (1.0 + sign * jitter / 2.0);
        k += 1;
    }
    for (f, bw) in [(700.0, 400.0), (1220.0, 450.0), (2600.0, 500.0)] {
        resonate(&mut x, f, bw, sr_f);
    }
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    let ramp = (0.02 * sr_f) as usize;
    for (i, v) in x.iter_mut().enumerate() {
        let edge = i.min(n - 1 - i);
        let env = if edge < ramp { 0.5 - 0.5 * (PI * edge as f64 / ramp as f64).cos() } else { 1.0 };
        *v *= 0.5 * env / peak;
    }
    x
}

fn speaker_audio(a: &AudioSpec, s: &SynthSpeaker, rng: &mut ChaCha8Rng) -> (AudioBuffer, Vec<(f64, f64)>) {
    let sr = TARGET_RATE;
    let base = if s.sex == Sex::F { 210.0 } else { 120.0 };
    let shift = if s.depressed { a.f0_shift_semitones } else { 0.0 };
    let f0 = base * 2f64.powf((shift + rng.gen_range(-1.0..1.0)) / 12.0);
    let jitter = if s.depressed { a.jitter_depressed } else { a.jitter };
    let gap = (a.gap_s * sr as f64) as usize;
    let mut x: Vec<f64> = Vec::new();
    let mut spans = Vec::new();
    for _ in 0..s.ser.len() {
        x.extend(std::iter::repeat_n(0.0, gap));
        let start = x.len() as f64 / sr as f64;
        let seg_f0 = f0 * 2f64.powf(rng.gen_range(-0.3..0.3) / 12.0);
        x.extend(vowel(seg_f0, jitter, a.segment_s, sr));
        spans.push((start, x.len() as f64 / sr as f64));
    }
    x.extend(std::iter::repeat_n(0.0, gap));
    for v in x.iter_mut() {
        *v += rng.gen_range(-0.001..0.001);
    }
    (AudioBuffer::new(x, sr).expect("finite samples"), spans)
}

struct WordPools<'a> {
    negative: Vec<&'a str>,
    first_person: Vec<&'a str>,
    filler: Vec<&'a str>,
}

impl<'a> WordPools<'a> {
    fn new(lex: &'a Lexicon) -> Self {
        let mut filler: Vec<&str> = [Tag::Noun, Tag::Verb, Tag::Article, Tag::Preposition, Tag::Adjective, Tag::Conjunction]
            .iter()
            .flat_map(|&t| lex.words_with(t))
            .filter(|w| {
                lex.tags(w).is_some_and(|tags| {
                    !tags.contains(&Tag::NegativeSentiment) && !tags.contains(&Tag::Pron1s) && !tags.contains(&Tag::Negation)
                })
            })
            .collect();
        filler.sort_unstable();
        filler.dedup();
        WordPools { negative: lex.words_with(Tag::NegativeSentiment), first_person: lex.words_with(Tag::Pron1s), filler }
    }

    fn segment(&self, t: &TextSpec, depressed: bool, rng: &mut ChaCha8Rng) -> String {
        let (p_neg, p_fp) = if depressed {
            (t.negative_depressed, t.first_person_depressed)
        } else {
            (t.negative, t.first_person)
        };
        let mut out = String::new();
        for i in 0..t.tokens_per_segment {
            let u: f64 = rng.gen();
            let pool = if u < p_fp {
                &self.first_person
            } else if u < p_fp + p_neg {
                &self.negative
            } else {
                &self.filler
            };
            if i > 0 {
                out.push(' ');
            }
            out.push_str(pool.choose(rng).copied().unwrap_or("the"));
            if i % 12 == 11 || i + 1 == t.tokens_per_segment {
                out.push('.');
            }
        }
        out.push('\n');
        out
    }
}
