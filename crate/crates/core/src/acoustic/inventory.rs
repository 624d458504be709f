use super::functionals::{functionals, Functionals};
use super::perturbation::{glottal_cycles, perturbation_from_cycles, Perturbation};
use super::pitch::{analyze_pitch, PitchAnalysis};
use super::spectral::{spectral_tracks, SpectralTracks};
use super::LldTrack;
use crate::audio::AudioBuffer;
use crate::error::Result;
use crate::features::{FeatureSet, FeatureVector};

/// Speed of sound in cm/s for vocal-tract length estimates.
const SPEED_OF_SOUND_CM: f64 = 35_000.0;
/// Intensity peaks must rise this far above the preceding dip.
const SYLLABLE_DIP_DB: f64 = 2.0;
/// ... and lie within this many dB of the loudest frame.
const SYLLABLE_FLOOR_DB: f64 = 25.0;
const MIN_PAUSE_S: f64 = 0.1;

/// All frame-level analyses of one segment, shared by both inventories.
pub struct SegmentAnalysis {
    pub duration_s: f64,
    pub pitch: PitchAnalysis,
    pub perturbation: Perturbation,
    pub spectral: SpectralTracks,
}

impl SegmentAnalysis {
    pub fn new(seg: &AudioBuffer) -> Self {
        let pitch = analyze_pitch(seg);
        let cycles = glottal_cycles(seg, &pitch);
        let perturbation = perturbation_from_cycles(&cycles, &pitch);
        SegmentAnalysis {
            duration_s: seg.duration_s(),
            perturbation,
            spectral: spectral_tracks(seg),
            pitch,
        }
    }

    fn voiced(&self) -> Vec<bool> {
        self.pitch.voiced()
    }

    fn unvoiced(&self) -> Vec<bool> {
        self.voiced().iter().map(|v| !v).collect()
    }

    fn hop_s(&self) -> f64 {
        self.pitch.f0.frame_hop_ms / 1000.0
    }

    fn f0_semitone(&self) -> LldTrack {
        let v = (0..self.pitch.f0.len())
            .map(|i| {
                self.pitch
                    .f0
                    .is_valid(i)
                    .then(|| 12.0 * (self.pitch.f0.values[i] / 27.5).log2())
            })
            .collect();
        LldTrack::masked("f0_semitone", v)
    }

    fn hnr_track(&self) -> LldTrack {
        let h = &self.pitch.harmonicity;
        let v = (0..h.len())
            .map(|i| {
                h.is_valid(i).then(|| {
                    let r = h.values[i].clamp(1e-6, 1.0 - 1e-6);
                    10.0 * (r / (1.0 - r)).log10()
                })
            })
            .collect();
        LldTrack::masked("hnr_db", v)
    }

    /// Lengths in seconds of maximal runs of `flag` frames.
    fn run_lengths(&self, flag: bool) -> Vec<f64> {
        let v = self.voiced();
        let mut out = Vec::new();
        let mut len = 0usize;
        for &x in &v {
            if x == flag {
                len += 1;
            } else if len > 0 {
                out.push(len as f64 * self.hop_s());
                len = 0;
            }
        }
        if len > 0 {
            out.push(len as f64 * self.hop_s());
        }
        out
    }

    /// Interior unvoiced runs of at least [`MIN_PAUSE_S`].
    fn n_pauses(&self) -> usize {
        let v = self.voiced();
        let mut count = 0;
        let mut i = 0;
        while i < v.len() {
            if v[i] {
                i += 1;
                continue;
            }
            let start = i;
            while i < v.len() && !v[i] {
                i += 1;
            }
            let interior = start > 0 && i < v.len();
            if interior && (i - start) as f64 * self.hop_s() >= MIN_PAUSE_S {
                count += 1;
            }
        }
        count
    }

    /// Voiced intensity peaks preceded by a dip of at least
    /// [`SYLLABLE_DIP_DB`] (three-frame smoothed intensity).
    fn n_syllables(&self) -> usize {
        let raw = &self.spectral.intensity_db.values;
        if raw.len() < 3 {
            return 0;
        }
        let sm: Vec<f64> = (0..raw.len())
            .map(|i| {
                let lo = i.saturating_sub(1);
                let hi = (i + 1).min(raw.len() - 1);
                raw[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
            })
            .collect();
        let voiced = self.voiced();
        let top = sm.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut count = 0;
        let mut dip = sm[0];
        for i in 1..sm.len() - 1 {
            dip = dip.min(sm[i]);
            let is_peak = sm[i] > sm[i - 1] && sm[i] >= sm[i + 1];
            if is_peak
                && voiced.get(i).copied().unwrap_or(false)
                && sm[i] >= top - SYLLABLE_FLOOR_DB
                && sm[i] - dip >= SYLLABLE_DIP_DB
            {
                count += 1;
                dip = sm[i];
            }
        }
        // A single sustained voiced stretch still counts as one nucleus.
        if count == 0 && voiced.iter().any(|&v| v) {
            1
        } else {
            count
        }
    }

    fn phonation_time_s(&self) -> f64 {
        self.voiced().iter().filter(|&&v| v).count() as f64 * self.hop_s()
    }

    fn equivalent_sound_level_db(&self) -> Option<f64> {
        let v = &self.spectral.intensity_db.values;
        if v.is_empty() {
            return None;
        }
        let mean_power = v.iter().map(|db| 10f64.powf(db / 10.0)).sum::<f64>() / v.len() as f64;
        Some(10.0 * mean_power.log10())
    }

    fn formant_means(&self) -> Vec<Option<f64>> {
        let voiced = self.voiced();
        self.spectral
            .formant_hz
            .iter()
            .map(|t| functionals(&t.restricted(&voiced, "f")).mean)
            .collect()
    }

    pub fn praat(&self) -> Result<FeatureVector> {
        let voiced = self.voiced();
        let f0 = self.pitch.f0.valid_values();
        let f0f = functionals(&self.pitch.f0);
        let p = &self.perturbation;
        let means = self.formant_means();
        let medians: Vec<Option<f64>> = self
            .spectral
            .formant_hz
            .iter()
            .map(|t| functionals(&t.restricted(&voiced, "f")).p50)
            .collect();
        let all4: Option<[f64; 4]> = match means[..] {
            [Some(a), Some(b), Some(c), Some(d)] => Some([a, b, c, d]),
            _ => None,
        };
        let dispersion = all4.map(|f| (f[3] - f[0]) / 3.0);
        let avg_formant = all4.map(|f| f.iter().sum::<f64>() / 4.0);
        let geo_formant = all4.map(|f| (f[0] * f[1] * f[2] * f[3]).powf(0.25));
        let fitch = all4.map(|f| {
            f.iter()
                .enumerate()
                .map(|(i, fi)| (2 * i + 1) as f64 * SPEED_OF_SOUND_CM / (4.0 * fi))
                .sum::<f64>()
                / 4.0
        });
        let delta_f = all4.map(|f| {
            let num: f64 = f.iter().enumerate().map(|(i, fi)| fi * (i as f64 + 0.5)).sum();
            let den: f64 = (0..4).map(|i| (i as f64 + 0.5).powi(2)).sum();
            num / den
        });
        let vtl_delta_f = delta_f.map(|d| SPEED_OF_SOUND_CM / (2.0 * d));
        let n_syll = self.n_syllables() as f64;
        let phon = self.phonation_time_s();
        let intensity_mean = functionals(&self.spectral.intensity_db).mean;

        let values = vec![
            Some(self.duration_s),
            f0f.mean,
            f0f.std,
            f0f.p50,
            f0.iter().copied().reduce(f64::min),
            f0.iter().copied().reduce(f64::max),
            p.hnr_db,
            p.jitter_local,
            p.jitter_local_abs,
            p.jitter_rap,
            p.jitter_ppq5,
            p.jitter_ddp,
            p.shimmer_local,
            p.shimmer_local_db,
            p.shimmer_apq3,
            p.shimmer_apq5,
            p.shimmer_apq11,
            p.shimmer_dda,
            means[0],
            means[1],
            means[2],
            means[3],
            medians[0],
            medians[1],
            medians[2],
            medians[3],
            dispersion,
            avg_formant,
            geo_formant,
            fitch,
            delta_f,
            vtl_delta_f,
            Some(n_syll),
            Some(self.n_pauses() as f64),
            Some(phon),
            (self.duration_s > 0.0).then(|| n_syll / self.duration_s),
            (phon > 0.0).then(|| n_syll / phon),
            (n_syll > 0.0).then(|| phon / n_syll),
            intensity_mean,
        ];
        FeatureVector::new(FeatureSet::Praat, praat_names(), values)
    }

    pub fn egemaps(&self) -> Result<FeatureVector> {
        let voiced = self.voiced();
        let unvoiced = self.unvoiced();
        let s = &self.spectral;
        let mut values: Vec<Option<f64>> = Vec::with_capacity(88);

        let full = |f: Functionals, db: bool| {
            [
                f.mean,
                if db { f.std } else { f.cov },
                f.p20,
                f.p50,
                f.p80,
                f.range,
                f.rising_slope,
                f.falling_slope,
            ]
        };
        values.extend(full(functionals(&self.f0_semitone()), false));
        values.extend(full(functionals(&s.intensity_db), true));
        values.extend(full(functionals(&self.hnr_track()), true));
        values.extend(full(functionals(&s.formant_hz[0].restricted(&voiced, "f1")), false));
        values.extend(full(functionals(&s.flux), false));

        let voiced_tracks: Vec<&LldTrack> = [&s.alpha_ratio, &s.hammarberg, &s.slope_0_500, &s.slope_500_1500]
            .into_iter()
            .chain(s.mfcc.iter())
            .chain([&s.formant_hz[1], &s.formant_hz[2], &s.formant_bw[0], &s.formant_bw[1], &s.formant_bw[2]])
            .collect();
        for t in voiced_tracks {
            let f = functionals(&t.restricted(&voiced, "v"));
            values.push(f.mean);
            values.push(f.cov);
        }

        for t in [&s.alpha_ratio, &s.hammarberg, &s.slope_0_500, &s.slope_500_1500, &s.flux, &s.intensity_db] {
            values.push(functionals(&t.restricted(&unvoiced, "uv")).mean);
        }

        let p = &self.perturbation;
        values.extend([
            p.jitter_local,
            p.jitter_rap,
            p.jitter_ppq5,
            p.shimmer_local,
            p.shimmer_apq3,
            p.shimmer_apq5,
        ]);

        let n_frames = voiced.len();
        let vruns = self.run_lengths(true);
        let uruns = self.run_lengths(false);
        let mean_sd = |v: &[f64]| -> (Option<f64>, Option<f64>) {
            if v.is_empty() {
                return (None, None);
            }
            let m = v.iter().sum::<f64>() / v.len() as f64;
            let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
            (Some(m), Some(sd))
        };
        let (mv, sv) = mean_sd(&vruns);
        let (mu, su) = mean_sd(&uruns);
        let dur = self.duration_s;
        values.extend([
            Some(dur),
            (n_frames > 0).then(|| voiced.iter().filter(|&&v| v).count() as f64 / n_frames as f64),
            (dur > 0.0).then(|| self.n_syllables() as f64 / dur),
            (dur > 0.0).then(|| vruns.len() as f64 / dur),
            mv,
            sv,
            mu,
            su,
            self.equivalent_sound_level_db(),
            p.shimmer_local_db,
        ]);
        FeatureVector::new(FeatureSet::Egemaps, egemaps_names(), values)
    }
}

pub fn praat_vector(seg: &AudioBuffer) -> Result<FeatureVector> {
    SegmentAnalysis::new(seg).praat()
}

pub fn egemaps_vector(seg: &AudioBuffer) -> Result<FeatureVector> {
    SegmentAnalysis::new(seg).egemaps()
}

const PRAAT_NAMES: [&str; 39] = [
    "duration_s",
    "f0_mean_hz",
    "f0_stdev_hz",
    "f0_median_hz",
    "f0_min_hz",
    "f0_max_hz",
    "hnr_db",
    "jitter_local",
    "jitter_local_abs_s",
    "jitter_rap",
    "jitter_ppq5",
    "jitter_ddp",
    "shimmer_local",
    "shimmer_local_db",
    "shimmer_apq3",
    "shimmer_apq5",
    "shimmer_apq11",
    "shimmer_dda",
    "f1_mean_hz",
    "f2_mean_hz",
    "f3_mean_hz",
    "f4_mean_hz",
    "f1_median_hz",
    "f2_median_hz",
    "f3_median_hz",
    "f4_median_hz",
    "formant_dispersion_hz",
    "avg_formant_hz",
    "geometric_mean_formant_hz",
    "fitch_vtl_cm",
    "delta_f_hz",
    "vtl_delta_f_cm",
    "n_syllables",
    "n_pauses",
    "phonation_time_s",
    "speech_rate",
    "articulation_rate",
    "avg_syllable_duration_s",
    "intensity_mean_db",
];

pub fn praat_names() -> Vec<String> {
    PRAAT_NAMES.iter().map(|s| s.to_string()).collect()
}

pub fn egemaps_names() -> Vec<String> {
    let mut names = Vec::with_capacity(88);
    let full = |track: &str, db: bool| -> Vec<String> {
        [
            "mean",
            if db { "std" } else { "cov" },
            "p20",
            "p50",
            "p80",
            "range_p20_p80",
            "rising_slope_mean",
            "falling_slope_mean",
        ]
        .iter()
        .map(|f| format!("{track}_{f}"))
        .collect()
    };
    names.extend(full("f0_semitone", false));
    names.extend(full("intensity_db", true));
    names.extend(full("hnr_db", true));
    names.extend(full("f1_hz", false));
    names.extend(full("spectral_flux", false));
    for t in [
        "alpha_ratio_v",
        "hammarberg_v",
        "slope_0_500_v",
        "slope_500_1500_v",
        "mfcc1_v",
        "mfcc2_v",
        "mfcc3_v",
        "mfcc4_v",
        "f2_hz",
        "f3_hz",
        "f1_bw",
        "f2_bw",
        "f3_bw",
    ] {
        names.push(format!("{t}_mean"));
        names.push(format!("{t}_cov"));
    }
    for t in [
        "alpha_ratio_uv",
        "hammarberg_uv",
        "slope_0_500_uv",
        "slope_500_1500_uv",
        "spectral_flux_uv",
        "intensity_db_uv",
    ] {
        names.push(format!("{t}_mean"));
    }
    for n in [
        "jitter_local",
        "jitter_rap",
        "jitter_ppq5",
        "shimmer_local",
        "shimmer_apq3",
        "shimmer_apq5",
        "duration_s",
        "voiced_ratio",
        "pseudo_syllable_rate",
        "voiced_segments_per_s",
        "mean_voiced_segment_s",
        "std_voiced_segment_s",
        "mean_unvoiced_segment_s",
        "std_unvoiced_segment_s",
        "equivalent_sound_level_db",
        "shimmer_local_db",
    ] {
        names.push(n.to_string());
    }
    names
}

/// Features that carry absolute level and shift by `20 log10(c)` when the
/// waveform is scaled by `c`.
pub fn is_level_feature(name: &str) -> bool {
    matches!(
        name,
        "intensity_db_mean"
            | "intensity_db_p20"
            | "intensity_db_p50"
            | "intensity_db_p80"
            | "intensity_db_uv_mean"
            | "equivalent_sound_level_db"
            | "intensity_mean_db"
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const SR: u32 = 16_000;

    /// Two voiced stretches of a harmonic-rich 180 Hz buzz around a pause
    /// filled with faint noise.
    fn buzz() -> AudioBuffer {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = SR as usize;
        let x: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / SR as f64;
                let hiss = rng.gen_range(-0.002..0.002);
                if (0.45..0.6).contains(&t) {
                    return hiss;
                }
                let env = 0.5 + 0.4 * (2.0 * std::f64::consts::PI * 4.0 * t).sin();
                let f = 180.0 * (1.0 + 0.03 * (2.0 * std::f64::consts::PI * 3.0 * t).sin());
                env * (1..=8)
                    .map(|h| (2.0 * std::f64::consts::PI * f * h as f64 * t).sin() / h as f64)
                    .sum::<f64>()
                    * 0.2
                    + hiss
            })
            .collect();
        AudioBuffer::new(x, SR).unwrap()
    }

    #[test]
    fn inventories_have_fixed_sizes() {
        assert_eq!(praat_names().len(), 39);
        assert_eq!(egemaps_names().len(), 88);
        let a = SegmentAnalysis::new(&buzz());
        assert_eq!(a.praat().unwrap().len(), 39);
        assert_eq!(a.egemaps().unwrap().len(), 88);
        let silent = SegmentAnalysis::new(&AudioBuffer::new(vec![0.0; 4000], SR).unwrap());
        assert_eq!(silent.praat().unwrap().len(), 39);
        assert_eq!(silent.egemaps().unwrap().len(), 88);
    }

    #[test]
    fn extraction_is_deterministic() {
        let b = buzz();
        assert_eq!(praat_vector(&b).unwrap(), praat_vector(&b.clone()).unwrap());
        assert_eq!(egemaps_vector(&b).unwrap(), egemaps_vector(&b.clone()).unwrap());
    }

    #[test]
    fn voiced_buzz_has_pitch_and_pause() {
        let v = praat_vector(&buzz()).unwrap();
        let f0 = v.get("f0_median_hz").unwrap();
        assert!((f0 - 180.0).abs() < 6.0, "{f0}");
        assert_eq!(v.get("n_pauses"), Some(1.0));
        assert!(v.get("jitter_local").is_some());
    }

    #[test]
    fn gain_changes_only_level_features() {
        let b = buzz();
        for k in [-3, 2] {
            let c = 2f64.powi(k);
            let shift = 20.0 * c.log10();
            let a = SegmentAnalysis::new(&b);
            let s = SegmentAnalysis::new(&b.scaled(c));
            for (x, y) in [(a.praat().unwrap(), s.praat().unwrap()), (a.egemaps().unwrap(), s.egemaps().unwrap())] {
                for ((name, u), w) in x.names.iter().zip(&x.values).zip(&y.values) {
                    match (u, w) {
                        (Some(u), Some(w)) => {
                            let expect = if is_level_feature(name) { u + shift } else { *u };
                            assert!((w - expect).abs() <= 1e-6 * (1.0 + expect.abs()), "{name}: {u} -> {w}");
                        }
                        (None, None) => {}
                        _ => panic!("{name} presence changed"),
                    }
                }
            }
        }
    }

    #[test]
    fn polarity_inversion_keeps_f0_features() {
        let b = buzz();
        let x = praat_vector(&b).unwrap();
        let y = praat_vector(&b.scaled(-1.0)).unwrap();
        for n in ["f0_mean_hz", "f0_stdev_hz", "f0_median_hz", "f0_min_hz", "f0_max_hz"] {
            assert_eq!(x.get(n), y.get(n), "{n}");
        }
    }

    #[test]
    fn no_non_finite_values_emitted() {
        for b in [buzz(), AudioBuffer::new(vec![0.0; 4000], SR).unwrap(), AudioBuffer::new(vec![0.1; 100], SR).unwrap()] {
            let a = SegmentAnalysis::new(&b);
            for v in [a.praat().unwrap(), a.egemaps().unwrap()] {
                assert!(v.values.iter().flatten().all(|x| x.is_finite()));
            }
        }
    }
}
