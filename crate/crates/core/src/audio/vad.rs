use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::AudioBuffer;
use crate::error::{Error, Result};

/// Parameters of the relative-energy voice activity detector. Defaults are
/// recorded in every run manifest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VadConfig {
    pub frame_ms: f64,
    pub hop_ms: f64,
    /// Frame energy threshold relative to the whole-buffer RMS level, in dB.
    pub energy_threshold_db: f64,
    pub min_speech_ms: f64,
    pub min_gap_ms: f64,
}

impl Default for VadConfig {
    fn default() -> Self {
        VadConfig {
            frame_ms: 25.0,
            hop_ms: 10.0,
            energy_threshold_db: -30.0,
            min_speech_ms: 250.0,
            min_gap_ms: 300.0,
        }
    }
}

impl VadConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.hop_ms > 0.0 && self.frame_ms >= self.hop_ms) {
            return Err(Error::Validation(format!(
                "VAD needs frame_ms >= hop_ms > 0 (got {} / {})",
                self.frame_ms, self.hop_ms
            )));
        }
        if self.min_speech_ms <= 0.0 || self.min_gap_ms < 0.0 {
            return Err(Error::Validation(
                "VAD needs min_speech_ms > 0 and min_gap_ms >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Half-open sample span `[start_sample, end_sample)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Segment {
    pub start_sample: usize,
    pub end_sample: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end_sample - self.start_sample
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn ms_to_samples(ms: f64, rate: u32) -> usize {
    (ms * rate as f64 / 1000.0).round() as usize
}

/// Marks frames whose mean energy exceeds the buffer mean energy shifted by
/// `energy_threshold_db`, merges speech runs separated by less than
/// `min_gap_ms`, and drops runs shorter than `min_speech_ms`. Output is
/// sorted and non-overlapping.
pub fn vad_segments(buf: &AudioBuffer, cfg: &VadConfig) -> Result<Vec<Segment>> {
    cfg.validate()?;
    let x = buf.samples();
    let rate = buf.sample_rate();
    let frame = ms_to_samples(cfg.frame_ms, rate).max(1);
    let hop = ms_to_samples(cfg.hop_ms, rate).max(1);
    if x.len() < frame {
        return Ok(Vec::new());
    }
    let total_energy: f64 = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    if total_energy == 0.0 {
        return Ok(Vec::new());
    }
    // Compare in the linear domain; scaling the buffer scales both sides.
    let threshold = total_energy * 10f64.powf(cfg.energy_threshold_db / 10.0);

    let n_frames = (x.len() - frame) / hop + 1;
    let mut runs: Vec<Segment> = Vec::new();
    let mut current: Option<Segment> = None;
    for f in 0..n_frames {
        let s = f * hop;
        let e = s + frame;
        let energy = x[s..e].iter().map(|v| v * v).sum::<f64>() / frame as f64;
        if energy > threshold {
            match current.as_mut() {
                Some(seg) => seg.end_sample = e,
                None => {
                    current = Some(Segment {
                        start_sample: s,
                        end_sample: e,
                    })
                }
            }
        } else if let Some(seg) = current.take() {
            runs.push(seg);
        }
    }
    runs.extend(current);

    let min_gap = ms_to_samples(cfg.min_gap_ms, rate);
    let mut merged: Vec<Segment> = Vec::new();
    for r in runs {
        match merged.last_mut() {
            Some(last) if r.start_sample <= last.end_sample + min_gap => {
                last.end_sample = last.end_sample.max(r.end_sample);
            }
            _ => merged.push(r),
        }
    }
    let min_len = ms_to_samples(cfg.min_speech_ms, rate);
    merged.retain(|s| s.len() >= min_len);
    Ok(merged)
}

/// Intersects VAD segments with turn spans (e.g. participant turns of an
/// interview), keeping non-empty pieces.
pub fn clip_to_spans(segments: &[Segment], spans: &[Segment]) -> Vec<Segment> {
    let mut out = Vec::new();
    for s in segments {
        for t in spans {
            let start = s.start_sample.max(t.start_sample);
            let end = s.end_sample.min(t.end_sample);
            if start < end {
                out.push(Segment {
                    start_sample: start,
                    end_sample: end,
                });
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Tab-separated segment list: speaker_id, start_s, end_s.
pub fn write_segments(path: &Path, rows: &[(String, Segment)], sample_rate: u32) -> Result<()> {
    let mut text = String::from("speaker_id\tstart_s\tend_s\n");
    let sr = sample_rate as f64;
    for (spk, s) in rows {
        text.push_str(&format!(
            "{spk}\t{:.4}\t{:.4}\n",
            s.start_sample as f64 / sr,
            s.end_sample as f64 / sr
        ));
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SR: u32 = 16_000;

    /// Silence with 220 Hz tones over the given (start_s, end_s) spans.
    fn tones(total_s: f64, spans: &[(f64, f64)]) -> AudioBuffer {
        let n = (total_s * SR as f64) as usize;
        let mut x = vec![0.0; n];
        for &(a, b) in spans {
            for (i, v) in x
                .iter_mut()
                .enumerate()
                .take((b * SR as f64) as usize)
                .skip((a * SR as f64) as usize)
            {
                *v = 0.3 * (2.0 * std::f64::consts::PI * 220.0 * i as f64 / SR as f64).sin();
            }
        }
        AudioBuffer::new(x, SR).unwrap()
    }

    #[test]
    fn silence_has_no_segments() {
        let b = AudioBuffer::new(vec![0.0; SR as usize], SR).unwrap();
        assert!(vad_segments(&b, &VadConfig::default()).unwrap().is_empty());
        let empty = AudioBuffer::new(vec![], SR).unwrap();
        assert!(vad_segments(&empty, &VadConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn centered_tone_gives_one_segment_within_a_frame() {
        let b = tones(3.0, &[(1.0, 2.0)]);
        let segs = vad_segments(&b, &VadConfig::default()).unwrap();
        assert_eq!(segs.len(), 1);
        let frame = 400;
        assert!(segs[0].start_sample.abs_diff(16_000) <= frame, "{segs:?}");
        assert!(segs[0].end_sample.abs_diff(32_000) <= frame, "{segs:?}");
    }

    #[test]
    fn tones_separated_by_a_second_stay_apart() {
        let b = tones(4.0, &[(0.5, 1.5), (2.5, 3.5)]);
        let segs = vad_segments(&b, &VadConfig::default()).unwrap();
        assert_eq!(segs.len(), 2);
        assert!(segs[0].end_sample < segs[1].start_sample);
    }

    #[test]
    fn short_gap_is_merged_and_short_blip_dropped() {
        let b = tones(3.0, &[(0.5, 1.0), (1.1, 1.6), (2.5, 2.6)]);
        let segs = vad_segments(&b, &VadConfig::default()).unwrap();
        assert_eq!(segs.len(), 1, "{segs:?}");
    }

    #[test]
    fn invalid_config_rejected() {
        let b = tones(1.0, &[]);
        let cfg = VadConfig {
            frame_ms: 5.0,
            hop_ms: 10.0,
            ..VadConfig::default()
        };
        assert!(vad_segments(&b, &cfg).is_err());
    }

    #[test]
    fn clipping_to_turns() {
        let segs = [Segment { start_sample: 0, end_sample: 100 }, Segment { start_sample: 200, end_sample: 300 }];
        let turns = [Segment { start_sample: 50, end_sample: 250 }];
        assert_eq!(
            clip_to_spans(&segs, &turns),
            vec![
                Segment { start_sample: 50, end_sample: 100 },
                Segment { start_sample: 200, end_sample: 250 }
            ]
        );
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn segments_sorted_disjoint_long_and_scale_invariant(
            spans in proptest::collection::vec((0.0f64..3.5, 0.05f64..1.0), 0..4),
            k in -6i32..6,
        ) {
            let spans: Vec<(f64, f64)> = spans.iter().map(|&(a, d)| (a, (a + d).min(4.0))).collect();
            let b = tones(4.0, &spans);
            let cfg = VadConfig::default();
            let segs = vad_segments(&b, &cfg).unwrap();
            for w in segs.windows(2) {
                proptest::prop_assert!(w[0].end_sample < w[1].start_sample);
            }
            for s in &segs {
                proptest::prop_assert!(s.len() >= 4000);
                proptest::prop_assert!(s.end_sample <= b.len());
            }
            let scaled = b.scaled(2f64.powi(k));
            proptest::prop_assert_eq!(vad_segments(&scaled, &cfg).unwrap(), segs);
        }
    }
}
