use serde::{Deserialize, Serialize};

use super::{frame_geometry, PitchAnalysis};
use crate::audio::AudioBuffer;
use crate::stats::quantile_linear;

/// Cycle boundaries are tracked by waveform matching; a match weaker than
/// this ends the current run of cycles.
const MIN_CYCLE_CORRELATION: f64 = 0.5;
/// Consecutive periods differing by more than this factor are not compared.
const MAX_PERIOD_FACTOR: f64 = 1.3;
const MIN_PERIOD_S: f64 = 1.0 / 500.0;
const MAX_PERIOD_S: f64 = 1.0 / 60.0;

/// Runs of consecutive glottal cycles: `(period_s, peak_to_peak_amplitude)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GlottalCycles {
    pub runs: Vec<Vec<(f64, f64)>>,
}

impl GlottalCycles {
    pub fn n_cycles(&self) -> usize {
        self.runs.iter().map(Vec::len).sum()
    }

    pub fn max_run(&self) -> usize {
        self.runs.iter().map(Vec::len).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Perturbation {
    pub jitter_local: Option<f64>,
    pub jitter_local_abs: Option<f64>,
    pub jitter_rap: Option<f64>,
    pub jitter_ppq5: Option<f64>,
    pub jitter_ddp: Option<f64>,
    pub shimmer_local: Option<f64>,
    pub shimmer_local_db: Option<f64>,
    pub shimmer_apq3: Option<f64>,
    pub shimmer_apq5: Option<f64>,
    pub shimmer_apq11: Option<f64>,
    pub shimmer_dda: Option<f64>,
    pub hnr_db: Option<f64>,
}

fn correlation(x: &[f64], a: usize, b: usize, w: usize) -> f64 {
    let (mut xy, mut xx, mut yy) = (0.0, 0.0, 0.0);
    for k in 0..w {
        let (p, q) = (x[a + k], x[b + k]);
        xy += p * q;
        xx += p * p;
        yy += q * q;
    }
    let d = (xx * yy).sqrt();
    if d > 0.0 {
        xy / d
    } else {
        0.0
    }
}

fn peak_to_peak(x: &[f64]) -> f64 {
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    hi - lo
}

/// Tracks glottal cycles inside each voiced run of the pitch analysis by
/// matching one cycle of waveform against the next.
pub fn glottal_cycles(seg: &AudioBuffer, pitch: &PitchAnalysis) -> GlottalCycles {
    let sr = seg.sample_rate() as f64;
    let (frame, hop) = frame_geometry(seg.sample_rate());
    let x = seg.samples();
    let voiced = pitch.voiced();
    let mut out = GlottalCycles::default();

    let mut f = 0;
    while f < voiced.len() {
        if !voiced[f] {
            f += 1;
            continue;
        }
        let first = f;
        while f < voiced.len() && voiced[f] {
            f += 1;
        }
        let span_start = first * hop;
        let span_end = ((f - 1) * hop + frame).min(x.len());
        let mut f0s: Vec<f64> = (first..f).map(|i| pitch.f0.values[i]).collect();
        let period0 = sr / quantile_linear(&mut f0s, 0.5);
        track_run(x, span_start, span_end, period0, sr, &mut out);
    }
    out
}

fn track_run(x: &[f64], start: usize, end: usize, period0: f64, sr: f64, out: &mut GlottalCycles) {
    let p0 = period0.round() as usize;
    if p0 < 2 || start + 2 * p0 >= end {
        return;
    }
    // Centre the first analysis window on the strongest excursion.
    let peak = (start..start + p0)
        .max_by(|&a, &b| x[a].abs().total_cmp(&x[b].abs()))
        .unwrap_or(start);
    let mut s = peak.saturating_sub(p0 / 2).max(start);
    let mut period = period0;
    let mut run: Vec<(f64, f64)> = Vec::new();
    loop {
        let w = period.round() as usize;
        let lo = ((0.8 * period).floor() as usize).max(2);
        let hi = (1.25 * period).ceil() as usize;
        if w < 2 || s + hi + 1 + w > end {
            break;
        }
        let corr: Vec<f64> = (lo - 1..=hi + 1).map(|t| correlation(x, s, s + t, w)).collect();
        let (best_i, &best) = corr[1..corr.len() - 1]
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty lag range");
        let i = best_i + 1;
        if best < MIN_CYCLE_CORRELATION {
            if run.len() > 1 {
                out.runs.push(std::mem::take(&mut run));
            }
            run.clear();
            s += w;
            continue;
        }
        let (a, b, c) = (corr[i - 1], corr[i], corr[i + 1]);
        let denom = a - 2.0 * b + c;
        let delta = if denom.abs() > 1e-15 {
            (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
        } else {
            0.0
        };
        let tau = (lo - 1 + i) as f64 + delta;
        let tau_s = tau / sr;
        let step = tau.round() as usize;
        if !(MIN_PERIOD_S..=MAX_PERIOD_S).contains(&tau_s) {
            if run.len() > 1 {
                out.runs.push(std::mem::take(&mut run));
            }
            run.clear();
            s += step.max(1);
            continue;
        }
        run.push((tau_s, peak_to_peak(&x[s..s + step])));
        s += step;
        period = tau;
    }
    if run.len() > 1 {
        out.runs.push(run);
    }
}

/// Mean of `|v_i - local_mean(v, i, half)|` over the interior points of
/// every run.
fn local_deviation(runs: &[Vec<f64>], half: usize) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for r in runs {
        if r.len() < 2 * half + 1 {
            continue;
        }
        for i in half..r.len() - half {
            let window = &r[i - half..=i + half];
            let m = window.iter().sum::<f64>() / window.len() as f64;
            sum += (r[i] - m).abs();
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

fn mean_abs_diff(runs: &[Vec<f64>], ratio_limit: Option<f64>) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for r in runs {
        for w in r.windows(2) {
            if let Some(lim) = ratio_limit {
                if w[0].max(w[1]) > lim * w[0].min(w[1]) {
                    continue;
                }
            }
            sum += (w[1] - w[0]).abs();
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

fn mean_abs_second_diff(runs: &[Vec<f64>]) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for r in runs {
        for w in r.windows(3) {
            sum += ((w[2] - w[1]) - (w[1] - w[0])).abs();
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

/// Period and amplitude perturbation measures plus mean harmonicity in dB.
/// Every measure is `None` unless some run holds at least three cycles.
pub fn perturbation(seg: &AudioBuffer, pitch: &PitchAnalysis) -> Perturbation {
    let cycles = glottal_cycles(seg, pitch);
    perturbation_from_cycles(&cycles, pitch)
}

pub(crate) fn perturbation_from_cycles(cycles: &GlottalCycles, pitch: &PitchAnalysis) -> Perturbation {
    let hnr_db = {
        let r = pitch.harmonicity.valid_values();
        (!r.is_empty()).then(|| {
            r.iter()
                .map(|&v| {
                    let v = v.clamp(1e-6, 1.0 - 1e-6);
                    10.0 * (v / (1.0 - v)).log10()
                })
                .sum::<f64>()
                / r.len() as f64
        })
    };
    if cycles.max_run() < 3 {
        return Perturbation {
            hnr_db,
            ..Perturbation::default()
        };
    }
    let periods: Vec<Vec<f64>> = cycles.runs.iter().map(|r| r.iter().map(|c| c.0).collect()).collect();
    let amps: Vec<Vec<f64>> = cycles.runs.iter().map(|r| r.iter().map(|c| c.1).collect()).collect();
    let n = cycles.n_cycles() as f64;
    let mean_t = periods.iter().flatten().sum::<f64>() / n;
    let mean_a = amps.iter().flatten().sum::<f64>() / n;
    let rel_t = |v: Option<f64>| v.map(|x| x / mean_t);
    let rel_a = |v: Option<f64>| if mean_a > 0.0 { v.map(|x| x / mean_a) } else { None };

    let log_ratio: Vec<Vec<f64>> = amps
        .iter()
        .map(|r| r.iter().map(|a| 20.0 * a.max(1e-12).log10()).collect())
        .collect();

    Perturbation {
        jitter_local: rel_t(mean_abs_diff(&periods, Some(MAX_PERIOD_FACTOR))),
        jitter_local_abs: mean_abs_diff(&periods, Some(MAX_PERIOD_FACTOR)),
        jitter_rap: rel_t(local_deviation(&periods, 1)),
        jitter_ppq5: rel_t(local_deviation(&periods, 2)),
        jitter_ddp: rel_t(mean_abs_second_diff(&periods)),
        shimmer_local: rel_a(mean_abs_diff(&amps, None)),
        shimmer_local_db: mean_abs_diff(&log_ratio, None),
        shimmer_apq3: rel_a(local_deviation(&amps, 1)),
        shimmer_apq5: rel_a(local_deviation(&amps, 2)),
        shimmer_apq11: rel_a(local_deviation(&amps, 5)),
        shimmer_dda: rel_a(mean_abs_second_diff(&amps)),
        hnr_db,
    }
}

#[cfg(test)]
mod tests {
    use super::super::analyze_pitch;
    use super::*;

    const SR: f64 = 16_000.0;

    /// Gaussian pulses (σ = 0.5 ms) at the cumulative sums of `periods_ms`.
    fn pulse_train(periods_ms: &[f64], amps: &[f64]) -> AudioBuffer {
        let total: f64 = periods_ms.iter().sum::<f64>() + 20.0;
        let n = (total / 1000.0 * SR) as usize;
        let mut x = vec![0.0; n];
        let sigma = 0.0005 * SR;
        let mut t = 0.005 * SR;
        for (k, p) in periods_ms.iter().enumerate() {
            let a = amps[k % amps.len()];
            let lo = (t - 6.0 * sigma).max(0.0) as usize;
            let hi = ((t + 6.0 * sigma) as usize).min(n - 1);
            for (i, v) in x.iter_mut().enumerate().take(hi + 1).skip(lo) {
                let d = (i as f64 - t) / sigma;
                *v += a * (-0.5 * d * d).exp();
            }
            t += p / 1000.0 * SR;
        }
        AudioBuffer::new(x, SR as u32).unwrap()
    }

    fn measure(b: &AudioBuffer) -> Perturbation {
        perturbation(b, &analyze_pitch(b))
    }

    #[test]
    fn constant_period_train_has_no_jitter() {
        let b = pulse_train(&[10.0; 100], &[0.5]);
        let p = measure(&b);
        assert!(p.jitter_local.unwrap() < 0.001, "{p:?}");
        assert!(p.shimmer_local.unwrap() < 0.001, "{p:?}");
    }

    #[test]
    fn alternating_periods_jitter_closed_form() {
        let periods: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 10.0 } else { 10.2 }).collect();
        let p = measure(&pulse_train(&periods, &[0.5]));
        let expected = 0.2 / 10.1;
        let got = p.jitter_local.unwrap();
        assert!((got - expected).abs() <= 0.001, "jitter {got} vs {expected}");
    }

    #[test]
    fn alternating_amplitudes_shimmer_closed_form() {
        let p = measure(&pulse_train(&[8.0; 120], &[0.5, 0.45]));
        let expected = 0.05 / 0.475;
        let got = p.shimmer_local.unwrap();
        assert!((got - expected).abs() <= 0.005, "shimmer {got} vs {expected}");
    }

    #[test]
    fn too_little_voicing_is_missing() {
        let b = AudioBuffer::new(vec![0.0; 8000], SR as u32).unwrap();
        let p = measure(&b);
        assert_eq!(p.jitter_local, None);
        assert_eq!(p.shimmer_local, None);
        assert_eq!(p.hnr_db, None);
    }
}
