use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{frame_geometry, n_frames, LldTrack};
use crate::audio::AudioBuffer;

pub const F0_MIN_HZ: f64 = 60.0;
pub const F0_MAX_HZ: f64 = 500.0;
/// Minimum normalized autocorrelation peak for a voiced frame.
pub const VOICING_THRESHOLD: f64 = 0.45;
/// Frames quieter than this (relative to the loudest frame) are unvoiced.
const SILENCE_REL_DB: f64 = -50.0;
/// Among candidate lags, the shortest whose correlation is within this
/// factor of the best wins (suppresses period-doubling errors).
const OCTAVE_TOLERANCE: f64 = 0.97;

#[derive(Debug, Clone, PartialEq)]
pub struct PitchAnalysis {
    /// F0 in Hz; unvoiced frames masked out.
    pub f0: LldTrack,
    /// Normalized autocorrelation at the chosen lag, voiced frames only.
    pub harmonicity: LldTrack,
}

impl PitchAnalysis {
    pub fn voiced(&self) -> Vec<bool> {
        self.f0.mask.clone().unwrap_or_default()
    }
}

pub fn f0_track(seg: &AudioBuffer) -> LldTrack {
    analyze_pitch(seg).f0
}

/// Per-frame F0 by normalized autocorrelation (per-lag energy normalization),
/// with parabolic refinement of the chosen lag.
pub fn analyze_pitch(seg: &AudioBuffer) -> PitchAnalysis {
    let sr = seg.sample_rate();
    let (frame, hop) = frame_geometry(sr);
    let nf = n_frames(seg.len(), sr);
    let x = seg.samples();

    let min_lag = (sr as f64 / F0_MAX_HZ).floor().max(2.0) as usize;
    let max_lag = ((sr as f64 / F0_MIN_HZ).ceil() as usize).min(frame.saturating_sub(frame / 4));

    let energies: Vec<f64> = (0..nf)
        .map(|f| x[f * hop..f * hop + frame].iter().map(|v| v * v).sum::<f64>())
        .collect();
    let loudest = energies.iter().copied().fold(0.0, f64::max);
    let silence = loudest * 10f64.powf(SILENCE_REL_DB / 10.0);

    let fft_len = (2 * frame).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(fft_len);
    let inv = planner.plan_fft_inverse(fft_len);
    let mut buf = vec![Complex::new(0.0, 0.0); fft_len];

    let mut f0 = Vec::with_capacity(nf);
    let mut harm = Vec::with_capacity(nf);
    for (f, &energy) in energies.iter().enumerate() {
        if energy <= silence || energy == 0.0 || max_lag <= min_lag + 1 {
            f0.push(None);
            harm.push(None);
            continue;
        }
        let raw = &x[f * hop..f * hop + frame];
        let mean = raw.iter().sum::<f64>() / frame as f64;
        let fr: Vec<f64> = raw.iter().map(|v| v - mean).collect();

        for (b, &v) in buf.iter_mut().zip(fr.iter().chain(std::iter::repeat(&0.0))) {
            *b = Complex::new(v, 0.0);
        }
        fwd.process(&mut buf);
        for b in buf.iter_mut() {
            *b = Complex::new(b.norm_sqr(), 0.0);
        }
        inv.process(&mut buf);
        let scale = 1.0 / fft_len as f64;

        // prefix[i] = sum of squares of fr[..i]
        let mut prefix = vec![0.0; frame + 1];
        for i in 0..frame {
            prefix[i + 1] = prefix[i] + fr[i] * fr[i];
        }
        let r = |lag: usize| -> f64 {
            let cross = buf[lag].re * scale;
            let e0 = prefix[frame - lag];
            let e1 = prefix[frame] - prefix[lag];
            let d = (e0 * e1).sqrt();
            if d <= 0.0 {
                0.0
            } else {
                (cross / d).clamp(-1.0, 1.0)
            }
        };
        let corr: Vec<f64> = (min_lag - 1..=max_lag + 1).map(r).collect();
        let at = |lag: usize| corr[lag + 1 - min_lag];

        let peaks: Vec<usize> = (min_lag..=max_lag)
            .filter(|&l| at(l) > at(l - 1) && at(l) >= at(l + 1))
            .collect();
        let Some(best) = peaks.iter().map(|&l| at(l)).reduce(f64::max) else {
            f0.push(None);
            harm.push(None);
            continue;
        };
        if best < VOICING_THRESHOLD {
            f0.push(None);
            harm.push(None);
            continue;
        }
        let lag = *peaks
            .iter()
            .find(|&&l| at(l) >= OCTAVE_TOLERANCE * best)
            .expect("best peak qualifies");
        let (a, b, c) = (at(lag - 1), at(lag), at(lag + 1));
        let denom = a - 2.0 * b + c;
        let delta = if denom.abs() > 1e-12 {
            (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
        } else {
            0.0
        };
        let refined = lag as f64 + delta;
        let peak = (b - 0.25 * (a - c) * delta).min(1.0);
        f0.push(Some(sr as f64 / refined));
        harm.push(Some(peak));
    }
    PitchAnalysis {
        f0: LldTrack::masked("f0_hz", f0),
        harmonicity: LldTrack::masked("harmonicity", harm),
    }
}
