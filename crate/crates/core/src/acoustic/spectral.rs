use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{frame_geometry, n_frames, LldTrack};
use crate::audio::AudioBuffer;

pub const INTENSITY_FLOOR_DB: f64 = -120.0;
/// 2 + fs/1000 at 16 kHz, rounded down to even.
pub const LPC_ORDER: usize = 12;
const PRE_EMPHASIS: f64 = 0.97;
/// White-noise correction on the zero-lag autocorrelation (-40 dB floor).
const LPC_NOISE_FLOOR: f64 = 1e-4;
const MAX_FORMANT_BW_HZ: f64 = 400.0;
const MIN_FORMANT_HZ: f64 = 90.0;
const N_MEL: usize = 26;
pub const N_MFCC: usize = 4;
pub const N_FORMANTS: usize = 4;
const POWER_FLOOR: f64 = 1e-30;

/// Per-frame spectral descriptors of one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralTracks {
    pub intensity_db: LldTrack,
    pub slope_0_500: LldTrack,
    pub slope_500_1500: LldTrack,
    pub alpha_ratio: LldTrack,
    pub hammarberg: LldTrack,
    pub flux: LldTrack,
    pub mfcc: Vec<LldTrack>,
    pub formant_hz: Vec<LldTrack>,
    pub formant_bw: Vec<LldTrack>,
}

impl SpectralTracks {
    pub fn into_tracks(self) -> Vec<LldTrack> {
        let mut v = vec![
            self.intensity_db,
            self.slope_0_500,
            self.slope_500_1500,
            self.alpha_ratio,
            self.hammarberg,
            self.flux,
        ];
        v.extend(self.mfcc);
        v.extend(self.formant_hz);
        v.extend(self.formant_bw);
        v
    }
}

fn hamming(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

/// Least-squares slope of dB power against log2 frequency over bins with
/// frequency in `(lo_hz, hi_hz]`, in dB per octave.
fn band_slope(power: &[f64], bin_hz: f64, lo_hz: f64, hi_hz: f64) -> f64 {
    let pts: Vec<(f64, f64)> = (1..power.len())
        .map(|k| (k as f64 * bin_hz, power[k]))
        .filter(|&(f, _)| f > lo_hz && f <= hi_hz)
        .map(|(f, p)| (f.log2(), 10.0 * p.max(POWER_FLOOR).log10()))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return 0.0;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

fn band_energy(power: &[f64], bin_hz: f64, lo: f64, hi: f64) -> f64 {
    power
        .iter()
        .enumerate()
        .filter(|(k, _)| {
            let f = *k as f64 * bin_hz;
            f >= lo && f < hi
        })
        .map(|(_, p)| p)
        .sum()
}

fn band_peak(power: &[f64], bin_hz: f64, lo: f64, hi: f64) -> f64 {
    power
        .iter()
        .enumerate()
        .filter(|(k, _)| {
            let f = *k as f64 * bin_hz;
            f >= lo && f < hi
        })
        .map(|(_, &p)| p)
        .fold(0.0, f64::max)
}

fn mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_inv(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular mel filters over `n_bins` power bins.
fn mel_filterbank(n_bins: usize, bin_hz: f64, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    let (ml, mh) = (mel(lo), mel(hi));
    let centers: Vec<f64> = (0..N_MEL + 2)
        .map(|i| mel_inv(ml + (mh - ml) * i as f64 / (N_MEL + 1) as f64))
        .collect();
    (0..N_MEL)
        .map(|m| {
            let (a, b, c) = (centers[m], centers[m + 1], centers[m + 2]);
            (0..n_bins)
                .map(|k| {
                    let f = k as f64 * bin_hz;
                    if f <= a || f >= c {
                        0.0
                    } else if f <= b {
                        (f - a) / (b - a)
                    } else {
                        (c - f) / (c - b)
                    }
                })
                .collect()
        })
        .collect()
}

/// LPC coefficients `a[1..=order]` of `A(z) = 1 + Σ a_k z^-k` by the
/// autocorrelation method (Levinson-Durbin). `None` for a silent frame.
pub fn lpc(frame: &[f64], order: usize) -> Option<Vec<f64>> {
    let n = frame.len();
    if n <= order {
        return None;
    }
    let mut r: Vec<f64> = (0..=order)
        .map(|lag| (0..n - lag).map(|i| frame[i] * frame[i + lag]).sum())
        .collect();
    if r[0] <= 0.0 {
        return None;
    }
    r[0] *= 1.0 + LPC_NOISE_FLOOR;
    let mut a = vec![0.0; order + 1];
    a[0] = 1.0;
    let mut err = r[0];
    for i in 1..=order {
        let acc: f64 = (1..i).map(|j| a[j] * r[i - j]).sum::<f64>() + r[i];
        let k = -acc / err;
        let prev = a.clone();
        for j in 1..i {
            a[j] = prev[j] + k * prev[i - j];
        }
        a[i] = k;
        err *= 1.0 - k * k;
        if err <= 0.0 {
            return None;
        }
    }
    Some(a[1..].to_vec())
}

/// Roots of the monic polynomial `z^p + c[0] z^{p-1} + ... + c[p-1]` by
/// Durand-Kerner iteration.
fn poly_roots(c: &[f64]) -> Vec<Complex<f64>> {
    let p = c.len();
    let eval = |z: Complex<f64>| {
        c.iter().fold(Complex::new(1.0, 0.0), |acc, &ck| acc * z + ck)
    };
    let seed = Complex::new(0.4, 0.9);
    let mut roots: Vec<Complex<f64>> = (0..p).map(|i| seed.powu(i as u32)).collect();
    for _ in 0..500 {
        let mut max_step: f64 = 0.0;
        for i in 0..p {
            let mut denom = Complex::new(1.0, 0.0);
            for j in 0..p {
                if i != j {
                    denom *= roots[i] - roots[j];
                }
            }
            if denom.norm() < 1e-300 {
                continue;
            }
            let step = eval(roots[i]) / denom;
            roots[i] -= step;
            max_step = max_step.max(step.norm());
        }
        if max_step < 1e-12 {
            break;
        }
    }
    roots
}

/// Formant (frequency, bandwidth) pairs in Hz, ascending by frequency, from
/// the LPC polynomial of a pre-emphasized Hamming-windowed frame.
pub fn formants_lpc(frame: &[f64], sample_rate: u32) -> Vec<(f64, f64)> {
    let sr = sample_rate as f64;
    let win = hamming(frame.len());
    let mut emph = Vec::with_capacity(frame.len());
    let mut prev = 0.0;
    for (&v, w) in frame.iter().zip(&win) {
        emph.push((v - PRE_EMPHASIS * prev) * w);
        prev = v;
    }
    let Some(a) = lpc(&emph, LPC_ORDER) else {
        return Vec::new();
    };
    let mut out: Vec<(f64, f64)> = poly_roots(&a)
        .into_iter()
        .filter(|z| z.im > 0.0)
        .map(|z| {
            let f = z.arg() * sr / (2.0 * std::f64::consts::PI);
            let bw = -z.norm().ln() * sr / std::f64::consts::PI;
            (f, bw)
        })
        .filter(|&(f, bw)| f > MIN_FORMANT_HZ && f < sr / 2.0 - MIN_FORMANT_HZ && bw > 0.0 && bw < MAX_FORMANT_BW_HZ)
        .collect();
    out.sort_by(|x, y| x.0.total_cmp(&y.0));
    out
}

/// Frame-level spectral descriptors; see [`SpectralTracks`].
pub fn spectral_tracks(seg: &AudioBuffer) -> SpectralTracks {
    let sr = seg.sample_rate();
    let (frame, hop) = frame_geometry(sr);
    let nf = n_frames(seg.len(), sr);
    let x = seg.samples();
    let fft_len = frame.next_power_of_two();
    let bin_hz = sr as f64 / fft_len as f64;
    let n_bins = fft_len / 2 + 1;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(fft_len);
    let win = hamming(frame);
    let bank = mel_filterbank(n_bins, bin_hz, 20.0, sr as f64 / 2.0);

    let mut intensity = Vec::with_capacity(nf);
    let (mut s1, mut s2, mut alpha, mut hamm, mut flux) = (vec![], vec![], vec![], vec![], vec![]);
    let mut mfcc: Vec<Vec<f64>> = (0..N_MFCC).map(|_| Vec::with_capacity(nf)).collect();
    let mut fhz: Vec<Vec<Option<f64>>> = (0..N_FORMANTS).map(|_| Vec::with_capacity(nf)).collect();
    let mut fbw: Vec<Vec<Option<f64>>> = (0..N_FORMANTS).map(|_| Vec::with_capacity(nf)).collect();
    let mut prev_norm: Option<Vec<f64>> = None;
    let mut buf = vec![Complex::new(0.0, 0.0); fft_len];

    for f in 0..nf {
        let fr = &x[f * hop..f * hop + frame];
        let ms = fr.iter().map(|v| v * v).sum::<f64>() / frame as f64;
        intensity.push(if ms > 0.0 {
            (10.0 * ms.log10()).max(INTENSITY_FLOOR_DB)
        } else {
            INTENSITY_FLOOR_DB
        });

        for (b, (v, w)) in buf.iter_mut().zip(fr.iter().zip(&win).map(|(v, w)| (v * w, 0.0)).chain(std::iter::repeat((0.0, 0.0)))) {
            *b = Complex::new(v, w);
        }
        fft.process(&mut buf);
        let power: Vec<f64> = buf[..n_bins].iter().map(|c| c.norm_sqr()).collect();

        s1.push(band_slope(&power, bin_hz, 0.0, 500.0));
        s2.push(band_slope(&power, bin_hz, 500.0, 1500.0));
        let lo = band_energy(&power, bin_hz, 50.0, 1000.0);
        let hi = band_energy(&power, bin_hz, 1000.0, 5000.0);
        alpha.push(10.0 * ((lo + POWER_FLOOR) / (hi + POWER_FLOOR)).log10());
        let pk_lo = band_peak(&power, bin_hz, 0.0, 2000.0);
        let pk_hi = band_peak(&power, bin_hz, 2000.0, 5000.0);
        hamm.push(10.0 * ((pk_lo + POWER_FLOOR) / (pk_hi + POWER_FLOOR)).log10());

        let mag: Vec<f64> = power.iter().map(|p| p.sqrt()).collect();
        let total: f64 = mag.iter().sum();
        let norm: Vec<f64> = if total > 0.0 {
            mag.iter().map(|m| m / total).collect()
        } else {
            vec![0.0; mag.len()]
        };
        flux.push(match &prev_norm {
            Some(p) => p.iter().zip(&norm).map(|(a, b)| (a - b) * (a - b)).sum(),
            None => 0.0,
        });
        prev_norm = Some(norm);

        // Floor scaled to the frame keeps MFCC 1-4 independent of gain.
        let peak = power.iter().copied().fold(0.0, f64::max);
        let floor = (peak * 1e-12).max(POWER_FLOOR);
        let log_e: Vec<f64> = bank
            .iter()
            .map(|filt| (filt.iter().zip(&power).map(|(w, p)| w * p).sum::<f64>() + floor).ln())
            .collect();
        for (c, track) in mfcc.iter_mut().enumerate() {
            let k = (c + 1) as f64;
            let v: f64 = log_e
                .iter()
                .enumerate()
                .map(|(m, e)| e * (std::f64::consts::PI * k * (m as f64 + 0.5) / N_MEL as f64).cos())
                .sum();
            track.push(v * (2.0 / N_MEL as f64).sqrt());
        }

        let formants = if ms > 0.0 { formants_lpc(fr, sr) } else { Vec::new() };
        for i in 0..N_FORMANTS {
            fhz[i].push(formants.get(i).map(|p| p.0));
            fbw[i].push(formants.get(i).map(|p| p.1));
        }
    }

    SpectralTracks {
        intensity_db: LldTrack::dense("intensity_db", intensity),
        slope_0_500: LldTrack::dense("slope_0_500", s1),
        slope_500_1500: LldTrack::dense("slope_500_1500", s2),
        alpha_ratio: LldTrack::dense("alpha_ratio", alpha),
        hammarberg: LldTrack::dense("hammarberg", hamm),
        flux: LldTrack::dense("spectral_flux", flux),
        mfcc: mfcc
            .into_iter()
            .enumerate()
            .map(|(i, v)| LldTrack::dense(format!("mfcc{}", i + 1), v))
            .collect(),
        formant_hz: fhz
            .into_iter()
            .enumerate()
            .map(|(i, v)| LldTrack::masked(format!("f{}_hz", i + 1), v))
            .collect(),
        formant_bw: fbw
            .into_iter()
            .enumerate()
            .map(|(i, v)| LldTrack::masked(format!("f{}_bw", i + 1), v))
            .collect(),
    }
}

/// Per-frame intensity, spectral slopes, alpha ratio, Hammarberg index,
/// spectral flux, MFCC 1-4, and formant frequencies/bandwidths.
pub fn spectral_llds(seg: &AudioBuffer) -> Vec<LldTrack> {
    spectral_tracks(seg).into_tracks()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::quantile_linear;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    const SR: u32 = 16_000;

    fn noise(seed: u64, seconds: f64, sd: f64) -> AudioBuffer {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(0.0, sd).unwrap();
        AudioBuffer::new((0..(SR as f64 * seconds) as usize).map(|_| d.sample(&mut rng)).collect(), SR).unwrap()
    }

    fn tone(freq: f64, seconds: f64, amp: f64) -> AudioBuffer {
        AudioBuffer::new(
            (0..(SR as f64 * seconds) as usize)
                .map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / SR as f64).sin())
                .collect(),
            SR,
        )
        .unwrap()
    }

    fn mean(v: &[f64]) -> f64 {
        v.iter().sum::<f64>() / v.len() as f64
    }

    #[test]
    fn white_noise_has_flat_slope() {
        let t = spectral_tracks(&noise(11, 2.0, 0.1));
        let a = mean(&t.slope_0_500.values);
        let b = mean(&t.slope_500_1500.values);
        assert!(a.abs() <= 1.0, "slope 0-500 {a}");
        assert!(b.abs() <= 1.0, "slope 500-1500 {b}");
    }

    #[test]
    fn pure_tone_first_formant() {
        let t = spectral_tracks(&tone(1000.0, 0.5, 0.5));
        let mut f1 = t.formant_hz[0].valid_values();
        assert!(!f1.is_empty());
        let med = quantile_linear(&mut f1, 0.5);
        assert!((med - 1000.0).abs() <= 50.0, "F1 {med}");
    }

    #[test]
    fn silence_sits_at_floor() {
        let t = spectral_tracks(&AudioBuffer::new(vec![0.0; 8000], SR).unwrap());
        assert!(t.intensity_db.values.iter().all(|&v| v == INTENSITY_FLOOR_DB));
        assert!(t.flux.values.iter().all(|&v| v == 0.0));
        assert!(t.formant_hz[0].valid_values().is_empty());
    }

    #[test]
    fn gain_shifts_intensity_only() {
        let b = noise(5, 0.5, 0.05);
        let c = 3.7;
        let t1 = spectral_tracks(&b);
        let t2 = spectral_tracks(&b.scaled(c));
        let shift = 20.0 * c.log10();
        for (x, y) in t1.intensity_db.values.iter().zip(&t2.intensity_db.values) {
            assert!((y - x - shift).abs() < 1e-9);
        }
        for (a, b) in [(&t1.slope_0_500, &t2.slope_0_500), (&t1.alpha_ratio, &t2.alpha_ratio), (&t1.flux, &t2.flux), (&t1.mfcc[0], &t2.mfcc[0])] {
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!((x - y).abs() < 1e-6, "{} {x} {y}", a.name);
            }
        }
    }

    #[test]
    fn levinson_recovers_ar2() {
        // x[n] = 1.3 x[n-1] - 0.6 x[n-2] + e[n]
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = Normal::new(0.0, 1.0).unwrap();
        let mut x = vec![0.0; 20_000];
        for n in 2..x.len() {
            x[n] = 1.3 * x[n - 1] - 0.6 * x[n - 2] + d.sample(&mut rng);
        }
        let a = lpc(&x, 2).unwrap();
        assert!((a[0] + 1.3).abs() < 0.03 && (a[1] - 0.6).abs() < 0.03, "{a:?}");
    }

    #[test]
    fn roots_of_known_polynomial() {
        // (z - 0.5)(z + 0.25)(z^2 + 1) = z^4 - 0.25 z^3 + 0.875 z^2 - 0.25 z - 0.125
        let mut r = poly_roots(&[-0.25, 0.875, -0.25, -0.125]);
        r.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        let expect = [(-0.25, 0.0), (0.0, -1.0), (0.0, 1.0), (0.5, 0.0)];
        for (z, (re, im)) in r.iter().zip(expect) {
            assert!((z.re - re).abs() < 1e-9 && (z.im - im).abs() < 1e-9, "{r:?}");
        }
    }
}
