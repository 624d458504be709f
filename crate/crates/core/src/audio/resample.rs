use super::AudioBuffer;

/// Zero crossings of the sinc kernel on each side, at the filter cutoff.
const ZERO_CROSSINGS: f64 = 16.0;
/// Cutoff as a fraction of the lower Nyquist frequency.
const ROLLOFF: f64 = 0.94;
const KAISER_BETA: f64 = 8.6;
/// Above this many phases the kernel is evaluated on the fly.
const MAX_TABLE_PHASES: usize = 4096;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..64 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

struct Kernel {
    cutoff: f64,
    half_width: f64,
    i0_beta: f64,
}

impl Kernel {
    fn weight(&self, offset: f64) -> f64 {
        let u = offset / self.half_width;
        if u.abs() >= 1.0 {
            return 0.0;
        }
        let x = self.cutoff * offset;
        let sinc = if x == 0.0 {
            1.0
        } else {
            (std::f64::consts::PI * x).sin() / (std::f64::consts::PI * x)
        };
        let win = bessel_i0(KAISER_BETA * (1.0 - u * u).sqrt()) / self.i0_beta;
        self.cutoff * sinc * win
    }
}

/// Band-limited rational resampling with a Kaiser-windowed sinc, organised
/// as a polyphase filter bank. Output length is `round(n · target / source)`;
/// an identical rate returns the input unchanged.
pub fn resample(buf: &AudioBuffer, target_rate: u32) -> AudioBuffer {
    assert!(target_rate > 0, "target rate must be positive");
    let source_rate = buf.sample_rate();
    if source_rate == target_rate || buf.is_empty() {
        return AudioBuffer::new(
            buf.samples().to_vec(),
            if buf.is_empty() { target_rate } else { source_rate },
        )
        .expect("validated input");
    }
    let g = gcd(source_rate as u64, target_rate as u64);
    let up = (target_rate as u64 / g) as usize;
    let down = (source_rate as u64 / g) as usize;
    let n_in = buf.len();
    let n_out = ((n_in as f64) * up as f64 / down as f64).round() as usize;

    let cutoff = ROLLOFF * (up as f64 / down as f64).min(1.0);
    let kernel = Kernel {
        cutoff,
        half_width: ZERO_CROSSINGS / cutoff,
        i0_beta: bessel_i0(KAISER_BETA),
    };
    let reach = kernel.half_width.ceil() as isize;
    let taps = (2 * reach + 1) as usize;

    // Phase p: output position has fractional input offset p / up.
    let phase_taps = |p: usize| -> Vec<f64> {
        let frac = p as f64 / up as f64;
        let mut w: Vec<f64> = (0..taps)
            .map(|k| kernel.weight((k as isize - reach) as f64 - frac))
            .collect();
        let s: f64 = w.iter().sum();
        if s != 0.0 {
            w.iter_mut().for_each(|x| *x /= s);
        }
        w
    };
    let table: Option<Vec<Vec<f64>>> = (up <= MAX_TABLE_PHASES).then(|| (0..up).map(phase_taps).collect());

    let x = buf.samples();
    let mut out = Vec::with_capacity(n_out);
    for n in 0..n_out {
        let pos = n * down;
        let base = (pos / up) as isize;
        let phase = pos % up;
        let owned;
        let w: &[f64] = match &table {
            Some(t) => &t[phase],
            None => {
                owned = phase_taps(phase);
                &owned
            }
        };
        let mut acc = 0.0;
        for (k, wk) in w.iter().enumerate() {
            let i = base + k as isize - reach;
            if i >= 0 && (i as usize) < n_in {
                acc += wk * x[i as usize];
            }
        }
        out.push(acc);
    }
    AudioBuffer::new(out, target_rate).expect("finite filter output")
}
