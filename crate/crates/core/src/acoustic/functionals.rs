use serde::{Deserialize, Serialize};

use super::LldTrack;
use crate::stats::quantile_sorted;

/// Summary statistics of the valid frames of a track. All fields are `None`
/// for a track without valid frames.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Functionals {
    pub mean: Option<f64>,
    /// Population standard deviation.
    pub std: Option<f64>,
    /// Coefficient of variation `std / |mean|`; 0 when the mean is 0.
    pub cov: Option<f64>,
    pub p20: Option<f64>,
    pub p50: Option<f64>,
    pub p80: Option<f64>,
    /// p80 - p20.
    pub range: Option<f64>,
    /// Mean positive frame-to-frame slope, units per second.
    pub rising_slope: Option<f64>,
    /// Mean magnitude of negative frame-to-frame slopes, units per second.
    pub falling_slope: Option<f64>,
}

pub fn functionals(track: &LldTrack) -> Functionals {
    let mut v = track.valid_values();
    if v.is_empty() {
        return Functionals::default();
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt();
    let cov = if mean == 0.0 { 0.0 } else { std / mean.abs() };
    v.sort_by(f64::total_cmp);
    let (p20, p50, p80) = (
        quantile_sorted(&v, 0.2),
        quantile_sorted(&v, 0.5),
        quantile_sorted(&v, 0.8),
    );

    // Slopes only between adjacent frames that are both valid.
    let dt = track.frame_hop_ms / 1000.0;
    let (mut rise, mut n_rise, mut fall, mut n_fall) = (0.0, 0usize, 0.0, 0usize);
    for i in 1..track.len() {
        if !(track.is_valid(i) && track.is_valid(i - 1)) {
            continue;
        }
        let d = (track.values[i] - track.values[i - 1]) / dt;
        if d > 0.0 {
            rise += d;
            n_rise += 1;
        } else if d < 0.0 {
            fall -= d;
            n_fall += 1;
        }
    }
    let avg = |s: f64, k: usize| if k == 0 { 0.0 } else { s / k as f64 };
    Functionals {
        mean: Some(mean),
        std: Some(std),
        cov: Some(cov),
        p20: Some(p20),
        p50: Some(p50),
        p80: Some(p80),
        range: Some(p80 - p20),
        rising_slope: Some(avg(rise, n_rise)),
        falling_slope: Some(avg(fall, n_fall)),
    }
}
