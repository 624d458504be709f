//! Frame-level acoustic descriptors (pitch, perturbation, spectral shape,
//! formants) and their functionals, assembled into two fixed inventories: a
//! 39-feature voice-report set and an 88-feature functional set.
//!
//! All analysis uses 25 ms frames with a 10 ms hop at 16 kHz.

mod functionals;
mod inventory;
mod perturbation;
mod pitch;
mod spectral;

pub use functionals::{functionals, Functionals};
pub use inventory::{egemaps_names, egemaps_vector, is_level_feature, praat_names, praat_vector, SegmentAnalysis};
pub use perturbation::{glottal_cycles, perturbation, GlottalCycles, Perturbation};
pub use pitch::{analyze_pitch, f0_track, PitchAnalysis, F0_MAX_HZ, F0_MIN_HZ, VOICING_THRESHOLD};
pub use spectral::{formants_lpc, lpc, spectral_llds, spectral_tracks, SpectralTracks, INTENSITY_FLOOR_DB, LPC_ORDER};

use serde::{Deserialize, Serialize};

pub const FRAME_MS: f64 = 25.0;
pub const HOP_MS: f64 = 10.0;

/// A per-frame descriptor series. When `mask` is present only frames marked
/// `true` carry a defined value; other entries hold 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LldTrack {
    pub name: String,
    pub values: Vec<f64>,
    pub frame_hop_ms: f64,
    pub mask: Option<Vec<bool>>,
}

impl LldTrack {
    pub fn dense(name: impl Into<String>, values: Vec<f64>) -> Self {
        LldTrack {
            name: name.into(),
            values,
            frame_hop_ms: HOP_MS,
            mask: None,
        }
    }

    /// Track from optional per-frame values; `None` frames are masked out.
    pub fn masked(name: impl Into<String>, values: Vec<Option<f64>>) -> Self {
        let mask: Vec<bool> = values.iter().map(|v| v.is_some()).collect();
        LldTrack {
            name: name.into(),
            values: values.into_iter().map(|v| v.unwrap_or(0.0)).collect(),
            frame_hop_ms: HOP_MS,
            mask: Some(mask),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_valid(&self, i: usize) -> bool {
        self.mask.as_ref().is_none_or(|m| m[i])
    }

    pub fn valid_values(&self) -> Vec<f64> {
        (0..self.len())
            .filter(|&i| self.is_valid(i))
            .map(|i| self.values[i])
            .collect()
    }

    /// Same frames restricted further by `keep`.
    pub fn restricted(&self, keep: &[bool], name: impl Into<String>) -> LldTrack {
        let vals = (0..self.len())
            .map(|i| (self.is_valid(i) && keep.get(i).copied().unwrap_or(false)).then_some(self.values[i]))
            .collect();
        LldTrack::masked(name, vals)
    }

    pub fn reversed(&self) -> LldTrack {
        LldTrack {
            name: self.name.clone(),
            values: self.values.iter().rev().copied().collect(),
            frame_hop_ms: self.frame_hop_ms,
            mask: self.mask.as_ref().map(|m| m.iter().rev().copied().collect()),
        }
    }
}

/// Frame length and hop in samples.
pub(crate) fn frame_geometry(sample_rate: u32) -> (usize, usize) {
    let sr = sample_rate as f64;
    (
        (FRAME_MS * sr / 1000.0).round() as usize,
        (HOP_MS * sr / 1000.0).round() as usize,
    )
}

pub(crate) fn n_frames(n_samples: usize, sample_rate: u32) -> usize {
    let (frame, hop) = frame_geometry(sample_rate);
    if n_samples < frame {
        0
    } else {
        (n_samples - frame) / hop + 1
    }
}
