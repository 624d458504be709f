//! Audio buffers, WAV I/O, band-limited resampling and energy-based voice
//! activity detection.

mod resample;
mod vad;
mod wav;

pub use resample::resample;
pub use vad::{clip_to_spans, vad_segments, write_segments, Segment, VadConfig};
pub use wav::{load_wav, write_wav};

use crate::error::{Error, Result};

/// Sample rate every extractor expects.
pub const TARGET_RATE: u32 = 16_000;

#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Validation("sample rate must be positive".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::Validation("audio contains non-finite samples".into()));
        }
        Ok(AudioBuffer {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Samples `[start, end)`, clamped to the buffer.
    pub fn slice(&self, start: usize, end: usize) -> AudioBuffer {
        let end = end.min(self.len());
        let start = start.min(end);
        AudioBuffer {
            samples: self.samples[start..end].to_vec(),
            sample_rate: self.sample_rate,
        }
    }

    /// Span given in seconds, clamped to the buffer.
    pub fn slice_seconds(&self, start_s: f64, end_s: f64) -> AudioBuffer {
        let sr = self.sample_rate as f64;
        self.slice(
            (start_s * sr).round().max(0.0) as usize,
            (end_s * sr).round().max(0.0) as usize,
        )
    }

    pub fn scaled(&self, c: f64) -> AudioBuffer {
        AudioBuffer {
            samples: self.samples.iter().map(|s| s * c).collect(),
            sample_rate: self.sample_rate,
        }
    }
}
