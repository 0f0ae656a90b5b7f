//! In-memory audio and feature containers.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Mono audio with samples normalized to `[-1, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f32>,
    sample_rate_hz: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f32>, sample_rate_hz: u32) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::Precondition("sample rate must be positive".into()));
        }
        if let Some(pos) = samples.iter().position(|s| !(-1.0..1.0).contains(s)) {
            return Err(Error::Precondition(format!(
                "sample {pos} = {} lies outside [-1, 1)",
                samples[pos]
            )));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    /// Builds a buffer from signed 16-bit PCM, dividing by 32768 so that
    /// -32768 maps exactly to -1.0.
    pub fn from_pcm16(pcm: &[i16], sample_rate_hz: u32) -> Result<Self> {
        let samples = pcm.iter().map(|&s| f32::from(s) / 32768.0).collect();
        Self::new(samples, sample_rate_hz)
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn channels(&self) -> u16 {
        1
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate_hz)
    }
}

/// A frames x dims matrix of per-frame speech features, stored row-major.
///
/// Frame `i` starts at `i * frame_shift_ms`. Values are kept as `f32`, the
/// precision of the on-disk feature format, so that a write/read cycle is
/// bit-exact.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: Vec<f32>,
    num_frames: usize,
    num_dims: usize,
    pub frame_shift_ms: f32,
    pub frame_length_ms: f32,
    pub source_id: String,
    pub extractor_tag: String,
}

impl FeatureMatrix {
    pub fn new(
        data: Vec<f32>,
        num_frames: usize,
        num_dims: usize,
        frame_shift_ms: f32,
        frame_length_ms: f32,
    ) -> Result<Self> {
        if num_frames == 0 || num_dims == 0 {
            return Err(Error::Shape(format!(
                "feature matrix must have at least one frame and one dimension, got {num_frames}x{num_dims}"
            )));
        }
        if data.len() != num_frames * num_dims {
            return Err(Error::Shape(format!(
                "expected {num_frames}x{num_dims} = {} values, got {}",
                num_frames * num_dims,
                data.len()
            )));
        }
        if !(frame_shift_ms > 0.0 && frame_shift_ms.is_finite()) {
            return Err(Error::Precondition(format!(
                "frame shift must be positive, got {frame_shift_ms}"
            )));
        }
        if !(frame_length_ms > 0.0 && frame_length_ms.is_finite()) {
            return Err(Error::Precondition(format!(
                "frame length must be positive, got {frame_length_ms}"
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Precondition(format!(
                "non-finite value at frame {}, dim {}",
                pos / num_dims,
                pos % num_dims
            )));
        }
        Ok(Self {
            data,
            num_frames,
            num_dims,
            frame_shift_ms,
            frame_length_ms,
            source_id: String::new(),
            extractor_tag: String::new(),
        })
    }

    /// Builds a matrix from a list of equally long frame vectors.
    pub fn from_rows(rows: &[Vec<f32>], frame_shift_ms: f32, frame_length_ms: f32) -> Result<Self> {
        let dims = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != dims) {
            return Err(Error::Shape(format!(
                "row {bad} has {} values, expected {dims}",
                rows[bad].len()
            )));
        }
        let data = rows.iter().flatten().copied().collect();
        Self::new(data, rows.len(), dims, frame_shift_ms, frame_length_ms)
    }

    pub fn with_ids(mut self, source_id: impl Into<String>, extractor_tag: impl Into<String>) -> Self {
        self.source_id = source_id.into();
        self.extractor_tag = extractor_tag.into();
        self
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn num_dims(&self) -> usize {
        self.num_dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn frame(&self, i: usize) -> &[f32] {
        &self.data[i * self.num_dims..(i + 1) * self.num_dims]
    }

    pub fn frames(&self) -> core::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(self.num_dims)
    }

    pub fn get(&self, frame: usize, dim: usize) -> f32 {
        self.data[frame * self.num_dims + dim]
    }

    /// Start time of frame `i` in milliseconds.
    pub fn frame_time_ms(&self, i: usize) -> f64 {
        i as f64 * f64::from(self.frame_shift_ms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn pcm_normalization_divides_by_32768() {
        let a = AudioBuffer::from_pcm16(&[-32768, 0, 32767], 16000).unwrap();
        assert_eq!(a.samples(), &[-1.0, 0.0, 32767.0 / 32768.0]);
        assert_eq!(a.channels(), 1);
    }

    #[test]
    fn rejects_out_of_range_samples() {
        assert!(AudioBuffer::new(vec![0.0, 1.0], 16000).is_err());
        assert!(AudioBuffer::new(vec![0.0], 0).is_err());
    }

    #[test]
    fn feature_matrix_invariants() {
        assert!(FeatureMatrix::new(vec![], 0, 3, 10.0, 25.0).is_err());
        assert!(FeatureMatrix::new(vec![0.0; 5], 2, 3, 10.0, 25.0).is_err());
        assert!(FeatureMatrix::new(vec![f32::NAN; 6], 2, 3, 10.0, 25.0).is_err());
        assert!(FeatureMatrix::new(vec![0.0; 6], 2, 3, 0.0, 25.0).is_err());
        let m = FeatureMatrix::new((0..6).map(|v| v as f32).collect(), 2, 3, 10.0, 25.0).unwrap();
        assert_eq!(m.frame(1), &[3.0, 4.0, 5.0]);
        assert_eq!(m.frame_time_ms(3), 30.0);
    }

    #[test]
    fn from_rows_checks_widths() {
        assert!(FeatureMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0]], 10.0, 25.0).is_err());
        let m = FeatureMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]], 10.0, 25.0).unwrap();
        assert_eq!(m.get(1, 0), 3.0);
    }
}
