//! Audio ingestion, the MFCC front end and the `.pma` feature archive.

mod archive;
mod mfcc;
mod resample;
mod wav;

pub use archive::{read_archive, write_archive, FeatureArchive, ARCHIVE_MAGIC, ARCHIVE_VERSION};
pub use mfcc::{compute_mfcc, frame_count, MfccConfig};
pub use resample::resample_linear;
pub use wav::read_wav;

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FeatioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported audio encoding in {path}: {reason}")]
    UnsupportedEncoding { path: PathBuf, reason: String },
    #[error("audio file {0} contains no samples")]
    ZeroLength(PathBuf),
    #[error("invalid audio buffer: {0}")]
    InvalidAudio(String),
    #[error("invalid MFCC configuration: {0}")]
    InvalidConfig(String),
    #[error("audio has {samples} samples, shorter than one {window}-sample window")]
    TooShort { samples: usize, window: usize },
    #[error("invalid feature matrix {id:?}: {reason}")]
    InvalidMatrix { id: String, reason: String },
    #[error("duplicate stimulus id {0:?} in archive")]
    DuplicateId(String),
    #[error("inconsistent dims: {id:?} has {found}, archive has {expected}")]
    InconsistentDims {
        id: String,
        expected: usize,
        found: usize,
    },
    #[error("inconsistent frame period: {id:?} has {found} us, archive has {expected} us")]
    InconsistentFramePeriod { id: String, expected: u32, found: u32 },
    #[error("cannot write an archive with no entries")]
    EmptyArchive,
    #[error("bad magic bytes {0:?}, not a feature archive")]
    BadMagic([u8; 4]),
    #[error("unsupported archive version {0}")]
    UnsupportedVersion(u16),
    #[error("archive truncated: {0}")]
    Truncated(String),
    #[error("corrupt archive: {0}")]
    Corrupt(String),
    #[error("unknown stimulus id {0:?}")]
    UnknownId(String),
}

pub type Result<T> = std::result::Result<T, FeatioError>;

/// Mono (after ingestion) PCM audio with samples in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
    pub channels: u16,
}

impl AudioBuffer {
    pub fn mono(samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        let buffer = AudioBuffer {
            samples,
            sample_rate,
            channels: 1,
        };
        buffer.validate()?;
        Ok(buffer)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(FeatioError::InvalidAudio("sample rate must be positive".into()));
        }
        if let Some(i) = self.samples.iter().position(|s| !s.is_finite()) {
            return Err(FeatioError::InvalidAudio(format!("sample {i} is not finite")));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Frames x dims representation of one stimulus, stored row-major by frame.
///
/// The frame period is kept in whole microseconds, the unit of the archive
/// header, so archive round trips are exact.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    stimulus_id: String,
    frames: usize,
    dims: usize,
    frame_period_us: u32,
    data: Vec<f32>,
}

impl FeatureMatrix {
    pub fn new(
        stimulus_id: impl Into<String>,
        dims: usize,
        frame_period_us: u32,
        data: Vec<f32>,
    ) -> Result<Self> {
        let stimulus_id = stimulus_id.into();
        let invalid = |reason: String| FeatioError::InvalidMatrix {
            id: stimulus_id.clone(),
            reason,
        };
        if stimulus_id.is_empty() {
            return Err(invalid("empty stimulus id".into()));
        }
        if dims == 0 {
            return Err(invalid("dims must be at least 1".into()));
        }
        if data.is_empty() || data.len() % dims != 0 {
            return Err(invalid(format!(
                "{} values do not form whole frames of {dims} dims",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("value {i} is not finite")));
        }
        Ok(FeatureMatrix {
            frames: data.len() / dims,
            stimulus_id,
            dims,
            frame_period_us,
            data,
        })
    }

    /// Builds a matrix from a list of equal-length frames.
    pub fn from_frames(
        stimulus_id: impl Into<String>,
        frame_period_us: u32,
        frames: &[Vec<f32>],
    ) -> Result<Self> {
        let stimulus_id = stimulus_id.into();
        let dims = frames.first().map_or(0, Vec::len);
        if frames.iter().any(|f| f.len() != dims) {
            return Err(FeatioError::InvalidMatrix {
                id: stimulus_id,
                reason: "frames have different lengths".into(),
            });
        }
        let data = frames.iter().flatten().copied().collect();
        Self::new(stimulus_id, dims, frame_period_us, data)
    }

    pub fn stimulus_id(&self) -> &str {
        &self.stimulus_id
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn frame_period_us(&self) -> u32 {
        self.frame_period_us
    }

    /// Frame period in seconds.
    pub fn frame_period(&self) -> f64 {
        self.frame_period_us as f64 / 1e6
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn frame(&self, t: usize) -> &[f32] {
        &self.data[t * self.dims..(t + 1) * self.dims]
    }

    pub fn iter_frames(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dims)
    }

    pub fn with_id(mut self, stimulus_id: impl Into<String>) -> Self {
        self.stimulus_id = stimulus_id.into();
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_rejects_ragged_and_nonfinite_data() {
        assert!(FeatureMatrix::new("a", 2, 10_000, vec![1.0, 2.0, 3.0]).is_err());
        assert!(FeatureMatrix::new("a", 1, 10_000, vec![f32::NAN]).is_err());
        assert!(FeatureMatrix::new("a", 1, 10_000, vec![]).is_err());
        assert!(FeatureMatrix::new("", 1, 10_000, vec![1.0]).is_err());
        let m = FeatureMatrix::new("a", 2, 10_000, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m.frames(), 2);
        assert_eq!(m.frame(1), &[3.0, 4.0]);
        assert_eq!(m.frame_period(), 0.01);
    }

    #[test]
    fn audio_buffer_invariants() {
        assert!(AudioBuffer::mono(vec![0.0, f32::INFINITY], 16_000).is_err());
        assert!(AudioBuffer::mono(vec![0.0], 0).is_err());
        assert!(AudioBuffer::mono(vec![0.0; 8000], 16_000).unwrap().duration() == 0.5);
    }
}
