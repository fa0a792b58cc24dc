use std::path::Path;

use hound::{SampleFormat, WavReader};

use super::{AudioBuffer, FeatioError, Result};

/// Reads a PCM WAV file (8/16/24/32-bit integer or 32-bit float), normalizes
/// integer samples by 2^(bits-1) and averages channels down to mono.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    let unsupported = |reason: String| FeatioError::UnsupportedEncoding {
        path: path.to_path_buf(),
        reason,
    };
    let reader = WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(source) => FeatioError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => unsupported(other.to_string()),
    })?;
    let spec = reader.spec();
    let channels = usize::from(spec.channels);
    if channels == 0 {
        return Err(unsupported("zero channels".into()));
    }

    let interleaved: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| unsupported(e.to_string()))?,
        (SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let scale = 1.0 / (1u64 << (bits - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| (v as f64 * scale) as f32))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| unsupported(e.to_string()))?
        }
        (format, bits) => return Err(unsupported(format!("{format:?} with {bits} bits"))),
    };

    if interleaved.len() < channels {
        return Err(FeatioError::ZeroLength(path.to_path_buf()));
    }
    let samples = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(channels)
            .map(|frame| frame.iter().map(|&s| s as f64).sum::<f64>() / channels as f64)
            .map(|s| s as f32)
            .collect()
    };
    let buffer = AudioBuffer {
        samples,
        sample_rate: spec.sample_rate,
        channels: 1,
    };
    buffer.validate()?;
    Ok(buffer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use hound::{WavSpec, WavWriter};

    fn write<S: hound::Sample + Copy>(
        path: &Path,
        channels: u16,
        bits: u16,
        format: SampleFormat,
        samples: &[S],
    ) {
        let spec = WavSpec {
            channels,
            sample_rate: 16_000,
            bits_per_sample: bits,
            sample_format: format,
        };
        let mut w = WavWriter::create(path, spec).unwrap();
        for &s in samples {
            w.write_sample(s).unwrap();
        }
        w.finalize().unwrap();
    }

    #[test]
    fn sixteen_bit_normalization() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        write::<i16>(&p, 1, 16, SampleFormat::Int, &[0, 32767, -32768]);
        let audio = read_wav(&p).unwrap();
        assert_eq!(audio.sample_rate, 16_000);
        assert_eq!(audio.samples[0], 0.0);
        assert!((audio.samples[1] - 0.99997).abs() < 1e-5);
        assert_eq!(audio.samples[2], -1.0);
    }

    #[test]
    fn stereo_is_averaged() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.wav");
        write::<f32>(&p, 2, 32, SampleFormat::Float, &[1.0, 0.0]);
        assert_eq!(read_wav(&p).unwrap().samples, vec![0.5]);
    }

    #[test]
    fn eight_and_twenty_four_bit() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("8.wav");
        write::<i8>(&p, 1, 8, SampleFormat::Int, &[-128, 64]);
        assert_eq!(read_wav(&p).unwrap().samples, vec![-1.0, 0.5]);
        let p = dir.path().join("24.wav");
        write::<i32>(&p, 1, 24, SampleFormat::Int, &[-(1 << 23), 1 << 22]);
        assert_eq!(read_wav(&p).unwrap().samples, vec![-1.0, 0.5]);
    }

    #[test]
    fn empty_and_missing_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("empty.wav");
        write::<i16>(&p, 1, 16, SampleFormat::Int, &[]);
        assert!(matches!(read_wav(&p), Err(FeatioError::ZeroLength(_))));
        assert!(matches!(
            read_wav(dir.path().join("nope.wav")),
            Err(FeatioError::Io { .. })
        ));
        let junk = dir.path().join("junk.wav");
        std::fs::write(&junk, b"not a wav file at all").unwrap();
        assert!(matches!(
            read_wav(&junk),
            Err(FeatioError::UnsupportedEncoding { .. })
        ));
    }
}
