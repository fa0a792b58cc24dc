use super::{AudioBuffer, FeatioError, Result};

/// Linear-interpolation resampler.
///
/// The output has `round(n * target_rate / source_rate)` samples. Output
/// sample `k` sits at source position `k * source_rate / target_rate`;
/// positions past the last input sample hold the last sample.
pub fn resample_linear(audio: &AudioBuffer, target_rate: u32) -> Result<AudioBuffer> {
    if target_rate == 0 {
        return Err(FeatioError::InvalidAudio("target rate must be positive".into()));
    }
    audio.validate()?;
    if target_rate == audio.sample_rate || audio.samples.is_empty() {
        return Ok(AudioBuffer {
            sample_rate: target_rate,
            ..audio.clone()
        });
    }

    let src = &audio.samples;
    let ratio = target_rate as f64 / audio.sample_rate as f64;
    let out_len = (src.len() as f64 * ratio).round() as usize;
    let step = audio.sample_rate as f64 / target_rate as f64;
    let last = src.len() - 1;
    let samples = (0..out_len)
        .map(|k| {
            let pos = k as f64 * step;
            let i = pos.floor() as usize;
            if i >= last {
                return src[last];
            }
            let frac = pos - i as f64;
            let (a, b) = (src[i] as f64, src[i + 1] as f64);
            (a + (b - a) * frac) as f32
        })
        .collect();
    Ok(AudioBuffer {
        samples,
        sample_rate: target_rate,
        channels: audio.channels,
    })
}
