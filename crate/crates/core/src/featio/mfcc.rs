//! MFCC front end: Hann window, power spectrum, Slaney mel filterbank,
//! natural log with a floor, orthonormal DCT-II.
//!
//! Frames are taken without padding or centering, so a signal of `n`
//! samples yields `floor((n - window) / stride) + 1` frames.

use std::f64::consts::PI;

use rustfft::{num_complex::Complex, FftPlanner};

use super::{AudioBuffer, FeatioError, FeatureMatrix, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MfccConfig {
    /// Seconds.
    pub window_length: f64,
    /// Seconds.
    pub stride: f64,
    pub num_coefficients: usize,
    pub num_mel_filters: usize,
    pub fft_size: usize,
    pub log_floor: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        MfccConfig {
            window_length: 0.025,
            stride: 0.010,
            num_coefficients: 13,
            num_mel_filters: 40,
            fft_size: 512,
            log_floor: 1e-10,
        }
    }
}

impl MfccConfig {
    pub fn window_samples(&self, sample_rate: u32) -> usize {
        (self.window_length * sample_rate as f64).round() as usize
    }

    pub fn stride_samples(&self, sample_rate: u32) -> usize {
        (self.stride * sample_rate as f64).round() as usize
    }

    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        let bad = |msg: &str| Err(FeatioError::InvalidConfig(msg.to_string()));
        if self.num_coefficients == 0 || self.num_coefficients > self.num_mel_filters {
            return bad("need 1 <= num_coefficients <= num_mel_filters");
        }
        if !(self.stride > 0.0 && self.window_length >= self.stride) {
            return bad("need window_length >= stride > 0");
        }
        if self.stride_samples(sample_rate) == 0 {
            return bad("stride is shorter than one sample");
        }
        if (self.fft_size as f64) < self.window_length * sample_rate as f64 {
            return bad("fft_size is smaller than the window");
        }
        if !(self.log_floor > 0.0 && self.log_floor.is_finite()) {
            return bad("log_floor must be positive");
        }
        Ok(())
    }
}

/// Number of frames produced for `n_samples`, or `None` when the signal is
/// shorter than one window.
pub fn frame_count(n_samples: usize, window: usize, stride: usize) -> Option<usize> {
    (n_samples >= window).then(|| (n_samples - window) / stride + 1)
}

fn hz_to_mel(f: f64) -> f64 {
    const F_SP: f64 = 200.0 / 3.0;
    const MIN_LOG_HZ: f64 = 1000.0;
    let min_log_mel = MIN_LOG_HZ / F_SP;
    let logstep = 6.4f64.ln() / 27.0;
    if f >= MIN_LOG_HZ {
        min_log_mel + (f / MIN_LOG_HZ).ln() / logstep
    } else {
        f / F_SP
    }
}

fn mel_to_hz(m: f64) -> f64 {
    const F_SP: f64 = 200.0 / 3.0;
    const MIN_LOG_HZ: f64 = 1000.0;
    let min_log_mel = MIN_LOG_HZ / F_SP;
    let logstep = 6.4f64.ln() / 27.0;
    if m >= min_log_mel {
        MIN_LOG_HZ * (logstep * (m - min_log_mel)).exp()
    } else {
        F_SP * m
    }
}

/// Area-normalized triangular filters on the Slaney mel scale spanning
/// 0 Hz to Nyquist. Returns `num_filters` rows of `fft_size / 2 + 1` weights.
pub(crate) fn mel_filterbank(num_filters: usize, fft_size: usize, sample_rate: u32) -> Vec<Vec<f64>> {
    let n_bins = fft_size / 2 + 1;
    let nyquist = sample_rate as f64 / 2.0;
    let (mel_lo, mel_hi) = (hz_to_mel(0.0), hz_to_mel(nyquist));
    let edges: Vec<f64> = (0..num_filters + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (num_filters + 1) as f64))
        .collect();
    let bin_hz: Vec<f64> = (0..n_bins)
        .map(|k| k as f64 * sample_rate as f64 / fft_size as f64)
        .collect();

    (0..num_filters)
        .map(|m| {
            let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            let norm = 2.0 / (hi - lo);
            bin_hz
                .iter()
                .map(|&f| {
                    let rising = (f - lo) / (center - lo);
                    let falling = (hi - f) / (hi - center);
                    rising.min(falling).max(0.0) * norm
                })
                .collect()
        })
        .collect()
}

/// Orthonormal DCT-II basis, `num_coefficients` rows of `n` entries.
pub(crate) fn dct_basis(num_coefficients: usize, n: usize) -> Vec<Vec<f64>> {
    (0..num_coefficients)
        .map(|k| {
            let scale = if k == 0 {
                (1.0 / n as f64).sqrt()
            } else {
                (2.0 / n as f64).sqrt()
            };
            (0..n)
                .map(|i| scale * (PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64).cos())
                .collect()
        })
        .collect()
}

pub fn compute_mfcc(
    stimulus_id: &str,
    audio: &AudioBuffer,
    config: &MfccConfig,
) -> Result<FeatureMatrix> {
    audio.validate()?;
    if audio.channels != 1 {
        return Err(FeatioError::InvalidAudio(format!(
            "expected mono audio, got {} channels",
            audio.channels
        )));
    }
    let samples: Vec<f64> = audio.samples.iter().map(|&s| s as f64).collect();
    let coefficients = mfcc_f64(&samples, audio.sample_rate, config)?;
    let data = coefficients.iter().flatten().map(|&c| c as f32).collect();
    let frame_period_us = (config.stride * 1e6).round() as u32;
    FeatureMatrix::new(stimulus_id, config.num_coefficients, frame_period_us, data)
}

/// Full-precision pipeline; one row of coefficients per frame.
pub(crate) fn mfcc_f64(samples: &[f64], rate: u32, config: &MfccConfig) -> Result<Vec<Vec<f64>>> {
    config.validate(rate)?;
    let window = config.window_samples(rate);
    let stride = config.stride_samples(rate);
    let frames = frame_count(samples.len(), window, stride).ok_or(FeatioError::TooShort {
        samples: samples.len(),
        window,
    })?;

    let hann: Vec<f64> = (0..window)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / window as f64).cos())
        .collect();
    let filters = mel_filterbank(config.num_mel_filters, config.fft_size, rate);
    let dct = dct_basis(config.num_coefficients, config.num_mel_filters);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(config.fft_size);
    let n_bins = config.fft_size / 2 + 1;

    let mut buf = vec![Complex::new(0.0, 0.0); config.fft_size];
    let mut power = vec![0.0; n_bins];
    let mut log_mel = vec![0.0; config.num_mel_filters];

    let mut out = Vec::with_capacity(frames);
    for t in 0..frames {
        let start = t * stride;
        let segment = &samples[start..start + window];
        buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        for ((c, &s), &w) in buf.iter_mut().zip(segment).zip(&hann) {
            c.re = s * w;
        }
        fft.process(&mut buf);
        for (p, c) in power.iter_mut().zip(&buf) {
            *p = c.norm_sqr();
        }
        for (lm, filter) in log_mel.iter_mut().zip(&filters) {
            let energy: f64 = filter.iter().zip(&power).map(|(w, p)| w * p).sum();
            *lm = energy.max(config.log_floor).ln();
        }
        out.push(
            dct.iter()
                .map(|row| row.iter().zip(&log_mel).map(|(b, x)| b * x).sum::<f64>())
                .collect(),
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn audio(samples: Vec<f32>) -> AudioBuffer {
        AudioBuffer::mono(samples, 16_000).unwrap()
    }

    fn sine(freq: f64, n: usize) -> Vec<f32> {
        (0..n)
            .map(|i| (0.5 * (2.0 * PI * freq * i as f64 / 16_000.0).sin()) as f32)
            .collect()
    }

    /// Independent single-frame evaluation with a naive DFT.
    fn direct_frame(segment: &[f32], config: &MfccConfig) -> Vec<f64> {
        let n = segment.len();
        let nfft = config.fft_size;
        let windowed: Vec<f64> = segment
            .iter()
            .enumerate()
            .map(|(i, &s)| s as f64 * (0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()))
            .collect();
        let power: Vec<f64> = (0..=nfft / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (i, x) in windowed.iter().enumerate() {
                    let a = -2.0 * PI * (k * i) as f64 / nfft as f64;
                    re += x * a.cos();
                    im += x * a.sin();
                }
                re * re + im * im
            })
            .collect();
        let fb = mel_filterbank(config.num_mel_filters, nfft, 16_000);
        let logs: Vec<f64> = fb
            .iter()
            .map(|f| f.iter().zip(&power).map(|(w, p)| w * p).sum::<f64>().max(config.log_floor).ln())
            .collect();
        let m = logs.len();
        (0..config.num_coefficients)
            .map(|k| {
                let s = if k == 0 { (1.0 / m as f64).sqrt() } else { (2.0 / m as f64).sqrt() };
                s * logs
                    .iter()
                    .enumerate()
                    .map(|(i, x)| x * (PI * k as f64 * (2 * i + 1) as f64 / (2 * m) as f64).cos())
                    .sum::<f64>()
            })
            .collect()
    }

    #[test]
    fn one_second_gives_98_frames() {
        let m = compute_mfcc("s", &audio(vec![0.0; 16_000]), &MfccConfig::default()).unwrap();
        assert_eq!(m.frames(), 98);
        assert_eq!(m.dims(), 13);
        assert_eq!(m.frame_period_us(), 10_000);
    }

    #[test]
    fn silence_has_only_dc_energy() {
        let config = MfccConfig::default();
        let m = compute_mfcc("s", &audio(vec![0.0; 4000]), &config).unwrap();
        let c0 = (1.0f64 / 40.0).sqrt() * 40.0 * 1e-10f64.ln();
        for frame in m.iter_frames() {
            assert!((frame[0] as f64 - c0).abs() < 1e-4);
            assert!(frame[1..].iter().all(|c| c.abs() < 1e-5));
            assert_eq!(frame, m.frame(0));
        }
    }

    #[test]
    fn too_short_is_an_error() {
        let err = compute_mfcc("s", &audio(vec![0.0; 399]), &MfccConfig::default()).unwrap_err();
        assert!(matches!(err, FeatioError::TooShort { samples: 399, window: 400 }));
    }

    #[test]
    fn invalid_configs_rejected() {
        let a = audio(vec![0.0; 1000]);
        let bad = [
            MfccConfig { num_coefficients: 41, ..Default::default() },
            MfccConfig { stride: 0.03, ..Default::default() },
            MfccConfig { fft_size: 256, ..Default::default() },
            MfccConfig { log_floor: 0.0, ..Default::default() },
        ];
        for c in &bad {
            assert!(matches!(compute_mfcc("s", &a, c), Err(FeatioError::InvalidConfig(_))));
        }
    }

    #[test]
    fn matches_direct_evaluation_and_is_steady_on_a_sine() {
        let config = MfccConfig::default();
        let signal = sine(440.0, 16_000);
        let wide: Vec<f64> = signal.iter().map(|&s| s as f64).collect();
        let m = mfcc_f64(&wide, 16_000, &config).unwrap();
        // 5 strides = 800 samples = exactly 22 periods of 440 Hz.
        for t in [20usize, 45] {
            let direct = direct_frame(&signal[t * 160..t * 160 + 400], &config);
            for (a, b) in m[t].iter().zip(&direct) {
                assert!((a - b).abs() <= 1e-6 * b.abs(), "{a} vs {b}");
            }
            for (a, b) in m[t].iter().zip(&m[t + 5]) {
                assert!((a - b).abs() <= 1e-6 * a.abs(), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn deterministic() {
        let a = audio(sine(300.0, 3000));
        let c = MfccConfig::default();
        assert_eq!(compute_mfcc("s", &a, &c).unwrap(), compute_mfcc("s", &a, &c).unwrap());
    }

    #[test]
    fn filterbank_covers_spectrum() {
        let fb = mel_filterbank(40, 512, 16_000);
        assert_eq!(fb.len(), 40);
        for f in &fb {
            assert_eq!(f.len(), 257);
            assert!(f.iter().any(|&w| w > 0.0));
        }
        assert_eq!(fb[0][0], 0.0);
        assert!((mel_to_hz(hz_to_mel(2345.0)) - 2345.0).abs() < 1e-9);
        assert!((mel_to_hz(hz_to_mel(345.0)) - 345.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn frame_count_closed_form(n in 400usize..20_000) {
            let a = audio(vec![0.0; n]);
            let m = compute_mfcc("s", &a, &MfccConfig::default()).unwrap();
            prop_assert_eq!(m.frames(), (n - 400) / 160 + 1);
        }

        #[test]
        fn scaling_moves_only_c0(seed in 0u64..1000, alpha in 0.05f64..0.95) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..1200).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let scaled: Vec<f64> = x.iter().map(|&s| s * alpha).collect();
            let c = MfccConfig::default();
            let a = mfcc_f64(&x, 16_000, &c).unwrap();
            let b = mfcc_f64(&scaled, 16_000, &c).unwrap();
            let shift = (1.0f64 / 40.0).sqrt() * 40.0 * 2.0 * alpha.ln();
            for (fa, fb) in a.iter().zip(&b) {
                for k in 1..13 {
                    prop_assert!((fa[k] - fb[k]).abs() < 1e-6, "coef {} {} vs {}", k, fa[k], fb[k]);
                }
                prop_assert!((fb[0] - fa[0] - shift).abs() < 1e-6);
            }
        }
    }
}
