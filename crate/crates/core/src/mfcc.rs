//! Mel-frequency cepstral coefficients with first and second derivatives.
//!
//! The chain per frame is: pre-emphasis, Hamming window, power spectrum
//! (FFT length = next power of two at or above the frame length),
//! triangular mel filterbank, natural log floored at [`LOG_FLOOR`], and an
//! orthonormal DCT-II truncated to `num_cepstra` coefficients. No dither,
//! liftering or cepstral mean normalization is applied, so output is fully
//! deterministic.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::fft::Fft;
use crate::{AudioBuffer, Error, FeatureMatrix, Result};

/// Filterbank energies are clamped to this value before taking the log.
pub const LOG_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct MfccConfig {
    pub sample_rate_hz: u32,
    pub frame_length_ms: f64,
    pub frame_shift_ms: f64,
    pub num_mel_filters: usize,
    pub num_cepstra: usize,
    pub low_freq_hz: f64,
    /// Upper filterbank edge; `None` means `sample_rate / 2 - 100`.
    pub high_freq_hz: Option<f64>,
    pub pre_emphasis: f64,
    pub delta_window: usize,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: 8000,
            frame_length_ms: 25.0,
            frame_shift_ms: 10.0,
            num_mel_filters: 23,
            num_cepstra: 13,
            low_freq_hz: 20.0,
            high_freq_hz: None,
            pre_emphasis: 0.97,
            delta_window: 2,
        }
    }
}

impl MfccConfig {
    pub fn high_freq(&self) -> f64 {
        self.high_freq_hz
            .unwrap_or(f64::from(self.sample_rate_hz) / 2.0 - 100.0)
    }

    pub fn frame_length_samples(&self) -> usize {
        libm::round(f64::from(self.sample_rate_hz) * self.frame_length_ms / 1000.0) as usize
    }

    pub fn frame_shift_samples(&self) -> usize {
        libm::round(f64::from(self.sample_rate_hz) * self.frame_shift_ms / 1000.0) as usize
    }

    pub fn fft_size(&self) -> usize {
        self.frame_length_samples().next_power_of_two()
    }

    pub fn validate(&self) -> Result<()> {
        let nyquist = f64::from(self.sample_rate_hz) / 2.0;
        let high = self.high_freq();
        if !(self.low_freq_hz > 0.0 && self.low_freq_hz < high && high <= nyquist) {
            return Err(Error::Config(format!(
                "need 0 < low_freq ({}) < high_freq ({high}) <= nyquist ({nyquist})",
                self.low_freq_hz
            )));
        }
        if self.num_cepstra == 0 || self.num_cepstra > self.num_mel_filters {
            return Err(Error::Config(format!(
                "need 1 <= num_cepstra ({}) <= num_mel_filters ({})",
                self.num_cepstra, self.num_mel_filters
            )));
        }
        if !(0.0..1.0).contains(&self.pre_emphasis) {
            return Err(Error::Config(format!(
                "pre_emphasis must lie in [0, 1), got {}",
                self.pre_emphasis
            )));
        }
        if self.frame_length_samples() == 0 || self.frame_shift_samples() == 0 {
            return Err(Error::Config(
                "frame length and shift must each cover at least one sample".into(),
            ));
        }
        if self.delta_window == 0 {
            return Err(Error::Config("delta_window must be at least 1".into()));
        }
        Ok(())
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * libm::log10(1.0 + hz / 700.0)
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (libm::pow(10.0, mel / 2595.0) - 1.0)
}

/// Centre frequencies (Hz) of the triangular filters.
pub fn mel_filter_centers(cfg: &MfccConfig) -> Vec<f64> {
    mel_edges(cfg)[1..=cfg.num_mel_filters].to_vec()
}

fn mel_edges(cfg: &MfccConfig) -> Vec<f64> {
    let lo = hz_to_mel(cfg.low_freq_hz);
    let hi = hz_to_mel(cfg.high_freq());
    let step = (hi - lo) / (cfg.num_mel_filters + 1) as f64;
    (0..cfg.num_mel_filters + 2)
        .map(|i| mel_to_hz(lo + step * i as f64))
        .collect()
}

/// Triangular filter weights, one row of `fft_size / 2 + 1` bins per filter.
pub fn mel_filterbank(cfg: &MfccConfig) -> Vec<Vec<f64>> {
    let edges = mel_edges(cfg);
    let nfft = cfg.fft_size();
    let bin_hz = f64::from(cfg.sample_rate_hz) / nfft as f64;
    (0..cfg.num_mel_filters)
        .map(|m| {
            let (left, centre, right) = (edges[m], edges[m + 1], edges[m + 2]);
            (0..=nfft / 2)
                .map(|k| {
                    let f = k as f64 * bin_hz;
                    if f <= left || f >= right {
                        0.0
                    } else if f <= centre {
                        (f - left) / (centre - left)
                    } else {
                        (right - f) / (right - centre)
                    }
                })
                .collect()
        })
        .collect()
}

/// Orthonormal DCT-II basis, `num_cepstra` rows by `num_filters` columns.
pub fn dct_matrix(num_cepstra: usize, num_filters: usize) -> Vec<Vec<f64>> {
    let n = num_filters as f64;
    (0..num_cepstra)
        .map(|k| {
            let scale = if k == 0 { libm::sqrt(1.0 / n) } else { libm::sqrt(2.0 / n) };
            (0..num_filters)
                .map(|m| scale * libm::cos(PI * k as f64 * (m as f64 + 0.5) / n))
                .collect()
        })
        .collect()
}

/// Number of complete frames: `1 + (n - len) / shift`, or 0 if `n < len`.
pub fn frame_count(num_samples: usize, frame_len: usize, frame_shift: usize) -> usize {
    if num_samples < frame_len {
        0
    } else {
        1 + (num_samples - frame_len) / frame_shift
    }
}

fn hamming(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    (0..len)
        .map(|n| 0.54 - 0.46 * libm::cos(2.0 * PI * n as f64 / (len - 1) as f64))
        .collect()
}

/// Slices the signal into overlapping frames, pre-emphasizes each frame
/// (the first sample is differenced against itself) and applies a Hamming
/// window.
pub fn frame_signal(audio: &AudioBuffer, cfg: &MfccConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let len = cfg.frame_length_samples();
    let shift = cfg.frame_shift_samples();
    let x = audio.samples();
    let count = frame_count(x.len(), len, shift);
    if count == 0 {
        return Err(Error::TooShort(format!(
            "{} samples is shorter than one {len}-sample frame",
            x.len()
        )));
    }
    let window = hamming(len);
    let k = cfg.pre_emphasis;
    Ok((0..count)
        .map(|f| {
            let raw = &x[f * shift..f * shift + len];
            (0..len)
                .map(|i| {
                    let prev = if i == 0 { raw[0] } else { raw[i - 1] };
                    (f64::from(raw[i]) - k * f64::from(prev)) * window[i]
                })
                .collect()
        })
        .collect())
}

/// Static cepstra only (`num_cepstra` dims per frame).
pub fn extract_mfcc(audio: &AudioBuffer, cfg: &MfccConfig) -> Result<FeatureMatrix> {
    if audio.sample_rate_hz() != cfg.sample_rate_hz {
        return Err(Error::Config(format!(
            "audio is {} Hz but the extractor is configured for {} Hz",
            audio.sample_rate_hz(),
            cfg.sample_rate_hz
        )));
    }
    let frames = frame_signal(audio, cfg)?;
    let fft = Fft::new(cfg.fft_size());
    let bank = mel_filterbank(cfg);
    let dct = dct_matrix(cfg.num_cepstra, cfg.num_mel_filters);

    let mut data = Vec::with_capacity(frames.len() * cfg.num_cepstra);
    let (mut re, mut im, mut power) = (Vec::new(), Vec::new(), Vec::new());
    let mut log_energies = vec![0.0; cfg.num_mel_filters];
    for frame in &frames {
        fft.power_spectrum(frame, &mut re, &mut im, &mut power);
        debug_assert_eq!(power.len(), fft.size() / 2 + 1);
        for (out, weights) in log_energies.iter_mut().zip(&bank) {
            let e: f64 = weights.iter().zip(&power).map(|(w, p)| w * p).sum();
            *out = libm::log(e.max(LOG_FLOOR));
        }
        for basis in &dct {
            let c: f64 = basis.iter().zip(&log_energies).map(|(b, e)| b * e).sum();
            data.push(c as f32);
        }
    }
    FeatureMatrix::new(
        data,
        frames.len(),
        cfg.num_cepstra,
        cfg.frame_shift_ms as f32,
        cfg.frame_length_ms as f32,
    )
    .map(|m| m.with_ids("", "mfcc13"))
}

/// Regression deltas with edge replication:
/// `d[t] = sum_{k=1..W} k (x[t+k] - x[t-k]) / (2 sum k^2)`.
fn deltas(rows: &[Vec<f64>], window: usize) -> Vec<Vec<f64>> {
    let n = rows.len() as isize;
    let dims = rows[0].len();
    let denom = 2.0 * (1..=window).map(|k| (k * k) as f64).sum::<f64>();
    let at = |t: isize| &rows[t.clamp(0, n - 1) as usize];
    (0..n)
        .map(|t| {
            let mut d = vec![0.0; dims];
            for k in 1..=window as isize {
                let (fwd, back) = (at(t + k), at(t - k));
                for (j, v) in d.iter_mut().enumerate() {
                    *v += k as f64 * (fwd[j] - back[j]);
                }
            }
            d.iter_mut().for_each(|v| *v /= denom);
            d
        })
        .collect()
}

/// Appends first and second derivatives, tripling the dimensionality.
pub fn append_deltas(m: &FeatureMatrix, window: usize) -> Result<FeatureMatrix> {
    if window == 0 {
        return Err(Error::Config("delta window must be at least 1".into()));
    }
    let rows: Vec<Vec<f64>> = m
        .frames()
        .map(|f| f.iter().map(|&v| f64::from(v)).collect())
        .collect();
    let d1 = deltas(&rows, window);
    let d2 = deltas(&d1, window);
    let dims = m.num_dims();
    let mut data = Vec::with_capacity(rows.len() * dims * 3);
    for t in 0..rows.len() {
        data.extend_from_slice(m.frame(t));
        data.extend(d1[t].iter().map(|&v| v as f32));
        data.extend(d2[t].iter().map(|&v| v as f32));
    }
    let tag = if m.extractor_tag == "mfcc13" {
        "mfcc39".into()
    } else {
        format!("{}+dd", m.extractor_tag)
    };
    FeatureMatrix::new(data, rows.len(), dims * 3, m.frame_shift_ms, m.frame_length_ms)
        .map(|out| out.with_ids(m.source_id.clone(), tag))
}

/// The 39-dimensional baseline: static cepstra plus deltas and delta-deltas.
pub fn extract_mfcc_with_deltas(audio: &AudioBuffer, cfg: &MfccConfig) -> Result<FeatureMatrix> {
    append_deltas(&extract_mfcc(audio, cfg)?, cfg.delta_window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tone(freq: f64, rate: u32, n: usize) -> AudioBuffer {
        let s = (0..n)
            .map(|i| (0.5 * libm::sin(2.0 * PI * freq * i as f64 / f64::from(rate))) as f32)
            .collect();
        AudioBuffer::new(s, rate).unwrap()
    }

    #[test]
    fn frame_count_matches_enumeration() {
        // enumerate every start s with s + len <= n, stepping by shift
        let enumerate = |n: usize, len: usize, shift: usize| {
            let mut count = 0;
            let mut s = 0;
            while s + len <= n {
                count += 1;
                s += shift;
            }
            count
        };
        for &(n, len, shift) in &[(8000, 200, 80), (200, 200, 80), (199, 200, 80), (1000, 7, 3)] {
            assert_eq!(frame_count(n, len, shift), enumerate(n, len, shift));
        }
        let cfg = MfccConfig::default();
        let audio = AudioBuffer::new(vec![0.0; 8000], 8000).unwrap();
        let frames = frame_signal(&audio, &cfg).unwrap();
        assert_eq!(frames.len(), 98);
        assert!(frames.iter().all(|f| f.len() == 200));
    }

    #[test]
    fn exactly_one_frame_and_too_short() {
        let cfg = MfccConfig::default();
        let one = AudioBuffer::new(vec![0.1; 200], 8000).unwrap();
        assert_eq!(frame_signal(&one, &cfg).unwrap().len(), 1);
        let short = AudioBuffer::new(vec![0.1; 199], 8000).unwrap();
        assert!(matches!(frame_signal(&short, &cfg), Err(Error::TooShort(_))));
    }

    #[test]
    fn pre_emphasis_of_constant_signal() {
        let cfg = MfccConfig {
            pre_emphasis: 0.97,
            ..MfccConfig::default()
        };
        let audio = AudioBuffer::new(vec![0.5; 400], 8000).unwrap();
        let frames = frame_signal(&audio, &cfg).unwrap();
        let window = hamming(200);
        for (i, &v) in frames[1].iter().enumerate() {
            assert!((v / window[i] - 0.03 * 0.5).abs() < 1e-7);
        }
    }

    #[test]
    fn dct_is_orthonormal() {
        let d = dct_matrix(23, 23);
        for i in 0..23 {
            for j in 0..23 {
                let dot: f64 = d[i].iter().zip(&d[j]).map(|(a, b)| a * b).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-10, "({i},{j}) = {dot}");
            }
        }
    }

    #[test]
    fn filterbank_covers_every_inner_bin() {
        let cfg = MfccConfig::default();
        let bank = mel_filterbank(&cfg);
        assert!(bank.iter().flatten().all(|&w| w >= 0.0));
        let bin_hz = 8000.0 / cfg.fft_size() as f64;
        for k in 0..=cfg.fft_size() / 2 {
            let f = k as f64 * bin_hz;
            if f > cfg.low_freq_hz && f < cfg.high_freq() {
                assert!(bank.iter().any(|row| row[k] > 0.0), "bin {k} ({f} Hz) uncovered");
            }
        }
    }

    #[test]
    fn default_output_has_13_dims_and_39_with_deltas() {
        let audio = tone(440.0, 8000, 8000);
        let cfg = MfccConfig::default();
        let m = extract_mfcc(&audio, &cfg).unwrap();
        assert_eq!(m.num_dims(), 13);
        assert_eq!(m.num_frames(), frame_signal(&audio, &cfg).unwrap().len());
        let full = extract_mfcc_with_deltas(&audio, &cfg).unwrap();
        assert_eq!(full.num_dims(), 39);
        assert_eq!(full.extractor_tag, "mfcc39");
        assert_eq!(full.frame_shift_ms, 10.0);
    }

    #[test]
    fn silence_gives_floor_cepstrum() {
        let audio = AudioBuffer::new(vec![0.0; 4000], 8000).unwrap();
        let m = extract_mfcc(&audio, &MfccConfig::default()).unwrap();
        // flat log spectrum: only c0 survives, c0 = sqrt(M) ln(floor)
        let c0 = libm::sqrt(23.0) * libm::log(LOG_FLOOR);
        for f in m.frames() {
            assert!((f64::from(f[0]) - c0).abs() < 1e-4 * c0.abs());
            assert!(f[1..].iter().all(|v| v.abs() < 1e-4));
            assert_eq!(f, m.frame(0));
        }
    }

    #[test]
    fn tone_peaks_at_nearest_filter() {
        let cfg = MfccConfig::default();
        let audio = tone(1000.0, 8000, 800);
        let frames = frame_signal(&audio, &cfg).unwrap();
        let fft = Fft::new(cfg.fft_size());
        let bank = mel_filterbank(&cfg);
        let (mut re, mut im, mut power) = (Vec::new(), Vec::new(), Vec::new());
        fft.power_spectrum(&frames[2], &mut re, &mut im, &mut power);
        let energies: Vec<f64> = bank
            .iter()
            .map(|w| w.iter().zip(&power).map(|(a, b)| a * b).sum())
            .collect();
        let argmax = (0..energies.len())
            .max_by(|&a, &b| energies[a].total_cmp(&energies[b]))
            .unwrap();
        // analytic centres: mel-equidistant between mel(20) and mel(3900)
        let lo = 2595.0 * libm::log10(1.0 + 20.0 / 700.0);
        let hi = 2595.0 * libm::log10(1.0 + 3900.0 / 700.0);
        let nearest = (0..23)
            .min_by(|&a, &b| {
                let c = |m: usize| {
                    let mel = lo + (hi - lo) * (m + 1) as f64 / 24.0;
                    (700.0 * (libm::pow(10.0, mel / 2595.0) - 1.0) - 1000.0).abs()
                };
                c(a).total_cmp(&c(b))
            })
            .unwrap();
        assert_eq!(argmax, nearest);
    }

    #[test]
    fn deltas_of_constant_are_zero_and_ramp_is_one() {
        let constant = FeatureMatrix::new(vec![3.0; 20], 10, 2, 10.0, 25.0).unwrap();
        let d = append_deltas(&constant, 2).unwrap();
        assert_eq!(d.num_dims(), 6);
        for f in d.frames() {
            assert_eq!(&f[2..], &[0.0; 4]);
        }
        let ramp = FeatureMatrix::new((0..12).map(|t| t as f32).collect(), 12, 1, 10.0, 25.0).unwrap();
        let d = append_deltas(&ramp, 2).unwrap();
        // direct evaluation of the regression sum on x[t] = t
        for t in 2..10 {
            let direct: f64 = (1..=2).map(|k| k as f64 * (2 * k) as f64).sum::<f64>() / 10.0;
            assert_eq!(f64::from(d.get(t, 1)), direct);
            assert_eq!(d.get(t, 1), 1.0);
        }
        // second derivative of a ramp vanishes away from the replicated edges
        for t in 4..8 {
            assert_eq!(d.get(t, 2), 0.0);
        }
    }

    #[test]
    fn rate_mismatch_and_bad_config() {
        let audio = tone(440.0, 16000, 16000);
        assert!(matches!(extract_mfcc(&audio, &MfccConfig::default()), Err(Error::Config(_))));
        let bad = MfccConfig {
            num_cepstra: 30,
            ..MfccConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = MfccConfig {
            high_freq_hz: Some(5000.0),
            ..MfccConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn extraction_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s: Vec<f32> = (0..4000).map(|_| rng.random_range(-0.5..0.5)).collect();
        let audio = AudioBuffer::new(s, 8000).unwrap();
        let a = extract_mfcc_with_deltas(&audio, &MfccConfig::default()).unwrap();
        let b = extract_mfcc_with_deltas(&audio, &MfccConfig::default()).unwrap();
        assert_eq!(a, b);
    }
}
