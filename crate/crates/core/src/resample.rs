//! Fixed 2:1 decimation used to bring 16 kHz recordings down to the 8 kHz
//! rate expected by the MFCC front-end.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::{AudioBuffer, Error, Result};

/// Number of FIR taps. Odd, so the filter has an integer group delay.
pub const DECIMATOR_TAPS: usize = 63;

/// Cutoff as a fraction of the input Nyquist frequency.
pub const DECIMATOR_CUTOFF: f64 = 0.45;

/// Hamming-windowed sinc low-pass taps, normalized to unit DC gain.
pub fn decimator_taps() -> [f64; DECIMATOR_TAPS] {
    let mut taps = [0.0; DECIMATOR_TAPS];
    let mid = (DECIMATOR_TAPS / 2) as f64;
    // cutoff in cycles/sample: 0.45 * (fs/2) / fs
    let fc = DECIMATOR_CUTOFF * 0.5;
    for (n, tap) in taps.iter_mut().enumerate() {
        let x = n as f64 - mid;
        let sinc = if x == 0.0 {
            2.0 * fc
        } else {
            libm::sin(2.0 * PI * fc * x) / (PI * x)
        };
        let window = 0.54 - 0.46 * libm::cos(2.0 * PI * n as f64 / (DECIMATOR_TAPS - 1) as f64);
        *tap = sinc * window;
    }
    let sum: f64 = taps.iter().sum();
    for tap in &mut taps {
        *tap /= sum;
    }
    taps
}

/// Low-pass filters and keeps every second sample.
///
/// The signal is zero-padded at both ends and the filter is centred on each
/// retained sample, so the output is time-aligned with the input and has
/// `ceil(n / 2)` samples.
pub fn decimate_2x(audio: &AudioBuffer) -> Result<AudioBuffer> {
    let rate = audio.sample_rate_hz();
    if !rate.is_multiple_of(2) {
        return Err(Error::Precondition(format!(
            "2x decimation needs an even sample rate, got {rate} Hz"
        )));
    }
    let taps = decimator_taps();
    let half = DECIMATOR_TAPS / 2;
    let x = audio.samples();
    let n = x.len();
    let mut out = Vec::with_capacity(n.div_ceil(2));
    for centre in (0..n).step_by(2) {
        let mut acc = 0.0f64;
        for (k, &h) in taps.iter().enumerate() {
            // input index = centre + k - half, skipped when outside the signal
            let idx = centre + k;
            if idx < half || idx - half >= n {
                continue;
            }
            acc += h * f64::from(x[idx - half]);
        }
        // the filter has slight overshoot; keep the AudioBuffer range invariant
        out.push(acc.clamp(-1.0, 1.0 - f64::from(f32::EPSILON)) as f32);
    }
    AudioBuffer::new(out, rate / 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;

    fn sine(freq: f64, rate: u32, n: usize, amp: f64) -> AudioBuffer {
        let s = (0..n)
            .map(|i| (amp * libm::sin(2.0 * PI * freq * i as f64 / f64::from(rate))) as f32)
            .collect();
        AudioBuffer::new(s, rate).unwrap()
    }

    fn rms(x: &[f32]) -> f64 {
        libm::sqrt(x.iter().map(|&v| f64::from(v).powi(2)).sum::<f64>() / x.len() as f64)
    }

    /// Ideal brick-wall resampler: naive DFT, zero every bin above the output
    /// Nyquist, inverse DFT, keep even samples.
    fn dft_resample_oracle(x: &[f32], rate: u32) -> Vec<f64> {
        let n = x.len();
        let mut re = vec![0.0; n];
        let mut im = vec![0.0; n];
        for k in 0..n {
            for (t, &v) in x.iter().enumerate() {
                let a = -2.0 * PI * (k * t % n) as f64 / n as f64;
                re[k] += f64::from(v) * libm::cos(a);
                im[k] += f64::from(v) * libm::sin(a);
            }
        }
        let out_nyquist = f64::from(rate) / 4.0;
        for k in 0..n {
            let f = k.min(n - k) as f64 * f64::from(rate) / n as f64;
            if f >= out_nyquist {
                re[k] = 0.0;
                im[k] = 0.0;
            }
        }
        (0..n)
            .step_by(2)
            .map(|t| {
                let mut acc = 0.0;
                for k in 0..n {
                    let a = 2.0 * PI * (k * t % n) as f64 / n as f64;
                    acc += re[k] * libm::cos(a) - im[k] * libm::sin(a);
                }
                acc / n as f64
            })
            .collect()
    }

    #[test]
    fn taps_are_symmetric_with_unit_gain() {
        let h = decimator_taps();
        assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for i in 0..DECIMATOR_TAPS {
            assert!((h[i] - h[DECIMATOR_TAPS - 1 - i]).abs() < 1e-15);
        }
    }

    #[test]
    fn halves_rate_and_length() {
        for n in [0usize, 1, 2, 15999, 16000] {
            let a = AudioBuffer::new(vec![0.0; n], 16000).unwrap();
            let d = decimate_2x(&a).unwrap();
            assert_eq!(d.sample_rate_hz(), 8000);
            assert_eq!(d.len(), n.div_ceil(2));
            assert!(d.len() * 2 == n || d.len() * 2 == n + 1);
        }
    }

    #[test]
    fn odd_rate_is_rejected() {
        let a = AudioBuffer::new(vec![0.0; 10], 11025).unwrap();
        assert!(matches!(decimate_2x(&a), Err(Error::Precondition(_))));
    }

    #[test]
    fn dc_passes_away_from_edges() {
        let a = AudioBuffer::new(vec![0.25; 1000], 16000).unwrap();
        let d = decimate_2x(&a).unwrap();
        for &v in &d.samples()[16..d.len() - 16] {
            assert!((f64::from(v) - 0.25).abs() < 1e-3, "{v}");
        }
    }

    #[test]
    fn stopband_tone_is_removed() {
        let input = sine(7000.0, 16000, 1600, 0.5);
        let out = decimate_2x(&input).unwrap();
        let oracle = dft_resample_oracle(input.samples(), 16000);
        let in_rms = rms(input.samples());
        let oracle_rms = libm::sqrt(oracle.iter().map(|v| v * v).sum::<f64>() / oracle.len() as f64);
        assert!(oracle_rms < 0.05 * in_rms);
        let interior = &out.samples()[32..out.len() - 32];
        assert!(rms(interior) < 0.05 * in_rms, "{} vs {}", rms(interior), in_rms);
    }

    #[test]
    fn passband_tone_matches_ideal_resampler() {
        // 1 kHz over a whole number of periods so the DFT oracle is leak-free
        let input = sine(1000.0, 16000, 1600, 0.5);
        let out = decimate_2x(&input).unwrap();
        let oracle = dft_resample_oracle(input.samples(), 16000);
        for i in 32..out.len() - 32 {
            assert!((f64::from(out.samples()[i]) - oracle[i]).abs() < 5e-3, "sample {i}");
        }
    }
}
