use alloc::vec::Vec;
use core::f64::consts::PI;

/// Radix-2 decimation-in-time FFT with precomputed twiddles.
pub(crate) struct Fft {
    size: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl Fft {
    pub(crate) fn new(size: usize) -> Self {
        assert!(size.is_power_of_two(), "FFT size must be a power of two");
        let half = size / 2;
        let cos = (0..half).map(|k| libm::cos(-2.0 * PI * k as f64 / size as f64)).collect();
        let sin = (0..half).map(|k| libm::sin(-2.0 * PI * k as f64 / size as f64)).collect();
        Self { size, cos, sin }
    }

    pub(crate) fn size(&self) -> usize {
        self.size
    }

    pub(crate) fn forward(&self, re: &mut [f64], im: &mut [f64]) {
        let n = self.size;
        debug_assert!(re.len() == n && im.len() == n);
        let bits = n.trailing_zeros();
        if bits > 0 {
            for i in 0..n {
                let j = i.reverse_bits() >> (usize::BITS - bits);
                if j > i {
                    re.swap(i, j);
                    im.swap(i, j);
                }
            }
        }
        let mut len = 2;
        while len <= n {
            let stride = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..len / 2 {
                    let (wr, wi) = (self.cos[k * stride], self.sin[k * stride]);
                    let a = start + k;
                    let b = a + len / 2;
                    let tr = re[b] * wr - im[b] * wi;
                    let ti = re[b] * wi + im[b] * wr;
                    re[b] = re[a] - tr;
                    im[b] = im[a] - ti;
                    re[a] += tr;
                    im[a] += ti;
                }
            }
            len <<= 1;
        }
    }

    /// |X_k|^2 for k in 0..=size/2 of a real frame zero-padded to `size`.
    pub(crate) fn power_spectrum(&self, frame: &[f64], re: &mut Vec<f64>, im: &mut Vec<f64>, out: &mut Vec<f64>) {
        re.clear();
        re.extend_from_slice(frame);
        re.resize(self.size, 0.0);
        im.clear();
        im.resize(self.size, 0.0);
        self.forward(re, im);
        out.clear();
        out.extend((0..=self.size / 2).map(|k| re[k] * re[k] + im[k] * im[k]));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_naive_dft() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for size in [1usize, 2, 8, 64, 256] {
            let x: Vec<f64> = (0..size).map(|_| rng.random_range(-1.0..1.0)).collect();
            let fft = Fft::new(size);
            let (mut re, mut im) = (x.clone(), alloc::vec![0.0; size]);
            fft.forward(&mut re, &mut im);
            for k in 0..size {
                let (mut er, mut ei) = (0.0, 0.0);
                for (t, &v) in x.iter().enumerate() {
                    let a = -2.0 * PI * (k * t) as f64 / size as f64;
                    er += v * libm::cos(a);
                    ei += v * libm::sin(a);
                }
                assert!((re[k] - er).abs() < 1e-9 && (im[k] - ei).abs() < 1e-9);
            }
        }
    }
}
