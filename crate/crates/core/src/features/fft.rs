use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Precomputed bit-reversal table and twiddles for an iterative radix-2 FFT.
#[derive(Debug, Clone)]
pub struct FftPlan {
    n: usize,
    rev: Vec<usize>,
    twiddles: Vec<Complex64>,
}

impl FftPlan {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(n));
        }
        let bits = n.trailing_zeros();
        let rev = (0..n)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
            .collect();
        // e^{-j 2 pi k / n} for k < n/2
        let twiddles = (0..n / 2)
            .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64))
            .collect();
        Ok(Self { n, rev, twiddles })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In-place forward transform, `X[k] = sum_n x[n] e^{-j 2 pi k n / N}`.
    pub fn process(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.n, "buffer length must equal the plan size");
        for i in 0..self.n {
            let j = self.rev[i];
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= self.n {
            let half = len / 2;
            let stride = self.n / len;
            for start in (0..self.n).step_by(len) {
                for k in 0..half {
                    let w = self.twiddles[k * stride];
                    let a = buf[start + k];
                    let b = buf[start + k + half] * w;
                    buf[start + k] = a + b;
                    buf[start + k + half] = a - b;
                }
            }
            len <<= 1;
        }
    }

    /// Transform of real input, zero-padded or truncated to the plan size.
    pub fn process_real(&self, x: &[f64], buf: &mut Vec<Complex64>) {
        buf.clear();
        buf.extend(x.iter().take(self.n).map(|&v| Complex64::new(v, 0.0)));
        buf.resize(self.n, Complex64::new(0.0, 0.0));
        self.process(buf);
    }
}

/// DFT of `x` zero-padded or truncated to `n` points; `n` must be a power of two.
pub fn fft(x: &[Complex64], n: usize) -> Result<Vec<Complex64>> {
    let plan = FftPlan::new(n)?;
    let mut buf: Vec<Complex64> = x.iter().take(n).copied().collect();
    buf.resize(n, Complex64::new(0.0, 0.0));
    plan.process(&mut buf);
    Ok(buf)
}
