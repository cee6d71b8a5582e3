use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fft::FftPlan;
use super::window::hamming_window;
use crate::error::{Error, Result};

/// Frames (time columns) and FFT points of a feature map.
pub const MAP_FRAMES: usize = 128;
pub const MAP_NFFT: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowKind {
    Hamming,
}

/// Framing of a band into overlapping windows, each reduced to an `n_fft`-point DFT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftConfig {
    pub window_len: usize,
    pub overlap: usize,
    pub n_fft: usize,
    pub window: WindowKind,
}

impl StftConfig {
    pub fn new(window_len: usize, overlap: usize, n_fft: usize) -> Result<Self> {
        let cfg = Self {
            window_len,
            overlap,
            n_fft,
            window: WindowKind::Hamming,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// 88 000-sample window, 10 000-sample overlap: 128 frames from 10^7 samples.
    pub fn paper() -> Self {
        Self::new(88_000, 10_000, MAP_NFFT).expect("valid")
    }

    /// The reference parameters scaled down 10x for 10^6-sample segments.
    pub fn desk() -> Self {
        Self::new(8_800, 1_000, MAP_NFFT).expect("valid")
    }

    /// The reference or desk framing when either gives exactly [`MAP_FRAMES`] frames for
    /// `len`, otherwise [`StftConfig::fit`].
    pub fn for_length(len: usize) -> Result<Self> {
        [Self::paper(), Self::desk()]
            .into_iter()
            .find(|c| c.frame_count(len).ok() == Some(MAP_FRAMES))
            .map_or_else(|| Self::fit(len, MAP_FRAMES), Ok)
    }

    /// Picks a window, with overlap at the reference ratio, that yields exactly
    /// `frames` frames from `len` samples.
    pub fn fit(len: usize, frames: usize) -> Result<Self> {
        if frames == 0 {
            return Err(Error::InvalidConfig("frame count must be positive".into()));
        }
        let ratio = 10_000.0 / 88_000.0;
        let estimate = len as f64 / (1.0 + (frames as f64 - 1.0) * (1.0 - ratio));
        let lo = ((estimate * 0.8) as usize).max(2);
        let hi = ((estimate * 1.2) as usize + 2).min(len);
        let mut best: Option<(f64, StftConfig)> = None;
        for w in lo..=hi {
            let overlap = ((ratio * w as f64).round() as usize).min(w - 1);
            let Ok(cfg) = Self::new(w, overlap, MAP_NFFT) else {
                continue;
            };
            if cfg.frame_count(len).ok() == Some(frames) {
                let score = (w as f64 - estimate).abs();
                if best.is_none_or(|(s, _)| score < s) {
                    best = Some((score, cfg));
                }
            }
        }
        best.map(|(_, c)| c).ok_or_else(|| {
            Error::InvalidConfig(format!("no window yields {frames} frames from {len} samples"))
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_len < 2 {
            return Err(Error::InvalidConfig(format!("window length {} < 2", self.window_len)));
        }
        if self.overlap >= self.window_len {
            return Err(Error::InvalidConfig(format!(
                "overlap {} must be smaller than the window {}",
                self.overlap, self.window_len
            )));
        }
        if self.n_fft == 0 || !self.n_fft.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(self.n_fft));
        }
        Ok(())
    }

    pub fn hop(&self) -> usize {
        self.window_len - self.overlap
    }

    pub fn overlap_ratio(&self) -> f64 {
        self.overlap as f64 / self.window_len as f64
    }

    /// floor((len - window) / hop) + 1
    pub fn frame_count(&self, len: usize) -> Result<usize> {
        if len < self.window_len {
            return Err(Error::SignalTooShort {
                len,
                needed: self.window_len,
            });
        }
        Ok((len - self.window_len) / self.hop() + 1)
    }
}

/// Sums `x` into `n` bins by index modulo `n` (time aliasing).
///
/// The `n`-point DFT of the result equals the DFT of the full-length `x` sampled at
/// the `n` frequencies `2 pi k / n`.
pub fn fold(x: &[f64], n: usize, out: &mut [f64]) {
    out[..n].fill(0.0);
    for block in x.chunks(n) {
        for (o, v) in out.iter_mut().zip(block) {
            *o += v;
        }
    }
}

/// Windowed frames of `x`, each folded to `n_fft` points and transformed.
pub fn stft(x: &[f64], cfg: &StftConfig) -> Result<Vec<Vec<Complex64>>> {
    cfg.validate()?;
    let frames = cfg.frame_count(x.len())?;
    let window = hamming_window(cfg.window_len)?;
    let plan = FftPlan::new(cfg.n_fft)?;
    let hop = cfg.hop();
    let mut windowed = vec![0.0; cfg.window_len];
    let mut folded = vec![0.0; cfg.n_fft];
    let mut buf = Vec::with_capacity(cfg.n_fft);
    let mut out = Vec::with_capacity(frames);
    for t in 0..frames {
        let frame = &x[t * hop..t * hop + cfg.window_len];
        for ((d, s), w) in windowed.iter_mut().zip(frame).zip(&window) {
            *d = s * w;
        }
        fold(&windowed, cfg.n_fft, &mut folded);
        plan.process_real(&folded, &mut buf);
        out.push(buf.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_framing() {
        let cfg = StftConfig::paper();
        assert_eq!(cfg.frame_count(10_000_000).unwrap(), 128);
        assert!((cfg.overlap_ratio() - 0.1136).abs() < 1e-4);
        assert_eq!(StftConfig::desk().frame_count(1_000_000).unwrap(), 128);
        assert_eq!(cfg.frame_count(88_000).unwrap(), 1);
        assert!(matches!(cfg.frame_count(87_999), Err(Error::SignalTooShort { .. })));
    }

    #[test]
    fn config_validation() {
        assert!(StftConfig::new(10, 10, 128).is_err());
        assert!(StftConfig::new(10, 3, 100).is_err());
        assert!(StftConfig::new(1, 0, 128).is_err());
    }

    #[test]
    fn fit_hits_frame_count() {
        for len in [20_000usize, 65_536, 131_072, 1_000_000] {
            let cfg = StftConfig::fit(len, 128).unwrap();
            assert_eq!(cfg.frame_count(len).unwrap(), 128, "{len}");
        }
        assert!(StftConfig::fit(100, 128).is_err());
    }

    #[test]
    fn reference_framings_preferred() {
        assert_eq!(StftConfig::for_length(10_000_000).unwrap(), StftConfig::paper());
        assert_eq!(StftConfig::for_length(1_000_000).unwrap(), StftConfig::desk());
        assert_eq!(StftConfig::for_length(20_000).unwrap(), StftConfig::fit(20_000, 128).unwrap());
    }

    #[test]
    fn folding_matches_long_dft() {
        // DFT of a 300-sample signal at 2 pi k / 16 versus the 16-point DFT of its fold.
        let x: Vec<f64> = (0..300).map(|i| ((i * 37 % 11) as f64 - 5.0) * 0.3).collect();
        let mut folded = vec![0.0; 16];
        fold(&x, 16, &mut folded);
        let plan = FftPlan::new(16).unwrap();
        let mut buf = Vec::new();
        plan.process_real(&folded, &mut buf);
        for (k, got) in buf.iter().enumerate() {
            let direct: Complex64 = x
                .iter()
                .enumerate()
                .map(|(n, &v)| v * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * (k * n) as f64 / 16.0))
                .sum();
            assert!((got - direct).norm() < 1e-9);
        }
    }
}
