use serde::{Deserialize, Serialize};

use super::fft::FftPlan;
use super::map::{min_max, LOG_FLOOR};
use crate::error::{Error, Result};
use crate::signal::DualBandSegment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PsdConfig {
    pub n_fft: usize,
    /// Number of leading chunks averaged; `None` uses every complete chunk.
    pub max_chunks: Option<usize>,
}

impl Default for PsdConfig {
    fn default() -> Self {
        Self {
            n_fft: 128,
            max_chunks: None,
        }
    }
}

/// One-sided periodograms of both bands, low band first.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdVector {
    values: Vec<f64>,
    bins_per_band: usize,
}

impl PsdVector {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn bins_per_band(&self) -> usize {
        self.bins_per_band
    }

    pub fn low(&self) -> &[f64] {
        &self.values[..self.bins_per_band]
    }

    pub fn high(&self) -> &[f64] {
        &self.values[self.bins_per_band..]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Decibels, min-max scaled to [0, 1]; the classifier input for the 1-D baseline.
    pub fn to_model_input(&self) -> Vec<f64> {
        let db: Vec<f64> = self.values.iter().map(|p| 10.0 * (p + LOG_FLOOR).log10()).collect();
        min_max(&db)
    }
}

/// Mean of `|DFT(chunk)|^2 / N` over non-overlapping length-`N` chunks; bins 0..=N/2.
pub fn periodogram(x: &[f64], cfg: &PsdConfig) -> Result<Vec<f64>> {
    let n = cfg.n_fft;
    let plan = FftPlan::new(n)?;
    if x.len() < n {
        return Err(Error::SignalTooShort { len: x.len(), needed: n });
    }
    let chunks = (x.len() / n).min(cfg.max_chunks.unwrap_or(usize::MAX)).max(1);
    let mut acc = vec![0.0; n / 2 + 1];
    let mut buf = Vec::with_capacity(n);
    for chunk in x.chunks_exact(n).take(chunks) {
        plan.process_real(chunk, &mut buf);
        for (a, v) in acc.iter_mut().zip(&buf) {
            *a += v.norm_sqr() / n as f64;
        }
    }
    acc.iter_mut().for_each(|a| *a /= chunks as f64);
    Ok(acc)
}

pub fn psd_feature(segment: &DualBandSegment, cfg: &PsdConfig) -> Result<PsdVector> {
    let mut values = periodogram(segment.low(), cfg)?;
    values.extend(periodogram(segment.high(), cfg)?);
    Ok(PsdVector {
        values,
        bins_per_band: cfg.n_fft / 2 + 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_signal() {
        let p = periodogram(&[1.0; 4], &PsdConfig { n_fft: 4, max_chunks: None }).unwrap();
        assert_eq!(p.len(), 3);
        assert!((p[0] - 4.0).abs() < 1e-12);
        assert!(p[1].abs() < 1e-12 && p[2].abs() < 1e-12);
    }

    #[test]
    fn quadratic_homogeneity() {
        let x: Vec<f64> = (0..512).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let x2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let cfg = PsdConfig::default();
        let (a, b) = (periodogram(&x, &cfg).unwrap(), periodogram(&x2, &cfg).unwrap());
        for (p, q) in a.iter().zip(&b) {
            assert!((4.0 * p - q).abs() <= 1e-9 * q.abs().max(1.0));
        }
    }

    #[test]
    fn sinusoid_peak_bin() {
        let x: Vec<f64> = (0..128 * 10).map(|n| (2.0 * PI * 3.0 * n as f64 / 128.0).sin()).collect();
        let p = periodogram(&x, &PsdConfig::default()).unwrap();
        let argmax = (0..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
        assert_eq!(argmax, 3);
    }

    #[test]
    fn chunk_cap_and_errors() {
        let mut x = vec![0.0; 256];
        x[128..].fill(1.0);
        let one = PsdConfig { n_fft: 128, max_chunks: Some(1) };
        assert_eq!(periodogram(&x, &one).unwrap()[0], 0.0);
        assert!(matches!(periodogram(&x[..100], &one), Err(Error::SignalTooShort { .. })));
        assert!(matches!(
            periodogram(&x, &PsdConfig { n_fft: 100, max_chunks: None }),
            Err(Error::NotPowerOfTwo(100))
        ));
    }

    #[test]
    fn dual_band_layout() {
        let seg = DualBandSegment::new(vec![1.0; 256], vec![0.0; 256], 40e6).unwrap();
        let v = psd_feature(&seg, &PsdConfig::default()).unwrap();
        assert_eq!(v.len(), 130);
        assert!(v.low()[0] > 0.0 && v.high().iter().all(|&p| p == 0.0));
        let input = v.to_model_input();
        assert!(input.iter().all(|x| (0.0..=1.0).contains(x)));
    }
}
