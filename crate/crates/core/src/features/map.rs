use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fft::FftPlan;
use super::stft::{fold, stft, StftConfig, MAP_FRAMES, MAP_NFFT};
use crate::error::{io_err, Error, Result};
use crate::signal::DualBandSegment;

pub const MAP_ROWS: usize = MAP_NFFT;
pub const MAP_COLS: usize = MAP_FRAMES;
/// One-sided bins kept per band (DC dropped): 1..=64.
pub const ROWS_PER_BAND: usize = MAP_NFFT / 2;
/// Floor added to the power before taking decibels.
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapScale {
    LinearMagnitude,
    /// `10 log10(|X|^2 + 1e-12)`
    LogMagnitude,
    MinMaxNormalized,
}

/// 128x128 time-frequency map.
///
/// Rows are frequency: rows 0-63 hold one-sided bins 1-64 of the low band, rows
/// 64-127 the same bins of the high band, so frequency increases downwards across
/// the whole 0-80 MHz span. Columns are time frames. Stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    values: Vec<f64>,
    scale: MapScale,
}

impl FeatureMap {
    pub fn new(values: Vec<f64>, scale: MapScale) -> Result<Self> {
        if values.len() != MAP_ROWS * MAP_COLS {
            return Err(Error::InvalidLength(format!(
                "feature map needs {} values, got {}",
                MAP_ROWS * MAP_COLS,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        if scale == MapScale::MinMaxNormalized && values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidConfig("normalized map has values outside [0, 1]".into()));
        }
        Ok(Self { values, scale })
    }

    /// Stacks the per-frame spectra of both bands into a linear-magnitude map.
    pub fn from_band_spectra(low: &[Vec<Complex64>], high: &[Vec<Complex64>]) -> Result<Self> {
        for frames in [low, high] {
            if frames.len() != MAP_COLS {
                return Err(Error::FrameCountMismatch {
                    expected: MAP_COLS,
                    actual: frames.len(),
                });
            }
            if frames.iter().any(|f| f.len() != MAP_NFFT) {
                return Err(Error::InvalidConfig(format!("feature maps need {MAP_NFFT}-point spectra")));
            }
        }
        let mut values = vec![0.0; MAP_ROWS * MAP_COLS];
        for (band, frames) in [low, high].into_iter().enumerate() {
            for (t, spectrum) in frames.iter().enumerate() {
                for (k, x) in spectrum[1..=ROWS_PER_BAND].iter().enumerate() {
                    values[(band * ROWS_PER_BAND + k) * MAP_COLS + t] = x.norm();
                }
            }
        }
        Self::new(values, MapScale::LinearMagnitude)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn scale(&self) -> MapScale {
        self.scale
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * MAP_COLS + col]
    }

    pub fn row_energy(&self, row: usize) -> f64 {
        self.values[row * MAP_COLS..(row + 1) * MAP_COLS].iter().sum()
    }

    /// Converts a linear-magnitude map to decibels of power.
    pub fn to_log(&self) -> Self {
        let values = match self.scale {
            MapScale::LinearMagnitude => self
                .values
                .iter()
                .map(|m| 10.0 * (m * m + LOG_FLOOR).log10())
                .collect(),
            _ => self.values.clone(),
        };
        Self {
            values,
            scale: MapScale::LogMagnitude,
        }
    }

    /// Per-map min-max scaling to [0, 1]; a constant map becomes all zeros.
    pub fn normalized(&self) -> Self {
        Self {
            values: min_max(&self.values),
            scale: MapScale::MinMaxNormalized,
        }
    }

    /// Full-precision CSV: 128 lines of 128 comma-separated values.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(io_err(path))?;
        let mut w = BufWriter::new(file);
        let write = |w: &mut BufWriter<fs::File>| -> std::io::Result<()> {
            for row in self.values.chunks(MAP_COLS) {
                for (i, v) in row.iter().enumerate() {
                    if i > 0 {
                        w.write_all(b",")?;
                    }
                    write!(w, "{v}")?;
                }
                w.write_all(b"\n")?;
            }
            w.flush()
        };
        write(&mut w).map_err(io_err(path))
    }

    pub fn read_csv(path: &Path, scale: MapScale) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let mut values = Vec::with_capacity(MAP_ROWS * MAP_COLS);
        for (i, line) in text.lines().filter(|l| !l.trim().is_empty()).enumerate() {
            let before = values.len();
            for tok in line.split(',') {
                values.push(tok.trim().parse::<f64>().map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    detail: format!("line {}: bad value {tok:?}", i + 1),
                })?);
            }
            if values.len() - before != MAP_COLS {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    detail: format!("line {} has {} values", i + 1, values.len() - before),
                });
            }
        }
        Self::new(values, scale)
    }

    /// 8-bit binary graymap (P5). Values are min-max scaled first unless already normalized.
    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let scaled = match self.scale {
            MapScale::MinMaxNormalized => self.values.clone(),
            _ => min_max(&self.values),
        };
        let mut bytes = format!("P5\n{MAP_COLS} {MAP_ROWS}\n255\n").into_bytes();
        bytes.extend(scaled.iter().map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8));
        fs::write(path, bytes).map_err(io_err(path))
    }
}

pub(crate) fn min_max(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| ((v - lo) / (hi - lo)).clamp(0.0, 1.0)).collect()
}

fn check_map_config(cfg: &StftConfig) -> Result<()> {
    if cfg.n_fft != MAP_NFFT {
        return Err(Error::InvalidConfig(format!(
            "feature maps need n_fft = {MAP_NFFT}, got {}",
            cfg.n_fft
        )));
    }
    Ok(())
}

/// STFT spectrogram of both bands, in decibels, min-max normalized to [0, 1].
pub fn spectrogram_feature(segment: &DualBandSegment, cfg: &StftConfig) -> Result<FeatureMap> {
    check_map_config(cfg)?;
    let frames = cfg.frame_count(segment.len())?;
    if frames != MAP_FRAMES {
        return Err(Error::FrameCountMismatch {
            expected: MAP_FRAMES,
            actual: frames,
        });
    }
    let low = stft(segment.low(), cfg)?;
    let high = stft(segment.high(), cfg)?;
    Ok(FeatureMap::from_band_spectra(&low, &high)?.to_log().normalized())
}

/// Spectra of 128 contiguous, non-overlapping chunks per band (remainder dropped),
/// each folded to 128 points without windowing.
pub fn scu_spectra(x: &[f64]) -> Result<Vec<Vec<Complex64>>> {
    if x.len() < MAP_FRAMES {
        return Err(Error::SignalTooShort {
            len: x.len(),
            needed: MAP_FRAMES,
        });
    }
    let chunk = x.len() / MAP_FRAMES;
    let plan = FftPlan::new(MAP_NFFT)?;
    let mut folded = vec![0.0; MAP_NFFT];
    let mut buf = Vec::with_capacity(MAP_NFFT);
    Ok(x.chunks_exact(chunk)
        .take(MAP_FRAMES)
        .map(|c| {
            fold(c, MAP_NFFT, &mut folded);
            plan.process_real(&folded, &mut buf);
            buf.clone()
        })
        .collect())
}

pub fn scu_chunk_len(len: usize) -> usize {
    len / MAP_FRAMES
}

/// Simple-cutting map: same scaling and band stacking as [`spectrogram_feature`].
pub fn scu_feature(segment: &DualBandSegment) -> Result<FeatureMap> {
    let low = scu_spectra(segment.low())?;
    let high = scu_spectra(segment.high())?;
    Ok(FeatureMap::from_band_spectra(&low, &high)?.to_log().normalized())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn zero_segment_gives_zero_map() {
        let seg = DualBandSegment::zeros(20_000);
        let cfg = StftConfig::fit(20_000, 128).unwrap();
        let map = spectrogram_feature(&seg, &cfg).unwrap();
        assert_eq!(map.scale(), MapScale::MinMaxNormalized);
        assert!(map.values().iter().all(|&v| v == 0.0));
        assert!(scu_feature(&seg).unwrap().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn wrong_frame_count_rejected() {
        let seg = DualBandSegment::zeros(20_000);
        assert!(matches!(
            spectrogram_feature(&seg, &StftConfig::new(1000, 100, 128).unwrap()),
            Err(Error::FrameCountMismatch { expected: 128, .. })
        ));
        assert!(matches!(
            spectrogram_feature(&DualBandSegment::zeros(5_000), &StftConfig::desk()),
            Err(Error::SignalTooShort { .. })
        ));
        assert!(matches!(scu_feature(&DualBandSegment::zeros(127)), Err(Error::SignalTooShort { .. })));
    }

    #[test]
    fn scu_chunking() {
        assert_eq!(scu_chunk_len(10_000_000), 78_125);
        assert_eq!(scu_chunk_len(128 * 40) * 128, 128 * 40);
    }

    #[test]
    fn sinusoid_row_lands_at_its_bin() {
        let len = 128 * 200;
        let bin = 21usize;
        let low: Vec<f64> = (0..len).map(|n| (2.0 * PI * (bin * n) as f64 / 128.0).cos()).collect();
        let seg = DualBandSegment::new(low, vec![0.0; len], 40e6).unwrap();
        let map = scu_feature(&seg).unwrap();
        let best = (0..MAP_ROWS).max_by(|&a, &b| map.row_energy(a).total_cmp(&map.row_energy(b))).unwrap();
        assert_eq!(best, bin - 1);
    }

    #[test]
    fn csv_and_pgm_output() {
        let dir = tempfile::tempdir().unwrap();
        let values: Vec<f64> = (0..MAP_ROWS * MAP_COLS).map(|i| (i % 97) as f64 / 96.0).collect();
        let map = FeatureMap::new(values, MapScale::MinMaxNormalized).unwrap();
        let csv = dir.path().join("m.csv");
        map.write_csv(&csv).unwrap();
        assert_eq!(FeatureMap::read_csv(&csv, MapScale::MinMaxNormalized).unwrap(), map);
        let pgm = dir.path().join("m.pgm");
        map.write_pgm(&pgm).unwrap();
        let bytes = fs::read(&pgm).unwrap();
        let header = b"P5\n128 128\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(bytes.len(), header.len() + MAP_ROWS * MAP_COLS);
        assert_eq!(bytes[header.len() + 96], 255);
    }
}
