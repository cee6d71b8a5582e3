use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{io_err, Error, Result};

/// Nominal per-band sampling rate of the receivers.
pub const DEFAULT_SAMPLE_RATE: f64 = 40e6;
/// Samples per band in the reference captures.
pub const PAPER_LENGTH: usize = 10_000_000;
/// Samples per band used for desk-scale runs.
pub const DESK_LENGTH: usize = 1_000_000;
/// Maximum relative length difference between bands that is silently truncated.
pub const LENGTH_TOLERANCE: f64 = 0.01;

/// One capture: simultaneously sampled low (0-40 MHz) and high (40-80 MHz) bands.
#[derive(Debug, Clone, PartialEq)]
pub struct DualBandSegment {
    low: Vec<f64>,
    high: Vec<f64>,
    sample_rate: f64,
}

impl DualBandSegment {
    pub fn new(low: Vec<f64>, high: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if low.len() != high.len() {
            return Err(Error::LengthMismatch {
                low: low.len(),
                high: high.len(),
            });
        }
        if low.is_empty() {
            return Err(Error::InvalidLength("segment has no samples".into()));
        }
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::InvalidConfig(format!("sample rate {sample_rate}")));
        }
        if low.iter().chain(&high).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            low,
            high,
            sample_rate,
        })
    }

    pub fn zeros(len: usize) -> Self {
        Self::new(vec![0.0; len], vec![0.0; len], DEFAULT_SAMPLE_RATE).expect("valid zero segment")
    }

    pub fn low(&self) -> &[f64] {
        &self.low
    }

    pub fn high(&self) -> &[f64] {
        &self.high
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.low.len()
    }

    pub fn is_empty(&self) -> bool {
        self.low.is_empty()
    }
}

/// Reads comma- and/or newline-separated decimal reals.
pub fn read_samples(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for token in text.split(|c: char| c == ',' || c.is_whitespace()) {
        if token.is_empty() {
            continue;
        }
        let v: f64 = token.parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            detail: format!("non-numeric token {token:?} at position {}", out.len()),
        })?;
        if !v.is_finite() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                detail: format!("non-finite value at position {}", out.len()),
            });
        }
        out.push(v);
    }
    if out.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            detail: "empty file".into(),
        });
    }
    Ok(out)
}

/// Writes samples as one comma-separated line using shortest round-trip formatting.
pub fn write_samples(path: &Path, samples: &[f64]) -> Result<()> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<fs::File>| -> std::io::Result<()> {
        for (i, v) in samples.iter().enumerate() {
            if i > 0 {
                w.write_all(b",")?;
            }
            write!(w, "{v}")?;
        }
        w.write_all(b"\n")?;
        w.flush()
    };
    write(&mut w).map_err(io_err(path))
}

pub fn load_segment_files(low_path: &Path, high_path: &Path) -> Result<DualBandSegment> {
    let mut low = read_samples(low_path)?;
    let mut high = read_samples(high_path)?;
    if low.len() != high.len() {
        let longer = low.len().max(high.len());
        let diff = low.len().abs_diff(high.len());
        if diff as f64 > LENGTH_TOLERANCE * longer as f64 {
            return Err(Error::LengthMismatch {
                low: low.len(),
                high: high.len(),
            });
        }
        let n = low.len().min(high.len());
        log::warn!(
            "truncating {} / {} to {n} samples (low {}, high {})",
            low_path.display(),
            high_path.display(),
            low.len(),
            high.len()
        );
        low.truncate(n);
        high.truncate(n);
    }
    DualBandSegment::new(low, high, DEFAULT_SAMPLE_RATE)
}

pub fn save_segment(segment: &DualBandSegment, low_path: &Path, high_path: &Path) -> Result<()> {
    write_samples(low_path, segment.low())?;
    write_samples(high_path, segment.high())
}
