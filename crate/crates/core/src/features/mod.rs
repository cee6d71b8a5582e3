//! Classifier inputs derived from a dual-band segment: STFT and simple-cutting
//! spectrogram maps, and power spectral density vectors.

mod fft;
mod map;
mod psd;
mod stft;
mod window;

use serde::{Deserialize, Serialize};

pub use fft::{fft, FftPlan};
pub use map::{
    scu_chunk_len, scu_feature, scu_spectra, spectrogram_feature, FeatureMap, MapScale, LOG_FLOOR, MAP_COLS,
    MAP_ROWS, ROWS_PER_BAND,
};
pub use psd::{periodogram, psd_feature, PsdConfig, PsdVector};
pub use stft::{fold, stft, StftConfig, WindowKind, MAP_FRAMES, MAP_NFFT};
pub use window::hamming_window;

use crate::error::Result;
use crate::signal::DualBandSegment;

/// How a segment is turned into a network input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum FeatureMethod {
    Stft(StftConfig),
    Scu,
    Psd(PsdConfig),
}

impl FeatureMethod {
    pub fn name(&self) -> &'static str {
        match self {
            FeatureMethod::Stft(_) => "stft",
            FeatureMethod::Scu => "scu",
            FeatureMethod::Psd(_) => "psd",
        }
    }

    /// Per-sample input shape (channels first).
    pub fn input_shape(&self) -> Vec<usize> {
        match self {
            FeatureMethod::Stft(_) | FeatureMethod::Scu => vec![1, MAP_ROWS, MAP_COLS],
            FeatureMethod::Psd(cfg) => vec![1, 1, 2 * (cfg.n_fft / 2 + 1)],
        }
    }

    /// Flat network input for one segment.
    pub fn extract(&self, segment: &DualBandSegment) -> Result<Vec<f64>> {
        Ok(match self {
            FeatureMethod::Stft(cfg) => spectrogram_feature(segment, cfg)?.into_values(),
            FeatureMethod::Scu => scu_feature(segment)?.into_values(),
            FeatureMethod::Psd(cfg) => psd_feature(segment, cfg)?.to_model_input(),
        })
    }
}
