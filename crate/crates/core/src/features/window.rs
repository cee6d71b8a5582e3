use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Symmetric Hamming window, `w[n] = 0.54 - 0.46 cos(2 pi n / (len - 1))`.
pub fn hamming_window(len: usize) -> Result<Vec<f64>> {
    if len < 2 {
        return Err(Error::InvalidLength(format!("window length {len} < 2")));
    }
    let denom = (len - 1) as f64;
    Ok((0..len)
        .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / denom).cos())
        .collect())
}
