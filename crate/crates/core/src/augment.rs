//! Coexistence segments built by adding the time-domain samples of two single-drone
//! captures. No rescaling is applied after the sum.

use crate::error::{Error, Result};
use crate::signal::{BuiLabel, DatasetManifest, DronePair, DroneType, DualBandSegment, FlightMode};

/// Element-wise sum per band.
pub fn mix_segments(a: &DualBandSegment, b: &DualBandSegment) -> Result<DualBandSegment> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            low: a.len(),
            high: b.len(),
        });
    }
    if a.sample_rate() != b.sample_rate() {
        return Err(Error::RateMismatch(a.sample_rate(), b.sample_rate()));
    }
    let add = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p + q).collect::<Vec<f64>>();
    DualBandSegment::new(add(a.low(), b.low()), add(a.high(), b.high()), a.sample_rate())
}

/// Label of the mixture of two labeled segments. Only On-and-connected captures of
/// two different drone types may be combined.
pub fn coexistence_label(a: BuiLabel, b: BuiLabel) -> Result<BuiLabel> {
    match (a, b) {
        (
            BuiLabel::Single(ta, FlightMode::OnConnected),
            BuiLabel::Single(tb, FlightMode::OnConnected),
        ) if ta != tb => Ok(BuiLabel::Coexist(DronePair::from_types(ta, tb).expect("distinct types"))),
        _ => Err(Error::UnsupportedMix(a.code(), b.code())),
    }
}

pub fn source_label(drone: DroneType) -> BuiLabel {
    BuiLabel::Single(drone, FlightMode::OnConnected)
}

/// Full cross product of two source lists in lexicographic (i, j) order.
pub fn mix_cross_product(
    sources_a: &[DualBandSegment],
    sources_b: &[DualBandSegment],
) -> Result<Vec<DualBandSegment>> {
    let mut out = Vec::with_capacity(sources_a.len() * sources_b.len());
    for a in sources_a {
        for b in sources_b {
            out.push(mix_segments(a, b)?);
        }
    }
    Ok(out)
}

/// Streams the mixtures of the manifest's On-and-connected segments of the pair's
/// two drone types to `sink`, in lexicographic order of (first index, second index).
/// The second type's segments are held in memory; the first type's are loaded one
/// at a time.
pub fn for_each_coexistence<F>(manifest: &DatasetManifest, pair: DronePair, mut sink: F) -> Result<usize>
where
    F: FnMut(usize, DualBandSegment, BuiLabel) -> Result<()>,
{
    let (ta, tb) = pair.types();
    let a_entries: Vec<_> = manifest.entries_with(source_label(ta)).collect();
    let b_entries: Vec<_> = manifest.entries_with(source_label(tb)).collect();
    if a_entries.is_empty() {
        return Err(Error::MissingSourceClass(ta.name()));
    }
    if b_entries.is_empty() {
        return Err(Error::MissingSourceClass(tb.name()));
    }
    let label = BuiLabel::Coexist(pair);
    let b_segments = b_entries.iter().map(|e| e.load()).collect::<Result<Vec<_>>>()?;
    let mut n = 0;
    for a_entry in a_entries {
        let a = a_entry.load()?;
        for b in &b_segments {
            sink(n, mix_segments(&a, b)?, label)?;
            n += 1;
        }
    }
    Ok(n)
}

/// Collects every mixture for `pair` in memory.
pub fn generate_coexistence_set(
    manifest: &DatasetManifest,
    pair: DronePair,
) -> Result<Vec<(DualBandSegment, BuiLabel)>> {
    let mut out = Vec::new();
    for_each_coexistence(manifest, pair, |_, seg, bui| {
        out.push((seg, bui));
        Ok(())
    })?;
    Ok(out)
}
