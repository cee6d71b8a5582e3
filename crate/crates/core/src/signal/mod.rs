//! Segments, BUI labels, classification cases and dataset manifests.

mod bui;
mod case;
mod manifest;
mod segment;

pub use bui::{BuiLabel, DronePair, DroneType, FlightMode, TABLE_I};
pub use case::ClassificationCase;
pub use manifest::{
    parse_segment_file_name, scan_dataset, segment_file_name, Band, DatasetManifest, ManifestEntry,
    ScanReport, MANIFEST_HEADER,
};
pub use segment::{
    load_segment_files, read_samples, save_segment, write_samples, DualBandSegment, DEFAULT_SAMPLE_RATE,
    DESK_LENGTH, LENGTH_TOLERANCE, PAPER_LENGTH,
};

/// Loads the segment referenced by a manifest entry.
pub fn load_segment(entry: &ManifestEntry) -> crate::Result<DualBandSegment> {
    entry.load()
}
