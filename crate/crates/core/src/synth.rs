//! Deterministic synthetic dual-band segments.
//!
//! Every drone type transmits a frequency-hopping burst pattern on exact 128-point
//! bin frequencies over unit-variance white noise:
//!
//! | type    | texture                                   | low-band bins      |
//! |---------|-------------------------------------------|--------------------|
//! | Bebop   | long narrowband dwells (1/16 of segment)  | 12, 20, 28, 36     |
//! | AR      | short 5-bin-wide bursts (1/256)           | 14-18, 30-34       |
//! | Phantom | stepped up and down chirps (1/16)         | 22..=42            |
//!
//! Bebop hop channels and the two Phantom sweep directions are scheduled
//! independently. The flight mode sets the fraction of active slots. The high band
//! carries the same activity shifted up by [`HIGH_BAND_SHIFT`] bins at
//! [`HIGH_BAND_GAIN`] of the amplitude. Coexistence segments are the sum of two
//! On-and-connected segments.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::augment::{mix_segments, source_label};
use crate::error::{io_err, Error, Result};
use crate::features::{StftConfig, MAP_NFFT};
use crate::signal::{
    save_segment, segment_file_name, Band, BuiLabel, DatasetManifest, DroneType, DualBandSegment, FlightMode,
    ManifestEntry, DEFAULT_SAMPLE_RATE, TABLE_I,
};

pub const NOISE_STD: f64 = 1.0;
pub const HIGH_BAND_SHIFT: usize = 8;
pub const HIGH_BAND_GAIN: f64 = 0.25;

pub const BEBOP_BINS: [usize; 4] = [12, 20, 28, 36];
pub const BEBOP_SLOTS: usize = 16;
pub const BEBOP_AMPLITUDE: f64 = 1.0;

pub const AR_CENTERS: [usize; 2] = [16, 32];
pub const AR_HALF_WIDTH: usize = 2;
pub const AR_SLOTS: usize = 256;
pub const AR_AMPLITUDE: f64 = 0.6;

pub const PHANTOM_SWEEP: (usize, usize) = (22, 42);
pub const PHANTOM_SLOTS: usize = 16;
pub const PHANTOM_AMPLITUDE: f64 = 1.0;

/// Fraction of active slots per flight mode.
pub fn duty_cycle(mode: FlightMode) -> f64 {
    match mode {
        FlightMode::OnConnected => 0.5,
        FlightMode::Hovering => 0.6,
        FlightMode::Flying => 0.7,
        FlightMode::VideoRecording => 0.8,
    }
}

/// Shortest segment accepted: one desk-scale STFT window.
pub fn min_length() -> usize {
    StftConfig::desk().window_len
}

fn cos_table() -> &'static [f64; MAP_NFFT] {
    static TABLE: OnceLock<[f64; MAP_NFFT]> = OnceLock::new();
    TABLE.get_or_init(|| {
        std::array::from_fn(|i| (2.0 * std::f64::consts::PI * i as f64 / MAP_NFFT as f64).cos())
    })
}

/// Adds `amp * cos(2 pi bin n / 128 + phase)` over `range`. The phase is in table steps.
fn add_tone(x: &mut [f64], range: std::ops::Range<usize>, bin: usize, phase: usize, amp: f64) {
    let table = cos_table();
    for n in range {
        x[n] += amp * table[(bin * n + phase) % MAP_NFFT];
    }
}

/// Splitmix64 finalizer, used to derive independent child seeds.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn bui_salt(bui: BuiLabel) -> u64 {
    bui.code().parse::<u64>().expect("digits")
}

/// Seeds of the two On-and-connected constituents of a coexistence segment.
pub fn coexistence_constituents(bui: BuiLabel, seed: u64) -> Option<[(BuiLabel, u64); 2]> {
    match bui {
        BuiLabel::Coexist(pair) => {
            let (a, b) = pair.types();
            Some([
                (source_label(a), derive_seed(seed, 1)),
                (source_label(b), derive_seed(seed, 2)),
            ])
        }
        _ => None,
    }
}

fn active_slots(rng: &mut ChaCha8Rng, slots: usize, mode: FlightMode) -> Vec<usize> {
    let count = ((duty_cycle(mode) * slots as f64).round() as usize).clamp(1, slots);
    let mut picked = sample(rng, slots, count).into_vec();
    picked.sort_unstable();
    picked
}

/// Writes the burst pattern into both bands.
fn add_bursts(low: &mut [f64], high: &mut [f64], drone: DroneType, mode: FlightMode, rng: &mut ChaCha8Rng) {
    let len = low.len();
    let mut both = |range: std::ops::Range<usize>, bin: usize, phase: usize, amp: f64| {
        add_tone(low, range.clone(), bin, phase, amp);
        add_tone(high, range, bin + HIGH_BAND_SHIFT, phase, amp * HIGH_BAND_GAIN);
    };
    match drone {
        DroneType::Bebop => {
            let slot = len / BEBOP_SLOTS;
            for &bin in &BEBOP_BINS {
                for s in active_slots(rng, BEBOP_SLOTS, mode) {
                    both(s * slot..(s + 1) * slot, bin, rng.random_range(0..MAP_NFFT), BEBOP_AMPLITUDE);
                }
            }
        }
        DroneType::Ar => {
            let slot = len / AR_SLOTS;
            for s in active_slots(rng, AR_SLOTS, mode) {
                let center = AR_CENTERS[rng.random_range(0..AR_CENTERS.len())];
                for bin in center - AR_HALF_WIDTH..=center + AR_HALF_WIDTH {
                    both(s * slot..(s + 1) * slot, bin, rng.random_range(0..MAP_NFFT), AR_AMPLITUDE);
                }
            }
        }
        DroneType::Phantom => {
            let slot = len / PHANTOM_SLOTS;
            let (lo, hi) = PHANTOM_SWEEP;
            let steps = hi - lo + 1;
            let step = slot / steps;
            for descending in [false, true] {
                for s in active_slots(rng, PHANTOM_SLOTS, mode) {
                    let phase = rng.random_range(0..MAP_NFFT);
                    for i in 0..steps {
                        let bin = if descending { hi - i } else { lo + i };
                        let start = s * slot + i * step;
                        both(start..start + step, bin, phase, PHANTOM_AMPLITUDE);
                    }
                }
            }
        }
    }
}

fn noise(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..len)
        .map(|_| NOISE_STD * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
        .collect()
}

/// One synthetic segment of class `bui`, fully determined by `(bui, length, seed)`.
pub fn synth_segment(bui: BuiLabel, length: usize, seed: u64) -> Result<DualBandSegment> {
    if length < min_length() {
        return Err(Error::SignalTooShort {
            len: length,
            needed: min_length(),
        });
    }
    if let Some([(a, sa), (b, sb)]) = coexistence_constituents(bui, seed) {
        return mix_segments(&synth_segment(a, length, sa)?, &synth_segment(b, length, sb)?);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut low = noise(length, &mut rng);
    let mut high = noise(length, &mut rng);
    if let BuiLabel::Single(drone, mode) = bui {
        add_bursts(&mut low, &mut high, drone, mode, &mut rng);
    }
    DualBandSegment::new(low, high, DEFAULT_SAMPLE_RATE)
}

/// Number of segments requested per BUI.
pub type SynthCounts = BTreeMap<BuiLabel, usize>;

/// The reference dataset's per-BUI counts.
pub fn table_i_counts() -> SynthCounts {
    TABLE_I.iter().copied().collect()
}

/// Per-class count of the desk-scale Case II-C set.
pub const DESK_SAMPLES_PER_CLASS: usize = 70;

/// Balanced Case II-C set with at least `per_class` segments in each of the 7 classes.
/// Drone-type classes spread their share over the type's flight modes.
pub fn case_iic_counts(per_class: usize) -> SynthCounts {
    let mut counts = SynthCounts::new();
    counts.insert(BuiLabel::NoDrone, per_class);
    for drone in DroneType::ALL {
        let modes: Vec<BuiLabel> = BuiLabel::all()
            .filter(|b| matches!(b, BuiLabel::Single(t, _) if *t == drone))
            .collect();
        let each = per_class.div_ceil(modes.len());
        for bui in modes {
            counts.insert(bui, each);
        }
    }
    for pair in crate::signal::DronePair::ALL {
        counts.insert(BuiLabel::Coexist(pair), per_class);
    }
    counts
}

/// Parses `00000=35,10000=9,...`, or a preset: `table1`, `ii-c` or `ii-c:<per class>`.
pub fn parse_counts(spec: &str) -> Result<SynthCounts> {
    let spec = spec.trim();
    if spec.eq_ignore_ascii_case("table1") {
        return Ok(table_i_counts());
    }
    if spec.eq_ignore_ascii_case("ii-c") {
        return Ok(case_iic_counts(DESK_SAMPLES_PER_CLASS));
    }
    if let Some(n) = spec.strip_prefix("ii-c:").or_else(|| spec.strip_prefix("II-C:")) {
        let n = n
            .parse::<usize>()
            .map_err(|_| Error::InvalidConfig(format!("bad per-class count {n:?}")))?;
        return Ok(case_iic_counts(n));
    }
    let mut counts = SynthCounts::new();
    for item in spec.split(',').filter(|s| !s.trim().is_empty()) {
        let (code, n) = item
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("expected <bui>=<count>, got {item:?}")))?;
        let n = n
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::InvalidConfig(format!("bad count in {item:?}")))?;
        *counts.entry(BuiLabel::parse(code.trim())?).or_default() += n;
    }
    validate_counts(&counts)?;
    Ok(counts)
}

fn validate_counts(counts: &SynthCounts) -> Result<()> {
    if counts.is_empty() {
        return Err(Error::InvalidConfig("no segments requested".into()));
    }
    if let Some((bui, _)) = counts.iter().find(|(_, &n)| n == 0) {
        return Err(Error::InvalidConfig(format!("count for {bui} must be at least 1")));
    }
    Ok(())
}

/// Seed of the `index`-th segment of class `bui` under a master seed.
pub fn segment_seed(master: u64, bui: BuiLabel, index: usize) -> u64 {
    derive_seed(derive_seed(master, bui_salt(bui)), index as u64)
}

/// The `(bui, index, seed)` list of a dataset, ordered by BUI then index.
pub fn dataset_plan(counts: &SynthCounts, master: u64) -> Vec<(BuiLabel, usize, u64)> {
    counts
        .iter()
        .flat_map(|(&bui, &n)| (0..n).map(move |i| (bui, i, segment_seed(master, bui, i))))
        .collect()
}

/// Writes every requested segment under `out_dir` following the file naming
/// contract, plus `manifest.csv`. Segments are generated in parallel.
pub fn synth_dataset(counts: &SynthCounts, length: usize, master: u64, out_dir: &Path) -> Result<DatasetManifest> {
    validate_counts(counts)?;
    if length < min_length() {
        return Err(Error::SignalTooShort {
            len: length,
            needed: min_length(),
        });
    }
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let plan = dataset_plan(counts, master);
    let entries = plan
        .par_iter()
        .map(|&(bui, index, seed)| {
            let low_path = out_dir.join(segment_file_name(bui, Band::Low, index));
            let high_path = out_dir.join(segment_file_name(bui, Band::High, index));
            save_segment(&synth_segment(bui, length, seed)?, &low_path, &high_path)?;
            Ok(ManifestEntry {
                low_path,
                high_path,
                bui,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = DatasetManifest::new(entries)?;
    manifest.write_csv(&out_dir.join("manifest.csv"))?;
    Ok(manifest)
}
