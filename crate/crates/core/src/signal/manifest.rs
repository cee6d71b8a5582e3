use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use super::bui::BuiLabel;
use super::segment::{load_segment_files, DualBandSegment};
use crate::error::{io_err, Error, Result};

pub const MANIFEST_HEADER: [&str; 3] = ["low_path", "high_path", "bui"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Band {
    Low,
    High,
}

impl Band {
    pub fn letter(self) -> char {
        match self {
            Band::Low => 'L',
            Band::High => 'H',
        }
    }
}

/// `<BUI><L|H>_<index>.csv`
pub fn segment_file_name(bui: BuiLabel, band: Band, index: usize) -> String {
    format!("{}{}_{index}.csv", bui.code(), band.letter())
}

/// Splits a file name following the naming contract into its raw BUI text, band
/// and index. The BUI text is not validated here.
pub fn parse_segment_file_name(name: &str) -> Option<(&str, Band, usize)> {
    let stem = name.strip_suffix(".csv")?;
    let (head, index) = stem.split_once('_')?;
    if head.len() != 6 || !head.is_ascii() {
        return None;
    }
    let band = match head.as_bytes()[5] {
        b'L' => Band::Low,
        b'H' => Band::High,
        _ => return None,
    };
    if index.is_empty() || !index.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    Some((&head[..5], band, index.parse().ok()?))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub low_path: PathBuf,
    pub high_path: PathBuf,
    pub bui: BuiLabel,
}

impl ManifestEntry {
    pub fn load(&self) -> Result<DualBandSegment> {
        load_segment_files(&self.low_path, &self.high_path)
    }
}

/// Labeled list of segment file pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetManifest {
    entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for e in &entries {
            for p in [&e.low_path, &e.high_path] {
                if !seen.insert(p.clone()) {
                    return Err(Error::DuplicatePath(p.clone()));
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn counts(&self) -> BTreeMap<BuiLabel, usize> {
        let mut counts = BTreeMap::new();
        for e in &self.entries {
            *counts.entry(e.bui).or_insert(0) += 1;
        }
        counts
    }

    pub fn entries_with(&self, bui: BuiLabel) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.bui == bui)
    }

    pub fn extend(&mut self, other: DatasetManifest) -> Result<()> {
        let mut all = std::mem::take(&mut self.entries);
        all.extend(other.entries);
        *self = DatasetManifest::new(all)?;
        Ok(())
    }

    /// Reads a `low_path,high_path,bui` CSV. Relative paths resolve against the
    /// manifest's directory.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let base = path.parent().unwrap_or(Path::new(""));
        let mut reader = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
        let headers = reader.headers().map_err(|e| csv_err(path, e))?.clone();
        if headers.iter().collect::<Vec<_>>() != MANIFEST_HEADER {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                detail: format!("expected header {}", MANIFEST_HEADER.join(",")),
            });
        }
        let mut entries = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| csv_err(path, e))?;
            let resolve = |s: &str| {
                let p = PathBuf::from(s);
                if p.is_absolute() {
                    p
                } else {
                    base.join(p)
                }
            };
            entries.push(ManifestEntry {
                low_path: resolve(&record[0]),
                high_path: resolve(&record[1]),
                bui: BuiLabel::parse(&record[2])?,
            });
        }
        DatasetManifest::new(entries)
    }

    /// Writes the manifest, storing paths relative to its directory when they lie
    /// under it and absolute otherwise.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let base = path.parent().unwrap_or(Path::new(""));
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        w.write_record(MANIFEST_HEADER).map_err(|e| csv_err(path, e))?;
        for e in &self.entries {
            let rel = |p: &Path| match p.strip_prefix(base) {
                Ok(r) => r.to_string_lossy().into_owned(),
                Err(_) => std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf()).to_string_lossy().into_owned(),
            };
            w.write_record([rel(&e.low_path), rel(&e.high_path), e.bui.code()])
                .map_err(|err| csv_err(path, err))?;
        }
        w.flush().map_err(io_err(path))
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        detail: e.to_string(),
    }
}

/// Result of pairing segment files found under a directory.
#[derive(Debug, Clone, Default)]
pub struct ScanReport {
    pub manifest: DatasetManifest,
    /// Files matching the naming contract whose other band is missing.
    pub unpaired: Vec<PathBuf>,
    /// Files matching the naming contract whose BUI is not a valid code.
    pub rejected: Vec<PathBuf>,
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut items: Vec<_> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(io_err(dir))?;
    items.sort_by_key(|e| e.file_name());
    for item in items {
        let path = item.path();
        if path.is_dir() {
            collect_files(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

/// Pairs `<BUI>L_<i>.csv` with `<BUI>H_<i>.csv` files (recursively) into a manifest
/// ordered by BUI, directory and index.
///
/// Fails with `NoEntries` only when no file follows the naming contract at all; a
/// directory holding only unpaired files yields an empty manifest plus warnings.
pub fn scan_dataset(root: &Path) -> Result<ScanReport> {
    let mut files = Vec::new();
    collect_files(root, &mut files)?;
    let mut report = ScanReport::default();
    let mut slots: HashMap<(BuiLabel, PathBuf, usize), [Option<PathBuf>; 2]> = HashMap::new();
    let mut matched = 0;
    for path in files {
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        let Some((code, band, index)) = parse_segment_file_name(name) else {
            continue;
        };
        matched += 1;
        let Ok(bui) = BuiLabel::parse(code) else {
            log::warn!("{}: invalid BUI {code}", path.display());
            report.rejected.push(path);
            continue;
        };
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let slot = slots.entry((bui, dir, index)).or_default();
        slot[band as usize] = Some(path);
    }
    if matched == 0 {
        return Err(Error::NoEntries(root.to_path_buf()));
    }
    let mut keys: Vec<_> = slots.keys().cloned().collect();
    keys.sort();
    let mut entries = Vec::new();
    for key in keys {
        match slots.remove(&key).unwrap() {
            [Some(low_path), Some(high_path)] => entries.push(ManifestEntry {
                low_path,
                high_path,
                bui: key.0,
            }),
            [Some(p), None] | [None, Some(p)] => {
                log::warn!("{}: no matching file for the other band", p.display());
                report.unpaired.push(p);
            }
            [None, None] => unreachable!(),
        }
    }
    report.manifest = DatasetManifest::new(entries)?;
    Ok(report)
}
