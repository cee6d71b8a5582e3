use rayon::prelude::*;

use crate::error::Result;
use crate::features::FeatureMethod;
use crate::signal::{BuiLabel, ClassificationCase, DatasetManifest, DualBandSegment};
use crate::synth::{dataset_plan, synth_segment, SynthCounts};

/// Network inputs for every sample of a case under one feature method.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub case: ClassificationCase,
    pub method: FeatureMethod,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub buis: Vec<BuiLabel>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.case.num_classes()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

/// Loads (or generates) each segment once, extracts every requested feature method
/// from it and drops it. Samples outside `case` are skipped. Sources are processed
/// in parallel; output order follows `sources`.
pub fn extract_features<F>(
    sources: &[(BuiLabel, F)],
    case: ClassificationCase,
    methods: &[FeatureMethod],
) -> Result<Vec<Dataset>>
where
    F: Fn() -> Result<DualBandSegment> + Sync,
{
    let kept: Vec<(BuiLabel, usize, &F)> = sources
        .iter()
        .filter_map(|(bui, load)| case.class_of(*bui).map(|c| (*bui, c, load)))
        .collect();
    let rows = kept
        .par_iter()
        .map(|(_, _, load)| {
            let segment = load()?;
            methods.iter().map(|m| m.extract(&segment)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<usize> = kept.iter().map(|k| k.1).collect();
    let buis: Vec<BuiLabel> = kept.iter().map(|k| k.0).collect();
    let mut sets: Vec<Dataset> = methods
        .iter()
        .map(|&method| Dataset {
            case,
            method,
            features: Vec::with_capacity(rows.len()),
            labels: labels.clone(),
            buis: buis.clone(),
        })
        .collect();
    for row in rows {
        for (set, f) in sets.iter_mut().zip(row) {
            set.features.push(f);
        }
    }
    Ok(sets)
}

pub fn dataset_from_manifest(
    manifest: &DatasetManifest,
    case: ClassificationCase,
    methods: &[FeatureMethod],
) -> Result<Vec<Dataset>> {
    let sources: Vec<_> = manifest
        .entries()
        .iter()
        .map(|e| (e.bui, move || e.load()))
        .collect();
    extract_features(&sources, case, methods)
}

/// Synthetic segments generated on the fly, never held all at once.
pub fn synthetic_dataset(
    counts: &SynthCounts,
    length: usize,
    seed: u64,
    case: ClassificationCase,
    methods: &[FeatureMethod],
) -> Result<Vec<Dataset>> {
    let sources: Vec<_> = dataset_plan(counts, seed)
        .into_iter()
        .map(|(bui, _, s)| (bui, move || synth_segment(bui, length, s)))
        .collect();
    extract_features(&sources, case, methods)
}
