use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{ClassificationCase, DatasetManifest};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train: 0.8,
            val: 0.1,
            test: 0.1,
            seed: 0,
            stratified: true,
        }
    }
}

impl SplitSpec {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|f| !(0.0..=1.0).contains(f)) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "split fractions {parts:?} must lie in [0, 1] and sum to 1"
            )));
        }
        if self.train == 0.0 {
            return Err(Error::InvalidConfig("training fraction must be positive".into()));
        }
        Ok(())
    }
}

/// Disjoint index sets into the labelled sample list.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Sizes of the (val, test) parts of a group of `n`. Stratified groups get at least
/// one of each when the fraction is non-zero.
fn holdout_sizes(n: usize, spec: &SplitSpec) -> (usize, usize) {
    let size = |f: f64| {
        let k = (f * n as f64).round() as usize;
        if spec.stratified && f > 0.0 {
            k.max(1)
        } else {
            k
        }
    };
    let test = size(spec.test).min(n);
    let val = size(spec.val).min(n - test);
    (val, test)
}

fn cut(indices: &[usize], spec: &SplitSpec, out: &mut Split) {
    let (val, test) = holdout_sizes(indices.len(), spec);
    out.test.extend_from_slice(&indices[..test]);
    out.val.extend_from_slice(&indices[test..test + val]);
    out.train.extend_from_slice(&indices[test + val..]);
}

/// Splits samples by class label. Each returned list is sorted.
pub fn split_indices(labels: &[usize], num_classes: usize, spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut split = Split::default();
    if spec.stratified {
        for class in 0..num_classes {
            let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
            if members.is_empty() {
                continue;
            }
            if members.len() < 3 {
                return Err(Error::ClassTooSmall {
                    class,
                    count: members.len(),
                });
            }
            members.shuffle(&mut rng);
            cut(&members, spec, &mut split);
        }
    } else {
        let mut all: Vec<usize> = (0..labels.len()).collect();
        all.shuffle(&mut rng);
        cut(&all, spec, &mut split);
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

/// Splits the manifest entries that belong to `case`; returned indices point into
/// the manifest. Entries outside the case (such as coexistence segments for
/// single-drone cases) appear in no part.
pub fn split_dataset(manifest: &DatasetManifest, case: ClassificationCase, spec: &SplitSpec) -> Result<Split> {
    let included: Vec<(usize, usize)> = manifest
        .entries()
        .iter()
        .enumerate()
        .filter_map(|(i, e)| case.class_of(e.bui).map(|c| (i, c)))
        .collect();
    let labels: Vec<usize> = included.iter().map(|p| p.1).collect();
    let local = split_indices(&labels, case.num_classes(), spec)?;
    let map = |v: Vec<usize>| v.into_iter().map(|i| included[i].0).collect::<Vec<_>>();
    Ok(Split {
        train: map(local.train),
        val: map(local.val),
        test: map(local.test),
    })
}
