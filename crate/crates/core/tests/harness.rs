use std::collections::BTreeSet;
use std::path::PathBuf;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rfdrone_core::features::{FeatureMethod, PsdConfig};
use rfdrone_core::harness::{
    evaluate, mean_metrics, run_experiment, split_dataset, split_indices, train, write_confusion_csv,
    write_curves_csv, write_report_csv, ConfusionMatrix, Dataset, SplitSpec, TrainConfig,
};
use rfdrone_core::models::{Classifier, ModelSpec, PsdNetSpec};
use rfdrone_core::signal::{BuiLabel, ClassificationCase, DatasetManifest, ManifestEntry, TABLE_I};
use rfdrone_core::Error;
use rfdrone_nn::{Module, Slot};

const PSD_LEN: usize = 130;

/// Seven classes of PSD-shaped vectors: a bump of class-specific width at a random position.
fn toy_psd_dataset(per_class: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for class in 0..7 {
        for _ in 0..per_class {
            let center = rng.random_range(30.0..100.0);
            let width = 2f64.powi(class as i32 - 1);
            let v = (0..PSD_LEN)
                .map(|k| {
                    let d = (k as f64 - center) / width;
                    (-d * d).exp() + 0.1 * rng.random::<f64>()
                })
                .collect();
            features.push(v);
            labels.push(class);
        }
    }
    Dataset {
        case: ClassificationCase::IIC,
        method: FeatureMethod::Psd(PsdConfig::default()),
        buis: vec![BuiLabel::NoDrone; labels.len()],
        features,
        labels,
    }
}

fn psd_spec() -> ModelSpec {
    ModelSpec::Psd1d(PsdNetSpec::new(7, PSD_LEN))
}

fn small_cfg() -> TrainConfig {
    TrainConfig {
        batch_size: 8,
        epochs: 3,
        lr: 3e-3,
        l2: 1e-4,
        seed: 5,
        repeats: 2,
    }
}

fn params(model: &mut Classifier) -> Vec<f64> {
    let mut out = Vec::new();
    model.visit("", &mut |_, slot| {
        if let Slot::Param(p) = slot {
            out.extend_from_slice(p.value.data());
        }
    });
    out
}

fn check_partition(labels: &[usize], num_classes: usize, spec: &SplitSpec) {
    let s = split_indices(labels, num_classes, spec).unwrap();
    let (tr, va, te): (BTreeSet<_>, BTreeSet<_>, BTreeSet<_>) = (
        s.train.iter().copied().collect(),
        s.val.iter().copied().collect(),
        s.test.iter().copied().collect(),
    );
    assert_eq!(tr.len() + va.len() + te.len(), labels.len());
    assert!(tr.is_disjoint(&va) && tr.is_disjoint(&te) && va.is_disjoint(&te));
    for class in 0..num_classes {
        let n = labels.iter().filter(|&&l| l == class).count();
        if n == 0 {
            continue;
        }
        let count = |set: &BTreeSet<usize>| set.iter().filter(|&&i| labels[i] == class).count();
        assert!(count(&te) >= 1 && count(&va) >= 1, "class {class} lacks a holdout sample");
        assert!(count(&tr) >= 1, "class {class} lacks a training sample");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn split_is_disjoint_exhaustive_and_stratified(
        class_sizes in prop::collection::vec(3usize..40, 2..8),
        seed in any::<u64>(),
    ) {
        let mut labels: Vec<usize> = class_sizes
            .iter()
            .enumerate()
            .flat_map(|(c, &n)| std::iter::repeat_n(c, n))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..labels.len()).rev() {
            labels.swap(i, rng.random_range(0..=i));
        }
        check_partition(&labels, class_sizes.len(), &SplitSpec::with_seed(seed));
    }
}

#[test]
fn split_sizes_for_one_hundred_samples() {
    for labels in [vec![0; 100], (0..100).map(|i| i % 10).collect::<Vec<_>>()] {
        let classes = labels.iter().max().unwrap() + 1;
        let s = split_indices(&labels, classes, &SplitSpec::default()).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (80, 10, 10));
    }
}

#[test]
fn split_is_deterministic_per_seed() {
    let labels: Vec<usize> = (0..210).map(|i| i % 7).collect();
    let a = split_indices(&labels, 7, &SplitSpec::with_seed(11)).unwrap();
    let b = split_indices(&labels, 7, &SplitSpec::with_seed(11)).unwrap();
    let c = split_indices(&labels, 7, &SplitSpec::with_seed(12)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn split_rejects_tiny_classes() {
    let err = split_indices(&[0, 0, 0, 1, 1], 2, &SplitSpec::default()).unwrap_err();
    assert!(matches!(err, Error::ClassTooSmall { class: 1, count: 2 }));
}

#[test]
fn case_iii_split_excludes_coexistence_entries() {
    let mut entries = Vec::new();
    for (bui, n) in TABLE_I {
        for i in 0..n {
            let stem = format!("{}_{i}", bui.code());
            entries.push(ManifestEntry {
                low_path: PathBuf::from(format!("{stem}_L")),
                high_path: PathBuf::from(format!("{stem}_H")),
                bui,
            });
        }
    }
    let manifest = DatasetManifest::new(entries).unwrap();
    let s = split_dataset(&manifest, ClassificationCase::III, &SplitSpec::default()).unwrap();
    let all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
    assert_eq!(all.len(), 227);
    for i in all {
        assert!(!manifest.entries()[i].bui.code().starts_with('2'));
    }
    let coexist = split_dataset(&manifest, ClassificationCase::IIB, &SplitSpec::default()).unwrap();
    assert_eq!(coexist.len(), 1323);
}

/// Counts true/false positives by walking every (truth, prediction) pair.
fn tally(pairs: &[(usize, usize)], k: usize) -> (f64, Vec<(f64, f64, f64)>) {
    let correct = pairs.iter().filter(|(t, p)| t == p).count();
    let per_class = (0..k)
        .map(|c| {
            let (mut tp, mut fp, mut fneg) = (0u64, 0u64, 0u64);
            for &(t, p) in pairs {
                match (t == c, p == c) {
                    (true, true) => tp += 1,
                    (false, true) => fp += 1,
                    (true, false) => fneg += 1,
                    _ => {}
                }
            }
            let div = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
            let (p, r) = (div(tp, tp + fp), div(tp, tp + fneg));
            let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
            (p, r, f)
        })
        .collect();
    (correct as f64 / pairs.len() as f64, per_class)
}

#[test]
fn metrics_match_tally_on_random_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..100 {
        let k = rng.random_range(2..=10);
        let n = rng.random_range(1..=60);
        let pairs: Vec<(usize, usize)> = (0..n).map(|_| (rng.random_range(0..k), rng.random_range(0..k))).collect();
        let (t, p): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
        let m = ConfusionMatrix::from_predictions(k, &t, &p).unwrap().metrics().unwrap();
        let (acc, per_class) = tally(&pairs, k);
        assert_eq!(m.accuracy, acc);
        for (got, want) in m.per_class.iter().zip(&per_class) {
            assert_eq!((got.precision, got.recall, got.f1), *want);
        }
        let macro_p = per_class.iter().map(|c| c.0).sum::<f64>() / k as f64;
        let macro_r = per_class.iter().map(|c| c.1).sum::<f64>() / k as f64;
        assert_eq!(m.precision, macro_p);
        assert_eq!(m.recall, macro_r);
        let f = if macro_p + macro_r == 0.0 { 0.0 } else { 2.0 * macro_p * macro_r / (macro_p + macro_r) };
        assert_eq!(m.f1, f);
    }
}

#[test]
fn worked_confusion_example() {
    let m = ConfusionMatrix::from_counts(vec![vec![5, 0], vec![1, 4]]).unwrap().metrics().unwrap();
    assert_eq!(m.accuracy, 0.9);
    let c0 = m.per_class[0];
    assert!((c0.precision - 5.0 / 6.0).abs() < 1e-15);
    assert_eq!(c0.recall, 1.0);
    assert!((c0.f1 - 10.0 / 11.0).abs() < 1e-15);
}

#[test]
fn zero_learning_rate_leaves_parameters_unchanged() {
    let data = toy_psd_dataset(6, 1);
    let mut model = Classifier::build(&psd_spec(), 3).unwrap();
    let before = params(&mut model);
    let idx: Vec<usize> = (0..data.len()).collect();
    let cfg = TrainConfig {
        lr: 0.0,
        epochs: 2,
        ..small_cfg()
    };
    let (_, curves) = train(&mut model, &data, &idx, &idx[..7], &cfg).unwrap();
    assert_eq!(params(&mut model), before);
    let ln7 = 7f64.ln();
    assert_eq!(curves.iterations.len(), 2 * (42 / 8));
    for it in &curves.iterations {
        assert!((it.loss - ln7).abs() < 1e-12, "loss {}", it.loss);
    }
}

#[test]
fn first_loss_is_ln_of_class_count() {
    let data = toy_psd_dataset(6, 2);
    let mut model = Classifier::build(&psd_spec(), 4).unwrap();
    let idx: Vec<usize> = (0..data.len()).collect();
    let (_, curves) = train(&mut model, &data, &idx, &[], &small_cfg()).unwrap();
    assert!((curves.iterations[0].loss - 7f64.ln()).abs() < 1e-12);
    assert!(curves.epochs.iter().all(|e| e.val_accuracy.is_none()));
}

#[test]
fn empty_sets_are_rejected() {
    let data = toy_psd_dataset(4, 3);
    let mut model = Classifier::build(&psd_spec(), 0).unwrap();
    assert!(matches!(
        train(&mut model, &data, &[], &[], &small_cfg()),
        Err(Error::EmptyTrainSet)
    ));
    assert!(matches!(evaluate(&mut model, &data, &[]), Err(Error::EmptyTestSet)));
}

#[test]
fn experiment_runs_use_consecutive_seeds_and_average() {
    let data = toy_psd_dataset(20, 4);
    let cfg = TrainConfig {
        repeats: 3,
        epochs: 12,
        ..small_cfg()
    };
    let exp = run_experiment(&data, &psd_spec(), &cfg, &SplitSpec::default()).unwrap();
    assert_eq!(exp.runs.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![5, 6, 7]);
    for r in &exp.runs {
        assert_eq!((r.train_size, r.val_size, r.test_size), (112, 14, 14));
        assert_eq!(r.curves.iterations.len(), 12 * (112 / 8));
        assert_eq!(r.report.confusion.total(), 14);
    }
    let n = exp.runs.len() as f64;
    let acc = exp.runs.iter().map(|r| r.report.metrics.accuracy).sum::<f64>() / n;
    assert!((exp.mean.accuracy - acc).abs() < 1e-15);
    assert_eq!(exp.mean, mean_metrics(&exp.runs));
    assert!(exp.mean.accuracy > 0.5, "toy set accuracy near chance: {}", exp.mean.accuracy);
}

#[test]
fn experiment_rejects_mismatched_model() {
    let data = toy_psd_dataset(5, 5);
    let spec = ModelSpec::ResnetStft(rfdrone_core::models::ResnetSpec::tiny(7));
    assert!(matches!(
        run_experiment(&data, &spec, &small_cfg(), &SplitSpec::default()),
        Err(Error::InvalidConfig(_))
    ));
}

#[test]
fn identical_seeds_give_identical_outputs() {
    let data = toy_psd_dataset(10, 6);
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for k in 0..2 {
        let exp = run_experiment(&data, &psd_spec(), &small_cfg(), &SplitSpec::default()).unwrap();
        let report = dir.path().join(format!("report{k}.csv"));
        let curves = dir.path().join(format!("curves{k}.csv"));
        let confusion = dir.path().join(format!("confusion{k}.csv"));
        write_report_csv(&report, &exp.runs, &exp.mean).unwrap();
        write_curves_csv(&curves, &exp.runs).unwrap();
        let mats: Vec<_> = exp.runs.iter().map(|r| (r.run, &r.report.confusion)).collect();
        write_confusion_csv(&confusion, &mats, &ClassificationCase::IIC.class_names()).unwrap();
        files.push([report, curves, confusion].map(|p| std::fs::read_to_string(p).unwrap()));
    }
    assert_eq!(files[0], files[1]);
    let header = files[0][1].lines().next().unwrap();
    assert!(header.contains("train_loss_ma5") && header.contains("train_acc_ma5"));
    assert_eq!(files[0][0].lines().last().unwrap().split(',').next(), Some("mean"));
}
