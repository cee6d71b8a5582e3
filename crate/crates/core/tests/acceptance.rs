//! Acceptance suite. Prints one `PASS`/`FAIL`/`SKIP` line per criterion and exits
//! non-zero when any criterion fails.
//!
//! The optional full-data run needs a dataset directory, given either as
//! `cargo test --test acceptance -- --real-data <dir>` or through `RFDRONE_REAL_DATA`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rfdrone_core::augment::for_each_coexistence;
use rfdrone_core::features::{fft, FeatureMethod, PsdConfig, StftConfig};
use rfdrone_core::harness::{
    dataset_from_manifest, run_experiment, synthetic_dataset, write_report_csv, ConfusionMatrix, Dataset,
    Experiment, SplitSpec, TrainConfig,
};
use rfdrone_core::models::{ModelSpec, PsdNetSpec, ResnetSpec};
use rfdrone_core::signal::{scan_dataset, BuiLabel, ClassificationCase, DronePair, DroneType, FlightMode, TABLE_I};
use rfdrone_core::synth::{case_iic_counts, synth_dataset, SynthCounts, DESK_SAMPLES_PER_CLASS};
use rfdrone_nn::gradcheck::{relative_error, DEFAULT_STEP};
use rfdrone_nn::{
    grad_check, grad_check_sampled, softmax_cross_entropy, BatchNorm, Conv2d, GlobalAvgPool, Layer, Linear, Mode,
    Module, Relu, ResidualBlock, Sequential, Slot, Tensor,
};

const DESK_LENGTH: usize = 1_000_000;
const DATASET_SEED: u64 = 2024;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

struct Suite {
    failures: usize,
}

impl Suite {
    fn run(&mut self, id: usize, name: &str, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome::Fail(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                self.failures += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("{tag} {id:>2} {name}: {detail} [{secs:.1}s]");
    }
}

fn framing() -> Outcome {
    let start = Instant::now();
    let cfg = StftConfig::paper();
    let frames = cfg.frame_count(10_000_000).unwrap();
    let ratio = cfg.overlap_ratio();
    let elapsed = start.elapsed();
    verdict(
        frames == 128 && (ratio - 0.1136).abs() < 5e-5 && elapsed < Duration::from_secs(1),
        format!("window {} overlap {}: {frames} frames, overlap ratio {ratio:.4}", cfg.window_len, cfg.overlap),
    )
}

fn dft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(t, v)| v * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * ((k * t) % n) as f64 / n as f64))
                .sum()
        })
        .collect()
}

fn fft_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_dft, mut worst_parseval) = (0.0f64, 0.0f64);
    for n in (2..=8).map(|p| 1usize << p) {
        for _ in 0..5 {
            let x: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let fast = fft(&x, n).unwrap();
            let slow = dft(&x);
            let peak = slow.iter().map(|v| v.norm()).fold(0.0, f64::max);
            let err = fast.iter().zip(&slow).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            worst_dft = worst_dft.max(err / peak);
            let time_energy: f64 = x.iter().map(|v| v.norm_sqr()).sum();
            let freq_energy: f64 = fast.iter().map(|v| v.norm_sqr()).sum::<f64>() / n as f64;
            worst_parseval = worst_parseval.max((time_energy - freq_energy).abs() / time_energy);
        }
    }
    verdict(
        worst_dft < 1e-9 && worst_parseval < 1e-9,
        format!("N = 4..256: max DFT rel. error {worst_dft:.2e}, Parseval {worst_parseval:.2e}"),
    )
}

fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn gradient_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut layers: Vec<(&str, Box<dyn Module>, Tensor, Mode)> = Vec::new();
    let conv = Conv2d::new(2, 3, (3, 3), (2, 2), (1, 1), true, &mut rng);
    layers.push(("conv", Box::new(conv), random_tensor(&[2, 2, 5, 6], &mut rng), Mode::Train));
    let mut bn = BatchNorm::new(3);
    bn.gamma.value.data_mut().copy_from_slice(&[0.5, 1.5, -0.7]);
    bn.beta.value.data_mut().copy_from_slice(&[0.1, -0.2, 0.3]);
    let x = random_tensor(&[3, 3, 3, 2], &mut rng);
    layers.push(("batchnorm train", Box::new(bn.clone()), x.clone(), Mode::Train));
    layers.push(("batchnorm eval", Box::new(bn), x, Mode::Eval));
    layers.push(("relu", Box::new(Relu::new()), random_tensor(&[2, 3, 4], &mut rng), Mode::Train));
    layers.push(("global avg pool", Box::new(GlobalAvgPool::new()), random_tensor(&[2, 3, 4, 4], &mut rng), Mode::Train));
    let linear = Linear::new(6, 4, &mut rng);
    layers.push(("linear", Box::new(linear), random_tensor(&[3, 6], &mut rng), Mode::Train));
    let body = Sequential::new()
        .with("conv1", Layer::Conv(Conv2d::new(2, 3, (3, 3), (2, 2), (1, 1), false, &mut rng)))
        .with("bn1", Layer::BatchNorm(BatchNorm::new(3)))
        .with("relu1", Layer::Relu(Relu::new()))
        .with("conv2", Layer::Conv(Conv2d::new(3, 3, (3, 3), (1, 1), (1, 1), false, &mut rng)))
        .with("bn2", Layer::BatchNorm(BatchNorm::new(3)));
    let shortcut = Sequential::new()
        .with("conv", Layer::Conv(Conv2d::new(2, 3, (1, 1), (2, 2), (0, 0), false, &mut rng)))
        .with("bn", Layer::BatchNorm(BatchNorm::new(3)));
    let block = ResidualBlock::new(body, Some(shortcut));
    layers.push(("residual block", Box::new(block), random_tensor(&[2, 2, 6, 6], &mut rng), Mode::Train));

    let mut worst_layer = ("", 0.0f64);
    for (name, mut module, x, mode) in layers {
        let err = grad_check(module.as_mut(), &x, mode, DEFAULT_STEP, 99).unwrap().max_rel_error();
        if err >= worst_layer.1 {
            worst_layer = (name, err);
        }
    }

    let logits = random_tensor(&[4, 7], &mut rng);
    let labels = [0, 3, 6, 3];
    let (_, grad) = softmax_cross_entropy(&logits, &labels).unwrap();
    let numeric: Vec<f64> = (0..logits.numel())
        .map(|i| {
            let mut plus = logits.clone();
            plus.data_mut()[i] += DEFAULT_STEP;
            let mut minus = logits.clone();
            minus.data_mut()[i] -= DEFAULT_STEP;
            let lp = softmax_cross_entropy(&plus, &labels).unwrap().0;
            let lm = softmax_cross_entropy(&minus, &labels).unwrap().0;
            (lp - lm) / (2.0 * DEFAULT_STEP)
        })
        .collect();
    let ce = relative_error(grad.data(), &numeric);
    if ce >= worst_layer.1 {
        worst_layer = ("softmax cross-entropy", ce);
    }

    // Full tiny network; the zero-initialized head gets random values so every
    // parameter receives gradient. A small step keeps perturbations off ReLU kinks.
    let mut net = rfdrone_core::models::Classifier::build(&ModelSpec::ResnetStft(ResnetSpec::tiny(3)), 21).unwrap();
    let mut head_rng = ChaCha8Rng::seed_from_u64(22);
    net.visit("", &mut |name, slot| {
        if let Slot::Param(p) = slot {
            if name.starts_with("head.") {
                p.value.data_mut().iter_mut().for_each(|v| *v = head_rng.random_range(-0.5..0.5));
            }
        }
    });
    let x = random_tensor(&[4, 1, 16, 16], &mut ChaCha8Rng::seed_from_u64(23));
    let net_err = grad_check_sampled(&mut net, &x, Mode::Train, 1e-5, 24, Some(12))
        .unwrap()
        .max_rel_error();

    verdict(
        worst_layer.1 < 1e-4 && net_err < 1e-3,
        format!(
            "worst layer {} {:.2e} (< 1e-4), tiny ResNet {net_err:.2e} (< 1e-3)",
            worst_layer.0, worst_layer.1
        ),
    )
}

fn batchnorm_semantics() -> Outcome {
    let mut bn = BatchNorm::new(1);
    let x = Tensor::new(&[4, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let y = bn.forward(&x, Mode::Train).unwrap();
    let expected = [-1.3416, -0.4472, 0.4472, 1.3416];
    let example_err = y.data().iter().zip(expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (n, c, hw) = (16, 3, 25);
    let data: Vec<f64> = (0..n * c * hw).map(|_| rng.random_range(-10.0..10.0) + 3.0).collect();
    let mut bn = BatchNorm::new(c);
    let y = bn.forward(&Tensor::new(&[n, c, 5, 5], data).unwrap(), Mode::Train).unwrap();
    let (mut mean_err, mut var_err) = (0.0f64, 0.0f64);
    for ch in 0..c {
        let vals: Vec<f64> = (0..n)
            .flat_map(|i| y.data()[(i * c + ch) * hw..(i * c + ch + 1) * hw].to_vec())
            .collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
        mean_err = mean_err.max(mean.abs());
        var_err = var_err.max((var - 1.0).abs());
    }
    verdict(
        example_err < 1e-4 && mean_err < 1e-6 && var_err < 1e-5,
        format!("example max error {example_err:.1e}; train-mode |mean| {mean_err:.1e}, |var - 1| {var_err:.1e}"),
    )
}

fn augmentation_counts() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let on = |d| BuiLabel::Single(d, FlightMode::OnConnected);
    let counts: SynthCounts = TABLE_I
        .iter()
        .filter(|(b, _)| DroneType::ALL.iter().any(|&d| on(d) == *b))
        .copied()
        .collect();
    let manifest = synth_dataset(&counts, rfdrone_core::synth::min_length(), 7, dir.path()).unwrap();
    let mut sizes = Vec::new();
    let mut exact = true;
    for pair in DronePair::ALL {
        let (ta, tb) = pair.types();
        let a: Vec<_> = manifest.entries_with(on(ta)).map(|e| e.load().unwrap()).collect();
        let b: Vec<_> = manifest.entries_with(on(tb)).map(|e| e.load().unwrap()).collect();
        let n = for_each_coexistence(&manifest, pair, |k, seg, bui| {
            let (sa, sb) = (&a[k / b.len()], &b[k % b.len()]);
            let low_ok = seg.low().iter().enumerate().all(|(t, v)| *v == sa.low()[t] + sb.low()[t]);
            let high_ok = seg.high().iter().enumerate().all(|(t, v)| *v == sa.high()[t] + sb.high()[t]);
            exact &= low_ok && high_ok && bui == BuiLabel::Coexist(pair);
            Ok(())
        })
        .unwrap();
        sizes.push(n);
    }
    verdict(
        sizes.iter().all(|&n| n == 441) && exact,
        format!("per-pair sizes {sizes:?} (expected 441 each); element-wise oracle exact: {exact}"),
    )
}

fn metrics_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut mismatches = 0;
    for _ in 0..100 {
        let k = rng.random_range(2..=8);
        let n = rng.random_range(1..=50);
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let m = ConfusionMatrix::from_predictions(k, &truth, &pred).unwrap().metrics().unwrap();

        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let mut ps = Vec::new();
        let mut rs = Vec::new();
        let mut ok = m.accuracy == ratio(truth.iter().zip(&pred).filter(|(t, p)| t == p).count(), n);
        for c in 0..k {
            let tp = truth.iter().zip(&pred).filter(|&(&t, &p)| t == c && p == c).count();
            let predicted = pred.iter().filter(|&&p| p == c).count();
            let actual = truth.iter().filter(|&&t| t == c).count();
            let (p, r) = (ratio(tp, predicted), ratio(tp, actual));
            let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
            let got = m.per_class[c];
            ok &= got.precision == p && got.recall == r && got.f1 == f && got.support == actual as u64;
            ps.push(p);
            rs.push(r);
        }
        let (mp, mr) = (ps.iter().sum::<f64>() / k as f64, rs.iter().sum::<f64>() / k as f64);
        let mf = if mp + mr == 0.0 { 0.0 } else { 2.0 * mp * mr / (mp + mr) };
        ok &= m.precision == mp && m.recall == mr && m.f1 == mf;
        mismatches += usize::from(!ok);
    }
    let ex = ConfusionMatrix::from_counts(vec![vec![5, 0], vec![1, 4]]).unwrap().metrics().unwrap();
    let c0 = ex.per_class[0];
    let example_ok = ex.accuracy == 0.9
        && (c0.precision - 5.0 / 6.0).abs() < 1e-15
        && c0.recall == 1.0
        && (c0.f1 - 10.0 / 11.0).abs() < 1e-15;
    verdict(
        mismatches == 0 && example_ok,
        format!(
            "{mismatches}/100 random matrices disagree with the tally; [[5,0],[1,4]]: accuracy {}, P {:.6}, R {}, F1 {:.6}",
            ex.accuracy, c0.precision, c0.recall, c0.f1
        ),
    )
}

struct Learning {
    resnet: Experiment,
    psd: Experiment,
    stft: Dataset,
    psd_data: Dataset,
    elapsed: Duration,
}

fn resnet_spec() -> ModelSpec {
    ModelSpec::ResnetStft(ResnetSpec::tiny(7))
}

fn psd_spec() -> ModelSpec {
    let len = *FeatureMethod::Psd(PsdConfig::default()).input_shape().last().unwrap();
    ModelSpec::Psd1d(PsdNetSpec::new(7, len))
}

fn single_run(seed: u64, epochs: usize) -> TrainConfig {
    TrainConfig {
        seed,
        epochs,
        repeats: 1,
        ..TrainConfig::desk()
    }
}

fn learn() -> Learning {
    let start = Instant::now();
    let methods = [FeatureMethod::Stft(StftConfig::desk()), FeatureMethod::Psd(PsdConfig::default())];
    let counts = case_iic_counts(DESK_SAMPLES_PER_CLASS);
    let mut sets =
        synthetic_dataset(&counts, DESK_LENGTH, DATASET_SEED, ClassificationCase::IIC, &methods).unwrap();
    let psd_data = sets.pop().unwrap();
    let stft = sets.pop().unwrap();
    let cfg = single_run(0, TrainConfig::desk().epochs);
    let resnet = run_experiment(&stft, &resnet_spec(), &cfg, &SplitSpec::with_seed(0)).unwrap();
    let elapsed = start.elapsed();
    let psd = run_experiment(&psd_data, &psd_spec(), &cfg, &SplitSpec::with_seed(0)).unwrap();
    Learning {
        resnet,
        psd,
        stft,
        psd_data,
        elapsed,
    }
}

fn end_to_end(l: &Learning) -> Outcome {
    let r = l.resnet.mean.accuracy;
    let p = l.psd.mean.accuracy;
    let epochs = l.resnet.runs[0].curves.epochs.len();
    verdict(
        r >= 0.95 && epochs <= 5 && l.elapsed < Duration::from_secs(600) && r >= p - 0.02,
        format!(
            "{} samples/class, {epochs} epochs: ResNet-STFT test accuracy {r:.4} (>= 0.95) in {:.0}s (< 600s); 1D-PSD {p:.4}",
            DESK_SAMPLES_PER_CLASS,
            l.elapsed.as_secs_f64()
        ),
    )
}

fn epoch_one_val(exp: &Experiment) -> f64 {
    exp.runs[0].curves.val_accuracy_at(1).expect("validation after epoch 1")
}

fn convergence(l: &Learning) -> Outcome {
    let mut resnet = vec![epoch_one_val(&l.resnet)];
    let mut psd = vec![epoch_one_val(&l.psd)];
    for seed in 1..5 {
        let cfg = single_run(seed, 1);
        let split = SplitSpec::with_seed(seed);
        resnet.push(epoch_one_val(&run_experiment(&l.stft, &resnet_spec(), &cfg, &split).unwrap()));
        psd.push(epoch_one_val(&run_experiment(&l.psd_data, &psd_spec(), &cfg, &split).unwrap()));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (r, p) = (mean(&resnet), mean(&psd));
    let fmt = |v: &[f64]| v.iter().map(|a| format!("{a:.3}")).collect::<Vec<_>>().join(" ");
    verdict(
        r > p,
        format!("mean epoch-1 val accuracy over seeds 0-4: ResNet-STFT {r:.4} [{}] vs 1D-PSD {p:.4} [{}]", fmt(&resnet), fmt(&psd)),
    )
}

fn reproducibility(l: &Learning) -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = TrainConfig {
        repeats: 2,
        ..TrainConfig::desk()
    };
    let mut reports = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let exp = run_experiment(&l.psd_data, &psd_spec(), &cfg, &SplitSpec::with_seed(cfg.seed)).unwrap();
        let path = dir.path().join(name);
        write_report_csv(&path, &exp.runs, &exp.mean).unwrap();
        reports.push(std::fs::read(path).unwrap());
    }
    // One ResNet epoch on the same seed as criterion 7 must reproduce its epoch-1 curve.
    let again = run_experiment(&l.stft, &resnet_spec(), &single_run(0, 1), &SplitSpec::with_seed(0)).unwrap();
    let first_epoch = |e: &Experiment| {
        let c = &e.runs[0].curves;
        let iters: Vec<_> = c.iterations.iter().filter(|i| i.epoch == 1).copied().collect();
        (iters, c.epochs[0])
    };
    let resnet_same = first_epoch(&again) == first_epoch(&l.resnet);
    verdict(
        reports[0] == reports[1] && resnet_same,
        format!(
            "report.csv byte-identical: {}; ResNet epoch-1 losses and val accuracy identical: {resnet_same}",
            reports[0] == reports[1]
        ),
    )
}

fn real_data_dir() -> Option<PathBuf> {
    let args: Vec<String> = std::env::args().collect();
    args.iter()
        .position(|a| a == "--real-data")
        .and_then(|i| args.get(i + 1))
        .map(PathBuf::from)
        .or_else(|| std::env::var_os("RFDRONE_REAL_DATA").map(PathBuf::from))
}

fn full_data() -> Outcome {
    let Some(dir) = real_data_dir() else {
        return Outcome::Skip("no dataset (pass --real-data <dir> or set RFDRONE_REAL_DATA)".into());
    };
    let manifest = scan_dataset(&dir).unwrap().manifest;
    let len = manifest.entries()[0].load().unwrap().len();
    let method = FeatureMethod::Stft(StftConfig::for_length(len).unwrap());
    let mut ok = true;
    let mut parts = Vec::new();
    for (case, target) in [
        (ClassificationCase::I, 1.0),
        (ClassificationCase::IIB, 0.99),
        (ClassificationCase::IIC, 0.95),
    ] {
        let data = dataset_from_manifest(&manifest, case, &[method]).unwrap().pop().unwrap();
        let spec = ModelSpec::ResnetStft(ResnetSpec::paper(case.num_classes()));
        let cfg = TrainConfig::paper_for(case);
        let acc = run_experiment(&data, &spec, &cfg, &SplitSpec::with_seed(cfg.seed)).unwrap().mean.accuracy;
        ok &= acc >= target;
        parts.push(format!("case {case} accuracy {acc:.4} (>= {target})"));
    }
    verdict(ok, parts.join(", "))
}

fn main() {
    let mut suite = Suite { failures: 0 };
    suite.run(1, "framing arithmetic", framing);
    suite.run(2, "FFT correctness", fft_correctness);
    suite.run(3, "gradient suite", gradient_suite);
    suite.run(4, "batch norm semantics", batchnorm_semantics);
    suite.run(5, "augmentation counts", augmentation_counts);
    suite.run(6, "metrics oracle", metrics_oracle);

    let learning = catch_unwind(learn);
    match &learning {
        Ok(l) => {
            suite.run(7, "end-to-end learning", || end_to_end(l));
            suite.run(8, "epoch-1 convergence", || convergence(l));
            suite.run(9, "reproducibility", || reproducibility(l));
        }
        Err(_) => {
            for (id, name) in [(7, "end-to-end learning"), (8, "epoch-1 convergence"), (9, "reproducibility")] {
                suite.run(id, name, || Outcome::Fail("synthetic training setup panicked".into()));
            }
        }
    }
    suite.run(10, "full-data accuracy", full_data);

    println!("{} criteria failed", suite.failures);
    if suite.failures > 0 {
        std::process::exit(1);
    }
}
