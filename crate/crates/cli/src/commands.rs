use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::ArgMatches;

use rfdrone_core::checkpoint::{load_checkpoint, save_checkpoint, TrainingContext};
use rfdrone_core::features::{psd_feature, scu_feature, spectrogram_feature, FeatureMethod, PsdConfig, StftConfig};
use rfdrone_core::harness::{
    dataset_from_manifest, evaluate, run_experiment, synthetic_dataset, write_confusion_csv, write_curves_csv,
    write_per_class_csv, write_report_csv, Dataset, SplitSpec, TrainConfig,
};
use rfdrone_core::models::{ModelSpec, Profile, PsdNetSpec, ResnetSpec};
use rfdrone_core::signal::{
    load_segment_files, parse_segment_file_name, read_samples, scan_dataset, segment_file_name, save_segment, Band,
    BuiLabel, ClassificationCase, DatasetManifest, DronePair, ManifestEntry,
};
use rfdrone_core::synth::{parse_counts, synth_dataset};
use rfdrone_core::{augment::for_each_coexistence, Error};

use crate::args::*;
use crate::error::{usage, CliError, CliResult};
use crate::manifest::RunManifest;

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| {
        CliError::Data(Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(io_error(dir))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(io_error(path))
}

fn load_manifest(files: &FileSource) -> CliResult<Option<DatasetManifest>> {
    match (&files.manifest, &files.data_dir) {
        (Some(path), _) => Ok(Some(DatasetManifest::read_csv(path)?)),
        (None, Some(dir)) => Ok(Some(scan_dataset(dir)?.manifest)),
        (None, None) => Ok(None),
    }
}

fn require_manifest(files: &FileSource) -> CliResult<DatasetManifest> {
    load_manifest(files)?.ok_or_else(|| usage("one of --manifest or --data-dir is required"))
}

fn stft_config(args: &FeatureArgs, len: usize) -> CliResult<StftConfig> {
    Ok(match (args.window_len, args.overlap) {
        (Some(w), Some(o)) => StftConfig::new(w, o, args.nfft)?,
        _ => {
            let mut cfg = StftConfig::for_length(len)?;
            if args.nfft != cfg.n_fft {
                cfg = StftConfig::new(cfg.window_len, cfg.overlap, args.nfft)?;
            }
            cfg
        }
    })
}

fn feature_method(kind: FeatureKind, args: &FeatureArgs, len: usize) -> CliResult<FeatureMethod> {
    Ok(match kind {
        FeatureKind::Stft => FeatureMethod::Stft(stft_config(args, len)?),
        FeatureKind::Scu => FeatureMethod::Scu,
        FeatureKind::Psd => FeatureMethod::Psd(PsdConfig {
            n_fft: args.nfft,
            max_chunks: None,
        }),
    })
}

/// Segment length of a data source, read from its first entry.
fn source_length(data: &DataSource, manifest: Option<&DatasetManifest>) -> CliResult<usize> {
    match manifest {
        Some(m) => {
            let first = m.entries().first().ok_or_else(|| usage("the dataset has no segments"))?;
            Ok(read_samples(&first.low_path)?.len())
        }
        None => Ok(data.synth_length),
    }
}

fn load_dataset(
    data: &DataSource,
    manifest: Option<&DatasetManifest>,
    case: ClassificationCase,
    method: FeatureMethod,
) -> CliResult<Dataset> {
    let mut sets = match (manifest, &data.synth) {
        (Some(m), _) => dataset_from_manifest(m, case, &[method])?,
        (None, Some(spec)) => synthetic_dataset(&parse_counts(spec)?, data.synth_length, data.synth_seed, case, &[method])?,
        (None, None) => return Err(usage("one of --manifest, --data-dir or --synth is required")),
    };
    let set = sets.pop().expect("one method requested");
    if set.is_empty() {
        return Err(CliError::Data(Error::InvalidLength(format!(
            "no segments belong to case {case}"
        ))));
    }
    log::info!("{} samples for case {case} ({} features)", set.len(), method.name());
    Ok(set)
}

pub fn synth(args: &SynthArgs, matches: &ArgMatches) -> CliResult<()> {
    let counts = parse_counts(&args.counts)?;
    create_dir(&args.out_dir)?;
    let manifest = synth_dataset(&counts, args.length, args.seed, &args.out_dir)?;
    RunManifest::new("synth", matches).write(&args.out_dir)?;
    println!("wrote {} segments to {}", manifest.len(), args.out_dir.display());
    Ok(())
}

pub fn ingest(args: &IngestArgs, matches: &ArgMatches) -> CliResult<()> {
    let report = scan_dataset(&args.data_dir)?;
    create_dir(&args.out_dir)?;
    report.manifest.write_csv(&args.out_dir.join("manifest.csv"))?;
    RunManifest::new("ingest", matches).write(&args.out_dir)?;
    for (bui, n) in report.manifest.counts() {
        println!("{}\t{n}\t{}", bui.code(), bui.description());
    }
    println!(
        "{} pairs, {} unpaired files, {} rejected files",
        report.manifest.len(),
        report.unpaired.len(),
        report.rejected.len()
    );
    Ok(())
}

fn parse_pairs(spec: &str) -> CliResult<Vec<DronePair>> {
    if spec.trim().eq_ignore_ascii_case("all") {
        return Ok(DronePair::ALL.to_vec());
    }
    let mut pairs = Vec::new();
    for code in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match BuiLabel::parse(code) {
            Ok(BuiLabel::Coexist(p)) if !pairs.contains(&p) => pairs.push(p),
            Ok(BuiLabel::Coexist(_)) => {}
            _ => return Err(usage(format!("--pairs: {code:?} is not a coexistence code"))),
        }
    }
    if pairs.is_empty() {
        return Err(usage("--pairs is empty"));
    }
    Ok(pairs)
}

pub fn augment(args: &AugmentArgs, matches: &ArgMatches) -> CliResult<()> {
    let pairs = parse_pairs(&args.pairs)?;
    let source = require_manifest(&args.source)?;
    create_dir(&args.out_dir)?;
    let mut merged = source.clone();
    for pair in pairs {
        let mut entries = Vec::new();
        let n = for_each_coexistence(&source, pair, |i, seg, bui| {
            let low_path = args.out_dir.join(segment_file_name(bui, Band::Low, i));
            let high_path = args.out_dir.join(segment_file_name(bui, Band::High, i));
            save_segment(&seg, &low_path, &high_path)?;
            entries.push(ManifestEntry {
                low_path,
                high_path,
                bui,
            });
            Ok(())
        })?;
        println!("{}: {n} segments", pair.name());
        merged.extend(DatasetManifest::new(entries)?)?;
    }
    merged.write_csv(&args.out_dir.join("manifest.csv"))?;
    RunManifest::new("augment", matches).write(&args.out_dir)?;
    Ok(())
}

/// Output stem for a segment: `<bui>_<index>` for conforming names, else the file stem.
fn segment_stem(low: &Path) -> String {
    let name = low.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    match parse_segment_file_name(name) {
        Some((code, _, index)) => format!("{code}_{index}"),
        None => low.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "segment".into()),
    }
}

pub fn featurize(args: &FeaturizeArgs, matches: &ArgMatches) -> CliResult<()> {
    let pairs: Vec<(PathBuf, PathBuf)> = match (&args.low, &args.high) {
        (Some(l), Some(h)) => vec![(l.clone(), h.clone())],
        _ => require_manifest(&args.source)?
            .entries()
            .iter()
            .map(|e| (e.low_path.clone(), e.high_path.clone()))
            .collect(),
    };
    create_dir(&args.out_dir)?;
    let mut run = RunManifest::new("featurize", matches);
    let mut resolved = None;
    for (low, high) in &pairs {
        let seg = load_segment_files(low, high)?;
        let method = feature_method(args.method, &args.features, seg.len())?;
        resolved.get_or_insert(method);
        let stem = format!("{}_{}", segment_stem(low), method.name());
        let csv = args.out_dir.join(format!("{stem}.csv"));
        match method {
            FeatureMethod::Psd(cfg) => {
                let psd = psd_feature(&seg, &cfg)?;
                let row: Vec<String> = psd.values().iter().map(f64::to_string).collect();
                write_text(&csv, &(row.join(",") + "\n"))?;
            }
            FeatureMethod::Stft(cfg) => {
                let map = spectrogram_feature(&seg, &cfg)?;
                map.write_csv(&csv)?;
                map.write_pgm(&args.out_dir.join(format!("{stem}.pgm")))?;
            }
            FeatureMethod::Scu => {
                let map = scu_feature(&seg)?;
                map.write_csv(&csv)?;
                map.write_pgm(&args.out_dir.join(format!("{stem}.pgm")))?;
            }
        }
    }
    if let Some(method) = resolved {
        run.resolved("features", &method);
    }
    run.write(&args.out_dir)?;
    println!("featurized {} segments into {}", pairs.len(), args.out_dir.display());
    Ok(())
}

fn train_config(args: &TrainArgs) -> CliResult<TrainConfig> {
    let mut cfg = match args.preset {
        Preset::Desk => TrainConfig::desk(),
        Preset::Paper => TrainConfig::paper_for(args.case),
    };
    cfg.batch_size = args.batch_size.unwrap_or(cfg.batch_size);
    cfg.epochs = args.epochs.unwrap_or(cfg.epochs);
    cfg.lr = args.lr.unwrap_or(cfg.lr);
    cfg.l2 = args.l2.unwrap_or(cfg.l2);
    cfg.repeats = args.repeats.unwrap_or(cfg.repeats);
    cfg.seed = args.seed;
    cfg.validate()?;
    Ok(cfg)
}

fn model_spec(args: &TrainArgs, method: &FeatureMethod) -> CliResult<ModelSpec> {
    let nc = args.case.num_classes();
    Ok(match args.model {
        ModelArg::ResnetStft => {
            let profile = match args.profile {
                ProfileArg::Paper => Profile::Paper,
                ProfileArg::Tiny => Profile::Tiny,
            };
            ModelSpec::ResnetStft(ResnetSpec::for_profile(profile, nc)?)
        }
        ModelArg::Psd1d => {
            let len = *method.input_shape().last().expect("non-empty shape");
            ModelSpec::Psd1d(PsdNetSpec::new(nc, len))
        }
    })
}

pub fn train(args: &TrainArgs, matches: &ArgMatches) -> CliResult<()> {
    let kind = args.features.unwrap_or(match args.model {
        ModelArg::ResnetStft => FeatureKind::Stft,
        ModelArg::Psd1d => FeatureKind::Psd,
    });
    let cfg = train_config(args)?;
    let manifest = load_manifest(&args.data.files)?;
    let method = feature_method(kind, &args.feature_args, source_length(&args.data, manifest.as_ref())?)?;
    let spec = model_spec(args, &method)?;
    let data = load_dataset(&args.data, manifest.as_ref(), args.case, method)?;

    let mut run = RunManifest::new("train", matches);
    run.resolved("features", &method);
    run.resolved("model", &spec);
    run.resolved("train", &cfg);

    let mut exp = run_experiment(&data, &spec, &cfg, &SplitSpec::with_seed(cfg.seed))?;
    create_dir(&args.out_dir)?;
    let names = args.case.class_names();
    let out = &args.out_dir;
    write_report_csv(&out.join("report.csv"), &exp.runs, &exp.mean)?;
    write_per_class_csv(&out.join("per_class.csv"), &exp.runs, &names)?;
    let matrices: Vec<_> = exp.runs.iter().map(|r| (r.run, &r.report.confusion)).collect();
    write_confusion_csv(&out.join("confusion.csv"), &matrices, &names)?;
    write_curves_csv(&out.join("curves.csv"), &exp.runs)?;
    let context = TrainingContext {
        features: Some(method),
        case: Some(args.case),
        class_names: names,
    };
    save_checkpoint(&out.join("model.ckpt"), &mut exp.final_model, Some(&exp.final_optimizer), &context)?;
    run.write(out)?;
    println!(
        "mean over {} runs: accuracy {:.4}, precision {:.4}, recall {:.4}, F1 {:.4}",
        exp.runs.len(),
        exp.mean.accuracy,
        exp.mean.precision,
        exp.mean.recall,
        exp.mean.f1
    );
    Ok(())
}

fn checkpoint_method(ctx: &TrainingContext, path: &Path) -> CliResult<FeatureMethod> {
    ctx.features.ok_or_else(|| {
        CliError::Data(Error::Checkpoint(format!("{} does not record its feature method", path.display())))
    })
}

fn csv_line(fields: &[String]) -> String {
    fields
        .iter()
        .map(|f| {
            if f.contains([',', '"', '\n']) {
                format!("\"{}\"", f.replace('"', "\"\""))
            } else {
                f.clone()
            }
        })
        .collect::<Vec<_>>()
        .join(",")
        + "\n"
}

pub fn eval(args: &EvalArgs, matches: &ArgMatches) -> CliResult<()> {
    let mut loaded = load_checkpoint(&args.checkpoint)?;
    let ctx = &loaded.header.context;
    let method = checkpoint_method(ctx, &args.checkpoint)?;
    let case = match (args.case, ctx.case) {
        (Some(a), Some(c)) if a != c => {
            return Err(usage(format!("--case {a} does not match the checkpoint's case {c}")));
        }
        (Some(a), _) => a,
        (None, Some(c)) => c,
        (None, None) => return Err(usage("the checkpoint records no case; pass --case")),
    };
    if case.num_classes() != loaded.model.num_classes() {
        return Err(usage(format!(
            "case {case} has {} classes, the model {}",
            case.num_classes(),
            loaded.model.num_classes()
        )));
    }
    let names = if ctx.class_names.len() == case.num_classes() {
        ctx.class_names.clone()
    } else {
        case.class_names()
    };
    let manifest = load_manifest(&args.data.files)?;
    let data = load_dataset(&args.data, manifest.as_ref(), case, method)?;
    let idx: Vec<usize> = (0..data.len()).collect();
    let report = evaluate(&mut loaded.model, &data, &idx)?;

    create_dir(&args.out_dir)?;
    let m = &report.metrics;
    let mut text = csv_line(&["samples", "accuracy", "precision", "recall", "f1", "loss"].map(String::from));
    text += &csv_line(&[
        data.len().to_string(),
        m.accuracy.to_string(),
        m.precision.to_string(),
        m.recall.to_string(),
        m.f1.to_string(),
        report.loss.to_string(),
    ]);
    write_text(&args.out_dir.join("report.csv"), &text)?;
    let mut per_class = csv_line(&["class", "name", "precision", "recall", "f1", "support"].map(String::from));
    for (c, pc) in m.per_class.iter().enumerate() {
        per_class += &csv_line(&[
            c.to_string(),
            names[c].clone(),
            pc.precision.to_string(),
            pc.recall.to_string(),
            pc.f1.to_string(),
            pc.support.to_string(),
        ]);
    }
    write_text(&args.out_dir.join("per_class.csv"), &per_class)?;
    write_confusion_csv(&args.out_dir.join("confusion.csv"), &[(0, &report.confusion)], &names)?;

    let mut run = RunManifest::new("eval", matches);
    run.resolved("case", &case);
    run.resolved("features", &method);
    run.resolved("model", &loaded.header.model);
    run.write(&args.out_dir)?;
    println!(
        "{} samples: accuracy {:.4}, precision {:.4}, recall {:.4}, F1 {:.4}",
        data.len(),
        m.accuracy,
        m.precision,
        m.recall,
        m.f1
    );
    Ok(())
}

pub fn predict(args: &PredictArgs, matches: &ArgMatches) -> CliResult<()> {
    let mut loaded = load_checkpoint(&args.checkpoint)?;
    let method = checkpoint_method(&loaded.header.context, &args.checkpoint)?;
    let names = match loaded.header.context.class_names.clone() {
        n if n.len() == loaded.model.num_classes() => n,
        _ => (0..loaded.model.num_classes()).map(|c| format!("class_{c}")).collect(),
    };
    let entries: Vec<(PathBuf, PathBuf, Option<BuiLabel>)> = match (&args.low, &args.high) {
        (Some(l), Some(h)) => vec![(l.clone(), h.clone(), None)],
        _ => require_manifest(&args.source)?
            .entries()
            .iter()
            .map(|e| (e.low_path.clone(), e.high_path.clone(), Some(e.bui)))
            .collect(),
    };
    create_dir(&args.out_dir)?;
    let path = args.out_dir.join("predictions.csv");
    let file = fs::File::create(&path).map_err(io_error(&path))?;
    let mut w = std::io::BufWriter::new(file);
    let mut header: Vec<String> = ["low_path", "high_path", "bui", "predicted", "class"].map(String::from).to_vec();
    header.extend(names.iter().map(|n| format!("p_{n}")));
    w.write_all(csv_line(&header).as_bytes()).map_err(io_error(&path))?;
    for (low, high, bui) in &entries {
        let seg = load_segment_files(low, high)?;
        let (class, probs) = loaded.model.predict(&method.extract(&seg)?)?;
        let mut row = vec![
            low.display().to_string(),
            high.display().to_string(),
            bui.map(|b| b.code()).unwrap_or_default(),
            class.to_string(),
            names[class].clone(),
        ];
        row.extend(probs.iter().map(f64::to_string));
        w.write_all(csv_line(&row).as_bytes()).map_err(io_error(&path))?;
        println!("{}\t{}", low.display(), names[class]);
    }
    w.flush().map_err(io_error(&path))?;
    let mut run = RunManifest::new("predict", matches);
    run.resolved("features", &method);
    run.write(&args.out_dir)?;
    Ok(())
}
