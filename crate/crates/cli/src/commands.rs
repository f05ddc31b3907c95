use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use multilstm::data::{audit_rules, dataset_stats, synth_generate, write_features, Dataset, SynthSpec};
use multilstm::eval::{
    detect, detection_ap, mean_ap_at_offset, offset_sweep, predict_dataset, read_predictions, write_ap_csv,
    write_detections, write_offset_csv, write_predictions, ClassLengthStats, MapReport,
};
use multilstm::numeric::{Matrix, SeededRng};
use multilstm::retrieval::{
    cooccurrence_matrix, retrieve_cooccurring, retrieve_sequential, write_cooccurring_csv, write_matrix_csv,
    write_sequential_csv, SequentialQuery,
};
use multilstm::train::{fit, write_loss_csv, Checkpoint};
use multilstm::verify::{gradcheck_suite, CheckDims};
use multilstm::{Error, Result};

use crate::config::RunConfig;
use crate::Command;

pub fn run(command: &Command, cfg: &RunConfig) -> Result<u8> {
    match command {
        Command::Synth { .. } => synth(cfg),
        Command::Stats { .. } => stats(cfg),
        Command::Train { .. } => train(cfg),
        Command::Eval { .. } => eval(cfg),
        Command::Detect { .. } => detect_cmd(cfg),
        Command::SweepOffsets { .. } => sweep(cfg),
        Command::Retrieve { .. } => retrieve(cfg),
        Command::Gradcheck { .. } => gradcheck(cfg),
    }
}

fn required<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| Error::Config(format!("--{flag} is required")))
}

fn output_dir(cfg: &RunConfig) -> Result<&Path> {
    let out = required(&cfg.out, "out")?;
    fs::create_dir_all(out).map_err(|e| Error::Config(format!("cannot create {}: {e}", out.display())))?;
    cfg.write_resolved(out)?;
    Ok(out)
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    let d = Dataset::load(path)?;
    log::info!("loaded {} videos ({} frames) from {}", d.videos.len(), d.total_frames(), path.display());
    Ok(d)
}

fn labels(dataset: &Dataset) -> Result<Vec<multilstm::data::DenseLabels>> {
    dataset.labels()
}

/// Probabilities for every video, from a checkpoint or a predictions
/// directory, plus the label offset they target.
fn predictions(cfg: &RunConfig, dataset: &Dataset) -> Result<(Vec<Matrix>, i64)> {
    match (&cfg.checkpoint, &cfg.predictions) {
        (Some(path), None) => {
            let ck = Checkpoint::load(path)?;
            let preds = predict_dataset(&ck.model, dataset, cfg.workers)?;
            Ok((preds, ck.spec.multilstm.offset))
        }
        (None, Some(dir)) => {
            let preds = dataset
                .videos
                .iter()
                .map(|v| {
                    let p = read_predictions(&dir.join(format!("{}.csv", v.id)), &dataset.classes)?;
                    if p.rows() != v.frames {
                        return Err(Error::Validation(format!(
                            "predictions for {} have {} rows, video has {} frames",
                            v.id,
                            p.rows(),
                            v.frames
                        )));
                    }
                    Ok(p)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((preds, cfg.offset))
        }
        _ => Err(Error::Config("give exactly one of --checkpoint and --predictions".into())),
    }
}

fn synth(cfg: &RunConfig) -> Result<u8> {
    let spec_path = required(&cfg.spec, "spec")?;
    let text = fs::read_to_string(spec_path).map_err(|e| Error::Config(format!("{}: {e}", spec_path.display())))?;
    let spec = SynthSpec::from_toml(&text)?;
    let out = output_dir(cfg)?;
    let data = synth_generate(&spec, &SeededRng::new(cfg.seed))?;
    for (name, split) in [("train", &data.train), ("test", &data.test)] {
        let violations = audit_rules(&spec, split)?;
        if !violations.is_empty() {
            return Err(Error::Validation(format!("{name} split violates planted rules: {}", violations.join("; "))));
        }
        split.save(&out.join(name))?;
    }
    write_features(&out.join("embeddings.dmf"), &data.embeddings)?;
    log::info!(
        "wrote {} train and {} test videos to {}",
        data.train.videos.len(),
        data.test.videos.len(),
        out.display()
    );
    Ok(0)
}

fn stats(cfg: &RunConfig) -> Result<u8> {
    let dataset = load_dataset(required(&cfg.data, "data")?)?;
    let out = output_dir(cfg)?;
    let s = dataset_stats(&dataset)?;
    s.write_csv(out)?;
    println!(
        "videos {}  frames {}  labels/frame {:.3}  classes/video {:.3}  max/frame {}  max/video {}",
        s.videos,
        s.total_frames,
        s.mean_labels_per_frame,
        s.mean_classes_per_video,
        s.max_labels_per_frame,
        s.max_classes_per_video
    );
    Ok(0)
}

fn train(cfg: &RunConfig) -> Result<u8> {
    let dataset = load_dataset(required(&cfg.data, "data")?)?;
    let out = output_dir(cfg)?;
    let dim = dataset
        .feature_dim()?
        .ok_or_else(|| Error::Validation("training data has no feature files".into()))?;
    let spec = cfg.model_spec(dim, dataset.num_classes());
    let (checkpoint, log) = fit(&spec, &dataset, &cfg.train_config())?;
    checkpoint.save(&out.join("model.ckpt"))?;
    write_loss_csv(&out.join("loss.csv"), &log)?;
    println!("loss {:.6} -> {:.6}", log[0], log[log.len() - 1]);
    Ok(0)
}

fn eval(cfg: &RunConfig) -> Result<u8> {
    let dataset = load_dataset(required(&cfg.data, "data")?)?;
    let out = output_dir(cfg)?;
    let (preds, offset) = predictions(cfg, &dataset)?;
    let report: MapReport = mean_ap_at_offset(&preds, &labels(&dataset)?, offset)?;
    write_ap_csv(&out.join("ap.csv"), &dataset.classes, &report)?;
    if cfg.checkpoint.is_some() {
        let dir = out.join("predictions");
        fs::create_dir_all(&dir).map_err(|e| Error::Config(format!("cannot create {}: {e}", dir.display())))?;
        for (v, p) in dataset.videos.iter().zip(&preds) {
            write_predictions(&dir.join(format!("{}.csv", v.id)), &dataset.classes, p)?;
        }
    }
    println!("mAP {:.6} over {} classes", report.map, report.evaluated_classes());
    Ok(0)
}

fn detect_cmd(cfg: &RunConfig) -> Result<u8> {
    let dataset = load_dataset(required(&cfg.data, "data")?)?;
    let train_set = load_dataset(required(&cfg.train_data, "train-data")?)?;
    if train_set.classes != dataset.classes {
        return Err(Error::Validation("training and test vocabularies differ".into()));
    }
    let out = output_dir(cfg)?;
    let (preds, _) = predictions(cfg, &dataset)?;
    let lengths = ClassLengthStats::from_labels(&labels(&train_set)?)?;
    let truth_labels = labels(&dataset)?;
    let classes = dataset.num_classes();

    let mut per_video = Vec::with_capacity(preds.len());
    let mut listing = Vec::new();
    for (v, p) in dataset.videos.iter().zip(&preds) {
        let mut dets = Vec::new();
        for c in 0..classes {
            let column: Vec<f64> = (0..p.rows()).map(|t| p.get(t, c)).collect();
            dets.extend(detect(&column, c, cfg.threshold, &lengths, cfg.length_penalty));
        }
        listing.extend(dets.iter().map(|d| (v.id.clone(), *d)));
        per_video.push(dets);
    }
    let truth: Vec<_> = truth_labels
        .iter()
        .map(|z| (0..classes).flat_map(|c| z.runs(c)).collect::<Vec<_>>())
        .collect();
    let per_class = (0..classes)
        .map(|c| detection_ap(&per_video, &truth, c, cfg.overlap))
        .collect::<Result<Vec<_>>>()?;
    let defined: Vec<f64> = per_class.iter().flatten().copied().collect();
    let map = if defined.is_empty() { 0.0 } else { defined.iter().sum::<f64>() / defined.len() as f64 };
    write_detections(&out.join("detections.csv"), &dataset.classes, &listing)?;
    write_ap_csv(&out.join("detection_ap.csv"), &dataset.classes, &MapReport { map, per_class })?;
    println!("{} detections, detection mAP {:.6} at overlap {}", listing.len(), map, cfg.overlap);
    Ok(0)
}

fn sweep(cfg: &RunConfig) -> Result<u8> {
    let dataset = load_dataset(required(&cfg.data, "data")?)?;
    let train_set = load_dataset(required(&cfg.train_data, "train-data")?)?;
    let dir = required(&cfg.checkpoints, "checkpoints")?;
    let out = output_dir(cfg)?;
    let mut preds = BTreeMap::new();
    for &s in &cfg.offsets {
        let path = dir.join(format!("offset_{s}.ckpt"));
        if !path.exists() {
            return Err(Error::Validation(format!("missing checkpoint for offset {s}: {}", path.display())));
        }
        let ck = Checkpoint::load(&path)?;
        if ck.spec.multilstm.offset != s {
            return Err(Error::Validation(format!(
                "{} was trained at offset {}, expected {s}",
                path.display(),
                ck.spec.multilstm.offset
            )));
        }
        preds.insert(s, predict_dataset(&ck.model, &dataset, cfg.workers)?);
    }
    let frame_rate = dataset.videos.first().map_or(cfg.frame_rate, |v| v.frame_rate);
    let curve = offset_sweep(&preds, &labels(&train_set)?, &labels(&dataset)?, frame_rate, &cfg.offsets)?;
    write_offset_csv(&out.join("offset_curve.csv"), &curve)?;
    for p in &curve {
        println!("offset {:+} ({:+.1} s): mAP {:.4}", p.offset_frames, p.offset_seconds, p.map);
    }
    Ok(0)
}

fn retrieve(cfg: &RunConfig) -> Result<u8> {
    let dataset = load_dataset(required(&cfg.data, "data")?)?;
    let out = output_dir(cfg)?;
    let first = cfg.first.as_deref().ok_or_else(|| Error::Config("--first is required".into()))?;
    let second = cfg.second.as_deref().ok_or_else(|| Error::Config("--second is required".into()))?;
    for name in [first, second] {
        dataset.class_index(name)?;
    }
    let (preds, _) = predictions(cfg, &dataset)?;
    let ids: Vec<String> = dataset.videos.iter().map(|v| v.id.clone()).collect();
    match cfg.query.as_str() {
        "sequential" => {
            let q = SequentialQuery {
                first: first.into(),
                second: second.into(),
                max_gap: cfg.max_gap,
                top_k: cfg.top_k,
                suppress: cfg.suppress,
            };
            let hits = retrieve_sequential(&ids, &preds, &dataset.classes, &q)?;
            write_sequential_csv(&out.join("retrieval.csv"), &hits)?;
            println!("{} sequential hits", hits.len());
        }
        "cooccur" => {
            let hits = retrieve_cooccurring(&ids, &preds, &dataset.classes, first, second, cfg.top_k)?;
            write_cooccurring_csv(&out.join("retrieval.csv"), &hits)?;
            println!("{} co-occurrence hits", hits.len());
        }
        other => return Err(Error::Config(format!("unknown query `{other}` (sequential or cooccur)"))),
    }
    let pmi = cooccurrence_matrix(&labels(&dataset)?)?;
    write_matrix_csv(&out.join("cooccurrence.csv"), &dataset.classes, &pmi)?;
    Ok(0)
}

fn gradcheck(cfg: &RunConfig) -> Result<u8> {
    let report = gradcheck_suite(CheckDims::default(), cfg.seed, cfg.tolerance)?;
    for c in &report.checks {
        println!("{:<13} {:<10} {:>4} coords  max rel err {:.3e}", c.model, c.tensor, c.coordinates, c.max_relative_error);
    }
    println!(
        "{} coordinates, max relative error {:.3e} (tolerance {:.0e}): {}",
        report.coordinates(),
        report.max_relative_error(),
        report.tolerance,
        if report.passed() { "PASS" } else { "FAIL" }
    );
    if let Some(out) = &cfg.out {
        fs::create_dir_all(out).map_err(|e| Error::Config(format!("cannot create {}: {e}", out.display())))?;
        cfg.write_resolved(out)?;
        let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Consistency(e.to_string()))?;
        fs::write(out.join("gradcheck.json"), json + "\n").map_err(|e| Error::Config(e.to_string()))?;
    }
    Ok(if report.passed() { 0 } else { 3 })
}
