//! Frame-level AP/mAP, detection post-processing and detection AP, offset
//! sweeps with the label-distribution baseline, and prediction I/O.

mod ap;
mod detect;
mod offset;

use std::collections::BTreeMap;
use std::path::Path;

pub use ap::{average_precision, mean_ap, ranking, MapReport};
pub use detect::{
    detect, detection_ap, detection_score, temporal_iou, ClassLengthStats, Detection, DEFAULT_LENGTH_PENALTY,
    DEFAULT_OVERLAP, DEFAULT_THRESHOLD, SIGMA_FLOOR,
};
pub use offset::{pre_onset_ap, prior_baseline, write_offset_csv, OffsetPoint, OffsetPrior};

use crate::data::{write_rows, Dataset, DenseLabels};
use crate::error::{Error, Result};
use crate::model::{shift_labels, AnyModel};
use crate::numeric::Matrix;

/// Per-video probabilities, computed on up to `workers` threads. Output
/// order follows `dataset.videos` regardless of the worker count.
pub fn predict_dataset(model: &AnyModel, dataset: &Dataset, workers: usize) -> Result<Vec<Matrix>> {
    let workers = workers.max(1).min(dataset.videos.len().max(1));
    let videos = &dataset.videos;
    let per = videos.len().div_ceil(workers);
    let mut results: Vec<Result<Vec<Matrix>>> = Vec::new();
    std::thread::scope(|scope| {
        let handles: Vec<_> = videos
            .chunks(per.max(1))
            .map(|part| scope.spawn(move || part.iter().map(|v| model.predict(v.features()?)).collect()))
            .collect();
        results = handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Consistency("prediction worker panicked".into()))))
            .collect();
    });
    let mut out = Vec::with_capacity(videos.len());
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

/// Labels aligned with offset-`s` predictions, plus the validity masks.
pub fn shifted_labels(labels: &[DenseLabels], offset: i64) -> Result<(Vec<DenseLabels>, Vec<Vec<bool>>)> {
    let mut z = Vec::with_capacity(labels.len());
    let mut m = Vec::with_capacity(labels.len());
    for l in labels {
        let (a, b) = shift_labels(l, offset)?;
        z.push(a);
        m.push(b);
    }
    Ok((z, m))
}

/// mAP of offset-`s` predictions against the labels `s` frames ahead.
pub fn mean_ap_at_offset(predictions: &[Matrix], labels: &[DenseLabels], offset: i64) -> Result<MapReport> {
    let (z, m) = shifted_labels(labels, offset)?;
    mean_ap(predictions, &z, Some(&m))
}

/// Offset-prediction curve. `models` maps each offset (frames) to predictions
/// on `test`. The baseline column is filled when offset 0 is present.
pub fn offset_sweep(
    predictions: &BTreeMap<i64, Vec<Matrix>>,
    train_labels: &[DenseLabels],
    test_labels: &[DenseLabels],
    frame_rate: f64,
    offsets: &[i64],
) -> Result<Vec<OffsetPoint>> {
    let base = predictions.get(&0);
    offsets
        .iter()
        .map(|&s| {
            let preds = predictions
                .get(&s)
                .ok_or_else(|| Error::Argument(format!("no checkpoint for offset {s}")))?;
            let report = mean_ap_at_offset(preds, test_labels, s)?;
            let prior_map = match base {
                Some(p0) => {
                    let prior = prior_baseline(train_labels, p0, s)?;
                    Some(mean_ap_at_offset(&prior, test_labels, s)?.map)
                }
                None => None,
            };
            Ok(OffsetPoint {
                offset_frames: s,
                offset_seconds: s as f64 / frame_rate,
                map: report.map,
                prior_map,
                report,
            })
        })
        .collect()
}

/// Per-class AP table: `class,ap` with an empty AP for skipped classes,
/// followed by a `mean` row.
pub fn write_ap_csv(path: &Path, classes: &[String], report: &MapReport) -> Result<()> {
    let mut rows: Vec<Vec<String>> = classes
        .iter()
        .zip(&report.per_class)
        .map(|(name, ap)| vec![name.clone(), ap.map_or(String::new(), |a| format!("{a:.6}"))])
        .collect();
    rows.push(vec!["mean".into(), format!("{:.6}", report.map)]);
    write_rows(path, &["class", "ap"], rows)
}

/// Per-frame probabilities: header `frame,<class>...`, one row per frame.
pub fn write_predictions(path: &Path, classes: &[String], probs: &Matrix) -> Result<()> {
    if classes.len() != probs.cols() {
        return Err(Error::shape("write_predictions", probs.shape(), (probs.rows(), classes.len())));
    }
    let mut header = vec!["frame"];
    header.extend(classes.iter().map(String::as_str));
    let rows: Vec<Vec<String>> = probs
        .row_iter()
        .enumerate()
        .map(|(t, row)| {
            std::iter::once(t.to_string())
                .chain(row.iter().map(|p| format!("{p:.17e}")))
                .collect()
        })
        .collect();
    write_rows(path, &header, rows)
}

pub fn read_predictions(path: &Path, classes: &[String]) -> Result<Matrix> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let header = reader.headers().map_err(|e| Error::format(path, e.to_string()))?.clone();
    let names: Vec<&str> = header.iter().skip(1).collect();
    if names != classes.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(Error::format(path, "class columns do not match the dataset vocabulary"));
    }
    let mut rows = Vec::new();
    for (t, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(path, e.to_string()))?;
        let row = record
            .iter()
            .skip(1)
            .map(|v| v.parse::<f64>().map_err(|e| Error::format(path, format!("row {t}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Matrix::from_rows(&rows)
}

/// `video,class,start,end,score`, one row per detection.
pub fn write_detections(path: &Path, classes: &[String], detections: &[(String, Detection)]) -> Result<()> {
    let rows: Vec<Vec<String>> = detections
        .iter()
        .map(|(video, d)| {
            vec![
                video.clone(),
                classes.get(d.class).cloned().unwrap_or_else(|| d.class.to_string()),
                d.start.to_string(),
                d.end.to_string(),
                format!("{:.6}", d.score),
            ]
        })
        .collect();
    write_rows(path, &["video", "class", "start", "end", "score"], rows)
}
