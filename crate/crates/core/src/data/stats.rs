use std::fs;
use std::path::Path;

use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ClassStats {
    pub name: String,
    /// Maximal runs of consecutive positive frames.
    pub instances: usize,
    pub frames: usize,
    pub seconds: f64,
    pub mean_instance_frames: f64,
    /// Population standard deviation of instance lengths, in frames.
    pub std_instance_frames: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetStats {
    pub videos: usize,
    pub total_frames: usize,
    /// Index `k`: number of frames with exactly `k` active labels.
    pub labels_per_frame: Vec<usize>,
    /// Index `k`: number of videos containing exactly `k` distinct classes.
    pub classes_per_video: Vec<usize>,
    pub mean_labels_per_frame: f64,
    pub mean_classes_per_video: f64,
    pub max_labels_per_frame: usize,
    pub max_classes_per_video: usize,
    /// Fraction of frames with two or more labels.
    pub multilabel_frame_fraction: f64,
    pub per_class: Vec<ClassStats>,
}

fn bump(hist: &mut Vec<usize>, k: usize) {
    if hist.len() <= k {
        hist.resize(k + 1, 0);
    }
    hist[k] += 1;
}

pub fn dataset_stats(dataset: &Dataset) -> Result<DatasetStats> {
    if dataset.videos.is_empty() {
        return Err(Error::Argument("statistics need at least one video".into()));
    }
    let classes = dataset.num_classes();
    let mut labels_per_frame = Vec::new();
    let mut classes_per_video = Vec::new();
    let mut lengths: Vec<Vec<usize>> = vec![Vec::new(); classes];
    let mut seconds = vec![0.0; classes];
    let mut label_total = 0usize;
    let mut class_total = 0usize;
    let mut multi = 0usize;

    for video in &dataset.videos {
        let z = video.labels(classes)?;
        for t in 0..z.frames() {
            let k = z.active_in_frame(t);
            bump(&mut labels_per_frame, k);
            label_total += k;
            multi += usize::from(k >= 2);
        }
        let mut distinct = 0;
        for c in 0..classes {
            let runs = z.runs(c);
            if !runs.is_empty() {
                distinct += 1;
            }
            for run in runs {
                lengths[c].push(run.len());
                seconds[c] += run.len() as f64 / video.frame_rate;
            }
        }
        bump(&mut classes_per_video, distinct);
        class_total += distinct;
    }

    let total_frames = dataset.total_frames();
    let per_class = (0..classes)
        .map(|c| {
            let l = &lengths[c];
            let n = l.len() as f64;
            let frames: usize = l.iter().sum();
            let (mean, std) = if l.is_empty() {
                (0.0, 0.0)
            } else {
                let mean = frames as f64 / n;
                let var = l.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / n;
                (mean, var.sqrt())
            };
            ClassStats {
                name: dataset.classes[c].clone(),
                instances: l.len(),
                frames,
                seconds: seconds[c],
                mean_instance_frames: mean,
                std_instance_frames: std,
            }
        })
        .collect();
    let frames_div = total_frames.max(1) as f64;
    Ok(DatasetStats {
        videos: dataset.videos.len(),
        total_frames,
        max_labels_per_frame: labels_per_frame.len().saturating_sub(1),
        max_classes_per_video: classes_per_video.len().saturating_sub(1),
        labels_per_frame,
        classes_per_video,
        mean_labels_per_frame: label_total as f64 / frames_div,
        mean_classes_per_video: class_total as f64 / dataset.videos.len() as f64,
        multilabel_frame_fraction: multi as f64 / frames_div,
        per_class,
    })
}

impl DatasetStats {
    /// Writes `summary.csv`, `labels_per_frame.csv`, `classes_per_video.csv`
    /// and `per_class.csv` into `dir`.
    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let summary = [
            ("videos", self.videos.to_string()),
            ("total_frames", self.total_frames.to_string()),
            ("mean_labels_per_frame", self.mean_labels_per_frame.to_string()),
            ("mean_classes_per_video", self.mean_classes_per_video.to_string()),
            ("max_labels_per_frame", self.max_labels_per_frame.to_string()),
            ("max_classes_per_video", self.max_classes_per_video.to_string()),
            ("multilabel_frame_fraction", self.multilabel_frame_fraction.to_string()),
        ];
        write_rows(&dir.join("summary.csv"), &["metric", "value"], summary.iter().map(|(k, v)| vec![k.to_string(), v.clone()]))?;
        write_rows(
            &dir.join("labels_per_frame.csv"),
            &["labels", "frames"],
            self.labels_per_frame.iter().enumerate().map(|(k, n)| vec![k.to_string(), n.to_string()]),
        )?;
        write_rows(
            &dir.join("classes_per_video.csv"),
            &["classes", "videos"],
            self.classes_per_video.iter().enumerate().map(|(k, n)| vec![k.to_string(), n.to_string()]),
        )?;
        write_rows(
            &dir.join("per_class.csv"),
            &["class", "instances", "frames", "seconds", "mean_instance_frames", "std_instance_frames"],
            self.per_class.iter().map(|c| {
                vec![
                    c.name.clone(),
                    c.instances.to_string(),
                    c.frames.to_string(),
                    c.seconds.to_string(),
                    c.mean_instance_frames.to_string(),
                    c.std_instance_frames.to_string(),
                ]
            }),
        )
    }
}

pub(crate) fn write_rows<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let csv_err = |e: csv::Error| Error::format(path, e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
