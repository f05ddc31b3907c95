use std::fs;
use std::path::Path;

use crate::data::formats::{read_annotation, read_features, write_annotation, write_features, Annotation};
use crate::data::labels::{rasterize, DenseLabels, LabelInterval};
use crate::error::{Error, Result};
use crate::numeric::Matrix;

#[derive(Clone, Debug, PartialEq)]
pub struct VideoRecord {
    pub id: String,
    pub frames: usize,
    pub frame_rate: f64,
    /// `frames x D`, when precomputed features are available.
    pub features: Option<Matrix>,
    pub intervals: Vec<LabelInterval>,
}

impl VideoRecord {
    pub fn validate(&self, classes: usize) -> Result<()> {
        for iv in &self.intervals {
            iv.validate(self.frames, classes)
                .map_err(|e| Error::Validation(format!("video {}: {e}", self.id)))?;
        }
        if let Some(f) = &self.features {
            if f.rows() != self.frames {
                return Err(Error::Validation(format!(
                    "video {}: feature matrix has {} rows for {} frames",
                    self.id,
                    f.rows(),
                    self.frames
                )));
            }
        }
        Ok(())
    }

    pub fn labels(&self, classes: usize) -> Result<DenseLabels> {
        rasterize(&self.intervals, self.frames, classes)
    }

    pub fn features(&self) -> Result<&Matrix> {
        self.features
            .as_ref()
            .ok_or_else(|| Error::Validation(format!("video {} has no features", self.id)))
    }
}

/// Videos sharing one class vocabulary.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub classes: Vec<String>,
    pub videos: Vec<VideoRecord>,
}

impl Dataset {
    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_index(&self, name: &str) -> Result<usize> {
        self.classes
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Vocabulary(name.to_string()))
    }

    /// Feature dimension shared by all videos; `None` without features.
    pub fn feature_dim(&self) -> Result<Option<usize>> {
        let mut dim = None;
        for v in &self.videos {
            if let Some(f) = &v.features {
                match dim {
                    None => dim = Some(f.cols()),
                    Some(d) if d != f.cols() => {
                        return Err(Error::Validation(format!(
                            "video {} has feature dimension {}, expected {d}",
                            v.id,
                            f.cols()
                        )))
                    }
                    _ => {}
                }
            }
        }
        Ok(dim)
    }

    pub fn validate(&self) -> Result<()> {
        for v in &self.videos {
            v.validate(self.num_classes())?;
        }
        self.feature_dim().map(|_| ())
    }

    pub fn labels(&self) -> Result<Vec<DenseLabels>> {
        self.videos.iter().map(|v| v.labels(self.num_classes())).collect()
    }

    pub fn total_frames(&self) -> usize {
        self.videos.iter().map(|v| v.frames).sum()
    }

    /// Loads every `*.json` annotation in `dir` (sorted by file name) and the
    /// sibling `<video_id>.dmf` feature file when present.
    pub fn load(dir: &Path) -> Result<Dataset> {
        let mut paths: Vec<_> = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        paths.sort();
        if paths.is_empty() {
            return Err(Error::Validation(format!("no annotation files in {}", dir.display())));
        }
        let mut classes: Option<Vec<String>> = None;
        let mut videos = Vec::with_capacity(paths.len());
        for path in paths {
            let ann = read_annotation(&path)?;
            match &classes {
                None => classes = Some(ann.classes.clone()),
                Some(c) if *c != ann.classes => {
                    return Err(Error::format(&path, "class vocabulary differs from other videos in the dataset"))
                }
                _ => {}
            }
            let vocab = classes.as_ref().unwrap();
            let intervals = ann
                .intervals
                .iter()
                .map(|(name, start, end)| {
                    let class = vocab
                        .iter()
                        .position(|c| c == name)
                        .ok_or_else(|| Error::format(&path, format!("unknown class `{name}`")))?;
                    Ok(LabelInterval::new(class, *start, *end))
                })
                .collect::<Result<Vec<_>>>()?;
            let feature_path = dir.join(format!("{}.dmf", ann.video_id));
            let features = if feature_path.exists() {
                Some(read_features(&feature_path)?)
            } else {
                None
            };
            let video = VideoRecord {
                id: ann.video_id,
                frames: ann.frames,
                frame_rate: ann.frame_rate,
                features,
                intervals,
            };
            video
                .validate(vocab.len())
                .map_err(|e| Error::format(&path, e.to_string()))?;
            videos.push(video);
        }
        let ds = Dataset {
            classes: classes.unwrap_or_default(),
            videos,
        };
        ds.feature_dim()?;
        Ok(ds)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for v in &self.videos {
            let ann = Annotation {
                video_id: v.id.clone(),
                frames: v.frames,
                frame_rate: v.frame_rate,
                classes: self.classes.clone(),
                intervals: v
                    .intervals
                    .iter()
                    .map(|iv| (self.classes[iv.class].clone(), iv.start, iv.end))
                    .collect(),
            };
            write_annotation(&dir.join(format!("{}.json", v.id)), &ann)?;
            if let Some(f) = &v.features {
                write_features(&dir.join(format!("{}.dmf", v.id)), f)?;
            }
        }
        Ok(())
    }
}
