//! Synthetic densely labeled sequences with planted temporal structure.
//!
//! Each class may fire spontaneous, non-overlapping events. Rules then add
//! structure in the order they are listed:
//!
//! * `sequence`: every trigger instance `[s, e)` spawns a consequence
//!   instance `[s + lag, e + lag + extra)`;
//! * `co-occur`: every anchor instance is duplicated for the partner class;
//! * `hierarchy`: the parent is active exactly where any child is.
//!
//! Frame features are the sum of the active classes' embeddings (scaled by
//! each class's gain) plus isotropic Gaussian noise, rounded to `f32`.

use serde::{Deserialize, Serialize};

use crate::data::labels::{merge_intervals, rasterize, LabelInterval};
use crate::data::{Dataset, VideoRecord};
use crate::error::{Error, Result};
use crate::numeric::{Matrix, SeededRng};

/// Inclusive integer range sampled uniformly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Range(pub usize, pub usize);

impl Range {
    fn check(&self, what: &str, min: usize) -> Result<()> {
        if self.0 < min || self.0 > self.1 {
            return Err(Error::Generation(format!(
                "{what} range [{}, {}] must satisfy {min} <= lo <= hi",
                self.0, self.1
            )));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut SeededRng) -> usize {
        rng.int_inclusive(self.0, self.1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventDistribution {
    /// Events per video.
    pub count: Range,
    /// Event length in frames.
    pub duration: Range,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub name: String,
    /// Embedding scale; 0 makes the class invisible in the features.
    #[serde(default = "one")]
    pub gain: f64,
    #[serde(default)]
    pub spontaneous: Option<EventDistribution>,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Rule {
    Sequence {
        trigger: String,
        consequence: String,
        lag: Range,
        #[serde(default = "zero_range")]
        extra_duration: Range,
    },
    CoOccur {
        anchor: String,
        partner: String,
    },
    Hierarchy {
        parent: String,
        children: Vec<String>,
    },
}

fn zero_range() -> Range {
    Range(0, 0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub feature_dim: usize,
    pub noise: f64,
    pub frames_per_video: usize,
    pub train_videos: usize,
    pub test_videos: usize,
    #[serde(default = "default_frame_rate")]
    pub frame_rate: f64,
    pub classes: Vec<ClassSpec>,
    #[serde(default)]
    pub rules: Vec<Rule>,
}

fn default_frame_rate() -> f64 {
    10.0
}

/// Generated splits plus the class embeddings used for the features.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthDataset {
    pub train: Dataset,
    pub test: Dataset,
    /// `C x D`, already scaled by each class's gain.
    pub embeddings: Matrix,
}

impl SynthSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn class_names(&self) -> Vec<String> {
        self.classes.iter().map(|c| c.name.clone()).collect()
    }

    fn index(&self, name: &str) -> Result<usize> {
        self.classes
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::Vocabulary(name.to_string()))
    }

    /// Frames a trigger instance of `class` needs after its own end to fit
    /// every sequence rule it (transitively) starts.
    fn reserve(&self, class: usize, depth: usize) -> Result<usize> {
        if depth > self.classes.len() {
            return Err(Error::Generation("sequence rules form a cycle".into()));
        }
        let mut need = 0;
        for rule in &self.rules {
            if let Rule::Sequence {
                trigger,
                consequence,
                lag,
                extra_duration,
            } = rule
            {
                if self.index(trigger)? == class {
                    let downstream = self.reserve(self.index(consequence)?, depth + 1)?;
                    need = need.max(lag.1 + extra_duration.1 + downstream);
                }
            }
        }
        Ok(need)
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() || self.feature_dim == 0 || self.frames_per_video == 0 {
            return Err(Error::Generation("need at least one class, feature dimension and frame".into()));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::Generation(format!("noise must be non-negative, got {}", self.noise)));
        }
        if self.frame_rate.is_nan() || self.frame_rate <= 0.0 {
            return Err(Error::Generation("frame rate must be positive".into()));
        }
        for (i, c) in self.classes.iter().enumerate() {
            if self.classes[..i].iter().any(|o| o.name == c.name) {
                return Err(Error::Generation(format!("duplicate class name `{}`", c.name)));
            }
            if let Some(ev) = &c.spontaneous {
                ev.count.check("count", 0)?;
                ev.duration.check("duration", 1)?;
                let reserve = self.reserve(i, 0)?;
                if ev.duration.0 + reserve > self.frames_per_video {
                    return Err(Error::Generation(format!(
                        "events of `{}` need at least {} frames but videos have {}",
                        c.name,
                        ev.duration.0 + reserve,
                        self.frames_per_video
                    )));
                }
            }
        }
        for rule in &self.rules {
            match rule {
                Rule::Sequence {
                    trigger,
                    consequence,
                    lag,
                    extra_duration,
                } => {
                    self.index(trigger)?;
                    self.index(consequence)?;
                    lag.check("lag", 1)?;
                    extra_duration.check("extra duration", 0)?;
                }
                Rule::CoOccur { anchor, partner } => {
                    self.index(anchor)?;
                    self.index(partner)?;
                }
                Rule::Hierarchy { parent, children } => {
                    let p = self.index(parent)?;
                    for child in children {
                        if self.index(child)? == p {
                            return Err(Error::Generation(format!("class `{parent}` cannot be its own child")));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Random unit vectors, orthonormal when `classes <= dim`, rounded to `f32`.
fn draw_embeddings(classes: usize, dim: usize, rng: &mut SeededRng) -> Matrix {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(classes);
    for c in 0..classes {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        if c < dim {
            for prev in &rows {
                let proj: f64 = v.iter().zip(prev).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(prev).for_each(|(a, b)| *a -= proj * b);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        rows.push(v);
    }
    let mut m = Matrix::from_rows(&rows).unwrap_or_else(|_| Matrix::zeros(classes, dim));
    m.data_mut().iter_mut().for_each(|x| *x = *x as f32 as f64);
    m
}

fn place_spontaneous(
    class: usize,
    ev: &EventDistribution,
    frames: usize,
    reserve: usize,
    rng: &mut SeededRng,
) -> Vec<LabelInterval> {
    let mut placed: Vec<LabelInterval> = Vec::new();
    let count = ev.count.sample(rng);
    for _ in 0..count {
        let dur = ev.duration.sample(rng);
        if dur + reserve > frames {
            continue;
        }
        let latest = frames - dur - reserve;
        for _attempt in 0..100 {
            let start = rng.int_inclusive(0, latest);
            let end = start + dur;
            // keep a one-frame gap so instances stay separate runs
            if placed.iter().all(|p| end < p.start || start > p.end) {
                placed.push(LabelInterval::new(class, start, end));
                break;
            }
        }
    }
    placed.sort();
    placed
}

fn generate_video(spec: &SynthSpec, id: String, embeddings: &Matrix, rng: &mut SeededRng) -> Result<VideoRecord> {
    let frames = spec.frames_per_video;
    let mut intervals = Vec::new();
    for (c, class) in spec.classes.iter().enumerate() {
        if let Some(ev) = &class.spontaneous {
            let reserve = spec.reserve(c, 0)?;
            intervals.extend(place_spontaneous(c, ev, frames, reserve, rng));
        }
    }
    for rule in &spec.rules {
        match rule {
            Rule::Sequence {
                trigger,
                consequence,
                lag,
                extra_duration,
            } => {
                let (a, b) = (spec.index(trigger)?, spec.index(consequence)?);
                let spawned: Vec<LabelInterval> = intervals
                    .iter()
                    .filter(|iv| iv.class == a)
                    .filter_map(|iv| {
                        let start = iv.start + lag.sample(rng);
                        let end = (iv.end + (start - iv.start) + extra_duration.sample(rng)).min(frames);
                        (start < frames).then(|| LabelInterval::new(b, start, end))
                    })
                    .collect();
                intervals.extend(spawned);
            }
            Rule::CoOccur { anchor, partner } => {
                let (a, p) = (spec.index(anchor)?, spec.index(partner)?);
                let copies: Vec<LabelInterval> = intervals
                    .iter()
                    .filter(|iv| iv.class == a)
                    .map(|iv| LabelInterval::new(p, iv.start, iv.end))
                    .collect();
                intervals.extend(copies);
            }
            Rule::Hierarchy { parent, children } => {
                let p = spec.index(parent)?;
                let kids = children.iter().map(|c| spec.index(c)).collect::<Result<Vec<_>>>()?;
                let spans: Vec<LabelInterval> = intervals
                    .iter()
                    .filter(|iv| kids.contains(&iv.class))
                    .map(|iv| LabelInterval::new(p, iv.start, iv.end))
                    .collect();
                intervals.extend(merge_intervals(&spans));
            }
        }
    }
    intervals.sort();
    intervals.dedup();

    let z = rasterize(&intervals, frames, spec.classes.len())?;
    let dim = spec.feature_dim;
    let mut features = Matrix::zeros(frames, dim);
    for t in 0..frames {
        let row = features.row_mut(t);
        for (c, &active) in z.row(t).iter().enumerate() {
            if active {
                row.iter_mut().zip(embeddings.row(c)).for_each(|(f, e)| *f += e);
            }
        }
        for f in row.iter_mut() {
            *f += spec.noise * rng.normal();
            *f = *f as f32 as f64;
        }
    }
    Ok(VideoRecord {
        id,
        frames,
        frame_rate: spec.frame_rate,
        features: Some(features),
        intervals,
    })
}

/// Generates train and test splits. Video `k` of the train split draws from
/// substream `k + 1` of `rng`, test videos continue after the train ones, and
/// embeddings come from substream 0.
pub fn synth_generate(spec: &SynthSpec, rng: &SeededRng) -> Result<SynthDataset> {
    spec.validate()?;
    let mut emb_rng = rng.substream(0);
    let mut embeddings = draw_embeddings(spec.classes.len(), spec.feature_dim, &mut emb_rng);
    for (c, class) in spec.classes.iter().enumerate() {
        embeddings.row_mut(c).iter_mut().for_each(|x| *x = (*x * class.gain) as f32 as f64);
    }
    let classes = spec.class_names();
    let split = |prefix: &str, count: usize, first_stream: u64| -> Result<Dataset> {
        let videos = (0..count)
            .map(|k| {
                let mut r = rng.substream(first_stream + k as u64);
                generate_video(spec, format!("{prefix}_{k:04}"), &embeddings, &mut r)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            classes: classes.clone(),
            videos,
        })
    };
    let train = split("train", spec.train_videos, 1)?;
    let test = split("test", spec.test_videos, 1 + spec.train_videos as u64)?;
    Ok(SynthDataset {
        train,
        test,
        embeddings,
    })
}

/// Independently re-checks every rule against a dataset's annotations.
/// Returns one message per violation.
pub fn audit_rules(spec: &SynthSpec, dataset: &Dataset) -> Result<Vec<String>> {
    let mut violations = Vec::new();
    for video in &dataset.videos {
        let of_class = |name: &str| -> Result<Vec<LabelInterval>> {
            let c = dataset.class_index(name)?;
            Ok(video.intervals.iter().copied().filter(|iv| iv.class == c).collect())
        };
        for rule in &spec.rules {
            match rule {
                Rule::Sequence {
                    trigger,
                    consequence,
                    lag,
                    ..
                } => {
                    let followers = of_class(consequence)?;
                    for iv in of_class(trigger)? {
                        if iv.start + lag.1 >= video.frames {
                            continue;
                        }
                        let hit = followers.iter().any(|f| {
                            f.start >= iv.start + lag.0 && f.start <= iv.start + lag.1 && f.len() >= iv.len()
                        });
                        if !hit {
                            violations.push(format!(
                                "{}: {trigger} at {}..{} has no {consequence} starting {}..={} frames later",
                                video.id, iv.start, iv.end, lag.0, lag.1
                            ));
                        }
                    }
                }
                Rule::CoOccur { anchor, partner } => {
                    let partners = of_class(partner)?;
                    for iv in of_class(anchor)? {
                        if !partners.iter().any(|p| p.start == iv.start && p.end == iv.end) {
                            violations.push(format!(
                                "{}: {anchor} at {}..{} has no co-occurring {partner}",
                                video.id, iv.start, iv.end
                            ));
                        }
                    }
                }
                Rule::Hierarchy { parent, children } => {
                    let z = video.labels(dataset.num_classes())?;
                    let p = dataset.class_index(parent)?;
                    let kids = children.iter().map(|c| dataset.class_index(c)).collect::<Result<Vec<_>>>()?;
                    for t in 0..video.frames {
                        let any_child = kids.iter().any(|&k| z.get(t, k));
                        if z.get(t, p) != any_child {
                            violations.push(format!(
                                "{}: frame {t} has {parent}={} but children active={any_child}",
                                video.id,
                                z.get(t, p)
                            ));
                        }
                    }
                }
            }
        }
    }
    Ok(violations)
}
