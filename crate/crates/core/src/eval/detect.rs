//! Detection post-processing: threshold per-frame probabilities, group runs
//! into segments and score each segment by its probability mass times a
//! Gaussian penalty on deviation from the class's mean training length.

use serde::{Deserialize, Serialize};

use crate::data::{DenseLabels, LabelInterval};
use crate::error::{Error, Result};
use crate::eval::ap::ranking;

/// Reported post-processing defaults.
pub const DEFAULT_THRESHOLD: f64 = 0.1;
pub const DEFAULT_LENGTH_PENALTY: f64 = 0.01;
pub const DEFAULT_OVERLAP: f64 = 0.1;

/// Lower bound on `σ(C)`, in frames.
pub const SIGMA_FLOOR: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub class: usize,
    pub start: usize,
    /// Exclusive.
    pub end: usize,
    pub score: f64,
}

impl Detection {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

/// Per-class mean and standard deviation of training instance lengths (frames).
#[derive(Clone, Debug, PartialEq)]
pub struct ClassLengthStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ClassLengthStats {
    /// From the maximal positive runs of the training labels. Classes without
    /// instances get `μ = σ = 1`.
    pub fn from_labels(labels: &[DenseLabels]) -> Result<Self> {
        let classes = labels.first().map_or(0, |z| z.classes());
        let mut mean = Vec::with_capacity(classes);
        let mut std = Vec::with_capacity(classes);
        for c in 0..classes {
            let lengths: Vec<f64> = labels
                .iter()
                .flat_map(|z| z.runs(c))
                .map(|r| r.len() as f64)
                .collect();
            if lengths.is_empty() {
                log::warn!("class {c} has no training instances; using unit length statistics");
                mean.push(1.0);
                std.push(SIGMA_FLOOR);
                continue;
            }
            let n = lengths.len() as f64;
            let mu = lengths.iter().sum::<f64>() / n;
            let var = lengths.iter().map(|l| (l - mu).powi(2)).sum::<f64>() / n;
            mean.push(mu);
            std.push(var.sqrt().max(SIGMA_FLOOR));
        }
        Ok(ClassLengthStats { mean, std })
    }

    pub fn new(mean: Vec<f64>, std: Vec<f64>) -> Result<Self> {
        if mean.len() != std.len() {
            return Err(Error::Argument("mean and std tables differ in length".into()));
        }
        let std = std.into_iter().map(|s| s.max(SIGMA_FLOOR)).collect();
        Ok(ClassLengthStats { mean, std })
    }
}

/// `(Σ p_i) · exp(-α (L - μ)² / σ²)`.
pub fn detection_score(probs: &[f64], mean: f64, std: f64, alpha: f64) -> f64 {
    let len = probs.len() as f64;
    let mass: f64 = probs.iter().sum();
    mass * (-alpha * (len - mean).powi(2) / (std * std)).exp()
}

/// Maximal runs of frames with `p >= threshold`, scored by [`detection_score`].
pub fn detect(probs: &[f64], class: usize, threshold: f64, stats: &ClassLengthStats, alpha: f64) -> Vec<Detection> {
    let (mean, std) = (stats.mean[class], stats.std[class]);
    let mut out = Vec::new();
    let mut t = 0;
    while t < probs.len() {
        if probs[t] < threshold {
            t += 1;
            continue;
        }
        let start = t;
        while t < probs.len() && probs[t] >= threshold {
            t += 1;
        }
        out.push(Detection {
            class,
            start,
            end: t,
            score: detection_score(&probs[start..t], mean, std, alpha),
        });
    }
    out
}

/// Temporal intersection over union of two end-exclusive intervals.
pub fn temporal_iou(a: (usize, usize), b: (usize, usize)) -> f64 {
    let inter = a.1.min(b.1).saturating_sub(a.0.max(b.0));
    let union = (a.1 - a.0) + (b.1 - b.0) - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Detection AP for one class across videos.
///
/// Detections are visited in descending score (ties: video, then start) and
/// greedily matched to the unmatched ground-truth instance of the same video
/// with the highest IoU, provided it reaches `overlap`. AP is the sum of
/// precision at each true positive divided by the number of ground-truth
/// instances; `None` when the class has no instances.
pub fn detection_ap(
    detections: &[Vec<Detection>],
    truth: &[Vec<LabelInterval>],
    class: usize,
    overlap: f64,
) -> Result<Option<f64>> {
    if !(overlap > 0.0 && overlap <= 1.0) {
        return Err(Error::Argument(format!("overlap threshold must lie in (0, 1], got {overlap}")));
    }
    if detections.len() != truth.len() {
        return Err(Error::Argument("detections and ground truth cover different videos".into()));
    }
    let gt: Vec<Vec<LabelInterval>> = truth
        .iter()
        .map(|v| v.iter().copied().filter(|iv| iv.class == class).collect())
        .collect();
    let total: usize = gt.iter().map(|g| g.len()).sum();
    if total == 0 {
        return Ok(None);
    }
    let mut flat: Vec<(usize, Detection)> = detections
        .iter()
        .enumerate()
        .flat_map(|(v, ds)| ds.iter().filter(|d| d.class == class).map(move |d| (v, *d)))
        .collect();
    flat.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.start.cmp(&b.1.start)));
    let scores: Vec<f64> = flat.iter().map(|(_, d)| d.score).collect();

    let mut used: Vec<Vec<bool>> = gt.iter().map(|g| vec![false; g.len()]).collect();
    let mut hits = 0usize;
    let mut ap = 0.0;
    for (rank, idx) in ranking(&scores).into_iter().enumerate() {
        let (v, d) = flat[idx];
        let best = gt[v]
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[v][*j])
            .map(|(j, g)| (j, temporal_iou((d.start, d.end), (g.start, g.end))))
            .filter(|(_, iou)| *iou >= overlap)
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
        if let Some((j, _)) = best {
            used[v][j] = true;
            hits += 1;
            ap += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(Some(ap / total as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::rasterize;
    use proptest::prelude::*;

    fn stats(mean: f64, std: f64) -> ClassLengthStats {
        ClassLengthStats::new(vec![mean], vec![std]).unwrap()
    }

    #[test]
    fn score_examples() {
        let d = detect(&[0.5, 0.5], 0, 0.1, &stats(2.0, 1.0), 0.01);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].score, 1.0);
        let d = detect(&[0.5, 0.5], 0, 0.1, &stats(1.0, 1.0), 0.01);
        assert!((d[0].score - (-0.01f64).exp()).abs() < 1e-15);
        assert!((d[0].score - 0.99005).abs() < 1e-5);
        assert!(detect(&[0.05, 0.09], 0, 0.1, &stats(1.0, 1.0), 0.01).is_empty());
    }

    #[test]
    fn one_sigma_from_the_mean() {
        let probs = [0.3, 0.6, 0.9, 0.4, 0.8];
        let s = ClassLengthStats::new(vec![3.0], vec![2.0]).unwrap();
        let d = detect(&probs, 0, 0.1, &s, 0.01);
        let mass: f64 = probs.iter().sum();
        assert!((d[0].score - mass * (-0.01f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn sigma_floor_applies() {
        let z = rasterize(
            &[LabelInterval::new(0, 0, 4), LabelInterval::new(0, 6, 10)],
            12,
            2,
        )
        .unwrap();
        let s = ClassLengthStats::from_labels(&[z]).unwrap();
        assert_eq!(s.mean, vec![4.0, 1.0]);
        assert_eq!(s.std, vec![SIGMA_FLOOR, SIGMA_FLOOR]);
    }

    #[test]
    fn iou_examples() {
        assert!((temporal_iou((0, 10), (5, 15)) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(temporal_iou((0, 5), (5, 9)), 0.0);
        assert_eq!(temporal_iou((2, 7), (2, 7)), 1.0);
    }

    #[test]
    fn detection_ap_examples() {
        let truth = vec![vec![LabelInterval::new(0, 2, 8), LabelInterval::new(0, 12, 15)]];
        let exact: Vec<Vec<Detection>> = vec![truth[0]
            .iter()
            .map(|g| Detection { class: 0, start: g.start, end: g.end, score: 0.5 })
            .collect()];
        for theta in [0.1, 0.5, 1.0] {
            assert_eq!(detection_ap(&exact, &truth, 0, theta).unwrap(), Some(1.0));
        }
        let disjoint = vec![vec![Detection { class: 0, start: 20, end: 25, score: 1.0 }]];
        assert_eq!(detection_ap(&disjoint, &truth, 0, 0.1).unwrap(), Some(0.0));
        assert_eq!(detection_ap(&disjoint, &truth, 1, 0.1).unwrap(), None);
        assert!(detection_ap(&disjoint, &truth, 0, 0.0).is_err());
    }

    #[test]
    fn duplicate_detections_count_once() {
        let truth = vec![vec![LabelInterval::new(0, 0, 10)]];
        let dets = vec![vec![
            Detection { class: 0, start: 0, end: 10, score: 0.9 },
            Detection { class: 0, start: 1, end: 10, score: 0.8 },
        ]];
        // second detection is a false positive after the only match
        assert_eq!(detection_ap(&dets, &truth, 0, 0.5).unwrap(), Some(1.0));
        let dets = vec![vec![
            Detection { class: 0, start: 30, end: 40, score: 0.9 },
            Detection { class: 0, start: 0, end: 10, score: 0.8 },
        ]];
        assert_eq!(detection_ap(&dets, &truth, 0, 0.5).unwrap(), Some(0.5));
    }

    proptest! {
        #[test]
        fn detections_partition_positive_frames(
            probs in prop::collection::vec(0.0f64..1.0, 0..60),
            threshold in 0.05f64..0.95,
        ) {
            let s = stats(5.0, 2.0);
            let dets = detect(&probs, 0, threshold, &s, 0.01);
            let mut covered = vec![0usize; probs.len()];
            for d in &dets {
                prop_assert!(d.start < d.end);
                prop_assert!(d.score.is_finite());
                if probs[d.start..d.end].iter().any(|&p| p > 0.0) {
                    prop_assert!(d.score > 0.0);
                }
                for c in &mut covered[d.start..d.end] {
                    *c += 1;
                }
            }
            for (t, &p) in probs.iter().enumerate() {
                prop_assert_eq!(covered[t], usize::from(p >= threshold));
            }
        }
    }
}
