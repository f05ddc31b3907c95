use std::path::Path;

use crate::data::DenseLabels;
use crate::error::{Error, Result};
use crate::eval::ap::{average_precision, MapReport};
use crate::model::shift_labels;
use crate::numeric::Matrix;

/// Label-distribution baseline for offset prediction: the conditional
/// frequency `P(c' active at t+s | c active at t)` from training labels,
/// weighted by the offset-0 probabilities of the current frame.
#[derive(Clone, Debug, PartialEq)]
pub struct OffsetPrior {
    pub offset: i64,
    /// `table[(c, c')] = P(c' at t+s | c at t)`; zero rows for classes never
    /// seen with a valid target frame.
    pub table: Matrix,
}

impl OffsetPrior {
    pub fn fit(labels: &[DenseLabels], offset: i64) -> Result<Self> {
        let classes = labels.first().map_or(0, |z| z.classes());
        let mut joint = Matrix::zeros(classes, classes);
        let mut count = vec![0.0; classes];
        for z in labels {
            if z.classes() != classes {
                return Err(Error::Argument("training videos disagree on the class count".into()));
            }
            let frames = z.frames() as i64;
            for t in 0..frames {
                let target = t + offset;
                if !(0..frames).contains(&target) {
                    continue;
                }
                let (src, dst) = (z.row(t as usize), z.row(target as usize));
                for c in (0..classes).filter(|&c| src[c]) {
                    count[c] += 1.0;
                    for c2 in (0..classes).filter(|&c2| dst[c2]) {
                        joint.set(c, c2, joint.get(c, c2) + 1.0);
                    }
                }
            }
        }
        for (c, &n) in count.iter().enumerate() {
            if n > 0.0 {
                joint.row_mut(c).iter_mut().for_each(|v| *v /= n);
            }
        }
        Ok(OffsetPrior { offset, table: joint })
    }

    pub fn probability(&self, given: usize, target: usize) -> f64 {
        self.table.get(given, target)
    }

    /// Row `t` of the result predicts label frame `t + offset` from row `t` of
    /// `probs`: `min(1, Σ_c P(c'|c) p_tc)`.
    pub fn apply(&self, probs: &Matrix) -> Result<Matrix> {
        let mut out = probs.matmul(&self.table)?;
        out.data_mut().iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        Ok(out)
    }
}

/// `prior_baseline(train labels, offset-0 predictions, s)`.
pub fn prior_baseline(train: &[DenseLabels], predictions: &[Matrix], offset: i64) -> Result<Vec<Matrix>> {
    let prior = OffsetPrior::fit(train, offset)?;
    predictions.iter().map(|p| prior.apply(p)).collect()
}

/// AP for `class` over frames where it is inactive at the input frame,
/// scored against its label `offset` frames later.
pub fn pre_onset_ap(predictions: &[Matrix], labels: &[DenseLabels], class: usize, offset: i64) -> Result<Option<f64>> {
    let mut scores = Vec::new();
    let mut truth = Vec::new();
    for (p, z) in predictions.iter().zip(labels) {
        let (shifted, mask) = shift_labels(z, offset)?;
        for (t, &valid) in mask.iter().enumerate() {
            if valid && !z.get(t, class) {
                scores.push(p.get(t, class));
                truth.push(shifted.get(t, class));
            }
        }
    }
    average_precision(&scores, &truth)
}

#[derive(Clone, Debug, PartialEq)]
pub struct OffsetPoint {
    pub offset_frames: i64,
    pub offset_seconds: f64,
    pub map: f64,
    /// mAP of the label-distribution baseline at this offset, when computed.
    pub prior_map: Option<f64>,
    pub report: MapReport,
}

pub fn write_offset_csv(path: &Path, points: &[OffsetPoint]) -> Result<()> {
    let rows = points
        .iter()
        .map(|p| {
            vec![
                p.offset_frames.to_string(),
                format!("{}", p.offset_seconds),
                format!("{:.6}", p.map),
                p.prior_map.map_or(String::new(), |m| format!("{m:.6}")),
            ]
        })
        .collect::<Vec<_>>();
    crate::data::write_rows(path, &["offset_frames", "offset_seconds", "map", "prior_map"], rows)
}
