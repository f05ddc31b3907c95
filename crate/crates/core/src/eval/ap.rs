use crate::data::DenseLabels;
use crate::error::{Error, Result};
use crate::numeric::Matrix;

/// Frame ranking used by every AP computation: descending score, ties broken
/// by ascending original index.
pub fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Mean over positives of the precision at each positive's rank. `None`
/// when there are no positives.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<Option<f64>> {
    if scores.len() != labels.len() {
        return Err(Error::shape("average_precision", (scores.len(), 1), (labels.len(), 1)));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return Ok(None);
    }
    let mut hits = 0usize;
    let mut total = 0.0;
    for (rank, idx) in ranking(scores).into_iter().enumerate() {
        if labels[idx] {
            hits += 1;
            total += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(Some(total / positives as f64))
}

#[derive(Clone, Debug, PartialEq)]
pub struct MapReport {
    /// Unweighted mean over classes with a defined AP.
    pub map: f64,
    /// `None` for classes without positive frames.
    pub per_class: Vec<Option<f64>>,
}

impl MapReport {
    pub fn evaluated_classes(&self) -> usize {
        self.per_class.iter().filter(|a| a.is_some()).count()
    }
}

/// Frame-level mAP over a set of videos. Frames with `masks[v][t] == false`
/// are left out; classes without positives are skipped with a warning.
pub fn mean_ap(predictions: &[Matrix], labels: &[DenseLabels], masks: Option<&[Vec<bool>]>) -> Result<MapReport> {
    if predictions.len() != labels.len() {
        return Err(Error::Argument(format!(
            "{} prediction matrices for {} label matrices",
            predictions.len(),
            labels.len()
        )));
    }
    let classes = labels.first().map_or(0, |z| z.classes());
    for (p, z) in predictions.iter().zip(labels) {
        if p.shape() != (z.frames(), z.classes()) || z.classes() != classes {
            return Err(Error::shape("mean_ap", p.shape(), (z.frames(), z.classes())));
        }
    }
    if let Some(m) = masks {
        if m.len() != labels.len() || m.iter().zip(labels).any(|(m, z)| m.len() != z.frames()) {
            return Err(Error::Argument("mask lengths do not match the labels".into()));
        }
    }
    let mut per_class = Vec::with_capacity(classes);
    for c in 0..classes {
        let mut scores = Vec::new();
        let mut truth = Vec::new();
        for (v, (p, z)) in predictions.iter().zip(labels).enumerate() {
            for t in 0..z.frames() {
                if masks.is_some_and(|m| !m[v][t]) {
                    continue;
                }
                scores.push(p.get(t, c));
                truth.push(z.get(t, c));
            }
        }
        let ap = average_precision(&scores, &truth)?;
        if ap.is_none() {
            log::warn!("class {c} has no positive frames; excluded from mAP");
        }
        per_class.push(ap);
    }
    let defined: Vec<f64> = per_class.iter().flatten().copied().collect();
    let map = if defined.is_empty() {
        0.0
    } else {
        defined.iter().sum::<f64>() / defined.len() as f64
    };
    Ok(MapReport { map, per_class })
}
