//! Retrieval over per-frame probabilities: "A then B" segments, co-occurring
//! frames, and a PMI co-occurrence matrix over labels.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{write_rows, DenseLabels};
use crate::error::{Error, Result};
use crate::eval::ranking;
use crate::numeric::Matrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequentialQuery {
    pub first: String,
    pub second: String,
    /// Largest allowed `tB - tA`, in frames.
    pub max_gap: usize,
    pub top_k: usize,
    /// Drop candidates overlapping an already selected pair.
    pub suppress: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SequentialHit {
    pub video: String,
    pub t_a: usize,
    pub t_b: usize,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameHit {
    pub video: String,
    pub t: usize,
    pub score: f64,
}

fn class_index(classes: &[String], name: &str) -> Result<usize> {
    classes
        .iter()
        .position(|c| c == name)
        .ok_or_else(|| Error::Vocabulary(format!("unknown class `{name}`")))
}

fn check_inputs(videos: &[String], predictions: &[Matrix], classes: &[String]) -> Result<()> {
    if videos.len() != predictions.len() {
        return Err(Error::Argument(format!(
            "{} video ids for {} prediction matrices",
            videos.len(),
            predictions.len()
        )));
    }
    for p in predictions {
        if p.cols() != classes.len() {
            return Err(Error::shape("retrieval", p.shape(), (p.rows(), classes.len())));
        }
    }
    Ok(())
}

/// Top-k `(tA, tB)` pairs with `0 < tB - tA <= max_gap`, scored by
/// `p[tA, A] * p[tB, B]`. Zero-score candidates are never returned. With
/// suppression on, a candidate is dropped once its `tA` or `tB` falls within
/// `max_gap` frames of a selected pair in the same video.
pub fn retrieve_sequential(
    videos: &[String],
    predictions: &[Matrix],
    classes: &[String],
    query: &SequentialQuery,
) -> Result<Vec<SequentialHit>> {
    check_inputs(videos, predictions, classes)?;
    let a = class_index(classes, &query.first)?;
    let b = class_index(classes, &query.second)?;
    if query.top_k == 0 {
        return Err(Error::Argument("top_k must be at least 1".into()));
    }
    let mut cands: Vec<(usize, usize, usize)> = Vec::new();
    let mut scores = Vec::new();
    for (v, p) in predictions.iter().enumerate() {
        for ta in 0..p.rows() {
            let pa = p.get(ta, a);
            for tb in ta + 1..=(ta + query.max_gap).min(p.rows().saturating_sub(1)) {
                let s = pa * p.get(tb, b);
                if s > 0.0 {
                    cands.push((v, ta, tb));
                    scores.push(s);
                }
            }
        }
    }
    let g = query.max_gap;
    let mut picked: Vec<(usize, usize, usize)> = Vec::new();
    let mut hits = Vec::new();
    for idx in ranking(&scores) {
        if hits.len() == query.top_k {
            break;
        }
        let (v, ta, tb) = cands[idx];
        let near = |t: usize, lo: usize, hi: usize| t + g >= lo && t <= hi + g;
        if query.suppress
            && picked
                .iter()
                .any(|&(pv, pa, pb)| pv == v && (near(ta, pa, pb) || near(tb, pa, pb)))
        {
            continue;
        }
        picked.push((v, ta, tb));
        hits.push(SequentialHit { video: videos[v].clone(), t_a: ta, t_b: tb, score: scores[idx] });
    }
    Ok(hits)
}

/// Top-k frames by `p[t, A] * p[t, B]`, descending.
pub fn retrieve_cooccurring(
    videos: &[String],
    predictions: &[Matrix],
    classes: &[String],
    first: &str,
    second: &str,
    top_k: usize,
) -> Result<Vec<FrameHit>> {
    check_inputs(videos, predictions, classes)?;
    let a = class_index(classes, first)?;
    let b = class_index(classes, second)?;
    let mut frames = Vec::new();
    let mut scores = Vec::new();
    for (v, p) in predictions.iter().enumerate() {
        for t in 0..p.rows() {
            frames.push((v, t));
            scores.push(p.get(t, a) * p.get(t, b));
        }
    }
    Ok(ranking(&scores)
        .into_iter()
        .take(top_k)
        .map(|i| FrameHit { video: videos[frames[i].0].clone(), t: frames[i].1, score: scores[i] })
        .collect())
}

/// Pointwise mutual information between per-frame labels,
/// `ln[P(a∧b) / (P(a) P(b))]`, each probability estimated as
/// `(count + 1) / (frames + 1)`.
pub fn cooccurrence_matrix(labels: &[DenseLabels]) -> Result<Matrix> {
    let classes = labels.first().map_or(0, |z| z.classes());
    let frames: usize = labels.iter().map(|z| z.frames()).sum();
    if frames == 0 {
        return Err(Error::Argument("co-occurrence needs at least one labeled frame".into()));
    }
    let mut joint = Matrix::zeros(classes, classes);
    for z in labels {
        if z.classes() != classes {
            return Err(Error::Argument("videos disagree on the class count".into()));
        }
        for t in 0..z.frames() {
            let active: Vec<usize> = (0..classes).filter(|&c| z.get(t, c)).collect();
            for &i in &active {
                for &j in &active {
                    joint.set(i, j, joint.get(i, j) + 1.0);
                }
            }
        }
    }
    let n = frames as f64 + 1.0;
    let marginal: Vec<f64> = (0..classes).map(|c| (joint.get(c, c) + 1.0) / n).collect();
    let mut pmi = Matrix::zeros(classes, classes);
    for i in 0..classes {
        for j in 0..classes {
            let p = (joint.get(i, j) + 1.0) / n;
            pmi.set(i, j, (p / (marginal[i] * marginal[j])).ln());
        }
    }
    Ok(pmi)
}

pub fn write_sequential_csv(path: &Path, hits: &[SequentialHit]) -> Result<()> {
    let rows = hits
        .iter()
        .map(|h| vec![h.video.clone(), h.t_a.to_string(), h.t_b.to_string(), format!("{:.6}", h.score)]);
    write_rows(path, &["video", "t_a", "t_b", "score"], rows)
}

pub fn write_cooccurring_csv(path: &Path, hits: &[FrameHit]) -> Result<()> {
    let rows = hits
        .iter()
        .map(|h| vec![h.video.clone(), h.t.to_string(), format!("{:.6}", h.score)]);
    write_rows(path, &["video", "t", "score"], rows)
}

pub fn write_matrix_csv(path: &Path, classes: &[String], m: &Matrix) -> Result<()> {
    let mut header = vec![""];
    header.extend(classes.iter().map(String::as_str));
    let rows = classes.iter().zip(m.row_iter()).map(|(name, row)| {
        std::iter::once(name.clone())
            .chain(row.iter().map(|v| format!("{v:.6}")))
            .collect()
    });
    write_rows(path, &header, rows)
}
