use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One annotated action: frames `start..end` (end-exclusive) of class `class`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LabelInterval {
    pub class: usize,
    pub start: usize,
    pub end: usize,
}

impl LabelInterval {
    pub fn new(class: usize, start: usize, end: usize) -> Self {
        LabelInterval { class, start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self, frames: usize, classes: usize) -> Result<()> {
        if self.class >= classes || self.start >= self.end || self.end > frames {
            return Err(Error::Validation(format!(
                "interval (class {}, {}..{}) is out of bounds for {frames} frames and {classes} classes",
                self.class, self.start, self.end
            )));
        }
        Ok(())
    }
}

/// Binary frames x classes ground truth. Several classes may be active in a frame.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DenseLabels {
    frames: usize,
    classes: usize,
    data: Vec<bool>,
}

impl DenseLabels {
    pub fn zeros(frames: usize, classes: usize) -> Self {
        DenseLabels {
            frames,
            classes,
            data: vec![false; frames * classes],
        }
    }

    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let classes = rows.first().map_or(0, |r| r.as_ref().len());
        let mut out = DenseLabels::zeros(rows.len(), classes);
        for (t, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != classes {
                return Err(Error::Argument(format!("label row {t} has {} entries, expected {classes}", row.len())));
            }
            for (c, &v) in row.iter().enumerate() {
                match v {
                    0 => {}
                    1 => out.set(t, c, true),
                    other => return Err(Error::Validation(format!("label value {other} is not binary"))),
                }
            }
        }
        Ok(out)
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    #[inline]
    pub fn get(&self, t: usize, c: usize) -> bool {
        self.data[t * self.classes + c]
    }

    #[inline]
    pub fn set(&mut self, t: usize, c: usize, value: bool) {
        self.data[t * self.classes + c] = value;
    }

    pub fn row(&self, t: usize) -> &[bool] {
        &self.data[t * self.classes..(t + 1) * self.classes]
    }

    /// Column `c` as a frame-indexed vector.
    pub fn column(&self, c: usize) -> Vec<bool> {
        (0..self.frames).map(|t| self.get(t, c)).collect()
    }

    pub fn count_active(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn active_in_frame(&self, t: usize) -> usize {
        self.row(t).iter().filter(|&&b| b).count()
    }

    /// Maximal runs of positive frames for class `c`, as intervals.
    pub fn runs(&self, c: usize) -> Vec<LabelInterval> {
        let mut runs = Vec::new();
        let mut start = None;
        for t in 0..self.frames {
            match (self.get(t, c), start) {
                (true, None) => start = Some(t),
                (false, Some(s)) => {
                    runs.push(LabelInterval::new(c, s, t));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            runs.push(LabelInterval::new(c, s, self.frames));
        }
        runs
    }
}

/// Rasterizes intervals into a frames x classes binary matrix.
pub fn rasterize(intervals: &[LabelInterval], frames: usize, classes: usize) -> Result<DenseLabels> {
    let mut labels = DenseLabels::zeros(frames, classes);
    for iv in intervals {
        iv.validate(frames, classes)?;
        for t in iv.start..iv.end {
            labels.set(t, iv.class, true);
        }
    }
    Ok(labels)
}

/// Merges overlapping or abutting intervals per class. Output sorted by (class, start).
pub fn merge_intervals(intervals: &[LabelInterval]) -> Vec<LabelInterval> {
    let mut sorted = intervals.to_vec();
    sorted.sort();
    let mut merged: Vec<LabelInterval> = Vec::with_capacity(sorted.len());
    for iv in sorted {
        match merged.last_mut() {
            Some(last) if last.class == iv.class && iv.start <= last.end => {
                last.end = last.end.max(iv.end);
            }
            _ => merged.push(iv),
        }
    }
    merged
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_is_all_zero() {
        let z = rasterize(&[], 5, 3).unwrap();
        assert_eq!(z.count_active(), 0);
        assert_eq!((z.frames(), z.classes()), (5, 3));
    }

    #[test]
    fn single_interval() {
        let z = rasterize(&[LabelInterval::new(2, 3, 6)], 8, 3).unwrap();
        assert_eq!(z.count_active(), 3);
        for t in 0..8 {
            assert_eq!(z.get(t, 2), (3..6).contains(&t));
        }
    }

    #[test]
    fn duplicates_are_idempotent() {
        let iv = LabelInterval::new(1, 2, 7);
        assert_eq!(rasterize(&[iv, iv], 9, 2).unwrap(), rasterize(&[iv], 9, 2).unwrap());
    }

    #[test]
    fn out_of_bounds_names_the_interval() {
        let err = rasterize(&[LabelInterval::new(0, 4, 12)], 10, 1).unwrap_err();
        assert!(err.to_string().contains("4..12"), "{err}");
        assert!(rasterize(&[LabelInterval::new(3, 0, 1)], 10, 3).is_err());
        assert!(rasterize(&[LabelInterval::new(0, 5, 5)], 10, 3).is_err());
    }

    #[test]
    fn abutting_intervals_form_one_run() {
        let z = rasterize(&[LabelInterval::new(0, 0, 5), LabelInterval::new(0, 5, 9)], 12, 1).unwrap();
        assert_eq!(z.runs(0), vec![LabelInterval::new(0, 0, 9)]);
        let merged = merge_intervals(&[LabelInterval::new(0, 5, 9), LabelInterval::new(0, 0, 5)]);
        assert_eq!(merged, vec![LabelInterval::new(0, 0, 9)]);
    }

    proptest! {
        #[test]
        fn coverage_matches_merged_lengths(raw in prop::collection::vec((0usize..3, 0usize..40, 1usize..10), 0..12)) {
            let frames = 50;
            let intervals: Vec<_> = raw.iter().map(|&(c, s, l)| LabelInterval::new(c, s, (s + l).min(frames))).collect();
            let z = rasterize(&intervals, frames, 3).unwrap();
            let covered: usize = merge_intervals(&intervals).iter().map(|iv| iv.len()).sum();
            prop_assert_eq!(z.count_active(), covered);
            let runs: Vec<_> = (0..3).flat_map(|c| z.runs(c)).collect();
            prop_assert_eq!(runs, merge_intervals(&intervals));
        }
    }
}
