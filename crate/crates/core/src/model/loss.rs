use crate::data::DenseLabels;
use crate::error::{Error, Result};
use crate::numeric::{log_sigmoid, sigmoid, Matrix};

/// Negated sum of per-class logistic log-likelihoods over unmasked frames.
///
/// `mask[t] == true` means frame `t` contributes. Returns the loss and
/// `dL/dscores` (`σ(y) - z` on unmasked rows, zero elsewhere).
pub fn multilabel_loss(scores: &Matrix, labels: &DenseLabels, mask: &[bool]) -> Result<(f64, Matrix)> {
    if scores.shape() != (labels.frames(), labels.classes()) {
        return Err(Error::shape(
            "multilabel_loss",
            scores.shape(),
            (labels.frames(), labels.classes()),
        ));
    }
    if mask.len() != scores.rows() {
        return Err(Error::shape("multilabel_loss", scores.shape(), (mask.len(), 1)));
    }
    let mut loss = 0.0;
    let mut grad = Matrix::zeros(scores.rows(), scores.cols());
    for (t, &keep) in mask.iter().enumerate() {
        if !keep {
            continue;
        }
        for c in 0..scores.cols() {
            let y = scores.get(t, c);
            let z = labels.get(t, c);
            // -ln σ(y) if positive, -ln(1-σ(y)) = -ln σ(-y) otherwise
            loss -= if z { log_sigmoid(y) } else { log_sigmoid(-y) };
            grad.set(t, c, sigmoid(y) - if z { 1.0 } else { 0.0 });
        }
    }
    Ok((loss, grad))
}

/// Labels shifted by `offset` frames: row `t` holds the labels of frame
/// `t + offset`. Rows whose source frame falls outside the sequence are
/// zeroed and masked out (`false`).
pub fn shift_labels(labels: &DenseLabels, offset: i64) -> Result<(DenseLabels, Vec<bool>)> {
    let frames = labels.frames() as i64;
    if offset.abs() >= frames {
        return Err(Error::Argument(format!(
            "offset {offset} must be smaller in magnitude than the sequence length {frames}"
        )));
    }
    let mut shifted = DenseLabels::zeros(labels.frames(), labels.classes());
    let mut mask = vec![false; labels.frames()];
    for t in 0..frames {
        let src = t + offset;
        if (0..frames).contains(&src) {
            mask[t as usize] = true;
            for c in 0..labels.classes() {
                shifted.set(t as usize, c, labels.get(src as usize, c));
            }
        }
    }
    Ok((shifted, mask))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{rasterize, LabelInterval};

    #[test]
    fn zero_scores_cost_ln2_per_term() {
        let z = rasterize(&[LabelInterval::new(1, 0, 3)], 5, 3).unwrap();
        let mask = [true, false, true, true, false];
        let (loss, _) = multilabel_loss(&Matrix::zeros(5, 3), &z, &mask).unwrap();
        assert!((loss - 9.0 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn saturated_correct_scores_cost_nothing() {
        let z = DenseLabels::from_rows(&[[1u8, 0]]).unwrap();
        let scores = Matrix::from_rows(&[[50.0, -50.0]]).unwrap();
        let (loss, _) = multilabel_loss(&scores, &z, &[true]).unwrap();
        assert!(loss < 1e-20 * 2.0);
        let (single, _) = multilabel_loss(&Matrix::from_rows(&[[50.0]]).unwrap(), &DenseLabels::from_rows(&[[1u8]]).unwrap(), &[true]).unwrap();
        assert!(single < 1e-20);
    }

    #[test]
    fn stable_at_extreme_scores() {
        let z = DenseLabels::from_rows(&[[1u8, 0]]).unwrap();
        let scores = Matrix::from_rows(&[[-500.0, 500.0]]).unwrap();
        let (loss, grad) = multilabel_loss(&scores, &z, &[true]).unwrap();
        assert!((loss - 1000.0).abs() < 1e-9);
        assert_eq!(grad.data(), &[-1.0, 1.0]);
    }

    #[test]
    fn gradient_is_sigma_minus_label() {
        let z = DenseLabels::from_rows(&[[1u8, 0], [1, 1]]).unwrap();
        let (_, grad) = multilabel_loss(&Matrix::zeros(2, 2), &z, &[true, false]).unwrap();
        assert_eq!(grad.row(0), &[-0.5, 0.5]);
        assert_eq!(grad.row(1), &[0.0, 0.0]);
    }

    #[test]
    fn loss_shape_errors() {
        let z = DenseLabels::zeros(3, 2);
        assert!(matches!(multilabel_loss(&Matrix::zeros(3, 3), &z, &[true; 3]), Err(Error::Shape { .. })));
        assert!(multilabel_loss(&Matrix::zeros(3, 2), &z, &[true; 2]).is_err());
    }

    #[test]
    fn shifting() {
        let z = rasterize(&[LabelInterval::new(0, 4, 6)], 10, 1).unwrap();
        let (same, mask) = shift_labels(&z, 0).unwrap();
        assert_eq!(same, z);
        assert!(mask.iter().all(|&m| m));

        let (fwd, mask) = shift_labels(&z, 2).unwrap();
        assert_eq!(mask.iter().filter(|&&m| !m).count(), 2);
        assert!(!mask[8] && !mask[9]);
        assert_eq!(fwd.column(0), (0..10).map(|t| t == 2 || t == 3).collect::<Vec<_>>());

        let (back, mask) = shift_labels(&z, -1).unwrap();
        assert!(!mask[0] && mask[1..].iter().all(|&m| m));
        assert_eq!(back.column(0), (0..10).map(|t| t == 5 || t == 6).collect::<Vec<_>>());

        assert!(shift_labels(&z, 10).is_err());
        assert!(shift_labels(&z, -10).is_err());
    }
}
