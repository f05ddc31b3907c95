use crate::error::{Error, Result};
use crate::numeric::Matrix;

/// Logistic function, evaluated on the branch that cannot overflow.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln σ(x)`, stable for large |x|.
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    // ln σ(x) = -ln(1 + e^{-x}) = min(x, 0) - ln(1 + e^{-|x|})
    x.min(0.0) - (-x.abs()).exp().ln_1p()
}

pub fn sigmoid_matrix(x: &Matrix) -> Matrix {
    x.map(sigmoid)
}

pub fn tanh_matrix(x: &Matrix) -> Matrix {
    x.map(f64::tanh)
}

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::Argument("softmax of an empty vector".into()));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= total);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fixed_points() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(0.0f64.tanh(), 0.0);
        let x = 1.7;
        assert!((sigmoid(-x) - (1.0 - sigmoid(x))).abs() < 1e-15);
    }

    #[test]
    fn saturates_without_overflow() {
        assert_eq!(sigmoid(1000.0), 1.0);
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert!(log_sigmoid(-800.0).is_finite());
        assert!((log_sigmoid(-800.0) + 800.0).abs() < 1e-9);
        assert!(log_sigmoid(800.0) == 0.0);
        assert!((log_sigmoid(0.0) + std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn matrix_versions_stay_in_range() {
        let m = Matrix::from_rows(&[[-30.0, -1.0, 0.0, 1.0, 30.0]]).unwrap();
        assert!(sigmoid_matrix(&m).data().iter().all(|&p| (0.0..=1.0).contains(&p)));
        assert!(tanh_matrix(&m).data().iter().all(|&p| (-1.0..=1.0).contains(&p)));
    }

    #[test]
    fn softmax_examples() {
        let u = softmax(&[0.0, 0.0, 0.0]).unwrap();
        assert!(u.iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-15));
        let u = softmax(&[42.5; 4]).unwrap();
        assert!(u.iter().all(|p| (p - 0.25).abs() < 1e-15));
        let p = softmax(&[1f64.ln(), 2f64.ln(), 3f64.ln()]).unwrap();
        for (got, want) in p.iter().zip([1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert!(softmax(&[]).is_err());
    }

    proptest! {
        #[test]
        fn softmax_is_a_shift_invariant_distribution(
            logits in prop::collection::vec(-50.0f64..50.0, 1..20),
            shift in -100.0f64..100.0,
        ) {
            let p = softmax(&logits).unwrap();
            prop_assert!(p.iter().all(|&x| x >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let shifted: Vec<f64> = logits.iter().map(|l| l + shift).collect();
            let q = softmax(&shifted).unwrap();
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
