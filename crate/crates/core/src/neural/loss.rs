use super::tape::bce_value;
use super::tensor::Tensor;
use crate::scalar::Scalar;
use crate::{Error, Result};

pub use super::tape::BCE_EPSILON;

/// Mean binary cross-entropy with predictions clamped to `[ε, 1 − ε]`.
pub fn bce_loss<T: Scalar>(pred: &Tensor<T>, target: &[T]) -> Result<T> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::Shape {
            op: "bce_loss",
            left: pred.shape(),
            right: [1, target.len()],
        });
    }
    Ok(bce_value(pred.data(), target))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_against_one_is_ln2() {
        let l = bce_loss(&Tensor::scalar(0.5), &[1.0]).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn exact_predictions_are_clamped() {
        let l: f64 = bce_loss(&Tensor::row_vector(vec![1.0, 0.0]), &[1.0, 0.0]).unwrap();
        assert!(l.is_finite());
        assert!(l <= -(1.0 - BCE_EPSILON).ln() + 1e-15);
    }
}
