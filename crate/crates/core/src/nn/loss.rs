//! Log-likelihood losses.
//!
//! Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before taking logs. Logs are
//! natural.

use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::scalar::Scalar;

pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    Sum,
    Mean,
}

#[inline]
fn clamp_prob<S: Scalar>(p: S) -> S {
    let lo = S::of(PROB_CLAMP);
    let hi = S::one() - lo;
    p.max(lo).min(hi)
}

fn check_prob<S: Scalar>(p: S) -> Result<()> {
    if !(p >= S::zero() && p <= S::one()) {
        return Err(Error::Probability {
            value: p.to_f64_lossy(),
        });
    }
    Ok(())
}

fn check_one_hot<S: Scalar>(labels: &Matrix<S>) -> Result<()> {
    for (i, row) in labels.iter_rows().enumerate() {
        let ones = row.iter().filter(|&&y| y == S::one()).count();
        let zeros = row.iter().filter(|&&y| y == S::zero()).count();
        if ones != 1 || ones + zeros != row.len() {
            return Err(Error::shape(format!("label row {i} is not one-hot")));
        }
    }
    Ok(())
}

/// `-Σ_i y_i · log(ŷ_i)ᵀ` over the batch, summed or averaged over rows.
pub fn cross_entropy<S: Scalar>(
    predicted: &Matrix<S>,
    labels: &Matrix<S>,
    reduction: Reduction,
) -> Result<S> {
    if predicted.shape() != labels.shape() {
        return Err(Error::shape(format!(
            "predictions {}x{} vs labels {}x{}",
            predicted.rows(),
            predicted.cols(),
            labels.rows(),
            labels.cols()
        )));
    }
    check_one_hot(labels)?;
    let mut total = S::zero();
    for (p_row, y_row) in predicted.iter_rows().zip(labels.iter_rows()) {
        for (&p, &y) in p_row.iter().zip(y_row) {
            check_prob(p)?;
            if y != S::zero() {
                total -= y * clamp_prob(p).ln();
            }
        }
    }
    Ok(match reduction {
        Reduction::Sum => total,
        Reduction::Mean if predicted.rows() > 0 => total / S::of(predicted.rows() as f64),
        Reduction::Mean => S::zero(),
    })
}

/// Gradient of softmax + cross-entropy with respect to the logits: `ŷ − y`, divided by the
/// batch size under [`Reduction::Mean`].
pub fn softmax_cross_entropy_grad<S: Scalar>(
    probs: &Matrix<S>,
    labels: &Matrix<S>,
    reduction: Reduction,
) -> Result<Matrix<S>> {
    let mut g = probs.sub(labels)?;
    if reduction == Reduction::Mean && probs.rows() > 0 {
        g = g.scale(S::one() / S::of(probs.rows() as f64));
    }
    Ok(g)
}

/// Mean of `log p` over every entry.
pub fn mean_log<S: Scalar>(probs: &Matrix<S>) -> Result<S> {
    mean_clamped(probs, |p| p.ln())
}

/// Mean of `log(1 − p)` over every entry.
pub fn mean_log_complement<S: Scalar>(probs: &Matrix<S>) -> Result<S> {
    mean_clamped(probs, |p| (S::one() - p).ln())
}

fn mean_clamped<S: Scalar>(probs: &Matrix<S>, f: impl Fn(S) -> S) -> Result<S> {
    if probs.is_empty() {
        return Err(Error::shape("empty probability batch"));
    }
    let mut total = S::zero();
    for &p in probs.as_slice() {
        check_prob(p)?;
        total += f(clamp_prob(p));
    }
    Ok(total / S::of(probs.as_slice().len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, v: &[f64]) -> Matrix<f64> {
        Matrix::from_vec(rows, cols, v.to_vec()).unwrap()
    }

    #[test]
    fn uniform_over_four_classes() {
        let p = Matrix::filled(1, 4, 0.25);
        let y = m(1, 4, &[0., 1., 0., 0.]);
        let l = cross_entropy(&p, &y, Reduction::Sum).unwrap();
        assert!((l - 4f64.ln()).abs() < 1e-12);
        assert!((l - 1.3863).abs() < 1e-4);

        let p2 = Matrix::filled(2, 4, 0.25);
        let y2 = m(2, 4, &[1., 0., 0., 0., 0., 0., 0., 1.]);
        let l2 = cross_entropy(&p2, &y2, Reduction::Sum).unwrap();
        assert!((l2 - 2.7726).abs() < 1e-4);
        let mean = cross_entropy(&p2, &y2, Reduction::Mean).unwrap();
        assert!((mean - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn perfect_prediction_is_clamp_limited() {
        let y = m(3, 2, &[1., 0., 0., 1., 1., 0.]);
        let l = cross_entropy(&y, &y, Reduction::Sum).unwrap();
        assert!(l >= 0.0);
        assert!(l <= 3.0 * (1.0 - PROB_CLAMP).ln().abs() + 1e-18);
    }

    #[test]
    fn out_of_range_probability_rejected() {
        let p = m(1, 2, &[1.2, -0.2]);
        let y = m(1, 2, &[1., 0.]);
        assert!(matches!(
            cross_entropy(&p, &y, Reduction::Sum),
            Err(Error::Probability { .. })
        ));
        let nan = m(1, 2, &[f64::NAN, 0.5]);
        assert!(cross_entropy(&nan, &y, Reduction::Sum).is_err());
    }

    #[test]
    fn non_one_hot_labels_rejected() {
        let p = Matrix::filled(1, 3, 1.0 / 3.0);
        assert!(cross_entropy(&p, &m(1, 3, &[1., 1., 0.]), Reduction::Sum).is_err());
        assert!(cross_entropy(&p, &m(1, 3, &[0.5, 0.5, 0.]), Reduction::Sum).is_err());
    }

    #[test]
    fn softmax_ce_grad_vanishes_at_target() {
        let y = m(2, 3, &[0., 1., 0., 1., 0., 0.]);
        let g = softmax_cross_entropy_grad(&y, &y, Reduction::Sum).unwrap();
        assert!(g.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn binary_means_at_one_half() {
        let p = Matrix::filled(5, 1, 0.5);
        assert_eq!(mean_log(&p).unwrap(), 0.5f64.ln());
        assert_eq!(mean_log_complement(&p).unwrap(), 0.5f64.ln());
    }
}
