use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::scalar::Scalar;

/// Element-wise (or, for softmax, row-wise) nonlinearity applied after a dense layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    Relu,
    LeakyRelu { alpha: f64 },
    Sigmoid,
    Tanh,
    Softmax,
    Identity,
}

impl Activation {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Activation::LeakyRelu { alpha } if !(alpha > 0.0 && alpha < 1.0) => Err(Error::config(
                format!("leaky relu alpha must lie in (0, 1), got {alpha}"),
            )),
            _ => Ok(()),
        }
    }

    /// Short tag used in CSV and config files.
    pub fn tag(&self) -> String {
        match *self {
            Activation::Relu => "relu".into(),
            Activation::LeakyRelu { alpha } => format!("leaky_relu({alpha})"),
            Activation::Sigmoid => "sigmoid".into(),
            Activation::Tanh => "tanh".into(),
            Activation::Softmax => "softmax".into(),
            Activation::Identity => "identity".into(),
        }
    }

    pub fn apply<S: Scalar>(&self, z: &Matrix<S>) -> Matrix<S> {
        match *self {
            Activation::Relu => z.map(|x| x.max(S::zero())),
            Activation::LeakyRelu { alpha } => {
                let a = S::of(alpha);
                z.map(|x| if x > S::zero() { x } else { a * x })
            }
            Activation::Sigmoid => z.map(sigmoid),
            Activation::Tanh => z.map(|x| x.tanh()),
            Activation::Identity => z.clone(),
            Activation::Softmax => {
                let mut out = z.clone();
                for r in 0..out.rows() {
                    softmax_in_place(out.row_mut(r));
                }
                out
            }
        }
    }

    /// Maps the gradient with respect to the activation output back to the pre-activation.
    ///
    /// `z` is the pre-activation and `a = self.apply(z)`.
    pub fn backward<S: Scalar>(
        &self,
        z: &Matrix<S>,
        a: &Matrix<S>,
        grad_a: &Matrix<S>,
    ) -> Matrix<S> {
        let one = S::one();
        let zero = S::zero();
        let mut out = grad_a.clone();
        match *self {
            Activation::Identity => {}
            Activation::Relu => {
                for (g, &x) in out.as_mut_slice().iter_mut().zip(z.as_slice()) {
                    if x <= zero {
                        *g = zero;
                    }
                }
            }
            Activation::LeakyRelu { alpha } => {
                let alpha = S::of(alpha);
                for (g, &x) in out.as_mut_slice().iter_mut().zip(z.as_slice()) {
                    if x <= zero {
                        *g *= alpha;
                    }
                }
            }
            Activation::Sigmoid => {
                for (g, &y) in out.as_mut_slice().iter_mut().zip(a.as_slice()) {
                    *g *= y * (one - y);
                }
            }
            Activation::Tanh => {
                for (g, &y) in out.as_mut_slice().iter_mut().zip(a.as_slice()) {
                    *g *= one - y * y;
                }
            }
            Activation::Softmax => {
                for r in 0..out.rows() {
                    let y = a.row(r);
                    let dot: S = grad_a.row(r).iter().zip(y).map(|(&g, &p)| g * p).sum();
                    for (g, &p) in out.row_mut(r).iter_mut().zip(y) {
                        *g = p * (*g - dot);
                    }
                }
            }
        }
        out
    }
}

#[inline]
pub fn sigmoid<S: Scalar>(x: S) -> S {
    let one = S::one();
    if x >= S::zero() {
        one / (one + (-x).exp())
    } else {
        let e = x.exp();
        e / (one + e)
    }
}

pub fn softmax_in_place<S: Scalar>(row: &mut [S]) {
    let max = row.iter().copied().fold(S::neg_infinity(), S::max);
    let mut sum = S::zero();
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in row.iter_mut() {
        *x /= sum;
    }
}
