use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Gradients, MlpParams};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.learning_rate.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!(
                "invalid adam hyperparameters {self:?}"
            )))
        }
    }
}

/// Bias-corrected first/second moment estimates for one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<S> {
    pub config: AdamConfig,
    m: Gradients<S>,
    v: Gradients<S>,
    t: u64,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(params: &MlpParams<S>, config: AdamConfig) -> Self {
        Self {
            config,
            m: Gradients::zeros_like(params),
            v: Gradients::zeros_like(params),
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn first_moments(&self) -> &Gradients<S> {
        &self.m
    }

    pub fn second_moments(&self) -> &Gradients<S> {
        &self.v
    }

    /// One Adam update of `params` along `grads` (descent direction).
    ///
    /// Rejects non-finite gradients before touching either `params` or the moments.
    pub fn step(&mut self, params: &mut MlpParams<S>, grads: &Gradients<S>) -> Result<()> {
        if !grads.matches(params) || !self.m.matches(params) {
            return Err(Error::shape(
                "gradient/moment shapes do not mirror the parameters",
            ));
        }
        if !grads.all_finite() {
            return Err(Error::Training(format!(
                "non-finite gradient at adam step {}",
                self.t + 1
            )));
        }

        self.t += 1;
        let c = self.config;
        let b1 = S::of(c.beta1);
        let b2 = S::of(c.beta2);
        let one = S::one();
        let lr = S::of(c.learning_rate);
        let eps = S::of(c.epsilon);
        let t = i32::try_from(self.t).unwrap_or(i32::MAX);
        let bc1 = one - b1.powi(t);
        let bc2 = one - b2.powi(t);

        let update = |theta: &mut S, g: S, m: &mut S, v: &mut S| {
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *theta -= lr * m_hat / (v_hat.sqrt() + eps);
        };

        for (((layer, g), m), v) in params
            .layers_mut()
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.m.layers)
            .zip(&mut self.v.layers)
        {
            for (((w, &gw), mw), vw) in layer
                .weights
                .as_mut_slice()
                .iter_mut()
                .zip(g.weights.as_slice())
                .zip(m.weights.as_mut_slice())
                .zip(v.weights.as_mut_slice())
            {
                update(w, gw, mw, vw);
            }
            for (((b, &gb), mb), vb) in layer
                .bias
                .iter_mut()
                .zip(&g.bias)
                .zip(&mut m.bias)
                .zip(&mut v.bias)
            {
                update(b, gb, mb, vb);
            }
        }

        if !params.all_finite() {
            return Err(Error::Training(format!(
                "parameters became non-finite at adam step {}",
                self.t
            )));
        }
        Ok(())
    }
}
