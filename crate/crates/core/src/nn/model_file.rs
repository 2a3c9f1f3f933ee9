//! Versioned JSON model format.
//!
//! ```json
//! {
//!   "format": "rss-mlp",
//!   "version": 1,
//!   "scalar": "f64",
//!   "layers": [
//!     {
//!       "in_dim": 7,
//!       "out_dim": 64,
//!       "activation": { "kind": "relu" },
//!       "weights": [ ... in_dim * out_dim values, row-major (input index major) ... ],
//!       "bias": [ ... out_dim values ... ]
//!     }
//!   ]
//! }
//! ```
//!
//! Values are stored as JSON numbers in shortest round-trip form, so `f64` parameters reload
//! bit-exactly. `activation.kind` is one of `relu`, `leaky_relu` (with `alpha`), `sigmoid`,
//! `tanh`, `softmax`, `identity`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, DenseLayer, Matrix, MlpParams};
use crate::scalar::Scalar;

pub const MODEL_FORMAT: &str = "rss-mlp";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub scalar: String,
    pub layers: Vec<LayerRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerRecord {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ModelFile {
    pub fn from_params<S: Scalar>(params: &MlpParams<S>) -> Self {
        Self {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            scalar: S::NAME.into(),
            layers: params
                .layers()
                .iter()
                .map(|l| LayerRecord {
                    in_dim: l.in_dim(),
                    out_dim: l.out_dim(),
                    activation: l.activation,
                    weights: l
                        .weights
                        .as_slice()
                        .iter()
                        .map(|x| x.to_f64_lossy())
                        .collect(),
                    bias: l.bias.iter().map(|x| x.to_f64_lossy()).collect(),
                })
                .collect(),
        }
    }

    pub fn to_params<S: Scalar>(&self) -> Result<MlpParams<S>> {
        if self.format != MODEL_FORMAT {
            return Err(Error::ModelFormat(format!(
                "unknown format tag {:?}",
                self.format
            )));
        }
        if self.version != MODEL_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported version {} (expected {MODEL_VERSION})",
                self.version
            )));
        }
        let layers = self
            .layers
            .iter()
            .enumerate()
            .map(|(i, r)| {
                if r.weights.len() != r.in_dim * r.out_dim || r.bias.len() != r.out_dim {
                    return Err(Error::ModelFormat(format!(
                        "layer {i}: {} weights / {} biases for {}x{}",
                        r.weights.len(),
                        r.bias.len(),
                        r.in_dim,
                        r.out_dim
                    )));
                }
                let w = Matrix::from_vec(
                    r.in_dim,
                    r.out_dim,
                    r.weights.iter().map(|&x| S::of(x)).collect(),
                )?;
                DenseLayer::new(w, r.bias.iter().map(|&x| S::of(x)).collect(), r.activation)
            })
            .collect::<Result<Vec<_>>>()?;
        let params = MlpParams::new(layers)?;
        if !params.all_finite() {
            return Err(Error::ModelFormat("non-finite parameter".into()));
        }
        Ok(params)
    }
}

pub fn save_params<S: Scalar>(params: &MlpParams<S>, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(&ModelFile::from_params(params))?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn load_params<S: Scalar>(path: &Path) -> Result<MlpParams<S>> {
    let text = std::fs::read_to_string(path)?;
    let file: ModelFile = serde_json::from_str(&text)?;
    file.to_params()
}
