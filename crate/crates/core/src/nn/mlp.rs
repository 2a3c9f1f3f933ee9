use crate::error::{Error, Result};
use crate::nn::{Activation, Matrix, SeededRng};
use crate::scalar::Scalar;

/// Affine map followed by an activation: `a = act(x · W + b)`.
///
/// `weights` is `in_dim × out_dim` so a row-major batch multiplies from the left.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<S> {
    pub weights: Matrix<S>,
    pub bias: Vec<S>,
    pub activation: Activation,
}

impl<S: Scalar> DenseLayer<S> {
    pub fn new(weights: Matrix<S>, bias: Vec<S>, activation: Activation) -> Result<Self> {
        activation.validate()?;
        if bias.len() != weights.cols() {
            return Err(Error::shape(format!(
                "bias of length {} for a layer with {} outputs",
                bias.len(),
                weights.cols()
            )));
        }
        if weights.rows() == 0 || weights.cols() == 0 {
            return Err(Error::config("layer dimensions must be positive"));
        }
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    /// Uniform initialisation: He (fan-in) for rectifiers, Xavier otherwise. Biases start at zero.
    pub fn init(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::config("layer dimensions must be positive"));
        }
        let limit = match activation {
            Activation::Relu | Activation::LeakyRelu { .. } => (6.0 / in_dim as f64).sqrt(),
            _ => (6.0 / (in_dim + out_dim) as f64).sqrt(),
        };
        let data = (0..in_dim * out_dim)
            .map(|_| S::of(rng.uniform(-limit, limit)))
            .collect();
        Self::new(
            Matrix::from_vec(in_dim, out_dim, data)?,
            vec![S::zero(); out_dim],
            activation,
        )
    }

    #[inline]
    pub fn in_dim(&self) -> usize {
        self.weights.rows()
    }

    #[inline]
    pub fn out_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn param_count(&self) -> usize {
        self.weights.as_slice().len() + self.bias.len()
    }
}

/// An ordered chain of dense layers.
#[derive(Debug, Clone)]
pub struct MlpParams<S> {
    layers: Vec<DenseLayer<S>>,
    /// Bumped on every mutable access; forward caches record it.
    revision: u64,
}

impl<S: Scalar> PartialEq for MlpParams<S> {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

impl<S: Scalar> MlpParams<S> {
    pub fn new(layers: Vec<DenseLayer<S>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::config("a network needs at least one layer"));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::config(format!(
                    "layer {i} outputs {} values but layer {} expects {}",
                    pair[0].out_dim(),
                    i + 1,
                    pair[1].in_dim()
                )));
            }
        }
        Ok(Self {
            layers,
            revision: 0,
        })
    }

    /// Builds a freshly initialised network with `dims[0]` inputs and one layer per
    /// consecutive pair of `dims`.
    pub fn init(dims: &[usize], activations: &[Activation], rng: &mut SeededRng) -> Result<Self> {
        if dims.len() < 2 || activations.len() != dims.len() - 1 {
            return Err(Error::config(format!(
                "{} dims need {} activations, got {}",
                dims.len(),
                dims.len().saturating_sub(1),
                activations.len()
            )));
        }
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(d, &act)| DenseLayer::init(d[0], d[1], act, rng))
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers)
    }

    pub fn layers(&self) -> &[DenseLayer<S>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer<S>] {
        self.revision += 1;
        &mut self.layers
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.out_dim()))
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.param_count()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.all_finite() && l.bias.iter().all(|b| b.is_finite()))
    }

    /// Flat view over every parameter (per layer: weights row-major, then bias).
    pub fn param(&self, index: usize) -> S {
        let (l, i) = self.locate(index);
        let layer = &self.layers[l];
        let nw = layer.weights.as_slice().len();
        if i < nw {
            layer.weights.as_slice()[i]
        } else {
            layer.bias[i - nw]
        }
    }

    pub fn set_param(&mut self, index: usize, value: S) {
        let (l, i) = self.locate(index);
        self.revision += 1;
        let layer = &mut self.layers[l];
        let nw = layer.weights.as_slice().len();
        if i < nw {
            layer.weights.as_mut_slice()[i] = value;
        } else {
            layer.bias[i - nw] = value;
        }
    }

    fn locate(&self, mut index: usize) -> (usize, usize) {
        for (l, layer) in self.layers.iter().enumerate() {
            let n = layer.param_count();
            if index < n {
                return (l, index);
            }
            index -= n;
        }
        panic!("parameter index out of range");
    }

    /// Runs the network and returns the final activations.
    pub fn predict(&self, input: &Matrix<S>) -> Result<Matrix<S>> {
        Ok(self.forward(input)?.into_output())
    }

    /// Runs the network, keeping every intermediate needed by [`MlpParams::backward`].
    pub fn forward(&self, input: &Matrix<S>) -> Result<ForwardCache<S>> {
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        activations.push(input.clone());
        for (i, layer) in self.layers.iter().enumerate() {
            let x = &activations[i];
            if x.cols() != layer.in_dim() {
                return Err(Error::LayerDimension {
                    layer: i,
                    expected: layer.in_dim(),
                    actual: x.cols(),
                });
            }
            let mut z = x.matmul(&layer.weights)?;
            z.add_row_vector(&layer.bias)?;
            let a = layer.activation.apply(&z);
            pre_activations.push(z);
            activations.push(a);
        }
        Ok(ForwardCache {
            activations,
            pre_activations,
            revision: self.revision,
        })
    }

    /// Backpropagates `grad` through the network recorded in `cache`.
    ///
    /// Returns parameter gradients and the gradient with respect to the network input.
    pub fn backward(
        &self,
        cache: &ForwardCache<S>,
        grad: OutputGrad<S>,
    ) -> Result<(Gradients<S>, Matrix<S>)> {
        if cache.revision != self.revision || cache.pre_activations.len() != self.layers.len() {
            return Err(Error::StaleCache(format!(
                "cache for revision {} with {} layers, params at revision {} with {} layers",
                cache.revision,
                cache.pre_activations.len(),
                self.revision,
                self.layers.len()
            )));
        }
        for (i, (layer, z)) in self.layers.iter().zip(&cache.pre_activations).enumerate() {
            if z.cols() != layer.out_dim() {
                return Err(Error::StaleCache(format!(
                    "layer {i} cached {} outputs, params have {}",
                    z.cols(),
                    layer.out_dim()
                )));
            }
        }

        let last = self.layers.len() - 1;
        let out_shape = cache.pre_activations[last].shape();
        let mut delta = match grad {
            OutputGrad::Activation(g) => {
                check_grad_shape(&g, out_shape)?;
                self.layers[last].activation.backward(
                    &cache.pre_activations[last],
                    &cache.activations[last + 1],
                    &g,
                )
            }
            OutputGrad::PreActivation(g) => {
                check_grad_shape(&g, out_shape)?;
                g
            }
        };

        let mut layer_grads = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let input = &cache.activations[i];
            let weights = input.t_matmul(&delta)?;
            let bias = delta.column_sums();
            let grad_input = delta.matmul_t(&layer.weights)?;
            layer_grads.push(LayerGrad { weights, bias });
            delta = if i > 0 {
                self.layers[i - 1].activation.backward(
                    &cache.pre_activations[i - 1],
                    &cache.activations[i],
                    &grad_input,
                )
            } else {
                grad_input
            };
        }
        layer_grads.reverse();
        Ok((
            Gradients {
                layers: layer_grads,
            },
            delta,
        ))
    }
}

fn check_grad_shape<S: Scalar>(g: &Matrix<S>, expected: (usize, usize)) -> Result<()> {
    if g.shape() != expected {
        return Err(Error::StaleCache(format!(
            "loss gradient is {}x{}, network output is {}x{}",
            g.rows(),
            g.cols(),
            expected.0,
            expected.1
        )));
    }
    Ok(())
}

/// Gradient of the loss with respect to the network output.
#[derive(Debug, Clone)]
pub enum OutputGrad<S> {
    /// With respect to the final activation.
    Activation(Matrix<S>),
    /// With respect to the final pre-activation (logits). Softmax + cross-entropy and
    /// sigmoid + log-loss heads use this form.
    PreActivation(Matrix<S>),
}

/// Intermediates from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<S> {
    /// `activations[0]` is the input; `activations[i + 1]` is the output of layer `i`.
    activations: Vec<Matrix<S>>,
    pre_activations: Vec<Matrix<S>>,
    revision: u64,
}

impl<S: Scalar> ForwardCache<S> {
    pub fn output(&self) -> &Matrix<S> {
        &self.activations[self.activations.len() - 1]
    }

    pub fn into_output(mut self) -> Matrix<S> {
        self.activations
            .pop()
            .expect("cache holds at least the input")
    }

    /// Pre-activations of the final layer.
    pub fn logits(&self) -> &Matrix<S> {
        &self.pre_activations[self.pre_activations.len() - 1]
    }

    pub fn pre_activations(&self) -> &[Matrix<S>] {
        &self.pre_activations
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad<S> {
    pub weights: Matrix<S>,
    pub bias: Vec<S>,
}

/// Per-parameter values shaped like an [`MlpParams`]; also used for Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<S> {
    pub layers: Vec<LayerGrad<S>>,
}

impl<S: Scalar> Gradients<S> {
    pub fn zeros_like(params: &MlpParams<S>) -> Self {
        Self {
            layers: params
                .layers()
                .iter()
                .map(|l| LayerGrad {
                    weights: Matrix::zeros(l.in_dim(), l.out_dim()),
                    bias: vec![S::zero(); l.out_dim()],
                })
                .collect(),
        }
    }

    pub fn matches(&self, params: &MlpParams<S>) -> bool {
        self.layers.len() == params.layers().len()
            && self.layers.iter().zip(params.layers()).all(|(g, l)| {
                g.weights.shape() == l.weights.shape() && g.bias.len() == l.bias.len()
            })
    }

    /// Flat iteration in the same order as [`MlpParams::param`].
    pub fn iter(&self) -> impl Iterator<Item = S> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.as_slice().iter().chain(&l.bias).copied())
    }

    pub fn all_finite(&self) -> bool {
        self.iter().all(|x| x.is_finite())
    }

    pub fn scale(&mut self, k: S) {
        for l in &mut self.layers {
            for x in l.weights.as_mut_slice() {
                *x *= k;
            }
            for x in &mut l.bias {
                *x *= k;
            }
        }
    }

    /// Element-wise `self += other`.
    pub fn accumulate(&mut self, other: &Self) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, &y) in a
                .weights
                .as_mut_slice()
                .iter_mut()
                .zip(b.weights.as_slice())
            {
                *x += y;
            }
            for (x, &y) in a.bias.iter_mut().zip(&b.bias) {
                *x += y;
            }
        }
    }
}
