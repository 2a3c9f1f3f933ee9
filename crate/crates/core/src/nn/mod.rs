//! Dense-network engine shared by the room classifier, the generator and the discriminator.

mod activation;
mod adam;
pub mod loss;
mod matrix;
mod mlp;
pub mod model_file;
mod rng;

pub use activation::{sigmoid, softmax_in_place, Activation};
pub use adam::{AdamConfig, AdamState};
pub use loss::{cross_entropy, softmax_cross_entropy_grad, Reduction, PROB_CLAMP};
pub use matrix::Matrix;
pub use mlp::{DenseLayer, ForwardCache, Gradients, LayerGrad, MlpParams, OutputGrad};
pub use model_file::{load_params, save_params, ModelFile};
pub use rng::{mix_seed, SeededRng};
