//! Per-class GAN: a generator maps standard-normal latent vectors to standardized fingerprints,
//! a discriminator scores real against generated rows.
//!
//! Objectives, with `D` the sigmoid output of the discriminator:
//!
//! - discriminator (maximised): `mean log D(x) + mean log(1 − D(G(z)))`
//! - generator (minimised), saturating form: `mean log(1 − D(G(z)))`
//! - generator, non-saturating alternative: `−mean log D(G(z))`
//!
//! Each training iteration takes `disc_steps` Adam steps on the discriminator objective, then one
//! Adam step on the generator. Training runs for a fixed number of iterations; the trace records
//! the mean discriminator outputs so the D ≈ 1/2 equilibrium can be inspected afterwards.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{render_samples, ClassMatrix, Dataset, RssSample, Standardizer};
use crate::error::{Error, Result};
use crate::nn::{
    loss, mix_seed, Activation, AdamConfig, AdamState, Gradients, Matrix, MlpParams, ModelFile,
    OutputGrad, SeededRng,
};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossVariant {
    /// Minimise `log(1 − D(G(z)))`.
    Saturating,
    /// Maximise `log D(G(z))` instead. Extension; stronger gradients early in training.
    NonSaturating,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GanConfig {
    pub latent_dim: usize,
    /// Hidden widths of the generator; input is `latent_dim`, output the feature count.
    pub generator_hidden: Vec<usize>,
    /// Hidden widths of the discriminator; input is the feature count, output a single sigmoid.
    pub discriminator_hidden: Vec<usize>,
    pub leaky_alpha: f64,
    pub disc_steps: usize,
    pub iterations: usize,
    pub batch_size: usize,
    pub generator_adam: AdamConfig,
    pub discriminator_adam: AdamConfig,
    pub seed: u64,
    pub loss_variant: LossVariant,
}

impl Default for GanConfig {
    fn default() -> Self {
        Self {
            latent_dim: 16,
            generator_hidden: vec![32, 32],
            discriminator_hidden: vec![32, 16],
            leaky_alpha: 0.2,
            disc_steps: 1,
            iterations: 3000,
            batch_size: 32,
            generator_adam: AdamConfig::default(),
            discriminator_adam: AdamConfig::default(),
            seed: 0,
            loss_variant: LossVariant::Saturating,
        }
    }
}

impl GanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 {
            return Err(Error::config("latent_dim must be positive"));
        }
        if self.disc_steps == 0 {
            return Err(Error::config("disc_steps must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("GAN batch_size must be positive"));
        }
        if self.generator_hidden.contains(&0) || self.discriminator_hidden.contains(&0) {
            return Err(Error::config("hidden widths must be positive"));
        }
        Activation::LeakyRelu {
            alpha: self.leaky_alpha,
        }
        .validate()?;
        self.generator_adam.validate()?;
        self.discriminator_adam.validate()
    }

    fn hidden_activation(&self) -> Activation {
        Activation::LeakyRelu {
            alpha: self.leaky_alpha,
        }
    }

    pub fn init_generator<S: Scalar>(
        &self,
        features: usize,
        rng: &mut SeededRng,
    ) -> Result<MlpParams<S>> {
        let mut dims = vec![self.latent_dim];
        dims.extend(&self.generator_hidden);
        dims.push(features);
        let mut acts = vec![self.hidden_activation(); self.generator_hidden.len()];
        acts.push(Activation::Identity);
        MlpParams::init(&dims, &acts, rng)
    }

    pub fn init_discriminator<S: Scalar>(
        &self,
        features: usize,
        rng: &mut SeededRng,
    ) -> Result<MlpParams<S>> {
        let mut dims = vec![features];
        dims.extend(&self.discriminator_hidden);
        dims.push(1);
        let mut acts = vec![self.hidden_activation(); self.discriminator_hidden.len()];
        acts.push(Activation::Sigmoid);
        MlpParams::init(&dims, &acts, rng)
    }
}

/// One row of the training trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    /// Discriminator objective at its last step of the iteration.
    pub disc_loss: f64,
    /// Saturating generator objective at the generator step.
    pub gen_loss: f64,
    pub mean_d_real: f64,
    pub mean_d_fake: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GanModel<S: Scalar> {
    pub class_id: usize,
    pub theta_g: MlpParams<S>,
    pub theta_d: MlpParams<S>,
    pub trace: Vec<TraceRow>,
}

impl<S: Scalar> GanModel<S> {
    pub fn latent_dim(&self) -> usize {
        self.theta_g.input_dim()
    }

    pub fn feature_count(&self) -> usize {
        self.theta_g.output_dim()
    }

    /// Mean of `D(real)` over the last `fraction` of the trace.
    pub fn tail_mean_d_real(&self, fraction: f64) -> Option<f64> {
        let n = ((self.trace.len() as f64 * fraction).ceil() as usize).min(self.trace.len());
        if n == 0 {
            return None;
        }
        let tail = &self.trace[self.trace.len() - n..];
        Some(tail.iter().map(|r| r.mean_d_real).sum::<f64>() / n as f64)
    }
}

/// Generated rows for one class, in standardized feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticBlock<S> {
    pub class_id: usize,
    pub values: Matrix<S>,
}

fn discriminate<S: Scalar>(theta_d: &MlpParams<S>, x: &Matrix<S>) -> Result<Matrix<S>> {
    if theta_d.output_dim() != 1 {
        return Err(Error::config("discriminator must have a single output"));
    }
    theta_d.predict(x)
}

/// Discriminator objective `mean log D(real) + mean log(1 − D(fake))`. Always `≤ 0`.
pub fn disc_loss<S: Scalar>(
    theta_d: &MlpParams<S>,
    real_batch: &Matrix<S>,
    fake_batch: &Matrix<S>,
) -> Result<S> {
    let d_real = discriminate(theta_d, real_batch)?;
    let d_fake = discriminate(theta_d, fake_batch)?;
    Ok(loss::mean_log(&d_real)? + loss::mean_log_complement(&d_fake)?)
}

/// Saturating generator objective `mean log(1 − D(G(z)))`.
pub fn gen_loss<S: Scalar>(
    theta_g: &MlpParams<S>,
    theta_d: &MlpParams<S>,
    z_batch: &Matrix<S>,
) -> Result<S> {
    let fake = theta_g.predict(z_batch)?;
    loss::mean_log_complement(&discriminate(theta_d, &fake)?)
}

/// Value and gradient of the generator objective for `variant`
/// (`Saturating`: `mean log(1 − D(G(z)))`; `NonSaturating`: `−mean log D(G(z))`).
pub fn generator_objective<S: Scalar>(
    theta_g: &MlpParams<S>,
    theta_d: &MlpParams<S>,
    z_batch: &Matrix<S>,
    variant: LossVariant,
) -> Result<(S, Gradients<S>)> {
    let g_cache = theta_g.forward(z_batch)?;
    let d_cache = theta_d.forward(g_cache.output())?;
    let d = d_cache.output();
    if d.cols() != 1 {
        return Err(Error::config("discriminator must have a single output"));
    }
    let n = S::of(d.rows() as f64);
    // d/da log(1 − σ(a)) = −σ(a);  d/da −log σ(a) = σ(a) − 1
    let (value, logit_grad) = match variant {
        LossVariant::Saturating => (loss::mean_log_complement(d)?, d.map(|p| -p / n)),
        LossVariant::NonSaturating => (-loss::mean_log(d)?, d.map(|p| (p - S::one()) / n)),
    };
    let (_, grad_fake) = theta_d.backward(&d_cache, OutputGrad::PreActivation(logit_grad))?;
    let (grads, _) = theta_g.backward(&g_cache, OutputGrad::Activation(grad_fake))?;
    Ok((value, grads))
}

/// Value and gradient (ascent direction) of [`disc_loss`], plus the mean discriminator outputs
/// on the real and fake rows.
pub fn discriminator_objective<S: Scalar>(
    theta_d: &MlpParams<S>,
    real_batch: &Matrix<S>,
    fake_batch: &Matrix<S>,
) -> Result<(S, Gradients<S>, S, S)> {
    let both = real_batch.vstack(fake_batch)?;
    let cache = theta_d.forward(&both)?;
    let d = cache.output();
    if d.cols() != 1 {
        return Err(Error::config("discriminator must have a single output"));
    }
    let n_real = real_batch.rows();
    let n_fake = fake_batch.rows();
    if n_real == 0 || n_fake == 0 {
        return Err(Error::shape("discriminator batches must be non-empty"));
    }
    let d_real = Matrix::from_vec(n_real, 1, d.as_slice()[..n_real].to_vec())?;
    let d_fake = Matrix::from_vec(n_fake, 1, d.as_slice()[n_real..].to_vec())?;
    let value = loss::mean_log(&d_real)? + loss::mean_log_complement(&d_fake)?;

    // d/da log σ(a) = 1 − σ(a);  d/da log(1 − σ(a)) = −σ(a)
    let inv_real = S::one() / S::of(n_real as f64);
    let inv_fake = S::one() / S::of(n_fake as f64);
    let mut logit_grad = Matrix::zeros(n_real + n_fake, 1);
    for (i, &p) in d.as_slice().iter().enumerate() {
        let g = if i < n_real {
            (S::one() - p) * inv_real
        } else {
            -p * inv_fake
        };
        logit_grad.set(i, 0, g);
    }
    let (grads, _) = theta_d.backward(&cache, OutputGrad::PreActivation(logit_grad))?;
    Ok((value, grads, d_real.mean(), d_fake.mean()))
}

/// Step-by-step trainer; [`train_gan`] drives it for the configured number of iterations.
pub struct GanTrainer<'a, S: Scalar> {
    real: &'a ClassMatrix<S>,
    cfg: GanConfig,
    theta_g: MlpParams<S>,
    theta_d: MlpParams<S>,
    adam_g: AdamState<S>,
    adam_d: AdamState<S>,
    rng: SeededRng,
    batch: usize,
    trace: Vec<TraceRow>,
}

/// Discriminator statistics of one update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscStep {
    pub disc_loss: f64,
    pub mean_d_real: f64,
    pub mean_d_fake: f64,
}

impl<'a, S: Scalar> GanTrainer<'a, S> {
    /// Initialises both networks from `cfg.seed`. Minibatches shrink to `K` when the class has
    /// fewer rows than `cfg.batch_size`.
    pub fn new(real: &'a ClassMatrix<S>, cfg: &GanConfig) -> Result<Self> {
        cfg.validate()?;
        let k = real.observations();
        let m = real.features();
        if k == 0 {
            return Err(Error::data(format!("class {} has no rows", real.class_id)));
        }
        if !real.values.all_finite() {
            return Err(Error::data(format!(
                "class {} has non-finite rows",
                real.class_id
            )));
        }
        let root = SeededRng::new(cfg.seed);
        let theta_g = cfg.init_generator::<S>(m, &mut root.derive(1))?;
        let theta_d = cfg.init_discriminator::<S>(m, &mut root.derive(2))?;
        Ok(Self {
            real,
            adam_g: AdamState::new(&theta_g, cfg.generator_adam),
            adam_d: AdamState::new(&theta_d, cfg.discriminator_adam),
            theta_g,
            theta_d,
            rng: root.derive(3),
            batch: cfg.batch_size.min(k),
            trace: Vec::with_capacity(cfg.iterations),
            cfg: cfg.clone(),
        })
    }

    pub fn generator(&self) -> &MlpParams<S> {
        &self.theta_g
    }

    pub fn discriminator(&self) -> &MlpParams<S> {
        &self.theta_d
    }

    pub fn batch_size(&self) -> usize {
        self.batch
    }

    fn diverged(&self) -> Error {
        Error::GanDiverged {
            class_id: self.real.class_id,
            iteration: self.trace.len(),
            disc_trace: self.trace.iter().map(|r| r.disc_loss).collect(),
            gen_trace: self.trace.iter().map(|r| r.gen_loss).collect(),
        }
    }

    /// One ascent step on the discriminator objective; the generator is left untouched.
    pub fn disc_step(&mut self) -> Result<DiscStep> {
        let idx = self
            .rng
            .sample_indices(self.real.observations(), self.batch);
        let real_batch = self.real.values.select_rows(&idx);
        let z = self.rng.sample_normal::<S>(self.batch, self.cfg.latent_dim);
        let fake = self.theta_g.predict(&z)?;
        let (value, mut grads, d_real, d_fake) =
            discriminator_objective(&self.theta_d, &real_batch, &fake)?;
        if !value.is_finite() || !grads.all_finite() {
            return Err(self.diverged());
        }
        grads.scale(-S::one());
        if self.adam_d.step(&mut self.theta_d, &grads).is_err() {
            return Err(self.diverged());
        }
        Ok(DiscStep {
            disc_loss: value.to_f64_lossy(),
            mean_d_real: d_real.to_f64_lossy(),
            mean_d_fake: d_fake.to_f64_lossy(),
        })
    }

    /// One descent step on the generator objective; the discriminator is left untouched.
    /// Returns the saturating generator loss of the batch, whichever variant is optimised.
    pub fn gen_step(&mut self) -> Result<f64> {
        let z = self.rng.sample_normal::<S>(self.batch, self.cfg.latent_dim);
        let (objective, grads) =
            generator_objective(&self.theta_g, &self.theta_d, &z, self.cfg.loss_variant)?;
        let saturating = match self.cfg.loss_variant {
            LossVariant::Saturating => objective,
            LossVariant::NonSaturating => gen_loss(&self.theta_g, &self.theta_d, &z)?,
        };
        if !objective.is_finite() || !grads.all_finite() {
            return Err(self.diverged());
        }
        if self.adam_g.step(&mut self.theta_g, &grads).is_err() {
            return Err(self.diverged());
        }
        Ok(saturating.to_f64_lossy())
    }

    /// `disc_steps` discriminator steps followed by one generator step.
    pub fn iterate(&mut self) -> Result<TraceRow> {
        let mut last = None;
        for _ in 0..self.cfg.disc_steps {
            last = Some(self.disc_step()?);
        }
        let d = last.expect("disc_steps >= 1");
        let gen_loss = self.gen_step()?;
        let row = TraceRow {
            iteration: self.trace.len(),
            disc_loss: d.disc_loss,
            gen_loss,
            mean_d_real: d.mean_d_real,
            mean_d_fake: d.mean_d_fake,
        };
        self.trace.push(row);
        Ok(row)
    }

    pub fn finish(self) -> GanModel<S> {
        GanModel {
            class_id: self.real.class_id,
            theta_g: self.theta_g,
            theta_d: self.theta_d,
            trace: self.trace,
        }
    }
}

/// Trains one GAN on the rows of `real` (already standardized) for `cfg.iterations` iterations.
pub fn train_gan<S: Scalar>(real: &ClassMatrix<S>, cfg: &GanConfig) -> Result<GanModel<S>> {
    let mut trainer = GanTrainer::new(real, cfg)?;
    for _ in 0..cfg.iterations {
        trainer.iterate()?;
    }
    Ok(trainer.finish())
}

/// Seed for the GAN of `class_id` under a master seed.
pub fn class_seed(master: u64, class_id: usize) -> u64 {
    master ^ class_id as u64
}

/// One GAN per class present in `train` (standardized). Class `c` sees only its own rows and
/// trains with seed `cfg.seed ^ c`.
pub fn train_class_gans<S: Scalar>(train: &Dataset, cfg: &GanConfig) -> Result<Vec<GanModel<S>>> {
    let counts = train.class_counts();
    (1..=train.class_count())
        .filter(|c| counts[c - 1] > 0)
        .map(|c| {
            let real = crate::data::class_matrix::<S>(train, c)?;
            let class_cfg = GanConfig {
                seed: class_seed(cfg.seed, c),
                ..cfg.clone()
            };
            train_gan(&real, &class_cfg)
        })
        .collect()
}

/// Draws `count` rows from the trained generator.
pub fn generate<S: Scalar>(
    model: &GanModel<S>,
    count: usize,
    rng: &mut SeededRng,
) -> Result<SyntheticBlock<S>> {
    if model.trace.is_empty() {
        return Err(Error::Training(format!(
            "GAN for class {} has not been trained",
            model.class_id
        )));
    }
    let values = if count == 0 {
        Matrix::zeros(0, model.feature_count())
    } else {
        let z = rng.sample_normal::<S>(count, model.latent_dim());
        model.theta_g.predict(&z)?
    };
    if !values.all_finite() {
        return Err(Error::Training("generator produced non-finite rows".into()));
    }
    Ok(SyntheticBlock {
        class_id: model.class_id,
        values,
    })
}

/// Real rows followed by synthetic rows of the same class.
pub fn augment<S: Scalar>(
    real: &ClassMatrix<S>,
    synth: &SyntheticBlock<S>,
) -> Result<ClassMatrix<S>> {
    if real.class_id != synth.class_id {
        return Err(Error::data(format!(
            "cannot stack class {} synthetic rows under class {}",
            synth.class_id, real.class_id
        )));
    }
    if synth.values.rows() > 0 && synth.values.cols() != real.features() {
        return Err(Error::shape(format!(
            "synthetic rows have {} features, real rows {}",
            synth.values.cols(),
            real.features()
        )));
    }
    Ok(ClassMatrix {
        class_id: real.class_id,
        values: real.values.vstack(&synth.values)?,
    })
}

/// Appends every block to `train` as labelled samples.
pub fn augment_dataset<S: Scalar>(
    train: &Dataset,
    blocks: &[SyntheticBlock<S>],
) -> Result<Dataset> {
    let mut out = train.clone();
    for block in blocks {
        out = out.with_appended(block.class_id, &block.values.cast::<f64>())?;
    }
    Ok(out)
}

pub const GAN_FORMAT: &str = "rss-gan";
pub const GAN_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GanFile {
    format: String,
    version: u32,
    class_id: usize,
    trained_iterations: usize,
    generator: ModelFile,
    discriminator: ModelFile,
}

impl<S: Scalar> GanModel<S> {
    /// Writes both networks as a JSON document wrapping two nn model files. The trace is not
    /// part of the model; export it with [`write_trace_csv`].
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = GanFile {
            format: GAN_FORMAT.into(),
            version: GAN_VERSION,
            class_id: self.class_id,
            trained_iterations: self.trace.len(),
            generator: ModelFile::from_params(&self.theta_g),
            discriminator: ModelFile::from_params(&self.theta_d),
        };
        std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
        Ok(())
    }

    /// Reloads networks saved by [`GanModel::save`]. The trace comes back as placeholder rows
    /// (one per trained iteration, values NaN) so trained/untrained status survives the trip.
    pub fn load(path: &Path) -> Result<Self> {
        let file: GanFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if file.format != GAN_FORMAT || file.version != GAN_VERSION {
            return Err(Error::ModelFormat(format!(
                "{}: expected {GAN_FORMAT} v{GAN_VERSION}, found {} v{}",
                path.display(),
                file.format,
                file.version
            )));
        }
        let theta_g: MlpParams<S> = file.generator.to_params()?;
        let theta_d: MlpParams<S> = file.discriminator.to_params()?;
        if theta_g.output_dim() != theta_d.input_dim() || theta_d.output_dim() != 1 {
            return Err(Error::ModelFormat(
                "generator/discriminator dimensions disagree".into(),
            ));
        }
        let trace = (0..file.trained_iterations)
            .map(|iteration| TraceRow {
                iteration,
                disc_loss: f64::NAN,
                gen_loss: f64::NAN,
                mean_d_real: f64::NAN,
                mean_d_fake: f64::NAN,
            })
            .collect();
        Ok(Self {
            class_id: file.class_id,
            theta_g,
            theta_d,
            trace,
        })
    }
}

/// CSV columns: `iteration,disc_loss,gen_loss,mean_d_real,mean_d_fake`.
pub fn write_trace_csv<W: Write>(out: W, trace: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "iteration",
        "disc_loss",
        "gen_loss",
        "mean_d_real",
        "mean_d_fake",
    ])?;
    for r in trace {
        w.write_record([
            r.iteration.to_string(),
            r.disc_loss.to_string(),
            r.gen_loss.to_string(),
            r.mean_d_real.to_string(),
            r.mean_d_fake.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticManifest {
    pub synthetic: bool,
    pub class_id: usize,
    pub count: usize,
    pub seed: u64,
    /// `dbm` when rows were mapped back through the standardizer.
    pub space: String,
}

/// Writes `block` in the dataset text format (values mapped back to dBm) together with a
/// `<path>.manifest.json` sidecar marking the rows as synthetic.
pub fn export_synthetic<S: Scalar>(
    block: &SyntheticBlock<S>,
    standardizer: &Standardizer,
    seed: u64,
    path: &Path,
) -> Result<SyntheticManifest> {
    let dbm = standardizer.invert(&block.values.cast::<f64>())?;
    let samples: Vec<RssSample> = dbm
        .iter_rows()
        .enumerate()
        .map(|(index, row)| RssSample {
            index,
            rss: row.to_vec(),
            label: block.class_id,
        })
        .collect();
    std::fs::write(path, render_samples(&samples, 3))?;
    let manifest = SyntheticManifest {
        synthetic: true,
        class_id: block.class_id,
        count: block.values.rows(),
        seed,
        space: "dbm".into(),
    };
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    std::fs::write(
        path.with_file_name(name),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(manifest)
}

/// Seed for generating class `class_id` rows in a run.
pub fn generation_seed(run_seed: u64, class_id: usize) -> u64 {
    mix_seed(run_seed, 1000 + class_id as u64)
}
