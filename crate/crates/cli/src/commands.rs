use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rss_augment::classifier::{
    evaluate, load_classifier, save_classifier, train_classifier, ClassifierConfig,
};
use rss_augment::data::{
    class_matrix, fetch_dataset, load_dataset, render_samples, sha256_file, stratified_split,
    subsample_fraction, write_split_manifest, Dataset, FetchOutcome, Standardizer,
};
use rss_augment::experiments::{
    classifier_seed, fraction_grid, gan_seed, prepare_split, render_svg, render_table_markdown,
    run_seed, run_spec, split_seed, subsample_seed, write_aggregate_csv, write_raw_csv,
    write_table_csv, ExperimentReport, ExperimentSpec,
};
use rss_augment::gan::{
    class_seed, export_synthetic, generate, generation_seed, train_gan, write_trace_csv, GanConfig,
    GanModel,
};
use rss_augment::nn::{Matrix, SeededRng};
use rss_augment::{Error, Scalar};
use serde::Serialize;

use crate::config::{Precision, RunConfig};
use crate::output::create_run_dir;
use crate::{CliError, Command};

type CmdResult = Result<String, CliError>;

/// Written as `run.json` into every run directory. Holds no timestamps.
#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    seed: u64,
    dataset: String,
    dataset_sha256: String,
    config: &'a RunConfig,
}

struct Context<'a> {
    name: &'a str,
    cfg: &'a RunConfig,
    tag: Option<&'a str>,
}

impl Context<'_> {
    fn seed(&self) -> u64 {
        self.cfg.seed.unwrap_or(0)
    }

    fn required_seed(&self) -> Result<u64, CliError> {
        self.cfg.seed.ok_or_else(|| {
            CliError::usage(format!(
                "{} needs a seed (--seed or `seed` in the config)",
                self.name
            ))
        })
    }

    fn dataset(&self) -> Result<(Dataset, PathBuf, String), CliError> {
        let path = self.cfg.dataset.resolved_path();
        if !path.exists() {
            return Err(Error::Data(format!(
                "dataset {} not found; run `rss-augment fetch` or pass --dataset",
                path.display()
            ))
            .into());
        }
        let digest = sha256_file(&path)?;
        if let Some(expected) = self.cfg.dataset.pinned_sha256() {
            if !expected.eq_ignore_ascii_case(&digest) {
                return Err(Error::Checksum {
                    path,
                    expected: expected.to_string(),
                    actual: digest,
                }
                .into());
            }
        }
        Ok((load_dataset(&path)?, path, digest))
    }

    fn run_dir(&self) -> Result<PathBuf, CliError> {
        create_run_dir(&self.cfg.output_dir, self.name, self.tag)
    }

    fn write_manifest(
        &self,
        dir: &Path,
        seed: u64,
        dataset: &Path,
        digest: &str,
    ) -> Result<(), CliError> {
        let m = RunManifest {
            command: self.name,
            seed,
            dataset: dataset.display().to_string(),
            dataset_sha256: digest.to_string(),
            config: self.cfg,
        };
        let text = serde_json::to_string_pretty(&m).map_err(Error::from)?;
        std::fs::write(dir.join("run.json"), text)?;
        Ok(())
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path)?))
}

fn require_file(path: &Path, what: &str, hint: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::usage(format!(
            "missing {what} {}; {hint}",
            path.display()
        )))
    }
}

fn sibling_standardizer(model: &Path, given: Option<&PathBuf>) -> PathBuf {
    given.cloned().unwrap_or_else(|| {
        model
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join("standardizer.json")
    })
}

pub fn run(cmd: &Command, name: &str, cfg: &RunConfig, tag: Option<&str>) -> CmdResult {
    let ctx = Context { name, cfg, tag };
    match cfg.precision {
        Precision::F32 => dispatch::<f32>(cmd, &ctx),
        Precision::F64 => dispatch::<f64>(cmd, &ctx),
    }
}

fn dispatch<S: Scalar>(cmd: &Command, ctx: &Context) -> CmdResult {
    match cmd {
        Command::Fetch => fetch(ctx),
        Command::Split => split(ctx),
        Command::TrainGan { class_id } => train_gans::<S>(ctx, *class_id),
        Command::Generate {
            model,
            count,
            standardizer,
            class_id,
        } => generate_rows::<S>(ctx, model, *count, standardizer.as_ref(), *class_id),
        Command::TrainClassifier { synthetic } => train::<S>(ctx, synthetic),
        Command::Evaluate {
            model,
            standardizer,
        } => eval::<S>(ctx, model, standardizer.as_ref()),
        Command::Table1 => experiment::<S>(ctx, false),
        Command::Sweep => experiment::<S>(ctx, true),
    }
}

fn fetch(ctx: &Context) -> CmdResult {
    let ds = &ctx.cfg.dataset;
    let dest = ds.resolved_path();
    let outcome = fetch_dataset(&ds.url, &dest, ds.pinned_sha256())?;
    let samples = load_dataset(&dest)?;
    let verb = match outcome {
        FetchOutcome::Cached { .. } => "cached",
        FetchOutcome::Downloaded { .. } => "downloaded",
    };
    Ok(format!(
        "fetch: {verb} {} ({} samples, sha256 {})",
        dest.display(),
        samples.len(),
        outcome.sha256()
    ))
}

fn split(ctx: &Context) -> CmdResult {
    let (ds, path, digest) = ctx.dataset()?;
    let seed = ctx.seed();
    let rs = run_seed(seed, 0);
    let (train, test) = stratified_split(&ds, &mut SeededRng::new(split_seed(rs)))?;
    let standardizer = Standardizer::fit(&train)?;
    let dir = ctx.run_dir()?;
    std::fs::write(dir.join("train.txt"), render_samples(train.samples(), 6))?;
    std::fs::write(dir.join("test.txt"), render_samples(test.samples(), 6))?;
    write_split_manifest(create(&dir.join("split.csv"))?, &train, &test)?;
    standardizer.save(&dir.join("standardizer.json"))?;
    ctx.write_manifest(&dir, seed, &path, &digest)?;
    Ok(format!(
        "split: {} train / {} test samples, per-class train counts {:?} -> {}",
        train.len(),
        test.len(),
        train.class_counts(),
        dir.display()
    ))
}

/// Standardized training subsample of repetition 0, as the experiments would draw it.
fn training_subsample(
    ctx: &Context,
    ds: &Dataset,
    seed: u64,
) -> Result<(Dataset, Standardizer), CliError> {
    let rs = run_seed(seed, 0);
    let (train, _, standardizer) = prepare_split(ds, rs)?;
    let kept = subsample_fraction(
        &train,
        ctx.cfg.experiment.real_fraction,
        &mut SeededRng::new(subsample_seed(rs)),
    )?;
    Ok((kept, standardizer))
}

fn train_gans<S: Scalar>(ctx: &Context, class_id: Option<usize>) -> CmdResult {
    let (ds, path, digest) = ctx.dataset()?;
    let seed = ctx.seed();
    let classes: Vec<usize> = match class_id {
        Some(c) if c == 0 || c > ds.class_count() => {
            return Err(CliError::usage(format!(
                "--class {c} outside 1..={}",
                ds.class_count()
            )))
        }
        Some(c) => vec![c],
        None => (1..=ds.class_count()).collect(),
    };
    let (kept, standardizer) = training_subsample(ctx, &ds, seed)?;
    let master = gan_seed(run_seed(seed, 0));
    let dir = ctx.run_dir()?;
    let mut notes = Vec::new();
    for c in classes {
        let real = class_matrix::<S>(&kept, c)?;
        let cfg = GanConfig {
            seed: class_seed(master, c),
            ..ctx.cfg.gan.clone()
        };
        let model = train_gan(&real, &cfg)?;
        model.save(&dir.join(format!("gan_class{c}.json")))?;
        write_trace_csv(
            create(&dir.join(format!("trace_class{c}.csv")))?,
            &model.trace,
        )?;
        if let Some(d) = model.tail_mean_d_real(0.1) {
            log::info!("class {c}: mean D(real) over the last 10% of iterations {d:.3}");
        }
        notes.push(format!("class {c}: {} rows", real.observations()));
    }
    standardizer.save(&dir.join("standardizer.json"))?;
    ctx.write_manifest(&dir, seed, &path, &digest)?;
    Ok(format!(
        "train-gan: {} -> {}",
        notes.join(", "),
        dir.display()
    ))
}

fn generate_rows<S: Scalar>(
    ctx: &Context,
    model_path: &Path,
    count: usize,
    standardizer: Option<&PathBuf>,
    class_id: Option<usize>,
) -> CmdResult {
    require_file(
        model_path,
        "GAN model",
        "train one with `rss-augment train-gan`",
    )?;
    let st_path = sibling_standardizer(model_path, standardizer);
    require_file(&st_path, "standardizer", "pass --standardizer")?;
    let model: GanModel<S> = GanModel::load(model_path)?;
    if let Some(c) = class_id {
        if c != model.class_id {
            return Err(CliError::usage(format!(
                "{} is the GAN of class {}, not class {c}",
                model_path.display(),
                model.class_id
            )));
        }
    }
    let standardizer = Standardizer::load(&st_path)?;
    let seed = ctx.seed();
    let gen_seed = generation_seed(run_seed(seed, 0), model.class_id);
    let block = generate(&model, count, &mut SeededRng::new(gen_seed))?;
    let dir = ctx.run_dir()?;
    let out = dir.join(format!("synthetic_class{}.txt", model.class_id));
    export_synthetic(&block, &standardizer, gen_seed, &out)?;
    Ok(format!(
        "generate: {count} rows of class {} -> {}",
        model.class_id,
        out.display()
    ))
}

fn append_synthetic(
    kept: Dataset,
    files: &[PathBuf],
    standardizer: &Standardizer,
) -> Result<Dataset, CliError> {
    let mut out = kept;
    for f in files {
        require_file(f, "synthetic file", "write one with `rss-augment generate`")?;
        let rows = standardizer.apply(&load_dataset(f)?)?;
        if rows.class_count() > out.class_count() {
            return Err(Error::Data(format!(
                "{} has label {} but the dataset has {} classes",
                f.display(),
                rows.class_count(),
                out.class_count()
            ))
            .into());
        }
        for c in 1..=rows.class_count() {
            let block: Vec<&[f64]> = rows
                .samples()
                .iter()
                .filter(|s| s.label == c)
                .map(|s| s.rss.as_slice())
                .collect();
            if !block.is_empty() {
                out = out.with_appended(c, &Matrix::from_rows(&block)?)?;
            }
        }
    }
    Ok(out)
}

fn train<S: Scalar>(ctx: &Context, synthetic: &[PathBuf]) -> CmdResult {
    let (ds, path, digest) = ctx.dataset()?;
    let seed = ctx.seed();
    let (kept, standardizer) = training_subsample(ctx, &ds, seed)?;
    let real_rows = kept.len();
    let train_set = append_synthetic(kept, synthetic, &standardizer)?;
    let cfg = ClassifierConfig {
        seed: classifier_seed(run_seed(seed, 0)),
        ..ctx.cfg.classifier.clone()
    };
    let trained = train_classifier::<S>(&train_set, &cfg)?;
    let dir = ctx.run_dir()?;
    save_classifier(&trained.params, &dir.join("classifier.json"))?;
    let mut trace = String::from("epoch,loss\n");
    for (e, l) in trained.loss_trace.iter().enumerate() {
        trace.push_str(&format!("{},{l}\n", e + 1));
    }
    std::fs::write(dir.join("loss_trace.csv"), trace)?;
    standardizer.save(&dir.join("standardizer.json"))?;
    ctx.write_manifest(&dir, seed, &path, &digest)?;
    Ok(format!(
        "train-classifier: {real_rows} real + {} synthetic rows, final epoch loss {} -> {}",
        train_set.len() - real_rows,
        trained
            .loss_trace
            .last()
            .map(|l| format!("{l:.4}"))
            .unwrap_or_else(|| "n/a".into()),
        dir.display()
    ))
}

fn eval<S: Scalar>(ctx: &Context, model_path: &Path, standardizer: Option<&PathBuf>) -> CmdResult {
    require_file(
        model_path,
        "classifier model",
        "train one with `rss-augment train-classifier`",
    )?;
    let st_path = sibling_standardizer(model_path, standardizer);
    require_file(&st_path, "standardizer", "pass --standardizer")?;
    let params = load_classifier::<S>(model_path)?;
    let standardizer = Standardizer::load(&st_path)?;
    let (ds, path, digest) = ctx.dataset()?;
    let seed = ctx.seed();
    let (_, test) = stratified_split(&ds, &mut SeededRng::new(split_seed(run_seed(seed, 0))))?;
    let result = evaluate(&params, &standardizer.apply(&test)?)?;
    let dir = ctx.run_dir()?;
    result.write_csv(create(&dir.join("eval.csv"))?)?;
    ctx.write_manifest(&dir, seed, &path, &digest)?;
    Ok(format!(
        "evaluate: accuracy {:.2}%, log loss {:.4} on {} test samples -> {}",
        result.accuracy,
        result.log_loss,
        test.len(),
        dir.display()
    ))
}

pub fn experiment_spec(
    cfg: &RunConfig,
    seed: u64,
    top_up: bool,
) -> Result<ExperimentSpec, CliError> {
    let e = &cfg.experiment;
    let base = if top_up {
        ExperimentSpec {
            real_fractions: fraction_grid(e.sweep_step_percent)?,
            ..ExperimentSpec::sweep(seed)
        }
    } else {
        ExperimentSpec {
            real_fractions: e.table_fractions.clone(),
            synthetic_counts: e.synthetic_counts.clone(),
            ..ExperimentSpec::table1(seed)
        }
    };
    let spec = ExperimentSpec {
        interpretation: e.interpretation,
        repetitions: e.repetitions,
        classifier: cfg.classifier.clone(),
        gan: cfg.gan.clone(),
        workers: cfg.workers,
        ..base
    };
    spec.validate()?;
    Ok(spec)
}

fn experiment<S: Scalar>(ctx: &Context, top_up: bool) -> CmdResult {
    let seed = ctx.required_seed()?;
    let spec = experiment_spec(ctx.cfg, seed, top_up)?;
    let (ds, path, digest) = ctx.dataset()?;
    let report: ExperimentReport = run_spec::<S>(&ds, &spec)?;
    let dir = ctx.run_dir()?;
    write_raw_csv(create(&dir.join("raw.csv"))?, &report)?;
    write_aggregate_csv(create(&dir.join("aggregate.csv"))?, &report)?;
    let stem = &spec.name;
    write_table_csv(create(&dir.join(format!("{stem}.csv")))?, &report)?;
    std::fs::write(
        dir.join(format!("{stem}.md")),
        render_table_markdown(&report),
    )?;
    if top_up {
        let svg = render_svg(
            &report,
            "Test accuracy: real only vs. topped up with GAN samples",
        );
        std::fs::write(dir.join(format!("{stem}.svg")), svg)?;
    }
    ctx.write_manifest(&dir, seed, &path, &digest)?;

    let failed = report.failed_cells();
    if !failed.is_empty() {
        let list: Vec<String> = failed
            .iter()
            .map(|c| {
                format!(
                    "{}/{}/{}",
                    c.real_fraction,
                    c.series.tag(),
                    c.synthetic_count
                )
            })
            .collect();
        return Err(Error::Training(format!(
            "every repetition failed in cells {}; partial results in {}",
            list.join(", "),
            dir.display()
        ))
        .into());
    }
    Ok(format!(
        "{stem}: {} cells x {} repetitions in {:.1} s -> {}",
        report.cells.len(),
        spec.repetitions,
        report.elapsed_ms as f64 / 1000.0,
        dir.display()
    ))
}
