//! Repeated, seeded augmentation experiments and their reports.
//!
//! Two layouts are supported:
//!
//! - **table**: every real fraction is crossed with every synthetic count; a count is either the
//!   total number of synthetic rows (split evenly over the classes, remainder to the lowest class
//!   ids) or the number per class.
//! - **top-up**: for every real fraction, a real-only cell and a cell where each class is filled
//!   with synthetic rows up to its full training-split size.
//!
//! Repetition `r` uses `run_seed = mix_seed(master_seed, r)`, and everything random in that
//! repetition (split, subsample, GANs, generation, classifier) is derived from `run_seed`. Cells
//! of one repetition and fraction share the subsample, the trained GANs and the classifier
//! seed, so they differ only in the synthetic rows added.

pub mod report;

pub use report::{
    render_svg, render_table_markdown, write_aggregate_csv, write_raw_csv, write_table_csv,
};

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{evaluate, train_classifier, ClassifierConfig};
use crate::data::{stratified_split, subsample_fraction, Dataset, Standardizer};
use crate::error::{Error, Result};
use crate::gan::{
    augment_dataset, generate, generation_seed, train_class_gans, GanConfig, GanModel,
};
use crate::nn::{mix_seed, SeededRng};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpretation {
    /// A count is the total over all classes.
    Totals,
    /// A count is added to every class.
    PerClass,
}

impl Interpretation {
    pub fn tag(self) -> &'static str {
        match self {
            Interpretation::Totals => "totals",
            Interpretation::PerClass => "per_class",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Series {
    /// Fixed synthetic count, read per [`Interpretation`].
    Count(Interpretation),
    /// Real rows only (top-up layout).
    RealOnly,
    /// Real rows plus synthetic rows up to the full per-class size.
    TopUp,
}

impl Series {
    pub fn tag(self) -> &'static str {
        match self {
            Series::Count(i) => i.tag(),
            Series::RealOnly => "real_only",
            Series::TopUp => "top_up",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Label written to the `experiment` column.
    pub name: String,
    pub real_fractions: Vec<f64>,
    /// Synthetic counts for the table layout; ignored when `top_up` is set.
    pub synthetic_counts: Vec<usize>,
    pub interpretation: Interpretation,
    pub top_up: bool,
    pub repetitions: usize,
    pub master_seed: u64,
    pub classifier: ClassifierConfig,
    pub gan: GanConfig,
    /// Worker threads; 0 means one per logical core.
    pub workers: usize,
}

pub const TABLE_FRACTIONS: [f64; 2] = [0.10, 1.00];
pub const TABLE_COUNTS: [usize; 5] = [0, 250, 500, 750, 1000];
pub const DEFAULT_REPETITIONS: usize = 20;
pub const FULL_REPETITIONS: usize = 100;

/// `step, 2·step, …, 1` (exact multiples, no accumulated rounding).
pub fn fraction_grid(step_percent: u32) -> Result<Vec<f64>> {
    if step_percent == 0 || step_percent > 100 || 100 % step_percent != 0 {
        return Err(Error::config(format!(
            "sweep step must divide 100, got {step_percent}"
        )));
    }
    Ok((1..=100 / step_percent)
        .map(|k| f64::from(k * step_percent) / 100.0)
        .collect())
}

impl ExperimentSpec {
    pub fn table1(master_seed: u64) -> Self {
        Self {
            name: "table1".into(),
            real_fractions: TABLE_FRACTIONS.to_vec(),
            synthetic_counts: TABLE_COUNTS.to_vec(),
            interpretation: Interpretation::Totals,
            top_up: false,
            repetitions: DEFAULT_REPETITIONS,
            master_seed,
            classifier: ClassifierConfig::default(),
            gan: GanConfig::default(),
            workers: 0,
        }
    }

    pub fn sweep(master_seed: u64) -> Self {
        Self {
            name: "sweep".into(),
            real_fractions: fraction_grid(5).expect("5 divides 100"),
            synthetic_counts: Vec::new(),
            top_up: true,
            ..Self::table1(master_seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::config("repetitions must be at least 1"));
        }
        if self.real_fractions.is_empty() {
            return Err(Error::config("no real fractions to run"));
        }
        if let Some(f) = self
            .real_fractions
            .iter()
            .find(|f| !(**f > 0.0 && **f <= 1.0))
        {
            return Err(Error::config(format!("real fraction {f} outside (0, 1]")));
        }
        if !self.top_up && self.synthetic_counts.is_empty() {
            return Err(Error::config("no synthetic counts to run"));
        }
        self.classifier.validate()?;
        self.gan.validate()
    }

    fn series(&self) -> Vec<(Series, usize)> {
        if self.top_up {
            vec![(Series::RealOnly, 0), (Series::TopUp, 0)]
        } else {
            self.synthetic_counts
                .iter()
                .map(|&c| (Series::Count(self.interpretation), c))
                .collect()
        }
    }

    /// Number of report cells.
    pub fn cell_count(&self) -> usize {
        self.real_fractions.len() * self.series().len()
    }
}

/// Seed of repetition `repetition`.
pub fn run_seed(master_seed: u64, repetition: usize) -> u64 {
    mix_seed(master_seed, repetition as u64)
}

/// Seed of the train/test split of a repetition.
pub fn split_seed(run_seed: u64) -> u64 {
    mix_seed(run_seed, 1)
}

/// Seed of the real-fraction subsample of a repetition.
pub fn subsample_seed(run_seed: u64) -> u64 {
    mix_seed(run_seed, 2)
}

/// Master seed of the per-class GANs of a repetition (class `c` adds `^ c`).
pub fn gan_seed(run_seed: u64) -> u64 {
    mix_seed(run_seed, 3)
}

/// Seed of every classifier trained in a repetition.
pub fn classifier_seed(run_seed: u64) -> u64 {
    mix_seed(run_seed, 4)
}

/// Splits `total` over `classes`, remainder to the lowest class ids.
pub fn split_total(total: usize, classes: usize) -> Vec<usize> {
    (0..classes)
        .map(|c| total / classes + usize::from(c < total % classes))
        .collect()
}

/// Synthetic rows to add to each class.
fn synthetic_plan(series: Series, count: usize, full: &[usize], kept: &[usize]) -> Vec<usize> {
    match series {
        Series::Count(Interpretation::Totals) => split_total(count, full.len()),
        Series::Count(Interpretation::PerClass) => vec![count; full.len()],
        Series::RealOnly => vec![0; full.len()],
        Series::TopUp => full
            .iter()
            .zip(kept)
            .map(|(f, k)| f.saturating_sub(*k))
            .collect(),
    }
}

/// One classifier run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub experiment: String,
    pub real_fraction: f64,
    /// Requested count for table cells; total synthetic rows added for top-up cells.
    pub synthetic_count: usize,
    pub series: Series,
    pub repetition: usize,
    pub run_seed: u64,
    pub accuracy: f64,
    pub log_loss: f64,
    /// Time spent generating, training and evaluating this cell (GAN training excluded).
    pub wall_ms: u64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stats {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

/// Mean, sample standard deviation and range of `values`.
pub fn aggregate(values: &[f64]) -> Result<Stats> {
    if values.is_empty() {
        return Err(Error::data("cannot aggregate an empty cell"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Stats {
        // rounding can push the mean of identical values a hair outside the range
        mean: mean.clamp(min, max),
        std,
        min,
        max,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub experiment: String,
    pub real_fraction: f64,
    pub synthetic_count: usize,
    pub series: Series,
    pub runs: usize,
    pub failed: usize,
    /// `None` when every run failed.
    pub accuracy: Option<Stats>,
    pub log_loss: Option<Stats>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub spec: ExperimentSpec,
    /// Ordered by fraction, series, synthetic count, then repetition.
    pub records: Vec<RunRecord>,
    pub cells: Vec<CellSummary>,
    pub elapsed_ms: u64,
}

impl ExperimentReport {
    pub fn cell(
        &self,
        real_fraction: f64,
        series: Series,
        synthetic_count: usize,
    ) -> Option<&CellSummary> {
        self.cells.iter().find(|c| {
            c.real_fraction == real_fraction
                && c.series == series
                && (c.synthetic_count == synthetic_count || !matches!(series, Series::Count(_)))
        })
    }

    pub fn mean_accuracy(
        &self,
        real_fraction: f64,
        series: Series,
        synthetic_count: usize,
    ) -> Option<f64> {
        self.cell(real_fraction, series, synthetic_count)?
            .accuracy
            .map(|s| s.mean)
    }

    /// Cells in which every repetition failed.
    pub fn failed_cells(&self) -> Vec<&CellSummary> {
        self.cells.iter().filter(|c| c.accuracy.is_none()).collect()
    }
}

/// Table layout over `dataset` (raw, unstandardized fingerprints).
pub fn run_table1<S: Scalar>(dataset: &Dataset, spec: &ExperimentSpec) -> Result<ExperimentReport> {
    if spec.top_up {
        return Err(Error::config("run_table1 needs a spec without top_up"));
    }
    run_experiment::<S>(dataset, spec)
}

/// Top-up layout over `dataset`.
pub fn run_fraction_sweep<S: Scalar>(
    dataset: &Dataset,
    spec: &ExperimentSpec,
) -> Result<ExperimentReport> {
    if !spec.top_up {
        return Err(Error::config("run_fraction_sweep needs a spec with top_up"));
    }
    run_experiment::<S>(dataset, spec)
}

/// Runs whichever layout `spec` describes.
pub fn run_spec<S: Scalar>(dataset: &Dataset, spec: &ExperimentSpec) -> Result<ExperimentReport> {
    run_experiment::<S>(dataset, spec)
}

/// Standardized train/test split for repetition seed `run_seed`, with the standardizer fitted on
/// the full training half.
pub fn prepare_split(dataset: &Dataset, run_seed: u64) -> Result<(Dataset, Dataset, Standardizer)> {
    let (train, test) = stratified_split(dataset, &mut SeededRng::new(split_seed(run_seed)))?;
    let standardizer = Standardizer::fit(&train)?;
    Ok((
        standardizer.apply(&train)?,
        standardizer.apply(&test)?,
        standardizer,
    ))
}

fn run_experiment<S: Scalar>(dataset: &Dataset, spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let started = Instant::now();
    let jobs: Vec<(usize, usize)> = (0..spec.repetitions)
        .flat_map(|r| (0..spec.real_fractions.len()).map(move |f| (r, f)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| Error::config(format!("worker pool: {e}")))?;
    let per_job: Vec<Vec<RunRecord>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(r, f)| run_job::<S>(dataset, spec, r, spec.real_fractions[f]))
            .collect()
    });

    let mut records: Vec<RunRecord> = per_job.into_iter().flatten().collect();
    let order = |r: &RunRecord| {
        let f = spec
            .real_fractions
            .iter()
            .position(|&x| x == r.real_fraction)
            .unwrap_or(usize::MAX);
        (f, r.series, r.synthetic_count, r.repetition)
    };
    records.sort_by_key(order);

    let mut cells = Vec::with_capacity(spec.cell_count());
    for chunk in records.chunk_by(|a, b| {
        order(a).0 == order(b).0 && a.series == b.series && a.synthetic_count == b.synthetic_count
    }) {
        let ok: Vec<&RunRecord> = chunk.iter().filter(|r| r.error.is_none()).collect();
        let acc: Vec<f64> = ok.iter().map(|r| r.accuracy).collect();
        let loss: Vec<f64> = ok.iter().map(|r| r.log_loss).collect();
        let first = &chunk[0];
        if ok.is_empty() {
            log::error!(
                "cell fraction={} series={} count={} failed in every repetition",
                first.real_fraction,
                first.series.tag(),
                first.synthetic_count
            );
        }
        cells.push(CellSummary {
            experiment: first.experiment.clone(),
            real_fraction: first.real_fraction,
            synthetic_count: first.synthetic_count,
            series: first.series,
            runs: ok.len(),
            failed: chunk.len() - ok.len(),
            accuracy: aggregate(&acc).ok(),
            log_loss: aggregate(&loss).ok(),
        });
    }

    Ok(ExperimentReport {
        spec: spec.clone(),
        records,
        cells,
        elapsed_ms: started.elapsed().as_millis() as u64,
    })
}

/// All cells of one repetition at one real fraction.
fn run_job<S: Scalar>(
    dataset: &Dataset,
    spec: &ExperimentSpec,
    repetition: usize,
    fraction: f64,
) -> Vec<RunRecord> {
    let run_seed = run_seed(spec.master_seed, repetition);
    let series = spec.series();
    let record = |(s, count): (Series, usize),
                  synthetic_total: usize,
                  outcome: Result<(f64, f64)>,
                  wall_ms: u64| {
        let (accuracy, log_loss, error) = match outcome {
            Ok((a, l)) => (a, l, None),
            Err(e) => (f64::NAN, f64::NAN, Some(e.to_string())),
        };
        RunRecord {
            experiment: spec.name.clone(),
            real_fraction: fraction,
            synthetic_count: if s == Series::TopUp {
                synthetic_total
            } else {
                count
            },
            series: s,
            repetition,
            run_seed,
            accuracy,
            log_loss,
            wall_ms,
            error,
        }
    };

    let prepared = (|| -> Result<_> {
        let (train, test, _) = prepare_split(dataset, run_seed)?;
        let kept = subsample_fraction(
            &train,
            fraction,
            &mut SeededRng::new(subsample_seed(run_seed)),
        )?;
        Ok((train, test, kept))
    })();
    let (train, test, kept) = match prepared {
        Ok(p) => p,
        Err(e) => {
            let msg = e.to_string();
            return series
                .into_iter()
                .map(|s| record(s, 0, Err(Error::Data(msg.clone())), 0))
                .collect();
        }
    };
    let full = train.class_counts();
    let have = kept.class_counts();
    let plans: Vec<Vec<usize>> = series
        .iter()
        .map(|&(s, count)| synthetic_plan(s, count, &full, &have))
        .collect();

    let needs_gans = plans.iter().flatten().any(|&p| p > 0);
    let gans: Result<Vec<GanModel<S>>> = if needs_gans {
        let cfg = GanConfig {
            seed: gan_seed(run_seed),
            ..spec.gan.clone()
        };
        train_class_gans::<S>(&kept, &cfg)
    } else {
        Ok(Vec::new())
    };
    if let Err(e) = &gans {
        log::warn!("repetition {repetition}, fraction {fraction}: {e}");
    }
    let classifier_cfg = ClassifierConfig {
        seed: classifier_seed(run_seed),
        ..spec.classifier.clone()
    };

    series
        .iter()
        .zip(&plans)
        .map(|(&s, plan)| {
            let started = Instant::now();
            let total: usize = plan.iter().sum();
            let outcome = (|| -> Result<(f64, f64)> {
                let augmented = if total == 0 {
                    kept.clone()
                } else {
                    let gans = gans.as_ref().map_err(|e| Error::Training(e.to_string()))?;
                    let mut blocks = Vec::with_capacity(gans.len());
                    for model in gans {
                        let count = plan[model.class_id - 1];
                        let mut rng = SeededRng::new(generation_seed(run_seed, model.class_id));
                        blocks.push(generate(model, count, &mut rng)?);
                    }
                    augment_dataset(&kept, &blocks)?
                };
                let trained = train_classifier::<S>(&augmented, &classifier_cfg)?;
                let eval = evaluate(&trained.params, &test)?;
                Ok((eval.accuracy, eval.log_loss))
            })();
            let wall_ms = started.elapsed().as_millis() as u64;
            if let Err(e) = &outcome {
                log::warn!(
                    "repetition {repetition}, fraction {fraction}, {}: {e}",
                    s.0.tag()
                );
            }
            record(s, total, outcome, wall_ms)
        })
        .collect()
}
