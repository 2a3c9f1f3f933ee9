//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.
//!
//! Criteria 1–5 and 10 need the canonical benchmark file. It is looked up in `$RSS_DATASET`,
//! then `$RSS_AUGMENT_CACHE/wifi_localization.txt`, then `<workspace>/data/wifi_localization.txt`.
//! When it cannot be found those criteria fail with a message saying so; they are never
//! evaluated on substitute data. Criterion 9 runs on the canonical file when present and on the
//! bundled surrogate fixture otherwise.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rss_augment::data::{load_dataset, stratified_split, Standardizer};
use rss_augment::gan::{
    disc_loss, discriminator_objective, gen_loss, generator_objective, GanConfig, LossVariant,
};
use rss_augment::nn::{
    Activation, AdamConfig, AdamState, DenseLayer, Gradients, Matrix, MlpParams, OutputGrad,
    SeededRng,
};

// Tolerances and thresholds.
const BASELINE_MIN: f64 = 93.0;
const SCARCE_RANGE: (f64, f64) = (50.0, 75.0);
const SCARCE_GAP: f64 = 20.0;
const RECOVERY_WITHIN: f64 = 6.0;
const RECOVERY_ABOVE_SCARCE: f64 = 15.0;
const SATURATION_MAX_DIFF: f64 = 2.0;
const TOPUP_GAIN_AT_5: f64 = 10.0;
const FD_RELATIVE: f64 = 1e-5;
const FD_BUDGET: Duration = Duration::from_secs(10);
const ADAM_TOL: f64 = 1e-12;
const PROBE_TOL: f64 = 1e-9;
const DATA_TOL: f64 = 1e-9;
const BASELINE_BUDGET: Duration = Duration::from_secs(3 * 60);
const TABLE_BUDGET: Duration = Duration::from_secs(30 * 60);
const SEED: u64 = 7;

struct Outcome {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn report(results: &mut Vec<Outcome>, id: u32, name: &'static str, pass: bool, detail: String) {
    println!(
        "[{}] criterion {id:>2} {name}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    results.push(Outcome {
        id,
        name,
        pass,
        detail,
    });
}

fn workspace_root() -> PathBuf {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    root.canonicalize().unwrap_or(root)
}

fn canonical_candidates() -> Vec<PathBuf> {
    let mut c = Vec::new();
    if let Some(p) = std::env::var_os("RSS_DATASET") {
        c.push(PathBuf::from(p));
    }
    if let Some(p) = std::env::var_os("RSS_AUGMENT_CACHE") {
        c.push(PathBuf::from(p).join("wifi_localization.txt"));
    }
    c.push(workspace_root().join("data/wifi_localization.txt"));
    c
}

fn surrogate() -> PathBuf {
    workspace_root().join("crates/core/tests/fixtures/surrogate_rooms.txt")
}

// ---------------------------------------------------------------------------------------------
// CLI runs and aggregate parsing

struct Cell {
    fraction: f64,
    count: usize,
    series: String,
    accuracy: f64,
}

fn run_cli(
    args: &[&str],
    dataset: &Path,
    out: &Path,
    tag: &str,
) -> Result<(PathBuf, Duration), String> {
    let started = Instant::now();
    let output = Command::new(env!("CARGO_BIN_EXE_rss-augment"))
        .args(args)
        .arg("--dataset")
        .arg(dataset)
        .arg("--output-dir")
        .arg(out)
        .arg("--tag")
        .arg(tag)
        .env_remove("RUST_LOG")
        .output()
        .map_err(|e| e.to_string())?;
    if !output.status.success() {
        return Err(format!(
            "`rss-augment {}` exited with {}: {}",
            args.join(" "),
            output.status,
            String::from_utf8_lossy(&output.stderr).trim()
        ));
    }
    Ok((out.join(args[0]).join(tag), started.elapsed()))
}

fn parse_aggregate(path: &Path) -> Result<Vec<Cell>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or("empty aggregate")?.split(',').collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or(format!("no column {name}"))
    };
    let (f, n, s, a) = (
        col("real_fraction")?,
        col("synthetic_count")?,
        col("interpretation")?,
        col("accuracy_mean")?,
    );
    lines
        .map(|l| {
            let v: Vec<&str> = l.split(',').collect();
            Ok(Cell {
                fraction: v[f].parse().map_err(|e| format!("{e}"))?,
                count: v[n].parse().map_err(|e| format!("{e}"))?,
                series: v[s].to_string(),
                accuracy: v[a].parse().unwrap_or(f64::NAN),
            })
        })
        .collect()
}

fn find(cells: &[Cell], fraction: f64, series: &str, count: Option<usize>) -> f64 {
    cells
        .iter()
        .find(|c| {
            (c.fraction - fraction).abs() < 1e-9
                && c.series == series
                && count.is_none_or(|n| c.count == n)
        })
        .map(|c| c.accuracy)
        .unwrap_or(f64::NAN)
}

// ---------------------------------------------------------------------------------------------
// Gradient oracle

const H: f64 = 1e-4;

fn close(analytic: f64, numeric: f64) -> bool {
    let diff = (analytic - numeric).abs();
    diff <= 1e-7 || diff / analytic.abs().max(numeric.abs()) <= FD_RELATIVE
}

fn numeric_grad(net: &MlpParams<f64>, loss: impl Fn(&MlpParams<f64>) -> f64) -> Vec<f64> {
    let mut probe = net.clone();
    (0..net.param_count())
        .map(|i| {
            let theta = net.param(i);
            probe.set_param(i, theta + H);
            let up = loss(&probe);
            probe.set_param(i, theta - H);
            let down = loss(&probe);
            probe.set_param(i, theta);
            (up - down) / (2.0 * H)
        })
        .collect()
}

fn near_kink(net: &MlpParams<f64>, x: &Matrix<f64>) -> bool {
    let cache = net.forward(x).unwrap();
    net.layers()
        .iter()
        .zip(cache.pre_activations())
        .any(|(l, z)| {
            matches!(
                l.activation,
                Activation::Relu | Activation::LeakyRelu { .. }
            ) && z.as_slice().iter().any(|v| v.abs() < 1e-3)
        })
}

fn pick<T: Copy>(rng: &mut SeededRng, items: &[T]) -> T {
    items[(rng.next_u64() % items.len() as u64) as usize]
}

/// Random network with random depth, widths and activations, away from rectifier kinks.
fn random_net(rng: &mut SeededRng, input: usize, head: Activation, out: usize) -> MlpParams<f64> {
    let hidden = [
        Activation::Relu,
        Activation::LeakyRelu { alpha: 0.2 },
        Activation::Sigmoid,
        Activation::Tanh,
    ];
    let depth = 1 + (rng.next_u64() % 3) as usize;
    let mut dims = vec![input];
    let mut acts = Vec::new();
    for _ in 1..depth {
        dims.push(1 + (rng.next_u64() % 12) as usize);
        acts.push(pick(rng, &hidden));
    }
    dims.push(out);
    acts.push(head);
    MlpParams::init(&dims, &acts, rng).unwrap()
}

/// Returns (cases passed, cases run, worst relative error).
fn gradient_suite() -> (usize, usize, f64) {
    let mut passed = 0;
    let mut worst: f64 = 0.0;
    let mut check = |grads: &Gradients<f64>, numeric: &[f64]| {
        let mut ok = true;
        for (a, n) in grads.iter().zip(numeric) {
            let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-12);
            if a.abs().max(n.abs()) > 1e-6 {
                worst = worst.max(rel);
            }
            ok &= close(a, *n);
        }
        ok
    };
    let heads = [
        Activation::Softmax,
        Activation::Sigmoid,
        Activation::Identity,
        Activation::Tanh,
    ];
    let mut case = 0u64;
    let mut total = 0;
    // 60 generic backprop cases with a random upstream gradient
    while total < 60 {
        case += 1;
        let mut rng = SeededRng::new(case);
        let input = 1 + (rng.next_u64() % 6) as usize;
        let out = 1 + (rng.next_u64() % 5) as usize;
        let head = pick(&mut rng, &heads);
        let net = random_net(&mut rng, input, head, out);
        let rows = 1 + (rng.next_u64() % 4) as usize;
        let x = rng.sample_normal(rows, input);
        if near_kink(&net, &x) {
            continue;
        }
        let w = rng.sample_normal(x.rows(), out);
        let cache = net.forward(&x).unwrap();
        let (g, _) = net
            .backward(&cache, OutputGrad::Activation(w.clone()))
            .unwrap();
        let loss = |p: &MlpParams<f64>| {
            let y = p.predict(&x).unwrap();
            y.as_slice()
                .iter()
                .zip(w.as_slice())
                .map(|(a, b)| a * b)
                .sum::<f64>()
        };
        passed += usize::from(check(&g, &numeric_grad(&net, loss)));
        total += 1;
    }
    // 20 discriminator-objective cases
    while total < 80 {
        case += 1;
        let mut rng = SeededRng::new(case);
        let m = 1 + (rng.next_u64() % 7) as usize;
        let d = random_net(&mut rng, m, Activation::Sigmoid, 1);
        let rows = 1 + (rng.next_u64() % 6) as usize;
        let real = rng.sample_normal(rows, m);
        let rows = 1 + (rng.next_u64() % 6) as usize;
        let fake = rng.sample_normal(rows, m);
        if near_kink(&d, &real) || near_kink(&d, &fake) {
            continue;
        }
        let (_, g, _, _) = discriminator_objective(&d, &real, &fake).unwrap();
        let numeric = numeric_grad(&d, |p| disc_loss(p, &real, &fake).unwrap());
        passed += usize::from(check(&g, &numeric));
        total += 1;
    }
    // 20 generator-objective cases, both variants
    while total < 100 {
        case += 1;
        let mut rng = SeededRng::new(case);
        let latent = 1 + (rng.next_u64() % 4) as usize;
        let m = 1 + (rng.next_u64() % 5) as usize;
        let g = random_net(&mut rng, latent, Activation::Identity, m);
        let d = random_net(&mut rng, m, Activation::Sigmoid, 1);
        let rows = 1 + (rng.next_u64() % 5) as usize;
        let z = rng.sample_normal(rows, latent);
        let fake = g.predict(&z).unwrap();
        if near_kink(&g, &z) || near_kink(&d, &fake) {
            continue;
        }
        let variant = if total % 2 == 0 {
            LossVariant::Saturating
        } else {
            LossVariant::NonSaturating
        };
        let (_, grads) = generator_objective(&g, &d, &z, variant).unwrap();
        let n = z.rows() as f64;
        let numeric = numeric_grad(&g, |p| match variant {
            LossVariant::Saturating => gen_loss(p, &d, &z).unwrap(),
            LossVariant::NonSaturating => {
                let dz = d.predict(&p.predict(&z).unwrap()).unwrap();
                -dz.as_slice().iter().map(|v| v.ln()).sum::<f64>() / n
            }
        });
        passed += usize::from(check(&grads, &numeric));
        total += 1;
    }
    (passed, total, worst)
}

// ---------------------------------------------------------------------------------------------

fn scalar_net(theta: f64) -> MlpParams<f64> {
    MlpParams::new(vec![DenseLayer::new(
        Matrix::from_vec(1, 1, vec![theta]).unwrap(),
        vec![0.0],
        Activation::Identity,
    )
    .unwrap()])
    .unwrap()
}

fn square_grad(net: &MlpParams<f64>) -> Gradients<f64> {
    let mut g = Gradients::zeros_like(net);
    g.layers[0].weights.set(0, 0, 2.0 * net.param(0));
    g
}

fn adam_criterion() -> (bool, String) {
    let mut net = scalar_net(1.0);
    let mut state = AdamState::new(&net, AdamConfig::default());
    let g = square_grad(&net);
    state.step(&mut net, &g).unwrap();
    // t = 1: m̂ = g = 2, v̂ = g² = 4, θ ← 1 − 0.001 · 2 / (2 + 1e-8)
    let expected = 1.0 - 0.001 * 2.0 / (4f64.sqrt() + 1e-8);
    let err = (net.param(0) - expected).abs();

    let mut net = scalar_net(1.0);
    let mut state = AdamState::new(&net, AdamConfig::default());
    let mut prev = 1.0f64;
    let mut monotone = true;
    for _ in 0..1000 {
        let g = square_grad(&net);
        state.step(&mut net, &g).unwrap();
        let now = net.param(0).abs();
        monotone &= now < prev;
        prev = now;
    }
    (
        err <= ADAM_TOL && monotone && prev < 1.0,
        format!(
            "one step θ = {:.15} (error {err:.1e} ≤ {ADAM_TOL:.0e}); 1000 steps |θ| = {prev:.6}, strictly decreasing: {monotone}",
            expected
        ),
    )
}

fn probe_criterion() -> (bool, String) {
    let d = MlpParams::new(vec![DenseLayer::new(
        Matrix::zeros(7, 1),
        vec![0.0],
        Activation::Sigmoid,
    )
    .unwrap()])
    .unwrap();
    let mut rng = SeededRng::new(1);
    let g = GanConfig::default()
        .init_generator::<f64>(7, &mut rng)
        .unwrap();
    let real = rng.sample_normal(32, 7);
    let fake = rng.sample_normal(32, 7);
    let z = rng.sample_normal(32, 16);
    let ld = disc_loss(&d, &real, &fake).unwrap();
    let lg = gen_loss(&g, &d, &z).unwrap();
    let ed = (ld - 2.0 * 0.5f64.ln()).abs();
    let eg = (lg - 0.5f64.ln()).abs();
    (
        ed <= PROBE_TOL && eg <= PROBE_TOL,
        format!("disc_loss {ld:.12} (error {ed:.1e}), gen_loss {lg:.12} (error {eg:.1e}), tolerance {PROBE_TOL:.0e}"),
    )
}

fn data_criterion(path: &Path) -> (bool, String) {
    let ds = match load_dataset(path) {
        Ok(d) => d,
        Err(e) => return (false, e.to_string()),
    };
    let counts = ds.class_counts();
    let (train, test) = stratified_split(&ds, &mut SeededRng::new(SEED)).unwrap();
    let st = Standardizer::fit(&train).unwrap();
    let z = st.apply(&train).unwrap().features::<f64>();
    let n = z.rows() as f64;
    let mut worst_mean: f64 = 0.0;
    let mut worst_std: f64 = 0.0;
    for j in 0..z.cols() {
        let mean = z.iter_rows().map(|r| r[j]).sum::<f64>() / n;
        let var = z.iter_rows().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
        worst_mean = worst_mean.max(mean.abs());
        worst_std = worst_std.max((var.sqrt() - 1.0).abs());
    }
    let pass = ds.len() == 2000
        && counts == vec![500; 4]
        && train.class_counts() == vec![250; 4]
        && test.class_counts() == vec![250; 4]
        && worst_mean < DATA_TOL
        && worst_std < DATA_TOL;
    (
        pass,
        format!(
            "{} samples, per class {counts:?}; split train {:?} test {:?}; max |mean| {worst_mean:.1e}, max |std − 1| {worst_std:.1e}",
            ds.len(),
            train.class_counts(),
            test.class_counts()
        ),
    )
}

fn main() {
    let mut results = Vec::new();
    let canonical = canonical_candidates().into_iter().find(|p| p.is_file());
    let missing = || {
        format!(
            "canonical dataset not available (looked in {}); fetch it with `rss-augment fetch` or set RSS_DATASET",
            canonical_candidates()
                .iter()
                .map(|p| p.display().to_string())
                .collect::<Vec<_>>()
                .join(", ")
        )
    };
    match &canonical {
        Some(p) => println!("canonical dataset: {}", p.display()),
        None => println!("{}", missing()),
    }
    let out = tempfile::tempdir().expect("temp dir");

    // 9 first: its table1 run doubles as the source for 1–4 when the canonical file is present.
    let det_data = canonical.clone().unwrap_or_else(surrogate);
    let seed = SEED.to_string();
    let first = run_cli(&["table1", "--seed", &seed], &det_data, out.path(), "a");
    let second = run_cli(&["table1", "--seed", &seed], &det_data, out.path(), "b");
    let table = match (&first, &second) {
        (Ok((a, ta)), Ok((b, _))) => {
            let ba = std::fs::read(a.join("aggregate.csv")).unwrap_or_default();
            let bb = std::fs::read(b.join("aggregate.csv")).unwrap_or_default();
            let same = !ba.is_empty() && ba == bb;
            report(
                &mut results,
                9,
                "determinism",
                same,
                format!(
                    "`table1 --seed 7` twice on {}: aggregated CSVs {} ({} bytes)",
                    if canonical.is_some() {
                        "the canonical file"
                    } else {
                        "the surrogate fixture"
                    },
                    if same { "byte-identical" } else { "differ" },
                    ba.len()
                ),
            );
            Some((a.clone(), *ta))
        }
        (Err(e), _) | (_, Err(e)) => {
            report(&mut results, 9, "determinism", false, e.clone());
            None
        }
    };

    match (&canonical, &table) {
        (Some(_), Some((dir, elapsed))) => match parse_aggregate(&dir.join("aggregate.csv")) {
            Ok(cells) => {
                let base = find(&cells, 1.0, "totals", Some(0));
                let scarce = find(&cells, 0.1, "totals", Some(0));
                report(
                    &mut results,
                    1,
                    "baseline",
                    base >= BASELINE_MIN && *elapsed < TABLE_BUDGET,
                    format!("100% real mean accuracy {base:.2}% (≥ {BASELINE_MIN}); whole table1 run {:.0} s (baseline budget {} s)", elapsed.as_secs_f64(), BASELINE_BUDGET.as_secs()),
                );
                report(
                    &mut results,
                    2,
                    "scarcity gap",
                    scarce >= SCARCE_RANGE.0 && scarce <= SCARCE_RANGE.1 && base - scarce >= SCARCE_GAP,
                    format!(
                        "10% real-only {scarce:.2}% (want [{}, {}]), gap to baseline {:.2} (≥ {SCARCE_GAP})",
                        SCARCE_RANGE.0,
                        SCARCE_RANGE.1,
                        base - scarce
                    ),
                );
                let aug: Vec<(usize, f64)> = [250, 500, 750, 1000]
                    .iter()
                    .map(|&n| (n, find(&cells, 0.1, "totals", Some(n))))
                    .collect();
                let (best_n, best) =
                    aug.iter()
                        .copied()
                        .fold((0, f64::NEG_INFINITY), |b, x| if x.1 > b.1 { x } else { b });
                report(
                    &mut results,
                    3,
                    "augmentation recovery",
                    base - best <= RECOVERY_WITHIN && best - scarce >= RECOVERY_ABOVE_SCARCE && *elapsed < TABLE_BUDGET,
                    format!(
                        "best 10% + synthetic cell {best:.2}% at {best_n}: {:.2} below baseline (≤ {RECOVERY_WITHIN}), {:.2} above real-only (≥ {RECOVERY_ABOVE_SCARCE}); table1 runtime {:.0} s (< {} s)",
                        base - best,
                        best - scarce,
                        elapsed.as_secs_f64(),
                        TABLE_BUDGET.as_secs()
                    ),
                );
                let a750 = find(&cells, 0.1, "totals", Some(750));
                let a1000 = find(&cells, 0.1, "totals", Some(1000));
                report(
                    &mut results,
                    4,
                    "saturation",
                    (a750 - a1000).abs() < SATURATION_MAX_DIFF,
                    format!(
                        "|{a750:.2} − {a1000:.2}| = {:.2} (< {SATURATION_MAX_DIFF})",
                        (a750 - a1000).abs()
                    ),
                );
            }
            Err(e) => {
                for (id, name) in [
                    (1, "baseline"),
                    (2, "scarcity gap"),
                    (3, "augmentation recovery"),
                    (4, "saturation"),
                ] {
                    report(&mut results, id, name, false, e.clone());
                }
            }
        },
        _ => {
            let why = if canonical.is_none() {
                missing()
            } else {
                "table1 run failed (see criterion 9)".into()
            };
            for (id, name) in [
                (1, "baseline"),
                (2, "scarcity gap"),
                (3, "augmentation recovery"),
                (4, "saturation"),
            ] {
                report(&mut results, id, name, false, why.clone());
            }
        }
    }

    match &canonical {
        Some(data) => match run_cli(&["sweep", "--seed", &seed], data, out.path(), "s")
            .and_then(|(dir, _)| parse_aggregate(&dir.join("aggregate.csv")))
        {
            Ok(cells) => {
                let mut pass = true;
                let mut worst = f64::INFINITY;
                let mut fractions: Vec<f64> = cells.iter().map(|c| c.fraction).collect();
                fractions.dedup();
                for &f in fractions.iter().filter(|f| **f <= 0.5 + 1e-9) {
                    let d = find(&cells, f, "top_up", None) - find(&cells, f, "real_only", None);
                    worst = worst.min(d);
                    pass &= d >= 0.0;
                }
                let gain5 =
                    find(&cells, 0.05, "top_up", None) - find(&cells, 0.05, "real_only", None);
                let end_real = find(&cells, 1.0, "real_only", None);
                let end_top = find(&cells, 1.0, "top_up", None);
                pass &= gain5 >= TOPUP_GAIN_AT_5 && end_real == end_top;
                report(
                    &mut results,
                    5,
                    "top-up dominance",
                    pass,
                    format!(
                        "min (topped-up − real-only) for fractions ≤ 50%: {worst:.2} (≥ 0); gain at 5%: {gain5:.2} (≥ {TOPUP_GAIN_AT_5}); at 100%: {end_real:.6} vs {end_top:.6} (exactly equal)"
                    ),
                );
            }
            Err(e) => report(&mut results, 5, "top-up dominance", false, e),
        },
        None => report(&mut results, 5, "top-up dominance", false, missing()),
    }

    let started = Instant::now();
    let (passed, total, worst) = gradient_suite();
    let took = started.elapsed();
    report(
        &mut results,
        6,
        "gradient oracle",
        passed == total && total == 100 && took < FD_BUDGET,
        format!(
            "{passed}/{total} cases (60 backprop, 20 discriminator objective, 20 generator objective) within {FD_RELATIVE:.0e} relative; worst {worst:.1e}; {:.2} s (< {} s)",
            took.as_secs_f64(),
            FD_BUDGET.as_secs()
        ),
    );

    let (pass, detail) = adam_criterion();
    report(&mut results, 7, "Adam oracle", pass, detail);

    let (pass, detail) = probe_criterion();
    report(&mut results, 8, "equilibrium probe", pass, detail);

    match &canonical {
        Some(p) => {
            let (pass, detail) = data_criterion(p);
            report(&mut results, 10, "data contracts", pass, detail);
        }
        None => report(&mut results, 10, "data contracts", false, missing()),
    }

    results.sort_by_key(|r| r.id);
    let failed: Vec<&Outcome> = results.iter().filter(|r| !r.pass).collect();
    println!("\nsummary:");
    for r in &results {
        println!(
            "  {:>2} {:<22} {}",
            r.id,
            r.name,
            if r.pass { "PASS" } else { "FAIL" }
        );
    }
    if failed.is_empty() {
        println!("all {} criteria passed", results.len());
    } else {
        println!("{} of {} criteria failed", failed.len(), results.len());
        for r in failed {
            eprintln!("criterion {} failed: {}", r.id, r.detail);
        }
        std::process::exit(1);
    }
}
