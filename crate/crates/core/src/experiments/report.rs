use std::fmt::Write as _;
use std::io::Write;

use crate::error::Result;
use crate::experiments::{CellSummary, ExperimentReport, Series, Stats};

fn fmt_opt(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        String::new()
    }
}

/// One line per run. `wall_ms` makes this file differ between otherwise identical runs.
pub fn write_raw_csv<W: Write>(out: W, report: &ExperimentReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "experiment",
        "real_fraction",
        "synthetic_count",
        "interpretation",
        "run_seed",
        "accuracy",
        "log_loss",
        "wall_ms",
        "error",
    ])?;
    for r in &report.records {
        w.write_record([
            r.experiment.clone(),
            format!("{:.2}", r.real_fraction),
            r.synthetic_count.to_string(),
            r.series.tag().to_string(),
            r.run_seed.to_string(),
            fmt_opt(r.accuracy),
            fmt_opt(r.log_loss),
            r.wall_ms.to_string(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn stats_fields(s: Option<Stats>) -> [String; 4] {
    match s {
        Some(s) => [
            fmt_opt(s.mean),
            fmt_opt(s.std),
            fmt_opt(s.min),
            fmt_opt(s.max),
        ],
        None => Default::default(),
    }
}

/// One line per cell; contains no timing, so identical seeds give identical bytes.
pub fn write_aggregate_csv<W: Write>(out: W, report: &ExperimentReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "experiment",
        "real_fraction",
        "synthetic_count",
        "interpretation",
        "runs",
        "failed",
        "accuracy_mean",
        "accuracy_std",
        "accuracy_min",
        "accuracy_max",
        "log_loss_mean",
        "log_loss_std",
        "log_loss_min",
        "log_loss_max",
    ])?;
    for c in &report.cells {
        let mut row = vec![
            c.experiment.clone(),
            format!("{:.2}", c.real_fraction),
            c.synthetic_count.to_string(),
            c.series.tag().to_string(),
            c.runs.to_string(),
            c.failed.to_string(),
        ];
        row.extend(stats_fields(c.accuracy));
        row.extend(stats_fields(c.log_loss));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn fractions(report: &ExperimentReport) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for c in &report.cells {
        if !out.contains(&c.real_fraction) {
            out.push(c.real_fraction);
        }
    }
    out
}

/// Rows are synthetic counts (or series), columns are real fractions.
fn table_rows(report: &ExperimentReport) -> Vec<(String, Vec<Option<&CellSummary>>)> {
    let fracs = fractions(report);
    let mut keys: Vec<(Series, usize)> = Vec::new();
    for c in &report.cells {
        let key = match c.series {
            Series::Count(_) => (c.series, c.synthetic_count),
            s => (s, 0),
        };
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(series, count)| {
            let label = match series {
                Series::Count(_) => count.to_string(),
                s => s.tag().to_string(),
            };
            let cells = fracs
                .iter()
                .map(|&f| report.cell(f, series, count))
                .collect();
            (label, cells)
        })
        .collect()
}

/// Wide CSV: one row per synthetic count, `accuracy_<pct>` and `log_loss_<pct>` per fraction.
pub fn write_table_csv<W: Write>(out: W, report: &ExperimentReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["synthetic".to_string()];
    for f in fractions(report) {
        let pct = (f * 100.0).round();
        header.push(format!("accuracy_{pct}"));
        header.push(format!("log_loss_{pct}"));
    }
    w.write_record(&header)?;
    for (label, cells) in table_rows(report) {
        let mut row = vec![label];
        for c in cells {
            let (a, l) = c
                .map(|c| (c.accuracy.map(|s| s.mean), c.log_loss.map(|s| s.mean)))
                .unwrap_or((None, None));
            row.push(a.map(fmt_opt).unwrap_or_default());
            row.push(l.map(fmt_opt).unwrap_or_default());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Markdown table of mean accuracy (± std) and mean log loss.
pub fn render_table_markdown(report: &ExperimentReport) -> String {
    let fracs = fractions(report);
    let mut s = String::new();
    let reading = if report.spec.top_up {
        "rows are the real-only and topped-up series".to_string()
    } else {
        format!(
            "synthetic counts read as `{}`",
            report.spec.interpretation.tag()
        )
    };
    let _ = writeln!(
        s,
        "Mean test accuracy (%) and log loss over {} repetitions; {reading}.\n",
        report.spec.repetitions
    );
    s.push_str("| Synthetic |");
    for f in &fracs {
        let _ = write!(
            s,
            " {:.0}% real: accuracy | {:.0}% real: log loss |",
            f * 100.0,
            f * 100.0
        );
    }
    s.push_str("\n|---:|");
    for _ in &fracs {
        s.push_str("---:|---:|");
    }
    s.push('\n');
    for (label, cells) in table_rows(report) {
        let _ = write!(s, "| {label} |");
        for c in cells {
            match c.and_then(|c| c.accuracy.zip(c.log_loss)) {
                Some((a, l)) => {
                    let _ = write!(s, " {:.1} ± {:.1} | {:.3} |", a.mean, a.std, l.mean);
                }
                None => s.push_str(" – | – |"),
            }
        }
        s.push('\n');
    }
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Line chart of mean accuracy against real fraction, one line per series present in the
/// report (for a top-up report: real only and topped up).
pub fn render_svg(report: &ExperimentReport, title: &str) -> String {
    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const LEFT: f64 = 60.0;
    const RIGHT: f64 = 20.0;
    const TOP: f64 = 40.0;
    const BOTTOM: f64 = 50.0;
    let colours = [
        "#1f4e9c", "#c0392b", "#27864a", "#8e44ad", "#d68910", "#555555",
    ];

    let mut series: Vec<(Series, usize)> = Vec::new();
    for c in &report.cells {
        let key = match c.series {
            Series::Count(_) => (c.series, c.synthetic_count),
            s => (s, 0),
        };
        if !series.contains(&key) {
            series.push(key);
        }
    }
    let points: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|&(s, n)| {
            report
                .cells
                .iter()
                .filter(|c| {
                    c.series == s && (c.synthetic_count == n || !matches!(s, Series::Count(_)))
                })
                .filter_map(|c| c.accuracy.map(|a| (c.real_fraction * 100.0, a.mean)))
                .collect()
        })
        .collect();

    let all_y = points.iter().flatten().map(|p| p.1);
    let y_lo_data = all_y.clone().fold(f64::INFINITY, f64::min);
    let y_lo = if y_lo_data.is_finite() {
        ((y_lo_data / 10.0).floor() * 10.0).clamp(0.0, 90.0)
    } else {
        0.0
    };
    let y_hi = 100.0;
    let px = |x: f64| LEFT + x / 100.0 * (W - LEFT - RIGHT);
    let py = |y: f64| TOP + (y_hi - y) / (y_hi - y_lo) * (H - TOP - BOTTOM);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    // axes and grid
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        H - BOTTOM,
        W - RIGHT,
        H - BOTTOM
    );
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{}" stroke="black"/>"#,
        H - BOTTOM
    );
    for k in 0..=10 {
        let x = f64::from(k) * 10.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{x:.0}</text>"#,
            px(x),
            H - BOTTOM + 16.0
        );
    }
    let mut y = y_lo;
    while y <= y_hi + 1e-9 {
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{0:.1}" x2="{1}" y2="{0:.1}" stroke="#dddddd"/><text x="{2}" y="{3:.1}" text-anchor="end">{y:.0}</text>"##,
            py(y),
            W - RIGHT,
            LEFT - 6.0,
            py(y) + 4.0
        );
        y += 10.0;
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">Real data used (%)</text>"#,
        (LEFT + W - RIGHT) / 2.0,
        H - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">Test accuracy (%)</text>"#,
        (TOP + H - BOTTOM) / 2.0
    );

    for (i, ((key, n), pts)) in series.iter().zip(&points).enumerate() {
        let colour = colours[i % colours.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.1},{:.1}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="2" points="{}"/>"#,
            path.join(" ")
        );
        for &(x, y) in pts {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{colour}"/>"#,
                px(x),
                py(y)
            );
        }
        let label = match key {
            Series::RealOnly => "Real data only".to_string(),
            Series::TopUp => "Real + synthetic (topped up)".to_string(),
            Series::Count(_) => format!("Real + {n} synthetic"),
        };
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{0}" y1="{ly}" x2="{1}" y2="{ly}" stroke="{colour}" stroke-width="2"/><text x="{2}" y="{3}">{4}</text>"#,
            W - RIGHT - 200.0,
            W - RIGHT - 176.0,
            W - RIGHT - 170.0,
            ly + 4.0,
            escape(&label)
        );
    }
    s.push_str("</svg>\n");
    s
}
