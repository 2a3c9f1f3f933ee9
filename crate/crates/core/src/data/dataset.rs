use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::scalar::Scalar;

/// One fingerprint: signal strengths (dBm) from every access point plus its room.
#[derive(Debug, Clone, PartialEq)]
pub struct RssSample {
    /// Zero-based position in the source file; survives splits and subsampling.
    pub index: usize,
    pub rss: Vec<f64>,
    /// Room class, `1..=class_count`.
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<RssSample>,
    class_count: usize,
    feature_count: usize,
}

impl Dataset {
    pub fn new(samples: Vec<RssSample>, class_count: usize) -> Result<Self> {
        let feature_count = samples
            .first()
            .map(|s| s.rss.len())
            .ok_or_else(|| Error::data("dataset has no samples"))?;
        if class_count == 0 {
            return Err(Error::data("class count must be positive"));
        }
        for s in &samples {
            if s.rss.len() != feature_count {
                return Err(Error::data(format!(
                    "sample {} has {} features, expected {feature_count}",
                    s.index,
                    s.rss.len()
                )));
            }
            if s.label == 0 || s.label > class_count {
                return Err(Error::data(format!(
                    "sample {} has label {} outside 1..={class_count}",
                    s.index, s.label
                )));
            }
        }
        Ok(Self {
            samples,
            class_count,
            feature_count,
        })
    }

    /// Same classes and features, different rows. Used by the split/subsample operations whose
    /// outputs may legitimately be empty for a class.
    pub(crate) fn with_samples(&self, samples: Vec<RssSample>) -> Self {
        Self {
            samples,
            class_count: self.class_count,
            feature_count: self.feature_count,
        }
    }

    pub fn samples(&self) -> &[RssSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for s in &self.samples {
            counts[s.label - 1] += 1;
        }
        counts
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    /// Feature matrix, one row per sample.
    pub fn features<S: Scalar>(&self) -> Matrix<S> {
        let data = self
            .samples
            .iter()
            .flat_map(|s| s.rss.iter().map(|&x| S::of(x)))
            .collect();
        Matrix::from_vec(self.samples.len(), self.feature_count, data).expect("rows share M")
    }

    /// One-hot label matrix, `N × C`.
    pub fn one_hot_labels<S: Scalar>(&self) -> Matrix<S> {
        let mut m = Matrix::zeros(self.samples.len(), self.class_count);
        for (i, s) in self.samples.iter().enumerate() {
            m.set(i, s.label - 1, S::one());
        }
        m
    }

    /// Appends rows built from a matrix of features, all labelled `label`. New samples get
    /// indices after the current maximum.
    pub fn with_appended(&self, label: usize, rows: &Matrix<f64>) -> Result<Self> {
        if label == 0 || label > self.class_count {
            return Err(Error::data(format!(
                "label {label} outside 1..={}",
                self.class_count
            )));
        }
        if rows.rows() > 0 && rows.cols() != self.feature_count {
            return Err(Error::shape(format!(
                "appending {} features to a dataset with {}",
                rows.cols(),
                self.feature_count
            )));
        }
        let first = self.samples.iter().map(|s| s.index + 1).max().unwrap_or(0);
        let mut samples = self.samples.clone();
        samples.extend(
            (first..)
                .zip(rows.iter_rows())
                .map(|(index, row)| RssSample {
                    index,
                    rss: row.to_vec(),
                    label,
                }),
        );
        Ok(self.with_samples(samples))
    }
}

/// Parses the benchmark text format: one sample per line, `M` signal strengths followed by the
/// integer room label, tab-separated (comma-separated accepted when a line has no tabs).
pub fn parse_dataset(text: &str, source: &Path) -> Result<Dataset> {
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: source.to_path_buf(),
        line,
        msg,
    };
    let mut samples = Vec::new();
    let mut columns = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = if line.contains('\t') {
            line.split('\t').map(str::trim).collect()
        } else {
            line.split(',').map(str::trim).collect()
        };
        let expected = *columns.get_or_insert(fields.len());
        if fields.len() < 2 {
            return Err(parse_err(
                line_no,
                "need at least one feature and a label".into(),
            ));
        }
        if fields.len() != expected {
            return Err(parse_err(
                line_no,
                format!("{} columns, expected {expected}", fields.len()),
            ));
        }
        let (label_field, rss_fields) = fields.split_last().expect("at least two fields");
        let rss = rss_fields
            .iter()
            .enumerate()
            .map(|(c, f)| {
                f.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| parse_err(line_no, format!("column {}: bad value {f:?}", c + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        let label = label_field
            .parse::<usize>()
            .ok()
            .filter(|&l| l >= 1)
            .ok_or_else(|| parse_err(line_no, format!("bad label {label_field:?}")))?;
        samples.push(RssSample {
            index: samples.len(),
            rss,
            label,
        });
    }
    if samples.is_empty() {
        return Err(Error::data(format!(
            "{} contains no samples",
            source.display()
        )));
    }
    let class_count = samples.iter().map(|s| s.label).max().unwrap_or(0);
    Dataset::new(samples, class_count)
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    parse_dataset(&text, path)
}

/// Renders samples in the input text format. Integral values print without decimals so the
/// benchmark file re-renders byte-for-byte; other values keep `precision` decimals.
pub fn render_samples(samples: &[RssSample], precision: usize) -> String {
    let mut out = String::new();
    for s in samples {
        for x in &s.rss {
            if x.fract() == 0.0 && x.abs() < 1e15 {
                let _ = write!(out, "{}\t", *x as i64);
            } else {
                let _ = write!(out, "{x:.precision$}\t");
            }
        }
        let _ = writeln!(out, "{}", s.label);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(text: &str) -> Result<Dataset> {
        parse_dataset(text, Path::new("mem"))
    }

    #[test]
    fn parses_benchmark_line() {
        let ds = p("-64\t-56\t-61\t-66\t-71\t-82\t-81\t1\n").unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(
            ds.samples()[0].rss,
            vec![-64., -56., -61., -66., -71., -82., -81.]
        );
        assert_eq!(ds.samples()[0].label, 1);
        assert_eq!(ds.feature_count(), 7);
    }

    #[test]
    fn comma_fallback() {
        let ds = p("-64,-56,2\n-60,-50,1\n").unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.class_count(), 2);
    }

    #[test]
    fn empty_file_is_an_error() {
        assert!(p("").is_err());
        assert!(p("\n\n").is_err());
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = p("-1\t-2\t1\n-1\tx\t2\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let err = p("-1\t-2\t1\n-1\t2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(matches!(
            p("-1\t-2\t0\n"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn render_round_trips_integers() {
        let text = "-64\t-56\t1\n-3\t-4\t2\n";
        let ds = p(text).unwrap();
        assert_eq!(render_samples(ds.samples(), 3), text);
    }

    #[test]
    fn one_hot_rows() {
        let ds = p("0\t2\n0\t1\n0\t4\n").unwrap();
        let y = ds.one_hot_labels::<f64>();
        assert_eq!(y.row(0), &[0., 1., 0., 0.]);
        assert_eq!(y.row(1), &[1., 0., 0., 0.]);
        assert_eq!(y.row(2), &[0., 0., 0., 1.]);
    }
}
