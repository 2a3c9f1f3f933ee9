use std::io::Write;

use crate::data::{Dataset, RssSample};
use crate::error::{Error, Result};
use crate::nn::{Matrix, SeededRng};
use crate::scalar::Scalar;

/// Per-class 50/50 partition. Each class is shuffled independently and its first half goes to
/// the training side. Both outputs keep source-file order.
pub fn stratified_split(ds: &Dataset, rng: &mut SeededRng) -> Result<(Dataset, Dataset)> {
    let mut train = Vec::with_capacity(ds.len() / 2);
    let mut test = Vec::with_capacity(ds.len() / 2);
    for (class_idx, mut members) in by_class(ds).into_iter().enumerate() {
        if members.len() % 2 != 0 {
            return Err(Error::data(format!(
                "class {} has an odd number of samples ({}); cannot split evenly",
                class_idx + 1,
                members.len()
            )));
        }
        rng.shuffle(&mut members);
        let half = members.len() / 2;
        train.extend_from_slice(&members[..half]);
        test.extend_from_slice(&members[half..]);
    }
    Ok((collect(ds, train), collect(ds, test)))
}

/// Keeps `round_half_up(fraction · n_c)` randomly chosen samples of every class `c`.
pub fn subsample_fraction(ds: &Dataset, fraction: f64, rng: &mut SeededRng) -> Result<Dataset> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::config(format!(
            "fraction must lie in (0, 1], got {fraction}"
        )));
    }
    let mut keep = Vec::new();
    for (class_idx, members) in by_class(ds).into_iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        let k = per_class_quota(fraction, members.len());
        if k == 0 {
            return Err(Error::data(format!(
                "fraction {fraction} of {} samples in class {} rounds to zero",
                members.len(),
                class_idx + 1
            )));
        }
        let picked = rng.sample_indices(members.len(), k);
        keep.extend(picked.into_iter().map(|i| members[i]));
    }
    Ok(collect(ds, keep))
}

/// `round_half_up(fraction · n)`; the small offset absorbs binary representation error in
/// fractions like 0.15.
pub fn per_class_quota(fraction: f64, n: usize) -> usize {
    (fraction * n as f64 + 0.5 + 1e-9).floor() as usize
}

fn by_class(ds: &Dataset) -> Vec<Vec<usize>> {
    let mut groups = vec![Vec::new(); ds.class_count()];
    for (pos, s) in ds.samples().iter().enumerate() {
        groups[s.label - 1].push(pos);
    }
    groups
}

fn collect(ds: &Dataset, mut positions: Vec<usize>) -> Dataset {
    positions.sort_unstable();
    ds.with_samples(
        positions
            .into_iter()
            .map(|p| ds.samples()[p].clone())
            .collect(),
    )
}

/// Unit basis vector for `label` (1-based) among `classes`.
pub fn one_hot(label: usize, classes: usize) -> Result<Vec<f64>> {
    if label == 0 || label > classes {
        return Err(Error::data(format!("label {label} outside 1..={classes}")));
    }
    let mut v = vec![0.0; classes];
    v[label - 1] = 1.0;
    Ok(v)
}

/// All observations of one class stacked as a `K × M` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMatrix<S> {
    pub class_id: usize,
    pub values: Matrix<S>,
}

impl<S: Scalar> ClassMatrix<S> {
    pub fn observations(&self) -> usize {
        self.values.rows()
    }

    pub fn features(&self) -> usize {
        self.values.cols()
    }
}

pub fn class_matrix<S: Scalar>(ds: &Dataset, class_id: usize) -> Result<ClassMatrix<S>> {
    let rows: Vec<&RssSample> = ds
        .samples()
        .iter()
        .filter(|s| s.label == class_id)
        .collect();
    if rows.is_empty() {
        return Err(Error::data(format!("class {class_id} has no samples")));
    }
    let data = rows
        .iter()
        .flat_map(|s| s.rss.iter().map(|&x| S::of(x)))
        .collect();
    Ok(ClassMatrix {
        class_id,
        values: Matrix::from_vec(rows.len(), ds.feature_count(), data)?,
    })
}

/// CSV with one row per sample: `sample_index,split,class`, ordered by sample index.
pub fn write_split_manifest<W: Write>(out: W, train: &Dataset, test: &Dataset) -> Result<()> {
    let mut rows: Vec<(usize, &str, usize)> = train
        .samples()
        .iter()
        .map(|s| (s.index, "train", s.label))
        .chain(test.samples().iter().map(|s| (s.index, "test", s.label)))
        .collect();
    rows.sort_unstable();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sample_index", "split", "class"])?;
    for (idx, split, class) in rows {
        w.write_record([idx.to_string(), split.to_string(), class.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(per_class: usize, classes: usize) -> Dataset {
        let mut samples = Vec::new();
        for c in 1..=classes {
            for k in 0..per_class {
                samples.push(RssSample {
                    index: samples.len(),
                    rss: vec![c as f64, k as f64],
                    label: c,
                });
            }
        }
        Dataset::new(samples, classes).unwrap()
    }

    #[test]
    fn smallest_even_split() {
        let ds = toy(2, 4);
        let (tr, te) = stratified_split(&ds, &mut SeededRng::new(0)).unwrap();
        assert_eq!(tr.class_counts(), vec![1; 4]);
        assert_eq!(te.class_counts(), vec![1; 4]);
    }

    #[test]
    fn split_is_a_partition() {
        let ds = toy(10, 3);
        let (tr, te) = stratified_split(&ds, &mut SeededRng::new(4)).unwrap();
        let mut all: Vec<usize> = tr
            .samples()
            .iter()
            .chain(te.samples())
            .map(|s| s.index)
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..30).collect::<Vec<_>>());
    }

    #[test]
    fn seeds_change_membership_not_counts() {
        let ds = toy(20, 4);
        let (a, _) = stratified_split(&ds, &mut SeededRng::new(1)).unwrap();
        let (b, _) = stratified_split(&ds, &mut SeededRng::new(2)).unwrap();
        assert_eq!(a.class_counts(), b.class_counts());
        assert_ne!(a.labels().len(), 0);
        assert_ne!(
            a.samples().iter().map(|s| s.index).collect::<Vec<_>>(),
            b.samples().iter().map(|s| s.index).collect::<Vec<_>>()
        );
    }

    #[test]
    fn odd_class_rejected() {
        let mut samples = toy(2, 2).samples().to_vec();
        samples.pop();
        let ds = Dataset::new(samples, 2).unwrap();
        assert!(stratified_split(&ds, &mut SeededRng::new(0)).is_err());
    }

    #[test]
    fn quota_rounding() {
        assert_eq!(per_class_quota(0.10, 250), 25);
        assert_eq!(per_class_quota(0.05, 250), 13);
        assert_eq!(per_class_quota(0.15, 250), 38);
        assert_eq!(per_class_quota(1.0, 250), 250);
        for step in 1..=20usize {
            let f = step as f64 * 0.05;
            let exact = (25 * step).div_ceil(2); // floor(12.5·step + 0.5)
            assert_eq!(per_class_quota(f, 250), exact, "fraction {f}");
        }
    }

    #[test]
    fn subsample_counts_and_identity() {
        let ds = toy(250, 4);
        let sub = subsample_fraction(&ds, 0.10, &mut SeededRng::new(3)).unwrap();
        assert_eq!(sub.class_counts(), vec![25; 4]);
        let sub = subsample_fraction(&ds, 0.05, &mut SeededRng::new(3)).unwrap();
        assert_eq!(sub.class_counts(), vec![13; 4]);
        let full = subsample_fraction(&ds, 1.0, &mut SeededRng::new(3)).unwrap();
        assert_eq!(full, ds);
    }

    #[test]
    fn subsample_rejects_bad_fractions() {
        let ds = toy(4, 2);
        for f in [0.0, -0.1, 1.01, f64::NAN] {
            assert!(subsample_fraction(&ds, f, &mut SeededRng::new(0)).is_err());
        }
        assert!(subsample_fraction(&ds, 0.01, &mut SeededRng::new(0)).is_err());
    }

    #[test]
    fn one_hot_cases() {
        assert_eq!(one_hot(2, 4).unwrap(), vec![0., 1., 0., 0.]);
        assert_eq!(one_hot(1, 4).unwrap(), vec![1., 0., 0., 0.]);
        assert!(one_hot(5, 4).is_err());
        assert!(one_hot(0, 4).is_err());
    }

    #[test]
    fn class_matrices() {
        let ds = toy(25, 4);
        let m = class_matrix::<f64>(&ds, 3).unwrap();
        assert_eq!(m.values.shape(), (25, 2));
        assert!(m.values.iter_rows().all(|r| r[0] == 3.0));
        assert!(class_matrix::<f64>(&ds, 5).is_err());
        let single = Dataset::new(
            vec![RssSample {
                index: 0,
                rss: vec![1.0; 7],
                label: 1,
            }],
            1,
        )
        .unwrap();
        assert_eq!(
            class_matrix::<f32>(&single, 1).unwrap().values.shape(),
            (1, 7)
        );
    }

    #[test]
    fn manifest_lists_every_sample_once() {
        let ds = toy(2, 2);
        let (tr, te) = stratified_split(&ds, &mut SeededRng::new(0)).unwrap();
        let mut buf = Vec::new();
        write_split_manifest(&mut buf, &tr, &te).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "sample_index,split,class");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("0,"));
    }
}
