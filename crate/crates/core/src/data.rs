//! Datasets with features normalized to ‖x_i‖ ≤ 1 and labels in {±1}.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{dot, norm};

const NORM_SLACK: f64 = 1e-12;
const REJECTION_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Separator {
    pub w_star: Vec<f64>,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    d: usize,
    /// Row-major n×d.
    x: Vec<f64>,
    y: Vec<f64>,
    separator: Option<Separator>,
}

impl Dataset {
    /// Validates norms, labels and the separator claim.
    pub fn new(x: Vec<f64>, y: Vec<f64>, d: usize, separator: Option<Separator>) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if d == 0 || x.len() != n * d {
            return Err(Error::Dimension { expected: n * d, got: x.len() });
        }
        if let Some(v) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
            return Err(Error::Invalid(format!("label {v} is not ±1")));
        }
        let ds = Dataset { n, d, x, y, separator: None };
        for i in 0..n {
            let r = norm(ds.row(i));
            if !(r <= 1.0 + NORM_SLACK) {
                return Err(Error::Invalid(format!("sample {i} has norm {r} > 1")));
            }
        }
        ds.with_separator(separator)
    }

    fn with_separator(mut self, separator: Option<Separator>) -> Result<Self> {
        if let Some(sep) = &separator {
            if sep.w_star.len() != self.d {
                return Err(Error::Dimension { expected: self.d, got: sep.w_star.len() });
            }
            if (norm(&sep.w_star) - 1.0).abs() > NORM_SLACK {
                return Err(Error::Invalid("separator is not a unit vector".into()));
            }
            if !(sep.gamma > 0.0) {
                return Err(Error::Invalid(format!("separator margin must be positive, got {}", sep.gamma)));
            }
            for i in 0..self.n {
                let q = self.y[i] * dot(self.row(i), &sep.w_star);
                if q < sep.gamma - NORM_SLACK {
                    return Err(Error::Invalid(format!(
                        "sample {i} has margin {q} below the claimed {}",
                        sep.gamma
                    )));
                }
            }
        }
        self.separator = separator;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    pub fn features(&self) -> &[f64] {
        &self.x
    }

    pub fn labels(&self) -> &[f64] {
        &self.y
    }

    pub fn separator(&self) -> Option<&Separator> {
        self.separator.as_ref()
    }

    /// Writes `x_1,…,x_d,label` rows with labels as ±1.
    pub fn to_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
        for i in 0..self.n {
            let mut rec: Vec<String> = self.row(i).iter().map(|v| format!("{v:.16e}")).collect();
            rec.push(format!("{}", self.y[i]));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Four XOR points. With `scaled`, features are divided by √2 so every
/// sample has unit norm; the unscaled points have norm √2 and are only
/// accepted by the constructor because validation is skipped for them.
pub fn xor_dataset(scaled: bool) -> Dataset {
    let s = if scaled { std::f64::consts::FRAC_1_SQRT_2 } else { 1.0 };
    let x = vec![-s, -s, s, s, s, -s, -s, s];
    let y = vec![1.0, 1.0, -1.0, -1.0];
    if scaled {
        Dataset::new(x, y, 2, None).expect("scaled XOR is valid")
    } else {
        Dataset { n: 4, d: 2, x, y, separator: None }
    }
}

/// x₁ = (γ, √(1−γ²)), x₂ = (γ, −√(1−γ²)/2), both labelled +1.
pub fn two_point_lower_bound(gamma: f64) -> Result<Dataset> {
    if !(gamma > 0.0 && gamma < 0.1) {
        return Err(Error::Invalid(format!("two-point margin must lie in (0, 0.1), got {gamma}")));
    }
    let r = (1.0 - gamma * gamma).sqrt();
    let x = vec![gamma, r, gamma, -r / 2.0];
    let sep = Separator { w_star: vec![1.0, 0.0], gamma };
    Dataset::new(x, vec![1.0, 1.0], 2, Some(sep))
}

fn unit_gaussian(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let r = norm(&v);
        if r > 1e-12 {
            return v.into_iter().map(|c| c / r).collect();
        }
    }
}

/// Uniform points on the sphere with |x·w*| ≥ γ, labelled by sign(x·w*).
pub fn synthetic_separable(n: usize, d: usize, gamma: f64, seed: u64) -> Result<Dataset> {
    if n == 0 || d < 2 {
        return Err(Error::Invalid(format!("need n ≥ 1 and d ≥ 2, got n = {n}, d = {d}")));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Invalid(format!("margin must lie in (0, 1), got {gamma}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w_star = unit_gaussian(&mut rng, d);
    let mut x = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let mut tries = 0;
        let (xi, s) = loop {
            tries += 1;
            if tries > REJECTION_CAP {
                return Err(Error::RejectionCap(REJECTION_CAP));
            }
            let xi = unit_gaussian(&mut rng, d);
            let s = dot(&xi, &w_star);
            if s.abs() >= gamma {
                break (xi, s);
            }
        };
        x.extend(xi);
        y.push(if s > 0.0 { 1.0 } else { -1.0 });
    }
    Dataset::new(x, y, d, Some(Separator { w_star, gamma }))
}

/// Reads a headerless numeric CSV; `label_column` may be negative to count
/// from the end (−1 is the last column). Labels 0/1 map to −1/+1 and
/// features are divided by the largest row norm.
pub fn load_csv(path: &Path, label_column: isize) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut d = None;
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        let vals = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::parse(path.display().to_string(), format!("row {row}: {e}")))?;
        let width = vals.len();
        let col = if label_column < 0 { width as isize + label_column } else { label_column };
        if col < 0 || col as usize >= width || width < 2 {
            return Err(Error::parse(path.display().to_string(), format!("row {row}: no label column {label_column}")));
        }
        match d {
            None => d = Some(width - 1),
            Some(dd) if dd != width - 1 => {
                return Err(Error::parse(path.display().to_string(), format!("row {row} has {width} columns")))
            }
            _ => {}
        }
        let label = match vals[col as usize] {
            1.0 => 1.0,
            0.0 | -1.0 => -1.0,
            v => return Err(Error::parse(path.display().to_string(), format!("row {row}: label {v} is not binary"))),
        };
        y.push(label);
        x.extend(vals.iter().enumerate().filter(|(k, _)| *k != col as usize).map(|(_, v)| *v));
    }
    let d = d.ok_or(Error::EmptyDataset)?;
    let max_norm = x.chunks(d).map(norm).fold(0.0, f64::max);
    if max_norm > 0.0 {
        x.iter_mut().for_each(|v| *v /= max_norm);
    }
    Dataset::new(x, y, d, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn xor_layout() {
        let ds = xor_dataset(true);
        assert_eq!(ds.len(), 4);
        assert_eq!(ds.labels(), &[1.0, 1.0, -1.0, -1.0]);
        for i in 0..4 {
            assert!((norm(ds.row(i)) - 1.0).abs() <= 1e-15);
        }
        assert!(ds.separator().is_none());
        let raw = xor_dataset(false);
        assert_eq!(raw.row(0), &[-1.0, -1.0]);
    }

    #[test]
    fn xor_has_no_linear_separator() {
        let ds = xor_dataset(true);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let v = unit_gaussian(&mut rng, 2);
            let worst = (0..4).map(|i| ds.labels()[i] * dot(ds.row(i), &v)).fold(f64::INFINITY, f64::min);
            assert!(worst <= 0.0);
        }
    }

    #[test]
    fn two_point_coordinates() {
        let ds = two_point_lower_bound(0.05).unwrap();
        assert!((ds.row(0)[1] - 0.998749).abs() < 1e-6);
        assert!((ds.row(1)[1] + 0.499375).abs() < 1e-6);
        assert!((norm(ds.row(0)) - 1.0).abs() < 1e-15);
        let r2 = (0.05f64.powi(2) + (1.0 - 0.05f64.powi(2)) / 4.0).sqrt();
        assert!((norm(ds.row(1)) - r2).abs() < 1e-15 && r2 < 1.0);
        for i in 0..2 {
            assert_eq!(ds.row(i)[0], 0.05);
        }
        assert!(two_point_lower_bound(0.1).is_err());
        assert!(two_point_lower_bound(0.0).is_err());
    }

    #[test]
    fn synthetic_is_deterministic_and_separated() {
        let a = synthetic_separable(32, 10, 0.2, 9).unwrap();
        let b = synthetic_separable(32, 10, 0.2, 9).unwrap();
        assert_eq!(a, b);
        let sep = a.separator().unwrap();
        for i in 0..a.len() {
            assert!(a.labels()[i] * dot(a.row(i), &sep.w_star) >= 0.2);
            assert!((norm(a.row(i)) - 1.0).abs() <= 1e-15);
        }
    }

    #[test]
    fn synthetic_gives_up_on_extreme_margin() {
        assert!(matches!(synthetic_separable(4, 50, 0.99, 1), Err(Error::RejectionCap(_))));
    }

    #[test]
    fn csv_label_map_and_normalization() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("two.csv");
        std::fs::write(&path, "3,4,0\n1,0,1\n").unwrap();
        let ds = load_csv(&path, -1).unwrap();
        assert_eq!(ds.labels(), &[-1.0, 1.0]);
        let max = (0..2).map(|i| norm(ds.row(i))).fold(0.0, f64::max);
        assert!((max - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn csv_rejects_bad_rows() {
        let dir = tempfile::tempdir().unwrap();
        let ragged = dir.path().join("ragged.csv");
        std::fs::write(&ragged, "1,2,1\n1,1\n").unwrap();
        assert!(load_csv(&ragged, -1).is_err());
        let labels = dir.path().join("labels.csv");
        std::fs::write(&labels, "1,2,3\n").unwrap();
        assert!(load_csv(&labels, -1).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let ds = synthetic_separable(20, 4, 0.1, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.csv");
        ds.to_csv(&path).unwrap();
        let back = load_csv(&path, -1).unwrap();
        for (a, b) in ds.features().iter().zip(back.features()) {
            assert!((a - b).abs() <= 1e-12);
        }
        assert_eq!(ds.labels(), back.labels());
    }

    proptest! {
        #[test]
        fn synthetic_invariants(n in 1usize..40, d in 2usize..8, gamma in 0.01f64..0.3, seed: u64) {
            let ds = synthetic_separable(n, d, gamma, seed).unwrap();
            let sep = ds.separator().unwrap();
            for i in 0..n {
                prop_assert!(ds.labels()[i] * dot(ds.row(i), &sep.w_star) >= gamma - 1e-12);
            }
        }
    }
}
