//! Synthetic generators, label noise, CSV ingestion and fold plans.
//!
//! Every random operation takes an explicit seed and draws from its own
//! ChaCha stream, so results depend only on the arguments.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Labelled points.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T = f64> {
    pub name: String,
    pub points: Vec<Vec<T>>,
    pub labels: Vec<usize>,
}

impl<T: Real> Dataset<T> {
    pub fn new(name: impl Into<String>, points: Vec<Vec<T>>, labels: Vec<usize>) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(Error::Structural(format!(
                "{} points but {} labels",
                points.len(),
                labels.len()
            )));
        }
        if let Some(d) = points.first().map(Vec::len) {
            if points.iter().any(|p| p.len() != d) {
                return Err(Error::Structural("points have mixed dimensions".into()));
            }
        }
        Ok(Self {
            name: name.into(),
            points,
            labels,
        })
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            name: self.name.clone(),
            points: indices.iter().map(|&i| self.points[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

impl<T> Dataset<T> {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    /// One more than the largest label.
    pub fn num_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |&m| m + 1)
    }
}

/// Derives an independent sub-seed for the stream called `name`.
pub fn derive_seed(seed: u64, name: &str) -> u64 {
    let mut h = splitmix64(seed ^ 0x746f_706f_7265_6721);
    for b in name.bytes() {
        h = splitmix64(h ^ u64::from(b));
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian(sd: f64) -> Normal<f64> {
    Normal::new(0.0, sd).expect("standard deviation is finite and non-negative")
}

/// Two interleaved half circles: class 0 on the upper unit arc around the
/// origin, class 1 on the lower unit arc around `(1, 0.5)`.
pub fn make_moons<T: Real>(n: usize, noise_sd: f64, seed: u64) -> Result<Dataset<T>> {
    if n < 2 {
        return Err(Error::InvalidInput("moons need at least two points".into()));
    }
    if !(noise_sd >= 0.0) || !noise_sd.is_finite() {
        return Err(Error::InvalidInput(format!("noise sd {noise_sd} must be >= 0")));
    }
    let n_upper = n - n / 2;
    let n_lower = n / 2;
    let angle = |i: usize, m: usize| {
        if m <= 1 {
            0.0
        } else {
            std::f64::consts::PI * i as f64 / (m - 1) as f64
        }
    };
    let mut rng = rng_for(seed);
    let noise = gaussian(noise_sd);
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n_upper {
        let a = angle(i, n_upper);
        points.push([a.cos(), a.sin()]);
        labels.push(0);
    }
    for i in 0..n_lower {
        let a = angle(i, n_lower);
        points.push([1.0 - a.cos(), 0.5 - a.sin()]);
        labels.push(1);
    }
    let points = points
        .into_iter()
        .map(|[x, y]| {
            let (dx, dy) = if noise_sd > 0.0 {
                (noise.sample(&mut rng), noise.sample(&mut rng))
            } else {
                (0.0, 0.0)
            };
            vec![T::lit(x + dx), T::lit(y + dy)]
        })
        .collect();
    Dataset::new("moons", points, labels)
}

/// Isotropic Gaussian clusters; point `i` belongs to center `i mod centers`.
pub fn make_blobs<T: Real>(n: usize, centers: &[Vec<f64>], spread: f64, seed: u64) -> Result<Dataset<T>> {
    if centers.len() < 2 {
        return Err(Error::InvalidInput("blobs need at least two centers".into()));
    }
    let dim = centers[0].len();
    if centers.iter().any(|c| c.len() != dim) {
        return Err(Error::InvalidInput("centers have mixed dimensions".into()));
    }
    if !(spread >= 0.0) || !spread.is_finite() {
        return Err(Error::InvalidInput(format!("spread {spread} must be >= 0")));
    }
    let mut rng = rng_for(seed);
    let noise = gaussian(spread);
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % centers.len();
        points.push(
            centers[c]
                .iter()
                .map(|&x| T::lit(x + if spread > 0.0 { noise.sample(&mut rng) } else { 0.0 }))
                .collect(),
        );
        labels.push(c);
    }
    Dataset::new("blobs", points, labels)
}

/// Reassigns `floor(fraction * N)` distinct rows to a uniformly drawn
/// different label.
pub fn flip_labels<T: Real>(ds: &Dataset<T>, fraction: f64, seed: u64) -> Result<Dataset<T>> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidInput(format!("flip fraction {fraction} outside [0, 1]")));
    }
    let n = ds.len();
    let count = (fraction * n as f64).floor() as usize;
    let k = ds.num_classes().max(2);
    let mut rng = rng_for(seed);
    let mut chosen = sample(&mut rng, n, count).into_vec();
    chosen.sort_unstable();
    let mut out = ds.clone();
    for i in chosen {
        let old = out.labels[i];
        // uniform over the k - 1 other labels
        let r = rng.random_range(0..k - 1);
        out.labels[i] = if r >= old { r + 1 } else { r };
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// CSV

/// Writes `x0,...,x{D-1},label` rows, optionally preceded by one `#` comment
/// line.
pub fn save_csv<T: Real>(ds: &Dataset<T>, path: &Path, provenance: Option<&str>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    if let Some(p) = provenance {
        writeln!(out, "# {p}").map_err(|e| Error::io(path, e))?;
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..ds.dim()).map(|d| format!("x{d}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    for (p, &l) in ds.points.iter().zip(&ds.labels) {
        let mut row: Vec<String> = p.iter().map(|x| x.to_string()).collect();
        row.push(l.to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads a dataset written by [`save_csv`] (or any CSV whose last column is
/// an integer `label`). Lines starting with `#` are skipped.
pub fn load_csv<T: Real>(path: &Path) -> Result<Dataset<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = rdr.headers().map_err(|e| csv_parse_error(&e))?.clone();
    if headers.iter().next_back() != Some("label") {
        return Err(Error::Parse {
            line: 1,
            message: "last column must be named `label`".into(),
        });
    }
    let dim = headers.len() - 1;
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_parse_error(&e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != dim + 1 {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", dim + 1, rec.len()),
            });
        }
        let mut p = Vec::with_capacity(dim);
        for (col, cell) in rec.iter().take(dim).enumerate() {
            let x: T = cell.parse().map_err(|_| Error::Parse {
                line,
                message: format!("column {col}: `{cell}` is not a number"),
            })?;
            p.push(x);
        }
        let label: usize = rec[dim].parse().map_err(|_| Error::Parse {
            line,
            message: format!("`{}` is not a non-negative integer label", &rec[dim]),
        })?;
        points.push(p);
        labels.push(label);
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Dataset::new(name, points, labels)
}

fn csv_parse_error(e: &csv::Error) -> Error {
    Error::Parse {
        line: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    }
}

// ---------------------------------------------------------------------------
// folds

pub const OUTER_FOLDS: usize = 6;
pub const INNER_FOLDS: usize = 5;

/// Outer fold assignment for nested cross-validation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub n_outer: usize,
    pub n_inner: usize,
    /// Outer fold of every row.
    pub assignments: Vec<usize>,
    pub seed: u64,
    /// Labels used for stratifying the inner splits.
    labels: Vec<usize>,
}

impl FoldPlan {
    /// Row indices of outer fold `fold`.
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    /// Row indices outside outer fold `fold`.
    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }

    /// Inner split of the rows outside outer fold `outer`: pairs of
    /// `(row index, inner fold)`. Depends only on the plan seed, `outer` and
    /// the labels of those rows.
    pub fn inner_assignments(&self, outer: usize) -> Vec<(usize, usize)> {
        let rows = self.train_indices(outer);
        let seed = derive_seed(self.seed, &format!("inner-{outer}"));
        let folds = stratified_assign(&rows, &self.labels, self.n_inner, seed);
        rows.into_iter().zip(folds).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_outer];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

/// Stratified outer split into six folds.
pub fn split_folds<T>(ds: &Dataset<T>, seed: u64) -> Result<FoldPlan> {
    split_folds_with(&ds.labels, OUTER_FOLDS, INNER_FOLDS, seed)
}

pub fn split_folds_with(labels: &[usize], n_outer: usize, n_inner: usize, seed: u64) -> Result<FoldPlan> {
    if n_outer < 2 || n_inner < 2 {
        return Err(Error::Config("fold counts must be at least 2".into()));
    }
    if labels.len() < n_outer {
        return Err(Error::InvalidInput(format!(
            "{} rows cannot fill {n_outer} folds",
            labels.len()
        )));
    }
    let rows: Vec<usize> = (0..labels.len()).collect();
    let assignments = stratified_assign(&rows, labels, n_outer, seed);
    Ok(FoldPlan {
        n_outer,
        n_inner,
        assignments,
        seed,
        labels: labels.to_vec(),
    })
}

/// Deals `rows` into `folds` bins: each class is shuffled and dealt
/// round-robin, continuing where the previous class stopped. Classes smaller
/// than `folds` are pooled and dealt last.
fn stratified_assign(rows: &[usize], labels: &[usize], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = rng_for(seed);
    let k = rows.iter().map(|&r| labels[r] + 1).max().unwrap_or(0);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (pos, &r) in rows.iter().enumerate() {
        by_class[labels[r]].push(pos);
    }
    let mut pooled = Vec::new();
    let mut groups = Vec::new();
    for (class, members) in by_class.into_iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() < folds {
            log::warn!(
                "class {class} has {} members, fewer than {folds} folds; splitting it unstratified",
                members.len()
            );
            pooled.extend(members);
        } else {
            groups.push(members);
        }
    }
    if !pooled.is_empty() {
        groups.push(pooled);
    }

    let mut out = vec![0; rows.len()];
    let mut next = 0;
    for mut g in groups {
        g.shuffle(&mut rng);
        for pos in g {
            out[pos] = next % folds;
            next += 1;
        }
    }
    out
}
