//! Experiment runner behind the command-line tool: configuration, training
//! on normalized data, nested cross-validation and diagnostic dumps.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary::{boundary_components, ComponentSet};
use crate::datasets::{self, derive_seed, Dataset, FoldPlan, INNER_FOLDS, OUTER_FOLDS};
use crate::error::{Error, Result};
use crate::field_graph::{Graph, ScalarField, UnitBoxTransform};
use crate::klr::{evaluate, psi_fields, shifted_sigmoid, Discretization, IterRecord, KernelModel, Link, TrainConfig, Trainer};
use crate::persistence::merge_pairs;

/// Resolution used by the automatic discretization in one or two dimensions.
pub const AUTO_GRID_RESOLUTION: usize = 300;
/// Neighbor count used by the automatic discretization above two dimensions.
pub const AUTO_KNN_K: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Toporeg,
    Klr,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Generator {
    Moons { n: usize, noise_sd: f64 },
    Blobs { n: usize, centers: Vec<Vec<f64>>, spread: f64 },
}

impl Generator {
    pub fn generate(&self, seed: u64) -> Result<Dataset> {
        match self {
            Generator::Moons { n, noise_sd } => datasets::make_moons(*n, *noise_sd, seed),
            Generator::Blobs { n, centers, spread } => datasets::make_blobs(*n, centers, *spread, seed),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Generator::Moons { n, noise_sd } => format!("moons n={n} noise_sd={noise_sd}"),
            Generator::Blobs { n, centers, spread } => {
                format!("blobs n={n} centers={centers:?} spread={spread}")
            }
        }
    }
}

/// One point of the hyperparameter grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub lambda: f64,
    pub sigma: f64,
    pub learning_rate: f64,
    pub iterations: usize,
}

impl Cell {
    fn key(&self) -> (f64, f64, f64, usize) {
        (self.lambda, self.sigma, self.learning_rate, self.iterations)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// CSV dataset; takes precedence over `generator`.
    pub data: Option<PathBuf>,
    pub generator: Option<Generator>,
    /// Fraction of labels flipped after loading or generating.
    pub label_noise: f64,
    pub method: Method,
    pub lambdas: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub learning_rates: Vec<f64>,
    pub iterations: Vec<usize>,
    /// `None` picks a grid in one or two dimensions and a KNN graph otherwise.
    pub discretization: Option<Discretization>,
    pub grad_tol: f64,
    pub l2: f64,
    pub outer_folds: usize,
    pub inner_folds: usize,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: None,
            generator: None,
            label_noise: 0.0,
            method: Method::Toporeg,
            lambdas: vec![0.0, 0.1, 1.0],
            sigmas: vec![0.1],
            learning_rates: vec![0.1],
            iterations: vec![200],
            discretization: None,
            grad_tol: 1e-6,
            l2: 0.0,
            outer_folds: OUTER_FOLDS,
            inner_folds: INNER_FOLDS,
            seed: 0,
            out: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.data.is_none() && self.generator.is_none() {
            return Err(Error::Config("no dataset: give a data path or a generator".into()));
        }
        if !(0.0..=1.0).contains(&self.label_noise) {
            return Err(Error::Config(format!("label noise {} outside [0, 1]", self.label_noise)));
        }
        let grids: [(&str, bool); 4] = [
            ("lambda", self.lambdas.is_empty()),
            ("sigma", self.sigmas.is_empty()),
            ("learning rate", self.learning_rates.is_empty()),
            ("iterations", self.iterations.is_empty()),
        ];
        if let Some((name, _)) = grids.iter().find(|(_, empty)| *empty) {
            return Err(Error::Config(format!("empty {name} grid")));
        }
        if self.lambdas.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
            return Err(Error::Config("lambda values must be finite and >= 0".into()));
        }
        if self.sigmas.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::Config("sigma values must be finite and > 0".into()));
        }
        if self.learning_rates.iter().any(|&r| !(r > 0.0) || !r.is_finite()) {
            return Err(Error::Config("learning rates must be finite and > 0".into()));
        }
        if self.iterations.contains(&0) {
            return Err(Error::Config("iteration counts must be positive".into()));
        }
        if let Some(d) = self.discretization {
            d.validate()?;
        }
        if self.outer_folds < 2 || self.inner_folds < 2 {
            return Err(Error::Config("fold counts must be at least 2".into()));
        }
        Ok(())
    }

    /// Grid cells in ascending (lambda, sigma, learning rate, iterations)
    /// order. The baseline method only sees lambda = 0.
    pub fn cells(&self) -> Vec<Cell> {
        let lambdas: Vec<f64> = match self.method {
            Method::Klr => vec![0.0],
            Method::Toporeg => self.lambdas.clone(),
        };
        let mut cells = Vec::new();
        for &lambda in &lambdas {
            for &sigma in &self.sigmas {
                for &learning_rate in &self.learning_rates {
                    for &iterations in &self.iterations {
                        cells.push(Cell { lambda, sigma, learning_rate, iterations });
                    }
                }
            }
        }
        cells.sort_by(|a, b| a.key().partial_cmp(&b.key()).expect("validated grid"));
        cells.dedup();
        cells
    }

    pub fn discretization_for(&self, dim: usize) -> Discretization {
        self.discretization.unwrap_or(if dim <= 2 {
            Discretization::Grid { resolution: AUTO_GRID_RESOLUTION }
        } else {
            Discretization::Knn { k: AUTO_KNN_K }
        })
    }

    fn train_config(&self, cell: &Cell, disc: Discretization) -> TrainConfig<f64> {
        TrainConfig {
            lambda: cell.lambda,
            learning_rate: cell.learning_rate,
            max_iters: cell.iterations,
            grad_tol: self.grad_tol,
            discretization: disc,
            l2: self.l2,
            seed: derive_seed(self.seed, "training"),
        }
    }

    /// Loads or generates the dataset, then applies label noise.
    pub fn load_dataset(&self) -> Result<Dataset> {
        let ds = match (&self.data, &self.generator) {
            (Some(path), _) => datasets::load_csv(path)?,
            (None, Some(g)) => g.generate(derive_seed(self.seed, "generator"))?,
            (None, None) => return Err(Error::Config("no dataset configured".into())),
        };
        if self.label_noise > 0.0 {
            datasets::flip_labels(&ds, self.label_noise, derive_seed(self.seed, "label-noise"))
        } else {
            Ok(ds)
        }
    }
}

/// A model fitted on one training set together with its diagnostics.
#[derive(Clone, Debug)]
pub struct Fit {
    pub model: KernelModel<f64>,
    pub trace: Vec<IterRecord>,
    pub converged: bool,
    pub components: usize,
    pub topology_seconds: f64,
}

/// Normalized copy of a training set plus the transform that produced it.
struct Prepared {
    points: Vec<Vec<f64>>,
    labels: Vec<usize>,
    num_classes: usize,
    transform: UnitBoxTransform<f64>,
}

impl Prepared {
    fn new(train: &Dataset, num_classes: usize) -> Result<Self> {
        let transform = UnitBoxTransform::fit(&train.points)?;
        Ok(Self {
            points: transform.apply_all(&train.points),
            labels: train.labels.clone(),
            num_classes,
            transform,
        })
    }

    fn trainer(&self, sigma: f64, disc: Discretization) -> Result<Trainer<'_, f64>> {
        Trainer::new(&self.points, &self.labels, self.num_classes, sigma, disc)
    }
}

fn fit_with(trainer: &Trainer<'_, f64>, prepared: &Prepared, config: &TrainConfig<f64>) -> Result<Fit> {
    let outcome = if prepared.num_classes == 2 {
        trainer.fit_binary(config)?
    } else {
        trainer.fit_multilabel(config)?
    };
    let mut model = outcome.model;
    model.normalization = prepared.transform.clone();
    let components = trainer.component_count(&model)?;
    Ok(Fit {
        model,
        trace: outcome.trace,
        converged: outcome.converged,
        components,
        topology_seconds: outcome.topology_seconds,
    })
}

/// Fits every cell on `train`; cells sharing a kernel width share one
/// kernel cache. Results follow the order of `cells`.
pub fn fit_cells(train: &Dataset, num_classes: usize, cells: &[Cell], cfg: &ExperimentConfig) -> Result<Vec<Fit>> {
    let prepared = Prepared::new(train, num_classes)?;
    let disc = cfg.discretization_for(train.dim());
    let mut fits: Vec<Option<Fit>> = vec![None; cells.len()];
    let mut sigmas: Vec<f64> = cells.iter().map(|c| c.sigma).collect();
    sigmas.sort_by(f64::total_cmp);
    sigmas.dedup();
    for sigma in sigmas {
        let trainer = prepared.trainer(sigma, disc)?;
        for (i, cell) in cells.iter().enumerate().filter(|(_, c)| c.sigma == sigma) {
            fits[i] = Some(fit_with(&trainer, &prepared, &cfg.train_config(cell, disc))?);
        }
    }
    Ok(fits.into_iter().map(|f| f.expect("every cell fitted")).collect())
}

/// Index of the cell with the smallest validation error. `cells` must be in
/// ascending grid order so ties go to the smaller lambda, then the smaller sigma.
pub fn select_cell(errors: &[f64]) -> usize {
    let mut best = 0;
    for (i, &e) in errors.iter().enumerate().skip(1) {
        if e < errors[best] {
            best = i;
        }
    }
    best
}

/// Chooses a cell by inner cross-validation on `train` alone. Returns the
/// chosen index and the mean validation error of every cell.
pub fn inner_select(
    ds: &Dataset,
    plan: &FoldPlan,
    outer: usize,
    num_classes: usize,
    cells: &[Cell],
    cfg: &ExperimentConfig,
) -> Result<(usize, Vec<f64>)> {
    if cells.len() == 1 {
        return Ok((0, Vec::new()));
    }
    let inner = plan.inner_assignments(outer);
    let mut sums = vec![0.0; cells.len()];
    for fold in 0..plan.n_inner {
        let fit_rows: Vec<usize> = inner.iter().filter(|&&(_, f)| f != fold).map(|&(r, _)| r).collect();
        let val_rows: Vec<usize> = inner.iter().filter(|&&(_, f)| f == fold).map(|&(r, _)| r).collect();
        if val_rows.is_empty() {
            continue;
        }
        let fits = fit_cells(&ds.subset(&fit_rows), num_classes, cells, cfg)?;
        let validation = ds.subset(&val_rows);
        for (s, fit) in sums.iter_mut().zip(&fits) {
            *s += evaluate(&fit.model, &validation)?;
        }
    }
    let means: Vec<f64> = sums.iter().map(|s| s / plan.n_inner as f64).collect();
    Ok((select_cell(&means), means))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub test_error: f64,
    pub selected: Cell,
    /// Mean inner validation error of every grid cell, in grid order; empty
    /// when the grid has a single cell.
    pub inner_errors: Vec<f64>,
    pub final_components: usize,
    pub converged: bool,
    pub trace: Vec<IterRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub dataset: String,
    pub method: Method,
    pub n: usize,
    pub num_classes: usize,
    pub discretization: Discretization,
    pub grid: Vec<Cell>,
    pub folds: Vec<FoldReport>,
    pub mean_error: f64,
    /// Population standard deviation over folds.
    pub sd_error: f64,
    pub mean_components: f64,
}

/// Wall-clock seconds per phase, kept apart from the reproducible report.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub phases: BTreeMap<String, f64>,
}

impl Timings {
    fn add(&mut self, phase: &str, seconds: f64) {
        *self.phases.entry(phase.to_string()).or_insert(0.0) += seconds;
    }
}

pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Nested cross-validation over the folds of `plan`. Only rows outside a
/// test fold are used to select hyperparameters and fit its model.
pub fn cross_validate(ds: &Dataset, plan: &FoldPlan, cfg: &ExperimentConfig) -> Result<(RunReport, Timings)> {
    cfg.validate()?;
    if plan.assignments.len() != ds.len() {
        return Err(Error::Structural("fold plan does not match the dataset".into()));
    }
    let num_classes = ds.num_classes().max(2);
    let cells = cfg.cells();
    let results: Vec<(FoldReport, Timings)> = (0..plan.n_outer)
        .into_par_iter()
        .map(|outer| -> Result<(FoldReport, Timings)> {
            let mut timings = Timings::default();
            let started = Instant::now();
            let (chosen, inner_errors) = inner_select(ds, plan, outer, num_classes, &cells, cfg)?;
            timings.add("selection", started.elapsed().as_secs_f64());

            let started = Instant::now();
            let train = ds.subset(&plan.train_indices(outer));
            let test = ds.subset(&plan.test_indices(outer));
            let fit = fit_cells(&train, num_classes, &cells[chosen..=chosen], cfg)?.remove(0);
            timings.add("final_fit", started.elapsed().as_secs_f64());
            timings.add("topology", fit.topology_seconds);
            Ok((
                FoldReport {
                    fold: outer,
                    train_size: train.len(),
                    test_size: test.len(),
                    test_error: evaluate(&fit.model, &test)?,
                    selected: cells[chosen],
                    inner_errors,
                    final_components: fit.components,
                    converged: fit.converged,
                    trace: fit.trace,
                },
                timings,
            ))
        })
        .collect::<Result<_>>()?;

    let mut timings = Timings::default();
    let mut folds = Vec::with_capacity(results.len());
    for (fold, t) in results {
        for (phase, s) in t.phases {
            timings.add(&phase, s);
        }
        folds.push(fold);
    }
    folds.sort_by_key(|f| f.fold);
    let errors: Vec<f64> = folds.iter().map(|f| f.test_error).collect();
    let (mean_error, sd_error) = mean_sd(&errors);
    let mean_components = folds.iter().map(|f| f.final_components as f64).sum::<f64>() / folds.len() as f64;
    Ok((
        RunReport {
            dataset: ds.name.clone(),
            method: cfg.method,
            n: ds.len(),
            num_classes,
            discretization: cfg.discretization_for(ds.dim()),
            grid: cells,
            folds,
            mean_error,
            sd_error,
            mean_components,
        },
        timings,
    ))
}

/// Outer fold plan of a configuration.
pub fn fold_plan(ds: &Dataset, cfg: &ExperimentConfig) -> Result<FoldPlan> {
    datasets::split_folds_with(&ds.labels, cfg.outer_folds, cfg.inner_folds, derive_seed(cfg.seed, "folds"))
}

/// Loads the configured dataset and cross-validates on it.
pub fn run_cv(cfg: &ExperimentConfig) -> Result<(RunReport, Timings)> {
    cfg.validate()?;
    let ds = cfg.load_dataset()?;
    let plan = fold_plan(&ds, cfg)?;
    cross_validate(&ds, &plan, cfg)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub dataset: String,
    pub method: Method,
    pub n: usize,
    pub num_classes: usize,
    pub discretization: Discretization,
    pub cell: Cell,
    /// `"ok"` or `"diverged"`.
    pub status: String,
    pub error: Option<String>,
    pub train_error: Option<f64>,
    pub final_components: Option<usize>,
    pub converged: bool,
    pub trace: Vec<IterRecord>,
}

/// Trains one cell on the whole dataset. A divergence still yields a report
/// alongside the error.
pub fn train_full(ds: &Dataset, cfg: &ExperimentConfig) -> (TrainReport, Option<KernelModel<f64>>, Timings, Result<()>) {
    let cells = cfg.cells();
    let num_classes = ds.num_classes().max(2);
    let disc = cfg.discretization_for(ds.dim());
    let mut report = TrainReport {
        dataset: ds.name.clone(),
        method: cfg.method,
        n: ds.len(),
        num_classes,
        discretization: disc,
        cell: cells.first().copied().unwrap_or(Cell { lambda: 0.0, sigma: 0.0, learning_rate: 0.0, iterations: 0 }),
        status: "ok".into(),
        error: None,
        train_error: None,
        final_components: None,
        converged: false,
        trace: Vec::new(),
    };
    let mut timings = Timings::default();
    if let Err(e) = cfg.validate() {
        return (report, None, timings, Err(e));
    }
    if cells.len() != 1 {
        let e = Error::Config(format!("training needs a single grid cell, got {}", cells.len()));
        return (report, None, timings, Err(e));
    }
    let started = Instant::now();
    let result = fit_cells(ds, num_classes, &cells, cfg).and_then(|mut fits| {
        let fit = fits.remove(0);
        let err = evaluate(&fit.model, ds)?;
        Ok((fit, err))
    });
    timings.add("train", started.elapsed().as_secs_f64());
    match result {
        Ok((fit, err)) => {
            timings.add("topology", fit.topology_seconds);
            report.train_error = Some(err);
            report.final_components = Some(fit.components);
            report.converged = fit.converged;
            report.trace = fit.trace;
            (report, Some(fit.model), timings, Ok(()))
        }
        Err(e) => {
            report.status = if matches!(e, Error::Divergence { .. }) { "diverged" } else { "failed" }.into();
            report.error = Some(e.to_string());
            (report, None, timings, Err(e))
        }
    }
}

// ---------------------------------------------------------------------------
// output files

pub fn write_json<S: Serialize>(value: &S, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_model(path: &Path) -> Result<KernelModel<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let model: KernelModel<f64> = serde_json::from_str(&text)?;
    model.validate()?;
    Ok(model)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn finish(mut w: csv::Writer<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Values of the model's boundary fields on a vertex set: `f - 1/2` for a
/// logistic model, one margin field per class for a softmax model.
pub fn model_fields(model: &KernelModel<f64>, graph: &Graph<f64>) -> Result<Vec<Vec<f64>>> {
    match model.link {
        Link::Logistic => {
            let field = crate::field_graph::evaluate_field(|x| model.shifted(x), graph)?;
            Ok(vec![field.into_values()])
        }
        Link::Softmax => Ok(psi_fields(model, graph).values),
    }
}

/// Writes the model's fields on a lattice over its normalized unit box,
/// row-major with axis 0 slowest. Columns are the lattice coordinates then
/// `value` (logistic) or `psi0..` (softmax).
pub fn dump_boundary(model: &KernelModel<f64>, resolution: usize, path: &Path) -> Result<usize> {
    let graph = Discretization::Grid { resolution }.build_graph(&model.train_points)?;
    let fields = model_fields(model, &graph)?;
    let mut w = csv_writer(path)?;
    let mut header: Vec<String> = (0..graph.dim()).map(|a| format!("x{a}")).collect();
    match model.link {
        Link::Logistic => header.push("value".into()),
        Link::Softmax => header.extend((0..fields.len()).map(|k| format!("psi{k}"))),
    }
    w.write_record(&header)?;
    for v in 0..graph.vertex_count() {
        let mut row: Vec<String> = graph.position(v).iter().map(|c| c.to_string()).collect();
        row.extend(fields.iter().map(|f| f[v].to_string()));
        w.write_record(&row)?;
    }
    finish(w, path)?;
    Ok(graph.vertex_count())
}

/// Component table columns, in order.
pub const COMPONENT_COLUMNS: [&str; 8] = [
    "origin",
    "birth_vertex",
    "death_vertex",
    "birth_value",
    "death_value",
    "robustness",
    "weak_vertex",
    "excluded",
];

/// Raw persistence table columns, in order.
pub const PAIR_COLUMNS: [&str; 5] = ["birth_vertex", "death_vertex", "birth_value", "death_value", "essential"];

pub fn write_components(set: &ComponentSet<f64>, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(COMPONENT_COLUMNS)?;
    for (i, c) in set.components.iter().enumerate() {
        w.write_record([
            c.origin.as_str().to_string(),
            c.pair.birth_vertex.to_string(),
            c.pair.death_vertex.to_string(),
            c.pair.birth_value.to_string(),
            c.pair.death_value.to_string(),
            c.robustness.to_string(),
            c.weak_vertex.to_string(),
            u8::from(set.excluded_index == Some(i)).to_string(),
        ])?;
    }
    finish(w, path)
}

pub fn write_pairs(graph: &Graph<f64>, field: &ScalarField<'_, f64, f64>, path: &Path) -> Result<()> {
    let result = merge_pairs(graph, field)?;
    let mut w = csv_writer(path)?;
    w.write_record(PAIR_COLUMNS)?;
    let finite = result.pairs.iter().map(|p| (p, 0u8));
    let essential = result.essential_pairs(field);
    for (p, flag) in finite.chain(essential.iter().map(|p| (p, 1u8))) {
        w.write_record([
            p.birth_vertex.to_string(),
            p.death_vertex.to_string(),
            p.birth_value.to_string(),
            p.death_value.to_string(),
            flag.to_string(),
        ])?;
    }
    finish(w, path)
}

/// Files written by [`dump_persistence`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PersistenceFiles {
    pub components: Vec<PathBuf>,
    pub pairs: Vec<PathBuf>,
}

/// Writes boundary components and raw persistence pairs of the model's
/// fields on `disc` built over its training points. A logistic model gives
/// `persistence.csv` and `pairs.csv`; a softmax model gives one file of each
/// per class, suffixed with the class index.
pub fn dump_persistence(model: &KernelModel<f64>, disc: Discretization, dir: &Path) -> Result<PersistenceFiles> {
    let graph = disc.build_graph(&model.train_points)?;
    let fields = model_fields(model, &graph)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = PersistenceFiles { components: Vec::new(), pairs: Vec::new() };
    let single = fields.len() == 1;
    for (k, values) in fields.into_iter().enumerate() {
        let suffix = if single { String::new() } else { format!("_{k}") };
        let field = ScalarField::new(&graph, values)?;
        let set = boundary_components(&graph, &field)?;
        let cpath = dir.join(format!("persistence{suffix}.csv"));
        let ppath = dir.join(format!("pairs{suffix}.csv"));
        write_components(&set, &cpath)?;
        write_pairs(&graph, &field, &ppath)?;
        files.components.push(cpath);
        files.pairs.push(ppath);
    }
    Ok(files)
}

/// Shifted-sigmoid field of a logistic model at arbitrary normalized points.
pub fn logistic_values(model: &KernelModel<f64>, points: &[Vec<f64>]) -> Vec<f64> {
    points.iter().map(|x| shifted_sigmoid(model.scores(x)[0])).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cells_are_sorted_and_baseline_drops_lambda() {
        let mut cfg = ExperimentConfig {
            lambdas: vec![1.0, 0.0],
            sigmas: vec![0.3, 0.1],
            ..Default::default()
        };
        let cells = cfg.cells();
        let keys: Vec<(f64, f64)> = cells.iter().map(|c| (c.lambda, c.sigma)).collect();
        assert_eq!(keys, vec![(0.0, 0.1), (0.0, 0.3), (1.0, 0.1), (1.0, 0.3)]);
        cfg.method = Method::Klr;
        assert!(cfg.cells().iter().all(|c| c.lambda == 0.0));
        assert_eq!(cfg.cells().len(), 2);
    }

    #[test]
    fn selection_ties_go_to_first_cell() {
        assert_eq!(select_cell(&[0.2, 0.1, 0.1]), 1);
        assert_eq!(select_cell(&[0.1, 0.1]), 0);
    }

    #[test]
    fn population_sd() {
        let (m, s) = mean_sd(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert_eq!(s, 1.0);
    }

    #[test]
    fn auto_discretization() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.discretization_for(2), Discretization::Grid { resolution: 300 });
        assert_eq!(cfg.discretization_for(5), Discretization::Knn { k: 3 });
    }

    #[test]
    fn config_validation() {
        let mut cfg = ExperimentConfig::default();
        assert!(cfg.validate().is_err());
        cfg.generator = Some(Generator::Moons { n: 20, noise_sd: 0.1 });
        cfg.validate().unwrap();
        cfg.sigmas.clear();
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn config_json_defaults() {
        let cfg: ExperimentConfig =
            serde_json::from_str(r#"{"generator": {"name": "moons", "n": 40, "noise_sd": 0.1}, "lambdas": [0.5]}"#)
                .unwrap();
        assert_eq!(cfg.lambdas, vec![0.5]);
        assert_eq!(cfg.outer_folds, 6);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"lamdas": [1]}"#).is_err());
    }
}
