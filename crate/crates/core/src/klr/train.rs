//! Loss terms and the gradient-descent training loop.

use std::sync::OnceLock;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::boundary::{boundary_components, penalty_seeds, topo_penalty, ComponentSet, Origin};
use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::field_graph::{evaluate_field, Graph, ScalarField};
use crate::klr::domain::{gram_matrix, Discretization, TopoDomain};
use crate::klr::model::{dot, shifted_sigmoid, sigmoid, KernelModel, Link};
use crate::scalar::Real;

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` inside logarithms.
pub const PROB_CLAMP: f64 = 1e-12;

/// Learning-rate halvings tried within one step before the run stops.
pub const MAX_HALVINGS: usize = 60;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TrainConfig<T> {
    /// Weight of the topological penalty.
    pub lambda: T,
    pub learning_rate: T,
    pub max_iters: usize,
    /// Stop once the gradient norm falls below this.
    pub grad_tol: T,
    pub discretization: Discretization,
    /// Optional ridge term `l2/2 |w|^2`; zero for the plain objective.
    #[serde(default)]
    pub l2: T,
    pub seed: u64,
}

impl<T: Real> TrainConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= T::zero()) || !self.lambda.is_finite() {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.learning_rate > T::zero()) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be positive".into()));
        }
        if !(self.grad_tol >= T::zero()) {
            return Err(Error::Config("grad_tol must be >= 0".into()));
        }
        if !(self.l2 >= T::zero()) {
            return Err(Error::Config("l2 must be >= 0".into()));
        }
        self.discretization.validate()
    }
}

/// One accepted gradient step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iteration: usize,
    pub objective: f64,
    pub data_loss: f64,
    pub topo_loss: f64,
    pub grad_norm: f64,
    pub learning_rate: f64,
    /// Boundary components summed over fields; absent when the penalty is off.
    pub components: Option<usize>,
    /// The pairing structure differs from the previous iterate.
    pub pairing_switch: bool,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<T> {
    pub model: KernelModel<T>,
    pub trace: Vec<IterRecord>,
    pub converged: bool,
    pub topology_seconds: f64,
}

// ---------------------------------------------------------------------------
// data terms

/// Cross-entropy loss and its gradient for a logistic model.
pub fn data_loss_grad<T: Real>(model: &KernelModel<T>, points: &[Vec<T>], labels: &[usize]) -> (T, Vec<T>) {
    let w = &model.weights[0];
    let mut loss = T::zero();
    let mut grad = vec![T::zero(); model.n_train()];
    for (x, &t) in points.iter().zip(labels) {
        let phi = model.kernel_vector(x);
        let f = sigmoid(dot(&phi, w));
        loss = loss + binary_xent(f, t);
        let r = f - label_value::<T>(t);
        for (g, &p) in grad.iter_mut().zip(&phi) {
            *g = *g + r * p;
        }
    }
    (loss, grad)
}

/// Multinomial cross-entropy and its gradient (one vector per class).
pub fn data_loss_grad_multi<T: Real>(
    model: &KernelModel<T>,
    points: &[Vec<T>],
    labels: &[usize],
) -> (T, Vec<Vec<T>>) {
    let mut loss = T::zero();
    let mut grad = vec![vec![T::zero(); model.n_train()]; model.num_classes];
    for (x, &t) in points.iter().zip(labels) {
        let phi = model.kernel_vector(x);
        let scores: Vec<T> = model.weights.iter().map(|w| dot(&phi, w)).collect();
        let (probs, l) = softmax_xent(&scores, t);
        loss = loss + l;
        for (k, gk) in grad.iter_mut().enumerate() {
            let r = probs[k] - label_value::<T>(usize::from(k == t));
            for (g, &p) in gk.iter_mut().zip(&phi) {
                *g = *g + r * p;
            }
        }
    }
    (loss, grad)
}

fn label_value<T: Real>(t: usize) -> T {
    if t == 1 {
        T::one()
    } else {
        T::zero()
    }
}

fn binary_xent<T: Real>(f: T, t: usize) -> T {
    let eps = T::lit(PROB_CLAMP);
    let f = f.max(eps).min(T::one() - eps);
    if t == 1 {
        -f.ln()
    } else {
        -(T::one() - f).ln()
    }
}

fn softmax_xent<T: Real>(scores: &[T], t: usize) -> (Vec<T>, T) {
    let m = scores.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = scores.iter().map(|&s| (s - m).exp()).collect();
    let z: T = exps.iter().copied().sum();
    let probs: Vec<T> = exps.iter().map(|&e| e / z).collect();
    let p = probs[t].max(T::lit(PROB_CLAMP));
    (probs, -p.ln())
}

// ---------------------------------------------------------------------------
// topological terms

/// Penalty and gradient of a logistic model on `graph`, evaluated from scratch.
pub fn topo_loss_grad<T: Real>(model: &KernelModel<T>, graph: &Graph<T>) -> Result<(T, Vec<T>)> {
    let field = evaluate_field(|x| model.shifted(x), graph)?;
    let set = boundary_components(graph, &field)?;
    let mut grad = vec![T::zero(); model.n_train()];
    for (v, coeff) in penalty_seeds(&set) {
        let f = field.value(v);
        let slope = coeff * (T::lit(0.25) - f * f);
        let phi = model.kernel_vector(graph.position(v));
        axpy(&mut grad, slope, &phi);
    }
    Ok((topo_penalty(&set), grad))
}

/// Per-class margin fields `psi_k(v) = max_{t != k} s_t(v) - s_k(v)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PsiFields<T> {
    /// `values[k][v]`.
    pub values: Vec<Vec<T>>,
    /// Competing class `argmax_{t != k} s_t(v)` for every `(k, v)`.
    pub rivals: Vec<Vec<usize>>,
}

impl<T: Real> PsiFields<T> {
    /// Builds the margins from per-class scores `scores[k][v]`.
    pub fn from_scores(scores: &[Vec<T>]) -> Self {
        let k_count = scores.len();
        let n = scores.first().map_or(0, Vec::len);
        let mut values = vec![Vec::with_capacity(n); k_count];
        let mut rivals = vec![Vec::with_capacity(n); k_count];
        for v in 0..n {
            for k in 0..k_count {
                let mut best: Option<usize> = None;
                for t in (0..k_count).filter(|&t| t != k) {
                    if best.map_or(true, |b| scores[t][v] > scores[b][v]) {
                        best = Some(t);
                    }
                }
                let t = best.expect("at least two classes");
                values[k].push(scores[t][v] - scores[k][v]);
                rivals[k].push(t);
            }
        }
        Self { values, rivals }
    }

    pub fn field<'g>(&self, k: usize, graph: &'g Graph<T>) -> Result<ScalarField<'g, T, T>> {
        ScalarField::new(graph, self.values[k].clone())
    }
}

/// Margin fields of a softmax model over the vertices of `graph`.
pub fn psi_fields<T: Real>(model: &KernelModel<T>, graph: &Graph<T>) -> PsiFields<T> {
    let scores: Vec<Vec<T>> = (0..model.weights.len())
        .map(|k| graph.positions().map(|x| dot(&model.kernel_vector(x), &model.weights[k])).collect())
        .collect();
    PsiFields::from_scores(&scores)
}

/// Summed penalty over all margin fields and its gradient, one vector per class.
pub fn topo_loss_grad_multi<T: Real>(model: &KernelModel<T>, graph: &Graph<T>) -> Result<(T, Vec<Vec<T>>)> {
    let psi = psi_fields(model, graph);
    let mut total = T::zero();
    let mut grad = vec![vec![T::zero(); model.n_train()]; model.num_classes];
    for k in 0..model.num_classes {
        let field = psi.field(k, graph)?;
        let set = boundary_components(graph, &field)?;
        total = total + topo_penalty(&set);
        for (v, coeff) in penalty_seeds(&set) {
            let phi = model.kernel_vector(graph.position(v));
            route_margin_seed(&mut grad, k, psi.rivals[k][v], coeff, &phi);
        }
    }
    Ok((total, grad))
}

/// `d psi_k / d w_rival = phi`, `d psi_k / d w_k = -phi`.
fn route_margin_seed<T: Real>(grad: &mut [Vec<T>], k: usize, rival: usize, coeff: T, phi: &[T]) {
    axpy(&mut grad[rival], coeff, phi);
    axpy(&mut grad[k], -coeff, phi);
}

fn axpy<T: Real>(y: &mut [T], a: T, x: &[T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + a * xi;
    }
}

// ---------------------------------------------------------------------------
// trainer

type Signature = Vec<(Vec<(usize, usize, usize, Origin)>, Option<usize>)>;

struct Evaluation<T> {
    objective: T,
    data_loss: T,
    topo_loss: T,
    grad: Vec<Vec<T>>,
    signature: Option<Signature>,
    components: Option<usize>,
}

/// Holds the kernel matrices of one training set so several
/// hyperparameter settings can reuse them.
pub struct Trainer<'a, T> {
    points: &'a [Vec<T>],
    labels: &'a [usize],
    num_classes: usize,
    sigma: T,
    disc: Discretization,
    gram: Vec<T>,
    domain: OnceLock<TopoDomain<T>>,
}

impl<'a, T: Real> Trainer<'a, T> {
    pub fn new(
        points: &'a [Vec<T>],
        labels: &'a [usize],
        num_classes: usize,
        sigma: T,
        disc: Discretization,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if points.len() != labels.len() {
            return Err(Error::Structural(format!(
                "{} points but {} labels",
                points.len(),
                labels.len()
            )));
        }
        if let Some(&t) = labels.iter().find(|&&t| t >= num_classes) {
            return Err(Error::InvalidInput(format!(
                "label {t} outside 0..{num_classes}"
            )));
        }
        if !(sigma > T::zero()) {
            return Err(Error::Config(format!("kernel width must be positive, got {sigma}")));
        }
        disc.validate()?;
        Ok(Self {
            points,
            labels,
            num_classes,
            sigma,
            disc,
            gram: gram_matrix(points, sigma),
            domain: OnceLock::new(),
        })
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    /// The discretization graph with its cached kernel rows, built on first use.
    pub fn domain(&self) -> Result<&TopoDomain<T>> {
        if let Some(d) = self.domain.get() {
            return Ok(d);
        }
        let d = TopoDomain::new(self.disc, self.points, self.sigma)?;
        Ok(self.domain.get_or_init(|| d))
    }

    pub fn fit_binary(&self, config: &TrainConfig<T>) -> Result<TrainOutcome<T>> {
        if self.num_classes != 2 {
            return Err(Error::Config("logistic training needs two classes".into()));
        }
        self.fit(config, Link::Logistic)
    }

    pub fn fit_multilabel(&self, config: &TrainConfig<T>) -> Result<TrainOutcome<T>> {
        self.fit(config, Link::Softmax)
    }

    /// Number of boundary components of `model` on this trainer's domain,
    /// summed over margin fields for softmax models.
    pub fn component_count(&self, model: &KernelModel<T>) -> Result<usize> {
        let domain = self.domain()?;
        let scores = domain.scores(self.points, &self.gram, &model.weights);
        let graph = domain.graph();
        match model.link {
            Link::Logistic => {
                let field = ScalarField::new(graph, scores[0].iter().map(|&z| shifted_sigmoid(z)).collect())?;
                Ok(boundary_components(graph, &field)?.len())
            }
            Link::Softmax => {
                let psi = PsiFields::from_scores(&scores);
                let mut total = 0;
                for k in 0..model.num_classes {
                    total += boundary_components(graph, &psi.field(k, graph)?)?.len();
                }
                Ok(total)
            }
        }
    }

    fn fit(&self, config: &TrainConfig<T>, link: Link) -> Result<TrainOutcome<T>> {
        config.validate()?;
        let mut model = KernelModel::zeros(self.points.to_vec(), self.sigma, link, self.num_classes)?;
        let use_topology = config.lambda > T::zero();
        let mut topo_clock = 0.0f64;

        let mut eval = |weights: &[Vec<T>]| -> Result<Evaluation<T>> {
            let (data_loss, mut grad) = match link {
                Link::Logistic => {
                    let (l, g) = self.data_term_binary(&weights[0]);
                    (l, vec![g])
                }
                Link::Softmax => self.data_term_multi(weights),
            };
            let mut objective = data_loss;
            if config.l2 > T::zero() {
                let half = T::lit(0.5);
                for (g, w) in grad.iter_mut().zip(weights) {
                    objective = objective + half * config.l2 * dot(w, w);
                    axpy(g, config.l2, w);
                }
            }
            let mut out = Evaluation {
                objective,
                data_loss,
                topo_loss: T::zero(),
                grad,
                signature: None,
                components: None,
            };
            if use_topology {
                let started = Instant::now();
                let topo = self.topo_term(weights, link)?;
                topo_clock += started.elapsed().as_secs_f64();
                for (g, tg) in out.grad.iter_mut().zip(&topo.grad) {
                    axpy(g, config.lambda, tg);
                }
                out.objective = out.objective + config.lambda * topo.penalty;
                out.topo_loss = topo.penalty;
                out.signature = Some(topo.signature);
                out.components = Some(topo.components);
            }
            Ok(out)
        };

        let mut lr = config.learning_rate;
        let mut current = eval(&model.weights)?;
        let mut trace = Vec::with_capacity(config.max_iters);
        let mut converged = false;
        let mut switched = false;

        for iteration in 0..config.max_iters {
            let grad_norm = norm(&current.grad);
            trace.push(IterRecord {
                iteration,
                objective: current.objective.to_f64_lossy(),
                data_loss: current.data_loss.to_f64_lossy(),
                topo_loss: current.topo_loss.to_f64_lossy(),
                grad_norm: grad_norm.to_f64_lossy(),
                learning_rate: lr.to_f64_lossy(),
                components: current.components,
                pairing_switch: switched,
            });
            if grad_norm < config.grad_tol {
                converged = true;
                break;
            }

            let mut halvings = 0;
            let mut saw_finite = false;
            let step = loop {
                let proposal: Vec<Vec<T>> = model
                    .weights
                    .iter()
                    .zip(&current.grad)
                    .map(|(w, g)| w.iter().zip(g).map(|(&wi, &gi)| wi - lr * gi).collect())
                    .collect();
                let next = match eval(&proposal) {
                    Ok(next) => Some(next),
                    Err(Error::NonFinite { .. }) => None,
                    Err(e) => return Err(e),
                };
                let next = next.filter(|n| n.objective.is_finite());
                saw_finite |= next.is_some();
                let slack = T::lit(1e-12) * current.objective.abs().max(T::one());
                match next.filter(|n| !(n.objective > current.objective + slack)) {
                    Some(next) => break Some((proposal, next)),
                    None => {
                        halvings += 1;
                        if halvings > MAX_HALVINGS {
                            break None;
                        }
                        lr = lr * T::lit(0.5);
                    }
                }
            };
            match step {
                Some((proposal, next)) => {
                    switched = next.signature != current.signature;
                    model.weights = proposal;
                    current = next;
                }
                // no descent along the gradient at a kink of the penalty
                None if saw_finite => break,
                None => {
                    return Err(Error::Divergence {
                        iteration,
                        learning_rate: config.learning_rate.to_f64_lossy(),
                    })
                }
            }
        }

        Ok(TrainOutcome {
            model,
            trace,
            converged,
            topology_seconds: topo_clock,
        })
    }

    fn gram_row(&self, i: usize) -> &[T] {
        let n = self.points.len();
        &self.gram[i * n..(i + 1) * n]
    }

    fn data_term_binary(&self, w: &[T]) -> (T, Vec<T>) {
        let n = self.points.len();
        let mut loss = T::zero();
        let mut grad = vec![T::zero(); n];
        for (i, &t) in self.labels.iter().enumerate() {
            let row = self.gram_row(i);
            let f = sigmoid(dot(row, w));
            loss = loss + binary_xent(f, t);
            axpy(&mut grad, f - label_value::<T>(t), row);
        }
        (loss, grad)
    }

    fn data_term_multi(&self, weights: &[Vec<T>]) -> (T, Vec<Vec<T>>) {
        let n = self.points.len();
        let mut loss = T::zero();
        let mut grad = vec![vec![T::zero(); n]; weights.len()];
        for (i, &t) in self.labels.iter().enumerate() {
            let row = self.gram_row(i);
            let scores: Vec<T> = weights.iter().map(|w| dot(row, w)).collect();
            let (probs, l) = softmax_xent(&scores, t);
            loss = loss + l;
            for (k, gk) in grad.iter_mut().enumerate() {
                axpy(gk, probs[k] - label_value::<T>(usize::from(k == t)), row);
            }
        }
        (loss, grad)
    }

    fn topo_term(&self, weights: &[Vec<T>], link: Link) -> Result<TopoTerm<T>> {
        let domain = self.domain()?;
        let graph = domain.graph();
        let scores = domain.scores(self.points, &self.gram, weights);
        let n = self.points.len();
        let mut grad = vec![vec![T::zero(); n]; weights.len()];
        let mut penalty = T::zero();
        let mut signature = Vec::new();
        let mut components = 0;

        match link {
            Link::Logistic => {
                let values: Vec<T> = scores[0].iter().map(|&z| shifted_sigmoid(z)).collect();
                if let Some(vertex) = values.iter().position(|v| !v.is_finite()) {
                    return Err(Error::NonFinite { vertex });
                }
                let field = ScalarField::new(graph, values)?;
                let set = boundary_components(graph, &field)?;
                for (v, coeff) in penalty_seeds(&set) {
                    let f = field.value(v);
                    let row = domain.kernel_row(v, self.points, &self.gram);
                    axpy(&mut grad[0], coeff * (T::lit(0.25) - f * f), &row);
                }
                penalty = topo_penalty(&set);
                components = set.len();
                signature.push(set.signature());
            }
            Link::Softmax => {
                if let Some(vertex) = scores.iter().flat_map(|s| s.iter()).position(|v| !v.is_finite()) {
                    return Err(Error::NonFinite { vertex: vertex % graph.vertex_count() });
                }
                let psi = PsiFields::from_scores(&scores);
                let sets: Vec<ComponentSet<T>> = (0..weights.len())
                    .map(|k| boundary_components(graph, &psi.field(k, graph)?))
                    .collect::<Result<_>>()?;
                // accumulate by vertex, then class
                let mut seeds: Vec<(usize, usize, T)> = sets
                    .iter()
                    .enumerate()
                    .flat_map(|(k, set)| penalty_seeds(set).into_iter().map(move |(v, c)| (v, k, c)))
                    .collect();
                seeds.sort_by_key(|&(v, k, _)| (v, k));
                for (v, k, coeff) in seeds {
                    let row = domain.kernel_row(v, self.points, &self.gram);
                    route_margin_seed(&mut grad, k, psi.rivals[k][v], coeff, &row);
                }
                for set in &sets {
                    penalty = penalty + topo_penalty(set);
                    components += set.len();
                    signature.push(set.signature());
                }
            }
        }
        Ok(TopoTerm {
            penalty,
            grad,
            signature,
            components,
        })
    }
}

struct TopoTerm<T> {
    penalty: T,
    grad: Vec<Vec<T>>,
    signature: Signature,
    components: usize,
}

fn norm<T: Real>(g: &[Vec<T>]) -> T {
    g.iter()
        .flat_map(|r| r.iter())
        .fold(T::zero(), |acc, &x| acc + x * x)
        .sqrt()
}

fn num_classes_of<T>(ds: &Dataset<T>) -> usize {
    ds.num_classes().max(2)
}

/// Trains a logistic kernel model on a normalized binary dataset.
pub fn train_binary<T: Real>(dataset: &Dataset<T>, config: &TrainConfig<T>, sigma: T) -> Result<KernelModel<T>> {
    let trainer = Trainer::new(&dataset.points, &dataset.labels, 2, sigma, config.discretization)?;
    Ok(trainer.fit_binary(config)?.model)
}

/// Trains a softmax kernel model on a normalized dataset.
pub fn train_multilabel<T: Real>(
    dataset: &Dataset<T>,
    config: &TrainConfig<T>,
    sigma: T,
) -> Result<KernelModel<T>> {
    let k = num_classes_of(dataset);
    let trainer = Trainer::new(&dataset.points, &dataset.labels, k, sigma, config.discretization)?;
    Ok(trainer.fit_multilabel(config)?.model)
}

/// Misclassification rate of `model` on a dataset in raw coordinates.
pub fn evaluate<T: Real>(model: &KernelModel<T>, dataset: &Dataset<T>) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some(&t) = dataset.labels.iter().find(|&&t| t >= model.num_classes) {
        return Err(Error::InvalidInput(format!(
            "label {t} outside the model's {} classes",
            model.num_classes
        )));
    }
    let wrong = dataset
        .points
        .iter()
        .zip(&dataset.labels)
        .filter(|(x, &t)| model.predict_label(&model.normalize(x)) != t)
        .count();
    Ok(wrong as f64 / dataset.len() as f64)
}

/// Predicted labels for raw points.
pub fn predict_labels<T: Real>(model: &KernelModel<T>, points: &[Vec<T>]) -> Vec<usize> {
    points.iter().map(|x| model.predict_label(&model.normalize(x))).collect()
}
