//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use toporeg::{Graph, PersistenceResult};

/// Number of connected components of the subgraph induced by `keep`, by BFS.
pub fn induced_components<P: Copy>(graph: &Graph<P>, keep: impl Fn(usize) -> bool) -> usize {
    let n = graph.vertex_count();
    let mut seen = vec![false; n];
    let mut count = 0;
    let mut queue = VecDeque::new();
    for s in 0..n {
        if seen[s] || !keep(s) {
            continue;
        }
        count += 1;
        seen[s] = true;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            for &w in graph.neighbors(u) {
                if !seen[w] && keep(w) {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    count
}

/// Components of `{f <= t}` counted directly.
pub fn betti0_direct<P: Copy>(graph: &Graph<P>, values: &[f64], t: f64) -> usize {
    induced_components(graph, |v| values[v] <= t)
}

/// Intervals `[birth, death)` and essential `[birth, inf)` alive at `t`.
pub fn betti0_from_pairs(result: &PersistenceResult<f64>, values: &[f64], t: f64) -> usize {
    let finite = result
        .pairs
        .iter()
        .filter(|p| p.birth_value <= t && t < p.death_value)
        .count();
    let essential = result.essential_roots.iter().filter(|&&r| values[r] <= t).count();
    finite + essential
}

/// Expected number of zero-level components: on every connected piece that
/// takes both signs, negative regions plus non-negative regions minus one.
pub fn boundary_count_oracle<P: Copy>(graph: &Graph<P>, values: &[f64]) -> usize {
    let (pieces, label) = graph.component_labels();
    let mut total = 0;
    for c in 0..pieces {
        let neg = induced_components(graph, |v| label[v] == c && values[v] < 0.0);
        let pos = induced_components(graph, |v| label[v] == c && values[v] >= 0.0);
        if neg > 0 && pos > 0 {
            total += neg + pos - 1;
        }
    }
    total
}

/// Random connected graph: a random tree plus up to `extra` chords.
pub fn random_connected_graph(rng: &mut impl Rng, n: usize, extra: usize) -> Graph<f64> {
    let mut edges = Vec::new();
    for v in 1..n {
        let u = rng.random_range(0..v);
        edges.push((u, v));
    }
    for _ in 0..extra {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            edges.push((a.min(b), a.max(b)));
        }
    }
    edges.sort_unstable();
    edges.dedup();
    Graph::abstract_graph(n, edges).unwrap()
}

/// `n` distinct non-zero values in random order.
pub fn unique_values(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n)
        .map(|i| (i as f64 - n as f64 / 2.0 + 0.5) * 0.25 + rng.random_range(0.01..0.1))
        .collect();
    v.shuffle(rng);
    v
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Relative error `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Gradient descent on the cross-entropy alone, written without any of the
/// topology code: same start, acceptance rule and step halving as the
/// trainer. Returns the final weights and the objective at every iteration.
pub fn plain_descent(
    points: &[Vec<f64>],
    labels: &[usize],
    sigma: f64,
    learning_rate: f64,
    iters: usize,
    grad_tol: f64,
) -> (Vec<f64>, Vec<f64>) {
    use toporeg::klr::data_loss_grad;
    use toporeg::{KernelModel, Link};

    let mut model = KernelModel::zeros(points.to_vec(), sigma, Link::Logistic, 2).unwrap();
    let (mut loss, mut grad) = data_loss_grad(&model, points, labels);
    let mut lr = learning_rate;
    let mut objectives = Vec::new();
    'outer: for _ in 0..iters {
        objectives.push(loss);
        let norm = grad.iter().fold(0.0, |acc, &g| acc + g * g).sqrt();
        if norm < grad_tol {
            break;
        }
        let mut halvings = 0;
        loop {
            let mut trial = model.clone();
            trial.weights[0] = model.weights[0].iter().zip(&grad).map(|(&w, &g)| w - lr * g).collect();
            let (l, g) = data_loss_grad(&trial, points, labels);
            if l.is_finite() && !(l > loss + 1e-12 * loss.abs().max(1.0)) {
                model = trial;
                loss = l;
                grad = g;
                break;
            }
            halvings += 1;
            if halvings > 60 {
                break 'outer;
            }
            lr *= 0.5;
        }
    }
    (model.weights[0].clone(), objectives)
}

fn rbf(a: &[f64], b: &[f64], sigma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-d2 / (2.0 * sigma * sigma)).exp()
}

fn score(weights: &[f64], train: &[Vec<f64>], sigma: f64, x: &[f64]) -> f64 {
    weights.iter().zip(train).map(|(w, p)| w * rbf(x, p, sigma)).sum()
}

/// Central difference in weight `i` of the summed cross-entropy, written so
/// the two sides never cancel: each point contributes
/// `softplus(a) - softplus(b) = ln_1p(expm1(a - b) * sigmoid(b))`.
pub fn central_diff_data_loss(
    weights: &[f64],
    train: &[Vec<f64>],
    sigma: f64,
    labels: &[usize],
    i: usize,
    h: f64,
) -> f64 {
    let mut total = 0.0;
    for (x, &t) in train.iter().zip(labels) {
        let z = score(weights, train, sigma, x);
        let dz = h * rbf(x, &train[i], sigma);
        // loss is softplus(-z) for label 1 and softplus(z) for label 0
        let s = if t == 1 { -1.0 } else { 1.0 };
        let b = s * (z - dz);
        let sig_b = 1.0 / (1.0 + (-b).exp());
        total += ((2.0 * s * dz).exp_m1() * sig_b).ln_1p();
    }
    total / (2.0 * h)
}

/// Central difference in weight `i` of `sum tanh(z(p)/2)^2 / 4` over the
/// given vertices, using `tanh x - tanh y = sinh(x - y) / (cosh x cosh y)`.
pub fn central_diff_squared_field(
    weights: &[f64],
    train: &[Vec<f64>],
    sigma: f64,
    vertices: &[Vec<f64>],
    i: usize,
    h: f64,
) -> f64 {
    let mut total = 0.0;
    for p in vertices {
        let z = score(weights, train, sigma, p);
        let dz = h * rbf(p, &train[i], sigma);
        let (x, y) = ((z + dz) / 2.0, (z - dz) / 2.0);
        let diff = 0.5 * dz.sinh() / (x.cosh() * y.cosh());
        let sum = 0.5 * (x.tanh() + y.tanh());
        total += diff * sum;
    }
    total / (2.0 * h)
}
