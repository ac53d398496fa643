mod common;

use toporeg::datasets::{flip_labels, make_blobs, make_moons};
use toporeg::klr::{
    data_loss_grad, data_loss_grad_multi, evaluate, psi_fields, topo_loss_grad, train_binary, TrainConfig, Trainer,
};
use toporeg::{build_grid_graph, Discretization, Graph, GridSpec, KernelModel, Link, UnitBoxTransform};

use common::{central_diff_data_loss, rel_err, rng};
use rand::Rng;

fn config(lambda: f64, iters: usize, resolution: usize) -> TrainConfig<f64> {
    TrainConfig {
        lambda,
        learning_rate: 1.0,
        max_iters: iters,
        grad_tol: 0.0,
        discretization: Discretization::Grid { resolution },
        l2: 0.0,
        seed: 0,
    }
}

fn random_model(n: usize, classes: usize, seed: u64) -> (KernelModel<f64>, Vec<usize>) {
    let mut r = rng(seed);
    let points: Vec<Vec<f64>> = (0..n).map(|_| vec![r.random_range(0.0..1.0), r.random_range(0.0..1.0)]).collect();
    let link = if classes == 2 { Link::Logistic } else { Link::Softmax };
    let mut model = KernelModel::zeros(points, 0.3, link, classes).unwrap();
    for row in &mut model.weights {
        for w in row.iter_mut() {
            *w = r.random_range(-2.0..2.0);
        }
    }
    let labels = (0..n).map(|_| r.random_range(0..classes)).collect();
    (model, labels)
}

#[test]
fn binary_data_gradient_matches_central_differences() {
    for seed in 0..5 {
        let (model, labels) = random_model(12, 2, seed);
        let (_, grad) = data_loss_grad(&model, &model.train_points, &labels);
        for (i, &g) in grad.iter().enumerate() {
            let fd = central_diff_data_loss(&model.weights[0], &model.train_points, 0.3, &labels, i, 1e-6);
            assert!(rel_err(g, fd) <= 1e-6, "seed {seed} coord {i}: {g} vs {fd}");
        }
    }
}

#[test]
fn multiclass_data_gradient_matches_central_differences() {
    let (model, labels) = random_model(10, 3, 4);
    let points = model.train_points.clone();
    let (_, grad) = data_loss_grad_multi(&model, &points, &labels);
    let h = 1e-5;
    for k in 0..3 {
        for i in 0..points.len() {
            let mut up = model.clone();
            up.weights[k][i] += h;
            let mut down = model.clone();
            down.weights[k][i] -= h;
            let fd = (data_loss_grad_multi(&up, &points, &labels).0 - data_loss_grad_multi(&down, &points, &labels).0)
                / (2.0 * h);
            assert!((grad[k][i] - fd).abs() <= 1e-7 * grad[k][i].abs().max(1.0), "class {k} coord {i}");
        }
    }
}

#[test]
fn penalty_gradient_matches_differences_on_a_small_lattice() {
    let g: Graph<f64> = build_grid_graph(&GridSpec::unit(12, 2)).unwrap();
    let (mut model, _) = random_model(16, 2, 11);
    model.sigma = 0.1;
    let (penalty, grad) = topo_loss_grad(&model, &g).unwrap();
    assert!(penalty > 0.0);
    let h = 1e-5;
    for (i, &a) in grad.iter().enumerate() {
        let mut up = model.clone();
        up.weights[0][i] += h;
        let mut down = model.clone();
        down.weights[0][i] -= h;
        let fd = (topo_loss_grad(&up, &g).unwrap().0 - topo_loss_grad(&down, &g).unwrap().0) / (2.0 * h);
        assert!((a - fd).abs() <= 1e-6 * a.abs().max(1e-3), "coord {i}: {a} vs {fd}");
    }
}

#[test]
fn zero_penalty_weight_matches_plain_descent_bitwise() {
    let ds = make_moons::<f64>(60, 0.2, 3).unwrap();
    let (points, _) = toporeg::normalize_unit_box(&ds.points).unwrap();
    let cfg = config(0.0, 80, 20);
    let outcome = Trainer::new(&points, &ds.labels, 2, 0.1, cfg.discretization).unwrap().fit_binary(&cfg).unwrap();
    let (w, objectives) = common::plain_descent(&points, &ds.labels, 0.1, 1.0, 80, 0.0);
    assert_eq!(outcome.model.weights[0], w);
    let traced: Vec<f64> = outcome.trace.iter().map(|r| r.objective).collect();
    assert_eq!(traced, objectives);
    assert!(outcome.trace.iter().all(|r| r.components.is_none()));
}

#[test]
fn recorded_objective_never_rises() {
    let ds = flip_labels(&make_moons::<f64>(150, 0.1, 5).unwrap(), 0.2, 5).unwrap();
    let (points, _) = toporeg::normalize_unit_box(&ds.points).unwrap();
    let cfg = config(1e3, 60, 30);
    let outcome = Trainer::new(&points, &ds.labels, 2, 0.05, cfg.discretization).unwrap().fit_binary(&cfg).unwrap();
    assert!(outcome.trace.len() > 1);
    for w in outcome.trace.windows(2) {
        let (a, b) = (w[0].objective, w[1].objective);
        assert!(b <= a + 1e-12 * a.abs().max(1.0), "objective rose from {a} to {b}");
    }
    assert!(outcome.trace.iter().all(|r| r.components.is_some()));
}

#[test]
fn separable_blobs_are_fit_exactly() {
    let ds = make_blobs::<f64>(80, &[vec![0.0, 0.0], vec![4.0, 4.0]], 0.4, 2).unwrap();
    let transform = UnitBoxTransform::fit(&ds.points).unwrap();
    let normalized = toporeg::Dataset::new("blobs", transform.apply_all(&ds.points), ds.labels.clone()).unwrap();
    let mut model = train_binary(&normalized, &config(0.0, 200, 20), 0.2).unwrap();
    model.normalization = transform;
    assert_eq!(evaluate(&model, &ds).unwrap(), 0.0);
}

#[test]
fn model_json_round_trip_keeps_predictions() {
    let ds = make_moons::<f64>(40, 0.2, 9).unwrap();
    let transform = UnitBoxTransform::fit(&ds.points).unwrap();
    let normalized = toporeg::Dataset::new("m", transform.apply_all(&ds.points), ds.labels.clone()).unwrap();
    let mut model = train_binary(&normalized, &config(10.0, 30, 15), 0.2).unwrap();
    model.normalization = transform;
    let text = serde_json::to_string(&model).unwrap();
    let back: KernelModel<f64> = serde_json::from_str(&text).unwrap();
    assert_eq!(back, model);
    assert_eq!(evaluate(&back, &ds).unwrap(), evaluate(&model, &ds).unwrap());
}

#[test]
fn two_class_softmax_sign_rule_agrees_with_argmax() {
    let ds = flip_labels(&make_moons::<f64>(80, 0.2, 4).unwrap(), 0.1, 4).unwrap();
    let (points, _) = toporeg::normalize_unit_box(&ds.points).unwrap();
    let cfg = config(100.0, 40, 25);
    let outcome =
        Trainer::new(&points, &ds.labels, 2, 0.1, cfg.discretization).unwrap().fit_multilabel(&cfg).unwrap();
    let g: Graph<f64> = build_grid_graph(&GridSpec::unit(25, 2)).unwrap();
    let psi = psi_fields(&outcome.model, &g);
    let first = psi.field(0, &g).unwrap();
    for v in 0..g.vertex_count() {
        let label = outcome.model.predict_label(g.position(v));
        assert_eq!(label == 0, first.value(v) < 0.0, "vertex {v}");
    }
}
