use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field_graph::{squared_distance, UnitBoxTransform};
use crate::scalar::Real;

/// How per-class scores turn into probabilities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    /// One weight vector, `P(label = 1) = sigmoid(phi(x)^T w)`.
    Logistic,
    /// One weight vector per class, softmax over the scores.
    Softmax,
}

/// Gaussian-kernel classifier over a fixed set of training points.
///
/// Points given to the prediction methods are in the model's normalized
/// coordinates; [`KernelModel::normalize`] maps raw feature vectors there.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct KernelModel<T> {
    pub sigma: T,
    pub num_classes: usize,
    pub link: Link,
    pub train_points: Vec<Vec<T>>,
    pub weights: Vec<Vec<T>>,
    pub normalization: UnitBoxTransform<T>,
}

impl<T: Real> KernelModel<T> {
    /// All-zero model of the given shape.
    pub fn zeros(train_points: Vec<Vec<T>>, sigma: T, link: Link, num_classes: usize) -> Result<Self> {
        let dim = train_points.first().map_or(0, Vec::len);
        let model = Self {
            sigma,
            num_classes,
            link,
            weights: vec![vec![T::zero(); train_points.len()]; link_rows(link, num_classes)],
            normalization: UnitBoxTransform::identity(dim),
            train_points,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > T::zero()) || !self.sigma.is_finite() {
            return Err(Error::Config(format!("kernel width must be positive, got {}", self.sigma)));
        }
        if self.num_classes < 2 {
            return Err(Error::Config("at least two classes are required".into()));
        }
        if self.link == Link::Logistic && self.num_classes != 2 {
            return Err(Error::Config("logistic link is binary".into()));
        }
        if self.weights.len() != link_rows(self.link, self.num_classes) {
            return Err(Error::Structural(format!(
                "{} weight vectors for {} classes",
                self.weights.len(),
                self.num_classes
            )));
        }
        let n = self.train_points.len();
        if let Some(w) = self.weights.iter().find(|w| w.len() != n) {
            return Err(Error::Structural(format!(
                "weight vector of length {} for {} training points",
                w.len(),
                n
            )));
        }
        let dim = self.dim();
        if self.train_points.iter().any(|p| p.len() != dim) {
            return Err(Error::Structural("ragged training points".into()));
        }
        if self.normalization.dim() != dim {
            return Err(Error::Structural("normalization dimension mismatch".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.train_points.first().map_or(0, Vec::len)
    }

    pub fn n_train(&self) -> usize {
        self.train_points.len()
    }

    pub fn normalize(&self, raw: &[T]) -> Vec<T> {
        self.normalization.apply(raw)
    }

    /// `(k(x, x_1), ..., k(x, x_N))`.
    pub fn kernel_vector(&self, x: &[T]) -> Vec<T> {
        kernel_vector(x, &self.train_points, self.sigma)
    }

    /// Linear score `phi(x)^T w` of every weight row.
    pub fn scores(&self, x: &[T]) -> Vec<T> {
        let phi = self.kernel_vector(x);
        self.weights.iter().map(|w| dot(&phi, w)).collect()
    }

    /// `sigmoid(phi(x)^T w)` of a logistic model.
    pub fn predict_binary(&self, x: &[T]) -> T {
        debug_assert_eq!(self.link, Link::Logistic);
        sigmoid(self.scores(x)[0])
    }

    /// `predict_binary(x) - 0.5`, the field whose zero set is the boundary.
    pub fn shifted(&self, x: &[T]) -> T {
        shifted_sigmoid(self.scores(x)[0])
    }

    /// Predicted label of a point in normalized coordinates.
    pub fn predict_label(&self, x: &[T]) -> usize {
        let scores = self.scores(x);
        match self.link {
            Link::Logistic => usize::from(!(shifted_sigmoid(scores[0]) < T::zero())),
            Link::Softmax => argmax(&scores),
        }
    }
}

fn link_rows(link: Link, num_classes: usize) -> usize {
    match link {
        Link::Logistic => 1,
        Link::Softmax => num_classes,
    }
}

/// `exp(-|a - b|^2 / (2 sigma^2))`.
#[inline]
pub fn gaussian_kernel<T: Real>(a: &[T], b: &[T], sigma: T) -> T {
    let denom = (sigma * sigma) + (sigma * sigma);
    (-squared_distance(a, b) / denom).exp()
}

pub fn kernel_vector<T: Real>(x: &[T], points: &[Vec<T>], sigma: T) -> Vec<T> {
    points.iter().map(|p| gaussian_kernel(x, p, sigma)).collect()
}

#[inline]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Logistic function, evaluated without overflow for large `|z|`.
#[inline]
pub fn sigmoid<T: Real>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// `sigmoid(z) - 1/2`, computed as `tanh(z/2)/2` so it is exact near zero.
#[inline]
pub fn shifted_sigmoid<T: Real>(z: T) -> T {
    let half = T::lit(0.5);
    half * (half * z).tanh()
}

/// Index of the largest entry; ties go to the smallest index.
pub fn argmax<T: Real>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}
