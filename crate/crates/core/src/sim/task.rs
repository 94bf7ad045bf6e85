//! Synthetic convex tasks with analytic mini-batch gradients.
//!
//! The model is a `features x outputs` weight matrix `W`, stored row-major as
//! a flat parameter vector. Linear regression minimizes
//! `(1/N) Σ ½‖Wᵀxᵢ − yᵢ‖²`; logistic regression treats every output as an
//! independent ±1 label and minimizes `(1/N) Σᵢ Σⱼ log(1 + exp(−yᵢⱼ (Wᵀxᵢ)ⱼ))`.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::atoms::Tensor;
use crate::error::{Error, Result};
use crate::sparsifier::RngStream;

/// Stream address reserved for dataset generation.
pub(crate) const DATA_ROUND: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    LinearRegression,
    LogisticRegression,
}

/// A contiguous `rows x cols` block of the flat parameter vector, sparsified
/// as one matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layer {
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Layer {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub kind: TaskKind,
    /// Input dimension `d`.
    pub features: usize,
    #[serde(default = "one")]
    pub outputs: usize,
    pub samples: usize,
    /// Standard deviation of the label noise.
    #[serde(default = "default_noise")]
    pub noise: f64,
    /// Matrix blocks `[rows, cols]` covering the parameters in order. Empty
    /// means one `features x outputs` block.
    #[serde(default)]
    pub layers: Vec<[usize; 2]>,
}

fn one() -> usize {
    1
}

fn default_noise() -> f64 {
    0.1
}

#[derive(Debug, Clone)]
pub struct Task {
    pub kind: TaskKind,
    pub features: usize,
    pub outputs: usize,
    pub samples: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    layers: Vec<Layer>,
    /// `XᵀX/N`, `XᵀY/N` and `‖Y‖²/N` for closed-form linear losses.
    gram: Vec<f64>,
    cross: Vec<f64>,
    target_energy: f64,
}

impl Task {
    pub fn new(kind: TaskKind, features: usize, outputs: usize, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if features == 0 || outputs == 0 {
            return Err(Error::Config("features and outputs must be positive".into()));
        }
        if x.is_empty() || !x.len().is_multiple_of(features) {
            return Err(Error::Shape(format!(
                "design matrix of {} values is not a multiple of {features} features",
                x.len()
            )));
        }
        let samples = x.len() / features;
        if y.len() != samples * outputs {
            return Err(Error::LengthMismatch {
                what: "targets",
                expected: samples * outputs,
                actual: y.len(),
            });
        }
        if let Some(index) = x.iter().chain(&y).position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let (d, k, n) = (features, outputs, samples as f64);
        let mut gram = vec![0.0; d * d];
        let mut cross = vec![0.0; d * k];
        for s in 0..samples {
            let xs = &x[s * d..(s + 1) * d];
            let ys = &y[s * k..(s + 1) * k];
            for i in 0..d {
                for j in 0..d {
                    gram[i * d + j] += xs[i] * xs[j];
                }
                for j in 0..k {
                    cross[i * k + j] += xs[i] * ys[j];
                }
            }
        }
        gram.iter_mut().chain(cross.iter_mut()).for_each(|v| *v /= n);
        let target_energy = y.iter().map(|v| v * v).sum::<f64>() / n;
        Ok(Self {
            kind,
            features,
            outputs,
            samples,
            x,
            y,
            layers: vec![Layer { offset: 0, rows: features, cols: outputs }],
            gram,
            cross,
            target_energy,
        })
    }

    /// Gaussian design, planted `W* ~ N(0, 1/d)`, labels from the planted
    /// model plus `noise`-scaled Gaussian noise (thresholded to ±1 for
    /// logistic regression). Fully determined by `seed`.
    pub fn synthetic(spec: &TaskSpec, seed: u64) -> Result<Self> {
        let (d, k, n) = (spec.features, spec.outputs, spec.samples);
        if d == 0 || k == 0 || n == 0 {
            return Err(Error::Config("features, outputs and samples must be positive".into()));
        }
        if !(spec.noise.is_finite() && spec.noise >= 0.0) {
            return Err(Error::Config(format!("noise must be nonnegative, got {}", spec.noise)));
        }
        let mut rng = RngStream::new(seed, DATA_ROUND, 0, 0);
        let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
        let x: Vec<f64> = (0..n * d).map(|_| normal()).collect();
        let scale = 1.0 / (d as f64).sqrt();
        let planted: Vec<f64> = (0..d * k).map(|_| scale * normal()).collect();
        let mut y = vec![0.0; n * k];
        for s in 0..n {
            for j in 0..k {
                let clean: f64 = (0..d).map(|i| x[s * d + i] * planted[i * k + j]).sum();
                let v = clean + spec.noise * normal();
                y[s * k + j] = match spec.kind {
                    TaskKind::LinearRegression => v,
                    TaskKind::LogisticRegression => if v >= 0.0 { 1.0 } else { -1.0 },
                };
            }
        }
        let task = Self::new(spec.kind, d, k, x, y)?;
        if spec.layers.is_empty() {
            Ok(task)
        } else {
            task.with_layers(&spec.layers)
        }
    }

    /// Partitions the parameters into consecutive `[rows, cols]` blocks.
    pub fn with_layers(mut self, shapes: &[[usize; 2]]) -> Result<Self> {
        let mut offset = 0;
        let mut layers = Vec::with_capacity(shapes.len());
        for &[rows, cols] in shapes {
            if rows == 0 || cols == 0 {
                return Err(Error::Config(format!("layer shape [{rows}, {cols}] is empty")));
            }
            layers.push(Layer { offset, rows, cols });
            offset += rows * cols;
        }
        if offset != self.dim() {
            return Err(Error::Config(format!(
                "layers cover {offset} parameters but the model has {}",
                self.dim()
            )));
        }
        self.layers = layers;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.features * self.outputs
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    fn check_params(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.dim() {
            return Err(Error::LengthMismatch {
                what: "parameter vector",
                expected: self.dim(),
                actual: w.len(),
            });
        }
        Ok(())
    }

    fn predict(&self, w: &[f64], sample: usize, out: &mut [f64]) {
        let (d, k) = (self.features, self.outputs);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &xi) in self.x[sample * d..(sample + 1) * d].iter().enumerate() {
            for (o, &wij) in out.iter_mut().zip(&w[i * k..(i + 1) * k]) {
                *o += xi * wij;
            }
        }
    }

    /// Full empirical risk.
    pub fn loss(&self, w: &[f64]) -> Result<f64> {
        self.check_params(w)?;
        let (d, k) = (self.features, self.outputs);
        match self.kind {
            TaskKind::LinearRegression => {
                // ½ (tr(WᵀSW) − 2 tr(WᵀC) + ‖Y‖²/N)
                let mut quad = 0.0;
                for i in 0..d {
                    for j in 0..k {
                        let sw: f64 = (0..d).map(|l| self.gram[i * d + l] * w[l * k + j]).sum();
                        quad += w[i * k + j] * (sw - 2.0 * self.cross[i * k + j]);
                    }
                }
                Ok(0.5 * (quad + self.target_energy))
            }
            TaskKind::LogisticRegression => {
                let mut z = vec![0.0; k];
                let mut total = 0.0;
                for s in 0..self.samples {
                    self.predict(w, s, &mut z);
                    for (j, &zj) in z.iter().enumerate() {
                        total += softplus(-self.y[s * k + j] * zj);
                    }
                }
                Ok(total / self.samples as f64)
            }
        }
    }

    /// Exact mini-batch gradient `(1/|B|) Σ_{b∈B} ∇ℓ(W; x_b)` as a
    /// `features x outputs` matrix.
    pub fn gradient(&self, w: &[f64], batch: &[usize]) -> Result<Tensor> {
        self.check_params(w)?;
        if batch.is_empty() {
            return Err(Error::Config("empty batch".into()));
        }
        if let Some(&bad) = batch.iter().find(|&&b| b >= self.samples) {
            return Err(Error::Config(format!(
                "batch index {bad} out of range for {} samples",
                self.samples
            )));
        }
        let (d, k) = (self.features, self.outputs);
        let mut g = vec![0.0; d * k];
        let mut z = vec![0.0; k];
        for &s in batch {
            self.predict(w, s, &mut z);
            let ys = &self.y[s * k..(s + 1) * k];
            for (zj, &yj) in z.iter_mut().zip(ys) {
                *zj = match self.kind {
                    TaskKind::LinearRegression => *zj - yj,
                    TaskKind::LogisticRegression => -yj * sigmoid(-yj * *zj),
                };
            }
            for (i, &xi) in self.x[s * d..(s + 1) * d].iter().enumerate() {
                for (gij, &rj) in g[i * k..(i + 1) * k].iter_mut().zip(&z) {
                    *gij += xi * rj;
                }
            }
        }
        let inv = 1.0 / batch.len() as f64;
        g.iter_mut().for_each(|v| *v *= inv);
        Tensor::matrix(d, k, g)
    }

    pub fn full_gradient(&self, w: &[f64]) -> Result<Tensor> {
        let all: Vec<usize> = (0..self.samples).collect();
        self.gradient(w, &all)
    }

    /// Least-squares minimizer of a linear task by Cholesky on the normal
    /// equations, with its loss.
    pub fn least_squares_optimum(&self) -> Result<(Vec<f64>, f64)> {
        if self.kind != TaskKind::LinearRegression {
            return Err(Error::Config("least-squares optimum needs a linear regression task".into()));
        }
        let (d, k) = (self.features, self.outputs);
        let l = cholesky(&self.gram, d).ok_or(Error::DegenerateInput("design matrix is rank deficient"))?;
        let mut w = vec![0.0; d * k];
        for j in 0..k {
            let rhs: Vec<f64> = (0..d).map(|i| self.cross[i * k + j]).collect();
            let col = cholesky_solve(&l, d, &rhs);
            for i in 0..d {
                w[i * k + j] = col[i];
            }
        }
        let loss = self.loss(&w)?;
        Ok((w, loss))
    }
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|p| l[i * n + p] * l[j * n + p]).sum();
            if i == j {
                let diag = a[i * n + i] - s;
                if diag <= 0.0 {
                    return None;
                }
                l[i * n + i] = diag.sqrt();
            } else {
                l[i * n + j] = (a[i * n + j] - s) / l[j * n + j];
            }
        }
    }
    Some(l)
}

fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|p| l[i * n + p] * y[p]).sum();
        y[i] = (b[i] - s) / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|p| l[p * n + i] * x[p]).sum();
        x[i] = (y[i] - s) / l[i * n + i];
    }
    x
}
