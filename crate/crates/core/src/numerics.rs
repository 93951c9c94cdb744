//! Dense row-major matrices and the first-order optimizers used by every
//! trainable head in the crate.
//!
//! Everything here is `f64`. Encoders that produce single precision are
//! widened when their output is copied into a [`Matrix`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Sentence vectors, one row per sentence.
pub type EmbeddingMatrix = Matrix;

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                "Matrix::from_vec",
                format!("{} values", rows * cols),
                format!("{} values", data.len()),
            ));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from equal-length rows. An empty slice yields a 0×0 matrix.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::shape(
                    "Matrix::from_rows",
                    format!("{cols} columns"),
                    format!("{} columns in row {i}", r.len()),
                ));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        Matrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        // chunks_exact panics on zero width
        let width = self.cols.max(1);
        self.data.chunks_exact(width).take(self.rows)
    }

    /// New matrix holding the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// `self · other`
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::shape(
                "matmul",
                format!("lhs cols = rhs rows = {}", self.cols),
                format!("{}", other.rows),
            ));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · otherᵀ`
    pub fn matmul_nt(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::shape(
                "matmul_nt",
                format!("{} columns on both sides", self.cols),
                format!("{}", other.cols),
            ));
        }
        let mut out = Matrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            for j in 0..other.rows {
                out.data[i * other.rows + j] = dot(a, other.row(j));
            }
        }
        Ok(out)
    }

    /// `selfᵀ · other`
    pub fn matmul_tn(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::shape(
                "matmul_tn",
                format!("{} rows on both sides", self.rows),
                format!("{}", other.rows),
            ));
        }
        let mut out = Matrix::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let b = other.row(k);
            for (i, &a) in self.row(k).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &bv) in out_row.iter_mut().zip(b) {
                    *o += a * bv;
                }
            }
        }
        Ok(out)
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|x| *x *= factor);
    }

    /// `self += factor · other`
    pub fn add_scaled(&mut self, other: &Matrix, factor: f64) -> Result<()> {
        self.check_same_shape("add_scaled", other)?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += factor * b;
        }
        Ok(())
    }

    pub fn sum_squares(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    /// Column sums as a 1×cols matrix.
    pub fn column_sums(&self) -> Matrix {
        let mut out = Matrix::zeros(1, self.cols);
        for row in self.iter_rows() {
            for (o, &v) in out.data.iter_mut().zip(row) {
                *o += v;
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn check_same_shape(&self, op: &'static str, other: &Matrix) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shape(
                op,
                format!("{:?}", self.shape()),
                format!("{:?}", other.shape()),
            ));
        }
        Ok(())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity; `None` when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let denom = norm(a) * norm(b);
    if denom == 0.0 {
        None
    } else {
        Some(dot(a, b) / denom)
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Row-wise softmax, in place. Subtracts the row maximum first.
pub fn softmax_rows(m: &mut Matrix) {
    let cols = m.cols;
    if cols == 0 {
        return;
    }
    for row in m.data.chunks_exact_mut(cols) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

/// `KL(p ‖ q)` in nats, with `0 · ln 0 = 0`. Infinite when `q` puts no mass
/// where `p` does.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| {
            if qi > 0.0 {
                pi * (pi / qi).ln()
            } else {
                f64::INFINITY
            }
        })
        .sum()
}

/// `X·Wᵀ + b` for every row of `x`.
pub fn affine(weights: &Matrix, bias: &[f64], x: &Matrix) -> Result<Matrix> {
    if bias.len() != weights.rows() {
        return Err(Error::shape(
            "affine",
            format!("bias of length {}", weights.rows()),
            bias.len(),
        ));
    }
    let mut out = x.matmul_nt(weights)?;
    for row in out.data.chunks_exact_mut(bias.len().max(1)) {
        for (o, &b) in row.iter_mut().zip(bias) {
            *o += b;
        }
    }
    Ok(out)
}

/// Softmax class probabilities for a linear layer: `softmax(X·Wᵀ + b)`, n×C.
pub fn affine_softmax(weights: &Matrix, bias: &[f64], x: &Matrix) -> Result<Matrix> {
    let mut logits = affine(weights, bias, x)?;
    softmax_rows(&mut logits);
    Ok(logits)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Rmsprop,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "adam" => Ok(OptimizerKind::Adam),
            "rmsprop" => Ok(OptimizerKind::Rmsprop),
            other => Err(Error::InvalidArgument(format!(
                "unknown optimizer {other:?} (expected adam or rmsprop)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdamState {
    m: Matrix,
    v: Matrix,
    t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(rows: usize, cols: usize, lr: f64) -> Self {
        AdamState {
            m: Matrix::zeros(rows, cols),
            v: Matrix::zeros(rows, cols),
            t: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut Matrix, grads: &Matrix) -> Result<()> {
        params.check_same_shape("adam_step", grads)?;
        params.check_same_shape("adam_step", &self.m)?;
        self.t += 1;
        let t = self.t as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for ((p, &g), (m, v)) in params
            .data
            .iter_mut()
            .zip(&grads.data)
            .zip(self.m.data.iter_mut().zip(self.v.data.iter_mut()))
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RmspropState {
    sq: Matrix,
    pub lr: f64,
    pub decay: f64,
    pub eps: f64,
}

impl RmspropState {
    pub fn new(rows: usize, cols: usize, lr: f64) -> Self {
        RmspropState {
            sq: Matrix::zeros(rows, cols),
            lr,
            decay: 0.9,
            eps: 1e-8,
        }
    }

    pub fn squared_grads(&self) -> &Matrix {
        &self.sq
    }

    pub fn step(&mut self, params: &mut Matrix, grads: &Matrix) -> Result<()> {
        params.check_same_shape("rmsprop_step", grads)?;
        params.check_same_shape("rmsprop_step", &self.sq)?;
        for ((p, &g), s) in params
            .data
            .iter_mut()
            .zip(&grads.data)
            .zip(self.sq.data.iter_mut())
        {
            *s = self.decay * *s + (1.0 - self.decay) * g * g;
            *p -= self.lr * g / (s.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// Optimizer state for one parameter tensor.
#[derive(Debug, Clone)]
pub enum Optimizer {
    Adam(AdamState),
    Rmsprop(RmspropState),
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, rows: usize, cols: usize, lr: f64) -> Self {
        match kind {
            OptimizerKind::Adam => Optimizer::Adam(AdamState::new(rows, cols, lr)),
            OptimizerKind::Rmsprop => Optimizer::Rmsprop(RmspropState::new(rows, cols, lr)),
        }
    }

    pub fn for_params(kind: OptimizerKind, params: &Matrix, lr: f64) -> Self {
        Optimizer::new(kind, params.rows(), params.cols(), lr)
    }

    pub fn step(&mut self, params: &mut Matrix, grads: &Matrix) -> Result<()> {
        match self {
            Optimizer::Adam(s) => s.step(params, grads),
            Optimizer::Rmsprop(s) => s.step(params, grads),
        }
    }
}

/// Mixes a base seed with a path of stream identifiers (fold id, grid index, ...)
/// into an independent 64-bit seed. SplitMix64 finalizer per component.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    parts.iter().fold(mix(base), |acc, &p| {
        mix(acc ^ mix(p.wrapping_add(0x632B_E59B_D9B4_E019)))
    })
}

pub fn seeded_rng(base: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, parts))
}
