//! Logistic-regression and one-hidden-layer MLP heads trained on frozen
//! sentence embeddings.
//!
//! Both heads share one objective: mean `KL(p ‖ softmax(logits))` over the
//! batch plus `λ·‖W‖²` on the weight matrices (biases are not penalized).
//! With one-hot targets the KL term is exactly the cross-entropy, so the same
//! code trains classifiers and the score-distribution head used for
//! relatedness tasks.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    affine, seeded_rng, sigmoid, softmax_rows, Matrix, Optimizer, OptimizerKind,
};

pub const DEFAULT_L2_GRID: [f64; 6] = [1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    /// Hidden units; 0 selects logistic regression.
    pub nhid: usize,
    pub optim: OptimizerKind,
    pub batch_size: usize,
    /// Consecutive non-improving evaluation epochs tolerated before stopping.
    pub tenacity: usize,
    /// Full passes over the training set per evaluation epoch.
    pub epoch_size: usize,
    pub dropout: f64,
    pub l2_grid: Vec<f64>,
    pub lr: f64,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            nhid: 0,
            optim: OptimizerKind::Adam,
            batch_size: 64,
            tenacity: 5,
            epoch_size: 4,
            dropout: 0.0,
            l2_grid: DEFAULT_L2_GRID.to_vec(),
            lr: 0.001,
            max_epochs: 200,
            seed: 1111,
        }
    }
}

impl ClassifierConfig {
    /// Faster, slightly less accurate settings for repeated evaluation during training.
    pub fn prototyping() -> Self {
        ClassifierConfig {
            optim: OptimizerKind::Rmsprop,
            batch_size: 128,
            tenacity: 3,
            epoch_size: 2,
            ..ClassifierConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(format!("classifier config: {msg}")));
        if self.batch_size == 0 {
            return bad("batch_size must be > 0");
        }
        if self.tenacity == 0 {
            return bad("tenacity must be > 0");
        }
        if self.epoch_size == 0 {
            return bad("epoch_size must be > 0");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be > 0");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if self.l2_grid.is_empty() {
            return bad("l2_grid must not be empty");
        }
        if self.l2_grid.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return bad("l2_grid values must be finite and >= 0");
        }
        Ok(())
    }

    /// The grid sorted ascending with duplicates removed.
    pub fn sorted_grid(&self) -> Vec<f64> {
        let mut grid = self.l2_grid.clone();
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        grid
    }
}

/// `(u, v, |u − v|, u ⊙ v)`
pub fn pair_features(u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    if u.len() != v.len() {
        return Err(Error::shape("pair_features", u.len(), v.len()));
    }
    let mut out = Vec::with_capacity(4 * u.len());
    out.extend_from_slice(u);
    out.extend_from_slice(v);
    out.extend(u.iter().zip(v).map(|(a, b)| (a - b).abs()));
    out.extend(u.iter().zip(v).map(|(a, b)| a * b));
    Ok(out)
}

/// Row-wise [`pair_features`] over two aligned embedding matrices.
pub fn pair_feature_matrix(left: &Matrix, right: &Matrix) -> Result<Matrix> {
    left.check_same_shape("pair_feature_matrix", right)?;
    let mut data = Vec::with_capacity(left.rows() * left.cols() * 4);
    for (u, v) in left.iter_rows().zip(right.iter_rows()) {
        data.extend(pair_features(u, v)?);
    }
    Matrix::from_vec(left.rows(), left.cols() * 4, data)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Labels(Vec<usize>),
    /// One probability row per sample.
    Distributions(Matrix),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Labels(l) => l.len(),
            Targets::Distributions(m) => m.rows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn select(&self, indices: &[usize]) -> Targets {
        match self {
            Targets::Labels(l) => Targets::Labels(indices.iter().map(|&i| l[i]).collect()),
            Targets::Distributions(m) => Targets::Distributions(m.select_rows(indices)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub targets: Targets,
    pub n_classes: usize,
}

impl Dataset {
    pub fn classification(features: Matrix, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::LabelOutOfRange {
                label: bad,
                n_classes,
            });
        }
        Self::checked(features, Targets::Labels(labels), n_classes)
    }

    pub fn distributions(features: Matrix, targets: Matrix) -> Result<Self> {
        let n_classes = targets.cols();
        Self::checked(features, Targets::Distributions(targets), n_classes)
    }

    fn checked(features: Matrix, targets: Targets, n_classes: usize) -> Result<Self> {
        if features.rows() != targets.len() {
            return Err(Error::shape("Dataset", features.rows(), targets.len()));
        }
        if n_classes < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 classes, got {n_classes}"
            )));
        }
        Ok(Dataset {
            features,
            targets,
            n_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(indices),
            targets: self.targets.select(indices),
            n_classes: self.n_classes,
        }
    }

    pub fn labels(&self) -> Option<&[usize]> {
        match &self.targets {
            Targets::Labels(l) => Some(l),
            Targets::Distributions(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogReg {
    /// C×d
    pub weights: Matrix,
    /// 1×C
    pub bias: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    /// h×d
    pub w1: Matrix,
    pub b1: Matrix,
    /// C×h
    pub w2: Matrix,
    pub b2: Matrix,
    pub dropout: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    LogReg(LogReg),
    Mlp(Mlp),
}

impl Model {
    /// Zero-initialized logistic regression or a uniformly initialized MLP
    /// (`±1/√fan_in` on weights, zero biases).
    pub fn init(
        config: &ClassifierConfig,
        dim: usize,
        n_classes: usize,
        rng: &mut impl Rng,
    ) -> Model {
        if config.nhid == 0 {
            return Model::LogReg(LogReg {
                weights: Matrix::zeros(n_classes, dim),
                bias: Matrix::zeros(1, n_classes),
            });
        }
        let h = config.nhid;
        let mut uniform = |rows: usize, cols: usize| {
            let bound = 1.0 / (cols.max(1) as f64).sqrt();
            Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-bound..=bound))
        };
        let w1 = uniform(h, dim);
        let w2 = uniform(n_classes, h);
        Model::Mlp(Mlp {
            w1,
            b1: Matrix::zeros(1, h),
            w2,
            b2: Matrix::zeros(1, n_classes),
            dropout: config.dropout,
        })
    }

    pub fn n_classes(&self) -> usize {
        match self {
            Model::LogReg(m) => m.weights.rows(),
            Model::Mlp(m) => m.w2.rows(),
        }
    }

    pub fn params(&self) -> Vec<&Matrix> {
        match self {
            Model::LogReg(m) => vec![&m.weights, &m.bias],
            Model::Mlp(m) => vec![&m.w1, &m.b1, &m.w2, &m.b2],
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Matrix> {
        match self {
            Model::LogReg(m) => vec![&mut m.weights, &mut m.bias],
            Model::Mlp(m) => vec![&mut m.w1, &mut m.b1, &mut m.w2, &mut m.b2],
        }
    }

    /// Squared Frobenius norm of the penalized weight matrices.
    pub fn weight_norm_sq(&self) -> f64 {
        match self {
            Model::LogReg(m) => m.weights.sum_squares(),
            Model::Mlp(m) => m.w1.sum_squares() + m.w2.sum_squares(),
        }
    }

    pub fn logits(&self, x: &Matrix) -> Result<Matrix> {
        match self {
            Model::LogReg(m) => affine(&m.weights, m.bias.data(), x),
            Model::Mlp(m) => {
                let hidden = m.hidden(x)?;
                affine(&m.w2, m.b2.data(), &hidden)
            }
        }
    }

    pub fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        let mut p = self.logits(x)?;
        softmax_rows(&mut p);
        Ok(p)
    }

    /// Argmax class per row; ties go to the lowest class index.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        let logits = self.logits(x)?;
        Ok(logits
            .iter_rows()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (j, &v)| {
                        if v > best.1 {
                            (j, v)
                        } else {
                            best
                        }
                    })
                    .0
            })
            .collect())
    }

    /// Mean KL loss plus L2 penalty, with exact gradients for every parameter
    /// (in [`Model::params`] order). Dropout is not applied.
    pub fn loss_and_grads(
        &self,
        x: &Matrix,
        targets: &Targets,
        lambda: f64,
    ) -> Result<(f64, Vec<Matrix>)> {
        self.loss_and_grads_masked(x, targets, lambda, None)
    }

    fn loss_and_grads_masked(
        &self,
        x: &Matrix,
        targets: &Targets,
        lambda: f64,
        dropout_mask: Option<&Matrix>,
    ) -> Result<(f64, Vec<Matrix>)> {
        if x.rows() != targets.len() {
            return Err(Error::shape("loss_and_grads", x.rows(), targets.len()));
        }
        if x.rows() == 0 {
            return Err(Error::EmptyInput("loss_and_grads"));
        }
        if lambda < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "negative l2 penalty {lambda}"
            )));
        }
        match self {
            Model::LogReg(m) => {
                let logits = affine(&m.weights, m.bias.data(), x)?;
                let (data_loss, dlogits) = kl_loss_and_logit_grad(&logits, targets)?;
                let mut gw = dlogits.matmul_tn(x)?;
                gw.add_scaled(&m.weights, 2.0 * lambda)?;
                let gb = dlogits.column_sums();
                Ok((data_loss + lambda * m.weights.sum_squares(), vec![gw, gb]))
            }
            Model::Mlp(m) => {
                let hidden = m.hidden(x)?;
                let dropped = match dropout_mask {
                    Some(mask) => elementwise(&hidden, mask)?,
                    None => hidden.clone(),
                };
                let logits = affine(&m.w2, m.b2.data(), &dropped)?;
                let (data_loss, dlogits) = kl_loss_and_logit_grad(&logits, targets)?;
                let mut gw2 = dlogits.matmul_tn(&dropped)?;
                gw2.add_scaled(&m.w2, 2.0 * lambda)?;
                let gb2 = dlogits.column_sums();

                let mut dhidden = dlogits.matmul(&m.w2)?;
                if let Some(mask) = dropout_mask {
                    dhidden = elementwise(&dhidden, mask)?;
                }
                for (g, &h) in dhidden.data_mut().iter_mut().zip(hidden.data()) {
                    *g *= h * (1.0 - h);
                }
                let mut gw1 = dhidden.matmul_tn(x)?;
                gw1.add_scaled(&m.w1, 2.0 * lambda)?;
                let gb1 = dhidden.column_sums();
                let penalty = lambda * (m.w1.sum_squares() + m.w2.sum_squares());
                Ok((data_loss + penalty, vec![gw1, gb1, gw2, gb2]))
            }
        }
    }

    /// Mean KL (cross-entropy for labels) over `data`, without the penalty.
    pub fn data_loss(&self, data: &Dataset) -> Result<f64> {
        let logits = self.logits(&data.features)?;
        Ok(kl_loss_and_logit_grad(&logits, &data.targets)?.0)
    }

    /// Validation error: `1 − accuracy` for labels, mean KL for distributions.
    pub fn validation_error(&self, data: &Dataset) -> Result<f64> {
        match &data.targets {
            Targets::Labels(labels) => {
                let pred = self.predict(&data.features)?;
                Ok(1.0 - crate::metrics::accuracy(&pred, labels)?)
            }
            Targets::Distributions(_) => self.data_loss(data),
        }
    }
}

impl Mlp {
    fn hidden(&self, x: &Matrix) -> Result<Matrix> {
        let mut h = affine(&self.w1, self.b1.data(), x)?;
        h.data_mut().iter_mut().for_each(|v| *v = sigmoid(*v));
        Ok(h)
    }

    /// Inverted-dropout mask: entries are 0 or `1/(1−p)`.
    fn dropout_mask(&self, rows: usize, rng: &mut impl Rng) -> Option<Matrix> {
        if self.dropout <= 0.0 {
            return None;
        }
        let keep = 1.0 - self.dropout;
        Some(Matrix::from_fn(rows, self.w1.rows(), |_, _| {
            if rng.gen::<f64>() < keep {
                1.0 / keep
            } else {
                0.0
            }
        }))
    }
}

fn elementwise(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    a.check_same_shape("elementwise", b)?;
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect();
    Matrix::from_vec(a.rows(), a.cols(), data)
}

/// Mean KL(p ‖ softmax(z)) and its gradient `(softmax(z) − p)/n` w.r.t. the logits.
fn kl_loss_and_logit_grad(logits: &Matrix, targets: &Targets) -> Result<(f64, Matrix)> {
    let (n, c) = logits.shape();
    if let Targets::Distributions(p) = targets {
        if p.shape() != (n, c) {
            return Err(Error::shape(
                "kl_loss",
                format!("{:?}", (n, c)),
                format!("{:?}", p.shape()),
            ));
        }
    }
    let mut grad = Matrix::zeros(n, c);
    let mut total = 0.0;
    for i in 0..n {
        let row = logits.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        let g = grad.row_mut(i);
        for (gj, &z) in g.iter_mut().zip(row) {
            *gj = (z - lse).exp();
        }
        match targets {
            Targets::Labels(labels) => {
                let y = labels[i];
                if y >= c {
                    return Err(Error::LabelOutOfRange {
                        label: y,
                        n_classes: c,
                    });
                }
                total += lse - row[y];
                g[y] -= 1.0;
            }
            Targets::Distributions(p) => {
                for (j, &pj) in p.row(i).iter().enumerate() {
                    if pj > 0.0 {
                        total += pj * (pj.ln() - (row[j] - lse));
                    }
                    g[j] -= pj;
                }
            }
        }
    }
    let inv_n = 1.0 / n as f64;
    grad.scale(inv_n);
    Ok((total * inv_n, grad))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Tenacity,
    MaxEpochs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub best_l2: f64,
    /// Best validation error seen (the returned snapshot's).
    pub dev_error: f64,
    /// `1 − dev_error` for classifiers, `exp(−dev_error)` for distribution heads.
    pub dev_score: f64,
    pub epochs_run: usize,
    pub stopped_by: StopReason,
    /// Validation error after each evaluation epoch.
    pub dev_history: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub model: Model,
    pub report: TrainReport,
}

fn error_to_score(targets: &Targets, error: f64) -> f64 {
    match targets {
        Targets::Labels(_) => 1.0 - error,
        Targets::Distributions(_) => (-error).exp(),
    }
}

/// Trains one head with a fixed L2 penalty, early-stopping on `dev`.
///
/// One evaluation epoch is `epoch_size` shuffled passes over `train`. The
/// best-on-dev snapshot is returned once `tenacity` consecutive epochs fail to
/// improve the validation error, or after `max_epochs`. `stream` selects the
/// random stream (derived together with `config.seed`), so distinct folds and
/// grid points train independently yet reproducibly.
pub fn train(
    config: &ClassifierConfig,
    lambda: f64,
    train: &Dataset,
    dev: &Dataset,
    stream: &[u64],
) -> Result<Trained> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyInput("training split"));
    }
    if dev.is_empty() {
        return Err(Error::EmptyInput("validation split"));
    }
    if train.dim() != dev.dim() || train.n_classes != dev.n_classes {
        return Err(Error::shape(
            "train",
            format!("dev dim {} / {} classes", train.dim(), train.n_classes),
            format!("dim {} / {} classes", dev.dim(), dev.n_classes),
        ));
    }

    let mut rng: ChaCha8Rng = seeded_rng(config.seed, stream);
    let mut model = Model::init(config, train.dim(), train.n_classes, &mut rng);
    let mut optimizers: Vec<Optimizer> = model
        .params()
        .into_iter()
        .map(|p| Optimizer::for_params(config.optim, p, config.lr))
        .collect();

    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best = (f64::INFINITY, model.clone());
    let mut history = Vec::new();
    let mut bad_epochs = 0;
    let mut stopped_by = StopReason::MaxEpochs;

    for _epoch in 0..config.max_epochs {
        for _pass in 0..config.epoch_size {
            order.shuffle(&mut rng);
            for chunk in order.chunks(config.batch_size) {
                let batch = train.subset(chunk);
                let mask = match &model {
                    Model::Mlp(m) => m.dropout_mask(batch.len(), &mut rng),
                    Model::LogReg(_) => None,
                };
                let (loss, grads) = model.loss_and_grads_masked(
                    &batch.features,
                    &batch.targets,
                    lambda,
                    mask.as_ref(),
                )?;
                if !loss.is_finite() {
                    return Err(Error::Diverged { lambda });
                }
                for ((param, grad), opt) in model
                    .params_mut()
                    .into_iter()
                    .zip(&grads)
                    .zip(&mut optimizers)
                {
                    opt.step(param, grad)?;
                }
            }
        }

        let err = model.validation_error(dev)?;
        if !err.is_finite() {
            return Err(Error::Diverged { lambda });
        }
        history.push(err);
        if err < best.0 {
            best = (err, model.clone());
            bad_epochs = 0;
        } else {
            bad_epochs += 1;
            if bad_epochs >= config.tenacity {
                stopped_by = StopReason::Tenacity;
                break;
            }
        }
    }

    let (dev_error, model) = best;
    Ok(Trained {
        model,
        report: TrainReport {
            best_l2: lambda,
            dev_error,
            dev_score: error_to_score(&dev.targets, dev_error),
            epochs_run: history.len(),
            stopped_by,
            dev_history: history,
        },
    })
}

#[derive(Debug, Clone)]
pub struct GridSearch {
    pub best_lambda: f64,
    pub best_dev_score: f64,
    pub best: Trained,
    /// `(λ, dev score)` for every grid point, ascending λ.
    pub scores: Vec<(f64, f64)>,
}

/// Trains once per grid value on `train`, keeps the best on `dev`; ties go to
/// the smallest λ. Grid points run in parallel.
pub fn grid_search_l2(
    config: &ClassifierConfig,
    train_set: &Dataset,
    dev: &Dataset,
    stream: &[u64],
) -> Result<GridSearch> {
    config.validate()?;
    let grid = config.sorted_grid();
    let runs: Vec<Trained> = grid
        .par_iter()
        .enumerate()
        .map(|(i, &lambda)| {
            let mut s = stream.to_vec();
            s.push(i as u64);
            train(config, lambda, train_set, dev, &s)
        })
        .collect::<Result<_>>()?;

    let scores = grid
        .iter()
        .zip(&runs)
        .map(|(&l, r)| (l, r.report.dev_score))
        .collect();
    let mut best_idx = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.report.dev_error < runs[best_idx].report.dev_error {
            best_idx = i;
        }
    }
    let best = runs.into_iter().nth(best_idx).expect("grid is nonempty");
    log::debug!(
        "grid search: best l2 = {} (dev score {:.4})",
        grid[best_idx],
        best.report.dev_score
    );
    Ok(GridSearch {
        best_lambda: grid[best_idx],
        best_dev_score: best.report.dev_score,
        best,
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn separable(n: usize, d: usize, seed: u64) -> Dataset {
        let mut rng = seeded_rng(seed, &[]);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let y = i % 2;
            let mut x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            x[0] = if y == 1 {
                rng.gen_range(0.5..1.5)
            } else {
                -rng.gen_range(0.5..1.5)
            };
            rows.push(x);
            labels.push(y);
        }
        Dataset::classification(Matrix::from_rows(&rows).unwrap(), labels, 2).unwrap()
    }

    #[test]
    fn pair_features_layout() {
        assert_eq!(
            pair_features(&[1.0, 2.0], &[3.0, 1.0]).unwrap(),
            vec![1.0, 2.0, 3.0, 1.0, 2.0, 1.0, 3.0, 2.0]
        );
        let u = [0.5, -2.0, 3.0];
        let f = pair_features(&u, &u).unwrap();
        assert_eq!(&f[6..9], &[0.0, 0.0, 0.0]);
        assert_eq!(&f[9..], &[0.25, 4.0, 9.0]);
        assert_eq!(pair_features(&[0.0; 300], &[1.0; 300]).unwrap().len(), 1200);
        assert!(pair_features(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn zero_model_loss_is_log_c() {
        let config = ClassifierConfig::default();
        let mut rng = seeded_rng(0, &[]);
        let model = Model::init(&config, 4, 3, &mut rng);
        let x = Matrix::from_fn(5, 4, |i, j| (i as f64) - (j as f64));
        let (loss, _) = model
            .loss_and_grads(&x, &Targets::Labels(vec![0, 1, 2, 1, 0]), 0.0)
            .unwrap();
        assert_abs_diff_eq!(loss, 3f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn l2_gradient_is_two_lambda_w() {
        // zero features and uniform targets zero out the data gradient for W
        let mut w = Matrix::zeros(2, 3);
        w.set(0, 1, 0.7);
        w.set(1, 2, -1.3);
        let model = Model::LogReg(LogReg {
            weights: w.clone(),
            bias: Matrix::zeros(1, 2),
        });
        let x = Matrix::zeros(4, 3);
        let (_, grads) = model
            .loss_and_grads(&x, &Targets::Labels(vec![0, 1, 0, 1]), 0.5)
            .unwrap();
        for (g, wv) in grads[0].data().iter().zip(w.data()) {
            assert_abs_diff_eq!(*g, 2.0 * 0.5 * wv, epsilon = 1e-15);
        }
    }

    #[test]
    fn label_out_of_range_is_rejected() {
        let model = Model::init(&ClassifierConfig::default(), 2, 2, &mut seeded_rng(0, &[]));
        let err = model.loss_and_grads(&Matrix::zeros(1, 2), &Targets::Labels(vec![2]), 0.0);
        assert!(matches!(err, Err(Error::LabelOutOfRange { label: 2, .. })));
        assert!(Dataset::classification(Matrix::zeros(1, 2), vec![3], 3).is_err());
    }

    #[test]
    fn separable_toy_trains_to_high_accuracy() {
        let data = separable(200, 10, 1);
        let dev = separable(100, 10, 2);
        let out = train(&ClassifierConfig::default(), 0.0, &data, &dev, &[0]).unwrap();
        assert!(
            out.report.dev_score >= 0.95,
            "dev acc {}",
            out.report.dev_score
        );
        assert!(out.report.epochs_run <= 200);
    }

    #[test]
    fn tenacity_one_stops_after_first_non_improvement() {
        // all-zero features: the dev error is fixed from the first epoch on
        let train_set = Dataset::classification(
            Matrix::zeros(20, 3),
            vec![0; 10].into_iter().chain(vec![1; 10]).collect(),
            2,
        )
        .unwrap();
        let dev = Dataset::classification(Matrix::zeros(4, 3), vec![0, 1, 0, 1], 2).unwrap();
        let config = ClassifierConfig {
            tenacity: 1,
            ..ClassifierConfig::default()
        };
        let out = train(&config, 0.0, &train_set, &dev, &[]).unwrap();
        assert_eq!(out.report.epochs_run, 2);
        assert_eq!(out.report.stopped_by, StopReason::Tenacity);
    }

    #[test]
    fn training_is_deterministic() {
        let data = separable(60, 4, 5);
        let dev = separable(30, 4, 6);
        let config = ClassifierConfig {
            nhid: 8,
            dropout: 0.2,
            ..ClassifierConfig::default()
        };
        let a = train(&config, 1e-3, &data, &dev, &[3, 1]).unwrap();
        let b = train(&config, 1e-3, &data, &dev, &[3, 1]).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.report, b.report);
    }

    #[test]
    fn best_snapshot_dominates_history() {
        let data = separable(80, 6, 9);
        let dev = separable(40, 6, 10);
        let config = ClassifierConfig {
            nhid: 5,
            ..ClassifierConfig::default()
        };
        let out = train(&config, 1e-4, &data, &dev, &[]).unwrap();
        let min = out
            .report
            .dev_history
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        assert_eq!(out.report.dev_error, min);
        assert_abs_diff_eq!(
            out.model.validation_error(&dev).unwrap(),
            min,
            epsilon = 1e-15
        );
    }

    #[test]
    fn empty_splits_error() {
        let data = separable(10, 2, 1);
        let empty = data.subset(&[]);
        assert!(matches!(
            train(&ClassifierConfig::default(), 0.0, &empty, &data, &[]),
            Err(Error::EmptyInput(_))
        ));
        assert!(matches!(
            train(&ClassifierConfig::default(), 0.0, &data, &empty, &[]),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn grid_search_cases() {
        let data = separable(200, 10, 11);
        let dev = separable(100, 10, 12);
        let single = ClassifierConfig {
            l2_grid: vec![0.01],
            ..ClassifierConfig::default()
        };
        assert_eq!(
            grid_search_l2(&single, &data, &dev, &[])
                .unwrap()
                .best_lambda,
            0.01
        );

        let two = ClassifierConfig {
            l2_grid: vec![1e3, 0.0],
            ..ClassifierConfig::default()
        };
        let gs = grid_search_l2(&two, &data, &dev, &[]).unwrap();
        assert_eq!(gs.best_lambda, 0.0);
        assert!(gs.scores[0].1 > gs.scores[1].1);

        // constant features: every λ scores the same, so the smallest wins
        let flat =
            Dataset::classification(Matrix::zeros(20, 2), (0..20).map(|i| i % 2).collect(), 2)
                .unwrap();
        let tie = grid_search_l2(&ClassifierConfig::default(), &flat, &flat, &[]).unwrap();
        assert_eq!(tie.best_lambda, 1e-5);
    }

    #[test]
    fn config_validation() {
        assert!(ClassifierConfig::default().validate().is_ok());
        assert!(ClassifierConfig {
            l2_grid: vec![],
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(ClassifierConfig {
            dropout: 1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(ClassifierConfig {
            batch_size: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        let p = ClassifierConfig::prototyping();
        assert_eq!(
            (p.optim, p.batch_size, p.tenacity, p.epoch_size),
            (OptimizerKind::Rmsprop, 128, 3, 2)
        );
    }
}
