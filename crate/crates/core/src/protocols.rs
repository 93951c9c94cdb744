//! Evaluation protocols: nested k-fold cross-validation, k-fold model
//! selection on a training set followed by a held-out test, and plain
//! train/dev/test evaluation.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{grid_search_l2, train, ClassifierConfig, Dataset, Trained};
use crate::error::{Error, Result};
use crate::metrics::accuracy;
use crate::numerics::{derive_seed, seeded_rng};

// stream tags, so the random streams of different protocol stages never collide
const TAG_OUTER: u64 = 1;
const TAG_INNER: u64 = 2;
const TAG_FINAL: u64 = 3;
const TAG_HOLDOUT: u64 = 4;
const TAG_CV: u64 = 5;
const TAG_FIXED: u64 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitKind {
    NestedKfold,
    CvTrainFixedTest,
    FixedSplit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub kind: SplitKind,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    k: usize,
    fold_of: Vec<usize>,
}

impl FoldAssignment {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn fold_of(&self) -> &[usize] {
        &self.fold_of
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] != fold)
            .collect()
    }
}

/// Deterministic stratified partition of `0..labels.len()` into `k` folds.
///
/// Each class is shuffled and dealt round-robin, continuing the deal from
/// where the previous class stopped, so per-class and total fold sizes both
/// differ by at most one.
pub fn make_folds(labels: &[usize], k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "k-fold needs k >= 2, got {k}"
        )));
    }
    if labels.len() < k {
        return Err(Error::InvalidArgument(format!(
            "{} samples cannot be split into {k} folds",
            labels.len()
        )));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut rng = seeded_rng(seed, &[labels.len() as u64, k as u64]);
    let mut fold_of = vec![0; labels.len()];
    let mut next = 0;
    for members in by_class.values_mut() {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            fold_of[i] = next % k;
            next += 1;
        }
    }
    Ok(FoldAssignment { k, fold_of })
}

/// Stratified ~90/10 split of `labels`: returns (train, dev) index lists.
pub fn holdout_split(labels: &[usize], seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let folds = make_folds(labels, 10, seed)?;
    Ok((folds.train_indices(9), folds.test_indices(9)))
}

fn stream(config: &ClassifierConfig, parts: &[u64]) -> u64 {
    derive_seed(config.seed, parts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaSelection {
    pub lambda: f64,
    pub score: f64,
    /// `(λ, mean dev accuracy)` for every grid value, in ascending λ.
    pub per_lambda: Vec<(f64, f64)>,
}

/// Mean dev accuracy per λ over a stratified k-fold of `data`; the best λ
/// (ties to the smallest) and its mean score.
pub fn select_lambda_by_cv(
    config: &ClassifierConfig,
    data: &Dataset,
    k: usize,
    stream_prefix: &[u64],
) -> Result<LambdaSelection> {
    config.validate()?;
    let labels = data
        .labels()
        .ok_or_else(|| Error::InvalidArgument("cross-validation needs class labels".into()))?;
    let folds = make_folds(labels, k, derive_seed(config.seed, stream_prefix))?;
    let grid = config.sorted_grid();
    let cells: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|g| (0..k).map(move |f| (g, f)))
        .collect();
    let scores: Vec<f64> = cells
        .par_iter()
        .map(|&(g, f)| {
            let tr = data.subset(&folds.train_indices(f));
            let dev = data.subset(&folds.test_indices(f));
            let mut s = stream_prefix.to_vec();
            s.extend([f as u64, g as u64]);
            train(config, grid[g], &tr, &dev, &s).map(|t| t.report.dev_score)
        })
        .collect::<Result<_>>()?;

    let per_lambda: Vec<(f64, f64)> = grid
        .iter()
        .enumerate()
        .map(|(g, &l)| (l, scores[g * k..(g + 1) * k].iter().sum::<f64>() / k as f64))
        .collect();
    let mut best = 0;
    for (i, &(_, s)) in per_lambda.iter().enumerate() {
        if s > per_lambda[best].1 {
            best = i;
        }
    }
    Ok(LambdaSelection {
        lambda: per_lambda[best].0,
        score: per_lambda[best].1,
        per_lambda,
    })
}

/// Trains on `data` with an internal stratified 90/10 split used only for early stopping.
pub fn train_with_holdout(
    config: &ClassifierConfig,
    lambda: f64,
    data: &Dataset,
    stream_prefix: &[u64],
) -> Result<Trained> {
    let labels = data
        .labels()
        .ok_or_else(|| Error::InvalidArgument("holdout split needs class labels".into()))?;
    let mut s = stream_prefix.to_vec();
    s.push(TAG_HOLDOUT);
    let (tr, dev) = holdout_split(labels, derive_seed(config.seed, &s))?;
    train(
        config,
        lambda,
        &data.subset(&tr),
        &data.subset(&dev),
        stream_prefix,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestedCvResult {
    pub mean_accuracy: f64,
    pub fold_accuracies: Vec<f64>,
    pub fold_lambdas: Vec<f64>,
}

/// Nested stratified k-fold CV. For every outer fold, λ is selected by an
/// inner k-fold over the outer-training portion only, a model is trained on
/// that portion with the chosen λ, and the outer fold is scored.
pub fn eval_nested_cv(
    config: &ClassifierConfig,
    data: &Dataset,
    k: usize,
) -> Result<NestedCvResult> {
    let labels = data
        .labels()
        .ok_or_else(|| Error::InvalidArgument("nested CV needs class labels".into()))?;
    let folds = make_folds(labels, k, stream(config, &[TAG_OUTER]))?;
    eval_nested_cv_with_folds(config, data, &folds)
}

/// [`eval_nested_cv`] with a caller-provided outer partition.
pub fn eval_nested_cv_with_folds(
    config: &ClassifierConfig,
    data: &Dataset,
    folds: &FoldAssignment,
) -> Result<NestedCvResult> {
    config.validate()?;
    if folds.fold_of().len() != data.len() {
        return Err(Error::shape(
            "eval_nested_cv",
            data.len(),
            folds.fold_of().len(),
        ));
    }
    let k = folds.k();
    let per_fold: Vec<(f64, f64)> = (0..k)
        .into_par_iter()
        .map(|f| {
            let outer_train = data.subset(&folds.train_indices(f));
            let outer_test = data.subset(&folds.test_indices(f));
            if outer_test.is_empty() {
                return Err(Error::EmptyInput("outer test fold"));
            }
            let LambdaSelection {
                lambda,
                score: inner_score,
                ..
            } = select_lambda_by_cv(config, &outer_train, k, &[TAG_INNER, f as u64])?;
            let model =
                train_with_holdout(config, lambda, &outer_train, &[TAG_FINAL, f as u64])?.model;
            let pred = model.predict(&outer_test.features)?;
            let acc = accuracy(&pred, outer_test.labels().expect("labels checked"))?;
            log::debug!(
                "outer fold {f}: l2 = {lambda}, inner acc {inner_score:.4}, test acc {acc:.4}"
            );
            Ok((acc, lambda))
        })
        .collect::<Result<_>>()?;

    let fold_accuracies: Vec<f64> = per_fold.iter().map(|p| p.0).collect();
    let fold_lambdas = per_fold.iter().map(|p| p.1).collect();
    Ok(NestedCvResult {
        mean_accuracy: fold_accuracies.iter().sum::<f64>() / k as f64,
        fold_accuracies,
        fold_lambdas,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeldOutResult {
    /// Model-selection accuracy on the validation data (mean CV accuracy or dev accuracy).
    /// `None` when the grid has a single value and no selection ran.
    pub dev_accuracy: Option<f64>,
    pub test_accuracy: f64,
    pub best_lambda: f64,
    pub test_predictions: Vec<usize>,
}

/// k-fold CV on `train_set` picks λ; the final model is trained on all of
/// `train_set` (early-stopped on an internal 10% holdout) and scored once on `test`.
pub fn eval_cv_train_fixed_test(
    config: &ClassifierConfig,
    train_set: &Dataset,
    test: &Dataset,
    k: usize,
) -> Result<HeldOutResult> {
    config.validate()?;
    if test.is_empty() {
        return Err(Error::EmptyInput("test split"));
    }
    let grid = config.sorted_grid();
    let (lambda, dev_accuracy) = if grid.len() == 1 {
        (grid[0], None)
    } else {
        let sel = select_lambda_by_cv(config, train_set, k, &[TAG_CV])?;
        (sel.lambda, Some(sel.score))
    };
    let model = train_with_holdout(config, lambda, train_set, &[TAG_FINAL])?.model;
    let test_predictions = model.predict(&test.features)?;
    let test_accuracy = accuracy(
        &test_predictions,
        test.labels().ok_or(Error::EmptyInput("test labels"))?,
    )?;
    Ok(HeldOutResult {
        dev_accuracy,
        test_accuracy,
        best_lambda: lambda,
        test_predictions,
    })
}

/// Grid search on (train, dev); the best model is scored on `test`.
pub fn eval_fixed_split(
    config: &ClassifierConfig,
    train_set: &Dataset,
    dev: &Dataset,
    test: &Dataset,
) -> Result<HeldOutResult> {
    if test.is_empty() {
        return Err(Error::EmptyInput("test split"));
    }
    let gs = grid_search_l2(config, train_set, dev, &[TAG_FIXED])?;
    let test_predictions = gs.best.model.predict(&test.features)?;
    let test_accuracy = accuracy(
        &test_predictions,
        test.labels().ok_or(Error::EmptyInput("test labels"))?,
    )?;
    Ok(HeldOutResult {
        dev_accuracy: Some(gs.best_dev_score),
        test_accuracy,
        best_lambda: gs.best_lambda,
        test_predictions,
    })
}
