//! Relatedness as distribution regression: the head predicts a distribution
//! over the integer scores of the range, and the predicted score is its
//! expectation.

use serde::{Deserialize, Serialize};

use super::{encode_pairs, scores, EvalSettings};
use crate::classifiers::{grid_search_l2, pair_feature_matrix, Dataset, Model};
use crate::encoders::Encoder;
use crate::error::{Error, Result};
use crate::ingest::TaskData;
use crate::metrics::{correlations, mean_squared_error, pearson};
use crate::numerics::Matrix;

const TAG_RELATEDNESS: u64 = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelatednessResult {
    pub pearson: f64,
    pub spearman: f64,
    pub mse: f64,
    /// Pearson of the selected model on the dev split.
    pub dev_pearson: f64,
    pub l2: f64,
    pub n_test: usize,
}

/// Embedded sentence pairs with gold scores.
#[derive(Debug, Clone)]
pub struct RelatednessInput {
    pub left: Matrix,
    pub right: Matrix,
    pub scores: Vec<f64>,
}

fn check_range(min: f64, max: f64) -> Result<usize> {
    if !(min.fract() == 0.0 && max.fract() == 0.0 && min < max) {
        return Err(Error::InvalidArgument(format!(
            "score range [{min}, {max}] must have integer bounds, min < max"
        )));
    }
    Ok((max - min) as usize + 1)
}

/// The integer grid `min, min+1, …, max`.
pub fn score_support(min: f64, max: f64) -> Result<Vec<f64>> {
    let n = check_range(min, max)?;
    Ok((0..n).map(|j| min + j as f64).collect())
}

/// Spreads `y` over the two bins around it so that the expectation is `y`.
pub fn target_distribution(y: f64, min: f64, max: f64) -> Result<Vec<f64>> {
    let n = check_range(min, max)?;
    if !(min..=max).contains(&y) {
        return Err(Error::InvalidArgument(format!(
            "score {y} outside [{min}, {max}]"
        )));
    }
    let mut p = vec![0.0; n];
    let floor = y.floor();
    let bin = (floor - min) as usize;
    if bin + 1 == n {
        p[bin] = 1.0;
    } else {
        p[bin] = floor - y + 1.0;
        p[bin + 1] = y - floor;
    }
    Ok(p)
}

fn distributions(scores: &[f64], min: f64, max: f64) -> Result<Matrix> {
    let rows = scores
        .iter()
        .map(|&y| target_distribution(y, min, max))
        .collect::<Result<Vec<_>>>()?;
    Matrix::from_rows(&rows)
}

fn expected_scores(model: &Model, features: &Matrix, support: &[f64]) -> Result<Vec<f64>> {
    let p = model.predict_proba(features)?;
    Ok(p.iter_rows()
        .map(|row| row.iter().zip(support).map(|(pi, r)| pi * r).sum())
        .collect())
}

/// Trains the distribution head on train/dev and scores the test split.
pub fn evaluate_relatedness(
    range: (f64, f64),
    train: RelatednessInput,
    dev: RelatednessInput,
    test: RelatednessInput,
    settings: &EvalSettings,
) -> Result<RelatednessResult> {
    let (min, max) = range;
    let support = score_support(min, max)?;
    let build = |input: &RelatednessInput| -> Result<Dataset> {
        let features = pair_feature_matrix(&input.left, &input.right)?;
        Dataset::distributions(features, distributions(&input.scores, min, max)?)
    };
    let train_set = build(&train)?;
    let dev_set = build(&dev)?;
    let test_features = pair_feature_matrix(&test.left, &test.right)?;

    let gs = grid_search_l2(
        &settings.classifier,
        &train_set,
        &dev_set,
        &[TAG_RELATEDNESS],
    )?;
    let model = &gs.best.model;
    let dev_pred = expected_scores(model, &dev_set.features, &support)?;
    let test_pred = expected_scores(model, &test_features, &support)?;
    let corr = correlations(&test_pred, &test.scores)?;
    Ok(RelatednessResult {
        pearson: corr.pearson,
        spearman: corr.spearman,
        mse: mean_squared_error(&test_pred, &test.scores)?,
        dev_pearson: pearson(&dev_pred, &dev.scores)?,
        l2: gs.best_lambda,
        n_test: test.scores.len(),
    })
}

/// SICK-R and STS-B.
pub fn run_relatedness(
    data: &TaskData,
    encoder: &mut dyn Encoder,
    settings: &EvalSettings,
) -> Result<RelatednessResult> {
    let range = data
        .spec
        .score_range()
        .ok_or_else(|| Error::InvalidArgument(format!("{} has no score range", data.spec.name)))?;
    let mut embed = |split: &str| -> Result<RelatednessInput> {
        let records = data.split(split)?;
        let (left, right) = encode_pairs(encoder, records, settings)?;
        Ok(RelatednessInput {
            left,
            right,
            scores: scores(records)?,
        })
    };
    let train = embed("train")?;
    let dev = embed("dev")?;
    let test = embed("test")?;
    evaluate_relatedness(range, train, dev, test, settings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::seeded_rng;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn integer_and_fractional_targets() {
        assert_eq!(
            target_distribution(3.0, 1.0, 5.0).unwrap(),
            vec![0.0, 0.0, 1.0, 0.0, 0.0]
        );
        let p = target_distribution(4.6, 1.0, 5.0).unwrap();
        assert_eq!(p[..3], [0.0, 0.0, 0.0]);
        assert_abs_diff_eq!(p[3], 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(p[4], 0.6, epsilon = 1e-12);
        assert_eq!(
            target_distribution(5.0, 0.0, 5.0).unwrap(),
            vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0]
        );
        assert_eq!(target_distribution(0.0, 0.0, 5.0).unwrap()[0], 1.0);
    }

    #[test]
    fn out_of_range_score() {
        assert!(target_distribution(5.5, 1.0, 5.0).is_err());
        assert!(target_distribution(0.9, 1.0, 5.0).is_err());
        assert!(target_distribution(f64::NAN, 1.0, 5.0).is_err());
    }

    #[test]
    fn bin_counts() {
        assert_eq!(score_support(1.0, 5.0).unwrap().len(), 5);
        assert_eq!(
            score_support(0.0, 5.0).unwrap(),
            vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]
        );
        assert!(score_support(0.5, 5.0).is_err());
    }

    proptest! {
        #[test]
        fn expectation_reconstructs_score(y in 0.0f64..=5.0) {
            let p = target_distribution(y, 0.0, 5.0).unwrap();
            let support = score_support(0.0, 5.0).unwrap();
            let e: f64 = p.iter().zip(&support).map(|(a, b)| a * b).sum();
            prop_assert!((e - y).abs() < 1e-12);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|&v| v >= 0.0));
            prop_assert!(p.iter().filter(|&&v| v > 0.0).count() <= 2);
        }
    }

    #[test]
    fn constant_gold_is_an_error() {
        use rand::Rng;
        let mut rng = seeded_rng(2, &[]);
        let mut make = |n: usize| RelatednessInput {
            left: Matrix::from_fn(n, 3, |_, _| rng.gen_range(-1.0..1.0)),
            right: Matrix::from_fn(n, 3, |_, _| rng.gen_range(-1.0..1.0)),
            scores: vec![3.0; n],
        };
        let settings = EvalSettings {
            classifier: crate::classifiers::ClassifierConfig {
                l2_grid: vec![1e-3],
                ..Default::default()
            },
            ..Default::default()
        };
        let err =
            evaluate_relatedness((1.0, 5.0), make(20), make(10), make(10), &settings).unwrap_err();
        assert!(matches!(err, Error::ConstantInput(_)), "{err}");
    }
}
