use serde::{Deserialize, Serialize};

use super::{classes, encode_first, encode_pairs, EvalSettings};
use crate::classifiers::{pair_feature_matrix, Dataset};
use crate::encoders::Encoder;
use crate::error::{Error, Result};
use crate::ingest::TaskData;
use crate::metrics::f1_binary;
use crate::numerics::Matrix;
use crate::protocols::{
    eval_cv_train_fixed_test, eval_fixed_split, eval_nested_cv, HeldOutResult, SplitKind,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationResult {
    pub protocol: SplitKind,
    /// Validation accuracy of the selected model; `None` for nested CV.
    pub dev_acc: Option<f64>,
    /// Test accuracy (mean over outer folds for nested CV).
    pub acc: f64,
    /// Per-outer-fold accuracies (nested CV only).
    pub fold_accs: Option<Vec<f64>>,
    /// Chosen L2 penalty, one per outer fold for nested CV.
    pub l2: Vec<f64>,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    pub protocol: SplitKind,
    pub dev_acc: Option<f64>,
    pub acc: f64,
    /// Binary F1 of the positive class, for paraphrase detection.
    pub f1: Option<f64>,
    pub l2: f64,
    pub n_test: usize,
}

/// Protocol dispatch on already-embedded data. `splits` holds
/// (features, labels) for train and, depending on `protocol`, dev and test.
pub fn evaluate_classification(
    protocol: SplitKind,
    n_classes: usize,
    train: (Matrix, Vec<usize>),
    dev: Option<(Matrix, Vec<usize>)>,
    test: Option<(Matrix, Vec<usize>)>,
    settings: &EvalSettings,
) -> Result<ClassificationResult> {
    let config = &settings.classifier;
    let train = Dataset::classification(train.0, train.1, n_classes)?;
    let missing = |split: &str| {
        Error::InvalidArgument(format!("{protocol:?} protocol needs a {split} split"))
    };
    match protocol {
        SplitKind::NestedKfold => {
            let n_samples = train.len();
            let res = eval_nested_cv(config, &train, settings.kfold)?;
            Ok(ClassificationResult {
                protocol,
                dev_acc: None,
                acc: res.mean_accuracy,
                fold_accs: Some(res.fold_accuracies),
                l2: res.fold_lambdas,
                n_samples,
            })
        }
        SplitKind::CvTrainFixedTest => {
            let (x, y) = test.ok_or_else(|| missing("test"))?;
            let test = Dataset::classification(x, y, n_classes)?;
            let res = eval_cv_train_fixed_test(config, &train, &test, settings.kfold)?;
            Ok(held_out(protocol, res, test.len()))
        }
        SplitKind::FixedSplit => {
            let (dx, dy) = dev.ok_or_else(|| missing("dev"))?;
            let (tx, ty) = test.ok_or_else(|| missing("test"))?;
            let dev = Dataset::classification(dx, dy, n_classes)?;
            let test = Dataset::classification(tx, ty, n_classes)?;
            let res = eval_fixed_split(config, &train, &dev, &test)?;
            Ok(held_out(protocol, res, test.len()))
        }
    }
}

fn held_out(protocol: SplitKind, res: HeldOutResult, n_test: usize) -> ClassificationResult {
    ClassificationResult {
        protocol,
        dev_acc: res.dev_accuracy,
        acc: res.test_accuracy,
        fold_accs: None,
        l2: vec![res.best_lambda],
        n_samples: n_test,
    }
}

fn task_protocol(data: &TaskData) -> Result<(SplitKind, usize)> {
    let protocol = data.spec.protocol.ok_or_else(|| {
        Error::InvalidArgument(format!("{} has no classifier protocol", data.spec.name))
    })?;
    let n_classes = data.spec.n_classes().ok_or_else(|| {
        Error::InvalidArgument(format!("{} is not a classification task", data.spec.name))
    })?;
    Ok((protocol, n_classes))
}

/// Single-sentence classification (MR, CR, SUBJ, MPQA, TREC, SST).
pub fn run_classification(
    data: &TaskData,
    encoder: &mut dyn Encoder,
    settings: &EvalSettings,
) -> Result<ClassificationResult> {
    let (protocol, n_classes) = task_protocol(data)?;
    let mut embed = |split: &str| -> Result<Option<(Matrix, Vec<usize>)>> {
        match data.splits.get(split) {
            Some(records) => Ok(Some((
                encode_first(encoder, records, settings)?,
                classes(records)?,
            ))),
            None => Ok(None),
        }
    };
    let train =
        embed("train")?.ok_or_else(|| Error::InvalidArgument("missing train split".into()))?;
    let dev = embed("dev")?;
    let test = embed("test")?;
    evaluate_classification(protocol, n_classes, train, dev, test, settings)
}

/// Sentence-pair classification on `(u, v, |u−v|, u⊙v)` features. Reports
/// F1 of class 1 for paraphrase detection.
pub fn evaluate_pair_classification(
    protocol: SplitKind,
    n_classes: usize,
    with_f1: bool,
    train: (Matrix, Matrix, Vec<usize>),
    dev: Option<(Matrix, Matrix, Vec<usize>)>,
    test: (Matrix, Matrix, Vec<usize>),
    settings: &EvalSettings,
) -> Result<PairResult> {
    let features = |(u, v, y): (Matrix, Matrix, Vec<usize>)| -> Result<(Matrix, Vec<usize>)> {
        Ok((pair_feature_matrix(&u, &v)?, y))
    };
    let train = features(train)?;
    let dev = dev.map(features).transpose()?;
    let (test_x, test_y) = features(test)?;
    let config = &settings.classifier;
    let train = Dataset::classification(train.0, train.1, n_classes)?;
    let test = Dataset::classification(test_x, test_y.clone(), n_classes)?;
    let res = match protocol {
        SplitKind::FixedSplit => {
            let (dx, dy) =
                dev.ok_or_else(|| Error::InvalidArgument("fixed split needs a dev split".into()))?;
            eval_fixed_split(
                config,
                &train,
                &Dataset::classification(dx, dy, n_classes)?,
                &test,
            )?
        }
        SplitKind::CvTrainFixedTest => {
            eval_cv_train_fixed_test(config, &train, &test, settings.kfold)?
        }
        SplitKind::NestedKfold => {
            return Err(Error::InvalidArgument(
                "pair tasks do not use nested CV".into(),
            ));
        }
    };
    let f1 = if with_f1 {
        Some(f1_binary(&res.test_predictions, &test_y, 1)?)
    } else {
        None
    };
    Ok(PairResult {
        protocol,
        dev_acc: res.dev_accuracy,
        acc: res.test_accuracy,
        f1,
        l2: res.best_lambda,
        n_test: test_y.len(),
    })
}

/// Entailment (SNLI, SICK-E) and paraphrase detection (MRPC).
pub fn run_pair_classification(
    data: &TaskData,
    encoder: &mut dyn Encoder,
    settings: &EvalSettings,
) -> Result<PairResult> {
    let (protocol, n_classes) = task_protocol(data)?;
    let with_f1 = data.spec.kind == super::TaskKind::Paraphrase;
    let mut embed = |split: &str| -> Result<Option<(Matrix, Matrix, Vec<usize>)>> {
        match data.splits.get(split) {
            Some(records) => {
                let (u, v) = encode_pairs(encoder, records, settings)?;
                Ok(Some((u, v, classes(records)?)))
            }
            None => Ok(None),
        }
    };
    let train =
        embed("train")?.ok_or_else(|| Error::InvalidArgument("missing train split".into()))?;
    let dev = embed("dev")?;
    let test = embed("test")?.ok_or_else(|| Error::InvalidArgument("missing test split".into()))?;
    evaluate_pair_classification(protocol, n_classes, with_f1, train, dev, test, settings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::ClassifierConfig;
    use crate::numerics::seeded_rng;
    use rand::Rng;

    fn quick() -> EvalSettings {
        EvalSettings {
            classifier: ClassifierConfig {
                l2_grid: vec![1e-4, 1e-2],
                batch_size: 16,
                ..ClassifierConfig::default()
            },
            kfold: 3,
            ..EvalSettings::default()
        }
    }

    #[test]
    fn sign_of_first_coordinate_is_learned() {
        let mut rng = seeded_rng(21, &[]);
        let mut make = |n: usize| {
            // first coordinate kept slightly away from 0 so the classes are separable
            let x = Matrix::from_fn(n, 5, |_, j| {
                let v: f64 = rng.gen_range(-1.0..1.0);
                if j == 0 {
                    v.signum() * (0.05 + 0.95 * v.abs())
                } else {
                    v
                }
            });
            let y = (0..n).map(|i| usize::from(x.get(i, 0) > 0.0)).collect();
            (x, y)
        };
        let (train, dev, test) = (make(300), make(100), make(100));
        let res = evaluate_classification(
            SplitKind::FixedSplit,
            2,
            train,
            Some(dev),
            Some(test),
            &quick(),
        )
        .unwrap();
        assert!(res.acc >= 0.95, "acc {}", res.acc);
    }

    #[test]
    fn identical_pairs_with_constant_labels() {
        let mut rng = seeded_rng(5, &[]);
        let mut make = |n: usize| {
            let u = Matrix::from_fn(n, 4, |_, _| rng.gen_range(-1.0..1.0));
            (u.clone(), u, vec![1; n])
        };
        let res = evaluate_pair_classification(
            SplitKind::FixedSplit,
            2,
            true,
            make(100),
            Some(make(20)),
            make(20),
            &quick(),
        )
        .unwrap();
        assert_eq!(res.acc, 1.0);
        assert_eq!(res.f1, Some(1.0));
    }

    #[test]
    fn missing_split_is_reported() {
        let x = Matrix::zeros(20, 2);
        let err = evaluate_classification(
            SplitKind::FixedSplit,
            2,
            (x, vec![0; 20]),
            None,
            None,
            &quick(),
        );
        assert!(err.unwrap_err().to_string().contains("dev"));
    }
}
