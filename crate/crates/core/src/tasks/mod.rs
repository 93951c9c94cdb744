//! Task runners: each binds an encoder, a protocol, a head and the task's
//! metrics into one evaluation.

mod catalog;
mod classification;
mod relatedness;
mod retrieval;
mod sts;

use serde::{Deserialize, Serialize};

use crate::classifiers::ClassifierConfig;
use crate::encoders::{encode_dataset, Encoder, Tokens};
use crate::error::{Error, Result};
use crate::ingest::{Record, TaskData};
use crate::metrics::StsAggregate;
use crate::numerics::Matrix;

pub use catalog::{lookup, task_names, TargetSpec, TaskKind, TaskSpec, CATALOG};
pub use classification::{
    evaluate_classification, evaluate_pair_classification, run_classification,
    run_pair_classification, ClassificationResult, PairResult,
};
pub use relatedness::{
    evaluate_relatedness, run_relatedness, score_support, target_distribution, RelatednessInput,
    RelatednessResult,
};
pub use retrieval::{
    evaluate_retrieval, hinge, partition_images, ranking_loss, run_caption_retrieval,
    train_retrieval, RetrievalConfig, RetrievalData, RetrievalModel, RetrievalResult,
    RetrievalScores, RetrievalSplitScores, TrainedRetrieval,
};
pub use sts::{evaluate_sts_subtask, run_sts_unsupervised};

/// Settings shared by every task runner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    pub classifier: ClassifierConfig,
    /// Folds for the cross-validation protocols.
    pub kfold: usize,
    /// Sentences per encoder call.
    pub encoder_batch_size: usize,
    pub retrieval: RetrievalConfig,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            classifier: ClassifierConfig::default(),
            kfold: 10,
            encoder_batch_size: 128,
            retrieval: RetrievalConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EvalResult {
    Classification(ClassificationResult),
    PairClassification(PairResult),
    Relatedness(RelatednessResult),
    Sts(StsAggregate),
    CaptionRetrieval(RetrievalResult),
}

/// Runs the evaluation matching `data.spec.kind`.
pub fn run_task(
    data: &TaskData,
    encoder: &mut dyn Encoder,
    settings: &EvalSettings,
) -> Result<EvalResult> {
    Ok(match data.spec.kind {
        TaskKind::Classification => {
            EvalResult::Classification(run_classification(data, encoder, settings)?)
        }
        TaskKind::PairClassification | TaskKind::Paraphrase => {
            EvalResult::PairClassification(run_pair_classification(data, encoder, settings)?)
        }
        TaskKind::Relatedness => EvalResult::Relatedness(run_relatedness(data, encoder, settings)?),
        TaskKind::StsUnsupervised => {
            EvalResult::Sts(run_sts_unsupervised(data, encoder, settings)?)
        }
        TaskKind::CaptionRetrieval => {
            EvalResult::CaptionRetrieval(run_caption_retrieval(data, encoder, settings)?)
        }
    })
}

fn encode(
    encoder: &mut dyn Encoder,
    sentences: &[Tokens],
    settings: &EvalSettings,
) -> Result<Matrix> {
    encode_dataset(encoder, sentences, settings.encoder_batch_size)
}

fn encode_first(
    encoder: &mut dyn Encoder,
    records: &[Record],
    settings: &EvalSettings,
) -> Result<Matrix> {
    let sentences: Vec<Tokens> = records.iter().map(|r| r.first.clone()).collect();
    encode(encoder, &sentences, settings)
}

/// Encodes both sides of pair records in one pass.
fn encode_pairs(
    encoder: &mut dyn Encoder,
    records: &[Record],
    settings: &EvalSettings,
) -> Result<(Matrix, Matrix)> {
    let mut sentences: Vec<Tokens> = Vec::with_capacity(2 * records.len());
    for r in records {
        let second = r.second.as_ref().ok_or_else(|| {
            Error::InvalidArgument("pair task record without a second sentence".into())
        })?;
        sentences.push(r.first.clone());
        sentences.push(second.clone());
    }
    let all = encode(encoder, &sentences, settings)?;
    let left: Vec<usize> = (0..records.len()).map(|i| 2 * i).collect();
    let right: Vec<usize> = (0..records.len()).map(|i| 2 * i + 1).collect();
    Ok((all.select_rows(&left), all.select_rows(&right)))
}

fn classes(records: &[Record]) -> Result<Vec<usize>> {
    records
        .iter()
        .map(|r| {
            r.class()
                .ok_or_else(|| Error::InvalidArgument("record without class label".into()))
        })
        .collect()
}

fn scores(records: &[Record]) -> Result<Vec<f64>> {
    records
        .iter()
        .map(|r| {
            r.score()
                .ok_or_else(|| Error::InvalidArgument("record without score".into()))
        })
        .collect()
}
