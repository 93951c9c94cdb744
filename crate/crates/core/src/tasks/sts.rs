use super::{encode_pairs, scores, EvalSettings};
use crate::encoders::Encoder;
use crate::error::{Error, Result};
use crate::ingest::{Record, TaskData};
use crate::metrics::{correlations, sts_aggregate, StsAggregate, SubtaskCorrelation};
use crate::numerics::{cosine, Matrix};

/// Correlates pairwise cosines with gold scores. `records` are only used to
/// name the offending sentence when an embedding is zero.
pub fn evaluate_sts_subtask(
    name: &str,
    left: &Matrix,
    right: &Matrix,
    gold: &[f64],
    records: Option<&[Record]>,
) -> Result<SubtaskCorrelation> {
    left.check_same_shape("STS pair embeddings", right)?;
    if left.rows() != gold.len() {
        return Err(Error::shape("STS gold scores", left.rows(), gold.len()));
    }
    let mut sims = Vec::with_capacity(gold.len());
    for i in 0..left.rows() {
        let sim = cosine(left.row(i), right.row(i)).ok_or_else(|| {
            let sentence = match records.and_then(|r| r.get(i)) {
                Some(r) => {
                    let side = if left.row(i).iter().all(|&x| x == 0.0) {
                        &r.first
                    } else {
                        r.second.as_ref().unwrap_or(&r.first)
                    };
                    side.join(" ")
                }
                None => format!("{name} pair {i}"),
            };
            Error::ZeroVector { sentence }
        })?;
        sims.push(sim);
    }
    Ok(SubtaskCorrelation {
        name: name.to_string(),
        n: gold.len(),
        correlation: correlations(&sims, gold)?,
    })
}

/// STS12–STS16: cosine similarity against gold, no training.
pub fn run_sts_unsupervised(
    data: &TaskData,
    encoder: &mut dyn Encoder,
    settings: &EvalSettings,
) -> Result<StsAggregate> {
    if data.subtasks.is_empty() {
        return Err(Error::EmptyInput("STS subtasks"));
    }
    let mut results = Vec::with_capacity(data.subtasks.len());
    for sub in &data.subtasks {
        let (left, right) = encode_pairs(encoder, &sub.records, settings)?;
        let gold = scores(&sub.records)?;
        let res = evaluate_sts_subtask(&sub.name, &left, &right, &gold, Some(&sub.records))?;
        log::info!(
            "{} {}: pearson {:.4} spearman {:.4}",
            data.spec.name,
            sub.name,
            res.correlation.pearson,
            res.correlation.spearman
        );
        results.push(res);
    }
    sts_aggregate(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Target;

    #[test]
    fn monotone_cosines_give_unit_spearman() {
        let gold = [0.5, 1.0, 2.0, 3.5, 5.0];
        // angle shrinks as the gold score grows
        let left = Matrix::from_fn(5, 2, |_, j| if j == 0 { 1.0 } else { 0.0 });
        let right = Matrix::from_fn(5, 2, |i, j| {
            let theta = (5 - i) as f64 * 0.2;
            if j == 0 {
                theta.cos()
            } else {
                theta.sin()
            }
        });
        let res = evaluate_sts_subtask("toy", &left, &right, &gold, None).unwrap();
        assert!((res.correlation.spearman - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_vector_names_the_sentence() {
        let left = Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let right = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let rec = |a: &str, b: &str| Record {
            first: a.split(' ').map(String::from).collect(),
            second: Some(b.split(' ').map(String::from).collect()),
            target: Target::Score(1.0),
        };
        let records = [rec("a b", "c d"), rec("e f", "zzz qqq")];
        let err =
            evaluate_sts_subtask("toy", &left, &right, &[1.0, 2.0], Some(&records)).unwrap_err();
        match err {
            Error::ZeroVector { sentence } => assert_eq!(sentence, "zzz qqq"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn positive_scaling_is_exact() {
        let left = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.5, -1.0], vec![3.0, 0.1]]).unwrap();
        let right = Matrix::from_rows(&[vec![2.0, 2.0], vec![0.3, 1.0], vec![-1.0, 0.4]]).unwrap();
        let gold = [1.0, 3.0, 2.0];
        let a = evaluate_sts_subtask("s", &left, &right, &gold, None).unwrap();
        let mut l2 = left.clone();
        l2.scale(4.0);
        let b = evaluate_sts_subtask("s", &l2, &right, &gold, None).unwrap();
        assert_eq!(a.correlation.spearman, b.correlation.spearman);
        assert!((a.correlation.pearson - b.correlation.pearson).abs() < 1e-12);
    }
}
