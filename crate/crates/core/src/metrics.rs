//! Scoring functions: accuracy, binary F1, Pearson/Spearman, ranking metrics
//! and the aggregation used for multi-subtask STS benchmarks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationPair {
    pub pearson: f64,
    pub spearman: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubtaskCorrelation {
    pub name: String,
    pub n: usize,
    pub correlation: CorrelationPair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StsAggregate {
    pub subtasks: Vec<SubtaskCorrelation>,
    pub mean: CorrelationPair,
    pub weighted_mean: CorrelationPair,
}

pub fn accuracy(pred: &[usize], gold: &[usize]) -> Result<f64> {
    check_lengths("accuracy", pred.len(), gold.len())?;
    let hits = pred.iter().zip(gold).filter(|(p, g)| p == g).count();
    Ok(hits as f64 / gold.len() as f64)
}

/// F1 of `positive` against the rest. Zero when precision + recall is zero.
pub fn f1_binary(pred: &[usize], gold: &[usize], positive: usize) -> Result<f64> {
    check_lengths("f1_binary", pred.len(), gold.len())?;
    if let Some(&bad) = pred.iter().chain(gold).find(|&&l| l > 1) {
        return Err(Error::LabelOutOfRange {
            label: bad,
            n_classes: 2,
        });
    }
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&p, &g) in pred.iter().zip(gold) {
        match (p == positive, g == positive) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let precision = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    if precision + recall == 0.0 {
        Ok(0.0)
    } else {
        Ok(2.0 * precision * recall / (precision + recall))
    }
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths("pearson", x.len(), y.len())?;
    if x.len() < 2 {
        return Err(Error::InvalidArgument(
            "correlation needs at least two samples".into(),
        ));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::ConstantInput("first argument"));
    }
    if syy == 0.0 {
        return Err(Error::ConstantInput("second argument"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks in ascending order; tied values share their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1 ..= end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = avg;
        }
        start = end;
    }
    ranks
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths("spearman", x.len(), y.len())?;
    pearson(&average_ranks(x), &average_ranks(y))
}

pub fn correlations(x: &[f64], y: &[f64]) -> Result<CorrelationPair> {
    Ok(CorrelationPair {
        pearson: pearson(x, y)?,
        spearman: spearman(x, y)?,
    })
}

pub fn mean_squared_error(pred: &[f64], gold: &[f64]) -> Result<f64> {
    check_lengths("mean_squared_error", pred.len(), gold.len())?;
    Ok(pred
        .iter()
        .zip(gold)
        .map(|(p, g)| (p - g) * (p - g))
        .sum::<f64>()
        / gold.len() as f64)
}

/// Rank of the best-ranked correct candidate for each query row of
/// `similarity`. Rank = 1 + number of candidates scoring strictly higher.
pub fn retrieval_ranks(similarity: &Matrix, correct: &[Vec<usize>]) -> Result<Vec<usize>> {
    if correct.len() != similarity.rows() {
        return Err(Error::shape(
            "retrieval_ranks",
            format!("{} queries", similarity.rows()),
            format!("{} answer sets", correct.len()),
        ));
    }
    let mut ranks = Vec::with_capacity(correct.len());
    for (q, answers) in correct.iter().enumerate() {
        let row = similarity.row(q);
        let mut best = usize::MAX;
        for &c in answers {
            if c >= row.len() {
                return Err(Error::InvalidArgument(format!(
                    "query {q}: answer {c} out of range for {} candidates",
                    row.len()
                )));
            }
            let target = row[c];
            let rank = 1 + row.iter().filter(|&&s| s > target).count();
            best = best.min(rank);
        }
        if best == usize::MAX {
            return Err(Error::InvalidArgument(format!(
                "query {q} has no correct candidate"
            )));
        }
        ranks.push(best);
    }
    Ok(ranks)
}

/// Fraction of ranks within the top `k`.
pub fn recall_from_ranks(ranks: &[usize], k: usize) -> Result<f64> {
    if ranks.is_empty() {
        return Err(Error::EmptyInput("recall"));
    }
    Ok(ranks.iter().filter(|&&r| r <= k).count() as f64 / ranks.len() as f64)
}

/// Recall@K with one correct candidate per query.
pub fn recall_at_k(similarity: &Matrix, correct: &[usize], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("K must be at least 1".into()));
    }
    if k > similarity.cols() {
        return Err(Error::InvalidArgument(format!(
            "K = {k} exceeds the {} candidates",
            similarity.cols()
        )));
    }
    let sets: Vec<Vec<usize>> = correct.iter().map(|&c| vec![c]).collect();
    recall_from_ranks(&retrieval_ranks(similarity, &sets)?, k)
}

pub fn median_rank(ranks: &[usize]) -> Result<f64> {
    if ranks.is_empty() {
        return Err(Error::EmptyInput("median_rank"));
    }
    let mut sorted = ranks.to_vec();
    sorted.sort_unstable();
    let mid = sorted.len() / 2;
    Ok(if sorted.len() % 2 == 1 {
        sorted[mid] as f64
    } else {
        (sorted[mid - 1] + sorted[mid]) as f64 / 2.0
    })
}

pub fn sts_aggregate(subtasks: Vec<SubtaskCorrelation>) -> Result<StsAggregate> {
    if subtasks.is_empty() {
        return Err(Error::EmptyInput("sts_aggregate"));
    }
    let count = subtasks.len() as f64;
    let total: usize = subtasks.iter().map(|s| s.n).sum();
    if total == 0 {
        return Err(Error::EmptyInput("sts_aggregate (all subtasks empty)"));
    }
    let mut mean = CorrelationPair {
        pearson: 0.0,
        spearman: 0.0,
    };
    let mut weighted = mean;
    for s in &subtasks {
        let w = s.n as f64 / total as f64;
        mean.pearson += s.correlation.pearson / count;
        mean.spearman += s.correlation.spearman / count;
        weighted.pearson += w * s.correlation.pearson;
        weighted.spearman += w * s.correlation.spearman;
    }
    Ok(StsAggregate {
        subtasks,
        mean,
        weighted_mean: weighted,
    })
}

fn check_lengths(op: &'static str, a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::shape(op, a, b));
    }
    if a == 0 {
        return Err(Error::EmptyInput(op));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn accuracy_counts() {
        assert_eq!(accuracy(&[1, 0, 1], &[1, 0, 1]).unwrap(), 1.0);
        assert_eq!(accuracy(&[0, 1, 0], &[1, 0, 1]).unwrap(), 0.0);
        assert_abs_diff_eq!(accuracy(&[1, 0, 1], &[1, 1, 1]).unwrap(), 2.0 / 3.0);
        assert!(matches!(accuracy(&[], &[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn f1_cases() {
        assert_eq!(f1_binary(&[1, 0, 1], &[1, 0, 1], 1).unwrap(), 1.0);
        // TP=1, FP=1, FN=1
        assert_abs_diff_eq!(f1_binary(&[1, 1, 0, 0], &[1, 0, 1, 0], 1).unwrap(), 0.5);
        assert_eq!(f1_binary(&[0, 0], &[0, 0], 1).unwrap(), 0.0);
        assert!(f1_binary(&[], &[], 1).is_err());
        assert!(f1_binary(&[2], &[1], 1).is_err());
    }

    #[test]
    fn pearson_cases() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_abs_diff_eq!(pearson(&x, &y2).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(pearson(&x, &neg).unwrap(), -1.0, epsilon = 1e-15);
        let r = pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap();
        assert_abs_diff_eq!(r, 9.0 / (2.0 * 21f64.sqrt()), epsilon = 1e-12);
        assert_abs_diff_eq!(r, 0.98198, epsilon = 1e-5);
        assert!(matches!(
            pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::ConstantInput(_))
        ));
    }

    #[test]
    fn spearman_ties_use_average_ranks() {
        assert_eq!(
            average_ranks(&[1.0, 2.0, 2.0, 3.0]),
            vec![1.0, 2.5, 2.5, 4.0]
        );
        let rho = spearman(&[1.0, 2.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        // ranks (1,2.5,2.5,4) vs (1,2,3,4): sxy = 4.5, sxx = 4.5, syy = 5
        assert_abs_diff_eq!(rho, 4.5 / (4.5f64.sqrt() * 5f64.sqrt()), epsilon = 1e-12);
        let x = [0.3, -1.0, 2.0, 5.0, 4.2];
        let y: Vec<f64> = x.iter().map(|v: &f64| v.exp() + 3.0).collect();
        assert_abs_diff_eq!(spearman(&x, &y).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn recall_cases() {
        assert_eq!(
            recall_at_k(&Matrix::identity(4), &[0, 1, 2, 3], 1).unwrap(),
            1.0
        );
        let sim = Matrix::from_rows(&[[0.9, 0.1, 0.2], [0.5, 0.4, 0.3], [0.0, 0.1, 0.8]]).unwrap();
        // query 1's answer (index 1) is beaten by candidate 0
        assert_abs_diff_eq!(recall_at_k(&sim, &[0, 1, 2], 1).unwrap(), 2.0 / 3.0);
        assert_eq!(recall_at_k(&sim, &[0, 1, 2], 2).unwrap(), 1.0);
        assert!(recall_at_k(&sim, &[0, 1, 2], 4).is_err());
        assert!(recall_at_k(&sim, &[0, 1, 2], 0).is_err());
        assert!(recall_at_k(&sim, &[0, 1, 5], 1).is_err());
    }

    #[test]
    fn multi_answer_rank_takes_best() {
        let sim = Matrix::from_rows(&[[0.1, 0.9, 0.5, 0.7]]).unwrap();
        assert_eq!(retrieval_ranks(&sim, &[vec![0, 2]]).unwrap(), vec![3]);
    }

    #[test]
    fn median_rank_cases() {
        assert_eq!(median_rank(&[7, 1, 3]).unwrap(), 3.0);
        assert_eq!(median_rank(&[1, 2, 3, 10]).unwrap(), 2.5);
        assert_eq!(median_rank(&[1, 1, 1]).unwrap(), 1.0);
        assert!(median_rank(&[]).is_err());
    }

    fn sub(name: &str, n: usize, r: f64) -> SubtaskCorrelation {
        SubtaskCorrelation {
            name: name.into(),
            n,
            correlation: CorrelationPair {
                pearson: r,
                spearman: r,
            },
        }
    }

    #[test]
    fn sts_aggregate_cases() {
        let agg = sts_aggregate(vec![sub("a", 100, 1.0), sub("b", 300, 0.0)]).unwrap();
        assert_eq!(agg.weighted_mean.pearson, 0.25);
        assert_eq!(agg.mean.pearson, 0.5);

        let eq = sts_aggregate(vec![sub("a", 50, 0.2), sub("b", 50, 0.6)]).unwrap();
        assert_abs_diff_eq!(eq.mean.pearson, eq.weighted_mean.pearson, epsilon = 1e-15);

        let one = sts_aggregate(vec![sub("a", 10, 0.7)]).unwrap();
        assert_eq!(one.mean, one.weighted_mean);
        assert_abs_diff_eq!(one.mean.spearman, 0.7);
        assert!(sts_aggregate(vec![]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn correlations_invariant_under_positive_affine(
            pairs in proptest::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..40),
            scale in 0.01f64..50.0,
            shift in -50.0f64..50.0,
        ) {
            let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let x2: Vec<f64> = x.iter().map(|v| scale * v + shift).collect();
            if let (Ok(a), Ok(b)) = (pearson(&x, &y), pearson(&x2, &y)) {
                proptest::prop_assert!((a - b).abs() < 1e-12);
            }
            // strictly increasing transform leaves Spearman unchanged
            let x3: Vec<f64> = x.iter().map(|v| v * v * v + v).collect();
            if let (Ok(a), Ok(b)) = (spearman(&x, &y), spearman(&x3, &y)) {
                proptest::prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn recall_nondecreasing_in_k(vals in proptest::collection::vec(0.0f64..1.0, 36)) {
            let sim = Matrix::from_vec(6, 6, vals).unwrap();
            let correct = [0, 1, 2, 3, 4, 5];
            let mut prev = 0.0;
            for k in 1..=6 {
                let r = recall_at_k(&sim, &correct, k).unwrap();
                proptest::prop_assert!(r >= prev);
                prev = r;
            }
            proptest::prop_assert_eq!(prev, 1.0);
        }
    }
}
