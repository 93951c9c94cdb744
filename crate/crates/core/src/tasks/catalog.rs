use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocols::SplitKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Classification,
    PairClassification,
    Relatedness,
    StsUnsupervised,
    Paraphrase,
    CaptionRetrieval,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetSpec {
    /// Class ids `0..n`; `names[i]` is an accepted alias for id `i`.
    Classes {
        n: usize,
        names: &'static [&'static str],
    },
    /// Real-valued gold scores in `[min, max]`.
    Scores { min: f64, max: f64 },
    /// Caption rows carry an image id.
    ImageIds { feature_dim: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskSpec {
    pub name: &'static str,
    pub kind: TaskKind,
    pub target: TargetSpec,
    /// `None` for tasks without a trained head (STS) or with their own loop (retrieval).
    pub protocol: Option<SplitKind>,
}

impl TaskSpec {
    pub fn n_classes(&self) -> Option<usize> {
        match self.target {
            TargetSpec::Classes { n, .. } => Some(n),
            _ => None,
        }
    }

    pub fn score_range(&self) -> Option<(f64, f64)> {
        match self.target {
            TargetSpec::Scores { min, max } => Some((min, max)),
            _ => None,
        }
    }

    pub fn is_pair_task(&self) -> bool {
        matches!(
            self.kind,
            TaskKind::PairClassification
                | TaskKind::Paraphrase
                | TaskKind::Relatedness
                | TaskKind::StsUnsupervised
        )
    }

    /// Split files that must be present under the task directory.
    pub fn required_splits(&self) -> &'static [&'static str] {
        match (self.kind, self.protocol) {
            (TaskKind::StsUnsupervised, _) => &[],
            (TaskKind::CaptionRetrieval, _) => &["train", "dev", "test"],
            (_, Some(SplitKind::NestedKfold)) => &["train"],
            (_, Some(SplitKind::CvTrainFixedTest)) => &["train", "test"],
            _ => &["train", "dev", "test"],
        }
    }
}

const POLARITY: &[&str] = &["neg", "pos"];
const NLI: &[&str] = &["contradiction", "neutral", "entailment"];
const TREC: &[&str] = &["ABBR", "DESC", "ENTY", "HUM", "LOC", "NUM"];

const fn classification(
    name: &'static str,
    n: usize,
    names: &'static [&'static str],
    protocol: SplitKind,
) -> TaskSpec {
    TaskSpec {
        name,
        kind: TaskKind::Classification,
        target: TargetSpec::Classes { n, names },
        protocol: Some(protocol),
    }
}

const fn sts(name: &'static str) -> TaskSpec {
    TaskSpec {
        name,
        kind: TaskKind::StsUnsupervised,
        target: TargetSpec::Scores { min: 0.0, max: 5.0 },
        protocol: None,
    }
}

pub const CATALOG: &[TaskSpec] = &[
    classification("MR", 2, POLARITY, SplitKind::NestedKfold),
    classification("CR", 2, POLARITY, SplitKind::NestedKfold),
    classification("SUBJ", 2, &["obj", "subj"], SplitKind::NestedKfold),
    classification("MPQA", 2, POLARITY, SplitKind::NestedKfold),
    classification("TREC", 6, TREC, SplitKind::CvTrainFixedTest),
    classification("SST-2", 2, POLARITY, SplitKind::FixedSplit),
    classification("SST-5", 5, &[], SplitKind::FixedSplit),
    TaskSpec {
        name: "SNLI",
        kind: TaskKind::PairClassification,
        target: TargetSpec::Classes { n: 3, names: NLI },
        protocol: Some(SplitKind::FixedSplit),
    },
    TaskSpec {
        name: "SICK-E",
        kind: TaskKind::PairClassification,
        target: TargetSpec::Classes { n: 3, names: NLI },
        protocol: Some(SplitKind::FixedSplit),
    },
    TaskSpec {
        name: "MRPC",
        kind: TaskKind::Paraphrase,
        target: TargetSpec::Classes {
            n: 2,
            names: &["no", "yes"],
        },
        protocol: Some(SplitKind::CvTrainFixedTest),
    },
    TaskSpec {
        name: "SICK-R",
        kind: TaskKind::Relatedness,
        target: TargetSpec::Scores { min: 1.0, max: 5.0 },
        protocol: Some(SplitKind::FixedSplit),
    },
    TaskSpec {
        name: "STS-B",
        kind: TaskKind::Relatedness,
        target: TargetSpec::Scores { min: 0.0, max: 5.0 },
        protocol: Some(SplitKind::FixedSplit),
    },
    sts("STS12"),
    sts("STS13"),
    sts("STS14"),
    sts("STS15"),
    sts("STS16"),
    TaskSpec {
        name: "COCO",
        kind: TaskKind::CaptionRetrieval,
        target: TargetSpec::ImageIds { feature_dim: 2048 },
        protocol: None,
    },
];

pub fn task_names() -> Vec<&'static str> {
    CATALOG.iter().map(|t| t.name).collect()
}

/// Case-insensitive lookup by task name.
pub fn lookup(name: &str) -> Result<&'static TaskSpec> {
    CATALOG
        .iter()
        .find(|t| t.name.eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::UnknownTask {
            name: name.to_string(),
            valid: task_names().join(", "),
        })
}
