//! JSON and markdown rendering of run reports.

use std::fmt::Write;

use crate::error::{Error, Result};
use crate::runner::RunReport;
use crate::tasks::{EvalResult, RetrievalScores};

/// Pretty JSON with struct-declaration key order and round-trip float precision.
pub fn render_json(report: &RunReport) -> String {
    let mut out = serde_json::to_string_pretty(report).expect("reports always serialize");
    out.push('\n');
    out
}

pub fn parse_json(text: &str) -> Result<RunReport> {
    serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("not a run report: {e}")))
}

fn pct(x: f64) -> String {
    format!("{:.1}", 100.0 * x)
}

fn pct_opt(x: Option<f64>) -> String {
    x.map(pct).unwrap_or_else(|| "-".into())
}

fn recall_cell(s: &RetrievalScores) -> String {
    format!(
        "{}/{}/{}/{}",
        pct_opt(s.r1),
        pct_opt(s.r5),
        pct_opt(s.r10),
        s.medr
    )
}

/// (metric label, value) for one task's headline numbers.
pub fn headline(result: &EvalResult) -> (&'static str, String) {
    match result {
        EvalResult::Classification(r) => ("acc", pct(r.acc)),
        EvalResult::PairClassification(r) => match r.f1 {
            Some(f1) => ("acc/F1", format!("{}/{}", pct(r.acc), pct(f1))),
            None => ("acc", pct(r.acc)),
        },
        EvalResult::Relatedness(r) => (
            "pearson/spearman",
            format!("{}/{}", pct(r.pearson), pct(r.spearman)),
        ),
        EvalResult::Sts(r) => (
            "pearson/spearman (mean)",
            format!("{}/{}", pct(r.mean.pearson), pct(r.mean.spearman)),
        ),
        EvalResult::CaptionRetrieval(r) => (
            "R@1/R@5/R@10/medr (image; caption)",
            format!(
                "{}; {}",
                recall_cell(&r.mean.image_retrieval),
                recall_cell(&r.mean.caption_retrieval)
            ),
        ),
    }
}

/// One table row per task; correlations and rates are ×100 with one decimal.
pub fn render_markdown(report: &RunReport) -> String {
    let mut out = String::new();
    let c = &report.config;
    let _ = writeln!(out, "# embeval results\n");
    let _ = writeln!(
        out,
        "profile `{}`, seed {}, harness {}\n",
        c.profile, c.seed, report.harness_version
    );
    out.push_str("| Task | Metric | Result |\n");
    out.push_str("|---|---|---|\n");
    for t in &report.tasks {
        let (metric, value) = match (&t.result, &t.error) {
            (Some(r), _) => headline(r),
            (None, Some(e)) => ("error", e.replace('|', "\\|").replace('\n', " ")),
            (None, None) => ("error", "no result".into()),
        };
        let _ = writeln!(out, "| {} | {} | {} |", t.task, metric, value);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::EncoderSpec;
    use crate::protocols::SplitKind;
    use crate::runner::{ConfigEcho, Profile, TaskReport, SCHEMA_VERSION};
    use crate::tasks::{EvalSettings, PairResult};

    fn report(tasks: Vec<TaskReport>) -> RunReport {
        RunReport {
            schema_version: SCHEMA_VERSION,
            harness_version: "0.1.0".into(),
            config: ConfigEcho {
                tasks: tasks.iter().map(|t| t.task.clone()).collect(),
                encoder: EncoderSpec::Bow("v.vec".into()),
                data_dir: "data".into(),
                profile: Profile::Default,
                seed: 1111,
                lowercase: false,
                settings: EvalSettings::default(),
            },
            tasks,
        }
    }

    #[test]
    fn empty_report_is_a_valid_table() {
        let md = render_markdown(&report(vec![]));
        assert!(md.ends_with("| Task | Metric | Result |\n|---|---|---|\n"));
    }

    #[test]
    fn paraphrase_cell_format() {
        let t = TaskReport {
            task: "MRPC".into(),
            result: Some(EvalResult::PairClassification(PairResult {
                protocol: SplitKind::CvTrainFixedTest,
                dev_acc: Some(0.7),
                acc: 0.727,
                f1: Some(0.81),
                l2: 1e-5,
                n_test: 1725,
            })),
            error: None,
            wall_secs: None,
        };
        let md = render_markdown(&report(vec![t]));
        assert!(md.contains("| MRPC | acc/F1 | 72.7/81.0 |"), "{md}");
    }

    #[test]
    fn json_round_trips_byte_identical() {
        let t = TaskReport {
            task: "MR".into(),
            result: None,
            error: Some("boom | bad".into()),
            wall_secs: None,
        };
        let json = render_json(&report(vec![t]));
        assert_eq!(render_json(&parse_json(&json).unwrap()), json);
        assert!(render_markdown(&parse_json(&json).unwrap()).contains("boom \\| bad"));
    }
}
