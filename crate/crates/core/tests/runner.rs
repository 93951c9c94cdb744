use std::path::{Path, PathBuf};

use embeval::encoders::EncoderSpec;
use embeval::report::{parse_json, render_json, render_markdown};
use embeval::runner::{run, Profile, RunConfig};
use embeval::tasks::EvalResult;
use embeval::Error;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn config(tasks: &[&str]) -> RunConfig {
    let tasks = tasks.iter().map(|s| s.to_string()).collect();
    RunConfig::new(
        tasks,
        EncoderSpec::Bow(fixtures().join("vectors.vec")),
        fixtures(),
    )
}

#[test]
fn one_entry_per_task_in_request_order() {
    let report = run(&config(&["CR", "mr"])).unwrap();
    let names: Vec<&str> = report.tasks.iter().map(|t| t.task.as_str()).collect();
    assert_eq!(names, ["CR", "MR"]);
    assert!(report.all_succeeded());
    assert!(report.tasks.iter().all(|t| t.wall_secs.is_none()));
    assert_eq!(report.config.profile, Profile::Default);
}

#[test]
fn unknown_task_fails_before_running() {
    let err = run(&config(&["MR", "QQP"])).unwrap_err();
    match err {
        Error::UnknownTask { name, valid } => {
            assert_eq!(name, "QQP");
            assert!(valid.contains("STS-B"), "{valid}");
        }
        other => panic!("expected unknown task, got {other}"),
    }
}

#[test]
fn task_failures_are_recorded_and_fail_fast_skips() {
    let dir = tempfile::tempdir().unwrap();
    let vectors = fixtures().join("vectors.vec");
    std::fs::create_dir_all(dir.path().join("CR")).unwrap();
    std::fs::copy(
        fixtures().join("CR/train.tsv"),
        dir.path().join("CR/train.tsv"),
    )
    .unwrap();
    let tasks = vec!["MR".to_string(), "CR".to_string()];

    let mut cfg = RunConfig::new(tasks, EncoderSpec::Bow(vectors), dir.path());
    let report = run(&cfg).unwrap();
    assert!(!report.tasks[0].succeeded());
    assert!(report.tasks[0]
        .error
        .as_ref()
        .unwrap()
        .contains("not found"));
    assert!(report.tasks[1].succeeded());

    cfg.fail_fast = true;
    let report = run(&cfg).unwrap();
    assert!(report.tasks[1].error.as_ref().unwrap().contains("skipped"));
}

#[test]
fn subprocess_encoder_cannot_run_in_parallel() {
    let mut cfg = config(&["MR", "CR"]);
    cfg.encoder = EncoderSpec::Subprocess(env!("CARGO_BIN_EXE_embeval-stub-encoder").to_string());
    cfg.parallel = 2;
    let err = run(&cfg).unwrap_err().to_string();
    assert!(err.contains("--parallel 1"), "{err}");
}

#[test]
fn subprocess_encoder_runs_tasks_sequentially() {
    let mut cfg = config(&["SICK-R", "STS13"]);
    cfg.encoder = EncoderSpec::Subprocess(format!(
        "{} --dim 12",
        env!("CARGO_BIN_EXE_embeval-stub-encoder")
    ));
    let report = run(&cfg).unwrap();
    assert!(report.all_succeeded(), "{:?}", report.tasks);
    assert!(matches!(report.tasks[1].result, Some(EvalResult::Sts(_))));
}

#[test]
fn parallel_and_sequential_reports_match() {
    let tasks = ["MR", "SICK-E", "STS15", "SICK-R"];
    let sequential = run(&config(&tasks)).unwrap();
    let mut cfg = config(&tasks);
    cfg.parallel = 3;
    let parallel = run(&cfg).unwrap();
    assert_eq!(render_json(&sequential), render_json(&parallel));
}

#[test]
fn seed_changes_results() {
    let a = run(&config(&["MR"])).unwrap();
    let mut cfg = config(&["MR"]);
    cfg.seed = 7;
    let b = run(&cfg).unwrap();
    assert_ne!(a.tasks, b.tasks);
}

#[test]
fn report_round_trips_and_renders() {
    let mut cfg = config(&["MRPC", "COCO"]);
    cfg.timings = true;
    let report = run(&cfg).unwrap();
    assert!(report.tasks.iter().all(|t| t.wall_secs.is_some()));
    let json = render_json(&report);
    assert_eq!(parse_json(&json).unwrap(), report);
    let md = render_markdown(&report);
    assert!(md.contains("| MRPC |"), "{md}");
    assert!(md.contains("| COCO |"), "{md}");
}
