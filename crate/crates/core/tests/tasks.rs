use std::path::{Path, PathBuf};

use embeval::encoders::{BowEncoder, Encoder};
use embeval::ingest::{load_task, LoadOptions};
use embeval::runner::Profile;
use embeval::tasks::{run_task, EvalResult, EvalSettings};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn settings() -> EvalSettings {
    Profile::Default.settings(1111)
}

fn evaluate(name: &str) -> EvalResult {
    let data = load_task(name, &fixtures(), LoadOptions::default()).unwrap();
    let mut encoder = BowEncoder::open(fixtures().join("vectors.vec")).unwrap();
    encoder.prepare(&data.all_sentences()).unwrap();
    run_task(&data, &mut encoder, &settings()).unwrap()
}

#[test]
fn nested_cv_classification() {
    let EvalResult::Classification(r) = evaluate("MR") else {
        panic!("wrong result kind")
    };
    let folds = r.fold_accs.as_ref().expect("per-fold accuracies");
    assert_eq!(folds.len(), 10);
    assert_eq!(r.l2.len(), 10, "one chosen penalty per outer fold");
    assert_eq!(r.n_samples, 100);
    assert!(r.acc > 0.8, "MR fixture accuracy {}", r.acc);
}

#[test]
fn fixed_test_classification() {
    let EvalResult::Classification(r) = evaluate("TREC") else {
        panic!("wrong result kind")
    };
    assert!(r.dev_acc.is_some());
    assert_eq!(r.l2.len(), 1);
    assert!(r.acc > 0.5, "TREC fixture accuracy {}", r.acc);
}

#[test]
fn paraphrase_reports_f1() {
    let EvalResult::PairClassification(r) = evaluate("MRPC") else {
        panic!("wrong result kind")
    };
    let f1 = r.f1.expect("MRPC reports F1");
    assert!((0.0..=1.0).contains(&f1));
    assert_eq!(r.n_test, 60);

    let EvalResult::PairClassification(nli) = evaluate("SICK-E") else {
        panic!("wrong result kind")
    };
    assert!(nli.f1.is_none());
}

#[test]
fn relatedness_correlates_with_gold() {
    let EvalResult::Relatedness(r) = evaluate("SICK-R") else {
        panic!("wrong result kind")
    };
    assert!(r.pearson > 0.5, "pearson {}", r.pearson);
    assert!(r.mse.is_finite() && r.mse >= 0.0);
}

#[test]
fn sts_reports_every_subtask() {
    let EvalResult::Sts(r) = evaluate("STS12") else {
        panic!("wrong result kind")
    };
    let names: Vec<&str> = r.subtasks.iter().map(|s| s.name.as_str()).collect();
    assert_eq!(names, ["MSRpar", "MSRvid"]);
    assert!(r.subtasks.iter().all(|s| s.n == 20));
    assert!((-1.0..=1.0).contains(&r.weighted_mean.pearson));
}

#[test]
fn caption_retrieval_on_fixture_images() {
    let EvalResult::CaptionRetrieval(r) = evaluate("COCO") else {
        panic!("wrong result kind")
    };
    assert_eq!(r.splits.len(), 5);
    assert!(r
        .splits
        .iter()
        .all(|s| s.n_images == 2 && s.n_captions == 10));
    // 10 caption candidates per image: R@10 is defined, only 2 image candidates per caption
    assert!(r.mean.caption_retrieval.r10.is_some());
    assert!(r.mean.image_retrieval.r5.is_none());
}
