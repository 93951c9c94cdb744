use std::fs;
use std::path::{Path, PathBuf};

use embeval::ingest::{load_task, LoadOptions, Target};
use embeval::tasks::{task_names, TaskKind};
use embeval::Error;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn toks(s: &str) -> Vec<String> {
    s.split(' ').map(String::from).collect()
}

fn write(dir: &Path, rel: &str, contents: &str) {
    let path = dir.join(rel);
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, contents).unwrap();
}

#[test]
fn every_fixture_task_loads_and_validates() {
    for name in task_names() {
        let task = load_task(name, &fixtures(), LoadOptions::default())
            .unwrap_or_else(|e| panic!("{name}: {e}"));
        task.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(task.n_records() > 0, "{name}");
    }
}

#[test]
fn trec_fine_labels_map_to_coarse_classes() {
    let task = load_task("TREC", &fixtures(), LoadOptions::default()).unwrap();
    let first = &task.split("train").unwrap()[0];
    assert_eq!(
        first.target,
        Target::Class(4),
        "LOC is the fifth coarse class"
    );
    assert_eq!(first.first, toks("What are the twin cities ?"));
}

#[test]
fn sick_e_label_names_resolve() {
    let task = load_task("SICK-E", &fixtures(), LoadOptions::default()).unwrap();
    let first = &task.split("train").unwrap()[0];
    assert_eq!(first.class(), Some(0));
    assert_eq!(
        first.first,
        toks("A man is sitting on a chair and rubbing his eyes")
    );
    assert_eq!(
        first.second.as_deref(),
        Some(&toks("There is no man sitting on a chair and rubbing his eyes")[..])
    );
}

#[test]
fn scores_and_subtasks_load() {
    let sick = load_task("SICK-R", &fixtures(), LoadOptions::default()).unwrap();
    assert_eq!(sick.split("train").unwrap()[0].score(), Some(1.6));

    let sts = load_task("STS14", &fixtures(), LoadOptions::default()).unwrap();
    assert_eq!(sts.spec.kind, TaskKind::StsUnsupervised);
    let names: Vec<&str> = sts.subtasks.iter().map(|s| s.name.as_str()).collect();
    assert_eq!(names, ["deft-news", "headlines"]);
    let ammonia = &sts.subtasks[1].records[0];
    assert_eq!(ammonia.score(), Some(4.6));
    assert_eq!(
        ammonia.second.as_ref().unwrap(),
        &toks("Liquid ammonia leak kills at least 15 in Shanghai")
    );
}

#[test]
fn coco_features_are_attached() {
    let coco = load_task("COCO", &fixtures(), LoadOptions::default()).unwrap();
    let images = coco.images.as_ref().unwrap();
    assert_eq!(images.dim(), 2048);
    assert_eq!(images.len(), 35);
    let Target::Image(id) = &coco.split("test").unwrap()[0].target else {
        panic!("caption without image id");
    };
    assert!(images.get(id).is_some());
}

#[test]
fn lowercase_option_applies_to_all_tokens() {
    let options = LoadOptions {
        lowercase: true,
        ..LoadOptions::default()
    };
    let task = load_task("TREC", &fixtures(), options).unwrap();
    assert_eq!(
        task.split("train").unwrap()[0].first,
        toks("what are the twin cities ?")
    );
}

#[test]
fn pretokenized_marker_disables_tokenizer() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "MR/train.tsv", "1\tdon't stop.\n0\tit's bad\n");
    let tokenized = load_task("MR", dir.path(), LoadOptions::default()).unwrap();
    assert_eq!(
        tokenized.split("train").unwrap()[0].first,
        toks("do n't stop .")
    );

    write(dir.path(), "MR/PRETOKENIZED", "");
    let raw = load_task("MR", dir.path(), LoadOptions::default()).unwrap();
    assert_eq!(raw.split("train").unwrap()[0].first, toks("don't stop."));
}

#[test]
fn malformed_files_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "MR/train.tsv", "1\tfine\n1\ttoo\tmany\n");
    match load_task("MR", dir.path(), LoadOptions::default()).unwrap_err() {
        Error::Parse { line, .. } => assert_eq!(line, 2),
        other => panic!("expected parse error, got {other}"),
    }

    write(dir.path(), "SICK-R/train.tsv", "5.5\ta\tb\n");
    write(dir.path(), "SICK-R/dev.tsv", "3\ta\tb\n");
    write(dir.path(), "SICK-R/test.tsv", "3\ta\tb\n");
    let err = load_task("SICK-R", dir.path(), LoadOptions::default())
        .unwrap_err()
        .to_string();
    assert!(err.contains("outside"), "{err}");

    write(dir.path(), "CR/train.tsv", "7\tsomething\n");
    let err = load_task("CR", dir.path(), LoadOptions::default())
        .unwrap_err()
        .to_string();
    assert!(err.contains("out of range"), "{err}");
}

#[test]
fn invalid_utf8_is_reported_with_offset() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("MR/train.tsv");
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(&path, b"1\tgood\n0\tba\xffd\n").unwrap();
    let err = load_task("MR", dir.path(), LoadOptions::default())
        .unwrap_err()
        .to_string();
    assert!(err.contains("invalid UTF-8"), "{err}");
}

#[test]
fn missing_directory_and_split() {
    let dir = tempfile::tempdir().unwrap();
    let err = load_task("MR", dir.path(), LoadOptions::default())
        .unwrap_err()
        .to_string();
    assert!(err.contains("task directory not found"), "{err}");

    write(dir.path(), "SST-2/train.tsv", "1\tgood\n");
    assert!(load_task("SST-2", dir.path(), LoadOptions::default()).is_err());
}

#[test]
fn unknown_task_name() {
    let err = load_task("IMDB", &fixtures(), LoadOptions::default()).unwrap_err();
    assert!(matches!(err, Error::UnknownTask { .. }), "{err}");
}
