use std::process::Command;
use std::time::Duration;

use embeval::encoders::{
    encode_dataset, probe_determinism, probe_sentences, Encoder, SubprocessEncoder, Tokens,
};
use embeval::Error;

fn stub(args: &[&str], timeout: Duration) -> SubprocessEncoder {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_embeval-stub-encoder"));
    cmd.args(args);
    SubprocessEncoder::spawn_command(cmd, timeout).expect("stub starts")
}

fn sentences(n: usize) -> Vec<Tokens> {
    (0..n)
        .map(|i| (0..(i * 7) % 13).map(|k| format!("t{i}_{k}")).collect())
        .collect()
}

#[test]
fn handshake_dim_is_honored() {
    let enc = stub(&["--dim", "24"], Duration::from_secs(10));
    assert_eq!(enc.dim(), 24);
}

#[test]
fn hundred_sentences_come_back_in_order() {
    let mut enc = stub(
        &["--mode", "echo-index", "--dim", "4"],
        Duration::from_secs(10),
    );
    let input = sentences(100);
    let out = encode_dataset(&mut enc, &input, 16).unwrap();
    assert_eq!(out.rows(), 100);
    for (i, s) in input.iter().enumerate() {
        assert_eq!(
            out.get(i, 1),
            s.len() as f64,
            "row {i} holds another sentence"
        );
    }
    assert_eq!(enc.requests_sent(), 7);
}

#[test]
fn hash_mode_passes_determinism_probe() {
    let mut enc = stub(&["--mode", "hash"], Duration::from_secs(10));
    assert!(probe_determinism(&mut enc, &probe_sentences()).unwrap());
}

#[test]
fn wrong_dim_is_a_shape_error() {
    let mut enc = stub(
        &["--mode", "wrong-dim", "--dim", "8"],
        Duration::from_secs(10),
    );
    let err = encode_dataset(&mut enc, &sentences(5), 4).unwrap_err();
    assert!(matches!(err, Error::ShapeMismatch { .. }), "{err}");
}

#[test]
fn crash_reports_exit_status_and_stderr() {
    let mut enc = stub(&["--mode", "crash"], Duration::from_secs(10));
    match encode_dataset(&mut enc, &sentences(3), 4).unwrap_err() {
        Error::ChildExit { status, stderr } => {
            assert!(status.contains('3'), "{status}");
            assert!(stderr.contains("simulated failure"), "{stderr}");
        }
        other => panic!("expected child exit, got {other}"),
    }
}

#[test]
fn silent_encoder_times_out() {
    let mut enc = stub(&["--mode", "sleep"], Duration::from_millis(300));
    let err = encode_dataset(&mut enc, &sentences(3), 4).unwrap_err();
    assert!(matches!(err, Error::Timeout(_)), "{err}");
}

#[test]
fn shutdown_exits_cleanly() {
    let mut enc = stub(&[], Duration::from_secs(10));
    encode_dataset(&mut enc, &sentences(3), 2).unwrap();
    assert!(enc.shutdown().unwrap().success());
}

#[test]
fn missing_program_is_an_encoder_error() {
    let err = SubprocessEncoder::spawn_command(
        Command::new("/nonexistent/encoder"),
        Duration::from_secs(1),
    )
    .err()
    .expect("spawn fails");
    assert!(matches!(err, Error::Encoder(_)), "{err}");
}
