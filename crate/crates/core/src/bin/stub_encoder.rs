//! Minimal encoder speaking the subprocess protocol, for tests.
//!
//! Usage: `embeval-stub-encoder [--dim N] [--mode hash|echo-index|wrong-dim|crash|sleep]`
//!
//! * `hash`: each token gets a unit vector from a ChaCha8 stream seeded by
//!   the first 8 bytes of its SHA-256; a sentence is the normalized mean.
//! * `echo-index`: `v[0]` is the position in the batch, `v[1]` the token count.
//! * `wrong-dim`: replies with `dim + 1` columns.
//! * `crash`: writes to stderr and exits 3 on the first request.
//! * `sleep`: never answers.

use std::io::{self, BufRead, Write};
use std::process::ExitCode;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, PartialEq)]
enum Mode {
    Hash,
    EchoIndex,
    WrongDim,
    Crash,
    Sleep,
}

fn token_vector(token: &str, dim: usize) -> Vec<f64> {
    let digest = Sha256::digest(token.as_bytes());
    let seed = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    normalized(v)
}

fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    } else {
        v[0] = 1.0;
    }
    v
}

fn hash_sentence(tokens: &[String], dim: usize) -> Vec<f64> {
    let mut sum = vec![0.0; dim];
    for t in tokens {
        for (s, x) in sum.iter_mut().zip(token_vector(t, dim)) {
            *s += x;
        }
    }
    normalized(sum)
}

fn parse_args() -> Result<(usize, Mode), String> {
    let mut dim = 16;
    let mut mode = Mode::Hash;
    let mut args = std::env::args().skip(1);
    while let Some(arg) = args.next() {
        let value = args.next().ok_or_else(|| format!("{arg} needs a value"))?;
        match arg.as_str() {
            "--dim" => dim = value.parse().map_err(|e| format!("bad --dim: {e}"))?,
            "--mode" => {
                mode = match value.as_str() {
                    "hash" => Mode::Hash,
                    "echo-index" => Mode::EchoIndex,
                    "wrong-dim" => Mode::WrongDim,
                    "crash" => Mode::Crash,
                    "sleep" => Mode::Sleep,
                    other => return Err(format!("unknown mode {other}")),
                }
            }
            other => return Err(format!("unknown argument {other}")),
        }
    }
    if dim < 2 {
        return Err("--dim must be at least 2".into());
    }
    Ok((dim, mode))
}

fn main() -> ExitCode {
    let (dim, mode) = match parse_args() {
        Ok(v) => v,
        Err(e) => {
            eprintln!("stub encoder: {e}");
            return ExitCode::from(2);
        }
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let send = |out: &mut io::StdoutLock, v: Value| -> io::Result<()> {
        writeln!(out, "{v}")?;
        out.flush()
    };
    if send(&mut out, json!({"type": "hello", "dim": dim})).is_err() {
        return ExitCode::from(1);
    }

    for line in io::stdin().lock().lines() {
        let Ok(line) = line else {
            return ExitCode::from(1);
        };
        let msg: Value = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(e) => {
                eprintln!("stub encoder: malformed request: {e}");
                return ExitCode::from(2);
            }
        };
        match msg["type"].as_str() {
            Some("shutdown") => return ExitCode::SUCCESS,
            Some("encode") => {}
            _ => {
                eprintln!("stub encoder: unexpected message {line}");
                return ExitCode::from(2);
            }
        }
        let sentences: Vec<Vec<String>> = match serde_json::from_value(msg["sentences"].clone()) {
            Ok(s) => s,
            Err(e) => {
                eprintln!("stub encoder: bad sentences: {e}");
                return ExitCode::from(2);
            }
        };
        let vectors: Vec<Vec<f64>> = match mode {
            Mode::Crash => {
                eprintln!("stub encoder: simulated failure while encoding");
                return ExitCode::from(3);
            }
            Mode::Sleep => loop {
                std::thread::sleep(std::time::Duration::from_secs(3600));
            },
            Mode::Hash => sentences.iter().map(|s| hash_sentence(s, dim)).collect(),
            Mode::EchoIndex => sentences
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let mut v = vec![0.0; dim];
                    v[0] = i as f64;
                    v[1] = s.len() as f64;
                    v
                })
                .collect(),
            Mode::WrongDim => sentences.iter().map(|_| vec![0.5; dim + 1]).collect(),
        };
        let reply = json!({"type": "embeddings", "id": msg["id"], "vectors": vectors});
        if send(&mut out, reply).is_err() {
            return ExitCode::from(1);
        }
    }
    ExitCode::SUCCESS
}
