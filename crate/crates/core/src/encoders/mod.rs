//! The encoder boundary. Anything that can turn token sequences into
//! fixed-width vectors implements [`Encoder`]; the harness only ever talks to
//! encoders through [`encode_dataset`], which feeds length-sorted batches and
//! restores input order.

mod subprocess;
mod wordvec;

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub use subprocess::{SubprocessEncoder, DEFAULT_TIMEOUT};
pub use wordvec::{bow_encode, load_word_vectors, peek_dim, read_word_vectors, WordVecTable};

pub type Tokens = Vec<String>;

pub trait Encoder: Send {
    /// Output dimension; constant for the lifetime of the encoder.
    fn dim(&self) -> usize;

    /// Sees every sentence of a task before encoding starts.
    fn prepare(&mut self, _sentences: &[Tokens]) -> Result<()> {
        Ok(())
    }

    /// One row per input sentence, in input order.
    fn encode_batch(&mut self, batch: &[Tokens]) -> Result<Matrix>;
}

fn vocabulary(sentences: &[Tokens]) -> HashSet<String> {
    sentences.iter().flatten().cloned().collect()
}

/// Bag-of-words averaging over a word-vector file.
///
/// When backed by a file, `prepare` loads only the task vocabulary; encoding
/// without a prior `prepare` loads the whole file.
pub struct BowEncoder {
    path: Option<PathBuf>,
    dim: usize,
    table: Option<WordVecTable>,
}

impl BowEncoder {
    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let dim = peek_dim(&path)?;
        Ok(BowEncoder {
            path: Some(path),
            dim,
            table: None,
        })
    }

    pub fn from_table(table: WordVecTable) -> Self {
        BowEncoder {
            path: None,
            dim: table.dim(),
            table: Some(table),
        }
    }

    pub fn table(&self) -> Option<&WordVecTable> {
        self.table.as_ref()
    }
}

impl Encoder for BowEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn prepare(&mut self, sentences: &[Tokens]) -> Result<()> {
        if let Some(path) = &self.path {
            let vocab = vocabulary(sentences);
            let table = load_word_vectors(path, Some(&vocab))?;
            log::info!(
                "loaded {} of {} task tokens from {}",
                table.len(),
                vocab.len(),
                path.display()
            );
            self.table = Some(table);
        }
        Ok(())
    }

    fn encode_batch(&mut self, batch: &[Tokens]) -> Result<Matrix> {
        if self.table.is_none() {
            let path = self
                .path
                .as_ref()
                .expect("a table-less encoder is file-backed");
            self.table = Some(load_word_vectors(path, None)?);
        }
        Ok(bow_encode(
            self.table.as_ref().expect("loaded above"),
            batch,
        ))
    }
}

/// Stable id of a tokenized sentence: the first 16 hex digits of the SHA-256
/// of its tokens joined by single spaces. Precomputed embedding files are
/// keyed by this id.
pub fn sentence_id(tokens: &[String]) -> String {
    let digest = Sha256::digest(tokens.join(" ").as_bytes());
    hex::encode(&digest[..8])
}

/// Looks sentence vectors up in a vector file keyed by [`sentence_id`].
pub struct PrecomputedEncoder {
    path: PathBuf,
    dim: usize,
    table: Option<WordVecTable>,
}

impl PrecomputedEncoder {
    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let dim = peek_dim(&path)?;
        Ok(PrecomputedEncoder {
            path,
            dim,
            table: None,
        })
    }
}

impl Encoder for PrecomputedEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn prepare(&mut self, sentences: &[Tokens]) -> Result<()> {
        let ids: HashSet<String> = sentences.iter().map(|s| sentence_id(s)).collect();
        self.table = Some(load_word_vectors(&self.path, Some(&ids))?);
        Ok(())
    }

    fn encode_batch(&mut self, batch: &[Tokens]) -> Result<Matrix> {
        if self.table.is_none() {
            self.table = Some(load_word_vectors(&self.path, None)?);
        }
        let table = self.table.as_ref().expect("loaded above");
        let mut out = Matrix::zeros(batch.len(), self.dim);
        for (i, s) in batch.iter().enumerate() {
            let id = sentence_id(s);
            let v = table.get(&id).ok_or_else(|| {
                Error::Encoder(format!(
                    "{}: no embedding for sentence id {id} ({:?})",
                    self.path.display(),
                    s.join(" ")
                ))
            })?;
            out.row_mut(i).copy_from_slice(v);
        }
        Ok(out)
    }
}

/// Encodes `sentences` in batches of `batch_size`, shortest first, and
/// returns rows in the original order.
pub fn encode_dataset(
    encoder: &mut dyn Encoder,
    sentences: &[Tokens],
    batch_size: usize,
) -> Result<Matrix> {
    if batch_size == 0 {
        return Err(Error::InvalidArgument(
            "encoder batch_size must be > 0".into(),
        ));
    }
    let dim = encoder.dim();
    let mut order: Vec<usize> = (0..sentences.len()).collect();
    order.sort_by_key(|&i| sentences[i].len());

    let mut out = Matrix::zeros(sentences.len(), dim);
    for chunk in order.chunks(batch_size) {
        let batch: Vec<Tokens> = chunk.iter().map(|&i| sentences[i].clone()).collect();
        let emb = encoder.encode_batch(&batch)?;
        if emb.rows() != chunk.len() {
            return Err(Error::Encoder(format!(
                "batch of {} sentences returned {} rows",
                chunk.len(),
                emb.rows()
            )));
        }
        if emb.cols() != dim {
            return Err(Error::Encoder(format!(
                "encoder dimension drifted: declared {dim}, batch returned {}",
                emb.cols()
            )));
        }
        if !emb.is_finite() {
            return Err(Error::Encoder("encoder returned non-finite values".into()));
        }
        for (r, &i) in chunk.iter().enumerate() {
            out.row_mut(i).copy_from_slice(emb.row(r));
        }
    }
    Ok(out)
}

/// Encodes up to ten sentences twice (as one batch, then one at a time) and
/// reports whether the results agree exactly. A mismatch is logged as a warning.
pub fn probe_determinism(encoder: &mut dyn Encoder, sentences: &[Tokens]) -> Result<bool> {
    let probe = &sentences[..sentences.len().min(10)];
    if probe.is_empty() {
        return Ok(true);
    }
    let batched = encoder.encode_batch(probe)?;
    let mut consistent = batched.rows() == probe.len();
    for (i, s) in probe.iter().enumerate() {
        let single = encoder.encode_batch(std::slice::from_ref(s))?;
        if !consistent || single.rows() != 1 || single.row(0) != batched.row(i) {
            consistent = false;
            break;
        }
    }
    if !consistent {
        log::warn!("encoder is not deterministic: the same sentence produced different vectors");
    }
    Ok(consistent)
}

/// Sentences used by `probe-encoder`.
pub fn probe_sentences() -> Vec<Tokens> {
    [
        "A man is playing a guitar .",
        "What are the twin cities ?",
        "nothing about this movie works .",
        "Liquid ammonia leak kills 15 in Shanghai",
        "The carousel is moving .",
        "We tried it out christmas night and it worked great .",
        "don't want",
        "A group of people on some horses riding through the beach .",
        "",
        "subjective",
    ]
    .iter()
    .map(|s| crate::ingest::tokenize(s))
    .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "arg", rename_all = "lowercase")]
pub enum EncoderSpec {
    Bow(PathBuf),
    Precomputed(PathBuf),
    Subprocess(String),
}

impl EncoderSpec {
    /// `bow:<path>`, `precomputed:<path>` or `subprocess:<command>`.
    pub fn parse(spec: &str) -> Result<Self> {
        let (kind, arg) = spec.split_once(':').ok_or_else(|| {
            Error::InvalidArgument(format!(
                "encoder spec {spec:?} must look like bow:<path>, precomputed:<path> or subprocess:<command>"
            ))
        })?;
        if arg.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "encoder spec {spec:?} has an empty argument"
            )));
        }
        match kind {
            "bow" => Ok(EncoderSpec::Bow(arg.into())),
            "precomputed" => Ok(EncoderSpec::Precomputed(arg.into())),
            "subprocess" => Ok(EncoderSpec::Subprocess(arg.to_string())),
            other => Err(Error::InvalidArgument(format!(
                "unknown encoder kind {other:?}"
            ))),
        }
    }

    /// Whether independent instances can serve concurrent task runs.
    pub fn is_shareable(&self) -> bool {
        !matches!(self, EncoderSpec::Subprocess(_))
    }

    pub fn instantiate(&self, timeout: Duration) -> Result<Box<dyn Encoder>> {
        Ok(match self {
            EncoderSpec::Bow(p) => Box::new(BowEncoder::open(p)?),
            EncoderSpec::Precomputed(p) => Box::new(PrecomputedEncoder::open(p)?),
            EncoderSpec::Subprocess(cmd) => Box::new(SubprocessEncoder::spawn(cmd, timeout)?),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        match self {
            EncoderSpec::Bow(p) | EncoderSpec::Precomputed(p) => Some(p),
            EncoderSpec::Subprocess(_) => None,
        }
    }
}
