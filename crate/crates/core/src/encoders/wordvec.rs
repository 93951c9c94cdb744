//! Text vector files: `token v1 … vd` per line, with an optional leading
//! `count dim` header (word2vec/fastText style). Used for word vectors,
//! precomputed sentence embeddings and image features alike.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct WordVecTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl WordVecTable {
    pub fn new(dim: usize) -> Self {
        WordVecTable {
            dim,
            vectors: HashMap::new(),
        }
    }

    pub fn from_entries<I, S>(dim: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let mut table = WordVecTable::new(dim);
        for (token, v) in entries {
            table.insert(token.into(), v)?;
        }
        Ok(table)
    }

    pub fn insert(&mut self, token: String, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::shape("WordVecTable::insert", self.dim, vector.len()));
        }
        self.vectors.entry(token).or_insert(vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.vectors.contains_key(token)
    }
}

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let mut fields = line.split_whitespace();
    let count = fields.next()?.parse().ok()?;
    let dim = fields.next()?.parse().ok()?;
    fields.next().is_none().then_some((count, dim))
}

/// Reads the vector dimension from the header or the first data line.
pub fn peek_dim(path: &Path) -> Result<usize> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut line = String::new();
    loop {
        line.clear();
        let n = reader
            .read_line(&mut line)
            .map_err(|e| Error::io(path, e))?;
        if n == 0 {
            return Err(Error::Data {
                path: path.to_path_buf(),
                msg: "no vectors in file".into(),
            });
        }
        let trimmed = line.trim_end();
        if trimmed.is_empty() {
            continue;
        }
        if let Some((_, dim)) = parse_header(trimmed) {
            return Ok(dim);
        }
        return Ok(trimmed.split(' ').count() - 1);
    }
}

/// Loads a vector file, keeping only tokens in `restrict` when given.
pub fn load_word_vectors(path: &Path, restrict: Option<&HashSet<String>>) -> Result<WordVecTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_word_vectors(BufReader::new(file), path, restrict)
}

pub fn read_word_vectors<R: BufRead>(
    mut reader: R,
    path: &Path,
    restrict: Option<&HashSet<String>>,
) -> Result<WordVecTable> {
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut table: Option<WordVecTable> = None;
    let mut buf = Vec::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        let n = reader
            .read_until(b'\n', &mut buf)
            .map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        line_no += 1;
        let text = String::from_utf8_lossy(&buf);
        let line = text.trim_end_matches(['\n', '\r']);
        if line.trim().is_empty() {
            continue;
        }
        if line_no == 1 {
            if let Some((_, dim)) = parse_header(line) {
                table = Some(WordVecTable::new(dim));
                continue;
            }
        }
        let mut fields = line.trim_end().split(' ');
        let token = fields.next().unwrap_or_default();
        let values: Vec<&str> = fields.collect();
        let table = table.get_or_insert_with(|| WordVecTable::new(values.len()));
        if values.len() != table.dim {
            return Err(parse_err(
                line_no,
                format!(
                    "expected {} values for {token:?}, found {}",
                    table.dim,
                    values.len()
                ),
            ));
        }
        if restrict.is_some_and(|r| !r.contains(token)) {
            continue;
        }
        let vector = values
            .iter()
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| parse_err(line_no, format!("unparsable value {v:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(parse_err(line_no, "non-finite value".into()));
        }
        table.insert(token.to_string(), vector)?;
    }
    table.ok_or_else(|| Error::Data {
        path: path.to_path_buf(),
        msg: "no vectors in file".into(),
    })
}

/// Mean of the in-vocabulary token vectors per sentence. Out-of-vocabulary
/// tokens are skipped; a sentence with no known token maps to the zero vector.
pub fn bow_encode(table: &WordVecTable, sentences: &[Vec<String>]) -> Matrix {
    let mut out = Matrix::zeros(sentences.len(), table.dim());
    for (i, sentence) in sentences.iter().enumerate() {
        let row = out.row_mut(i);
        let mut known = 0usize;
        for v in sentence.iter().filter_map(|t| table.get(t)) {
            for (o, x) in row.iter_mut().zip(v) {
                *o += x;
            }
            known += 1;
        }
        if known > 0 {
            let inv = 1.0 / known as f64;
            row.iter_mut().for_each(|x| *x *= inv);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn read(text: &str) -> Result<WordVecTable> {
        read_word_vectors(Cursor::new(text.as_bytes()), Path::new("mem.vec"), None)
    }

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn plain_file() {
        let t = read("a 1 0\nb 0 1\n").unwrap();
        assert_eq!(t.dim(), 2);
        assert_eq!(t.get("b"), Some(&[0.0, 1.0][..]));
    }

    #[test]
    fn header_is_skipped() {
        let row = |w: &str| format!("{w} {}\n", vec!["0.5"; 300].join(" "));
        let text = format!("2 300\n{}{}", row("x"), row("y"));
        let t = read(&text).unwrap();
        assert_eq!((t.dim(), t.len()), (300, 2));
    }

    #[test]
    fn short_row_names_line() {
        let text = format!(
            "a {}\nb {}\n",
            vec!["1"; 300].join(" "),
            vec!["1"; 299].join(" ")
        );
        let err = read(&text).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        assert!(err.to_string().contains(":2:"));
    }

    #[test]
    fn bad_float() {
        assert!(matches!(read("a 1 x\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn restriction_keeps_requested_tokens() {
        let keep: HashSet<String> = ["b".to_string()].into();
        let t = read_word_vectors(
            Cursor::new(b"a 1 0\nb 0 1\nc 1 1\n".to_vec()),
            Path::new("m"),
            Some(&keep),
        )
        .unwrap();
        assert_eq!(t.len(), 1);
        assert!(t.contains("b") && !t.contains("a"));
    }

    #[test]
    fn bow_means() {
        let t = read("a 1 0\nb 0 1\n").unwrap();
        let m = bow_encode(&t, &[toks("a b"), toks("a"), toks("zzz qqq"), vec![]]);
        assert_eq!(m.row(0), &[0.5, 0.5]);
        assert_eq!(m.row(1), &[1.0, 0.0]);
        assert_eq!(m.row(2), &[0.0, 0.0]);
        assert_eq!(m.row(3), &[0.0, 0.0]);
        // OOV tokens do not dilute the mean
        assert_eq!(bow_encode(&t, &[toks("a oov")]).row(0), &[1.0, 0.0]);
    }

    proptest::proptest! {
        #[test]
        fn bow_is_order_invariant(idx in proptest::collection::vec(0usize..4, 0..12), seed in 0u64..1000) {
            use rand::{seq::SliceRandom, Rng};
            let mut rng = crate::numerics::seeded_rng(seed, &[]);
            let t = WordVecTable::from_entries(
                3,
                ["w0", "w1", "w2"].iter().map(|w| (*w, (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())),
            ).unwrap();
            let sentence: Vec<String> = idx.iter().map(|i| format!("w{i}")).collect();
            let mut shuffled = sentence.clone();
            shuffled.shuffle(&mut rng);
            let a = bow_encode(&t, &[sentence]);
            let b = bow_encode(&t, &[shuffled]);
            for (x, y) in a.data().iter().zip(b.data()) {
                proptest::prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
