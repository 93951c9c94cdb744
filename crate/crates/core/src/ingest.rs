//! Canonical dataset layout, loaders and a Moses-style tokenizer.
//!
//! Every task lives in `<data_dir>/<TASK>/`:
//!
//! * classification: `{train,dev,test}.tsv` with `label<TAB>sentence`
//! * pair tasks: `label_or_score<TAB>sentence1<TAB>sentence2`
//! * STS: `subtasks/<name>.tsv` with `score<TAB>sentence1<TAB>sentence2`
//! * COCO: `{train,dev,test}.tsv` with `image_id<TAB>caption`, plus
//!   `features.vec` holding one `image_id v1 … v2048` row per image
//!
//! Which split files are required depends on the task's protocol. Labels may
//! be class ids or the task's class names. An empty file named `PRETOKENIZED`
//! in the task directory disables tokenization (text is split on whitespace).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::encoders::{load_word_vectors, Tokens, WordVecTable};
use crate::error::{Error, Result};
use crate::tasks::{lookup, TargetSpec, TaskKind, TaskSpec};

const PRETOKENIZED_MARKER: &str = "PRETOKENIZED";

/// Characters split off wherever they occur.
fn always_split(c: char) -> bool {
    matches!(
        c,
        '?' | '!' | ';' | '(' | ')' | '[' | ']' | '{' | '}' | '"' | '“' | '”' | '«' | '»'
    )
}

fn leading_punct(c: char) -> bool {
    always_split(c) || matches!(c, '\'' | '‘' | '’' | '`' | '¿' | '¡' | ',' | ':')
}

fn trailing_punct(c: char) -> bool {
    always_split(c) || matches!(c, '\'' | '‘' | '’' | ',' | ':' | '.')
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '’'
}

const CLITICS: &[&str] = &["n't", "'s", "'re", "'ve", "'ll", "'d", "'m"];

fn clitic_match(s: &str) -> bool {
    let norm = s.replace('’', "'").to_lowercase();
    CLITICS.contains(&norm.as_str())
}

/// `U.S`, `e.g`: letter runs joined by single periods.
fn looks_like_abbreviation(core: &str) -> bool {
    core.contains('.')
        && core
            .split('.')
            .all(|seg| !seg.is_empty() && seg.chars().all(char::is_alphabetic))
}

/// Splits a whitespace-free chunk.
fn split_chunk(s: &str, out: &mut Vec<String>) {
    let chars: Vec<(usize, char)> = s.char_indices().collect();
    let Some(&(_, first)) = chars.first() else {
        return;
    };
    let last = chars[chars.len() - 1].1;

    if chars.len() == 1 || clitic_match(s) || s.chars().all(|c| c == '.') {
        out.push(s.to_string());
        return;
    }

    // leading punctuation; a leading period stays on numbers like ".5"
    let leading_dot = first == '.' && !chars[1].1.is_ascii_digit();
    if leading_punct(first) || leading_dot {
        let rest = &s[first.len_utf8()..];
        out.push(first.to_string());
        split_chunk(rest, out);
        return;
    }

    if trailing_punct(last) {
        if last == '.' {
            let dots = s.chars().rev().take_while(|&c| c == '.').count();
            let core = &s[..s.len() - dots];
            if dots == 1 && looks_like_abbreviation(core) {
                out.push(s.to_string());
                return;
            }
            split_chunk(core, out);
            out.push(".".repeat(dots));
            return;
        }
        let core = &s[..s.len() - last.len_utf8()];
        split_chunk(core, out);
        out.push(last.to_string());
        return;
    }

    // interior punctuation; commas and colons stay between digits (1,000 / 10:30)
    for (k, &(pos, c)) in chars
        .iter()
        .enumerate()
        .skip(1)
        .take(chars.len().saturating_sub(2))
    {
        let digit_sep = (c == ',' || c == ':')
            && chars[k - 1].1.is_ascii_digit()
            && chars[k + 1].1.is_ascii_digit();
        if always_split(c) || ((c == ',' || c == ':') && !digit_sep) {
            split_chunk(&s[..pos], out);
            out.push(c.to_string());
            split_chunk(&s[pos + c.len_utf8()..], out);
            return;
        }
    }

    // contractions: do|n't, it|'s
    let lower = s.replace('’', "'").to_lowercase();
    if lower.ends_with("n't") && chars.len() > 3 {
        let cut = chars[chars.len() - 3].0;
        split_chunk(&s[..cut], out);
        out.push(s[cut..].to_string());
        return;
    }
    if let Some(k) = chars.iter().rposition(|&(_, c)| is_apostrophe(c)) {
        if k > 0 && clitic_match(&s[chars[k].0..]) {
            split_chunk(&s[..chars[k].0], out);
            out.push(s[chars[k].0..].to_string());
            return;
        }
    }

    out.push(s.to_string());
}

/// Moses-style tokenization: whitespace normalization, punctuation split
/// off word edges, `don't` → `do n't`, `it's` → `it 's`. Intra-word hyphens
/// are kept and case is preserved. Idempotent on its own output.
pub fn tokenize(text: &str) -> Tokens {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        split_chunk(chunk, &mut out);
    }
    out
}

/// [`tokenize`] on raw bytes, rejecting invalid UTF-8.
pub fn tokenize_bytes(bytes: &[u8]) -> Result<Tokens> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Encoding {
        offset: e.valid_up_to(),
    })?;
    Ok(tokenize(text))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadOptions {
    pub lowercase: bool,
    /// Treat every file as pre-tokenized regardless of markers.
    pub pretokenized: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Class(usize),
    Score(f64),
    Image(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub first: Tokens,
    pub second: Option<Tokens>,
    pub target: Target,
}

impl Record {
    pub fn class(&self) -> Option<usize> {
        match self.target {
            Target::Class(c) => Some(c),
            _ => None,
        }
    }

    pub fn score(&self) -> Option<f64> {
        match self.target {
            Target::Score(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subtask {
    pub name: String,
    pub records: Vec<Record>,
}

/// Image id → feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageFeatureStore {
    table: WordVecTable,
}

impl ImageFeatureStore {
    pub fn new(table: WordVecTable) -> Self {
        ImageFeatureStore { table }
    }

    pub fn dim(&self) -> usize {
        self.table.dim()
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.table.get(id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskData {
    pub spec: &'static TaskSpec,
    /// `train` / `dev` / `test` records, whichever the task uses.
    pub splits: BTreeMap<String, Vec<Record>>,
    /// STS subtasks, sorted by name.
    pub subtasks: Vec<Subtask>,
    pub images: Option<ImageFeatureStore>,
}

impl TaskData {
    pub fn split(&self, name: &str) -> Result<&[Record]> {
        self.splits.get(name).map(Vec::as_slice).ok_or_else(|| {
            Error::InvalidArgument(format!("{}: missing {name} split", self.spec.name))
        })
    }

    /// Every sentence in the task, for encoder preparation.
    pub fn all_sentences(&self) -> Vec<Tokens> {
        let records = self
            .splits
            .values()
            .flatten()
            .chain(self.subtasks.iter().flat_map(|s| &s.records));
        let mut out = Vec::new();
        for r in records {
            out.push(r.first.clone());
            if let Some(s) = &r.second {
                out.push(s.clone());
            }
        }
        out
    }

    pub fn n_records(&self) -> usize {
        self.splits.values().map(Vec::len).sum::<usize>()
            + self.subtasks.iter().map(|s| s.records.len()).sum::<usize>()
    }

    /// Kind-specific shape and range checks shared by every loader.
    pub fn validate(&self) -> Result<()> {
        let name = self.spec.name;
        let err = |msg: String| Err(Error::InvalidArgument(format!("{name}: {msg}")));
        for split in self.spec.required_splits() {
            match self.splits.get(*split) {
                Some(r) if !r.is_empty() => {}
                _ => return err(format!("{split} split is missing or empty")),
            }
        }
        if self.spec.kind == TaskKind::StsUnsupervised && self.subtasks.is_empty() {
            return err("no STS subtasks".into());
        }
        let records = self
            .splits
            .values()
            .flatten()
            .chain(self.subtasks.iter().flat_map(|s| &s.records));
        for r in records {
            if self.spec.is_pair_task() != r.second.is_some() {
                return err("record shape does not match task kind".into());
            }
            match (&r.target, self.spec.target) {
                (Target::Class(c), TargetSpec::Classes { n, .. }) if *c < n => {}
                (Target::Score(s), TargetSpec::Scores { min, max }) if (min..=max).contains(s) => {}
                (Target::Image(id), TargetSpec::ImageIds { feature_dim }) => {
                    let store = self.images.as_ref().ok_or_else(|| {
                        Error::InvalidArgument(format!("{name}: image features not loaded"))
                    })?;
                    if store.dim() != feature_dim {
                        return err(format!(
                            "image features have dim {}, expected {feature_dim}",
                            store.dim()
                        ));
                    }
                    if store.get(id).is_none() {
                        return err(format!("no features for image {id:?}"));
                    }
                }
                (t, _) => return err(format!("target {t:?} invalid for this task")),
            }
        }
        Ok(())
    }
}

fn parse_target(spec: &TaskSpec, field: &str) -> std::result::Result<Target, String> {
    match spec.target {
        TargetSpec::Classes { n, names } => {
            let id = match field.parse::<usize>() {
                Ok(id) => id,
                Err(_) => {
                    // TREC fine labels like LOC:city map to their coarse class
                    let coarse = field.split(':').next().unwrap_or(field);
                    names
                        .iter()
                        .position(|name| name.eq_ignore_ascii_case(coarse))
                        .ok_or_else(|| format!("unknown label {field:?}"))?
                }
            };
            if id >= n {
                return Err(format!("label {id} out of range for {n} classes"));
            }
            Ok(Target::Class(id))
        }
        TargetSpec::Scores { min, max } => {
            let score: f64 = field
                .parse()
                .map_err(|_| format!("unparsable score {field:?}"))?;
            if !(min..=max).contains(&score) {
                return Err(format!("score {score} outside [{min}, {max}]"));
            }
            Ok(Target::Score(score))
        }
        TargetSpec::ImageIds { .. } => {
            if field.is_empty() {
                return Err("empty image id".into());
            }
            Ok(Target::Image(field.to_string()))
        }
    }
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    let mut offset = 0;
    for (i, raw) in bytes.split(|&b| b == b'\n').enumerate() {
        let line = std::str::from_utf8(raw).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg: format!("invalid UTF-8 at byte offset {}", offset + e.valid_up_to()),
        })?;
        offset += raw.len() + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        if !line.trim().is_empty() {
            out.push((i + 1, line.to_string()));
        }
    }
    Ok(out)
}

struct Reader {
    spec: &'static TaskSpec,
    options: LoadOptions,
    pretokenized: bool,
}

impl Reader {
    fn tokens(&self, text: &str) -> Tokens {
        let toks: Tokens = if self.pretokenized {
            text.split_whitespace().map(String::from).collect()
        } else {
            tokenize(text)
        };
        if self.options.lowercase {
            toks.into_iter().map(|t| t.to_lowercase()).collect()
        } else {
            toks
        }
    }

    fn read_file(&self, path: &Path) -> Result<Vec<Record>> {
        let pair = self.spec.is_pair_task();
        let expected = if pair { 3 } else { 2 };
        let mut records = Vec::new();
        for (line_no, line) in read_lines(path)? {
            let fail = |msg: String| Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                msg,
            };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != expected {
                return Err(fail(format!(
                    "expected {expected} tab-separated fields, found {}",
                    fields.len()
                )));
            }
            let target = parse_target(self.spec, fields[0].trim()).map_err(fail)?;
            records.push(Record {
                first: self.tokens(fields[1]),
                second: pair.then(|| self.tokens(fields[2])),
                target,
            });
        }
        if records.is_empty() {
            return Err(Error::Data {
                path: path.to_path_buf(),
                msg: "file has no records".into(),
            });
        }
        Ok(records)
    }
}

/// Loads and validates one task from `<data_dir>/<name>/`.
pub fn load_task(name: &str, data_dir: &Path, options: LoadOptions) -> Result<TaskData> {
    let spec = lookup(name)?;
    let dir = data_dir.join(spec.name);
    if !dir.is_dir() {
        return Err(Error::Data {
            path: dir,
            msg: "task directory not found".into(),
        });
    }
    let reader = Reader {
        spec,
        options,
        pretokenized: options.pretokenized || dir.join(PRETOKENIZED_MARKER).exists(),
    };

    let mut splits = BTreeMap::new();
    let mut subtasks = Vec::new();
    let mut images = None;

    if spec.kind == TaskKind::StsUnsupervised {
        let sub_dir = dir.join("subtasks");
        let entries = std::fs::read_dir(&sub_dir).map_err(|e| Error::io(&sub_dir, e))?;
        let mut files: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "tsv"))
            .collect();
        files.sort();
        for path in files {
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            subtasks.push(Subtask {
                name,
                records: reader.read_file(&path)?,
            });
        }
    } else {
        for split in ["train", "dev", "test"] {
            let path = dir.join(format!("{split}.tsv"));
            if path.exists() {
                splits.insert(split.to_string(), reader.read_file(&path)?);
            } else if spec.required_splits().contains(&split) {
                return Err(Error::Data {
                    path,
                    msg: "required split file missing".into(),
                });
            }
        }
    }

    if let TargetSpec::ImageIds { .. } = spec.target {
        let path = dir.join("features.vec");
        images = Some(ImageFeatureStore::new(load_word_vectors(&path, None)?));
    }

    let data = TaskData {
        spec,
        splits,
        subtasks,
        images,
    };
    data.validate()?;
    Ok(data)
}
