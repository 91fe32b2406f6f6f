//! Parallel-corpus ingestion: text normalization, length filtering and
//! word-index dictionaries.
//!
//! The corpus file format is UTF-8 text with one sentence pair per
//! line, exactly one TAB between the source and target fields, LF or
//! CRLF endings. Empty lines are ignored.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

/// Reserved id of the start-of-sequence token.
pub const SOS_ID: usize = 0;
/// Reserved id of the end-of-sequence token.
pub const EOS_ID: usize = 1;
/// Reserved id of the unknown-word token.
pub const UNK_ID: usize = 2;

pub const SOS_TOKEN: &str = "<SOS>";
pub const EOS_TOKEN: &str = "<EOS>";
pub const UNK_TOKEN: &str = "<UNK>";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus file {path}: {source}")]
    FileRead {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line_no} of {path}: expected exactly one TAB separating two fields")]
    MalformedLine { path: PathBuf, line_no: usize },
    #[error("corpus contains no usable sentence pairs")]
    EmptyCorpus,
    #[error("id {id} out of range for vocabulary of {n_words} words")]
    IdOutOfRange { id: usize, n_words: usize },
}

/// Which side of a sentence pair a vocabulary indexes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Source,
    Target,
}

/// One normalized parallel sentence pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentencePair {
    pub source: Vec<String>,
    pub target: Vec<String>,
    /// 1-based line number in the corpus file.
    pub line_no: usize,
}

impl SentencePair {
    pub fn side(&self, side: Side) -> &[String] {
        match side {
            Side::Source => &self.source,
            Side::Target => &self.target,
        }
    }
}

/// Word/index dictionary for one language side.
///
/// Ids 0, 1 and 2 are reserved for SOS, EOS and UNK in that order;
/// real words are assigned ids in first-occurrence order, which makes
/// vocabulary construction deterministic for a given pair list.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    word_to_index: HashMap<String, usize>,
    index_to_word: Vec<String>,
    counts: std::collections::BTreeMap<String, u64>,
}

impl Vocabulary {
    fn with_reserved() -> Self {
        let reserved = [SOS_TOKEN, EOS_TOKEN, UNK_TOKEN];
        let mut word_to_index = HashMap::new();
        let mut index_to_word = Vec::new();
        for token in reserved {
            word_to_index.insert(token.to_string(), index_to_word.len());
            index_to_word.push(token.to_string());
        }
        Self {
            word_to_index,
            index_to_word,
            counts: Default::default(),
        }
    }

    fn observe(&mut self, word: &str) {
        if !self.word_to_index.contains_key(word) {
            self.word_to_index
                .insert(word.to_string(), self.index_to_word.len());
            self.index_to_word.push(word.to_string());
        }
        *self.counts.entry(word.to_string()).or_insert(0) += 1;
    }

    /// Rebuilds a vocabulary from its serialized parts, restoring the
    /// word-to-index map. Fails if the reserved prefix is missing or a
    /// word repeats.
    pub fn from_parts(
        index_to_word: Vec<String>,
        counts: std::collections::BTreeMap<String, u64>,
    ) -> Option<Self> {
        if index_to_word.len() < 3
            || index_to_word[SOS_ID] != SOS_TOKEN
            || index_to_word[EOS_ID] != EOS_TOKEN
            || index_to_word[UNK_ID] != UNK_TOKEN
        {
            return None;
        }
        let mut word_to_index = HashMap::new();
        for (i, w) in index_to_word.iter().enumerate() {
            if word_to_index.insert(w.clone(), i).is_some() {
                return None;
            }
        }
        Some(Self {
            word_to_index,
            index_to_word,
            counts,
        })
    }

    /// Total number of indexed words, reserved tokens included.
    pub fn n_words(&self) -> usize {
        self.index_to_word.len()
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.word_to_index.get(word).copied()
    }

    pub fn word(&self, id: usize) -> Option<&str> {
        self.index_to_word.get(id).map(String::as_str)
    }

    pub fn count(&self, word: &str) -> u64 {
        self.counts.get(word).copied().unwrap_or(0)
    }

    pub fn index_to_word(&self) -> &[String] {
        &self.index_to_word
    }

    pub fn counts(&self) -> &std::collections::BTreeMap<String, u64> {
        &self.counts
    }
}

/// Ingestion counters for one `load_pairs` call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub pairs_read: usize,
    pub pairs_kept: usize,
    pub max_len: usize,
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "read {} pairs, kept {} (max {} tokens per side)",
            self.pairs_read, self.pairs_kept, self.max_len
        )
    }
}

/// Folds text to the working alphabet: lowercase ASCII letters plus
/// `.` `!` `?` as standalone tokens.
///
/// Diacritics are folded to their ASCII base letters via NFD
/// decomposition with combining marks dropped; letters that have no
/// ASCII base (CJK, Greek, ...) are dropped; every other non-letter
/// becomes a space; whitespace runs collapse to single spaces. The
/// function is total and idempotent.
pub fn normalize_text(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for c in raw.nfd() {
        if is_combining_mark(c) {
            continue;
        }
        if c.is_ascii_alphabetic() {
            out.push(c.to_ascii_lowercase());
        } else if c == '.' || c == '!' || c == '?' {
            out.push(' ');
            out.push(c);
            out.push(' ');
        } else if c.is_alphabetic() {
            // No ASCII base letter to fold onto.
        } else {
            out.push(' ');
        }
    }
    let mut collapsed = String::with_capacity(out.len());
    let mut last_space = true;
    for c in out.chars() {
        if c == ' ' {
            if !last_space {
                collapsed.push(' ');
            }
            last_space = true;
        } else {
            collapsed.push(c);
            last_space = false;
        }
    }
    while collapsed.ends_with(' ') {
        collapsed.pop();
    }
    collapsed
}

fn tokens_of(normalized: &str) -> Vec<String> {
    normalized.split_whitespace().map(str::to_string).collect()
}

/// Loads TAB-separated sentence pairs, normalizing both sides and
/// dropping pairs with an empty side or more than `max_len` tokens on
/// either side. `reverse` swaps source and target.
pub fn load_pairs(
    path: &Path,
    max_len: usize,
    reverse: bool,
) -> Result<(Vec<SentencePair>, CorpusStats), CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::FileRead {
        path: path.to_path_buf(),
        source,
    })?;
    parse_pairs(&text, path, max_len, reverse)
}

fn parse_pairs(
    text: &str,
    path: &Path,
    max_len: usize,
    reverse: bool,
) -> Result<(Vec<SentencePair>, CorpusStats), CorpusError> {
    let mut pairs = Vec::new();
    let mut pairs_read = 0;
    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw_line.strip_suffix('\r').unwrap_or(raw_line);
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let (first, second) = match (fields.next(), fields.next(), fields.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => {
                return Err(CorpusError::MalformedLine {
                    path: path.to_path_buf(),
                    line_no,
                })
            }
        };
        pairs_read += 1;

        let (src_raw, tgt_raw) = if reverse {
            (second, first)
        } else {
            (first, second)
        };
        let source = tokens_of(&normalize_text(src_raw));
        let target = tokens_of(&normalize_text(tgt_raw));
        if source.is_empty()
            || target.is_empty()
            || source.len() > max_len
            || target.len() > max_len
        {
            continue;
        }
        pairs.push(SentencePair {
            source,
            target,
            line_no,
        });
    }
    let stats = CorpusStats {
        pairs_read,
        pairs_kept: pairs.len(),
        max_len,
    };
    Ok((pairs, stats))
}

/// Indexes every word of the chosen side in first-occurrence order.
pub fn build_vocabulary(pairs: &[SentencePair], side: Side) -> Result<Vocabulary, CorpusError> {
    if pairs.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let mut vocab = Vocabulary::with_reserved();
    for pair in pairs {
        for word in pair.side(side) {
            vocab.observe(word);
        }
    }
    Ok(vocab)
}

/// Maps tokens to ids, substituting UNK for unseen words, and appends
/// EOS as the final element.
pub fn encode_sentence(vocab: &Vocabulary, sentence: &[String]) -> Vec<usize> {
    let mut ids: Vec<usize> = sentence
        .iter()
        .map(|w| vocab.index_of(w).unwrap_or(UNK_ID))
        .collect();
    ids.push(EOS_ID);
    ids
}

/// Inverse of [`encode_sentence`] on known tokens; SOS and EOS ids are
/// omitted from the output.
pub fn decode_ids(vocab: &Vocabulary, ids: &[usize]) -> Result<Vec<String>, CorpusError> {
    let mut words = Vec::with_capacity(ids.len());
    for &id in ids {
        let word = vocab.word(id).ok_or(CorpusError::IdOutOfRange {
            id,
            n_words: vocab.n_words(),
        })?;
        if id == SOS_ID || id == EOS_ID {
            continue;
        }
        words.push(word.to_string());
    }
    Ok(words)
}
