//! Text preprocessing and letter-trigram word hashing.
//!
//! Words are lowercased, whitespace-split tokens. Each token is padded with a
//! `#` boundary marker on both sides and broken into overlapping character
//! triples; a sentence becomes one sparse count vector per token. The fixed
//! word-hashing operator is never materialized as a matrix: [`TrigramDict`] maps
//! each trigram to a dense column index and [`SparseVec`] carries the counts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

pub const BOUNDARY: char = '#';

/// A preprocessed word: lowercase, non-empty, whitespace-free.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Token(String);

impl Token {
    /// Lowercases `raw`; returns `None` for empty input or input containing whitespace.
    pub fn new(raw: &str) -> Option<Token> {
        if raw.is_empty() || raw.chars().any(char::is_whitespace) {
            return None;
        }
        Some(Token(raw.to_lowercase()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Whitespace tokenization with lowercasing. Numbers are kept, nothing is stemmed.
pub fn tokenize(text: &str) -> Vec<Token> {
    text.split_whitespace().filter_map(Token::new).collect()
}

/// All consecutive character triples of `#token#`, in order, duplicates kept.
pub fn trigrams(token: &Token) -> Vec<String> {
    let padded: Vec<char> = std::iter::once(BOUNDARY)
        .chain(token.as_str().chars())
        .chain(std::iter::once(BOUNDARY))
        .collect();
    padded.windows(3).map(|w| w.iter().collect()).collect()
}

/// Trigram to dense index map, indexed in lexicographic order of the trigram strings.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrigramDict {
    entries: BTreeMap<String, usize>,
}

impl TrigramDict {
    /// Collects the distinct trigrams of every token in `corpus`.
    pub fn build<I, S>(corpus: I) -> Result<TrigramDict>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut seen = BTreeSet::new();
        for text in corpus {
            for token in tokenize(text.as_ref()) {
                seen.extend(trigrams(&token));
            }
        }
        if seen.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        Ok(TrigramDict::from_sorted(seen))
    }

    fn from_sorted(sorted: BTreeSet<String>) -> TrigramDict {
        let entries = sorted.into_iter().enumerate().map(|(i, t)| (t, i)).collect();
        TrigramDict { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn index_of(&self, trigram: &str) -> Option<usize> {
        self.entries.get(trigram).copied()
    }

    /// Trigrams in index order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.entries.iter().map(|(t, &i)| (t.as_str(), i))
    }

    /// Sparse count vector for a single token; out-of-dictionary trigrams are dropped.
    pub fn hash_token(&self, token: &Token) -> SparseVec {
        let mut counts: BTreeMap<usize, u32> = BTreeMap::new();
        for tri in trigrams(token) {
            if let Some(idx) = self.index_of(&tri) {
                *counts.entry(idx).or_default() += 1;
            }
        }
        SparseVec {
            pairs: counts.into_iter().collect(),
            dim: self.dim(),
        }
    }

    /// One sparse vector per token of `text`.
    pub fn hash_sentence(&self, text: &str) -> Result<TrigramSequence> {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(Error::EmptySentence);
        }
        TrigramSequence::new(tokens.iter().map(|t| self.hash_token(t)).collect())
    }

    /// Writes `trigram<TAB>index` lines in index order.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        for (tri, idx) in self.iter() {
            writeln!(out, "{tri}\t{idx}")?;
        }
        Ok(())
    }

    /// Reads the TSV written by [`TrigramDict::write_tsv`], checking that indices
    /// are exactly `0..dim` in lexicographic trigram order.
    pub fn read_tsv<R: BufRead>(input: R, source: &str) -> Result<TrigramDict> {
        let mut entries = BTreeMap::new();
        let mut prev: Option<String> = None;
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            let lineno = n + 1;
            if line.is_empty() {
                continue;
            }
            let (tri, idx) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(source, lineno, "expected trigram<TAB>index"))?;
            if tri.chars().count() != 3 {
                return Err(Error::parse(source, lineno, format!("{tri:?} is not a trigram")));
            }
            let idx: usize = idx
                .parse()
                .map_err(|_| Error::parse(source, lineno, format!("bad index {idx:?}")))?;
            if idx != entries.len() {
                return Err(Error::parse(
                    source,
                    lineno,
                    format!("index {idx} out of sequence, expected {}", entries.len()),
                ));
            }
            if prev.as_deref().is_some_and(|p| p >= tri) {
                return Err(Error::parse(source, lineno, "trigrams not in lexicographic order"));
            }
            prev = Some(tri.to_string());
            entries.insert(tri.to_string(), idx);
        }
        if entries.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        Ok(TrigramDict { entries })
    }
}

/// Sparse trigram counts for one word: strictly increasing indices, counts ≥ 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparseVec {
    pairs: Vec<(usize, u32)>,
    dim: usize,
}

impl SparseVec {
    /// Validates the ordering and range invariants.
    pub fn new(pairs: Vec<(usize, u32)>, dim: usize) -> Result<SparseVec> {
        let increasing = pairs.windows(2).all(|w| w[0].0 < w[1].0);
        let in_range = pairs.iter().all(|&(i, c)| i < dim && c >= 1);
        if !increasing || !in_range {
            return Err(Error::DimMismatch(format!(
                "sparse vector pairs must be strictly increasing, < {dim}, with counts >= 1"
            )));
        }
        Ok(SparseVec { pairs, dim })
    }

    pub fn pairs(&self) -> &[(usize, u32)] {
        &self.pairs
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn total(&self) -> u32 {
        self.pairs.iter().map(|&(_, c)| c).sum()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for &(i, c) in &self.pairs {
            v[i] = f64::from(c);
        }
        v
    }
}

/// A hashed sentence: one [`SparseVec`] per word, all of the same dimension.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrigramSequence {
    vectors: Vec<SparseVec>,
}

impl TrigramSequence {
    pub fn new(vectors: Vec<SparseVec>) -> Result<TrigramSequence> {
        let Some(first) = vectors.first() else {
            return Err(Error::DimMismatch("sequence must contain at least one word".into()));
        };
        let dim = first.dim();
        if vectors.iter().any(|v| v.dim() != dim) {
            return Err(Error::DimMismatch("sequence members differ in dimension".into()));
        }
        Ok(TrigramSequence { vectors })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].dim()
    }

    pub fn words(&self) -> &[SparseVec] {
        &self.vectors
    }

    pub fn reversed(&self) -> TrigramSequence {
        TrigramSequence {
            vectors: self.vectors.iter().rev().cloned().collect(),
        }
    }

    /// The first `k` words (`1 <= k <= len`).
    pub fn prefix(&self, k: usize) -> TrigramSequence {
        assert!(k >= 1 && k <= self.len());
        TrigramSequence {
            vectors: self.vectors[..k].to_vec(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tok(s: &str) -> Token {
        Token::new(s).unwrap()
    }

    #[test]
    fn tokenize_lowercases_and_splits() {
        let words: Vec<_> = tokenize("Hotels IN Shanghai").iter().map(|t| t.to_string()).collect();
        assert_eq!(words, ["hotels", "in", "shanghai"]);
        assert!(tokenize("").is_empty());
        assert!(tokenize(" \t\n").is_empty());
        let words: Vec<_> = tokenize("room 101").iter().map(|t| t.to_string()).collect();
        assert_eq!(words, ["room", "101"]);
    }

    #[test]
    fn token_rejects_whitespace() {
        assert!(Token::new("a b").is_none());
        assert!(Token::new("").is_none());
        assert_eq!(tok("ÄBC").as_str(), "äbc");
    }

    #[test]
    fn trigram_windows() {
        assert_eq!(trigrams(&tok("cat")), ["#ca", "cat", "at#"]);
        assert_eq!(trigrams(&tok("a")), ["#a#"]);
        assert_eq!(trigrams(&tok("aaa")), ["#aa", "aaa", "aa#"]);
    }

    #[test]
    fn dict_is_lexicographic() {
        let dict = TrigramDict::build(["cat"]).unwrap();
        let entries: Vec<_> = dict.iter().collect();
        assert_eq!(entries, [("#ca", 0), ("at#", 1), ("cat", 2)]);
        assert_eq!(dict.dim(), 3);
        assert_eq!(TrigramDict::build(["cat", "cat"]).unwrap(), dict);
        assert_eq!(TrigramDict::build(["cat dog"]).unwrap(), TrigramDict::build(["dog", "cat"]).unwrap());
    }

    #[test]
    fn empty_corpus() {
        assert!(matches!(TrigramDict::build(Vec::<&str>::new()), Err(Error::EmptyCorpus)));
        assert!(matches!(TrigramDict::build(["", "  "]), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn hash_sentence_counts() {
        let dict = TrigramDict::build(["cat"]).unwrap();
        let seq = dict.hash_sentence("cat").unwrap();
        assert_eq!(seq.len(), 1);
        assert_eq!(seq.words()[0].pairs(), &[(0, 1), (1, 1), (2, 1)]);

        let oov = dict.hash_sentence("dog").unwrap();
        assert_eq!(oov.len(), 1);
        assert!(oov.words()[0].pairs().is_empty());

        let twice = dict.hash_sentence("cat cat").unwrap();
        assert_eq!(twice.words()[0], twice.words()[1]);

        assert!(matches!(dict.hash_sentence("   "), Err(Error::EmptySentence)));
    }

    #[test]
    fn repeated_trigrams_are_counted() {
        let dict = TrigramDict::build(["aaaa"]).unwrap();
        let seq = dict.hash_sentence("aaaa").unwrap();
        // #aa, aaa, aaa, aa#
        assert_eq!(seq.words()[0].total(), 4);
        let aaa = dict.index_of("aaa").unwrap();
        assert!(seq.words()[0].pairs().contains(&(aaa, 2)));
    }

    #[test]
    fn dict_tsv_roundtrip_and_validation() {
        let dict = TrigramDict::build(["hotels in shanghai"]).unwrap();
        let mut buf = Vec::new();
        dict.write_tsv(&mut buf).unwrap();
        let back = TrigramDict::read_tsv(buf.as_slice(), "mem").unwrap();
        assert_eq!(back, dict);

        let gap = "#ca\t0\ncat\t2\n";
        assert!(matches!(
            TrigramDict::read_tsv(gap.as_bytes(), "mem"),
            Err(Error::Parse { line: 2, .. })
        ));
        let unsorted = "cat\t0\n#ca\t1\n";
        assert!(TrigramDict::read_tsv(unsorted.as_bytes(), "mem").is_err());
    }

    #[test]
    fn sparse_vec_invariants() {
        assert!(SparseVec::new(vec![(0, 1), (2, 3)], 3).is_ok());
        assert!(SparseVec::new(vec![(2, 1), (0, 3)], 3).is_err());
        assert!(SparseVec::new(vec![(3, 1)], 3).is_err());
        assert!(SparseVec::new(vec![(0, 0)], 3).is_err());
        assert!(TrigramSequence::new(vec![]).is_err());
    }
}
