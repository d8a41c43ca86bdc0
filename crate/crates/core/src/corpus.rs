//! Click-through and judgment files, and a seeded synthetic corpus generator
//! with planted topic keywords.
//!
//! File formats (UTF-8, one record per line):
//!
//! * clicks: `query<TAB>document_title`
//! * judgments: `query<TAB>document<TAB>grade` with grade in `0..=3`
//!   (Bad, Fair, Good, Excellent)

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::texthash::tokenize;

/// A query and the document title that was clicked for it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClickRecord {
    pub query: String,
    pub clicked_doc: String,
}

impl ClickRecord {
    pub fn new(query: impl Into<String>, clicked_doc: impl Into<String>) -> Result<ClickRecord> {
        let r = ClickRecord {
            query: query.into(),
            clicked_doc: clicked_doc.into(),
        };
        if tokenize(&r.query).is_empty() || tokenize(&r.clicked_doc).is_empty() {
            return Err(Error::EmptySentence);
        }
        Ok(r)
    }
}

/// Graded relevance of one document for one query.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub query: String,
    pub doc: String,
    /// 0 = Bad, 1 = Fair, 2 = Good, 3 = Excellent.
    pub grade: u8,
}

pub const MAX_GRADE: u8 = 3;

fn fields<'a>(line: &'a str, path: &str, lineno: usize, expected: usize) -> Result<Vec<&'a str>> {
    let parts: Vec<&str> = line.split('\t').collect();
    if parts.len() != expected {
        return Err(Error::parse(
            path,
            lineno,
            format!("expected {expected} tab-separated fields, found {}", parts.len()),
        ));
    }
    for (i, p) in parts.iter().enumerate().take(2) {
        if tokenize(p).is_empty() {
            return Err(Error::parse(path, lineno, format!("field {} has no tokens", i + 1)));
        }
    }
    Ok(parts)
}

fn for_each_line<R: BufRead>(
    input: R,
    mut f: impl FnMut(usize, &str) -> Result<()>,
) -> Result<()> {
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        f(n + 1, line)?;
    }
    Ok(())
}

pub fn parse_clicks<R: BufRead>(input: R, source: &str) -> Result<Vec<ClickRecord>> {
    let mut out = Vec::new();
    for_each_line(input, |lineno, line| {
        let p = fields(line, source, lineno, 2)?;
        out.push(ClickRecord {
            query: p[0].to_string(),
            clicked_doc: p[1].to_string(),
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn parse_judgments<R: BufRead>(input: R, source: &str) -> Result<Vec<Judgment>> {
    let mut out = Vec::new();
    for_each_line(input, |lineno, line| {
        let p = fields(line, source, lineno, 3)?;
        let grade: u8 = p[2]
            .trim()
            .parse()
            .ok()
            .filter(|g| *g <= MAX_GRADE)
            .ok_or_else(|| Error::parse(source, lineno, format!("grade {:?} not in 0..=3", p[2])))?;
        out.push(Judgment {
            query: p[0].to_string(),
            doc: p[1].to_string(),
            grade,
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn read_clicks(path: &Path) -> Result<Vec<ClickRecord>> {
    let file = crate::error::open(path)?;
    parse_clicks(BufReader::new(file), &path.display().to_string())
}

pub fn read_judgments(path: &Path) -> Result<Vec<Judgment>> {
    let file = crate::error::open(path)?;
    parse_judgments(BufReader::new(file), &path.display().to_string())
}

pub fn write_clicks<W: Write>(mut out: W, records: &[ClickRecord]) -> Result<()> {
    for r in records {
        writeln!(out, "{}\t{}", r.query, r.clicked_doc)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_judgments<W: Write>(mut out: W, judgments: &[Judgment]) -> Result<()> {
    for j in judgments {
        writeln!(out, "{}\t{}\t{}", j.query, j.doc, j.grade)?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_clicks(path: &Path, records: &[ClickRecord]) -> Result<()> {
    write_clicks(BufWriter::new(File::create(path)?), records)
}

pub fn save_judgments(path: &Path, judgments: &[Judgment]) -> Result<()> {
    write_judgments(BufWriter::new(File::create(path)?), judgments)
}

/// Parameters of the synthetic click-through generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_topics: usize,
    /// Keywords planted per topic; topic vocabularies are disjoint.
    pub vocab_per_topic: usize,
    /// Topic-neutral filler words shared by all topics.
    pub filler_vocab: usize,
    pub n_records: usize,
    /// Inclusive word-count range of queries.
    pub query_len: (usize, usize),
    /// Inclusive word-count range of documents.
    pub doc_len: (usize, usize),
    /// Probability that a free word slot holds a topic keyword rather than filler.
    pub keyword_rate: f64,
    /// Held-out queries that receive graded candidate lists.
    pub judgment_queries: usize,
    /// Candidates generated per grade for each judged query.
    pub docs_per_grade: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_topics: 2,
            vocab_per_topic: 30,
            filler_vocab: 140,
            n_records: 500,
            query_len: (2, 4),
            doc_len: (4, 8),
            keyword_rate: 0.5,
            judgment_queries: 200,
            docs_per_grade: 2,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::SpecInvalid(m.to_string()));
        if self.n_topics == 0 || self.vocab_per_topic == 0 || self.filler_vocab == 0 {
            return bad("topic, keyword and filler counts must be >= 1");
        }
        if self.n_records == 0 || self.judgment_queries == 0 || self.docs_per_grade == 0 {
            return bad("record, judgment-query and per-grade counts must be >= 1");
        }
        if self.query_len.0 == 0 || self.query_len.0 > self.query_len.1 {
            return bad("query length range must be nonempty and start at >= 1");
        }
        if self.doc_len.0 == 0 || self.doc_len.0 > self.doc_len.1 {
            return bad("document length range must be nonempty and start at >= 1");
        }
        if !(0.0..=1.0).contains(&self.keyword_rate) {
            return bad("keyword_rate must lie in [0, 1]");
        }
        Ok(())
    }
}

/// Planted vocabulary: `topics[t]` lists topic `t`'s keywords.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub topics: Vec<Vec<String>>,
    pub filler: Vec<String>,
}

impl GroundTruth {
    /// Topic of a planted keyword, if it is one.
    pub fn topic_of(&self, word: &str) -> Option<usize> {
        self.topics.iter().position(|kw| kw.iter().any(|k| k == word))
    }

    pub fn is_keyword(&self, word: &str) -> bool {
        self.topic_of(word).is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCorpus {
    pub clicks: Vec<ClickRecord>,
    pub judgments: Vec<Judgment>,
    pub truth: GroundTruth,
}

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

/// Distinct consonant-vowel words of two or three syllables.
fn pronounceable_words<R: Rng>(count: usize, rng: &mut R) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let syllables = rng.random_range(2..=3);
        let mut w = String::with_capacity(2 * syllables);
        for _ in 0..syllables {
            w.push(*CONSONANTS.choose(rng).expect("nonempty") as char);
            w.push(*VOWELS.choose(rng).expect("nonempty") as char);
        }
        if seen.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

struct Generator<'a> {
    spec: &'a SyntheticSpec,
    truth: &'a GroundTruth,
}

impl Generator<'_> {
    fn fill<R: Rng>(&self, topic: usize, slots: usize, exclude: &[&str], rng: &mut R) -> Vec<String> {
        let keywords: Vec<&String> = self.truth.topics[topic]
            .iter()
            .filter(|k| !exclude.contains(&k.as_str()))
            .collect();
        (0..slots)
            .map(|_| {
                if !keywords.is_empty() && rng.random_bool(self.spec.keyword_rate) {
                    keywords.choose(rng).expect("nonempty").to_string()
                } else {
                    self.truth.filler.choose(rng).expect("nonempty").clone()
                }
            })
            .collect()
    }

    /// Query of `topic` with at least one keyword.
    fn query<R: Rng>(&self, topic: usize, rng: &mut R) -> Vec<String> {
        let len = rng.random_range(self.spec.query_len.0..=self.spec.query_len.1);
        let mut words = vec![self.truth.topics[topic].choose(rng).expect("nonempty").clone()];
        words.extend(self.fill(topic, len - 1, &[], rng));
        words.shuffle(rng);
        words
    }

    /// Document of `topic` that contains `must`, and no keyword of `avoid`.
    fn document<R: Rng>(
        &self,
        topic: usize,
        must: Option<&str>,
        avoid: &[&str],
        rng: &mut R,
    ) -> Vec<String> {
        let len = rng.random_range(self.spec.doc_len.0..=self.spec.doc_len.1);
        let mut words = Vec::with_capacity(len);
        if let Some(m) = must {
            words.push(m.to_string());
        }
        let free = len.saturating_sub(words.len());
        words.extend(self.fill(topic, free, avoid, rng));
        words.shuffle(rng);
        words
    }
}

/// Rubric grade of `doc` for `query`: 3 = same topic with a shared keyword,
/// 2 = same topic, 1 = shares a filler word, 0 = disjoint.
pub fn rubric_grade(
    truth: &GroundTruth,
    query: &[String],
    query_topic: usize,
    doc: &[String],
    doc_topic: usize,
) -> u8 {
    let shares = |pred: &dyn Fn(&str) -> bool| doc.iter().any(|d| pred(d) && query.contains(d));
    if doc_topic == query_topic {
        if shares(&|w| truth.is_keyword(w)) {
            3
        } else {
            2
        }
    } else if shares(&|w| !truth.is_keyword(w)) {
        1
    } else {
        0
    }
}

/// Generates click records, held-out graded judgments and the planted vocabulary.
pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let mut vocab_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let vocab_size = spec.n_topics * spec.vocab_per_topic + spec.filler_vocab;
    let mut vocab = pronounceable_words(vocab_size, &mut vocab_rng);
    let filler = vocab.split_off(spec.n_topics * spec.vocab_per_topic);
    let topics: Vec<Vec<String>> = vocab.chunks(spec.vocab_per_topic).map(<[String]>::to_vec).collect();
    let truth = GroundTruth { topics, filler };
    let g = Generator { spec, truth: &truth };

    let mut click_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    click_rng.set_stream(1);
    let mut clicks = Vec::with_capacity(spec.n_records);
    for _ in 0..spec.n_records {
        let topic = click_rng.random_range(0..spec.n_topics);
        let query = g.query(topic, &mut click_rng);
        let query_keywords: Vec<&String> = query.iter().filter(|w| truth.is_keyword(w)).collect();
        let shared = query_keywords.choose(&mut click_rng).expect("queries carry a keyword");
        let doc = g.document(topic, Some(shared), &[], &mut click_rng);
        clicks.push(ClickRecord {
            query: query.join(" "),
            clicked_doc: doc.join(" "),
        });
    }

    let mut judge_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    judge_rng.set_stream(2);
    let mut judgments = Vec::new();
    for _ in 0..spec.judgment_queries {
        let topic = judge_rng.random_range(0..spec.n_topics);
        let query = g.query(topic, &mut judge_rng);
        let q_keywords: Vec<&str> =
            query.iter().map(String::as_str).filter(|w| truth.is_keyword(w)).collect();
        let q_filler: Vec<&str> =
            query.iter().map(String::as_str).filter(|w| !truth.is_keyword(w)).collect();
        let mut candidates: Vec<(Vec<String>, usize)> = Vec::new();
        for _ in 0..spec.docs_per_grade {
            let shared = q_keywords.choose(&mut judge_rng).copied();
            candidates.push((g.document(topic, shared, &[], &mut judge_rng), topic));
            candidates.push((g.document(topic, None, &q_keywords, &mut judge_rng), topic));
            if spec.n_topics > 1 {
                let mut other = judge_rng.random_range(0..spec.n_topics - 1);
                if other >= topic {
                    other += 1;
                }
                let filler_word = q_filler.choose(&mut judge_rng).copied();
                if filler_word.is_some() {
                    candidates.push((g.document(other, filler_word, &q_filler, &mut judge_rng), other));
                }
                let plain = g
                    .document(other, None, &[], &mut judge_rng)
                    .into_iter()
                    .map(|w| {
                        if query.contains(&w) {
                            truth.topics[other].choose(&mut judge_rng).expect("nonempty").clone()
                        } else {
                            w
                        }
                    })
                    .collect();
                candidates.push((plain, other));
            }
        }
        for (doc, doc_topic) in candidates {
            let grade = rubric_grade(&truth, &query, topic, &doc, doc_topic);
            judgments.push(Judgment {
                query: query.join(" "),
                doc: doc.join(" "),
                grade,
            });
        }
    }

    Ok(SyntheticCorpus {
        clicks,
        judgments,
        truth,
    })
}

/// Writes `clicks.tsv`, `judgments.tsv` and `truth.json` into `dir`.
pub fn save_corpus(dir: &Path, corpus: &SyntheticCorpus) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    save_clicks(&dir.join("clicks.tsv"), &corpus.clicks)?;
    save_judgments(&dir.join("judgments.tsv"), &corpus.judgments)?;
    let mut f = BufWriter::new(File::create(dir.join("truth.json"))?);
    serde_json::to_writer_pretty(&mut f, &corpus.truth)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

/// Groups judgments by query, preserving first-appearance order of queries and
/// file order of documents.
pub fn group_by_query(judgments: &[Judgment]) -> Vec<(String, Vec<(String, u8)>)> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, Vec<(String, u8)>> = BTreeMap::new();
    for j in judgments {
        groups
            .entry(j.query.clone())
            .or_insert_with(|| {
                order.push(j.query.clone());
                Vec::new()
            })
            .push((j.doc.clone(), j.grade));
    }
    order
        .into_iter()
        .map(|q| {
            let docs = groups.remove(&q).unwrap_or_default();
            (q, docs)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let spec = SyntheticSpec { n_records: 50, judgment_queries: 5, ..SyntheticSpec::default() };
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        let other = SyntheticSpec { seed: 1, ..spec.clone() };
        assert_ne!(generate(&spec).unwrap().clicks, generate(&other).unwrap().clicks);
    }

    #[test]
    fn clicked_docs_share_a_keyword() {
        let corpus = generate(&SyntheticSpec::default()).unwrap();
        assert_eq!(corpus.clicks.len(), 500);
        for r in &corpus.clicks {
            let q: BTreeSet<&str> = r.query.split(' ').collect();
            assert!(r
                .clicked_doc
                .split(' ')
                .any(|w| q.contains(w) && corpus.truth.is_keyword(w)));
        }
    }

    #[test]
    fn keyword_vocabularies_are_disjoint() {
        let corpus = generate(&SyntheticSpec::default()).unwrap();
        let t = &corpus.truth;
        let mut all = BTreeSet::new();
        for w in t.topics.iter().flatten().chain(&t.filler) {
            assert!(all.insert(w.clone()), "{w} planted twice");
        }
        for (topic, kws) in t.topics.iter().enumerate() {
            for k in kws {
                assert_eq!(t.topic_of(k), Some(topic));
            }
        }
    }

    #[test]
    fn single_topic_grades_are_at_least_two() {
        let spec = SyntheticSpec { n_topics: 1, judgment_queries: 10, ..SyntheticSpec::default() };
        let corpus = generate(&spec).unwrap();
        assert!(corpus.judgments.iter().all(|j| j.grade >= 2));
        assert!(corpus.judgments.iter().any(|j| j.grade == 3));
    }

    #[test]
    fn every_grade_is_produced() {
        let corpus = generate(&SyntheticSpec::default()).unwrap();
        for g in 0..=3 {
            assert!(corpus.judgments.iter().any(|j| j.grade == g), "no grade {g}");
        }
    }

    #[test]
    fn invalid_specs() {
        let bad = SyntheticSpec { n_topics: 0, ..SyntheticSpec::default() };
        assert!(matches!(generate(&bad), Err(Error::SpecInvalid(_))));
        let bad = SyntheticSpec { query_len: (3, 2), ..SyntheticSpec::default() };
        assert!(generate(&bad).is_err());
        let bad = SyntheticSpec { keyword_rate: 1.5, ..SyntheticSpec::default() };
        assert!(generate(&bad).is_err());
    }

    #[test]
    fn click_file_roundtrip_and_errors() {
        let records = vec![
            ClickRecord::new("hotels in shanghai", "shanghai hotels discount").unwrap(),
            ClickRecord::new("room 101", "room rates").unwrap(),
        ];
        let mut buf = Vec::new();
        write_clicks(&mut buf, &records).unwrap();
        assert_eq!(parse_clicks(buf.as_slice(), "mem").unwrap(), records);

        let bad = "a\tb\nonlyone\n";
        match parse_clicks(bad.as_bytes(), "mem") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(parse_clicks("q\t  \n".as_bytes(), "mem").is_err());
    }

    #[test]
    fn judgment_file_roundtrip_and_grade_range() {
        let js = vec![
            Judgment { query: "a b".into(), doc: "c".into(), grade: 0 },
            Judgment { query: "a b".into(), doc: "d e".into(), grade: 3 },
        ];
        let mut buf = Vec::new();
        write_judgments(&mut buf, &js).unwrap();
        assert_eq!(parse_judgments(buf.as_slice(), "mem").unwrap(), js);
        match parse_judgments("q\td\t4\n".as_bytes(), "mem") {
            Err(Error::Parse { line: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(parse_judgments("q\td\tx\n".as_bytes(), "mem").is_err());
    }

    #[test]
    fn grouping_keeps_order() {
        let js = vec![
            Judgment { query: "z".into(), doc: "1".into(), grade: 1 },
            Judgment { query: "a".into(), doc: "2".into(), grade: 2 },
            Judgment { query: "z".into(), doc: "3".into(), grade: 3 },
        ];
        let g = group_by_query(&js);
        assert_eq!(g[0].0, "z");
        assert_eq!(g[0].1, vec![("1".to_string(), 1), ("3".to_string(), 3)]);
        assert_eq!(g[1].0, "a");
    }
}
