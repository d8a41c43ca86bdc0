//! Cosine ranking of candidate documents and NDCG@k against graded judgments.
//!
//! Gain is `2^grade − 1`, the discount at 1-based rank `i` is `log2(i + 1)`, and a
//! query whose ideal DCG is zero (every candidate graded Bad) scores 0.

use std::io::{BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

pub use crate::corpus::Judgment;
use crate::corpus::group_by_query;
use crate::error::{Error, Result};
use crate::model::{checkpoint, Encoder, Side};
use crate::objective::cosine;
use crate::texthash::TrigramDict;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankedDoc {
    pub doc: String,
    /// Cosine similarity to the query, or −∞ when unscorable.
    pub score: f64,
    /// False when the document embedding has zero norm.
    pub scorable: bool,
    /// Position among the candidates as given.
    pub input_index: usize,
}

/// Candidates ordered by descending score; equal scores keep input order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankedList {
    pub query: String,
    pub docs: Vec<RankedDoc>,
}

/// Indices of `scores` by descending score, stable on ties.
pub fn order_by_score(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// A trained query/document encoder pair with its dictionary.
#[derive(Clone, Debug)]
pub struct Ranker {
    pub dict: TrigramDict,
    pub query: Encoder,
    pub doc: Encoder,
}

impl Ranker {
    pub fn new(dict: TrigramDict, query: Encoder, doc: Encoder) -> Result<Ranker> {
        for (side, enc) in [("query", &query), ("document", &doc)] {
            if enc.input_dim() != dict.dim() {
                return Err(Error::DimMismatch(format!(
                    "{side} encoder expects {} trigrams, dictionary has {}",
                    enc.input_dim(),
                    dict.dim()
                )));
            }
        }
        if query.embedding_dim() != doc.embedding_dim() {
            return Err(Error::DimMismatch(format!(
                "query embeddings have {} dims, document embeddings {}",
                query.embedding_dim(),
                doc.embedding_dim()
            )));
        }
        Ok(Ranker { dict, query, doc })
    }

    /// Loads both checkpoints. The dictionary comes from `dict` when given,
    /// otherwise from the path recorded in the query checkpoint.
    pub fn load(checkpoint_q: &Path, checkpoint_d: &Path, dict: Option<&Path>) -> Result<Ranker> {
        let (_, query, dict_q) = checkpoint::load(checkpoint_q)?;
        let (_, doc, _) = checkpoint::load(checkpoint_d)?;
        let dict_path = dict.map(Path::to_path_buf).unwrap_or(dict_q);
        let file = crate::error::open(&dict_path)?;
        let dict = TrigramDict::read_tsv(BufReader::new(file), &dict_path.display().to_string())?;
        Ranker::new(dict, query, doc)
    }

    pub fn encoder(&self, side: Side) -> &Encoder {
        match side {
            Side::Query => &self.query,
            Side::Document => &self.doc,
        }
    }

    pub fn embed(&self, text: &str, side: Side) -> Result<ndarray::Array1<f64>> {
        let seq = self.dict.hash_sentence(text)?;
        Ok(self.encoder(side).embed(&seq, side)?.v)
    }

    /// Ranks `candidates` for `query` by cosine similarity of their embeddings.
    pub fn rank<S: AsRef<str>>(&self, query: &str, candidates: &[S]) -> Result<RankedList> {
        if candidates.is_empty() {
            return Err(Error::Config("no candidate documents to rank".into()));
        }
        let yq = self.embed(query, Side::Query)?;
        if yq.dot(&yq).sqrt() < crate::objective::NORM_EPS {
            return Err(Error::ZeroNorm);
        }
        let mut scored = Vec::with_capacity(candidates.len());
        for c in candidates {
            let yd = self.embed(c.as_ref(), Side::Document)?;
            scored.push(match cosine(yq.view(), yd.view()) {
                Ok(s) => (s, true),
                Err(Error::ZeroNorm) => (f64::NEG_INFINITY, false),
                Err(e) => return Err(e),
            });
        }
        let scores: Vec<f64> = scored.iter().map(|s| s.0).collect();
        let docs = order_by_score(&scores)
            .into_iter()
            .map(|i| RankedDoc {
                doc: candidates[i].as_ref().to_string(),
                score: scored[i].0,
                scorable: scored[i].1,
                input_index: i,
            })
            .collect();
        Ok(RankedList {
            query: query.to_string(),
            docs,
        })
    }
}

fn gain(grade: u8) -> f64 {
    f64::from((1u32 << grade) - 1)
}

/// `Σ_{i=1..min(k,m)} (2^g_i − 1) / log2(i + 1)`.
pub fn dcg_at_k(grades: &[u8], k: usize) -> f64 {
    grades
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| gain(g) / ((i + 2) as f64).log2())
        .sum()
}

/// NDCG@k of a ranked grade sequence; 0 when every grade is 0 or `k` is 0.
pub fn ndcg_at_k(grades: &[u8], k: usize) -> f64 {
    let mut ideal = grades.to_vec();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg = dcg_at_k(&ideal, k);
    if idcg == 0.0 {
        return 0.0;
    }
    dcg_at_k(grades, k) / idcg
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QueryNdcg {
    pub query: String,
    pub ndcg: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NdcgReport {
    pub ks: Vec<usize>,
    pub mean: Vec<f64>,
    pub per_query: Vec<QueryNdcg>,
}

impl NdcgReport {
    fn from_per_query(ks: &[usize], per_query: Vec<QueryNdcg>) -> NdcgReport {
        let n = per_query.len().max(1) as f64;
        let mean = (0..ks.len())
            .map(|i| per_query.iter().map(|q| q.ndcg[i]).sum::<f64>() / n)
            .collect();
        NdcgReport {
            ks: ks.to_vec(),
            mean,
            per_query,
        }
    }

    pub fn mean_at(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|i| self.mean[i])
    }

    /// `k<TAB>mean_ndcg` lines under a header stating the gain, discount and
    /// zero-IDCG convention.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "# gain=2^grade-1 discount=log2(rank+1) idcg0=0 queries={}",
            self.per_query.len()
        )?;
        writeln!(out, "k\tmean_ndcg")?;
        for (k, m) in self.ks.iter().zip(&self.mean) {
            writeln!(out, "{k}\t{m}")?;
        }
        Ok(())
    }

    /// One line per query: the query followed by its NDCG at each k.
    pub fn write_detail_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        let header: Vec<String> = self.ks.iter().map(|k| format!("ndcg@{k}")).collect();
        writeln!(out, "query\t{}", header.join("\t"))?;
        for q in &self.per_query {
            let vals: Vec<String> = q.ndcg.iter().map(f64::to_string).collect();
            writeln!(out, "{}\t{}", q.query, vals.join("\t"))?;
        }
        Ok(())
    }
}

fn check_ks(ks: &[usize]) -> Result<()> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::Config("k values must be >= 1".into()));
    }
    Ok(())
}

/// Ranks each query's judged documents and averages NDCG@k uniformly over queries.
/// Documents without a judgment never enter the ranking.
pub fn mean_ndcg(ranker: &Ranker, judgments: &[Judgment], ks: &[usize]) -> Result<NdcgReport> {
    check_ks(ks)?;
    let groups = group_by_query(judgments);
    if groups.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let per_query = groups
        .par_iter()
        .map(|(query, docs)| {
            let texts: Vec<&str> = docs.iter().map(|d| d.0.as_str()).collect();
            let ranked = ranker.rank(query, &texts)?;
            let grades: Vec<u8> = ranked.docs.iter().map(|d| docs[d.input_index].1).collect();
            Ok(QueryNdcg {
                query: query.clone(),
                ndcg: ks.iter().map(|&k| ndcg_at_k(&grades, k)).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NdcgReport::from_per_query(ks, per_query))
}

/// Expected NDCG@k of a uniformly random ranking, estimated by averaging over
/// `shuffles` permutations of each query's judged documents.
pub fn random_baseline(
    judgments: &[Judgment],
    ks: &[usize],
    shuffles: usize,
    seed: u64,
) -> Result<NdcgReport> {
    check_ks(ks)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut per_query = Vec::new();
    for (query, docs) in group_by_query(judgments) {
        let mut grades: Vec<u8> = docs.iter().map(|d| d.1).collect();
        let mut sums = vec![0.0; ks.len()];
        for _ in 0..shuffles {
            grades.shuffle(&mut rng);
            for (s, &k) in sums.iter_mut().zip(ks) {
                *s += ndcg_at_k(&grades, k);
            }
        }
        per_query.push(QueryNdcg {
            query,
            ndcg: sums.into_iter().map(|s| s / shuffles.max(1) as f64).collect(),
        });
    }
    Ok(NdcgReport::from_per_query(ks, per_query))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Arch, Params, Variant};
    use rand::Rng;

    #[test]
    fn hand_computed_ndcg() {
        let dcg = 1.0 + 7.0 / 3f64.log2();
        let idcg = 7.0 + 1.0 / 3f64.log2();
        assert!((ndcg_at_k(&[1, 3], 3) - dcg / idcg).abs() < 1e-15);
        assert!((ndcg_at_k(&[1, 3], 3) - 0.7098).abs() < 1e-4);
    }

    #[test]
    fn ideal_and_degenerate() {
        assert_eq!(ndcg_at_k(&[3, 2, 2, 1, 0], 10), 1.0);
        assert_eq!(ndcg_at_k(&[0, 0, 0], 3), 0.0);
        assert_eq!(ndcg_at_k(&[], 3), 0.0);
        assert_eq!(ndcg_at_k(&[2, 3], 0), 0.0);
    }

    #[test]
    fn stable_ties() {
        assert_eq!(order_by_score(&[0.5, 0.9, 0.5, 0.9]), vec![1, 3, 0, 2]);
        assert_eq!(order_by_score(&[f64::NEG_INFINITY, 0.1]), vec![1, 0]);
    }

    fn toy_ranker(seed: u64) -> Ranker {
        let dict = TrigramDict::build(["alpha beta gamma delta epsilon"]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = Encoder::random(Arch::Lstm, Variant::Reduced, false, 4, dict.dim(), 0.5, &mut rng);
        let d = Encoder::random(Arch::Lstm, Variant::Reduced, false, 4, dict.dim(), 0.5, &mut rng);
        Ranker::new(dict, q, d).unwrap()
    }

    #[test]
    fn rank_matches_reference_sort() {
        let r = toy_ranker(3);
        let docs = ["alpha beta", "gamma", "delta epsilon alpha", "beta beta", "epsilon"];
        let ranked = r.rank("alpha gamma", &docs).unwrap();
        let yq = r.embed("alpha gamma", Side::Query).unwrap();
        let mut reference: Vec<(f64, usize)> = docs
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let yd = r.embed(d, Side::Document).unwrap();
                (yq.dot(&yd) / (yq.dot(&yq).sqrt() * yd.dot(&yd).sqrt()), i)
            })
            .collect();
        reference.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        let got: Vec<usize> = ranked.docs.iter().map(|d| d.input_index).collect();
        let want: Vec<usize> = reference.iter().map(|x| x.1).collect();
        assert_eq!(got, want);
        for w in ranked.docs.windows(2) {
            assert!(w[0].score >= w[1].score);
        }
    }

    #[test]
    fn single_candidate_and_identical_embedding() {
        let mut r = toy_ranker(5);
        assert_eq!(r.rank("alpha", &["beta"]).unwrap().docs[0].doc, "beta");
        r.doc = r.query.clone();
        let ranked = r.rank("alpha beta", &["gamma", "alpha beta"]).unwrap();
        assert_eq!(ranked.docs[0].doc, "alpha beta");
        assert!((ranked.docs[0].score - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_norm_docs_sort_last() {
        let dict = TrigramDict::build(["alpha beta"]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let q = Encoder::random(Arch::Rnn, Variant::Full, false, 3, dict.dim(), 0.5, &mut rng);
        let d = Encoder::unidirectional(Params::zeros(Arch::Rnn, Variant::Full, 3, dict.dim()));
        let r = Ranker::new(dict.clone(), q.clone(), d).unwrap();
        let ranked = r.rank("alpha", &["beta", "alpha"]).unwrap();
        assert!(ranked.docs.iter().all(|d| !d.scorable && d.score == f64::NEG_INFINITY));
        assert_eq!(ranked.docs[0].input_index, 0);

        let zero_q = Encoder::unidirectional(Params::zeros(Arch::Rnn, Variant::Full, 3, dict.dim()));
        let r = Ranker::new(dict, zero_q, q).unwrap();
        assert!(matches!(r.rank("alpha", &["beta"]), Err(Error::ZeroNorm)));
    }

    #[test]
    fn rank_is_invariant_to_doc_scaling() {
        let r = toy_ranker(11);
        let docs = ["alpha", "beta gamma", "delta", "epsilon alpha"];
        let before = r.rank("gamma delta", &docs).unwrap();
        let yq = r.embed("gamma delta", Side::Query).unwrap();
        let scores: Vec<f64> = docs
            .iter()
            .map(|d| {
                let yd = r.embed(d, Side::Document).unwrap() * 7.5;
                cosine(yq.view(), yd.view()).unwrap()
            })
            .collect();
        let order: Vec<usize> = before.docs.iter().map(|d| d.input_index).collect();
        assert_eq!(order, order_by_score(&scores));
    }

    #[test]
    fn mean_over_queries() {
        let mut r = toy_ranker(2);
        r.doc = r.query.clone();
        let js = vec![
            Judgment { query: "alpha".into(), doc: "alpha".into(), grade: 3 },
            Judgment { query: "beta".into(), doc: "delta".into(), grade: 0 },
        ];
        let rep = mean_ndcg(&r, &js, &[1, 3]).unwrap();
        assert_eq!(rep.per_query[0].ndcg, vec![1.0, 1.0]);
        assert_eq!(rep.per_query[1].ndcg, vec![0.0, 0.0]);
        assert_eq!(rep.mean, vec![0.5, 0.5]);
        let mut buf = Vec::new();
        rep.write_tsv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("k\tmean_ndcg\n1\t0.5\n3\t0.5\n"));
    }

    #[test]
    fn random_baseline_is_between_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let js: Vec<Judgment> = (0..24)
            .map(|i| Judgment {
                query: format!("q{}", i / 8),
                doc: format!("d{i}"),
                grade: rng.random_range(0..=3),
            })
            .collect();
        let rep = random_baseline(&js, &[1, 3, 10], 100, 0).unwrap();
        for m in &rep.mean {
            assert!((0.0..=1.0).contains(m));
        }
        assert!(rep.mean[2] >= rep.mean[0] - 0.2);
    }
}
