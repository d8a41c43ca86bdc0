//! Minibatched training of the query and document encoders on click-through
//! records.
//!
//! Each minibatch is a contiguous shard of the records. For every record the
//! gradient is evaluated at the Nesterov lookahead point of both sides, the
//! per-record gradients are summed, each side is clipped and then updated
//! (query side first).

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use crate::corpus::ClickRecord;
use crate::error::{Error, Result};
use crate::grad::{tuple_backward, ClickTuple, GradientSet};
use crate::model::{checkpoint, Arch, Encoder, Side, Variant, INIT_RANGE};
use crate::objective::{loss, DEFAULT_GAMMA};
use crate::optim::{clip, OptimConfig, OptimState, DEFAULT_CLIP, DEFAULT_STEP_SIZE};
use crate::texthash::{TrigramDict, TrigramSequence};

/// Stream reserved for the frozen negatives used by [`evaluate_loss`].
const EVAL_STREAM: u64 = u64::MAX;
/// Stream used to draw the initial parameters.
const INIT_STREAM: u64 = 0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub arch: Arch,
    pub variant: Variant,
    pub bidirectional: bool,
    pub cells: usize,
    pub n_negatives: usize,
    pub gamma: f64,
    pub eps: f64,
    pub clip: f64,
    pub epochs: usize,
    pub minibatch: usize,
    /// Truncated-BPTT depth: words unfolded back from the end of a sentence.
    pub bptt_depth: usize,
    pub seed: u64,
    /// Sum per-record gradients in record order and write zero wall times, so
    /// outputs depend only on the seed, config and corpus.
    pub deterministic: bool,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
    pub init_range: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            arch: Arch::Lstm,
            variant: Variant::Reduced,
            bidirectional: false,
            cells: 32,
            n_negatives: 4,
            gamma: DEFAULT_GAMMA,
            eps: DEFAULT_STEP_SIZE,
            clip: DEFAULT_CLIP,
            epochs: 20,
            minibatch: 100,
            bptt_depth: 20,
            seed: 0,
            deterministic: false,
            threads: None,
            init_range: INIT_RANGE,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_negatives == 0 {
            return bad("negatives must be >= 1".into());
        }
        if self.minibatch == 0 {
            return bad("minibatch size must be >= 1".into());
        }
        if self.bptt_depth == 0 {
            return bad("BPTT depth must be >= 1".into());
        }
        if self.cells == 0 {
            return bad("cells must be >= 1".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be >= 1".into());
        }
        // At γ = 0 the loss is constant and nothing would be learned.
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return bad(format!("gamma must be finite and > 0, got {}", self.gamma));
        }
        if !(self.init_range.is_finite() && self.init_range >= 0.0) {
            return bad(format!("init range must be finite and >= 0, got {}", self.init_range));
        }
        self.optim().validate()
    }

    pub fn optim(&self) -> OptimConfig {
        OptimConfig {
            step_size: self.eps,
            clip: self.clip,
            ..OptimConfig::default()
        }
    }

    /// Applies `key = value` lines on top of `self`. Blank lines and `#`
    /// comments are ignored; keys follow the CLI flag names, with `-` or `_`.
    pub fn apply_overrides(&mut self, text: &str, source: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |msg: String| Error::Config(format!("{source}:{}: {msg}", n + 1));
            let Some((key, value)) = line.split_once('=') else {
                return Err(at(format!("expected key = value, got {line:?}")));
            };
            let key = key.trim().replace('-', "_");
            let value = value.trim();
            let bad = || at(format!("bad value {value:?} for {key}"));
            fn num<T: std::str::FromStr>(v: &str, bad: impl Fn() -> Error) -> Result<T> {
                v.parse().map_err(|_| bad())
            }
            match key.as_str() {
                "arch" => self.arch = value.parse().map_err(|_| bad())?,
                "variant" => self.variant = value.parse().map_err(|_| bad())?,
                "bidirectional" => self.bidirectional = num(value, bad)?,
                "cells" => self.cells = num(value, bad)?,
                "negatives" | "n_negatives" => self.n_negatives = num(value, bad)?,
                "gamma" => self.gamma = num(value, bad)?,
                "eps" => self.eps = num(value, bad)?,
                "clip" => self.clip = num(value, bad)?,
                "epochs" => self.epochs = num(value, bad)?,
                "minibatch" => self.minibatch = num(value, bad)?,
                "bptt_depth" => self.bptt_depth = num(value, bad)?,
                "seed" => self.seed = num(value, bad)?,
                "deterministic" => self.deterministic = num(value, bad)?,
                "threads" => self.threads = if value == "auto" { None } else { Some(num(value, bad)?) },
                "init_range" => self.init_range = num(value, bad)?,
                _ => return Err(at(format!("unknown key {key:?}"))),
            }
        }
        Ok(())
    }

    /// The settings as `key = value` lines that [`TrainConfig::apply_overrides`] reads back.
    pub fn to_overrides(&self) -> String {
        let threads = self.threads.map_or("auto".to_string(), |t| t.to_string());
        [
            format!("arch = {}", self.arch),
            format!("variant = {}", self.variant),
            format!("bidirectional = {}", self.bidirectional),
            format!("cells = {}", self.cells),
            format!("negatives = {}", self.n_negatives),
            format!("gamma = {}", self.gamma),
            format!("eps = {}", self.eps),
            format!("clip = {}", self.clip),
            format!("epochs = {}", self.epochs),
            format!("minibatch = {}", self.minibatch),
            format!("bptt_depth = {}", self.bptt_depth),
            format!("seed = {}", self.seed),
            format!("deterministic = {}", self.deterministic),
            format!("threads = {threads}"),
            format!("init_range = {}", self.init_range),
        ]
        .join("\n")
            + "\n"
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub mean_loss: f64,
    pub seconds: f64,
}

/// Mean training loss after each epoch.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossCurve {
    pub epochs: Vec<EpochLoss>,
}

impl LossCurve {
    pub fn first(&self) -> Option<f64> {
        self.epochs.first().map(|e| e.mean_loss)
    }

    pub fn last(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.mean_loss)
    }

    /// CSV with header `epoch,mean_loss,seconds`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epoch", "mean_loss", "seconds"])?;
        for e in &self.epochs {
            w.write_record([e.epoch.to_string(), e.mean_loss.to_string(), e.seconds.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Click records hashed once, with sentences shared between records stored once.
#[derive(Clone, Debug)]
pub struct PreparedCorpus {
    sentences: Vec<TrigramSequence>,
    /// `(query, clicked doc)` sentence indices per record.
    records: Vec<(usize, usize)>,
    /// Distinct clicked-document sentence indices in first-appearance order.
    distinct_docs: Vec<usize>,
}

impl PreparedCorpus {
    pub fn new(records: &[ClickRecord], dict: &TrigramDict) -> Result<PreparedCorpus> {
        if records.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut lookup: HashMap<&str, usize> = HashMap::new();
        let mut sentences = Vec::new();
        let mut pairs = Vec::with_capacity(records.len());
        let mut distinct_docs = Vec::new();
        let mut seen_docs = HashSet::new();
        for r in records {
            let mut ids = [0usize; 2];
            for (slot, text) in ids.iter_mut().zip([&r.query, &r.clicked_doc]) {
                *slot = match lookup.get(text.as_str()) {
                    Some(&i) => i,
                    None => {
                        sentences.push(dict.hash_sentence(text)?);
                        lookup.insert(text, sentences.len() - 1);
                        sentences.len() - 1
                    }
                };
            }
            if seen_docs.insert(ids[1]) {
                distinct_docs.push(ids[1]);
            }
            pairs.push((ids[0], ids[1]));
        }
        Ok(PreparedCorpus {
            sentences,
            records: pairs,
            distinct_docs,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn distinct_docs(&self) -> usize {
        self.distinct_docs.len()
    }

    /// Sentence indices of `n` distinct clicked documents other than record
    /// `record`'s own, drawn uniformly.
    pub fn sample_negative_indices(
        &self,
        record: usize,
        n: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<usize>> {
        let own = self.records[record].1;
        let distinct = self.distinct_docs.len();
        if distinct <= n {
            return Err(Error::CorpusTooSmall { distinct, requested: n });
        }
        let own_pos = self
            .distinct_docs
            .iter()
            .position(|&d| d == own)
            .expect("every clicked document is listed");
        Ok(index::sample(rng, distinct - 1, n)
            .into_iter()
            .map(|i| self.distinct_docs[if i >= own_pos { i + 1 } else { i }])
            .collect())
    }

    fn draw_negatives(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<usize>>> {
        (0..self.len()).map(|r| self.sample_negative_indices(r, n, rng)).collect()
    }

    fn tuple<'a>(&'a self, record: usize, negatives: &'a [&'a TrigramSequence]) -> ClickTuple<'a> {
        let (q, d) = self.records[record];
        ClickTuple {
            query: &self.sentences[q],
            positive: &self.sentences[d],
            negatives,
        }
    }

    fn sentence_refs(&self, ids: &[usize]) -> Vec<&TrigramSequence> {
        ids.iter().map(|&i| &self.sentences[i]).collect()
    }
}

/// Draws `n` negative document titles for record `record_index`: distinct
/// clicked documents of other records, never the record's own clicked document.
pub fn sample_negatives(
    record_index: usize,
    records: &[ClickRecord],
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<String>> {
    let own = &records[record_index].clicked_doc;
    let mut docs: Vec<&str> = Vec::new();
    let mut seen = HashSet::new();
    for r in records {
        if seen.insert(r.clicked_doc.as_str()) {
            docs.push(&r.clicked_doc);
        }
    }
    if docs.len() <= n {
        return Err(Error::CorpusTooSmall {
            distinct: docs.len(),
            requested: n,
        });
    }
    let others: Vec<&str> = docs.into_iter().filter(|d| d != own).collect();
    Ok(index::sample(rng, others.len(), n)
        .into_iter()
        .map(|i| others[i].to_string())
        .collect())
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Initial parameters for both sides, drawn from the seed's init stream
/// (query side first).
pub fn initial_encoders(cfg: &TrainConfig, dim: usize) -> (Encoder, Encoder) {
    let mut rng = stream_rng(cfg.seed, INIT_STREAM);
    let q = Encoder::random(cfg.arch, cfg.variant, cfg.bidirectional, cfg.cells, dim, cfg.init_range, &mut rng);
    let d = Encoder::random(cfg.arch, cfg.variant, cfg.bidirectional, cfg.cells, dim, cfg.init_range, &mut rng);
    (q, d)
}

/// Mean loss over the corpus with negatives fixed by the seed's evaluation
/// stream. Records whose embeddings have zero norm are left out of the mean.
pub fn evaluate_loss(
    corpus: &PreparedCorpus,
    query: &Encoder,
    doc: &Encoder,
    cfg: &TrainConfig,
) -> Result<f64> {
    let negatives = corpus.draw_negatives(cfg.n_negatives, &mut stream_rng(cfg.seed, EVAL_STREAM))?;
    frozen_loss(corpus, query, doc, cfg.gamma, &negatives)
}

fn frozen_loss(
    corpus: &PreparedCorpus,
    query: &Encoder,
    doc: &Encoder,
    gamma: f64,
    negatives: &[Vec<usize>],
) -> Result<f64> {
    let per_record: Vec<Option<f64>> = (0..corpus.len())
        .into_par_iter()
        .map(|r| {
            let negs = corpus.sentence_refs(&negatives[r]);
            let tuple = corpus.tuple(r, &negs);
            match crate::grad::tuple_similarities(query, doc, &tuple, gamma) {
                Ok(sims) => Ok(Some(loss(&sims))),
                Err(Error::ZeroNorm) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let scored: Vec<f64> = per_record.into_iter().flatten().collect();
    if scored.is_empty() {
        return Err(Error::ZeroNorm);
    }
    let mean = scored.iter().sum::<f64>() / scored.len() as f64;
    if !mean.is_finite() {
        return Err(Error::NonFinite(format!("evaluation loss {mean}")));
    }
    Ok(mean)
}

/// Result of [`train`].
#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub dict: TrigramDict,
    pub query: Encoder,
    pub doc: Encoder,
    pub curve: LossCurve,
    /// Record visits skipped because an embedding had zero norm.
    pub skipped_records: usize,
    /// Updates applied to each side.
    pub updates: u64,
}

type RecordGrad = Option<(GradientSet, GradientSet, f64)>;

fn record_gradient(
    corpus: &PreparedCorpus,
    r: usize,
    negatives: &[usize],
    q_ahead: &Encoder,
    d_ahead: &Encoder,
    cfg: &TrainConfig,
) -> Result<RecordGrad> {
    let negs = corpus.sentence_refs(negatives);
    let tuple = corpus.tuple(r, &negs);
    let mut gq = GradientSet::zeros_for(q_ahead);
    let mut gd = GradientSet::zeros_for(d_ahead);
    match tuple_backward(q_ahead, d_ahead, &tuple, cfg.gamma, cfg.bptt_depth, &mut gq, &mut gd) {
        Ok(l) => Ok(Some((gq, gd, l))),
        Err(Error::ZeroNorm) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Running sum of per-record gradients and losses over a minibatch.
#[derive(Default)]
struct Accum {
    grads: Option<(GradientSet, GradientSet)>,
    loss: f64,
    skipped: usize,
}

impl Accum {
    fn add(&mut self, g: RecordGrad) -> Result<()> {
        let Some((gq, gd, l)) = g else {
            self.skipped += 1;
            return Ok(());
        };
        self.loss += l;
        match &mut self.grads {
            Some((aq, ad)) => {
                aq.add_assign(&gq)?;
                ad.add_assign(&gd)?;
            }
            None => self.grads = Some((gq, gd)),
        }
        Ok(())
    }

    fn merge(&mut self, other: Accum) -> Result<()> {
        self.loss += other.loss;
        self.skipped += other.skipped;
        match (&mut self.grads, other.grads) {
            (_, None) => {}
            (None, g) => self.grads = g,
            (Some((aq, ad)), Some((gq, gd))) => {
                aq.add_assign(&gq)?;
                ad.add_assign(&gd)?;
            }
        }
        Ok(())
    }
}

/// Trains both encoders on `records`, building the trigram dictionary from them.
pub fn train(records: &[ClickRecord], cfg: &TrainConfig) -> Result<TrainOutput> {
    cfg.validate()?;
    let dict = TrigramDict::build(records.iter().flat_map(|r| [&r.query, &r.clicked_doc]))?;
    let corpus = PreparedCorpus::new(records, &dict)?;
    let (query, doc) = initial_encoders(cfg, dict.dim());
    let run = || train_prepared(&corpus, query, doc, cfg);
    let (query, doc, curve, skipped_records, updates) = match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    Ok(TrainOutput {
        dict,
        query,
        doc,
        curve,
        skipped_records,
        updates,
    })
}

type Trained = (Encoder, Encoder, LossCurve, usize, u64);

/// Training loop over an already hashed corpus, starting from the given parameters.
pub fn train_prepared(
    corpus: &PreparedCorpus,
    mut query: Encoder,
    mut doc: Encoder,
    cfg: &TrainConfig,
) -> Result<Trained> {
    cfg.validate()?;
    if corpus.distinct_docs() <= cfg.n_negatives {
        return Err(Error::CorpusTooSmall {
            distinct: corpus.distinct_docs(),
            requested: cfg.n_negatives,
        });
    }
    let shards = corpus.len().div_ceil(cfg.minibatch);
    let total = (shards * cfg.epochs) as u64;
    let mut opt_q = OptimState::new(&query, total, cfg.optim())?;
    let mut opt_d = OptimState::new(&doc, total, cfg.optim())?;
    let eval_negatives =
        corpus.draw_negatives(cfg.n_negatives, &mut stream_rng(cfg.seed, EVAL_STREAM))?;

    let mut curve = LossCurve::default();
    let mut skipped = 0usize;
    let start = Instant::now();
    for epoch in 1..=cfg.epochs {
        let negatives =
            corpus.draw_negatives(cfg.n_negatives, &mut stream_rng(cfg.seed, epoch as u64))?;
        for shard in 0..shards {
            let lo = shard * cfg.minibatch;
            let hi = (lo + cfg.minibatch).min(corpus.len());
            let q_ahead = opt_q.lookahead(&query)?;
            let d_ahead = opt_d.lookahead(&doc)?;
            let grad_of = |r: usize| record_gradient(corpus, r, &negatives[r], &q_ahead, &d_ahead, cfg);

            let mut acc = Accum::default();
            if cfg.deterministic {
                let grads: Vec<RecordGrad> = (lo..hi).into_par_iter().map(grad_of).collect::<Result<_>>()?;
                for g in grads {
                    acc.add(g)?;
                }
            } else {
                let partials: Vec<Accum> = (lo..hi)
                    .into_par_iter()
                    .try_fold(Accum::default, |mut a, r| {
                        a.add(grad_of(r)?)?;
                        Ok::<_, Error>(a)
                    })
                    .collect::<Result<_>>()?;
                for p in partials {
                    acc.merge(p)?;
                }
            }
            skipped += acc.skipped;
            // A shard with no scorable record still advances the schedule.
            let (mut gq, mut gd) = acc
                .grads
                .unwrap_or_else(|| (GradientSet::zeros_for(&q_ahead), GradientSet::zeros_for(&d_ahead)));
            if !acc.loss.is_finite() || !gq.is_finite() || !gd.is_finite() {
                return Err(Error::NonFinite(format!(
                    "epoch {epoch}, minibatch {}: loss {}",
                    shard + 1,
                    acc.loss
                )));
            }
            clip(&mut gq, cfg.clip);
            clip(&mut gd, cfg.clip);
            opt_q.step(&mut query, &gq)?;
            opt_d.step(&mut doc, &gd)?;
        }
        let mean_loss = frozen_loss(corpus, &query, &doc, cfg.gamma, &eval_negatives)?;
        let seconds = if cfg.deterministic { 0.0 } else { start.elapsed().as_secs_f64() };
        log::info!("epoch {epoch}: mean loss {mean_loss:.6}");
        curve.epochs.push(EpochLoss { epoch, mean_loss, seconds });
    }
    Ok((query, doc, curve, skipped, opt_q.k))
}

/// File names written by [`save_outputs`].
pub const DICT_FILE: &str = "dict.tsv";
pub const QUERY_CHECKPOINT: &str = "query.ckpt";
pub const DOC_CHECKPOINT: &str = "doc.ckpt";
pub const LOSS_FILE: &str = "loss.csv";

/// Writes the dictionary, both checkpoints and the loss curve into `dir`.
pub fn save_outputs(dir: &Path, out: &TrainOutput) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut dict = BufWriter::new(File::create(dir.join(DICT_FILE))?);
    out.dict.write_tsv(&mut dict)?;
    dict.flush()?;
    checkpoint::save(&dir.join(QUERY_CHECKPOINT), &out.query, Side::Query, DICT_FILE)?;
    checkpoint::save(&dir.join(DOC_CHECKPOINT), &out.doc, Side::Document, DICT_FILE)?;
    out.curve.write_csv(BufWriter::new(File::create(dir.join(LOSS_FILE))?))
}
