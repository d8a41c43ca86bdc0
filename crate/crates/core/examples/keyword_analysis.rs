//! Which words make the cells of a bidirectional encoder jump? Prints the
//! per-word detection counts, the keywords picked by the rule, and the cells
//! each topic's keywords concentrate on.
use std::collections::BTreeSet;

use seqrank::analysis::{keyword_report, topic_cells, DEFAULT_TOP_K, DEFAULT_TOP_M};
use seqrank::corpus::{generate, SyntheticSpec};
use seqrank::trainer::{train, TrainConfig};

fn main() -> seqrank::Result<()> {
    let corpus = generate(&SyntheticSpec::default())?;
    let cfg = TrainConfig { bidirectional: true, cells: 16, epochs: 10, deterministic: true, ..TrainConfig::default() };
    let t = train(&corpus.clicks, &cfg)?;

    for r in corpus.clicks.iter().take(4) {
        let report = keyword_report(&t.query, &t.dict, &r.query, DEFAULT_TOP_K, None)?;
        println!("{}  (threshold {:.3})", r.query, report.threshold);
        for w in &report.words {
            let tag = if corpus.truth.is_keyword(&w.word) { "topic" } else { "filler" };
            println!(
                "  {:<10} l2r {:>2} r2l {:>2}  {:<6} {}",
                w.word,
                w.cells_assigned_l2r.unwrap_or(0),
                w.cells_assigned_r2l.unwrap_or(0),
                tag,
                if w.is_keyword { "KEYWORD" } else { "" }
            );
        }
    }

    let queries: Vec<&str> = corpus.clicks.iter().map(|r| r.query.as_str()).collect();
    let cells = topic_cells(&queries, &t.query, &t.dict, DEFAULT_TOP_M, DEFAULT_TOP_K, None)?;
    for (i, words) in corpus.truth.topics.iter().enumerate() {
        let vocab: BTreeSet<String> = words.iter().cloned().collect();
        println!("topic {i} dominant cells: {:?}", cells.dominant_cells(&vocab, DEFAULT_TOP_M));
    }
    Ok(())
}
