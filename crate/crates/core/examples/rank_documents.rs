//! Rank candidate documents for a query by cosine similarity of their
//! embeddings, using a freshly trained model.
use seqrank::corpus::{generate, group_by_query, SyntheticSpec};
use seqrank::eval::Ranker;
use seqrank::trainer::{train, TrainConfig};

fn main() -> seqrank::Result<()> {
    let corpus = generate(&SyntheticSpec::default())?;
    let cfg = TrainConfig { cells: 16, epochs: 8, deterministic: true, ..TrainConfig::default() };
    let t = train(&corpus.clicks, &cfg)?;
    let ranker = Ranker::new(t.dict, t.query, t.doc)?;

    for (query, judged) in group_by_query(&corpus.judgments).into_iter().take(3) {
        let candidates: Vec<&str> = judged.iter().map(|(d, _)| d.as_str()).collect();
        let ranked = ranker.rank(&query, &candidates)?;
        println!("query: {query}");
        for (pos, d) in ranked.docs.iter().enumerate() {
            let grade = judged[d.input_index].1;
            println!("  {:>2}. {:+.3}  grade {grade}  {}", pos + 1, d.score, d.doc);
        }
    }
    Ok(())
}
