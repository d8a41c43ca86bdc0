//! Evaluate a trained model with NDCG@{1,3,10} on graded judgments and compare
//! with the expected score of a random ordering.
use seqrank::corpus::{generate, SyntheticSpec};
use seqrank::eval::{mean_ndcg, ndcg_at_k, random_baseline, Ranker};
use seqrank::trainer::{train, TrainConfig};

fn main() -> seqrank::Result<()> {
    // A worked case first: grades in ranked order.
    let grades = [2, 3, 0, 1];
    for k in [1, 2, 4] {
        println!("NDCG@{k} of {grades:?} = {:.4}", ndcg_at_k(&grades, k));
    }

    let corpus = generate(&SyntheticSpec { seed: 1, ..SyntheticSpec::default() })?;
    let ks = [1, 3, 10];
    let untrained = {
        let cfg = TrainConfig { cells: 16, epochs: 0, ..TrainConfig::default() };
        let t = train(&corpus.clicks, &cfg)?;
        mean_ndcg(&Ranker::new(t.dict, t.query, t.doc)?, &corpus.judgments, &ks)?
    };
    let trained = {
        let cfg = TrainConfig { cells: 16, epochs: 10, ..TrainConfig::default() };
        let t = train(&corpus.clicks, &cfg)?;
        mean_ndcg(&Ranker::new(t.dict, t.query, t.doc)?, &corpus.judgments, &ks)?
    };
    let random = random_baseline(&corpus.judgments, &ks, 100, 0)?;

    println!("{:>4} {:>9} {:>9} {:>9}", "k", "random", "init", "trained");
    for (i, k) in ks.iter().enumerate() {
        println!("{k:>4} {:>9.4} {:>9.4} {:>9.4}", random.mean[i], untrained.mean[i], trained.mean[i]);
    }
    Ok(())
}
