//! Effect of the number of sampled negatives per click on training loss and
//! ranking quality.
use seqrank::corpus::{generate, SyntheticSpec};
use seqrank::eval::{mean_ndcg, Ranker};
use seqrank::trainer::{train, TrainConfig};

fn main() -> seqrank::Result<()> {
    let corpus = generate(&SyntheticSpec { seed: 2, ..SyntheticSpec::default() })?;
    println!("{:>3} {:>10} {:>10} {:>8}", "n", "first", "last", "ndcg@1");
    for n in [2, 4, 6, 8] {
        let cfg = TrainConfig { cells: 16, epochs: 10, n_negatives: n, deterministic: true, ..TrainConfig::default() };
        let t = train(&corpus.clicks, &cfg)?;
        let (first, last) = (t.curve.first().unwrap_or(f64::NAN), t.curve.last().unwrap_or(f64::NAN));
        let ndcg = mean_ndcg(&Ranker::new(t.dict, t.query, t.doc)?, &corpus.judgments, &[1])?;
        // The loss grows with n (more terms in the sum), so compare ratios, not levels.
        println!("{n:>3} {first:>10.4} {last:>10.4} {:>8.4}", ndcg.mean[0]);
    }
    Ok(())
}
