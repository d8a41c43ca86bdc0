//! Train a plain RNN and an LSTM with about the same number of parameters on
//! the same clicks and compare their loss curves.
use seqrank::corpus::{generate, SyntheticSpec};
use seqrank::model::{Arch, Encoder, Params, Variant};
use seqrank::trainer::{train, TrainConfig};

fn main() -> seqrank::Result<()> {
    let corpus = generate(&SyntheticSpec::default())?;
    let lstm_cfg = TrainConfig { arch: Arch::Lstm, variant: Variant::Reduced, cells: 16, epochs: 12, deterministic: true, ..TrainConfig::default() };
    let lstm = train(&corpus.clicks, &lstm_cfg)?;
    let dim = lstm.dict.dim();
    let target = lstm.query.num_parameters();

    let size = |h: usize| Encoder::unidirectional(Params::zeros(Arch::Rnn, Variant::Full, h, dim)).num_parameters();
    let hidden = (1..=256).min_by_key(|&h| size(h).abs_diff(target)).unwrap_or(16);
    let rnn = train(&corpus.clicks, &TrainConfig { arch: Arch::Rnn, variant: Variant::Full, cells: hidden, ..lstm_cfg })?;

    println!("lstm: {} cells, {} params; rnn: {} hidden, {} params", 16, target, hidden, rnn.query.num_parameters());
    println!("{:>5} {:>9} {:>9}", "epoch", "lstm", "rnn");
    for (a, b) in lstm.curve.epochs.iter().zip(&rnn.curve.epochs) {
        println!("{:>5} {:>9.4} {:>9.4}", a.epoch, a.mean_loss, b.mean_loss);
    }
    Ok(())
}
