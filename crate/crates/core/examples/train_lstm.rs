//! Train an LSTM query/document encoder pair on synthetic click data and save
//! the checkpoints, dictionary and loss curve.
//!
//! ```text
//! cargo run --release --example train_lstm -- /tmp/seqrank-model
//! ```
use std::path::PathBuf;

use seqrank::corpus::{generate, SyntheticSpec};
use seqrank::trainer::{save_outputs, train, TrainConfig};

fn main() -> seqrank::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("seqrank-model"));
    let corpus = generate(&SyntheticSpec::default())?;

    let cfg = TrainConfig { cells: 16, epochs: 10, deterministic: true, ..TrainConfig::default() };
    let trained = train(&corpus.clicks, &cfg)?;

    for e in &trained.curve.epochs {
        println!("epoch {:>2}  mean loss {:.4}", e.epoch, e.mean_loss);
    }
    println!(
        "{} updates per side, {} record visits skipped, {} parameters per side",
        trained.updates,
        trained.skipped_records,
        trained.query.num_parameters()
    );
    save_outputs(&out, &trained)?;
    println!("saved to {}", out.display());
    Ok(())
}
