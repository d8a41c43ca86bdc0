//! Generate the synthetic two-topic click corpus and write it to a directory.
//!
//! ```text
//! cargo run --example generate_corpus -- /tmp/seqrank-data
//! ```
use std::path::PathBuf;

use seqrank::corpus::{generate, group_by_query, save_corpus, SyntheticSpec};

fn main() -> seqrank::Result<()> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("seqrank-data"));
    let spec = SyntheticSpec { seed: 3, ..SyntheticSpec::default() };
    let corpus = generate(&spec)?;

    for (t, words) in corpus.truth.topics.iter().enumerate() {
        println!("topic {t}: {} ...", words[..6].join(" "));
    }
    println!("filler: {} ...", corpus.truth.filler[..6].join(" "));

    for r in corpus.clicks.iter().take(5) {
        println!("click  {:<28} -> {}", r.query, r.clicked_doc);
    }
    let (query, docs) = &group_by_query(&corpus.judgments)[0];
    println!("judged candidates for '{query}':");
    for (doc, grade) in docs {
        println!("  {grade}  {doc}");
    }

    save_corpus(&dir, &corpus)?;
    println!("wrote {} clicks and {} judgments to {}", corpus.clicks.len(), corpus.judgments.len(), dir.display());
    Ok(())
}
