//! Letter-trigram word hashing: build a dictionary and look at the sparse
//! vectors a sentence turns into.
use seqrank::texthash::{tokenize, trigrams, TrigramDict};

fn main() -> seqrank::Result<()> {
    let corpus = ["cheap flights to boston", "boston red sox tickets", "flight status"];
    let dict = TrigramDict::build(corpus)?;
    println!("{} distinct trigrams", dict.dim());

    for token in tokenize("Cheap flights, Boston!") {
        println!("{:>8}: {:?}", token.as_str(), trigrams(&token));
    }

    let seq = dict.hash_sentence("cheap flights to boston")?;
    for (word, vec) in tokenize("cheap flights to boston").iter().zip(seq.words()) {
        let named: Vec<String> = vec
            .pairs()
            .iter()
            .map(|&(i, c)| {
                let tri = dict.iter().find(|&(_, j)| j == i).map(|(t, _)| t).unwrap_or("?");
                format!("{tri}x{c}")
            })
            .collect();
        println!("{:>8} -> {}", word.as_str(), named.join(" "));
    }

    // Unknown words hash to an empty vector rather than failing.
    let unseen = dict.hash_sentence("zzz")?;
    println!("'zzz' has {} known trigrams", unseen.words()[0].total());
    Ok(())
}
