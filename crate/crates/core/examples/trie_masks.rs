//! Build a token trie over candidate names and walk it, printing the
//! tokens allowed at each step and the binary round trip.
//!
//! ```bash
//! cargo run -p rcd --example trie_masks
//! ```

use rcd::{TokenTrie, Tokenizer, WhitespaceTokenizer};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let candidates = ["Paris", "Paris Saint-Germain", "Inter Miami", "Inter Milan"];
    let tok = WhitespaceTokenizer::from_texts(candidates);
    let trie = TokenTrie::build(candidates, &tok)?;
    println!(
        "{} candidates, {} nodes",
        trie.candidate_count(),
        trie.node_count()
    );

    let names =
        |ids: Vec<u32>| -> Vec<&str> { ids.into_iter().filter_map(|t| tok.word(t)).collect() };
    println!(
        "root allows {:?}",
        names(trie.allowed_next(trie.root())?.collect())
    );

    let inter = trie.step(trie.root(), tok.id("Inter").unwrap())?.unwrap();
    println!(
        "after `Inter` allows {:?}",
        names(trie.allowed_next(inter)?.collect())
    );

    let paris = trie.walk(&tok.encode("Paris")?).unwrap();
    println!(
        "`Paris` is accept={} leaf={}; continues with {:?}",
        trie.is_accept(paris)?,
        trie.is_leaf(paris)?,
        names(trie.allowed_next(paris)?.collect())
    );
    println!("accepts `Inter`? {}", trie.accepts(&tok.encode("Inter")?));

    let bytes = trie.to_bytes();
    let back = TokenTrie::from_bytes(&bytes)?;
    println!(
        "serialized to {} bytes; round trip equal: {}",
        bytes.len(),
        back == trie
    );
    Ok(())
}
