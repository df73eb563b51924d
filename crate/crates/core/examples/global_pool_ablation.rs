//! Compare per-question candidate tries with one static trie over the
//! objects of every dataset relation, using a random-score model.
//!
//! ```bash
//! cargo run -p rcd --example global_pool_ablation
//! ```

use std::path::PathBuf;

use rcd::dataset::{generate_dataset, GenerationParams};
use rcd::decoder::{decode, parse_rcd_answers};
use rcd::retriever::{global_pool, KbRetriever, Retriever};
use rcd::{ByteTokenizer, DecodeConfig, NoiseLm, TokenTrie, Tokenizer, TripleStore};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let store = TripleStore::open(
        &fixture("triples.tsv"),
        Some(&fixture("relations.tsv")),
        None,
    )?;
    let items = generate_dataset(&store, &GenerationParams::default());
    let relations: std::collections::BTreeSet<&str> =
        items.iter().map(|i| i.relation.as_str()).collect();
    let pool = global_pool(&store, relations.iter().copied());

    let tok = ByteTokenizer::new();
    let vocab = *tok.vocab();
    let pool_trie = TokenTrie::build(&pool, &tok)?;
    println!(
        "global pool: {} names, {} trie nodes",
        pool.len(),
        pool_trie.node_count()
    );

    let retriever = KbRetriever::new(&store);
    let config = DecodeConfig {
        max_answers: 3,
        ..DecodeConfig::default()
    };
    for (i, item) in items.iter().step_by(200).enumerate() {
        let cands = retriever.retrieve(&i.to_string(), item)?;
        assert!(cands.candidates.is_subset(&pool));
        let trie = TokenTrie::build(&cands.candidates, &tok)?;
        let lm = NoiseLm::new(vocab.size(), i as u64);
        let prompt = tok.encode(&item.question)?;
        let local =
            parse_rcd_answers(&decode(&lm, &prompt, &trie, &vocab, &config)?.answers, &tok)?;
        let global = parse_rcd_answers(
            &decode(&lm, &prompt, &pool_trie, &vocab, &config)?.answers,
            &tok,
        )?;
        println!("{}", item.question);
        println!(
            "  per-question ({:>3}): {:?}",
            cands.candidates.len(),
            local
        );
        println!("  global pool  ({:>3}): {:?}", pool.len(), global);
    }
    Ok(())
}
