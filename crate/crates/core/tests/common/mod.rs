#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rcd::dataset::{self, GenerationParams, IntersectOrder};
use rcd::kb::load_triples;
use rcd::pipeline::KbPaths;
use rcd::{QAItem, TokenId, TokenSequence, TripleStore};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

pub fn kb_paths() -> KbPaths {
    KbPaths {
        triples: fixture("triples.tsv"),
        relations: fixture("relations.tsv"),
        aliases: Some(fixture("aliases.tsv")),
    }
}

pub fn fixture_store() -> TripleStore {
    kb_paths().open().expect("fixture KB loads")
}

/// The fixture dataset as the CLI builds it by default.
pub fn fixture_dataset(store: &TripleStore) -> Vec<QAItem> {
    let reference = load_triples(&fixture("wikidata.tsv")).unwrap();
    dataset::build_dataset(
        store,
        Some(&reference),
        &GenerationParams::default(),
        IntersectOrder::SampleThenIntersect,
        true,
    )
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random names over a tiny alphabet so that shared prefixes and names that
/// are prefixes of other names are common. Includes a two-byte character.
pub fn random_names(rng: &mut impl Rng, count: usize) -> BTreeSet<String> {
    const PARTS: [&str; 5] = ["a", "b", "é", "-", "ab"];
    let mut out = BTreeSet::new();
    while out.len() < count {
        let len = rng.random_range(1..=5);
        let s: String = (0..len).map(|_| *PARTS.choose(rng).unwrap()).collect();
        out.insert(s);
    }
    out
}

/// Random token sequences over ids `lo..hi`.
pub fn random_sequences(
    rng: &mut impl Rng,
    count: usize,
    lo: TokenId,
    hi: TokenId,
) -> Vec<TokenSequence> {
    let mut out = BTreeSet::new();
    while out.len() < count {
        let len = rng.random_range(1..=6);
        out.insert(
            (0..len)
                .map(|_| rng.random_range(lo..hi))
                .collect::<Vec<_>>(),
        );
    }
    out.into_iter().collect()
}

/// Next tokens of every sequence strictly extending `prefix`, found by scanning.
pub fn brute_next(seqs: &[TokenSequence], prefix: &[TokenId]) -> BTreeSet<TokenId> {
    seqs.iter()
        .filter(|s| s.len() > prefix.len() && s.starts_with(prefix))
        .map(|s| s[prefix.len()])
        .collect()
}
