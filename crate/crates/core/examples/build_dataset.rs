//! Generate the question set from the bundled KB and print its statistics,
//! the majority baseline table and a few questions.
//!
//! ```bash
//! cargo run -p rcd --example build_dataset
//! ```

use std::path::PathBuf;

use rcd::dataset::{self, build_majority_table, heldout_store, GenerationParams, IntersectOrder};
use rcd::kb::load_triples;
use rcd::{DatasetStats, TripleStore};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let store = TripleStore::open(
        &fixture("triples.tsv"),
        Some(&fixture("relations.tsv")),
        Some(&fixture("aliases.tsv")),
    )?;
    let reference = load_triples(&fixture("wikidata.tsv"))?;

    let params = GenerationParams::default();
    let items = dataset::build_dataset(
        &store,
        Some(&reference),
        &params,
        IntersectOrder::SampleThenIntersect,
        true,
    );
    let stats = DatasetStats::of(&items);
    println!("{stats}");
    let kept: std::collections::BTreeSet<&str> =
        items.iter().map(|i| i.relation.as_str()).collect();

    for spec in store.relations() {
        let subjects = store.subjects_of_relation(&spec.relation_id).count();
        let kept = kept.contains(spec.relation_id.as_str());
        println!(
            "  {:<5} subjects={subjects:<4} literal={:<5} kept={kept}",
            spec.relation_id, spec.is_literal
        );
    }

    for item in items.iter().take(3) {
        println!("{} -> {:?}", item.question, item.ground_truth);
    }

    let heldout = heldout_store(&store, &items);
    let majority = build_majority_table(&heldout, kept);
    print!("{}", majority.to_tsv());
    Ok(())
}
