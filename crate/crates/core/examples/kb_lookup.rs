//! Load the bundled triple store and query it: objects of a fact, the
//! candidate set of a relation, and alias resolution to canonical names.
//!
//! ```bash
//! cargo run -p rcd --example kb_lookup
//! ```

use std::path::PathBuf;

use rcd::TripleStore;

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
    println!("{} triples", store.len());

    let spec = store.relation("P54").expect("P54 is catalogued");
    println!("{}", spec.question_for("Lionel Messi"));
    for team in store.objects("Lionel Messi", "P54").into_iter().flatten() {
        println!("  {team}");
    }

    let teams = store.objects_of_relation("P54")?;
    println!("P54 has {} distinct objects", teams.len());

    for surface in ["PSG", "Barça", "RATP", "Argentina", "Real Madrid"] {
        match store.resolve_alias(surface)? {
            Some(idsf) => println!("{surface:>12} -> {idsf}"),
            None => println!("{surface:>12} -> (unknown)"),
        }
    }
    match store.resolve_alias("marble") {
        Ok(r) => println!("      marble -> {r:?}"),
        Err(e) => println!("      marble -> error: {e}"),
    }
    Ok(())
}
