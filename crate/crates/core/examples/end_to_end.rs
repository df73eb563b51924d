//! The whole pipeline in memory: build the dataset, script a model that
//! knows every answer, and evaluate it four ways.
//!
//! A model that knows the facts scores perfectly under constrained
//! decoding, while the same model free-decoding with a chatty suffix loses
//! every exact match.
//!
//! ```bash
//! cargo run -p rcd --release --example end_to_end
//! ```

use std::path::PathBuf;

use rcd::dataset::{self, GenerationParams, IntersectOrder};
use rcd::pipeline::{evaluate, Experiment, RunMode};
use rcd::token::VerbalizerLm;
use rcd::{DecodeConfig, ScriptedLm, Tokenizer, TripleStore};

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
    let items = dataset::build_dataset(
        &store,
        None,
        &GenerationParams::default(),
        IntersectOrder::SampleThenIntersect,
        true,
    );
    let exp = Experiment::from_parts(store, items, 0, 5, "\n")?;
    println!(
        "{} questions; first prompt:\n{}",
        exp.items.len(),
        exp.prompt(&exp.items[0])
    );

    let vocab = *exp.tokenizer.vocab();
    let oracle = ScriptedLm::from_script(vocab, &exp.oracle_script()?)?;
    let chatty = VerbalizerLm::new(&oracle, vocab, exp.tokenizer.encode("; as far as I know")?);
    let config = DecodeConfig::default();

    for (label, mode, backend) in [
        ("rcd", RunMode::Rcd, Some(&oracle as &dyn rcd::LmBackend)),
        (
            "vd (chatty)",
            RunMode::Vd,
            Some(&chatty as &dyn rcd::LmBackend),
        ),
        (
            "ablation",
            RunMode::Ablation,
            Some(&oracle as &dyn rcd::LmBackend),
        ),
        ("majority", RunMode::Majority, None),
    ] {
        let out = evaluate(&exp, mode, backend, None, &config, 4)?;
        let o = out.report.overall;
        println!(
            "{label:<12} P={:.4} R={:.4} F1={:.4}",
            o.precision, o.recall, o.f1
        );
    }
    Ok(())
}
