//! Decode an answer list for "Which teams has Lionel Messi played for?"
//! under a trie of every team in the KB, then score it against the KB.
//!
//! The scripted model remembers three of Messi's clubs and confuses his
//! national team, so the exact-match set score is 0.75 on every metric.
//!
//! ```bash
//! cargo run -p rcd --example constrained_decode
//! ```

use std::path::PathBuf;

use rcd::decoder::{decode, parse_rcd_answers};
use rcd::eval::score_question;
use rcd::retriever::{KbRetriever, Retriever};
use rcd::{ByteTokenizer, DecodeConfig, QAItem, ScriptedLm, TokenTrie, Tokenizer, TripleStore};

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
    let spec = store.relation("P54").unwrap();
    let item = QAItem {
        question: spec.question_for("Lionel Messi"),
        subject: "Lionel Messi".into(),
        relation: "P54".into(),
        ground_truth: store.objects("Lionel Messi", "P54").unwrap().clone(),
    };

    let tok = ByteTokenizer::new();
    let vocab = *tok.vocab();
    let candidates = KbRetriever::new(&store).retrieve("0", &item)?;
    let trie = TokenTrie::build(&candidates.candidates, &tok)?;
    println!(
        "{} candidate teams, trie of {} nodes",
        candidates.candidates.len(),
        trie.node_count()
    );

    let prompt = tok.encode(&item.question)?;
    let mut reply = Vec::new();
    for (i, team) in [
        "Spain national football team",
        "Inter Miami",
        "FC Barcelona",
        "Paris Saint-Germain",
    ]
    .iter()
    .enumerate()
    {
        if i > 0 {
            reply.push(vocab.sep_id());
        }
        reply.extend(tok.encode(team)?);
    }
    reply.push(vocab.eos_id());
    let lm = ScriptedLm::from_sequences(vocab, [(prompt.clone(), reply)]);

    let out = decode(&lm, &prompt, &trie, &vocab, &DecodeConfig::default())?;
    let answers = parse_rcd_answers(&out.answers, &tok)?;
    println!("{}", item.question);
    for a in &answers {
        let mark = if item.ground_truth.contains(a) {
            "+"
        } else {
            "-"
        };
        println!("  {mark} {a}");
    }
    let s = score_question(&answers, &item.ground_truth)?;
    println!(
        "P={:.4} R={:.4} F1={:.4} ({} steps)",
        s.precision, s.recall, s.f1, out.steps
    );
    Ok(())
}
