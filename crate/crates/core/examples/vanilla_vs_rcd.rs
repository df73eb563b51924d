//! The same model answered with and without the trie constraint.
//!
//! Free decoding produces "made from marble", which fails exact match
//! against "Tuckahoe marble". Constrained decoding cannot start with "made",
//! so it falls through to the model's second preference, the precise name.
//!
//! ```bash
//! cargo run -p rcd --example vanilla_vs_rcd
//! ```

use std::path::PathBuf;

use rcd::decoder::{decode, decode_vanilla, parse_rcd_answers, parse_vd_answers};
use rcd::eval::score_question;
use rcd::token::BackendError;
use rcd::{
    ByteTokenizer, DecodeConfig, LmBackend, TokenId, TokenTrie, Tokenizer, TripleStore, Vocabulary,
};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

/// Follows `first` while the generation agrees with it, else `second` at a
/// lower score. Anything else scores far below both.
struct TwoMinds {
    vocab: Vocabulary,
    first: Vec<TokenId>,
    second: Vec<TokenId>,
}

impl LmBackend for TwoMinds {
    fn vocab_size(&self) -> usize {
        self.vocab.size()
    }

    fn score(&self, _prompt: &[TokenId], generated: &[TokenId]) -> Result<Vec<f32>, BackendError> {
        let mut scores = vec![-5.0; self.vocab.size()];
        let n = generated.len();
        for (seq, s) in [(&self.second, -0.5), (&self.first, 0.0)] {
            if seq.len() > n && seq.starts_with(generated) {
                scores[seq[n] as usize] = s;
            }
        }
        Ok(scores)
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let store = TripleStore::open(
        &fixture("triples.tsv"),
        Some(&fixture("relations.tsv")),
        None,
    )?;
    let subject = "Tuckahoe Marble Building";
    let truth = store.objects(subject, "P186").unwrap().clone();
    let question = store.relation("P186").unwrap().question_for(subject);

    let tok = ByteTokenizer::new();
    let vocab = *tok.vocab();
    let with_eos = |s: &str| -> Vec<TokenId> {
        let mut v = tok.encode(s).unwrap();
        v.push(vocab.eos_id());
        v
    };
    let lm = TwoMinds {
        vocab,
        first: with_eos("made from marble"),
        second: with_eos("Tuckahoe marble"),
    };
    let prompt = tok.encode(&question)?;
    println!("{question}  truth={truth:?}");

    let vd = decode_vanilla(&lm, &prompt, &tok, &DecodeConfig::vanilla())?;
    let vd_answers = parse_vd_answers(&vd.text);
    let s = score_question(&vd_answers, &truth)?;
    println!("VD : {:?} F1={:.4}", vd_answers, s.f1);

    let candidates = store.objects_of_relation("P186")?;
    let trie = TokenTrie::build(&candidates, &tok)?;
    let rcd = decode(&lm, &prompt, &trie, &vocab, &DecodeConfig::default())?;
    let rcd_answers = parse_rcd_answers(&rcd.answers, &tok)?;
    let s = score_question(&rcd_answers, &truth)?;
    println!("RCD: {:?} F1={:.4}", rcd_answers, s.f1);
    Ok(())
}
