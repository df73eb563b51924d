//! Drive a constrained session step by step the way an external generation
//! loop would: the trie comes from pre-encoded token ids, and every step
//! hands back a vocabulary-length boolean mask.
//!
//! ```bash
//! cargo run -p rcd --example logits_session
//! ```

use rcd::decoder::ConstrainedSession;
use rcd::{DecodeConfig, LmBackend, NoiseLm, TokenTrie, Vocabulary};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // A 12-token vocabulary: 0 = EOS, 1 = SEP, 2..12 ordinary tokens.
    let vocab = Vocabulary::new(12, 0, 1)?;
    let trie = TokenTrie::from_sequences([vec![5, 6], vec![5, 6, 7], vec![9], vec![3, 4, 2]])?;
    let mut session = ConstrainedSession::new(&trie, vocab, DecodeConfig::default())?;

    let lm = NoiseLm::new(vocab.size(), 7);
    let mut generated = Vec::new();
    while !session.state().is_done() {
        let mask = session.dense_mask();
        let mut logits = lm.score(&[], &generated)?;
        for (l, allowed) in logits.iter_mut().zip(&mask) {
            if !allowed {
                *l = f32::NEG_INFINITY;
            }
        }
        let next = rcd::token::argmax(&logits).expect("mask is never empty");
        let shown: String = mask.iter().map(|&b| if b { '1' } else { '.' }).collect();
        println!("mask {shown} -> {next}");
        session.advance(next)?;
        generated.push(next);
    }
    println!("answers: {:?}", session.state().emitted_answers);

    let mut fresh = ConstrainedSession::new(&trie, vocab, DecodeConfig::default())?;
    println!("illegal first token: {}", fresh.advance(8).unwrap_err());
    Ok(())
}
