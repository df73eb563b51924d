mod common;

use std::collections::BTreeSet;

use rand::Rng;
use rcd::decoder::{legal_mask, ConstrainedSession, DecodeError};
use rcd::{DecodeConfig, Phase, TokenId, TokenSequence, TokenTrie, Vocabulary};

use common::*;

const EOS: TokenId = 0;
const SEP: TokenId = 1;

/// Legal next tokens computed directly from the candidate list and the
/// answers completed so far.
fn oracle_mask(
    seqs: &[TokenSequence],
    emitted: &[TokenSequence],
    current: Option<&[TokenId]>,
    config: &DecodeConfig,
) -> BTreeSet<TokenId> {
    let open = |c: &TokenSequence| config.allow_repeats || !emitted.contains(c);
    let prefix = current.unwrap_or(&[]);
    let mut out: BTreeSet<TokenId> = seqs
        .iter()
        .filter(|s| s.len() > prefix.len() && s.starts_with(prefix))
        .filter(|s| {
            let next = &s[..=prefix.len()];
            seqs.iter().any(|c| c.starts_with(next) && open(c))
        })
        .map(|s| s[prefix.len()])
        .collect();
    let Some(p) = current else {
        return out;
    };
    let p = p.to_vec();
    if seqs.contains(&p) && open(&p) {
        if emitted.len() + 1 >= config.max_answers {
            return BTreeSet::from([EOS]);
        }
        out.insert(EOS);
        if seqs.iter().any(|c| c != &p && open(c)) || config.allow_repeats {
            out.insert(SEP);
        }
    }
    out
}

fn walk(seqs: &[TokenSequence], config: DecodeConfig, r: &mut impl Rng) -> usize {
    let vocab = Vocabulary::new(12, EOS, SEP).unwrap();
    let trie = TokenTrie::from_sequences(seqs.to_vec()).unwrap();
    let mut session = ConstrainedSession::new(&trie, vocab, config).unwrap();
    let mut emitted: Vec<TokenSequence> = Vec::new();
    let mut current: Option<TokenSequence> = None;
    let mut steps = 0;
    while !session.state().is_done() {
        let legal = session.legal_tokens();
        let expected = oracle_mask(seqs, &emitted, current.as_deref(), &config);
        assert_eq!(legal.iter().copied().collect::<BTreeSet<_>>(), expected);
        assert_eq!(
            legal,
            legal_mask(session.state(), &trie, &vocab, &config).unwrap()
        );
        let dense = session.dense_mask();
        assert_eq!(dense.len(), vocab.size());
        for (t, &allowed) in dense.iter().enumerate() {
            assert_eq!(allowed, legal.contains(&(t as TokenId)));
        }
        assert!(!legal.is_empty(), "dead end before done");

        if let Some(bad) = (0..12).find(|t| !legal.contains(t)) {
            let before = session.state().clone();
            assert!(matches!(
                session.advance(bad),
                Err(DecodeError::IllegalToken { .. })
            ));
            assert_eq!(session.state(), &before);
        }

        let t = legal[r.random_range(0..legal.len())];
        session.advance(t).unwrap();
        steps += 1;
        if t == SEP || t == EOS {
            emitted.push(current.take().expect("closing an answer"));
        } else {
            current.get_or_insert_with(Vec::new).push(t);
        }
        assert_eq!(session.state().emitted_answers, emitted);
        assert_eq!(session.state().steps_taken, steps);
    }
    assert!(matches!(session.advance(EOS), Err(DecodeError::Finished)));
    assert!(!emitted.is_empty());
    assert!(emitted.len() <= config.max_answers);
    assert!(emitted.iter().all(|a| seqs.contains(a)));
    if !config.allow_repeats {
        let distinct: BTreeSet<_> = emitted.iter().collect();
        assert_eq!(distinct.len(), emitted.len());
    }
    steps
}

#[test]
fn random_walks_match_oracle() {
    let mut r = rng(11);
    let mut total = 0;
    for i in 0..400 {
        let n = r.random_range(1..=12);
        let seqs = random_sequences(&mut r, n, 2, 6);
        let config = DecodeConfig {
            max_answers: r.random_range(1..=6),
            allow_repeats: i % 2 == 0,
            ..DecodeConfig::default()
        };
        total += walk(&seqs, config, &mut r);
    }
    assert!(total > 1000);
}

#[test]
fn no_repeats_exhausts_then_stops() {
    let seqs = vec![vec![2], vec![2, 3]];
    let vocab = Vocabulary::new(12, EOS, SEP).unwrap();
    let trie = TokenTrie::from_sequences(seqs).unwrap();
    let config = DecodeConfig {
        allow_repeats: false,
        ..DecodeConfig::default()
    };
    let mut s = ConstrainedSession::new(&trie, vocab, config).unwrap();
    s.advance(2).unwrap();
    assert_eq!(s.legal_tokens(), vec![EOS, SEP, 3]);
    s.advance(SEP).unwrap();
    assert_eq!(s.legal_tokens(), vec![2]);
    s.advance(2).unwrap();
    assert_eq!(s.legal_tokens(), vec![3]);
    s.advance(3).unwrap();
    assert_eq!(s.legal_tokens(), vec![EOS]);
    s.advance(EOS).unwrap();
    assert_eq!(s.state().emitted_answers, vec![vec![2], vec![2, 3]]);
}

#[test]
fn pre_encoded_single_candidate_mask() {
    // The external-loop surface: a trie from raw ids and a dense cursor.
    let vocab = Vocabulary::new(8, EOS, SEP).unwrap();
    let trie = TokenTrie::from_sequences([vec![5]]).unwrap();
    let mut s = ConstrainedSession::new(&trie, vocab, DecodeConfig::default()).unwrap();
    let mask = s.dense_mask();
    assert_eq!(mask.iter().filter(|&&b| b).count(), 1);
    assert!(mask[5]);
    s.advance(5).unwrap();
    let mask = s.dense_mask();
    assert!(mask[EOS as usize] && mask[SEP as usize]);
    assert_eq!(mask.iter().filter(|&&b| b).count(), 2);
    assert!(s.advance(4).is_err());
    assert_eq!(s.state().phase, Phase::InAnswer(trie.walk(&[5]).unwrap()));
}

#[test]
fn session_rejects_special_tokens_in_trie() {
    let vocab = Vocabulary::new(8, EOS, SEP).unwrap();
    let trie = TokenTrie::from_sequences([vec![3, SEP]]).unwrap();
    assert!(ConstrainedSession::new(&trie, vocab, DecodeConfig::default()).is_err());
    let trie = TokenTrie::from_sequences([vec![3, 9]]).unwrap();
    assert!(ConstrainedSession::new(&trie, vocab, DecodeConfig::default()).is_err());
}

#[test]
fn serialized_trie_gives_identical_masks() {
    let mut r = rng(12);
    let vocab = Vocabulary::new(12, EOS, SEP).unwrap();
    for _ in 0..50 {
        let seqs = random_sequences(&mut r, 10, 2, 12);
        let trie = TokenTrie::from_sequences(seqs).unwrap();
        let back = TokenTrie::from_bytes(&trie.to_bytes()).unwrap();
        let mut a = ConstrainedSession::new(&trie, vocab, DecodeConfig::default()).unwrap();
        let mut b = ConstrainedSession::new(&back, vocab, DecodeConfig::default()).unwrap();
        while !a.state().is_done() {
            assert_eq!(a.dense_mask(), b.dense_mask());
            let legal = a.legal_tokens();
            let t = legal[r.random_range(0..legal.len())];
            a.advance(t).unwrap();
            b.advance(t).unwrap();
        }
    }
}
