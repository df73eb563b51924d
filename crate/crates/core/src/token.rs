//! Tokenizers and language-model backends.
//!
//! The decoder never looks inside a model: it asks a [`LmBackend`] for one
//! score per vocabulary id given the prompt and the tokens generated so far,
//! and takes an argmax over whatever the constraint allows. The backends in
//! this module are deterministic stand-ins used by tests, examples and the
//! CLI; real engines plug in by implementing the same trait.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type TokenId = u32;
pub type TokenSequence = Vec<TokenId>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TokenizeError {
    #[error("word `{0}` is not in the vocabulary")]
    UnknownWord(String),
    #[error("text is outside the tokenizer alphabet: {0}")]
    NotInAlphabet(String),
    #[error("token id {0} cannot be decoded")]
    InvalidToken(TokenId),
    #[error("decoded bytes are not valid UTF-8")]
    InvalidUtf8,
}

#[derive(Debug, Error)]
#[error("backend failure: {0}")]
pub struct BackendError(pub String);

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("vocabulary size must be positive")]
    Empty,
    #[error("special token {0} is out of range for vocabulary size {1}")]
    OutOfRange(TokenId, usize),
    #[error("EOS and SEP must be distinct (both {0})")]
    SameSpecial(TokenId),
}

/// Vocabulary size and the two special tokens the decoder relies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    size: usize,
    eos_id: TokenId,
    sep_id: TokenId,
}

impl Vocabulary {
    pub fn new(size: usize, eos_id: TokenId, sep_id: TokenId) -> Result<Self, VocabError> {
        if size == 0 {
            return Err(VocabError::Empty);
        }
        for id in [eos_id, sep_id] {
            if id as usize >= size {
                return Err(VocabError::OutOfRange(id, size));
            }
        }
        if eos_id == sep_id {
            return Err(VocabError::SameSpecial(eos_id));
        }
        Ok(Vocabulary {
            size,
            eos_id,
            sep_id,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn eos_id(&self) -> TokenId {
        self.eos_id
    }

    pub fn sep_id(&self) -> TokenId {
        self.sep_id
    }

    pub fn is_special(&self, id: TokenId) -> bool {
        id == self.eos_id || id == self.sep_id
    }

    pub fn contains(&self, id: TokenId) -> bool {
        (id as usize) < self.size
    }
}

pub trait Tokenizer: Send + Sync {
    fn vocab(&self) -> &Vocabulary;

    fn encode(&self, text: &str) -> Result<TokenSequence, TokenizeError>;

    /// Decodes ordinary (non-special) tokens.
    fn decode(&self, ids: &[TokenId]) -> Result<String, TokenizeError>;

    /// Text that stands in for SEP when a generation is rendered as text.
    fn sep_string(&self) -> &str {
        "\n"
    }

    /// Renders a raw generation: SEP becomes [`sep_string`](Self::sep_string)
    /// and everything from the first EOS on is dropped.
    fn render(&self, ids: &[TokenId]) -> Result<String, TokenizeError> {
        let vocab = self.vocab();
        let end = ids
            .iter()
            .position(|&t| t == vocab.eos_id())
            .unwrap_or(ids.len());
        let mut out = String::new();
        for (i, chunk) in ids[..end].split(|&t| t == vocab.sep_id()).enumerate() {
            if i > 0 {
                out.push_str(self.sep_string());
            }
            out.push_str(&self.decode(chunk)?);
        }
        Ok(out)
    }
}

/// One token per UTF-8 byte; ids 256 and 257 are EOS and SEP.
#[derive(Debug, Clone)]
pub struct ByteTokenizer {
    vocab: Vocabulary,
    sep_string: String,
}

impl ByteTokenizer {
    pub const EOS: TokenId = 256;
    pub const SEP: TokenId = 257;

    pub fn new() -> Self {
        ByteTokenizer {
            vocab: Vocabulary::new(258, Self::EOS, Self::SEP).expect("static vocabulary"),
            sep_string: "\n".to_string(),
        }
    }

    pub fn with_sep_string(mut self, sep: impl Into<String>) -> Self {
        self.sep_string = sep.into();
        self
    }
}

impl Default for ByteTokenizer {
    fn default() -> Self {
        Self::new()
    }
}

impl Tokenizer for ByteTokenizer {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn encode(&self, text: &str) -> Result<TokenSequence, TokenizeError> {
        Ok(text.bytes().map(TokenId::from).collect())
    }

    fn decode(&self, ids: &[TokenId]) -> Result<String, TokenizeError> {
        let bytes = ids
            .iter()
            .map(|&id| u8::try_from(id).map_err(|_| TokenizeError::InvalidToken(id)))
            .collect::<Result<Vec<u8>, _>>()?;
        String::from_utf8(bytes).map_err(|_| TokenizeError::InvalidUtf8)
    }

    fn sep_string(&self) -> &str {
        &self.sep_string
    }
}

/// Word-level tokenizer over a closed vocabulary.
///
/// Its alphabet is texts made of lines whose words are separated by single
/// spaces. Each word is one token, each newline is the token `"\n"`, and the
/// spaces between words are implicit. Ids 0 and 1 are EOS and SEP.
#[derive(Debug, Clone)]
pub struct WhitespaceTokenizer {
    vocab: Vocabulary,
    words: Vec<String>,
    ids: HashMap<String, TokenId>,
    sep_string: String,
}

impl WhitespaceTokenizer {
    pub const EOS: TokenId = 0;
    pub const SEP: TokenId = 1;
    pub const NEWLINE: TokenId = 2;
    const FIRST_WORD: TokenId = 3;

    /// Builds the vocabulary from every whitespace-separated word in `texts`.
    /// Ids are assigned in sorted word order, so the result does not depend
    /// on the order of `texts`.
    pub fn from_texts<I, S>(texts: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut words: Vec<String> = texts
            .into_iter()
            .flat_map(|t| {
                t.as_ref()
                    .split_whitespace()
                    .map(str::to_string)
                    .collect::<Vec<_>>()
            })
            .collect();
        words.sort();
        words.dedup();
        let ids = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), Self::FIRST_WORD + i as TokenId))
            .collect();
        let size = Self::FIRST_WORD as usize + words.len();
        WhitespaceTokenizer {
            vocab: Vocabulary::new(size, Self::EOS, Self::SEP).expect("static specials"),
            words,
            ids,
            sep_string: "\n".to_string(),
        }
    }

    pub fn with_sep_string(mut self, sep: impl Into<String>) -> Self {
        self.sep_string = sep.into();
        self
    }

    /// Token id of a single word.
    pub fn id(&self, word: &str) -> Option<TokenId> {
        if word == "\n" {
            return Some(Self::NEWLINE);
        }
        self.ids.get(word).copied()
    }

    pub fn word(&self, id: TokenId) -> Option<&str> {
        match id {
            Self::NEWLINE => Some("\n"),
            id if id >= Self::FIRST_WORD => self
                .words
                .get((id - Self::FIRST_WORD) as usize)
                .map(String::as_str),
            _ => None,
        }
    }
}

impl Tokenizer for WhitespaceTokenizer {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn encode(&self, text: &str) -> Result<TokenSequence, TokenizeError> {
        let mut out = Vec::new();
        for (i, line) in text.split('\n').enumerate() {
            if i > 0 {
                out.push(Self::NEWLINE);
            }
            if line.is_empty() {
                continue;
            }
            for word in line.split(' ') {
                if word.is_empty() {
                    return Err(TokenizeError::NotInAlphabet(format!(
                        "irregular spacing in {line:?}"
                    )));
                }
                if let Some(c) = word.chars().find(|c| c.is_whitespace()) {
                    return Err(TokenizeError::NotInAlphabet(format!(
                        "whitespace character {c:?}"
                    )));
                }
                let id = self
                    .ids
                    .get(word)
                    .ok_or_else(|| TokenizeError::UnknownWord(word.to_string()))?;
                out.push(*id);
            }
        }
        Ok(out)
    }

    fn decode(&self, ids: &[TokenId]) -> Result<String, TokenizeError> {
        let mut out = String::new();
        let mut prev_word = false;
        for &id in ids {
            let w = self.word(id).ok_or(TokenizeError::InvalidToken(id))?;
            if id == Self::NEWLINE {
                out.push('\n');
                prev_word = false;
            } else {
                if prev_word {
                    out.push(' ');
                }
                out.push_str(w);
                prev_word = true;
            }
        }
        Ok(out)
    }

    fn sep_string(&self) -> &str {
        &self.sep_string
    }
}

/// Scores every vocabulary id given the prompt and the generation so far.
/// Higher is more likely; implementations must be deterministic and return
/// finite values.
pub trait LmBackend: Send + Sync {
    fn vocab_size(&self) -> usize;

    fn score(&self, prompt: &[TokenId], generated: &[TokenId]) -> Result<Vec<f32>, BackendError>;
}

impl<B: LmBackend + ?Sized> LmBackend for &B {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn score(&self, prompt: &[TokenId], generated: &[TokenId]) -> Result<Vec<f32>, BackendError> {
        (**self).score(prompt, generated)
    }
}

impl<B: LmBackend + ?Sized> LmBackend for Box<B> {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn score(&self, prompt: &[TokenId], generated: &[TokenId]) -> Result<Vec<f32>, BackendError> {
        (**self).score(prompt, generated)
    }
}

/// Incremental FNV-1a hash over a token context.
#[derive(Debug, Clone, Copy)]
pub struct ContextHasher(u64);

impl ContextHasher {
    pub fn new() -> Self {
        ContextHasher(0xcbf2_9ce4_8422_2325)
    }

    pub fn push(&mut self, token: TokenId) {
        for b in token.to_le_bytes() {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    pub fn extend(&mut self, tokens: &[TokenId]) {
        for &t in tokens {
            self.push(t);
        }
    }

    pub fn finish(&self) -> u64 {
        self.0
    }

    pub fn of(prompt: &[TokenId], generated: &[TokenId]) -> u64 {
        let mut h = ContextHasher::new();
        h.extend(prompt);
        h.extend(generated);
        h.finish()
    }
}

impl Default for ContextHasher {
    fn default() -> Self {
        Self::new()
    }
}

/// On-disk mock script: `{"contexts": [{"prefix": [...], "next": id}, ...]}`.
///
/// An entry may carry `"continuation": [...]` instead of `"next"`, which is
/// shorthand for one `next` entry per position of the continuation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockScript {
    pub contexts: Vec<ScriptEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub prefix: Vec<TokenId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub next: Option<TokenId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub continuation: Option<Vec<TokenId>>,
}

impl MockScript {
    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let text = fs::read_to_string(path)
            .map_err(|e| BackendError(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| BackendError(format!("malformed script {}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let json = serde_json::to_string(self).map_err(std::io::Error::other)?;
        fs::write(path, json + "\n")
    }
}

/// A backend that replays a script: the scripted next token for a context
/// scores 0, every other token scores -1. Unscripted contexts prefer EOS.
#[derive(Debug, Clone)]
pub struct ScriptedLm {
    vocab: Vocabulary,
    next: HashMap<u64, TokenId>,
}

impl ScriptedLm {
    pub fn new(vocab: Vocabulary) -> Self {
        ScriptedLm {
            vocab,
            next: HashMap::new(),
        }
    }

    /// Scripts `sequence` as the preferred continuation of `context`.
    pub fn from_sequences<I, C, S>(vocab: Vocabulary, entries: I) -> Self
    where
        I: IntoIterator<Item = (C, S)>,
        C: AsRef<[TokenId]>,
        S: AsRef<[TokenId]>,
    {
        let mut lm = ScriptedLm::new(vocab);
        for (ctx, seq) in entries {
            lm.insert_sequence(ctx.as_ref(), seq.as_ref());
        }
        lm
    }

    pub fn from_script(vocab: Vocabulary, script: &MockScript) -> Result<Self, BackendError> {
        let mut lm = ScriptedLm::new(vocab);
        for (i, entry) in script.contexts.iter().enumerate() {
            let check = |ids: &[TokenId]| {
                ids.iter().try_for_each(|&t| {
                    if vocab.contains(t) {
                        Ok(())
                    } else {
                        Err(BackendError(format!(
                            "script entry {i}: token {t} outside vocabulary of {}",
                            vocab.size()
                        )))
                    }
                })
            };
            check(&entry.prefix)?;
            match (&entry.next, &entry.continuation) {
                (Some(next), None) => {
                    check(&[*next])?;
                    lm.insert_next(&entry.prefix, *next);
                }
                (None, Some(seq)) => {
                    check(seq)?;
                    lm.insert_sequence(&entry.prefix, seq);
                }
                _ => {
                    return Err(BackendError(format!(
                        "script entry {i}: exactly one of `next` or `continuation` is required"
                    )))
                }
            }
        }
        Ok(lm)
    }

    pub fn load(vocab: Vocabulary, path: &Path) -> Result<Self, BackendError> {
        Self::from_script(vocab, &MockScript::load(path)?)
    }

    pub fn insert_next(&mut self, context: &[TokenId], next: TokenId) {
        self.next.insert(ContextHasher::of(context, &[]), next);
    }

    pub fn insert_sequence(&mut self, context: &[TokenId], sequence: &[TokenId]) {
        let mut h = ContextHasher::new();
        h.extend(context);
        for &t in sequence {
            self.next.insert(h.finish(), t);
            h.push(t);
        }
    }

    /// The token this backend prefers after `prompt ++ generated`.
    pub fn preferred(&self, prompt: &[TokenId], generated: &[TokenId]) -> TokenId {
        self.next
            .get(&ContextHasher::of(prompt, generated))
            .copied()
            .unwrap_or(self.vocab.eos_id())
    }
}

impl LmBackend for ScriptedLm {
    fn vocab_size(&self) -> usize {
        self.vocab.size()
    }

    fn score(&self, prompt: &[TokenId], generated: &[TokenId]) -> Result<Vec<f32>, BackendError> {
        let mut scores = vec![-1.0; self.vocab.size()];
        scores[self.preferred(prompt, generated) as usize] = 0.0;
        Ok(scores)
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Pseudo-random scores in `[-10, 0)`, a pure function of
/// `(seed, context, token)`. Used as an adversarial backend.
#[derive(Debug, Clone, Copy)]
pub struct NoiseLm {
    vocab_size: usize,
    seed: u64,
}

impl NoiseLm {
    pub fn new(vocab_size: usize, seed: u64) -> Self {
        NoiseLm { vocab_size, seed }
    }
}

impl LmBackend for NoiseLm {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn score(&self, prompt: &[TokenId], generated: &[TokenId]) -> Result<Vec<f32>, BackendError> {
        let ctx = splitmix64(ContextHasher::of(prompt, generated) ^ self.seed);
        Ok((0..self.vocab_size as u64)
            .map(|t| {
                let bits = splitmix64(ctx ^ t.wrapping_mul(0x2545_f491_4f6c_dd1d)) >> 11;
                -10.0 * (bits as f64 / (1u64 << 53) as f64) as f32
            })
            .collect())
    }
}

/// Index of the largest score; ties go to the smallest id.
pub fn argmax(scores: &[f32]) -> Option<TokenId> {
    let mut best: Option<(usize, f32)> = None;
    for (i, &s) in scores.iter().enumerate() {
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i as TokenId)
}

/// Wraps a backend so that, whenever the inner model wants to close an
/// answer with SEP or EOS, it first rambles `suffix` (e.g. an explanation).
///
/// The inner model's own ranking is kept as the runner-up, so a decoder that
/// forbids the suffix tokens sees exactly the inner model's choices.
#[derive(Debug, Clone)]
pub struct VerbalizerLm<B> {
    inner: B,
    vocab: Vocabulary,
    suffix: Vec<TokenId>,
}

impl<B: LmBackend> VerbalizerLm<B> {
    pub fn new(inner: B, vocab: Vocabulary, suffix: Vec<TokenId>) -> Self {
        VerbalizerLm {
            inner,
            vocab,
            suffix,
        }
    }

    fn strip(&self, generated: &[TokenId]) -> Vec<TokenId> {
        let n = self.suffix.len();
        let mut out = Vec::with_capacity(generated.len());
        let mut i = 0;
        while i < generated.len() {
            if n > 0 && generated[i..].starts_with(&self.suffix) {
                i += n;
            } else {
                out.push(generated[i]);
                i += 1;
            }
        }
        out
    }

    fn closes(&self, scores: &[f32]) -> bool {
        argmax(scores).is_some_and(|t| self.vocab.is_special(t))
    }

    fn boosted(mut scores: Vec<f32>, token: TokenId) -> Vec<f32> {
        let top = scores.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        scores[token as usize] = top + 1.0;
        scores
    }
}

impl<B: LmBackend> LmBackend for VerbalizerLm<B> {
    fn vocab_size(&self) -> usize {
        self.inner.vocab_size()
    }

    fn score(&self, prompt: &[TokenId], generated: &[TokenId]) -> Result<Vec<f32>, BackendError> {
        let n = self.suffix.len();
        if n == 0 || generated.ends_with(&self.suffix) {
            return self.inner.score(prompt, &self.strip(generated));
        }
        for k in (1..n).rev() {
            if generated.ends_with(&self.suffix[..k]) {
                let base = self.strip(&generated[..generated.len() - k]);
                let scores = self.inner.score(prompt, &base)?;
                if self.closes(&scores) {
                    return Ok(Self::boosted(scores, self.suffix[k]));
                }
            }
        }
        let scores = self.inner.score(prompt, &self.strip(generated))?;
        if self.closes(&scores) {
            Ok(Self::boosted(scores, self.suffix[0]))
        } else {
            Ok(scores)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn vocabulary_validates_specials() {
        assert!(Vocabulary::new(0, 0, 1).is_err());
        assert!(Vocabulary::new(4, 4, 1).is_err());
        assert!(Vocabulary::new(4, 2, 2).is_err());
        let v = Vocabulary::new(4, 2, 3).unwrap();
        assert!(v.is_special(3) && !v.is_special(0));
    }

    #[test]
    fn byte_tokenizer_uses_byte_values() {
        let t = ByteTokenizer::new();
        assert_eq!(t.encode("ab").unwrap(), vec![97, 98]);
        assert_eq!(t.decode(&[97, 98]).unwrap(), "ab");
        assert_eq!(
            t.decode(&[ByteTokenizer::EOS]),
            Err(TokenizeError::InvalidToken(256))
        );
        assert_eq!(t.decode(&[0xff]), Err(TokenizeError::InvalidUtf8));
    }

    #[test]
    fn whitespace_tokenizer_words() {
        let t = WhitespaceTokenizer::from_texts(["RATP Group", "Paris"]);
        let ids = t.encode("RATP Group").unwrap();
        assert_eq!(ids, vec![t.id("RATP").unwrap(), t.id("Group").unwrap()]);
        assert_eq!(t.decode(&ids).unwrap(), "RATP Group");
        assert_eq!(
            t.encode("RATP Metro"),
            Err(TokenizeError::UnknownWord("Metro".into()))
        );
        assert!(matches!(
            t.encode("RATP  Group"),
            Err(TokenizeError::NotInAlphabet(_))
        ));
        assert!(matches!(
            t.encode("RATP\tGroup"),
            Err(TokenizeError::NotInAlphabet(_))
        ));
    }

    #[test]
    fn whitespace_tokenizer_newlines() {
        let t = WhitespaceTokenizer::from_texts(["a b c"]);
        let text = "a b\n\nc\n";
        let ids = t.encode(text).unwrap();
        assert_eq!(
            ids.iter()
                .filter(|&&i| i == WhitespaceTokenizer::NEWLINE)
                .count(),
            3
        );
        assert_eq!(t.decode(&ids).unwrap(), text);
    }

    #[test]
    fn vocabulary_independent_of_text_order() {
        let a = WhitespaceTokenizer::from_texts(["x y", "z"]);
        let b = WhitespaceTokenizer::from_texts(["z", "y x"]);
        assert_eq!(a.id("y"), b.id("y"));
    }

    #[test]
    fn render_maps_sep_and_stops_at_eos() {
        let t = ByteTokenizer::new();
        let ids = [97, ByteTokenizer::SEP, 98, ByteTokenizer::EOS, 99];
        assert_eq!(t.render(&ids).unwrap(), "a\nb");
        let t = t.with_sep_string(" | ");
        assert_eq!(t.render(&ids).unwrap(), "a | b");
    }

    #[test]
    fn scripted_lm_replays_sequence() {
        let vocab = Vocabulary::new(6, 0, 1).unwrap();
        let lm = ScriptedLm::from_sequences(vocab, [(vec![], vec![4, 5, 0])]);
        assert_eq!(lm.preferred(&[], &[]), 4);
        assert_eq!(lm.preferred(&[], &[4]), 5);
        assert_eq!(lm.preferred(&[], &[4, 5]), 0);
        let scores = lm.score(&[], &[4]).unwrap();
        assert_eq!(scores, vec![-1.0, -1.0, -1.0, -1.0, -1.0, 0.0]);
        // Context is prompt ++ generated, however it is split.
        assert_eq!(lm.preferred(&[4], &[]), 5);
    }

    #[test]
    fn empty_script_prefers_eos() {
        let vocab = Vocabulary::new(6, 3, 1).unwrap();
        let lm = ScriptedLm::new(vocab);
        assert_eq!(argmax(&lm.score(&[2], &[]).unwrap()), Some(3));
    }

    #[test]
    fn script_file_round_trip_and_validation() {
        let vocab = Vocabulary::new(10, 0, 1).unwrap();
        let json = r#"{"contexts": [{"prefix": [7], "next": 4}, {"prefix": [8], "continuation": [5, 6]}]}"#;
        let script: MockScript = serde_json::from_str(json).unwrap();
        let lm = ScriptedLm::from_script(vocab, &script).unwrap();
        assert_eq!(lm.preferred(&[7], &[]), 4);
        assert_eq!(lm.preferred(&[8], &[5]), 6);

        let bad: MockScript =
            serde_json::from_str(r#"{"contexts": [{"prefix": [], "next": 99}]}"#).unwrap();
        assert!(ScriptedLm::from_script(vocab, &bad).is_err());
        let both: MockScript = serde_json::from_str(
            r#"{"contexts": [{"prefix": [], "next": 2, "continuation": [2]}]}"#,
        )
        .unwrap();
        assert!(ScriptedLm::from_script(vocab, &both).is_err());
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[0.0, 1.0, 1.0]), Some(1));
        assert_eq!(argmax(&[]), None);
    }

    #[test]
    fn noise_lm_is_pure() {
        let lm = NoiseLm::new(50, 7);
        let a = lm.score(&[1, 2], &[3]).unwrap();
        let b = lm.score(&[1, 2], &[3]).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|s| s.is_finite() && *s <= 0.0 && *s >= -10.0));
        assert_ne!(a, lm.score(&[1, 2], &[4]).unwrap());
    }

    #[test]
    fn verbalizer_appends_suffix_before_closing() {
        let vocab = Vocabulary::new(10, 0, 1).unwrap();
        let inner = ScriptedLm::from_sequences(vocab, [(vec![9], vec![4, 1, 5, 0])]);
        let lm = VerbalizerLm::new(&inner, vocab, vec![7, 8]);
        let mut generated = Vec::new();
        for _ in 0..20 {
            let t = argmax(&lm.score(&[9], &generated).unwrap()).unwrap();
            generated.push(t);
            if t == 0 {
                break;
            }
        }
        assert_eq!(generated, vec![4, 7, 8, 1, 5, 7, 8, 0]);
        // runner-up is the inner choice
        let s = lm.score(&[9], &[4]).unwrap();
        assert_eq!(s[7], 1.0);
        assert_eq!(s[1], 0.0);
    }

    proptest! {
        #[test]
        fn byte_round_trip(s in ".*") {
            let t = ByteTokenizer::new();
            prop_assert_eq!(t.decode(&t.encode(&s).unwrap()).unwrap(), s);
        }

        #[test]
        fn whitespace_round_trip(lines in prop::collection::vec(
            prop::collection::vec("[A-Za-zé0-9()'-]{1,8}", 0..5), 1..4)) {
            let text = lines
                .iter()
                .map(|words| words.join(" "))
                .collect::<Vec<_>>()
                .join("\n");
            let t = WhitespaceTokenizer::from_texts([&text]);
            prop_assert_eq!(t.decode(&t.encode(&text).unwrap()).unwrap(), text);
        }

        #[test]
        fn scripted_lm_is_pure(ctx in prop::collection::vec(0u32..6, 0..8)) {
            let vocab = Vocabulary::new(6, 0, 1).unwrap();
            let lm = ScriptedLm::from_sequences(vocab, [(vec![2, 3], vec![4, 5, 0])]);
            prop_assert_eq!(lm.score(&ctx, &[]).unwrap(), lm.score(&ctx, &[]).unwrap());
        }
    }
}
