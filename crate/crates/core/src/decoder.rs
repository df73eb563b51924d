//! Constrained (RCD) and vanilla (VD) greedy decoding.
//!
//! In RCD every generated token must extend a path of the candidate trie.
//! Completing a candidate opens two extra moves: SEP closes the answer and
//! returns to the root for another one, EOS closes it and ends generation.
//! EOS is never legal before the first answer is complete, so a finished
//! RCD run always yields at least one candidate.
//!
//! [`ConstrainedSession`] exposes the state machine one token at a time for
//! callers that run their own generation loop; [`decode`] drives it with an
//! [`LmBackend`].

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::normalize;
use crate::token::{
    BackendError, LmBackend, TokenId, TokenSequence, TokenizeError, Tokenizer, Vocabulary,
};
use crate::trie::{NodeId, TokenTrie, TrieError, ROOT};

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("invalid decode config: {0}")]
    InvalidConfig(String),
    #[error("trie has no candidates")]
    DegenerateTrie,
    #[error("backend vocabulary size {backend} does not match tokenizer vocabulary size {vocab}")]
    VocabMismatch { backend: usize, vocab: usize },
    #[error("step {step}: {source}")]
    Backend {
        step: usize,
        #[source]
        source: BackendError,
    },
    #[error("step {step}: backend returned unusable scores: {reason}")]
    BadScores { step: usize, reason: String },
    #[error("step {step}: token {token} is not legal here")]
    IllegalToken { token: TokenId, step: usize },
    #[error("session already finished")]
    Finished,
    #[error(transparent)]
    Trie(#[from] TrieError),
    #[error(transparent)]
    Detokenize(#[from] TokenizeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecodeMode {
    Rcd,
    Vd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub max_answers: usize,
    pub max_tokens: usize,
    /// When false, candidates already produced cannot be produced again.
    pub allow_repeats: bool,
    pub mode: DecodeMode,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            max_answers: 16,
            max_tokens: 256,
            allow_repeats: true,
            mode: DecodeMode::Rcd,
        }
    }
}

impl DecodeConfig {
    pub fn vanilla() -> Self {
        DecodeConfig {
            mode: DecodeMode::Vd,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), DecodeError> {
        if self.max_answers == 0 {
            return Err(DecodeError::InvalidConfig(
                "max_answers must be at least 1".into(),
            ));
        }
        if self.max_tokens == 0 {
            return Err(DecodeError::InvalidConfig(
                "max_tokens must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    InAnswer(NodeId),
    BetweenAnswers,
    Done,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeState {
    pub phase: Phase,
    pub emitted_answers: Vec<TokenSequence>,
    pub steps_taken: usize,
    current: TokenSequence,
    completed: HashSet<NodeId>,
}

impl DecodeState {
    pub fn new() -> Self {
        DecodeState {
            phase: Phase::BetweenAnswers,
            emitted_answers: Vec::new(),
            steps_taken: 0,
            current: Vec::new(),
            completed: HashSet::new(),
        }
    }

    /// Tokens of the answer being generated, if any.
    pub fn partial_answer(&self) -> &[TokenId] {
        &self.current
    }

    pub fn is_done(&self) -> bool {
        self.phase == Phase::Done
    }
}

impl Default for DecodeState {
    fn default() -> Self {
        Self::new()
    }
}

/// Legal next tokens for `state`, ascending. Empty only once `Done`.
pub fn legal_mask(
    state: &DecodeState,
    trie: &TokenTrie,
    vocab: &Vocabulary,
    config: &DecodeConfig,
) -> Result<Vec<TokenId>, TrieError> {
    let fresh = |node: NodeId| {
        config.allow_repeats
            || trie
                .accept_nodes_under(node)
                .iter()
                .any(|n| !state.completed.contains(n))
    };
    let continuations = |node: NodeId| -> Result<Vec<TokenId>, TrieError> {
        let mut out = Vec::new();
        for t in trie.allowed_next(node)? {
            if config.allow_repeats || fresh(trie.step(node, t)?.expect("listed child")) {
                out.push(t);
            }
        }
        Ok(out)
    };
    match state.phase {
        Phase::Done => Ok(Vec::new()),
        Phase::BetweenAnswers => continuations(ROOT),
        Phase::InAnswer(node) => {
            let mut out = Vec::new();
            let closable =
                trie.is_accept(node)? && (config.allow_repeats || !state.completed.contains(&node));
            if closable && state.emitted_answers.len() + 1 >= config.max_answers {
                out.push(vocab.eos_id());
                return Ok(out);
            }
            out.extend(continuations(node)?);
            if closable {
                out.push(vocab.eos_id());
                let another = config.allow_repeats
                    || trie
                        .accept_nodes_under(ROOT)
                        .iter()
                        .any(|&n| n != node && !state.completed.contains(&n));
                if another {
                    out.push(vocab.sep_id());
                }
            }
            out.sort_unstable();
            out.dedup();
            Ok(out)
        }
    }
}

/// One constrained generation, advanced a token at a time.
#[derive(Debug, Clone)]
pub struct ConstrainedSession<'t> {
    trie: &'t TokenTrie,
    vocab: Vocabulary,
    config: DecodeConfig,
    state: DecodeState,
}

impl<'t> ConstrainedSession<'t> {
    pub fn new(
        trie: &'t TokenTrie,
        vocab: Vocabulary,
        config: DecodeConfig,
    ) -> Result<Self, DecodeError> {
        config.validate()?;
        if trie.candidate_count() == 0 || trie.is_leaf(ROOT)? {
            return Err(DecodeError::DegenerateTrie);
        }
        if let Some(t) = trie
            .sequences()
            .iter()
            .flatten()
            .find(|&&t| !vocab.contains(t) || vocab.is_special(t))
        {
            return Err(DecodeError::InvalidConfig(format!(
                "trie token {t} is special or outside the vocabulary"
            )));
        }
        Ok(ConstrainedSession {
            trie,
            vocab,
            config,
            state: DecodeState::new(),
        })
    }

    pub fn state(&self) -> &DecodeState {
        &self.state
    }

    pub fn legal_tokens(&self) -> Vec<TokenId> {
        legal_mask(&self.state, self.trie, &self.vocab, &self.config)
            .expect("session nodes are valid")
    }

    /// The legal set as a vocabulary-length boolean vector.
    pub fn dense_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.vocab.size()];
        for t in self.legal_tokens() {
            mask[t as usize] = true;
        }
        mask
    }

    pub fn advance(&mut self, token: TokenId) -> Result<(), DecodeError> {
        if self.state.is_done() {
            return Err(DecodeError::Finished);
        }
        let step = self.state.steps_taken;
        if self.legal_tokens().binary_search(&token).is_err() {
            return Err(DecodeError::IllegalToken { token, step });
        }
        self.state.steps_taken += 1;
        let node = match self.state.phase {
            Phase::InAnswer(n) => n,
            _ => ROOT,
        };
        if token == self.vocab.sep_id() || token == self.vocab.eos_id() {
            let answer = std::mem::take(&mut self.state.current);
            self.state.emitted_answers.push(answer);
            self.state.completed.insert(node);
            self.state.phase = if token == self.vocab.eos_id() {
                Phase::Done
            } else {
                Phase::BetweenAnswers
            };
        } else {
            let next = self
                .trie
                .step(node, token)?
                .expect("legal token has a child");
            self.state.current.push(token);
            self.state.phase = Phase::InAnswer(next);
        }
        Ok(())
    }

    /// Stops the session without EOS; a partial answer is dropped.
    pub fn truncate(&mut self) {
        self.state.current.clear();
        self.state.phase = Phase::Done;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeOutcome {
    /// Completed answers in generation order.
    pub answers: Vec<TokenSequence>,
    /// Every token produced, including SEP and EOS.
    pub tokens: TokenSequence,
    pub truncated: bool,
    pub steps: usize,
}

fn pick(
    scores: &[f32],
    candidates: impl IntoIterator<Item = TokenId>,
    step: usize,
    vocab_size: usize,
) -> Result<TokenId, DecodeError> {
    if scores.len() != vocab_size {
        return Err(DecodeError::BadScores {
            step,
            reason: format!("expected {vocab_size} scores, got {}", scores.len()),
        });
    }
    let mut best: Option<(TokenId, f32)> = None;
    for t in candidates {
        let s = scores[t as usize];
        if !s.is_finite() {
            return Err(DecodeError::BadScores {
                step,
                reason: format!("score for token {t} is {s}"),
            });
        }
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((t, s));
        }
    }
    best.map(|(t, _)| t).ok_or(DecodeError::BadScores {
        step,
        reason: "no candidate tokens".into(),
    })
}

fn check_backend(backend: &dyn LmBackend, vocab: &Vocabulary) -> Result<(), DecodeError> {
    if backend.vocab_size() != vocab.size() {
        return Err(DecodeError::VocabMismatch {
            backend: backend.vocab_size(),
            vocab: vocab.size(),
        });
    }
    Ok(())
}

/// Greedy RCD: argmax over trie-legal tokens, ties to the smallest id.
///
/// `max_answers` forces EOS at the accept state that completes the last
/// allowed answer; `max_tokens` truncates and drops any unfinished answer.
pub fn decode(
    backend: &dyn LmBackend,
    prompt: &[TokenId],
    trie: &TokenTrie,
    vocab: &Vocabulary,
    config: &DecodeConfig,
) -> Result<DecodeOutcome, DecodeError> {
    check_backend(backend, vocab)?;
    let mut session = ConstrainedSession::new(trie, *vocab, *config)?;
    let mut tokens = Vec::new();
    let mut truncated = false;
    while !session.state().is_done() {
        let step = session.state().steps_taken;
        if step >= config.max_tokens {
            session.truncate();
            truncated = true;
            break;
        }
        let scores = backend
            .score(prompt, &tokens)
            .map_err(|source| DecodeError::Backend { step, source })?;
        let token = pick(&scores, session.legal_tokens(), step, vocab.size())?;
        session.advance(token)?;
        tokens.push(token);
    }
    let state = session.state;
    Ok(DecodeOutcome {
        answers: state.emitted_answers,
        tokens,
        truncated,
        steps: state.steps_taken,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VanillaOutcome {
    pub text: String,
    /// Generated tokens, including the final EOS if one was produced.
    pub tokens: TokenSequence,
    pub truncated: bool,
    pub steps: usize,
}

/// Unconstrained greedy decoding until EOS or `max_tokens`.
pub fn decode_vanilla(
    backend: &dyn LmBackend,
    prompt: &[TokenId],
    tokenizer: &dyn Tokenizer,
    config: &DecodeConfig,
) -> Result<VanillaOutcome, DecodeError> {
    config.validate()?;
    let vocab = tokenizer.vocab();
    check_backend(backend, vocab)?;
    let mut tokens = Vec::new();
    let mut truncated = false;
    loop {
        let step = tokens.len();
        if step >= config.max_tokens {
            truncated = true;
            break;
        }
        let scores = backend
            .score(prompt, &tokens)
            .map_err(|source| DecodeError::Backend { step, source })?;
        let token = pick(&scores, 0..vocab.size() as TokenId, step, vocab.size())?;
        tokens.push(token);
        if token == vocab.eos_id() {
            break;
        }
    }
    Ok(VanillaOutcome {
        text: tokenizer.render(&tokens)?,
        steps: tokens.len(),
        tokens,
        truncated,
    })
}

/// Decodes RCD answer sequences into a set of surface forms.
pub fn parse_rcd_answers(
    answers: &[TokenSequence],
    tokenizer: &dyn Tokenizer,
) -> Result<BTreeSet<String>, TokenizeError> {
    answers
        .iter()
        .map(|a| tokenizer.decode(a).map(|s| normalize(&s)))
        .collect()
}

/// Splits free text into one answer per non-blank line, trimmed.
pub fn parse_vd_answers(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}
