//! Prefix tree over candidate token sequences.
//!
//! Nodes live in a dense arena; node 0 is the root. Each node keeps its
//! children sorted by token id, so `allowed_next` is a slice view and `step`
//! is a binary search over the node's branching.
//!
//! Binary format (little-endian):
//!
//! ```text
//! "RCDT" | version u32 | node_count u32
//! per node: child_count u32 | (token u32, child u32) * child_count | accept u8
//! ```

use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::token::{TokenId, TokenSequence, TokenizeError, Tokenizer};

pub type NodeId = u32;

pub const ROOT: NodeId = 0;

const MAGIC: &[u8; 4] = b"RCDT";
const VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TrieError {
    #[error("candidate set is empty")]
    NoCandidates,
    #[error("candidate `{0}` encodes to an empty token sequence")]
    EmptyEncoding(String),
    #[error("cannot encode candidate `{candidate}`: {source}")]
    Encode {
        candidate: String,
        #[source]
        source: TokenizeError,
    },
    #[error("node {0} does not exist")]
    InvalidNode(NodeId),
    #[error("malformed trie bytes: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Node {
    children: Vec<(TokenId, NodeId)>,
    accept: bool,
}

impl Node {
    fn child(&self, token: TokenId) -> Option<NodeId> {
        self.children
            .binary_search_by_key(&token, |&(t, _)| t)
            .ok()
            .map(|i| self.children[i].1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenTrie {
    nodes: Vec<Node>,
    candidate_count: usize,
}

impl TokenTrie {
    /// Builds a trie from the canonical encodings of `candidates`.
    ///
    /// Candidates are processed in sorted order, so node numbering does not
    /// depend on the iteration order of the input.
    pub fn build<I, S>(candidates: I, tokenizer: &dyn Tokenizer) -> Result<Self, TrieError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let sorted: BTreeSet<String> = candidates
            .into_iter()
            .map(|c| c.as_ref().to_string())
            .collect();
        let mut seqs = Vec::with_capacity(sorted.len());
        for c in sorted {
            let ids = tokenizer.encode(&c).map_err(|source| TrieError::Encode {
                candidate: c.clone(),
                source,
            })?;
            if ids.is_empty() {
                return Err(TrieError::EmptyEncoding(c));
            }
            seqs.push(ids);
        }
        Self::from_sequences(seqs)
    }

    /// Builds a trie from pre-encoded token sequences.
    pub fn from_sequences<I>(sequences: I) -> Result<Self, TrieError>
    where
        I: IntoIterator<Item = TokenSequence>,
    {
        let sorted: BTreeSet<TokenSequence> = sequences.into_iter().collect();
        if sorted.is_empty() {
            return Err(TrieError::NoCandidates);
        }
        let mut nodes = vec![Node::default()];
        for seq in &sorted {
            if seq.is_empty() {
                return Err(TrieError::EmptyEncoding(String::new()));
            }
            let mut cur = ROOT as usize;
            for &tok in seq {
                cur = match nodes[cur].children.binary_search_by_key(&tok, |&(t, _)| t) {
                    Ok(i) => nodes[cur].children[i].1 as usize,
                    Err(i) => {
                        let id = nodes.len();
                        nodes[cur].children.insert(i, (tok, id as NodeId));
                        nodes.push(Node::default());
                        id
                    }
                };
            }
            nodes[cur].accept = true;
        }
        Ok(TokenTrie {
            nodes,
            candidate_count: sorted.len(),
        })
    }

    pub fn root(&self) -> NodeId {
        ROOT
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Number of distinct candidate encodings.
    pub fn candidate_count(&self) -> usize {
        self.candidate_count
    }

    fn node(&self, id: NodeId) -> Result<&Node, TrieError> {
        self.nodes
            .get(id as usize)
            .ok_or(TrieError::InvalidNode(id))
    }

    /// Tokens that continue a candidate path from `node`, ascending.
    pub fn allowed_next(
        &self,
        node: NodeId,
    ) -> Result<impl Iterator<Item = TokenId> + '_, TrieError> {
        Ok(self.node(node)?.children.iter().map(|&(t, _)| t))
    }

    pub fn is_accept(&self, node: NodeId) -> Result<bool, TrieError> {
        Ok(self.node(node)?.accept)
    }

    pub fn is_leaf(&self, node: NodeId) -> Result<bool, TrieError> {
        Ok(self.node(node)?.children.is_empty())
    }

    /// Follows `token` from `node`; `Ok(None)` means the token is rejected.
    pub fn step(&self, node: NodeId, token: TokenId) -> Result<Option<NodeId>, TrieError> {
        Ok(self.node(node)?.child(token))
    }

    /// Walks `tokens` from the root.
    pub fn walk(&self, tokens: &[TokenId]) -> Option<NodeId> {
        tokens
            .iter()
            .try_fold(ROOT, |n, &t| self.nodes[n as usize].child(t))
    }

    /// Whether `tokens` spells a complete candidate.
    pub fn accepts(&self, tokens: &[TokenId]) -> bool {
        self.walk(tokens)
            .is_some_and(|n| self.nodes[n as usize].accept)
    }

    /// Every accepted sequence, in lexicographic token order.
    pub fn sequences(&self) -> Vec<TokenSequence> {
        let mut out = Vec::with_capacity(self.candidate_count);
        let mut path = Vec::new();
        self.collect(ROOT, &mut path, &mut out);
        out
    }

    fn collect(&self, node: NodeId, path: &mut Vec<TokenId>, out: &mut Vec<TokenSequence>) {
        let n = &self.nodes[node as usize];
        if n.accept {
            out.push(path.clone());
        }
        for &(t, child) in &n.children {
            path.push(t);
            self.collect(child, path, out);
            path.pop();
        }
    }

    /// Accept nodes in the subtree rooted at `node` (inclusive).
    pub fn accept_nodes_under(&self, node: NodeId) -> Vec<NodeId> {
        let mut stack = vec![node];
        let mut out = Vec::new();
        while let Some(n) = stack.pop() {
            let nd = &self.nodes[n as usize];
            if nd.accept {
                out.push(n);
            }
            stack.extend(nd.children.iter().map(|&(_, c)| c));
        }
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + self.nodes.len() * 9);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.nodes.len() as u32).to_le_bytes());
        for n in &self.nodes {
            out.extend_from_slice(&(n.children.len() as u32).to_le_bytes());
            for &(t, c) in &n.children {
                out.extend_from_slice(&t.to_le_bytes());
                out.extend_from_slice(&c.to_le_bytes());
            }
            out.push(u8::from(n.accept));
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TrieError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(TrieError::Format("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(TrieError::Format(format!("unsupported version {version}")));
        }
        let count = r.u32()? as usize;
        if count == 0 {
            return Err(TrieError::Format("no root node".into()));
        }
        let mut nodes = Vec::with_capacity(count.min(bytes.len()));
        for _ in 0..count {
            let k = r.u32()? as usize;
            let mut children = Vec::with_capacity(k.min(bytes.len()));
            for _ in 0..k {
                let t = r.u32()?;
                let c = r.u32()?;
                if c as usize >= count || c == ROOT {
                    return Err(TrieError::Format(format!("child {c} out of range")));
                }
                children.push((t, c));
            }
            if children.windows(2).any(|w| w[0].0 >= w[1].0) {
                return Err(TrieError::Format("children not sorted".into()));
            }
            let accept = match r.take(1)?[0] {
                0 => false,
                1 => true,
                b => return Err(TrieError::Format(format!("bad accept flag {b}"))),
            };
            nodes.push(Node { children, accept });
        }
        if r.pos != bytes.len() {
            return Err(TrieError::Format("trailing bytes".into()));
        }
        let candidate_count = nodes.iter().filter(|n| n.accept).count();
        if candidate_count == 0 {
            return Err(TrieError::NoCandidates);
        }
        let trie = TokenTrie {
            nodes,
            candidate_count,
        };
        trie.check_tree()?;
        Ok(trie)
    }

    // Every non-root node has exactly one parent and is reachable.
    fn check_tree(&self) -> Result<(), TrieError> {
        let mut seen = vec![false; self.nodes.len()];
        seen[0] = true;
        let mut stack = vec![ROOT];
        while let Some(n) = stack.pop() {
            for &(_, c) in &self.nodes[n as usize].children {
                if std::mem::replace(&mut seen[c as usize], true) {
                    return Err(TrieError::Format(format!("node {c} has two parents")));
                }
                stack.push(c);
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(TrieError::Format("unreachable node".into()));
        }
        Ok(())
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], TrieError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| TrieError::Format("truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, TrieError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Shares built tries between questions with identical candidate sets.
#[derive(Debug, Default)]
pub struct TrieCache {
    tries: Mutex<HashMap<[u8; 32], Arc<TokenTrie>>>,
}

impl TrieCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn key(candidates: &BTreeSet<String>) -> [u8; 32] {
        let mut h = Sha256::new();
        for c in candidates {
            h.update((c.len() as u64).to_le_bytes());
            h.update(c.as_bytes());
        }
        h.finalize().into()
    }

    pub fn get_or_build(
        &self,
        candidates: &BTreeSet<String>,
        tokenizer: &dyn Tokenizer,
    ) -> Result<Arc<TokenTrie>, TrieError> {
        let key = Self::key(candidates);
        if let Some(t) = self.tries.lock().unwrap().get(&key) {
            return Ok(Arc::clone(t));
        }
        let trie = Arc::new(TokenTrie::build(candidates, tokenizer)?);
        Ok(Arc::clone(
            self.tries.lock().unwrap().entry(key).or_insert(trie),
        ))
    }

    pub fn len(&self) -> usize {
        self.tries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::token::{ByteTokenizer, WhitespaceTokenizer};
    use proptest::prelude::*;

    fn fig1() -> (WhitespaceTokenizer, TokenTrie) {
        let tok = WhitespaceTokenizer::from_texts(["RATP Group", "Paris", "Saint-Germain"]);
        let trie = TokenTrie::build(["RATP Group", "Paris"], &tok).unwrap();
        (tok, trie)
    }

    #[test]
    fn root_offers_first_tokens() {
        let (tok, trie) = fig1();
        let root: BTreeSet<_> = trie.allowed_next(ROOT).unwrap().collect();
        let expected: BTreeSet<_> = [tok.id("RATP").unwrap(), tok.id("Paris").unwrap()].into();
        assert_eq!(root, expected);

        let paris = trie.step(ROOT, tok.id("Paris").unwrap()).unwrap().unwrap();
        assert!(trie.is_accept(paris).unwrap());
        assert!(trie.is_leaf(paris).unwrap());

        let ratp = trie.step(ROOT, tok.id("RATP").unwrap()).unwrap().unwrap();
        assert!(!trie.is_accept(ratp).unwrap());
        assert_eq!(
            trie.allowed_next(ratp).unwrap().collect::<Vec<_>>(),
            vec![tok.id("Group").unwrap()]
        );
        let group = trie.step(ratp, tok.id("Group").unwrap()).unwrap().unwrap();
        assert!(trie.is_accept(group).unwrap());

        assert_eq!(trie.step(ROOT, tok.id("Group").unwrap()).unwrap(), None);
        assert_eq!(trie.candidate_count(), 2);
    }

    #[test]
    fn single_candidate() {
        let tok = WhitespaceTokenizer::from_texts(["x"]);
        let trie = TokenTrie::build(["x"], &tok).unwrap();
        assert_eq!(trie.node_count(), 2);
        let n = trie.step(ROOT, tok.id("x").unwrap()).unwrap().unwrap();
        assert!(trie.is_accept(n).unwrap());
    }

    #[test]
    fn nested_candidates_share_prefix() {
        let tok = WhitespaceTokenizer::from_texts(["Paris Saint-Germain"]);
        let trie = TokenTrie::build(["Paris", "Paris Saint-Germain"], &tok).unwrap();
        let paris = trie.walk(&tok.encode("Paris").unwrap()).unwrap();
        assert!(trie.is_accept(paris).unwrap());
        assert!(!trie.is_leaf(paris).unwrap());
    }

    #[test]
    fn errors() {
        let tok = ByteTokenizer::new();
        assert_eq!(
            TokenTrie::build(Vec::<String>::new(), &tok),
            Err(TrieError::NoCandidates)
        );
        assert_eq!(
            TokenTrie::build([""], &tok),
            Err(TrieError::EmptyEncoding(String::new()))
        );
        let ws = WhitespaceTokenizer::from_texts(["a"]);
        assert!(matches!(
            TokenTrie::build(["b"], &ws),
            Err(TrieError::Encode { .. })
        ));
        let trie = TokenTrie::build(["a"], &tok).unwrap();
        assert!(matches!(
            trie.allowed_next(99),
            Err(TrieError::InvalidNode(99))
        ));
        assert_eq!(trie.step(99, 1), Err(TrieError::InvalidNode(99)));
    }

    #[test]
    fn duplicates_collapse() {
        let tok = ByteTokenizer::new();
        let trie = TokenTrie::build(["ab", "ab", "a"], &tok).unwrap();
        assert_eq!(trie.candidate_count(), 2);
        assert_eq!(trie.node_count(), 3);
    }

    #[test]
    fn binary_layout_is_exact() {
        let tok = ByteTokenizer::new();
        let trie = TokenTrie::build(["a"], &tok).unwrap();
        let bytes = trie.to_bytes();
        let mut expected = b"RCDT".to_vec();
        expected.extend(1u32.to_le_bytes());
        expected.extend(2u32.to_le_bytes());
        expected.extend(1u32.to_le_bytes());
        expected.extend(97u32.to_le_bytes());
        expected.extend(1u32.to_le_bytes());
        expected.push(0);
        expected.extend(0u32.to_le_bytes());
        expected.push(1);
        assert_eq!(bytes, expected);
        assert_eq!(TokenTrie::from_bytes(&bytes).unwrap(), trie);
    }

    #[test]
    fn rejects_malformed_bytes() {
        let tok = ByteTokenizer::new();
        let good = TokenTrie::build(["ab", "c"], &tok).unwrap().to_bytes();
        assert!(TokenTrie::from_bytes(&good[..good.len() - 1]).is_err());
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(TokenTrie::from_bytes(&bad).is_err());
        let mut extra = good.clone();
        extra.push(0);
        assert!(TokenTrie::from_bytes(&extra).is_err());
    }

    #[test]
    fn cache_reuses_tries() {
        let tok = ByteTokenizer::new();
        let cache = TrieCache::new();
        let set: BTreeSet<String> = ["a".to_string(), "b".to_string()].into();
        let a = cache.get_or_build(&set, &tok).unwrap();
        let b = cache.get_or_build(&set, &tok).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        let other: BTreeSet<String> = ["ab".to_string()].into();
        cache.get_or_build(&other, &tok).unwrap();
        assert_eq!(cache.len(), 2);
    }

    fn word_candidates() -> impl Strategy<Value = Vec<String>> {
        let word = prop::sample::select(vec!["a", "b", "c", "ab", "FC", "Paris"]);
        prop::collection::vec(
            prop::collection::vec(word, 1..4).prop_map(|w| w.join(" ")),
            1..12,
        )
    }

    proptest! {
        #[test]
        fn every_candidate_is_accepted(cands in word_candidates()) {
            let tok = WhitespaceTokenizer::from_texts(&cands);
            let trie = TokenTrie::build(&cands, &tok).unwrap();
            let total: usize = cands.iter().map(|c| tok.encode(c).unwrap().len()).sum();
            prop_assert!(trie.node_count() <= total + 1);
            for c in &cands {
                prop_assert!(trie.accepts(&tok.encode(c).unwrap()));
            }
            let distinct: BTreeSet<_> = cands.iter().collect();
            prop_assert_eq!(trie.candidate_count(), distinct.len());
            prop_assert_eq!(trie.sequences().len(), distinct.len());
        }

        #[test]
        fn accepted_paths_are_candidates(cands in word_candidates()) {
            let tok = WhitespaceTokenizer::from_texts(&cands);
            let trie = TokenTrie::build(&cands, &tok).unwrap();
            let set: BTreeSet<String> = cands.iter().cloned().collect();
            for seq in trie.sequences() {
                prop_assert!(set.contains(&tok.decode(&seq).unwrap()));
            }
        }

        #[test]
        fn union_contains_parts(a in word_candidates(), b in word_candidates()) {
            let tok = WhitespaceTokenizer::from_texts(a.iter().chain(&b));
            let ta = TokenTrie::build(&a, &tok).unwrap();
            let tu = TokenTrie::build(a.iter().chain(&b), &tok).unwrap();
            for seq in ta.sequences() {
                prop_assert!(tu.accepts(&seq));
            }
        }

        #[test]
        fn byte_round_trip(cands in prop::collection::vec("[a-c ]{1,6}", 1..10)) {
            let trie = TokenTrie::build(&cands, &ByteTokenizer::new()).unwrap();
            prop_assert_eq!(TokenTrie::from_bytes(&trie.to_bytes()).unwrap(), trie);
        }
    }
}
