//! Candidate retrieval.
//!
//! The KB retriever returns every object of the question's relation. The
//! global pool is the union of those sets over a list of relations and backs
//! the static-trie ablation.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use thiserror::Error;

use crate::dataset::QAItem;
use crate::kb::{KbError, TripleStore};

#[derive(Debug, Error)]
pub enum RetrieveError {
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error("no candidates for question {0}")]
    Empty(String),
    #[error("question {0} is not in the candidates cache")]
    NotCached(String),
    #[error("candidate `{0}` cannot be written to a cache file")]
    Unwritable(String),
    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateSet {
    pub question_id: String,
    pub candidates: BTreeSet<String>,
}

/// Maps a question to its candidate IDSFs.
pub trait Retriever: Send + Sync {
    fn retrieve(&self, question_id: &str, item: &QAItem) -> Result<CandidateSet, RetrieveError>;
}

#[derive(Debug, Clone, Copy)]
pub struct KbRetriever<'a> {
    store: &'a TripleStore,
}

impl<'a> KbRetriever<'a> {
    pub fn new(store: &'a TripleStore) -> Self {
        KbRetriever { store }
    }
}

impl Retriever for KbRetriever<'_> {
    fn retrieve(&self, question_id: &str, item: &QAItem) -> Result<CandidateSet, RetrieveError> {
        let candidates = self.store.objects_of_relation(&item.relation)?;
        if candidates.is_empty() {
            return Err(RetrieveError::Empty(question_id.to_string()));
        }
        Ok(CandidateSet {
            question_id: question_id.to_string(),
            candidates,
        })
    }
}

/// Union of the object sets of `relations`. Unknown relations contribute
/// nothing.
pub fn global_pool<'r, I>(store: &TripleStore, relations: I) -> BTreeSet<String>
where
    I: IntoIterator<Item = &'r str>,
{
    relations
        .into_iter()
        .filter_map(|r| store.objects_of_relation(r).ok())
        .flatten()
        .collect()
}

/// Replays candidate sets from a cache file, keyed by question id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CachedRetriever {
    sets: BTreeMap<String, BTreeSet<String>>,
}

impl CachedRetriever {
    pub fn from_sets<I>(sets: I) -> Self
    where
        I: IntoIterator<Item = CandidateSet>,
    {
        CachedRetriever {
            sets: sets
                .into_iter()
                .map(|c| (c.question_id, c.candidates))
                .collect(),
        }
    }

    /// `question_id<TAB>idsf1|idsf2|...` lines.
    pub fn parse(reader: impl BufRead, source_name: &str) -> Result<Self, RetrieveError> {
        let mut sets = BTreeMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line.map_err(|source| RetrieveError::Io {
                path: source_name.to_string(),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let Some((id, rest)) = line.split_once('\t') else {
                return Err(RetrieveError::Parse {
                    source_name: source_name.to_string(),
                    line: idx + 1,
                    message: "missing tab".into(),
                });
            };
            let cands: BTreeSet<String> = rest
                .split('|')
                .filter(|c| !c.is_empty())
                .map(crate::text::normalize)
                .collect();
            sets.insert(id.to_string(), cands);
        }
        Ok(CachedRetriever { sets })
    }

    pub fn load(path: &Path) -> Result<Self, RetrieveError> {
        let file = fs::File::open(path).map_err(|source| RetrieveError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(BufReader::new(file), &path.display().to_string())
    }

    pub fn write(&self, mut out: impl Write) -> Result<(), RetrieveError> {
        for (id, cands) in &self.sets {
            if let Some(bad) = cands.iter().find(|c| c.contains(['|', '\t', '\n'])) {
                return Err(RetrieveError::Unwritable(bad.clone()));
            }
            let joined = cands.iter().cloned().collect::<Vec<_>>().join("|");
            writeln!(out, "{id}\t{joined}").map_err(|source| RetrieveError::Io {
                path: "<cache>".into(),
                source,
            })?;
        }
        Ok(())
    }
}

impl Retriever for CachedRetriever {
    fn retrieve(&self, question_id: &str, _item: &QAItem) -> Result<CandidateSet, RetrieveError> {
        let cands = self
            .sets
            .get(question_id)
            .ok_or_else(|| RetrieveError::NotCached(question_id.to_string()))?;
        if cands.is_empty() {
            return Err(RetrieveError::Empty(question_id.to_string()));
        }
        Ok(CandidateSet {
            question_id: question_id.to_string(),
            candidates: cands.clone(),
        })
    }
}
