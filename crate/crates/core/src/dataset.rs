//! Question/answer dataset generation from a triple store.
//!
//! For every non-literal relation with enough distinct subjects, a fixed
//! number of subjects is sampled without replacement and each sampled
//! `(subject, relation)` pair becomes one question whose ground truth is the
//! set of all its objects. Optional filters then drop facts missing from a
//! second KB and objects whose name is contained in the subject's name.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use log::warn;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::kb::TripleStore;
use crate::text::{fold_case, normalize};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },
}

/// One question with its ground-truth answer set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QAItem {
    pub question: String,
    pub subject: String,
    pub relation: String,
    pub ground_truth: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenerationParams {
    pub subjects_per_relation: usize,
    pub min_subjects: usize,
    pub seed: u64,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams {
            subjects_per_relation: 400,
            min_subjects: 200,
            seed: 0,
        }
    }
}

/// Generator seeded by `(seed, label)`, so each relation draws from its own
/// stream regardless of processing order.
pub fn labeled_rng(seed: u64, label: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// Samples questions from every eligible relation, in relation-id order.
pub fn generate_dataset(store: &TripleStore, params: &GenerationParams) -> Vec<QAItem> {
    let mut items = Vec::new();
    for spec in store.relations() {
        if spec.is_literal {
            continue;
        }
        let subjects: Vec<&String> = store.subjects_of_relation(&spec.relation_id).collect();
        if subjects.is_empty() || subjects.len() < params.min_subjects {
            continue;
        }
        let k = params.subjects_per_relation.min(subjects.len());
        let mut rng = labeled_rng(params.seed, &spec.relation_id);
        let mut picked = sample(&mut rng, subjects.len(), k).into_vec();
        picked.sort_unstable();
        for i in picked {
            let subject = subjects[i];
            let ground_truth = store
                .objects(subject, &spec.relation_id)
                .cloned()
                .unwrap_or_default();
            items.push(QAItem {
                question: spec.question_for(subject),
                subject: subject.clone(),
                relation: spec.relation_id.clone(),
                ground_truth,
            });
        }
    }
    if items.is_empty() {
        warn!("no eligible relations: dataset is empty");
    }
    items
}

/// Drops ground-truth objects whose name occurs inside the subject's name
/// (case-insensitive), then drops items left without answers.
pub fn apply_containment_filter(items: Vec<QAItem>) -> Vec<QAItem> {
    items
        .into_iter()
        .filter_map(|mut item| {
            let subject = fold_case(&item.subject);
            item.ground_truth
                .retain(|o| !subject.contains(fold_case(o).as_str()));
            (!item.ground_truth.is_empty()).then_some(item)
        })
        .collect()
}

/// Keeps only facts also present in `other`.
pub fn intersect_with(items: Vec<QAItem>, other: &TripleStore) -> Vec<QAItem> {
    items
        .into_iter()
        .filter_map(|mut item| {
            item.ground_truth
                .retain(|o| other.contains_fact(&item.subject, &item.relation, o));
            (!item.ground_truth.is_empty()).then_some(item)
        })
        .collect()
}

/// Where the second-KB check sits relative to subject sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntersectOrder {
    /// Sample subjects first, then drop facts missing from the second KB.
    #[default]
    SampleThenIntersect,
    /// Restrict the store to shared facts, then sample.
    IntersectThenSample,
}

/// Full generation pipeline: sample, intersect with `reference` (if any),
/// containment-filter (if enabled).
pub fn build_dataset(
    store: &TripleStore,
    reference: Option<&TripleStore>,
    params: &GenerationParams,
    order: IntersectOrder,
    containment: bool,
) -> Vec<QAItem> {
    let mut items = match (reference, order) {
        (Some(other), IntersectOrder::IntersectThenSample) => {
            let shared = store.filtered(|t| other.contains(t));
            generate_dataset(&shared, params)
        }
        (Some(other), IntersectOrder::SampleThenIntersect) => {
            intersect_with(generate_dataset(store, params), other)
        }
        (None, _) => generate_dataset(store, params),
    };
    if containment {
        items = apply_containment_filter(items);
    }
    items
}

/// Triples whose `(subject, relation)` pair is not asked about in `items`.
pub fn heldout_store(store: &TripleStore, items: &[QAItem]) -> TripleStore {
    let asked: HashSet<(&str, &str)> = items
        .iter()
        .map(|i| (i.subject.as_str(), i.relation.as_str()))
        .collect();
    store.filtered(|t| !asked.contains(&(t.subject.as_str(), t.relation.as_str())))
}

/// Number of dataset facts that also appear in `heldout`.
pub fn overlap_count(items: &[QAItem], heldout: &TripleStore) -> usize {
    items
        .iter()
        .map(|i| {
            i.ground_truth
                .iter()
                .filter(|o| heldout.contains_fact(&i.subject, &i.relation, o))
                .count()
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MajorityEntry {
    pub object: String,
    pub count: usize,
}

/// Most frequent object per relation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MajorityTable {
    pub entries: BTreeMap<String, MajorityEntry>,
}

impl MajorityTable {
    pub fn get(&self, relation: &str) -> Option<&MajorityEntry> {
        self.entries.get(relation)
    }

    /// `relation_id<TAB>object_idsf<TAB>count` lines.
    pub fn to_tsv(&self) -> String {
        self.entries
            .iter()
            .map(|(r, e)| format!("{r}\t{}\t{}\n", e.object, e.count))
            .collect()
    }

    pub fn parse_tsv(reader: impl BufRead, source_name: &str) -> Result<Self, DatasetError> {
        let mut entries = BTreeMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line.map_err(|source| DatasetError::Io {
                path: source_name.to_string(),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |message: String| DatasetError::Parse {
                source_name: source_name.to_string(),
                line: idx + 1,
                message,
            };
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 3 {
                return Err(parse_err(format!("expected 3 fields, found {}", f.len())));
            }
            let count = f[2]
                .trim()
                .parse()
                .map_err(|e| parse_err(format!("bad count: {e}")))?;
            entries.insert(
                normalize(f[0]),
                MajorityEntry {
                    object: normalize(f[1]),
                    count,
                },
            );
        }
        Ok(MajorityTable { entries })
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let file = fs::File::open(path).map_err(|source| DatasetError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse_tsv(BufReader::new(file), &path.display().to_string())
    }
}

/// Modal object of each requested relation over `heldout`; ties go to the
/// lexicographically smallest IDSF. Relations with no held-out triples are
/// left out.
pub fn build_majority_table<'a, I>(heldout: &TripleStore, relations: I) -> MajorityTable
where
    I: IntoIterator<Item = &'a str>,
{
    let mut entries = BTreeMap::new();
    for relation in relations {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for subject in heldout.subjects_of_relation(relation) {
            for o in heldout.objects(subject, relation).into_iter().flatten() {
                *counts.entry(o.as_str()).or_default() += 1;
            }
        }
        // BTreeMap iterates in key order, so keeping the first maximum
        // yields the smallest IDSF among ties.
        let best = counts
            .into_iter()
            .fold(None::<(&str, usize)>, |best, (o, c)| match best {
                Some((_, bc)) if bc >= c => best,
                _ => Some((o, c)),
            });
        match best {
            Some((object, count)) => {
                entries.insert(
                    relation.to_string(),
                    MajorityEntry {
                        object: object.to_string(),
                        count,
                    },
                );
            }
            None => warn!("relation {relation} has no held-out triples; no majority entry"),
        }
    }
    MajorityTable { entries }
}

/// Dataset summary in the style of a statistics table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub questions: usize,
    pub atomic_answers: usize,
    pub avg_cardinality: f64,
    pub multi_cardinality: usize,
    pub relations: usize,
}

impl DatasetStats {
    pub fn of(items: &[QAItem]) -> Self {
        let questions = items.len();
        let atomic_answers = items.iter().map(|i| i.ground_truth.len()).sum();
        let relations = items
            .iter()
            .map(|i| i.relation.as_str())
            .collect::<BTreeSet<_>>()
            .len();
        DatasetStats {
            questions,
            atomic_answers,
            avg_cardinality: if questions == 0 {
                0.0
            } else {
                atomic_answers as f64 / questions as f64
            },
            multi_cardinality: items.iter().filter(|i| i.ground_truth.len() > 1).count(),
            relations,
        }
    }
}

impl fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "questions={} atomic_answers={} avg_cardinality={:.2} multi_cardinality={} relations={}",
            self.questions,
            self.atomic_answers,
            self.avg_cardinality,
            self.multi_cardinality,
            self.relations
        )
    }
}

/// Writes one JSON object per line.
pub fn write_jsonl(items: &[QAItem], mut out: impl Write) -> io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_jsonl(items: &[QAItem], path: &Path) -> Result<(), DatasetError> {
    let io_err = |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut buf = Vec::new();
    write_jsonl(items, &mut buf).map_err(io_err)?;
    fs::write(path, buf).map_err(io_err)
}

pub fn read_jsonl(reader: impl BufRead, source_name: &str) -> Result<Vec<QAItem>, DatasetError> {
    let mut items = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| DatasetError::Io {
            path: source_name.to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let item: QAItem = serde_json::from_str(&line).map_err(|e| DatasetError::Parse {
            source_name: source_name.to_string(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        if item.ground_truth.is_empty() {
            return Err(DatasetError::Parse {
                source_name: source_name.to_string(),
                line: idx + 1,
                message: "empty ground_truth".into(),
            });
        }
        items.push(item);
    }
    Ok(items)
}

pub fn load_jsonl(path: &Path) -> Result<Vec<QAItem>, DatasetError> {
    let file = fs::File::open(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_jsonl(BufReader::new(file), &path.display().to_string())
}
