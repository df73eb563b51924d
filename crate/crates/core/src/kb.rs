//! Knowledge-base store: triples, alias table and relation catalog.
//!
//! All strings are normalized with [`crate::text::normalize`] on the way in,
//! so every lookup downstream can use plain equality.
//!
//! File formats (UTF-8, no header):
//!
//! ```text
//! triples.tsv    subject<TAB>relation<TAB>object
//! aliases.tsv    idsf<TAB>alias
//! relations.tsv  relation_id<TAB>label<TAB>template<TAB>is_literal(0|1)
//! ```

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::{self, BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::normalize;

/// Placeholder substituted by the subject in relation templates.
pub const SUBJECT_PLACEHOLDER: &str = "[S]";

#[derive(Debug, Error)]
pub enum KbError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{source_name}:{line}: expected {expected} tab-separated fields, found {found}")]
    FieldCount {
        source_name: String,
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("{source_name}:{line}: {message}")]
    Invalid {
        source_name: String,
        line: usize,
        message: String,
    },
    #[error("relation template `{0}` must contain `[S]` exactly once")]
    BadTemplate(String),
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("relation `{0}` is used by triples but missing from the relation catalog")]
    UncataloguedRelation(String),
    #[error("alias `{alias}` is ambiguous between {candidates:?}")]
    AmbiguousAlias {
        alias: String,
        candidates: Vec<String>,
    },
}

/// An entity identified by its unique ID surface form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityRecord {
    pub idsf: String,
    /// Alternative surface forms. Never contains `idsf`.
    pub aliases: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub subject: String,
    pub relation: String,
    pub object: String,
}

impl Triple {
    pub fn new(
        subject: impl AsRef<str>,
        relation: impl AsRef<str>,
        object: impl AsRef<str>,
    ) -> Self {
        Triple {
            subject: normalize(subject.as_ref()),
            relation: normalize(relation.as_ref()),
            object: normalize(object.as_ref()),
        }
    }
}

/// Catalog entry for a relation: how to verbalize it as a question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationSpec {
    pub relation_id: String,
    pub label: String,
    pub template: String,
    pub is_literal: bool,
}

impl RelationSpec {
    pub fn new(
        relation_id: impl AsRef<str>,
        label: impl AsRef<str>,
        template: impl AsRef<str>,
        is_literal: bool,
    ) -> Result<Self, KbError> {
        let template = normalize(template.as_ref());
        if template.matches(SUBJECT_PLACEHOLDER).count() != 1 {
            return Err(KbError::BadTemplate(template));
        }
        Ok(RelationSpec {
            relation_id: normalize(relation_id.as_ref()),
            label: normalize(label.as_ref()),
            template,
            is_literal,
        })
    }

    /// The question asked about `subject`.
    pub fn question_for(&self, subject: &str) -> String {
        self.template.replacen(SUBJECT_PLACEHOLDER, subject, 1)
    }

    /// Inverse of [`question_for`](Self::question_for): recovers the subject
    /// if `question` was produced by this template.
    pub fn subject_of(&self, question: &str) -> Option<String> {
        let (head, tail) = self.template.split_once(SUBJECT_PLACEHOLDER)?;
        let middle = question.strip_prefix(head)?.strip_suffix(tail)?;
        Some(middle.to_string())
    }
}

/// Immutable, indexed triple store.
#[derive(Debug, Clone, Default)]
pub struct TripleStore {
    triples: BTreeSet<Triple>,
    entities: BTreeMap<String, EntityRecord>,
    relations: BTreeMap<String, RelationSpec>,
    // subject -> {(relation, object)}
    by_subject: BTreeMap<String, BTreeSet<(String, String)>>,
    // relation -> subject -> {object}
    by_relation: BTreeMap<String, BTreeMap<String, BTreeSet<String>>>,
    // normalized alias -> {idsf}
    alias_index: HashMap<String, BTreeSet<String>>,
}

impl TripleStore {
    /// Builds a store from triples. Duplicates collapse; entity records are
    /// created for every subject and object.
    pub fn from_triples<I>(triples: I) -> Self
    where
        I: IntoIterator<Item = Triple>,
    {
        let mut store = TripleStore::default();
        for t in triples {
            store.insert(t);
        }
        store
    }

    fn insert(&mut self, t: Triple) {
        if self.triples.contains(&t) {
            return;
        }
        for idsf in [&t.subject, &t.object] {
            self.entities
                .entry(idsf.clone())
                .or_insert_with(|| EntityRecord {
                    idsf: idsf.clone(),
                    aliases: Vec::new(),
                });
        }
        self.by_subject
            .entry(t.subject.clone())
            .or_default()
            .insert((t.relation.clone(), t.object.clone()));
        self.by_relation
            .entry(t.relation.clone())
            .or_default()
            .entry(t.subject.clone())
            .or_default()
            .insert(t.object.clone());
        self.triples.insert(t);
    }

    /// Attaches a relation catalog. Every relation used by a triple must be
    /// present.
    pub fn with_relations<I>(mut self, specs: I) -> Result<Self, KbError>
    where
        I: IntoIterator<Item = RelationSpec>,
    {
        for spec in specs {
            self.relations.insert(spec.relation_id.clone(), spec);
        }
        if let Some(missing) = self
            .by_relation
            .keys()
            .find(|r| !self.relations.contains_key(*r))
        {
            return Err(KbError::UncataloguedRelation(missing.clone()));
        }
        Ok(self)
    }

    /// Attaches `(idsf, alias)` pairs. Pairs whose alias equals the idsf are
    /// ignored; unknown idsfs get a fresh entity record.
    pub fn with_aliases<I, S>(mut self, pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, S)>,
        S: AsRef<str>,
    {
        for (idsf, alias) in pairs {
            let idsf = normalize(idsf.as_ref());
            let alias = normalize(alias.as_ref());
            if idsf.is_empty() || alias.is_empty() || idsf == alias {
                continue;
            }
            let record = self
                .entities
                .entry(idsf.clone())
                .or_insert_with(|| EntityRecord {
                    idsf: idsf.clone(),
                    aliases: Vec::new(),
                });
            if let Err(pos) = record.aliases.binary_search(&alias) {
                record.aliases.insert(pos, alias.clone());
            }
            self.alias_index.entry(alias).or_default().insert(idsf);
        }
        self
    }

    /// Loads the triple file plus optional catalog and alias files.
    pub fn open(
        triples: &Path,
        relations: Option<&Path>,
        aliases: Option<&Path>,
    ) -> Result<Self, KbError> {
        let mut store = load_triples(triples)?;
        if let Some(path) = relations {
            store = store.with_relations(load_relations(path)?)?;
        }
        if let Some(path) = aliases {
            store = store.with_aliases(load_aliases(path)?);
        }
        Ok(store)
    }

    /// A copy holding only the triples accepted by `keep`. The catalog and
    /// alias table are carried over unchanged.
    pub fn filtered(&self, mut keep: impl FnMut(&Triple) -> bool) -> TripleStore {
        let mut out = TripleStore::from_triples(self.triples.iter().filter(|t| keep(t)).cloned());
        out.relations = self.relations.clone();
        for record in self.entities.values() {
            out.entities
                .entry(record.idsf.clone())
                .or_insert_with(|| EntityRecord {
                    idsf: record.idsf.clone(),
                    aliases: Vec::new(),
                })
                .aliases = record.aliases.clone();
        }
        out.alias_index = self.alias_index.clone();
        out
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Triples in sorted order.
    pub fn triples(&self) -> impl Iterator<Item = &Triple> {
        self.triples.iter()
    }

    pub fn contains(&self, triple: &Triple) -> bool {
        self.triples.contains(triple)
    }

    pub fn contains_fact(&self, subject: &str, relation: &str, object: &str) -> bool {
        self.objects(subject, relation)
            .is_some_and(|objs| objs.contains(object))
    }

    pub fn entity(&self, idsf: &str) -> Option<&EntityRecord> {
        self.entities.get(idsf)
    }

    pub fn entities(&self) -> impl Iterator<Item = &EntityRecord> {
        self.entities.values()
    }

    pub fn relation(&self, relation_id: &str) -> Option<&RelationSpec> {
        self.relations.get(relation_id)
    }

    /// Catalogued relations in id order.
    pub fn relations(&self) -> impl Iterator<Item = &RelationSpec> {
        self.relations.values()
    }

    /// Whether the relation is catalogued or used by at least one triple.
    pub fn knows_relation(&self, relation_id: &str) -> bool {
        self.relations.contains_key(relation_id) || self.by_relation.contains_key(relation_id)
    }

    /// Objects of the `(subject, relation)` pair.
    pub fn objects(&self, subject: &str, relation: &str) -> Option<&BTreeSet<String>> {
        self.by_relation.get(relation)?.get(subject)
    }

    /// Facts about `subject` as `(relation, object)` pairs.
    pub fn facts_about(&self, subject: &str) -> impl Iterator<Item = &(String, String)> {
        self.by_subject.get(subject).into_iter().flatten()
    }

    /// Distinct subjects of a relation, sorted.
    pub fn subjects_of_relation(&self, relation: &str) -> impl Iterator<Item = &String> {
        self.by_relation
            .get(relation)
            .into_iter()
            .flat_map(|m| m.keys())
    }

    /// All distinct objects appearing with `relation` anywhere in the store.
    pub fn objects_of_relation(&self, relation: &str) -> Result<BTreeSet<String>, KbError> {
        if !self.knows_relation(relation) {
            return Err(KbError::UnknownRelation(relation.to_string()));
        }
        Ok(self
            .by_relation
            .get(relation)
            .into_iter()
            .flat_map(|m| m.values().flatten().cloned())
            .collect())
    }

    /// Maps a surface form to its IDSF.
    ///
    /// An exact IDSF match wins over alias matches, so every IDSF resolves
    /// to itself. An alias shared by several entities is an error.
    pub fn resolve_alias(&self, surface: &str) -> Result<Option<String>, KbError> {
        let surface = normalize(surface);
        if self.entities.contains_key(&surface) {
            return Ok(Some(surface));
        }
        match self.alias_index.get(&surface) {
            None => Ok(None),
            Some(ids) if ids.len() == 1 => Ok(ids.iter().next().cloned()),
            Some(ids) => Err(KbError::AmbiguousAlias {
                alias: surface,
                candidates: ids.iter().cloned().collect(),
            }),
        }
    }
}

fn open_lines(path: &Path) -> Result<BufReader<fs::File>, KbError> {
    fs::File::open(path)
        .map(BufReader::new)
        .map_err(|source| KbError::Io {
            path: path.display().to_string(),
            source,
        })
}

/// Iterates non-blank lines split on tabs, checking the field count.
fn for_each_record(
    reader: impl BufRead,
    source_name: &str,
    expected: usize,
    mut f: impl FnMut(usize, Vec<&str>) -> Result<(), KbError>,
) -> Result<(), KbError> {
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| KbError::Io {
            path: source_name.to_string(),
            source,
        })?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != expected {
            return Err(KbError::FieldCount {
                source_name: source_name.to_string(),
                line: line_no,
                expected,
                found: fields.len(),
            });
        }
        f(line_no, fields)?;
    }
    Ok(())
}

fn non_empty(source_name: &str, line: usize, field: &str, what: &str) -> Result<String, KbError> {
    let v = normalize(field);
    if v.is_empty() {
        return Err(KbError::Invalid {
            source_name: source_name.to_string(),
            line,
            message: format!("empty {what}"),
        });
    }
    Ok(v)
}

/// Parses `subject<TAB>relation<TAB>object` lines.
pub fn parse_triples(reader: impl BufRead, source_name: &str) -> Result<TripleStore, KbError> {
    let mut triples = Vec::new();
    for_each_record(reader, source_name, 3, |line, f| {
        triples.push(Triple {
            subject: non_empty(source_name, line, f[0], "subject")?,
            relation: non_empty(source_name, line, f[1], "relation")?,
            object: non_empty(source_name, line, f[2], "object")?,
        });
        Ok(())
    })?;
    Ok(TripleStore::from_triples(triples))
}

pub fn load_triples(path: &Path) -> Result<TripleStore, KbError> {
    parse_triples(open_lines(path)?, &path.display().to_string())
}

/// Parses `relation_id<TAB>label<TAB>template<TAB>is_literal` lines.
pub fn parse_relations(
    reader: impl BufRead,
    source_name: &str,
) -> Result<Vec<RelationSpec>, KbError> {
    let mut specs = Vec::new();
    for_each_record(reader, source_name, 4, |line, f| {
        let is_literal = match f[3].trim() {
            "0" => false,
            "1" => true,
            other => {
                return Err(KbError::Invalid {
                    source_name: source_name.to_string(),
                    line,
                    message: format!("is_literal must be 0 or 1, got `{other}`"),
                })
            }
        };
        let id = non_empty(source_name, line, f[0], "relation id")?;
        let spec =
            RelationSpec::new(&id, f[1], f[2], is_literal).map_err(|e| KbError::Invalid {
                source_name: source_name.to_string(),
                line,
                message: e.to_string(),
            })?;
        specs.push(spec);
        Ok(())
    })?;
    Ok(specs)
}

pub fn load_relations(path: &Path) -> Result<Vec<RelationSpec>, KbError> {
    parse_relations(open_lines(path)?, &path.display().to_string())
}

/// Parses `idsf<TAB>alias` lines.
pub fn parse_aliases(
    reader: impl BufRead,
    source_name: &str,
) -> Result<Vec<(String, String)>, KbError> {
    let mut pairs = Vec::new();
    for_each_record(reader, source_name, 2, |line, f| {
        pairs.push((
            non_empty(source_name, line, f[0], "idsf")?,
            non_empty(source_name, line, f[1], "alias")?,
        ));
        Ok(())
    })?;
    Ok(pairs)
}

pub fn load_aliases(path: &Path) -> Result<Vec<(String, String)>, KbError> {
    parse_aliases(open_lines(path)?, &path.display().to_string())
}
