//! End-to-end commands: dataset building, evaluation runs and report
//! comparison. The `rcd` binary is a thin argument parser over these.
//!
//! Every output is a pure function of the inputs and the seed; questions are
//! processed in parallel but gathered in dataset order.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{
    self, build_majority_table, heldout_store, overlap_count, DatasetError, DatasetStats,
    GenerationParams, IntersectOrder, MajorityTable, QAItem,
};
use crate::decoder::{
    decode, decode_vanilla, parse_rcd_answers, parse_vd_answers, DecodeConfig, DecodeError,
    DecodeMode,
};
use crate::eval::{
    self, aggregate, report_csv, run_majority, score_question, Comparison, EvalError, EvalReport,
    ReportFile, RunMeta, ScoredQuestion,
};
use crate::kb::{KbError, TripleStore};
use crate::prompt::{render_prompt, select_exemplars, Exemplar, DEFAULT_EXEMPLARS};
use crate::retriever::{global_pool, KbRetriever, RetrieveError, Retriever};
use crate::token::{
    BackendError, ByteTokenizer, LmBackend, MockScript, ScriptEntry, ScriptedLm, TokenizeError,
    Tokenizer, VerbalizerLm,
};
use crate::trie::{TokenTrie, TrieCache, TrieError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Trie(#[from] TrieError),
    #[error(transparent)]
    Tokenize(#[from] TokenizeError),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Empty(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    /// Process exit code: 2 input error, 3 empty result, 4 backend error.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Empty(_) => 3,
            PipelineError::Backend(_) => 4,
            _ => 2,
        }
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), PipelineError> {
    fs::write(path, contents).map_err(|source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn ensure_dir(path: &Path) -> Result<(), PipelineError> {
    fs::create_dir_all(path).map_err(|source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Locations of the knowledge-base files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KbPaths {
    pub triples: PathBuf,
    pub relations: PathBuf,
    pub aliases: Option<PathBuf>,
}

impl KbPaths {
    pub fn open(&self) -> Result<TripleStore, PipelineError> {
        Ok(TripleStore::open(
            &self.triples,
            Some(&self.relations),
            self.aliases.as_deref(),
        )?)
    }
}

#[derive(Debug, Clone)]
pub struct BuildDatasetConfig {
    pub kb: KbPaths,
    /// Second KB every kept fact must also appear in.
    pub reference: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub params: GenerationParams,
    pub order: IntersectOrder,
    pub containment_filter: bool,
}

#[derive(Debug, Clone)]
pub struct BuildSummary {
    pub stats: DatasetStats,
    pub dataset_path: PathBuf,
    pub majority_path: PathBuf,
    pub majority: MajorityTable,
}

/// Generates `dataset.jsonl` and `majority.tsv` into `out_dir`.
pub fn build_dataset(config: &BuildDatasetConfig) -> Result<BuildSummary, PipelineError> {
    let store = config.kb.open()?;
    let reference = config
        .reference
        .as_deref()
        .map(crate::kb::load_triples)
        .transpose()?;
    let items = dataset::build_dataset(
        &store,
        reference.as_ref(),
        &config.params,
        config.order,
        config.containment_filter,
    );
    if items.is_empty() {
        return Err(PipelineError::Empty(
            "no questions generated: no relation passed the eligibility rules".into(),
        ));
    }
    let heldout = heldout_store(&store, &items);
    let overlap = overlap_count(&items, &heldout);
    if overlap > 0 {
        warn!("{overlap} dataset facts also appear in the held-out triples");
    }
    let relations: Vec<&str> = dataset_relations(&items);
    let majority = build_majority_table(&heldout, relations);

    ensure_dir(&config.out_dir)?;
    let dataset_path = config.out_dir.join("dataset.jsonl");
    let majority_path = config.out_dir.join("majority.tsv");
    dataset::save_jsonl(&items, &dataset_path)?;
    write_file(&majority_path, majority.to_tsv())?;
    let stats = DatasetStats::of(&items);
    info!("{stats}");
    Ok(BuildSummary {
        stats,
        dataset_path,
        majority_path,
        majority,
    })
}

fn dataset_relations(items: &[QAItem]) -> Vec<&str> {
    let mut rels: Vec<&str> = items.iter().map(|i| i.relation.as_str()).collect();
    rels.sort_unstable();
    rels.dedup();
    rels
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    Rcd,
    Vd,
    Ablation,
    Majority,
}

impl RunMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunMode::Rcd => "rcd",
            RunMode::Vd => "vd",
            RunMode::Ablation => "ablation",
            RunMode::Majority => "majority",
        }
    }
}

/// Inputs shared by runs and oracle-script generation.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kb: KbPaths,
    pub dataset: PathBuf,
    pub seed: u64,
    pub exemplars: usize,
    pub sep_string: String,
}

impl ExperimentConfig {
    pub fn new(kb: KbPaths, dataset: PathBuf, seed: u64) -> Self {
        ExperimentConfig {
            kb,
            dataset,
            seed,
            exemplars: DEFAULT_EXEMPLARS,
            sep_string: "\n".into(),
        }
    }
}

/// Loaded store, dataset, held-out facts and per-relation exemplars.
pub struct Experiment {
    pub store: TripleStore,
    pub items: Vec<QAItem>,
    pub heldout: TripleStore,
    pub exemplars: BTreeMap<String, Vec<Exemplar>>,
    pub tokenizer: ByteTokenizer,
    pub seed: u64,
}

impl Experiment {
    pub fn load(config: &ExperimentConfig) -> Result<Self, PipelineError> {
        let store = config.kb.open()?;
        let items = dataset::load_jsonl(&config.dataset)?;
        if items.is_empty() {
            return Err(PipelineError::Empty(format!(
                "{} contains no questions",
                config.dataset.display()
            )));
        }
        Self::from_parts(
            store,
            items,
            config.seed,
            config.exemplars,
            &config.sep_string,
        )
    }

    pub fn from_parts(
        store: TripleStore,
        items: Vec<QAItem>,
        seed: u64,
        exemplars: usize,
        sep_string: &str,
    ) -> Result<Self, PipelineError> {
        for item in &items {
            if store.relation(&item.relation).is_none() {
                return Err(PipelineError::Input(format!(
                    "dataset relation {} is not in the relation catalog",
                    item.relation
                )));
            }
        }
        let heldout = heldout_store(&store, &items);
        let exemplars = dataset_relations(&items)
            .into_iter()
            .map(|r| {
                (
                    r.to_string(),
                    select_exemplars(&heldout, r, exemplars, seed),
                )
            })
            .collect();
        Ok(Experiment {
            store,
            items,
            heldout,
            exemplars,
            tokenizer: ByteTokenizer::new().with_sep_string(sep_string),
            seed,
        })
    }

    pub fn prompt(&self, item: &QAItem) -> String {
        let spec = self
            .store
            .relation(&item.relation)
            .expect("checked at load");
        render_prompt(spec, &self.exemplars[&item.relation], &item.question)
    }

    pub fn relations(&self) -> Vec<&str> {
        dataset_relations(&self.items)
    }

    /// Script for a backend that answers every question with exactly its
    /// ground truth, one answer per segment, in sorted order.
    pub fn oracle_script(&self) -> Result<MockScript, PipelineError> {
        let vocab = self.tokenizer.vocab();
        let mut contexts = Vec::with_capacity(self.items.len());
        for item in &self.items {
            let prefix = self.tokenizer.encode(&self.prompt(item))?;
            let mut continuation = Vec::new();
            for (i, answer) in item.ground_truth.iter().enumerate() {
                if i > 0 {
                    continuation.push(vocab.sep_id());
                }
                continuation.extend(self.tokenizer.encode(answer)?);
            }
            continuation.push(vocab.eos_id());
            contexts.push(ScriptEntry {
                prefix,
                next: None,
                continuation: Some(continuation),
            });
        }
        Ok(MockScript { contexts })
    }
}

/// One line of `manifests.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub question_id: String,
    pub mode: String,
    pub raw_tokens: Vec<Vec<u32>>,
    pub answers: Vec<String>,
    pub truncated: bool,
    pub steps: usize,
    pub seed: u64,
    /// Subjects of the few-shot exemplars used in the prompt.
    pub exemplars: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub experiment: ExperimentConfig,
    pub out_dir: PathBuf,
    pub mode: RunMode,
    /// Mock-LM script; required for every mode but `majority`.
    pub backend: Option<PathBuf>,
    /// Precomputed `majority.tsv`; otherwise derived from held-out triples.
    pub majority: Option<PathBuf>,
    pub decode: DecodeConfig,
    pub workers: usize,
    /// Wraps the backend so it appends this text to every answer.
    pub noise_suffix: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: EvalReport,
    pub manifests: Vec<RunManifest>,
}

#[derive(Debug, Error)]
enum QuestionError {
    #[error(transparent)]
    Retrieve(#[from] RetrieveError),
    #[error(transparent)]
    Trie(#[from] TrieError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Tokenize(#[from] TokenizeError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Runs one evaluation in memory.
pub fn evaluate(
    exp: &Experiment,
    mode: RunMode,
    backend: Option<&dyn LmBackend>,
    majority: Option<&MajorityTable>,
    decode_config: &DecodeConfig,
    workers: usize,
) -> Result<RunOutput, PipelineError> {
    let seed = exp.seed;
    let exemplar_names = |item: &QAItem| -> Vec<String> {
        exp.exemplars[&item.relation]
            .iter()
            .map(|e| e.subject.clone())
            .collect()
    };

    if mode == RunMode::Majority {
        let table = match majority {
            Some(t) => t.clone(),
            None => build_majority_table(&exp.heldout, exp.relations()),
        };
        let report = run_majority(&exp.items, &table)?;
        let manifests = exp
            .items
            .iter()
            .enumerate()
            .map(|(i, item)| RunManifest {
                question_id: i.to_string(),
                mode: mode.as_str().into(),
                raw_tokens: Vec::new(),
                answers: table
                    .get(&item.relation)
                    .map(|e| vec![e.object.clone()])
                    .unwrap_or_default(),
                truncated: false,
                steps: 0,
                seed,
                exemplars: Vec::new(),
                error: None,
            })
            .collect();
        return Ok(RunOutput { report, manifests });
    }

    let backend = backend
        .ok_or_else(|| PipelineError::Input(format!("mode {} needs a backend", mode.as_str())))?;
    let tokenizer = &exp.tokenizer;
    let vocab = *tokenizer.vocab();
    let retriever = KbRetriever::new(&exp.store);
    let cache = TrieCache::new();
    let pool_trie: Option<Arc<TokenTrie>> = if mode == RunMode::Ablation {
        let pool = global_pool(&exp.store, exp.relations());
        Some(cache.get_or_build(&pool, tokenizer)?)
    } else {
        None
    };
    let rcd_config = DecodeConfig {
        mode: DecodeMode::Rcd,
        ..*decode_config
    };
    let vd_config = DecodeConfig {
        mode: DecodeMode::Vd,
        ..*decode_config
    };

    let run_one = |i: usize, item: &QAItem| -> (ScoredQuestion, RunManifest) {
        let question_id = i.to_string();
        let mut manifest = RunManifest {
            question_id: question_id.clone(),
            mode: mode.as_str().into(),
            raw_tokens: Vec::new(),
            answers: Vec::new(),
            truncated: false,
            steps: 0,
            seed,
            exemplars: exemplar_names(item),
            error: None,
        };
        let result = (|| -> Result<_, QuestionError> {
            let prompt = tokenizer.encode(&exp.prompt(item))?;
            let answers = match mode {
                RunMode::Vd => {
                    let out = decode_vanilla(backend, &prompt, tokenizer, &vd_config)?;
                    manifest.raw_tokens = vec![out.tokens];
                    manifest.truncated = out.truncated;
                    manifest.steps = out.steps;
                    parse_vd_answers(&out.text)
                }
                _ => {
                    let trie = match &pool_trie {
                        Some(t) => Arc::clone(t),
                        None => {
                            let cands = retriever.retrieve(&question_id, item)?;
                            cache.get_or_build(&cands.candidates, tokenizer)?
                        }
                    };
                    let out = decode(backend, &prompt, &trie, &vocab, &rcd_config)?;
                    manifest.truncated = out.truncated;
                    manifest.steps = out.steps;
                    let parsed = parse_rcd_answers(&out.answers, tokenizer)?;
                    manifest.raw_tokens = out.answers;
                    parsed
                }
            };
            Ok(score_question(&answers, &item.ground_truth).map(|s| (s, answers))?)
        })();
        let score = match result {
            Ok((score, answers)) => {
                manifest.answers = answers.into_iter().collect();
                score
            }
            Err(e) => {
                warn!("question {question_id}: {e}; scored as empty");
                manifest.error = Some(e.to_string());
                score_question(Vec::<&str>::new(), &item.ground_truth)
                    .expect("dataset truth is non-empty")
            }
        };
        (
            ScoredQuestion {
                question_id,
                relation: item.relation.clone(),
                score,
            },
            manifest,
        )
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| PipelineError::Input(format!("cannot start workers: {e}")))?;
    let results: Vec<(ScoredQuestion, RunManifest)> = pool.install(|| {
        exp.items
            .par_iter()
            .enumerate()
            .map(|(i, item)| run_one(i, item))
            .collect()
    });
    let (scores, manifests): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    Ok(RunOutput {
        report: aggregate(scores)?,
        manifests,
    })
}

/// Loads inputs, runs, and writes `report.json`, `report.csv` and
/// `manifests.jsonl` into `out_dir`.
pub fn run(config: &RunConfig) -> Result<RunOutput, PipelineError> {
    config
        .decode
        .validate()
        .map_err(|e| PipelineError::Input(e.to_string()))?;
    let exp = Experiment::load(&config.experiment)?;
    let majority = config
        .majority
        .as_deref()
        .map(MajorityTable::load)
        .transpose()?;
    let backend: Option<Box<dyn LmBackend>> = match (&config.backend, config.mode) {
        (_, RunMode::Majority) => None,
        (None, _) => {
            return Err(PipelineError::Input(format!(
                "mode {} requires --backend",
                config.mode.as_str()
            )))
        }
        (Some(path), _) => {
            let vocab = *exp.tokenizer.vocab();
            let lm = ScriptedLm::load(vocab, path)?;
            Some(match &config.noise_suffix {
                Some(suffix) => {
                    Box::new(VerbalizerLm::new(lm, vocab, exp.tokenizer.encode(suffix)?))
                }
                None => Box::new(lm),
            })
        }
    };
    let output = evaluate(
        &exp,
        config.mode,
        backend.as_deref(),
        majority.as_ref(),
        &config.decode,
        config.workers,
    )?;

    ensure_dir(&config.out_dir)?;
    let file = ReportFile {
        meta: RunMeta {
            mode: config.mode.as_str().into(),
            seed: config.experiment.seed,
        },
        report: output.report.clone(),
    };
    write_file(&config.out_dir.join("report.json"), file.to_json())?;
    write_file(
        &config.out_dir.join("report.csv"),
        report_csv(&output.report),
    )?;
    let mut lines = String::new();
    for m in &output.manifests {
        lines.push_str(&serde_json::to_string(m).expect("manifest serializes"));
        lines.push('\n');
    }
    write_file(&config.out_dir.join("manifests.jsonl"), lines)?;
    Ok(output)
}

/// Writes the ground-truth oracle script for the experiment's dataset.
pub fn write_oracle_script(config: &ExperimentConfig, out: &Path) -> Result<usize, PipelineError> {
    let exp = Experiment::load(config)?;
    let script = exp.oracle_script()?;
    script.save(out).map_err(|source| PipelineError::Io {
        path: out.display().to_string(),
        source,
    })?;
    Ok(script.contexts.len())
}

/// Compares two or more `report.json` files; the first is the baseline.
pub fn compare_reports(paths: &[PathBuf]) -> Result<Comparison, PipelineError> {
    if paths.len() < 2 {
        return Err(PipelineError::Input("need at least two reports".into()));
    }
    let mut reports = Vec::with_capacity(paths.len());
    for p in paths {
        let file = ReportFile::load(p)?;
        let label = format!(
            "{}:{}",
            file.meta.mode,
            p.parent()
                .and_then(Path::file_name)
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.display().to_string())
        );
        reports.push((label, file.report));
    }
    Ok(eval::Comparison::new(&reports))
}

/// Builds a trie over one candidate per line and writes its binary form.
pub fn build_trie_file(candidates: &Path, out: &Path) -> Result<TokenTrie, PipelineError> {
    let text = fs::read_to_string(candidates).map_err(|source| PipelineError::Io {
        path: candidates.display().to_string(),
        source,
    })?;
    let cands: Vec<String> = text
        .lines()
        .map(crate::text::normalize)
        .filter(|l| !l.is_empty())
        .collect();
    if cands.is_empty() {
        return Err(PipelineError::Empty(format!(
            "{} lists no candidates",
            candidates.display()
        )));
    }
    let trie = TokenTrie::build(&cands, &ByteTokenizer::new())?;
    write_file(out, trie.to_bytes())?;
    Ok(trie)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_stable() {
        assert_eq!(PipelineError::Input("x".into()).exit_code(), 2);
        assert_eq!(PipelineError::Empty("x".into()).exit_code(), 3);
        assert_eq!(
            PipelineError::Backend(BackendError("x".into())).exit_code(),
            4
        );
        assert_eq!(
            PipelineError::Kb(KbError::UnknownRelation("R".into())).exit_code(),
            2
        );
    }
}
