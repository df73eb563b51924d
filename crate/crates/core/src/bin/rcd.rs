use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rcd::dataset::{GenerationParams, IntersectOrder};
use rcd::decoder::DecodeConfig;
use rcd::pipeline::{
    self, BuildDatasetConfig, ExperimentConfig, KbPaths, PipelineError, RunConfig, RunMode,
};

#[derive(Parser)]
#[command(
    name = "rcd",
    version,
    about = "Retrieval-constrained decoding pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate dataset.jsonl and majority.tsv from a triple store.
    BuildDataset(BuildDatasetArgs),
    /// Decode and score every question of a dataset.
    Run(RunArgs),
    /// Compare two or more report.json files (first is the baseline).
    Report(ReportArgs),
    /// Write a mock-LM script that answers with the ground truth.
    OracleScript(OracleArgs),
    /// Compile a candidate list (one per line) into a binary trie.
    BuildTrie(BuildTrieArgs),
}

#[derive(Args)]
struct KbArgs {
    #[arg(long)]
    kb: PathBuf,
    #[arg(long)]
    relations: PathBuf,
    #[arg(long)]
    aliases: Option<PathBuf>,
}

impl KbArgs {
    fn paths(&self) -> KbPaths {
        KbPaths {
            triples: self.kb.clone(),
            relations: self.relations.clone(),
            aliases: self.aliases.clone(),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Order {
    SampleThenIntersect,
    IntersectThenSample,
}

#[derive(Args)]
struct BuildDatasetArgs {
    #[command(flatten)]
    kb: KbArgs,
    /// Second KB that every kept fact must also appear in.
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 400)]
    subjects_per_relation: usize,
    #[arg(long, default_value_t = 200)]
    min_subjects: usize,
    #[arg(long, value_enum, default_value = "sample-then-intersect")]
    order: Order,
    /// Skip the subject-containment filter.
    #[arg(long)]
    no_containment_filter: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Rcd,
    Vd,
    Ablation,
    Majority,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    kb: KbArgs,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Few-shot exemplars per prompt.
    #[arg(long, default_value_t = 5)]
    exemplars: usize,
    #[arg(long, default_value = "\n")]
    sep_string: String,
}

impl ExperimentArgs {
    fn config(&self) -> ExperimentConfig {
        ExperimentConfig {
            exemplars: self.exemplars,
            sep_string: self.sep_string.clone(),
            ..ExperimentConfig::new(self.kb.paths(), self.dataset.clone(), self.seed)
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    mode: Mode,
    /// Mock-LM script (JSON).
    #[arg(long)]
    backend: Option<PathBuf>,
    #[arg(long)]
    majority: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    max_answers: usize,
    #[arg(long, default_value_t = 256)]
    max_tokens: usize,
    #[arg(long)]
    no_repeats: bool,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Make the backend append this text to each answer.
    #[arg(long)]
    noise_suffix: Option<String>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(required = true, num_args = 2..)]
    reports: Vec<PathBuf>,
    /// Also write the comparison as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BuildTrieArgs {
    #[arg(long)]
    candidates: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn execute(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::BuildDataset(a) => {
            let summary = pipeline::build_dataset(&BuildDatasetConfig {
                kb: a.kb.paths(),
                reference: a.reference,
                out_dir: a.out,
                params: GenerationParams {
                    subjects_per_relation: a.subjects_per_relation,
                    min_subjects: a.min_subjects,
                    seed: a.seed,
                },
                order: match a.order {
                    Order::SampleThenIntersect => IntersectOrder::SampleThenIntersect,
                    Order::IntersectThenSample => IntersectOrder::IntersectThenSample,
                },
                containment_filter: !a.no_containment_filter,
            })?;
            println!("{}", summary.stats);
            println!("wrote {}", summary.dataset_path.display());
            println!("wrote {}", summary.majority_path.display());
        }
        Command::Run(a) => {
            let mode = match a.mode {
                Mode::Rcd => RunMode::Rcd,
                Mode::Vd => RunMode::Vd,
                Mode::Ablation => RunMode::Ablation,
                Mode::Majority => RunMode::Majority,
            };
            let out = pipeline::run(&RunConfig {
                experiment: a.experiment.config(),
                out_dir: a.out.clone(),
                mode,
                backend: a.backend,
                majority: a.majority,
                decode: DecodeConfig {
                    max_answers: a.max_answers,
                    max_tokens: a.max_tokens,
                    allow_repeats: !a.no_repeats,
                    ..DecodeConfig::default()
                },
                workers: a.workers,
                noise_suffix: a.noise_suffix,
            })?;
            let o = out.report.overall;
            println!(
                "mode={} questions={} P={:.4} R={:.4} F1={:.4}",
                mode.as_str(),
                out.manifests.len(),
                o.precision,
                o.recall,
                o.f1
            );
            println!("wrote {}", a.out.display());
        }
        Command::Report(a) => {
            let cmp = pipeline::compare_reports(&a.reports)?;
            print!("{}", cmp.to_text());
            if let Some(path) = a.csv {
                std::fs::write(&path, cmp.to_csv()).map_err(|source| PipelineError::Io {
                    path: path.display().to_string(),
                    source,
                })?;
            }
        }
        Command::OracleScript(a) => {
            let n = pipeline::write_oracle_script(&a.experiment.config(), &a.out)?;
            println!("wrote {} script entries to {}", n, a.out.display());
        }
        Command::BuildTrie(a) => {
            let trie = pipeline::build_trie_file(&a.candidates, &a.out)?;
            println!(
                "{} candidates, {} nodes -> {}",
                trie.candidate_count(),
                trie.node_count(),
                a.out.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RCD_LOG", "warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
