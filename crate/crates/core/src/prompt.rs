//! Few-shot prompts, tailored per relation.
//!
//! Exemplars come from held-out facts of the same relation, so the question
//! being asked never appears among its own examples.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::dataset::labeled_rng;
use crate::kb::{RelationSpec, TripleStore};

pub const DEFAULT_EXEMPLARS: usize = 5;

const RULE_LINE: &str = "-----------------------------------";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub subject: String,
    pub answers: Vec<String>,
}

/// Draws up to `count` subjects of `relation` from `heldout`, seeded.
pub fn select_exemplars(
    heldout: &TripleStore,
    relation: &str,
    count: usize,
    seed: u64,
) -> Vec<Exemplar> {
    let subjects: Vec<&String> = heldout.subjects_of_relation(relation).collect();
    let k = count.min(subjects.len());
    let mut rng = labeled_rng(seed, &format!("exemplars/{relation}"));
    let mut picked = sample(&mut rng, subjects.len(), k).into_vec();
    picked.sort_unstable();
    picked
        .into_iter()
        .map(|i| Exemplar {
            subject: subjects[i].clone(),
            answers: heldout
                .objects(subjects[i], relation)
                .into_iter()
                .flatten()
                .cloned()
                .collect(),
        })
        .collect()
}

/// Renders the instruction block, the exemplars and finally `question`.
/// The prompt ends with a newline so the answer starts on a fresh line.
pub fn render_prompt(spec: &RelationSpec, exemplars: &[Exemplar], question: &str) -> String {
    let mut p = format!(
        "You are an AI model designed to answer questions in the format: \"{}\", where [S] is the subject provided by the user.\n\
         Your response must only include the answer object(s) relevant to the question, with no additional text, explanations, or formatting.\n\
         If multiple objects are present, list each one on a separate line.\n",
        spec.template
    );
    if !exemplars.is_empty() {
        p.push_str("\nExamples of questions and answers:\n");
        p.push_str(RULE_LINE);
        p.push('\n');
        for (i, ex) in exemplars.iter().enumerate() {
            if i > 0 {
                p.push('\n');
            }
            p.push_str(&spec.question_for(&ex.subject));
            p.push('\n');
            for a in &ex.answers {
                p.push_str(a);
                p.push('\n');
            }
        }
    }
    p.push('\n');
    p.push_str(question);
    p.push('\n');
    p
}
