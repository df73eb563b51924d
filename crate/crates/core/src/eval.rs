//! Set-based scoring of generated answers.
//!
//! For generated set G and ground truth T: `P = |G ∩ T| / |G|`,
//! `R = |G ∩ T| / |T|`, F1 their harmonic mean. An empty G scores zero on
//! all three. Scores are averaged per relation, and relation means are
//! averaged with equal weight (macro average).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;
use thiserror::Error;

use crate::dataset::{MajorityTable, QAItem};
use crate::text::normalize;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("ground-truth set is empty")]
    EmptyTruth,
    #[error("nothing to aggregate")]
    NoScores,
    #[error("{path}: {message}")]
    Report { path: String, message: String },
}

/// Writes a float with exactly four decimals (ties to even).
fn fixed4<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    let raw = RawValue::from_string(format!("{x:.4}")).map_err(serde::ser::Error::custom)?;
    raw.serialize(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuestionScore {
    #[serde(serialize_with = "fixed4")]
    pub precision: f64,
    #[serde(serialize_with = "fixed4")]
    pub recall: f64,
    #[serde(serialize_with = "fixed4")]
    pub f1: f64,
    pub g_size: usize,
    pub t_size: usize,
    pub hit_count: usize,
}

pub fn harmonic(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

/// Scores one question. Both sides are NFC-normalized before matching.
pub fn score_question<G, T, S1, S2>(generated: G, truth: T) -> Result<QuestionScore, EvalError>
where
    G: IntoIterator<Item = S1>,
    T: IntoIterator<Item = S2>,
    S1: AsRef<str>,
    S2: AsRef<str>,
{
    let g: BTreeSet<String> = generated
        .into_iter()
        .map(|s| normalize(s.as_ref()))
        .collect();
    let t: BTreeSet<String> = truth.into_iter().map(|s| normalize(s.as_ref())).collect();
    if t.is_empty() {
        return Err(EvalError::EmptyTruth);
    }
    let hits = g.intersection(&t).count();
    let precision = if g.is_empty() {
        0.0
    } else {
        hits as f64 / g.len() as f64
    };
    let recall = hits as f64 / t.len() as f64;
    Ok(QuestionScore {
        precision,
        recall,
        f1: harmonic(precision, recall),
        g_size: g.len(),
        t_size: t.len(),
        hit_count: hits,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredQuestion {
    pub question_id: String,
    pub relation: String,
    #[serde(flatten)]
    pub score: QuestionScore,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelationScore {
    #[serde(serialize_with = "fixed4")]
    pub precision: f64,
    #[serde(serialize_with = "fixed4")]
    pub recall: f64,
    #[serde(serialize_with = "fixed4")]
    pub f1: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroScore {
    #[serde(serialize_with = "fixed4")]
    pub precision: f64,
    #[serde(serialize_with = "fixed4")]
    pub recall: f64,
    #[serde(serialize_with = "fixed4")]
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Macro P, R and F1; F1 is the mean of per-relation mean F1.
    pub overall: MacroScore,
    /// Harmonic mean of macro P and macro R, reported alongside.
    #[serde(serialize_with = "fixed4")]
    pub alt_overall_f1: f64,
    pub per_relation: BTreeMap<String, RelationScore>,
    pub per_question: Vec<ScoredQuestion>,
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = xs
        .into_iter()
        .fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    sum / n as f64
}

/// Per-relation means, then unweighted means over relations.
pub fn aggregate(scores: Vec<ScoredQuestion>) -> Result<EvalReport, EvalError> {
    if scores.is_empty() {
        return Err(EvalError::NoScores);
    }
    let mut grouped: BTreeMap<&str, Vec<&QuestionScore>> = BTreeMap::new();
    for s in &scores {
        grouped.entry(&s.relation).or_default().push(&s.score);
    }
    let per_relation: BTreeMap<String, RelationScore> = grouped
        .into_iter()
        .map(|(r, qs)| {
            (
                r.to_string(),
                RelationScore {
                    precision: mean(qs.iter().map(|q| q.precision)),
                    recall: mean(qs.iter().map(|q| q.recall)),
                    f1: mean(qs.iter().map(|q| q.f1)),
                    count: qs.len(),
                },
            )
        })
        .collect();
    let overall = MacroScore {
        precision: mean(per_relation.values().map(|r| r.precision)),
        recall: mean(per_relation.values().map(|r| r.recall)),
        f1: mean(per_relation.values().map(|r| r.f1)),
    };
    Ok(EvalReport {
        alt_overall_f1: harmonic(overall.precision, overall.recall),
        overall,
        per_relation,
        per_question: scores,
    })
}

/// Predicts each relation's majority object for every question of it.
/// Question ids are dataset positions.
pub fn run_majority(items: &[QAItem], table: &MajorityTable) -> Result<EvalReport, EvalError> {
    let mut scores = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        let generated: Vec<&str> = match table.get(&item.relation) {
            Some(e) => vec![e.object.as_str()],
            None => {
                warn!("no majority entry for relation {}", item.relation);
                Vec::new()
            }
        };
        scores.push(ScoredQuestion {
            question_id: i.to_string(),
            relation: item.relation.clone(),
            score: score_question(generated, &item.ground_truth)?,
        });
    }
    aggregate(scores)
}

/// Run metadata stored next to the scores.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunMeta {
    pub mode: String,
    pub seed: u64,
}

/// Contents of `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub meta: RunMeta,
    #[serde(flatten)]
    pub report: EvalReport,
}

impl ReportFile {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let err = |message: String| EvalError::Report {
            path: path.display().to_string(),
            message,
        };
        let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| err(e.to_string()))
    }
}

/// `report.csv`: one row per relation plus an `OVERALL` row.
pub fn report_csv(report: &EvalReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["relation_id", "n", "precision", "recall", "f1"])
        .expect("in-memory write");
    for (r, s) in &report.per_relation {
        w.write_record([
            r.clone(),
            s.count.to_string(),
            format!("{:.4}", s.precision),
            format!("{:.4}", s.recall),
            format!("{:.4}", s.f1),
        ])
        .expect("in-memory write");
    }
    w.write_record([
        "OVERALL".to_string(),
        report.per_question.len().to_string(),
        format!("{:.4}", report.overall.precision),
        format!("{:.4}", report.overall.recall),
        format!("{:.4}", report.overall.f1),
    ])
    .expect("in-memory write");
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// Side-by-side P/R/F1 of several reports, with deltas against the first.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub labels: Vec<String>,
    /// Relation id (or `OVERALL`) -> one `(P, R, F1)` per report, `None`
    /// where a report lacks the relation.
    pub rows: Vec<(String, Vec<Option<[f64; 3]>>)>,
    /// Relations not present in every report.
    pub mismatched: BTreeSet<String>,
}

impl Comparison {
    pub fn new(reports: &[(String, EvalReport)]) -> Self {
        let all: BTreeSet<&String> = reports
            .iter()
            .flat_map(|(_, r)| r.per_relation.keys())
            .collect();
        let mismatched: BTreeSet<String> = all
            .iter()
            .filter(|rel| {
                reports
                    .iter()
                    .any(|(_, r)| !r.per_relation.contains_key(**rel))
            })
            .map(|s| s.to_string())
            .collect();
        if !mismatched.is_empty() {
            warn!("reports cover different relations: {mismatched:?}");
        }
        let mut rows: Vec<(String, Vec<Option<[f64; 3]>>)> = all
            .into_iter()
            .map(|rel| {
                let cells = reports
                    .iter()
                    .map(|(_, r)| {
                        r.per_relation
                            .get(rel)
                            .map(|s| [s.precision, s.recall, s.f1])
                    })
                    .collect();
                (rel.clone(), cells)
            })
            .collect();
        rows.push((
            "OVERALL".into(),
            reports
                .iter()
                .map(|(_, r)| Some([r.overall.precision, r.overall.recall, r.overall.f1]))
                .collect(),
        ));
        Comparison {
            labels: reports.iter().map(|(l, _)| l.clone()).collect(),
            rows,
            mismatched,
        }
    }

    /// `(P, R, F1)` deltas of report `idx` against the first report.
    pub fn delta(&self, row: usize, idx: usize) -> Option<[f64; 3]> {
        let cells = &self.rows[row].1;
        let (base, other) = (cells[0]?, cells[idx]?);
        Some([other[0] - base[0], other[1] - base[1], other[2] - base[2]])
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["relation_id".to_string()];
        for (i, l) in self.labels.iter().enumerate() {
            for m in ["P", "R", "F1"] {
                header.push(format!("{l}:{m}"));
            }
            if i > 0 {
                for m in ["P", "R", "F1"] {
                    header.push(format!("{l}:d{m}"));
                }
            }
        }
        w.write_record(&header).expect("in-memory write");
        for (row_idx, (rel, cells)) in self.rows.iter().enumerate() {
            let mut rec = vec![rel.clone()];
            for (i, cell) in cells.iter().enumerate() {
                push_triple(&mut rec, *cell);
                if i > 0 {
                    push_triple(&mut rec, self.delta(row_idx, i));
                }
            }
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn to_text(&self) -> String {
        let width = self
            .rows
            .iter()
            .map(|(r, _)| r.chars().count())
            .max()
            .unwrap_or(0)
            .max(8);
        let mut out = String::new();
        let _ = write!(out, "{:width$}", "relation");
        for (i, l) in self.labels.iter().enumerate() {
            let _ = write!(out, " | {l:>22}");
            if i > 0 {
                let _ = write!(out, " | {:>22}", format!("Δ {l}"));
            }
        }
        out.push('\n');
        for (row_idx, (rel, cells)) in self.rows.iter().enumerate() {
            let _ = write!(out, "{rel:width$}");
            for (i, cell) in cells.iter().enumerate() {
                let _ = write!(out, " | {:>22}", fmt_triple(*cell, false));
                if i > 0 {
                    let _ = write!(out, " | {:>22}", fmt_triple(self.delta(row_idx, i), true));
                }
            }
            out.push('\n');
        }
        out
    }
}

fn push_triple(rec: &mut Vec<String>, t: Option<[f64; 3]>) {
    match t {
        Some(v) => rec.extend(v.iter().map(|x| format!("{x:.4}"))),
        None => rec.extend(std::iter::repeat_n(String::new(), 3)),
    }
}

fn fmt_triple(t: Option<[f64; 3]>, signed: bool) -> String {
    match t {
        Some([p, r, f]) if signed => format!("{p:+.3} {r:+.3} {f:+.3}"),
        Some([p, r, f]) => format!("{p:.3} {r:.3} {f:.3}"),
        None => "-".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::MajorityEntry;

    fn sq(id: &str, rel: &str, f1: f64) -> ScoredQuestion {
        ScoredQuestion {
            question_id: id.into(),
            relation: rel.into(),
            score: QuestionScore {
                precision: f1,
                recall: f1,
                f1,
                g_size: 1,
                t_size: 1,
                hit_count: 0,
            },
        }
    }

    #[test]
    fn messi_example() {
        let g = ["Spain NFT", "Inter Miami", "FC Barcelona", "PSG"];
        let t = ["Argentina NFT", "Inter Miami", "FC Barcelona", "PSG"];
        let s = score_question(g, t).unwrap();
        assert_eq!(s.precision, 0.75);
        assert_eq!(s.recall, 0.75);
        assert_eq!(s.f1, 0.75);
        assert_eq!(s.hit_count, 3);
    }

    #[test]
    fn identity_and_disjoint() {
        let s = score_question(["a", "b"], ["b", "a"]).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
        let s = score_question(["marble"], ["Tuckahoe marble"]).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn empty_generation_scores_zero() {
        let s = score_question(Vec::<&str>::new(), ["x"]).unwrap();
        assert_eq!((s.precision, s.recall, s.f1, s.g_size), (0.0, 0.0, 0.0, 0));
        assert!(matches!(
            score_question(["x"], Vec::<&str>::new()),
            Err(EvalError::EmptyTruth)
        ));
    }

    #[test]
    fn matching_is_nfc() {
        let s = score_question(["Me\u{301}tro"], ["M\u{e9}tro"]).unwrap();
        assert_eq!(s.f1, 1.0);
    }

    #[test]
    fn duplicates_do_not_count_twice() {
        let s = score_question(["a", "a", "b"], ["a"]).unwrap();
        assert_eq!(s.g_size, 2);
        assert_eq!(s.precision, 0.5);
    }

    #[test]
    fn macro_over_relations() {
        let r = aggregate(vec![sq("0", "A", 1.0), sq("1", "B", 0.0)]).unwrap();
        assert_eq!(r.overall.f1, 0.5);
        let r = aggregate(vec![
            sq("0", "A", 1.0),
            sq("1", "A", 0.0),
            sq("2", "A", 0.5),
        ])
        .unwrap();
        assert_eq!(r.per_relation["A"].f1, 0.5);
        assert_eq!(r.per_relation["A"].count, 3);
        assert!(matches!(aggregate(vec![]), Err(EvalError::NoScores)));
    }

    #[test]
    fn alt_overall_is_harmonic_of_macro() {
        let mut a = sq("0", "A", 0.0);
        a.score.precision = 1.0;
        a.score.recall = 0.2;
        let r = aggregate(vec![a]).unwrap();
        assert!((r.alt_overall_f1 - harmonic(1.0, 0.2)).abs() < 1e-15);
    }

    #[test]
    fn majority_half_right() {
        let items: Vec<QAItem> = ["US", "US", "FR", "DE"]
            .iter()
            .enumerate()
            .map(|(i, o)| QAItem {
                question: format!("q{i}"),
                subject: format!("s{i}"),
                relation: "R".into(),
                ground_truth: BTreeSet::from([o.to_string()]),
            })
            .collect();
        let mut table = MajorityTable::default();
        table.entries.insert(
            "R".into(),
            MajorityEntry {
                object: "US".into(),
                count: 9,
            },
        );
        let r = run_majority(&items, &table).unwrap();
        assert_eq!(r.per_relation["R"].f1, 0.5);
        assert_eq!(r.per_relation["R"].precision, 0.5);

        let r = run_majority(&items, &MajorityTable::default()).unwrap();
        assert_eq!(r.overall.f1, 0.0);
    }

    #[test]
    fn json_uses_four_decimals() {
        let r = aggregate(vec![sq("0", "A", 2.0 / 3.0), sq("1", "B", 0.03125)]).unwrap();
        let file = ReportFile {
            meta: RunMeta {
                mode: "rcd".into(),
                seed: 1,
            },
            report: r,
        };
        let json = file.to_json();
        assert!(json.contains("\"f1\": 0.6667"));
        assert!(json.contains("\"f1\": 0.0312"));
        let back: ReportFile = serde_json::from_str(&json).unwrap();
        assert_eq!(back.report.per_relation["A"].f1, 0.6667);
        assert_eq!(back.meta.seed, 1);
    }

    #[test]
    fn csv_has_overall_row() {
        let r = aggregate(vec![sq("0", "A", 1.0), sq("1", "B", 0.0)]).unwrap();
        let csv = report_csv(&r);
        assert_eq!(
            csv,
            "relation_id,n,precision,recall,f1\nA,1,1.0000,1.0000,1.0000\nB,1,0.0000,0.0000,0.0000\nOVERALL,2,0.5000,0.5000,0.5000\n"
        );
    }

    #[test]
    fn comparison_deltas() {
        let a = aggregate(vec![sq("0", "A", 0.25), sq("1", "B", 0.5)]).unwrap();
        let b = aggregate(vec![sq("0", "A", 0.75), sq("1", "B", 0.5)]).unwrap();
        let c = Comparison::new(&[("vd".into(), a.clone()), ("rcd".into(), b)]);
        assert!(c.mismatched.is_empty());
        assert_eq!(c.delta(0, 1), Some([0.5, 0.5, 0.5]));
        assert_eq!(c.delta(1, 1), Some([0.0, 0.0, 0.0]));
        assert_eq!(c.rows.last().unwrap().0, "OVERALL");
        assert_eq!(c.delta(2, 1), Some([0.25, 0.25, 0.25]));
        assert!(c.to_text().contains("OVERALL"));
        assert!(c
            .to_csv()
            .starts_with("relation_id,vd:P,vd:R,vd:F1,rcd:P,rcd:R,rcd:F1,rcd:dP"));

        let same = Comparison::new(&[("x".into(), a.clone()), ("y".into(), a)]);
        for i in 0..same.rows.len() {
            assert_eq!(same.delta(i, 1), Some([0.0; 3]));
        }
    }

    #[test]
    fn comparison_flags_mismatch() {
        let a = aggregate(vec![sq("0", "A", 1.0)]).unwrap();
        let b = aggregate(vec![sq("0", "B", 1.0)]).unwrap();
        let c = Comparison::new(&[("a".into(), a), ("b".into(), b)]);
        assert_eq!(c.mismatched.len(), 2);
        assert_eq!(c.delta(0, 1), None);
    }
}
