//! Score a handful of answers, aggregate them per relation and overall,
//! and print the JSON and CSV reports plus a side-by-side comparison.
//!
//! ```bash
//! cargo run -p rcd --example evaluate_report
//! ```

use rcd::eval::{
    aggregate, report_csv, score_question, Comparison, ReportFile, RunMeta, ScoredQuestion,
};

fn scored(id: usize, relation: &str, g: &[&str], t: &[&str]) -> ScoredQuestion {
    ScoredQuestion {
        question_id: id.to_string(),
        relation: relation.into(),
        score: score_question(g.iter().copied(), t.iter().copied()).unwrap(),
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let messi = [
        "Argentina national football team",
        "Inter Miami",
        "FC Barcelona",
        "Paris Saint-Germain",
    ];
    let rcd = aggregate(vec![
        scored(
            0,
            "P54",
            &[
                "Spain national football team",
                "Inter Miami",
                "FC Barcelona",
                "Paris Saint-Germain",
            ],
            &messi,
        ),
        scored(1, "P186", &["Tuckahoe marble"], &["Tuckahoe marble"]),
        scored(
            2,
            "P127",
            &["RATP Group"],
            &["RATP Group", "Île-de-France Mobilités"],
        ),
    ])?;
    let vd = aggregate(vec![
        scored(
            0,
            "P54",
            &[
                "Spain national football team",
                "Inter Miami",
                "FC Barcelona",
                "PSG",
            ],
            &messi,
        ),
        scored(1, "P186", &["made from marble"], &["Tuckahoe marble"]),
        scored(2, "P127", &[], &["RATP Group", "Île-de-France Mobilités"]),
    ])?;

    let file = ReportFile {
        meta: RunMeta {
            mode: "rcd".into(),
            seed: 0,
        },
        report: rcd.clone(),
    };
    print!("{}", file.to_json());
    print!("{}", report_csv(&rcd));
    println!(
        "alt overall F1 (harmonic of macro P and R): {:.4}",
        rcd.alt_overall_f1
    );

    let cmp = Comparison::new(&[("rcd".into(), rcd), ("vd".into(), vd)]);
    print!("{}", cmp.to_text());
    Ok(())
}
