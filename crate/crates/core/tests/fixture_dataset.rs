mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;

use rcd::dataset::{
    build_majority_table, generate_dataset, heldout_store, intersect_with, overlap_count,
    read_jsonl, write_jsonl, GenerationParams, IntersectOrder,
};
use rcd::kb::load_triples;
use rcd::retriever::{global_pool, KbRetriever, Retriever};
use rcd::DatasetStats;

use common::*;

/// Raw (subject, relation, object) rows straight from a fixture file.
fn rows(name: &str) -> Vec<(String, String, String)> {
    fs::read_to_string(fixture(name))
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            (f[0].trim().into(), f[1].trim().into(), f[2].trim().into())
        })
        .collect()
}

#[test]
fn relation_objects_match_linear_scan() {
    let store = fixture_store();
    let raw = rows("triples.tsv");
    for rel in ["P127", "P54", "P397", "P186", "P569", "P36"] {
        let scan: BTreeSet<String> = raw
            .iter()
            .filter(|r| r.1 == rel)
            .map(|r| r.2.clone())
            .collect();
        assert_eq!(store.objects_of_relation(rel).unwrap(), scan, "{rel}");
    }
}

#[test]
fn messi_candidates_are_all_teams() {
    let store = fixture_store();
    let items = generate_dataset(&store, &GenerationParams::default());
    let item = rcd::QAItem {
        question: "Which teams has Lionel Messi played for?".into(),
        subject: "Lionel Messi".into(),
        relation: "P54".into(),
        ground_truth: store.objects("Lionel Messi", "P54").unwrap().clone(),
    };
    let c = KbRetriever::new(&store).retrieve("x", &item).unwrap();
    let teams: BTreeSet<String> = rows("triples.tsv")
        .into_iter()
        .filter(|r| r.1 == "P54")
        .map(|r| r.2)
        .collect();
    assert_eq!(c.candidates, teams);
    assert!(item.ground_truth.is_subset(&c.candidates));
    let relations: BTreeSet<&str> = items.iter().map(|i| i.relation.as_str()).collect();
    assert_eq!(relations, BTreeSet::from(["P127", "P397", "P54"]));
    assert!(global_pool(&store, relations).is_superset(&c.candidates));
}

#[test]
fn ground_truth_comes_from_the_kb() {
    let store = fixture_store();
    for item in fixture_dataset(&store) {
        let kb = store.objects(&item.subject, &item.relation).unwrap();
        assert!(item.ground_truth.is_subset(kb));
        let spec = store.relation(&item.relation).unwrap();
        assert_eq!(item.question, spec.question_for(&item.subject));
        let subject = item.subject.to_lowercase();
        assert!(item
            .ground_truth
            .iter()
            .all(|o| !subject.contains(&o.to_lowercase())));
    }
}

#[test]
fn containment_drops_contained_objects() {
    let store = fixture_store();
    let item = |subject: &str| rcd::QAItem {
        question: String::new(),
        subject: subject.into(),
        relation: "P397".into(),
        ground_truth: store.objects(subject, "P397").unwrap().clone(),
    };
    let kept = rcd::dataset::apply_containment_filter(vec![item("Kepler-88c"), item("Baba I")]);
    assert_eq!(kept.len(), 1);
    assert_eq!(kept[0].subject, "Baba I");
}

#[test]
fn intersection_matches_oracle() {
    let store = fixture_store();
    let reference = load_triples(&fixture("wikidata.tsv")).unwrap();
    let refset: BTreeSet<(String, String, String)> = rows("wikidata.tsv").into_iter().collect();
    let items = generate_dataset(&store, &GenerationParams::default());
    let kept = intersect_with(items.clone(), &reference);
    let mut expected = Vec::new();
    for mut item in items {
        item.ground_truth
            .retain(|o| refset.contains(&(item.subject.clone(), item.relation.clone(), o.clone())));
        if !item.ground_truth.is_empty() {
            expected.push(item);
        }
    }
    assert_eq!(kept, expected);
}

#[test]
fn orders_and_seeds() {
    let store = fixture_store();
    let reference = load_triples(&fixture("wikidata.tsv")).unwrap();
    let p = GenerationParams::default();
    let a = rcd::dataset::build_dataset(
        &store,
        Some(&reference),
        &p,
        IntersectOrder::SampleThenIntersect,
        true,
    );
    let b = rcd::dataset::build_dataset(
        &store,
        Some(&reference),
        &p,
        IntersectOrder::SampleThenIntersect,
        true,
    );
    assert_eq!(a, b);
    let c = rcd::dataset::build_dataset(
        &store,
        Some(&reference),
        &p,
        IntersectOrder::IntersectThenSample,
        true,
    );
    assert!(c
        .iter()
        .all(|i| i.ground_truth.iter().all(|o| reference.contains_fact(
            &i.subject,
            &i.relation,
            o
        ))));
    let other = GenerationParams { seed: 1, ..p };
    let d = rcd::dataset::build_dataset(
        &store,
        Some(&reference),
        &other,
        IntersectOrder::SampleThenIntersect,
        true,
    );
    assert_ne!(a, d);
}

#[test]
fn majority_matches_counting_oracle() {
    let store = fixture_store();
    let items = fixture_dataset(&store);
    let heldout = heldout_store(&store, &items);
    assert_eq!(overlap_count(&items, &heldout), 0);
    let asked: BTreeSet<(String, String)> = items
        .iter()
        .map(|i| (i.subject.clone(), i.relation.clone()))
        .collect();
    let table = build_majority_table(&heldout, ["P127", "P54", "P397"]);
    for rel in ["P127", "P54", "P397"] {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for (s, r, o) in rows("triples.tsv") {
            if r == rel && !asked.contains(&(s, r.clone())) {
                *counts.entry(o).or_default() += 1;
            }
        }
        let best = counts.values().max().copied().unwrap();
        let winner = counts.iter().find(|(_, &c)| c == best).unwrap().0;
        let entry = table.get(rel).unwrap();
        assert_eq!((&entry.object, entry.count), (winner, best), "{rel}");
    }
}

#[test]
fn jsonl_round_trip_and_stats() {
    let store = fixture_store();
    let items = fixture_dataset(&store);
    let mut buf = Vec::new();
    write_jsonl(&items, &mut buf).unwrap();
    let back = read_jsonl(&buf[..], "mem").unwrap();
    assert_eq!(back, items);
    let stats = DatasetStats::of(&items);
    assert_eq!(
        stats.multi_cardinality,
        items.iter().filter(|i| i.ground_truth.len() >= 2).count()
    );
    assert_eq!(stats.relations, 3);
}
