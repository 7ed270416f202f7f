use std::collections::BTreeSet;

use artikit::abx::{parse_item_file, parse_items, run_abx, write_items, AbxConfig, AbxItem, AbxMode, TripletLimits};
use artikit::synthetic::{write_abx_corpus, AbxCorpus};
use artikit::Error;

fn corpus(dir: &std::path::Path, spec: &AbxCorpus) -> Vec<AbxItem> {
    write_abx_corpus(dir, spec).unwrap();
    parse_item_file(dir.join("items.item")).unwrap()
}

#[test]
fn separable_corpus_from_disk_scores_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let items = corpus(dir.path(), &AbxCorpus { tokens: 6, ..Default::default() });
    for mode in [AbxMode::Within, AbxMode::Across] {
        let cfg = AbxConfig { mode, ..Default::default() };
        let rep = run_abx(&dir.path().join("features"), &items, &cfg).unwrap();
        assert_eq!(rep.error, 0.0, "{mode}");
        assert_eq!(rep.pairs.len(), 15);
        assert!(rep.to_csv().lines().count() > 15);
    }
}

#[test]
fn subsampling_is_seeded_and_bounded() {
    let dir = tempfile::tempdir().unwrap();
    let items = corpus(dir.path(), &AbxCorpus { tokens: 8, noise: 2.0, ..Default::default() });
    let run = |seed| {
        let cfg = AbxConfig {
            min_contexts: 1,
            limits: TripletLimits { max_triplets_per_cell: Some(20), seed },
            ..Default::default()
        };
        run_abx(&dir.path().join("features"), &items, &cfg).unwrap()
    };
    let (a, b) = (run(1), run(1));
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert!(a.cells.iter().all(|c| c.n_triplets <= 20));
    let c = run(2);
    assert_eq!(c.n_triplets, a.n_triplets);
}

#[test]
fn item_problems() {
    let dir = tempfile::tempdir().unwrap();
    let mut items = corpus(dir.path(), &AbxCorpus { tokens: 8, ..Default::default() });
    let feats = dir.path().join("features");
    let cfg = AbxConfig { min_contexts: 1, ..Default::default() };

    // an item lying strictly between two frame times is dropped and listed
    let mut short = items[0].clone();
    short.onset_s += 0.002;
    short.offset_s = short.onset_s + 0.002;
    items.push(short);
    let rep = run_abx(&feats, &items, &cfg).unwrap();
    assert_eq!(rep.dropped_items.len(), 1);
    assert_eq!(rep.dropped_items[0].index, items.len() - 1);

    // an item past the end of its file is an error
    let mut past = items[0].clone();
    past.onset_s = 1e4;
    past.offset_s = 1e4 + 0.1;
    items.push(past);
    assert!(matches!(run_abx(&feats, &items, &cfg), Err(Error::Bounds(_))));

    // unknown file
    items.pop();
    let mut ghost = items[0].clone();
    ghost.file_id = "ghost".into();
    items.push(ghost);
    assert!(run_abx(&feats, &items, &cfg).is_err());
}

#[test]
fn across_mode_needs_two_speakers() {
    let dir = tempfile::tempdir().unwrap();
    let items = corpus(dir.path(), &AbxCorpus { speakers: 1, tokens: 5, ..Default::default() });
    let cfg = AbxConfig { mode: AbxMode::Across, ..Default::default() };
    assert!(matches!(
        run_abx(&dir.path().join("features"), &items, &cfg),
        Err(Error::NoEvaluableContrasts(_))
    ));
}

#[test]
fn exclusions_remove_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let items = corpus(dir.path(), &AbxCorpus { phones: 3, tokens: 8, ..Default::default() });
    let phones: BTreeSet<&str> = items.iter().map(|i| i.phone.as_str()).collect();
    let v: Vec<&str> = phones.into_iter().collect();
    let cfg = AbxConfig {
        exclusions: [(v[0].to_string(), v[1].to_string())].into_iter().collect(),
        min_contexts: 1,
        ..Default::default()
    };
    let rep = run_abx(&dir.path().join("features"), &items, &cfg).unwrap();
    assert_eq!(rep.pairs.len(), 2);
    assert_eq!(rep.excluded.len(), 1);
}

#[test]
fn item_text_round_trip_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let items = corpus(dir.path(), &AbxCorpus { tokens: 2, ..Default::default() });
    let text = write_items(&items);
    assert_eq!(parse_items(&text, "x".as_ref()).unwrap(), items);
    assert!(parse_items("file onset offset\n", "x".as_ref()).is_err());
    let bad_times = "#file onset offset #phone prev next speaker\nf 0.5 0.2 a b c s\n";
    assert!(parse_items(bad_times, "x".as_ref()).is_err());
    let short_row = "#file onset offset #phone prev next speaker\nf 0.1 0.2 a b\n";
    assert!(parse_items(short_row, "x".as_ref()).is_err());
}
