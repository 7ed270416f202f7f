use std::collections::BTreeMap;
use std::path::Path;

use artikit::pipeline::{run_pipeline, PipelineConfig};
use artikit::synthetic::{write_toy_corpus, ToyCorpus};
use artikit::Error;

fn toy(dir: &Path) {
    let spec = ToyCorpus {
        speakers: 2,
        utterances_per_speaker: 3,
        ..Default::default()
    };
    write_toy_corpus(&dir.join("toy"), &spec).unwrap();
}

const CORPUS: &str = r#"
[[preprocess.corpus]]
name = "toy"
manifest = "toy/manifest.jsonl"
"#;

fn config(dir: &Path, head: &str, tail: &str) -> Result<PipelineConfig, Error> {
    PipelineConfig::from_toml(&format!("{head}\n{CORPUS}\n{tail}"), dir)
}

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn missing_item_file_fails_before_any_work() {
    let dir = tempfile::tempdir().unwrap();
    toy(dir.path());
    let cfg = config(
        dir.path(),
        r#"stages = ["preprocess", "model", "abx"]"#,
        "[model]\nkind = \"noisy-reference\"\n[abx]\nitems = \"nope.item\"\n",
    );
    match cfg {
        Err(Error::Config { field, .. }) => assert_eq!(field, "abx.items"),
        other => panic!("expected a config error, got {other:?}"),
    }
    assert!(!dir.path().join("out").exists(), "work started despite a bad config");
}

#[test]
fn unknown_field_and_bad_values_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    toy(dir.path());
    assert!(config(dir.path(), "stages = [\"preprocess\"]\ncolour = 1", "").is_err());
    match config(dir.path(), "stages = [\"preprocess\"]\n[preprocess]\nfilter_taps = 0", "") {
        Err(Error::Config { field, .. }) => assert!(field.starts_with("preprocess."), "{field}"),
        other => panic!("{other:?}"),
    }
    assert!(config(dir.path(), r#"stages = ["preprocess", "model"]"#, "").is_err());
    assert!(config(dir.path(), r#"stages = ["score-recon"]"#, "").is_err());
}

#[test]
fn preprocess_only_writes_features_and_one_report() {
    let dir = tempfile::tempdir().unwrap();
    toy(dir.path());
    let cfg = config(dir.path(), r#"stages = ["preprocess"]"#, "").unwrap();
    let outcome = run_pipeline(&cfg).unwrap();
    let names: Vec<String> = outcome.reports.iter().map(|p| p.display().to_string()).collect();
    assert!(names.iter().all(|n| n.contains("preprocess_toy")), "{names:?}");
    let pre = dir.path().join("out/preprocessed/toy");
    assert!(pre.join("manifest.jsonl").is_file());
    assert!(!dir.path().join("out/predictions").exists());
    let json = std::fs::read_to_string(dir.path().join("out").join(&outcome.reports[0])).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["toolkit"], "artikit");
    assert_eq!(v["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn preprocessing_is_bit_reproducible() {
    let mut trees = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        toy(dir.path());
        let cfg = config(dir.path(), r#"stages = ["preprocess"]"#, "").unwrap();
        run_pipeline(&cfg).unwrap();
        trees.push(tree(&dir.path().join("out")));
    }
    assert!(!trees[0].is_empty());
    assert_eq!(trees[0], trees[1]);
}

#[test]
fn full_run_then_rescoring_from_existing_outputs() {
    let dir = tempfile::tempdir().unwrap();
    toy(dir.path());
    let tail = "[model]\nkind = \"noisy-reference\"\nnoise = 0.0\n[abx]\nitems = \"toy/items.item\"\nmin_contexts = 1\nmodes = [\"within\"]\n";
    let cfg = config(dir.path(), r#"stages = ["preprocess", "model", "score-recon", "abx"]"#, tail).unwrap();
    run_pipeline(&cfg).unwrap();

    // predictions identical to the references score perfectly
    let recon = std::fs::read_to_string(dir.path().join("out/reports/recon_toy.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&recon).unwrap();
    assert_eq!(v["kind"], "score-recon");
    let rmse = v["report"]["mean_rmse_norm"].as_f64().unwrap();
    assert!(rmse < 1e-6, "{rmse}");

    // later stages alone reuse what is on disk
    let again = config(dir.path(), r#"stages = ["score-recon"]"#, tail).unwrap();
    let out = run_pipeline(&again).unwrap();
    assert_eq!(out.reports.len(), 2);
}

#[test]
fn failing_model_command_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    toy(dir.path());
    for (cmd, needle) in [("[\"false\"]", "exited"), ("[\"true\"]", "no prediction")] {
        let cfg = config(
            dir.path(),
            r#"stages = ["preprocess", "model"]"#,
            &format!("[model]\nkind = \"command\"\ncommand = {cmd}\n"),
        )
        .unwrap();
        let err = run_pipeline(&cfg).unwrap_err();
        assert!(err.to_string().contains("stage `model`"), "{err}");
        assert!(err.to_string().contains(needle), "{err}");
    }
}
