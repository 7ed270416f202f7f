use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::triplets::{AbxMode, CellKey};
use crate::error::{Error, Result};

/// Accumulated correctness of one cell. Ties count 0.5.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastCell {
    pub key: CellKey,
    pub n_triplets: usize,
    pub sum_correct: f64,
}

impl ContrastCell {
    pub fn accuracy(&self) -> f64 {
        self.sum_correct / self.n_triplets as f64
    }
}

/// An unordered phone pair, stored sorted.
pub fn phone_pair(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

/// Reads phone-pair exclusions: one whitespace-separated pair per line,
/// `#` starts a comment.
pub fn parse_exclusions(text: &str, path: &Path) -> Result<BTreeSet<(String, String)>> {
    let mut out = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 2 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: format!("expected a phone pair, found {} fields", cols.len()),
            });
        }
        out.insert(phone_pair(cols[0], cols[1]));
    }
    Ok(out)
}

pub fn read_exclusions(path: impl AsRef<Path>) -> Result<BTreeSet<(String, String)>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_exclusions(&text, path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub phone_a: String,
    pub phone_b: String,
    pub prev: String,
    pub next: String,
    pub speakers: String,
    pub n_triplets: usize,
    pub sum_correct: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextResult {
    pub phone_a: String,
    pub phone_b: String,
    pub prev: String,
    pub next: String,
    pub speaker_groups: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    pub phone_a: String,
    pub phone_b: String,
    pub contexts: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedContrast {
    pub phone_a: String,
    pub phone_b: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedItem {
    /// Position of the item among the item file's rows, from 0.
    pub index: usize,
    pub file_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbxReport {
    pub mode: Option<AbxMode>,
    /// How across-speaker cells are keyed.
    pub speaker_groups: String,
    pub min_contexts: usize,
    pub n_triplets: usize,
    /// Mean over evaluable phone pairs of the context-averaged accuracy.
    pub score: f64,
    /// `1 − score`.
    pub error: f64,
    pub pairs: Vec<PairResult>,
    pub contexts: Vec<ContextResult>,
    pub cells: Vec<CellResult>,
    pub excluded: Vec<ExcludedContrast>,
    pub dropped_items: Vec<DroppedItem>,
    pub zero_frames: usize,
}

type ContextAccuracies<'a> = BTreeMap<&'a (String, String), Vec<f64>>;

/// Averages cell accuracies over speaker groups within each (pair, context),
/// then over contexts within each pair, drops pairs with fewer than
/// `min_contexts` contexts or listed in `exclusions`, and averages the
/// surviving pairs. Input order does not matter.
pub fn aggregate(
    cells: &[ContrastCell],
    min_contexts: usize,
    exclusions: &BTreeSet<(String, String)>,
) -> Result<AbxReport> {
    // cells sharing a key are merged; tallies are counts of halves, so exact
    let mut merged: BTreeMap<&CellKey, (usize, f64)> = BTreeMap::new();
    for c in cells.iter().filter(|c| c.n_triplets > 0) {
        let e = merged.entry(&c.key).or_insert((0, 0.0));
        e.0 += c.n_triplets;
        e.1 += c.sum_correct;
    }
    let merged: Vec<ContrastCell> = merged
        .into_iter()
        .map(|(key, (n_triplets, sum_correct))| ContrastCell {
            key: key.clone(),
            n_triplets,
            sum_correct,
        })
        .collect();
    let sorted: Vec<&ContrastCell> = merged.iter().collect();

    // pair -> context -> cell accuracies, all in key order
    let mut tree: BTreeMap<&(String, String), ContextAccuracies> = BTreeMap::new();
    for c in &sorted {
        tree.entry(&c.key.phones)
            .or_default()
            .entry(&c.key.context)
            .or_default()
            .push(c.accuracy());
    }

    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let mut contexts = Vec::new();
    let mut pairs = Vec::new();
    let mut excluded = Vec::new();
    for (pair, by_ctx) in &tree {
        let mut ctx_acc = Vec::with_capacity(by_ctx.len());
        for (ctx, accs) in by_ctx {
            let acc = mean(accs);
            ctx_acc.push(acc);
            contexts.push(ContextResult {
                phone_a: pair.0.clone(),
                phone_b: pair.1.clone(),
                prev: ctx.0.clone(),
                next: ctx.1.clone(),
                speaker_groups: accs.len(),
                accuracy: acc,
            });
        }
        let reason = if exclusions.contains(*pair) {
            Some("listed in exclusions".to_string())
        } else if ctx_acc.len() < min_contexts {
            Some(format!(
                "only {} context(s), at least {min_contexts} required",
                ctx_acc.len()
            ))
        } else {
            None
        };
        match reason {
            Some(reason) => excluded.push(ExcludedContrast {
                phone_a: pair.0.clone(),
                phone_b: pair.1.clone(),
                reason,
            }),
            None => pairs.push(PairResult {
                phone_a: pair.0.clone(),
                phone_b: pair.1.clone(),
                contexts: ctx_acc.len(),
                accuracy: mean(&ctx_acc),
            }),
        }
    }
    if pairs.is_empty() {
        let why = excluded
            .first()
            .map(|e| format!("; e.g. {}-{}: {}", e.phone_a, e.phone_b, e.reason))
            .unwrap_or_default();
        return Err(Error::NoEvaluableContrasts(format!(
            "{} contrast(s) found, none evaluable{why}",
            excluded.len()
        )));
    }
    let score = pairs.iter().map(|p| p.accuracy).sum::<f64>() / pairs.len() as f64;
    let mode = sorted.first().map(|c| match c.key.speakers {
        super::triplets::SpeakerGroup::Within(_) => AbxMode::Within,
        super::triplets::SpeakerGroup::Across { .. } => AbxMode::Across,
    });
    Ok(AbxReport {
        mode,
        speaker_groups: "ordered (A/B speaker > X speaker) pairs for across; single speaker for within".into(),
        min_contexts,
        n_triplets: sorted.iter().map(|c| c.n_triplets).sum(),
        score,
        error: 1.0 - score,
        pairs,
        contexts,
        cells: sorted
            .iter()
            .map(|c| CellResult {
                phone_a: c.key.phones.0.clone(),
                phone_b: c.key.phones.1.clone(),
                prev: c.key.context.0.clone(),
                next: c.key.context.1.clone(),
                speakers: c.key.speakers.to_string(),
                n_triplets: c.n_triplets,
                sum_correct: c.sum_correct,
                accuracy: c.accuracy(),
            })
            .collect(),
        excluded,
        dropped_items: Vec::new(),
        zero_frames: 0,
    })
}

impl AbxReport {
    /// One row per evaluable pair, then the global line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("phone_a,phone_b,contexts,accuracy,error\n");
        for p in &self.pairs {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                p.phone_a,
                p.phone_b,
                p.contexts,
                p.accuracy,
                1.0 - p.accuracy
            ));
        }
        out.push_str(&format!("ALL,ALL,,{},{}\n", self.score, self.error));
        out
    }
}
