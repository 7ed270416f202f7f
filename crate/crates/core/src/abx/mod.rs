//! ABX phone discrimination over frame-level features.

mod aggregate;
mod dtw;
mod items;
mod triplets;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rayon::prelude::*;

pub use aggregate::{
    aggregate, parse_exclusions, phone_pair, read_exclusions, AbxReport, CellResult, ContextResult,
    ContrastCell, DroppedItem, ExcludedContrast, PairResult,
};
pub use dtw::{cosine_distance, dtw_distance, dtw_segments, Segment};
pub use items::{frame_slice, parse_item_file, parse_items, write_items, AbxItem, ITEM_HEADER};
pub use triplets::{
    build_triplets, plan_cells, AbxMode, CellKey, CellPlan, Orientation, SpeakerGroup, Triplet,
    TripletLimits,
};

use crate::afv;
use crate::error::{Error, Result};
use crate::frames::{time_to_frame, FrameSequence};

/// Scores one triplet: 1 when X is closer to A, 0 when closer to B, 0.5 on a tie.
pub fn score_triplet(t: &Triplet, segments: &[Segment]) -> Result<f64> {
    let d_ax = dtw_segments(&segments[t.a], &segments[t.x])?;
    let d_bx = dtw_segments(&segments[t.b], &segments[t.x])?;
    Ok(correctness(d_bx - d_ax))
}

fn correctness(delta: f64) -> f64 {
    if delta > 0.0 {
        1.0
    } else if delta < 0.0 {
        0.0
    } else {
        0.5
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct AbxConfig {
    pub mode: AbxMode,
    pub min_contexts: usize,
    pub limits: TripletLimits,
    pub exclusions: BTreeSet<(String, String)>,
}

impl Default for AbxConfig {
    fn default() -> Self {
        AbxConfig {
            mode: AbxMode::Within,
            min_contexts: 3,
            limits: TripletLimits::default(),
            exclusions: BTreeSet::new(),
        }
    }
}

/// Scores every cell of a plan. DTW values are cached per cell, since each
/// token appears in many triplets.
fn score_cell(plan: &CellPlan, segments: &[Segment], limits: &TripletLimits) -> Result<ContrastCell> {
    let triplets = plan.triplets(limits);
    let mut cache: HashMap<(usize, usize), f64> = HashMap::new();
    let mut dist = |i: usize, j: usize| -> Result<f64> {
        let key = (i.min(j), i.max(j));
        if let Some(d) = cache.get(&key) {
            return Ok(*d);
        }
        let d = dtw_segments(&segments[key.0], &segments[key.1])?;
        cache.insert(key, d);
        Ok(d)
    };
    let mut sum_correct = 0.0;
    for t in &triplets {
        let d_ax = dist(t.a, t.x)?;
        let d_bx = dist(t.b, t.x)?;
        sum_correct += correctness(d_bx - d_ax);
    }
    Ok(ContrastCell {
        key: plan.key.clone(),
        n_triplets: triplets.len(),
        sum_correct,
    })
}

/// ABX evaluation over features already in memory, keyed by file id.
pub fn evaluate(
    items: &[AbxItem],
    features: &BTreeMap<String, FrameSequence>,
    cfg: &AbxConfig,
) -> Result<AbxReport> {
    let mut kept = Vec::with_capacity(items.len());
    let mut segments = Vec::with_capacity(items.len());
    let mut dropped = Vec::new();
    for (index, item) in items.iter().enumerate() {
        let seq = features.get(&item.file_id).ok_or_else(|| {
            Error::Bounds(format!("item {index} refers to unknown file `{}`", item.file_id))
        })?;
        let rate = seq.rate_hz();
        if time_to_frame(item.offset_s, rate) <= time_to_frame(item.onset_s, rate) {
            log::warn!(
                "dropping item {index} ({} [{}, {}) s): shorter than one frame at {rate} Hz",
                item.file_id,
                item.onset_s,
                item.offset_s
            );
            dropped.push(DroppedItem {
                index,
                file_id: item.file_id.clone(),
                reason: format!("covers no frame at {rate} Hz"),
            });
            continue;
        }
        segments.push(Segment::new(&frame_slice(seq, item)?));
        kept.push(item.clone());
    }
    if let Some(first) = segments.first() {
        if let Some(bad) = segments.iter().find(|s| s.dim() != first.dim()) {
            return Err(Error::ShapeMismatch(format!(
                "feature files mix {}- and {}-dimensional frames",
                first.dim(),
                bad.dim()
            )));
        }
    }
    let zero_frames: usize = segments.iter().map(Segment::zero_frames).sum();
    if zero_frames > 0 {
        log::warn!("{zero_frames} all-zero frame(s) in ABX segments; they sit at distance 1 from everything");
    }

    let plans = plan_cells(&kept, cfg.mode);
    log::info!(
        "{} item(s) kept, {} dropped, {} {} cell(s)",
        kept.len(),
        dropped.len(),
        plans.len(),
        cfg.mode
    );
    let cells = plans
        .par_iter()
        .map(|p| score_cell(p, &segments, &cfg.limits))
        .collect::<Result<Vec<_>>>()?;

    let mut report = aggregate(&cells, cfg.min_contexts, &cfg.exclusions)?;
    report.mode = Some(cfg.mode);
    report.dropped_items = dropped;
    report.zero_frames = zero_frames;
    Ok(report)
}

/// Loads `<features_dir>/<file_id>.afv` for every referenced file and runs
/// [`evaluate`].
pub fn run_abx(features_dir: &Path, items: &[AbxItem], cfg: &AbxConfig) -> Result<AbxReport> {
    let ids: BTreeSet<&str> = items.iter().map(|i| i.file_id.as_str()).collect();
    let loaded = ids
        .into_par_iter()
        .map(|id| {
            let path = features_dir.join(format!("{id}.{}", afv::EXTENSION));
            afv::read_feature_file(&path).map(|seq| (id.to_string(), seq))
        })
        .collect::<Result<Vec<_>>>()?;
    evaluate(items, &loaded.into_iter().collect(), cfg)
}
