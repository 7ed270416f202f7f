//! Reconstruction scores: RMSE, Pearson correlation and the combined
//! `RMSE − β·PCC` objective.
//!
//! RMSE aggregates skip the dimensionless constriction channels (TTC, TBC);
//! PCC aggregates use every included channel. A channel with zero variance
//! in either argument gets PCC 0 and is flagged.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::FrameSequence;
use crate::preprocess::RollingStats;

pub const DEFAULT_BETA: f64 = 1000.0;

/// Channels scored by PCC but left out of RMSE.
pub fn is_rmse_channel(name: &str) -> bool {
    !matches!(name, "TTC" | "TBC")
}

/// Root mean squared difference of two equal-length series.
pub fn rmse_series(pred: &[f64], reference: &[f64]) -> f64 {
    let sq: f64 = pred
        .iter()
        .zip(reference)
        .map(|(p, r)| (p - r) * (p - r))
        .sum();
    (sq / pred.len() as f64).sqrt()
}

/// Pearson correlation, or `None` when either series has zero variance.
pub fn pcc_series(pred: &[f64], reference: &[f64]) -> Option<f64> {
    let n = pred.len() as f64;
    let mp = pred.iter().sum::<f64>() / n;
    let mr = reference.iter().sum::<f64>() / n;
    let (mut cov, mut vp, mut vr) = (0.0, 0.0, 0.0);
    for (p, r) in pred.iter().zip(reference) {
        let (dp, dr) = (p - mp, r - mr);
        cov += dp * dr;
        vp += dp * dp;
        vr += dr * dr;
    }
    if vp == 0.0 || vr == 0.0 {
        return None;
    }
    Some((cov / (vp * vr).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelScores {
    pub channel_names: Vec<String>,
    /// `None` for channels not included in this score.
    pub values: Vec<Option<f64>>,
    /// Unweighted mean over included channels.
    pub mean: f64,
    /// Channels where PCC was undefined and set to 0.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub zero_variance: Vec<String>,
}

impl ChannelScores {
    pub fn included(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        let i = self.channel_names.iter().position(|n| n == name)?;
        self.values[i]
    }
}

fn check_pair(pred: &FrameSequence, reference: &FrameSequence, mask: &[bool]) -> Result<()> {
    if !pred.same_layout(reference) {
        return Err(Error::ShapeMismatch(format!(
            "prediction is {}x{} {:?}, reference is {}x{} {:?}",
            pred.n_frames(),
            pred.n_channels(),
            pred.channel_names(),
            reference.n_frames(),
            reference.n_channels(),
            reference.channel_names()
        )));
    }
    if mask.len() != pred.n_channels() {
        return Err(Error::ShapeMismatch(format!(
            "mask has {} entries for {} channels",
            mask.len(),
            pred.n_channels()
        )));
    }
    Ok(())
}

fn mean_of_included(values: &[Option<f64>], what: &str) -> Result<f64> {
    let inc: Vec<f64> = values.iter().flatten().copied().collect();
    if inc.is_empty() {
        return Err(Error::InvalidParameter(format!("no channel included in {what}")));
    }
    Ok(inc.iter().sum::<f64>() / inc.len() as f64)
}

fn rmse_values(pred: &FrameSequence, reference: &FrameSequence, mask: &[bool]) -> Vec<Option<f64>> {
    (0..pred.n_channels())
        .map(|c| {
            (mask[c] && is_rmse_channel(&pred.channel_names()[c]))
                .then(|| rmse_series(&pred.column(c), &reference.column(c)))
        })
        .collect()
}

fn pcc_values(
    pred: &FrameSequence,
    reference: &FrameSequence,
    mask: &[bool],
) -> (Vec<Option<f64>>, Vec<String>) {
    let mut zero_variance = Vec::new();
    let values = (0..pred.n_channels())
        .map(|c| {
            mask[c].then(|| {
                pcc_series(&pred.column(c), &reference.column(c)).unwrap_or_else(|| {
                    zero_variance.push(pred.channel_names()[c].clone());
                    0.0
                })
            })
        })
        .collect();
    (values, zero_variance)
}

/// Per-channel RMSE over frames; TTC/TBC and masked channels are skipped.
pub fn rmse(pred: &FrameSequence, reference: &FrameSequence, mask: &[bool]) -> Result<ChannelScores> {
    check_pair(pred, reference, mask)?;
    let values = rmse_values(pred, reference, mask);
    Ok(ChannelScores {
        channel_names: pred.channel_names().to_vec(),
        mean: mean_of_included(&values, "RMSE")?,
        values,
        zero_variance: Vec::new(),
    })
}

/// Per-channel Pearson correlation over frames for every unmasked channel.
pub fn pcc(pred: &FrameSequence, reference: &FrameSequence, mask: &[bool]) -> Result<ChannelScores> {
    check_pair(pred, reference, mask)?;
    let (values, zero_variance) = pcc_values(pred, reference, mask);
    Ok(ChannelScores {
        channel_names: pred.channel_names().to_vec(),
        mean: mean_of_included(&values, "PCC")?,
        values,
        zero_variance,
    })
}

/// `mean RMSE − beta · mean PCC`. With every channel masked the loss is 0.
pub fn combined_loss(
    pred: &FrameSequence,
    reference: &FrameSequence,
    mask: &[bool],
    beta: f64,
) -> Result<f64> {
    check_pair(pred, reference, mask)?;
    let r = rmse_values(pred, reference, mask);
    let (p, _) = pcc_values(pred, reference, mask);
    let mean = |v: &[Option<f64>]| {
        let inc: Vec<f64> = v.iter().flatten().copied().collect();
        if inc.is_empty() {
            0.0
        } else {
            inc.iter().sum::<f64>() / inc.len() as f64
        }
    };
    Ok(mean(&r) - beta * mean(&p))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pooling {
    /// Concatenate the frames of all utterances, then score once.
    #[default]
    Frames,
    /// Score each utterance, then average over utterances.
    Utterances,
}

/// One utterance to score. Both sequences are in normalized units; when
/// `stats` is given, millimeter RMSE is computed after undoing the rolling
/// normalization of utterance `index`.
#[derive(Debug, Clone)]
pub struct ReconPair<'a> {
    pub id: String,
    pub pred: FrameSequence,
    pub reference: FrameSequence,
    pub mask: Vec<bool>,
    pub stats: Option<(&'a RollingStats, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelReport {
    pub channel: String,
    pub rmse_mm: Option<f64>,
    pub rmse_norm: Option<f64>,
    pub pcc: Option<f64>,
    pub frames: usize,
    pub utterances: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconReport {
    pub pooling: Pooling,
    pub utterances: usize,
    pub channels: Vec<ChannelReport>,
    /// Channels that contributed to at least one score.
    pub mask: Vec<String>,
    pub mean_rmse_mm: Option<f64>,
    pub mean_rmse_norm: Option<f64>,
    pub mean_pcc: Option<f64>,
    pub zero_variance: Vec<String>,
}

#[derive(Default)]
struct ChannelAccum {
    pred: Vec<f64>,
    reference: Vec<f64>,
    pred_mm: Vec<f64>,
    ref_mm: Vec<f64>,
    has_mm: bool,
    per_utt: Vec<(f64, Option<f64>, Option<f64>)>,
    utterances: usize,
}

/// Scores a set of utterances channel by channel (channels matched by name,
/// in order of first appearance).
pub fn score_reconstructions(pairs: &[ReconPair<'_>], pooling: Pooling) -> Result<ReconReport> {
    let mut names: Vec<String> = Vec::new();
    let mut acc: Vec<ChannelAccum> = Vec::new();
    let mut all_mm = true;
    let mut zero_variance: Vec<String> = Vec::new();

    for pair in pairs {
        check_pair(&pair.pred, &pair.reference, &pair.mask)
            .map_err(|e| Error::ShapeMismatch(format!("utterance {}: {e}", pair.id)))?;
        let mm = match pair.stats {
            Some((stats, idx)) => Some((
                stats.denormalize(idx, &pair.pred)?,
                stats.denormalize(idx, &pair.reference)?,
            )),
            None => {
                all_mm = false;
                None
            }
        };
        for (c, name) in pair.pred.channel_names().iter().enumerate() {
            if !pair.mask[c] {
                continue;
            }
            let slot = match names.iter().position(|n| n == name) {
                Some(i) => i,
                None => {
                    names.push(name.clone());
                    acc.push(ChannelAccum::default());
                    names.len() - 1
                }
            };
            let a = &mut acc[slot];
            let p = pair.pred.column(c);
            let r = pair.reference.column(c);
            let (pm, rm) = match &mm {
                Some((pm, rm)) => (Some(pm.column(c)), Some(rm.column(c))),
                None => (None, None),
            };
            let utt_pcc = pcc_series(&p, &r);
            let utt_mm = pm.as_ref().zip(rm.as_ref()).map(|(a, b)| rmse_series(a, b));
            a.per_utt.push((rmse_series(&p, &r), utt_mm, utt_pcc));
            a.pred.extend(&p);
            a.reference.extend(&r);
            if let (Some(pm), Some(rm)) = (pm, rm) {
                a.pred_mm.extend(pm);
                a.ref_mm.extend(rm);
                a.has_mm = true;
            }
            a.utterances += 1;
        }
    }

    let mut channels = Vec::with_capacity(names.len());
    for (name, a) in names.iter().zip(&acc) {
        let rmse_ok = is_rmse_channel(name);
        let mm_ok = rmse_ok && all_mm && a.has_mm;
        let (rmse_norm, rmse_mm, pcc) = match pooling {
            Pooling::Frames => {
                let pcc = pcc_series(&a.pred, &a.reference);
                (
                    rmse_ok.then(|| rmse_series(&a.pred, &a.reference)),
                    mm_ok.then(|| rmse_series(&a.pred_mm, &a.ref_mm)),
                    pcc.or_else(|| {
                        zero_variance.push(name.clone());
                        Some(0.0)
                    }),
                )
            }
            Pooling::Utterances => {
                let n = a.per_utt.len() as f64;
                if a.per_utt.iter().any(|u| u.2.is_none()) {
                    zero_variance.push(name.clone());
                }
                (
                    rmse_ok.then(|| a.per_utt.iter().map(|u| u.0).sum::<f64>() / n),
                    mm_ok.then(|| a.per_utt.iter().map(|u| u.1.unwrap_or(0.0)).sum::<f64>() / n),
                    Some(a.per_utt.iter().map(|u| u.2.unwrap_or(0.0)).sum::<f64>() / n),
                )
            }
        };
        channels.push(ChannelReport {
            channel: name.clone(),
            rmse_mm,
            rmse_norm,
            pcc,
            frames: a.pred.len(),
            utterances: a.utterances,
        });
    }

    let mean_of = |f: &dyn Fn(&ChannelReport) -> Option<f64>| {
        let v: Vec<f64> = channels.iter().filter_map(f).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    Ok(ReconReport {
        pooling,
        utterances: pairs.len(),
        mask: names.clone(),
        mean_rmse_mm: mean_of(&|c| c.rmse_mm),
        mean_rmse_norm: mean_of(&|c| c.rmse_norm),
        mean_pcc: mean_of(&|c| c.pcc),
        channels,
        zero_variance,
    })
}

impl ReconReport {
    pub fn to_csv(&self) -> String {
        let fmt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        let mut out = String::from("channel,rmse_mm,rmse_norm,pcc,frames,utterances\n");
        for c in &self.channels {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                c.channel,
                fmt(c.rmse_mm),
                fmt(c.rmse_norm),
                fmt(c.pcc),
                c.frames,
                c.utterances
            ));
        }
        out.push_str(&format!(
            "mean,{},{},{},,\n",
            fmt(self.mean_rmse_mm),
            fmt(self.mean_rmse_norm),
            fmt(self.mean_pcc)
        ));
        out
    }
}
