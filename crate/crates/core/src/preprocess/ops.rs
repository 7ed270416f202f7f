use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{time_to_frame, FrameSequence, Interval, TrajectorySet, UtteranceRecord};
use crate::signal::{apply_filter_to_channels, design_lowpass, FilterSpec, Padding};

pub const DEFAULT_SILENCE_LABELS: &[&str] = &["sil", "sp", "pau", "h#", "#", "<sil>", "spn", ""];

#[derive(Debug, Clone, PartialEq)]
pub enum TrimOutcome {
    /// Kept the span `[start_s, end_s)` of the original utterance.
    Trimmed { start_s: f64, end_s: f64 },
    /// No transcription; the record is returned unchanged.
    NoIntervals,
    /// Every interval is silence; the record is returned unchanged.
    NoSpeech,
}

impl TrimOutcome {
    pub fn is_warning(&self) -> bool {
        !matches!(self, TrimOutcome::Trimmed { .. })
    }
}

fn trim_stream(seq: &FrameSequence, start_s: f64, end_s: f64) -> Result<FrameSequence> {
    let start = time_to_frame(start_s, seq.rate_hz()).min(seq.n_frames());
    let end = time_to_frame(end_s, seq.rate_hz()).min(seq.n_frames());
    seq.slice_frames(start, end).map_err(|_| {
        Error::Bounds(format!(
            "speech span [{start_s}, {end_s}) s selects no frames of a {}-frame stream",
            seq.n_frames()
        ))
    })
}

/// Drops frames before the first and after the last non-silence interval,
/// from both streams, then truncates both streams to the shorter length.
pub fn trim_silence<S: AsRef<str>>(
    u: &UtteranceRecord,
    silence_labels: &[S],
) -> Result<(UtteranceRecord, TrimOutcome)> {
    let Some(intervals) = &u.intervals else {
        return Ok((u.clone(), TrimOutcome::NoIntervals));
    };
    let is_speech = |iv: &&Interval| {
        !silence_labels
            .iter()
            .any(|s| s.as_ref().eq_ignore_ascii_case(iv.label.trim()))
    };
    let (Some(first), Some(last)) = (
        intervals.iter().find(is_speech),
        intervals.iter().rev().find(is_speech),
    ) else {
        return Ok((u.clone(), TrimOutcome::NoSpeech));
    };
    let (start_s, end_s) = (first.onset, last.offset);

    let acoustic = u
        .acoustic
        .as_ref()
        .map(|s| trim_stream(s, start_s, end_s))
        .transpose()?;
    let articulatory = u
        .articulatory
        .as_ref()
        .map(|t| trim_stream(t.seq(), start_s, end_s).and_then(|s| t.with_seq(s)))
        .transpose()?;
    let shifted = intervals
        .iter()
        .filter(|iv| iv.offset > start_s && iv.onset < end_s)
        .map(|iv| {
            Interval::new(
                iv.onset.max(start_s) - start_s,
                iv.offset.min(end_s) - start_s,
                iv.label.clone(),
            )
        })
        .collect();
    let trimmed = UtteranceRecord {
        acoustic,
        articulatory,
        intervals: Some(shifted),
        ..u.clone()
    };
    Ok((align_streams(&trimmed)?, TrimOutcome::Trimmed { start_s, end_s }))
}

/// Truncates acoustic and articulatory streams to their common length.
pub fn align_streams(u: &UtteranceRecord) -> Result<UtteranceRecord> {
    let (Some(a), Some(t)) = (&u.acoustic, &u.articulatory) else {
        return Ok(u.clone());
    };
    let n = a.n_frames().min(t.seq().n_frames());
    Ok(UtteranceRecord {
        acoustic: Some(a.truncated(n)?),
        articulatory: Some(t.with_seq(t.seq().truncated(n)?)?),
        ..u.clone()
    })
}

/// Per-channel mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub channel_names: Vec<String>,
    pub mean: Vec<Option<f64>>,
    pub std: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NormalizeDiagnostics {
    /// Channels with zero variance: centered but not scaled.
    pub zero_variance: Vec<String>,
}

fn check_same_layout(seqs: &[&FrameSequence]) -> Result<()> {
    let Some(first) = seqs.first() else {
        return Ok(());
    };
    if let Some(bad) = seqs
        .iter()
        .find(|s| s.channel_names() != first.channel_names())
    {
        return Err(Error::ShapeMismatch(format!(
            "channel layout {:?} differs from {:?}",
            bad.channel_names(),
            first.channel_names()
        )));
    }
    Ok(())
}

/// Z-normalizes every channel over the concatenation of one speaker's
/// utterances. A constant channel is centered only.
pub fn normalize_mfcc(
    seqs: &[FrameSequence],
) -> Result<(Vec<FrameSequence>, ChannelStats, NormalizeDiagnostics)> {
    let refs: Vec<&FrameSequence> = seqs.iter().collect();
    check_same_layout(&refs)?;
    let total: usize = seqs.iter().map(FrameSequence::n_frames).sum();
    if total < 2 {
        return Err(Error::InvalidSequence(format!(
            "speaker normalization needs at least 2 frames, got {total}"
        )));
    }
    let d = seqs[0].n_channels();
    let names = seqs[0].channel_names().to_vec();
    let n = total as f64;

    let mut mean = vec![0.0; d];
    for s in seqs {
        for f in s.frames() {
            for (m, v) in mean.iter_mut().zip(f) {
                *m += v;
            }
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; d];
    for s in seqs {
        for f in s.frames() {
            for ((acc, v), m) in var.iter_mut().zip(f).zip(&mean) {
                *acc += (v - m) * (v - m);
            }
        }
    }
    let std: Vec<f64> = var.iter().map(|v| (v / n).sqrt()).collect();

    let mut diag = NormalizeDiagnostics::default();
    for (c, s) in std.iter().enumerate() {
        if *s == 0.0 {
            log::warn!("channel `{}` has zero variance; centering only", names[c]);
            diag.zero_variance.push(names[c].clone());
        }
    }
    let out = seqs
        .iter()
        .map(|s| {
            let values = s
                .frames()
                .flat_map(|f| {
                    f.iter().enumerate().map(|(c, v)| {
                        if std[c] == 0.0 {
                            v - mean[c]
                        } else {
                            (v - mean[c]) / std[c]
                        }
                    })
                })
                .collect();
            s.with_values(values)
        })
        .collect::<Result<Vec<_>>>()?;
    let stats = ChannelStats {
        channel_names: names,
        mean: mean.into_iter().map(Some).collect(),
        std: std.into_iter().map(Some).collect(),
    };
    Ok((out, stats, diag))
}

/// Normalization state of one speaker's articulatory data, enough to map
/// normalized trajectories back to millimeters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingStats {
    pub channel_names: Vec<String>,
    pub half_window: usize,
    /// Speaker-global mean, `None` where a channel is never available.
    pub global_mean: Vec<Option<f64>>,
    /// Speaker-global population standard deviation.
    pub std: Vec<Option<f64>>,
    /// Windowed mean subtracted from each utterance, in utterance order.
    pub rolling_means: Vec<Vec<Option<f64>>>,
}

impl RollingStats {
    /// Maps a normalized sequence of utterance `index` back to input units.
    /// Channels without statistics are copied unchanged.
    pub fn denormalize(&self, index: usize, seq: &FrameSequence) -> Result<FrameSequence> {
        let means = self.rolling_means.get(index).ok_or_else(|| {
            Error::Bounds(format!("no rolling mean for utterance index {index}"))
        })?;
        let map: Vec<Option<(f64, f64)>> = seq
            .channel_names()
            .iter()
            .map(|n| {
                let c = self.channel_names.iter().position(|m| m == n)?;
                let mean = means[c]?;
                let scale = self.std[c].filter(|s| *s > 0.0).unwrap_or(1.0);
                Some((mean, scale))
            })
            .collect();
        let values = seq
            .frames()
            .flat_map(|f| {
                f.iter().zip(&map).map(|(v, m)| match m {
                    Some((mean, scale)) => v * scale + mean,
                    None => *v,
                })
            })
            .collect();
        seq.with_values(values)
    }
}

/// Frame-pooled mean of channel `c` over utterances `lo..=hi` where it is
/// available, accumulated in utterance then frame order.
fn pooled_mean(trajs: &[TrajectorySet], c: usize, lo: usize, hi: usize) -> Option<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for t in &trajs[lo..=hi] {
        if !t.is_available(c) {
            continue;
        }
        for f in t.seq().frames() {
            sum += f[c];
        }
        count += t.seq().n_frames();
    }
    (count > 0).then(|| sum / count as f64)
}

/// Rolling-window normalization of one speaker's utterances (in recording
/// order): utterance `i`, channel `c` is centered by the frame-pooled mean of
/// `c` over utterances `max(0, i − w) ..= min(n − 1, i + w)` and divided by the
/// speaker-global standard deviation of `c`. Unavailable channels are left
/// untouched; zero-variance channels are centered only.
pub fn rolling_normalize(
    trajs: &[TrajectorySet],
    half_window: usize,
) -> Result<(Vec<TrajectorySet>, RollingStats, NormalizeDiagnostics)> {
    let seqs: Vec<&FrameSequence> = trajs.iter().map(TrajectorySet::seq).collect();
    check_same_layout(&seqs)?;
    let Some(first) = trajs.first() else {
        return Err(Error::InvalidSequence("no utterances to normalize".into()));
    };
    let n = trajs.len();
    let d = first.seq().n_channels();
    let names = first.seq().channel_names().to_vec();

    let global_mean: Vec<Option<f64>> = (0..d).map(|c| pooled_mean(trajs, c, 0, n - 1)).collect();
    let std: Vec<Option<f64>> = (0..d)
        .map(|c| {
            let m = global_mean[c]?;
            let mut acc = 0.0;
            let mut count = 0usize;
            for t in trajs.iter().filter(|t| t.is_available(c)) {
                for f in t.seq().frames() {
                    acc += (f[c] - m) * (f[c] - m);
                }
                count += t.seq().n_frames();
            }
            Some((acc / count as f64).sqrt())
        })
        .collect();

    let mut diag = NormalizeDiagnostics::default();
    for c in 0..d {
        if std[c] == Some(0.0) {
            log::warn!("articulatory channel `{}` has zero variance; centering only", names[c]);
            diag.zero_variance.push(names[c].clone());
        }
    }

    let rolling_means: Vec<Vec<Option<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let lo = i.saturating_sub(half_window);
            let hi = (i + half_window).min(n - 1);
            (0..d)
                .map(|c| {
                    if !trajs[i].is_available(c) {
                        None
                    } else if lo == 0 && hi == n - 1 {
                        global_mean[c]
                    } else {
                        pooled_mean(trajs, c, lo, hi)
                    }
                })
                .collect()
        })
        .collect();

    let out = trajs
        .iter()
        .zip(&rolling_means)
        .map(|(t, means)| {
            let values = t
                .seq()
                .frames()
                .flat_map(|f| {
                    f.iter().enumerate().map(|(c, &v)| match (means[c], std[c]) {
                        (Some(m), Some(s)) if s > 0.0 => (v - m) / s,
                        (Some(m), _) => v - m,
                        (None, _) => v,
                    })
                })
                .collect();
            t.with_seq(t.seq().with_values(values)?)
        })
        .collect::<Result<Vec<_>>>()?;

    let stats = RollingStats {
        channel_names: names,
        half_window,
        global_mean,
        std,
        rolling_means,
    };
    Ok((out, stats, diag))
}

/// Low-pass filters every available channel with a `taps`-long kernel
/// (replicate padding). Unavailable channels pass through bit-identically.
pub fn presmooth(traj: &TrajectorySet, cutoff_hz: f64, taps: usize) -> Result<TrajectorySet> {
    let spec = FilterSpec::new(taps, cutoff_hz, traj.seq().rate_hz())?;
    let w = design_lowpass(&spec)?;
    let seq = apply_filter_to_channels(traj.seq(), &w, Padding::Replicate, traj.available())?;
    traj.with_seq(seq)
}
