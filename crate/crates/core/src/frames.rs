//! Shared domain types: frame sequences, articulatory trajectory sets and
//! utterance records.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A time-major matrix of named feature channels sampled at a fixed rate.
///
/// Values are held row-major (`frames[t * n_channels + c]`). Every value is
/// finite and the channel names are unique.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    values: Vec<f64>,
    n_frames: usize,
    channel_names: Vec<String>,
    rate_hz: f64,
}

impl FrameSequence {
    pub fn new(
        values: Vec<f64>,
        n_frames: usize,
        channel_names: Vec<String>,
        rate_hz: f64,
    ) -> Result<Self> {
        let n_channels = channel_names.len();
        if n_frames == 0 || n_channels == 0 {
            return Err(Error::InvalidSequence(format!(
                "sequence must have at least one frame and one channel (got {n_frames}x{n_channels})"
            )));
        }
        if values.len() != n_frames * n_channels {
            return Err(Error::InvalidSequence(format!(
                "{} values do not fill a {n_frames}x{n_channels} matrix",
                values.len()
            )));
        }
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(Error::InvalidSequence(format!(
                "frame rate must be positive, got {rate_hz}"
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSequence(format!(
                "non-finite value at frame {}, channel {}",
                i / n_channels,
                channel_names[i % n_channels]
            )));
        }
        let mut seen = HashSet::with_capacity(n_channels);
        for name in &channel_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidSequence(format!(
                    "duplicate channel name `{name}`"
                )));
            }
        }
        Ok(FrameSequence {
            values,
            n_frames,
            channel_names,
            rate_hz,
        })
    }

    /// Builds a sequence from a list of frames.
    pub fn from_frames<S: Into<String>>(
        frames: &[Vec<f64>],
        channel_names: impl IntoIterator<Item = S>,
        rate_hz: f64,
    ) -> Result<Self> {
        let names: Vec<String> = channel_names.into_iter().map(Into::into).collect();
        if let Some(bad) = frames.iter().position(|f| f.len() != names.len()) {
            return Err(Error::InvalidSequence(format!(
                "frame {bad} has {} values, expected {}",
                frames[bad].len(),
                names.len()
            )));
        }
        let values = frames.iter().flatten().copied().collect();
        Self::new(values, frames.len(), names, rate_hz)
    }

    /// Builds a sequence from per-channel columns of equal length.
    pub fn from_columns<S: Into<String>>(
        columns: &[Vec<f64>],
        channel_names: impl IntoIterator<Item = S>,
        rate_hz: f64,
    ) -> Result<Self> {
        let names: Vec<String> = channel_names.into_iter().map(Into::into).collect();
        if columns.len() != names.len() {
            return Err(Error::InvalidSequence(format!(
                "{} columns for {} channel names",
                columns.len(),
                names.len()
            )));
        }
        let n_frames = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n_frames) {
            return Err(Error::InvalidSequence(
                "columns have differing lengths".into(),
            ));
        }
        let mut values = Vec::with_capacity(n_frames * columns.len());
        for t in 0..n_frames {
            values.extend(columns.iter().map(|c| c[t]));
        }
        Self::new(values, n_frames, names, rate_hz)
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn n_channels(&self) -> usize {
        self.channel_names.len()
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn duration_s(&self) -> f64 {
        self.n_frames as f64 / self.rate_hz
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channel_names.iter().position(|n| n == name)
    }

    /// Row-major view of all values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        let d = self.n_channels();
        &self.values[t * d..(t + 1) * d]
    }

    pub fn frames(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.n_channels())
    }

    pub fn get(&self, t: usize, c: usize) -> f64 {
        self.values[t * self.n_channels() + c]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        self.frames().map(|f| f[c]).collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.n_channels()).map(|c| self.column(c)).collect()
    }

    /// Contiguous frame range `start..end` as a new sequence.
    pub fn slice_frames(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.n_frames {
            return Err(Error::Bounds(format!(
                "frame range {start}..{end} invalid for a {}-frame sequence",
                self.n_frames
            )));
        }
        let d = self.n_channels();
        Ok(FrameSequence {
            values: self.values[start * d..end * d].to_vec(),
            n_frames: end - start,
            channel_names: self.channel_names.clone(),
            rate_hz: self.rate_hz,
        })
    }

    /// Same shape and names, new values. The values must be finite.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(
            values,
            self.n_frames,
            self.channel_names.clone(),
            self.rate_hz,
        )
    }

    /// Replaces the values of one channel.
    pub fn with_column(&self, c: usize, column: &[f64]) -> Result<Self> {
        if column.len() != self.n_frames {
            return Err(Error::ShapeMismatch(format!(
                "column of {} values for a {}-frame sequence",
                column.len(),
                self.n_frames
            )));
        }
        let mut values = self.values.clone();
        let d = self.n_channels();
        for (t, v) in column.iter().enumerate() {
            values[t * d + c] = *v;
        }
        self.with_values(values)
    }

    /// Appends channels, given as columns, after the existing ones.
    pub fn append_columns(&self, names: &[String], columns: &[Vec<f64>]) -> Result<Self> {
        let mut all_names = self.channel_names.clone();
        all_names.extend(names.iter().cloned());
        let mut cols = self.columns();
        cols.extend(columns.iter().cloned());
        Self::from_columns(&cols, all_names, self.rate_hz)
    }

    /// Keeps only the named channels, in the given order.
    pub fn select_channels(&self, names: &[String]) -> Result<Self> {
        let idx = names
            .iter()
            .map(|n| {
                self.channel_index(n)
                    .ok_or_else(|| Error::InvalidSequence(format!("no channel named `{n}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut values = Vec::with_capacity(self.n_frames * idx.len());
        for f in self.frames() {
            values.extend(idx.iter().map(|&i| f[i]));
        }
        Self::new(values, self.n_frames, names.to_vec(), self.rate_hz)
    }

    /// Truncates to the first `n` frames (no-op when already shorter).
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n >= self.n_frames {
            return Ok(self.clone());
        }
        self.slice_frames(0, n)
    }

    pub fn same_layout(&self, other: &FrameSequence) -> bool {
        self.n_frames == other.n_frames && self.channel_names == other.channel_names
    }
}

/// The canonical articulatory channel vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Articulator {
    TTx,
    TTy,
    TBx,
    TBy,
    TDx,
    TDy,
    ULx,
    ULy,
    LLx,
    LLy,
    LIx,
    LIy,
    Vx,
    Vy,
    VLA,
    HPRO,
    TTC,
    TBC,
}

impl Articulator {
    pub const ALL: [Articulator; 18] = [
        Articulator::TTx,
        Articulator::TTy,
        Articulator::TBx,
        Articulator::TBy,
        Articulator::TDx,
        Articulator::TDy,
        Articulator::ULx,
        Articulator::ULy,
        Articulator::LLx,
        Articulator::LLy,
        Articulator::LIx,
        Articulator::LIy,
        Articulator::Vx,
        Articulator::Vy,
        Articulator::VLA,
        Articulator::HPRO,
        Articulator::TTC,
        Articulator::TBC,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Articulator::TTx => "TTx",
            Articulator::TTy => "TTy",
            Articulator::TBx => "TBx",
            Articulator::TBy => "TBy",
            Articulator::TDx => "TDx",
            Articulator::TDy => "TDy",
            Articulator::ULx => "ULx",
            Articulator::ULy => "ULy",
            Articulator::LLx => "LLx",
            Articulator::LLy => "LLy",
            Articulator::LIx => "LIx",
            Articulator::LIy => "LIy",
            Articulator::Vx => "Vx",
            Articulator::Vy => "Vy",
            Articulator::VLA => "VLA",
            Articulator::HPRO => "HPRO",
            Articulator::TTC => "TTC",
            Articulator::TBC => "TBC",
        }
    }

    /// TTC and TBC are cosines; everything else is in millimeters.
    pub fn is_dimensionless(self) -> bool {
        matches!(self, Articulator::TTC | Articulator::TBC)
    }
}

impl fmt::Display for Articulator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Articulator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Articulator::ALL
            .iter()
            .copied()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidSequence(format!("`{s}` is not a canonical articulator")))
    }
}

/// Articulatory trajectories plus a per-channel availability mask.
///
/// An unavailable channel keeps whatever values it stores, but no metric,
/// loss or normalization ever reads them.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySet {
    seq: FrameSequence,
    available: Vec<bool>,
}

impl TrajectorySet {
    pub fn new(seq: FrameSequence, available: Vec<bool>) -> Result<Self> {
        if available.len() != seq.n_channels() {
            return Err(Error::InvalidSequence(format!(
                "availability mask has {} entries for {} channels",
                available.len(),
                seq.n_channels()
            )));
        }
        for name in seq.channel_names() {
            name.parse::<Articulator>()?;
        }
        Ok(TrajectorySet { seq, available })
    }

    /// All channels available.
    pub fn fully_available(seq: FrameSequence) -> Result<Self> {
        let n = seq.n_channels();
        Self::new(seq, vec![true; n])
    }

    /// Marks the named channels unavailable; unknown names are ignored.
    pub fn with_unavailable<S: AsRef<str>>(seq: FrameSequence, unavailable: &[S]) -> Result<Self> {
        let available = seq
            .channel_names()
            .iter()
            .map(|n| !unavailable.iter().any(|u| u.as_ref() == n))
            .collect();
        Self::new(seq, available)
    }

    pub fn seq(&self) -> &FrameSequence {
        &self.seq
    }

    pub fn into_seq(self) -> FrameSequence {
        self.seq
    }

    pub fn available(&self) -> &[bool] {
        &self.available
    }

    pub fn is_available(&self, c: usize) -> bool {
        self.available[c]
    }

    /// Index of the channel if it exists and is available.
    pub fn available_index(&self, a: Articulator) -> Option<usize> {
        self.seq
            .channel_index(a.name())
            .filter(|&i| self.available[i])
    }

    pub fn unavailable_names(&self) -> Vec<String> {
        self.seq
            .channel_names()
            .iter()
            .zip(&self.available)
            .filter(|(_, &a)| !a)
            .map(|(n, _)| n.clone())
            .collect()
    }

    pub fn with_seq(&self, seq: FrameSequence) -> Result<Self> {
        Self::new(seq, self.available.clone())
    }
}

/// A labelled transcription span in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub onset: f64,
    pub offset: f64,
    pub label: String,
}

impl Interval {
    pub fn new(onset: f64, offset: f64, label: impl Into<String>) -> Self {
        Interval {
            onset,
            offset,
            label: label.into(),
        }
    }
}

/// Checks that intervals are well formed, ordered by onset and non-overlapping.
pub fn validate_intervals(intervals: &[Interval]) -> Result<()> {
    for (i, iv) in intervals.iter().enumerate() {
        if !(iv.onset.is_finite() && iv.offset.is_finite() && iv.offset > iv.onset && iv.onset >= 0.0)
        {
            return Err(Error::InvalidSequence(format!(
                "interval {i} [{}, {}] is malformed",
                iv.onset, iv.offset
            )));
        }
        if i > 0 && iv.onset < intervals[i - 1].offset {
            return Err(Error::InvalidSequence(format!(
                "interval {i} overlaps or precedes interval {}",
                i - 1
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceRecord {
    pub id: String,
    pub speaker_id: String,
    pub corpus_id: String,
    pub acoustic: Option<FrameSequence>,
    pub articulatory: Option<TrajectorySet>,
    pub intervals: Option<Vec<Interval>>,
}

impl UtteranceRecord {
    pub fn new(
        id: impl Into<String>,
        speaker_id: impl Into<String>,
        corpus_id: impl Into<String>,
        acoustic: Option<FrameSequence>,
        articulatory: Option<TrajectorySet>,
        intervals: Option<Vec<Interval>>,
    ) -> Result<Self> {
        let id = id.into();
        if acoustic.is_none() && articulatory.is_none() {
            return Err(Error::InvalidSequence(format!(
                "utterance `{id}` has neither acoustic nor articulatory data"
            )));
        }
        if let Some(iv) = &intervals {
            validate_intervals(iv)?;
        }
        Ok(UtteranceRecord {
            id,
            speaker_id: speaker_id.into(),
            corpus_id: corpus_id.into(),
            acoustic,
            articulatory,
            intervals,
        })
    }
}

/// Frame index of time `t` seconds: the first frame `i` with `i / rate >= t`.
///
/// A small tolerance absorbs decimal round-off (`0.35 * 100` is not exactly 35).
pub fn time_to_frame(t: f64, rate_hz: f64) -> usize {
    let x = t * rate_hz;
    let r = x.round();
    let idx = if (x - r).abs() < 1e-6 { r } else { x.ceil() };
    idx.max(0.0) as usize
}
