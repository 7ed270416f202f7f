//! Frame-level transforms: delta features, context stacking and resampling.

use crate::error::{Error, Result};
use crate::frames::FrameSequence;

const DELTA_HALF_WIDTH: isize = 2;

/// Regression delta over ±2 frames, replicating edge frames.
fn delta_column(x: &[f64]) -> Vec<f64> {
    let n = x.len() as isize;
    let at = |i: isize| x[i.clamp(0, n - 1) as usize];
    let denom: f64 = 2.0 * (1..=DELTA_HALF_WIDTH).map(|k| (k * k) as f64).sum::<f64>();
    (0..n)
        .map(|t| {
            (1..=DELTA_HALF_WIDTH)
                .map(|k| k as f64 * (at(t + k) - at(t - k)))
                .sum::<f64>()
                / denom
        })
        .collect()
}

/// Appends Δ and ΔΔ channels: output is `[x, Δx, ΔΔx]`, `3·D` channels.
pub fn add_deltas(seq: &FrameSequence) -> Result<FrameSequence> {
    if seq.n_frames() < 3 {
        return Err(Error::InvalidSequence(format!(
            "deltas need at least 3 frames, got {}",
            seq.n_frames()
        )));
    }
    let base = seq.columns();
    let deltas: Vec<Vec<f64>> = base.iter().map(|c| delta_column(c)).collect();
    let accel: Vec<Vec<f64>> = deltas.iter().map(|c| delta_column(c)).collect();

    let mut names = seq.channel_names().to_vec();
    names.extend(seq.channel_names().iter().map(|n| format!("{n}_d")));
    names.extend(seq.channel_names().iter().map(|n| format!("{n}_dd")));
    let cols: Vec<Vec<f64>> = base.into_iter().chain(deltas).chain(accel).collect();
    FrameSequence::from_columns(&cols, names, seq.rate_hz())
}

/// Concatenates frames `t−k ..= t+k` into frame `t`, replicating edge frames.
///
/// Channel `name` at offset `o` is called `name@o`; block `k` is the original frame.
pub fn stack_context(seq: &FrameSequence, k: usize) -> Result<FrameSequence> {
    let n = seq.n_frames() as isize;
    let k = k as isize;
    let d = seq.n_channels();
    let mut names = Vec::with_capacity(d * (2 * k as usize + 1));
    for o in -k..=k {
        if o == 0 {
            names.extend(seq.channel_names().iter().cloned());
        } else {
            names.extend(seq.channel_names().iter().map(|c| format!("{c}@{o:+}")));
        }
    }
    let mut values = Vec::with_capacity(seq.n_frames() * names.len());
    for t in 0..n {
        for o in -k..=k {
            values.extend_from_slice(seq.frame((t + o).clamp(0, n - 1) as usize));
        }
    }
    FrameSequence::new(values, seq.n_frames(), names, seq.rate_hz())
}

/// The central block of a context-stacked sequence.
pub fn unstack_context(seq: &FrameSequence, k: usize) -> Result<FrameSequence> {
    let blocks = 2 * k + 1;
    if !seq.n_channels().is_multiple_of(blocks) {
        return Err(Error::ShapeMismatch(format!(
            "{} channels are not a multiple of {blocks} context blocks",
            seq.n_channels()
        )));
    }
    let d = seq.n_channels() / blocks;
    let names = seq.channel_names()[k * d..(k + 1) * d].to_vec();
    seq.select_channels(&names)
}

/// Linear interpolation onto a `target_hz` grid starting at t = 0.
///
/// Output frame `j` sits at `j / target_hz` seconds; frames are produced while
/// that time does not exceed the last input frame time.
pub fn resample(seq: &FrameSequence, target_hz: f64) -> Result<FrameSequence> {
    let rate = seq.rate_hz();
    if !(target_hz.is_finite() && target_hz > 0.0) {
        return Err(Error::InvalidParameter(format!("target rate {target_hz} must be positive")));
    }
    if target_hz > rate {
        return Err(Error::InvalidParameter(format!(
            "upsampling from {rate} Hz to {target_hz} Hz is not supported"
        )));
    }
    if target_hz == rate {
        return Ok(seq.clone());
    }
    let last = (seq.n_frames() - 1) as f64;
    let n_out = ((last * target_hz / rate) + 1e-9).floor() as usize + 1;
    let d = seq.n_channels();
    let mut values = Vec::with_capacity(n_out * d);
    for j in 0..n_out {
        let pos = (j as f64 * rate / target_hz).min(last);
        let i0 = pos.floor() as usize;
        let frac = pos - i0 as f64;
        if frac == 0.0 || i0 + 1 >= seq.n_frames() {
            values.extend_from_slice(seq.frame(i0));
        } else {
            let (a, b) = (seq.frame(i0), seq.frame(i0 + 1));
            values.extend(a.iter().zip(b).map(|(x, y)| x + frac * (y - x)));
        }
    }
    FrameSequence::new(values, n_out, seq.channel_names().to_vec(), target_hz)
}
