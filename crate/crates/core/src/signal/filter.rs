//! Hann-windowed sinc low-pass design and same-length FIR application.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::FrameSequence;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    /// Window length in taps.
    pub taps: usize,
    pub cutoff_hz: f64,
    pub sample_rate_hz: f64,
}

impl FilterSpec {
    pub fn new(taps: usize, cutoff_hz: f64, sample_rate_hz: f64) -> Result<Self> {
        let spec = FilterSpec {
            taps,
            cutoff_hz,
            sample_rate_hz,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.taps < 3 {
            return Err(Error::InvalidParameter(format!(
                "filter needs at least 3 taps, got {}",
                self.taps
            )));
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sample rate must be positive, got {}",
                self.sample_rate_hz
            )));
        }
        if !(self.cutoff_hz > 0.0 && self.cutoff_hz < self.sample_rate_hz / 2.0) {
            return Err(Error::InvalidParameter(format!(
                "cutoff {} Hz must lie in (0, {}) Hz",
                self.cutoff_hz,
                self.sample_rate_hz / 2.0
            )));
        }
        Ok(())
    }

    /// Cutoff as a fraction of the sample rate.
    pub fn normalized_cutoff(&self) -> f64 {
        self.cutoff_hz / self.sample_rate_hz
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

/// Designs the low-pass kernel
///
/// `w(n) ∝ (1 − cos(2πn/(N−1))) · sinc(2π f_t (n − (N−1)/2))`, `f_t = f_c / f_s`,
///
/// scaled so the taps sum to one (unit gain at DC). Taps are computed for the
/// first half and mirrored, so the kernel is exactly symmetric and both
/// endpoints are exactly zero.
pub fn design_lowpass(spec: &FilterSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let n_taps = spec.taps;
    let ft = spec.normalized_cutoff();
    let last = (n_taps - 1) as f64;
    let centre = last / 2.0;

    let mut w = vec![0.0; n_taps];
    for n in 0..n_taps.div_ceil(2) {
        let hann = 1.0 - (2.0 * PI * n as f64 / last).cos();
        let v = hann * sinc(2.0 * PI * ft * (n as f64 - centre));
        w[n] = v;
        w[n_taps - 1 - n] = v;
    }
    w[0] = 0.0;
    w[n_taps - 1] = 0.0;

    let total: f64 = w.iter().sum();
    if total.abs() < f64::EPSILON {
        return Err(Error::InvalidParameter(
            "designed kernel has zero DC gain".into(),
        ));
    }
    for v in &mut w {
        *v /= total;
    }
    Ok(w)
}

/// Magnitude of the kernel's frequency response at `freq_hz`.
pub fn frequency_response(weights: &[f64], freq_hz: f64, sample_rate_hz: f64) -> f64 {
    let omega = 2.0 * PI * freq_hz / sample_rate_hz;
    let (re, im) = weights
        .iter()
        .enumerate()
        .fold((0.0, 0.0), |(re, im), (n, &w)| {
            let phase = omega * n as f64;
            (re + w * phase.cos(), im - w * phase.sin())
        });
    re.hypot(im)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    Zero,
    Replicate,
}

/// Convolves one signal with `weights`, output the same length as the input.
///
/// `y[t] = Σ_k w[k] · x[t − k + c]` with `c = (N − 1) / 2` (integer division),
/// so an impulse at `t0` reproduces the kernel over `t0 − c ..= t0 − c + N − 1`.
/// With an even N the kernel's centre falls between two taps and the output
/// lags the input by half a sample.
pub fn convolve_same(x: &[f64], weights: &[f64], padding: Padding) -> Vec<f64> {
    let n = x.len() as isize;
    let centre = ((weights.len() - 1) / 2) as isize;
    let sample = |i: isize| -> f64 {
        if (0..n).contains(&i) {
            x[i as usize]
        } else {
            match padding {
                Padding::Zero => 0.0,
                Padding::Replicate => x[i.clamp(0, n - 1) as usize],
            }
        }
    };
    (0..n)
        .map(|t| {
            weights
                .iter()
                .enumerate()
                .map(|(k, &w)| w * sample(t - k as isize + centre))
                .sum()
        })
        .collect()
}

/// Per-channel convolution of a sequence; frame count is preserved.
pub fn apply_filter(seq: &FrameSequence, weights: &[f64], padding: Padding) -> Result<FrameSequence> {
    apply_filter_to_channels(seq, weights, padding, &vec![true; seq.n_channels()])
}

/// Like [`apply_filter`] but leaves channels with `mask[c] == false` untouched.
pub fn apply_filter_to_channels(
    seq: &FrameSequence,
    weights: &[f64],
    padding: Padding,
    mask: &[bool],
) -> Result<FrameSequence> {
    if weights.is_empty() {
        return Err(Error::InvalidParameter("empty filter kernel".into()));
    }
    if let Some(bad) = weights.iter().find(|w| !w.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite filter weight {bad}")));
    }
    let cols: Vec<Vec<f64>> = seq
        .columns()
        .into_iter()
        .zip(mask)
        .map(|(col, &on)| {
            if on {
                convolve_same(&col, weights, padding)
            } else {
                col
            }
        })
        .collect();
    FrameSequence::from_columns(&cols, seq.channel_names().to_vec(), seq.rate_hz())
}
