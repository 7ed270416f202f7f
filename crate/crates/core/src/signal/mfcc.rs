//! MFCC extraction.
//!
//! Per frame: pre-emphasis (applied to the whole waveform), Hamming window,
//! power spectrum, triangular mel filterbank on the HTK mel scale, floored
//! natural log, orthonormal DCT-II. Coefficient 0 is kept as the first output.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::FrameSequence;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MfccConfig {
    pub n_coeffs: usize,
    pub window_ms: f64,
    pub stride_ms: f64,
    pub n_filters: usize,
    pub preemphasis: f64,
    pub log_floor: f64,
    /// Frames on each side stacked around every frame.
    pub context: usize,
    pub include_deltas: bool,
}

impl Default for MfccConfig {
    fn default() -> Self {
        MfccConfig {
            n_coeffs: 13,
            window_ms: 25.0,
            stride_ms: 10.0,
            n_filters: 26,
            preemphasis: 0.97,
            log_floor: 1e-10,
            context: 5,
            include_deltas: true,
        }
    }
}

impl MfccConfig {
    /// Dimensionality after deltas and context stacking (429 by default).
    pub fn output_dim(&self) -> usize {
        let per_frame = if self.include_deltas {
            3 * self.n_coeffs
        } else {
            self.n_coeffs
        };
        per_frame * (2 * self.context + 1)
    }

    pub fn window_samples(&self, rate_hz: f64) -> usize {
        (rate_hz * self.window_ms / 1000.0).round() as usize
    }

    pub fn stride_samples(&self, rate_hz: f64) -> usize {
        (rate_hz * self.stride_ms / 1000.0).round() as usize
    }

    fn validate(&self) -> Result<()> {
        if self.n_coeffs == 0 || self.n_filters < self.n_coeffs {
            return Err(Error::InvalidParameter(format!(
                "need 0 < n_coeffs ({}) <= n_filters ({})",
                self.n_coeffs, self.n_filters
            )));
        }
        if !(self.window_ms > 0.0 && self.stride_ms > 0.0) {
            return Err(Error::InvalidParameter("window and stride must be positive".into()));
        }
        if !(self.log_floor > 0.0) {
            return Err(Error::InvalidParameter("log floor must be positive".into()));
        }
        Ok(())
    }
}

pub fn coefficient_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("mfcc{i}")).collect()
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters evaluated at the FFT bin centre frequencies.
fn mel_filterbank(n_filters: usize, n_fft: usize, rate_hz: f64) -> Vec<Vec<f64>> {
    let n_bins = n_fft / 2 + 1;
    let top = hz_to_mel(rate_hz / 2.0);
    let edges: Vec<f64> = (0..n_filters + 2)
        .map(|i| mel_to_hz(top * i as f64 / (n_filters + 1) as f64))
        .collect();
    (0..n_filters)
        .map(|m| {
            let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            (0..n_bins)
                .map(|k| {
                    let f = k as f64 * rate_hz / n_fft as f64;
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= mid {
                        (f - lo) / (mid - lo)
                    } else {
                        (hi - f) / (hi - mid)
                    }
                })
                .collect()
        })
        .collect()
}

fn dct_ortho(x: &[f64], n_out: usize) -> Vec<f64> {
    let m = x.len() as f64;
    (0..n_out)
        .map(|k| {
            let scale = if k == 0 { (1.0 / m).sqrt() } else { (2.0 / m).sqrt() };
            scale
                * x.iter()
                    .enumerate()
                    .map(|(i, &v)| v * (PI * k as f64 * (2.0 * i as f64 + 1.0) / (2.0 * m)).cos())
                    .sum::<f64>()
        })
        .collect()
}

/// Extracts MFCC frames; frame rate is `rate_hz / stride`.
///
/// Frame count is `floor((samples − window) / stride) + 1`.
pub fn mfcc(waveform: &[f64], rate_hz: f64, cfg: &MfccConfig) -> Result<FrameSequence> {
    cfg.validate()?;
    if rate_hz < 8000.0 {
        return Err(Error::InvalidParameter(format!(
            "sample rate {rate_hz} Hz is below 8 kHz"
        )));
    }
    if let Some(i) = waveform.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidSequence(format!("non-finite audio sample at {i}")));
    }
    let win = cfg.window_samples(rate_hz);
    let stride = cfg.stride_samples(rate_hz);
    if waveform.len() < win {
        return Err(Error::InvalidSequence(format!(
            "waveform of {} samples is shorter than one {win}-sample window",
            waveform.len()
        )));
    }
    let n_frames = (waveform.len() - win) / stride + 1;

    let mut emphasized = Vec::with_capacity(waveform.len());
    emphasized.push(waveform[0]);
    emphasized.extend(waveform.windows(2).map(|p| p[1] - cfg.preemphasis * p[0]));

    let hamming: Vec<f64> = (0..win)
        .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / (win - 1) as f64).cos())
        .collect();
    let n_fft = win.next_power_of_two();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_fft);
    let bank = mel_filterbank(cfg.n_filters, n_fft, rate_hz);

    let mut values = Vec::with_capacity(n_frames * cfg.n_coeffs);
    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    for f in 0..n_frames {
        let start = f * stride;
        for (i, slot) in buf.iter_mut().enumerate() {
            *slot = if i < win {
                Complex::new(emphasized[start + i] * hamming[i], 0.0)
            } else {
                Complex::new(0.0, 0.0)
            };
        }
        fft.process(&mut buf);
        let power: Vec<f64> = buf[..n_fft / 2 + 1]
            .iter()
            .map(|c| c.norm_sqr() / n_fft as f64)
            .collect();
        let log_mel: Vec<f64> = bank
            .iter()
            .map(|filt| {
                let e: f64 = filt.iter().zip(&power).map(|(a, b)| a * b).sum();
                e.max(cfg.log_floor).ln()
            })
            .collect();
        values.extend(dct_ortho(&log_mel, cfg.n_coeffs));
    }

    FrameSequence::new(
        values,
        n_frames,
        coefficient_names(cfg.n_coeffs),
        rate_hz / stride as f64,
    )
}
