//! Independent reference implementations used as test oracles. They follow
//! the textbook definitions directly and share no code with the library.
#![allow(dead_code)]

use std::f64::consts::PI;

use artikit::FrameSequence;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gauss(r: &mut ChaCha8Rng) -> f64 {
    // Box-Muller, to stay independent of the library's noise source
    let u1: f64 = r.random_range(f64::EPSILON..1.0);
    let u2: f64 = r.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

pub fn random_frames(r: &mut ChaCha8Rng, t: usize, d: usize) -> Vec<Vec<f64>> {
    (0..t).map(|_| (0..d).map(|_| gauss(r)).collect()).collect()
}

pub fn seq(frames: &[Vec<f64>], names: &[&str], rate: f64) -> FrameSequence {
    FrameSequence::from_frames(frames, names.iter().copied(), rate).unwrap()
}

pub fn generic_names(d: usize) -> Vec<String> {
    (0..d).map(|i| format!("f{i}")).collect()
}

// ---- filter ---------------------------------------------------------------

/// Kernel straight from the windowed-sinc formula, normalized to unit sum.
pub fn lowpass_oracle(n_taps: usize, cutoff: f64, rate: f64) -> Vec<f64> {
    let ft = cutoff / rate;
    let m = (n_taps - 1) as f64;
    let raw: Vec<f64> = (0..n_taps)
        .map(|n| {
            let n = n as f64;
            let hann = 1.0 - (2.0 * PI * n / m).cos();
            let x = 2.0 * PI * ft * (n - m / 2.0);
            let sinc = if x == 0.0 { 1.0 } else { x.sin() / x };
            hann * sinc
        })
        .collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

/// Gain of a symmetric kernel via its zero-phase cosine sum.
pub fn gain_oracle(w: &[f64], freq: f64, rate: f64) -> f64 {
    let c = (w.len() - 1) as f64 / 2.0;
    let omega = 2.0 * PI * freq / rate;
    w.iter()
        .enumerate()
        .map(|(n, v)| v * (omega * (n as f64 - c)).cos())
        .sum::<f64>()
        .abs()
}

pub fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

// ---- DTW ------------------------------------------------------------------

pub fn cosine_oracle(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu: f64 = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        1.0
    } else {
        1.0 - dot / (nu * nv)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PathOracle {
    /// Mean distance along the minimum-sum path (shortest among ties).
    pub sum_optimal_mean: f64,
    /// Minimum mean distance over all monotone paths.
    pub mean_optimal: f64,
}

/// Enumerates every monotone path from (0,0) to (n−1,m−1) with steps
/// (1,0), (0,1), (1,1).
pub fn dtw_oracle(a: &[Vec<f64>], b: &[Vec<f64>]) -> PathOracle {
    let dist: Vec<Vec<f64>> = a
        .iter()
        .map(|u| b.iter().map(|v| cosine_oracle(u, v)).collect())
        .collect();
    let (n, m) = (a.len(), b.len());
    let mut best_sum = (f64::INFINITY, usize::MAX);
    let mut best_mean = f64::INFINITY;
    let mut stack = vec![(0usize, 0usize, dist[0][0], 1usize)];
    while let Some((i, j, sum, len)) = stack.pop() {
        if i == n - 1 && j == m - 1 {
            if sum < best_sum.0 - 1e-12 || ((sum - best_sum.0).abs() <= 1e-12 && len < best_sum.1) {
                best_sum = (sum, len);
            }
            best_mean = best_mean.min(sum / len as f64);
            continue;
        }
        if i + 1 < n {
            stack.push((i + 1, j, sum + dist[i + 1][j], len + 1));
        }
        if j + 1 < m {
            stack.push((i, j + 1, sum + dist[i][j + 1], len + 1));
        }
        if i + 1 < n && j + 1 < m {
            stack.push((i + 1, j + 1, sum + dist[i + 1][j + 1], len + 1));
        }
    }
    PathOracle {
        sum_optimal_mean: best_sum.0 / best_sum.1 as f64,
        mean_optimal: best_mean,
    }
}

// ---- metrics --------------------------------------------------------------

pub fn rmse_oracle(p: &[f64], r: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..p.len() {
        s += (p[i] - r[i]).powi(2);
    }
    (s / p.len() as f64).sqrt()
}

/// Pearson correlation in the one-pass sums form; `None` for a constant input.
pub fn pcc_oracle(p: &[f64], r: &[f64]) -> Option<f64> {
    let n = p.len() as f64;
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..p.len() {
        sx += p[i];
        sy += r[i];
        sxx += p[i] * p[i];
        syy += r[i] * r[i];
        sxy += p[i] * r[i];
    }
    let vx = n * sxx - sx * sx;
    let vy = n * syy - sy * sy;
    let constant = |v: &[f64]| v.iter().all(|x| *x == v[0]);
    if constant(p) || constant(r) {
        return None;
    }
    Some((n * sxy - sx * sy) / (vx * vy).sqrt())
}

pub struct MetricOracle {
    pub rmse: Vec<Option<f64>>,
    pub pcc: Vec<Option<f64>>,
    pub rmse_mean: Option<f64>,
    pub pcc_mean: Option<f64>,
}

pub fn metric_oracle(p: &FrameSequence, r: &FrameSequence, mask: &[bool]) -> MetricOracle {
    let mut rmse = Vec::new();
    let mut pcc = Vec::new();
    for c in 0..p.n_channels() {
        let name = &p.channel_names()[c];
        let (pc, rc) = (p.column(c), r.column(c));
        rmse.push((mask[c] && name != "TTC" && name != "TBC").then(|| rmse_oracle(&pc, &rc)));
        pcc.push(mask[c].then(|| pcc_oracle(&pc, &rc).unwrap_or(0.0)));
    }
    let mean = |v: &[Option<f64>]| {
        let x: Vec<f64> = v.iter().flatten().copied().collect();
        (!x.is_empty()).then(|| x.iter().sum::<f64>() / x.len() as f64)
    };
    MetricOracle {
        rmse_mean: mean(&rmse),
        pcc_mean: mean(&pcc),
        rmse,
        pcc,
    }
}

// ---- normalization --------------------------------------------------------

/// Per-channel z-normalization over the concatenation of all utterances
/// (population standard deviation), accumulated utterance by utterance.
pub fn znorm_oracle(utts: &[FrameSequence]) -> Vec<Vec<Vec<f64>>> {
    let d = utts[0].n_channels();
    let mut out: Vec<Vec<Vec<f64>>> = utts.iter().map(|u| u.frames().map(|f| f.to_vec()).collect()).collect();
    for c in 0..d {
        let mut sum = 0.0;
        let mut n = 0usize;
        for u in utts {
            for t in 0..u.n_frames() {
                sum += u.get(t, c);
            }
            n += u.n_frames();
        }
        let mean = sum / n as f64;
        let mut ss = 0.0;
        for u in utts {
            for t in 0..u.n_frames() {
                ss += (u.get(t, c) - mean) * (u.get(t, c) - mean);
            }
        }
        let std = (ss / n as f64).sqrt();
        for (k, u) in utts.iter().enumerate() {
            for t in 0..u.n_frames() {
                out[k][t][c] = (u.get(t, c) - mean) / std;
            }
        }
    }
    out
}

/// Two-loop rolling normalization: for every utterance, re-scan its window.
pub fn rolling_oracle(utts: &[FrameSequence], w: usize) -> Vec<Vec<Vec<f64>>> {
    let n = utts.len();
    let d = utts[0].n_channels();
    let all: Vec<f64> = (0..d)
        .map(|c| {
            let vals: Vec<f64> = utts.iter().flat_map(|u| u.column(c)).collect();
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / vals.len() as f64).sqrt()
        })
        .collect();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(w);
            let hi = (i + w).min(n - 1);
            let means: Vec<f64> = (0..d)
                .map(|c| {
                    let mut s = 0.0;
                    let mut k = 0usize;
                    for u in &utts[lo..=hi] {
                        for t in 0..u.n_frames() {
                            s += u.get(t, c);
                            k += 1;
                        }
                    }
                    s / k as f64
                })
                .collect();
            utts[i]
                .frames()
                .map(|f| (0..d).map(|c| (f[c] - means[c]) / all[c]).collect())
                .collect()
        })
        .collect()
}

/// Random articulatory utterances with the given channels, lengths 1..=max_len.
pub fn random_utterances(r: &mut ChaCha8Rng, n: usize, names: &[&str], max_len: usize) -> Vec<FrameSequence> {
    (0..n)
        .map(|i| {
            let t = r.random_range(1..=max_len);
            let frames: Vec<Vec<f64>> = (0..t)
                .map(|_| {
                    names
                        .iter()
                        .enumerate()
                        .map(|(c, _)| 10.0 * c as f64 + 0.05 * i as f64 + 3.0 * gauss(r))
                        .collect()
                })
                .collect();
            seq(&frames, names, 100.0)
        })
        .collect()
}
