use crate::error::{Error, Result};
use crate::frames::FrameSequence;

/// `1 − u·v / (‖u‖‖v‖)`, clamped to `[0, 2]`.
///
/// A zero vector carries no direction: its distance to anything is 1.
pub fn cosine_distance(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::ShapeMismatch(format!(
            "cosine distance between {}- and {}-dimensional frames",
            u.len(),
            v.len()
        )));
    }
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Ok(1.0);
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok((1.0 - dot / (nu * nv)).clamp(0.0, 2.0))
}

/// A segment with unit-normalized frames, ready for repeated DTW scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    unit: Vec<f64>,
    zero: Vec<bool>,
    dim: usize,
}

impl Segment {
    pub fn new(seq: &FrameSequence) -> Self {
        let dim = seq.n_channels();
        let mut unit = Vec::with_capacity(seq.values().len());
        let mut zero = Vec::with_capacity(seq.n_frames());
        for f in seq.frames() {
            let norm = f.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                zero.push(true);
                unit.extend(std::iter::repeat_n(0.0, dim));
            } else {
                zero.push(false);
                unit.extend(f.iter().map(|x| x / norm));
            }
        }
        Segment { unit, zero, dim }
    }

    pub fn len(&self) -> usize {
        self.zero.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zero.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of all-zero frames.
    pub fn zero_frames(&self) -> usize {
        self.zero.iter().filter(|z| **z).count()
    }

    fn frame(&self, i: usize) -> &[f64] {
        &self.unit[i * self.dim..(i + 1) * self.dim]
    }

    fn distance(&self, i: usize, other: &Segment, j: usize) -> f64 {
        if self.zero[i] || other.zero[j] {
            return 1.0;
        }
        let dot: f64 = self.frame(i).iter().zip(other.frame(j)).map(|(a, b)| a * b).sum();
        (1.0 - dot).clamp(0.0, 2.0)
    }
}

/// DTW with steps (1,0), (0,1), (1,1), endpoints anchored, minimizing the
/// summed frame distance (ties broken towards the shorter path). Returns the
/// optimal path's sum divided by its number of matched pairs.
pub fn dtw_segments(a: &Segment, b: &Segment) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidSequence("DTW over an empty segment".into()));
    }
    if a.dim != b.dim {
        return Err(Error::ShapeMismatch(format!(
            "DTW between {}- and {}-dimensional segments",
            a.dim, b.dim
        )));
    }
    let m = b.len();
    // (accumulated cost, path length) per column
    let mut prev: Vec<(f64, u32)> = vec![(f64::INFINITY, 0); m];
    let mut cur: Vec<(f64, u32)> = vec![(f64::INFINITY, 0); m];
    for i in 0..a.len() {
        for j in 0..m {
            let d = a.distance(i, b, j);
            let best = if i == 0 && j == 0 {
                (0.0, 0)
            } else {
                let mut best = (f64::INFINITY, u32::MAX);
                let mut consider = |c: (f64, u32)| {
                    if c.0 < best.0 || (c.0 == best.0 && c.1 < best.1) {
                        best = c;
                    }
                };
                if i > 0 && j > 0 {
                    consider(prev[j - 1]);
                }
                if i > 0 {
                    consider(prev[j]);
                }
                if j > 0 {
                    consider(cur[j - 1]);
                }
                best
            };
            cur[j] = (best.0 + d, best.1 + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let (sum, len) = prev[m - 1];
    Ok(sum / len as f64)
}

/// Mean cosine distance along the sum-optimal DTW alignment of two sequences.
pub fn dtw_distance(s1: &FrameSequence, s2: &FrameSequence) -> Result<f64> {
    if s1.n_channels() != s2.n_channels() {
        return Err(Error::ShapeMismatch(format!(
            "DTW between {}- and {}-dimensional sequences",
            s1.n_channels(),
            s2.n_channels()
        )));
    }
    dtw_segments(&Segment::new(s1), &Segment::new(s2))
}
