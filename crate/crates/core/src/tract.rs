//! Vocal-tract variables derived from lip and tongue coordinates.
//!
//! * `VLA  = ULy − LLy` (vertical lip aperture)
//! * `HPRO = (ULx + LLx) / 2` (horizontal lip protrusion)
//! * `TTC  = TTx / √(TTx² + TTy²)` (tongue tip constriction)
//! * `TBC  = TBx / √(TBx² + TBy²)` (tongue body constriction)

use crate::error::Result;
use crate::frames::{Articulator, FrameSequence, TrajectorySet};

use Articulator::*;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TractDiagnostics {
    /// Frames where a TTC/TBC source point sat exactly at the origin.
    pub zero_radius_frames: usize,
}

fn cosine_to_horizontal(x: f64, y: f64, zero_radius: &mut usize) -> f64 {
    let r = x.hypot(y);
    if r == 0.0 {
        *zero_radius += 1;
        0.0
    } else {
        x / r
    }
}

/// Adds VLA, HPRO, TTC and TBC to a trajectory set.
///
/// Each variable is computed when all of its source channels exist and are
/// available; otherwise it is added as an unavailable all-zero channel. A
/// variable already present in the input is recomputed in place.
pub fn compute_tract_variables(traj: &TrajectorySet) -> Result<(TrajectorySet, TractDiagnostics)> {
    let seq = traj.seq();
    let mut diag = TractDiagnostics::default();
    let col = |a: Articulator| traj.available_index(a).map(|i| seq.column(i));

    let derived: [(Articulator, Option<Vec<f64>>); 4] = [
        (
            VLA,
            col(ULy)
                .zip(col(LLy))
                .map(|(u, l)| u.iter().zip(&l).map(|(u, l)| u - l).collect()),
        ),
        (
            HPRO,
            col(ULx)
                .zip(col(LLx))
                .map(|(u, l)| u.iter().zip(&l).map(|(u, l)| (u + l) / 2.0).collect()),
        ),
        (
            TTC,
            col(TTx).zip(col(TTy)).map(|(x, y)| {
                x.iter()
                    .zip(&y)
                    .map(|(&x, &y)| cosine_to_horizontal(x, y, &mut diag.zero_radius_frames))
                    .collect()
            }),
        ),
        (
            TBC,
            col(TBx).zip(col(TBy)).map(|(x, y)| {
                x.iter()
                    .zip(&y)
                    .map(|(&x, &y)| cosine_to_horizontal(x, y, &mut diag.zero_radius_frames))
                    .collect()
            }),
        ),
    ];

    let mut columns = seq.columns();
    let mut names = seq.channel_names().to_vec();
    let mut available = traj.available().to_vec();
    for (var, values) in derived {
        let ok = values.is_some();
        let values = values.unwrap_or_else(|| vec![0.0; seq.n_frames()]);
        match seq.channel_index(var.name()) {
            Some(i) => {
                columns[i] = values;
                available[i] = ok;
            }
            None => {
                columns.push(values);
                names.push(var.name().to_string());
                available.push(ok);
            }
        }
    }
    if diag.zero_radius_frames > 0 {
        log::warn!(
            "{} frame(s) with a tongue point at the origin; constriction set to 0",
            diag.zero_radius_frames
        );
    }
    let seq = FrameSequence::from_columns(&columns, names, seq.rate_hz())?;
    Ok((TrajectorySet::new(seq, available)?, diag))
}
