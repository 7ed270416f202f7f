//! Generic CSV adapter for articulatory recordings.
//!
//! The first row names the columns using the canonical articulator
//! vocabulary; an optional `time` column is ignored. A column whose cells are
//! all empty or `NaN` becomes an unavailable channel (stored as zeros).

use std::path::Path;

use crate::error::{Error, Result};
use crate::frames::{Articulator, FrameSequence, TrajectorySet};

pub fn read_trajectory_csv(path: impl AsRef<Path>, rate_hz: f64) -> Result<TrajectorySet> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::format(path, e.to_string()))?;
    let headers = rdr
        .headers()
        .map_err(|e| Error::format(path, e.to_string()))?
        .clone();

    let mut keep = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        if h.eq_ignore_ascii_case("time") {
            continue;
        }
        h.parse::<Articulator>()
            .map_err(|e| Error::format(path, e.to_string()))?;
        keep.push((i, h.to_string()));
    }

    let mut columns: Vec<Vec<Option<f64>>> = vec![Vec::new(); keep.len()];
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::format(path, e.to_string()))?;
        for (col, (i, name)) in keep.iter().enumerate() {
            let cell = record.get(*i).unwrap_or("");
            let v = if cell.is_empty() || cell.eq_ignore_ascii_case("nan") {
                None
            } else {
                let v: f64 = cell.parse().map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    line: row + 2,
                    msg: format!("column `{name}`: `{cell}` is not a number"),
                })?;
                Some(v)
            };
            columns[col].push(v);
        }
    }

    let mut values = Vec::with_capacity(columns.len());
    let mut available = Vec::with_capacity(columns.len());
    for (col, (_, name)) in columns.into_iter().zip(&keep) {
        let missing = col.iter().filter(|v| v.is_none()).count();
        if missing == col.len() {
            values.push(vec![0.0; col.len()]);
            available.push(false);
        } else if missing > 0 {
            return Err(Error::format(
                path,
                format!("column `{name}` has {missing} missing values"),
            ));
        } else {
            values.push(col.into_iter().flatten().collect());
            available.push(true);
        }
    }
    let names: Vec<String> = keep.into_iter().map(|(_, n)| n).collect();
    let seq = FrameSequence::from_columns(&values, names, rate_hz)?;
    TrajectorySet::new(seq, available)
}
