use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{time_to_frame, FrameSequence};

pub const ITEM_HEADER: &str = "#file onset offset #phone prev next speaker";

/// A phone token in context, located in a feature file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbxItem {
    pub file_id: String,
    pub onset_s: f64,
    pub offset_s: f64,
    pub phone: String,
    pub prev: String,
    pub next: String,
    pub speaker_id: String,
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

pub fn parse_items(text: &str, path: &Path) -> Result<Vec<AbxItem>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.split_whitespace().eq(ITEM_HEADER.split_whitespace()) => {}
        Some((_, h)) => {
            return Err(parse_err(
                path,
                1,
                format!("expected header `{ITEM_HEADER}`, found `{h}`"),
            ))
        }
        None => return Err(parse_err(path, 1, "empty item file, header missing")),
    }
    let mut items = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 7 {
            return Err(parse_err(
                path,
                lineno,
                format!("expected 7 columns, found {}", cols.len()),
            ));
        }
        let time = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v >= 0.0)
                .ok_or_else(|| parse_err(path, lineno, format!("{what} `{s}` is not a valid time")))
        };
        let onset_s = time(cols[1], "onset")?;
        let offset_s = time(cols[2], "offset")?;
        if offset_s <= onset_s {
            return Err(parse_err(
                path,
                lineno,
                format!("offset {offset_s} is not after onset {onset_s}"),
            ));
        }
        items.push(AbxItem {
            file_id: cols[0].to_string(),
            onset_s,
            offset_s,
            phone: cols[3].to_string(),
            prev: cols[4].to_string(),
            next: cols[5].to_string(),
            speaker_id: cols[6].to_string(),
        });
    }
    Ok(items)
}

pub fn parse_item_file(path: impl AsRef<Path>) -> Result<Vec<AbxItem>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_items(&text, path)
}

pub fn write_items(items: &[AbxItem]) -> String {
    let mut out = String::from(ITEM_HEADER);
    out.push('\n');
    for it in items {
        out.push_str(&format!(
            "{} {} {} {} {} {} {}\n",
            it.file_id, it.onset_s, it.offset_s, it.phone, it.prev, it.next, it.speaker_id
        ));
    }
    out
}

/// Frames `i` with `onset ≤ i / rate < offset`.
pub fn frame_slice(seq: &FrameSequence, item: &AbxItem) -> Result<FrameSequence> {
    let rate = seq.rate_hz();
    let start = time_to_frame(item.onset_s, rate);
    let end = time_to_frame(item.offset_s, rate);
    if start >= seq.n_frames() || end > seq.n_frames() {
        return Err(Error::Bounds(format!(
            "item [{}, {}) s of `{}` exceeds the file ({} frames at {rate} Hz)",
            item.onset_s,
            item.offset_s,
            item.file_id,
            seq.n_frames()
        )));
    }
    if end <= start {
        return Err(Error::Bounds(format!(
            "item [{}, {}) s of `{}` covers no frame at {rate} Hz",
            item.onset_s, item.offset_s, item.file_id
        )));
    }
    seq.slice_frames(start, end)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("items.item")
    }

    #[test]
    fn parses_a_row() {
        let items = parse_items(&format!("{ITEM_HEADER}\ns1_u1 0.10 0.35 eh b g spk1\n"), p()).unwrap();
        assert_eq!(
            items,
            vec![AbxItem {
                file_id: "s1_u1".into(),
                onset_s: 0.10,
                offset_s: 0.35,
                phone: "eh".into(),
                prev: "b".into(),
                next: "g".into(),
                speaker_id: "spk1".into(),
            }]
        );
        assert_eq!(parse_items(&write_items(&items), p()).unwrap(), items);
    }

    #[test]
    fn reversed_times_name_the_line() {
        let text = format!("{ITEM_HEADER}\na 0.1 0.2 eh b g s\na 0.5 0.3 eh b g s\n");
        match parse_items(&text, p()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_rows() {
        assert!(parse_items(&format!("{ITEM_HEADER}\na 0.1 0.2 eh b g\n"), p()).is_err());
        assert!(parse_items(&format!("{ITEM_HEADER}\na x 0.2 eh b g s\n"), p()).is_err());
        assert!(parse_items("file onset offset\n", p()).is_err());
        assert!(parse_items("", p()).is_err());
    }

    #[test]
    fn header_only_is_empty() {
        assert!(parse_items(&format!("{ITEM_HEADER}\n"), p()).unwrap().is_empty());
    }

    fn item(on: f64, off: f64) -> AbxItem {
        AbxItem {
            file_id: "f".into(),
            onset_s: on,
            offset_s: off,
            phone: "a".into(),
            prev: "b".into(),
            next: "c".into(),
            speaker_id: "s".into(),
        }
    }

    #[test]
    fn slices_by_time() {
        let seq = FrameSequence::from_frames(
            &(0..50).map(|i| vec![i as f64]).collect::<Vec<_>>(),
            ["x"],
            100.0,
        )
        .unwrap();
        let s = frame_slice(&seq, &item(0.10, 0.35)).unwrap();
        assert_eq!(s.n_frames(), 25);
        assert_eq!(s.get(0, 0), 10.0);
        assert_eq!(s.get(24, 0), 34.0);
        assert_eq!(frame_slice(&seq, &item(0.0, 0.5)).unwrap(), seq);
        assert!(matches!(frame_slice(&seq, &item(0.6, 0.7)), Err(Error::Bounds(_))));
        assert!(frame_slice(&seq, &item(0.101, 0.105)).is_err());
    }
}
