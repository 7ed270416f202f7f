//! The AFV1 feature file format.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! offset  size  field
//! 0       4     magic, ASCII "AFV1"
//! 4       4     u32 T, number of frames
//! 8       4     u32 D, number of channels
//! 12      8     f64 frame rate in Hz
//! 20      ...   D channel names, each a u32 byte length followed by UTF-8 bytes
//! ...     4*T*D payload, f32 values in row-major (frame-major) order
//! ```
//!
//! Values are stored as `f32` and widened to `f64` on read, so a sequence
//! whose values are exactly representable in `f32` round-trips bit-exactly.
//! Trailing bytes after the payload are rejected.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::frames::FrameSequence;

pub const MAGIC: &[u8; 4] = b"AFV1";
pub const EXTENSION: &str = "afv";

pub fn encode(seq: &FrameSequence) -> Result<Vec<u8>> {
    let n_frames = u32::try_from(seq.n_frames())
        .map_err(|_| Error::InvalidSequence("too many frames for AFV1".into()))?;
    let n_channels = u32::try_from(seq.n_channels())
        .map_err(|_| Error::InvalidSequence("too many channels for AFV1".into()))?;

    let names_len: usize = seq.channel_names().iter().map(|n| 4 + n.len()).sum();
    let mut buf = Vec::with_capacity(20 + names_len + 4 * seq.values().len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&n_frames.to_le_bytes());
    buf.extend_from_slice(&n_channels.to_le_bytes());
    buf.extend_from_slice(&seq.rate_hz().to_le_bytes());
    for name in seq.channel_names() {
        let len = u32::try_from(name.len())
            .map_err(|_| Error::InvalidSequence("channel name too long".into()))?;
        buf.extend_from_slice(&len.to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
    }
    for (i, &v) in seq.values().iter().enumerate() {
        let narrowed = v as f32;
        if !narrowed.is_finite() {
            return Err(Error::InvalidSequence(format!(
                "value {v} at frame {} does not fit in 32 bits",
                i / seq.n_channels()
            )));
        }
        buf.extend_from_slice(&narrowed.to_le_bytes());
    }
    Ok(buf)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let out = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(Error::format(
                self.path,
                format!("truncated file while reading {what}"),
            )),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<FrameSequence> {
    let mut r = Reader { bytes, pos: 0, path };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::format(path, "bad magic, not an AFV1 file"));
    }
    let n_frames = r.u32("frame count")? as usize;
    let n_channels = r.u32("channel count")? as usize;
    let rate_hz = f64::from_le_bytes(r.take(8, "frame rate")?.try_into().unwrap());

    let mut names = Vec::with_capacity(n_channels.min(4096));
    for i in 0..n_channels {
        let len = r.u32("channel name length")? as usize;
        let raw = r.take(len, "channel name")?;
        let name = std::str::from_utf8(raw)
            .map_err(|_| Error::format(path, format!("channel name {i} is not UTF-8")))?;
        names.push(name.to_string());
    }

    let n_values = n_frames
        .checked_mul(n_channels)
        .ok_or_else(|| Error::format(path, "declared shape overflows"))?;
    let payload_len = n_values
        .checked_mul(4)
        .ok_or_else(|| Error::format(path, "declared shape overflows"))?;
    let payload = r.take(payload_len, "payload")?;
    if r.pos != bytes.len() {
        return Err(Error::format(
            path,
            format!("{} trailing bytes after payload", bytes.len() - r.pos),
        ));
    }
    let values = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect();
    FrameSequence::new(values, n_frames, names, rate_hz)
        .map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_feature_file(seq: &FrameSequence, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(seq)?;
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn read_feature_file(path: impl AsRef<Path>) -> Result<FrameSequence> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p() -> &'static Path {
        Path::new("mem")
    }

    #[test]
    fn single_zero_value_layout() {
        let s = FrameSequence::from_frames(&[vec![0.0]], ["a"], 100.0).unwrap();
        let bytes = encode(&s).unwrap();
        // 20 byte fixed header, 4 + 1 byte name, 4 payload bytes
        assert_eq!(bytes.len(), 20 + 5 + 4);
        assert_eq!(&bytes[..4], b"AFV1");
        assert_eq!(&bytes[bytes.len() - 4..], &[0, 0, 0, 0]);
        assert_eq!(decode(&bytes, p()).unwrap(), s);
    }

    #[test]
    fn three_by_two_round_trip() {
        let s = FrameSequence::from_frames(
            &[vec![1.5, -2.25], vec![3.0, 0.125], vec![-7.0, 1e-3f32 as f64]],
            ["x", "y"],
            200.0,
        )
        .unwrap();
        assert_eq!(decode(&encode(&s).unwrap(), p()).unwrap(), s);
    }

    #[test]
    fn bad_magic_and_truncation() {
        let s = FrameSequence::from_frames(&[vec![1.0, 2.0], vec![3.0, 4.0]], ["a", "b"], 100.0)
            .unwrap();
        let mut bytes = encode(&s).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad, p()), Err(Error::Format { msg, .. }) if msg.contains("magic")));
        bytes.truncate(bytes.len() - 3);
        assert!(matches!(decode(&bytes, p()), Err(Error::Format { msg, .. }) if msg.contains("truncated")));
    }

    #[test]
    fn duplicate_names_rejected_on_read() {
        let s = FrameSequence::from_frames(&[vec![1.0, 2.0]], ["a", "b"], 100.0).unwrap();
        let mut bytes = encode(&s).unwrap();
        // second name "b" is the last byte before the 8-byte payload
        let idx = bytes.len() - 8 - 1;
        bytes[idx] = b'a';
        assert!(decode(&bytes, p()).is_err());
    }

    #[test]
    fn overflowing_value_rejected() {
        let s = FrameSequence::from_frames(&[vec![1e300]], ["a"], 100.0).unwrap();
        assert!(encode(&s).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/x.afv");
        let s = FrameSequence::from_frames(&[vec![0.5], vec![0.25]], ["TTx"], 100.0).unwrap();
        write_feature_file(&s, &path).unwrap();
        assert_eq!(read_feature_file(&path).unwrap(), s);
    }

    proptest! {
        #[test]
        fn round_trip_is_exact(
            (t, d, vals) in (1usize..6, 1usize..5).prop_flat_map(|(t, d)| {
                (Just(t), Just(d), proptest::collection::vec(-1e6f32..1e6f32, t * d))
            }),
            rate in 1.0f64..1000.0,
        ) {
            let names: Vec<String> = (0..d).map(|i| format!("ch{i}")).collect();
            let values: Vec<f64> = vals.iter().map(|&v| v as f64).collect();
            let s = FrameSequence::new(values, t, names, rate).unwrap();
            let bytes = encode(&s).unwrap();
            let back = decode(&bytes, p()).unwrap();
            prop_assert_eq!(&back, &s);
            prop_assert_eq!(encode(&back).unwrap(), bytes);
        }
    }
}
