//! Binary model files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "LBPH"              magic
//! u16                 format version
//! u8                  mode (0 = full face, 1 = occluded)
//! u32 u32             input width, height
//! u32 u32 u32 u32 u32 radius, neighbours, grid_x, grid_y, bins
//! u32                 entry count
//! per entry:
//!   u32 + bytes       UTF-8 label
//!   f64 * grid_x*grid_y*bins
//! ```

use alloc::string::String;
use alloc::vec::Vec;

use super::{FeatureVector, LbpParams, Mode, ModelEntry, RecognizerModel};

pub const MAGIC: [u8; 4] = *b"LBPH";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("not a model file: bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported model format version {found} (expected {FORMAT_VERSION})")]
    VersionMismatch { found: u16 },
    #[error("model file truncated while reading {what}")]
    Truncated { what: &'static str },
    #[error("malformed model file: {0}")]
    Malformed(&'static str),
}

pub fn save_model(model: &RecognizerModel) -> Vec<u8> {
    let params = model.params();
    let feature_bytes = params.feature_len() * 8;
    let mut out = Vec::with_capacity(
        64 + model
            .entries()
            .iter()
            .map(|e| 4 + e.label.len() + feature_bytes)
            .sum::<usize>(),
    );
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(match model.mode() {
        Mode::FullFace => 0,
        Mode::Occluded => 1,
    });
    let (w, h) = model.input_size();
    for v in [
        w,
        h,
        LbpParams::RADIUS,
        LbpParams::NEIGHBORS,
        params.grid_x,
        params.grid_y,
        LbpParams::BINS,
        model.len(),
    ] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for entry in model.entries() {
        out.extend_from_slice(&(entry.label.len() as u32).to_le_bytes());
        out.extend_from_slice(entry.label.as_bytes());
        for v in entry.feature.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], CodecError> {
        if self.buf.len() < n {
            return Err(CodecError::Truncated { what });
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    fn u32(&mut self, what: &'static str) -> Result<usize, CodecError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }
}

pub fn load_model(bytes: &[u8]) -> Result<RecognizerModel, CodecError> {
    let mut r = Reader { buf: bytes };
    let magic = r.take(4, "magic")?;
    if magic != MAGIC {
        return Err(CodecError::BadMagic([
            magic[0], magic[1], magic[2], magic[3],
        ]));
    }
    let v = r.take(2, "version")?;
    let version = u16::from_le_bytes([v[0], v[1]]);
    if version != FORMAT_VERSION {
        return Err(CodecError::VersionMismatch { found: version });
    }
    let mode = match r.take(1, "mode")?[0] {
        0 => Mode::FullFace,
        1 => Mode::Occluded,
        _ => return Err(CodecError::Malformed("unknown mode tag")),
    };
    let width = r.u32("input width")?;
    let height = r.u32("input height")?;
    let radius = r.u32("radius")?;
    let neighbors = r.u32("neighbours")?;
    let grid_x = r.u32("grid_x")?;
    let grid_y = r.u32("grid_y")?;
    let bins = r.u32("bins")?;
    if radius != LbpParams::RADIUS || neighbors != LbpParams::NEIGHBORS || bins != LbpParams::BINS {
        return Err(CodecError::Malformed(
            "unsupported LBP radius/neighbours/bins",
        ));
    }
    let params = LbpParams::new(grid_x, grid_y).map_err(|_| CodecError::Malformed("zero grid"))?;
    let count = r.u32("entry count")?;
    let feature_len = params.feature_len();
    // Never trust the count for preallocation beyond what the bytes can hold.
    let mut entries = Vec::with_capacity(count.min(r.buf.len() / (4 + feature_len * 8).max(1)));
    for _ in 0..count {
        let len = r.u32("label length")?;
        let label = r.take(len, "label")?;
        let label = String::from(
            core::str::from_utf8(label).map_err(|_| CodecError::Malformed("label is not UTF-8"))?,
        );
        let raw = r.take(feature_len * 8, "feature values")?;
        let values = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]]))
            .collect();
        entries.push(ModelEntry {
            label,
            feature: FeatureVector::from_values(values),
        });
    }
    if !r.buf.is_empty() {
        return Err(CodecError::Malformed("trailing bytes after last entry"));
    }
    RecognizerModel::from_parts(params, (width, height), mode, entries)
        .map_err(|_| CodecError::Malformed("input size incompatible with grid"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::GrayImage;
    use crate::lbph::train;

    fn model() -> RecognizerModel {
        let a = GrayImage::from_fn(40, 40, |x, y| ((x * 7) ^ (y * 13)) as u8).unwrap();
        let b = GrayImage::from_fn(40, 40, |x, y| ((x * 29) ^ (y * 3)) as u8).unwrap();
        train(
            [("Nazrin", &a), ("Najwa", &b)],
            LbpParams::new(4, 4).unwrap(),
            (32, 32),
            Mode::Occluded,
        )
        .unwrap()
    }

    #[test]
    fn round_trip() {
        let m = model();
        let bytes = save_model(&m);
        assert_eq!(load_model(&bytes).unwrap(), m);
        assert_eq!(save_model(&load_model(&bytes).unwrap()), bytes);
    }

    #[test]
    fn bad_magic() {
        let mut bytes = save_model(&model());
        bytes[..4].copy_from_slice(b"XXXX");
        assert_eq!(load_model(&bytes), Err(CodecError::BadMagic(*b"XXXX")));
    }

    #[test]
    fn version_mismatch() {
        let mut bytes = save_model(&model());
        bytes[4] = 9;
        assert_eq!(
            load_model(&bytes),
            Err(CodecError::VersionMismatch { found: 9 })
        );
    }

    #[test]
    fn truncated_mid_entry() {
        let bytes = save_model(&model());
        let cut = &bytes[..bytes.len() - 100];
        assert_eq!(
            load_model(cut),
            Err(CodecError::Truncated {
                what: "feature values"
            })
        );
        assert!(matches!(
            load_model(&bytes[..3]),
            Err(CodecError::Truncated { .. })
        ));
    }

    #[test]
    fn trailing_garbage() {
        let mut bytes = save_model(&model());
        bytes.push(0);
        assert!(matches!(load_model(&bytes), Err(CodecError::Malformed(_))));
    }
}
