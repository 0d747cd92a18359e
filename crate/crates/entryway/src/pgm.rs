//! Binary PGM (P5) images, 8 bits per sample.

use std::fs;
use std::io;
use std::path::Path;

use entryway_core::GrayImage;

#[derive(Debug, thiserror::Error)]
pub enum PgmError {
    #[error("not a binary PGM (expected P5 magic)")]
    BadMagic,
    #[error("malformed PGM header: {0}")]
    Header(&'static str),
    #[error("PGM maxval {0} not supported (8-bit only)")]
    MaxVal(u32),
    #[error("PGM pixel data truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn decode(bytes: &[u8]) -> Result<GrayImage, PgmError> {
    if !bytes.starts_with(b"P5") {
        return Err(PgmError::BadMagic);
    }
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for field in &mut fields {
        // Whitespace and comments may precede every header field.
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(PgmError::Header("unexpected end of header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(PgmError::Header("expected a decimal number"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or(PgmError::Header("number out of range"))?;
    }
    // Exactly one whitespace byte separates the header from the raster.
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(PgmError::Header("missing separator before pixel data"));
    }
    pos += 1;
    let [width, height, maxval] = fields;
    if maxval == 0 || maxval > 255 {
        return Err(PgmError::MaxVal(maxval));
    }
    if width == 0 || height == 0 {
        return Err(PgmError::Header("zero dimension"));
    }
    let expected = width as usize * height as usize;
    let raster = &bytes[pos..];
    if raster.len() < expected {
        return Err(PgmError::Truncated {
            expected,
            found: raster.len(),
        });
    }
    GrayImage::new(width as usize, height as usize, raster[..expected].to_vec())
        .map_err(|_| PgmError::Header("inconsistent dimensions"))
}

pub fn encode(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.as_bytes());
    out
}

pub fn read(path: impl AsRef<Path>) -> Result<GrayImage, PgmError> {
    decode(&fs::read(path)?)
}

pub fn write(path: impl AsRef<Path>, img: &GrayImage) -> io::Result<()> {
    fs::write(path, encode(img))
}
