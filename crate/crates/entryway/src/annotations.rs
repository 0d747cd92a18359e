//! Annotation sidecars and the detector backed by them.
//!
//! For `name.pgm` the sidecar is `name.boxes`, one landmark per line:
//!
//! ```text
//! # comment
//! face 36 30 128 128
//! eye1 60 70 28 16
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use entryway_core::detect::Capabilities;
use entryway_core::{Detector, Frame, Landmark, LandmarkSet, Rect};

#[derive(Debug, thiserror::Error)]
pub enum AnnotationError {
    #[error("{file}:{line}: {reason}")]
    Parse {
        file: String,
        line: usize,
        reason: String,
    },
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// Parses sidecar text. `origin` names the source in error messages.
pub fn parse(text: &str, origin: &str) -> Result<LandmarkSet, AnnotationError> {
    let mut set = LandmarkSet::default();
    for (i, raw) in text.lines().enumerate() {
        let err = |reason: String| AnnotationError::Parse {
            file: origin.to_string(),
            line: i + 1,
            reason,
        };
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut parts = content.split_whitespace();
        let name = parts.next().unwrap_or_default();
        let landmark: Landmark = name
            .parse()
            .map_err(|_| err(format!("unknown landmark {name:?}")))?;
        let nums: Vec<&str> = parts.collect();
        if nums.len() != 4 {
            return Err(err(format!(
                "{name}: expected x y w h, got {} fields",
                nums.len()
            )));
        }
        let mut v = [0i64; 4];
        for (slot, s) in v.iter_mut().zip(&nums) {
            *slot = s
                .parse()
                .map_err(|_| err(format!("{name}: {s:?} is not an integer")))?;
        }
        let rect = match (
            i32::try_from(v[0]),
            i32::try_from(v[1]),
            u32::try_from(v[2]),
            u32::try_from(v[3]),
        ) {
            (Ok(x), Ok(y), Ok(w), Ok(h)) if x >= 0 && y >= 0 => Rect::new(x, y, w, h).ok(),
            _ => None,
        }
        .ok_or_else(|| err(format!("{name}: box must have x,y >= 0 and w,h > 0")))?;
        if set.get(landmark).is_some() {
            return Err(err(format!("{name} given twice")));
        }
        set.set(landmark, rect);
    }
    set.order_eyes();
    Ok(set)
}

pub fn render(set: &LandmarkSet) -> String {
    let mut out = String::new();
    for l in Landmark::ALL {
        if let Some(r) = set.get(l) {
            let _ = writeln!(out, "{l} {} {} {} {}", r.x, r.y, r.w, r.h);
        }
    }
    out
}

pub fn sidecar_path(image: &Path) -> PathBuf {
    image.with_extension("boxes")
}

/// Reads the sidecar next to `image`; a missing sidecar means no landmarks.
pub fn read_sidecar(image: &Path) -> Result<LandmarkSet, AnnotationError> {
    let path = sidecar_path(image);
    match fs::read_to_string(&path) {
        Ok(text) => parse(&text, &path.display().to_string()),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(LandmarkSet::default()),
        Err(source) => Err(AnnotationError::Io { path, source }),
    }
}

pub fn write_sidecar(image: &Path, set: &LandmarkSet) -> io::Result<()> {
    fs::write(sidecar_path(image), render(set))
}

/// Reference detector: returns annotated boxes verbatim, keyed by frame id.
/// Frames without an annotation get an empty landmark set.
#[derive(Debug, Clone, Default)]
pub struct AnnotationDetector {
    boxes: HashMap<String, LandmarkSet>,
}

impl AnnotationDetector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: impl Into<String>, mut set: LandmarkSet) {
        set.order_eyes();
        self.boxes.insert(id.into(), set);
    }

    /// Loads the sidecar of every image, keyed by the path as given.
    pub fn from_images<P: AsRef<Path>>(
        images: impl IntoIterator<Item = P>,
    ) -> Result<Self, AnnotationError> {
        let mut det = Self::new();
        for p in images {
            let p = p.as_ref();
            let set = read_sidecar(p)?;
            if !set.is_empty() {
                det.insert(p.to_string_lossy(), set);
            }
        }
        Ok(det)
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }
}

impl Detector for AnnotationDetector {
    fn capabilities(&self) -> Capabilities {
        Capabilities::ALL
    }

    fn detect(&self, frame: &Frame<'_>) -> LandmarkSet {
        self.boxes.get(frame.id).copied().unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use entryway_core::GrayImage;

    #[test]
    fn verbatim_parse() {
        let set = parse("eye1 10 20 15 15\n", "t").unwrap();
        assert_eq!(set.eye1, Some(Rect::new(10, 20, 15, 15).unwrap()));
    }

    #[test]
    fn comments_blank_lines_and_eye_order() {
        let text = "# landmarks\n\nface 0 0 100 100  # whole\neye1 60 20 10 10\neye2 20 20 10 10\n";
        let set = parse(text, "t").unwrap();
        assert_eq!(set.eye1.unwrap().x, 20);
        assert_eq!(set.eye2.unwrap().x, 60);
        assert_eq!(parse(&render(&set), "t").unwrap(), set);
    }

    #[test]
    fn missing_field_names_the_line() {
        let err = parse("face 0 0 10 10\nnose 25 35 12\n", "a.boxes").unwrap_err();
        assert_eq!(
            err.to_string(),
            "a.boxes:2: nose: expected x y w h, got 3 fields"
        );
    }

    #[test]
    fn other_malformed_lines() {
        for bad in [
            "mouth 1 2 3 4",
            "nose 1 2 0 4",
            "nose -1 2 3 4",
            "nose a 2 3 4",
            "eye1 1 1 1 1\neye1 2 2 2 2",
        ] {
            assert!(
                matches!(parse(bad, "t"), Err(AnnotationError::Parse { .. })),
                "{bad}"
            );
        }
    }

    #[test]
    fn unannotated_frame_is_empty() {
        let det = AnnotationDetector::new();
        let img = GrayImage::filled(4, 4, 0).unwrap();
        assert!(det.detect(&Frame::new("nowhere.pgm", &img)).is_empty());
    }

    #[test]
    fn sidecar_files() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("a.pgm");
        let set = parse("face 1 2 3 4\n", "t").unwrap();
        write_sidecar(&img, &set).unwrap();
        assert_eq!(read_sidecar(&img).unwrap(), set);
        assert!(read_sidecar(&dir.path().join("b.pgm")).unwrap().is_empty());
        let det = AnnotationDetector::from_images([&img]).unwrap();
        let px = GrayImage::filled(4, 4, 0).unwrap();
        assert_eq!(det.detect(&Frame::new(&img.to_string_lossy(), &px)), set);
    }
}
