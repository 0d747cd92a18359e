//! Landmark detection interface.
//!
//! Detection is pluggable. The crate ships no learned detector; the `entryway`
//! crate provides one backed by per-image annotation files, and a cascade
//! classifier can be slotted in behind the same trait.

use core::fmt;
use core::str::FromStr;

use crate::geometry::Rect;
use crate::image::GrayImage;

/// A camera frame plus a stable identifier (file path, upload id).
#[derive(Debug, Clone, Copy)]
pub struct Frame<'a> {
    pub id: &'a str,
    pub image: &'a GrayImage,
}

impl<'a> Frame<'a> {
    pub fn new(id: &'a str, image: &'a GrayImage) -> Self {
        Self { id, image }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Landmark {
    Face,
    Eye1,
    Eye2,
    Nose,
}

impl Landmark {
    pub const ALL: [Landmark; 4] = [
        Landmark::Face,
        Landmark::Eye1,
        Landmark::Eye2,
        Landmark::Nose,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Landmark::Face => "face",
            Landmark::Eye1 => "eye1",
            Landmark::Eye2 => "eye2",
            Landmark::Nose => "nose",
        }
    }
}

impl fmt::Display for Landmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Landmark {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Landmark::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or(())
    }
}

/// Detected boxes. When both eyes are present `eye1` is the left one.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LandmarkSet {
    pub face: Option<Rect>,
    pub eye1: Option<Rect>,
    pub eye2: Option<Rect>,
    pub nose: Option<Rect>,
}

impl LandmarkSet {
    /// Builds a set, swapping the eyes if needed so `eye1` is leftmost.
    pub fn new(
        face: Option<Rect>,
        eye1: Option<Rect>,
        eye2: Option<Rect>,
        nose: Option<Rect>,
    ) -> Self {
        let mut set = Self {
            face,
            eye1,
            eye2,
            nose,
        };
        set.order_eyes();
        set
    }

    pub fn order_eyes(&mut self) {
        if let (Some(a), Some(b)) = (self.eye1, self.eye2) {
            if b.x < a.x {
                self.eye1 = Some(b);
                self.eye2 = Some(a);
            }
        }
    }

    pub fn get(&self, which: Landmark) -> Option<Rect> {
        match which {
            Landmark::Face => self.face,
            Landmark::Eye1 => self.eye1,
            Landmark::Eye2 => self.eye2,
            Landmark::Nose => self.nose,
        }
    }

    pub fn set(&mut self, which: Landmark, rect: Rect) {
        let slot = match which {
            Landmark::Face => &mut self.face,
            Landmark::Eye1 => &mut self.eye1,
            Landmark::Eye2 => &mut self.eye2,
            Landmark::Nose => &mut self.nose,
        };
        *slot = Some(rect);
    }

    pub fn is_empty(&self) -> bool {
        Landmark::ALL.iter().all(|&l| self.get(l).is_none())
    }

    pub fn eye_count(&self) -> usize {
        usize::from(self.eye1.is_some()) + usize::from(self.eye2.is_some())
    }
}

/// Which landmarks a detector can report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Capabilities {
    pub face: bool,
    pub eyes: bool,
    pub nose: bool,
}

impl Capabilities {
    pub const ALL: Capabilities = Capabilities {
        face: true,
        eyes: true,
        nose: true,
    };
}

pub trait Detector {
    fn capabilities(&self) -> Capabilities;

    /// Must be deterministic for a given frame.
    fn detect(&self, frame: &Frame<'_>) -> LandmarkSet;
}

impl<D: Detector + ?Sized> Detector for &D {
    fn capabilities(&self) -> Capabilities {
        (**self).capabilities()
    }

    fn detect(&self, frame: &Frame<'_>) -> LandmarkSet {
        (**self).detect(frame)
    }
}

/// Returns the same landmarks for every frame. Handy for fixed camera rigs.
#[derive(Debug, Clone, Copy)]
pub struct FixedDetector(pub LandmarkSet);

impl Detector for FixedDetector {
    fn capabilities(&self) -> Capabilities {
        Capabilities::ALL
    }

    fn detect(&self, _frame: &Frame<'_>) -> LandmarkSet {
        self.0
    }
}
