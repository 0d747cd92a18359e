//! Core of a two-factor (face + PIN) smart entryway.
//!
//! Everything in this crate is pure computation over owned buffers: the LBPH
//! descriptor and nearest-neighbour recognizer, the eyes+nose landmark
//! geometry used for occluded faces, the access-control state machine, the
//! remote command grammar and the confusion metrics. It needs `alloc` but not
//! `std`; file formats, devices and networking live in the `entryway` crate.
#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod command;
pub mod controller;
pub mod detect;
pub mod geometry;
pub mod image;
pub mod lbph;
pub mod metrics;
pub mod pipeline;

pub use detect::{Detector, Frame, Landmark, LandmarkSet};
pub use geometry::{extract_roi, union_eyes_nose, GeometryError, Rect};
pub use image::{GrayImage, ImageError};
pub use lbph::{FeatureVector, LbpParams, LbphError, MatchResult, Mode, RecognizerModel};
pub use pipeline::{recognize_full, recognize_occluded, PipelineError, Recognition};
