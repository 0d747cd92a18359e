//! Mode 1 (full face) and Mode 2 (eyes+nose) recognition pipelines.
//!
//! Both pipelines are detect, crop, normalise, predict. They differ only in
//! the region they crop: the face box, or the union of the eye boxes and the
//! nose box (eyes alone when no nose was found).

use crate::detect::{Detector, Frame, LandmarkSet};
use crate::geometry::{clamp_region, union_eyes_nose, GeometryError, Rect};
use crate::image::GrayImage;
use crate::lbph::{LbphError, MatchResult, Mode, RecognizerModel};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error("no face detected")]
    NoFace,
    #[error("need two eyes for occluded recognition, found {found}")]
    InsufficientLandmarks { found: usize },
    #[error("a {model} model cannot serve {requested} recognition")]
    ModeMismatch { model: Mode, requested: Mode },
    #[error("recognizer has no entries")]
    NotTrained,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Lbph(LbphError),
}

impl From<LbphError> for PipelineError {
    fn from(e: LbphError) -> Self {
        match e {
            LbphError::NotTrained => PipelineError::NotTrained,
            other => PipelineError::Lbph(other),
        }
    }
}

/// A prediction plus the (clamped) region it was computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct Recognition {
    pub matched: MatchResult,
    pub region: Rect,
}

/// The unclamped region a mode would crop from these landmarks.
pub fn region_for(mode: Mode, landmarks: &LandmarkSet) -> Result<Rect, PipelineError> {
    match mode {
        Mode::FullFace => landmarks.face.ok_or(PipelineError::NoFace),
        Mode::Occluded => match (landmarks.eye1, landmarks.eye2) {
            (Some(e1), Some(e2)) => Ok(union_eyes_nose(&e1, &e2, landmarks.nose.as_ref())),
            _ => Err(PipelineError::InsufficientLandmarks {
                found: landmarks.eye_count(),
            }),
        },
    }
}

/// Crops and normalises the region for `mode`; this is exactly what the
/// recognizer sees, so training on it reproduces prediction-time features.
pub fn crop_for_mode(
    mode: Mode,
    image: &GrayImage,
    landmarks: &LandmarkSet,
    size: (usize, usize),
) -> Result<(GrayImage, Rect), PipelineError> {
    let region = clamp_region(image, &region_for(mode, landmarks)?)?;
    let crop = image
        .crop(
            region.x as usize,
            region.y as usize,
            region.w as usize,
            region.h as usize,
        )
        .resize_bilinear(size.0, size.1)
        .map_err(GeometryError::from)?;
    Ok((crop, region))
}

fn recognize(
    mode: Mode,
    model: &RecognizerModel,
    frame: &Frame<'_>,
    detector: &dyn Detector,
) -> Result<Recognition, PipelineError> {
    if model.mode() != mode {
        return Err(PipelineError::ModeMismatch {
            model: model.mode(),
            requested: mode,
        });
    }
    if model.is_empty() {
        return Err(PipelineError::NotTrained);
    }
    let landmarks = detector.detect(frame);
    let (roi, region) = crop_for_mode(mode, frame.image, &landmarks, model.input_size())?;
    let matched = model.predict(&roi)?;
    Ok(Recognition { matched, region })
}

pub fn recognize_full(
    model: &RecognizerModel,
    frame: &Frame<'_>,
    detector: &dyn Detector,
) -> Result<Recognition, PipelineError> {
    recognize(Mode::FullFace, model, frame, detector)
}

pub fn recognize_occluded(
    model: &RecognizerModel,
    frame: &Frame<'_>,
    detector: &dyn Detector,
) -> Result<Recognition, PipelineError> {
    recognize(Mode::Occluded, model, frame, detector)
}

/// Dispatches on `mode`.
pub fn recognize_with(
    mode: Mode,
    model: &RecognizerModel,
    frame: &Frame<'_>,
    detector: &dyn Detector,
) -> Result<Recognition, PipelineError> {
    recognize(mode, model, frame, detector)
}
