use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use super::descriptor::{chi_square_bounded, grid_histogram, lbp_code_image};
use super::{FeatureVector, LbpParams, LbphError};
use crate::image::GrayImage;

/// Which recognition pipeline a model serves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    /// Mode 1: the whole detected face.
    FullFace,
    /// Mode 2: the eyes+nose region, for masked or partially hidden faces.
    Occluded,
}

impl Mode {
    /// Size faces are normalised to before description.
    pub fn default_input_size(self) -> (usize, usize) {
        match self {
            Mode::FullFace => (128, 128),
            Mode::Occluded => (128, 64),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::FullFace => "full",
            Mode::Occluded => "occluded",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelEntry {
    pub label: String,
    pub feature: FeatureVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub label: String,
    /// Chi-square distance to the nearest entry; 0 is an exact match.
    pub confidence: f64,
}

/// A trained LBPH recognizer: one feature vector per training image.
#[derive(Debug, Clone, PartialEq)]
pub struct RecognizerModel {
    params: LbpParams,
    input_size: (usize, usize),
    mode: Mode,
    entries: Vec<ModelEntry>,
}

impl RecognizerModel {
    /// An empty model; it must gain entries before it can predict.
    pub fn empty(
        params: LbpParams,
        input_size: (usize, usize),
        mode: Mode,
    ) -> Result<Self, LbphError> {
        params.check_input_size(input_size.0, input_size.1)?;
        Ok(Self {
            params,
            input_size,
            mode,
            entries: Vec::new(),
        })
    }

    /// Reassembles a model from parts, checking every feature length.
    pub fn from_parts(
        params: LbpParams,
        input_size: (usize, usize),
        mode: Mode,
        entries: Vec<ModelEntry>,
    ) -> Result<Self, LbphError> {
        let mut model = Self::empty(params, input_size, mode)?;
        for e in &entries {
            if e.feature.len() != params.feature_len() {
                return Err(LbphError::LengthMismatch {
                    left: e.feature.len(),
                    right: params.feature_len(),
                });
            }
        }
        model.entries = entries;
        Ok(model)
    }

    pub fn params(&self) -> &LbpParams {
        &self.params
    }

    pub fn input_size(&self) -> (usize, usize) {
        self.input_size
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn entries(&self) -> &[ModelEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.label.as_str())
    }

    /// Resizes to the model's input size, then computes the grid histogram.
    pub fn describe(&self, img: &GrayImage) -> Result<FeatureVector, LbphError> {
        let (w, h) = self.input_size;
        let normalized = img.resize_bilinear(w, h)?;
        grid_histogram(&lbp_code_image(&normalized)?, &self.params)
    }

    pub fn add_sample(
        &mut self,
        label: impl Into<String>,
        img: &GrayImage,
    ) -> Result<(), LbphError> {
        let feature = self.describe(img)?;
        self.entries.push(ModelEntry {
            label: label.into(),
            feature,
        });
        Ok(())
    }

    /// Appends every entry of `other`, which must share params, size and mode.
    pub fn extend_from(&mut self, other: RecognizerModel) -> Result<(), LbphError> {
        if other.params != self.params || other.input_size != self.input_size {
            return Err(LbphError::InvalidInput(
                "models use different descriptor settings",
            ));
        }
        if other.mode != self.mode {
            return Err(LbphError::InvalidInput("models serve different modes"));
        }
        self.entries.extend(other.entries);
        Ok(())
    }

    /// Drops every entry carrying `label`; returns how many were removed.
    pub fn remove_label(&mut self, label: &str) -> usize {
        let before = self.entries.len();
        self.entries.retain(|e| e.label != label);
        before - self.entries.len()
    }

    pub fn predict(&self, img: &GrayImage) -> Result<MatchResult, LbphError> {
        if self.entries.is_empty() {
            return Err(LbphError::NotTrained);
        }
        let query = self.describe(img)?;
        self.predict_feature(&query)
    }

    /// Nearest entry by chi-square; ties go to the earliest entry.
    pub fn predict_feature(&self, query: &FeatureVector) -> Result<MatchResult, LbphError> {
        if query.len() != self.params.feature_len() {
            return Err(LbphError::LengthMismatch {
                left: query.len(),
                right: self.params.feature_len(),
            });
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, entry) in self.entries.iter().enumerate() {
            let bound = best.map_or(f64::INFINITY, |(_, d)| d);
            let d = chi_square_bounded(query.values(), entry.feature.values(), bound);
            if d < bound {
                best = Some((i, d));
            }
        }
        let (i, confidence) = best.ok_or(LbphError::NotTrained)?;
        Ok(MatchResult {
            label: self.entries[i].label.clone(),
            confidence,
        })
    }
}

/// Trains a model with one entry per sample, in sample order.
pub fn train<'a, L, I>(
    samples: I,
    params: LbpParams,
    input_size: (usize, usize),
    mode: Mode,
) -> Result<RecognizerModel, LbphError>
where
    L: Into<String>,
    I: IntoIterator<Item = (L, &'a GrayImage)>,
{
    let mut model = RecognizerModel::empty(params, input_size, mode)?;
    for (label, img) in samples {
        model.add_sample(label, img)?;
    }
    if model.is_empty() {
        return Err(LbphError::InvalidInput("no training samples"));
    }
    Ok(model)
}
