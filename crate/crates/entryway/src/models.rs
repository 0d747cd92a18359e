//! The pair of trained models kept side by side in one directory.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use entryway_core::lbph::{load_model, save_model, CodecError};
use entryway_core::{LbpParams, Mode, RecognizerModel};

#[derive(Debug, thiserror::Error)]
pub enum ModelFileError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Codec { path: PathBuf, source: CodecError },
    #[error("{path}: model serves the {found} mode, expected {expected}")]
    WrongMode {
        path: PathBuf,
        found: Mode,
        expected: Mode,
    },
    #[error("no model files in {0}")]
    Empty(PathBuf),
}

pub fn model_file(dir: &Path, mode: Mode) -> PathBuf {
    dir.join(format!("{}.lbph", mode.as_str()))
}

pub fn empty_model(mode: Mode) -> RecognizerModel {
    RecognizerModel::empty(LbpParams::default(), mode.default_input_size(), mode)
        .expect("default input sizes fit the default grid")
}

pub fn read_model(path: &Path, mode: Mode) -> Result<RecognizerModel, ModelFileError> {
    let bytes = fs::read(path).map_err(|source| ModelFileError::Io {
        path: path.into(),
        source,
    })?;
    let model = load_model(&bytes).map_err(|source| ModelFileError::Codec {
        path: path.into(),
        source,
    })?;
    if model.mode() != mode {
        return Err(ModelFileError::WrongMode {
            path: path.into(),
            found: model.mode(),
            expected: mode,
        });
    }
    Ok(model)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelSet {
    pub full: Option<RecognizerModel>,
    pub occluded: Option<RecognizerModel>,
}

impl ModelSet {
    pub fn get(&self, mode: Mode) -> Option<&RecognizerModel> {
        match mode {
            Mode::FullFace => self.full.as_ref(),
            Mode::Occluded => self.occluded.as_ref(),
        }
    }

    pub fn slot(&mut self, mode: Mode) -> &mut Option<RecognizerModel> {
        match mode {
            Mode::FullFace => &mut self.full,
            Mode::Occluded => &mut self.occluded,
        }
    }

    /// Loads whichever of `full.lbph` / `occluded.lbph` exist in `dir`.
    pub fn load(dir: &Path) -> Result<ModelSet, ModelFileError> {
        let mut set = ModelSet::default();
        for mode in [Mode::FullFace, Mode::Occluded] {
            let path = model_file(dir, mode);
            if path.exists() {
                *set.slot(mode) = Some(read_model(&path, mode)?);
            }
        }
        if set.full.is_none() && set.occluded.is_none() {
            return Err(ModelFileError::Empty(dir.into()));
        }
        Ok(set)
    }

    pub fn save(&self, dir: &Path) -> Result<(), ModelFileError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| ModelFileError::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        for mode in [Mode::FullFace, Mode::Occluded] {
            if let Some(model) = self.get(mode) {
                let path = model_file(dir, mode);
                fs::write(&path, save_model(model)).map_err(io(&path))?;
            }
        }
        Ok(())
    }
}
