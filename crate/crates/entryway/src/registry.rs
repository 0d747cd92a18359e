//! Users, PINs, enrollment datasets and the two trained models, all kept
//! under one root directory:
//!
//! ```text
//! <root>/users.json                  store document (owner-only permissions)
//! <root>/datasets/<user>/0000.pgm    enrolled frames, .boxes sidecars alongside
//! <root>/datasets/<user>/manifest.tsv
//! <root>/models/full.lbph
//! <root>/models/occluded.lbph
//! <root>/archive/<user>-<ms>/         datasets of deleted users
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use entryway_core::command::{valid_pin, valid_user_id};
use entryway_core::controller::PinCheck;
use entryway_core::lbph::{load_model, save_model, CodecError};
use entryway_core::pipeline::crop_for_mode;
use entryway_core::{Detector, Frame, GrayImage, LandmarkSet, LbphError, Mode, RecognizerModel};

use crate::annotations::{self, AnnotationDetector, AnnotationError};
use crate::models::{empty_model, model_file};
use crate::pgm::{self, PgmError};

pub const STORE_FILE: &str = "users.json";
pub const STORE_VERSION: u32 = 1;
pub const DEFAULT_TARGET: usize = 150;
const DATASETS: &str = "datasets";
const MANIFEST: &str = "manifest.tsv";
const MANIFEST_HEADER: &str = "index\texpression";

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("user id {0:?} must be nonempty and contain no whitespace")]
    InvalidUserId(String),
    #[error("user {0:?} already exists")]
    Duplicate(String),
    #[error("no user {0:?}")]
    UnknownUser(String),
    #[error("PIN must be exactly 4 digits")]
    MalformedPin,
    #[error("enrollment for {user} is {state}, not collecting")]
    SessionState { user: String, state: SessionState },
    #[error("enrollment for {user} has {collected} of {target} frames")]
    NotEnoughFrames {
        user: String,
        collected: usize,
        target: usize,
    },
    #[error(
        "{mode} training skipped {skipped} of {total} frames for {user} (first problem: {first})"
    )]
    TooManySkipped {
        user: String,
        mode: Mode,
        skipped: usize,
        total: usize,
        first: String,
    },
    #[error("store {path}: unsupported version {found}")]
    StoreVersion { path: PathBuf, found: u32 },
    #[error("store {path}: {source}")]
    StoreFormat {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("model {path}: {source}")]
    Model { path: PathBuf, source: CodecError },
    #[error("model {0} was trained for the other mode")]
    ModelMode(PathBuf),
    #[error(transparent)]
    Lbph(#[from] LbphError),
    #[error(transparent)]
    Pgm(#[from] PgmError),
    #[error(transparent)]
    Annotation(#[from] AnnotationError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("simulated crash before rename")]
    InjectedCrash,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> RegistryError + '_ {
    move |source| RegistryError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRecord {
    pub user_id: String,
    pub display_name: String,
    /// `None` until a PIN is set; such a user can never pass the PIN step.
    pub pin: Option<String>,
    pub enrolled_frames: u32,
    /// Unix milliseconds.
    pub created_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StoreDoc {
    version: u32,
    dataset_root: PathBuf,
    users: BTreeMap<String, UserRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expression {
    Normal,
    Happy,
    Sad,
}

impl Expression {
    pub fn as_str(self) -> &'static str {
        match self {
            Expression::Normal => "normal",
            Expression::Happy => "happy",
            Expression::Sad => "sad",
        }
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Expression {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "normal" => Ok(Expression::Normal),
            "happy" => Ok(Expression::Happy),
            "sad" => Ok(Expression::Sad),
            _ => Err(format!("unknown expression {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionState {
    Collecting,
    Finalized,
    Aborted,
}

impl fmt::Display for SessionState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SessionState::Collecting => "collecting",
            SessionState::Finalized => "finalized",
            SessionState::Aborted => "aborted",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnrolledFrame {
    pub index: usize,
    pub path: PathBuf,
    pub expression: Option<Expression>,
}

/// Frames collected for one user; nothing reaches the models until
/// [`Registry::finalize_enrollment`].
#[derive(Debug)]
pub struct EnrollmentSession {
    user_id: String,
    target: usize,
    first_index: usize,
    collected: Vec<EnrolledFrame>,
    state: SessionState,
}

impl EnrollmentSession {
    pub fn user_id(&self) -> &str {
        &self.user_id
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn collected(&self) -> &[EnrolledFrame] {
        &self.collected
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn ready(&self) -> bool {
        self.state == SessionState::Collecting && self.collected.len() >= self.target
    }

    fn require_collecting(&self) -> Result<(), RegistryError> {
        if self.state == SessionState::Collecting {
            Ok(())
        } else {
            Err(RegistryError::SessionState {
                user: self.user_id.clone(),
                state: self.state,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FinalizeReport {
    pub user_id: String,
    pub frames: usize,
    pub full_entries: usize,
    pub occluded_entries: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemovalReport {
    pub user_id: String,
    pub full_entries_removed: usize,
    pub occluded_entries_removed: usize,
    pub archived_to: Option<PathBuf>,
}

pub struct Registry {
    root: PathBuf,
    doc: StoreDoc,
    full: RecognizerModel,
    occluded: RecognizerModel,
    crash_before_rename: bool,
}

impl fmt::Debug for Registry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registry")
            .field("root", &self.root)
            .field("users", &self.doc.users.len())
            .field("full_entries", &self.full.len())
            .field("occluded_entries", &self.occluded.len())
            .finish()
    }
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

/// Writes `bytes` beside `path` and renames over it, so readers only ever
/// see a complete file.
fn write_atomic(path: &Path, bytes: &[u8], crash_before_rename: bool) -> Result<(), RegistryError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut opts = fs::OpenOptions::new();
        opts.write(true).create(true).truncate(true);
        #[cfg(unix)]
        {
            use std::os::unix::fs::OpenOptionsExt;
            opts.mode(0o600);
        }
        let mut f = opts.open(&tmp).map_err(io_err(&tmp))?;
        f.write_all(bytes).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
    }
    if crash_before_rename {
        return Err(RegistryError::InjectedCrash);
    }
    fs::rename(&tmp, path).map_err(io_err(path))
}

impl Registry {
    /// Opens the registry at `root`, creating an empty one if there is none.
    pub fn open(root: impl Into<PathBuf>) -> Result<Registry, RegistryError> {
        let root = root.into();
        fs::create_dir_all(root.join("models")).map_err(io_err(&root))?;
        let store = root.join(STORE_FILE);
        let doc = match fs::read(&store) {
            Ok(bytes) => {
                let doc: StoreDoc = serde_json::from_slice(&bytes).map_err(|source| {
                    RegistryError::StoreFormat {
                        path: store.clone(),
                        source,
                    }
                })?;
                if doc.version != STORE_VERSION {
                    return Err(RegistryError::StoreVersion {
                        path: store,
                        found: doc.version,
                    });
                }
                doc
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => StoreDoc {
                version: STORE_VERSION,
                dataset_root: PathBuf::from(DATASETS),
                users: BTreeMap::new(),
            },
            Err(e) => return Err(io_err(&store)(e)),
        };
        let mut reg = Registry {
            full: empty_model(Mode::FullFace),
            occluded: empty_model(Mode::Occluded),
            root,
            doc,
            crash_before_rename: false,
        };
        for mode in [Mode::FullFace, Mode::Occluded] {
            let path = reg.model_path(mode);
            match fs::read(&path) {
                Ok(bytes) => {
                    let model = load_model(&bytes).map_err(|source| RegistryError::Model {
                        path: path.clone(),
                        source,
                    })?;
                    if model.mode() != mode {
                        return Err(RegistryError::ModelMode(path));
                    }
                    *reg.model_mut(mode) = model;
                }
                Err(e) if e.kind() == io::ErrorKind::NotFound => {}
                Err(e) => return Err(io_err(&path)(e)),
            }
        }
        Ok(reg)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn store_path(&self) -> PathBuf {
        self.root.join(STORE_FILE)
    }

    pub fn model_path(&self, mode: Mode) -> PathBuf {
        model_file(&self.root.join("models"), mode)
    }

    pub fn dataset_root(&self) -> PathBuf {
        self.root.join(&self.doc.dataset_root)
    }

    pub fn user_dir(&self, user_id: &str) -> PathBuf {
        self.dataset_root().join(user_id)
    }

    pub fn model(&self, mode: Mode) -> &RecognizerModel {
        match mode {
            Mode::FullFace => &self.full,
            Mode::Occluded => &self.occluded,
        }
    }

    fn model_mut(&mut self, mode: Mode) -> &mut RecognizerModel {
        match mode {
            Mode::FullFace => &mut self.full,
            Mode::Occluded => &mut self.occluded,
        }
    }

    pub fn users(&self) -> impl Iterator<Item = &UserRecord> {
        self.doc.users.values()
    }

    pub fn user(&self, user_id: &str) -> Option<&UserRecord> {
        self.doc.users.get(user_id)
    }

    /// Makes the next store write stop after the temp file, as a crash would.
    #[doc(hidden)]
    pub fn inject_crash_before_rename(&mut self, on: bool) {
        self.crash_before_rename = on;
    }

    fn persist_store(&self, doc: &StoreDoc) -> Result<(), RegistryError> {
        let mut bytes = serde_json::to_vec_pretty(doc).expect("store document serializes");
        bytes.push(b'\n');
        write_atomic(&self.store_path(), &bytes, self.crash_before_rename)
    }

    /// Persists `doc` and only then adopts it in memory.
    fn commit(&mut self, doc: StoreDoc) -> Result<(), RegistryError> {
        self.persist_store(&doc)?;
        self.doc = doc;
        Ok(())
    }

    fn persist_model(&self, mode: Mode) -> Result<(), RegistryError> {
        write_atomic(&self.model_path(mode), &save_model(self.model(mode)), false)
    }

    fn known(&self, user_id: &str) -> Result<&UserRecord, RegistryError> {
        self.doc
            .users
            .get(user_id)
            .ok_or_else(|| RegistryError::UnknownUser(user_id.into()))
    }

    pub fn add_user(
        &mut self,
        user_id: &str,
        display_name: &str,
    ) -> Result<UserRecord, RegistryError> {
        if !valid_user_id(user_id) {
            return Err(RegistryError::InvalidUserId(user_id.into()));
        }
        if self.doc.users.contains_key(user_id) {
            return Err(RegistryError::Duplicate(user_id.into()));
        }
        let record = UserRecord {
            user_id: user_id.into(),
            display_name: display_name.into(),
            pin: None,
            enrolled_frames: 0,
            created_at: now_ms(),
        };
        let mut doc = self.doc.clone();
        doc.users.insert(user_id.into(), record.clone());
        self.commit(doc)?;
        Ok(record)
    }

    pub fn set_pin(&mut self, user_id: &str, pin: &str) -> Result<(), RegistryError> {
        self.known(user_id)?;
        if !valid_pin(pin) {
            return Err(RegistryError::MalformedPin);
        }
        let mut doc = self.doc.clone();
        doc.users.get_mut(user_id).expect("checked above").pin = Some(pin.into());
        self.commit(doc)
    }

    /// Exact byte comparison against the stored PIN.
    pub fn verify_pin(&self, user_id: &str, candidate: &str) -> Result<bool, RegistryError> {
        let record = self.known(user_id)?;
        Ok(record
            .pin
            .as_deref()
            .is_some_and(|pin| pin.as_bytes() == candidate.as_bytes()))
    }

    /// `(user_id, pin)` for every user that has one, in id order.
    pub fn pins(&self) -> Vec<(String, String)> {
        self.users()
            .filter_map(|u| u.pin.clone().map(|p| (u.user_id.clone(), p)))
            .collect()
    }

    pub fn start_enrollment(
        &self,
        user_id: &str,
        target: usize,
    ) -> Result<EnrollmentSession, RegistryError> {
        let record = self.known(user_id)?;
        Ok(EnrollmentSession {
            user_id: user_id.into(),
            target: target.max(1),
            first_index: record.enrolled_frames as usize,
            collected: Vec::new(),
            state: SessionState::Collecting,
        })
    }

    /// Stores a frame (and its landmarks, if known) in the user's dataset.
    pub fn enroll_frame<'s>(
        &self,
        session: &'s mut EnrollmentSession,
        image: &GrayImage,
        landmarks: Option<&LandmarkSet>,
        expression: Option<Expression>,
    ) -> Result<&'s EnrolledFrame, RegistryError> {
        session.require_collecting()?;
        self.known(&session.user_id)?;
        let dir = self.user_dir(&session.user_id);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let index = session.first_index + session.collected.len();
        let path = dir.join(format!("{index:04}.pgm"));
        pgm::write(&path, image).map_err(io_err(&path))?;
        let sidecar = annotations::sidecar_path(&path);
        match landmarks {
            Some(set) if !set.is_empty() => {
                annotations::write_sidecar(&path, set).map_err(io_err(&sidecar))?
            }
            _ => match fs::remove_file(&sidecar) {
                Err(e) if e.kind() != io::ErrorKind::NotFound => return Err(io_err(&sidecar)(e)),
                _ => {}
            },
        }
        append_manifest(&dir, index, expression)?;
        session.collected.push(EnrolledFrame {
            index,
            path,
            expression,
        });
        Ok(session.collected.last().expect("just pushed"))
    }

    /// Drops the session's frames and manifest lines.
    pub fn abort_enrollment(&self, session: &mut EnrollmentSession) -> Result<(), RegistryError> {
        session.require_collecting()?;
        self.rollback(session)?;
        session.state = SessionState::Aborted;
        Ok(())
    }

    fn rollback(&self, session: &EnrollmentSession) -> Result<(), RegistryError> {
        for frame in &session.collected {
            for p in [frame.path.clone(), annotations::sidecar_path(&frame.path)] {
                match fs::remove_file(&p) {
                    Err(e) if e.kind() != io::ErrorKind::NotFound => return Err(io_err(&p)(e)),
                    _ => {}
                }
            }
        }
        truncate_manifest(&self.user_dir(&session.user_id), session.first_index)
    }

    /// Finalizes using the landmark sidecars written during enrollment.
    pub fn finalize_with_sidecars(
        &mut self,
        session: &mut EnrollmentSession,
    ) -> Result<FinalizeReport, RegistryError> {
        let detector = AnnotationDetector::from_images(session.collected.iter().map(|f| &f.path))?;
        self.finalize_enrollment(session, &detector)
    }

    /// Trains both models on the session's frames. Frames the detector finds
    /// no usable landmarks for are skipped; if either mode loses more than
    /// half the frames nothing is trained and the session is rolled back.
    pub fn finalize_enrollment(
        &mut self,
        session: &mut EnrollmentSession,
        detector: &dyn Detector,
    ) -> Result<FinalizeReport, RegistryError> {
        session.require_collecting()?;
        if session.collected.len() < session.target {
            return Err(RegistryError::NotEnoughFrames {
                user: session.user_id.clone(),
                collected: session.collected.len(),
                target: session.target,
            });
        }
        self.known(&session.user_id)?;
        let total = session.collected.len();
        let mut deltas = Vec::new();
        for mode in [Mode::FullFace, Mode::Occluded] {
            let base = self.model(mode);
            let mut delta = RecognizerModel::empty(*base.params(), base.input_size(), mode)?;
            let mut skipped = 0;
            let mut first = None;
            for frame in &session.collected {
                let image = pgm::read(&frame.path)?;
                let id = frame.path.to_string_lossy();
                let landmarks = detector.detect(&Frame::new(&id, &image));
                match crop_for_mode(mode, &image, &landmarks, delta.input_size()) {
                    Ok((crop, _)) => delta.add_sample(session.user_id.as_str(), &crop)?,
                    Err(e) => {
                        skipped += 1;
                        first.get_or_insert_with(|| format!("{}: {e}", frame.path.display()));
                    }
                }
            }
            if skipped * 2 > total {
                let err = RegistryError::TooManySkipped {
                    user: session.user_id.clone(),
                    mode,
                    skipped,
                    total,
                    first: first.unwrap_or_default(),
                };
                self.rollback(session)?;
                session.state = SessionState::Aborted;
                return Err(err);
            }
            if skipped > 0 {
                log::warn!(
                    "{mode} training skipped {skipped} of {total} frames for {}",
                    session.user_id
                );
            }
            deltas.push(delta);
        }
        let report = FinalizeReport {
            user_id: session.user_id.clone(),
            frames: total,
            full_entries: deltas[0].len(),
            occluded_entries: deltas[1].len(),
        };
        for (mode, delta) in [Mode::FullFace, Mode::Occluded].into_iter().zip(deltas) {
            self.model_mut(mode).extend_from(delta)?;
            self.persist_model(mode)?;
        }
        let mut doc = self.doc.clone();
        doc.users
            .get_mut(&session.user_id)
            .expect("checked above")
            .enrolled_frames += total as u32;
        self.commit(doc)?;
        session.state = SessionState::Finalized;
        Ok(report)
    }

    /// Removes the user and their model entries; the dataset is archived.
    pub fn delete_user(&mut self, user_id: &str) -> Result<RemovalReport, RegistryError> {
        self.known(user_id)?;
        let full_removed = self.full.remove_label(user_id);
        let occluded_removed = self.occluded.remove_label(user_id);
        self.persist_model(Mode::FullFace)?;
        self.persist_model(Mode::Occluded)?;
        let mut doc = self.doc.clone();
        doc.users.remove(user_id);
        self.commit(doc)?;
        let dir = self.user_dir(user_id);
        let archived_to = if dir.exists() {
            let archive = self.root.join("archive");
            fs::create_dir_all(&archive).map_err(io_err(&archive))?;
            let dest = archive.join(format!("{user_id}-{}", now_ms()));
            fs::rename(&dir, &dest).map_err(io_err(&dir))?;
            Some(dest)
        } else {
            None
        };
        Ok(RemovalReport {
            user_id: user_id.into(),
            full_entries_removed: full_removed,
            occluded_entries_removed: occluded_removed,
            archived_to,
        })
    }

    /// Manifest rows recorded for a user, as `(index, expression)`.
    pub fn manifest(
        &self,
        user_id: &str,
    ) -> Result<Vec<(usize, Option<Expression>)>, RegistryError> {
        read_manifest(&self.user_dir(user_id))
    }
}

impl PinCheck for Registry {
    fn check_pin(&self, user_id: &str, candidate: &str) -> bool {
        self.verify_pin(user_id, candidate).unwrap_or(false)
    }
}

fn read_manifest(dir: &Path) -> Result<Vec<(usize, Option<Expression>)>, RegistryError> {
    let path = dir.join(MANIFEST);
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(&path)(e)),
    };
    let bad = |line: &str| RegistryError::Io {
        path: path.clone(),
        source: io::Error::new(
            io::ErrorKind::InvalidData,
            format!("bad manifest line {line:?}"),
        ),
    };
    text.lines()
        .skip(1)
        .filter(|l| !l.is_empty())
        .map(|line| {
            let (idx, expr) = line.split_once('\t').ok_or_else(|| bad(line))?;
            let idx = idx.parse().map_err(|_| bad(line))?;
            let expr = match expr {
                "-" => None,
                e => Some(e.parse().map_err(|_| bad(line))?),
            };
            Ok((idx, expr))
        })
        .collect()
}

fn append_manifest(
    dir: &Path,
    index: usize,
    expression: Option<Expression>,
) -> Result<(), RegistryError> {
    let path = dir.join(MANIFEST);
    let fresh = !path.exists();
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map_err(io_err(&path))?;
    let mut line = String::new();
    if fresh {
        line.push_str(MANIFEST_HEADER);
        line.push('\n');
    }
    let tag = expression.map_or("-", Expression::as_str);
    line.push_str(&format!("{index}\t{tag}\n"));
    f.write_all(line.as_bytes()).map_err(io_err(&path))
}

fn truncate_manifest(dir: &Path, keep: usize) -> Result<(), RegistryError> {
    let rows = read_manifest(dir)?;
    let path = dir.join(MANIFEST);
    if rows.is_empty() {
        return Ok(());
    }
    let mut text = format!("{MANIFEST_HEADER}\n");
    for (idx, expr) in rows.into_iter().filter(|(i, _)| *i < keep) {
        text.push_str(&format!(
            "{idx}\t{}\n",
            expr.map_or("-", Expression::as_str)
        ));
    }
    fs::write(&path, text).map_err(io_err(&path))
}
