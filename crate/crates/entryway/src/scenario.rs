//! Timestamped event scripts for the virtual rig.
//!
//! ```text
//! # Nazrin arrives and types the PIN
//! pin Nazrin 7816
//! @0     camera frames/nazrin-01.pgm
//! @0     motion
//! @3     keys 7816
//! @8.5   tick
//! ```
//!
//! Timed lines are `@<seconds> <event>`; the only untimed directive is
//! `pin <user> <pin>`. Lines starting with `#` are comments. Events with equal
//! timestamps keep file order.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use entryway_core::controller::{Event, Key, Millis, Outcome};
use entryway_core::Mode;

use crate::annotations::{self, AnnotationDetector};
use crate::pgm;
use crate::rig::{run_devices, FrameRecognizer, Rig, RigInput, Trace};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Annotation(#[from] crate::annotations::AnnotationError),
    #[error("loading frame {path}: {source}")]
    Frame {
        path: PathBuf,
        source: pgm::PgmError,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    /// Load an image file and place it in front of the camera.
    Camera(String),
    Event(Event),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Scenario {
    pub pins: BTreeMap<String, String>,
    pub steps: Vec<(Millis, Step)>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        let mut scenario = Scenario::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let err = |reason: String| ScenarioError::Parse { line, reason };
            let content = raw.trim();
            // `#` is also a keypad key, so only whole-line comments exist.
            if content.starts_with('#') {
                continue;
            }
            if content.is_empty() {
                continue;
            }
            let mut words = content.split_whitespace();
            let head = words.next().unwrap_or_default();
            if let Some(secs) = head.strip_prefix('@') {
                let at: Millis = secs.parse().map_err(|e| err(format!("{e}")))?;
                let rest: Vec<&str> = words.collect();
                for step in parse_step(&rest).map_err(err)? {
                    scenario.steps.push((at, step));
                }
            } else if head == "pin" {
                let args: Vec<&str> = words.collect();
                let [user, pin] = args[..] else {
                    return Err(err("usage: pin <user> <pin>".into()));
                };
                scenario.pins.insert(user.into(), pin.into());
            } else {
                return Err(err(format!(
                    "expected `@<seconds> <event>` or `pin`, got {head:?}"
                )));
            }
        }
        scenario.steps.sort_by_key(|(at, _)| *at);
        Ok(scenario)
    }

    /// Landmarks for every camera frame, read from `.boxes` sidecars next to
    /// the images and keyed by the name used in the script.
    pub fn camera_landmarks(&self, base: &Path) -> Result<AnnotationDetector, ScenarioError> {
        let mut detector = AnnotationDetector::new();
        for (_, step) in &self.steps {
            if let Step::Camera(name) = step {
                detector.insert(name.clone(), annotations::read_sidecar(&base.join(name))?);
            }
        }
        Ok(detector)
    }

    /// Runs against a fresh rig. Camera paths resolve against `base`.
    pub fn run(
        &self,
        rig: &mut Rig,
        base: &Path,
        recognizer: &dyn FrameRecognizer,
    ) -> Result<Trace, ScenarioError> {
        let mut inputs = Vec::with_capacity(self.steps.len());
        for (at, step) in &self.steps {
            match step {
                Step::Camera(name) => {
                    if rig.frame(name).is_none() {
                        let path = base.join(name);
                        let img = pgm::read(&path)
                            .map_err(|source| ScenarioError::Frame { path, source })?;
                        rig.store_frame(name.clone(), img);
                    }
                    inputs.push((*at, RigInput::Camera(name.clone())));
                }
                Step::Event(e) => inputs.push((*at, RigInput::Event(e.clone()))),
            }
        }
        Ok(run_devices(rig, inputs, &self.pins, recognizer))
    }
}

fn parse_step(words: &[&str]) -> Result<Vec<Step>, String> {
    let one = |e: Event| Ok(vec![Step::Event(e)]);
    match words {
        ["camera", path] => Ok(vec![Step::Camera((*path).into())]),
        ["keys", seq] => seq
            .chars()
            .map(|c| {
                Key::from_char(c)
                    .map(|key| Step::Event(Event::KeyPressed { key }))
                    .ok_or_else(|| format!("bad key {c:?}"))
            })
            .collect(),
        _ => parse_event(words).and_then(one),
    }
}

/// Parses the trace form of an event (`motion`, `key 7`, `admin mode2`, ...).
pub fn parse_event(words: &[&str]) -> Result<Event, String> {
    let confidence = |s: &str| {
        s.parse::<f64>()
            .ok()
            .filter(|c| c.is_finite() && *c >= 0.0)
            .ok_or_else(|| format!("bad confidence {s:?}"))
    };
    let (words, frame) = match words.split_last() {
        Some((last, rest)) if last.starts_with("frame=") => (rest, Some(last[6..].to_string())),
        _ => (words, None),
    };
    let done = |outcome| {
        Ok(Event::RecognitionDone {
            outcome,
            frame: frame.clone(),
        })
    };
    if frame.is_some() && !matches!(words.first(), Some(&"recognized" | &"unknown" | &"noface")) {
        return Err("frame= only applies to recognition results".into());
    }
    match words {
        ["motion"] => Ok(Event::MotionDetected),
        ["frame", id] => Ok(Event::FrameAvailable {
            frame: (*id).into(),
        }),
        ["noframe"] => Ok(Event::NoFrame),
        ["recognized", label, c] => done(Outcome::Match {
            label: (*label).into(),
            confidence: confidence(c)?,
        }),
        ["unknown"] => done(Outcome::Unknown { confidence: None }),
        ["unknown", c] => done(Outcome::Unknown {
            confidence: Some(confidence(c)?),
        }),
        ["noface"] => done(Outcome::NoFace),
        ["key", k] => {
            let mut chars = k.chars();
            match (chars.next().and_then(Key::from_char), chars.next()) {
                (Some(key), None) => Ok(Event::KeyPressed { key }),
                _ => Err(format!("bad key {k:?}")),
            }
        }
        ["tick"] => Ok(Event::Tick),
        ["admin", "unlock"] => Ok(Event::AdminUnlock),
        ["admin", "lock"] => Ok(Event::AdminLock),
        ["admin", "mode1"] => Ok(Event::AdminSetMode {
            mode: Mode::FullFace,
        }),
        ["admin", "mode2"] => Ok(Event::AdminSetMode {
            mode: Mode::Occluded,
        }),
        ["admin", "register", name] => Ok(Event::AdminRegisterStranger {
            name: (*name).into(),
        }),
        [] => Err("missing event".into()),
        _ => Err(format!("unknown event {:?}", words.join(" "))),
    }
}
