//! Two-factor access control as a pure state machine.
//!
//! [`step`] maps `(state, event, now)` to a new state and a list of
//! [`Effect`]s for the device rig to carry out. It never fails: pairs with no
//! meaning in the current phase are reported as no-ops and leave the state
//! untouched. The door only opens from `AwaitPin` on a correct PIN (which is
//! only reachable through an accepted face match) or on an admin unlock.

mod time;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

pub use time::{Millis, ParseMillisError};

use crate::lbph::Mode;

/// Number of digits in a door PIN.
pub const PIN_LEN: usize = 4;
/// Width of the 1602 character display.
pub const LCD_WIDTH: usize = 16;

pub const TEMP_PHOTO: &str = "temp.jpg";
pub const STRANGER_PHOTO: &str = "stranger.jpg";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("accept threshold must be positive")]
    Threshold,
    #[error("PIN timeout must be positive")]
    Timeout,
    #[error("at least one PIN attempt must be allowed")]
    Attempts,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    /// Matches strictly below this distance are accepted.
    pub accept_threshold: f64,
    pub pin_timeout: Millis,
    pub max_attempts: u32,
    /// Mode active at start-up.
    pub mode: Mode,
    pub relock_after: Millis,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            accept_threshold: 70.0,
            pin_timeout: Millis::from_secs(30),
            max_attempts: 3,
            mode: Mode::FullFace,
            relock_after: Millis::from_secs(5),
        }
    }
}

impl Config {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.accept_threshold > 0.0) {
            return Err(ConfigError::Threshold);
        }
        if self.pin_timeout == Millis::ZERO {
            return Err(ConfigError::Timeout);
        }
        if self.max_attempts == 0 {
            return Err(ConfigError::Attempts);
        }
        Ok(())
    }

    pub fn accepts(&self, confidence: f64) -> bool {
        confidence < self.accept_threshold
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Phase {
    Idle,
    Recognizing,
    AwaitPin {
        user_id: String,
        attempts_used: u32,
        deadline: Millis,
        entered: String,
    },
    Unlocked {
        until: Millis,
    },
    StrangerAlert {
        photo_ref: String,
    },
}

impl Phase {
    pub fn name(&self) -> &'static str {
        match self {
            Phase::Idle => "Idle",
            Phase::Recognizing => "Recognizing",
            Phase::AwaitPin { .. } => "AwaitPin",
            Phase::Unlocked { .. } => "Unlocked",
            Phase::StrangerAlert { .. } => "StrangerAlert",
        }
    }
}

/// Everything the machine remembers between events.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct State {
    pub phase: Phase,
    pub mode: Mode,
}

impl State {
    pub fn new(config: &Config) -> Self {
        Self {
            phase: Phase::Idle,
            mode: config.mode,
        }
    }

    pub fn locked(&self) -> bool {
        !matches!(self.phase, Phase::Unlocked { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Key {
    Digit(u8),
    /// `*` clears the entry.
    Star,
    /// `#` submits the entry early.
    Hash,
}

impl Key {
    pub fn from_char(c: char) -> Option<Key> {
        match c {
            '0'..='9' => Some(Key::Digit(c as u8 - b'0')),
            '*' => Some(Key::Star),
            '#' => Some(Key::Hash),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Key::Digit(d) => char::from(b'0' + d),
            Key::Star => '*',
            Key::Hash => '#',
        }
    }
}

/// What the recognizer concluded about a frame.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Match { label: String, confidence: f64 },
    Unknown { confidence: Option<f64> },
    NoFace,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    MotionDetected,
    FrameAvailable {
        frame: String,
    },
    /// The camera had nothing to give when a capture was requested.
    NoFrame,
    RecognitionDone {
        outcome: Outcome,
        frame: Option<String>,
    },
    KeyPressed {
        key: Key,
    },
    Tick,
    AdminUnlock,
    AdminLock,
    AdminSetMode {
        mode: Mode,
    },
    AdminRegisterStranger {
        name: String,
    },
}

impl Event {
    pub fn is_admin(&self) -> bool {
        matches!(
            self,
            Event::AdminUnlock
                | Event::AdminLock
                | Event::AdminSetMode { .. }
                | Event::AdminRegisterStranger { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Notification {
    UnknownUser { photo: String, at: Millis },
    DoorUnlocked { user_id: String, at: Millis },
    EnrollmentDone { user_id: String, frames: u32 },
    CommandAck { text: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuzzPattern {
    Grant,
    Deny,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Effect {
    CaptureFrame,
    LcdShow {
        line1: String,
        line2: String,
    },
    LockSet {
        locked: bool,
    },
    Buzz(BuzzPattern),
    /// Store `frame` under `name`; `archive`, when set, is a second copy
    /// that later photos will not overwrite.
    SavePhoto {
        name: String,
        archive: Option<String>,
        frame: String,
    },
    Notify(Notification),
    StartRecognition {
        mode: Mode,
        frame: String,
    },
}

impl Effect {
    /// LCD text, hard-truncated to the display width.
    pub fn lcd(line1: &str, line2: &str) -> Effect {
        Effect::LcdShow {
            line1: truncate_lcd(line1),
            line2: truncate_lcd(line2),
        }
    }
}

fn truncate_lcd(s: &str) -> String {
    s.chars().take(LCD_WIDTH).collect()
}

/// PIN lookup used by the `AwaitPin` phase.
pub trait PinCheck {
    fn check_pin(&self, user_id: &str, candidate: &str) -> bool;
}

impl PinCheck for BTreeMap<String, String> {
    fn check_pin(&self, user_id: &str, candidate: &str) -> bool {
        self.get(user_id)
            .is_some_and(|pin| pin.as_bytes() == candidate.as_bytes())
    }
}

impl<P: PinCheck + ?Sized> PinCheck for &P {
    fn check_pin(&self, user_id: &str, candidate: &str) -> bool {
        (**self).check_pin(user_id, candidate)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: State,
    pub effects: Vec<Effect>,
    /// The event meant nothing in the previous phase.
    pub noop: bool,
}

impl Transition {
    fn to(state: State, effects: Vec<Effect>) -> Self {
        Self {
            state,
            effects,
            noop: false,
        }
    }

    fn noop(state: &State) -> Self {
        Self {
            state: state.clone(),
            effects: Vec::new(),
            noop: true,
        }
    }
}

fn mode_lcd(mode: Mode) -> Effect {
    match mode {
        Mode::FullFace => Effect::lcd("Mode 1", "Full face"),
        Mode::Occluded => Effect::lcd("Mode 2", "Occluded face"),
    }
}

fn stranger_archive_name(now: Millis) -> String {
    format!("stranger-{}.jpg", now.0)
}

/// Advances the machine by one event observed at `now`.
pub fn step(
    state: &State,
    event: &Event,
    config: &Config,
    pins: &dyn PinCheck,
    now: Millis,
) -> Transition {
    let with_phase = |phase: Phase| State {
        phase,
        mode: state.mode,
    };

    // Remote control overrides whatever the door is doing.
    match event {
        Event::AdminUnlock => {
            return Transition::to(
                with_phase(Phase::Unlocked {
                    until: now + config.relock_after,
                }),
                vec![
                    Effect::LockSet { locked: false },
                    Effect::lcd("Remote unlock", ""),
                ],
            );
        }
        Event::AdminLock => {
            return Transition::to(
                with_phase(Phase::Idle),
                vec![
                    Effect::LockSet { locked: true },
                    Effect::lcd("Door locked", ""),
                ],
            );
        }
        Event::AdminSetMode { mode } => {
            return Transition::to(
                State {
                    phase: state.phase.clone(),
                    mode: *mode,
                },
                vec![mode_lcd(*mode)],
            );
        }
        _ => {}
    }

    match (&state.phase, event) {
        (Phase::Idle, Event::MotionDetected)
        | (Phase::Recognizing, Event::MotionDetected)
        | (Phase::StrangerAlert { .. }, Event::MotionDetected) => Transition::to(
            with_phase(Phase::Recognizing),
            vec![
                Effect::CaptureFrame,
                Effect::lcd("Scanning face", "Look at camera"),
            ],
        ),

        (Phase::Recognizing, Event::NoFrame) => Transition::to(
            with_phase(Phase::Recognizing),
            vec![Effect::lcd("No camera frame", "Look at camera")],
        ),

        (Phase::Recognizing, Event::FrameAvailable { frame }) => Transition::to(
            with_phase(Phase::Recognizing),
            vec![Effect::StartRecognition {
                mode: state.mode,
                frame: frame.clone(),
            }],
        ),

        (Phase::Recognizing, Event::RecognitionDone { outcome, frame }) => {
            recognition_done(state, outcome, frame.as_deref(), config, now)
        }

        (Phase::AwaitPin { deadline, .. }, _) if now > *deadline => Transition::to(
            with_phase(Phase::Recognizing),
            vec![Effect::lcd("PIN timeout", "Face scan again")],
        ),

        (
            Phase::AwaitPin {
                user_id,
                attempts_used,
                deadline,
                entered,
            },
            Event::KeyPressed { key },
        ) => {
            let mut entered = entered.clone();
            match key {
                Key::Digit(d) => entered.push(char::from(b'0' + d)),
                Key::Star => {
                    return Transition::to(
                        with_phase(Phase::AwaitPin {
                            user_id: user_id.clone(),
                            attempts_used: *attempts_used,
                            deadline: *deadline,
                            entered: String::new(),
                        }),
                        vec![Effect::lcd("Enter PIN:", "")],
                    );
                }
                Key::Hash if entered.is_empty() => return Transition::noop(state),
                Key::Hash => {}
            }
            if entered.len() < PIN_LEN && *key != Key::Hash {
                let masked = "*".repeat(entered.len());
                return Transition::to(
                    with_phase(Phase::AwaitPin {
                        user_id: user_id.clone(),
                        attempts_used: *attempts_used,
                        deadline: *deadline,
                        entered,
                    }),
                    vec![Effect::lcd("Enter PIN:", &masked)],
                );
            }
            submit_pin(
                state,
                user_id,
                *attempts_used,
                *deadline,
                &entered,
                config,
                pins,
                now,
            )
        }

        (Phase::Unlocked { until }, Event::Tick) if now > *until => Transition::to(
            with_phase(Phase::Idle),
            vec![
                Effect::LockSet { locked: true },
                Effect::lcd("Door locked", ""),
            ],
        ),

        (Phase::StrangerAlert { .. }, Event::AdminRegisterStranger { name }) => Transition::to(
            with_phase(Phase::Idle),
            vec![Effect::Notify(Notification::CommandAck {
                text: format!("Registering {name}"),
            })],
        ),

        // Time passing with nothing due is routine, not an unexpected pair.
        (_, Event::Tick) => Transition::to(state.clone(), Vec::new()),

        _ => Transition::noop(state),
    }
}

fn recognition_done(
    state: &State,
    outcome: &Outcome,
    frame: Option<&str>,
    config: &Config,
    now: Millis,
) -> Transition {
    let with_phase = |phase: Phase| State {
        phase,
        mode: state.mode,
    };
    let frame = frame.unwrap_or("-").to_string();
    match outcome {
        Outcome::NoFace => Transition::to(
            with_phase(Phase::Idle),
            vec![Effect::lcd("No face found", "Try again")],
        ),
        Outcome::Match { label, confidence } if config.accepts(*confidence) => Transition::to(
            with_phase(Phase::AwaitPin {
                user_id: label.clone(),
                attempts_used: 0,
                deadline: now + config.pin_timeout,
                entered: String::new(),
            }),
            vec![
                Effect::lcd("Face recognised", "Enter PIN:"),
                Effect::SavePhoto {
                    name: TEMP_PHOTO.into(),
                    archive: None,
                    frame,
                },
            ],
        ),
        Outcome::Match { .. } | Outcome::Unknown { .. } => {
            let archive = stranger_archive_name(now);
            Transition::to(
                with_phase(Phase::StrangerAlert {
                    photo_ref: archive.clone(),
                }),
                vec![
                    Effect::SavePhoto {
                        name: STRANGER_PHOTO.into(),
                        archive: Some(archive.clone()),
                        frame,
                    },
                    Effect::Notify(Notification::UnknownUser {
                        photo: archive,
                        at: now,
                    }),
                    Effect::lcd("Unknown user", "Access denied"),
                ],
            )
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn submit_pin(
    state: &State,
    user_id: &str,
    attempts_used: u32,
    deadline: Millis,
    entered: &str,
    config: &Config,
    pins: &dyn PinCheck,
    now: Millis,
) -> Transition {
    let with_phase = |phase: Phase| State {
        phase,
        mode: state.mode,
    };
    if entered.len() == PIN_LEN && pins.check_pin(user_id, entered) {
        return Transition::to(
            with_phase(Phase::Unlocked {
                until: now + config.relock_after,
            }),
            vec![
                Effect::LockSet { locked: false },
                Effect::Notify(Notification::DoorUnlocked {
                    user_id: user_id.into(),
                    at: now,
                }),
                Effect::lcd("Access granted", &format!("Welcome {user_id}")),
                Effect::Buzz(BuzzPattern::Grant),
            ],
        );
    }
    let used = attempts_used + 1;
    if used < config.max_attempts {
        let left = config.max_attempts - used;
        let tries = if left == 1 { "try" } else { "tries" };
        Transition::to(
            with_phase(Phase::AwaitPin {
                user_id: user_id.into(),
                attempts_used: used,
                deadline,
                entered: String::new(),
            }),
            vec![
                Effect::Buzz(BuzzPattern::Deny),
                Effect::lcd("Wrong PIN", &format!("{left} {tries} left")),
            ],
        )
    } else {
        Transition::to(
            with_phase(Phase::Recognizing),
            vec![
                Effect::Buzz(BuzzPattern::Deny),
                Effect::lcd("Too many tries", "Face scan again"),
            ],
        )
    }
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::MotionDetected => f.write_str("motion"),
            Event::FrameAvailable { frame } => write!(f, "frame {frame}"),
            Event::NoFrame => f.write_str("noframe"),
            Event::RecognitionDone { outcome, frame } => {
                match outcome {
                    Outcome::Match { label, confidence } => {
                        write!(f, "recognized {label} {confidence:.2}")?
                    }
                    Outcome::Unknown {
                        confidence: Some(c),
                    } => write!(f, "unknown {c:.2}")?,
                    Outcome::Unknown { confidence: None } => f.write_str("unknown")?,
                    Outcome::NoFace => f.write_str("noface")?,
                }
                match frame {
                    Some(fr) => write!(f, " frame={fr}"),
                    None => Ok(()),
                }
            }
            Event::KeyPressed { key } => write!(f, "key {key}"),
            Event::Tick => f.write_str("tick"),
            Event::AdminUnlock => f.write_str("admin unlock"),
            Event::AdminLock => f.write_str("admin lock"),
            Event::AdminSetMode {
                mode: Mode::FullFace,
            } => f.write_str("admin mode1"),
            Event::AdminSetMode {
                mode: Mode::Occluded,
            } => f.write_str("admin mode2"),
            Event::AdminRegisterStranger { name } => write!(f, "admin register {name}"),
        }
    }
}

impl fmt::Display for Notification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Notification::UnknownUser { photo, at } => {
                write!(f, "unknown_user photo={photo} at={at}")
            }
            Notification::DoorUnlocked { user_id, at } => {
                write!(f, "door_unlocked user={user_id} at={at}")
            }
            Notification::EnrollmentDone { user_id, frames } => {
                write!(f, "enrollment_done user={user_id} frames={frames}")
            }
            Notification::CommandAck { text } => write!(f, "ack {text:?}"),
        }
    }
}

impl fmt::Display for Effect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Effect::CaptureFrame => f.write_str("CAPTURE"),
            Effect::LcdShow { line1, line2 } => write!(f, "LCD {line1:?} {line2:?}"),
            Effect::LockSet { locked: true } => f.write_str("LOCK locked"),
            Effect::LockSet { locked: false } => f.write_str("LOCK unlocked"),
            Effect::Buzz(BuzzPattern::Grant) => f.write_str("BUZZ grant"),
            Effect::Buzz(BuzzPattern::Deny) => f.write_str("BUZZ deny"),
            Effect::SavePhoto {
                name,
                archive,
                frame,
            } => {
                write!(f, "SAVE {name}")?;
                if let Some(a) = archive {
                    write!(f, " archive={a}")?;
                }
                write!(f, " frame={frame}")
            }
            Effect::Notify(n) => write!(f, "NOTIFY {n}"),
            Effect::StartRecognition { mode, frame } => write!(f, "RECOGNIZE {mode} frame={frame}"),
        }
    }
}

#[cfg(test)]
mod tests;
