//! Virtual door hardware driven by the access-control state machine.
//!
//! The rig owns the devices the prototype wires to the controller: camera
//! (a queue of frames), 16x2 LCD, lock, buzzer and a photo store. Events go
//! through one queue; effects are applied in order and may inject follow-up
//! events (a capture yields `FrameAvailable` or `NoFrame`, a recognition
//! request yields `RecognitionDone`).

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use entryway_core::controller::{
    step, BuzzPattern, Config, Effect, Event, Millis, Notification, Outcome, PinCheck, State,
};
use entryway_core::pipeline::recognize_with;
use entryway_core::{Detector, Frame, GrayImage, Mode, PipelineError, RecognizerModel};

/// Turns a frame into a recognition outcome for the given mode.
pub trait FrameRecognizer {
    fn recognize(&self, mode: Mode, frame: &Frame<'_>) -> Outcome;
}

/// Returns a fixed outcome; used where recognition is scripted.
pub struct ScriptedRecognizer(pub Outcome);

impl FrameRecognizer for ScriptedRecognizer {
    fn recognize(&self, _mode: Mode, _frame: &Frame<'_>) -> Outcome {
        self.0.clone()
    }
}

/// LBPH models for both modes plus a landmark detector.
pub struct ModelRecognizer<D> {
    pub full: Option<RecognizerModel>,
    pub occluded: Option<RecognizerModel>,
    pub detector: D,
}

impl<D: Detector> ModelRecognizer<D> {
    pub fn model(&self, mode: Mode) -> Option<&RecognizerModel> {
        match mode {
            Mode::FullFace => self.full.as_ref(),
            Mode::Occluded => self.occluded.as_ref(),
        }
    }
}

impl<D: Detector> FrameRecognizer for ModelRecognizer<D> {
    fn recognize(&self, mode: Mode, frame: &Frame<'_>) -> Outcome {
        let Some(model) = self.model(mode) else {
            return Outcome::Unknown { confidence: None };
        };
        match recognize_with(mode, model, frame, &self.detector) {
            Ok(r) => Outcome::Match {
                label: r.matched.label,
                confidence: r.matched.confidence,
            },
            Err(PipelineError::NotTrained) => Outcome::Unknown { confidence: None },
            Err(e) => {
                log::debug!("recognition of {} failed: {e}", frame.id);
                Outcome::NoFace
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceKind {
    Event(Event),
    Effect(Effect),
    /// The event meant nothing in the named phase.
    Noop {
        phase: &'static str,
        event: Event,
    },
    /// Device-level happenings outside the state machine.
    Device(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceLine {
    pub at: Millis,
    pub kind: TraceKind,
}

impl fmt::Display for TraceLine {
    /// `<t> <WHAT> <args>`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            TraceKind::Event(e) => write!(f, "{} EVENT {e}", self.at),
            TraceKind::Effect(e) => write!(f, "{} {e}", self.at),
            TraceKind::Noop { phase, event } => write!(f, "{} NOOP {phase} {event}", self.at),
            TraceKind::Device(d) => write!(f, "{} DEVICE {d}", self.at),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub lines: Vec<TraceLine>,
}

impl Trace {
    pub fn render(&self) -> String {
        self.lines.iter().map(|l| format!("{l}\n")).collect()
    }

    pub fn effects(&self) -> impl Iterator<Item = &Effect> {
        self.lines.iter().filter_map(|l| match &l.kind {
            TraceKind::Effect(e) => Some(e),
            _ => None,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }
}

/// Device state visible from outside.
#[derive(Debug, Clone)]
pub struct Devices {
    pub lcd: [String; 2],
    pub locked: bool,
    pub buzzer: Vec<(Millis, BuzzPattern)>,
    pub photos: BTreeMap<String, GrayImage>,
}

impl Default for Devices {
    fn default() -> Self {
        Self {
            lcd: [String::new(), String::new()],
            locked: true,
            buzzer: Vec::new(),
            photos: BTreeMap::new(),
        }
    }
}

pub struct Rig {
    config: Config,
    state: State,
    devices: Devices,
    camera: VecDeque<String>,
    frames: BTreeMap<String, GrayImage>,
    notifications: Vec<(Millis, Notification)>,
    clock: Millis,
}

impl Rig {
    pub fn new(config: Config) -> Self {
        Self {
            state: State::new(&config),
            config,
            devices: Devices::default(),
            camera: VecDeque::new(),
            frames: BTreeMap::new(),
            notifications: Vec::new(),
            clock: Millis::ZERO,
        }
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    pub fn devices(&self) -> &Devices {
        &self.devices
    }

    pub fn now(&self) -> Millis {
        self.clock
    }

    /// Registers a frame so effects and recognizers can refer to it by id.
    pub fn store_frame(&mut self, id: impl Into<String>, image: GrayImage) {
        self.frames.insert(id.into(), image);
    }

    pub fn frame(&self, id: &str) -> Option<&GrayImage> {
        self.frames.get(id)
    }

    /// Puts a stored frame in front of the camera.
    pub fn queue_camera(&mut self, id: impl Into<String>) {
        self.camera.push_back(id.into());
    }

    pub fn camera_peek(&self) -> Option<&str> {
        self.camera.front().map(String::as_str)
    }

    /// Notifications emitted so far, oldest first; draining hands them off.
    pub fn drain_notifications(&mut self) -> Vec<(Millis, Notification)> {
        std::mem::take(&mut self.notifications)
    }

    pub fn save_photo(&mut self, name: impl Into<String>, image: GrayImage) {
        self.devices.photos.insert(name.into(), image);
    }

    /// Feeds one event (and everything it triggers) through the machine.
    /// Time never runs backwards: an earlier `now` is treated as the last one.
    pub fn dispatch(
        &mut self,
        event: Event,
        now: Millis,
        pins: &dyn PinCheck,
        recognizer: &dyn FrameRecognizer,
        trace: &mut Trace,
    ) {
        let now = now.max(self.clock);
        self.clock = now;
        let mut queue = VecDeque::from([event]);
        while let Some(event) = queue.pop_front() {
            trace.lines.push(TraceLine {
                at: now,
                kind: TraceKind::Event(event.clone()),
            });
            let t = step(&self.state, &event, &self.config, pins, now);
            if t.noop {
                trace.lines.push(TraceLine {
                    at: now,
                    kind: TraceKind::Noop {
                        phase: self.state.phase.name(),
                        event: event.clone(),
                    },
                });
            }
            self.state = t.state;
            for effect in t.effects {
                trace.lines.push(TraceLine {
                    at: now,
                    kind: TraceKind::Effect(effect.clone()),
                });
                self.apply(effect, now, recognizer, &mut queue);
            }
        }
    }

    fn apply(
        &mut self,
        effect: Effect,
        now: Millis,
        recognizer: &dyn FrameRecognizer,
        queue: &mut VecDeque<Event>,
    ) {
        match effect {
            Effect::CaptureFrame => queue.push_back(match self.camera.pop_front() {
                Some(frame) => Event::FrameAvailable { frame },
                None => Event::NoFrame,
            }),
            Effect::LcdShow { line1, line2 } => self.devices.lcd = [line1, line2],
            Effect::LockSet { locked } => self.devices.locked = locked,
            Effect::Buzz(p) => self.devices.buzzer.push((now, p)),
            Effect::SavePhoto {
                name,
                archive,
                frame,
            } => {
                if let Some(img) = self.frames.get(&frame).cloned() {
                    if let Some(a) = archive {
                        self.devices.photos.insert(a, img.clone());
                    }
                    self.devices.photos.insert(name, img);
                }
            }
            Effect::Notify(n) => self.notifications.push((now, n)),
            Effect::StartRecognition { mode, frame } => {
                let outcome = match self.frames.get(&frame) {
                    Some(img) => recognizer.recognize(mode, &Frame::new(&frame, img)),
                    None => Outcome::NoFace,
                };
                queue.push_back(Event::RecognitionDone {
                    outcome,
                    frame: Some(frame),
                });
            }
        }
    }
}

/// A scripted input for [`run_devices`].
#[derive(Debug, Clone, PartialEq)]
pub enum RigInput {
    /// Put a stored frame in front of the camera.
    Camera(String),
    Event(Event),
}

/// Pumps time-ordered inputs through a rig and returns the full trace.
pub fn run_devices(
    rig: &mut Rig,
    inputs: impl IntoIterator<Item = (Millis, RigInput)>,
    pins: &dyn PinCheck,
    recognizer: &dyn FrameRecognizer,
) -> Trace {
    let mut trace = Trace::default();
    for (at, input) in inputs {
        match input {
            RigInput::Camera(id) => {
                trace.lines.push(TraceLine {
                    at: at.max(rig.clock),
                    kind: TraceKind::Device(format!("camera {id}")),
                });
                rig.queue_camera(id);
            }
            RigInput::Event(e) => rig.dispatch(e, at, pins, recognizer, &mut trace),
        }
    }
    trace
}
