//! One door: the virtual rig, the registry behind it, an event feed with
//! sequence numbers and the outgoing notification queue. Every input goes
//! through [`Station::run`], so the feed is a complete record in order.

use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use entryway_core::controller::{Config, Effect, Event, Key, Millis, Notification, Outcome, Phase};
use entryway_core::pipeline::recognize_with;
use entryway_core::{Frame, GrayImage, LandmarkSet, Mode, PipelineError};

use crate::annotations::AnnotationDetector;
use crate::gateway::{notification_photo, notification_text, ChatMessage, Outbox, Photo};
use crate::registry::{EnrollmentSession, Registry, RegistryError};
use crate::rig::{FrameRecognizer, Rig, Trace, TraceKind};

pub type Clock = Box<dyn Fn() -> Millis + Send + Sync>;

/// A clock counting from the moment it is created.
pub fn wall_clock() -> Clock {
    let start = Instant::now();
    Box::new(move || Millis(start.elapsed().as_millis() as u64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationConfig {
    pub controller: Config,
    pub admin_chat_id: String,
    pub enrollment_target: usize,
    pub outbox_capacity: usize,
}

impl Default for StationConfig {
    fn default() -> Self {
        Self {
            controller: Config::default(),
            admin_chat_id: "admin".into(),
            enrollment_target: crate::registry::DEFAULT_TARGET,
            outbox_capacity: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedKind {
    Event,
    Effect,
    Noop,
    Device,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeedItem {
    pub seq: u64,
    pub at_ms: u64,
    pub kind: FeedKind,
    /// The trace line, e.g. `LOCK unlocked`.
    pub text: String,
    /// Structured form of effects worth rendering (lock, LCD, notifications).
    #[serde(skip_serializing_if = "Value::is_null")]
    pub detail: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateView {
    pub phase: &'static str,
    pub locked: bool,
    pub lcd: [String; 2],
    pub mode: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub user: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attempts_left: Option<u32>,
    pub last_seq: u64,
    pub now_ms: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum StationError {
    #[error("frames are only accepted while recognizing (door is {0}); trigger motion first")]
    NotRecognizing(&'static str),
    #[error("no enrollment in progress; start one with adduser_<name>")]
    NoEnrollment,
    #[error(transparent)]
    Registry(#[from] RegistryError),
}

/// Recognizes against the registry's current models.
struct RegistryRecognizer<'a> {
    registry: &'a Registry,
    detector: &'a AnnotationDetector,
}

impl FrameRecognizer for RegistryRecognizer<'_> {
    fn recognize(&self, mode: Mode, frame: &Frame<'_>) -> Outcome {
        match recognize_with(mode, self.registry.model(mode), frame, self.detector) {
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

fn effect_detail(effect: &Effect) -> Value {
    match effect {
        Effect::LockSet { locked } => json!({ "locked": locked }),
        Effect::LcdShow { line1, line2 } => json!({ "lcd": [line1, line2] }),
        Effect::Notify(n) => notification_detail(n),
        Effect::SavePhoto { name, archive, .. } => json!({ "photo": name, "archive": archive }),
        _ => Value::Null,
    }
}

fn notification_detail(n: &Notification) -> Value {
    let (kind, mut v) = match n {
        Notification::UnknownUser { photo, at } => {
            ("unknown_user", json!({ "photo": photo, "at_ms": at.0 }))
        }
        Notification::DoorUnlocked { user_id, at } => {
            ("door_unlocked", json!({ "user": user_id, "at_ms": at.0 }))
        }
        Notification::EnrollmentDone { user_id, frames } => (
            "enrollment_done",
            json!({ "user": user_id, "frames": frames }),
        ),
        Notification::CommandAck { text } => ("ack", json!({ "text": text })),
    };
    v["type"] = json!(kind);
    v["message"] = json!(notification_text(n));
    json!({ "notification": v })
}

pub struct Station {
    settings: StationConfig,
    rig: Rig,
    registry: Registry,
    detector: AnnotationDetector,
    feed: Vec<FeedItem>,
    outbox: Outbox,
    enrollment: Option<EnrollmentSession>,
    uploads: u64,
    last_frame: Option<String>,
    clock: Clock,
}

impl Station {
    pub fn new(settings: StationConfig, registry: Registry, clock: Clock) -> Station {
        Station {
            rig: Rig::new(settings.controller.clone()),
            outbox: Outbox::new(settings.outbox_capacity),
            settings,
            registry,
            detector: AnnotationDetector::new(),
            feed: Vec::new(),
            enrollment: None,
            uploads: 0,
            last_frame: None,
            clock,
        }
    }

    pub fn now(&self) -> Millis {
        (self.clock)().max(self.rig.now())
    }

    pub fn admin_chat_id(&self) -> &str {
        &self.settings.admin_chat_id
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn registry_mut(&mut self) -> &mut Registry {
        &mut self.registry
    }

    pub fn rig(&self) -> &Rig {
        &self.rig
    }

    pub fn phase(&self) -> &Phase {
        &self.rig.state().phase
    }

    /// Feeds one event through the door and records everything it caused.
    pub fn run(&mut self, event: Event) -> &[FeedItem] {
        let now = self.now();
        let mut trace = Trace::default();
        let recognizer = RegistryRecognizer {
            registry: &self.registry,
            detector: &self.detector,
        };
        self.rig
            .dispatch(event, now, &self.registry, &recognizer, &mut trace);
        for (at, n) in self.rig.drain_notifications() {
            self.outbox.push(at, n);
        }
        self.record(trace)
    }

    fn record(&mut self, trace: Trace) -> &[FeedItem] {
        let start = self.feed.len();
        for line in trace.lines {
            let (kind, detail) = match &line.kind {
                TraceKind::Event(e) => {
                    if let Event::FrameAvailable { frame } = e {
                        self.last_frame = Some(frame.clone());
                    }
                    (FeedKind::Event, Value::Null)
                }
                TraceKind::Effect(e) => (FeedKind::Effect, effect_detail(e)),
                TraceKind::Noop { .. } => (FeedKind::Noop, Value::Null),
                TraceKind::Device(_) => (FeedKind::Device, Value::Null),
            };
            let text = line.to_string();
            let text = text
                .split_once(' ')
                .map_or(text.clone(), |(_, rest)| rest.to_string());
            self.feed.push(FeedItem {
                seq: self.feed.len() as u64 + 1,
                at_ms: line.at.0,
                kind,
                text,
                detail,
            });
        }
        &self.feed[start..]
    }

    fn device_note(&mut self, text: String) {
        let at = self.now();
        let mut trace = Trace::default();
        trace.lines.push(crate::rig::TraceLine {
            at,
            kind: TraceKind::Device(text),
        });
        self.record(trace);
    }

    pub fn motion(&mut self) -> &[FeedItem] {
        self.run(Event::MotionDetected)
    }

    pub fn key(&mut self, key: Key) -> &[FeedItem] {
        self.run(Event::KeyPressed { key })
    }

    pub fn tick(&mut self) -> &[FeedItem] {
        self.run(Event::Tick)
    }

    /// Ticks only when a deadline has passed, so idle polling leaves no
    /// trace in the feed.
    pub fn tick_if_due(&mut self) -> &[FeedItem] {
        let now = self.now();
        let due = match &self.rig.state().phase {
            Phase::AwaitPin { deadline, .. } => now > *deadline,
            Phase::Unlocked { until } => now > *until,
            _ => false,
        };
        if due {
            self.tick()
        } else {
            &[]
        }
    }

    pub fn admin(&mut self, event: Event) -> &[FeedItem] {
        debug_assert!(event.is_admin());
        self.run(event)
    }

    /// Hands a camera frame to the door; only valid while it is recognizing.
    pub fn submit_frame(
        &mut self,
        image: GrayImage,
        landmarks: Option<LandmarkSet>,
    ) -> Result<&[FeedItem], StationError> {
        if self.rig.state().phase != Phase::Recognizing {
            return Err(StationError::NotRecognizing(self.rig.state().phase.name()));
        }
        self.uploads += 1;
        let id = format!("upload-{:04}.pgm", self.uploads);
        if let Some(set) = landmarks {
            self.detector.insert(id.clone(), set);
        }
        self.rig.store_frame(id.clone(), image);
        Ok(self.run(Event::FrameAvailable { frame: id }))
    }

    /// Photographs the scene for the admin without touching the door state:
    /// the most recent frame the door has seen.
    pub fn capture_photo(&mut self) -> Option<(String, GrayImage)> {
        let frame = self.last_frame.clone()?;
        let image = self.rig.frame(&frame)?.clone();
        let name = format!("capture-{}.jpg", self.now().0);
        self.rig.save_photo(name.clone(), image.clone());
        self.device_note(format!("snapshot {name} from {frame}"));
        Some((name, image))
    }

    pub fn photo(&self, name: &str) -> Option<&GrayImage> {
        self.rig.devices().photos.get(name)
    }

    pub fn events_since(&self, seq: u64) -> &[FeedItem] {
        let from = (seq as usize).min(self.feed.len());
        &self.feed[from..]
    }

    pub fn last_seq(&self) -> u64 {
        self.feed.len() as u64
    }

    pub fn view(&self) -> StateView {
        let state = self.rig.state();
        let (user, attempts_left) = match &state.phase {
            Phase::AwaitPin {
                user_id,
                attempts_used,
                ..
            } => (
                Some(user_id.clone()),
                Some(self.settings.controller.max_attempts - attempts_used),
            ),
            _ => (None, None),
        };
        StateView {
            phase: state.phase.name(),
            locked: self.rig.devices().locked,
            lcd: self.rig.devices().lcd.clone(),
            mode: state.mode.as_str(),
            user,
            attempts_left,
            last_seq: self.last_seq(),
            now_ms: self.now().0,
        }
    }

    /// Registers a user and opens their enrollment, abandoning any other
    /// enrollment still open. If a stranger alert is pending, the alert is
    /// cleared and the stranger's photo becomes the first enrollment frame.
    pub fn add_user(&mut self, name: &str) -> Result<String, StationError> {
        self.registry.add_user(name, name)?;
        if let Some(mut old) = self.enrollment.take() {
            log::warn!("abandoning unfinished enrollment of {}", old.user_id());
            self.registry.abort_enrollment(&mut old)?;
        }
        let mut session = self
            .registry
            .start_enrollment(name, self.settings.enrollment_target)?;
        if let Phase::StrangerAlert { photo_ref } = &self.rig.state().phase {
            let seed = self.photo(photo_ref).cloned();
            let landmarks = self.last_frame.as_deref().and_then(|f| {
                let set = self.detector_lookup(f);
                (!set.is_empty()).then_some(set)
            });
            if let Some(img) = seed {
                self.registry
                    .enroll_frame(&mut session, &img, landmarks.as_ref(), None)?;
            }
            self.run(Event::AdminRegisterStranger { name: name.into() });
        }
        let have = session.collected().len();
        let target = session.target();
        self.enrollment = Some(session);
        Ok(format!(
            "Registered {name}. Send {} enrollment photos ({have}/{target} so far).",
            target - have
        ))
    }

    fn detector_lookup(&self, frame: &str) -> LandmarkSet {
        use entryway_core::Detector;
        match self.rig.frame(frame) {
            Some(img) => self.detector.detect(&Frame::new(frame, img)),
            None => LandmarkSet::default(),
        }
    }

    pub fn enrollment(&self) -> Option<&EnrollmentSession> {
        self.enrollment.as_ref()
    }

    /// Adds a photo to the open enrollment; finalizes once the target count
    /// is reached.
    pub fn enroll_photo(
        &mut self,
        image: &GrayImage,
        landmarks: Option<&LandmarkSet>,
    ) -> Result<String, StationError> {
        let session = self.enrollment.as_mut().ok_or(StationError::NoEnrollment)?;
        self.registry
            .enroll_frame(session, image, landmarks, None)?;
        if !session.ready() {
            return Ok(format!(
                "Frame {}/{} stored for {}.",
                session.collected().len(),
                session.target(),
                session.user_id()
            ));
        }
        let mut session = self.enrollment.take().expect("checked above");
        let report = self.registry.finalize_with_sidecars(&mut session)?;
        let at = self.now();
        self.outbox.push(
            at,
            Notification::EnrollmentDone {
                user_id: report.user_id.clone(),
                frames: report.frames as u32,
            },
        );
        self.device_note(format!(
            "enrolled {} frames={} full={} occluded={}",
            report.user_id, report.frames, report.full_entries, report.occluded_entries
        ));
        Ok(format!(
            "Enrollment of {} complete ({} frames).",
            report.user_id, report.frames
        ))
    }

    /// Renders queued notifications as chat messages to the admin.
    pub fn take_outgoing(&mut self) -> Vec<ChatMessage> {
        let chat = self.settings.admin_chat_id.clone();
        self.outbox
            .drain()
            .into_iter()
            .map(|(at, n)| ChatMessage {
                chat_id: chat.clone(),
                text: notification_text(&n),
                photo: notification_photo(&n).and_then(|name| {
                    self.photo(name).map(|img| Photo {
                        name: name.to_string(),
                        image: img.clone(),
                        landmarks: None,
                    })
                }),
                at,
            })
            .collect()
    }

    pub fn outbox(&self) -> &Outbox {
        &self.outbox
    }
}
