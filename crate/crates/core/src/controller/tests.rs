use super::*;
use alloc::collections::BTreeMap;

fn pins() -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    m.insert("Nazrin".to_string(), "7816".to_string());
    m
}

struct Run {
    state: State,
    config: Config,
    pins: BTreeMap<String, String>,
    effects: Vec<(Millis, Effect)>,
}

impl Run {
    fn new() -> Self {
        let config = Config::default();
        Self {
            state: State::new(&config),
            config,
            pins: pins(),
            effects: Vec::new(),
        }
    }

    fn send(&mut self, secs_ms: u64, event: Event) -> Transition {
        let now = Millis(secs_ms);
        let t = step(&self.state, &event, &self.config, &self.pins, now);
        self.state = t.state.clone();
        self.effects
            .extend(t.effects.iter().cloned().map(|e| (now, e)));
        t
    }

    fn recognize(&mut self, at: u64, label: &str, confidence: f64) -> Transition {
        self.send(at, Event::MotionDetected);
        self.send(
            at,
            Event::RecognitionDone {
                outcome: Outcome::Match {
                    label: label.into(),
                    confidence,
                },
                frame: Some("f.pgm".into()),
            },
        )
    }

    fn type_pin(&mut self, at: u64, pin: &str) -> Transition {
        let mut last = None;
        for c in pin.chars() {
            last = Some(self.send(
                at,
                Event::KeyPressed {
                    key: Key::from_char(c).unwrap(),
                },
            ));
        }
        last.unwrap()
    }

    fn unlocked(&self) -> bool {
        self.effects
            .iter()
            .any(|(_, e)| *e == Effect::LockSet { locked: false })
    }
}

#[test]
fn motion_starts_capture() {
    let mut r = Run::new();
    let t = r.send(0, Event::MotionDetected);
    assert_eq!(t.state.phase, Phase::Recognizing);
    assert_eq!(t.effects[0], Effect::CaptureFrame);
    let t = r.send(
        1,
        Event::FrameAvailable {
            frame: "a.pgm".into(),
        },
    );
    assert_eq!(
        t.effects,
        vec![Effect::StartRecognition {
            mode: Mode::FullFace,
            frame: "a.pgm".into()
        }]
    );
}

#[test]
fn accepted_face_waits_for_pin_and_saves_temp_photo() {
    let mut r = Run::new();
    let t = r.recognize(0, "Nazrin", 51.0);
    assert_eq!(
        t.state.phase,
        Phase::AwaitPin {
            user_id: "Nazrin".into(),
            attempts_used: 0,
            deadline: Millis(30_000),
            entered: String::new()
        }
    );
    assert_eq!(t.effects[0], Effect::lcd("Face recognised", "Enter PIN:"));
    assert!(matches!(&t.effects[1], Effect::SavePhoto { name, .. } if name == TEMP_PHOTO));
}

#[test]
fn masked_match_at_59_is_accepted() {
    let mut r = Run::new();
    r.state.mode = Mode::Occluded;
    let t = r.recognize(0, "Nazrin", 59.0);
    assert_eq!(t.state.phase.name(), "AwaitPin");
}

#[test]
fn threshold_is_strict() {
    let mut r = Run::new();
    let t = r.recognize(0, "Nazrin", 70.0);
    assert!(matches!(t.state.phase, Phase::StrangerAlert { .. }));
    let mut r = Run::new();
    let t = r.recognize(0, "Nazrin", 69.999);
    assert_eq!(t.state.phase.name(), "AwaitPin");
}

#[test]
fn stranger_saves_photo_and_notifies() {
    let mut r = Run::new();
    r.send(0, Event::MotionDetected);
    let t = r.send(
        2_000,
        Event::RecognitionDone {
            outcome: Outcome::Unknown {
                confidence: Some(91.5),
            },
            frame: Some("x.pgm".into()),
        },
    );
    assert_eq!(
        t.state.phase,
        Phase::StrangerAlert {
            photo_ref: "stranger-2000.jpg".into()
        }
    );
    assert_eq!(
        t.effects[0],
        Effect::SavePhoto {
            name: STRANGER_PHOTO.into(),
            archive: Some("stranger-2000.jpg".into()),
            frame: "x.pgm".into()
        }
    );
    assert_eq!(
        t.effects[1],
        Effect::Notify(Notification::UnknownUser {
            photo: "stranger-2000.jpg".into(),
            at: Millis(2_000)
        })
    );
    let t = r.send(3_000, Event::AdminRegisterStranger { name: "Bob".into() });
    assert_eq!(t.state.phase, Phase::Idle);
}

#[test]
fn no_face_is_not_a_stranger() {
    let mut r = Run::new();
    r.send(0, Event::MotionDetected);
    let t = r.send(
        0,
        Event::RecognitionDone {
            outcome: Outcome::NoFace,
            frame: None,
        },
    );
    assert_eq!(t.state.phase, Phase::Idle);
    assert!(!t
        .effects
        .iter()
        .any(|e| matches!(e, Effect::Notify(_) | Effect::SavePhoto { .. })));
}

#[test]
fn three_wrong_pins_return_to_recognition() {
    let mut r = Run::new();
    r.recognize(0, "Nazrin", 34.0);
    let t = r.type_pin(1_000, "7514");
    assert_eq!(t.effects[0], Effect::Buzz(BuzzPattern::Deny));
    assert_eq!(t.effects[1], Effect::lcd("Wrong PIN", "2 tries left"));
    let t = r.type_pin(2_000, "6447");
    assert_eq!(t.effects[1], Effect::lcd("Wrong PIN", "1 try left"));
    let t = r.type_pin(3_000, "1489");
    assert_eq!(t.state.phase, Phase::Recognizing);
    assert!(!r.unlocked());
}

#[test]
fn third_try_unlocks() {
    let mut r = Run::new();
    r.recognize(0, "Nazrin", 34.0);
    r.type_pin(1_000, "4718");
    r.type_pin(2_000, "7416");
    let t = r.type_pin(3_000, "7816");
    assert_eq!(
        t.state.phase,
        Phase::Unlocked {
            until: Millis(8_000)
        }
    );
    assert_eq!(t.effects[0], Effect::LockSet { locked: false });
    assert_eq!(
        t.effects[1],
        Effect::Notify(Notification::DoorUnlocked {
            user_id: "Nazrin".into(),
            at: Millis(3_000)
        })
    );
}

#[test]
fn relock_after_five_seconds() {
    let mut r = Run::new();
    r.recognize(0, "Nazrin", 34.0);
    r.type_pin(1_000, "7816");
    let t = r.send(6_000, Event::Tick);
    assert_eq!(t.state.phase.name(), "Unlocked");
    let t = r.send(6_001, Event::Tick);
    assert_eq!(t.state.phase, Phase::Idle);
    assert_eq!(t.effects[0], Effect::LockSet { locked: true });
}

#[test]
fn pin_timeout_is_strict() {
    let mut r = Run::new();
    r.recognize(0, "Nazrin", 34.0);
    let t = r.send(30_000, Event::Tick);
    assert_eq!(t.state.phase.name(), "AwaitPin");
    let t = r.send(30_010, Event::Tick);
    assert_eq!(t.state.phase, Phase::Recognizing);
    assert_eq!(
        t.effects,
        vec![Effect::lcd("PIN timeout", "Face scan again")]
    );
}

#[test]
fn keys_after_deadline_time_out_instead_of_counting() {
    let mut r = Run::new();
    r.recognize(0, "Nazrin", 34.0);
    r.type_pin(10_000, "781");
    let t = r.send(31_000, Event::KeyPressed { key: Key::Digit(6) });
    assert_eq!(t.state.phase, Phase::Recognizing);
    assert!(!r.unlocked());
}

#[test]
fn star_clears_and_hash_submits_short_entry() {
    let mut r = Run::new();
    r.recognize(0, "Nazrin", 34.0);
    r.type_pin(1_000, "78*");
    let t = r.type_pin(1_000, "7816");
    assert_eq!(t.state.phase.name(), "Unlocked");

    let mut r = Run::new();
    r.recognize(0, "Nazrin", 34.0);
    let t = r.type_pin(1_000, "#");
    assert!(t.noop);
    let t = r.type_pin(1_000, "78#");
    assert!(matches!(
        t.state.phase,
        Phase::AwaitPin {
            attempts_used: 1,
            ..
        }
    ));
}

#[test]
fn trailing_hash_after_unlock_is_a_noop() {
    let mut r = Run::new();
    r.recognize(0, "Nazrin", 34.0);
    let t = r.type_pin(1_000, "7816#");
    assert!(t.noop);
    assert_eq!(t.state.phase.name(), "Unlocked");
}

#[test]
fn idle_key_press_is_a_noop() {
    let mut r = Run::new();
    let t = r.send(0, Event::KeyPressed { key: Key::Digit(7) });
    assert!(t.noop);
    assert_eq!(t.state.phase, Phase::Idle);
    assert!(t.effects.is_empty());
}

#[test]
fn admin_controls_override_phase() {
    let mut r = Run::new();
    r.recognize(0, "Nazrin", 34.0);
    let t = r.send(1_000, Event::AdminUnlock);
    assert_eq!(t.effects[0], Effect::LockSet { locked: false });
    assert!(!t.state.locked());
    let t = r.send(2_000, Event::AdminLock);
    assert_eq!(t.state.phase, Phase::Idle);
    assert!(t.state.locked());
    let t = r.send(
        3_000,
        Event::AdminSetMode {
            mode: Mode::Occluded,
        },
    );
    assert_eq!(t.state.mode, Mode::Occluded);
    let t = r.send(4_000, Event::MotionDetected);
    let t2 = r.send(4_000, Event::FrameAvailable { frame: "f".into() });
    assert_eq!(t.state.phase, Phase::Recognizing);
    assert_eq!(
        t2.effects,
        vec![Effect::StartRecognition {
            mode: Mode::Occluded,
            frame: "f".into()
        }]
    );
}

#[test]
fn lcd_lines_are_truncated() {
    let e = Effect::lcd("Access granted to everyone", "Welcome Wanhariz bin Rosdi");
    let Effect::LcdShow { line1, line2 } = e else {
        panic!()
    };
    assert_eq!(line1.chars().count(), LCD_WIDTH);
    assert_eq!(line2, "Welcome Wanhariz");
}

#[test]
fn config_validation() {
    assert!(Config::default().validate().is_ok());
    let c = Config {
        max_attempts: 0,
        ..Config::default()
    };
    assert_eq!(c.validate(), Err(ConfigError::Attempts));
    let c = Config {
        accept_threshold: f64::NAN,
        ..Config::default()
    };
    assert_eq!(c.validate(), Err(ConfigError::Threshold));
}

#[test]
fn display_forms() {
    assert_eq!(
        Effect::LockSet { locked: false }.to_string(),
        "LOCK unlocked"
    );
    assert_eq!(
        Event::RecognitionDone {
            outcome: Outcome::Match {
                label: "Nazrin".into(),
                confidence: 51.0
            },
            frame: None
        }
        .to_string(),
        "recognized Nazrin 51.00"
    );
    assert_eq!(
        Effect::lcd("Face recognised", "Enter PIN:").to_string(),
        "LCD \"Face recognised\" \"Enter PIN:\""
    );
}
