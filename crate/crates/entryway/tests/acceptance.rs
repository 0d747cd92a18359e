//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Runs under `cargo test` as its own target.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use entryway::annotations::read_sidecar;
use entryway::evalkit::Manifest;
use entryway::gateway::{dispatch, ChatMessage, REFUSAL};
use entryway::pgm;
use entryway::station::{Station, StationConfig};
use entryway::synth::{DeskConfig, DeskDataset};
use entryway_core::command::{parse_command, BotCommand};
use entryway_core::controller::{
    step, BuzzPattern, Config, Effect, Event, Key, Millis, Outcome, Phase, State,
};
use entryway_core::geometry::union_eyes_nose;
use entryway_core::lbph::{load_model, save_model, CodecError, ModelEntry, RecognizerModel};
use entryway_core::metrics::{compute_metrics, ConfusionCounts, Ratio};
use entryway_core::pipeline::{crop_for_mode, region_for};
use entryway_core::{Mode, Rect};

type Verdict = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, took: Duration) -> Result<(), String> {
    ensure(took < limit, || format!("took {took:.2?}, limit {limit:?}"))
}

// ---------------------------------------------------------------- geometry

fn random_rect(rng: &mut ChaCha8Rng) -> Rect {
    Rect::new(
        rng.random_range(-200..400),
        rng.random_range(-200..400),
        rng.random_range(1..120),
        rng.random_range(1..120),
    )
    .unwrap()
}

/// Smallest box holding every corner point of the given boxes.
fn corner_oracle(boxes: &[Rect]) -> Rect {
    let corners: Vec<(i64, i64)> = boxes
        .iter()
        .flat_map(|b| {
            let (x, y) = (i64::from(b.x), i64::from(b.y));
            [
                (x, y),
                (x + i64::from(b.w), y),
                (x, y + i64::from(b.h)),
                (x + i64::from(b.w), y + i64::from(b.h)),
            ]
        })
        .collect();
    let x0 = corners.iter().map(|c| c.0).min().unwrap();
    let y0 = corners.iter().map(|c| c.1).min().unwrap();
    let x1 = corners.iter().map(|c| c.0).max().unwrap();
    let y1 = corners.iter().map(|c| c.1).max().unwrap();
    Rect::new(x0 as i32, y0 as i32, (x1 - x0) as u32, (y1 - y0) as u32).unwrap()
}

fn union_matches_oracle() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xE1E5);
    let mut without_nose = 0;
    for i in 0..1000 {
        let (e1, e2) = (random_rect(&mut rng), random_rect(&mut rng));
        let nose = (i % 4 != 0).then(|| random_rect(&mut rng));
        without_nose += usize::from(nose.is_none());
        let mut boxes = vec![e1, e2];
        boxes.extend(nose);
        let got = union_eyes_nose(&e1, &e2, nose.as_ref());
        let want = corner_oracle(&boxes);
        ensure(got == want, || {
            format!("triple {i}: {e1:?} {e2:?} {nose:?}: got {got:?}, oracle {want:?}")
        })?;
    }
    within(Duration::from_secs(1), start.elapsed())?;
    Ok(format!(
        "1000 triples ({without_nose} without nose) in {:.1?}",
        start.elapsed()
    ))
}

// ---------------------------------------------------------------- password scenarios

fn lock_changes(trace: &entryway::rig::Trace) -> Vec<bool> {
    trace
        .effects()
        .filter_map(|e| match e {
            Effect::LockSet { locked } => Some(*locked),
            _ => None,
        })
        .collect()
}

fn password_scenarios() -> Verdict {
    let cases = [
        ("pin_three_wrong", Vec::new(), 3),
        ("pin_third_try", vec![false, true], 2),
        ("pin_first_try", vec![false, true], 0),
    ];
    for (name, locks, denials) in cases {
        let trace = common::golden(name)?;
        let got = lock_changes(&trace);
        ensure(got == locks, || {
            format!("{name}: lock changes {got:?}, expected {locks:?}")
        })?;
        let deny = trace
            .effects()
            .filter(|e| **e == Effect::Buzz(BuzzPattern::Deny))
            .count();
        ensure(deny == denials, || {
            format!("{name}: {deny} denials, expected {denials}")
        })?;
    }
    let (_, rig) = common::run_scenario("pin_three_wrong");
    ensure(
        rig.state().phase == Phase::Recognizing && rig.devices().locked,
        || format!("after three wrong PINs: {:?}", rig.state().phase),
    )?;
    Ok("7514/6447/1489 denied, 4718/7416/7816 opens on try 3, 7816 opens on try 1; traces byte-exact".into())
}

// ---------------------------------------------------------------- timing, attempts, safety

#[derive(Debug, Clone, Copy, PartialEq)]
enum Sym {
    Motion,
    Frame,
    Accept,
    Reject,
    Seven,
    Zero,
    Hash,
    /// 16 s pass, then a tick.
    Tick,
}

const ALPHABET: [Sym; 8] = [
    Sym::Motion,
    Sym::Frame,
    Sym::Accept,
    Sym::Reject,
    Sym::Seven,
    Sym::Zero,
    Sym::Hash,
    Sym::Tick,
];
const DEPTH: usize = 8;
const SECRET: &str = "7777";

fn event(sym: Sym) -> Event {
    let done = |confidence| Event::RecognitionDone {
        outcome: Outcome::Match {
            label: "Nazrin".into(),
            confidence,
        },
        frame: Some("f".into()),
    };
    match sym {
        Sym::Motion => Event::MotionDetected,
        Sym::Frame => Event::FrameAvailable { frame: "f".into() },
        Sym::Accept => done(30.0),
        Sym::Reject => done(85.0),
        Sym::Seven => Event::KeyPressed { key: Key::Digit(7) },
        Sym::Zero => Event::KeyPressed { key: Key::Digit(0) },
        Sym::Hash => Event::KeyPressed { key: Key::Hash },
        Sym::Tick => Event::Tick,
    }
}

/// Judges an unlock from the event history alone: some accepted face within
/// the PIN timeout, and the last four digits typed, all after that face,
/// spelling the secret.
fn unlock_allowed(history: &[(Sym, Millis)], config: &Config) -> bool {
    let (_, now) = *history.last().unwrap();
    let digits: Vec<(usize, Sym)> = history
        .iter()
        .enumerate()
        .filter(|(_, (s, _))| matches!(s, Sym::Seven | Sym::Zero))
        .map(|(i, (s, _))| (i, *s))
        .collect();
    if digits.len() < SECRET.len() {
        return false;
    }
    let last4 = &digits[digits.len() - SECRET.len()..];
    let typed: String = last4
        .iter()
        .map(|(_, s)| if *s == Sym::Seven { '7' } else { '0' })
        .collect();
    let first = last4[0].0;
    let face = history[..first]
        .iter()
        .any(|(s, at)| *s == Sym::Accept && Millis(now.0 - at.0) <= config.pin_timeout);
    typed == SECRET && face
}

#[derive(Default)]
struct Explored {
    sequences: u64,
    unlocks: u64,
}

fn explore(
    state: &State,
    now: Millis,
    history: &mut Vec<(Sym, Millis)>,
    config: &Config,
    pins: &std::collections::BTreeMap<String, String>,
    seen: &mut Explored,
) -> Result<(), String> {
    seen.sequences += 1;
    if history.len() == DEPTH {
        return Ok(());
    }
    for sym in ALPHABET {
        let at = now
            + if sym == Sym::Tick {
                Millis::from_secs(16)
            } else {
                Millis::from_secs(1)
            };
        let t = step(state, &event(sym), config, pins, at);
        history.push((sym, at));
        let unlocked = t.effects.contains(&Effect::LockSet { locked: false });
        if unlocked {
            seen.unlocks += 1;
            if !unlock_allowed(history, config) {
                return Err(format!("unsafe unlock after {history:?}"));
            }
        }
        if unlocked != matches!(t.state.phase, Phase::Unlocked { .. })
            && !matches!(state.phase, Phase::Unlocked { .. })
        {
            return Err(format!("lock effect and phase disagree after {history:?}"));
        }
        explore(&t.state, at, history, config, pins, seen)?;
        history.pop();
    }
    Ok(())
}

fn attempt_cap_holds(
    config: &Config,
    pins: &std::collections::BTreeMap<String, String>,
) -> Result<(), String> {
    // Every wrong PIN is denied; after the cap the keypad is dead until a
    // new face is accepted.
    let mut state = State::new(config);
    let mut now = Millis::ZERO;
    let feed = |state: &mut State, sym: Sym, now: &mut Millis| {
        *now = *now + Millis::from_secs(1);
        let t = step(state, &event(sym), config, pins, *now);
        *state = t.state;
        t.effects
    };
    for s in [Sym::Motion, Sym::Frame, Sym::Accept] {
        feed(&mut state, s, &mut now);
    }
    let mut denials = 0;
    for _ in 0..config.max_attempts + 2 {
        for _ in 0..4 {
            let effects = feed(&mut state, Sym::Zero, &mut now);
            denials += effects
                .iter()
                .filter(|e| **e == Effect::Buzz(BuzzPattern::Deny))
                .count();
        }
    }
    ensure(denials == config.max_attempts as usize, || {
        format!("{denials} denials for a cap of {}", config.max_attempts)
    })?;
    ensure(state.phase == Phase::Recognizing, || {
        format!("after the cap: {:?}", state.phase)
    })?;
    for _ in 0..4 {
        feed(&mut state, Sym::Seven, &mut now);
    }
    ensure(state.locked(), || {
        "right PIN after the cap opened the door".into()
    })
}

fn timing_and_safety() -> Verdict {
    let start = Instant::now();
    common::golden("pin_timeout")?;
    let (trace, rig) = common::run_scenario("pin_timeout");
    let text = trace.render();
    ensure(
        text.contains("30.000 EVENT tick\n30.001 EVENT tick\n30.001 LCD \"PIN timeout\""),
        || format!("timeout not strictly after 30 s:\n{text}"),
    )?;
    ensure(rig.state().phase == Phase::Recognizing, || {
        format!("after timeout: {:?}", rig.state().phase)
    })?;

    let config = Config::default();
    let pins = std::collections::BTreeMap::from([("Nazrin".to_string(), SECRET.to_string())]);
    attempt_cap_holds(&config, &pins)?;

    let mut seen = Explored::default();
    explore(
        &State::new(&config),
        Millis::ZERO,
        &mut Vec::new(),
        &config,
        &pins,
        &mut seen,
    )?;
    ensure(seen.unlocks > 0, || {
        "no sequence unlocked; the enumeration proves nothing".into()
    })?;
    within(Duration::from_secs(30), start.elapsed())?;
    Ok(format!(
        "30 s timeout strict, {} attempts max; {} sequences up to length {DEPTH} over {} symbols, {} unlocks, all safe, {:.1?}",
        config.max_attempts,
        seen.sequences,
        ALPHABET.len(),
        seen.unlocks,
        start.elapsed()
    ))
}

// ---------------------------------------------------------------- recognizer

fn self_match() -> Verdict {
    let start = Instant::now();
    let config = DeskConfig {
        held_out: 0.0,
        strangers: 0,
        ..DeskConfig::default()
    };
    let data = DeskDataset::generate(&config);
    ensure(data.train.len() == 600, || {
        format!("{} training frames", data.train.len())
    })?;
    let mut checked = 0;
    for mode in [Mode::FullFace, Mode::Occluded] {
        let empty = entryway::models::empty_model(mode);
        let crops: Vec<_> = data
            .train
            .par_iter()
            .map(|f| {
                crop_for_mode(mode, &f.image, &f.landmarks, empty.input_size()).map(|(c, _)| c)
            })
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let entries = data
            .train
            .par_iter()
            .zip(&crops)
            .map(|(f, c)| {
                empty.describe(c).map(|feature| ModelEntry {
                    label: f.subject.clone(),
                    feature,
                })
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        let model = RecognizerModel::from_parts(*empty.params(), empty.input_size(), mode, entries)
            .map_err(|e| e.to_string())?;
        let bad: Vec<String> = data
            .train
            .par_iter()
            .zip(&crops)
            .filter_map(|(f, c)| {
                let m = model.predict(c).ok()?;
                (m.label != f.subject || m.confidence != 0.0)
                    .then(|| format!("{f}: {} at {}", m.label, m.confidence))
            })
            .collect();
        ensure(bad.is_empty(), || {
            format!("{mode}: {} mismatches, first {}", bad.len(), bad[0])
        })?;
        checked += crops.len();
    }
    within(Duration::from_secs(60), start.elapsed())?;
    Ok(format!(
        "{checked} predictions (4 users x 150 frames x 2 modes) at exactly 0, {:.1?}",
        start.elapsed()
    ))
}

fn desk_recognition(run: &common::DeskRun) -> Verdict {
    let mut parts = Vec::new();
    for (mode, floor) in [(Mode::FullFace, 0.95), (Mode::Occluded, 0.90)] {
        let s = run.result.summary(mode);
        let rank1 = s.rank1.unwrap_or(0.0);
        ensure(rank1 >= floor, || {
            format!("{mode} rank-1 {rank1:.4} < {floor}")
        })?;
        let records: Vec<_> = run
            .result
            .records
            .iter()
            .filter(|r| r.mode == mode)
            .collect();
        let over = records
            .iter()
            .filter(|r| r.accepted && !r.confidence.is_some_and(|c| c < 70.0))
            .count();
        ensure(over == 0, || {
            format!("{mode}: {over} accepted trials at or above 70")
        })?;
        let strangers: Vec<_> = records.iter().filter(|r| !r.registered).collect();
        let rejected = strangers
            .iter()
            .filter(|r| r.confidence.is_none_or(|c| c >= 70.0))
            .count();
        let share = rejected as f64 / strangers.len() as f64;
        ensure(!strangers.is_empty() && share >= 0.9, || {
            format!("{mode}: strangers rejected {share:.3} < 0.9")
        })?;
        let user_max = records
            .iter()
            .filter(|r| r.registered && r.accepted)
            .filter_map(|r| r.confidence)
            .fold(0.0, f64::max);
        parts.push(format!(
            "{mode}: rank-1 {:.3}, accepted max {user_max:.1}, strangers rejected {rejected}/{}",
            rank1,
            strangers.len()
        ));
    }
    Ok(parts.join("; "))
}

// ---------------------------------------------------------------- metrics

fn brute_force(c: &ConfusionCounts) -> [Option<f64>; 3] {
    let mut cells = Vec::new();
    for (actual, predicted, n) in [
        (true, true, c.tp),
        (false, true, c.fp),
        (true, false, c.fn_),
        (false, false, c.tn),
    ] {
        cells.extend(std::iter::repeat_n((actual, predicted), n as usize));
    }
    let count =
        |f: &dyn Fn(bool, bool) -> bool| cells.iter().filter(|(a, p)| f(*a, *p)).count() as f64;
    let ratio = |num: f64, den: f64| (den > 0.0).then(|| num / den);
    let correct = count(&|a, p| a == p);
    let tp = count(&|a, p| a && p);
    [
        ratio(correct, cells.len() as f64),
        ratio(tp, count(&|_, p| p)),
        ratio(tp, count(&|a, _| a)),
    ]
}

fn metrics_match_brute_force() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut undefined = 0;
    for i in 0..1000 {
        let mut n = || {
            if rng.random_bool(0.15) {
                0
            } else {
                rng.random_range(0..400)
            }
        };
        let c = ConfusionCounts {
            tp: n(),
            fp: n(),
            fn_: n(),
            tn: n(),
        };
        let want = brute_force(&c);
        let Ok(m) = compute_metrics(&c) else {
            ensure(c.total() == 0, || format!("table {i}: {c:?} rejected"))?;
            continue;
        };
        for (got, want, name) in [
            (m.accuracy, want[0], "accuracy"),
            (m.precision, want[1], "precision"),
            (m.recall, want[2], "recall"),
        ] {
            match (got, want) {
                (Ratio::Defined(g), Some(w)) => ensure((g - w).abs() <= 1e-12, || {
                    format!("table {i} {name}: {g} vs {w}")
                })?,
                (Ratio::Undefined, None) => undefined += 1,
                _ => return Err(format!("table {i} {c:?} {name}: {got:?} vs {want:?}")),
            }
        }
    }
    let zero = ConfusionCounts {
        tp: 0,
        fp: 0,
        fn_: 5,
        tn: 3,
    };
    let m = compute_metrics(&zero).map_err(|e| e.to_string())?;
    ensure(m.precision.to_string() == "undefined", || {
        format!("0/0 precision shown as {}", m.precision)
    })?;
    ensure(
        compute_metrics(&ConfusionCounts::default()).is_err(),
        || "empty table accepted".into(),
    )?;
    Ok(format!(
        "1000 tables within 1e-12, {undefined} undefined ratios, 0/0 reports \"undefined\""
    ))
}

// ---------------------------------------------------------------- persistence

fn persistence(run: &common::DeskRun) -> Verdict {
    let mut sizes = Vec::new();
    for mode in [Mode::FullFace, Mode::Occluded] {
        let model = run.models.get(mode).ok_or("missing model")?;
        let bytes = save_model(model);
        let back = load_model(&bytes).map_err(|e| e.to_string())?;
        ensure(&back == model, || format!("{mode}: reloaded model differs"))?;
        ensure(save_model(&back) == bytes, || {
            format!("{mode}: re-saved bytes differ")
        })?;
        let on_disk =
            std::fs::read(entryway::models::model_file(&run.dir.join("models"), mode)).ok();
        if let Some(disk) = on_disk {
            ensure(disk == bytes, || format!("{mode}: file bytes differ"))?;
        }
        sizes.push(bytes.len());
    }
    let bytes = save_model(run.models.get(Mode::Occluded).unwrap());
    let mut magic = bytes.clone();
    magic[0] ^= 0xFF;
    let mut version = bytes.clone();
    version[4..6].copy_from_slice(&9u16.to_le_bytes());
    let truncated = &bytes[..bytes.len() - 3];
    let classes = [
        matches!(load_model(&magic), Err(CodecError::BadMagic(_))),
        matches!(
            load_model(&version),
            Err(CodecError::VersionMismatch { found: 9 })
        ),
        matches!(load_model(truncated), Err(CodecError::Truncated { .. })),
    ];
    ensure(classes == [true; 3], || {
        format!("error classes {classes:?}")
    })?;
    Ok(format!(
        "bit-exact round trip ({} / {} bytes); bad magic, version and truncation detected",
        sizes[0], sizes[1]
    ))
}

// ---------------------------------------------------------------- commands

fn fuzz_input(rng: &mut ChaCha8Rng) -> String {
    const PIECES: [&str; 16] = [
        "/",
        "_",
        "adduser",
        "change",
        "unlock",
        "lock",
        "mode1",
        "mode2",
        "capture",
        "showpassword",
        "7816",
        " ",
        "é",
        "\u{0}",
        "ADDUSER_",
        "__",
    ];
    let n = rng.random_range(0..8);
    (0..n)
        .map(|_| {
            if rng.random_bool(0.6) {
                PIECES[rng.random_range(0..PIECES.len())].to_string()
            } else {
                (0..rng.random_range(1..6))
                    .map(|_| rng.random::<char>())
                    .collect()
            }
        })
        .collect()
}

fn commands() -> Verdict {
    let expected = [
        ("capture", BotCommand::Capture),
        ("/unlock", BotCommand::Unlock),
        ("lock", BotCommand::Lock),
        ("Mode1", BotCommand::Mode1),
        ("mode2", BotCommand::Mode2),
        ("showpassword", BotCommand::ShowPassword),
        (
            "adduser_Aiman",
            BotCommand::AddUser {
                name: "Aiman".into(),
            },
        ),
        (
            "change_Nazrin_7816",
            BotCommand::ChangePin {
                user_id: "Nazrin".into(),
                pin: "7816".into(),
            },
        ),
    ];
    for (text, want) in &expected {
        let got = parse_command(text).map_err(|e| format!("{text:?}: {e}"))?;
        ensure(&got == want, || format!("{text:?} parsed as {got:?}"))?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut parsed = 0;
    for i in 0..100_000 {
        let input = fuzz_input(&mut rng);
        let ok = catch_unwind(|| parse_command(&input).is_ok())
            .map_err(|_| format!("panic on input {i}: {input:?}"))?;
        parsed += usize::from(ok);
    }

    let dir = common::tempdir();
    let reg = common::trained_registry(dir.path(), &[("Nazrin", 0, "7816")], 3);
    let mut st = Station::new(
        StationConfig::default(),
        reg,
        common::ManualClock::default().clock(),
    );
    let store = std::fs::read(st.registry().store_path()).map_err(|e| e.to_string())?;
    let (view, seq) = (st.view(), st.last_seq());
    for (text, _) in &expected {
        let d = dispatch(&mut st, &ChatMessage::text("stranger", *text, Millis::ZERO));
        ensure(
            d.reply.text == REFUSAL && !d.mutated && d.command.is_none(),
            || format!("{text:?} from a stranger: {d:?}"),
        )?;
    }
    let after = std::fs::read(st.registry().store_path()).map_err(|e| e.to_string())?;
    ensure(
        after == store && st.view() == view && st.last_seq() == seq,
        || "non-admin dispatch changed state".into(),
    )?;
    Ok(format!(
        "8 commands parse; 100000 fuzz inputs ({parsed} valid), no panics; non-admin: 0 mutations"
    ))
}

// ---------------------------------------------------------------- compute proxy

fn median(mut v: Vec<Duration>) -> Duration {
    v.sort_unstable();
    v[v.len() / 2]
}

fn compute_proxy(run: &common::DeskRun) -> Verdict {
    let mut rows = Manifest::read(&run.dir.join("train.tsv"))
        .map_err(|e| e.to_string())?
        .rows;
    rows.extend(
        Manifest::read(&run.dir.join("test.tsv"))
            .map_err(|e| e.to_string())?
            .rows,
    );
    let mut frames = Vec::new();
    for row in &rows {
        let lm = read_sidecar(&row.path).map_err(|e| e.to_string())?;
        if lm.face.is_none() || lm.eye1.is_none() || lm.eye2.is_none() || lm.nose.is_none() {
            continue;
        }
        let face = region_for(Mode::FullFace, &lm).map_err(|e| e.to_string())?;
        let occ = region_for(Mode::Occluded, &lm).map_err(|e| e.to_string())?;
        ensure(occ.area() < face.area(), || {
            format!(
                "{}: occluded {} >= face {}",
                row.path.display(),
                occ.area(),
                face.area()
            )
        })?;
        frames.push((row.path.clone(), lm));
    }
    let full = run.models.get(Mode::FullFace).unwrap();
    let occluded = run.models.get(Mode::Occluded).unwrap();
    let (mut t_full, mut t_occ) = (Vec::new(), Vec::new());
    for (path, lm) in frames.iter().take(100) {
        let img = pgm::read(path).map_err(|e| e.to_string())?;
        for (mode, model, times) in [
            (Mode::Occluded, occluded, &mut t_occ),
            (Mode::FullFace, full, &mut t_full),
        ] {
            let start = Instant::now();
            let (crop, _) =
                crop_for_mode(mode, &img, lm, model.input_size()).map_err(|e| e.to_string())?;
            std::hint::black_box(model.describe(&crop).map_err(|e| e.to_string())?);
            times.push(start.elapsed());
        }
    }
    let (mf, mo) = (median(t_full), median(t_occ));
    ensure(mo <= mf, || {
        format!("median occluded extraction {mo:?} > full {mf:?}")
    })?;
    Ok(format!(
        "{} frames: occluded ROI smaller; median extraction occluded {mo:.1?} vs full {mf:.1?}",
        frames.len()
    ))
}

// ---------------------------------------------------------------- runner

fn run(name: &str, f: impl FnOnce() -> Verdict) -> bool {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into()))
    });
    match outcome {
        Ok(detail) => {
            println!("PASS  {name}: {detail}");
            true
        }
        Err(why) => {
            println!("FAIL  {name}: {why}");
            false
        }
    }
}

fn main() -> ExitCode {
    let dir = common::tempdir();
    let desk = catch_unwind(|| common::desk_run(dir.path()));
    let mut ok = true;
    ok &= run("eyes+nose union vs corner oracle", union_matches_oracle);
    ok &= run("password scenarios (golden traces)", password_scenarios);
    ok &= run(
        "PIN timeout, attempt cap, two-factor safety",
        timing_and_safety,
    );
    ok &= run("LBPH self-match", self_match);
    match &desk {
        Ok(d) => {
            if let Err(e) = d.models.save(&d.dir.join("models")) {
                println!("note: could not save desk models: {e}");
            }
            ok &= run("desk-scale recognition", || desk_recognition(d));
            ok &= run("metrics vs brute force", metrics_match_brute_force);
            ok &= run("model persistence", || persistence(d));
            ok &= run("command grammar, fuzz, non-admin refusal", commands);
            ok &= run("compute proxy (ROI size, extraction time)", || {
                compute_proxy(d)
            });
        }
        Err(_) => {
            println!("FAIL  desk-scale recognition: could not build the desk run");
            run("metrics vs brute force", metrics_match_brute_force);
            run("command grammar, fuzz, non-admin refusal", commands);
            ok = false;
        }
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
