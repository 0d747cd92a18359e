#![allow(dead_code)]

use std::path::{Path, PathBuf};

use entryway::rig::{Rig, ScriptedRecognizer, Trace};
use entryway::scenario::Scenario;
use entryway_core::controller::{Config, Outcome};

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

pub fn scenario_dir() -> PathBuf {
    data_dir().join("scenarios")
}

/// Nazrin's face, recognized well under the threshold.
pub fn nazrin() -> ScriptedRecognizer {
    ScriptedRecognizer(Outcome::Match {
        label: "Nazrin".into(),
        confidence: 34.18,
    })
}

pub fn run_scenario(name: &str) -> (Trace, Rig) {
    let path = scenario_dir().join(format!("{name}.scn"));
    let text = std::fs::read_to_string(&path).unwrap();
    let scenario = Scenario::parse(&text).unwrap();
    let mut rig = Rig::new(Config::default());
    let trace = scenario.run(&mut rig, &scenario_dir(), &nazrin()).unwrap();
    (trace, rig)
}

/// Compares against `<name>.trace`. With `UPDATE_GOLDEN=1` the file is
/// rewritten instead.
pub fn golden(name: &str) -> Result<Trace, String> {
    let (trace, _) = run_scenario(name);
    let rendered = trace.render();
    let path = scenario_dir().join(format!("{name}.trace"));
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, &rendered).unwrap();
    }
    let expected =
        std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    if expected == rendered {
        Ok(trace)
    } else {
        Err(format!(
            "{name}: trace differs from golden\n--- expected\n{expected}--- actual\n{rendered}"
        ))
    }
}

pub fn tempdir() -> tempfile::TempDir {
    tempfile::tempdir().unwrap()
}

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use entryway::registry::{Expression, Registry};
use entryway::station::Clock;
use entryway::synth::{Capture, Subject, SynthFrame};
use entryway_core::controller::Millis;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A clock the test moves by hand.
#[derive(Clone, Default)]
pub struct ManualClock(Arc<AtomicU64>);

impl ManualClock {
    pub fn clock(&self) -> Clock {
        let inner = self.0.clone();
        Box::new(move || Millis(inner.load(Ordering::SeqCst)))
    }

    pub fn advance_ms(&self, ms: u64) {
        self.0.fetch_add(ms, Ordering::SeqCst);
    }
}

/// Synthetic captures of subject `index` (registered or not).
pub fn captures(
    index: usize,
    registered: bool,
    n: usize,
    seed: u64,
    masked: bool,
) -> Vec<SynthFrame> {
    let subject = Subject::generate(11, index, registered);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let c = Capture {
                expression: [Expression::Normal, Expression::Happy, Expression::Sad][i % 3],
                masked,
                noise: 2.0,
            };
            subject.capture(c, &mut rng)
        })
        .collect()
}

/// A registry under `root` with each `(name, subject index, pin)` enrolled
/// from `frames` synthetic captures.
pub fn trained_registry(root: &Path, users: &[(&str, usize, &str)], frames: usize) -> Registry {
    let mut reg = Registry::open(root).unwrap();
    for &(name, index, pin) in users {
        reg.add_user(name, name).unwrap();
        reg.set_pin(name, pin).unwrap();
        let mut session = reg.start_enrollment(name, frames).unwrap();
        for f in captures(index, true, frames, index as u64, false) {
            reg.enroll_frame(
                &mut session,
                &f.image,
                Some(&f.landmarks),
                Some(f.expression),
            )
            .unwrap();
        }
        reg.finalize_with_sidecars(&mut session).unwrap();
    }
    reg
}

use entryway::evalkit::{run_suite, train_from_manifest, Manifest, SuiteConfig, SuiteResult};
use entryway::models::ModelSet;
use entryway::synth::{DeskConfig, DeskDataset};

pub struct DeskRun {
    pub dir: PathBuf,
    pub models: ModelSet,
    pub result: SuiteResult,
}

/// Writes the default desk dataset under `root`, trains on its train split
/// and runs the suite over held-out users and strangers.
pub fn desk_run(root: &Path) -> DeskRun {
    let dir = root.join("desk");
    DeskDataset::generate(&DeskConfig::default())
        .write(&dir)
        .unwrap();
    let train = Manifest::read(&dir.join("train.tsv")).unwrap();
    let (models, _) = train_from_manifest(&train, &train.detector().unwrap()).unwrap();
    let test = Manifest::read(&dir.join("test.tsv")).unwrap();
    let result = run_suite(
        &test,
        &models,
        &test.detector().unwrap(),
        &SuiteConfig::default(),
    )
    .unwrap();
    DeskRun {
        dir,
        models,
        result,
    }
}
