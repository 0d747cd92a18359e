use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use entryway::api::{self, ApiState, TOKEN_ENV};
use entryway::gateway::LogTransport;
use entryway::models::ModelSet;
use entryway::registry::Registry;
use entryway::rig::{FrameRecognizer, ModelRecognizer, Rig, ScriptedRecognizer};
use entryway::scenario::{parse_event, Scenario};
use entryway::settings::Settings;
use entryway::station::{wall_clock, Station};
use entryway_core::controller::{Event, Outcome};

#[derive(Parser)]
#[command(name = "entryway", version, about = "Face + PIN door controller")]
struct Cli {
    /// Settings file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario script on the virtual rig and print its trace.
    Scenario {
        file: PathBuf,
        /// Recognize camera frames with the models in this directory.
        #[arg(long, conflicts_with = "outcome")]
        models: Option<PathBuf>,
        /// Fixed recognition result for every frame, e.g. "recognized Nazrin 34".
        #[arg(long)]
        outcome: Option<String>,
    },
    /// Serve the HTTP API backed by a registry directory.
    Serve {
        #[arg(long, default_value = "registry")]
        registry: PathBuf,
        /// Overrides the bind address from the settings file.
        #[arg(long)]
        bind: Option<std::net::SocketAddr>,
    },
}

fn scripted(text: &str) -> anyhow::Result<Outcome> {
    let words: Vec<&str> = text.split_whitespace().collect();
    match parse_event(&words) {
        Ok(Event::RecognitionDone { outcome, .. }) => Ok(outcome),
        _ => bail!("--outcome expects `recognized <label> <confidence>`, `unknown [confidence]` or `noface`"),
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let settings = match &cli.config {
        Some(p) => Settings::load(p)?,
        None => Settings::default(),
    };
    match cli.command {
        Command::Scenario {
            file,
            models,
            outcome,
        } => {
            let text = std::fs::read_to_string(&file)
                .with_context(|| format!("reading {}", file.display()))?;
            let scenario = Scenario::parse(&text).with_context(|| file.display().to_string())?;
            let base = file.parent().unwrap_or(std::path::Path::new("."));
            let recognizer: Box<dyn FrameRecognizer> = match (models, outcome) {
                (Some(dir), _) => {
                    let set = ModelSet::load(&dir)?;
                    Box::new(ModelRecognizer {
                        full: set.full,
                        occluded: set.occluded,
                        detector: scenario.camera_landmarks(base)?,
                    })
                }
                (None, Some(o)) => Box::new(ScriptedRecognizer(scripted(&o)?)),
                (None, None) => Box::new(ScriptedRecognizer(Outcome::Unknown { confidence: None })),
            };
            let mut rig = Rig::new(settings.station.controller.clone());
            let trace = scenario.run(&mut rig, base, recognizer.as_ref())?;
            print!("{}", trace.render());
            Ok(())
        }
        Command::Serve { registry, bind } => {
            let registry = Registry::open(&registry)?;
            let token = std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty());
            if token.is_none() {
                log::warn!("{TOKEN_ENV} is not set; admin endpoints will refuse every request");
            }
            let state = ApiState::new(
                Station::new(settings.station.clone(), registry, wall_clock()),
                token,
            );
            api::spawn_background(
                state.clone(),
                Box::new(LogTransport),
                Duration::from_millis(250),
            );
            let addr = bind.unwrap_or(settings.bind);
            tokio::runtime::Runtime::new()?.block_on(api::serve(addr, state))?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
