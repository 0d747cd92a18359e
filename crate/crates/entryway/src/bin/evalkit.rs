use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use entryway::annotations;
use entryway::evalkit::{
    distance_sweep, run_suite, train_from_manifest, validate_scales, EvalError, Manifest,
    SuiteConfig,
};
use entryway::models::ModelSet;
use entryway::pgm;
use entryway::synth::{DeskConfig, DeskDataset};
use entryway_core::Mode;

#[derive(Parser)]
#[command(
    name = "evalkit",
    version,
    about = "Train, evaluate and stress LBPH face models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Full,
    Occluded,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Train both models from the registered rows of a manifest.
    Train {
        /// Manifest file, or a directory holding `train.tsv`.
        manifest: PathBuf,
        /// Output directory for full.lbph and occluded.lbph.
        out: PathBuf,
    },
    /// Run the evaluation suite and print the report.
    Eval {
        manifest: PathBuf,
        models: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        mode: ModeArg,
        #[arg(long, default_value_t = 70.0)]
        threshold: f64,
        /// Also write report.txt, trials.csv and summary.csv here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Shrink one frame step by step and report where recognition breaks.
    Sweep {
        image: PathBuf,
        models: PathBuf,
        #[arg(long, value_enum, default_value = "full")]
        mode: ModeArg,
        /// Descending scales in (0, 1].
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "1,0.75,0.5,0.35,0.25,0.15,0.1"
        )]
        scales: Vec<f64>,
        /// Expected identity; without it any accepted match counts.
        #[arg(long)]
        subject: Option<String>,
        #[arg(long, default_value_t = 70.0)]
        threshold: f64,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Write the synthetic desk dataset with manifests.
    Synth {
        out: PathBuf,
        #[arg(long, default_value_t = DeskConfig::default().seed)]
        seed: u64,
        #[arg(long, default_value_t = DeskConfig::default().frames_per_user)]
        frames: usize,
    },
}

/// Bad input the caller can fix: a missing or malformed manifest, too
/// many missing frames, invalid scales. Exits with status 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct Invalid(String);

fn classify(e: EvalError) -> anyhow::Error {
    match e {
        EvalError::Io { .. }
        | EvalError::Manifest { .. }
        | EvalError::TooManyMissing { .. }
        | EvalError::Scale(_)
        | EvalError::ScaleOrder => Invalid(e.to_string()).into(),
        other => other.into(),
    }
}

fn write_file(path: &Path, body: &str) -> anyhow::Result<()> {
    fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

fn suite_config(mode: ModeArg, threshold: f64) -> SuiteConfig {
    SuiteConfig {
        accept_threshold: threshold,
        full: !matches!(mode, ModeArg::Occluded),
        occluded: !matches!(mode, ModeArg::Full),
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Train { manifest, out } => {
            let path = if manifest.is_dir() {
                manifest.join("train.tsv")
            } else {
                manifest
            };
            let manifest = Manifest::read(&path).map_err(classify)?;
            let detector = manifest.detector().map_err(classify)?;
            let (models, report) = train_from_manifest(&manifest, &detector).map_err(classify)?;
            fs::create_dir_all(&out)?;
            models.save(&out)?;
            println!(
                "trained full: {} entries ({} skipped), occluded: {} entries ({} skipped)",
                report.entries[0], report.skipped[0], report.entries[1], report.skipped[1]
            );
        }
        Command::Eval {
            manifest,
            models,
            mode,
            threshold,
            report,
        } => {
            let manifest = Manifest::read(&manifest).map_err(classify)?;
            let models = ModelSet::load(&models)?;
            let detector = manifest.detector().map_err(classify)?;
            let result = run_suite(
                &manifest,
                &models,
                &detector,
                &suite_config(mode, threshold),
            )
            .map_err(classify)?;
            let text = result.render_text();
            print!("{text}");
            if let Some(dir) = report {
                fs::create_dir_all(&dir)?;
                write_file(&dir.join("report.txt"), &text)?;
                write_file(&dir.join("trials.csv"), &result.trials_csv())?;
                write_file(&dir.join("summary.csv"), &result.summary_csv())?;
            }
        }
        Command::Sweep {
            image,
            models,
            mode,
            scales,
            subject,
            threshold,
            csv,
        } => {
            validate_scales(&scales).map_err(classify)?;
            let mode = match mode {
                ModeArg::Full => Mode::FullFace,
                ModeArg::Occluded => Mode::Occluded,
                ModeArg::Both => return Err(Invalid("sweep runs one mode at a time".into()).into()),
            };
            let img = pgm::read(&image).with_context(|| image.display().to_string())?;
            let landmarks = annotations::read_sidecar(&image)?;
            let set = ModelSet::load(&models)?;
            let model = set.get(mode).ok_or(EvalError::MissingModel(mode))?;
            let sweep = distance_sweep(
                &img,
                &landmarks,
                model,
                subject.as_deref(),
                &scales,
                threshold,
            )
            .map_err(classify)?;
            print!("{}", sweep.render_text());
            if let Some(path) = csv {
                write_file(&path, &sweep.csv())?;
            }
        }
        Command::Synth { out, seed, frames } => {
            let config = DeskConfig {
                seed,
                frames_per_user: frames,
                ..DeskConfig::default()
            };
            for manifest in DeskDataset::generate(&config).write(&out)? {
                println!("{}", manifest.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Invalid>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
