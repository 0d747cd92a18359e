//! Evaluation over labelled frame manifests: per-user, per-expression and
//! masked confidence tables, confusion counts per mode, and the
//! resolution-loss distance sweep.
//!
//! A manifest is a TSV file with the header
//! `path subject expression masked registered`; paths are relative to the
//! manifest's directory and each frame's landmarks come from its `.boxes`
//! sidecar.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use entryway_core::metrics::{compute_metrics, ConfusionCounts, Metrics};
use entryway_core::pipeline::{crop_for_mode, recognize_with};
use entryway_core::{
    Detector, Frame, GrayImage, LandmarkSet, Mode, PipelineError, RecognizerModel,
};

use crate::annotations::{self, AnnotationDetector};
use crate::models::{empty_model, ModelSet};
use crate::pgm;
use crate::registry::Expression;

pub const MANIFEST_HEADER: [&str; 5] = ["path", "subject", "expression", "masked", "registered"];
/// Runs abort when more than this share of manifest rows point at missing files.
pub const MAX_MISSING: f64 = 0.2;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: {reason}")]
    Manifest {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("{missing} of {rows} manifest rows reference missing files (first: {first})")]
    TooManyMissing {
        missing: usize,
        rows: usize,
        first: PathBuf,
    },
    #[error("no usable training frames")]
    NoTrainingData,
    #[error("scale {0} outside (0, 1]")]
    Scale(f64),
    #[error("scales must be listed in descending order")]
    ScaleOrder,
    #[error("no {0} model loaded")]
    MissingModel(Mode),
    #[error("{0}")]
    Frame(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    /// 1-based line in the manifest file.
    pub line: usize,
    pub path: PathBuf,
    pub subject: String,
    pub expression: Option<Expression>,
    pub masked: bool,
    pub registered: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub path: PathBuf,
    pub rows: Vec<ManifestRow>,
}

fn parse_flag(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Some(true),
        "false" | "no" | "0" => Some(false),
        _ => None,
    }
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Manifest, EvalError> {
        let text = fs::read_to_string(path).map_err(|source| EvalError::Io {
            path: path.into(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Manifest::parse(&text, path, base)
    }

    pub fn parse(text: &str, origin: &Path, base: &Path) -> Result<Manifest, EvalError> {
        let err = |line: usize, reason: String| EvalError::Manifest {
            path: origin.into(),
            line,
            reason,
        };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.split('\t').eq(MANIFEST_HEADER) => {}
            _ => {
                return Err(err(
                    1,
                    format!("header must be {:?}", MANIFEST_HEADER.join("\t")),
                ))
            }
        }
        let mut rows = Vec::new();
        for (idx, line) in lines {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [path, subject, expression, masked, registered] = fields[..] else {
                return Err(err(
                    line_no,
                    format!("expected 5 tab-separated fields, got {}", fields.len()),
                ));
            };
            let expression = match expression {
                "" | "-" => None,
                e => Some(e.parse().map_err(|e| err(line_no, e))?),
            };
            let flag = |name: &str, v: &str| {
                parse_flag(v)
                    .ok_or_else(|| err(line_no, format!("{name}: expected true/false, got {v:?}")))
            };
            rows.push(ManifestRow {
                line: line_no,
                path: base.join(path),
                subject: subject.to_string(),
                expression,
                masked: flag("masked", masked)?,
                registered: flag("registered", registered)?,
            });
        }
        Ok(Manifest {
            path: origin.into(),
            rows,
        })
    }

    /// An annotation detector over every row whose sidecar exists.
    pub fn detector(&self) -> Result<AnnotationDetector, EvalError> {
        let mut det = AnnotationDetector::new();
        for row in &self.rows {
            let set = annotations::read_sidecar(&row.path)
                .map_err(|e| EvalError::Frame(e.to_string()))?;
            if !set.is_empty() {
                det.insert(row.path.to_string_lossy(), set);
            }
        }
        Ok(det)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub row: usize,
    pub path: PathBuf,
    pub subject: String,
    pub registered: bool,
    pub expression: Option<Expression>,
    pub masked: bool,
    pub mode: Mode,
    pub predicted: Option<String>,
    pub confidence: Option<f64>,
    pub accepted: bool,
    /// Why no prediction was made, if none was.
    pub failure: Option<String>,
}

impl TrialRecord {
    pub fn rank1_correct(&self) -> bool {
        self.predicted.as_deref() == Some(self.subject.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteConfig {
    pub accept_threshold: f64,
    pub full: bool,
    pub occluded: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            accept_threshold: 70.0,
            full: true,
            occluded: true,
        }
    }
}

impl SuiteConfig {
    pub fn modes(&self) -> Vec<Mode> {
        let mut modes = Vec::new();
        if self.full {
            modes.push(Mode::FullFace);
        }
        if self.occluded {
            modes.push(Mode::Occluded);
        }
        modes
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub records: Vec<TrialRecord>,
    pub missing: Vec<PathBuf>,
    pub threshold: f64,
}

/// Accepting a registered subject means matching them, under the threshold.
/// An unregistered subject is accepted by any match under the threshold.
pub fn accepts(
    registered: bool,
    subject: &str,
    label: &str,
    confidence: f64,
    threshold: f64,
) -> bool {
    confidence < threshold && (!registered || label == subject)
}

pub fn run_suite(
    manifest: &Manifest,
    models: &ModelSet,
    detector: &(dyn Detector + Sync),
    config: &SuiteConfig,
) -> Result<SuiteResult, EvalError> {
    let modes = config.modes();
    for &mode in &modes {
        if models.get(mode).is_none() {
            return Err(EvalError::MissingModel(mode));
        }
    }
    let missing: Vec<PathBuf> = manifest
        .rows
        .iter()
        .filter(|r| !r.path.is_file())
        .map(|r| r.path.clone())
        .collect();
    if !manifest.rows.is_empty() && missing.len() as f64 > MAX_MISSING * manifest.rows.len() as f64
    {
        return Err(EvalError::TooManyMissing {
            missing: missing.len(),
            rows: manifest.rows.len(),
            first: missing[0].clone(),
        });
    }
    for m in &missing {
        log::warn!("missing frame {}", m.display());
    }
    let per_row: Vec<Vec<TrialRecord>> = manifest
        .rows
        .par_iter()
        .enumerate()
        .filter(|(_, r)| r.path.is_file())
        .map(|(i, row)| {
            let image = pgm::read(&row.path);
            modes
                .iter()
                .map(|&mode| {
                    let base = TrialRecord {
                        row: i,
                        path: row.path.clone(),
                        subject: row.subject.clone(),
                        registered: row.registered,
                        expression: row.expression,
                        masked: row.masked,
                        mode,
                        predicted: None,
                        confidence: None,
                        accepted: false,
                        failure: None,
                    };
                    let image = match &image {
                        Ok(img) => img,
                        Err(e) => {
                            return TrialRecord {
                                failure: Some(e.to_string()),
                                ..base
                            }
                        }
                    };
                    let model = models.get(mode).expect("checked above");
                    let id = row.path.to_string_lossy();
                    match recognize_with(mode, model, &Frame::new(&id, image), detector) {
                        Ok(r) => TrialRecord {
                            accepted: accepts(
                                row.registered,
                                &row.subject,
                                &r.matched.label,
                                r.matched.confidence,
                                config.accept_threshold,
                            ),
                            predicted: Some(r.matched.label),
                            confidence: Some(r.matched.confidence),
                            ..base
                        },
                        Err(e) => TrialRecord {
                            failure: Some(e.to_string()),
                            ..base
                        },
                    }
                })
                .collect()
        })
        .collect();
    Ok(SuiteResult {
        records: per_row.into_iter().flatten().collect(),
        missing,
        threshold: config.accept_threshold,
    })
}

/// Trains both models from the registered rows of a manifest, labelling each
/// frame with its subject. Frames without usable landmarks for a mode are
/// skipped for that mode.
pub fn train_from_manifest(
    manifest: &Manifest,
    detector: &(dyn Detector + Sync),
) -> Result<(ModelSet, TrainReport), EvalError> {
    let rows: Vec<&ManifestRow> = manifest.rows.iter().filter(|r| r.registered).collect();
    let crops: Vec<[Option<GrayImage>; 2]> = rows
        .par_iter()
        .map(|row| {
            let image = pgm::read(&row.path)
                .map_err(|e| EvalError::Frame(format!("{}: {e}", row.path.display())))?;
            let id = row.path.to_string_lossy();
            let landmarks = detector.detect(&Frame::new(&id, &image));
            Ok([Mode::FullFace, Mode::Occluded].map(|mode| crop(mode, &image, &landmarks)))
        })
        .collect::<Result<_, EvalError>>()?;
    let mut set = ModelSet::default();
    let mut report = TrainReport::default();
    for (slot, mode) in [Mode::FullFace, Mode::Occluded].into_iter().enumerate() {
        let mut model = empty_model(mode);
        let samples: Vec<(&str, &GrayImage)> = rows
            .iter()
            .zip(&crops)
            .filter_map(|(row, c)| c[slot].as_ref().map(|img| (row.subject.as_str(), img)))
            .collect();
        let features: Vec<_> = samples
            .par_iter()
            .map(|(_, img)| model.describe(img))
            .collect::<Result<_, _>>()
            .map_err(|e| EvalError::Frame(e.to_string()))?;
        let entries = samples
            .iter()
            .zip(features)
            .map(|((label, _), feature)| entryway_core::lbph::ModelEntry {
                label: (*label).to_string(),
                feature,
            })
            .collect();
        model = RecognizerModel::from_parts(*model.params(), model.input_size(), mode, entries)
            .map_err(|e| EvalError::Frame(e.to_string()))?;
        report.skipped[slot] = rows.len() - model.len();
        report.entries[slot] = model.len();
        if !model.is_empty() {
            *set.slot(mode) = Some(model);
        }
    }
    if set.full.is_none() && set.occluded.is_none() {
        return Err(EvalError::NoTrainingData);
    }
    Ok((set, report))
}

fn crop(mode: Mode, image: &GrayImage, landmarks: &LandmarkSet) -> Option<GrayImage> {
    crop_for_mode(mode, image, landmarks, mode.default_input_size())
        .ok()
        .map(|(c, _)| c)
}

/// Entries trained and frames skipped, indexed `[full, occluded]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TrainReport {
    pub entries: [usize; 2],
    pub skipped: [usize; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub trials: usize,
    pub accepted: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    fn of<'a>(records: impl IntoIterator<Item = &'a TrialRecord>) -> Option<Stats> {
        let mut trials = 0;
        let mut accepted = 0;
        let mut scored = 0;
        let mut sum = 0.0;
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for r in records {
            trials += 1;
            accepted += usize::from(r.accepted);
            if let Some(c) = r.confidence {
                scored += 1;
                sum += c;
                min = min.min(c);
                max = max.max(c);
            }
        }
        // Unscored trials count towards `trials` but not the confidence columns.
        let any = scored > 0;
        (trials > 0).then(|| Stats {
            trials,
            accepted,
            mean: if any { sum / scored as f64 } else { f64::NAN },
            min: if any { min } else { f64::NAN },
            max: if any { max } else { f64::NAN },
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeSummary {
    pub mode: Mode,
    pub counts: ConfusionCounts,
    pub metrics: Option<Metrics>,
    /// Share of registered trials whose nearest entry carries their label.
    pub rank1: Option<f64>,
    /// Registered trials the pipeline could not score (missing landmarks).
    pub failures: usize,
}

impl SuiteResult {
    pub fn modes(&self) -> Vec<Mode> {
        let mut modes: Vec<Mode> = Vec::new();
        for r in &self.records {
            if !modes.contains(&r.mode) {
                modes.push(r.mode);
            }
        }
        modes
    }

    pub fn summary(&self, mode: Mode) -> ModeSummary {
        let mut counts = ConfusionCounts::default();
        let mut registered = 0usize;
        let mut correct = 0usize;
        let mut failures = 0;
        for r in self.records.iter().filter(|r| r.mode == mode) {
            counts.record(r.registered, r.accepted);
            if r.registered {
                registered += 1;
                correct += usize::from(r.rank1_correct());
                failures += usize::from(r.failure.is_some());
            }
        }
        ModeSummary {
            mode,
            counts,
            metrics: compute_metrics(&counts).ok(),
            rank1: (registered > 0).then(|| correct as f64 / registered as f64),
            failures,
        }
    }

    fn registered_users(&self) -> Vec<&str> {
        let mut users: Vec<&str> = self
            .records
            .iter()
            .filter(|r| r.registered)
            .map(|r| r.subject.as_str())
            .collect();
        users.sort_unstable();
        users.dedup();
        users
    }

    fn stats(&self, pred: impl Fn(&TrialRecord) -> bool) -> Option<Stats> {
        Stats::of(self.records.iter().filter(|r| pred(r)))
    }

    /// Aligned text tables: per user and mode (unmasked), per expression,
    /// masked frames under the occluded model, and confusion per mode.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let modes = self.modes();
        let users = self.registered_users();
        let cell = |s: Option<Stats>| match s {
            Some(s) if !s.mean.is_nan() => format!(
                "{:.2} [{:.2}-{:.2}] {}/{}",
                s.mean, s.min, s.max, s.accepted, s.trials
            ),
            Some(s) => format!("- {}/{}", s.accepted, s.trials),
            None => "-".to_string(),
        };

        let mut table = vec![{
            let mut h = vec!["user".to_string()];
            h.extend(modes.iter().map(|m| format!("{m} mean [min-max] accepted")));
            h
        }];
        for u in &users {
            let mut row = vec![u.to_string()];
            for &m in &modes {
                row.push(cell(
                    self.stats(|r| r.mode == m && r.subject == *u && !r.masked),
                ));
            }
            table.push(row);
        }
        section(&mut out, "Recognition by user (unmasked)", &table);

        let mut table = vec![{
            let mut h = vec!["user".to_string(), "expression".to_string()];
            h.extend(modes.iter().map(|m| format!("{m} mean [min-max] accepted")));
            h
        }];
        for u in &users {
            for e in [Expression::Normal, Expression::Happy, Expression::Sad] {
                let mut row = vec![u.to_string(), e.to_string()];
                let mut any = false;
                for &m in &modes {
                    let s = self.stats(|r| {
                        r.mode == m && r.subject == *u && !r.masked && r.expression == Some(e)
                    });
                    any |= s.is_some();
                    row.push(cell(s));
                }
                if any {
                    table.push(row);
                }
            }
        }
        section(&mut out, "Recognition by expression (unmasked)", &table);

        if modes.contains(&Mode::Occluded) {
            let mut table = vec![vec![
                "user".to_string(),
                "occluded mean [min-max] accepted".to_string(),
                "result".to_string(),
            ]];
            for u in &users {
                if let Some(s) =
                    self.stats(|r| r.mode == Mode::Occluded && r.subject == *u && r.masked)
                {
                    let result = if s.accepted == s.trials {
                        "Pass"
                    } else {
                        "Fail"
                    };
                    table.push(vec![u.to_string(), cell(Some(s)), result.to_string()]);
                }
            }
            if table.len() > 1 {
                section(&mut out, "Masked frames, occluded model", &table);
            }
        }

        let mut table = vec![[
            "mode",
            "tp",
            "fp",
            "fn",
            "tn",
            "accuracy",
            "precision",
            "recall",
            "rank-1",
            "unscored",
        ]
        .map(String::from)
        .to_vec()];
        for &m in &modes {
            let s = self.summary(m);
            let (a, p, r) = match s.metrics {
                Some(x) => (
                    format!("{:.4}", x.accuracy),
                    format!("{:.4}", x.precision),
                    format!("{:.4}", x.recall),
                ),
                None => ("undefined".into(), "undefined".into(), "undefined".into()),
            };
            table.push(vec![
                m.to_string(),
                s.counts.tp.to_string(),
                s.counts.fp.to_string(),
                s.counts.fn_.to_string(),
                s.counts.tn.to_string(),
                a,
                p,
                r,
                s.rank1.map_or("undefined".into(), |v| format!("{v:.4}")),
                s.failures.to_string(),
            ]);
        }
        section(
            &mut out,
            &format!("Confusion (accept below {})", self.threshold),
            &table,
        );
        if !self.missing.is_empty() {
            let _ = writeln!(out, "Missing frames ({}):", self.missing.len());
            for m in &self.missing {
                let _ = writeln!(out, "  {}", m.display());
            }
        }
        out
    }

    /// One row per trial, in manifest order.
    pub fn trials_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "row",
            "path",
            "subject",
            "registered",
            "expression",
            "masked",
            "mode",
            "predicted",
            "confidence",
            "accepted",
            "failure",
        ])
        .expect("in-memory write");
        for r in &self.records {
            w.write_record([
                r.row.to_string(),
                r.path.display().to_string(),
                r.subject.clone(),
                r.registered.to_string(),
                r.expression.map_or("-".into(), |e| e.to_string()),
                r.masked.to_string(),
                r.mode.to_string(),
                r.predicted.clone().unwrap_or_default(),
                r.confidence.map_or(String::new(), |c| format!("{c:.6}")),
                r.accepted.to_string(),
                r.failure.clone().unwrap_or_default(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }

    /// Grouped statistics in long form, followed by the confusion rows.
    pub fn summary_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "table",
            "subject",
            "expression",
            "mode",
            "trials",
            "accepted",
            "mean",
            "min",
            "max",
        ])
        .expect("in-memory write");
        let f = |v: f64| {
            if v.is_nan() {
                String::new()
            } else {
                format!("{v:.6}")
            }
        };
        let mut emit = |table: &str, subject: &str, expr: &str, mode: Mode, s: Option<Stats>| {
            if let Some(s) = s {
                w.write_record([
                    table.to_string(),
                    subject.to_string(),
                    expr.to_string(),
                    mode.to_string(),
                    s.trials.to_string(),
                    s.accepted.to_string(),
                    f(s.mean),
                    f(s.min),
                    f(s.max),
                ])
                .expect("in-memory write");
            }
        };
        for u in self.registered_users() {
            for m in self.modes() {
                emit(
                    "user",
                    u,
                    "-",
                    m,
                    self.stats(|r| r.mode == m && r.subject == u && !r.masked),
                );
                for e in [Expression::Normal, Expression::Happy, Expression::Sad] {
                    let s = self.stats(|r| {
                        r.mode == m && r.subject == u && !r.masked && r.expression == Some(e)
                    });
                    emit("expression", u, e.as_str(), m, s);
                }
                emit(
                    "masked",
                    u,
                    "-",
                    m,
                    self.stats(|r| r.mode == m && r.subject == u && r.masked),
                );
            }
        }
        let mut text =
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8");
        text.push('\n');
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "mode",
            "tp",
            "fp",
            "fn",
            "tn",
            "accuracy",
            "precision",
            "recall",
            "rank1",
        ])
        .expect("in-memory write");
        for m in self.modes() {
            let s = self.summary(m);
            let metric = |r: Option<entryway_core::metrics::Ratio>| {
                r.map_or("undefined".into(), |r| format!("{r:.6}"))
            };
            w.write_record([
                m.to_string(),
                s.counts.tp.to_string(),
                s.counts.fp.to_string(),
                s.counts.fn_.to_string(),
                s.counts.tn.to_string(),
                metric(s.metrics.map(|x| x.accuracy)),
                metric(s.metrics.map(|x| x.precision)),
                metric(s.metrics.map(|x| x.recall)),
                s.rank1.map_or("undefined".into(), |v| format!("{v:.6}")),
            ])
            .expect("in-memory write");
        }
        text.push_str(
            std::str::from_utf8(&w.into_inner().expect("in-memory flush")).expect("csv is utf-8"),
        );
        text
    }
}

fn section(out: &mut String, title: &str, rows: &[Vec<String>]) {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let _ = writeln!(out, "{title}");
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| format!("{s:<w$}", w = widths[c]))
            .collect();
        let _ = writeln!(out, "  {}", line.join("  ").trim_end());
    }
    out.push('\n');
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub scale: f64,
    pub label: String,
    pub confidence: f64,
    pub recognized: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub points: Vec<SweepPoint>,
    /// Smallest scale reached before the first failure.
    pub cutoff: Option<f64>,
}

pub fn validate_scales(scales: &[f64]) -> Result<(), EvalError> {
    if let Some(&bad) = scales.iter().find(|s| !(**s > 0.0 && **s <= 1.0)) {
        return Err(EvalError::Scale(bad));
    }
    if scales.windows(2).any(|w| w[1] >= w[0]) {
        return Err(EvalError::ScaleOrder);
    }
    Ok(())
}

/// Emulates a subject stepping away from the camera: the mode's region is
/// shrunk to `scale` of its size and blown back up before recognition.
/// A point is recognized when it is accepted and, if `subject` is given,
/// matches it. Every requested scale is reported; the cutoff is the last
/// scale of the leading run of recognized points.
pub fn distance_sweep(
    image: &GrayImage,
    landmarks: &LandmarkSet,
    model: &RecognizerModel,
    subject: Option<&str>,
    scales: &[f64],
    threshold: f64,
) -> Result<Sweep, EvalError> {
    validate_scales(scales)?;
    let mode = model.mode();
    let region = entryway_core::pipeline::region_for(mode, landmarks)?;
    let region = region
        .clamp_to(image.width(), image.height())
        .ok_or(EvalError::Pipeline(PipelineError::Geometry(
            entryway_core::GeometryError::EmptyRoi(region),
        )))?;
    let native = image.crop(
        region.x as usize,
        region.y as usize,
        region.w as usize,
        region.h as usize,
    );
    let (w, h) = (native.width(), native.height());
    let mut points = Vec::with_capacity(scales.len());
    for &scale in scales {
        let sw = ((w as f64 * scale).round() as usize).max(1);
        let sh = ((h as f64 * scale).round() as usize).max(1);
        let degraded = native
            .resize_bilinear(sw, sh)
            .and_then(|small| small.resize_bilinear(w, h))
            .map_err(|e| EvalError::Frame(e.to_string()))?;
        let m = model
            .predict(&degraded)
            .map_err(|e| EvalError::Frame(e.to_string()))?;
        let recognized = m.confidence < threshold && subject.is_none_or(|s| s == m.label);
        points.push(SweepPoint {
            scale,
            label: m.label,
            confidence: m.confidence,
            recognized,
        });
    }
    let cutoff = points
        .iter()
        .take_while(|p| p.recognized)
        .last()
        .map(|p| p.scale);
    Ok(Sweep { points, cutoff })
}

impl Sweep {
    pub fn render_text(&self) -> String {
        let mut rows = vec![["scale", "label", "confidence", "result"]
            .map(String::from)
            .to_vec()];
        for p in &self.points {
            rows.push(vec![
                format!("{}", p.scale),
                p.label.clone(),
                format!("{:.2}", p.confidence),
                if p.recognized { "Correct" } else { "False" }.to_string(),
            ]);
        }
        let mut out = String::new();
        section(&mut out, "Distance sweep (resolution loss)", &rows);
        match self.cutoff {
            Some(c) => {
                let _ = writeln!(out, "cutoff scale: {c}");
            }
            None => out.push_str("cutoff scale: none\n"),
        }
        out
    }

    pub fn csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["scale", "label", "confidence", "recognized"])
            .expect("in-memory write");
        for p in &self.points {
            w.write_record([
                p.scale.to_string(),
                p.label.clone(),
                format!("{:.6}", p.confidence),
                p.recognized.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_parsing() {
        let text = "path\tsubject\texpression\tmasked\tregistered\na.pgm\tNazrin\thappy\tfalse\ttrue\n\nb.pgm\tx\t-\t1\t0\n";
        let m = Manifest::parse(text, Path::new("m.tsv"), Path::new("/data")).unwrap();
        assert_eq!(m.rows.len(), 2);
        assert_eq!(m.rows[0].path, Path::new("/data/a.pgm"));
        assert_eq!(m.rows[0].expression, Some(Expression::Happy));
        assert!(m.rows[1].masked && !m.rows[1].registered);
        assert_eq!(m.rows[1].line, 4);

        let e = Manifest::parse("path\tsubject\n", Path::new("m.tsv"), Path::new(".")).unwrap_err();
        assert!(e.to_string().starts_with("m.tsv:1: header"), "{e}");
        let e = Manifest::parse(
            &format!("{}\na\tb\n", MANIFEST_HEADER.join("\t")),
            Path::new("m.tsv"),
            Path::new("."),
        )
        .unwrap_err();
        assert_eq!(
            e.to_string(),
            "m.tsv:2: expected 5 tab-separated fields, got 2"
        );
        let e = Manifest::parse(
            &format!("{}\na\tb\tgrim\tfalse\ttrue\n", MANIFEST_HEADER.join("\t")),
            Path::new("m.tsv"),
            Path::new("."),
        )
        .unwrap_err();
        assert!(e.to_string().contains("unknown expression"));
    }

    #[test]
    fn acceptance_rule() {
        assert!(accepts(true, "a", "a", 69.9, 70.0));
        assert!(!accepts(true, "a", "a", 70.0, 70.0));
        assert!(!accepts(true, "a", "b", 10.0, 70.0));
        assert!(accepts(false, "z", "b", 10.0, 70.0));
    }

    #[test]
    fn scale_validation() {
        assert!(validate_scales(&[1.0, 0.8, 0.1]).is_ok());
        assert!(matches!(validate_scales(&[1.2]), Err(EvalError::Scale(_))));
        assert!(matches!(validate_scales(&[0.0]), Err(EvalError::Scale(_))));
        assert!(matches!(
            validate_scales(&[f64::NAN]),
            Err(EvalError::Scale(_))
        ));
        assert!(matches!(
            validate_scales(&[0.5, 0.8]),
            Err(EvalError::ScaleOrder)
        ));
        assert!(matches!(
            validate_scales(&[0.5, 0.5]),
            Err(EvalError::ScaleOrder)
        ));
    }

    fn record(
        mode: Mode,
        subject: &str,
        registered: bool,
        predicted: &str,
        conf: f64,
    ) -> TrialRecord {
        TrialRecord {
            row: 0,
            path: PathBuf::new(),
            subject: subject.into(),
            registered,
            expression: Some(Expression::Normal),
            masked: false,
            mode,
            predicted: Some(predicted.into()),
            confidence: Some(conf),
            accepted: accepts(registered, subject, predicted, conf, 70.0),
            failure: None,
        }
    }

    #[test]
    fn summary_counts_and_rank1() {
        let result = SuiteResult {
            records: vec![
                record(Mode::FullFace, "a", true, "a", 20.0),
                record(Mode::FullFace, "a", true, "b", 20.0),
                record(Mode::FullFace, "a", true, "a", 80.0),
                record(Mode::FullFace, "s", false, "a", 90.0),
                record(Mode::FullFace, "s", false, "a", 30.0),
            ],
            missing: vec![],
            threshold: 70.0,
        };
        let s = result.summary(Mode::FullFace);
        assert_eq!(
            s.counts,
            ConfusionCounts {
                tp: 1,
                fp: 1,
                fn_: 2,
                tn: 1
            }
        );
        assert_eq!(s.rank1, Some(2.0 / 3.0));
        let text = result.render_text();
        assert!(text.contains("Recognition by user"));
        assert!(text.contains("40.00 [20.00-80.00] 1/3"), "{text}");
        assert_eq!(result.summary_csv(), result.clone().summary_csv());
    }
}
