//! Seeded synthetic "desk" subjects: textured faces with eyes, nose and a
//! mouth whose shape follows the expression, rendered into door-camera frames
//! with exact landmark boxes, lighting changes, sensor noise, slight changes
//! in face size and optional face masks. Everything is a pure function of the
//! seed.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use entryway_core::{GrayImage, LandmarkSet, Rect};

use crate::annotations;
use crate::pgm;
use crate::registry::Expression;

pub const FRAME_SIZE: usize = 200;
pub const FACE_SIZE: usize = 128;
const PATCH: usize = 16;
const DIRECTIONS: u8 = 12;
const PERIOD: (f64, f64) = (8.0, 14.0);
const AMP: f64 = 70.0;
const GRAIN: f64 = 2.0;
/// Face size range relative to `FACE_SIZE`.
const SCALE: (f64, f64) = (0.95, 1.05);

/// Registered desk users; extra subjects beyond these get generated names.
pub const USER_NAMES: [&str; 4] = ["Nazrin", "Najwa", "Wanhariz", "Aiman"];

/// Face layout in face-box coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Layout {
    eye1: Rect,
    eye2: Rect,
    nose: Rect,
    mouth_y: i32,
    mouth_x: (i32, i32),
}

#[derive(Debug, Clone)]
pub struct Subject {
    pub id: String,
    pub registered: bool,
    layout: Layout,
    /// Base tone plus soft shading blobs, FACE_SIZE squared.
    shading: Vec<f64>,
    /// Per-pixel grain, FACE_SIZE squared.
    grain: Vec<f64>,
    /// One sawtooth ramp per patch: wave vector and phase.
    ramps: Vec<(f64, f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Capture {
    pub expression: Expression,
    pub masked: bool,
    /// Sensor noise standard deviation in grey levels.
    pub noise: f64,
}

#[derive(Debug, Clone)]
pub struct SynthFrame {
    pub subject: String,
    pub registered: bool,
    pub expression: Expression,
    pub masked: bool,
    pub image: GrayImage,
    pub landmarks: LandmarkSet,
}

fn rect(x: i32, y: i32, w: u32, h: u32) -> Rect {
    Rect::new(x, y, w, h).expect("positive size")
}

fn in_rect(r: &Rect, x: i32, y: i32) -> bool {
    x >= r.x && y >= r.y && i64::from(x) < r.right() && i64::from(y) < r.bottom()
}

impl Subject {
    /// The `index`-th subject of the population seeded by `seed`.
    pub fn generate(seed: u64, index: usize, registered: bool) -> Subject {
        let mut rng = ChaCha8Rng::seed_from_u64(
            seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15),
        );
        let id = match USER_NAMES.get(index) {
            Some(name) if registered => (*name).to_string(),
            _ => format!("subject{index:02}"),
        };
        let eye_y = rng.random_range(30..38);
        let eye_w = rng.random_range(28..36);
        let eye_h = rng.random_range(14..20);
        let gap = rng.random_range(16..26);
        let left = (FACE_SIZE as i32 - 2 * eye_w - gap) / 2;
        let nose_w = rng.random_range(22..30);
        let nose_y = eye_y + eye_h + rng.random_range(2..6);
        let nose_h = rng.random_range(30..38);
        let layout = Layout {
            eye1: rect(left, eye_y, eye_w as u32, eye_h as u32),
            eye2: rect(left + eye_w + gap, eye_y, eye_w as u32, eye_h as u32),
            nose: rect(
                (FACE_SIZE as i32 - nose_w) / 2,
                nose_y,
                nose_w as u32,
                nose_h as u32,
            ),
            mouth_y: nose_y + nose_h + rng.random_range(8..14),
            mouth_x: (rng.random_range(34..44), rng.random_range(84..94)),
        };
        let tone: f64 = rng.random_range(115.0..140.0);
        // Soft blobs for shading.
        let blobs: Vec<(f64, f64, f64, f64)> = (0..12)
            .map(|_| {
                (
                    rng.random_range(0.0..FACE_SIZE as f64),
                    rng.random_range(0.0..FACE_SIZE as f64),
                    rng.random_range(6.0..20.0),
                    rng.random_range(-15.0..15.0),
                )
            })
            .collect();
        // One sawtooth ramp per patch. Its direction decides which LBP codes
        // the patch produces, so the direction map is what tells faces apart.
        // Directions sit between the pixel axes so no neighbour comparison is
        // left to noise.
        let patches = FACE_SIZE / PATCH;
        let ramps: Vec<(f64, f64, f64)> = (0..patches * patches)
            .map(|_| {
                let theta = std::f64::consts::TAU
                    * (f64::from(rng.random_range(0..DIRECTIONS)) + 0.5)
                    / f64::from(DIRECTIONS);
                let k = std::f64::consts::TAU / rng.random_range(PERIOD.0..PERIOD.1);
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                (k * theta.cos(), k * theta.sin(), phase)
            })
            .collect();
        let mut shading = vec![tone; FACE_SIZE * FACE_SIZE];
        let mut grain = vec![0.0; FACE_SIZE * FACE_SIZE];
        for y in 0..FACE_SIZE {
            for x in 0..FACE_SIZE {
                for &(bx, by, r, a) in &blobs {
                    let d2 = (x as f64 - bx).powi(2) + (y as f64 - by).powi(2);
                    shading[y * FACE_SIZE + x] += a * (-d2 / (2.0 * r * r)).exp();
                }
                grain[y * FACE_SIZE + x] = rng.random_range(-GRAIN..GRAIN);
            }
        }
        Subject {
            id,
            registered,
            layout,
            shading,
            grain,
            ramps,
        }
    }

    /// Landmark boxes for a face of `size` pixels placed at `(fx, fy)`.
    fn landmarks(&self, fx: i32, fy: i32, size: usize) -> LandmarkSet {
        let k = size as f64 / FACE_SIZE as f64;
        let s = |v: i32| (f64::from(v) * k).round() as i32;
        let shift = |r: Rect| {
            rect(
                fx + s(r.x),
                fy + s(r.y),
                s(r.w as i32) as u32,
                s(r.h as i32) as u32,
            )
        };
        LandmarkSet::new(
            Some(rect(fx, fy, size as u32, size as u32)),
            Some(shift(self.layout.eye1)),
            Some(shift(self.layout.eye2)),
            Some(shift(self.layout.nose)),
        )
    }

    /// Face appearance at fractional face coordinates. Shading is smooth and
    /// interpolated; ramps, grain and features are sampled directly so a
    /// rescaled face keeps sharp texture, as a camera would see it.
    fn skin_at(&self, u: f64, v: f64) -> f64 {
        let last = (FACE_SIZE - 1) as f64;
        let (u, v) = (u.clamp(0.0, last), v.clamp(0.0, last));
        let (u0, v0) = (u as usize, v as usize);
        let (u1, v1) = ((u0 + 1).min(FACE_SIZE - 1), (v0 + 1).min(FACE_SIZE - 1));
        let (fu, fv) = (u - u0 as f64, v - v0 as f64);
        let at = |x: usize, y: usize| self.shading[y * FACE_SIZE + x];
        let top = at(u0, v0) * (1.0 - fu) + at(u1, v0) * fu;
        let bottom = at(u0, v1) * (1.0 - fu) + at(u1, v1) * fu;
        let mut level = top * (1.0 - fv) + bottom * fv;

        let patches = FACE_SIZE / PATCH;
        let (kx, ky, phase) = self.ramps[(v as usize / PATCH) * patches + u as usize / PATCH];
        let t = (kx * u + ky * v + phase) / std::f64::consts::TAU;
        level += AMP * (2.0 * (t - t.floor()) - 1.0);
        let (ui, vi) = (u.round() as usize, v.round() as usize);
        level += self.grain[vi.min(FACE_SIZE - 1) * FACE_SIZE + ui.min(FACE_SIZE - 1)];
        let (xi, yi) = (u.floor() as i32, v.floor() as i32);
        if in_rect(&self.layout.eye1, xi, yi) || in_rect(&self.layout.eye2, xi, yi) {
            level -= 20.0;
        } else if in_rect(&self.layout.nose, xi, yi) {
            level -= 8.0;
        }
        level
    }

    /// Renders one camera frame.
    pub fn capture(&self, capture: Capture, rng: &mut impl Rng) -> SynthFrame {
        // Distance to the camera changes the face size a little.
        let size = (FACE_SIZE as f64 * rng.random_range(SCALE.0..SCALE.1)).round() as usize;
        let k = size as f64 / FACE_SIZE as f64;
        let fx = (FRAME_SIZE - size) as i32 / 2 + rng.random_range(-4..=4);
        let fy = (FRAME_SIZE - size) as i32 / 2 + rng.random_range(-4..=4);
        let gain: f64 = rng.random_range(0.85..1.15);
        let offset: f64 = rng.random_range(-12.0..12.0);
        let wall: f64 = rng.random_range(60.0..200.0);
        let noise = Normal::new(0.0, capture.noise.max(0.0)).expect("finite sigma");
        let curve = match capture.expression {
            Expression::Normal => 0.0,
            Expression::Happy => -6.0,
            Expression::Sad => 6.0,
        };
        let (mx0, mx1) = self.layout.mouth_x;
        let mouth_mid = f64::from(mx0 + mx1) / 2.0;
        let mouth_half = f64::from(mx1 - mx0) / 2.0;
        let mask_top = f64::from(self.layout.nose.y + (self.layout.nose.h as i32 * 3) / 4);
        let mask_level: f64 = rng.random_range(170.0..230.0);
        let pixels = GrayImage::from_fn(FRAME_SIZE, FRAME_SIZE, |x, y| {
            let (px, py) = (x as i32 - fx, y as i32 - fy);
            let inside = (0..size as i32).contains(&px) && (0..size as i32).contains(&py);
            // Face coordinates of the pixel centre.
            let u = (f64::from(px) + 0.5) / k - 0.5;
            let v = (f64::from(py) + 0.5) / k - 0.5;
            let mut level = if !inside {
                wall
            } else if capture.masked && v >= mask_top {
                mask_level + if (px + py) % 6 < 3 { 8.0 } else { -8.0 }
            } else {
                let mut s = self.skin_at(u, v);
                if (f64::from(mx0)..f64::from(mx1)).contains(&u) {
                    let t = (u - mouth_mid) / mouth_half;
                    let centre = f64::from(self.layout.mouth_y) + curve * (1.0 - t * t);
                    if (v - centre).abs() < 3.5 {
                        s -= 50.0;
                    }
                }
                gain * s + offset
            };
            level += noise.sample(rng);
            level.round().clamp(0.0, 255.0) as u8
        })
        .expect("nonzero frame size");
        SynthFrame {
            subject: self.id.clone(),
            registered: self.registered,
            expression: capture.expression,
            masked: capture.masked,
            image: pixels,
            landmarks: self.landmarks(fx, fy, size),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeskConfig {
    pub seed: u64,
    pub users: usize,
    pub strangers: usize,
    pub frames_per_user: usize,
    /// Share of each user's frames held out of training.
    pub held_out: f64,
    /// Every n-th held-out frame wears a mask.
    pub mask_every: usize,
    pub stranger_frames: usize,
    pub train_noise: f64,
    pub test_noise: f64,
}

impl Default for DeskConfig {
    fn default() -> Self {
        Self {
            seed: 2024,
            users: 4,
            strangers: 3,
            frames_per_user: 150,
            held_out: 0.2,
            mask_every: 3,
            stranger_frames: 20,
            train_noise: 2.0,
            test_noise: 6.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DeskDataset {
    pub train: Vec<SynthFrame>,
    pub held_out: Vec<SynthFrame>,
    pub strangers: Vec<SynthFrame>,
}

const EXPRESSIONS: [Expression; 3] = [Expression::Normal, Expression::Happy, Expression::Sad];

impl DeskDataset {
    pub fn generate(config: &DeskConfig) -> DeskDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let held = (config.frames_per_user as f64 * config.held_out).round() as usize;
        let n_train = config.frames_per_user.saturating_sub(held);
        let mut train = Vec::new();
        let mut held_out = Vec::new();
        for u in 0..config.users {
            let subject = Subject::generate(config.seed, u, true);
            for i in 0..config.frames_per_user {
                // Shifted every third frame so the masking cadence does not
                // line up with a single expression.
                let expression = EXPRESSIONS[(i + i / 3) % 3];
                if i < n_train {
                    let c = Capture {
                        expression,
                        masked: false,
                        noise: config.train_noise,
                    };
                    train.push(subject.capture(c, &mut rng));
                } else {
                    let j = i - n_train;
                    let c = Capture {
                        expression,
                        masked: config.mask_every > 0
                            && j % config.mask_every == config.mask_every - 1,
                        noise: config.test_noise,
                    };
                    held_out.push(subject.capture(c, &mut rng));
                }
            }
        }
        let mut strangers = Vec::new();
        for s in 0..config.strangers {
            let subject = Subject::generate(config.seed, config.users + s, false);
            for i in 0..config.stranger_frames {
                let c = Capture {
                    expression: EXPRESSIONS[i % 3],
                    masked: false,
                    noise: config.test_noise,
                };
                strangers.push(subject.capture(c, &mut rng));
            }
        }
        DeskDataset {
            train,
            held_out,
            strangers,
        }
    }

    /// Writes frames with landmark sidecars plus a suite manifest per split:
    /// `<dir>/<split>/<subject>/<nnnn>.pgm` and `<dir>/<split>.tsv`, and
    /// `<dir>/test.tsv` joining the held-out and stranger rows.
    pub fn write(&self, dir: &Path) -> io::Result<Vec<PathBuf>> {
        let header = "path\tsubject\texpression\tmasked\tregistered\n";
        let mut test = String::from(header);
        let mut manifests = Vec::new();
        for (split, frames) in [
            ("train", &self.train),
            ("heldout", &self.held_out),
            ("strangers", &self.strangers),
        ] {
            let mut tsv = String::from(header);
            let mut counters = std::collections::HashMap::<&str, usize>::new();
            for f in frames.iter() {
                let n = counters.entry(&f.subject).or_default();
                let rel = PathBuf::from(split)
                    .join(&f.subject)
                    .join(format!("{:04}.pgm", *n));
                *n += 1;
                let path = dir.join(&rel);
                fs::create_dir_all(path.parent().expect("has parent"))?;
                pgm::write(&path, &f.image)?;
                annotations::write_sidecar(&path, &f.landmarks)?;
                tsv.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{}\n",
                    rel.display(),
                    f.subject,
                    f.expression,
                    f.masked,
                    f.registered
                ));
            }
            if split != "train" {
                test.push_str(&tsv[header.len()..]);
            }
            let manifest = dir.join(format!("{split}.tsv"));
            fs::write(&manifest, tsv)?;
            manifests.push(manifest);
        }
        let manifest = dir.join("test.tsv");
        fs::write(&manifest, test)?;
        manifests.push(manifest);
        Ok(manifests)
    }
}

impl fmt::Display for SynthFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}{}",
            self.subject,
            self.expression,
            if self.masked { " masked" } else { "" }
        )
    }
}
