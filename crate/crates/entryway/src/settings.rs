//! `entryway.toml`: every key is optional and falls back to the defaults.
//!
//! ```toml
//! bind = "127.0.0.1:8080"
//! admin_chat_id = "admin"
//! enrollment_target = 150
//!
//! [controller]
//! accept_threshold = 70.0
//! pin_timeout_s = 30
//! max_attempts = 3
//! relock_after_s = 5
//! mode = "full"        # or "occluded"
//! ```

use std::net::SocketAddr;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use entryway_core::controller::{Config, ConfigError, Millis};
use entryway_core::lbph::Mode;

use crate::station::StationConfig;

#[derive(Debug, Error)]
pub enum SettingsError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Toml(#[from] toml::de::Error),
    #[error("unknown mode {0:?}, expected \"full\" or \"occluded\"")]
    Mode(String),
    #[error("enrollment_target must be at least 1")]
    Target,
    #[error(transparent)]
    Controller(#[from] ConfigError),
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawController {
    accept_threshold: Option<f64>,
    pin_timeout_s: Option<f64>,
    max_attempts: Option<u32>,
    relock_after_s: Option<f64>,
    mode: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawSettings {
    bind: Option<SocketAddr>,
    admin_chat_id: Option<String>,
    enrollment_target: Option<usize>,
    controller: RawController,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub bind: SocketAddr,
    pub station: StationConfig,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            bind: SocketAddr::from(([127, 0, 0, 1], 8080)),
            station: StationConfig::default(),
        }
    }
}

pub fn parse_mode(s: &str) -> Option<Mode> {
    match s.to_ascii_lowercase().as_str() {
        "full" | "fullface" | "mode1" | "1" => Some(Mode::FullFace),
        "occluded" | "mode2" | "2" => Some(Mode::Occluded),
        _ => None,
    }
}

fn secs(s: f64) -> Millis {
    // Negative or NaN collapse to zero and are rejected by validation.
    Millis((s.max(0.0) * 1000.0).round() as u64)
}

impl Settings {
    pub fn parse(text: &str) -> Result<Settings, SettingsError> {
        let raw: RawSettings = toml::from_str(text)?;
        let mut out = Settings::default();
        if let Some(bind) = raw.bind {
            out.bind = bind;
        }
        if let Some(id) = raw.admin_chat_id {
            out.station.admin_chat_id = id;
        }
        if let Some(t) = raw.enrollment_target {
            if t == 0 {
                return Err(SettingsError::Target);
            }
            out.station.enrollment_target = t;
        }
        let c: &mut Config = &mut out.station.controller;
        let rc = raw.controller;
        if let Some(v) = rc.accept_threshold {
            c.accept_threshold = v;
        }
        if let Some(v) = rc.pin_timeout_s {
            c.pin_timeout = secs(v);
        }
        if let Some(v) = rc.max_attempts {
            c.max_attempts = v;
        }
        if let Some(v) = rc.relock_after_s {
            c.relock_after = secs(v);
        }
        if let Some(m) = rc.mode {
            c.mode = parse_mode(&m).ok_or(SettingsError::Mode(m))?;
        }
        c.validate()?;
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Settings, SettingsError> {
        let text = std::fs::read_to_string(path).map_err(|source| SettingsError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Settings::parse(&text)
    }
}
