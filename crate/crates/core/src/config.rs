//! Engine and operator configuration.
//!
//! The config file is line based: `key = value`, with `#` comments and blank
//! lines ignored. Keys and their accepted ranges:
//!
//! | key                        | default          | range                  |
//! |----------------------------|------------------|------------------------|
//! | `foot_half_extent_m`       | 0.1              | (0, 0.5]               |
//! | `knee_half_extent_m`       | 0.12             | (0, 0.5]               |
//! | `ball_radius_m`            | 0.06             | (0, 0.3]               |
//! | `hold_ms`                  | 500              | 0..=10000              |
//! | `run_timeout_ms`           | 3000             | 100..=60000            |
//! | `ordered_hits`             | true             | bool                   |
//! | `void_on_posture_break`    | false            | bool                   |
//! | `elbow_min_deg`            | 90               | [0, 180], ≤ max        |
//! | `elbow_max_deg`            | 110              | [0, 180]               |
//! | `run_start_displacement_m` | 0.15             | (0, 1]                 |
//! | `feed_addr`                | 127.0.0.1:7700   | socket address         |
//! | `telemetry_addr`           | 127.0.0.1:7701   | socket address         |
//! | `ws_addr`                  | 127.0.0.1:7702   | socket address         |
//! | `subscriber_buffer`        | 1024             | 1..=1048576            |
//! | `posture_template`         | bundled          | path                   |
//! | `expert_path`              | bundled          | path                   |
//!
//! Only the engine keys (the first ten) affect scoring; they are echoed into
//! every session log header.

use std::path::PathBuf;

use crate::error::ConfigError;
use crate::posture::{DEFAULT_FOOT_HALF_EXTENT_M, DEFAULT_HOLD_MS, DEFAULT_KNEE_HALF_EXTENT_M};
use crate::stroke::{DEFAULT_BALL_RADIUS_M, DEFAULT_RUN_TIMEOUT_MS};

/// Settings that change how frames are scored.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub foot_half_extent_m: f64,
    pub knee_half_extent_m: f64,
    pub ball_radius_m: f64,
    pub hold_ms: u64,
    pub run_timeout_ms: u64,
    pub ordered_hits: bool,
    pub void_on_posture_break: bool,
    pub elbow_min_deg: f64,
    pub elbow_max_deg: f64,
    /// Racket travel from the armed position that starts a run even when
    /// ball 1 is missed.
    pub run_start_displacement_m: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            foot_half_extent_m: DEFAULT_FOOT_HALF_EXTENT_M,
            knee_half_extent_m: DEFAULT_KNEE_HALF_EXTENT_M,
            ball_radius_m: DEFAULT_BALL_RADIUS_M,
            hold_ms: DEFAULT_HOLD_MS,
            run_timeout_ms: DEFAULT_RUN_TIMEOUT_MS,
            ordered_hits: true,
            void_on_posture_break: false,
            elbow_min_deg: 90.0,
            elbow_max_deg: 110.0,
            run_start_displacement_m: 0.15,
        }
    }
}

pub const ENGINE_KEYS: [&str; 10] = [
    "foot_half_extent_m",
    "knee_half_extent_m",
    "ball_radius_m",
    "hold_ms",
    "run_timeout_ms",
    "ordered_hits",
    "void_on_posture_break",
    "elbow_min_deg",
    "elbow_max_deg",
    "run_start_displacement_m",
];

fn parse_f64(key: &str, value: &str, lo_exclusive: f64, hi: f64) -> Result<f64, ConfigError> {
    value
        .parse::<f64>()
        .ok()
        .filter(|v| *v > lo_exclusive && *v <= hi)
        .ok_or_else(|| out_of_range(key, value))
}

fn parse_u64(key: &str, value: &str, lo: u64, hi: u64) -> Result<u64, ConfigError> {
    value
        .parse::<u64>()
        .ok()
        .filter(|v| (lo..=hi).contains(v))
        .ok_or_else(|| out_of_range(key, value))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(out_of_range(key, value)),
    }
}

fn out_of_range(key: &str, value: &str) -> ConfigError {
    ConfigError::OutOfRange { key: key.to_string(), value: value.to_string() }
}

impl EngineConfig {
    /// Apply one `key = value` setting. Returns `Ok(false)` for keys this
    /// struct does not own.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool, ConfigError> {
        match key {
            "foot_half_extent_m" => self.foot_half_extent_m = parse_f64(key, value, 0.0, 0.5)?,
            "knee_half_extent_m" => self.knee_half_extent_m = parse_f64(key, value, 0.0, 0.5)?,
            "ball_radius_m" => self.ball_radius_m = parse_f64(key, value, 0.0, 0.3)?,
            "hold_ms" => self.hold_ms = parse_u64(key, value, 0, 10_000)?,
            "run_timeout_ms" => self.run_timeout_ms = parse_u64(key, value, 100, 60_000)?,
            "ordered_hits" => self.ordered_hits = parse_bool(key, value)?,
            "void_on_posture_break" => self.void_on_posture_break = parse_bool(key, value)?,
            "elbow_min_deg" => self.elbow_min_deg = parse_f64(key, value, -f64::MIN_POSITIVE, 180.0)?,
            "elbow_max_deg" => self.elbow_max_deg = parse_f64(key, value, -f64::MIN_POSITIVE, 180.0)?,
            "run_start_displacement_m" => {
                self.run_start_displacement_m = parse_f64(key, value, 0.0, 1.0)?
            }
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.elbow_min_deg > self.elbow_max_deg {
            return Err(out_of_range("elbow_min_deg", &self.elbow_min_deg.to_string()));
        }
        Ok(())
    }

    /// `(key, value)` pairs in a fixed order, formatted so that parsing them
    /// back yields an identical config.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("foot_half_extent_m", self.foot_half_extent_m.to_string()),
            ("knee_half_extent_m", self.knee_half_extent_m.to_string()),
            ("ball_radius_m", self.ball_radius_m.to_string()),
            ("hold_ms", self.hold_ms.to_string()),
            ("run_timeout_ms", self.run_timeout_ms.to_string()),
            ("ordered_hits", self.ordered_hits.to_string()),
            ("void_on_posture_break", self.void_on_posture_break.to_string()),
            ("elbow_min_deg", self.elbow_min_deg.to_string()),
            ("elbow_max_deg", self.elbow_max_deg.to_string()),
            ("run_start_displacement_m", self.run_start_displacement_m.to_string()),
        ]
    }

    pub fn elbow_range(&self) -> (f64, f64) {
        (self.elbow_min_deg, self.elbow_max_deg)
    }
}

/// Full operator configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub engine: EngineConfig,
    pub feed_addr: String,
    pub telemetry_addr: String,
    pub ws_addr: String,
    pub subscriber_buffer: usize,
    pub posture_template: Option<PathBuf>,
    pub expert_path: Option<PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            engine: EngineConfig::default(),
            feed_addr: "127.0.0.1:7700".into(),
            telemetry_addr: "127.0.0.1:7701".into(),
            ws_addr: "127.0.0.1:7702".into(),
            subscriber_buffer: 1024,
            posture_template: None,
            expert_path: None,
        }
    }
}

impl Config {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        if self.engine.set(key, value)? {
            return Ok(());
        }
        match key {
            "feed_addr" => self.feed_addr = value.to_string(),
            "telemetry_addr" => self.telemetry_addr = value.to_string(),
            "ws_addr" => self.ws_addr = value.to_string(),
            "subscriber_buffer" => {
                self.subscriber_buffer = parse_u64(key, value, 1, 1 << 20)? as usize
            }
            "posture_template" => self.posture_template = Some(PathBuf::from(value)),
            "expert_path" => self.expert_path = Some(PathBuf::from(value)),
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Parse a config file on top of the defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut config = Config::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Parse {
                line: i + 1,
                reason: "expected `key = value`".into(),
            })?;
            config.set(key.trim(), value.trim())?;
        }
        config.engine.validate()?;
        Ok(config)
    }

    pub fn to_text(&self) -> String {
        let mut out: String = self
            .engine
            .entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect();
        out.push_str(&format!("feed_addr = {}\n", self.feed_addr));
        out.push_str(&format!("telemetry_addr = {}\n", self.telemetry_addr));
        out.push_str(&format!("ws_addr = {}\n", self.ws_addr));
        out.push_str(&format!("subscriber_buffer = {}\n", self.subscriber_buffer));
        if let Some(p) = &self.posture_template {
            out.push_str(&format!("posture_template = {}\n", p.display()));
        }
        if let Some(p) = &self.expert_path {
            out.push_str(&format!("expert_path = {}\n", p.display()));
        }
        out
    }
}
