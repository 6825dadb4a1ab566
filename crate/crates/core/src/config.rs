//! Scenario configuration: TOML sections with unit-suffixed keys.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

use crate::actuator::{ConnectorSpec, DriveSpec};
use crate::beam::{self, BeamSpec};
use crate::body::RobotBody;
use crate::error::{Error, Result};
use crate::geometry::LinkageGeometry;
use crate::hydro::{FinSpec, FluidEnv};
use crate::optimize::CalibrationTargets;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSettings {
    #[serde(rename = "dt_s")]
    pub dt: f64,
    /// Fin integrator steps per sample.
    pub substeps: usize,
    /// Cycles simulated before the recorded one.
    pub warmup_cycles: usize,
    pub cycles: usize,
    /// Keep every n-th body sample.
    pub output_stride: usize,
    #[serde(rename = "steer_horizon_s")]
    pub steer_horizon: f64,
    #[serde(rename = "area_min_mm2")]
    pub area_min: f64,
    #[serde(rename = "area_max_mm2")]
    pub area_max: f64,
    #[serde(rename = "area_step_mm2")]
    pub area_step: f64,
    #[serde(rename = "area_tolerance_mm2")]
    pub area_tolerance: f64,
    pub calibration_budget: usize,
    pub calibration_restarts: usize,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            substeps: 4,
            warmup_cycles: 1,
            cycles: 6,
            output_stride: 1,
            steer_horizon: 60.0,
            area_min: 500.0,
            area_max: 6000.0,
            area_step: 500.0,
            area_tolerance: 10.0,
            calibration_budget: 600,
            calibration_restarts: 1,
        }
    }
}

impl SimSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |k: &str, m: &str| Err(Error::Input(format!("{k}: {m}")));
        if !(self.dt > 0.0 && self.dt <= 1e-2) {
            return bad("dt_s", "must lie in (0, 0.01]");
        }
        if self.substeps == 0 {
            return bad("substeps", "must be >= 1");
        }
        if self.cycles < 2 {
            return bad("cycles", "must be at least 2");
        }
        if self.output_stride == 0 {
            return bad("output_stride", "must be >= 1");
        }
        if !(self.steer_horizon > 0.0) {
            return bad("steer_horizon_s", "must be > 0");
        }
        if !(self.area_min > 0.0 && self.area_min < self.area_max) {
            return bad("area_min_mm2", "must be > 0 and below area_max_mm2");
        }
        if !(self.area_step > 0.0) {
            return bad("area_step_mm2", "must be > 0");
        }
        if !(self.area_tolerance > 0.0) {
            return bad("area_tolerance_mm2", "must be > 0");
        }
        if self.calibration_budget == 0 {
            return bad("calibration_budget", "must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedSection {
    pub value: u64,
}

impl Default for SeedSection {
    fn default() -> Self {
        Self { value: 20_160_167 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub geometry: LinkageGeometry,
    pub beam: BeamSpec,
    pub connector: ConnectorSpec,
    pub drive: DriveSpec,
    pub fin: FinSpec,
    pub fluid: FluidEnv,
    pub body: RobotBody,
    pub sim: SimSettings,
    pub calibration_targets: CalibrationTargets,
    pub seed: SeedSection,
}

pub const SECTIONS: [&str; 10] =
    ["geometry", "beam", "connector", "drive", "fin", "fluid", "body", "sim", "calibration_targets", "seed"];

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.beam.validate()?;
        self.connector.validate()?;
        self.drive.validate()?;
        self.fin.validate()?;
        self.fluid.validate()?;
        self.body.validate()?;
        self.sim.validate()?;
        self.calibration_targets.validate()?;
        if self.seed.value > i64::MAX as u64 {
            return Err(Error::Input(format!("value: seed must be <= {}", i64::MAX)));
        }
        let delta_tdc = self.beam.length - self.geometry.d1;
        let phi = self.fin.servo_gear_gain * self.fin.deflection;
        let q_tdc = beam::well_amplitude(beam::effective_compression(delta_tdc, phi, &self.beam), &self.beam);
        if self.connector.lever <= q_tdc {
            return Err(Error::Beam(format!("lever_mm: must exceed the largest well amplitude ({q_tdc:.3} mm)")));
        }
        Ok(())
    }

    /// Canonical TOML text; parsing it back reproduces the config exactly.
    pub fn to_canonical_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_canonical_string().as_bytes());
        hex::encode(digest)
    }

    pub fn short_hash(&self) -> String {
        self.hash()[..12].to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedConfig {
    pub config: ScenarioConfig,
    /// `section.key` entries that fell back to defaults.
    pub defaulted: Vec<String>,
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key` inside `[section]`, if present.
fn line_of_key(text: &str, section: Option<&str>, key: &str) -> Option<usize> {
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            current = Some(line.trim_matches(|c| c == '[' || c == ']').trim().to_string());
            continue;
        }
        let Some(rest) = line.strip_prefix(key) else { continue };
        let rest = rest.trim_start();
        if !rest.starts_with('=') {
            continue;
        }
        if section.is_none_or(|s| current.as_deref() == Some(s)) {
            return Some(i + 1);
        }
    }
    None
}

fn section_of_header(text: &str, section: &str) -> usize {
    text.lines()
        .position(|l| l.trim().trim_matches(|c| c == '[' || c == ']').trim() == section && l.trim().starts_with('['))
        .map_or(1, |i| i + 1)
}

fn default_keys() -> toml::Table {
    toml::Table::try_from(ScenarioConfig::default()).expect("defaults serialise")
}

/// Parse and validate configuration text.
pub fn parse_config_str(text: &str) -> Result<ParsedConfig> {
    let raw: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config {
        line: e.span().map_or(1, |s| line_of_offset(text, s.start)),
        msg: e.message().to_string(),
    })?;
    let known = default_keys();

    for (name, value) in &raw {
        let Some(known_section) = known.get(name).and_then(|v| v.as_table()) else {
            let line = line_of_key(text, None, name).unwrap_or_else(|| section_of_header(text, name));
            return Err(Error::Config { line, msg: format!("unknown section `{name}`") });
        };
        let Some(section) = value.as_table() else {
            let line = line_of_key(text, None, name).unwrap_or(1);
            return Err(Error::Config { line, msg: format!("`{name}` must be a section") });
        };
        for key in section.keys() {
            if known_section.contains_key(key) {
                continue;
            }
            let line = line_of_key(text, Some(name), key).unwrap_or_else(|| section_of_header(text, name));
            let prefix = format!("{key}_");
            let msg = match known_section.keys().find(|k| k.starts_with(&prefix)) {
                Some(expected) => format!("unit-suffix mismatch: `{name}.{key}` should be `{name}.{expected}`"),
                None => format!("unknown key `{name}.{key}`"),
            };
            return Err(Error::Config { line, msg });
        }
    }

    let config: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config {
        line: e.span().map_or(1, |s| line_of_offset(text, s.start)),
        msg: e.message().to_string(),
    })?;

    if let Err(e) = config.validate() {
        let msg = e.to_string();
        let key = match &e {
            Error::Geometry(m) | Error::Beam(m) | Error::Fin(m) | Error::Body(m) | Error::Input(m) => {
                m.split(':').next().unwrap_or("").trim().to_string()
            }
            _ => String::new(),
        };
        let line = SECTIONS.iter().find_map(|s| line_of_key(text, Some(s), &key)).unwrap_or(0);
        return Err(Error::Config { line, msg });
    }

    let mut defaulted = Vec::new();
    for (name, section) in &known {
        let given = raw.get(name).and_then(|v| v.as_table());
        for key in section.as_table().into_iter().flat_map(|t| t.keys()) {
            if !given.is_some_and(|g| g.contains_key(key)) {
                defaulted.push(format!("{name}.{key}"));
            }
        }
    }
    Ok(ParsedConfig { config, defaulted })
}

pub fn parse_config(path: &Path) -> Result<ParsedConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config_str(&text)
}
