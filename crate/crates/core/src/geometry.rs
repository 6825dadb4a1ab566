//! Crank–slider kinematics and beam-length feasibility.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkageGeometry {
    /// Joint distance at the ultimate state (slider at TDC).
    #[serde(rename = "d1_mm")]
    pub d1: f64,
    /// Slider travel from BDC to TDC.
    #[serde(rename = "h_mm")]
    pub h: f64,
    #[serde(rename = "crank_radius_mm")]
    pub crank_radius: f64,
    #[serde(rename = "rod_length_mm")]
    pub rod_length: f64,
    /// Slider height, as a fraction of `h`, where the latch engages. 1.0 removes the latch.
    pub latch_fraction: f64,
    #[serde(rename = "latch_stiffness_n_per_mm")]
    pub latch_stiffness: f64,
    pub limited_block: bool,
    #[serde(rename = "block_stiffness_n_per_mm")]
    pub block_stiffness: f64,
    /// Slider fraction below which the block wall acts.
    pub block_engage_fraction: f64,
    /// Slider fraction below which the wall sits at its hold position.
    pub block_full_fraction: f64,
    /// Wall hold position in units of the BDC well amplitude.
    pub block_hold_ratio: f64,
    /// Slider band around BDC labelled as preparation.
    pub preparation_fraction: f64,
}

impl Default for LinkageGeometry {
    fn default() -> Self {
        Self {
            d1: 35.0,
            h: 14.0,
            crank_radius: 7.0,
            rod_length: 40.0,
            latch_fraction: 0.9,
            latch_stiffness: 200.0,
            limited_block: true,
            block_stiffness: 500.0,
            block_engage_fraction: 0.452,
            block_full_fraction: 0.063,
            block_hold_ratio: 1.01,
            preparation_fraction: 0.05,
        }
    }
}

fn check(ok: bool, key: &str, msg: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Geometry(format!("{key}: {msg}")))
    }
}

impl LinkageGeometry {
    pub fn validate(&self) -> Result<()> {
        check(self.d1.is_finite() && self.d1 > 0.0, "d1_mm", "must be > 0")?;
        check(self.h.is_finite() && self.h > 0.0, "h_mm", "must be > 0")?;
        check(self.crank_radius > 0.0, "crank_radius_mm", "must be > 0")?;
        check(self.crank_radius < self.rod_length, "rod_length_mm", "must exceed the crank radius (lockup)")?;
        check(self.latch_fraction > 0.0 && self.latch_fraction <= 1.0, "latch_fraction", "must lie in (0, 1]")?;
        check(self.latch_stiffness > 0.0, "latch_stiffness_n_per_mm", "must be > 0")?;
        check(self.block_stiffness > 0.0, "block_stiffness_n_per_mm", "must be > 0")?;
        check(
            self.block_engage_fraction > 0.0 && self.block_engage_fraction < 0.5,
            "block_engage_fraction",
            "must lie in (0, 0.5)",
        )?;
        check(
            self.block_full_fraction >= 0.0 && self.block_full_fraction < self.block_engage_fraction,
            "block_full_fraction",
            "must lie in [0, block_engage_fraction)",
        )?;
        check(self.block_hold_ratio > 0.0, "block_hold_ratio", "must be > 0")?;
        check(
            self.preparation_fraction > 0.0 && self.preparation_fraction < self.latch_fraction.min(0.5),
            "preparation_fraction",
            "must lie in (0, min(latch_fraction, 0.5))",
        )?;
        Ok(())
    }

    /// Joint distance at BDC.
    pub fn d2(&self) -> f64 {
        self.d1.hypot(self.h)
    }

    pub fn latch_height(&self) -> f64 {
        self.latch_fraction * self.h
    }
}

/// Slider height for a crank angle; 0 → TDC (s = H), π → BDC (s = 0).
pub fn slider_height(crank_angle: f64, geom: &LinkageGeometry) -> Result<f64> {
    let (r, l) = (geom.crank_radius, geom.rod_length);
    if !(r > 0.0 && r < l) {
        return Err(Error::Geometry("rod_length_mm: crank radius must be below rod length".into()));
    }
    Ok(slider_height_unchecked(crank_angle, geom))
}

pub(crate) fn slider_height_unchecked(crank_angle: f64, geom: &LinkageGeometry) -> f64 {
    let (r, l) = (geom.crank_radius, geom.rod_length);
    let sn = crank_angle.sin();
    let x = r * crank_angle.cos() + (l * l - r * r * sn * sn).sqrt();
    (geom.h * (x - (l - r)) / (2.0 * r)).clamp(0.0, geom.h)
}

/// Crank angle at time `t` for a cycle starting at BDC.
pub fn crank_angle_at(t: f64, rpm: f64) -> f64 {
    PI + 2.0 * PI * rpm / 60.0 * t
}

pub fn joint_distance(s: f64, geom: &LinkageGeometry) -> Result<f64> {
    if !(s >= 0.0 && s <= geom.h) {
        return Err(Error::Input(format!("slider height {s} outside [0, {}]", geom.h)));
    }
    Ok(joint_distance_unchecked(s, geom))
}

pub(crate) fn joint_distance_unchecked(s: f64, geom: &LinkageGeometry) -> f64 {
    geom.d1.hypot(geom.h - s)
}

/// `(L_min, L_max)`; may be empty, check `feasible_interval`.
pub fn beam_length_bounds(geom: &LinkageGeometry) -> (f64, f64) {
    (geom.d2(), geom.d1 * 10.0 / 7.0)
}

pub fn feasible_interval(geom: &LinkageGeometry) -> bool {
    let (lo, hi) = beam_length_bounds(geom);
    lo < hi
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Constraint {
    #[serde(rename = "EQ1")]
    Eq1,
    #[serde(rename = "EQ2")]
    Eq2,
    #[serde(rename = "EQ3")]
    Eq3,
    #[serde(rename = "PRECOMP30")]
    Precomp30,
}

impl Constraint {
    pub fn id(&self) -> &'static str {
        match self {
            Constraint::Eq1 => "EQ1",
            Constraint::Eq2 => "EQ2",
            Constraint::Eq3 => "EQ3",
            Constraint::Precomp30 => "PRECOMP30",
        }
    }

    pub fn describe(&self) -> &'static str {
        match self {
            Constraint::Eq1 => "L > D2 (beam buckled at BDC)",
            Constraint::Eq2 => "0.7 L < D1 (compression below 30% at TDC)",
            Constraint::Eq3 => "L_min < L < L_max",
            Constraint::Precomp30 => "(L - D1) / L <= 0.30",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignFeasibility {
    pub l_min: f64,
    pub l_max: f64,
    pub length: f64,
    pub thickness: f64,
    pub slenderness: f64,
    pub max_precompression: f64,
    pub verdicts: Vec<(Constraint, bool)>,
    pub violated_constraints: Vec<Constraint>,
    pub feasible: bool,
}

pub fn validate_design(l: f64, t: f64, geom: &LinkageGeometry) -> Result<DesignFeasibility> {
    if !(l > 0.0 && t > 0.0) {
        return Err(Error::Input(format!("beam length and thickness must be > 0 (got {l}, {t})")));
    }
    geom.validate()?;
    let (l_min, l_max) = beam_length_bounds(geom);
    let precomp = (l - geom.d1) / l;
    let verdicts = vec![
        (Constraint::Eq1, l > geom.d2()),
        (Constraint::Eq2, 0.7 * l < geom.d1),
        (Constraint::Eq3, l_min < l && l < l_max),
        (Constraint::Precomp30, precomp <= 0.30),
    ];
    let violated_constraints: Vec<Constraint> = verdicts.iter().filter(|(_, ok)| !ok).map(|(c, _)| *c).collect();
    Ok(DesignFeasibility {
        l_min,
        l_max,
        length: l,
        thickness: t,
        slenderness: l / t,
        max_precompression: precomp,
        feasible: violated_constraints.is_empty(),
        verdicts,
        violated_constraints,
    })
}
