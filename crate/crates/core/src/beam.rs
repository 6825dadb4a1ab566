//! Quartic double-well model of the buckled silicone strip.
//!
//! The strip is reduced to its first buckling mode with transverse
//! amplitude `q`. End shortening `delta` sets the well depth and torsion
//! `phi` both deepens the wells and, past a limit, destroys them.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::units::deg_to_rad;

/// Young's modulus (MPa) from Shore A hardness, Gent's relation.
pub fn gent_modulus(shore_a: f64) -> f64 {
    0.0981 * (56.0 + 7.62336 * shore_a) / (0.137505 * (254.0 - 2.54 * shore_a))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeamSpec {
    #[serde(rename = "length_mm")]
    pub length: f64,
    #[serde(rename = "thickness_mm")]
    pub thickness: f64,
    #[serde(rename = "width_mm")]
    pub width: f64,
    #[serde(rename = "modulus_mpa")]
    pub modulus: f64,
    pub stiffness_scale: f64,
    pub torsion_gain: f64,
    pub torsion_kill: f64,
    pub critical_compression_ratio: f64,
    /// Fraction of the critical compression where torsion starts to erode the output.
    pub torsion_onset_ratio: f64,
    #[serde(rename = "torsion_stiffness_nmm_per_rad2")]
    pub torsion_stiffness: f64,
}

impl Default for BeamSpec {
    fn default() -> Self {
        Self {
            length: 40.0,
            thickness: 4.0,
            width: 10.0,
            modulus: 3.605,
            stiffness_scale: 7.467_866_523_513_781,
            torsion_gain: 1.0,
            torsion_kill: 1.0,
            critical_compression_ratio: 0.30,
            torsion_onset_ratio: 0.5,
            torsion_stiffness: 0.5,
        }
    }
}

fn check(ok: bool, key: &str, msg: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Beam(format!("{key}: {msg}")))
    }
}

impl BeamSpec {
    pub fn validate(&self) -> Result<()> {
        check(self.length.is_finite() && self.length > 0.0, "length_mm", "must be > 0")?;
        check(self.thickness > 0.0, "thickness_mm", "must be > 0")?;
        check(self.width > 0.0, "width_mm", "must be > 0")?;
        check(self.modulus > 0.0, "modulus_mpa", "must be > 0")?;
        check(self.length / self.thickness >= 5.0, "thickness_mm", "length/thickness must be at least 5")?;
        check(self.stiffness_scale > 0.0, "stiffness_scale", "must be > 0")?;
        check(self.torsion_gain >= 0.0, "torsion_gain", "must be >= 0")?;
        check(self.torsion_kill >= 0.0, "torsion_kill", "must be >= 0")?;
        check(
            self.critical_compression_ratio > 0.0 && self.critical_compression_ratio < 1.0,
            "critical_compression_ratio",
            "must lie in (0, 1)",
        )?;
        check(
            self.torsion_onset_ratio > 0.0 && self.torsion_onset_ratio < 1.0,
            "torsion_onset_ratio",
            "must lie in (0, 1)",
        )?;
        check(self.torsion_stiffness >= 0.0, "torsion_stiffness_nmm_per_rad2", "must be >= 0")?;
        Ok(())
    }

    pub fn second_moment(&self) -> f64 {
        self.width * self.thickness.powi(3) / 12.0
    }

    /// Modal stiffness k_b in N/mm.
    pub fn bending_stiffness(&self) -> f64 {
        self.stiffness_scale * self.modulus * self.second_moment() * PI.powi(4) / self.length.powi(3)
    }

    /// Compression limit for bistability at torsion `phi` (deg).
    pub fn critical_compression(&self, phi: f64) -> f64 {
        let p = deg_to_rad(phi);
        self.critical_compression_ratio * self.length * (1.0 - self.torsion_kill * p * p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    DownWell,
    UpWell,
    Monostable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamState {
    pub q: f64,
    pub delta: f64,
    pub phi: f64,
    pub branch: Branch,
}

impl BeamState {
    pub fn new(q: f64, delta: f64, phi: f64, spec: &BeamSpec) -> Self {
        let branch = if !bistability_intact(delta, phi, spec) {
            Branch::Monostable
        } else if q < 0.0 {
            Branch::DownWell
        } else {
            Branch::UpWell
        };
        Self { q, delta, phi, branch }
    }
}

pub fn effective_compression(delta: f64, phi: f64, spec: &BeamSpec) -> f64 {
    let p = deg_to_rad(phi);
    delta * (1.0 + spec.torsion_gain * p * p)
}

/// Well position q̄ for an (already torsion-augmented) compression.
pub fn well_amplitude(delta_eff: f64, spec: &BeamSpec) -> f64 {
    if delta_eff > 0.0 {
        2.0 / PI * (spec.length * delta_eff).sqrt()
    } else {
        0.0
    }
}

pub fn bistability_intact(delta: f64, phi: f64, spec: &BeamSpec) -> bool {
    let de = effective_compression(delta, phi, spec);
    de > 0.0 && de < spec.critical_compression(phi)
}

/// Well amplitude of the actual potential: zero when monostable.
pub fn active_well(delta: f64, phi: f64, spec: &BeamSpec) -> f64 {
    if bistability_intact(delta, phi, spec) {
        well_amplitude(effective_compression(delta, phi, spec), spec)
    } else {
        0.0
    }
}

pub fn potential_energy(q: f64, delta: f64, phi: f64, spec: &BeamSpec) -> f64 {
    let kb = spec.bending_stiffness();
    let p = deg_to_rad(phi);
    let twist = 0.5 * spec.torsion_stiffness * p * p;
    let qb = active_well(delta, phi, spec);
    if qb > 0.0 {
        let d = q * q - qb * qb;
        kb / (4.0 * qb * qb) * d * d + twist
    } else {
        0.5 * kb * q * q + twist
    }
}

/// Generalised force −∂U/∂q in N.
pub fn restoring_force(q: f64, delta: f64, phi: f64, spec: &BeamSpec) -> f64 {
    force_with_well(q, active_well(delta, phi, spec), spec.bending_stiffness())
}

#[inline]
pub(crate) fn force_with_well(q: f64, qb: f64, kb: f64) -> f64 {
    if qb > 0.0 {
        -kb * q * (q * q - qb * qb) / (qb * qb)
    } else {
        -kb * q
    }
}

pub fn barrier_height(delta: f64, phi: f64, spec: &BeamSpec) -> f64 {
    let qb = active_well(delta, phi, spec);
    spec.bending_stiffness() * qb * qb / 4.0
}

pub fn trigger_force(delta: f64, phi: f64, spec: &BeamSpec) -> Result<f64> {
    let qb = active_well(delta, phi, spec);
    if qb <= 0.0 {
        return Err(Error::NoBarrier);
    }
    Ok(trigger_from_well(qb, spec.bending_stiffness()))
}

#[inline]
pub(crate) fn trigger_from_well(qb: f64, kb: f64) -> f64 {
    2.0 * kb * qb / (3.0 * 3f64.sqrt())
}

/// Fraction of the output force that survives torsion.
///
/// Zero until the compression reaches `torsion_onset_ratio` of its
/// critical value, then a linear ramp to the full loss at the critical
/// compression. Normalised to the untwisted state.
fn torsion_retention(delta: f64, phi: f64, spec: &BeamSpec) -> f64 {
    let erosion = |ratio: f64| ((ratio - spec.torsion_onset_ratio) / (1.0 - spec.torsion_onset_ratio)).clamp(0.0, 1.0);
    let twisted = effective_compression(delta, phi, spec) / spec.critical_compression(phi);
    let straight = delta / spec.critical_compression(0.0);
    (1.0 - erosion(twisted)) / (1.0 - erosion(straight))
}

pub fn output_force(delta: f64, phi: f64, spec: &BeamSpec) -> Result<f64> {
    if !bistability_intact(delta, phi, spec) || !bistability_intact(delta, 0.0, spec) {
        return Err(Error::BistabilityLost);
    }
    let raw = trigger_force(delta, phi, spec)?;
    Ok(raw * torsion_retention(delta, phi, spec))
}

/// Output energy at the snap: barrier height times the torsion retention.
pub fn output_energy(delta: f64, phi: f64, spec: &BeamSpec) -> Result<f64> {
    if !bistability_intact(delta, phi, spec) || !bistability_intact(delta, 0.0, spec) {
        return Err(Error::BistabilityLost);
    }
    Ok(barrier_height(delta, phi, spec) * torsion_retention(delta, phi, spec))
}

/// Torsion angle (deg) at which bistability is lost for this compression.
pub fn torsion_kill_angle(delta: f64, spec: &BeamSpec) -> Option<f64> {
    let dc = spec.critical_compression_ratio * spec.length;
    if !(delta > 0.0 && delta < dc) {
        return None;
    }
    let denom = delta * spec.torsion_gain + dc * spec.torsion_kill;
    if denom <= 0.0 {
        return None;
    }
    let p2 = (dc - delta) / denom;
    Some(crate::units::rad_to_deg(p2.sqrt()))
}

/// Number of real equilibria of the potential tilted by a constant force
/// `tilt` along +q, i.e. roots of −∂U/∂q + tilt = 0.
pub fn equilibrium_count(delta: f64, phi: f64, tilt: f64, spec: &BeamSpec) -> usize {
    let qb = active_well(delta, phi, spec);
    if qb <= 0.0 {
        return 1;
    }
    // q³ − q̄² q − tilt q̄²/k_b = 0
    let p = -qb * qb;
    let r = -tilt * qb * qb / spec.bending_stiffness();
    let disc = -(4.0 * p * p * p + 27.0 * r * r);
    if disc > 0.0 {
        3
    } else if disc == 0.0 {
        2
    } else {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gent_default() {
        assert!((gent_modulus(60.0) - 3.605).abs() < 1e-3);
    }

    #[test]
    fn well_amplitude_examples() {
        let spec = BeamSpec::default();
        assert_eq!(well_amplitude(0.0, &spec), 0.0);
        assert_eq!(well_amplitude(-1.0, &spec), 0.0);
        let qb = well_amplitude(2.5, &spec);
        assert!((qb - 20.0 / PI).abs() < 1e-12);
        // end shortening of a half-sine of amplitude q̄
        let shortening = PI * PI * qb * qb / (4.0 * spec.length);
        assert!((shortening - 2.5).abs() < 1e-12);
        assert_eq!(BeamState::new(0.0, -1.0, 0.0, &spec).branch, Branch::Monostable);
    }

    #[test]
    fn well_structure() {
        let spec = BeamSpec::default();
        let (d, qb) = (4.0, well_amplitude(4.0, &spec));
        let u = |q| potential_energy(q, d, 0.0, &spec);
        assert!((u(qb) - u(-qb)).abs() < 1e-12);
        let kb = spec.bending_stiffness();
        assert!((u(0.0) - u(qb) - kb * qb * qb / 4.0).abs() < 1e-9);
        for q in [-qb, 0.0, qb] {
            assert!(restoring_force(q, d, 0.0, &spec).abs() < 1e-9);
        }
    }

    #[test]
    fn trigger_errors_when_monostable() {
        let spec = BeamSpec::default();
        assert_eq!(trigger_force(0.0, 0.0, &spec), Err(Error::NoBarrier));
        assert!(trigger_force(1e-9, 0.0, &spec).unwrap() < 1e-3);
        assert_eq!(output_force(13.0, 0.0, &spec), Err(Error::BistabilityLost));
    }

    #[test]
    fn output_equals_trigger_untwisted() {
        let spec = BeamSpec::default();
        let a = trigger_force(3.0, 0.0, &spec).unwrap();
        let b = output_force(3.0, 0.0, &spec).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn compression_examples() {
        let spec = BeamSpec::default();
        assert_eq!(effective_compression(2.0, 0.0, &spec), 2.0);
        let s0 = BeamSpec { torsion_gain: 0.0, ..spec };
        assert_eq!(effective_compression(2.0, 25.0, &s0), 2.0);
        assert_eq!(effective_compression(2.0, 7.0, &spec), effective_compression(2.0, -7.0, &spec));
        assert!(effective_compression(2.0, 8.0, &spec) > effective_compression(2.0, 7.0, &spec));
    }

    #[test]
    fn kill_angle_is_boundary() {
        let spec = BeamSpec::default();
        let pk = torsion_kill_angle(5.0, &spec).unwrap();
        assert!(bistability_intact(5.0, pk - 1e-6, &spec));
        assert!(!bistability_intact(5.0, pk + 1e-6, &spec));
    }

    #[test]
    fn tilt_root_count() {
        let spec = BeamSpec::default();
        let trig = trigger_force(5.0, 0.0, &spec).unwrap();
        assert_eq!(equilibrium_count(5.0, 0.0, 0.0, &spec), 3);
        assert_eq!(equilibrium_count(5.0, 0.0, 0.99 * trig, &spec), 3);
        assert_eq!(equilibrium_count(5.0, 0.0, 1.01 * trig, &spec), 1);
    }
}
