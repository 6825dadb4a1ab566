//! Internal units are mm, g, s, N and mJ (= N·mm).
//!
//! Mass times acceleration in g·mm/s² is 1e-6 N, and a torque in N·mm
//! acting on an inertia in g·mm² gives an angular acceleration of
//! `tau * 1e6 / j` rad/s².

use std::f64::consts::PI;

pub const GMM_S2_PER_N: f64 = 1e6;

pub fn deg_to_rad(deg: f64) -> f64 {
    deg * PI / 180.0
}

pub fn rad_to_deg(rad: f64) -> f64 {
    rad * 180.0 / PI
}

/// kg/m³ to g/mm³.
pub fn density_to_g_mm3(kg_m3: f64) -> f64 {
    kg_m3 * 1e-6
}

/// g·mm/s² to N.
pub fn to_newton(g_mm_s2: f64) -> f64 {
    g_mm_s2 / GMM_S2_PER_N
}

pub fn rpm_to_period(rpm: f64) -> f64 {
    60.0 / rpm
}
