//! Quasi-steady blade-element fin forces, added mass and the fin-size sweep.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::actuator::{run_cycle, CycleTrace};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::units::{deg_to_rad, density_to_g_mm3, to_newton};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FinSpec {
    #[serde(rename = "area_mm2")]
    pub area: f64,
    /// Root chord over span; held fixed when the area is swept.
    pub root_chord_ratio: f64,
    pub tip_chord_ratio: f64,
    #[serde(rename = "deflection_deg")]
    pub deflection: f64,
    pub normal_coefficient: f64,
    pub added_mass_coefficient: f64,
    #[serde(rename = "areal_density_g_per_mm2")]
    pub areal_density: f64,
    /// Beam torsion per unit fin deflection.
    pub servo_gear_gain: f64,
}

impl Default for FinSpec {
    fn default() -> Self {
        Self {
            area: 4000.0,
            root_chord_ratio: 0.75,
            tip_chord_ratio: 0.5,
            deflection: 0.0,
            normal_coefficient: 0.513_364_084_800_492_4,
            added_mass_coefficient: 1.422_173_566_804_814,
            areal_density: 2.2e-3,
            servo_gear_gain: 1.0,
        }
    }
}

fn check(ok: bool, key: &str, msg: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Fin(format!("{key}: {msg}")))
    }
}

impl FinSpec {
    pub fn validate(&self) -> Result<()> {
        check(self.area.is_finite() && self.area > 0.0, "area_mm2", "must be > 0")?;
        check(self.root_chord_ratio > 0.0, "root_chord_ratio", "must be > 0")?;
        check(self.tip_chord_ratio > 0.0, "tip_chord_ratio", "must be > 0")?;
        check(self.deflection.abs() < 90.0, "deflection_deg", "must lie in (-90, 90)")?;
        check(self.normal_coefficient > 0.0, "normal_coefficient", "must be > 0")?;
        check(self.added_mass_coefficient > 0.0, "added_mass_coefficient", "must be > 0")?;
        check(self.areal_density >= 0.0, "areal_density_g_per_mm2", "must be >= 0")?;
        check(self.servo_gear_gain >= 0.0, "servo_gear_gain", "must be >= 0")?;
        Ok(())
    }

    pub fn span(&self) -> f64 {
        (2.0 * self.area / (self.root_chord_ratio + self.tip_chord_ratio)).sqrt()
    }

    pub fn root_chord(&self) -> f64 {
        self.root_chord_ratio * self.span()
    }

    pub fn tip_chord(&self) -> f64 {
        self.tip_chord_ratio * self.span()
    }

    /// Chord at distance `r` from the hinge.
    pub fn chord(&self, r: f64) -> f64 {
        let b = self.span();
        let (c0, c1) = (self.root_chord_ratio * b, self.tip_chord_ratio * b);
        c0 + (c1 - c0) * r / b
    }

    pub fn with_area(&self, area: f64) -> Self {
        Self { area, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FluidEnv {
    #[serde(rename = "density_kg_m3")]
    pub rho: f64,
    #[serde(rename = "gravity_m_s2")]
    pub g: f64,
}

impl Default for FluidEnv {
    fn default() -> Self {
        Self { rho: 1000.0, g: 9.81 }
    }
}

impl FluidEnv {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) {
            return Err(Error::Fin("density_kg_m3: must be > 0".into()));
        }
        if !(self.g > 0.0) {
            return Err(Error::Fin("gravity_m_s2: must be > 0".into()));
        }
        Ok(())
    }

    /// Density in g/mm³.
    pub fn rho_internal(&self) -> f64 {
        density_to_g_mm3(self.rho)
    }
}

const GL5_X: [f64; 5] =
    [-0.906_179_845_938_664, -0.538_469_310_105_683, 0.0, 0.538_469_310_105_683, 0.906_179_845_938_664];
const GL5_W: [f64; 5] =
    [0.236_926_885_056_189, 0.478_628_670_499_366, 0.568_888_888_888_889, 0.478_628_670_499_366, 0.236_926_885_056_189];

/// Composite 5-point Gauss–Legendre integral of `f` over `[a, b]`.
pub fn span_integral(a: f64, b: f64, panels: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = (b - a) / panels as f64;
    let mut sum = 0.0;
    for k in 0..panels {
        let mid = a + (k as f64 + 0.5) * h;
        for (x, w) in GL5_X.iter().zip(GL5_W.iter()) {
            sum += w * f(mid + 0.5 * h * x);
        }
    }
    0.5 * h * sum
}

const PANELS: usize = 8;

/// Lumped fin constants for the one-DOF chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinCoefficients {
    /// Normal force per ω|ω|, N·s².
    pub force: f64,
    /// Hinge torque per ω|ω|, N·mm·s².
    pub torque: f64,
    /// Structural plus added rotational inertia, g·mm².
    pub inertia: f64,
}

impl FinCoefficients {
    pub fn new(fin: &FinSpec, fluid: &FluidEnv) -> Self {
        let rho = fluid.rho_internal();
        let b = fin.span();
        let half = 0.5 * rho * fin.normal_coefficient;
        let force = to_newton(half * span_integral(0.0, b, PANELS, |r| fin.chord(r) * r * r));
        let torque = to_newton(half * span_integral(0.0, b, PANELS, |r| fin.chord(r) * r.powi(3)));
        let inertia = structural_inertia(fin) + added_mass_inertia(fin, fluid);
        Self { force, torque, inertia }
    }
}

pub fn structural_inertia(fin: &FinSpec) -> f64 {
    fin.areal_density * span_integral(0.0, fin.span(), PANELS, |r| fin.chord(r) * r * r)
}

/// Strip-theory added rotational inertia about the hinge, g·mm².
pub fn added_mass_inertia(fin: &FinSpec, fluid: &FluidEnv) -> f64 {
    let c = |r: f64| fin.chord(r);
    fin.added_mass_coefficient * fluid.rho_internal() * span_integral(0.0, fin.span(), PANELS, |r| c(r) * c(r) * r * r)
}

/// Signed normal force magnitude, N.
pub fn normal_force(omega: f64, fin: &FinSpec, fluid: &FluidEnv) -> f64 {
    FinCoefficients::new(fin, fluid).force * omega * omega.abs()
}

/// Fin force on the body in the fin's mount frame `[radial, tangential, vertical]`.
///
/// Positive `omega` is the power stroke and pushes the body up. The
/// deflection tilts the fin plane about the radial axis, sending
/// `sin(beta)` of the normal force along the tangential direction.
pub fn fin_force(omega: f64, theta_fin: f64, fin: &FinSpec, fluid: &FluidEnv) -> [f64; 3] {
    resolve(normal_force(omega, fin, fluid), deg_to_rad(theta_fin), deg_to_rad(fin.deflection))
}

#[inline]
pub(crate) fn resolve(fnorm: f64, theta: f64, beta: f64) -> [f64; 3] {
    let (sb, cb) = beta.sin_cos();
    let (st, ct) = theta.sin_cos();
    [-fnorm * cb * st, fnorm * sb, fnorm * cb * ct]
}

/// Trapezoid rule on a (possibly non-uniform) grid.
pub fn trapezoid(t: &[f64], y: &[f64]) -> f64 {
    t.windows(2).zip(y.windows(2)).map(|(tw, yw)| 0.5 * (tw[1] - tw[0]) * (yw[0] + yw[1])).sum()
}

pub fn cycle_impulse(trace: &CycleTrace) -> Result<f64> {
    if trace.time.len() < 2 {
        return Err(Error::Input("empty trace".into()));
    }
    Ok(trapezoid(&trace.time, &trace.thrust))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub area: f64,
    pub peak_thrust: f64,
    pub impulse: f64,
    pub status: String,
}

impl SweepRow {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
}

/// One cycle per area; failures are reported in the row's status.
pub fn fin_size_sweep(areas: &[f64], config: &ScenarioConfig) -> Vec<SweepRow> {
    let mut rows: Vec<SweepRow> = areas
        .par_iter()
        .map(|&area| {
            let mut cfg = config.clone();
            cfg.fin.area = area;
            let outcome = cfg.fin.validate().and_then(|_| run_cycle(&cfg));
            match outcome {
                Ok(trace) => SweepRow {
                    area,
                    peak_thrust: trace.peak_thrust(),
                    impulse: cycle_impulse(&trace).unwrap_or(f64::NAN),
                    status: "ok".into(),
                },
                Err(e) => SweepRow { area, peak_thrust: f64::NAN, impulse: f64::NAN, status: e.kind().into() },
            }
        })
        .collect();
    rows.sort_by(|a, b| a.area.total_cmp(&b.area));
    rows
}

/// Area of the largest impulse among the successful rows.
pub fn sweep_argmax(rows: &[SweepRow]) -> Option<f64> {
    rows.iter()
        .filter(|r| r.ok() && r.impulse.is_finite())
        .max_by(|a, b| a.impulse.total_cmp(&b.impulse))
        .map(|r| r.area)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(area: f64) -> FinSpec {
        FinSpec { area, root_chord_ratio: 0.5, tip_chord_ratio: 0.5, ..Default::default() }
    }

    #[test]
    fn trapezoid_consistency() {
        let f = FinSpec::default();
        let a = f.span() * (f.root_chord() + f.tip_chord()) / 2.0;
        assert!((a - f.area).abs() < 1e-9);
    }

    #[test]
    fn rectangular_force_closed_form() {
        let fin = rect(2000.0);
        let fluid = FluidEnv::default();
        let (c, b) = (fin.root_chord(), fin.span());
        let omega = 17.0;
        let closed = 0.5 * fluid.rho_internal() * fin.normal_coefficient * c * omega * omega * b.powi(3) / 3.0;
        let got = normal_force(omega, &fin, &fluid);
        assert!((got - to_newton(closed)).abs() / got < 1e-6);
        let added = fin.added_mass_coefficient * fluid.rho_internal() * c * c * b.powi(3) / 3.0;
        assert!((added_mass_inertia(&fin, &fluid) - added).abs() / added < 1e-6);
    }

    #[test]
    fn force_zero_odd_quadratic() {
        let fin = FinSpec { deflection: 12.0, ..Default::default() };
        let fluid = FluidEnv::default();
        assert_eq!(fin_force(0.0, 10.0, &fin, &fluid), [0.0, 0.0, 0.0]);
        let a = fin_force(5.0, 10.0, &fin, &fluid);
        let b = fin_force(10.0, 10.0, &fin, &fluid);
        let c = fin_force(-5.0, 10.0, &fin, &fluid);
        for k in 0..3 {
            assert!((b[k] - 4.0 * a[k]).abs() < 1e-12);
            assert!((c[k] + a[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn deflection_moves_force_horizontal() {
        let fluid = FluidEnv::default();
        let flat = fin_force(10.0, 0.0, &FinSpec::default(), &fluid);
        let bent = fin_force(10.0, 0.0, &FinSpec { deflection: 20.0, ..Default::default() }, &fluid);
        assert_eq!(flat[1], 0.0);
        assert!(bent[1] > 0.0 && bent[2] < flat[2]);
        let mag = |v: [f64; 3]| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        assert!((mag(flat) - mag(bent)).abs() < 1e-12);
    }

    #[test]
    fn added_mass_monotone_in_area() {
        let fluid = FluidEnv::default();
        let mut prev = 0.0;
        for k in 1..=10 {
            let i = added_mass_inertia(&FinSpec::default().with_area(500.0 * k as f64), &fluid);
            assert!(i > prev);
            prev = i;
        }
        let zero = FinSpec { added_mass_coefficient: 0.0, ..Default::default() };
        assert_eq!(added_mass_inertia(&zero, &fluid), 0.0);
    }

    #[test]
    fn trapezoid_rule() {
        let t: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        assert!((trapezoid(&t, &vec![1.0; 101]) - 1.0).abs() < 1e-12);
        let odd: Vec<f64> = t.iter().map(|x| (x - 0.5) * 3.0).collect();
        assert!(trapezoid(&t, &odd).abs() < 1e-12);
    }
}
