//! One actuation cycle: prescribed slider, latch, limited block and the
//! fin's rotational dynamics.
//!
//! The fin angle θ is the only dynamic coordinate. The beam amplitude
//! follows it through the revolute pair, `q = lever · sin θ`.

use serde::{Deserialize, Serialize};

use crate::beam::{self, BeamSpec};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::geometry::{self, LinkageGeometry};
use crate::hydro::{FinCoefficients, FinSpec, FluidEnv};
use crate::units::{deg_to_rad, rad_to_deg, GMM_S2_PER_N};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConnectorSpec {
    #[serde(rename = "lever_mm")]
    pub lever: f64,
    #[serde(rename = "stiffness_nmm_per_rad")]
    pub stiffness: f64,
    #[serde(rename = "damping_nmm_s_per_rad")]
    pub damping: f64,
}

impl Default for ConnectorSpec {
    fn default() -> Self {
        Self { lever: 30.0, stiffness: 8.486_596_805_679_54, damping: 35.417_920_036_661_556 }
    }
}

impl ConnectorSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.lever > 0.0) {
            return Err(Error::Beam("lever_mm: must be > 0".into()));
        }
        if !(self.stiffness >= 0.0) {
            return Err(Error::Beam("stiffness_nmm_per_rad: must be >= 0".into()));
        }
        if !(self.damping >= 0.0) {
            return Err(Error::Beam("damping_nmm_s_per_rad: must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriveSpec {
    pub speed_rpm: f64,
    /// Per-fin phase lag of the drive, one entry per fin.
    pub fin_phase_offsets_deg: Vec<f64>,
}

impl Default for DriveSpec {
    fn default() -> Self {
        Self { speed_rpm: 167.0, fin_phase_offsets_deg: vec![0.0; 4] }
    }
}

impl DriveSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.speed_rpm > 0.0 && self.speed_rpm.is_finite()) {
            return Err(Error::Input("speed_rpm: must be > 0".into()));
        }
        if self.fin_phase_offsets_deg.len() != 4 {
            return Err(Error::Input("fin_phase_offsets_deg: needs exactly 4 entries".into()));
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        60.0 / self.speed_rpm
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActuatorPhase {
    Preparation,
    Loading,
    Ultimate,
    Release,
    Recovery,
}

impl ActuatorPhase {
    pub fn name(&self) -> &'static str {
        match self {
            ActuatorPhase::Preparation => "preparation",
            ActuatorPhase::Loading => "loading",
            ActuatorPhase::Ultimate => "ultimate",
            ActuatorPhase::Release => "release",
            ActuatorPhase::Recovery => "recovery",
        }
    }
}

/// Latch force on the beam; pushes the loaded well towards the released one.
pub fn latch_tilt(s: f64, q: f64, geom: &LinkageGeometry) -> f64 {
    if q < 0.0 {
        latch_push(s, geom)
    } else {
        0.0
    }
}

#[inline]
fn latch_push(s: f64, geom: &LinkageGeometry) -> f64 {
    geom.latch_stiffness * (s - geom.latch_height()).max(0.0)
}

/// Static form of the limited block: near BDC only the downward bend is admissible.
pub fn limited_block_constraint(q_candidate: f64, s: f64, geom: &LinkageGeometry) -> f64 {
    if geom.limited_block && s < geom.block_engage_fraction * geom.h {
        -q_candidate.abs()
    } else {
        q_candidate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinState {
    /// Fin angle, rad.
    pub theta: f64,
    /// Fin rate, rad/s.
    pub omega: f64,
}

/// Everything needed to advance one beam–fin chain.
#[derive(Debug, Clone)]
pub struct ChainModel {
    pub geom: LinkageGeometry,
    pub beam: BeamSpec,
    pub connector: ConnectorSpec,
    pub coeffs: FinCoefficients,
    /// Beam torsion, deg.
    pub phi: f64,
    /// Fin deflection, rad.
    pub beta: f64,
    pub rpm: f64,
    /// Integrator steps per sample.
    pub substeps: usize,
    kb: f64,
    well_bdc: f64,
    well_block: f64,
}

impl ChainModel {
    pub fn new(
        geom: &LinkageGeometry,
        beam: &BeamSpec,
        connector: &ConnectorSpec,
        fin: &FinSpec,
        fluid: &FluidEnv,
        rpm: f64,
    ) -> Self {
        let phi = fin.servo_gear_gain * fin.deflection;
        let mut m = Self {
            geom: *geom,
            beam: *beam,
            connector: *connector,
            coeffs: FinCoefficients::new(fin, fluid),
            phi,
            beta: deg_to_rad(fin.deflection),
            rpm,
            substeps: 4,
            kb: beam.bending_stiffness(),
            well_bdc: 0.0,
            well_block: 0.0,
        };
        m.well_bdc = m.well(0.0);
        m.well_block = m.well(geom.block_engage_fraction * geom.h);
        m
    }

    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        let mut m = Self::new(&cfg.geometry, &cfg.beam, &cfg.connector, &cfg.fin, &cfg.fluid, cfg.drive.speed_rpm);
        m.substeps = cfg.sim.substeps.max(1);
        m
    }

    pub fn period(&self) -> f64 {
        60.0 / self.rpm
    }

    pub fn slider(&self, t: f64) -> f64 {
        geometry::slider_height_unchecked(geometry::crank_angle_at(t, self.rpm), &self.geom)
    }

    pub fn compression(&self, s: f64) -> f64 {
        self.beam.length - geometry::joint_distance_unchecked(s, &self.geom)
    }

    pub fn well(&self, s: f64) -> f64 {
        beam::active_well(self.compression(s), self.phi, &self.beam)
    }

    /// Trigger force at slider height `s`; infinite when there is no barrier.
    pub fn trigger(&self, s: f64) -> f64 {
        let qb = self.well(s);
        if qb > 0.0 {
            beam::trigger_from_well(qb, self.kb)
        } else {
            f64::INFINITY
        }
    }

    /// Positive once the latch has removed the loaded well.
    pub fn snap_margin(&self, s: f64) -> f64 {
        latch_push(s, &self.geom) - self.trigger(s)
    }

    pub fn tilt_ratio(&self, s: f64) -> f64 {
        let trig = self.trigger(s);
        if trig.is_finite() {
            latch_push(s, &self.geom) / trig
        } else {
            0.0
        }
    }

    /// Position of the moving block wall, `None` when the block is clear.
    pub fn block_wall(&self, s: f64) -> Option<f64> {
        let g = &self.geom;
        if !g.limited_block {
            return None;
        }
        let (engage, full) = (g.block_engage_fraction * g.h, g.block_full_fraction * g.h);
        if s >= engage {
            return None;
        }
        let hold = g.block_hold_ratio * self.well_bdc;
        let ramp = (s - full).max(0.0) / (engage - full);
        Some(-hold + (self.well_block + hold) * ramp)
    }

    pub fn block_force(&self, q: f64, s: f64) -> f64 {
        match self.block_wall(s) {
            Some(w) if q > w => -self.geom.block_stiffness * (q - w),
            _ => 0.0,
        }
    }

    pub fn beam_force(&self, q: f64, s: f64) -> f64 {
        beam::force_with_well(q, self.well(s), self.kb)
    }

    /// Total generalised force on the beam coordinate, N.
    pub fn q_force(&self, q: f64, s: f64) -> f64 {
        self.beam_force(q, s) + latch_tilt(s, q, &self.geom) + self.block_force(q, s)
    }

    /// Conservative energy of the beam, latch and block springs at (q, s), mJ.
    pub fn stored_energy(&self, q: f64, s: f64) -> f64 {
        let mut e = beam::potential_energy(q, self.compression(s), self.phi, &self.beam);
        if q < 0.0 {
            e -= latch_push(s, &self.geom) * q;
        }
        if let Some(w) = self.block_wall(s) {
            if q > w {
                e += 0.5 * self.geom.block_stiffness * (q - w) * (q - w);
            }
        }
        e
    }

    pub fn lever(&self) -> f64 {
        self.connector.lever
    }

    pub fn q_of(&self, theta: f64) -> f64 {
        self.connector.lever * theta.sin()
    }

    fn torque(&self, st: FinState, s: f64) -> f64 {
        let c = &self.connector;
        let q = c.lever * st.theta.sin();
        self.q_force(q, s) * c.lever * st.theta.cos()
            - c.stiffness * st.theta
            - c.damping * st.omega
            - self.coeffs.torque * st.omega * st.omega.abs()
    }

    /// Linearised stiffness and damping of the torque about the state.
    fn local_rates(&self, st: FinState, s: f64) -> (f64, f64) {
        let c = &self.connector;
        let (sn, cs) = st.theta.sin_cos();
        let q = c.lever * sn;
        let qb = self.well(s);
        let mut dfdq = if qb > 0.0 { -self.kb * (3.0 * q * q - qb * qb) / (qb * qb) } else { -self.kb };
        if let Some(w) = self.block_wall(s) {
            if q > w {
                dfdq -= self.geom.block_stiffness;
            }
        }
        let f = self.q_force(q, s);
        let stiff = -(dfdq * c.lever * c.lever * cs * cs - f * c.lever * sn) + c.stiffness;
        let damp = c.damping + 2.0 * self.coeffs.torque * st.omega.abs();
        (stiff.max(0.0), damp)
    }

    /// Semi-implicit Euler step with the slider held at `s`.
    pub fn step(&self, st: FinState, s: f64, dt: f64, t: f64) -> Result<FinState> {
        let j = self.coeffs.inertia;
        let (k, c) = self.local_rates(st, s);
        let bound = dt * dt * k * GMM_S2_PER_N / j + 2.0 * dt * c * GMM_S2_PER_N / j;
        if bound >= 4.0 {
            return Err(Error::Unstable {
                t,
                detail: format!("dt = {dt:e} s exceeds the stability bound (index {bound:.3} >= 4)"),
            });
        }
        let omega = st.omega + self.torque(st, s) * GMM_S2_PER_N / j * dt;
        let theta = st.theta + omega * dt;
        if !(omega.is_finite() && theta.is_finite()) {
            return Err(Error::Unstable { t, detail: "non-finite fin state".into() });
        }
        Ok(FinState { theta, omega })
    }

    /// Rest state at BDC in the loaded well.
    /// Step that lands exactly on q = 0 when the latch force would switch off mid-step.
    pub fn advance(&self, st: FinState, s: f64, dt: f64, t: f64) -> Result<FinState> {
        let next = self.step(st, s, dt, t)?;
        if !(st.theta < 0.0 && next.theta >= 0.0 && latch_push(s, &self.geom) > 0.0) {
            return Ok(next);
        }
        let a = self.torque(st, s) * GMM_S2_PER_N / self.coeffs.inertia;
        let h = bisect(0.0, dt, dt * 1e-12, |h| st.theta + (st.omega + a * h) * h);
        let mut mid = self.step(st, s, h, t)?;
        mid.theta = 0.0;
        if dt > h {
            self.step(mid, s, dt - h, t + h)
        } else {
            Ok(mid)
        }
    }

    pub fn initial_state(&self) -> Result<FinState> {
        let q0 = limited_block_constraint(-self.well_bdc, 0.0, &self.geom);
        let ratio = q0 / self.connector.lever;
        if ratio.abs() >= 1.0 {
            return Err(Error::Beam("lever_mm: shorter than the beam well amplitude".into()));
        }
        Ok(FinState { theta: ratio.asin(), omega: 0.0 })
    }

    /// Vertical thrust of this fin, N.
    pub fn thrust(&self, st: FinState) -> f64 {
        self.normal_force(st.omega) * st.theta.cos() * self.beta.cos()
    }

    pub fn normal_force(&self, omega: f64) -> f64 {
        self.coeffs.force * omega * omega.abs()
    }
}

/// Advance a fin state through one step of length `dt` with the slider at `s`.
pub fn fin_dynamics_step(model: &ChainModel, state: FinState, s: f64, dt: f64) -> Result<FinState> {
    if !(dt > 0.0) {
        return Err(Error::Input("dt must be > 0".into()));
    }
    model.step(state, s, dt, 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleTrace {
    pub period: f64,
    pub dt: f64,
    pub time: Vec<f64>,
    pub slider_s: Vec<f64>,
    pub q: Vec<f64>,
    /// deg
    pub fin_angle: Vec<f64>,
    /// rad/s
    pub fin_rate: Vec<f64>,
    pub latch_force: Vec<f64>,
    pub phase: Vec<ActuatorPhase>,
    /// Vertical thrust of all fins in the chain group, N.
    pub thrust: Vec<f64>,
    /// Signed normal force of a single fin, N.
    pub normal_force: Vec<f64>,
    pub fin_count: usize,
    pub deflection_deg: f64,
    pub snap_time: Option<f64>,
    pub release_end: Option<f64>,
    pub loading_duration: f64,
    pub release_duration: f64,
    pub snap_count: usize,
    pub flip_count: usize,
    pub max_tilt_ratio: f64,
}

impl CycleTrace {
    pub fn peak_thrust(&self) -> f64 {
        self.thrust.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn load_release_ratio(&self) -> f64 {
        self.loading_duration / self.release_duration
    }

    pub fn net_flip(&self) -> f64 {
        self.fin_angle.last().copied().unwrap_or(0.0) - self.fin_angle.first().copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }
}

fn bisect(mut a: f64, mut b: f64, tol: f64, f: impl Fn(f64) -> f64) -> f64 {
    let fa = f(a);
    while b - a > tol {
        let m = 0.5 * (a + b);
        if (f(m) >= 0.0) == (fa >= 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    b
}

const SNAP_TOLERANCE: f64 = 1e-10;

/// Run `warmup` cycles then record one, without requiring a snap.
fn span(model: &ChainModel, mut st: FinState, t0: f64, t1: f64) -> Result<FinState> {
    let k = model.substeps;
    let h = (t1 - t0) / k as f64;
    for j in 0..k {
        let t = t0 + j as f64 * h;
        st = model.advance(st, model.slider(t + 0.5 * h), h, t)?;
    }
    Ok(st)
}

pub fn simulate_chain(model: &ChainModel, dt_target: f64, warmup: usize, fin_count: usize) -> Result<CycleTrace> {
    if !(dt_target > 0.0) {
        return Err(Error::Input("dt_s must be > 0".into()));
    }
    let period = model.period();
    let n = (period / dt_target).round().max(1.0) as usize;
    let dt = period / n as f64;
    let mut st = model.initial_state()?;

    let mut snap_time = None;
    let mut snap_count = 0;
    let mut max_tilt: f64 = 0.0;
    let mut time = Vec::with_capacity(n + 1);
    let mut slider_s = Vec::with_capacity(n + 1);
    let mut qs = Vec::with_capacity(n + 1);
    let mut fin_angle = Vec::with_capacity(n + 1);
    let mut fin_rate = Vec::with_capacity(n + 1);
    let mut latch_force = Vec::with_capacity(n + 1);
    let mut thrust = Vec::with_capacity(n + 1);
    let mut normal = Vec::with_capacity(n + 1);

    for cycle in 0..=warmup {
        let record = cycle == warmup;
        for i in 0..=n {
            let t = i as f64 * dt;
            let s = model.slider(t);
            let q = model.q_of(st.theta);
            if record {
                time.push(t);
                slider_s.push(s);
                qs.push(q);
                fin_angle.push(rad_to_deg(st.theta));
                fin_rate.push(st.omega);
                latch_force.push(latch_tilt(s, q, &model.geom));
                let fnorm = model.normal_force(st.omega);
                normal.push(fnorm);
                thrust.push(fin_count as f64 * model.thrust(st));
                max_tilt = max_tilt.max(model.tilt_ratio(s));
            }
            if i == n {
                break;
            }
            let t1 = t + dt;
            let s1 = model.slider(t1);
            let loaded = q < 0.0;
            if loaded && model.snap_margin(s) < 0.0 && model.snap_margin(s1) >= 0.0 {
                let ts = bisect(t, t1, SNAP_TOLERANCE, |x| model.snap_margin(model.slider(x)));
                if record {
                    snap_count += 1;
                    if snap_time.is_none() {
                        snap_time = Some(ts);
                    }
                }
                if ts > t {
                    st = span(model, st, t, ts)?;
                }
                if t1 > ts {
                    st = span(model, st, ts, t1)?;
                }
            } else {
                st = span(model, st, t, t1)?;
            }
        }
    }

    let flip_count = qs.windows(2).filter(|w| w[0] < 0.0 && w[1] >= 0.0).count();
    let release_end = snap_time.and_then(|ts| release_end(&time, &qs, &fin_rate, ts));
    let release_duration = match (snap_time, release_end) {
        (Some(a), Some(b)) => b - a,
        (Some(a), None) => period - a,
        _ => 0.0,
    };
    let loading_duration = if snap_time.is_some() { period - release_duration } else { period };
    let phase = label_phases(&time, &slider_s, &model.geom, period, snap_time, release_end);

    Ok(CycleTrace {
        period,
        dt,
        time,
        slider_s,
        q: qs,
        fin_angle,
        fin_rate,
        latch_force,
        phase,
        thrust,
        normal_force: normal,
        fin_count,
        deflection_deg: rad_to_deg(model.beta),
        snap_time,
        release_end,
        loading_duration,
        release_duration,
        snap_count,
        flip_count,
        max_tilt_ratio: max_tilt,
    })
}

/// The fin comes to rest on the released side: first ω ≤ 0 after q has crossed zero.
fn release_end(time: &[f64], q: &[f64], omega: &[f64], ts: f64) -> Option<f64> {
    let start = time.iter().position(|&t| t > ts)?;
    let crossed = (start..q.len()).find(|&i| q[i] >= 0.0)?;
    let j = (crossed.max(start + 1)..omega.len()).find(|&i| omega[i] <= 0.0)?;
    let (w0, w1) = (omega[j - 1], omega[j]);
    let frac = if w0 > w1 { w0 / (w0 - w1) } else { 1.0 };
    Some(time[j - 1] + frac * (time[j] - time[j - 1]))
}

fn label_phases(
    time: &[f64],
    s: &[f64],
    geom: &LinkageGeometry,
    period: f64,
    snap: Option<f64>,
    release_end: Option<f64>,
) -> Vec<ActuatorPhase> {
    let prep = geom.preparation_fraction * geom.h;
    let latch = geom.latch_height();
    let end = release_end.unwrap_or(period);
    time.iter()
        .zip(s)
        .map(|(&t, &si)| {
            let ascending = t < 0.5 * period;
            let before_snap = snap.is_none_or(|ts| t < ts);
            if let Some(ts) = snap {
                if t >= ts && t < end {
                    return ActuatorPhase::Release;
                }
            }
            if si < prep {
                ActuatorPhase::Preparation
            } else if ascending && before_snap {
                if si < latch {
                    ActuatorPhase::Loading
                } else {
                    ActuatorPhase::Ultimate
                }
            } else {
                ActuatorPhase::Recovery
            }
        })
        .collect()
}

/// Nominal cycle of the four simultaneous chains; requires exactly one snap.
pub fn run_cycle(cfg: &ScenarioConfig) -> Result<CycleTrace> {
    let feas = geometry::validate_design(cfg.beam.length, cfg.beam.thickness, &cfg.geometry)?;
    if !feas.feasible {
        let ids: Vec<&str> = feas.violated_constraints.iter().map(|c| c.id()).collect();
        return Err(Error::Infeasible(format!("beam length violates {}", ids.join(", "))));
    }
    run_cycle_unchecked(cfg)
}

/// As [`run_cycle`] but without the beam-length feasibility gate.
pub fn run_cycle_unchecked(cfg: &ScenarioConfig) -> Result<CycleTrace> {
    let model = ChainModel::from_config(cfg);
    let trace = simulate_chain(&model, cfg.sim.dt, cfg.sim.warmup_cycles, crate::body::FIN_COUNT)?;
    check_fired(&trace)?;
    Ok(trace)
}

pub fn check_fired(trace: &CycleTrace) -> Result<()> {
    if trace.snap_count == 0 {
        return Err(Error::DoesNotFire { max_tilt: trace.max_tilt_ratio });
    }
    let snaps = trace.snap_count.max(trace.flip_count);
    if snaps > 1 {
        return Err(Error::Chatter { snaps });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> ChainModel {
        ChainModel::from_config(&ScenarioConfig::default())
    }

    #[test]
    fn latch_examples() {
        let g = LinkageGeometry::default();
        assert_eq!(latch_tilt(0.5 * g.h, -5.0, &g), 0.0);
        assert_eq!(latch_tilt(g.h, 5.0, &g), 0.0);
        assert!(latch_tilt(g.h, -5.0, &g) > 0.0);
    }

    #[test]
    fn block_examples() {
        let g = LinkageGeometry::default();
        assert_eq!(limited_block_constraint(6.0, 0.0, &g), -6.0);
        assert_eq!(limited_block_constraint(-6.0, 0.0, &g), -6.0);
        assert_eq!(limited_block_constraint(6.0, g.h / 2.0, &g), 6.0);
        assert_eq!(limited_block_constraint(-6.0, g.h / 2.0, &g), -6.0);
    }

    #[test]
    fn free_fin_stays_put() {
        let mut m = model();
        m.connector.stiffness = 0.0;
        m.connector.damping = 0.0;
        // slider where the beam is unbuckled and the fin sits at q = 0
        let s = 0.5 * m.geom.h;
        m.beam.length = crate::geometry::joint_distance_unchecked(s, &m.geom) - 1.0;
        let mut st = FinState { theta: 0.0, omega: 0.0 };
        for _ in 0..100 {
            st = fin_dynamics_step(&m, st, s, 1e-4).unwrap();
        }
        assert_eq!(st, FinState { theta: 0.0, omega: 0.0 });
    }

    #[test]
    fn huge_step_is_rejected() {
        let m = model();
        let st = m.initial_state().unwrap();
        assert!(matches!(fin_dynamics_step(&m, st, 0.0, 0.05), Err(Error::Unstable { .. })));
    }

    #[test]
    fn bisect_finds_root() {
        let r = bisect(0.0, 2.0, 1e-12, |x| x * x - 2.0);
        assert!((r - 2f64.sqrt()).abs() < 1e-11);
    }
}
