//! Rigid-body locomotion under the four fin chains: x, y, z and yaw.
//!
//! Fin traces drive the body one way; the body's motion does not feed
//! back into the fin dynamics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;

use crate::actuator::{check_fired, simulate_chain, ActuatorPhase, ChainModel, CycleTrace};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::hydro::resolve;
use crate::units::{deg_to_rad, rad_to_deg, GMM_S2_PER_N};

pub const FIN_COUNT: usize = 4;

/// Global direction a positive deflection pushes each fin's force.
///
/// Fins sit on +x, +y, −x, −y. Positive deflection sends fins 0 and 2
/// towards +y and fins 1 and 3 towards −x, so equal deflection on an
/// opposing pair translates and opposite deflection yaws.
const TANGENT_SIGN: [f64; FIN_COUNT] = [1.0, 1.0, -1.0, -1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotBody {
    #[serde(rename = "mass_g")]
    pub mass: f64,
    pub drag_coefficient: f64,
    #[serde(rename = "ref_area_mm2")]
    pub ref_area: f64,
    #[serde(rename = "buoyancy_offset_n")]
    pub buoyancy_offset: f64,
    #[serde(rename = "yaw_inertia_g_mm2")]
    pub yaw_inertia: f64,
    #[serde(rename = "yaw_drag_nmm_s2")]
    pub yaw_drag: f64,
    /// Hinge radius of fins on +x, +y, −x, −y.
    #[serde(rename = "fin_arms_mm")]
    pub fin_arms: Vec<f64>,
    /// Deflection used for the lateral-pair scenario.
    #[serde(rename = "lateral_deflection_deg")]
    pub lateral_deflection: f64,
}

impl Default for RobotBody {
    fn default() -> Self {
        Self {
            mass: 350.0,
            drag_coefficient: 1.189_126_823_586_233_6,
            ref_area: 5000.0,
            buoyancy_offset: -0.311_528_549_915_201_85,
            yaw_inertia: 4.4e5,
            yaw_drag: 2.0,
            fin_arms: vec![60.0; FIN_COUNT],
            lateral_deflection: 15.0,
        }
    }
}

fn check(ok: bool, key: &str, msg: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Body(format!("{key}: {msg}")))
    }
}

impl RobotBody {
    pub fn validate(&self) -> Result<()> {
        check(self.mass > 0.0 && self.mass.is_finite(), "mass_g", "must be > 0")?;
        check(self.drag_coefficient >= 0.0, "drag_coefficient", "must be >= 0")?;
        check(self.ref_area > 0.0, "ref_area_mm2", "must be > 0")?;
        check(self.buoyancy_offset.is_finite(), "buoyancy_offset_n", "must be finite")?;
        check(self.yaw_inertia > 0.0, "yaw_inertia_g_mm2", "must be > 0")?;
        check(self.yaw_drag >= 0.0, "yaw_drag_nmm_s2", "must be >= 0")?;
        check(self.fin_arms.len() == FIN_COUNT, "fin_arms_mm", "needs exactly 4 entries")?;
        check(self.fin_arms.iter().all(|a| *a > 0.0), "fin_arms_mm", "must be > 0")?;
        check(
            self.fin_arms[0] == self.fin_arms[2] && self.fin_arms[1] == self.fin_arms[3],
            "fin_arms_mm",
            "opposing mounts must be mirror symmetric",
        )?;
        check(self.lateral_deflection.abs() < 90.0, "lateral_deflection_deg", "must lie in (-90, 90)")?;
        Ok(())
    }

    pub fn drag_area(&self) -> f64 {
        self.drag_coefficient * self.ref_area
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RobotState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
    /// deg
    pub yaw: f64,
    /// deg/s
    pub yaw_rate: f64,
    /// Inclination of the cycle's net fin impulse from vertical, deg.
    pub pitch: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub time: Vec<f64>,
    pub states: Vec<RobotState>,
    pub phase: Vec<ActuatorPhase>,
    /// Snap times; consecutive marks bound one cycle.
    pub cycle_marks: Vec<f64>,
    pub period: f64,
    pub dt: f64,
}

/// Per-cycle deflection of each fin, deg.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeflectionSchedule {
    pub cycles: Vec<[f64; FIN_COUNT]>,
}

impl DeflectionSchedule {
    pub fn constant(n_cycles: usize, betas: [f64; FIN_COUNT]) -> Self {
        Self { cycles: vec![betas; n_cycles] }
    }

    pub fn zero(n_cycles: usize) -> Self {
        Self::constant(n_cycles, [0.0; FIN_COUNT])
    }

    /// Equal deflection on the +x/−x pair: sideways translation along +y.
    pub fn lateral(n_cycles: usize, beta: f64) -> Self {
        Self::constant(n_cycles, [beta, 0.0, beta, 0.0])
    }

    /// Opposite deflection on the +x/−x pair: yaw.
    pub fn differential(n_cycles: usize, beta: f64) -> Self {
        Self::constant(n_cycles, [beta, 0.0, -beta, 0.0])
    }

    /// Reflection through the x–z plane.
    pub fn mirrored(&self) -> Self {
        Self { cycles: self.cycles.iter().map(|b| mirror_betas(*b)).collect() }
    }
}

pub fn mirror_betas(b: [f64; FIN_COUNT]) -> [f64; FIN_COUNT] {
    [-b[0], b[3], -b[2], b[1]]
}

fn chain_trace(cfg: &ScenarioConfig, beta: f64) -> Result<CycleTrace> {
    let mut c = cfg.clone();
    c.fin.deflection = beta;
    let model = ChainModel::from_config(&c);
    let trace = simulate_chain(&model, cfg.sim.dt, cfg.sim.warmup_cycles, 1)?;
    check_fired(&trace)?;
    Ok(trace)
}

/// Chain traces for every distinct deflection, simulated concurrently.
fn trace_bank(cfg: &ScenarioConfig, schedule: &DeflectionSchedule) -> Result<BTreeMap<u64, Arc<CycleTrace>>> {
    let mut betas: Vec<f64> = schedule.cycles.iter().flatten().map(|b| b.abs()).collect();
    betas.sort_by(f64::total_cmp);
    betas.dedup();
    let traces: Vec<Result<(u64, Arc<CycleTrace>)>> =
        betas.par_iter().map(|&b| chain_trace(cfg, b).map(|t| (b.to_bits(), Arc::new(t)))).collect();
    traces.into_iter().collect()
}

/// Integrate the body over `n_cycles` crank revolutions.
pub fn simulate_locomotion(n_cycles: usize, schedule: &DeflectionSchedule, cfg: &ScenarioConfig) -> Result<Trajectory> {
    if n_cycles == 0 {
        return Err(Error::Input("need at least one cycle".into()));
    }
    if schedule.cycles.len() < n_cycles {
        return Err(Error::Input(format!(
            "deflection schedule covers {} cycles, {} requested",
            schedule.cycles.len(),
            n_cycles
        )));
    }
    let body = &cfg.body;
    body.validate()?;
    let bank = trace_bank(cfg, schedule)?;
    let first = bank.values().next().expect("non-empty bank");
    let n = first.len() - 1;
    let dt = first.dt;
    let period = first.period;
    let shifts: Vec<usize> = cfg
        .drive
        .fin_phase_offsets_deg
        .iter()
        .map(|d| ((d / 360.0 * n as f64).round() as i64).rem_euclid(n as i64) as usize)
        .collect();

    let m = body.mass;
    let rho = cfg.fluid.rho_internal();
    let drag = 0.5 * rho * body.drag_area();
    let buoy = body.buoyancy_offset * GMM_S2_PER_N;
    let stride = cfg.sim.output_stride.max(1);

    let mut st = RobotState::default();
    let mut yaw = 0.0f64;
    let mut wz = 0.0f64;
    let mut traj = Trajectory {
        time: Vec::with_capacity(n_cycles * n / stride + 2),
        states: Vec::with_capacity(n_cycles * n / stride + 2),
        phase: Vec::with_capacity(n_cycles * n / stride + 2),
        cycle_marks: Vec::with_capacity(n_cycles),
        period,
        dt,
    };

    for c in 0..n_cycles {
        let betas = schedule.cycles[c];
        let traces: Vec<&CycleTrace> = betas.iter().map(|b| bank[&b.abs().to_bits()].as_ref()).collect();
        let lead = traces[0];
        if let Some(ts) = lead.snap_time {
            traj.cycle_marks.push(c as f64 * period + ts + shifts[0] as f64 * dt);
        }
        let mut jx = 0.0;
        let mut jy = 0.0;
        let mut jz = 0.0;
        for i in 0..n {
            let t = (c * n + i) as f64 * dt;
            if (c * n + i) % stride == 0 {
                traj.time.push(t);
                traj.states.push(st);
                traj.phase.push(lead.phase[(i + n - shifts[0]) % n]);
            }
            // fin forces in the body frame
            let (mut fx, mut fy, mut fz, mut tau) = (0.0, 0.0, 0.0, 0.0);
            for k in 0..FIN_COUNT {
                let tr = traces[k];
                let idx = (i + n - shifts[k]) % n;
                let beta = deg_to_rad(betas[k]).abs();
                let local = resolve(tr.normal_force[idx], deg_to_rad(tr.fin_angle[idx]), beta);
                let ft = local[1] * TANGENT_SIGN[k] * betas[k].signum();
                let a = k as f64 * std::f64::consts::FRAC_PI_2;
                let (sa, ca) = a.sin_cos();
                fx += local[0] * ca - ft * sa;
                fy += local[0] * sa + ft * ca;
                fz += local[2];
                tau += body.fin_arms[k] * ft;
            }
            jx += fx * dt;
            jy += fy * dt;
            jz += fz * dt;
            let (sy, cy) = yaw.sin_cos();
            let (wx, wy) = (fx * cy - fy * sy, fx * sy + fy * cy);
            let speed = (st.vx * st.vx + st.vy * st.vy + st.vz * st.vz).sqrt();
            let ax = (wx * GMM_S2_PER_N - drag * speed * st.vx) / m;
            let ay = (wy * GMM_S2_PER_N - drag * speed * st.vy) / m;
            let az = (fz * GMM_S2_PER_N + buoy - drag * speed * st.vz) / m;
            let alpha = (tau - body.yaw_drag * wz * wz.abs()) * GMM_S2_PER_N / body.yaw_inertia;
            st.vx += ax * dt;
            st.vy += ay * dt;
            st.vz += az * dt;
            st.x += st.vx * dt;
            st.y += st.vy * dt;
            st.z += st.vz * dt;
            wz += alpha * dt;
            yaw += wz * dt;
            st.yaw = rad_to_deg(yaw);
            st.yaw_rate = rad_to_deg(wz);
            st.pitch = rad_to_deg(jx.hypot(jy).atan2(jz));
            let finite = [st.x, st.y, st.z, st.vx, st.vy, st.vz, yaw, wz].iter().all(|v| v.is_finite());
            if !finite {
                let last = traj.states.last().copied().unwrap_or_default();
                return Err(Error::Unstable { t, detail: format!("body state diverged; last finite state {last:?}") });
            }
        }
    }
    traj.time.push((n_cycles * n) as f64 * dt);
    traj.states.push(st);
    traj.phase.push(*first.phase.last().unwrap_or(&ActuatorPhase::Preparation));
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleSummary {
    pub index: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub rise: f64,
    pub dip: f64,
    pub net: f64,
    pub dx: f64,
    pub dy: f64,
    pub horizontal: f64,
    pub yaw_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleSummaries {
    pub cycles: Vec<CycleSummary>,
    /// A partial cycle after the last mark was excluded.
    pub partial_trailing: bool,
}

impl CycleSummaries {
    pub fn last(&self) -> Option<&CycleSummary> {
        self.cycles.last()
    }
}

/// Rise, dip and net vertical displacement between consecutive snaps.
pub fn per_cycle_summary(traj: &Trajectory) -> Result<CycleSummaries> {
    let marks = &traj.cycle_marks;
    if marks.len() < 2 {
        return Err(Error::Input("trajectory spans less than one full cycle".into()));
    }
    let at = |t: f64| -> RobotState {
        let i = traj.time.partition_point(|&x| x < t);
        if i == 0 {
            return traj.states[0];
        }
        if i >= traj.time.len() {
            return *traj.states.last().unwrap();
        }
        let (t0, t1) = (traj.time[i - 1], traj.time[i]);
        let (a, b) = (traj.states[i - 1], traj.states[i]);
        let f = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
        let lerp = |u: f64, v: f64| u + f * (v - u);
        RobotState {
            x: lerp(a.x, b.x),
            y: lerp(a.y, b.y),
            z: lerp(a.z, b.z),
            vx: lerp(a.vx, b.vx),
            vy: lerp(a.vy, b.vy),
            vz: lerp(a.vz, b.vz),
            yaw: lerp(a.yaw, b.yaw),
            yaw_rate: lerp(a.yaw_rate, b.yaw_rate),
            pitch: lerp(a.pitch, b.pitch),
        }
    };
    let mut cycles = Vec::with_capacity(marks.len() - 1);
    for (k, w) in marks.windows(2).enumerate() {
        let (s, e) = (at(w[0]), at(w[1]));
        let peak = traj
            .time
            .iter()
            .zip(&traj.states)
            .filter(|(t, _)| **t > w[0] && **t < w[1])
            .map(|(_, st)| st.z)
            .fold(s.z.max(e.z), f64::max);
        let (dx, dy) = (e.x - s.x, e.y - s.y);
        cycles.push(CycleSummary {
            index: k,
            t_start: w[0],
            t_end: w[1],
            rise: peak - s.z,
            dip: peak - e.z,
            net: e.z - s.z,
            dx,
            dy,
            horizontal: dx.hypot(dy),
            yaw_change: e.yaw - s.yaw,
        });
    }
    let t_final = traj.time.last().copied().unwrap_or(0.0);
    let partial_trailing = t_final > *marks.last().unwrap();
    Ok(CycleSummaries { cycles, partial_trailing })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteeringCommand {
    pub time: f64,
    pub fin: usize,
    pub beta: f64,
    pub line: usize,
}

/// Timed deflection commands, one `time_s, fin_id, beta_deg` per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeringScript {
    pub commands: Vec<SteeringCommand>,
}

impl SteeringScript {
    pub fn parse(text: &str) -> Result<Self> {
        let mut commands: Vec<SteeringCommand> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let fields: Vec<&str> = body.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::Script { line, msg: format!("expected 3 fields, found {}", fields.len()) });
            }
            let err = |what: &str| Error::Script { line, msg: format!("cannot parse {what}") };
            let time: f64 = fields[0].parse().map_err(|_| err("time_s"))?;
            let fin: usize = fields[1].parse().map_err(|_| err("fin_id"))?;
            let beta: f64 = fields[2].parse().map_err(|_| err("beta_deg"))?;
            if !(time >= 0.0 && time.is_finite()) {
                return Err(Error::Script { line, msg: "time_s must be >= 0".into() });
            }
            if fin >= FIN_COUNT {
                return Err(Error::Script { line, msg: format!("fin_id {fin} out of range 0..{}", FIN_COUNT - 1) });
            }
            if !(beta.abs() < 90.0) {
                return Err(Error::Script { line, msg: "beta_deg must lie in (-90, 90)".into() });
            }
            if let Some(prev) = commands.iter().find(|c| c.time == time && c.fin == fin && c.beta != beta) {
                return Err(Error::Script {
                    line,
                    msg: format!("conflicts with line {} (fin {fin} at t = {time} s)", prev.line),
                });
            }
            commands.push(SteeringCommand { time, fin, beta, line });
        }
        commands.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.line.cmp(&b.line)));
        Ok(Self { commands })
    }

    pub fn mirrored(&self) -> Self {
        let commands = self
            .commands
            .iter()
            .map(|c| {
                let (fin, beta) = match c.fin {
                    0 => (0, -c.beta),
                    1 => (3, c.beta),
                    2 => (2, -c.beta),
                    _ => (1, c.beta),
                };
                SteeringCommand { fin, beta, ..*c }
            })
            .collect();
        Self { commands }
    }

    /// Deflections per cycle; a command applies from the first cycle start at or after its time.
    pub fn schedule(&self, n_cycles: usize, period: f64) -> DeflectionSchedule {
        let mut betas = [0.0; FIN_COUNT];
        let mut next = 0;
        let mut cycles = Vec::with_capacity(n_cycles);
        for c in 0..n_cycles {
            let start = c as f64 * period;
            while next < self.commands.len() && self.commands[next].time <= start + 1e-12 {
                betas[self.commands[next].fin] = self.commands[next].beta;
                next += 1;
            }
            cycles.push(betas);
        }
        DeflectionSchedule { cycles }
    }
}

/// Run a timed steering script over `horizon` seconds.
pub fn steering_scenario(script: &SteeringScript, horizon: f64, cfg: &ScenarioConfig) -> Result<Trajectory> {
    if !(horizon > 0.0) {
        return Err(Error::Input("horizon must be > 0".into()));
    }
    if let Some(c) = script.commands.iter().find(|c| c.time > horizon) {
        return Err(Error::Script { line: c.line, msg: format!("time {} s beyond the {horizon} s horizon", c.time) });
    }
    let period = cfg.drive.period();
    let n_cycles = (horizon / period).ceil() as usize;
    simulate_locomotion(n_cycles, &script.schedule(n_cycles, period), cfg)
}
