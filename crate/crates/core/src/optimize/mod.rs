//! Calibration against measured targets and design-space search.

pub mod design;
pub mod golden;
pub mod nelder_mead;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::actuator::run_cycle_unchecked;
use crate::body::{per_cycle_summary, simulate_locomotion, DeflectionSchedule};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::geometry::validate_design;
use crate::hydro::{cycle_impulse, fin_size_sweep, sweep_argmax};

pub use design::{
    balance_objective, optimize_beam_length, optimize_fin_area, torsion_pattern, BeamLengthReport, FinAreaReport,
    LengthSearch, TorsionPattern,
};
pub use golden::{golden_section_max, golden_section_min};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationTargets {
    pub peak_thrust_n: f64,
    pub peak_thrust_weight: f64,
    pub peak_thrust_tol: f64,
    pub impulse_ns: f64,
    pub impulse_weight: f64,
    pub impulse_tol: f64,
    pub net_rise_mm: f64,
    pub net_rise_weight: f64,
    pub net_rise_tol: f64,
    pub rise_mm: f64,
    pub rise_weight: f64,
    pub rise_tol: f64,
    pub dip_mm: f64,
    pub dip_weight: f64,
    pub dip_tol: f64,
    pub load_release_ratio: f64,
    pub load_release_ratio_weight: f64,
    pub load_release_ratio_tol: f64,
    pub optimum_area_mm2: f64,
    pub optimum_area_weight: f64,
    pub optimum_area_tol: f64,
}

impl Default for CalibrationTargets {
    fn default() -> Self {
        Self {
            peak_thrust_n: 0.528,
            peak_thrust_weight: 0.0,
            peak_thrust_tol: 0.15,
            impulse_ns: 0.147,
            impulse_weight: 1.0,
            impulse_tol: 0.15,
            net_rise_mm: 30.0,
            net_rise_weight: 1.0,
            net_rise_tol: 0.20,
            rise_mm: 40.0,
            rise_weight: 1.0,
            rise_tol: 0.20,
            dip_mm: 10.0,
            dip_weight: 1.0,
            dip_tol: 0.40,
            load_release_ratio: 10.0,
            load_release_ratio_weight: 1.0,
            load_release_ratio_tol: 0.20,
            optimum_area_mm2: 4000.0,
            optimum_area_weight: 1.0,
            optimum_area_tol: 0.125,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub name: &'static str,
    pub value: f64,
    pub weight: f64,
    pub tol: f64,
}

impl CalibrationTargets {
    pub fn entries(&self) -> [Target; 7] {
        let t = |name, value, weight, tol| Target { name, value, weight, tol };
        [
            t("peak_thrust", self.peak_thrust_n, self.peak_thrust_weight, self.peak_thrust_tol),
            t("impulse", self.impulse_ns, self.impulse_weight, self.impulse_tol),
            t("net_rise", self.net_rise_mm, self.net_rise_weight, self.net_rise_tol),
            t("rise", self.rise_mm, self.rise_weight, self.rise_tol),
            t("dip", self.dip_mm, self.dip_weight, self.dip_tol),
            t(
                "load_release_ratio",
                self.load_release_ratio,
                self.load_release_ratio_weight,
                self.load_release_ratio_tol,
            ),
            t("optimum_area", self.optimum_area_mm2, self.optimum_area_weight, self.optimum_area_tol),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for t in self.entries() {
            if !(t.value > 0.0) {
                return Err(Error::Input(format!("{}: target must be > 0", t.name)));
            }
            if !(t.weight >= 0.0) {
                return Err(Error::Input(format!("{}_weight: must be >= 0", t.name)));
            }
            if !(t.tol > 0.0) {
                return Err(Error::Input(format!("{}_tol: must be > 0", t.name)));
            }
        }
        Ok(())
    }

    /// Copy with every weight zeroed except `name`.
    pub fn only(&self, name: &str) -> Self {
        let mut t = self.clone();
        let w = [
            ("peak_thrust", &mut t.peak_thrust_weight),
            ("impulse", &mut t.impulse_weight),
            ("net_rise", &mut t.net_rise_weight),
            ("rise", &mut t.rise_weight),
            ("dip", &mut t.dip_weight),
            ("load_release_ratio", &mut t.load_release_ratio_weight),
            ("optimum_area", &mut t.optimum_area_weight),
        ];
        for (n, weight) in w {
            *weight = if n == name { 1.0 } else { 0.0 };
        }
        t
    }
}

/// Model observables compared against the targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub peak_thrust: f64,
    pub impulse: f64,
    pub net_rise: f64,
    pub rise: f64,
    pub dip: f64,
    pub load_release_ratio: f64,
    pub optimum_area: f64,
}

impl Prediction {
    pub fn values(&self) -> [f64; 7] {
        [self.peak_thrust, self.impulse, self.net_rise, self.rise, self.dip, self.load_release_ratio, self.optimum_area]
    }
}

/// Paper sweep grid used for the area optimum.
pub fn sweep_grid(cfg: &ScenarioConfig) -> Vec<f64> {
    let step = cfg.sim.area_step;
    let (lo, hi) = (1000.0f64.max(cfg.sim.area_min), 4500.0f64.min(cfg.sim.area_max));
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|k| lo + k as f64 * step).collect()
}

pub fn predict(cfg: &ScenarioConfig) -> Result<Prediction> {
    let trace = run_cycle_unchecked(cfg)?;
    let traj = simulate_locomotion(cfg.sim.cycles, &DeflectionSchedule::zero(cfg.sim.cycles), cfg)?;
    let summary = per_cycle_summary(&traj)?;
    let last = summary.last().ok_or_else(|| Error::Input("no complete cycle".into()))?;
    let rows = fin_size_sweep(&sweep_grid(cfg), cfg);
    let optimum_area = sweep_argmax(&rows).ok_or_else(|| Error::Input("sweep produced no valid rows".into()))?;
    Ok(Prediction {
        peak_thrust: trace.peak_thrust(),
        impulse: cycle_impulse(&trace)?,
        net_rise: last.net,
        rise: last.rise,
        dip: last.dip,
        load_release_ratio: trace.load_release_ratio(),
        optimum_area,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Param {
    StiffnessScale,
    NormalCoefficient,
    AddedMassCoefficient,
    ConnectorStiffness,
    ConnectorDamping,
    BuoyancyOffset,
    BodyDrag,
    TorsionGain,
    TorsionKill,
}

impl Param {
    pub const ALL: [Param; 9] = [
        Param::StiffnessScale,
        Param::NormalCoefficient,
        Param::AddedMassCoefficient,
        Param::ConnectorStiffness,
        Param::ConnectorDamping,
        Param::BuoyancyOffset,
        Param::BodyDrag,
        Param::TorsionGain,
        Param::TorsionKill,
    ];

    /// Parameters fitted against the dynamic targets.
    pub const DYNAMIC: [Param; 7] = [
        Param::StiffnessScale,
        Param::NormalCoefficient,
        Param::AddedMassCoefficient,
        Param::ConnectorStiffness,
        Param::ConnectorDamping,
        Param::BuoyancyOffset,
        Param::BodyDrag,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Param::StiffnessScale => "beam.stiffness_scale",
            Param::NormalCoefficient => "fin.normal_coefficient",
            Param::AddedMassCoefficient => "fin.added_mass_coefficient",
            Param::ConnectorStiffness => "connector.stiffness_nmm_per_rad",
            Param::ConnectorDamping => "connector.damping_nmm_s_per_rad",
            Param::BuoyancyOffset => "body.buoyancy_offset_n",
            Param::BodyDrag => "body.drag_coefficient",
            Param::TorsionGain => "beam.torsion_gain",
            Param::TorsionKill => "beam.torsion_kill",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }

    /// Declared search box.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            Param::StiffnessScale => (1.0, 60.0),
            Param::NormalCoefficient => (0.05, 5.0),
            Param::AddedMassCoefficient => (0.05, 4.0),
            Param::ConnectorStiffness => (0.0, 100.0),
            Param::ConnectorDamping => (1.0, 300.0),
            Param::BuoyancyOffset => (-3.0, 3.0),
            Param::BodyDrag => (0.05, 10.0),
            Param::TorsionGain => (0.0, 10.0),
            Param::TorsionKill => (0.0, 10.0),
        }
    }

    pub fn get(&self, c: &ScenarioConfig) -> f64 {
        match self {
            Param::StiffnessScale => c.beam.stiffness_scale,
            Param::NormalCoefficient => c.fin.normal_coefficient,
            Param::AddedMassCoefficient => c.fin.added_mass_coefficient,
            Param::ConnectorStiffness => c.connector.stiffness,
            Param::ConnectorDamping => c.connector.damping,
            Param::BuoyancyOffset => c.body.buoyancy_offset,
            Param::BodyDrag => c.body.drag_coefficient,
            Param::TorsionGain => c.beam.torsion_gain,
            Param::TorsionKill => c.beam.torsion_kill,
        }
    }

    pub fn set(&self, c: &mut ScenarioConfig, v: f64) {
        match self {
            Param::StiffnessScale => c.beam.stiffness_scale = v,
            Param::NormalCoefficient => c.fin.normal_coefficient = v,
            Param::AddedMassCoefficient => c.fin.added_mass_coefficient = v,
            Param::ConnectorStiffness => c.connector.stiffness = v,
            Param::ConnectorDamping => c.connector.damping = v,
            Param::BuoyancyOffset => c.body.buoyancy_offset = v,
            Param::BodyDrag => c.body.drag_coefficient = v,
            Param::TorsionGain => c.beam.torsion_gain = v,
            Param::TorsionKill => c.beam.torsion_kill = v,
        }
    }

    fn unit_of(&self, v: f64) -> f64 {
        let (lo, hi) = self.bounds();
        ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
    }

    fn value_at(&self, u: f64) -> f64 {
        let (lo, hi) = self.bounds();
        lo + u.clamp(0.0, 1.0) * (hi - lo)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub target: f64,
    pub predicted: f64,
    pub relative_error: f64,
    pub weight: f64,
    pub tolerance: f64,
    pub within_tolerance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub params: BTreeMap<String, f64>,
    pub residuals: BTreeMap<String, Residual>,
    pub torsion: Option<TorsionPattern>,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    pub seed: u64,
    pub config_hash: String,
}

impl CalibrationResult {
    pub fn apply(&self, cfg: &mut ScenarioConfig) -> Result<()> {
        for (name, v) in &self.params {
            let p = Param::from_name(name)
                .ok_or_else(|| Error::Input(format!("unknown calibration parameter `{name}`")))?;
            p.set(cfg, *v);
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Input(format!("calibration file: {e}")))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }
}

const FAILED: f64 = 1e3;

/// Weighted sum of relative errors; failed simulations score `FAILED`.
pub fn objective(targets: &CalibrationTargets, cfg: &ScenarioConfig) -> f64 {
    match predict(cfg) {
        Ok(p) => score(targets, &p),
        Err(_) => FAILED,
    }
}

fn score(targets: &CalibrationTargets, p: &Prediction) -> f64 {
    targets
        .entries()
        .iter()
        .zip(p.values())
        .map(|(t, v)| if t.weight > 0.0 { t.weight * ((v - t.value) / t.value).abs() } else { 0.0 })
        .sum()
}

pub fn residuals(targets: &CalibrationTargets, cfg: &ScenarioConfig) -> BTreeMap<String, Residual> {
    let pred = predict(cfg).ok();
    targets
        .entries()
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let predicted = pred.map_or(f64::NAN, |p| p.values()[k]);
            let rel = (predicted - t.value) / t.value;
            (
                t.name.to_string(),
                Residual {
                    target: t.value,
                    predicted,
                    relative_error: rel,
                    weight: t.weight,
                    tolerance: t.tol,
                    within_tolerance: rel.abs() <= t.tol,
                },
            )
        })
        .collect()
}

/// Fit the torsion pair, then the dynamic constants, from the config's current values.
pub fn calibrate(targets: &CalibrationTargets, config: &ScenarioConfig, budget: usize) -> Result<CalibrationResult> {
    calibrate_params(targets, config, budget, &Param::ALL)
}

pub fn calibrate_params(
    targets: &CalibrationTargets,
    config: &ScenarioConfig,
    budget: usize,
    params: &[Param],
) -> Result<CalibrationResult> {
    config.validate()?;
    targets.validate()?;
    let feas = validate_design(config.beam.length, config.beam.thickness, &config.geometry)?;
    if !feas.feasible {
        return Err(Error::Infeasible(format!(
            "base beam length {} mm outside ({:.3}, {:.3}) mm",
            config.beam.length, feas.l_min, feas.l_max
        )));
    }
    let mut cfg = config.clone();
    let mut iterations = 0;
    let mut evaluations = 0;
    let mut converged = true;

    let torsion: Vec<Param> =
        params.iter().copied().filter(|p| matches!(p, Param::TorsionGain | Param::TorsionKill)).collect();
    if !torsion.is_empty() {
        let base = cfg.clone();
        let f = |u: &[f64]| {
            let mut c = base.clone();
            for (p, v) in torsion.iter().zip(u) {
                p.set(&mut c, p.value_at(*v));
            }
            design::torsion_objective(&c)
        };
        let m = fit(&f, &torsion, &cfg, budget / 10 + 20, config.seed.value, config.sim.calibration_restarts);
        for (p, v) in torsion.iter().zip(&m.x) {
            p.set(&mut cfg, p.value_at(*v));
        }
        iterations += m.iterations;
        evaluations += m.evaluations;
        converged &= m.converged;
    }

    let dynamic: Vec<Param> =
        params.iter().copied().filter(|p| !matches!(p, Param::TorsionGain | Param::TorsionKill)).collect();
    if !dynamic.is_empty() {
        let base = cfg.clone();
        let f = |u: &[f64]| {
            let mut c = base.clone();
            for (p, v) in dynamic.iter().zip(u) {
                p.set(&mut c, p.value_at(*v));
            }
            objective(targets, &c)
        };
        let m = fit(&f, &dynamic, &cfg, budget, config.seed.value, config.sim.calibration_restarts);
        for (p, v) in dynamic.iter().zip(&m.x) {
            p.set(&mut cfg, p.value_at(*v));
        }
        iterations += m.iterations;
        evaluations += m.evaluations;
        converged &= m.converged;
    }

    let residuals = residuals(targets, &cfg);
    let objective = objective(targets, &cfg);
    Ok(CalibrationResult {
        params: params.iter().map(|p| (p.name().to_string(), p.get(&cfg))).collect(),
        residuals,
        torsion: torsion_pattern(&cfg).ok(),
        objective,
        converged,
        iterations,
        evaluations,
        seed: config.seed.value,
        config_hash: config.hash(),
    })
}

/// Nelder–Mead with seeded restarts, then a coordinate polish.
fn fit<F: Fn(&[f64]) -> f64 + Sync>(
    f: &F,
    params: &[Param],
    cfg: &ScenarioConfig,
    budget: usize,
    seed: u64,
    restarts: usize,
) -> nelder_mead::Minimum {
    use nelder_mead::*;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let opts = NelderMeadOptions::default();
    let mut b = Budgeted::new(f, budget);
    let x0: Vec<f64> = params.iter().map(|p| p.unit_of(p.get(cfg))).collect();
    let n = x0.len();
    let mut best = if n == 1 {
        let fx = b.eval(&x0);
        Minimum { x: x0.clone(), fx, evaluations: 1, iterations: 0, converged: false }
    } else {
        minimize(&mut b, axis_simplex(&x0, &vec![opts.initial_step; n]), &opts)
    };
    let mut iterations = best.iterations;
    for _ in 0..restarts {
        if n < 2 || b.left() < 2 * (n + 1) {
            break;
        }
        let steps: Vec<f64> = (0..n)
            .map(|_| {
                let h = opts.initial_step * rng.gen_range(0.5..1.5);
                if rng.gen_bool(0.5) {
                    h
                } else {
                    -h
                }
            })
            .collect();
        let m = minimize(&mut b, axis_simplex(&best.x, &steps), &opts);
        iterations += m.iterations;
        if m.fx <= best.fx {
            best = Minimum { converged: m.converged, ..m };
        }
    }
    let mut x = best.x.clone();
    let mut fx = best.fx;
    iterations += coordinate_polish(&mut b, &mut x, &mut fx, 0.02, 1e-5);
    let converged = best.converged && b.left() > 0;
    Minimum { x, fx, evaluations: b.used, iterations, converged }
}
