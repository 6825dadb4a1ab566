//! Beam-length and fin-area searches.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::golden::golden_section_max;
use crate::actuator::run_cycle;
use crate::beam::{self, BeamSpec};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::geometry::{beam_length_bounds, validate_design};
use crate::hydro::{cycle_impulse, SweepRow};

/// Torsion angle used for the "slight torsion" comparisons, deg.
pub const SLIGHT_TORSION_DEG: f64 = 10.0;

/// Slenderness ratios compared for the torsion sign pattern.
pub const TORSION_RATIOS: [f64; 3] = [9.5, 10.0, 10.5];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorsionPattern {
    /// Relative output change at slight torsion, per ratio.
    pub gains: [f64; 3],
    /// Torsion that removes bistability of the nominal beam at TDC, deg.
    pub kill_angle: f64,
    pub holds: bool,
}

fn tdc_compression(length: f64, cfg: &ScenarioConfig) -> f64 {
    length - cfg.geometry.d1
}

fn with_length(spec: &BeamSpec, length: f64) -> BeamSpec {
    BeamSpec { length, ..*spec }
}

/// Output-force response to slight torsion over the three ratios.
pub fn torsion_pattern(cfg: &ScenarioConfig) -> Result<TorsionPattern> {
    let mut gains = [0.0; 3];
    for (g, ratio) in gains.iter_mut().zip(TORSION_RATIOS) {
        let spec = with_length(&cfg.beam, ratio * cfg.beam.thickness);
        let d = tdc_compression(spec.length, cfg);
        let straight = beam::output_force(d, 0.0, &spec)?;
        let twisted = beam::output_force(d, SLIGHT_TORSION_DEG, &spec).unwrap_or(0.0);
        *g = twisted / straight - 1.0;
    }
    let kill_angle =
        beam::torsion_kill_angle(tdc_compression(cfg.beam.length, cfg), &cfg.beam).unwrap_or(f64::INFINITY);
    let holds = gains[0] > 0.0 && gains[1] > 0.0 && gains[2] < 0.0 && kill_angle.is_finite();
    Ok(TorsionPattern { gains, kill_angle, holds })
}

const TORSION_MARGIN: f64 = 0.01;

/// Zero when the sign pattern holds with margin and the nominal beam
/// survives twice the lateral steering deflection.
pub fn torsion_objective(cfg: &ScenarioConfig) -> f64 {
    let Ok(p) = torsion_pattern(cfg) else { return 1e3 };
    let want = [1.0, 1.0, -1.0];
    let shortfall: f64 = p.gains.iter().zip(want).map(|(g, s)| (TORSION_MARGIN - s * g).max(0.0).powi(2)).sum();
    let min_kill = 2.0 * cfg.fin.servo_gear_gain * cfg.body.lateral_deflection.abs();
    let kill = if p.kill_angle.is_finite() { (min_kill - p.kill_angle).max(0.0) / 90.0 } else { 1.0 };
    shortfall + kill * kill
}

/// Balance of output energy against torsion margin at slight torsion.
///
/// `E_out(phi) * (1 - delta_eff / delta_crit(phi))` at TDC compression;
/// zero once torsion has removed bistability.
pub fn balance_objective(length: f64, cfg: &ScenarioConfig) -> f64 {
    let spec = with_length(&cfg.beam, length);
    let d = tdc_compression(length, cfg);
    let phi = SLIGHT_TORSION_DEG;
    match beam::output_energy(d, phi, &spec) {
        Ok(e) => {
            let margin = 1.0 - beam::effective_compression(d, phi, &spec) / spec.critical_compression(phi);
            e * margin.max(0.0)
        }
        Err(_) => 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LengthSearch {
    Grid(Vec<f64>),
    Range { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthRow {
    pub length: f64,
    pub feasible: bool,
    pub trigger_force: f64,
    pub output_force: f64,
    pub output_force_twisted: f64,
    pub kill_angle: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamLengthReport {
    pub best: f64,
    pub l_min: f64,
    pub l_max: f64,
    pub rows: Vec<LengthRow>,
}

fn length_row(length: f64, cfg: &ScenarioConfig) -> Result<LengthRow> {
    let feasible = validate_design(length, cfg.beam.thickness, &cfg.geometry)?.feasible;
    let spec = with_length(&cfg.beam, length);
    let d = tdc_compression(length, cfg);
    Ok(LengthRow {
        length,
        feasible,
        trigger_force: beam::trigger_force(d, 0.0, &spec).unwrap_or(f64::NAN),
        output_force: beam::output_force(d, 0.0, &spec).unwrap_or(f64::NAN),
        output_force_twisted: beam::output_force(d, SLIGHT_TORSION_DEG, &spec).unwrap_or(f64::NAN),
        kill_angle: beam::torsion_kill_angle(d, &spec).unwrap_or(f64::NAN),
        objective: if feasible { balance_objective(length, cfg) } else { f64::NAN },
    })
}

/// Index of the largest finite value; first one wins ties.
pub fn best_on_grid(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        if v.is_finite() && best.is_none_or(|b| *v > values[b]) {
            best = Some(i);
        }
    }
    best
}

pub fn optimize_beam_length(search: &LengthSearch, cfg: &ScenarioConfig) -> Result<BeamLengthReport> {
    let (l_min, l_max) = beam_length_bounds(&cfg.geometry);
    let empty = || {
        Error::Infeasible(format!(
            "no candidate length satisfies L_min = {l_min:.3} mm < L < L_max = {l_max:.3} mm and 30% pre-compression"
        ))
    };
    let rows: Vec<LengthRow> = match search {
        LengthSearch::Grid(grid) => grid.iter().map(|&l| length_row(l, cfg)).collect::<Result<_>>()?,
        LengthSearch::Range { lo, hi } => {
            let a = lo.max(l_min);
            let b = hi.min(l_max);
            if !(a < b) {
                return Err(empty());
            }
            let pad = 1e-6 * (b - a);
            let r = golden_section_max(a + pad, b - pad, 1e-3, |l| balance_objective(l, cfg));
            vec![length_row(a + pad, cfg)?, length_row(r.x, cfg)?, length_row(b - pad, cfg)?]
        }
    };
    let scores: Vec<f64> = rows.iter().map(|r| if r.feasible { r.objective } else { f64::NAN }).collect();
    let k = best_on_grid(&scores).ok_or_else(empty)?;
    Ok(BeamLengthReport { best: rows[k].length, l_min, l_max, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinAreaReport {
    pub best: f64,
    pub golden: Option<f64>,
    pub grid_best: f64,
    pub unimodal: bool,
    pub warning: Option<String>,
    pub rows: Vec<SweepRow>,
}

/// Strictly up then strictly down (either run may be empty).
pub fn is_unimodal(values: &[f64]) -> bool {
    if values.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let mut falling = false;
    for w in values.windows(2) {
        if w[1] > w[0] {
            if falling {
                return false;
            }
        } else if w[1] < w[0] {
            falling = true;
        } else {
            return false;
        }
    }
    true
}

pub fn area_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    let mut g: Vec<f64> = (0..=n).map(|k| lo + k as f64 * step).collect();
    if hi - g[g.len() - 1] > 1e-9 {
        g.push(hi);
    }
    g
}

const SUB_INTERVALS: usize = 20;

/// Grid sweep, unimodality check, then golden-section refinement around the grid best.
pub fn search_area(grid: &[f64], tol: f64, f: impl Fn(f64) -> Option<f64> + Sync) -> (Vec<Option<f64>>, FinAreaSearch) {
    let values: Vec<Option<f64>> = grid.par_iter().map(|&a| f(a)).collect();
    let flat: Vec<f64> = values.iter().map(|v| v.unwrap_or(f64::NAN)).collect();
    let k = best_on_grid(&flat);
    let unimodal = is_unimodal(&flat);
    let Some(k) = k else {
        return (values, FinAreaSearch { best: f64::NAN, golden: None, grid_best: f64::NAN, unimodal });
    };
    let grid_best = grid[k];
    if !unimodal {
        return (values, FinAreaSearch { best: grid_best, golden: None, grid_best, unimodal });
    }
    let a = grid[k.saturating_sub(1)];
    let b = grid[(k + 1).min(grid.len() - 1)];
    // the bracket can hold a shallow second hump; narrow it on a sub-grid first
    let sub: Vec<f64> = (0..=SUB_INTERVALS).map(|i| a + (b - a) * i as f64 / SUB_INTERVALS as f64).collect();
    let sub_vals: Vec<f64> = sub.par_iter().map(|&x| f(x).unwrap_or(f64::NAN)).collect();
    let (a, b) = match best_on_grid(&sub_vals) {
        Some(j) => (sub[j.saturating_sub(1)], sub[(j + 1).min(SUB_INTERVALS)]),
        None => (a, b),
    };
    let r = golden_section_max(a, b, tol, |x| f(x).unwrap_or(f64::NEG_INFINITY));
    (values, FinAreaSearch { best: r.x, golden: Some(r.x), grid_best, unimodal })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinAreaSearch {
    pub best: f64,
    pub golden: Option<f64>,
    pub grid_best: f64,
    pub unimodal: bool,
}

fn impulse_at(area: f64, cfg: &ScenarioConfig) -> Result<(f64, f64)> {
    let mut c = cfg.clone();
    c.fin.area = area;
    let trace = run_cycle(&c)?;
    Ok((cycle_impulse(&trace)?, trace.peak_thrust()))
}

pub fn optimize_fin_area(lo: f64, hi: f64, cfg: &ScenarioConfig) -> Result<FinAreaReport> {
    let (amin, amax) = (cfg.sim.area_min, cfg.sim.area_max);
    if !(lo >= amin && hi <= amax && lo < hi) {
        return Err(Error::Input(format!("area range [{lo}, {hi}] must lie inside [{amin}, {amax}] mm²")));
    }
    let grid = area_grid(lo, hi, cfg.sim.area_step);
    let outcomes: Vec<Result<(f64, f64)>> = grid.par_iter().map(|&a| impulse_at(a, cfg)).collect();
    let (_, found) = search_area(&grid, cfg.sim.area_tolerance, |a| match grid.iter().position(|g| *g == a) {
        Some(i) => outcomes[i].as_ref().ok().map(|o| o.0),
        None => impulse_at(a, cfg).ok().map(|o| o.0),
    });
    let rows = grid
        .iter()
        .zip(&outcomes)
        .map(|(&area, o)| match o {
            Ok((imp, peak)) => SweepRow { area, peak_thrust: *peak, impulse: *imp, status: "ok".into() },
            Err(e) => SweepRow { area, peak_thrust: f64::NAN, impulse: f64::NAN, status: e.kind().into() },
        })
        .collect();
    if !found.best.is_finite() {
        return Err(Error::Input("no area in the range produced a valid cycle".into()));
    }
    let warning = (!found.unimodal).then(|| {
        log::warn!("impulse is not unimodal on the area grid; using the grid argmax");
        "impulse not unimodal on the grid; exhaustive grid argmax used".to_string()
    });
    Ok(FinAreaReport {
        best: found.best,
        golden: found.golden,
        grid_best: found.grid_best,
        unimodal: found.unimodal,
        warning,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unimodality() {
        assert!(is_unimodal(&[1.0, 2.0, 3.0, 2.0]));
        assert!(is_unimodal(&[3.0, 2.0, 1.0]));
        assert!(is_unimodal(&[1.0]));
        assert!(!is_unimodal(&[1.0, 3.0, 2.0, 4.0]));
        assert!(!is_unimodal(&[1.0, 1.0]));
    }

    #[test]
    fn monotone_objective_picks_endpoint() {
        assert_eq!(best_on_grid(&[1.0, 2.0, 3.0]), Some(2));
        assert_eq!(best_on_grid(&[3.0, 2.0, 1.0]), Some(0));
        assert_eq!(best_on_grid(&[f64::NAN]), None);
    }

    #[test]
    fn concave_area_vertex() {
        let grid = area_grid(1000.0, 4500.0, 500.0);
        let (_, r) = search_area(&grid, 0.5, |a| Some(-(a - 3321.0) * (a - 3321.0)));
        assert!(r.unimodal);
        assert!((r.best - 3321.0).abs() < 1.0);
    }

    #[test]
    fn bumpy_area_falls_back() {
        let grid = area_grid(1000.0, 4500.0, 500.0);
        let (_, r) = search_area(&grid, 1.0, |a| Some((a / 300.0).sin()));
        assert!(!r.unimodal && r.golden.is_none());
        assert_eq!(r.best, r.grid_best);
    }

    #[test]
    fn grid_includes_end() {
        assert_eq!(area_grid(1000.0, 2000.0, 400.0), vec![1000.0, 1400.0, 1800.0, 2000.0]);
    }

    #[test]
    fn infeasible_lengths_error() {
        let cfg = ScenarioConfig::default();
        let e = optimize_beam_length(&LengthSearch::Grid(vec![20.0, 60.0]), &cfg).unwrap_err();
        assert!(matches!(e, Error::Infeasible(_)));
        assert!(optimize_beam_length(&LengthSearch::Range { lo: 55.0, hi: 60.0 }, &cfg).is_err());
    }
}
