//! Plain-text output with reproducible formatting.

use std::fmt::Write;

use serde_json::{json, Value};

use crate::actuator::CycleTrace;
use crate::body::{CycleSummaries, Trajectory};
use crate::hydro::SweepRow;

/// Decimal with nine significant digits; `nan`/`inf` spelled out.
pub fn fmt9(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs().log10().floor() as i32;
    let decimals = (8 - mag).clamp(0, 30) as usize;
    let mut s = format!("{x:.decimals$}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

pub fn header(config_hash: &str) -> String {
    format!("# lamsa {} config_hash={config_hash}\n", crate::VERSION)
}

pub fn cycle_csv(trace: &CycleTrace, config_hash: &str) -> String {
    let mut out = header(config_hash);
    out.push_str("t,s,q,fin_angle,latch_force,phase,thrust\n");
    for i in 0..trace.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt9(trace.time[i]),
            fmt9(trace.slider_s[i]),
            fmt9(trace.q[i]),
            fmt9(trace.fin_angle[i]),
            fmt9(trace.latch_force[i]),
            trace.phase[i].name(),
            fmt9(trace.thrust[i]),
        );
    }
    out
}

pub fn trajectory_csv(traj: &Trajectory, config_hash: &str) -> String {
    let mut out = header(config_hash);
    out.push_str("t,x,y,z,yaw,phase\n");
    for ((t, s), p) in traj.time.iter().zip(&traj.states).zip(&traj.phase) {
        let _ = writeln!(out, "{},{},{},{},{},{}", fmt9(*t), fmt9(s.x), fmt9(s.y), fmt9(s.z), fmt9(s.yaw), p.name());
    }
    out
}

pub fn sweep_csv(rows: &[SweepRow], config_hash: &str) -> String {
    let mut out = header(config_hash);
    out.push_str("area,peak_thrust,impulse,status\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", fmt9(r.area), fmt9(r.peak_thrust), fmt9(r.impulse), r.status);
    }
    out
}

/// Replace non-finite floats so the JSON stays valid.
fn finite(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

pub fn cycle_summary_json(trace: &CycleTrace, impulse: f64, config_hash: &str) -> Value {
    json!({
        "tool_version": crate::VERSION,
        "config_hash": config_hash,
        "period_s": finite(trace.period),
        "dt_s": finite(trace.dt),
        "snap_time_s": trace.snap_time.map(finite),
        "release_end_s": trace.release_end.map(finite),
        "loading_duration_s": finite(trace.loading_duration),
        "release_duration_s": finite(trace.release_duration),
        "load_release_ratio": finite(trace.load_release_ratio()),
        "peak_thrust_n": finite(trace.peak_thrust()),
        "impulse_ns": finite(impulse),
        "snap_count": trace.snap_count,
        "max_tilt_ratio": finite(trace.max_tilt_ratio),
    })
}

pub fn cycles_json(summary: &CycleSummaries, config_hash: &str) -> Value {
    let cycles: Vec<Value> = summary
        .cycles
        .iter()
        .map(|c| {
            json!({
                "index": c.index,
                "t_start_s": finite(c.t_start),
                "t_end_s": finite(c.t_end),
                "rise_mm": finite(c.rise),
                "dip_mm": finite(c.dip),
                "net_mm": finite(c.net),
                "dx_mm": finite(c.dx),
                "dy_mm": finite(c.dy),
                "horizontal_mm": finite(c.horizontal),
                "yaw_change_deg": finite(c.yaw_change),
            })
        })
        .collect();
    json!({
        "tool_version": crate::VERSION,
        "config_hash": config_hash,
        "partial_trailing_cycle_excluded": summary.partial_trailing,
        "cycles": cycles,
    })
}

pub fn to_json_text(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json serialises") + "\n"
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt9(0.0), "0");
        assert_eq!(fmt9(1.0), "1");
        assert_eq!(fmt9(std::f64::consts::PI), "3.14159265");
        assert_eq!(fmt9(-1234.56789012), "-1234.56789");
        assert_eq!(fmt9(1.23456789e-5), "0.0000123456789");
        assert_eq!(fmt9(-1e-40), "0");
        assert_eq!(fmt9(f64::NAN), "nan");
    }
}
