use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use lamsa::actuator::run_cycle;
use lamsa::body::{per_cycle_summary, simulate_locomotion, steering_scenario, DeflectionSchedule, SteeringScript};
use lamsa::config::{parse_config, ParsedConfig, ScenarioConfig};
use lamsa::geometry::validate_design;
use lamsa::hydro::{cycle_impulse, fin_size_sweep, sweep_argmax};
use lamsa::optimize::design::{area_grid, optimize_beam_length, optimize_fin_area, LengthSearch};
use lamsa::optimize::{calibrate_params, CalibrationResult, Param};
use lamsa::output::{
    cycle_csv, cycle_summary_json, cycles_json, fmt9, header, sweep_csv, to_json_text, trajectory_csv,
};
use lamsa::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "lamsa",
    version,
    about = "Latch-mediated soft-actuator swimmer: simulate, sweep, steer, calibrate, optimize"
)]
struct Cli {
    /// Scenario file (TOML); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Parent directory for run directories.
    #[arg(long, global = true, default_value = "runs")]
    out: PathBuf,
    /// Worker threads for concurrent evaluations.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Calibration file whose fitted constants are applied before running.
    #[arg(long, global = true)]
    calibration: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Report the linkage and beam feasibility checks.
    Validate,
    /// Run one actuator cycle and a multi-cycle swim.
    Simulate {
        #[arg(long)]
        cycles: Option<usize>,
        /// Lateral deflection of fins 0 and 2, deg.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        deflection: f64,
    },
    /// Fin-area sweep, `lo:hi:step` in mm².
    Sweep {
        #[arg(long, default_value = "1000:4500:500")]
        areas: String,
    },
    /// Run a timed steering script.
    Steer {
        #[arg(long)]
        script: PathBuf,
        /// Simulated time, s.
        #[arg(long)]
        horizon: Option<f64>,
        /// Mirror the script left to right.
        #[arg(long)]
        mirror: bool,
    },
    /// Fit model constants to the configured targets.
    Calibrate {
        #[arg(long)]
        budget: Option<usize>,
        /// Comma-separated parameter names; all when omitted.
        #[arg(long, value_delimiter = ',')]
        params: Vec<String>,
        /// Also write the result here.
        #[arg(long)]
        write: Option<PathBuf>,
    },
    /// Design search over beam length or fin area.
    #[command(subcommand)]
    Optimize(Optimize),
}

#[derive(Subcommand, Debug)]
enum Optimize {
    Length(LengthArgs),
    Area {
        /// `lo:hi` in mm².
        #[arg(long, default_value = "1000:4500")]
        range: String,
    },
}

#[derive(Args, Debug)]
struct LengthArgs {
    /// Comma-separated lengths, mm.
    #[arg(long, value_delimiter = ',', conflicts_with = "range")]
    grid: Vec<f64>,
    /// `lo:hi` in mm.
    #[arg(long)]
    range: Option<String>,
}

struct Run {
    dir: PathBuf,
    hash: String,
}

impl Run {
    fn write(&self, name: &str, text: &str) -> Result<()> {
        fs::write(self.dir.join(name), text).map_err(|e| Error::Io(format!("{}: {e}", self.dir.join(name).display())))
    }

    fn json(&self, name: &str, v: &Value) -> Result<()> {
        self.write(name, &to_json_text(v))
    }
}

fn numbers(text: &str, n: usize, what: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let vals: Option<Vec<f64>> = parts.iter().map(|p| p.trim().parse().ok()).collect();
    match vals {
        Some(v) if v.len() == n => Ok(v),
        _ => Err(Error::Input(format!("{what}: expected {n} numbers separated by ':' (got `{text}`)"))),
    }
}

fn load_config(cli: &Cli) -> Result<ParsedConfig> {
    let mut parsed = match &cli.config {
        Some(path) => parse_config(path)?,
        None => ParsedConfig { config: ScenarioConfig::default(), defaulted: vec!["(all keys)".into()] },
    };
    if let Some(path) = &cli.calibration {
        CalibrationResult::load(path)?.apply(&mut parsed.config)?;
    }
    if let Some(seed) = cli.seed {
        parsed.config.seed.value = seed;
    }
    parsed.config.validate()?;
    Ok(parsed)
}

fn open_run(out: &Path, command: &str, parsed: &ParsedConfig) -> Result<Run> {
    let cfg = &parsed.config;
    let hash = cfg.hash();
    fs::create_dir_all(out).map_err(|e| Error::Io(format!("{}: {e}", out.display())))?;
    let stamp = chrono::Local::now().format("%Y%m%dT%H%M%S");
    let base = format!("{stamp}-{}-{command}", &hash[..8]);
    let mut dir = out.join(&base);
    let mut k = 1;
    while dir.exists() {
        dir = out.join(format!("{base}-{k}"));
        k += 1;
    }
    fs::create_dir(&dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let run = Run { dir, hash };
    let mut echo = header(&run.hash);
    echo.push_str(&cfg.to_canonical_string());
    run.write("config.toml", &echo)?;
    let mut log_text =
        format!("lamsa {} {command}\nconfig_hash={}\nseed={}\n", lamsa::VERSION, run.hash, cfg.seed.value);
    for key in &parsed.defaulted {
        log::info!("defaulted {key}");
        log_text.push_str(&format!("defaulted {key}\n"));
    }
    run.write("run.log", &log_text)?;
    Ok(run)
}

fn validate(run: &Run, cfg: &ScenarioConfig) -> Result<Value> {
    let f = validate_design(cfg.beam.length, cfg.beam.thickness, &cfg.geometry)?;
    let verdicts: Vec<Value> = f
        .verdicts
        .iter()
        .map(|(c, ok)| json!({ "constraint": c.id(), "rule": c.describe(), "satisfied": ok }))
        .collect();
    let report = json!({
        "tool_version": lamsa::VERSION,
        "config_hash": run.hash,
        "l_min_mm": f.l_min,
        "l_max_mm": f.l_max,
        "length_mm": f.length,
        "thickness_mm": f.thickness,
        "slenderness": f.slenderness,
        "max_precompression": f.max_precompression,
        "verdicts": verdicts,
        "feasible": f.feasible,
    });
    run.json("feasibility.json", &report)?;
    if !f.feasible {
        let ids: Vec<&str> = f.violated_constraints.iter().map(|c| c.id()).collect();
        return Err(Error::Infeasible(format!("violated {}", ids.join(", "))));
    }
    Ok(report)
}

fn simulate(run: &Run, cfg: &ScenarioConfig, cycles: Option<usize>, deflection: f64) -> Result<Value> {
    let n = cycles.unwrap_or(cfg.sim.cycles);
    let mut single = cfg.clone();
    single.fin.deflection = deflection.abs();
    let trace = run_cycle(&single)?;
    let impulse = cycle_impulse(&trace)?;
    run.write("cycle.csv", &cycle_csv(&trace, &run.hash))?;
    let summary = cycle_summary_json(&trace, impulse, &run.hash);
    run.json("cycle_summary.json", &summary)?;

    let schedule = DeflectionSchedule::lateral(n, deflection);
    let traj = simulate_locomotion(n, &schedule, cfg)?;
    run.write("trajectory.csv", &trajectory_csv(&traj, &run.hash))?;
    let cycles = per_cycle_summary(&traj)?;
    let cj = cycles_json(&cycles, &run.hash);
    run.json("cycles.json", &cj)?;
    Ok(json!({ "cycle": summary, "last_cycle": cj["cycles"].as_array().and_then(|c| c.last()).cloned() }))
}

fn sweep(run: &Run, cfg: &ScenarioConfig, areas: &str) -> Result<Value> {
    let v = numbers(areas, 3, "--areas")?;
    if !(v[2] > 0.0 && v[0] > 0.0 && v[1] >= v[0]) {
        return Err(Error::Input(format!("--areas: need 0 < lo <= hi and step > 0 (got `{areas}`)")));
    }
    let rows = fin_size_sweep(&area_grid(v[0], v[1], v[2]), cfg);
    run.write("sweep.csv", &sweep_csv(&rows, &run.hash))?;
    let best = sweep_argmax(&rows);
    let report = json!({
        "tool_version": lamsa::VERSION,
        "config_hash": run.hash,
        "rows": rows.len(),
        "failed_rows": rows.iter().filter(|r| !r.ok()).count(),
        "best_area_mm2": best,
    });
    run.json("sweep.json", &report)?;
    Ok(report)
}

fn steer(run: &Run, cfg: &ScenarioConfig, script: &Path, horizon: Option<f64>, mirror: bool) -> Result<Value> {
    let text = fs::read_to_string(script).map_err(|e| Error::Io(format!("{}: {e}", script.display())))?;
    let mut parsed = SteeringScript::parse(&text)?;
    if mirror {
        parsed = parsed.mirrored();
    }
    let traj = steering_scenario(&parsed, horizon.unwrap_or(cfg.sim.steer_horizon), cfg)?;
    run.write("trajectory.csv", &trajectory_csv(&traj, &run.hash))?;
    let cj = cycles_json(&per_cycle_summary(&traj)?, &run.hash);
    run.json("cycles.json", &cj)?;
    let end = traj.states.last().copied().unwrap_or_default();
    Ok(json!({
        "end_time_s": traj.time.last().copied().unwrap_or(0.0),
        "end_x_mm": end.x,
        "end_y_mm": end.y,
        "end_z_mm": end.z,
        "end_yaw_deg": end.yaw,
    }))
}

fn calibrate(
    run: &Run,
    cfg: &ScenarioConfig,
    budget: Option<usize>,
    names: &[String],
    write: Option<&Path>,
) -> Result<Value> {
    let params: Vec<Param> = if names.is_empty() {
        Param::ALL.to_vec()
    } else {
        names
            .iter()
            .map(|n| {
                Param::from_name(n.trim()).ok_or_else(|| Error::Input(format!("unknown calibration parameter `{n}`")))
            })
            .collect::<Result<_>>()?
    };
    let result =
        calibrate_params(&cfg.calibration_targets, cfg, budget.unwrap_or(cfg.sim.calibration_budget), &params)?;
    result.save(&run.dir.join("calibration.json"))?;
    if let Some(path) = write {
        result.save(path)?;
    }
    Ok(json!({
        "objective": result.objective,
        "converged": result.converged,
        "evaluations": result.evaluations,
        "params": result.params,
    }))
}

fn optimize(run: &Run, cfg: &ScenarioConfig, what: &Optimize) -> Result<Value> {
    match what {
        Optimize::Length(args) => {
            let search = match (&args.range, args.grid.is_empty()) {
                (Some(r), _) => {
                    let v = numbers(r, 2, "--range")?;
                    LengthSearch::Range { lo: v[0], hi: v[1] }
                }
                (None, false) => LengthSearch::Grid(args.grid.clone()),
                (None, true) => LengthSearch::Grid(vec![38.0, 40.0, 42.0]),
            };
            let report = optimize_beam_length(&search, cfg)?;
            let mut csv = header(&run.hash);
            csv.push_str("length,feasible,trigger_force,output_force,output_force_twisted,kill_angle,objective\n");
            for r in &report.rows {
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    fmt9(r.length),
                    r.feasible,
                    fmt9(r.trigger_force),
                    fmt9(r.output_force),
                    fmt9(r.output_force_twisted),
                    fmt9(r.kill_angle),
                    fmt9(r.objective)
                ));
            }
            run.write("length.csv", &csv)?;
            let v = json!({
                "tool_version": lamsa::VERSION,
                "config_hash": run.hash,
                "best_length_mm": report.best,
                "l_min_mm": report.l_min,
                "l_max_mm": report.l_max,
            });
            run.json("length.json", &v)?;
            Ok(v)
        }
        Optimize::Area { range } => {
            let v = numbers(range, 2, "--range")?;
            let report = optimize_fin_area(v[0], v[1], cfg)?;
            run.write("area_sweep.csv", &sweep_csv(&report.rows, &run.hash))?;
            let out = json!({
                "tool_version": lamsa::VERSION,
                "config_hash": run.hash,
                "best_area_mm2": report.best,
                "golden_area_mm2": report.golden,
                "grid_best_area_mm2": report.grid_best,
                "unimodal": report.unimodal,
                "warning": report.warning,
            });
            run.json("area.json", &out)?;
            Ok(out)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<Value> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(Error::Input("--jobs must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Input(format!("--jobs: {e}")))?;
    }
    let parsed = load_config(cli)?;
    let name = match &cli.command {
        Command::Validate => "validate",
        Command::Simulate { .. } => "simulate",
        Command::Sweep { .. } => "sweep",
        Command::Steer { .. } => "steer",
        Command::Calibrate { .. } => "calibrate",
        Command::Optimize(_) => "optimize",
    };
    let run = open_run(&cli.out, name, &parsed)?;
    let cfg = &parsed.config;
    let outcome = match &cli.command {
        Command::Validate => validate(&run, cfg),
        Command::Simulate { cycles, deflection } => simulate(&run, cfg, *cycles, *deflection),
        Command::Sweep { areas } => sweep(&run, cfg, areas),
        Command::Steer { script, horizon, mirror } => steer(&run, cfg, script, *horizon, *mirror),
        Command::Calibrate { budget, params, write } => calibrate(&run, cfg, *budget, params, write.as_deref()),
        Command::Optimize(what) => optimize(&run, cfg, what),
    };
    match outcome {
        Ok(v) => Ok(json!({ "status": "ok", "run_dir": run.dir, "config_hash": run.hash, "result": v })),
        Err(e) => {
            let _ = run.json("error.json", &error_json(&e));
            Err(e)
        }
    }
}

fn error_json(e: &Error) -> Value {
    json!({ "status": "error", "kind": e.kind(), "message": e.to_string(), "exit_code": e.exit_code() })
}

fn emit(text: &str) {
    let _ = writeln!(std::io::stdout(), "{text}");
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let v = json!({ "status": "error", "kind": "usage", "message": e.to_string().trim(), "exit_code": 2 });
            emit(&serde_json::to_string(&v).expect("json"));
            return ExitCode::from(2);
        }
    };
    match dispatch(&cli) {
        Ok(v) => {
            emit(&serde_json::to_string_pretty(&v).expect("json"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            emit(&serde_json::to_string(&error_json(&e)).expect("json"));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
