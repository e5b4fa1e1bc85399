use std::fs;
use std::path::{Path, PathBuf};

use diffspline::dynamics::{geodesic_shoot_with, gronwall_monitor, transport_profile, ControlPath, Trajectory};
use diffspline::error::Error;
use diffspline::solver::{interpolate_sequence_from, random_control, solve, SolveReport, SplineProblem};
use diffspline::spectral::io::write_field;
use diffspline::spectral::{flat, GridSpec, SobolevMetric};
use serde_json::{json, Value};

use crate::checks::{run_checks, CheckConfig};
use crate::config::{ConfigFile, GeodesicConfig, Init, InitialData, SplineConfig};
use crate::{to_sorted_json, Cli, CliError, CliResult, Outcome};

/// Relative tolerance for the conservation report of a geodesic run.
const CONSERVATION_TOLERANCE: f64 = 1e-5;

fn out_dir(cli: &Cli, command: &str) -> CliResult<PathBuf> {
    let dir = cli
        .out
        .clone()
        .ok_or_else(|| CliError::Usage(format!("`{command}` needs --out DIR")))?;
    fs::create_dir_all(&dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        source: e,
    })?;
    Ok(dir)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> CliResult<()> {
    fs::write(path, to_sorted_json(value) + "\n").map_err(|e| {
        Error::Io {
            path: path.display().to_string(),
            source: e,
        }
        .into()
    })
}

fn note(cli: &Cli, msg: impl AsRef<str>) {
    if cli.verbose {
        eprintln!("{}", msg.as_ref());
    }
}

pub(crate) fn geodesic(cli: &Cli) -> CliResult<Outcome> {
    let file = ConfigFile::required(cli.config.as_deref(), "geodesic")?;
    let cfg: GeodesicConfig = serde_json::from_value(Value::Object(file.root.clone()))
        .map_err(|e| CliError::Usage(format!("config: {e}")))?;
    let grid = GridSpec::new(cfg.grid.dim, cfg.grid.n)?;
    let metric = SobolevMetric::new(cfg.s);
    metric.validate_for(&grid)?;
    if cfg.time_steps < 4 {
        return Err(Error::Validation(format!("time_steps must be at least 4, got {}", cfg.time_steps)).into());
    }
    cfg.source()?;
    let out = out_dir(cli, "geodesic")?;

    let m0 = match cfg.load(&file)? {
        InitialData::Momentum(m) => m,
        InitialData::Velocity(v) => flat(&v, &metric),
    };
    diffspline::spectral::ensure_same(&grid, m0.grid())?;
    note(
        cli,
        format!("shooting {} steps on {}^{}", cfg.time_steps, grid.n(), grid.dim()),
    );
    let traj = geodesic_shoot_with(&m0, &metric, cfg.time_steps, cfg.interpolation)?;
    traj.export(&out.join("trajectory"))?;

    let zero = ControlPath::zeros(&grid, cfg.time_steps)?;
    let energy = gronwall_monitor(&traj, &zero, &metric)?;
    let transport = transport_profile(&traj, &zero, &metric)?;
    let report = json!({
        "energy": energy.energy,
        "energy_drift": energy.energy_drift,
        "energy_pass": energy.energy_drift <= CONSERVATION_TOLERANCE,
        "momentum_residual": transport.max,
        "momentum_relative_residual": transport.relative_max,
        "momentum_pass": transport.relative_max <= CONSERVATION_TOLERANCE,
        "all_pass": energy.energy_drift <= CONSERVATION_TOLERANCE && transport.relative_max <= CONSERVATION_TOLERANCE,
        "tolerance": CONSERVATION_TOLERANCE,
        "times": transport.times,
    });
    write_json(&out.join("conservation.json"), &report)?;
    Ok(Outcome {
        summary: json!({
            "command": "geodesic",
            "out": out.display().to_string(),
            "conservation": {
                "all_pass": report["all_pass"],
                "energy_drift": report["energy_drift"],
                "momentum_relative_residual": report["momentum_relative_residual"],
            },
        }),
        failure: None,
    })
}

fn write_results(out: &Path, traj: &Trajectory, control: &ControlPath, report: &SolveReport) -> CliResult<()> {
    traj.export(&out.join("trajectory"))?;
    let dir = out.join("control");
    fs::create_dir_all(&dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        source: e,
    })?;
    for (j, (a, t)) in control.fields().iter().zip(control.times()).enumerate() {
        write_field(
            a,
            &dir.join(format!("alpha_{j:04}.bin")),
            "alpha",
            &[("t", json!(t)), ("index", json!(j))],
        )?;
    }
    write_json(&out.join("report.json"), report)
}

fn finish(command: &str, out: &Path, report: &SolveReport) -> Outcome {
    let n = &report.numerics;
    Outcome {
        summary: json!({
            "command": command,
            "out": out.display().to_string(),
            "converged": n.converged,
            "stalled": n.stalled,
            "objective": n.objective,
            "endpoint_residuals": n.endpoint_residuals,
            "knots": n.knots,
        }),
        failure: (!n.converged).then(|| CliError::NotConverged(out.display().to_string())),
    }
}

pub(crate) fn spline(cli: &Cli) -> CliResult<Outcome> {
    let file = ConfigFile::required(cli.config.as_deref(), "spline")?;
    let cfg = SplineConfig::parse(file)?;
    if cfg.knots.is_some() {
        return Err(CliError::Usage(
            "config key `knots` belongs to `sequence`, not `spline`".into(),
        ));
    }
    let out = out_dir(cli, "spline")?;
    let problem = SplineProblem::new(cfg.settings.clone(), cfg.load_boundary()?)?;
    let init = match cfg.init {
        Init::Zero => None,
        Init::Random => Some(random_control(&problem, cli.seed, cfg.init_amplitude)),
    };
    note(cli, "solving boundary-value problem");
    let (traj, control, report) = solve(&problem, init.as_ref())?;
    write_results(&out, &traj, &control, &report)?;
    Ok(finish("spline", &out, &report))
}

pub(crate) fn sequence(cli: &Cli) -> CliResult<Outcome> {
    let file = ConfigFile::required(cli.config.as_deref(), "sequence")?;
    let cfg = SplineConfig::parse(file)?;
    if cfg.knots.is_none() {
        return Err(CliError::Usage("config key `knots` is required for `sequence`".into()));
    }
    let out = out_dir(cli, "sequence")?;
    let problem = SplineProblem::new(cfg.settings.clone(), cfg.load_boundary()?)?;
    let knots = cfg.load_knots()?;
    let control = match cfg.init {
        Init::Zero => ControlPath::zeros(problem.grid(), problem.steps())?,
        Init::Random => random_control(&problem, cli.seed, cfg.init_amplitude),
    };
    let m0 = flat(problem.initial_velocity(), problem.metric());
    note(cli, format!("interpolating {} knots", knots.times().len()));
    let (traj, control, report) = interpolate_sequence_from(&knots, &problem, Some((&control, &m0)))?;
    write_results(&out, &traj, &control, &report)?;
    Ok(finish("sequence", &out, &report))
}

pub(crate) fn check(cli: &Cli) -> CliResult<Outcome> {
    let cfg = match cli.config.as_deref() {
        Some(p) => ConfigFile::read(p)?.rest::<CheckConfig>()?,
        None => CheckConfig::default(),
    };
    note(cli, "running invariant checks");
    let results = run_checks(&cfg, cli.seed)?;
    if let Some(out) = &cli.out {
        fs::create_dir_all(out).map_err(|e| Error::Io {
            path: out.display().to_string(),
            source: e,
        })?;
        write_json(&out.join("checks.json"), &results)?;
    }
    let failed: Vec<String> = results["checks"]
        .as_object()
        .map(|m| {
            m.iter()
                .filter(|(_, v)| v["pass"] != Value::Bool(true))
                .map(|(k, _)| k.clone())
                .collect()
        })
        .unwrap_or_default();
    Ok(Outcome {
        failure: (!failed.is_empty()).then(|| CliError::ChecksFailed(failed.join(", "))),
        summary: results,
    })
}
