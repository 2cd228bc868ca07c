use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use dipole_backflow::blp::{
    backflow_branch, n_measure_with, sigma_rate_dimensional, BackflowOptions, BranchKind, TIE_TOLERANCE,
};
use dipole_backflow::config::{load_config, ConfigError};
use dipole_backflow::dynamics::{mean_dipole, mean_inversion, mean_inversion_as_printed, trace_distance, BlochState};
use dipole_backflow::model::{derive_params, nondimensionalize, DerivedParams, DimensionlessConfig, SystemParams};
use dipole_backflow::output::{format_float, to_json, CsvTable};
use dipole_backflow::stochastic::{
    ensemble_average_with, estimate_spectrum, max_field_step, sample_field, trajectory_seed, EnsembleOptions,
    EnsembleReport, StochasticError,
};
use dipole_backflow::{FormulaSource, InitialCondition, StatePair};

use crate::{Command, Common, Format};

/// πI₀κ²/β above this is outside the weak-coupling regime.
pub const MAX_WEAK_COUPLING: f64 = 0.25;
/// Ω/β below this is outside the weak-coupling regime.
pub const MIN_CARRIER_RATIO: f64 = 5.0;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write {path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Acceptance(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Numerical(_) => 3,
            CliError::Acceptance(_) => 4,
        }
    }
}

impl From<StochasticError> for CliError {
    fn from(e: StochasticError) -> Self {
        match e {
            StochasticError::Diverged { .. } | StochasticError::FitDidNotConverge(_) => CliError::Numerical(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Derive { common } => derive(&common),
        Command::Evolve {
            common,
            m0,
            w0,
            tmax,
            steps,
        } => evolve(&common, m0, w0, tmax, steps),
        Command::Distance {
            common,
            theta,
            tmax,
            steps,
        } => distance(&common, theta, tmax, steps),
        Command::Nonmark {
            common,
            tmax,
            lambda,
            omega,
            theta_grid,
            literal_eq_nt,
        } => nonmark(&common, tmax, lambda, omega, theta_grid, literal_eq_nt),
        Command::Sweep {
            common,
            lambda,
            omega,
            tmax,
        } => sweep(&common, &lambda.points(), &omega.points(), &tmax.points()),
        Command::McVerify {
            common,
            n,
            m0,
            w0,
            horizon,
            dt,
            allow_strong,
            dump_field,
        } => mc_verify(&common, n, m0, w0, horizon, dt, allow_strong, dump_field.as_deref()),
        Command::Spectrum { common, n, length } => spectrum(&common, n, length),
    }
}

fn params(common: &Common) -> Result<(SystemParams, DerivedParams)> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("--config is required".into()))?;
    let p = load_config(path)?;
    let d = derive_params(&p).map_err(|e| CliError::Usage(e.to_string()))?;
    Ok((p, d))
}

fn write_output(out: Option<&PathBuf>, content: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, content).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn check_horizon(tmax: f64) -> Result<()> {
    if tmax.is_finite() && tmax >= 0.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!("--tmax must be a non-negative number (got {tmax})")))
    }
}

fn time_grid(tmax: f64, steps: usize) -> Result<Vec<f64>> {
    check_horizon(tmax)?;
    if steps == 0 {
        return Err(CliError::Usage("--steps must be at least 1".into()));
    }
    Ok((0..=steps).map(|k| tmax * k as f64 / steps as f64).collect())
}

#[derive(Serialize)]
struct DeriveOutput {
    a: f64,
    b: Option<f64>,
    gamma: f64,
    lambda_sq: f64,
    lambda: Option<f64>,
    oscillatory: bool,
    c_sine: f64,
    skew: f64,
}

fn derive(common: &Common) -> Result<()> {
    let (_, d) = params(common)?;
    let out = DeriveOutput {
        a: d.a_const,
        b: d.b_const,
        gamma: d.gamma,
        lambda_sq: d.lambda_sq,
        lambda: d.lambda(),
        oscillatory: d.oscillatory,
        c_sine: d.c_sine,
        skew: d.skew,
    };
    let opt = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), format_float);
    let content = match common.format {
        None => format!(
            "A = {}\nB = {}\ngamma = {}\nlambda_sq = {}\nlambda = {}\noscillatory = {}\nc_sine = {}\nskew = {}\n",
            format_float(out.a),
            opt(out.b),
            format_float(out.gamma),
            format_float(out.lambda_sq),
            opt(out.lambda),
            out.oscillatory,
            format_float(out.c_sine),
            format_float(out.skew)
        ),
        Some(Format::Csv) => {
            let mut t = CsvTable::new(["A", "B", "gamma", "lambda_sq", "lambda", "oscillatory", "c_sine", "skew"]);
            t.push(vec![
                format_float(out.a),
                opt(out.b),
                format_float(out.gamma),
                format_float(out.lambda_sq),
                opt(out.lambda),
                out.oscillatory.to_string(),
                format_float(out.c_sine),
                format_float(out.skew),
            ]);
            t.render()
        }
        Some(Format::Json) => to_json(&out),
    };
    write_output(common.out.as_ref(), &content)
}

#[derive(Serialize)]
struct EvolveRow {
    t: f64,
    m: f64,
    w: f64,
    purity: f64,
}

fn evolve(common: &Common, m0: f64, w0: f64, tmax: f64, steps: usize) -> Result<()> {
    let (p, d) = params(common)?;
    let ic = InitialCondition::new(m0, w0).map_err(|e| CliError::Usage(e.to_string()))?;
    let mode: FormulaSource = common.mode.into();
    let rows: Vec<EvolveRow> = time_grid(tmax, steps)?
        .into_iter()
        .map(|t| {
            let w = match mode {
                FormulaSource::Derived => mean_inversion(&ic, &d, &p, t),
                FormulaSource::AsPrinted => mean_inversion_as_printed(&ic, &d, &p, t),
            };
            let s = BlochState {
                m: mean_dipole(&ic, &p, t),
                w,
            };
            EvolveRow {
                t,
                m: s.m,
                w: s.w,
                purity: s.purity(),
            }
        })
        .collect();
    let outside = rows.iter().filter(|r| r.purity > 1.0 + 1e-9).count();
    if outside > 0 {
        eprintln!("warning: {outside} of {} points lie outside the Bloch ball", rows.len());
    }
    let content = match common.format {
        Some(Format::Json) => to_json(&rows),
        _ => {
            let mut t = CsvTable::new(["t", "m", "w", "purity"]);
            for r in &rows {
                t.push_floats(&[r.t, r.m, r.w, r.purity]);
            }
            t.render()
        }
    };
    write_output(common.out.as_ref(), &content)
}

#[derive(Serialize)]
struct DistanceRow {
    t: f64,
    distance: f64,
    sigma: f64,
}

fn distance(common: &Common, theta: f64, tmax: f64, steps: usize) -> Result<()> {
    let (p, d) = params(common)?;
    let pair = StatePair::new(theta).map_err(|e| CliError::Usage(e.to_string()))?;
    let mode: FormulaSource = common.mode.into();
    let rows: Vec<DistanceRow> = time_grid(tmax, steps)?
        .into_iter()
        .map(|t| DistanceRow {
            t,
            distance: trace_distance(&pair, &d, &p, t, mode),
            sigma: sigma_rate_dimensional(theta, d.gamma, d.lambda_sq, d.skew, p.omega, t, mode).value,
        })
        .collect();
    let content = match common.format {
        Some(Format::Json) => to_json(&rows),
        _ => {
            let mut t = CsvTable::new(["t", "distance", "sigma"]);
            for r in &rows {
                t.push_floats(&[r.t, r.distance, r.sigma]);
            }
            t.render()
        }
    };
    write_output(common.out.as_ref(), &content)
}

fn nonmark(
    common: &Common,
    tmax: f64,
    lambda: Option<f64>,
    omega: Option<f64>,
    theta_grid: usize,
    literal: bool,
) -> Result<()> {
    check_horizon(tmax)?;
    let cfg = match (&common.config, lambda, omega) {
        (Some(_), None, None) => {
            let (p, _) = params(common)?;
            nondimensionalize(&p, tmax).map_err(|e| CliError::Usage(e.to_string()))?
        }
        (None, Some(l), Some(o)) => DimensionlessConfig::reduced(l, o, tmax),
        _ => {
            return Err(CliError::Usage(
                "give either --config or both --lambda and --omega".into(),
            ))
        }
    };
    let n = n_measure_with(&cfg, common.mode.into(), theta_grid, literal, &BackflowOptions::default()).map_err(
        |e| match e {
            dipole_backflow::blp::BlpError::InvalidInput(msg) => CliError::Usage(msg),
            other => CliError::Numerical(other.to_string()),
        },
    )?;
    let content = match common.format {
        Some(Format::Json) => to_json(&n),
        _ => {
            let mut header = vec![
                "lambda",
                "omega",
                "T",
                "n_omega_branch",
                "n_lambda_branch",
                "n_max",
                "winning_branch",
                "theta_star",
                "interior_excess",
            ];
            if literal {
                header.push("n_literal");
            }
            let mut t = CsvTable::new(header);
            let mut row: Vec<String> = [cfg.lambda_hat, cfg.omega_hat, cfg.t_max, n.n_omega_branch, n.n_lambda_branch, n.best.n_value]
                .iter()
                .map(|v| format_float(*v))
                .collect();
            row.push(n.best.winning_branch.to_string());
            row.push(format_float(n.best.theta_star));
            row.push(format_float(n.interior_excess));
            if let Some(v) = n.n_literal {
                row.push(format_float(v));
            }
            t.push(row);
            t.render()
        }
    };
    write_output(common.out.as_ref(), &content)
}

#[derive(Debug, Clone, Serialize)]
struct SweepRow {
    lambda: f64,
    omega: f64,
    #[serde(rename = "T")]
    t: f64,
    n_omega_branch: f64,
    n_lambda_branch: f64,
    n_max: f64,
    winning_branch: String,
}

fn sweep_point(l: f64, o: f64, t: f64, mode: FormulaSource) -> SweepRow {
    let cfg = DimensionlessConfig::reduced(l, o, t);
    let both = backflow_branch(BranchKind::OmegaBranch, &cfg, mode)
        .and_then(|a| backflow_branch(BranchKind::LambdaBranch, &cfg, mode).map(|b| (a.n_value, b.n_value)));
    match both {
        Ok((n_o, n_l)) => {
            let winner = if n_l > n_o + TIE_TOLERANCE {
                BranchKind::LambdaBranch
            } else {
                BranchKind::OmegaBranch
            };
            SweepRow {
                lambda: l,
                omega: o,
                t,
                n_omega_branch: n_o,
                n_lambda_branch: n_l,
                n_max: n_o.max(n_l),
                winning_branch: winner.to_string(),
            }
        }
        Err(_) => SweepRow {
            lambda: l,
            omega: o,
            t,
            n_omega_branch: f64::NAN,
            n_lambda_branch: f64::NAN,
            n_max: f64::NAN,
            winning_branch: "quadrature_failure".into(),
        },
    }
}

fn sweep(common: &Common, lambdas: &[f64], omegas: &[f64], times: &[f64]) -> Result<()> {
    if lambdas.iter().chain(omegas).chain(times).any(|v| *v < 0.0) {
        return Err(CliError::Usage("sweep axes must be non-negative".into()));
    }
    let mode: FormulaSource = common.mode.into();
    let grid: Vec<(f64, f64, f64)> = lambdas
        .iter()
        .flat_map(|&l| omegas.iter().flat_map(move |&o| times.iter().map(move |&t| (l, o, t))))
        .collect();
    let rows: Vec<SweepRow> = grid.par_iter().map(|&(l, o, t)| sweep_point(l, o, t, mode)).collect();
    let failures = rows.iter().filter(|r| r.winning_branch == "quadrature_failure").count();
    if failures > 0 {
        eprintln!("warning: quadrature failed at {failures} grid points");
    }
    let content = match common.format {
        Some(Format::Json) => to_json(&rows),
        _ => {
            let mut t = CsvTable::new([
                "lambda",
                "omega",
                "T",
                "n_omega_branch",
                "n_lambda_branch",
                "n_max",
                "winning_branch",
            ]);
            for r in &rows {
                let mut cells: Vec<String> = [r.lambda, r.omega, r.t, r.n_omega_branch, r.n_lambda_branch, r.n_max]
                    .iter()
                    .map(|v| format_float(*v))
                    .collect();
                cells.push(r.winning_branch.clone());
                t.push(cells);
            }
            t.render()
        }
    };
    write_output(common.out.as_ref(), &content)
}

fn weak_coupling_violation(p: &SystemParams) -> Option<String> {
    let ratio = p.coupling() / p.beta;
    if ratio > MAX_WEAK_COUPLING {
        return Some(format!(
            "pi*i0*kappa^2/beta = {ratio:.4} exceeds {MAX_WEAK_COUPLING}"
        ));
    }
    if p.omega < MIN_CARRIER_RATIO * p.beta {
        return Some(format!("omega/beta = {:.4} is below {MIN_CARRIER_RATIO}", p.omega / p.beta));
    }
    None
}

fn ensemble_csv(r: &EnsembleReport) -> String {
    let mut t = CsvTable::new([
        "t",
        "mean_m",
        "stderr_m",
        "closed_m",
        "mean_w",
        "stderr_w",
        "closed_w",
    ]);
    for k in 0..r.times.len() {
        t.push_floats(&[
            r.times[k],
            r.mean_m[k],
            r.stderr_m[k],
            r.closed_m[k],
            r.mean_w[k],
            r.stderr_w[k],
            r.closed_w[k],
        ]);
    }
    t.render()
}

#[allow(clippy::too_many_arguments)]
fn mc_verify(
    common: &Common,
    n: usize,
    m0: f64,
    w0: f64,
    horizon: Option<f64>,
    dt: Option<f64>,
    allow_strong: bool,
    dump_field: Option<&Path>,
) -> Result<()> {
    let (p, d) = params(common)?;
    if let Some(reason) = weak_coupling_violation(&p) {
        if !allow_strong {
            return Err(CliError::Usage(format!(
                "outside the weak-coupling regime ({reason}); pass --allow-strong to run anyway"
            )));
        }
        eprintln!("warning: outside the weak-coupling regime ({reason})");
    }
    let ic = InitialCondition::new(m0, w0).map_err(|e| CliError::Usage(e.to_string()))?;
    let horizon = horizon.unwrap_or(5.0 / d.gamma);
    let dt = dt.unwrap_or_else(|| max_field_step(&p));
    let opts = EnsembleOptions::new(n, dt, horizon, common.seed);
    if let Some(path) = dump_field {
        let field = sample_field(&p, dt, opts.n_steps(), trajectory_seed(common.seed, 0))?;
        std::fs::write(path, field.to_csv()).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
    }
    let report = ensemble_average_with(&ic, &p, &opts)?;
    let bands = report.check_bands();
    let content = match common.format {
        Some(Format::Csv) => ensemble_csv(&report),
        _ => to_json(&report),
    };
    write_output(common.out.as_ref(), &content)?;
    let summary = format!(
        "worst |residual|/band: m {:.4}, w {:.4} ({} realisations)",
        bands.worst_ratio_m, bands.worst_ratio_w, n
    );
    if bands.passed() {
        eprintln!("mc-verify: PASS, {summary}");
        Ok(())
    } else {
        Err(CliError::Acceptance(format!("mc-verify: FAIL, {summary}")))
    }
}

fn spectrum(common: &Common, n: usize, length: f64) -> Result<()> {
    let (p, _) = params(common)?;
    if !(length > 0.0 && length.is_finite()) {
        return Err(CliError::Usage(format!("--length must be positive (got {length})")));
    }
    let dt = max_field_step(&p);
    let n_steps = ((length / p.beta) / dt).round().max(1.0) as usize;
    let fields = (0..n as u64)
        .into_par_iter()
        .map(|i| sample_field(&p, dt, n_steps, trajectory_seed(common.seed, i)))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let est = estimate_spectrum(&fields)?;
    match &est.fit {
        Some(f) => eprintln!(
            "spectrum: peak {} height {} hwhm {}",
            format_float(f.peak_omega),
            format_float(f.peak_height),
            format_float(f.hwhm)
        ),
        None => eprintln!("spectrum: identically zero, no fit"),
    }
    let content = match common.format {
        Some(Format::Json) => to_json(&est),
        _ => {
            let mut t = CsvTable::new(["omega", "power", "fit"]);
            for (w, s) in est.omega.iter().zip(&est.power) {
                let fit = est.fit.map_or(0.0, |f| f.eval(*w));
                t.push_floats(&[*w, *s, fit]);
            }
            t.render()
        }
    };
    write_output(common.out.as_ref(), &content)
}
