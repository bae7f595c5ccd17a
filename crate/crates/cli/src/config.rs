//! Serializable run configurations and their execution.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use solitonlab::analysis::{self, ParabolicityScan, ScanGrid};
use solitonlab::hopf::{self, NamedSurface};
use solitonlab::soliton::{self, SolitonProblem};
use solitonlab::speed::SpeedFunction;
use solitonlab::sphere;
use solitonlab::tolerances::{HOPF_STEP, INTEGRATION_TOL};

pub const OK: u8 = 0;
pub const CONFIG: u8 = 1;
pub const NO_SOLUTION: u8 = 2;
pub const NUMERICAL: u8 = 3;

pub const TOL_ENV: &str = "SOLITONLAB_TOL";

/// An error together with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

pub fn config_error(e: impl Into<anyhow::Error>) -> Failure {
    Failure { code: CONFIG, error: e.into() }
}

pub fn numerical_error(e: impl Into<anyhow::Error>) -> Failure {
    Failure { code: NUMERICAL, error: e.into() }
}

/// Bad arguments and unparsable input are configuration errors; everything
/// else the library reports is a numerical failure.
pub fn lib_error(e: solitonlab::Error) -> Failure {
    match e {
        solitonlab::Error::Arg(_) | solitonlab::Error::Parse(_) => config_error(e),
        solitonlab::Error::Domain(_) | solitonlab::Error::RootFindFailed(_) => numerical_error(e),
    }
}

/// `SOLITONLAB_TOL` if set, else the library default.
pub fn env_tol() -> Result<f64, Failure> {
    match std::env::var(TOL_ENV) {
        Err(_) => Ok(INTEGRATION_TOL),
        Ok(v) => {
            let tol: f64 =
                v.trim().parse().map_err(|_| config_error(anyhow::anyhow!("{TOL_ENV}={v:?} is not a number")))?;
            if tol > 0.0 && tol.is_finite() {
                Ok(tol)
            } else {
                Err(config_error(anyhow::anyhow!("{TOL_ENV} must be positive, got {tol}")))
            }
        }
    }
}

fn default_tol() -> f64 {
    env_tol().unwrap_or(INTEGRATION_TOL)
}

fn default_step() -> f64 {
    HOPF_STEP
}

fn default_criterion_tol() -> f64 {
    1e-6
}

/// One run of one subcommand. Paths that are absent send the artifact to stdout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case", deny_unknown_fields)]
pub enum RunConfig {
    Sphere {
        speed: SpeedFunction,
        #[serde(default)]
        out: Option<PathBuf>,
    },
    Solve {
        problem: SolitonProblem,
        /// Profile CSV; skipped when absent.
        #[serde(default)]
        csv: Option<PathBuf>,
        /// Report header JSON.
        #[serde(default)]
        out: Option<PathBuf>,
    },
    Pinch {
        speed: SpeedFunction,
        b: f64,
        #[serde(default = "default_tol")]
        tol: f64,
        #[serde(default)]
        out: Option<PathBuf>,
    },
    Verify {
        surface: NamedSurface,
        #[serde(default = "default_step")]
        h: f64,
        /// Patch CSV at step h.
        #[serde(default)]
        csv: Option<PathBuf>,
        #[serde(default)]
        out: Option<PathBuf>,
    },
    Scan {
        speed: SpeedFunction,
        #[serde(default)]
        grid: ScanGrid,
        #[serde(default)]
        out: Option<PathBuf>,
        /// Boundary CSV (H, K_boundary); skipped when absent.
        #[serde(default)]
        boundary: Option<PathBuf>,
    },
    Shoot {
        speed: SpeedFunction,
        b_values: Vec<f64>,
        #[serde(default = "default_criterion_tol")]
        criterion_tol: f64,
        #[serde(default = "default_tol")]
        tol: f64,
        #[serde(default)]
        out: Option<PathBuf>,
    },
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display())).map_err(config_error)?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<(), Failure> {
    let mut w = sink(path)?;
    let text = serde_json::to_string_pretty(value).map_err(config_error)?;
    w.write_all(text.as_bytes()).and_then(|_| w.write_all(b"\n")).and_then(|_| w.flush()).map_err(config_error)
}

fn emit_with<F>(path: Option<&Path>, write: F) -> Result<(), Failure>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    let mut w = sink(path)?;
    write(&mut *w).and_then(|_| w.flush()).map_err(config_error)
}

fn weingarten_note(what: &str) -> Result<u8, Failure> {
    let note = serde_json::json!({
        "mode": "weingarten",
        "note": format!(
            "lambda = 0 is the stationary case Psi(H, H^2 - 4K) = 0 (a Weingarten relation); {what} is not run"
        ),
    });
    emit_json(&note, None)?;
    Ok(OK)
}

impl RunConfig {
    pub fn run(&self) -> Result<u8, Failure> {
        match self {
            RunConfig::Sphere { speed, out } => {
                if speed.lambda() == 0.0 {
                    return weingarten_note("the sphere-radius equation");
                }
                let report = sphere::sphere_radius(speed).map_err(lib_error)?;
                emit_json(&report, out.as_deref())?;
                if report.solutions.is_empty() && !report.any_radius {
                    eprintln!("no sphere centered at the origin solves the equation");
                    return Ok(NO_SOLUTION);
                }
                Ok(OK)
            }
            RunConfig::Solve { problem, csv, out } => {
                if problem.speed.lambda() == 0.0 {
                    return weingarten_note("profile integration");
                }
                let report = soliton::integrate_profile(problem).map_err(lib_error)?;
                if let Some(path) = csv {
                    emit_with(Some(path), |w| report.write_csv(w))?;
                }
                emit_json(&report.header_json(), out.as_deref())?;
                if report.termination.is_failure() {
                    eprintln!(
                        "integration failed ({:?}): {}",
                        report.termination,
                        report.failure.as_deref().unwrap_or("no message")
                    );
                    return Ok(NUMERICAL);
                }
                Ok(OK)
            }
            RunConfig::Pinch { speed, b, tol, out } => {
                let (_, report) = analysis::pinch(speed, *b, *tol).map_err(lib_error)?;
                emit_json(&report, out.as_deref())?;
                Ok(OK)
            }
            RunConfig::Verify { surface, h, csv, out } => {
                if let Some(path) = csv {
                    let patch = surface.patch(*h).map_err(lib_error)?;
                    emit_with(Some(path), |w| patch.write_csv(w))?;
                }
                let report = hopf::verify_suite(surface, *h).map_err(lib_error)?;
                emit_json(&report, out.as_deref())?;
                if !report.passed {
                    eprintln!("identity suite failed");
                    return Ok(NUMERICAL);
                }
                Ok(OK)
            }
            RunConfig::Scan { speed, grid, out, boundary } => {
                let scan: ParabolicityScan = analysis::parabolicity_scan(speed, grid).map_err(lib_error)?;
                emit_with(out.as_deref(), |w| scan.write_csv(w))?;
                if let Some(path) = boundary {
                    emit_with(Some(path), |w| scan.write_boundary_csv(w))?;
                }
                Ok(OK)
            }
            RunConfig::Shoot { speed, b_values, criterion_tol, tol, out } => {
                let report = soliton::shoot_for_closure(speed, b_values, *criterion_tol, *tol).map_err(lib_error)?;
                emit_json(&report, out.as_deref())?;
                if report.roots.is_empty() {
                    eprintln!("no sign change of the closure defect in the sampled heights");
                    return Ok(NO_SOLUTION);
                }
                Ok(OK)
            }
        }
    }
}
