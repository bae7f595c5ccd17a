mod config;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};
use solitonlab::analysis::ScanGrid;
use solitonlab::hopf::NamedSurface;
use solitonlab::soliton::SolitonProblem;
use solitonlab::speed::SpeedFunction;
use solitonlab::tolerances::HOPF_STEP;

use config::{config_error, env_tol, Failure, RunConfig, OK};

/// Self-similar rotational solutions of curvature flows Ψ(H, H² − 4K) = −λ⟨X, N⟩.
///
/// Exit codes: 0 ok, 1 configuration error, 2 no solution, 3 numerical failure.
#[derive(Debug, Parser)]
#[command(name = "solitonlab", version)]
struct Cli {
    /// Run the JSON run configuration in FILE instead of a subcommand.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Print the resolved run configuration as JSON instead of running it.
    #[arg(long, global = true)]
    dump_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FamilyArg {
    MeanCurvature,
    PowerMean,
    HarmonicMeanPower,
    GaussPower,
    QuadraticHk,
    NormASquared,
}

#[derive(Debug, Clone, Args)]
struct SpeedArgs {
    #[arg(long, value_enum)]
    family: Option<FamilyArg>,
    /// Flow constant λ.
    #[arg(long)]
    lambda: Option<f64>,
    /// Exponent of the harmonic-mean and Gauss-curvature powers.
    #[arg(long)]
    alpha: Option<f64>,
    /// Exponent of the mean-curvature power.
    #[arg(long)]
    beta: Option<f64>,
    /// Numerator of an exponent m/n (with --n).
    #[arg(long)]
    m: Option<u32>,
    /// Denominator of an exponent m/n (with --m).
    #[arg(long)]
    n: Option<u32>,
    /// Coefficient of H² in aH² + bK.
    #[arg(long)]
    a: Option<f64>,
    /// Coefficient of K in aH² + bK.
    #[arg(long = "coef-b")]
    coef_b: Option<f64>,
    /// Speed function as JSON {"family", "params", "beta", "lambda"}, inline or as @FILE.
    #[arg(long, value_name = "JSON")]
    speed_json: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProfileArg {
    Sphere,
    Cylinder,
    Ellipsoid,
    Soliton,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Spheres centered at the origin: λR = Ψ(2/R, 0).
    #[command(allow_negative_numbers = true)]
    Sphere {
        #[command(flatten)]
        speed: SpeedArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate the profile leaving the axis at height b.
    #[command(allow_negative_numbers = true)]
    Solve {
        #[command(flatten)]
        speed: SpeedArgs,
        /// Height at which the profile leaves the axis.
        #[arg(long)]
        b: f64,
        /// Integration tolerance (default: SOLITONLAB_TOL or 1e-9).
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        x_start: Option<f64>,
        #[arg(long)]
        x_max: Option<f64>,
        /// Stop at a vertical tangent instead of continuing in arclength.
        #[arg(long)]
        no_continue: bool,
        /// Stop at the first local minimum of x after the profile turns back.
        #[arg(long)]
        stop_at_turn: bool,
        /// Profile CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Report JSON (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Taylor fit, F̃ ladder and sphere coincidence for the profile from height b.
    #[command(allow_negative_numbers = true)]
    Pinch {
        #[command(flatten)]
        speed: SpeedArgs,
        #[arg(long)]
        b: f64,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Hopf-differential identity suite at steps h and h/2.
    #[command(allow_negative_numbers = true)]
    Verify {
        #[arg(long, value_enum)]
        profile: ProfileArg,
        /// Radius of the sphere or cylinder; equatorial radius of the ellipsoid.
        #[arg(long = "R", default_value_t = 1.0)]
        radius: f64,
        /// Polar semi-axis of the ellipsoid.
        #[arg(long, default_value_t = 2.0)]
        c: f64,
        #[command(flatten)]
        speed: SpeedArgs,
        /// Axis height of the soliton profile.
        #[arg(long, default_value_t = 0.5)]
        b: f64,
        #[arg(long, default_value_t = HOPF_STEP)]
        h: f64,
        /// Patch CSV at step h.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sign of the parabolicity indicator on an (H, K) grid.
    #[command(allow_negative_numbers = true)]
    Scan {
        #[command(flatten)]
        speed: SpeedArgs,
        /// Coefficient of K for the quadratic family (same as --coef-b).
        #[arg(long)]
        b: Option<f64>,
        #[arg(long, default_value_t = -2.0)]
        h_min: f64,
        #[arg(long, default_value_t = 2.0)]
        h_max: f64,
        #[arg(long, default_value_t = -30.0)]
        k_min: f64,
        #[arg(long, default_value_t = 1.0)]
        k_max: f64,
        #[arg(long, default_value_t = 200)]
        n_h: usize,
        #[arg(long, default_value_t = 200)]
        n_k: usize,
        /// Grid CSV (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Boundary CSV.
        #[arg(long)]
        boundary: Option<PathBuf>,
    },
    /// Closure defect over a range of axis heights, refined at sign changes.
    #[command(allow_negative_numbers = true)]
    Shoot {
        #[command(flatten)]
        speed: SpeedArgs,
        #[arg(long)]
        b_min: f64,
        #[arg(long)]
        b_max: f64,
        /// Number of equally spaced heights in [b_min, b_max].
        #[arg(long, default_value_t = 9)]
        samples: usize,
        /// Width at which bisection of a bracket stops.
        #[arg(long, default_value_t = 1e-6)]
        criterion_tol: f64,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

impl SpeedArgs {
    fn has_family_flags(&self) -> bool {
        self.family.is_some()
            || self.alpha.is_some()
            || self.beta.is_some()
            || self.m.is_some()
            || self.n.is_some()
            || self.a.is_some()
            || self.coef_b.is_some()
    }

    fn speed(&self, default_lambda: Option<f64>) -> Result<SpeedFunction, Failure> {
        if let Some(text) = &self.speed_json {
            if self.has_family_flags() {
                return Err(config_error(anyhow!("--speed-json cannot be combined with family flags")));
            }
            let text = match text.strip_prefix('@') {
                Some(path) => {
                    fs::read_to_string(path).with_context(|| format!("cannot read {path}")).map_err(config_error)?
                }
                None => text.clone(),
            };
            let mut value: Value = serde_json::from_str(&text).context("malformed speed JSON").map_err(config_error)?;
            if let (Some(l), Some(obj)) = (self.lambda, value.as_object_mut()) {
                obj.insert("lambda".into(), json!(l));
            }
            return serde_json::from_value(value).context("invalid speed function").map_err(config_error);
        }
        let family = self.family.ok_or_else(|| config_error(anyhow!("give --family or --speed-json")))?;
        let lambda = self.lambda.or(default_lambda).ok_or_else(|| config_error(anyhow!("missing --lambda")))?;
        let mut params = Map::new();
        let mut put = |k: &str, v: Option<f64>| {
            if let Some(v) = v {
                params.insert(k.to_string(), json!(v));
            }
        };
        let (name, exponent) = match family {
            FamilyArg::MeanCurvature => ("mean-curvature", None),
            FamilyArg::PowerMean => ("power-mean", Some(("beta", self.beta))),
            FamilyArg::HarmonicMeanPower => ("harmonic-mean-power", Some(("alpha", self.alpha))),
            FamilyArg::GaussPower => ("gauss-power", Some(("alpha", self.alpha))),
            FamilyArg::QuadraticHk => {
                put("a", self.a);
                put("b", self.coef_b);
                ("quadratic-hk", None)
            }
            FamilyArg::NormASquared => ("norm-a-squared", None),
        };
        if let Some((key, value)) = exponent {
            put(key, value);
            put("m", self.m.map(f64::from));
            put("n", self.n.map(f64::from));
        }
        serde_json::from_value(json!({ "family": name, "params": params, "lambda": lambda }))
            .context("invalid speed function")
            .map_err(config_error)
    }
}

fn tol_or_env(tol: Option<f64>) -> Result<f64, Failure> {
    match tol {
        Some(t) if t > 0.0 && t.is_finite() => Ok(t),
        Some(t) => Err(config_error(anyhow!("--tol must be positive, got {t}"))),
        None => env_tol(),
    }
}

impl Command {
    fn into_config(self) -> Result<RunConfig, Failure> {
        Ok(match self {
            Command::Sphere { speed, out } => RunConfig::Sphere { speed: speed.speed(None)?, out },
            Command::Solve { speed, b, tol, x_start, x_max, no_continue, stop_at_turn, csv, out } => {
                let mut problem = SolitonProblem::new(speed.speed(None)?, b).with_tol(tol_or_env(tol)?);
                if let Some(x) = x_start {
                    problem.x_start = x;
                    problem.axis_stop = x;
                }
                if let Some(x) = x_max {
                    problem.x_max = x;
                }
                problem.continue_parametric = !no_continue;
                problem.stop_at_turn = stop_at_turn;
                problem.validate().map_err(config::lib_error)?;
                RunConfig::Solve { problem, csv, out }
            }
            Command::Pinch { speed, b, tol, out } => {
                RunConfig::Pinch { speed: speed.speed(None)?, b, tol: tol_or_env(tol)?, out }
            }
            Command::Verify { profile, radius, c, speed, b, h, csv, out } => {
                let surface = match profile {
                    ProfileArg::Sphere => NamedSurface::Sphere { r: radius },
                    ProfileArg::Cylinder => NamedSurface::Cylinder { r: radius },
                    ProfileArg::Ellipsoid => NamedSurface::Ellipsoid { a: radius, c },
                    ProfileArg::Soliton => NamedSurface::Soliton { speed: speed.speed(None)?, b },
                };
                RunConfig::Verify { surface, h, csv, out }
            }
            Command::Scan { mut speed, b, h_min, h_max, k_min, k_max, n_h, n_k, out, boundary } => {
                if b.is_some() {
                    if speed.coef_b.is_some() {
                        return Err(config_error(anyhow!("give only one of --b and --coef-b")));
                    }
                    speed.coef_b = b;
                }
                // λ does not enter the indicator.
                let speed = speed.speed(Some(1.0))?;
                let grid = ScanGrid { h_min, h_max, k_min, k_max, n_h, n_k };
                RunConfig::Scan { speed, grid, out, boundary }
            }
            Command::Shoot { speed, b_min, b_max, samples, criterion_tol, tol, out } => {
                if samples < 2 || b_min >= b_max || b_min.is_nan() || b_max.is_nan() {
                    return Err(config_error(anyhow!("need --samples ≥ 2 and --b-min < --b-max")));
                }
                let b_values =
                    (0..samples).map(|i| b_min + (b_max - b_min) * i as f64 / (samples - 1) as f64).collect();
                RunConfig::Shoot { speed: speed.speed(None)?, b_values, criterion_tol, tol: tol_or_env(tol)?, out }
            }
        })
    }
}

fn load_config(path: &PathBuf) -> Result<RunConfig, Failure> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display())).map_err(config_error)?;
    serde_json::from_str(&text)
        .with_context(|| format!("invalid run configuration in {}", path.display()))
        .map_err(config_error)
}

fn run(cli: Cli) -> Result<u8, Failure> {
    env_tol()?;
    let config = match (cli.config, cli.command) {
        (Some(path), None) => load_config(&path)?,
        (None, Some(cmd)) => cmd.into_config()?,
        (Some(_), Some(_)) => return Err(config_error(anyhow!("--config cannot be combined with a subcommand"))),
        (None, None) => return Err(config_error(anyhow!("give a subcommand or --config FILE (see --help)"))),
    };
    if cli.dump_config {
        let text = serde_json::to_string_pretty(&config).map_err(config_error)?;
        println!("{text}");
        return Ok(OK);
    }
    config.run()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(config::CONFIG),
            };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
