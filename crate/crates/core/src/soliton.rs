//! Rotationally symmetric self-similar solutions: the profile ODE
//! Ψ(H, H² − 4K) + λ⟨X, N⟩ = 0 for a meridian starting on the axis at height b.
//!
//! Near the axis the profile is a graph γ(x) with γ(0) = b, γ′(0) = 0. The
//! solver starts from the series γ ≈ b + c x² + a₄ x⁴ at a small `x_start`, integrates
//! (γ, γ′) in x, and switches to an arclength description (x, y, φ) once the
//! slope gets steep. In both forms the unknown second derivative is obtained by
//! solving the equation for the meridian curvature k₂ given k₁ and ⟨X, N⟩.

use std::cell::Cell;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{arg, domain, Error, Result};
use crate::ode::{integrate, Finish, Flow, StepControl};
use crate::roots::{bracket_nearest, NearestRoot};
use crate::rotgeom::{self, CurvatureSample, GraphJet, ParamJet};
use crate::speed::{EvalPoint, Exponent, SpeedFunction};
use crate::tolerances::{INTEGRATION_TOL, ISOTHERMAL_TOL, SLOPE_SWITCH, S_MAX_REL, X_MAX_REL, X_START_REL};

/// Initial-value problem for a profile leaving the axis orthogonally at height `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolitonProblem {
    pub speed: SpeedFunction,
    pub b: f64,
    pub x_start: f64,
    pub x_max: f64,
    pub tol: f64,
    /// Switch to the arclength form once abs(γ′) exceeds this.
    pub slope_switch: f64,
    /// Keep integrating in arclength form after the switch; otherwise stop
    /// with [`Termination::VerticalTangent`].
    pub continue_parametric: bool,
    /// Arclength budget.
    pub s_max: f64,
    /// The arclength phase ends once x drops to this value.
    pub axis_stop: f64,
    /// Extra abscissae hit exactly during the graph phase.
    #[serde(default)]
    pub record_at: Vec<f64>,
    /// End the arclength phase at the first local minimum of x.
    #[serde(default)]
    pub stop_at_turn: bool,
}

impl SolitonProblem {
    pub fn new(speed: SpeedFunction, b: f64) -> Self {
        let x_start = X_START_REL * b;
        let x_max = X_MAX_REL * b;
        SolitonProblem {
            speed,
            b,
            x_start,
            x_max,
            tol: INTEGRATION_TOL,
            slope_switch: SLOPE_SWITCH,
            continue_parametric: true,
            s_max: S_MAX_REL * x_max.max(b),
            axis_stop: x_start,
            record_at: Vec::new(),
            stop_at_turn: false,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_x_max(mut self, x_max: f64) -> Self {
        self.x_max = x_max;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(arg(format!("b must be positive, got {}", self.b)));
        }
        if !(self.x_start > 0.0 && self.x_start < self.x_max) {
            return Err(arg(format!(
                "need 0 < x_start < x_max, got x_start = {}, x_max = {}",
                self.x_start, self.x_max
            )));
        }
        if !(self.tol > 0.0) {
            return Err(arg(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.slope_switch > 0.0 && self.s_max > 0.0 && self.axis_stop >= 0.0) {
            return Err(arg("slope_switch and s_max must be positive, axis_stop non-negative"));
        }
        Ok(())
    }
}

/// Taylor data of the profile at the axis: γ = b + c x² + a₃ x³ + a₄ x⁴ + …
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesData {
    pub c: f64,
    pub a3: f64,
    pub a4: Option<f64>,
}

/// c = −¼ (λ b / Ψ(1, 0))^{1/β}, with a₃ = 0.
///
/// Balancing the x² terms of the equation gives
/// a₄ = c³ + λc(1 + 2bc)/(16 Ψ₁(−4c, 0)); a₄ is `None` where Ψ₁(−4c, 0)
/// vanishes or is undefined.
pub fn series_start(problem: &SolitonProblem) -> Result<SeriesData> {
    let speed = &problem.speed;
    let beta = speed.beta().ok_or_else(|| arg("series start needs a homogeneous speed (β undefined)"))?;
    if beta == 0.0 {
        return Err(arg("series start needs β ≠ 0"));
    }
    let unit = speed.unit_value()?;
    if unit == 0.0 {
        return Err(arg("series start needs Ψ(1, 0) ≠ 0"));
    }
    let lambda = speed.lambda();
    let b = problem.b;
    let root = Exponent::from_f64(beta).recip()?.pow(lambda * b / unit)?;
    let c = -0.25 * root;
    let a4 = EvalPoint::new(-4.0 * c, 0.0)
        .and_then(|p| speed.grad(p))
        .ok()
        .filter(|g| g.0 != 0.0 && g.0.is_finite())
        .map(|g| c * c * c + lambda * c * (1.0 + 2.0 * b * c) / (16.0 * g.0));
    Ok(SeriesData { c, a3: 0.0, a4 })
}

/// Ψ(H, H² − 4K) + λ⟨X, N⟩ at a graph jet.
///
/// For homogeneous Ψ this equals the graph form of the equation with the
/// (1 + γ′²)^{3β/2} denominator divided through; the direct form is used so
/// that non-homogeneous speeds are covered as well.
pub fn residual(speed: &SpeedFunction, j: &GraphJet) -> Result<f64> {
    let (k1, k2) = rotgeom::curvature_graph(j)?;
    let (support, _) = rotgeom::support_quantities(j)?;
    Ok(speed.from_principal(k1, k2)? + speed.lambda() * support)
}

/// Residual at a parametric jet.
pub fn residual_param(speed: &SpeedFunction, j: &ParamJet) -> Result<f64> {
    let (k1, k2) = rotgeom::curvature_param(j)?;
    let (support, _) = rotgeom::support_quantities_param(j)?;
    Ok(speed.from_principal(k1, k2)? + speed.lambda() * support)
}

/// Solve Ψ(k₁ + k₂, (k₁ − k₂)²) + λ·support = 0 for k₂, starting at `guess`.
///
/// `scale` is a curvature scale (1/length) used to size the bracket search.
pub fn solve_k2(speed: &SpeedFunction, k1: f64, support: f64, guess: f64, scale: f64) -> Result<NearestRoot> {
    let lambda = speed.lambda();
    let f = |k2: f64| {
        let d = k1 - k2;
        match EvalPoint::new(k1 + k2, d * d).and_then(|p| speed.eval(p)) {
            Ok(v) => v + lambda * support,
            Err(_) => f64::NAN,
        }
    };
    let mag = guess.abs() + k1.abs() + scale.abs();
    if !mag.is_finite() {
        return Err(domain("non-finite curvature data"));
    }
    bracket_nearest(f, guess, 1e-4 * mag, 1e8 * mag, 2e-16 * mag)
}

/// γ″ solving the profile equation at (x, γ, γ′), on the branch nearest `guess`.
pub fn solve_gamma_pp(speed: &SpeedFunction, x: f64, gamma: f64, gamma_p: f64, guess: f64) -> Result<f64> {
    let j = GraphJet { x, gamma, gamma_p, gamma_pp: 0.0 };
    let (k1, _) = rotgeom::curvature_graph(&j)?;
    let (support, _) = rotgeom::support_quantities(&j)?;
    let w = 1.0 + gamma_p * gamma_p;
    let w32 = w * w.sqrt();
    let root = solve_k2(speed, k1, support, -guess / w32, 1.0 / x.max(gamma.abs()).max(1e-300))?;
    Ok(-root.root * w32)
}

/// One recorded profile node, tagged with its arclength from the axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum ProfilePoint {
    Graph {
        s: f64,
        jet: GraphJet,
    },
    /// Unit-speed parametrization by arclength.
    Param {
        s: f64,
        jet: ParamJet,
    },
}

impl ProfilePoint {
    pub fn s(&self) -> f64 {
        match self {
            ProfilePoint::Graph { s, .. } | ProfilePoint::Param { s, .. } => *s,
        }
    }

    pub fn x(&self) -> f64 {
        match self {
            ProfilePoint::Graph { jet, .. } => jet.x,
            ProfilePoint::Param { jet, .. } => jet.x,
        }
    }

    pub fn y(&self) -> f64 {
        match self {
            ProfilePoint::Graph { jet, .. } => jet.gamma,
            ProfilePoint::Param { jet, .. } => jet.y,
        }
    }

    /// Unit-speed jet in arclength, whatever the stored form.
    pub fn arclength_jet(&self) -> ParamJet {
        match *self {
            ProfilePoint::Param { jet, .. } => jet,
            ProfilePoint::Graph { jet, .. } => {
                let w = 1.0 + jet.gamma_p * jet.gamma_p;
                let (c, s) = (1.0 / w.sqrt(), jet.gamma_p / w.sqrt());
                let k2 = -jet.gamma_pp / (w * w.sqrt());
                ParamJet { x: jet.x, y: jet.gamma, xp: c, yp: s, xpp: s * k2, ypp: -c * k2 }
            }
        }
    }

    /// Tangent angle φ with (x′, y′) = (cos φ, sin φ).
    pub fn angle(&self) -> f64 {
        let j = self.arclength_jet();
        j.yp.atan2(j.xp)
    }

    pub fn curvature(&self, length_scale: f64) -> Result<CurvatureSample> {
        match self {
            ProfilePoint::Graph { jet, .. } => CurvatureSample::from_graph(jet, length_scale),
            ProfilePoint::Param { jet, .. } => CurvatureSample::from_param(jet, length_scale),
        }
    }
}

/// A computed meridian, ordered by arclength.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProfileCurve {
    pub points: Vec<ProfilePoint>,
}

impl ProfileCurve {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Graph-form nodes, increasing in x.
    pub fn graph_jets(&self) -> impl Iterator<Item = &GraphJet> {
        self.points.iter().filter_map(|p| match p {
            ProfilePoint::Graph { jet, .. } => Some(jet),
            ProfilePoint::Param { .. } => None,
        })
    }

    pub fn curvature_samples(&self, length_scale: f64) -> Result<Vec<CurvatureSample>> {
        self.points.iter().map(|p| p.curvature(length_scale)).collect()
    }

    pub fn write_csv<W: Write>(&self, length_scale: f64, w: W) -> io::Result<()> {
        let samples = self
            .curvature_samples(length_scale)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))?;
        rotgeom::write_csv(&samples, w)
    }
}

/// Why an integration ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// x reached `x_max`.
    ReachedXMax,
    /// The slope passed `slope_switch` and parametric continuation was off.
    VerticalTangent,
    /// The implicit solve for the meridian curvature found no root.
    RootFindFailed,
    /// The state left the domain of the equation or of Ψ.
    DomainExit,
    /// The arclength phase came back to the axis (x ≤ `axis_stop`).
    AxisReturn,
    /// x passed a local minimum before reaching the axis (only with `stop_at_turn`).
    AxisTurn,
    /// The arclength budget `s_max` ran out.
    ArclengthLimit,
    /// The integrator's step budget ran out.
    MaxSteps,
    /// The step size fell below its floor, typically at a curvature blow-up.
    StepUnderflow,
}

impl Termination {
    /// Whether the run ended in a numerical failure rather than a geometric event.
    pub fn is_failure(&self) -> bool {
        matches!(
            self,
            Termination::RootFindFailed | Termination::DomainExit | Termination::MaxSteps | Termination::StepUnderflow
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub problem: SolitonProblem,
    pub series: SeriesData,
    pub termination: Termination,
    /// Largest absolute equation residual over the recorded nodes.
    pub residual_max: f64,
    pub steps: usize,
    pub rejected_steps: usize,
    /// Set when the implicit solve saw roots on both sides of its guess.
    pub multiple_roots: bool,
    /// Message of the error that ended the run, if any.
    pub failure: Option<String>,
    pub profile: ProfileCurve,
}

#[derive(Serialize)]
struct ReportHeader<'a> {
    problem: &'a SolitonProblem,
    series: &'a SeriesData,
    termination: Termination,
    residual_max: f64,
    steps: usize,
    rejected_steps: usize,
    multiple_roots: bool,
    failure: &'a Option<String>,
    points: usize,
}

impl SolveReport {
    /// JSON header: everything except the profile nodes.
    pub fn header_json(&self) -> serde_json::Value {
        serde_json::to_value(ReportHeader {
            problem: &self.problem,
            series: &self.series,
            termination: self.termination,
            residual_max: self.residual_max,
            steps: self.steps,
            rejected_steps: self.rejected_steps,
            multiple_roots: self.multiple_roots,
            failure: &self.failure,
            points: self.profile.len(),
        })
        .expect("report header serializes")
    }

    pub fn write_csv<W: Write>(&self, w: W) -> io::Result<()> {
        self.profile.write_csv(self.problem.b, w)
    }

    /// Last recorded node.
    pub fn end(&self) -> Option<&ProfilePoint> {
        self.profile.points.last()
    }
}

const MAX_STEPS_MSG: &str = "step budget exhausted (repeated step rejections)";
const UNDERFLOW_MSG: &str = "step size fell below its floor (curvature blow-up or singular point)";

fn classify(e: &Error) -> Termination {
    match e {
        Error::RootFindFailed(_) => Termination::RootFindFailed,
        _ => Termination::DomainExit,
    }
}

/// Integrate the profile from the axis.
pub fn integrate_profile(problem: &SolitonProblem) -> Result<SolveReport> {
    problem.validate()?;
    let series = series_start(problem)?;
    let speed = &problem.speed;
    let scale = 1.0 / problem.b;
    let c = series.c;
    let x0 = problem.x_start;

    let mut points = Vec::new();
    let mut residual_max = 0.0f64;
    let mut multiple = false;
    let ambiguous = Cell::new(false);
    let last_k2 = Cell::new(-2.0 * c);

    let mut note = |p: ProfilePoint, residual_max: &mut f64| {
        let j = p.arclength_jet();
        if let Ok(r) = residual_param(speed, &j) {
            *residual_max = residual_max.max(r.abs());
        }
        points.push(p);
    };

    // Graph phase in x with state (γ, γ′, s).
    let a4 = series.a4.unwrap_or(0.0);
    let (x2, x3) = (x0 * x0, x0 * x0 * x0);
    let g0 = [problem.b + c * x2 + a4 * x2 * x2, 2.0 * c * x0 + 4.0 * a4 * x3, x0];
    let graph_rhs = |x: f64, y: &[f64; 3]| -> Result<[f64; 3]> {
        let (gamma, gp) = (y[0], y[1]);
        let w = 1.0 + gp * gp;
        let sw = w.sqrt();
        let k1 = -gp / (x * sw);
        let support = (x * gp - gamma) / sw;
        let root = solve_k2(speed, k1, support, last_k2.get(), scale)?;
        if root.ambiguous {
            ambiguous.set(true);
        }
        Ok([gp, -root.root * w * sw, sw])
    };
    let graph_point = |x: f64, y: &[f64; 3], dy: &[f64; 3]| ProfilePoint::Graph {
        s: y[2],
        jet: GraphJet { x, gamma: y[0], gamma_p: y[1], gamma_pp: dy[1] },
    };

    let mut first = [0.0; 3];
    let start_err = graph_rhs(x0, &g0).map(|d| first = d).err();
    if let Some(e) = start_err {
        return Ok(SolveReport {
            problem: problem.clone(),
            series,
            termination: classify(&e),
            residual_max: 0.0,
            steps: 0,
            rejected_steps: 0,
            multiple_roots: ambiguous.get(),
            failure: Some(e.to_string()),
            profile: ProfileCurve::default(),
        });
    }
    note(graph_point(x0, &g0, &first), &mut residual_max);
    last_k2.set(-first[1]);

    let h_max = 0.05 * problem.b.min(problem.x_max);
    let mut ctl = StepControl::new(problem.tol, 0.1 * x0, h_max);
    ctl.rtol = problem.tol;
    ctl.atol = problem.tol * problem.b;

    let mut steep = false;
    let mut over_budget = false;
    let run = integrate(&graph_rhs, x0, g0, problem.x_max, &problem.record_at, &ctl, |x, y, dy| {
        let w = 1.0 + y[1] * y[1];
        last_k2.set(-dy[1] / (w * w.sqrt()));
        note(graph_point(x, y, dy), &mut residual_max);
        if y[1].abs() > problem.slope_switch {
            steep = true;
            return Flow::Stop;
        }
        if y[2] > problem.s_max {
            over_budget = true;
            return Flow::Stop;
        }
        Flow::Continue
    });
    multiple |= ambiguous.get();
    let mut steps = run.accepted;
    let mut rejected = run.rejected;
    let mut failure = None;

    let termination = match run.finish {
        Finish::End => Termination::ReachedXMax,
        Finish::MaxSteps => {
            failure = Some(MAX_STEPS_MSG.to_string());
            Termination::MaxSteps
        }
        Finish::StepUnderflow => {
            failure = Some(UNDERFLOW_MSG.to_string());
            Termination::StepUnderflow
        }
        Finish::Failed(e) => {
            failure = Some(e.to_string());
            classify(&e)
        }
        Finish::Stopped if over_budget => Termination::ArclengthLimit,
        Finish::Stopped if !problem.continue_parametric => Termination::VerticalTangent,
        Finish::Stopped => {
            debug_assert!(steep);
            // Arclength phase with state (x, y, φ).
            let (x, gamma, gp, s0) = (run.t, run.y[0], run.y[1], run.y[2]);
            let p0 = [x, gamma, gp.atan()];
            let param_rhs = |_s: f64, y: &[f64; 3]| -> Result<[f64; 3]> {
                let (x, yy, phi) = (y[0], y[1], y[2]);
                if !(x > 0.0) {
                    return Err(domain("profile crossed the axis"));
                }
                let (sn, cs) = phi.sin_cos();
                let k1 = -sn / x;
                let support = x * sn - yy * cs;
                let root = solve_k2(speed, k1, support, last_k2.get(), scale)?;
                if root.ambiguous {
                    ambiguous.set(true);
                }
                Ok([cs, sn, -root.root])
            };
            let mut event = None;
            let mut receding = false;
            let ctl = StepControl::new(problem.tol, h_max.min(0.1 / (scale + last_k2.get().abs())), h_max);
            let ctl = StepControl { atol: problem.tol * problem.b, ..ctl };
            let run = integrate(&param_rhs, s0, p0, problem.s_max, &[], &ctl, |s, y, dy| {
                let k2 = -dy[2];
                last_k2.set(k2);
                let (sn, cs) = y[2].sin_cos();
                let jet = ParamJet { x: y[0], y: y[1], xp: cs, yp: sn, xpp: sn * k2, ypp: -cs * k2 };
                note(ProfilePoint::Param { s, jet }, &mut residual_max);
                if y[0] >= problem.x_max {
                    event = Some(Termination::ReachedXMax);
                    return Flow::Stop;
                }
                if y[0] <= problem.axis_stop {
                    event = Some(Termination::AxisReturn);
                    return Flow::Stop;
                }
                if problem.stop_at_turn {
                    if receding && cs >= 0.0 {
                        event = Some(Termination::AxisTurn);
                        return Flow::Stop;
                    }
                    receding = cs < 0.0;
                }
                Flow::Continue
            });
            steps += run.accepted;
            rejected += run.rejected;
            multiple |= ambiguous.get();
            match run.finish {
                Finish::End => Termination::ArclengthLimit,
                Finish::MaxSteps => {
                    failure = Some(MAX_STEPS_MSG.to_string());
                    Termination::MaxSteps
                }
                Finish::StepUnderflow => {
                    failure = Some(UNDERFLOW_MSG.to_string());
                    Termination::StepUnderflow
                }
                Finish::Stopped => event.expect("stop is always tagged"),
                Finish::Failed(e) => {
                    failure = Some(e.to_string());
                    classify(&e)
                }
            }
        }
    };

    Ok(SolveReport {
        problem: problem.clone(),
        series,
        termination,
        residual_max,
        steps,
        rejected_steps: rejected,
        multiple_roots: multiple,
        failure,
        profile: ProfileCurve { points },
    })
}

/// Profile node in conformal parametrization: ds = x du, metric x²(du² + dθ²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsoNode {
    pub u: f64,
    pub x: f64,
    pub y: f64,
    /// Tangent angle, (x_u, y_u) = x (cos φ, sin φ).
    pub phi: f64,
    pub k1: f64,
    pub k2: f64,
}

/// Integrate the profile equation in the conformal coordinate u, starting from
/// `start` (placed at u = 0) and recording nodes at u = i·h for i in 0..=n.
pub fn isothermal_nodes(speed: &SpeedFunction, start: &ProfilePoint, h: f64, n: usize) -> Result<Vec<IsoNode>> {
    if !(h > 0.0) || n == 0 {
        return Err(arg("need h > 0 and n ≥ 1"));
    }
    let x_start = start.x();
    if !(x_start > 0.0) {
        return Err(domain("isothermal coordinates need x > 0"));
    }
    let scale = 1.0 / x_start.max(start.y().abs());
    let k0 = start.curvature(1.0)?;
    let last_k2 = Cell::new(k0.k2);
    let rhs = |_u: f64, y: &[f64; 3]| -> Result<[f64; 3]> {
        let (x, yy, phi) = (y[0], y[1], y[2]);
        if !(x > 0.0) {
            return Err(domain("profile crossed the axis"));
        }
        let (sn, cs) = phi.sin_cos();
        let k1 = -sn / x;
        let root = solve_k2(speed, k1, x * sn - yy * cs, last_k2.get(), scale)?;
        Ok([x * cs, x * sn, -x * root.root])
    };
    let node = |u: f64, y: &[f64; 3], dy: &[f64; 3]| IsoNode {
        u,
        x: y[0],
        y: y[1],
        phi: y[2],
        k1: -y[2].sin() / y[0],
        k2: -dy[2] / y[0],
    };
    let y0 = [x_start, start.y(), start.angle()];
    let d0 = rhs(0.0, &y0)?;
    let mut nodes = vec![node(0.0, &y0, &d0)];
    let stops: Vec<f64> = (1..n).map(|i| i as f64 * h).collect();
    let u_end = n as f64 * h;
    let ctl = StepControl::new(ISOTHERMAL_TOL, 0.25 * h, h);
    let mut next = 1usize;
    let run = integrate(&rhs, 0.0, y0, u_end, &stops, &ctl, |u, y, dy| {
        last_k2.set(-dy[2] / y[0]);
        if next <= n && u == if next == n { u_end } else { stops[next - 1] } {
            nodes.push(node(u, y, dy));
            next += 1;
        }
        Flow::Continue
    });
    match run.finish {
        Finish::End => Ok(nodes),
        Finish::Failed(e) => Err(e),
        other => Err(domain(format!("isothermal integration ended early: {other:?}"))),
    }
}

/// Closure defect of one shot from the axis at height `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosureSample {
    pub b: f64,
    /// sin φ · x / b at the first approach to the axis, either a local minimum
    /// of x or a hit of `axis_stop`. Zero for a profile closing orthogonally,
    /// with the sign telling on which side the profile passes. Absent when the
    /// profile never came back.
    pub defect: Option<f64>,
    pub termination: Termination,
    pub failure: Option<String>,
}

/// A sign change of the closure defect, refined by bisection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosureRoot {
    pub b_lo: f64,
    pub b_hi: f64,
    pub b: f64,
    pub bisections: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootReport {
    pub samples: Vec<ClosureSample>,
    pub roots: Vec<ClosureRoot>,
}

/// Shoot once from height `b` and measure how the profile returns to the axis.
pub fn closure_defect(speed: &SpeedFunction, b: f64, tol: f64) -> ClosureSample {
    let mut problem = SolitonProblem::new(speed.clone(), b).with_tol(tol);
    problem.stop_at_turn = true;
    match integrate_profile(&problem) {
        Err(e) => ClosureSample { b, defect: None, termination: classify(&e), failure: Some(e.to_string()) },
        Ok(rep) => {
            let defect = match (rep.termination, rep.end()) {
                (Termination::AxisReturn | Termination::AxisTurn, Some(end)) => Some(end.angle().sin() * end.x() / b),
                _ => None,
            };
            ClosureSample { b, defect, termination: rep.termination, failure: rep.failure }
        }
    }
}

/// Sample the closure defect at each `b` (concurrently; output in input order)
/// and bisect every sign change between neighbours down to `criterion_tol`.
pub fn shoot_for_closure(speed: &SpeedFunction, b_values: &[f64], criterion_tol: f64, tol: f64) -> Result<ShootReport> {
    if let Some(b) = b_values.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
        return Err(arg(format!("shooting heights must be finite and positive, got {b}")));
    }
    if !(criterion_tol > 0.0) {
        return Err(arg("criterion_tol must be positive"));
    }
    let samples: Vec<ClosureSample> = b_values.par_iter().map(|&b| closure_defect(speed, b, tol)).collect();
    let brackets: Vec<(f64, f64, f64)> = samples
        .windows(2)
        .filter_map(|w| match (w[0].defect, w[1].defect) {
            (Some(d0), Some(d1)) if d0 == 0.0 || d0.signum() != d1.signum() => Some((w[0].b, w[1].b, d0)),
            _ => None,
        })
        .collect();
    let roots = brackets
        .par_iter()
        .map(|&(mut lo, mut hi, d_lo)| {
            let mut bisections = 0;
            if d_lo != 0.0 {
                while (hi - lo).abs() > criterion_tol {
                    let mid = 0.5 * (lo + hi);
                    match closure_defect(speed, mid, tol).defect {
                        Some(d) if d.signum() == d_lo.signum() => lo = mid,
                        Some(_) => hi = mid,
                        // The sign structure broke down; report the bracket as is.
                        None => break,
                    }
                    bisections += 1;
                }
            } else {
                hi = lo;
            }
            ClosureRoot { b_lo: lo.min(hi), b_hi: lo.max(hi), b: 0.5 * (lo + hi), bisections }
        })
        .collect();
    Ok(ShootReport { samples, roots })
}
