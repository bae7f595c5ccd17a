//! Pinching diagnostics on computed profiles.
//!
//! Near the axis a profile is γ = b + c x² + a₄ x⁴ + …, and for a non-spherical
//! profile Q(x) grows like F̃(0)/x with F̃(x) = Q(x)·x. The F̃ ladder samples
//! Q·x at x₀·2^k and extrapolates to x = 0; a nonzero limit means Q is
//! unbounded, so no ε > 0 satisfies the pinching hypothesis on the whole surface.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Result};
use crate::rotgeom::{self, CurvatureSample};
use crate::soliton::{integrate_profile, series_start, ProfileCurve, SolitonProblem, SolveReport};
use crate::speed::{EvalPoint, Exponent, SpeedFunction};
use crate::table::{fmt17, fmt_opt, write_row};
use crate::tolerances::TOL_SPH;

/// Factor between the ladder base and the start of integration.
pub const LADDER_BASE_REL: f64 = 10.0;
/// Octaves covered by the F̃ ladder.
pub const LADDER_OCTAVES: u32 = 2;
/// Taylor fits use points with x ≤ FIT_WINDOW_REL·min(b, 1/|c|).
pub const FIT_WINDOW_REL: f64 = 0.1;
/// Polynomial degree of the default Taylor fit.
pub const FIT_DEGREE: usize = 10;
/// Grid points recorded inside the fit window by [`pinch_problem`].
pub const FIT_SAMPLES: usize = 200;

/// Coefficients of γ − b ≈ c x² + a₃ x³ + a₄ x⁴ + … near the axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaylorFit {
    pub c: f64,
    pub a3: f64,
    pub a4: f64,
    pub degree: usize,
    pub samples: usize,
}

/// Upper end of the fit window for axis height `b` and leading coefficient `c`.
///
/// The series is a power series in c·x, so the window shrinks with the cap
/// radius 1/|c| when that is smaller than b.
pub fn fit_window(b: f64, c: f64) -> f64 {
    let scale = if c.is_finite() && c != 0.0 { b.min(1.0 / c.abs()) } else { b };
    FIT_WINDOW_REL * scale
}

/// Least-squares fit of γ − b against x², x³, …, x^degree over the graph points
/// in (0, [`fit_window`]], with c estimated as γ″/2 at the first point.
/// Fails unless at least `n_samples` such points exist.
pub fn taylor_fit(profile: &ProfileCurve, b: f64, n_samples: usize, degree: usize) -> Result<TaylorFit> {
    if degree < 4 {
        return Err(arg(format!("fit degree must be at least 4, got {degree}")));
    }
    if !(b > 0.0) {
        return Err(arg(format!("b must be positive, got {b}")));
    }
    let c_axis = profile.graph_jets().next().map_or(0.0, |j| 0.5 * j.gamma_pp);
    let window = fit_window(b, c_axis);
    let pts: Vec<(f64, f64)> =
        profile.graph_jets().filter(|j| j.x > 0.0 && j.x <= window).map(|j| (j.x, j.gamma - b)).collect();
    let unknowns = degree - 1;
    if pts.len() < n_samples.max(unknowns) {
        return Err(arg(format!("{} points in (0, {window}], need {}", pts.len(), n_samples.max(unknowns))));
    }
    // Columns in t = x/window keep the normal matrix well scaled.
    let a = DMatrix::from_fn(pts.len(), unknowns, |r, k| (pts[r].0 / window).powi(k as i32 + 2));
    let rhs = DVector::from_iterator(pts.len(), pts.iter().map(|p| p.1));
    let sol = a.svd(true, true).solve(&rhs, 1e-14).map_err(|e| arg(format!("least squares failed: {e}")))?;
    let coef = |k: usize| sol[k - 2] / window.powi(k as i32);
    Ok(TaylorFit { c: coef(2), a3: coef(3), a4: coef(4), degree, samples: pts.len() })
}

/// Ladder abscissae x₀·2^k, k = 0..=octaves, with x₀ = 10·x_start.
pub fn ladder(x_start: f64, octaves: u32) -> Vec<f64> {
    let x0 = LADDER_BASE_REL * x_start;
    (0..=octaves).map(|k| x0 * f64::from(1u32 << k)).collect()
}

/// A soliton problem that records the ladder and a uniform grid in the fit window.
pub fn pinch_problem(speed: SpeedFunction, b: f64) -> SolitonProblem {
    let mut p = SolitonProblem::new(speed, b);
    let c = series_start(&p).map_or(0.0, |s| s.c);
    // taylor_fit re-estimates c from γ″ at the first point, which moves the
    // window edge by a relative O(x_start²); stay clear of it.
    let window = 0.99 * fit_window(b, c);
    p.record_at = ladder(p.x_start, LADDER_OCTAVES);
    let x0 = p.x_start;
    p.record_at.extend((1..=FIT_SAMPLES).map(|i| x0 + (window - x0) * i as f64 / FIT_SAMPLES as f64));
    p
}

/// Both forms of the sphere-coincidence criterion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coincidence {
    /// b^{1+1/β}.
    pub b_power: f64,
    /// 2(Ψ(1,0)/λ)^{1/β}.
    pub target: f64,
    /// 1 + 2bc with c = −¼(λb/Ψ(1,0))^{1/β}.
    pub one_plus_2bc: f64,
    /// |b^{1+1/β} − target| ≤ tol_sph·|target|.
    pub power_form: bool,
    /// |1 + 2bc| ≤ tol_sph.
    pub series_form: bool,
}

pub fn coincidence_forms(b: f64, speed: &SpeedFunction) -> Result<Coincidence> {
    let lambda = speed.lambda();
    if lambda == 0.0 {
        return Err(arg("sphere coincidence needs λ ≠ 0"));
    }
    let beta = speed.beta().ok_or_else(|| arg("sphere coincidence needs a homogeneous speed"))?;
    if beta == 0.0 {
        return Err(arg("sphere coincidence needs β ≠ 0"));
    }
    if !(b > 0.0) {
        return Err(arg(format!("b must be positive, got {b}")));
    }
    let unit = speed.unit_value()?;
    let inv = Exponent::from_f64(beta).recip()?;
    let b_power = b * inv.pow(b)?;
    let target = 2.0 * inv.pow(unit / lambda)?;
    let c = -0.25 * inv.pow(lambda * b / unit)?;
    let one_plus_2bc = 1.0 + 2.0 * b * c;
    Ok(Coincidence {
        b_power,
        target,
        one_plus_2bc,
        power_form: (b_power - target).abs() <= TOL_SPH * target.abs(),
        series_form: one_plus_2bc.abs() <= TOL_SPH,
    })
}

/// Whether the profile starting at height b on the axis is the sphere:
/// b^{1+1/β} = 2Ψ(1,0)^{1/β}/λ^{1/β}.
pub fn sphere_coincidence(b: f64, speed: &SpeedFunction) -> Result<bool> {
    Ok(coincidence_forms(b, speed)?.power_form)
}

/// One rung of the F̃ ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderRung {
    pub x: f64,
    /// Q(x)·x, absent at an umbilic point.
    pub ftilde: Option<f64>,
    pub umbilic: bool,
}

/// ε_sup over the samples with x ≥ x_min.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonRung {
    pub x_min: f64,
    /// `None` when no sample in range carries a positive Q (ε unbounded).
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PinchReport {
    pub b: f64,
    /// c from the series at the axis.
    pub c_series: f64,
    pub c_fit: f64,
    pub a3_fit: f64,
    pub a4_fit: f64,
    pub fit_degree: usize,
    pub ftilde_samples: Vec<LadderRung>,
    /// Richardson limit (order 2) of the ladder; absent when the ladder is umbilic.
    pub ftilde_limit: Option<f64>,
    /// Largest relative deviation of a rung from the limit.
    pub ftilde_spread: Option<f64>,
    /// c(1 + 2bc)/(2(c³ − a₄)) from the fitted coefficients.
    pub ftilde_closed: f64,
    /// |c³ − a₄| > 0.1·|c|³, so that the closed form is trustworthy.
    pub closed_well_conditioned: bool,
    pub ladder_umbilic: bool,
    /// ε_sup for the sample set including the axis: 0 once the ladder shows Q
    /// unbounded, otherwise the sampled value. `None` means unbounded.
    pub epsilon_sup: Option<f64>,
    /// ε_sup over the integrated samples only.
    pub epsilon_sup_sampled: Option<f64>,
    /// ε_sup over samples with x ≥ x_min, for x_min running down the ladder.
    pub epsilon_ladder: Vec<EpsilonRung>,
    pub coincidence: Coincidence,
    pub sphere_coincident: bool,
    /// Ψ₁ vanished (or was undefined) somewhere in the fit window.
    pub psi1_degenerate: bool,
}

fn epsilon(samples: &[CurvatureSample], lambda: f64) -> Result<Option<f64>> {
    let e = rotgeom::pinching_epsilon_sup(samples, lambda)?;
    Ok(e.is_finite().then_some(e))
}

/// Ladder, Richardson limit, closed form and ε_sup for an integrated profile.
/// The run must have recorded the ladder abscissae (see [`pinch_problem`]).
pub fn ftilde_analysis(report: &SolveReport) -> Result<PinchReport> {
    let problem = &report.problem;
    let speed = &problem.speed;
    let lambda = speed.lambda();
    let b = problem.b;
    let profile = &report.profile;

    let fit = taylor_fit(profile, b, FIT_DEGREE + 1, FIT_DEGREE)?;
    let coincidence = coincidence_forms(b, speed)?;

    let mut rungs = Vec::new();
    for x in ladder(problem.x_start, LADDER_OCTAVES) {
        let point = profile
            .points
            .iter()
            .find(|p| p.x() == x)
            .ok_or_else(|| arg(format!("ladder abscissa {x} was not recorded by the run")))?;
        let s = point.curvature(b)?;
        let q = rotgeom::pinching_ratio(&s, b);
        rungs.push(LadderRung { x, ftilde: q.map(|q| q * x), umbilic: q.is_none() });
    }
    let ladder_umbilic = rungs.iter().any(|r| r.umbilic);
    let (ftilde_limit, ftilde_spread) = if ladder_umbilic {
        (None, None)
    } else {
        let f: Vec<f64> = rungs.iter().filter_map(|r| r.ftilde).collect();
        let limit = (4.0 * f[0] - f[1]) / 3.0;
        let spread = f.iter().map(|v| (v - limit).abs() / limit.abs()).fold(0.0, f64::max);
        (Some(limit), Some(spread))
    };

    let (c, a4) = (fit.c, fit.a4);
    let ftilde_closed = c * (1.0 + 2.0 * b * c) / (2.0 * (c * c * c - a4));
    let closed_well_conditioned = (c * c * c - a4).abs() > 0.1 * c.abs().powi(3);

    let samples = profile.curvature_samples(b)?;
    let epsilon_sup_sampled = epsilon(&samples, lambda)?;
    let mut epsilon_ladder = Vec::new();
    for r in rungs.iter().rev() {
        let kept: Vec<CurvatureSample> = samples.iter().filter(|s| s.x >= r.x).cloned().collect();
        epsilon_ladder.push(EpsilonRung { x_min: r.x, epsilon: epsilon(&kept, lambda)? });
    }
    epsilon_ladder.push(EpsilonRung { x_min: problem.x_start, epsilon: epsilon_sup_sampled });
    let unbounded = ftilde_limit.is_some_and(|f| f != 0.0 && f.is_finite());
    let epsilon_sup = if unbounded { Some(0.0) } else { epsilon_sup_sampled };

    let window = FIT_WINDOW_REL * b;
    let psi1: Vec<Option<f64>> = samples
        .iter()
        .filter(|s| s.x <= window)
        .map(|s| EvalPoint::from_principal(s.k1, s.k2).and_then(|p| speed.grad(p)).ok().map(|g| g.0.abs()))
        .collect();
    let psi1_max = psi1.iter().flatten().fold(0.0f64, |m, v| m.max(*v));
    let psi1_degenerate = psi1.iter().any(|v| v.is_none_or(|v| v <= 1e-8 * psi1_max));

    Ok(PinchReport {
        b,
        c_series: report.series.c,
        c_fit: fit.c,
        a3_fit: fit.a3,
        a4_fit: fit.a4,
        fit_degree: fit.degree,
        ftilde_samples: rungs,
        ftilde_limit,
        ftilde_spread,
        ftilde_closed,
        closed_well_conditioned,
        ladder_umbilic,
        epsilon_sup,
        epsilon_sup_sampled,
        epsilon_ladder,
        sphere_coincident: coincidence.power_form,
        coincidence,
        psi1_degenerate,
    })
}

/// Integrate [`pinch_problem`] at tolerance `tol` and analyse the result.
pub fn pinch(speed: &SpeedFunction, b: f64, tol: f64) -> Result<(SolveReport, PinchReport)> {
    let problem = pinch_problem(speed.clone(), b).with_tol(tol);
    let report = integrate_profile(&problem)?;
    if let Some(msg) = &report.failure {
        if report.termination.is_failure() && report.profile.len() < 2 {
            return Err(arg(format!("integration failed at the start: {msg}")));
        }
    }
    let pinch = ftilde_analysis(&report)?;
    Ok((report, pinch))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanClass {
    Parabolic,
    Weak,
    NotParabolic,
    /// H² − 4K < 0: no real principal curvatures.
    OutOfDomain,
    DomainError,
}

impl ScanClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScanClass::Parabolic => "parabolic",
            ScanClass::Weak => "weak",
            ScanClass::NotParabolic => "not_parabolic",
            ScanClass::OutOfDomain => "out_of_domain",
            ScanClass::DomainError => "domain_error",
        }
    }
}

/// Uniform (H, K) grid, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub h_min: f64,
    pub h_max: f64,
    pub k_min: f64,
    pub k_max: f64,
    pub n_h: usize,
    pub n_k: usize,
}

impl Default for ScanGrid {
    fn default() -> Self {
        ScanGrid { h_min: -2.0, h_max: 2.0, k_min: -30.0, k_max: 1.0, n_h: 200, n_k: 200 }
    }
}

impl ScanGrid {
    fn axis(lo: f64, hi: f64, n: usize, i: usize) -> f64 {
        if n == 1 {
            lo
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    }

    pub fn h(&self, i: usize) -> f64 {
        Self::axis(self.h_min, self.h_max, self.n_h, i)
    }

    pub fn k(&self, j: usize) -> f64 {
        Self::axis(self.k_min, self.k_max, self.n_k, j)
    }

    pub fn k_step(&self) -> f64 {
        (self.k_max - self.k_min) / (self.n_k.max(2) - 1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanCell {
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub indicator: Option<f64>,
    pub class: ScanClass,
}

/// First sign change of the indicator in one H column, scanning K upwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    #[serde(rename = "H")]
    pub h: f64,
    /// Linear interpolation of the indicator between the two cells.
    #[serde(rename = "K")]
    pub k: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParabolicityScan {
    pub grid: ScanGrid,
    /// Column-major: all K for the first H, then the next H.
    pub cells: Vec<ScanCell>,
    pub boundary: Vec<BoundaryPoint>,
}

fn classify(speed: &SpeedFunction, h: f64, k: f64) -> ScanCell {
    let x2 = h * h - 4.0 * k;
    if x2 < 0.0 {
        return ScanCell { h, k, indicator: None, class: ScanClass::OutOfDomain };
    }
    let parts = EvalPoint::new(h, x2).and_then(|p| speed.grad(p).map(|g| (p, g)));
    match parts {
        Ok((p, (g1, g2))) => {
            let ind = g1 * g1 - 4.0 * p.x2() * g2 * g2;
            let scale = g1 * g1 + 4.0 * p.x2() * g2 * g2;
            let class = if !ind.is_finite() {
                ScanClass::DomainError
            } else if ind.abs() <= 1e-12 * scale {
                ScanClass::Weak
            } else if ind > 0.0 {
                ScanClass::Parabolic
            } else {
                ScanClass::NotParabolic
            };
            ScanCell { h, k, indicator: ind.is_finite().then_some(ind), class }
        }
        Err(_) => ScanCell { h, k, indicator: None, class: ScanClass::DomainError },
    }
}

fn column_boundary(h: f64, column: &[ScanCell]) -> BoundaryPoint {
    let k = column.windows(2).find_map(|w| {
        let (lo, hi) = (&w[0], &w[1]);
        match (lo.indicator, hi.indicator) {
            (Some(a), Some(c)) if lo.class != ScanClass::Parabolic && hi.class == ScanClass::Parabolic => {
                Some(if a == c { lo.k } else { lo.k + (hi.k - lo.k) * (-a) / (c - a) })
            }
            _ => None,
        }
    });
    BoundaryPoint { h, k }
}

/// Sign of Ψ₁² − 4x₂Ψ₂² on an (H, K) grid, with the empirical boundary per column.
pub fn parabolicity_scan(speed: &SpeedFunction, grid: &ScanGrid) -> Result<ParabolicityScan> {
    if grid.n_h == 0 || grid.n_k < 2 || !(grid.h_min <= grid.h_max && grid.k_min < grid.k_max) {
        return Err(arg("scan grid needs n_h ≥ 1, n_k ≥ 2 and ordered bounds"));
    }
    let columns: Vec<Vec<ScanCell>> = (0..grid.n_h)
        .into_par_iter()
        .map(|i| {
            let h = grid.h(i);
            (0..grid.n_k).map(|j| classify(speed, h, grid.k(j))).collect()
        })
        .collect();
    let boundary = columns.iter().enumerate().map(|(i, col)| column_boundary(grid.h(i), col)).collect();
    Ok(ParabolicityScan { grid: *grid, cells: columns.into_iter().flatten().collect(), boundary })
}

impl ParabolicityScan {
    /// CSV with columns H,K,indicator,class.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(b"H,K,indicator,class\n")?;
        for c in &self.cells {
            write_row(&mut w, &[fmt17(c.h), fmt17(c.k), fmt_opt(c.indicator), c.class.as_str().to_string()])?;
        }
        Ok(())
    }

    /// CSV with columns H,K_boundary.
    pub fn write_boundary_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(b"H,K_boundary\n")?;
        for p in &self.boundary {
            write_row(&mut w, &[fmt17(p.h), fmt_opt(p.k)])?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rotgeom::GraphJet;
    use crate::soliton::ProfilePoint;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::SQRT_2;

    fn graph_profile(f: impl Fn(f64) -> (f64, f64, f64), b: f64, n: usize) -> ProfileCurve {
        let points = (1..=n)
            .map(|i| {
                let x = 0.1 * b * i as f64 / n as f64;
                let (gamma, gamma_p, gamma_pp) = f(x);
                ProfilePoint::Graph { s: 0.0, jet: GraphJet { x, gamma, gamma_p, gamma_pp } }
            })
            .collect();
        ProfileCurve { points }
    }

    #[test]
    fn sphere_taylor_coefficients() {
        let b = SQRT_2;
        let p = graph_profile(
            |x| {
                let r = (2.0 - x * x).sqrt();
                (r, -x / r, -2.0 / (r * r * r))
            },
            b,
            200,
        );
        // √(2 − x²) = √2 − x²/(2√2) − x⁴/(8·2√2) − …
        let c = -1.0 / (2.0 * SQRT_2);
        let a4 = -1.0 / (8.0 * 2.0 * SQRT_2);
        let fit = taylor_fit(&p, b, 50, FIT_DEGREE).unwrap();
        assert!((fit.c - c).abs() < 1e-10, "{fit:?}");
        assert!(fit.a3.abs() < 1e-8);
        assert!((fit.a4 - a4).abs() < 1e-6);
        // A degree-4 fit carries the x⁶ truncation into a₃.
        let low = taylor_fit(&p, b, 50, 4).unwrap();
        assert!(low.a3.abs() > 1e-5);
    }

    #[test]
    fn window_follows_cap_radius() {
        assert_eq!(fit_window(2.0, -0.1), 0.2);
        assert_eq!(fit_window(2.0, -2.0), 0.05);
        assert_eq!(fit_window(2.0, 0.0), 0.2);
        // Small cap of radius ¼ raised to height 2: c = −2, so only x ≤ 0.05 is used.
        let (b, r) = (2.0, 0.25);
        let p = graph_profile(
            |x| {
                let w = (r * r - x * x).sqrt();
                (b - r + w, -x / w, -r * r / (w * w * w))
            },
            b,
            800,
        );
        let fit = taylor_fit(&p, b, 100, FIT_DEGREE).unwrap();
        assert!(fit.samples <= 200, "{fit:?}");
        assert!((fit.c + 2.0).abs() < 1e-9 && fit.a3.abs() < 1e-6, "{fit:?}");
    }

    #[test]
    fn constant_profile_fits_to_zero() {
        let p = graph_profile(|_| (0.7, 0.0, 0.0), 0.7, 40);
        let fit = taylor_fit(&p, 0.7, 10, 4).unwrap();
        assert_eq!((fit.c, fit.a3, fit.a4), (0.0, 0.0, 0.0));
    }

    #[test]
    fn taylor_fit_needs_samples() {
        let p = graph_profile(|_| (1.0, 0.0, 0.0), 1.0, 5);
        assert!(matches!(taylor_fit(&p, 1.0, 10, 4), Err(crate::Error::Arg(_))));
        assert!(matches!(taylor_fit(&p, 1.0, 3, 3), Err(crate::Error::Arg(_))));
    }

    #[test]
    fn coincidence_examples() {
        let mc = SpeedFunction::mean_curvature(1.0);
        assert!(sphere_coincidence(SQRT_2, &mc).unwrap());
        assert!(!sphere_coincidence(1.0, &mc).unwrap());
        assert!(sphere_coincidence(1.0, &SpeedFunction::gauss_power(1.0, 1.0)).unwrap());
        let c = coincidence_forms(SQRT_2, &mc).unwrap();
        assert!(c.series_form && c.one_plus_2bc.abs() < 1e-15);
        assert!(matches!(sphere_coincidence(1.0, &mc.with_lambda(0.0)), Err(crate::Error::Arg(_))));
    }

    #[test]
    fn coincidence_forms_agree_on_random_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let lambda = rng.gen_range(0.1..4.0);
            let speed = match rng.gen_range(0..5) {
                0 => SpeedFunction::mean_curvature(lambda),
                1 => SpeedFunction::power_mean(rng.gen_range(0.2..4.0), lambda),
                2 => SpeedFunction::gauss_power(rng.gen_range(0.1..2.0), lambda),
                3 => SpeedFunction::norm_a_squared(lambda),
                _ => SpeedFunction::quadratic_hk(rng.gen_range(0.5..2.0), rng.gen_range(-0.5..2.0), lambda),
            };
            // Half the samples sit on the sphere value, half at random.
            let sphere_b = |s: &SpeedFunction| {
                let c = coincidence_forms(1.0, s).unwrap();
                let beta = s.beta().unwrap();
                c.target.powf(beta / (beta + 1.0))
            };
            let b = if rng.gen_bool(0.5) { sphere_b(&speed) } else { rng.gen_range(0.05..5.0) };
            let c = coincidence_forms(b, &speed).unwrap();
            assert_eq!(c.power_form, c.series_form, "{c:?} b={b} {speed:?}");
        }
    }

    fn mc_pinch(b: f64) -> PinchReport {
        pinch(&SpeedFunction::mean_curvature(1.0), b, 1e-9).unwrap().1
    }

    #[test]
    fn sphere_ladder_is_umbilic() {
        let r = mc_pinch(SQRT_2);
        assert!(r.sphere_coincident);
        assert!(r.ladder_umbilic);
        assert!(r.ftilde_limit.is_none());
        // Q vanishes identically; only round-off near the far pole is sampled.
        assert!(r.epsilon_sup.is_none_or(|e| e > 100.0), "{r:?}");
    }

    #[test]
    fn off_sphere_ladder_is_stable() {
        for b in [0.5, 2.5] {
            let r = mc_pinch(b);
            assert!(!r.sphere_coincident);
            let limit = r.ftilde_limit.unwrap();
            assert!(limit.abs() > 0.01);
            assert!(r.ftilde_spread.unwrap() <= 0.05, "{r:?}");
            assert!(r.closed_well_conditioned);
            assert!((r.ftilde_closed.abs() - limit).abs() <= 0.1 * limit, "{r:?}");
            assert_eq!(r.epsilon_sup, Some(0.0));
            let eps: Vec<f64> = r.epsilon_ladder.iter().map(|e| e.epsilon.unwrap()).collect();
            assert!(eps.windows(2).all(|w| w[1] < w[0]), "{eps:?}");
            assert!(!r.psi1_degenerate);
            // Balancing the x² terms gives |F̃(0)| = 8|Ψ₁(−4c, 0)/λ| = 8 here.
            assert!((limit - 8.0).abs() < 1e-3 * 8.0, "{limit}");
            let c = r.c_series;
            let a4 = c * c * c + c * (1.0 + 2.0 * b * c) / 16.0;
            assert!((r.a4_fit - a4).abs() < 1e-4 * a4.abs(), "{} vs {a4}", r.a4_fit);
        }
    }

    #[test]
    fn dichotomy_across_families() {
        let families = [
            SpeedFunction::mean_curvature(1.0),
            SpeedFunction::power_mean(3.0, 1.0),
            SpeedFunction::gauss_power(1.0, 1.0),
            SpeedFunction::norm_a_squared(1.0),
        ];
        for speed in families {
            let beta = speed.beta().unwrap();
            let b0 = coincidence_forms(1.0, &speed).unwrap().target.powf(beta / (beta + 1.0));
            assert!(sphere_coincidence(b0, &speed).unwrap(), "{speed:?}");
            for f in [0.95, 1.05] {
                let (_, r) = pinch(&speed, f * b0, 1e-9).unwrap();
                assert!(!r.sphere_coincident);
                let limit = r.ftilde_limit.unwrap();
                assert!(limit.is_finite() && limit != 0.0, "{speed:?} {r:?}");
            }
        }
    }

    #[test]
    fn ladder_must_be_recorded() {
        let p = SolitonProblem::new(SpeedFunction::mean_curvature(1.0), 0.5);
        let mut report = integrate_profile(&p).unwrap();
        report.problem.record_at.clear();
        assert!(ftilde_analysis(&report).is_err());
    }

    fn boundary_error(scan: &ParabolicityScan, exact: impl Fn(f64) -> f64) -> (usize, f64) {
        let mut found = 0;
        let mut worst = 0.0f64;
        for p in &scan.boundary {
            if let Some(k) = p.k {
                found += 1;
                worst = worst.max((k - exact(p.h)).abs());
            }
        }
        (found, worst)
    }

    #[test]
    fn norm_a_squared_boundary() {
        let grid = ScanGrid::default();
        let scan = parabolicity_scan(&SpeedFunction::norm_a_squared(1.0), &grid).unwrap();
        let (found, worst) = boundary_error(&scan, |_| 0.0);
        assert!(found > 100);
        assert!(worst <= grid.k_step());
    }

    #[test]
    fn quadratic_boundary() {
        let grid = ScanGrid::default();
        let scan = parabolicity_scan(&SpeedFunction::quadratic_hk(1.0, 1.0, 1.0), &grid).unwrap();
        let (found, worst) = boundary_error(&scan, |h| -6.0 * h * h);
        // Every column with grid cells on both sides of −6H² inside the domain has a crossing.
        let expected = (0..grid.n_h)
            .filter(|&i| {
                let (h, kb) = (grid.h(i), -6.0 * grid.h(i).powi(2));
                let ks: Vec<f64> = (0..grid.n_k).map(|j| grid.k(j)).filter(|&k| k <= h * h / 4.0).collect();
                ks.iter().any(|&k| k < kb) && ks.iter().any(|&k| k > kb)
            })
            .count();
        assert_eq!(found, expected);
        assert!(worst <= grid.k_step());
    }

    #[test]
    fn mean_curvature_is_parabolic_everywhere() {
        let scan = parabolicity_scan(&SpeedFunction::mean_curvature(1.0), &ScanGrid::default()).unwrap();
        for c in &scan.cells {
            match c.class {
                ScanClass::OutOfDomain => assert!(c.h * c.h < 4.0 * c.k),
                ScanClass::Parabolic => assert_eq!(c.indicator, Some(1.0)),
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn domain_errors_are_kept() {
        let grid = ScanGrid { n_h: 21, n_k: 21, ..ScanGrid::default() };
        let scan = parabolicity_scan(&SpeedFunction::harmonic_mean_power(1.0, 1.0), &grid).unwrap();
        assert_eq!(scan.cells.len(), 21 * 21);
        assert!(scan.cells.iter().any(|c| c.class == ScanClass::DomainError));
        let mut buf = Vec::new();
        scan.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 21 * 21 + 1);
        assert!(text.contains(",,domain_error\n"));
    }
}
