//! Round spheres centered at the origin: radius R with λR = Ψ(2/R, 0).

use serde::{Deserialize, Serialize};

use crate::error::{arg, Result};
use crate::roots::brent;
use crate::rotgeom::GraphJet;
use crate::soliton::residual;
use crate::speed::{Exponent, SpeedFunction};
use crate::tolerances::{R_BRACKET_REL, SPHERE_RESIDUAL_REL};

/// Log-spaced samples per decade when scanning g(R) for sign changes.
const SCAN_PER_DECADE: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereSolution {
    #[serde(rename = "R")]
    pub radius: f64,
    pub center_is_origin: bool,
    /// λR − Ψ(2/R, 0).
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusMethod {
    ClosedForm,
    RootSearch,
    /// β = −1: the equation does not depend on R.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereReport {
    /// All radii found, sorted. Empty when no sphere solves the equation.
    pub solutions: Vec<SphereSolution>,
    /// Every R > 0 solves the equation.
    pub any_radius: bool,
    pub method: RadiusMethod,
}

/// λR − Ψ(2/R, 0).
pub fn radius_equation(speed: &SpeedFunction, r: f64) -> Result<f64> {
    Ok(speed.lambda() * r - speed.eval_xy(2.0 / r, 0.0)?)
}

fn solution(speed: &SpeedFunction, r: f64) -> Result<SphereSolution> {
    Ok(SphereSolution { radius: r, center_is_origin: true, residual: radius_equation(speed, r)? })
}

/// Spheres centered at the origin solving Ψ = −λ⟨X, N⟩.
///
/// Homogeneous speeds use R = [2^β Ψ(1, 0)/λ]^{1/(β+1)}; other speeds are
/// scanned on a logarithmic grid and every sign change is refined.
pub fn sphere_radius(speed: &SpeedFunction) -> Result<SphereReport> {
    let lambda = speed.lambda();
    if lambda == 0.0 {
        return Err(arg("λ = 0 is the stationary case: any center, R solving Ψ(2/R, 0) = 0"));
    }
    let Some(beta) = speed.beta() else {
        return Ok(SphereReport {
            solutions: radius_search(speed)?,
            any_radius: false,
            method: RadiusMethod::RootSearch,
        });
    };
    let unit = speed.unit_value()?;
    if beta == -1.0 {
        // λR − Ψ(1,0) R / 2 vanishes identically or nowhere.
        return Ok(SphereReport {
            solutions: Vec::new(),
            any_radius: lambda == 0.5 * unit,
            method: RadiusMethod::Degenerate,
        });
    }
    let base = 2f64.powf(beta) * unit / lambda;
    if base > 0.0 {
        let r = Exponent::from_f64(beta + 1.0).recip()?.pow(base)?;
        if r > 0.0 && r.is_finite() {
            return Ok(SphereReport {
                solutions: vec![solution(speed, r)?],
                any_radius: false,
                method: RadiusMethod::ClosedForm,
            });
        }
    }
    Ok(SphereReport { solutions: radius_search(speed)?, any_radius: false, method: RadiusMethod::RootSearch })
}

/// Characteristic length (Ψ(1,0)/λ)^{1/(β+1)} when defined, else 1.
fn length_scale(speed: &SpeedFunction) -> f64 {
    let l = match (speed.beta(), speed.unit_value()) {
        (Some(beta), Ok(unit)) if beta != -1.0 => (unit / speed.lambda()).abs().powf(1.0 / (beta + 1.0)),
        _ => 1.0,
    };
    if l.is_finite() && l > 0.0 {
        l
    } else {
        1.0
    }
}

/// All roots of λR − Ψ(2/R, 0) in [L/R_BRACKET_REL, L·R_BRACKET_REL], sorted.
pub fn radius_search(speed: &SpeedFunction) -> Result<Vec<SphereSolution>> {
    let l = length_scale(speed);
    let (lo, hi) = (l / R_BRACKET_REL, l * R_BRACKET_REL);
    let n = (SCAN_PER_DECADE as f64 * (hi / lo).log10()).ceil() as usize;
    let g = |r: f64| radius_equation(speed, r).unwrap_or(f64::NAN);
    let grid: Vec<f64> = (0..=n).map(|i| lo * (hi / lo).powf(i as f64 / n as f64)).collect();
    let values: Vec<f64> = grid.iter().map(|&r| g(r)).collect();
    let mut roots = Vec::new();
    for i in 0..n {
        let (a, b, fa, fb) = (grid[i], grid[i + 1], values[i], values[i + 1]);
        if !(fa.is_finite() && fb.is_finite()) {
            continue;
        }
        if fa == 0.0 {
            roots.push(a);
        } else if fa.signum() != fb.signum() && fb != 0.0 {
            roots.push(brent(g, a, b, 1e-15 * b, 200)?);
        }
    }
    if values[n] == 0.0 {
        roots.push(grid[n]);
    }
    roots
        .into_iter()
        .filter(|&r| {
            let res = g(r);
            res.abs() <= SPHERE_RESIDUAL_REL * (speed.lambda() * r).abs().max(1.0)
        })
        .map(|r| solution(speed, r))
        .collect()
}

/// Largest absolute residual of the profile equation along γ = √(R² − x²)
/// at x = 0.9R·i/50, i = 1..=50.
pub fn verify_sphere(speed: &SpeedFunction, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(arg(format!("radius must be positive, got {r}")));
    }
    let mut worst = 0.0f64;
    for i in 1..=50 {
        let x = 0.9 * r * i as f64 / 50.0;
        let g = (r * r - x * x).sqrt();
        let jet = GraphJet { x, gamma: g, gamma_p: -x / g, gamma_pp: -r * r / (g * g * g) };
        worst = worst.max(residual(speed, &jet)?.abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::speed::{CustomSpeed, CustomTerm, Monomial};

    fn radius(speed: &SpeedFunction) -> f64 {
        let rep = sphere_radius(speed).unwrap();
        assert_eq!(rep.solutions.len(), 1, "{rep:?}");
        rep.solutions[0].radius
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn corollary_examples() {
        assert!(rel(radius(&SpeedFunction::mean_curvature(1.0)), 2f64.sqrt()) < 1e-15);
        for alpha in [0.1, 0.2, 0.25] {
            assert!(rel(radius(&SpeedFunction::gauss_power(alpha, 1.0)), 1.0) < 1e-15);
        }
        for beta in [2.0, 3.0, 1.0 / 3.0] {
            let want = 2f64.powf(beta / (beta + 1.0));
            assert!(rel(radius(&SpeedFunction::power_mean(beta, 1.0)), want) < 1e-14);
        }
    }

    #[test]
    fn corollary_grid() {
        for lambda in [0.5, 1.0, 2.0, 3.7] {
            let r = radius(&SpeedFunction::mean_curvature(lambda));
            assert!(rel(r, (2.0 / lambda).sqrt()) < 1e-12);
            for beta in [2.0, 3.0, 1.0 / 3.0, 0.7] {
                let r = radius(&SpeedFunction::power_mean(beta, lambda));
                assert!(rel(r, (2f64.powf(beta) / lambda).powf(1.0 / (beta + 1.0))) < 1e-12);
            }
            for alpha in [0.1, 0.2] {
                let r = radius(&SpeedFunction::gauss_power(alpha, lambda));
                assert!(rel(r, lambda.powf(-1.0 / (2.0 * alpha + 1.0))) < 1e-12);
            }
            for (m, n) in [(1, 2), (3, 2), (1, 3)] {
                let alpha = m as f64 / (2 * n - 1) as f64;
                let speed = SpeedFunction::harmonic_mean_ratio(m, n, lambda).unwrap();
                // Ψ(2/R, 0) = (2R)^{-α}, so λR = (2R)^{-α}.
                let want = (2f64.powf(alpha) * lambda).powf(-1.0 / (alpha + 1.0));
                assert!(rel(radius(&speed), want) < 1e-12);
            }
        }
    }

    #[test]
    fn closed_form_matches_root_search() {
        let speeds = [
            SpeedFunction::mean_curvature(1.3),
            SpeedFunction::power_mean(2.0, 0.5),
            SpeedFunction::power_mean(1.0 / 3.0, 2.0),
            SpeedFunction::gauss_power(0.2, 1.0),
            SpeedFunction::harmonic_mean_power(0.5, 0.8),
            SpeedFunction::quadratic_hk(1.0, 1.0, 1.0),
            SpeedFunction::norm_a_squared(2.0),
        ];
        for s in &speeds {
            let closed = radius(s);
            let found = radius_search(s).unwrap();
            assert_eq!(found.len(), 1, "{s:?}");
            assert!(rel(found[0].radius, closed) < 1e-10, "{s:?}");
            assert!(found[0].center_is_origin);
        }
    }

    #[test]
    fn radius_scaling() {
        for s in [
            SpeedFunction::mean_curvature(1.0),
            SpeedFunction::power_mean(3.0, 1.0),
            SpeedFunction::gauss_power(0.2, 0.7),
            SpeedFunction::quadratic_hk(2.0, 1.0, 1.5),
        ] {
            let beta = s.beta().unwrap();
            let r = radius(&s);
            for a in [0.5f64, 2.0] {
                let scaled = s.with_lambda(a.powf(beta + 1.0) * s.lambda());
                assert!(rel(radius(&scaled), r / a) < 1e-12);
            }
        }
    }

    #[test]
    fn residual_invariant() {
        for s in [SpeedFunction::mean_curvature(2.0), SpeedFunction::gauss_power(0.1, 0.5)] {
            let sol = sphere_radius(&s).unwrap().solutions[0];
            assert!(sol.residual.abs() <= 1e-10 * (s.lambda() * sol.radius).abs().max(1.0));
        }
    }

    #[test]
    fn degenerate_exponent() {
        // β = −1: λR − Ψ(1,0)R/2 is identically zero at λ = Ψ(1,0)/2.
        let rep = sphere_radius(&SpeedFunction::power_mean(-1.0, 0.5)).unwrap();
        assert!(rep.any_radius && rep.method == RadiusMethod::Degenerate);
        let rep = sphere_radius(&SpeedFunction::power_mean(-1.0, 0.7)).unwrap();
        assert!(!rep.any_radius && rep.solutions.is_empty());
    }

    #[test]
    fn harmonic_ratio_one_has_a_single_sphere() {
        // (K/H) on a sphere of radius R is 1/(2R), so λ = ½ singles out R = 1.
        let s = SpeedFunction::harmonic_mean_ratio(1, 1, 0.5).unwrap();
        assert!(rel(radius(&s), 1.0) < 1e-15);
        assert!(verify_sphere(&s, 1.0).unwrap() < 1e-12);
        assert!(verify_sphere(&s, 3.0).unwrap() > 1.0);
    }

    #[test]
    fn no_sphere_for_wrong_sign() {
        // Ψ(1,0) > 0 with λ < 0 and an even root: no positive radius.
        let rep = sphere_radius(&SpeedFunction::gauss_power(0.5, -1.0)).unwrap();
        assert!(rep.solutions.is_empty() && !rep.any_radius);
        assert!(sphere_radius(&SpeedFunction::mean_curvature(0.0)).is_err());
    }

    #[test]
    fn non_homogeneous_speed_reports_all_roots() {
        // Ψ = H − H³/32: λR = 2/R − 1/(4R³) has two positive roots for λ = 1.5.
        let mono = |p: u32| Monomial { coeff: 1.0, p, q: 0 };
        let speed = SpeedFunction::custom(
            CustomSpeed {
                terms: vec![
                    CustomTerm { coeff: 1.0, power: Exponent::from_f64(1.0), monomials: vec![mono(1)] },
                    CustomTerm { coeff: -1.0 / 32.0, power: Exponent::from_f64(1.0), monomials: vec![mono(3)] },
                ],
            },
            1.5,
        );
        let rep = sphere_radius(&speed).unwrap();
        assert_eq!(rep.method, RadiusMethod::RootSearch);
        // 1.5 R⁴ − 2R² + 1/4 = 0 ⇒ R² = (2 ± √(4 − 1.5))/3.
        let mut want = [((2.0 - 2.5f64.sqrt()) / 3.0).sqrt(), ((2.0 + 2.5f64.sqrt()) / 3.0).sqrt()];
        want.sort_by(f64::total_cmp);
        assert_eq!(rep.solutions.len(), 2);
        for (sol, w) in rep.solutions.iter().zip(want) {
            assert!(rel(sol.radius, w) < 1e-12);
        }
    }

    #[test]
    fn verify_examples() {
        let mc = SpeedFunction::mean_curvature(1.0);
        assert!(verify_sphere(&mc, 2f64.sqrt()).unwrap() <= 1e-12);
        assert!(verify_sphere(&mc, 1.0).unwrap() > 0.1);
        assert!(verify_sphere(&mc, -1.0).is_err());
    }
}
