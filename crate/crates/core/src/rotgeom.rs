//! Curvature and pinching quantities of surfaces of revolution
//! X(t, θ) = (x(t) cos θ, x(t) sin θ, y(t)).
//!
//! Orientation: the normal is N = (y′ cos θ, y′ sin θ, −x′)/√(x′² + y′²), which
//! for a graph y = γ(x) traversed with x increasing is the inward normal
//! (γ′ cos θ, γ′ sin θ, −1)/√(1 + γ′²). With this normal a sphere of radius R
//! centered at the origin has k₁ = k₂ = 1/R and ⟨X, N⟩ = −R.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{arg, domain, Result};
use crate::table::{fmt17, fmt_opt, write_row};

/// Relative threshold below which H² − 4K counts as umbilic, i.e.
/// |k₁ − k₂| ≤ 1e-7·max(|H|, 1/L).
pub const UMBILIC_REL: f64 = 1e-14;

/// Second-order jet of a graph profile (x, γ(x)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphJet {
    pub x: f64,
    pub gamma: f64,
    pub gamma_p: f64,
    pub gamma_pp: f64,
}

/// Second-order jet of a parametric profile (x(t), y(t)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamJet {
    pub x: f64,
    pub y: f64,
    pub xp: f64,
    pub yp: f64,
    pub xpp: f64,
    pub ypp: f64,
}

impl From<GraphJet> for ParamJet {
    /// The trivial parametrization t = x.
    fn from(j: GraphJet) -> Self {
        ParamJet { x: j.x, y: j.gamma, xp: 1.0, yp: j.gamma_p, xpp: 0.0, ypp: j.gamma_pp }
    }
}

fn check_graph(j: &GraphJet) -> Result<()> {
    if !(j.x > 0.0) {
        return Err(domain(format!("graph formulas need x > 0, got {}", j.x)));
    }
    Ok(())
}

fn check_param(j: &ParamJet) -> Result<()> {
    if !(j.x > 0.0) {
        return Err(domain(format!("profile point on or across the axis (x = {})", j.x)));
    }
    if !(j.xp * j.xp + j.yp * j.yp > 0.0) {
        return Err(domain("irregular profile point (zero velocity)"));
    }
    Ok(())
}

/// Principal curvatures (k₁ along parallels, k₂ along the meridian) of a graph profile.
pub fn curvature_graph(j: &GraphJet) -> Result<(f64, f64)> {
    check_graph(j)?;
    let w = 1.0 + j.gamma_p * j.gamma_p;
    let k1 = -j.gamma_p / (j.x * w.sqrt());
    let k2 = -j.gamma_pp / (w * w.sqrt());
    Ok((k1, k2))
}

/// Principal curvatures of a parametric profile.
pub fn curvature_param(j: &ParamJet) -> Result<(f64, f64)> {
    check_param(j)?;
    let v2 = j.xp * j.xp + j.yp * j.yp;
    let v = v2.sqrt();
    let k1 = -j.yp / (j.x * v);
    let k2 = (j.xpp * j.yp - j.xp * j.ypp) / (v2 * v);
    Ok((k1, k2))
}

/// (⟨X, N⟩, ‖X‖² − ⟨X, N⟩²) for a graph profile.
pub fn support_quantities(j: &GraphJet) -> Result<(f64, f64)> {
    check_graph(j)?;
    let w = 1.0 + j.gamma_p * j.gamma_p;
    let support = (j.x * j.gamma_p - j.gamma) / w.sqrt();
    let t = j.x + j.gamma * j.gamma_p;
    Ok((support, t * t / w))
}

/// (⟨X, N⟩, ‖X‖² − ⟨X, N⟩²) for a parametric profile.
///
/// The tangential part is ⟨X, T⟩² with T the unit meridian tangent, which
/// avoids the cancellation in ‖X‖² − ⟨X, N⟩².
pub fn support_quantities_param(j: &ParamJet) -> Result<(f64, f64)> {
    check_param(j)?;
    let v = (j.xp * j.xp + j.yp * j.yp).sqrt();
    let support = (j.x * j.yp - j.y * j.xp) / v;
    let t = (j.x * j.xp + j.y * j.yp) / v;
    Ok((support, t * t))
}

/// Curvature data at one profile point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureSample {
    pub x: f64,
    pub gamma: f64,
    /// dγ/dx and d²γ/dx², absent where the profile is vertical.
    pub gamma_p: Option<f64>,
    pub gamma_pp: Option<f64>,
    pub k1: f64,
    pub k2: f64,
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub support: f64,
    pub tangential_sq: f64,
    /// Pinching ratio |H|·√(‖X‖² − ⟨X,N⟩²)/√(H² − 4K), absent at umbilics.
    #[serde(rename = "Q")]
    pub q: Option<f64>,
}

impl CurvatureSample {
    fn assemble(
        x: f64,
        gamma: f64,
        gamma_p: Option<f64>,
        gamma_pp: Option<f64>,
        (k1, k2): (f64, f64),
        (support, tangential_sq): (f64, f64),
        length_scale: f64,
    ) -> Self {
        let mut s = CurvatureSample {
            x,
            gamma,
            gamma_p,
            gamma_pp,
            k1,
            k2,
            h: k1 + k2,
            k: k1 * k2,
            support,
            tangential_sq,
            q: None,
        };
        s.q = pinching_ratio(&s, length_scale);
        s
    }

    pub fn from_graph(j: &GraphJet, length_scale: f64) -> Result<Self> {
        Ok(Self::assemble(
            j.x,
            j.gamma,
            Some(j.gamma_p),
            Some(j.gamma_pp),
            curvature_graph(j)?,
            support_quantities(j)?,
            length_scale,
        ))
    }

    pub fn from_param(j: &ParamJet, length_scale: f64) -> Result<Self> {
        let (slope, second) = if j.xp != 0.0 {
            let s = j.yp / j.xp;
            let d2 = (j.xp * j.ypp - j.yp * j.xpp) / (j.xp * j.xp * j.xp);
            (Some(s).filter(|v| v.is_finite()), Some(d2).filter(|v| v.is_finite()))
        } else {
            (None, None)
        };
        Ok(Self::assemble(j.x, j.y, slope, second, curvature_param(j)?, support_quantities_param(j)?, length_scale))
    }

    /// H² − 4K, computed as (k₁ − k₂)².
    pub fn umbilicity(&self) -> f64 {
        (self.k1 - self.k2) * (self.k1 - self.k2)
    }

    pub fn is_umbilic(&self, length_scale: f64) -> bool {
        let scale = (self.h * self.h).max(1.0 / (length_scale * length_scale));
        self.umbilicity() <= UMBILIC_REL * scale
    }
}

/// Q = |H|·√(‖X‖² − ⟨X,N⟩²)/√(H² − 4K), or `None` at an umbilic where it is 0/0.
pub fn pinching_ratio(c: &CurvatureSample, length_scale: f64) -> Option<f64> {
    if c.is_umbilic(length_scale) {
        return None;
    }
    Some(c.h.abs() * c.tangential_sq.max(0.0).sqrt() / c.umbilicity().sqrt())
}

/// The largest ε for which K ≤ ¼[1 − ελ²(‖X‖² − ⟨X,N⟩²)]H² holds on all samples,
/// i.e. 1/(λ²·(sup Q)²). Returns +∞ when no sample carries a positive Q.
pub fn pinching_epsilon_sup(samples: &[CurvatureSample], lambda: f64) -> Result<f64> {
    if lambda == 0.0 {
        return Err(arg("lambda must be nonzero"));
    }
    let sup = samples.iter().filter_map(|s| s.q).fold(0.0f64, f64::max);
    if sup == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(1.0 / (lambda * lambda * sup * sup))
}

pub const CSV_HEADER: &str = "x,gamma,gamma_p,gamma_pp,k1,k2,H,K,support,tangential_sq,Q";

/// Write samples as CSV with the columns of [`CSV_HEADER`].
pub fn write_csv<W: Write>(samples: &[CurvatureSample], mut w: W) -> io::Result<()> {
    w.write_all(CSV_HEADER.as_bytes())?;
    w.write_all(b"\n")?;
    for s in samples {
        write_row(
            &mut w,
            &[
                fmt17(s.x),
                fmt17(s.gamma),
                fmt_opt(s.gamma_p),
                fmt_opt(s.gamma_pp),
                fmt17(s.k1),
                fmt17(s.k2),
                fmt17(s.h),
                fmt17(s.k),
                fmt17(s.support),
                fmt17(s.tangential_sq),
                fmt_opt(s.q),
            ],
        )?;
    }
    Ok(())
}
