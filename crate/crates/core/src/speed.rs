//! Speed functions Ψ(x₁, x₂) with x₁ = H and x₂ = H² − 4K.
//!
//! A flow speed W(k₁, k₂) that is symmetric in the principal curvatures is
//! written as Ψ(k₁ + k₂, (k₁ − k₂)²). Built-in families are homogeneous in
//! the weighted sense Ψ(a·x₁, a²·x₂) = a^β·Ψ(x₁, x₂), a > 0.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{arg, domain, Error, Result};

/// Negative x₂ values down to this magnitude are treated as round-off and clamped to 0.
pub const X2_CLAMP: f64 = 1e-12;

/// Largest denominator tried when recognizing a real exponent as a fraction.
const MAX_DENOMINATOR: u64 = 10_000;

/// A real exponent that remembers whether it is a fraction p/q with q odd.
///
/// Such exponents admit negative bases through the real odd root:
/// base^{p/q} := sign(base)^p·|base|^{p/q}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponent {
    value: f64,
    num: i64,
    /// Reduced denominator, or 0 when the value is not recognized as a fraction.
    den: u64,
}

impl Exponent {
    /// The exponent m/(2n − 1), m, n ≥ 1.
    pub fn odd_ratio(m: u32, n: u32) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(arg("odd-ratio exponent needs m, n ≥ 1"));
        }
        Self::rational(m as i64, 2 * n as u64 - 1)
    }

    pub fn rational(num: i64, den: u64) -> Result<Self> {
        if den == 0 {
            return Err(arg("zero denominator"));
        }
        let g = gcd(num.unsigned_abs(), den);
        let (num, den) = (num / g as i64, den / g);
        Ok(Self { value: num as f64 / den as f64, num, den })
    }

    /// Wrap a real exponent, recognizing small fractions such as 0.2 = 1/5.
    pub fn from_f64(value: f64) -> Self {
        match best_fraction(value) {
            Some((num, den)) => Self { value, num, den },
            None => Self { value, num: 0, den: 0 },
        }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    /// The reduced fraction, when the exponent is recognized as one.
    pub fn as_fraction(&self) -> Option<(i64, u64)> {
        (self.den != 0).then_some((self.num, self.den))
    }

    /// Whether negative bases are admitted.
    pub fn admits_negative_base(&self) -> bool {
        self.den % 2 == 1
    }

    /// The exponent shifted by an integer, keeping its denominator.
    pub fn shifted(&self, k: i64) -> Self {
        if self.den == 0 {
            return Self { value: self.value + k as f64, num: 0, den: 0 };
        }
        let num = self.num + k * self.den as i64;
        Self { value: num as f64 / self.den as f64, num, den: self.den }
    }

    pub fn recip(&self) -> Result<Self> {
        if self.value == 0.0 {
            return Err(arg("reciprocal of a zero exponent"));
        }
        if self.den == 0 {
            return Ok(Self::from_f64(1.0 / self.value));
        }
        let sign = self.num.signum();
        Self::rational(sign * self.den as i64, self.num.unsigned_abs())
    }

    /// base^exponent under the real odd-root convention.
    pub fn pow(&self, base: f64) -> Result<f64> {
        if base > 0.0 {
            return Ok(base.powf(self.value));
        }
        if base == 0.0 {
            return if self.value > 0.0 {
                Ok(0.0)
            } else if self.value == 0.0 {
                Ok(1.0)
            } else {
                Err(domain(format!("0 raised to negative power {}", self.value)))
            };
        }
        if base.is_nan() {
            return Err(domain("NaN base"));
        }
        if self.admits_negative_base() {
            let mag = (-base).powf(self.value);
            Ok(if self.num % 2 == 0 { mag } else { -mag })
        } else {
            Err(domain(format!("negative base {base} with exponent {} that has no real odd root", self.value)))
        }
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

/// Continued-fraction search for p/q ≈ v with q ≤ MAX_DENOMINATOR.
fn best_fraction(v: f64) -> Option<(i64, u64)> {
    if !v.is_finite() {
        return None;
    }
    let tol = 1e-12 * v.abs().max(1.0);
    let (mut h0, mut h1) = (0i128, 1i128);
    let (mut k0, mut k1) = (1i128, 0i128);
    let mut x = v;
    for _ in 0..40 {
        let a = x.floor();
        if a.abs() > 1e15 {
            return None;
        }
        let ai = a as i128;
        (h0, h1) = (h1, ai * h1 + h0);
        (k0, k1) = (k1, ai * k1 + k0);
        if k1 as u64 > MAX_DENOMINATOR {
            return None;
        }
        if (h1 as f64 / k1 as f64 - v).abs() <= tol {
            return Some((h1 as i64, k1 as u64));
        }
        let frac = x - a;
        if frac == 0.0 {
            return None;
        }
        x = 1.0 / frac;
    }
    let _ = (h0, k0);
    None
}

/// A point (x₁, x₂) = (H, H² − 4K) in the argument space of Ψ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalPoint {
    x1: f64,
    x2: f64,
}

impl EvalPoint {
    /// Build a point, clamping round-off negatives of x₂ to zero.
    pub fn new(x1: f64, x2: f64) -> Result<Self> {
        if !(x1.is_finite() && x2.is_finite()) {
            return Err(domain(format!("non-finite point ({x1}, {x2})")));
        }
        if x2 < -X2_CLAMP {
            return Err(domain(format!("x2 = {x2} < 0 (x2 = (k1 - k2)^2)")));
        }
        Ok(Self { x1, x2: x2.max(0.0) })
    }

    /// The point for principal curvatures (k₁, k₂).
    pub fn from_principal(k1: f64, k2: f64) -> Result<Self> {
        Self::new(k1 + k2, (k1 - k2) * (k1 - k2))
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }

    pub fn x2(&self) -> f64 {
        self.x2
    }
}

/// c·x₁^p·x₂^q
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coeff: f64,
    pub p: u32,
    pub q: u32,
}

/// coeff·(Σ monomials)^power
#[derive(Debug, Clone, PartialEq)]
pub struct CustomTerm {
    pub coeff: f64,
    pub power: Exponent,
    pub monomials: Vec<Monomial>,
}

/// A speed function given by the grammar Σᵢ cᵢ·(Σⱼ dⱼ x₁^pⱼ x₂^qⱼ)^eᵢ.
#[derive(Debug, Clone, PartialEq)]
pub struct CustomSpeed {
    pub terms: Vec<CustomTerm>,
}

impl CustomSpeed {
    fn eval(&self, x1: f64, x2: f64) -> Result<f64> {
        let mut total = 0.0;
        for term in &self.terms {
            let inner: f64 = term.monomials.iter().map(|m| m.coeff * x1.powi(m.p as i32) * x2.powi(m.q as i32)).sum();
            total += term.coeff * term.power.pow(inner)?;
        }
        Ok(total)
    }

    /// The homogeneity degree, when every term has the same weighted degree.
    pub fn infer_beta(&self) -> Option<f64> {
        let mut beta: Option<f64> = None;
        for term in &self.terms {
            let mut weight: Option<u32> = None;
            for m in term.monomials.iter().filter(|m| m.coeff != 0.0) {
                let w = m.p + 2 * m.q;
                match weight {
                    None => weight = Some(w),
                    Some(w0) if w0 != w => return None,
                    _ => {}
                }
            }
            let deg = weight? as f64 * term.power.value();
            match beta {
                None => beta = Some(deg),
                Some(b) if (b - deg).abs() > 1e-12 * b.abs().max(1.0) => return None,
                _ => {}
            }
        }
        beta
    }
}

/// The named flow families.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// Ψ = x₁ (W = H).
    MeanCurvature,
    /// Ψ = x₁^β (W = H^β).
    PowerMean(Exponent),
    /// Ψ = ((x₁² − x₂)/(4x₁))^α (W = (K/H)^α).
    HarmonicMeanPower(Exponent),
    /// Ψ = ((x₁² − x₂)/4)^α (W = K^α).
    GaussPower(Exponent),
    /// W = aH² + bK.
    QuadraticHK {
        a: f64,
        b: f64,
    },
    /// W = |A|² = k₁² + k₂² = (x₁² + x₂)/2.
    NormASquared,
    Custom(CustomSpeed),
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::MeanCurvature => "mean-curvature",
            Family::PowerMean(_) => "power-mean",
            Family::HarmonicMeanPower(_) => "harmonic-mean-power",
            Family::GaussPower(_) => "gauss-power",
            Family::QuadraticHK { .. } => "quadratic-hk",
            Family::NormASquared => "norm-a-squared",
            Family::Custom(_) => "custom",
        }
    }

    fn homogeneity(&self) -> Option<f64> {
        match self {
            Family::MeanCurvature => Some(1.0),
            Family::PowerMean(e) | Family::HarmonicMeanPower(e) => Some(e.value()),
            Family::GaussPower(e) => Some(2.0 * e.value()),
            Family::QuadraticHK { .. } | Family::NormASquared => Some(2.0),
            Family::Custom(c) => c.infer_beta(),
        }
    }
}

/// A speed function Ψ together with the flow constant λ of the soliton
/// equation Ψ(H, H² − 4K) = −λ⟨X, N⟩.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedFunction {
    family: Family,
    lambda: f64,
    beta: Option<f64>,
}

impl SpeedFunction {
    pub fn new(family: Family, lambda: f64) -> Self {
        let beta = family.homogeneity();
        Self { family, lambda, beta }
    }

    pub fn mean_curvature(lambda: f64) -> Self {
        Self::new(Family::MeanCurvature, lambda)
    }

    pub fn power_mean(beta: f64, lambda: f64) -> Self {
        Self::new(Family::PowerMean(Exponent::from_f64(beta)), lambda)
    }

    pub fn harmonic_mean_power(alpha: f64, lambda: f64) -> Self {
        Self::new(Family::HarmonicMeanPower(Exponent::from_f64(alpha)), lambda)
    }

    /// (K/H)^{m/(2n−1)}.
    pub fn harmonic_mean_ratio(m: u32, n: u32, lambda: f64) -> Result<Self> {
        Ok(Self::new(Family::HarmonicMeanPower(Exponent::odd_ratio(m, n)?), lambda))
    }

    pub fn gauss_power(alpha: f64, lambda: f64) -> Self {
        Self::new(Family::GaussPower(Exponent::from_f64(alpha)), lambda)
    }

    pub fn quadratic_hk(a: f64, b: f64, lambda: f64) -> Self {
        Self::new(Family::QuadraticHK { a, b }, lambda)
    }

    pub fn norm_a_squared(lambda: f64) -> Self {
        Self::new(Family::NormASquared, lambda)
    }

    pub fn custom(custom: CustomSpeed, lambda: f64) -> Self {
        Self::new(Family::Custom(custom), lambda)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Homogeneity degree β; `None` for a non-homogeneous custom speed.
    pub fn beta(&self) -> Option<f64> {
        self.beta
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self { lambda, ..self.clone() }
    }

    /// Ψ(x₁, x₂).
    pub fn eval(&self, p: EvalPoint) -> Result<f64> {
        let (x1, x2) = (p.x1, p.x2);
        match &self.family {
            Family::MeanCurvature => Ok(x1),
            Family::PowerMean(e) => e.pow(x1),
            Family::HarmonicMeanPower(e) => {
                if x1 == 0.0 {
                    return Err(domain("harmonic mean speed needs H != 0"));
                }
                e.pow((x1 * x1 - x2) / (4.0 * x1))
            }
            Family::GaussPower(e) => e.pow(0.25 * (x1 * x1 - x2)),
            Family::QuadraticHK { a, b } => Ok(a * x1 * x1 + 0.25 * b * (x1 * x1 - x2)),
            Family::NormASquared => Ok(0.5 * (x1 * x1 + x2)),
            Family::Custom(c) => c.eval(x1, x2),
        }
    }

    /// Ψ evaluated at raw coordinates.
    pub fn eval_xy(&self, x1: f64, x2: f64) -> Result<f64> {
        self.eval(EvalPoint::new(x1, x2)?)
    }

    /// Ψ(1, 0), the value at the unit umbilic.
    pub fn unit_value(&self) -> Result<f64> {
        self.eval_xy(1.0, 0.0)
    }

    /// W(k₁, k₂) = Ψ(k₁ + k₂, (k₁ − k₂)²).
    pub fn from_principal(&self, k1: f64, k2: f64) -> Result<f64> {
        self.eval(EvalPoint::from_principal(k1, k2)?)
    }

    /// (Ψ₁, Ψ₂) = (∂Ψ/∂x₁, ∂Ψ/∂x₂).
    pub fn grad(&self, p: EvalPoint) -> Result<(f64, f64)> {
        let (x1, x2) = (p.x1, p.x2);
        match &self.family {
            Family::MeanCurvature => Ok((1.0, 0.0)),
            Family::PowerMean(e) => {
                let d =
                    e.shifted(-1).pow(x1).map_err(|_| domain(format!("H^beta is not differentiable at H = {x1}")))?;
                Ok((e.value() * d, 0.0))
            }
            Family::HarmonicMeanPower(e) => {
                if x1 == 0.0 {
                    return Err(domain("harmonic mean speed needs H != 0"));
                }
                let base = (x1 * x1 - x2) / (4.0 * x1);
                let d = e
                    .shifted(-1)
                    .pow(base)
                    .map_err(|_| domain("harmonic mean speed is not differentiable at K = 0"))?;
                let db1 = 0.25 * (1.0 + x2 / (x1 * x1));
                let db2 = -0.25 / x1;
                Ok((e.value() * d * db1, e.value() * d * db2))
            }
            Family::GaussPower(e) => {
                let base = 0.25 * (x1 * x1 - x2);
                let d = e.shifted(-1).pow(base).map_err(|_| domain("K^alpha is not differentiable at K = 0"))?;
                Ok((e.value() * d * 0.5 * x1, -0.25 * e.value() * d))
            }
            Family::QuadraticHK { a, b } => Ok((2.0 * a * x1 + 0.5 * b * x1, -0.25 * b)),
            Family::NormASquared => Ok((x1, 0.5)),
            Family::Custom(_) => self.grad_fd(p),
        }
    }

    /// Central-difference gradient (one-sided in x₂ next to the boundary x₂ = 0).
    fn grad_fd(&self, p: EvalPoint) -> Result<(f64, f64)> {
        let (x1, x2) = (p.x1, p.x2);
        let h1 = 1e-6 * x1.abs().max(1.0);
        let h2 = 1e-6 * x2.abs().max(1.0);
        let g1 = (self.eval_xy(x1 + h1, x2)? - self.eval_xy(x1 - h1, x2)?) / (2.0 * h1);
        let g2 = if x2 >= h2 {
            (self.eval_xy(x1, x2 + h2)? - self.eval_xy(x1, x2 - h2)?) / (2.0 * h2)
        } else {
            let f0 = self.eval_xy(x1, x2)?;
            let f1 = self.eval_xy(x1, x2 + h2)?;
            let f2 = self.eval_xy(x1, x2 + 2.0 * h2)?;
            (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h2)
        };
        Ok((g1, g2))
    }

    /// (1/Ψ₁, Ψ₂/Ψ₁), with the removable singularities of the harmonic and
    /// Gauss families at K = 0 cancelled in closed form.
    pub fn inverse_slope(&self, p: EvalPoint) -> Result<(f64, f64)> {
        let (x1, x2) = (p.x1, p.x2);
        match &self.family {
            Family::HarmonicMeanPower(e) => {
                if x1 == 0.0 {
                    return Err(domain("harmonic mean speed needs H != 0"));
                }
                let base = (x1 * x1 - x2) / (4.0 * x1);
                let db1 = 0.25 * (1.0 + x2 / (x1 * x1));
                let inv = Exponent::from_f64(1.0 - e.value()).pow(base)? / (e.value() * db1);
                Ok((inv, -x1 / (x1 * x1 + x2)))
            }
            Family::GaussPower(e) => {
                if x1 == 0.0 {
                    return Err(domain("dPsi/dx1 vanishes at H = 0"));
                }
                let base = 0.25 * (x1 * x1 - x2);
                let inv = Exponent::from_f64(1.0 - e.value()).pow(base)? * 2.0 / (e.value() * x1);
                Ok((inv, -0.5 / x1))
            }
            _ => {
                let (g1, g2) = self.grad(p)?;
                if g1 == 0.0 {
                    return Err(domain("dPsi/dx1 vanishes"));
                }
                Ok((1.0 / g1, g2 / g1))
            }
        }
    }

    /// Ψ(a·x₁, a²·x₂) − a^β·Ψ(x₁, x₂).
    pub fn homogeneity_residual(&self, p: EvalPoint, a: f64) -> Result<f64> {
        if !(a > 0.0) {
            return Err(arg("scale factor must be positive"));
        }
        let beta = self.beta.ok_or_else(|| arg("speed function is not homogeneous"))?;
        let scaled = self.eval(EvalPoint::new(a * p.x1, a * a * p.x2)?)?;
        Ok(scaled - a.powf(beta) * self.eval(p)?)
    }

    /// Ψ₁² − 4x₂Ψ₂², whose sign decides (weak) parabolicity.
    pub fn parabolicity_indicator(&self, p: EvalPoint) -> Result<f64> {
        let (g1, g2) = self.grad(p)?;
        Ok(g1 * g1 - 4.0 * p.x2 * g2 * g2)
    }
}

/// The JSON form `{"family", "params", "beta", "lambda"}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct SpeedSpec {
    family: String,
    #[serde(default)]
    params: Map<String, Value>,
    #[serde(default)]
    beta: Option<f64>,
    lambda: f64,
}

fn num(params: &Map<String, Value>, key: &str) -> Result<Option<f64>> {
    match params.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v.as_f64().map(Some).ok_or_else(|| Error::Parse(format!("param '{key}' must be a number"))),
    }
}

fn exponent_param(params: &Map<String, Value>, key: &str, fallback: Option<f64>) -> Result<Exponent> {
    if let (Some(m), Some(n)) = (num(params, "m")?, num(params, "n")?) {
        if m.fract() != 0.0 || n.fract() != 0.0 || m < 1.0 || n < 1.0 {
            return Err(Error::Parse("m and n must be positive integers".into()));
        }
        return Exponent::odd_ratio(m as u32, n as u32);
    }
    num(params, key)?
        .or(fallback)
        .map(Exponent::from_f64)
        .ok_or_else(|| Error::Parse(format!("missing param '{key}' (or 'm' and 'n')")))
}

impl TryFrom<SpeedSpec> for SpeedFunction {
    type Error = Error;

    fn try_from(spec: SpeedSpec) -> Result<Self> {
        let p = &spec.params;
        let family = match spec.family.as_str() {
            "mean-curvature" => Family::MeanCurvature,
            "power-mean" => Family::PowerMean(exponent_param(p, "beta", spec.beta)?),
            "harmonic-mean-power" => Family::HarmonicMeanPower(exponent_param(p, "alpha", None)?),
            "gauss-power" => Family::GaussPower(exponent_param(p, "alpha", None)?),
            "quadratic-hk" => Family::QuadraticHK {
                a: num(p, "a")?.ok_or_else(|| Error::Parse("missing param 'a'".into()))?,
                b: num(p, "b")?.ok_or_else(|| Error::Parse("missing param 'b'".into()))?,
            },
            "norm-a-squared" => Family::NormASquared,
            "custom" => {
                let terms =
                    p.get("terms").cloned().ok_or_else(|| Error::Parse("custom speed needs params.terms".into()))?;
                let terms: Vec<TermSpec> =
                    serde_json::from_value(terms).map_err(|e| Error::Parse(format!("custom terms: {e}")))?;
                Family::Custom(CustomSpeed {
                    terms: terms
                        .into_iter()
                        .map(|t| CustomTerm {
                            coeff: t.coeff,
                            power: Exponent::from_f64(t.power),
                            monomials: t.monomials,
                        })
                        .collect(),
                })
            }
            other => return Err(Error::Parse(format!("unknown family '{other}'"))),
        };
        if !spec.lambda.is_finite() {
            return Err(Error::Parse("lambda must be finite".into()));
        }
        let f = SpeedFunction::new(family, spec.lambda);
        match (spec.beta, f.beta) {
            (Some(given), Some(actual)) if (given - actual).abs() > 1e-12 * actual.abs().max(1.0) => {
                Err(Error::Parse(format!("beta = {given} does not match the family's homogeneity degree {actual}")))
            }
            (Some(given), None) => {
                Err(Error::Parse(format!("beta = {given} given for a speed that is not homogeneous")))
            }
            _ => Ok(f),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TermSpec {
    coeff: f64,
    #[serde(default = "one")]
    power: f64,
    monomials: Vec<Monomial>,
}

fn one() -> f64 {
    1.0
}

impl From<&SpeedFunction> for SpeedSpec {
    fn from(f: &SpeedFunction) -> Self {
        let mut params = Map::new();
        let mut put = |k: &str, v: f64| {
            params.insert(k.to_string(), Value::from(v));
        };
        match &f.family {
            Family::MeanCurvature | Family::NormASquared => {}
            Family::PowerMean(e) => put("beta", e.value()),
            Family::HarmonicMeanPower(e) | Family::GaussPower(e) => put("alpha", e.value()),
            Family::QuadraticHK { a, b } => {
                put("a", *a);
                put("b", *b);
            }
            Family::Custom(c) => {
                let terms: Vec<TermSpec> = c
                    .terms
                    .iter()
                    .map(|t| TermSpec { coeff: t.coeff, power: t.power.value(), monomials: t.monomials.clone() })
                    .collect();
                params.insert("terms".into(), serde_json::to_value(terms).expect("terms serialize"));
            }
        }
        SpeedSpec { family: f.family.name().to_string(), params, beta: f.beta, lambda: f.lambda }
    }
}

impl Serialize for SpeedFunction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SpeedSpec::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for SpeedFunction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let spec = SpeedSpec::deserialize(d)?;
        SpeedFunction::try_from(spec).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(x1: f64, x2: f64) -> EvalPoint {
        EvalPoint::new(x1, x2).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn eval_examples() {
        assert_eq!(SpeedFunction::mean_curvature(1.0).eval(pt(2.0, 0.0)).unwrap(), 2.0);
        // |A|^2 = k1^2 + k2^2 with k1 = k2 = 1.
        assert_eq!(SpeedFunction::norm_a_squared(1.0).eval(pt(2.0, 0.0)).unwrap(), 2.0);
        // K = (x1^2 - x2)/4 = 1.
        assert_eq!(SpeedFunction::gauss_power(1.0, 1.0).eval(pt(2.0, 0.0)).unwrap(), 1.0);
    }

    #[test]
    fn grad_examples() {
        let g = SpeedFunction::mean_curvature(1.0).grad(pt(-3.0, 5.0)).unwrap();
        assert_eq!(g, (1.0, 0.0));
        let q = SpeedFunction::quadratic_hk(1.0, -2.0, 1.0);
        let (g1, g2) = q.grad(pt(1.7, 0.4)).unwrap();
        assert!(close(g1, 1.7, 1e-15) && close(g2, 0.5, 1e-15));
        let g = SpeedFunction::gauss_power(1.0, 1.0).grad(pt(2.0, 0.0)).unwrap();
        assert_eq!(g, (1.0, -0.25));
    }

    #[test]
    fn homogeneity_examples() {
        let r = SpeedFunction::mean_curvature(1.0).homogeneity_residual(pt(2.0, 0.0), 3.0);
        assert_eq!(r.unwrap(), 0.0);
        let r = SpeedFunction::norm_a_squared(1.0).homogeneity_residual(pt(1.0, 1.0), 2.0);
        assert_eq!(r.unwrap(), 0.0);
        let r = SpeedFunction::gauss_power(0.5, 1.0).homogeneity_residual(pt(2.0, 0.0), 4.0);
        assert!(r.unwrap().abs() < 1e-14);
        assert!(SpeedFunction::mean_curvature(1.0).homogeneity_residual(pt(1.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn parabolicity_examples() {
        // x2 = 0: indicator is Psi_1^2.
        let f = SpeedFunction::gauss_power(0.2, 1.0);
        let p = pt(1.5, 0.0);
        let (g1, _) = f.grad(p).unwrap();
        assert!(close(f.parabolicity_indicator(p).unwrap(), g1 * g1, 1e-14));
        // |A|^2: indicator = x1^2 - x2 = 4K.
        let f = SpeedFunction::norm_a_squared(1.0);
        for (h, k) in [(1.0, 0.2), (2.0, -0.5), (0.5, 0.0)] {
            let p = pt(h, h * h - 4.0 * k);
            assert!(close(f.parabolicity_indicator(p).unwrap(), 4.0 * k, 1e-14));
        }
        // aH^2 + bK changes sign at K = -2a(2a+b)H^2/b^2.
        let (a, b) = (1.0, 3.0);
        let f = SpeedFunction::quadratic_hk(a, b, 1.0);
        let h = 1.3;
        let k_star = -2.0 * a * (2.0 * a + b) * h * h / (b * b);
        let above = f.parabolicity_indicator(pt(h, h * h - 4.0 * (k_star + 1e-3))).unwrap();
        let below = f.parabolicity_indicator(pt(h, h * h - 4.0 * (k_star - 1e-3))).unwrap();
        assert!(above > 0.0 && below < 0.0);
    }

    #[test]
    fn principal_examples() {
        assert_eq!(SpeedFunction::mean_curvature(1.0).from_principal(1.0, 1.0).unwrap(), 2.0);
        let k = SpeedFunction::gauss_power(1.0, 1.0).from_principal(0.5, 0.5).unwrap();
        assert!(close(k, 0.25, 1e-15));
        let h = SpeedFunction::harmonic_mean_power(1.0, 1.0).from_principal(1.0, 1.0).unwrap();
        assert!(close(h, 0.5, 1e-15));
    }

    #[test]
    fn domain_errors() {
        let h = SpeedFunction::harmonic_mean_power(1.0, 1.0);
        assert!(matches!(h.eval(pt(0.0, 0.0)), Err(Error::Domain(_))));
        assert!(matches!(h.grad(pt(0.0, 0.0)), Err(Error::Domain(_))));
        // Irrational exponent, K < 0.
        let g = SpeedFunction::gauss_power(std::f64::consts::FRAC_1_PI, 1.0);
        assert!(matches!(g.eval(pt(1.0, 3.0)), Err(Error::Domain(_))));
        // Even denominator 1/10, K < 0.
        let g = SpeedFunction::gauss_power(0.1, 1.0);
        assert!(g.eval(pt(1.0, 3.0)).is_err());
        assert!(EvalPoint::new(1.0, -1e-6).is_err());
    }

    #[test]
    fn odd_root_convention() {
        // K^{1/5} with K = -1/32 -> -1/2.
        let g = SpeedFunction::gauss_power(0.2, 1.0);
        let v = g.eval(pt(0.0, 0.125)).unwrap();
        assert!(close(v, -0.5, 1e-15));
        // (K/H)^{2/3} is even in its base.
        let e = Exponent::odd_ratio(2, 2).unwrap();
        assert!(close(e.pow(-8.0).unwrap(), 4.0, 1e-15));
        let e = Exponent::odd_ratio(1, 2).unwrap();
        assert!(close(e.pow(-8.0).unwrap(), -2.0, 1e-15));
    }

    #[test]
    fn x2_clamp() {
        let p = EvalPoint::new(1.0, -5e-13).unwrap();
        assert_eq!(p.x2(), 0.0);
    }

    #[test]
    fn fraction_recognition() {
        assert_eq!(Exponent::from_f64(0.2).as_fraction(), Some((1, 5)));
        assert_eq!(Exponent::from_f64(1.0 / 3.0).as_fraction(), Some((1, 3)));
        assert_eq!(Exponent::from_f64(-2.5).as_fraction(), Some((-5, 2)));
        assert_eq!(Exponent::from_f64(std::f64::consts::SQRT_2).as_fraction(), None);
        let r = Exponent::odd_ratio(3, 2).unwrap();
        assert_eq!(r.as_fraction(), Some((1, 1)));
        assert_eq!(Exponent::from_f64(3.0).recip().unwrap().as_fraction(), Some((1, 3)));
    }

    #[test]
    fn harmonic_inverse_slope_is_finite_at_k_zero() {
        // K = 0 means x2 = x1^2; Psi_1 blows up for alpha < 1 but 1/Psi_1 -> 0.
        let f = SpeedFunction::harmonic_mean_power(1.0 / 3.0, 1.0);
        let (inv, ratio) = f.inverse_slope(pt(2.0, 4.0)).unwrap();
        assert_eq!(inv, 0.0);
        assert!(close(ratio, -2.0 / 8.0, 1e-15));
        // Away from K = 0 it matches the gradient.
        let p = pt(2.0, 1.0);
        let (g1, g2) = f.grad(p).unwrap();
        let (inv, ratio) = f.inverse_slope(p).unwrap();
        assert!(close(inv, 1.0 / g1, 1e-12) && close(ratio, g2 / g1, 1e-12));
        let f = SpeedFunction::gauss_power(0.2, 1.0);
        let (g1, g2) = f.grad(p).unwrap();
        let (inv, ratio) = f.inverse_slope(p).unwrap();
        assert!(close(inv, 1.0 / g1, 1e-12) && close(ratio, g2 / g1, 1e-12));
    }

    #[test]
    fn custom_paper_example_iii() {
        // W = H^{2/3} + b K^{1/3} written in the custom grammar.
        let b = 1.5;
        let custom = CustomSpeed {
            terms: vec![
                CustomTerm {
                    coeff: 1.0,
                    power: Exponent::odd_ratio(2, 2).unwrap(),
                    monomials: vec![Monomial { coeff: 1.0, p: 1, q: 0 }],
                },
                CustomTerm {
                    coeff: b,
                    power: Exponent::odd_ratio(1, 2).unwrap(),
                    monomials: vec![Monomial { coeff: 0.25, p: 2, q: 0 }, Monomial { coeff: -0.25, p: 0, q: 1 }],
                },
            ],
        };
        assert_eq!(custom.infer_beta(), Some(2.0 / 3.0));
        let f = SpeedFunction::custom(custom, 1.0);
        let (k1, k2): (f64, f64) = (0.7, -0.3);
        // K = k1 k2 < 0 here, so K^{1/3} is the negative real cube root.
        let w = (k1 + k2).powf(2.0 / 3.0) - b * (-(k1 * k2)).powf(1.0 / 3.0);
        assert!(close(f.from_principal(k1, k2).unwrap(), w, 1e-14));
    }

    #[test]
    fn custom_non_homogeneous_has_no_beta() {
        let custom = CustomSpeed {
            terms: vec![CustomTerm {
                coeff: 1.0,
                power: Exponent::from_f64(1.0),
                monomials: vec![Monomial { coeff: 1.0, p: 1, q: 0 }, Monomial { coeff: 1.0, p: 0, q: 0 }],
            }],
        };
        assert_eq!(custom.infer_beta(), None);
    }

    #[test]
    fn json_round_trip() {
        let cases = vec![
            SpeedFunction::mean_curvature(1.0),
            SpeedFunction::power_mean(1.0 / 3.0, 2.0),
            SpeedFunction::harmonic_mean_ratio(3, 2, 0.5).unwrap(),
            SpeedFunction::gauss_power(0.2, 1.0),
            SpeedFunction::quadratic_hk(1.0, 1.0, 1.0),
            SpeedFunction::norm_a_squared(0.25),
        ];
        for f in cases {
            let s = serde_json::to_string(&f).unwrap();
            let back: SpeedFunction = serde_json::from_str(&s).unwrap();
            assert_eq!(back, f, "{s}");
        }
    }

    #[test]
    fn json_schema_examples() {
        let f: SpeedFunction =
            serde_json::from_str(r#"{"family":"gauss-power","params":{"m":1,"n":3},"lambda":1}"#).unwrap();
        assert_eq!(f.beta(), Some(0.4));
        let bad =
            serde_json::from_str::<SpeedFunction>(r#"{"family":"mean-curvature","params":{},"beta":2,"lambda":1}"#);
        assert!(bad.is_err());
        assert!(serde_json::from_str::<SpeedFunction>(r#"{"family":"nope","lambda":1}"#).is_err());
        let custom: SpeedFunction = serde_json::from_str(
            r#"{"family":"custom","params":{"terms":[{"coeff":2,"monomials":[{"coeff":1,"p":2,"q":0}]}]},"lambda":1}"#,
        )
        .unwrap();
        assert_eq!(custom.beta(), Some(2.0));
        assert_eq!(custom.eval(pt(3.0, 0.0)).unwrap(), 18.0);
    }

    fn builtins() -> Vec<SpeedFunction> {
        vec![
            SpeedFunction::mean_curvature(1.0),
            SpeedFunction::power_mean(2.0, 1.0),
            SpeedFunction::power_mean(1.0 / 3.0, 1.0),
            SpeedFunction::harmonic_mean_power(1.0, 1.0),
            SpeedFunction::harmonic_mean_ratio(1, 2, 1.0).unwrap(),
            SpeedFunction::gauss_power(0.2, 1.0),
            SpeedFunction::gauss_power(1.0, 1.0),
            SpeedFunction::quadratic_hk(1.0, 1.0, 1.0),
            SpeedFunction::norm_a_squared(1.0),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn homogeneity_holds(k1 in 0.1f64..3.0, k2 in 0.1f64..3.0, a in 0.1f64..10.0) {
            for f in builtins() {
                let p = EvalPoint::from_principal(k1, k2).unwrap();
                let psi = f.eval(p).unwrap();
                let r = f.homogeneity_residual(p, a).unwrap();
                let scale = a.powf(f.beta().unwrap()).max(1.0);
                prop_assert!(r.abs() <= 1e-10 * scale * (1.0 + psi.abs()), "{:?}: {r}", f.family());
            }
        }

        #[test]
        fn grad_matches_central_differences(k1 in 0.2f64..3.0, dk in 0.05f64..1.0) {
            let k2 = k1 + dk;
            let (x1, x2) = (k1 + k2, dk * dk);
            let h = 1e-5;
            for f in builtins() {
                let (g1, g2) = f.grad(pt(x1, x2)).unwrap();
                let fd1 = (f.eval_xy(x1 + h, x2).unwrap() - f.eval_xy(x1 - h, x2).unwrap()) / (2.0 * h);
                let fd2 = (f.eval_xy(x1, x2 + h).unwrap() - f.eval_xy(x1, x2 - h).unwrap()) / (2.0 * h);
                let s = 1.0 + g1.abs().max(g2.abs());
                prop_assert!((g1 - fd1).abs() <= 1e-6 * s, "{:?}: {g1} vs {fd1}", f.family());
                prop_assert!((g2 - fd2).abs() <= 1e-6 * s, "{:?}: {g2} vs {fd2}", f.family());
            }
        }

        #[test]
        fn principal_symmetry_and_umbilic(k1 in 0.1f64..3.0, k2 in 0.1f64..3.0) {
            for f in builtins() {
                prop_assert_eq!(f.from_principal(k1, k2).unwrap(), f.from_principal(k2, k1).unwrap());
                prop_assert_eq!(f.from_principal(k1, k1).unwrap(), f.eval(pt(2.0 * k1, 0.0)).unwrap());
            }
        }
    }
}
