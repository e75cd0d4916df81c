//! Stored-energy models `E(ν, μ)`, the dual density `E⋆(t, σ) = t E(1/t, σ/t)`,
//! the implicit maps `ϖ` and `ψ`, and the hypothesis checker.

use std::f64::consts::PI;
use std::fmt::Debug;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::area_a;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid parameter {name}: {constraint}")]
    InvalidParameter { name: &'static str, constraint: String },
    #[error("no root of E*_1(t, {sigma}) = {gamma} after bracket expansion")]
    NoRoot { sigma: f64, gamma: f64 },
    #[error("model degeneracy: {0}")]
    Degenerate(String),
}

/// Growth exponents `r`, `s`, `p` of a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Exponents {
    pub r: f64,
    pub s: f64,
    pub p: f64,
}

pub trait EnergyModel: Debug + Send + Sync {
    fn eval(&self, nu: f64, mu: f64) -> f64;
    /// `(E₁, E₂)`.
    fn grad(&self, nu: f64, mu: f64) -> (f64, f64);
    /// `(E₁₁, E₁₂, E₂₂)`.
    fn hess(&self, nu: f64, mu: f64) -> (f64, f64, f64);
    fn exponents(&self) -> Exponents;

    fn smoothness(&self) -> u32 {
        2
    }

    fn family(&self) -> &'static str;

    /// Constants for the inequality hypotheses, when the model knows them.
    fn growth_constants(&self) -> GrowthConstants {
        GrowthConstants::default()
    }

    /// Model-specific sufficient conditions, evaluated at a wave speed.
    fn closed_form_checks(&self, _c2: f64, _g: f64, _mu_star: f64) -> Vec<HypothesisCheck> {
        Vec::new()
    }

    fn e22_rest(&self) -> f64 {
        self.hess(1.0, 0.0).2
    }

    /// Upper end of a closed-form admissible wave-speed interval, if known.
    fn closed_form_c2_max(&self, _g: f64) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IllustrativeParams {
    pub a: f64,
    pub b: f64,
    pub beta: f64,
    pub d: f64,
    pub r: f64,
    pub s: f64,
    pub p: f64,
    pub alpha: f64,
    pub delta: f64,
}

/// `E = (a/s)ν^{-s} + (a/r)ν^r + b|μ|^p + βμ² + d|μ|^α ν^{-δ} − a(s+r)/(sr)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IllustrativeEnergy {
    pub params: IllustrativeParams,
}

impl IllustrativeEnergy {
    pub fn new(params: IllustrativeParams) -> Result<Self, EnergyError> {
        let IllustrativeParams { a, b, beta, d, r, s, p, alpha, delta } = params;
        let positive = [("a", a), ("b", b), ("beta", beta), ("d", d), ("s", s), ("delta", delta)];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(EnergyError::InvalidParameter {
                    name,
                    constraint: format!("must be positive and finite, got {v}"),
                });
            }
        }
        if !(r > 1.0) || !r.is_finite() {
            return Err(EnergyError::InvalidParameter { name: "r", constraint: format!("r > 1 required, got {r}") });
        }
        if !(p > 2.0) || !p.is_finite() {
            return Err(EnergyError::InvalidParameter { name: "p", constraint: format!("p > 2 required, got {p}") });
        }
        if !(alpha >= 2.0) || !alpha.is_finite() {
            return Err(EnergyError::InvalidParameter {
                name: "alpha",
                constraint: format!("alpha >= 2 required, got {alpha}"),
            });
        }
        Ok(Self { params })
    }

    /// `β₀ = β` for `α > 2`, `β + d` for `α = 2`.
    pub fn beta0(&self) -> f64 {
        let p = &self.params;
        if p.alpha == 2.0 {
            p.beta + p.d
        } else {
            p.beta
        }
    }

    fn rest_constant(&self) -> f64 {
        let p = &self.params;
        p.a * (p.s + p.r) / (p.s * p.r)
    }
}

/// `|x|^e` with `0^0 = 1`.
#[inline]
fn apow(x: f64, e: f64) -> f64 {
    x.abs().powf(e)
}

impl EnergyModel for IllustrativeEnergy {
    fn eval(&self, nu: f64, mu: f64) -> f64 {
        let IllustrativeParams { a, b, beta, d, r, s, p, alpha, delta } = self.params;
        let ln = nu.ln();
        (a / s) * (-s * ln).exp_m1() + (a / r) * (r * ln).exp_m1() + b * apow(mu, p) + beta * mu * mu
            + d * apow(mu, alpha) * nu.powf(-delta)
    }

    fn grad(&self, nu: f64, mu: f64) -> (f64, f64) {
        let IllustrativeParams { a, b, beta, d, r, s, p, alpha, delta } = self.params;
        let sg = mu.signum() * (mu != 0.0) as i32 as f64;
        let e1 = -a * nu.powf(-s - 1.0) + a * nu.powf(r - 1.0) - d * delta * apow(mu, alpha) * nu.powf(-delta - 1.0);
        let e2 = b * p * apow(mu, p - 1.0) * sg
            + 2.0 * beta * mu
            + d * alpha * apow(mu, alpha - 1.0) * sg * nu.powf(-delta);
        (e1, e2)
    }

    fn hess(&self, nu: f64, mu: f64) -> (f64, f64, f64) {
        let IllustrativeParams { a, b, beta, d, r, s, p, alpha, delta } = self.params;
        let sg = mu.signum() * (mu != 0.0) as i32 as f64;
        let e11 = a * (s + 1.0) * nu.powf(-s - 2.0)
            + a * (r - 1.0) * nu.powf(r - 2.0)
            + d * delta * (delta + 1.0) * apow(mu, alpha) * nu.powf(-delta - 2.0);
        let e12 = -d * alpha * delta * apow(mu, alpha - 1.0) * sg * nu.powf(-delta - 1.0);
        let e22 = b * p * (p - 1.0) * apow(mu, p - 2.0)
            + 2.0 * beta
            + d * alpha * (alpha - 1.0) * apow(mu, alpha - 2.0) * nu.powf(-delta);
        (e11, e12, e22)
    }

    fn exponents(&self) -> Exponents {
        Exponents { r: self.params.r, s: self.params.s, p: self.params.p }
    }

    fn family(&self) -> &'static str {
        "illustrative"
    }

    /// `2a/r − g(1 + 2π)`.
    fn closed_form_c2_max(&self, g: f64) -> Option<f64> {
        Some(2.0 * self.params.a / self.params.r - g * (1.0 + 2.0 * PI))
    }

    fn growth_constants(&self) -> GrowthConstants {
        let IllustrativeParams { a, b, d, s, p, alpha, delta, beta, .. } = self.params;
        GrowthConstants {
            k0: Some((a / s).min(a / self.params.r).min(b)),
            k0_prime: Some(self.rest_constant()),
            k1: Some(2.0 * a + d * delta),
            k2: Some(b * p + 2.0 * beta + d * alpha),
            k3: Some(b * p),
            k3_exponent_gap: 1e-2,
            nu_bar: 1.0,
            mu_bar: 1.0,
            k_gamma: None,
        }
    }

    fn closed_form_checks(&self, c2: f64, g: f64, mu_star: f64) -> Vec<HypothesisCheck> {
        let IllustrativeParams { a, b, d, r, s, p, alpha, delta, .. } = self.params;
        let mut out = Vec::new();

        let det_mixed = alpha * delta * (alpha - 1.0 - delta);
        out.push(HypothesisCheck::new(
            "ill_ex_1",
            "alpha > delta + 1 (mixed term jointly convex)",
            if alpha > delta + 1.0 {
                Status::pass()
            } else {
                Status::fail(
                    Witness::Point { nu: 1.0, mu: 1.0 },
                    format!("mixed-term Hessian determinant ∝ {det_mixed:e} ≤ 0 at (1, 1)"),
                )
            },
            Some(alpha - delta - 1.0),
        ));

        let thr = g + 2.0 * self.beta0();
        out.push(HypothesisCheck::new(
            "ill_ex_2",
            "c2 > g + 2 beta0",
            if c2 > thr {
                Status::pass()
            } else {
                Status::fail(Witness::Point { nu: 1.0, mu: 0.0 }, format!("c2 = {c2} ≤ {thr}"))
            },
            Some(c2 - thr),
        ));

        let rest = self.rest_constant();
        let conds_ok = r >= 4.0 && a / r >= g / 2.0 + g * PI + c2 / 2.0 && b > rest;
        // witness from the sufficient inequality E(ν,μ*) ≥ (g/2)ν⁴ + gπν³ + (c²/2)ν²
        let mut worst = (f64::INFINITY, 1.0);
        let mut first_fail = None;
        for k in 0..400 {
            let nu = 10f64.powf(4.0 * k as f64 / 399.0);
            let gap = self.eval(nu, mu_star) - (g / 2.0 * nu.powi(4) + g * PI * nu.powi(3) + c2 / 2.0 * nu * nu);
            if gap < worst.0 {
                worst = (gap, nu);
            }
            if gap < 0.0 && first_fail.is_none() {
                first_fail = Some(nu);
            }
        }
        let status = if conds_ok {
            Status::pass()
        } else {
            let nu = first_fail.unwrap_or(worst.1);
            let mut why = Vec::new();
            if r < 4.0 {
                why.push(format!("r = {r} < 4"));
            }
            if a / r < g / 2.0 + g * PI + c2 / 2.0 {
                why.push(format!("a/r = {} < g/2 + g pi + c2/2 = {}", a / r, g / 2.0 + g * PI + c2 / 2.0));
            }
            if b <= rest {
                why.push(format!("b = {b} ≤ a(s+r)/(sr) = {rest}"));
            }
            Status::fail(
                Witness::Nu { nu },
                format!("{}; sufficient inequality gap {:e} at nu = {nu}", why.join(", "), worst.0.min(0.0)),
            )
        };
        out.push(HypothesisCheck::new(
            "ill_ex_3",
            "r >= 4, a/r >= g/2 + g pi + c2/2, b > a(s+r)/(sr)",
            status,
            Some(worst.0),
        ));

        let bound = p * (s + 1.0) / (p + s + 1.0);
        let status = if alpha <= bound {
            Status::pass()
        } else {
            // where the mixed term dominates the pure terms the most
            let mut best = (0.0, 1.0, 1.0);
            for i in 0..61 {
                let nu = 10f64.powf(-3.0 + 3.0 * i as f64 / 60.0);
                for j in 0..61 {
                    let mu = 10f64.powf(3.0 * j as f64 / 60.0);
                    let ratio = d * mu.powf(alpha) * nu.powf(-delta - 1.0) / (nu.powf(-s - 1.0) + mu.powf(p));
                    if ratio > best.0 {
                        best = (ratio, nu, mu);
                    }
                }
            }
            Status::fail(
                Witness::Point { nu: best.1, mu: best.2 },
                format!("alpha = {alpha} > p(s+1)/(p+s+1) = {bound}; mixed/pure ratio {:e}", best.0),
            )
        };
        out.push(HypothesisCheck::new("ill_ex_4", "alpha <= p(s+1)/(p+s+1)", status, Some(bound - alpha)));
        out
    }
}

/// `E⋆(t, σ) = t E(1/t, σ/t)`.
pub fn estar<M: EnergyModel + ?Sized>(model: &M, t: f64, sigma: f64) -> Result<f64, EnergyError> {
    check_t(t)?;
    Ok(t * model.eval(1.0 / t, sigma / t))
}

fn check_t(t: f64) -> Result<(), EnergyError> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(EnergyError::Domain(format!("t must be positive, got {t}")))
    }
}

/// `(E⋆₁, E⋆₂) = (E − νE₁ − μE₂, E₂)` at `(ν, μ) = (1/t, σ/t)`.
pub fn estar_grad<M: EnergyModel + ?Sized>(model: &M, t: f64, sigma: f64) -> Result<(f64, f64), EnergyError> {
    check_t(t)?;
    Ok(estar_grad_unchecked(model, t, sigma))
}

#[inline]
fn estar_grad_unchecked<M: EnergyModel + ?Sized>(model: &M, t: f64, sigma: f64) -> (f64, f64) {
    let nu = 1.0 / t;
    let mu = sigma * nu;
    let e = model.eval(nu, mu);
    let (e1, e2) = model.grad(nu, mu);
    (e - nu * e1 - mu * e2, e2)
}

/// `(E⋆₁₁, E⋆₁₂, E⋆₂₂)`.
pub fn estar_hess<M: EnergyModel + ?Sized>(model: &M, t: f64, sigma: f64) -> Result<(f64, f64, f64), EnergyError> {
    check_t(t)?;
    Ok(estar_hess_unchecked(model, t, sigma))
}

#[inline]
fn estar_hess_unchecked<M: EnergyModel + ?Sized>(model: &M, t: f64, sigma: f64) -> (f64, f64, f64) {
    let nu = 1.0 / t;
    let mu = sigma * nu;
    let (e11, e12, e22) = model.hess(nu, mu);
    (
        nu * nu * nu * e11 + 2.0 * nu * nu * mu * e12 + nu * mu * mu * e22,
        -nu * (nu * e12 + mu * e22),
        nu * e22,
    )
}

const LN2: f64 = std::f64::consts::LN_2;

/// The unique `t > 0` with `E⋆₁(t, σ) = γ`.
pub fn varpi<M: EnergyModel + ?Sized>(model: &M, sigma: f64, gamma: f64) -> Result<f64, EnergyError> {
    varpi_from(model, sigma, gamma, 1.0)
}

/// [`varpi`] started from a warm guess.
pub fn varpi_from<M: EnergyModel + ?Sized>(
    model: &M,
    sigma: f64,
    gamma: f64,
    guess: f64,
) -> Result<f64, EnergyError> {
    let f = |u: f64| {
        let t = u.exp();
        let (g1, _) = estar_grad_unchecked(model, t, sigma);
        let (h11, _, _) = estar_hess_unchecked(model, t, sigma);
        (g1 - gamma, h11 * t)
    };
    let mut u = if guess > 0.0 && guess.is_finite() { guess.ln() } else { 0.0 };
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for _ in 0..100 {
        let (v, d) = f(u);
        if v == 0.0 {
            return Ok(u.exp());
        }
        if !v.is_finite() {
            break;
        }
        if v > 0.0 {
            hi = hi.min(u);
        } else {
            lo = lo.max(u);
        }
        let mut next = u - v / d;
        if !next.is_finite() || !(d > 0.0) {
            next = if v > 0.0 { u - 2.0 } else { u + 2.0 };
        }
        next = next.clamp(u - 2.0, u + 2.0);
        if lo.is_finite() && hi.is_finite() && !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - u).abs() <= 4.0 * f64::EPSILON * u.abs().max(1.0) {
            return Ok(next.exp());
        }
        if lo.is_finite() && hi.is_finite() && hi - lo <= 4.0 * f64::EPSILON * u.abs().max(1.0) {
            return Ok(next.exp());
        }
        u = next;
    }
    varpi_bracketed(model, sigma, gamma)
}

/// Bracketing fallback: `[1e-8, 1e8]` expanded geometrically, then bisection.
fn varpi_bracketed<M: EnergyModel + ?Sized>(model: &M, sigma: f64, gamma: f64) -> Result<f64, EnergyError> {
    let f = |u: f64| estar_grad_unchecked(model, u.exp(), sigma).0 - gamma;
    let mut lo = (1e-8f64).ln();
    let mut hi = (1e8f64).ln();
    let mut n = 0;
    while !(f(lo) < 0.0) {
        lo -= LN2;
        n += 1;
        if n > 200 {
            return Err(EnergyError::NoRoot { sigma, gamma });
        }
    }
    n = 0;
    while !(f(hi) > 0.0) {
        hi += LN2;
        n += 1;
        if n > 200 {
            return Err(EnergyError::NoRoot { sigma, gamma });
        }
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// `ψ(y) = E⋆₂(ϖ(y), y)`.
pub fn psi_map<M: EnergyModel + ?Sized>(model: &M, y: f64, gamma: f64) -> Result<f64, EnergyError> {
    let t = varpi(model, y, gamma)?;
    Ok(estar_grad_unchecked(model, t, y).1)
}

/// `ψ′(y) = (E⋆₁₁E⋆₂₂ − E⋆₁₂²)/E⋆₁₁` along the curve `t = ϖ(y)`.
pub fn psi_prime<M: EnergyModel + ?Sized>(model: &M, y: f64, gamma: f64) -> Result<f64, EnergyError> {
    let t = varpi(model, y, gamma)?;
    let (h11, h12, h22) = estar_hess_unchecked(model, t, y);
    Ok((h11 * h22 - h12 * h12) / h11)
}

/// Solves `ψ(y) = v`.
pub fn psi_inverse<M: EnergyModel + ?Sized>(model: &M, v: f64, gamma: f64) -> Result<f64, EnergyError> {
    let f = |y: f64| -> Result<(f64, f64), EnergyError> {
        let t = varpi(model, y, gamma)?;
        let (_, e2) = estar_grad_unchecked(model, t, y);
        let (h11, h12, h22) = estar_hess_unchecked(model, t, y);
        Ok((e2 - v, (h11 * h22 - h12 * h12) / h11))
    };
    let (mut lo, mut hi) = (-1.0, 1.0);
    let mut n = 0;
    while f(lo)?.0 > 0.0 {
        lo *= 2.0;
        n += 1;
        if n > 200 {
            return Err(EnergyError::Degenerate(format!("psi inverse bracket failed for v = {v}")));
        }
    }
    n = 0;
    while f(hi)?.0 < 0.0 {
        hi *= 2.0;
        n += 1;
        if n > 200 {
            return Err(EnergyError::Degenerate(format!("psi inverse bracket failed for v = {v}")));
        }
    }
    let mut y = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (r, d) = f(y)?;
        if r == 0.0 {
            return Ok(y);
        }
        if r > 0.0 {
            hi = y;
        } else {
            lo = y;
        }
        let mut next = y - r / d;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - y).abs() <= 4.0 * f64::EPSILON * y.abs().max(1.0) || hi - lo <= 4.0 * f64::EPSILON * y.abs().max(1.0) {
            return Ok(next);
        }
        y = next;
    }
    Ok(y)
}

/// Constants for the inequality hypotheses. `None` means not supplied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthConstants {
    pub k0: Option<f64>,
    pub k0_prime: Option<f64>,
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    pub k3: Option<f64>,
    /// `ε` in the exponent `s(p−1)/p − ε` of the lower bound on `|E₂|`.
    pub k3_exponent_gap: f64,
    pub nu_bar: f64,
    pub mu_bar: f64,
    /// `(K_γ, K′_γ)` for the level-set bound, applied to every sampled `γ`.
    pub k_gamma: Option<(f64, f64)>,
}

impl Default for GrowthConstants {
    fn default() -> Self {
        Self {
            k0: None,
            k0_prime: None,
            k1: None,
            k2: None,
            k3: None,
            k3_exponent_gap: 1e-2,
            nu_bar: 1.0,
            mu_bar: 1.0,
            k_gamma: None,
        }
    }
}

/// Sampling grids of the hypothesis checker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub nu_min: f64,
    pub nu_max: f64,
    pub n_nu: usize,
    /// Smallest sampled `|μ|`; `|μ|` below `1e-8` is never sampled for
    /// second derivatives.
    pub mu_min: f64,
    pub mu_max: f64,
    pub n_mu: usize,
    /// Upper end of the `ν > 1` range for the wave-speed compatibility bound.
    pub nu_max_compat: f64,
    pub n_compat: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            nu_min: 1e-3,
            nu_max: 1e3,
            n_nu: 121,
            mu_min: 1e-3,
            mu_max: 1e3,
            n_mu: 61,
            nu_max_compat: 1e3,
            n_compat: 400,
        }
    }
}

impl GridSpec {
    pub fn nus(&self) -> Vec<f64> {
        log_grid(self.nu_min, self.nu_max, self.n_nu)
    }

    /// Symmetric grid: `±` log-spaced magnitudes.
    pub fn mus(&self) -> Vec<f64> {
        let mags = log_grid(self.mu_min.max(1e-8), self.mu_max, self.n_mu);
        mags.iter().rev().map(|m| -m).chain(mags.iter().copied()).collect()
    }
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n).map(|k| 10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Witness {
    Point { nu: f64, mu: f64 },
    Nu { nu: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Status {
    Pass {
        #[serde(skip_serializing_if = "Option::is_none")]
        note: Option<String>,
    },
    Fail { witness: Witness, detail: String },
    NotChecked { reason: String },
}

impl Status {
    pub fn pass() -> Self {
        Status::Pass { note: None }
    }

    pub fn pass_with(note: impl Into<String>) -> Self {
        Status::Pass { note: Some(note.into()) }
    }

    pub fn fail(witness: Witness, detail: impl Into<String>) -> Self {
        Status::Fail { witness, detail: detail.into() }
    }

    pub fn is_pass(&self) -> bool {
        matches!(self, Status::Pass { .. })
    }

    pub fn is_fail(&self) -> bool {
        matches!(self, Status::Fail { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisCheck {
    pub id: String,
    pub description: String,
    #[serde(flatten)]
    pub status: Status,
    /// Tightest margin or constant observed on the grid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tightest: Option<f64>,
}

impl HypothesisCheck {
    pub fn new(id: &str, description: &str, status: Status, tightest: Option<f64>) -> Self {
        Self { id: id.to_string(), description: description.to_string(), status, tightest }
    }
}

/// `(lo, hi]` for `c²`, with `empty` set when `hi ≤ lo`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct C2Interval {
    pub lo: f64,
    pub hi: f64,
    pub empty: bool,
    /// Where the infimum defining `hi` is attained on the refined grid.
    pub argmin_nu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub family: String,
    pub c2: f64,
    pub g: f64,
    pub mu_star: f64,
    pub e22_rest: f64,
    pub checks: Vec<HypothesisCheck>,
    /// Numeric compatibility interval from the infimum over `ν > 1`.
    pub compatibility: C2Interval,
    /// Certified interval: the compatibility interval intersected with the
    /// model's closed-form interval when it has one.
    pub admissible_c2: Option<(f64, f64)>,
}

impl HypothesisReport {
    pub fn get(&self, id: &str) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.id == id)
    }

    pub fn mandatory_ok(&self) -> bool {
        ["H2", "H3", "H4"].iter().all(|id| self.get(id).is_some_and(|c| c.status.is_pass()))
    }
}

/// Bracketed expression whose infimum over `ν > 1` bounds `c²` from above.
pub fn compatibility_bound<M: EnergyModel + ?Sized>(model: &M, g: f64, mu_star: f64, nu: f64) -> f64 {
    let a = area_a(nu).unwrap_or(f64::NAN);
    4.0 * PI * model.eval(nu, mu_star) / a - g * a / (2.0 * PI) - 2.0 * PI * g * (nu * nu - 1.0).sqrt()
}

/// `lo = g + E₂₂(1,0)`; `hi` = infimum of [`compatibility_bound`] on a log
/// grid `ν = 1 + 10^u` over `(1, nu_max]`, refined by golden section.
pub fn admissible_c2_interval<M: EnergyModel + ?Sized>(model: &M, g: f64, mu_star: f64, nu_max: f64) -> C2Interval {
    admissible_c2_interval_n(model, g, mu_star, nu_max, 400)
}

pub fn admissible_c2_interval_n<M: EnergyModel + ?Sized>(
    model: &M,
    g: f64,
    mu_star: f64,
    nu_max: f64,
    n: usize,
) -> C2Interval {
    let lo = g + model.e22_rest();
    let (u0, u1) = (-8.0, (nu_max - 1.0).log10());
    let f = |u: f64| compatibility_bound(model, g, mu_star, 1.0 + 10f64.powf(u));
    let us: Vec<f64> = (0..n).map(|k| u0 + (u1 - u0) * k as f64 / (n - 1) as f64).collect();
    let vals: Vec<f64> = us.iter().map(|&u| f(u)).collect();
    let (imin, &vmin) = vals
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap_or((0, &f64::NAN));
    let mut best = (vmin, us[imin]);
    if imin > 0 && imin + 1 < n {
        let (mut a, mut b) = (us[imin - 1], us[imin + 1]);
        let r = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - r * (b - a);
        let mut d = a + r * (b - a);
        let (mut fc, mut fd) = (f(c), f(d));
        for _ in 0..200 {
            if (b - a).abs() < 1e-14 {
                break;
            }
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - r * (b - a);
                fc = f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + r * (b - a);
                fd = f(d);
            }
        }
        for (v, u) in [(fc, c), (fd, d)] {
            if v < best.0 {
                best = (v, u);
            }
        }
    }
    let hi = best.0;
    C2Interval { lo, hi, empty: !(hi > lo), argmin_nu: 1.0 + 10f64.powf(best.1) }
}

fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Runs every sampled hypothesis check at the given wave speed.
pub fn check_hypotheses<M: EnergyModel + ?Sized>(
    model: &M,
    c2: f64,
    g: f64,
    mu_star: f64,
    grids: &GridSpec,
) -> Result<HypothesisReport, EnergyError> {
    if !(mu_star > 0.0 && mu_star < 1.0) {
        return Err(EnergyError::Domain(format!("mu_star must lie in (0, 1), got {mu_star}")));
    }
    let nus = grids.nus();
    let mus = grids.mus();
    let consts = model.growth_constants();
    let ex = model.exponents();
    let mut checks = Vec::new();

    // evenness
    let mut worst = (0.0, 1.0, 1.0);
    for &nu in &nus {
        for &mu in &mus {
            let gap = rel_gap(model.eval(nu, mu), model.eval(nu, -mu));
            if gap > worst.0 {
                worst = (gap, nu, mu);
            }
        }
    }
    checks.push(HypothesisCheck::new(
        "H2",
        "E(nu, mu) = E(nu, -mu)",
        if worst.0 <= 1e-12 {
            Status::pass()
        } else {
            Status::fail(Witness::Point { nu: worst.1, mu: worst.2 }, format!("relative gap {:e}", worst.0))
        },
        Some(worst.0),
    ));

    // rest state
    let e0 = model.eval(1.0, 0.0);
    let (g1, g2) = model.grad(1.0, 0.0);
    let mut min = (f64::INFINITY, 1.0, 0.0);
    for &nu in &nus {
        for &mu in mus.iter().chain(std::iter::once(&0.0)) {
            let e = model.eval(nu, mu);
            if e < min.0 {
                min = (e, nu, mu);
            }
        }
    }
    let status = if e0.abs() > 1e-12 || g1.abs() > 1e-12 || g2.abs() > 1e-12 {
        Status::fail(Witness::Point { nu: 1.0, mu: 0.0 }, format!("E(1,0) = {e0:e}, grad = ({g1:e}, {g2:e})"))
    } else if min.0 < -1e-12 {
        Status::fail(Witness::Point { nu: min.1, mu: min.2 }, format!("E = {:e} < 0", min.0))
    } else {
        Status::pass()
    };
    checks.push(HypothesisCheck::new("H3", "E >= 0 = E(1, 0), grad E(1, 0) = 0", status, Some(min.0)));

    // strict joint convexity
    let mut worst = (f64::INFINITY, 1.0, 1.0);
    for &nu in &nus {
        for &mu in &mus {
            let (h11, h12, h22) = model.hess(nu, mu);
            let det = h11 * h22 - h12 * h12;
            let scale = (h11 * h22).abs().max(h12 * h12).max(f64::MIN_POSITIVE);
            let m = (h11.signum() * h11.abs().min(1.0))
                .min(h22.signum() * h22.abs().min(1.0))
                .min(det / scale);
            if m < worst.0 {
                worst = (m, nu, mu);
            }
        }
    }
    checks.push(HypothesisCheck::new(
        "H4",
        "E11 > 0, E22 > 0, E11 E22 - E12^2 > 0",
        if worst.0 > 0.0 {
            Status::pass_with("sampled |mu| >= mu_min; p-power terms are not C3 at mu = 0")
        } else {
            Status::fail(Witness::Point { nu: worst.1, mu: worst.2 }, format!("minor margin {:e}", worst.0))
        },
        Some(worst.0),
    ));

    // growth
    checks.push(match (consts.k0, consts.k0_prime) {
        (Some(k0), Some(k0p)) => {
            let mut worst = (f64::INFINITY, 1.0, 1.0);
            for &nu in &nus {
                for &mu in &mus {
                    let rhs = k0 * (nu.powf(ex.r) + nu.powf(-ex.s) + mu.abs().powf(ex.p)) - k0p;
                    let e = model.eval(nu, mu);
                    let gap = (e - rhs) / e.abs().max(rhs.abs()).max(1.0);
                    if gap < worst.0 {
                        worst = (gap, nu, mu);
                    }
                }
            }
            HypothesisCheck::new(
                "H5",
                "E >= K0 (nu^r + nu^-s + |mu|^p) - K0'",
                if worst.0 >= -1e-12 {
                    Status::pass_with("verified on grid with supplied constants")
                } else {
                    Status::fail(Witness::Point { nu: worst.1, mu: worst.2 }, format!("relative gap {:e}", worst.0))
                },
                Some(worst.0),
            )
        }
        _ => HypothesisCheck::new(
            "H5",
            "E >= K0 (nu^r + nu^-s + |mu|^p) - K0'",
            Status::NotChecked { reason: "constants K0, K0' not supplied".into() },
            None,
        ),
    });

    let e22 = model.e22_rest();
    let thr = g + e22;
    checks.push(HypothesisCheck::new(
        "H6",
        "c2 > g + E22(1, 0)",
        if c2 > thr {
            Status::pass()
        } else {
            Status::fail(Witness::Point { nu: 1.0, mu: 0.0 }, format!("c2 = {c2} ≤ g + E22(1,0) = {thr}"))
        },
        Some(c2 - thr),
    ));

    // non-self-intersection condition at mu*
    let mut worst = (f64::INFINITY, 1.0);
    let u1 = (grids.nu_max_compat - 1.0).log10();
    for k in 0..grids.n_compat {
        let u = -8.0 + (u1 + 8.0) * k as f64 / (grids.n_compat - 1) as f64;
        let nu = 1.0 + 10f64.powf(u);
        let a = area_a(nu).unwrap_or(f64::NAN);
        let rhs = g / (8.0 * PI * PI) * a * a + c2 / (4.0 * PI) * a + g / 2.0 * a * (nu * nu - 1.0).sqrt();
        let e = model.eval(nu, mu_star);
        let gap = (e - rhs) / e.abs().max(rhs.abs()).max(1.0);
        if gap < worst.0 {
            worst = (gap, nu);
        }
    }
    checks.push(HypothesisCheck::new(
        "H7",
        "E(nu, mu*) >= (g/8pi^2) A^2 + (c2/4pi) A + (g/2) A sqrt(nu^2 - 1), nu in (1, nu_max]",
        if worst.0 >= 0.0 {
            Status::pass()
        } else {
            Status::fail(Witness::Nu { nu: worst.1 }, format!("relative gap {:e}", worst.0))
        },
        Some(worst.0),
    ));

    // bounded stretch: inf_mu (grad E . (nu, mu) - E) must grow with nu
    let mut trend = Vec::new();
    for &nu in nus.iter().filter(|&&nu| nu >= 1.0) {
        let inf = mus
            .iter()
            .chain(std::iter::once(&0.0))
            .map(|&mu| {
                let (e1, e2) = model.grad(nu, mu);
                e1 * nu + e2 * mu - model.eval(nu, mu)
            })
            .fold(f64::INFINITY, f64::min);
        trend.push((nu, inf));
    }
    let bad = trend.windows(2).find(|w| !(w[1].1 > w[0].1)).map(|w| w[1].0);
    checks.push(HypothesisCheck::new(
        "H8",
        "inf_mu (grad E . (nu, mu) - E) increases without bound as nu grows",
        match bad {
            None => Status::pass_with("monotone increase on the grid; the limit itself is not certified by sampling"),
            Some(nu) => Status::fail(Witness::Nu { nu }, "infimum fails to increase"),
        },
        trend.last().map(|t| t.1),
    ));

    let tail = |nu: f64, mu: f64| nu <= consts.nu_bar && mu.abs() >= consts.mu_bar;
    let inequality = |id: &str,
                      desc: &str,
                      k: Option<f64>,
                      ratio: &dyn Fn(f64, f64) -> f64,
                      upper: bool|
     -> HypothesisCheck {
        // ratio = |lhs| / rhs-without-constant
        let mut tight = (if upper { 0.0 } else { f64::INFINITY }, 1.0, 1.0);
        for &nu in &nus {
            for &mu in &mus {
                if !tail(nu, mu) {
                    continue;
                }
                let q = ratio(nu, mu);
                if (upper && q > tight.0) || (!upper && q < tight.0) {
                    tight = (q, nu, mu);
                }
            }
        }
        match k {
            None => HypothesisCheck::new(
                id,
                desc,
                Status::NotChecked { reason: format!("constant not supplied; tightest on grid {:e}", tight.0) },
                Some(tight.0),
            ),
            Some(k) => {
                let ok = if upper { tight.0 <= k * (1.0 + 1e-12) } else { tight.0 >= k * (1.0 - 1e-12) };
                HypothesisCheck::new(
                    id,
                    desc,
                    if ok {
                        Status::pass_with("verified on grid with supplied constants")
                    } else {
                        Status::fail(
                            Witness::Point { nu: tight.1, mu: tight.2 },
                            format!("tightest constant {:e} vs supplied {k:e}", tight.0),
                        )
                    },
                    Some(tight.0),
                )
            }
        }
    };

    checks.push(inequality(
        "H9",
        "|E1| <= K1 (nu^-(s+1) + |mu|^p) for small nu, large |mu|",
        consts.k1,
        &|nu, mu| model.grad(nu, mu).0.abs() / (nu.powf(-ex.s - 1.0) + mu.abs().powf(ex.p)),
        true,
    ));
    let e2_exp = ex.s * (ex.p - 1.0) / ex.p;
    checks.push(inequality(
        "H10",
        "|E2| <= K2 (nu^-(s(p-1)/p) + |mu|^(p-1)) for small nu, large |mu|",
        consts.k2,
        &|nu, mu| model.grad(nu, mu).1.abs() / (nu.powf(-e2_exp) + mu.abs().powf(ex.p - 1.0)),
        true,
    ));

    // level sets E - grad E . (nu, mu) = gamma, parametrized by sigma via t = varpi
    let mut lvl = (f64::INFINITY, f64::NEG_INFINITY, 1.0, 1.0);
    let mut lvl_witness = None;
    for &gamma in &[-1.0, 0.0, 1.0] {
        for &sigma in &mus {
            let t = match varpi(model, sigma, -gamma) {
                Ok(t) => t,
                Err(_) => continue,
            };
            let (nu, mu) = (1.0 / t, sigma / t);
            if !(nu <= consts.nu_bar || mu.abs() >= consts.mu_bar) {
                continue;
            }
            let q = mu.abs().powf(ex.p) * nu.powf(ex.s);
            if q < lvl.0 {
                lvl.0 = q;
                lvl.2 = nu;
                lvl.3 = mu;
            }
            lvl.1 = lvl.1.max(q);
            if let Some((k, kp)) = consts.k_gamma {
                if (q < k || q > kp) && lvl_witness.is_none() {
                    lvl_witness = Some((nu, mu, q));
                }
            }
        }
    }
    checks.push(HypothesisCheck::new(
        "H11",
        "K_gamma nu^-s <= |mu|^p <= K'_gamma nu^-s on level sets of E - grad E . (nu, mu)",
        match (consts.k_gamma, lvl_witness) {
            (None, _) => Status::NotChecked {
                reason: format!("constants not supplied; |mu|^p nu^s ranges over [{:e}, {:e}] on the grid", lvl.0, lvl.1),
            },
            (Some(_), None) => Status::pass_with("verified on grid with supplied constants"),
            (Some(_), Some((nu, mu, q))) => {
                Status::fail(Witness::Point { nu, mu }, format!("|mu|^p nu^s = {q:e} outside supplied bounds"))
            }
        },
        Some(lvl.0),
    ));

    let k3_exp = e2_exp - consts.k3_exponent_gap;
    checks.push(inequality(
        "H12",
        "|E2| >= K3 nu^(s(p-1)/p - eps) |mu|^(p-1) for small nu, large |mu|",
        consts.k3,
        &|nu, mu| model.grad(nu, mu).1.abs() / (nu.powf(k3_exp) * mu.abs().powf(ex.p - 1.0)),
        false,
    ));

    checks.extend(model.closed_form_checks(c2, g, mu_star));

    let compatibility = admissible_c2_interval_n(model, g, mu_star, grids.nu_max_compat, grids.n_compat);
    let closed_hi = model.closed_form_c2_max(g).unwrap_or(f64::INFINITY);
    let hi = compatibility.hi.min(closed_hi);
    let admissible_c2 = if hi > compatibility.lo { Some((compatibility.lo, hi)) } else { None };

    Ok(HypothesisReport {
        family: model.family().to_string(),
        c2,
        g,
        mu_star,
        e22_rest: e22,
        checks,
        compatibility,
        admissible_c2,
    })
}
