//! Certification of a state against the Euler–Lagrange system, the
//! pressure, the material law and the dynamic boundary condition.
//!
//! Everything here is recomputed from `(w, χ′)` and the model; none of it
//! calls the gradient code in [`crate::lagrangian`].

use serde::Serialize;

use crate::energy::EnergyModel;
use crate::geometry::Geometry;
use crate::lagrangian::{grad_i0, LagrangianError, WaveState};
use crate::spectral::{padded_mean, Field, SpectralError};

fn one_plus_cdw(geom: &Geometry) -> Field {
    geom.cdw.add_constant(1.0)
}

fn inv_omega2(geom: &Geometry) -> Result<Field, SpectralError> {
    let a = geom.cdw.padded_samples();
    let b = geom.dw.padded_samples();
    let vals: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 1.0 / ((1.0 + x).powi(2) + y * y)).collect();
    Field::from_padded_samples(&vals)
}

/// `L(u) = (w′u + (1 + Cw′)Cu)/Ω²`.
pub fn op_l(u: &Field, geom: &Geometry) -> Result<Field, SpectralError> {
    let num = &geom.dw.product(u)? + &one_plus_cdw(geom).product(&u.hilbert())?;
    num.product(&inv_omega2(geom)?)
}

/// `L⁻¹(v) = w′v − (1 + Cw′)Cv`.
pub fn op_l_inverse(v: &Field, geom: &Geometry) -> Result<Field, SpectralError> {
    Ok(&geom.dw.product(v)? - &one_plus_cdw(geom).product(&v.hilbert())?)
}

/// `L*(f) = w′f/Ω² − C((1 + Cw′)f/Ω²)`.
pub fn op_l_adjoint(f: &Field, geom: &Geometry) -> Result<Field, SpectralError> {
    let fo = f.product(&inv_omega2(geom)?)?;
    Ok(&geom.dw.product(&fo)? - &one_plus_cdw(geom).product(&fo)?.hilbert())
}

/// `(L⁻¹)*(f) = w′f + C((1 + Cw′)f)`; annihilates constants.
pub fn op_l_inverse_adjoint(f: &Field, geom: &Geometry) -> Result<Field, SpectralError> {
    Ok(&geom.dw.product(f)? + &one_plus_cdw(geom).product(f)?.hilbert())
}

fn sup(f: &Field) -> f64 {
    f.sup_norm()
}

/// Padded-grid samples of `(ν, μ, E, E₁, E₂)`.
type Densities = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>);

/// `(E, E₁, E₂)` at `(ν, μ) = (Ω/χ′, Ωσ/χ′)` on the padded grid.
fn densities<M: EnergyModel + ?Sized>(state: &WaveState, model: &M) -> Densities {
    let o = state.geom.omega.padded_samples();
    let s = state.geom.sigma.padded_samples();
    let n = o.len();
    let (mut nu, mut mu, mut e, mut e1, mut e2) =
        (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for j in 0..n {
        let v = o[j] / state.chi_pad[j];
        let m = v * s[j];
        let (a, b) = model.grad(v, m);
        nu.push(v);
        mu.push(m);
        e.push(model.eval(v, m));
        e1.push(a);
        e2.push(b);
    }
    (nu, mu, e, e1, e2)
}

fn stresses<M: EnergyModel + ?Sized>(state: &WaveState, model: &M) -> Result<(Field, Field), SpectralError> {
    let (_, _, _, e1, e2) = densities(state, model);
    Ok((Field::from_padded_samples(&e1)?, Field::from_padded_samples(&e2)?))
}

/// Mean and standard deviation of `E − νE₁ − μE₂` over the padded grid.
pub fn residual_euler_chi<M: EnergyModel + ?Sized>(state: &WaveState, model: &M) -> (f64, f64) {
    let (nu, mu, e, e1, e2) = densities(state, model);
    let vals: Vec<f64> = (0..nu.len()).map(|j| e[j] - nu[j] * e1[j] - mu[j] * e2[j]).collect();
    let mean = padded_mean(&vals);
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
    (var.sqrt(), mean)
}

/// Both forms of the Euler equation in `w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EulerW {
    /// `sup |∇I₀ − ga₀ − {L*(CT − Q)}′|`.
    pub adjoint_sup: f64,
    /// `sup |CE₂,₀ − const − ∫₀^τ (m₀ + Q − b₀)|`, constant fixed by mean matching.
    pub primitive_sup: f64,
}

pub fn residual_euler_w<M: EnergyModel + ?Sized>(state: &WaveState, model: &M) -> Result<EulerW, LagrangianError> {
    let geom = &state.geom;
    let (e1, e2) = stresses(state, model)?;
    let t = e2.derivative();
    let q = e1.product(&geom.omega)?;
    let gi = grad_i0(state.w(), state.c2, state.g)?;

    let adj = op_l_adjoint(&(&t.hilbert() - &q), geom)?.derivative();
    let adjoint = (&gi - &adj).add_constant(-state.g * state.a0);

    let lambda0 = gi.mean();
    let prim = gi.add_constant(-lambda0).antiderivative_zero_start().periodic;
    let m0 = op_l_inverse_adjoint(&prim, geom)?;
    let mq = &m0 + &q;
    let b0 = mq.mean();
    let integral = mq.add_constant(-b0).antiderivative_zero_start().periodic;
    let r = &e2.hilbert() - &integral;
    let primitive = r.remove_mean();

    Ok(EulerW { adjoint_sup: sup(&adjoint), primitive_sup: sup(&primitive) })
}

/// `P = (1/Ω)((E₂,₀)′/Ω)′ − σE₁,₀`.
pub fn pressure<M: EnergyModel + ?Sized>(state: &WaveState, model: &M) -> Result<Field, SpectralError> {
    let (e1, e2) = stresses(state, model)?;
    let o = &state.geom.omega;
    let inner = e2.derivative().zip_padded(o, |a, b| a / b)?;
    let first = inner.derivative().zip_padded(o, |a, b| a / b)?;
    Ok(&first - &state.geom.sigma.product(&e1)?)
}

/// The same pressure in the material coordinate `x = χ(τ)`:
/// `P = (1/ν) ∂ₓ(∂ₓE₂ / ν) − σ̂E₁` with `∂ₓ = (1/χ′)∂_τ`, `ν = Ω/χ′`.
pub fn pressure_material<M: EnergyModel + ?Sized>(state: &WaveState, model: &M) -> Result<Field, SpectralError> {
    let (nu, mu, _, e1, e2) = densities(state, model);
    let nu_f = Field::from_padded_samples(&nu)?;
    let curvature = Field::from_padded_samples(&mu.iter().zip(&nu).map(|(m, n)| m / n).collect::<Vec<_>>())?;
    let e1 = Field::from_padded_samples(&e1)?;
    let e2 = Field::from_padded_samples(&e2)?;
    let chi = &state.chi_prime;
    let dx = |f: &Field| f.derivative().zip_padded(chi, |a, b| a / b);
    let inner = dx(&e2)?.zip_padded(&nu_f, |a, b| a / b)?;
    let outer = dx(&inner)?.zip_padded(&nu_f, |a, b| a / b)?;
    Ok(&outer - &curvature.product(&e1)?)
}

/// `sup |(E₁,₀)′ + σ(E₂,₀)′|`.
pub fn residual_material<M: EnergyModel + ?Sized>(state: &WaveState, model: &M) -> Result<f64, SpectralError> {
    let (e1, e2) = stresses(state, model)?;
    Ok(sup(&(&e1.derivative() + &state.geom.sigma.product(&e2.derivative())?)))
}

/// Gaps `(sup|C(fw′) + f(1 + Cw′) − a|, sup|Ω²f − a|)`.
pub fn riemann_hilbert_check(geom: &Geometry, f: &Field, a: f64) -> Result<(f64, f64), SpectralError> {
    let lhs = &f.product(&geom.dw)?.hilbert() + &f.product(&one_plus_cdw(geom))?;
    let o2 = geom.omega.product(&geom.omega)?;
    let rhs = f.product(&o2)?;
    Ok((sup(&lhs.add_constant(-a)), sup(&rhs.add_constant(-a))))
}

/// `1 − (2g/c²)(a₀ + w) − (2/c²)P`.
pub fn bernoulli_field(state: &WaveState, p: &Field) -> Field {
    let k = 2.0 / state.c2;
    state
        .w()
        .add_constant(state.a0)
        .scale(-k * state.g)
        .axpy(-k, p)
        .add_constant(1.0)
}

/// `sup |1 − (2g/c²)(a₀ + w) − (2/c²)P − 1/Ω²|`.
pub fn residual_dynamic<M: EnergyModel + ?Sized>(state: &WaveState, model: &M) -> Result<f64, SpectralError> {
    let p = pressure(state, model)?;
    let f = bernoulli_field(state, &p);
    Ok(sup(&(&f - &inv_omega2(&state.geom)?)))
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub euler_chi_std: f64,
    pub gamma0: f64,
    /// Multiplier returned by the inner solve, when available.
    pub gamma0_inner: Option<f64>,
    pub euler_w_sup: f64,
    pub euler_w_primitive_sup: f64,
    pub material_sup: f64,
    /// Gap of the Riemann–Hilbert form `C(fw′) + f(1 + Cw′) = 1` for the
    /// Bernoulli field `f`.
    pub rh_sup: f64,
    pub dynamic_sup: f64,
    /// `|[log Ω]|`.
    pub mean_log_omega: f64,
    #[serde(skip)]
    pub pressure: Field,
}

pub fn certify<M: EnergyModel + ?Sized>(state: &WaveState, model: &M) -> Result<ResidualReport, LagrangianError> {
    let (euler_chi_std, gamma0) = residual_euler_chi(state, model);
    let ew = residual_euler_w(state, model)?;
    let p = pressure(state, model)?;
    let f = bernoulli_field(state, &p);
    let (rh_sup, _) = riemann_hilbert_check(&state.geom, &f, 1.0)?;
    let dynamic_sup = sup(&(&f - &inv_omega2(&state.geom)?));
    Ok(ResidualReport {
        euler_chi_std,
        gamma0,
        gamma0_inner: state.gamma0,
        euler_w_sup: ew.adjoint_sup,
        euler_w_primitive_sup: ew.primitive_sup,
        material_sup: residual_material(state, model)?,
        rh_sup,
        dynamic_sup,
        mean_log_omega: state.geom.log_omega.mean().abs(),
        pressure: p,
    })
}
