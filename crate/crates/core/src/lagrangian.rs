//! The functionals `I₀`, the elastic energy and `J₀ = I₀ − E`, their
//! gradients, and the convex inner problem in the reparametrization `χ`.
//!
//! Kinetic term convention: `K = (c²/2)∫ w Cw′ dτ`, which is nonnegative.

use std::f64::consts::PI;

use thiserror::Error;

use crate::energy::{estar_grad, estar_hess, varpi_from, EnergyError, EnergyModel};
use crate::geometry::{Geometry, GeometryError};
use crate::spectral::{padded_mean, Field, SpectralError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LagrangianError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("inner problem failed: {0}")]
    Inner(String),
}

/// A candidate solution `(w, χ′)` with its derived geometry.
///
/// `χ′` is held as samples on the padded grid, where every quadrature is
/// performed; `chi_prime` is its projection onto the base grid.
#[derive(Debug, Clone)]
pub struct WaveState {
    pub geom: Geometry,
    pub chi_pad: Vec<f64>,
    pub chi_prime: Field,
    pub c2: f64,
    pub g: f64,
    /// Multiplier of the inner problem, when `χ′` came from it.
    pub gamma0: Option<f64>,
    pub a0: f64,
}

impl WaveState {
    fn build(w: &Field, chi_pad: Vec<f64>, c2: f64, g: f64, gamma0: Option<f64>) -> Result<Self, LagrangianError> {
        if !(c2 > 0.0) || !(g > 0.0) {
            return Err(LagrangianError::InvalidState(format!("c2 = {c2} and g = {g} must be positive")));
        }
        if w.mean().abs() > 1e-13 {
            return Err(LagrangianError::InvalidState(format!("mean(w) = {:e} is not zero", w.mean())));
        }
        if let Some(v) = chi_pad.iter().find(|v| !(**v > 0.0)) {
            return Err(LagrangianError::InvalidState(format!("chi' = {v} is not positive")));
        }
        let geom = Geometry::new(w)?;
        let chi_prime = Field::from_padded_samples(&chi_pad)?;
        let a0 = mass_shift_a0(w);
        Ok(Self { geom, chi_pad, chi_prime, c2, g, gamma0, a0 })
    }

    /// State with a prescribed `χ′`, renormalized to unit mean.
    pub fn with_chi_prime(w: &Field, chi_prime: &Field, c2: f64, g: f64) -> Result<Self, LagrangianError> {
        let pad = chi_prime.padded_samples();
        let m = padded_mean(&pad);
        Self::build(w, pad.iter().map(|v| v / m).collect(), c2, g, None)
    }

    /// State with `χ′ = exp(q) / mean(exp(q))`.
    pub fn from_q(w: &Field, q: &Field, c2: f64, g: f64) -> Result<Self, LagrangianError> {
        let e: Vec<f64> = q.padded_samples().iter().map(|v| v.exp()).collect();
        let m = padded_mean(&e);
        Self::build(w, e.iter().map(|v| v / m).collect(), c2, g, None)
    }

    /// State whose `χ′` solves the inner problem at `w`.
    pub fn solve_inner<M: EnergyModel + ?Sized>(w: &Field, model: &M, c2: f64, g: f64) -> Result<Self, LagrangianError> {
        let geom = Geometry::new(w)?;
        let inner = inner_chi_solve(&geom, model, None)?;
        Self::build(w, inner.chi_pad, c2, g, Some(inner.gamma0))
    }

    pub fn trivial(m: usize, c2: f64, g: f64) -> Result<Self, LagrangianError> {
        Self::build(&Field::zeros(m)?, vec![1.0; 2 * m], c2, g, Some(0.0))
    }

    pub fn w(&self) -> &Field {
        &self.geom.w
    }

    /// Zero-mean log-parametrization `q` of `χ′`.
    pub fn q(&self) -> Field {
        let logs: Vec<f64> = self.chi_pad.iter().map(|v| v.ln()).collect();
        Field::from_padded_samples(&logs).map(|f| f.remove_mean()).expect("finite logarithms")
    }

    /// `χ(τ) = ∫₀^τ χ′`, sampled on the base grid.
    pub fn chi(&self) -> Vec<f64> {
        self.chi_prime.antiderivative_zero_start().samples()
    }

    /// `(ν, μ) = (Ω/χ′, Ωσ/χ′)` on the padded grid.
    pub fn nu_mu_padded(&self) -> (Vec<f64>, Vec<f64>) {
        let o = self.geom.omega.padded_samples();
        let s = self.geom.sigma.padded_samples();
        let nu: Vec<f64> = o.iter().zip(&self.chi_pad).map(|(o, c)| o / c).collect();
        let mu: Vec<f64> = nu.iter().zip(&s).map(|(n, s)| n * s).collect();
        (nu, mu)
    }

    pub fn min_chi_prime(&self) -> f64 {
        self.chi_pad.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `a₀ = −[w Cw′]`.
pub fn mass_shift_a0(w: &Field) -> f64 {
    -integrand_mean(&[w, &w.derivative().hilbert()])
}

/// Mean of a pointwise product of band-limited fields, evaluated on the
/// padded grid (exact for up to three factors).
fn integrand_mean(factors: &[&Field]) -> f64 {
    let pads: Vec<Vec<f64>> = factors.iter().map(|f| f.padded_samples()).collect();
    let n = pads[0].len();
    let mut acc = 0.0;
    for j in 0..n {
        acc += pads.iter().map(|p| p[j]).product::<f64>();
    }
    acc / n as f64
}

/// `A₁ = ∫ wCw′` and `A₂ = ∫ w²(1 + Cw′)`.
pub fn area_integrals(w: &Field) -> (f64, f64) {
    let cdw = w.derivative().hilbert();
    let a1 = 2.0 * PI * integrand_mean(&[w, &cdw]);
    let a2 = 2.0 * PI * (integrand_mean(&[w, w]) + integrand_mean(&[w, w, &cdw]));
    (a1, a2)
}

/// `I(w) = (c²/2)∫wCw′ − (g/2)∫w²(1 + Cw′)` for `w` of any mean.
pub fn lagrangian_i(w: &Field, c2: f64, g: f64) -> f64 {
    let (a1, a2) = area_integrals(w);
    0.5 * c2 * a1 - 0.5 * g * a2
}

/// `I₀(w) = (c²/2)A₁ − (g/2)A₂ + (g/4π)A₁²`.
pub fn kinetic_potential_i0(w: &Field, c2: f64, g: f64) -> f64 {
    let (a1, a2) = area_integrals(w);
    0.5 * c2 * a1 - 0.5 * g * a2 + g / (4.0 * PI) * a1 * a1
}

/// `∇I₀ = (c² − 2ga₀)Cw′ − g{w(1 + Cw′) + C(ww′)}`, mean not removed.
pub fn grad_i0(w: &Field, c2: f64, g: f64) -> Result<Field, LagrangianError> {
    let dw = w.derivative();
    let cdw = dw.hilbert();
    let a0 = mass_shift_a0(w);
    let wcdw = w.product(&cdw.add_constant(1.0))?;
    let cwdw = w.product(&dw)?.hilbert();
    Ok(cdw.scale(c2 - 2.0 * g * a0).axpy(-g, &(&wcdw + &cwdw)))
}

/// `∫ χ′ E(Ω/χ′, Ωσ/χ′) dτ` on the padded grid.
pub fn elastic<M: EnergyModel + ?Sized>(state: &WaveState, model: &M) -> Result<f64, LagrangianError> {
    let (nu, mu) = state.nu_mu_padded();
    let mut acc = 0.0;
    for j in 0..nu.len() {
        if !(nu[j] > 0.0) {
            return Err(EnergyError::Domain(format!("nu = {} at padded node {j}", nu[j])).into());
        }
        acc += state.chi_pad[j] * model.eval(nu[j], mu[j]);
    }
    Ok(2.0 * PI * acc / nu.len() as f64)
}

pub fn i0(state: &WaveState) -> f64 {
    kinetic_potential_i0(state.w(), state.c2, state.g)
}

/// `J₀ = I₀ − E`.
pub fn j0<M: EnergyModel + ?Sized>(state: &WaveState, model: &M) -> Result<f64, LagrangianError> {
    Ok(i0(state) - elastic(state, model)?)
}

/// Solution of the inner problem: `χ′ = Ω ϖ(σ; γ₀)` with unit mean.
#[derive(Debug, Clone)]
pub struct InnerSolution {
    pub chi_pad: Vec<f64>,
    pub gamma0: f64,
    /// `|mean(χ′) − 1|` before the final renormalization.
    pub mean_residual: f64,
    pub iterations: usize,
}

/// Minimizes the elastic energy over `χ′ > 0`, `mean(χ′) = 1`, at fixed `w`.
///
/// The scalar `γ₀` is found by safeguarded Newton on
/// `h(γ) = mean(Ω ϖ(σ; γ)) − 1`, with `h′ = mean(Ω / E⋆₁₁)`.
pub fn inner_chi_solve<M: EnergyModel + ?Sized>(
    geom: &Geometry,
    model: &M,
    gamma_guess: Option<f64>,
) -> Result<InnerSolution, LagrangianError> {
    let o = geom.omega.padded_samples();
    let s = geom.sigma.padded_samples();
    let n = o.len();
    let mut ts = vec![1.0; n];
    let eval = |gamma: f64, ts: &mut Vec<f64>| -> Result<(f64, f64), LagrangianError> {
        let mut h = 0.0;
        let mut dh = 0.0;
        for j in 0..n {
            let t = varpi_from(model, s[j], gamma, ts[j])?;
            ts[j] = t;
            let (h11, _, _) = estar_hess(model, t, s[j])?;
            h += o[j] * t;
            dh += o[j] / h11;
        }
        Ok((h / n as f64 - 1.0, dh / n as f64))
    };
    let mut gamma = gamma_guess.unwrap_or(0.0);
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut last = f64::NAN;
    for it in 0..200 {
        let (h, dh) = eval(gamma, &mut ts)?;
        last = h;
        if h == 0.0 {
            return Ok(finish(&o, &ts, gamma, h, it));
        }
        if h > 0.0 {
            hi = hi.min(gamma);
        } else {
            lo = lo.max(gamma);
        }
        let mut next = gamma - h / dh;
        if !next.is_finite() || !(dh > 0.0) {
            next = if h > 0.0 { gamma - 1.0 - gamma.abs() } else { gamma + 1.0 + gamma.abs() };
        }
        if lo.is_finite() && hi.is_finite() && !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let step = (next - gamma).abs();
        if step <= 2.0 * f64::EPSILON * gamma.abs().max(1.0) || h.abs() <= 1e-15 {
            let (h, _) = eval(next, &mut ts)?;
            return Ok(finish(&o, &ts, next, h, it + 1));
        }
        gamma = next;
    }
    if last.abs() < 1e-12 {
        return Ok(finish(&o, &ts, gamma, last, 200));
    }
    Err(LagrangianError::Inner(format!("mean condition residual {last:e} after 200 iterations")))
}

fn finish(o: &[f64], ts: &[f64], gamma: f64, h: f64, iterations: usize) -> InnerSolution {
    let chi: Vec<f64> = o.iter().zip(ts).map(|(o, t)| o * t).collect();
    let m = padded_mean(&chi);
    InnerSolution {
        chi_pad: chi.iter().map(|c| c / m).collect(),
        gamma0: gamma,
        mean_residual: h.abs(),
        iterations,
    }
}

/// `L*(f) = w′f/Ω² − C((1 + Cw′)f/Ω²)`, the `L²` adjoint of
/// `L(u) = (w′u + (1 + Cw′)Cu)/Ω²`.
pub(crate) fn adjoint_l(geom: &Geometry, inv_omega2: &Field, f: &Field) -> Result<Field, SpectralError> {
    let fo = f.product(inv_omega2)?;
    let a = geom.dw.product(&fo)?;
    let b = geom.cdw.add_constant(1.0).product(&fo)?.hilbert();
    Ok(&a - &b)
}

pub(crate) fn inv_omega2(geom: &Geometry) -> Result<Field, SpectralError> {
    geom.omega.map_padded(|o| 1.0 / (o * o))
}

/// `(E₁,₀, E₂,₀)` at `(Ω/χ′, Ωσ/χ′)`, projected from padded samples.
pub fn stress_fields<M: EnergyModel + ?Sized>(state: &WaveState, model: &M) -> Result<(Field, Field), LagrangianError> {
    let (nu, mu) = state.nu_mu_padded();
    let mut e1 = Vec::with_capacity(nu.len());
    let mut e2 = Vec::with_capacity(nu.len());
    for j in 0..nu.len() {
        let (a, b) = model.grad(nu[j], mu[j]);
        e1.push(a);
        e2.push(b);
    }
    Ok((Field::from_padded_samples(&e1)?, Field::from_padded_samples(&e2)?))
}

/// `L²` gradient of the elastic energy in `w` at fixed `χ′`:
/// `{L*(CT − Q)}′` with `T = (E₂,₀)′`, `Q = E₁,₀Ω`.
pub fn grad_elastic_w<M: EnergyModel + ?Sized>(state: &WaveState, model: &M) -> Result<Field, LagrangianError> {
    let (e1, e2) = stress_fields(state, model)?;
    let t = e2.derivative();
    let q = e1.product(&state.geom.omega)?;
    let inv = inv_omega2(&state.geom)?;
    Ok(adjoint_l(&state.geom, &inv, &(&t.hilbert() - &q))?.derivative())
}

/// Gradient of `J̃(w) = I₀(w) − min_χ E(w, χ)`, projected to zero mean.
/// `state` must carry the inner solution at its `w`.
pub fn grad_w_reduced<M: EnergyModel + ?Sized>(state: &WaveState, model: &M) -> Result<Field, LagrangianError> {
    if state.gamma0.is_none() {
        return Err(LagrangianError::InvalidState("chi' is not the inner solution".into()));
    }
    grad_w_fixed_chi(state, model)
}

/// Gradient of `J₀` in `w` at fixed `χ′`, projected to zero mean.
pub fn grad_w_fixed_chi<M: EnergyModel + ?Sized>(state: &WaveState, model: &M) -> Result<Field, LagrangianError> {
    let gi = grad_i0(state.w(), state.c2, state.g)?;
    let ge = grad_elastic_w(state, model)?;
    Ok((&gi - &ge).remove_mean())
}

/// Gradient of `J₀` in the chart `χ′ = exp(q)/mean(exp(q))`:
/// `−χ′(G − [Gχ′])` with `G = E⋆₁(χ′/Ω, σ)`.
pub fn grad_q<M: EnergyModel + ?Sized>(state: &WaveState, model: &M) -> Result<Field, LagrangianError> {
    let o = state.geom.omega.padded_samples();
    let s = state.geom.sigma.padded_samples();
    let n = o.len();
    let mut gch = Vec::with_capacity(n);
    for j in 0..n {
        let (g1, _) = estar_grad(model, state.chi_pad[j] / o[j], s[j])?;
        gch.push(g1);
    }
    let mean_gc = padded_mean(&gch.iter().zip(&state.chi_pad).map(|(g, c)| g * c).collect::<Vec<_>>());
    let vals: Vec<f64> = gch.iter().zip(&state.chi_pad).map(|(g, c)| -c * (g - mean_gc)).collect();
    Ok(Field::from_padded_samples(&vals)?.remove_mean())
}

/// `J̃(w)` and the state carrying the inner solution.
pub fn reduced<M: EnergyModel + ?Sized>(
    w: &Field,
    model: &M,
    c2: f64,
    g: f64,
    gamma_guess: Option<f64>,
) -> Result<(f64, WaveState), LagrangianError> {
    let geom = Geometry::new(w)?;
    let inner = inner_chi_solve(&geom, model, gamma_guess)?;
    let state = WaveState::build(w, inner.chi_pad, c2, g, Some(inner.gamma0))?;
    Ok((j0(&state, model)?, state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{IllustrativeEnergy, IllustrativeParams};

    const M: usize = 64;

    fn model() -> IllustrativeEnergy {
        IllustrativeEnergy::new(IllustrativeParams {
            a: 40.0,
            b: 30.0,
            beta: 0.5,
            d: 0.25,
            r: 4.0,
            s: 3.0,
            p: 4.0,
            alpha: 2.0,
            delta: 0.5,
        })
        .unwrap()
    }

    fn cosine(eps: f64) -> Field {
        Field::from_fn(M, |t| eps * t.cos()).unwrap()
    }

    fn generic() -> Field {
        Field::from_trig(M, 0.0, &[0.08, 0.02, -0.01], &[0.0, 0.015, 0.004]).unwrap()
    }

    fn direction(k: u64) -> Field {
        let c: Vec<f64> = (1..=6).map(|j| ((k * 31 + j * 17) as f64).sin() / j as f64).collect();
        let s: Vec<f64> = (1..=6).map(|j| ((k * 13 + j * 7) as f64).cos() / j as f64).collect();
        Field::from_trig(M, 0.0, &c, &s).unwrap()
    }

    #[test]
    fn trivial_values() {
        let w = Field::zeros(M).unwrap();
        assert_eq!(kinetic_potential_i0(&w, 4.0, 1.0), 0.0);
        assert_eq!(mass_shift_a0(&w), 0.0);
        assert_eq!(grad_i0(&w, 4.0, 1.0).unwrap().sup_norm(), 0.0);
        let st = WaveState::trivial(M, 4.0, 1.0).unwrap();
        assert!(elastic(&st, &model()).unwrap().abs() < 1e-12);
        assert!(j0(&st, &model()).unwrap().abs() < 1e-12);
        let inner = inner_chi_solve(&st.geom, &model(), None).unwrap();
        assert_eq!(inner.gamma0, 0.0);
        assert!(inner.chi_pad.iter().all(|c| (c - 1.0).abs() < 1e-15));
        let st = WaveState::solve_inner(&w, &model(), 4.0, 1.0).unwrap();
        assert!(grad_w_reduced(&st, &model()).unwrap().sup_norm() < 1e-14);
    }

    #[test]
    fn mass_shift_of_cosine() {
        let eps = 0.2;
        assert!((mass_shift_a0(&cosine(eps)) + eps * eps / 2.0).abs() < 1e-15);
    }

    #[test]
    fn i0_small_amplitude() {
        let (c2, g) = (4.5, 1.0);
        for eps in [1e-2, 5e-3] {
            let v = kinetic_potential_i0(&cosine(eps), c2, g);
            let lead = 0.5 * PI * (c2 - g) * eps * eps;
            assert!((v - lead).abs() < 10.0 * eps.powi(4));
        }
    }

    #[test]
    fn vertical_shift_is_optimal_at_a0() {
        let w = generic();
        let (c2, g) = (4.0, 1.0);
        let a0 = mass_shift_a0(&w);
        let best = lagrangian_i(&w.add_constant(a0), c2, g);
        assert!((best - kinetic_potential_i0(&w, c2, g)).abs() < 1e-14);
        for da in [-1e-2, -1e-4, 1e-4, 1e-2] {
            assert!(lagrangian_i(&w.add_constant(a0 + da), c2, g) < best);
        }
    }

    #[test]
    fn grad_i0_matches_finite_differences() {
        let w = generic();
        let (c2, g) = (4.0, 1.0);
        let grad = grad_i0(&w, c2, g).unwrap();
        assert!((grad.mean() - g * mass_shift_a0(&w)).abs() < 1e-15);
        let delta = 1e-6;
        for k in 0..5 {
            let h = direction(k);
            let fd = (kinetic_potential_i0(&w.axpy(delta, &h), c2, g)
                - kinetic_potential_i0(&w.axpy(-delta, &h), c2, g))
                / (2.0 * delta);
            let an = 2.0 * PI * grad.product(&h).unwrap().mean();
            assert!((fd - an).abs() / an.abs() < 1e-6, "k={k}: {fd} vs {an}");
        }
    }

    #[test]
    fn elastic_small_amplitude() {
        let e = model();
        let e22 = e.e22_rest();
        for eps in [2e-3, 1e-3] {
            let w = cosine(eps);
            let chi = Field::from_fn(M, |t| 1.0 + eps * t.cos()).unwrap();
            let st = WaveState::with_chi_prime(&w, &chi, 4.5, 1.0).unwrap();
            let v = elastic(&st, &e).unwrap() / (eps * eps);
            assert!((v - 0.5 * PI * e22).abs() / (0.5 * PI * e22) < 0.02, "{v}");
        }
    }

    #[test]
    fn inner_solution_is_minimal_and_flat() {
        let e = model();
        let w = generic();
        let st = WaveState::solve_inner(&w, &e, 4.5, 1.0).unwrap();
        let base = elastic(&st, &e).unwrap();
        let flat = WaveState::with_chi_prime(&w, &Field::constant(M, 1.0).unwrap(), 4.5, 1.0).unwrap();
        assert!(base <= elastic(&flat, &e).unwrap());
        let gamma = st.gamma0.unwrap();
        let (nu, mu) = st.nu_mu_padded();
        let vals: Vec<f64> = nu
            .iter()
            .zip(&mu)
            .map(|(&n, &m)| {
                let (e1, e2) = e.grad(n, m);
                e.eval(n, m) - n * e1 - m * e2
            })
            .collect();
        let mean = padded_mean(&vals);
        let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64).sqrt();
        assert!(sd < 1e-10, "std = {sd:e}");
        assert!((mean - gamma).abs() < 1e-10);
        assert!((padded_mean(&st.chi_pad) - 1.0).abs() < 1e-15);
        for k in 0..10 {
            let h = direction(k).scale(1e-3);
            let pert: Vec<f64> = st.chi_pad.iter().zip(h.padded_samples()).map(|(c, d)| c + d).collect();
            let pst = WaveState::build(&w, pert, 4.5, 1.0, None).unwrap();
            assert!(elastic(&pst, &e).unwrap() > base);
        }
    }

    #[test]
    fn grad_reduced_matches_finite_differences() {
        let e = model();
        let w = generic();
        let (c2, g) = (4.5, 1.0);
        let (_, st) = reduced(&w, &e, c2, g, None).unwrap();
        let grad = grad_w_reduced(&st, &e).unwrap();
        let delta = 1e-6;
        for k in 0..5 {
            let h = direction(k);
            let jp = reduced(&w.axpy(delta, &h), &e, c2, g, None).unwrap().0;
            let jm = reduced(&w.axpy(-delta, &h), &e, c2, g, None).unwrap().0;
            let fd = (jp - jm) / (2.0 * delta);
            let an = 2.0 * PI * grad.product(&h).unwrap().mean();
            assert!((fd - an).abs() / an.abs() < 1e-5, "k={k}: {fd} vs {an}");
        }
    }

    #[test]
    fn grad_q_matches_finite_differences() {
        let e = model();
        let w = generic();
        let q0 = Field::from_trig(M, 0.0, &[0.05, 0.01], &[0.0, 0.02]).unwrap();
        let st = WaveState::from_q(&w, &q0, 4.5, 1.0).unwrap();
        let grad = grad_q(&st, &e).unwrap();
        let delta = 1e-6;
        for k in 0..3 {
            let h = direction(k);
            let jp = j0(&WaveState::from_q(&w, &q0.axpy(delta, &h), 4.5, 1.0).unwrap(), &e).unwrap();
            let jm = j0(&WaveState::from_q(&w, &q0.axpy(-delta, &h), 4.5, 1.0).unwrap(), &e).unwrap();
            let fd = (jp - jm) / (2.0 * delta);
            let an = 2.0 * PI * grad.product(&h).unwrap().mean();
            assert!((fd - an).abs() / an.abs().max(1e-8) < 1e-5, "k={k}: {fd} vs {an}");
        }
    }

    #[test]
    fn cached_state_matches_recomputation() {
        let e = model();
        let w = generic();
        let st = WaveState::solve_inner(&w, &e, 4.5, 1.0).unwrap();
        let again = WaveState::build(&w, st.chi_pad.clone(), 4.5, 1.0, st.gamma0).unwrap();
        assert_eq!(elastic(&st, &e).unwrap(), elastic(&again, &e).unwrap());
    }
}
