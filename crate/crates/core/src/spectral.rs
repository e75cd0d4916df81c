//! Periodic pseudospectral core.
//!
//! A [`Field`] is a real 2π-periodic function held as samples on the
//! uniform grid `τ_j = 2πj/M` together with its Fourier coefficients
//! `ŵ_n = (1/M) Σ_j w_j e^{-inτ_j}`, stored in FFT order (`n = 0..M/2`
//! followed by the negative modes).
//!
//! Pointwise nonlinear operations are evaluated on a grid of size `2M` and
//! truncated back to `|n| < M/2`; the Nyquist mode is dropped by every
//! dealiased operation, by [`Field::hilbert`] and by [`Field::derivative`].

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("grid size {0} is invalid: M must be even and at least 4")]
    InvalidGrid(usize),
    #[error("dimension mismatch: {left} vs {right} grid points")]
    DimensionMismatch { left: usize, right: usize },
    #[error("non-finite sample at node {0}")]
    NonFinite(usize),
}

type PlanCache = HashMap<(usize, bool), Arc<dyn Fft<f64>>>;

thread_local! {
    static PLANS: RefCell<PlanCache> = RefCell::new(HashMap::new());
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    PLANS.with(|plans| {
        plans
            .borrow_mut()
            .entry((len, forward))
            .or_insert_with(|| {
                PLANNER.with(|p| {
                    let mut p = p.borrow_mut();
                    if forward {
                        p.plan_fft_forward(len)
                    } else {
                        p.plan_fft_inverse(len)
                    }
                })
            })
            .clone()
    })
}

/// Normalized forward transform of real samples.
fn forward(samples: &[f64]) -> Vec<Complex64> {
    let len = samples.len();
    let mut buf: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    plan(len, true).process(&mut buf);
    let scale = 1.0 / len as f64;
    for c in &mut buf {
        *c *= scale;
    }
    buf
}

/// Synthesis `f(τ_j) = Σ_n c_n e^{inτ_j}`, real part.
fn inverse(coeffs: &[Complex64]) -> Vec<f64> {
    let mut buf = coeffs.to_vec();
    plan(buf.len(), false).process(&mut buf);
    buf.into_iter().map(|c| c.re).collect()
}

/// Signed wavenumber of FFT slot `k` on a grid of size `m`.
#[inline]
pub fn wavenumber(k: usize, m: usize) -> i64 {
    if k <= m / 2 {
        k as i64
    } else {
        k as i64 - m as i64
    }
}

/// Uniform nodes `τ_j = 2πj/M`.
pub fn nodes(m: usize) -> Vec<f64> {
    (0..m).map(|j| 2.0 * PI * j as f64 / m as f64).collect()
}

fn check_grid(m: usize) -> Result<(), SpectralError> {
    if m < 4 || !m.is_multiple_of(2) {
        Err(SpectralError::InvalidGrid(m))
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    samples: Vec<f64>,
    coeffs: Vec<Complex64>,
}

impl Field {
    pub fn from_samples(samples: Vec<f64>) -> Result<Self, SpectralError> {
        check_grid(samples.len())?;
        if let Some(j) = samples.iter().position(|x| !x.is_finite()) {
            return Err(SpectralError::NonFinite(j));
        }
        let coeffs = forward(&samples);
        Ok(Self { samples, coeffs })
    }

    /// Builds a field from coefficients in FFT order, projected onto real
    /// fields by symmetrizing `c₋ₙ = conj(cₙ)`.
    pub fn from_coeffs(coeffs: Vec<Complex64>) -> Result<Self, SpectralError> {
        let m = coeffs.len();
        check_grid(m)?;
        if let Some(j) = coeffs.iter().position(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(SpectralError::NonFinite(j));
        }
        let coeffs: Vec<Complex64> = (0..m).map(|k| 0.5 * (coeffs[k] + coeffs[(m - k) % m].conj())).collect();
        let samples = inverse(&coeffs);
        Ok(Self { samples, coeffs })
    }

    pub fn from_fn(m: usize, f: impl Fn(f64) -> f64) -> Result<Self, SpectralError> {
        Self::from_samples(nodes(m).into_iter().map(f).collect())
    }

    pub fn zeros(m: usize) -> Result<Self, SpectralError> {
        Self::constant(m, 0.0)
    }

    pub fn constant(m: usize, value: f64) -> Result<Self, SpectralError> {
        check_grid(m)?;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); m];
        coeffs[0] = Complex64::new(value, 0.0);
        Ok(Self { samples: vec![value; m], coeffs })
    }

    /// Real trigonometric series `c₀ + Σ (a_k cos kτ + b_k sin kτ)`, k ≥ 1.
    pub fn from_trig(
        m: usize,
        mean: f64,
        cos: &[f64],
        sin: &[f64],
    ) -> Result<Self, SpectralError> {
        check_grid(m)?;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); m];
        coeffs[0] = Complex64::new(mean, 0.0);
        let kmax = cos.len().max(sin.len());
        for k in 1..=kmax {
            if k >= m / 2 {
                break;
            }
            let a = cos.get(k - 1).copied().unwrap_or(0.0);
            let b = sin.get(k - 1).copied().unwrap_or(0.0);
            let c = Complex64::new(a / 2.0, -b / 2.0);
            coeffs[k] = c;
            coeffs[m - k] = c.conj();
        }
        Self::from_coeffs(coeffs)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Coefficient of `e^{inτ}`, zero outside the grid band.
    pub fn coeff(&self, n: i64) -> Complex64 {
        let m = self.len() as i64;
        if n.abs() > m / 2 {
            return Complex64::new(0.0, 0.0);
        }
        self.coeffs[n.rem_euclid(m) as usize]
    }

    /// Cosine and sine amplitudes `(a_k, b_k)` of mode `k ≥ 1`.
    pub fn trig_coeff(&self, k: usize) -> (f64, f64) {
        let c = self.coeff(k as i64);
        (2.0 * c.re, -2.0 * c.im)
    }

    pub fn nodes(&self) -> Vec<f64> {
        nodes(self.len())
    }

    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    pub fn sup_norm(&self) -> f64 {
        self.samples.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }

    pub fn min(&self) -> f64 {
        self.samples.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Highest wavenumber whose coefficient exceeds `tol` in modulus.
    pub fn bandwidth(&self, tol: f64) -> usize {
        let m = self.len();
        (0..=m / 2)
            .rev()
            .find(|&k| self.coeffs[k].norm() > tol)
            .unwrap_or(0)
    }

    fn map_coeffs(&self, f: impl Fn(i64, Complex64) -> Complex64) -> Field {
        let m = self.len();
        let coeffs: Vec<Complex64> = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, &c)| {
                let n = wavenumber(k, m);
                if n.unsigned_abs() as usize == m / 2 {
                    Complex64::new(0.0, 0.0)
                } else {
                    f(n, c)
                }
            })
            .collect();
        let samples = inverse(&coeffs);
        Field { samples, coeffs }
    }

    /// Conjugate function `C`: mode `n` is multiplied by `-i sign(n)`.
    pub fn hilbert(&self) -> Field {
        self.map_coeffs(|n, c| match n.signum() {
            0 => Complex64::new(0.0, 0.0),
            s => Complex64::new(0.0, -(s as f64)) * c,
        })
    }

    pub fn derivative(&self) -> Field {
        self.map_coeffs(|n, c| Complex64::new(0.0, n as f64) * c)
    }

    pub fn remove_mean(&self) -> Field {
        self.map_coeffs(|n, c| if n == 0 { Complex64::new(0.0, 0.0) } else { c })
    }

    /// Keeps modes `|n| ≤ kmax` only.
    pub fn lowpass(&self, kmax: usize) -> Field {
        self.map_coeffs(|n, c| {
            if n.unsigned_abs() as usize <= kmax {
                c
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    /// `F(τ) = ∫₀^τ f`, split into the linear ramp `mean(f)·τ` and a
    /// periodic part vanishing at `τ = 0`.
    pub fn antiderivative_zero_start(&self) -> Antiderivative {
        let ramp = self.mean();
        let mut offset = Complex64::new(0.0, 0.0);
        let periodic = self.map_coeffs(|n, c| {
            if n == 0 {
                Complex64::new(0.0, 0.0)
            } else {
                c / Complex64::new(0.0, n as f64)
            }
        });
        for c in &periodic.coeffs {
            offset += c;
        }
        let mut coeffs = periodic.coeffs;
        coeffs[0] = -offset;
        let periodic = Field::from_coeffs(coeffs).expect("grid already validated");
        Antiderivative { ramp, periodic }
    }

    /// Samples on the `2M` grid by zero-padded trigonometric interpolation.
    pub fn padded_samples(&self) -> Vec<f64> {
        let m = self.len();
        let p = 2 * m;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); p];
        for k in 0..m {
            let n = wavenumber(k, m);
            if n.unsigned_abs() as usize == m / 2 {
                let half = self.coeffs[k] * 0.5;
                coeffs[m / 2] += half;
                coeffs[p - m / 2] += half;
            } else {
                coeffs[n.rem_euclid(p as i64) as usize] = self.coeffs[k];
            }
        }
        inverse(&coeffs)
    }

    /// Projects samples given on the `2M` grid back to `|n| < M/2`.
    pub fn from_padded_samples(padded: &[f64]) -> Result<Field, SpectralError> {
        let p = padded.len();
        if !p.is_multiple_of(4) || p < 8 {
            return Err(SpectralError::InvalidGrid(p / 2));
        }
        if let Some(j) = padded.iter().position(|x| !x.is_finite()) {
            return Err(SpectralError::NonFinite(j));
        }
        let m = p / 2;
        let big = forward(padded);
        let mut coeffs = vec![Complex64::new(0.0, 0.0); m];
        for (k, slot) in coeffs.iter_mut().enumerate() {
            let n = wavenumber(k, m);
            if n.unsigned_abs() as usize == m / 2 {
                continue;
            }
            *slot = big[n.rem_euclid(p as i64) as usize];
        }
        Field::from_coeffs(coeffs)
    }

    /// Dealiased pointwise map.
    pub fn map_padded(&self, f: impl Fn(f64) -> f64) -> Result<Field, SpectralError> {
        let pad: Vec<f64> = self.padded_samples().into_iter().map(f).collect();
        Field::from_padded_samples(&pad)
    }

    /// Dealiased pointwise product.
    pub fn product(&self, other: &Field) -> Result<Field, SpectralError> {
        self.zip_padded(other, |a, b| a * b)
    }

    /// Dealiased pointwise binary operation.
    pub fn zip_padded(
        &self,
        other: &Field,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Field, SpectralError> {
        if self.len() != other.len() {
            return Err(SpectralError::DimensionMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        let a = self.padded_samples();
        let b = other.padded_samples();
        let pad: Vec<f64> = a.iter().zip(&b).map(|(&x, &y)| f(x, y)).collect();
        Field::from_padded_samples(&pad)
    }

    /// Trigonometric interpolant at an arbitrary abscissa.
    pub fn evaluate_at(&self, tau: f64) -> f64 {
        let m = self.len();
        let mut acc = self.coeffs[0].re;
        for k in 1..m / 2 {
            let e = Complex64::from_polar(1.0, k as f64 * tau);
            acc += 2.0 * (self.coeffs[k] * e).re;
        }
        let nyq = self.coeffs[m / 2].re;
        acc + nyq * (0.5 * m as f64 * tau).cos()
    }

    /// Refines the field onto a finer uniform grid (`m_new ≥ M`).
    pub fn resample(&self, m_new: usize) -> Result<Field, SpectralError> {
        check_grid(m_new)?;
        let m = self.len();
        let mut coeffs = vec![Complex64::new(0.0, 0.0); m_new];
        for k in 0..m {
            let n = wavenumber(k, m);
            if n.unsigned_abs() as usize >= m_new / 2 || n.unsigned_abs() as usize == m / 2 {
                continue;
            }
            coeffs[n.rem_euclid(m_new as i64) as usize] = self.coeffs[k];
        }
        Field::from_coeffs(coeffs)
    }

    pub fn scale(&self, s: f64) -> Field {
        Field {
            samples: self.samples.iter().map(|x| x * s).collect(),
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn add_constant(&self, c: f64) -> Field {
        let mut out = self.clone();
        for x in &mut out.samples {
            *x += c;
        }
        out.coeffs[0] += c;
        out
    }

    /// Linear combination `self + s·other`.
    pub fn axpy(&self, s: f64, other: &Field) -> Field {
        assert_eq!(self.len(), other.len(), "field grid mismatch");
        Field {
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(a, b)| a + s * b)
                .collect(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b * s)
                .collect(),
        }
    }

    /// Pointwise product on the native grid, no dealiasing. Used only for
    /// quantities already known to be band-limited or for diagnostics.
    pub fn pointwise(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        assert_eq!(self.len(), other.len(), "field grid mismatch");
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Field::from_samples(samples).expect("grid already validated")
    }
}

impl std::ops::Add for &Field {
    type Output = Field;
    fn add(self, rhs: &Field) -> Field {
        self.axpy(1.0, rhs)
    }
}

impl std::ops::Sub for &Field {
    type Output = Field;
    fn sub(self, rhs: &Field) -> Field {
        self.axpy(-1.0, rhs)
    }
}

impl std::ops::Neg for &Field {
    type Output = Field;
    fn neg(self) -> Field {
        self.scale(-1.0)
    }
}

/// Antiderivative of a periodic field: `ramp·τ + periodic(τ)`.
#[derive(Debug, Clone)]
pub struct Antiderivative {
    pub ramp: f64,
    pub periodic: Field,
}

impl Antiderivative {
    pub fn value_at(&self, tau: f64) -> f64 {
        self.ramp * tau + self.periodic.evaluate_at(tau)
    }

    /// Values at the grid nodes.
    pub fn samples(&self) -> Vec<f64> {
        self.periodic
            .nodes()
            .iter()
            .zip(self.periodic.samples())
            .map(|(t, p)| self.ramp * t + p)
            .collect()
    }
}

/// Mean over padded samples (trapezoid rule on the `2M` grid).
pub fn padded_mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    const M: usize = 64;

    fn sup_diff(a: &Field, b: &Field) -> f64 {
        (a - b).sup_norm()
    }

    #[test]
    fn hilbert_maps_cos_to_sin() {
        for n in 1..M / 2 {
            let f = Field::from_fn(M, |t| (n as f64 * t).cos()).unwrap();
            let g = Field::from_fn(M, |t| (n as f64 * t).sin()).unwrap();
            assert!(sup_diff(&f.hilbert(), &g) < 1e-13, "n = {n}");
        }
    }

    #[test]
    fn hilbert_of_constant_is_zero() {
        let one = Field::constant(M, 1.0).unwrap();
        assert_eq!(one.hilbert().sup_norm(), 0.0);
    }

    #[test]
    fn hilbert_of_sin_is_minus_cos() {
        let f = Field::from_fn(M, f64::sin).unwrap();
        let g = Field::from_fn(M, |t| -t.cos()).unwrap();
        assert!(sup_diff(&f.hilbert(), &g) < 1e-14);
    }

    #[test]
    fn derivative_examples() {
        let c = Field::from_fn(M, f64::cos).unwrap();
        let ms = Field::from_fn(M, |t| -t.sin()).unwrap();
        assert!(sup_diff(&c.derivative(), &ms) < 1e-13);
        assert!(Field::constant(M, 5.0).unwrap().derivative().sup_norm() < 1e-15);
        let s3 = Field::from_fn(M, |t| (3.0 * t).sin()).unwrap();
        let c3 = Field::from_fn(M, |t| 3.0 * (3.0 * t).cos()).unwrap();
        assert!(sup_diff(&s3.derivative(), &c3) < 1e-13);
        assert!(s3.derivative().mean().abs() < 1e-16);
    }

    #[test]
    fn mean_examples() {
        let f = Field::from_fn(M, |t| 2.0 + t.cos()).unwrap();
        assert!((f.mean() - 2.0).abs() < 1e-15);
        let s = Field::from_fn(M, |t| (4.0 * t).sin()).unwrap();
        assert!(s.mean().abs() < 1e-16);
    }

    #[test]
    fn mean_of_w_cw_prime() {
        let eps = 0.3;
        let w = Field::from_fn(M, |t| eps * t.cos()).unwrap();
        let cwp = w.derivative().hilbert();
        let prod = w.product(&cwp).unwrap();
        // quadrature oracle: trapezoid rule of ε² cos² τ on a fine grid
        let n = 10_000;
        let quad: f64 = (0..n)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / n as f64;
                eps * eps * t.cos() * t.cos()
            })
            .sum::<f64>()
            / n as f64;
        assert!((prod.mean() - quad).abs() < 1e-14);
        assert!((prod.mean() - eps * eps / 2.0).abs() < 1e-15);
    }

    #[test]
    fn antiderivative_examples() {
        let c = Field::from_fn(M, f64::cos).unwrap();
        let a = c.antiderivative_zero_start();
        assert!(a.ramp.abs() < 1e-15);
        for (t, v) in c.nodes().iter().zip(a.samples()) {
            assert!((v - t.sin()).abs() < 1e-14);
        }

        let one = Field::constant(M, 1.0).unwrap();
        let a = one.antiderivative_zero_start();
        assert_eq!(a.ramp, 1.0);
        assert!(a.periodic.sup_norm() < 1e-15);

        let s = Field::from_fn(M, f64::sin).unwrap();
        let a = s.antiderivative_zero_start();
        for (t, v) in s.nodes().iter().zip(a.samples()) {
            assert!((v - (1.0 - t.cos())).abs() < 1e-14);
        }
        assert!(a.value_at(0.0).abs() < 1e-15);
    }

    #[test]
    fn product_examples() {
        let c = Field::from_fn(M, f64::cos).unwrap();
        let s = Field::from_fn(M, f64::sin).unwrap();
        let cc = Field::from_fn(M, |t| 0.5 * (1.0 + (2.0 * t).cos())).unwrap();
        assert!(sup_diff(&c.product(&c).unwrap(), &cc) < 1e-14);
        let zero = Field::zeros(M).unwrap();
        assert_eq!(c.product(&zero).unwrap().sup_norm(), 0.0);
        let sc = Field::from_fn(M, |t| 0.5 * (2.0 * t).sin()).unwrap();
        assert!(sup_diff(&s.product(&c).unwrap(), &sc) < 1e-14);
    }

    #[test]
    fn product_rejects_mismatched_grids() {
        let a = Field::zeros(8).unwrap();
        let b = Field::zeros(16).unwrap();
        assert_eq!(
            a.product(&b),
            Err(SpectralError::DimensionMismatch { left: 8, right: 16 })
        );
    }

    #[test]
    fn invalid_grids_are_rejected() {
        assert_eq!(Field::zeros(3), Err(SpectralError::InvalidGrid(3)));
        assert_eq!(Field::zeros(2), Err(SpectralError::InvalidGrid(2)));
        assert!(Field::from_samples(vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
    }

    #[test]
    fn samples_and_coefficients_agree() {
        let f = Field::from_trig(M, 0.3, &[0.2, -0.1, 0.05], &[0.0, 0.07, 0.01]).unwrap();
        let again = Field::from_samples(f.samples().to_vec()).unwrap();
        for (a, b) in f.coeffs().iter().zip(again.coeffs()) {
            assert!((a - b).norm() < 1e-15);
        }
        let (a2, b2) = f.trig_coeff(2);
        assert!((a2 + 0.1).abs() < 1e-15 && (b2 - 0.07).abs() < 1e-15);
    }

    #[test]
    fn padding_round_trip_and_interpolation() {
        let f = Field::from_trig(M, 0.1, &[0.5, 0.0, 0.2], &[0.3]).unwrap();
        let pad = f.padded_samples();
        let back = Field::from_padded_samples(&pad).unwrap();
        assert!(sup_diff(&f, &back) < 1e-15);
        let t: f64 = 0.7234;
        let exact = 0.1 + 0.5 * t.cos() + 0.2 * (3.0 * t).cos() + 0.3 * t.sin();
        assert!((f.evaluate_at(t) - exact).abs() < 1e-14);
    }
}
