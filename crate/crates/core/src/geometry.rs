//! Curve quantities of the conformal parametrization
//! `ρ(τ) = (−τ − Cw(τ), w(τ))` and the chord–arc area function `A(ℓ)`.

use std::f64::consts::PI;

use serde::Serialize;
use thiserror::Error;

use crate::spectral::{padded_mean, Field, SpectralError};

/// Smallest admissible value of `Ω` before a curve is declared degenerate.
pub const MIN_OMEGA: f64 = 1e-10;

/// Collinearity tolerance of the segment tests.
pub const EPS_GEOM: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate curve: min Ω = {0:e}")]
    Degenerate(f64),
    #[error("ℓ = {0} is outside the domain ℓ > 1")]
    Domain(f64),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Everything derived from `w` alone.
#[derive(Debug, Clone)]
pub struct Geometry {
    pub w: Field,
    pub dw: Field,
    pub cw: Field,
    pub cdw: Field,
    pub omega: Field,
    pub log_omega: Field,
    pub theta: Field,
    pub sigma: Field,
}

impl Geometry {
    pub fn new(w: &Field) -> Result<Self, GeometryError> {
        let dw = w.derivative();
        let cw = w.hilbert();
        let cdw = dw.hilbert();
        let a = cdw.padded_samples();
        let b = dw.padded_samples();
        let sq: Vec<f64> = a
            .iter()
            .zip(&b)
            .map(|(&x, &y)| (1.0 + x) * (1.0 + x) + y * y)
            .collect();
        let min_sq = sq.iter().copied().fold(f64::INFINITY, f64::min);
        if min_sq.sqrt() < MIN_OMEGA {
            return Err(GeometryError::Degenerate(min_sq.sqrt()));
        }
        let omega = Field::from_padded_samples(&sq.iter().map(|s| s.sqrt()).collect::<Vec<_>>())?;
        let log_omega =
            Field::from_padded_samples(&sq.iter().map(|s| 0.5 * s.ln()).collect::<Vec<_>>())?;
        let theta = -&log_omega.hilbert();
        // Θ′ = (w″(1 + Cw′) − w′Cw″)/Ω², evaluated pointwise rather than by
        // differentiating Θ, which would amplify rounding in log Ω.
        let d2 = dw.derivative().padded_samples();
        let cd2 = cdw.derivative().padded_samples();
        let sig: Vec<f64> = (0..sq.len())
            .map(|j| (d2[j] * (1.0 + a[j]) - b[j] * cd2[j]) / (sq[j] * sq[j].sqrt()))
            .collect();
        let sigma = Field::from_padded_samples(&sig)?;
        Ok(Self {
            w: w.clone(),
            dw,
            cw,
            cdw,
            omega,
            log_omega,
            theta,
            sigma,
        })
    }

    pub fn min_omega(&self) -> f64 {
        self.omega.padded_samples().into_iter().fold(f64::INFINITY, f64::min)
    }

    /// `ℓ = (1/2π)∫Ω`.
    pub fn ell(&self) -> f64 {
        self.omega.mean()
    }

    /// `m = (1/2π)∫|Ωσ|`, from the same padded samples the elastic
    /// quadrature uses.
    pub fn m(&self) -> f64 {
        let o = self.omega.padded_samples();
        let s = self.sigma.padded_samples();
        padded_mean(&o.iter().zip(&s).map(|(a, b)| (a * b).abs()).collect::<Vec<_>>())
    }

    /// `sup Θ − inf Θ` on the padded grid.
    pub fn theta_osc(&self) -> f64 {
        let t = self.theta.padded_samples();
        let hi = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = t.iter().copied().fold(f64::INFINITY, f64::min);
        hi - lo
    }

    /// `∫ w(1 + Cw′) dτ`, the signed area under one period.
    pub fn signed_area(&self) -> f64 {
        2.0 * PI * self.w.product(&self.cdw.add_constant(1.0)).map(|f| f.mean()).unwrap_or(f64::NAN)
    }

    pub fn curve(&self) -> CurveSample {
        let points = self
            .w
            .nodes()
            .iter()
            .zip(self.cw.samples())
            .zip(self.w.samples())
            .map(|((t, c), y)| (-t - c, *y))
            .collect();
        CurveSample { points }
    }
}

pub fn omega(w: &Field) -> Result<Field, GeometryError> {
    Ok(Geometry::new(w)?.omega)
}

pub fn theta(w: &Field) -> Result<Field, GeometryError> {
    Ok(Geometry::new(w)?.theta)
}

pub fn sigma(w: &Field) -> Result<Field, GeometryError> {
    Ok(Geometry::new(w)?.sigma)
}

pub fn ell(w: &Field) -> Result<f64, GeometryError> {
    Ok(Geometry::new(w)?.ell())
}

/// One period of the sampled curve; the next period is the translate by
/// `(−2π, 0)`.
#[derive(Debug, Clone)]
pub struct CurveSample {
    pub points: Vec<(f64, f64)>,
}

impl CurveSample {
    pub const SHIFT: f64 = -2.0 * PI;

    /// Polyline of one period closed onto the first point of the next.
    pub fn closed_polyline(&self) -> Vec<(f64, f64)> {
        let mut p = self.points.clone();
        if let Some(&(x, y)) = self.points.first() {
            p.push((x + Self::SHIFT, y));
        }
        p
    }

    pub fn polyline_length(&self) -> f64 {
        self.closed_polyline()
            .windows(2)
            .map(|s| (s[1].0 - s[0].0).hypot(s[1].1 - s[0].1))
            .sum()
    }

    pub fn self_intersects(&self) -> bool {
        polyline_self_intersects(&self.closed_polyline(), Self::SHIFT)
    }
}

fn orient(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

fn on_segment(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> bool {
    p.0 >= a.0.min(b.0) - EPS_GEOM
        && p.0 <= a.0.max(b.0) + EPS_GEOM
        && p.1 >= a.1.min(b.1) - EPS_GEOM
        && p.1 <= a.1.max(b.1) + EPS_GEOM
}

/// Crossing or touching test for two closed segments.
pub fn segments_intersect(p1: (f64, f64), p2: (f64, f64), q1: (f64, f64), q2: (f64, f64)) -> bool {
    let scale = [p1, p2, q1, q2]
        .iter()
        .fold(1.0_f64, |m, p| m.max(p.0.abs()).max(p.1.abs()));
    let tol = EPS_GEOM * scale * scale;
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > tol && d2 < -tol) || (d1 < -tol && d2 > tol))
        && ((d3 > tol && d4 < -tol) || (d3 < -tol && d4 > tol))
    {
        return true;
    }
    (d1.abs() <= tol && on_segment(q1, q2, p1))
        || (d2.abs() <= tol && on_segment(q1, q2, p2))
        || (d3.abs() <= tol && on_segment(p1, p2, q1))
        || (d4.abs() <= tol && on_segment(p1, p2, q2))
}

/// Whether an open polyline, together with its translates by `±shift` in
/// `x`, contains two non-adjacent segments that meet. The last vertex of
/// the polyline is expected to be the shifted image of the first.
pub fn polyline_self_intersects(points: &[(f64, f64)], shift: f64) -> bool {
    let n = points.len();
    if n < 3 {
        return false;
    }
    let segs: Vec<((f64, f64), (f64, f64))> = points.windows(2).map(|s| (s[0], s[1])).collect();
    let ns = segs.len();
    let bbox = |s: &((f64, f64), (f64, f64)), dx: f64| {
        (
            s.0 .0.min(s.1 .0) + dx,
            s.0 .0.max(s.1 .0) + dx,
            s.0 .1.min(s.1 .1),
            s.0 .1.max(s.1 .1),
        )
    };
    let overlap = |a: (f64, f64, f64, f64), b: (f64, f64, f64, f64)| {
        a.0 <= b.1 + EPS_GEOM && b.0 <= a.1 + EPS_GEOM && a.2 <= b.3 + EPS_GEOM && b.2 <= a.3 + EPS_GEOM
    };
    for k in [0.0, shift, -shift] {
        for i in 0..ns {
            let bi = bbox(&segs[i], 0.0);
            for j in 0..ns {
                if k == 0.0 && j <= i {
                    continue;
                }
                // shared vertices: consecutive segments, and the seam
                // between one period and the next
                if k == 0.0 && j == i + 1 {
                    continue;
                }
                if k == shift && i == ns - 1 && j == 0 {
                    continue;
                }
                if k == -shift && i == 0 && j == ns - 1 {
                    continue;
                }
                let bj = bbox(&segs[j], k);
                if !overlap(bi, bj) {
                    continue;
                }
                let q1 = (segs[j].0 .0 + k, segs[j].0 .1);
                let q2 = (segs[j].1 .0 + k, segs[j].1 .1);
                if segments_intersect(segs[i].0, segs[i].1, q1, q2) {
                    return true;
                }
            }
        }
    }
    false
}

pub fn self_intersects(w: &Field) -> Result<bool, GeometryError> {
    Ok(Geometry::new(w)?.curve().self_intersects())
}

/// `θ − sin θ`, accurate for small θ.
fn theta_minus_sin(t: f64) -> f64 {
    if t < 0.1 {
        let t2 = t * t;
        // t³/3! − t⁵/5! + t⁷/7! − ...
        let mut term = t * t2 / 6.0;
        let mut sum = 0.0;
        let mut k = 3.0;
        for _ in 0..10 {
            sum += term;
            term *= -t2 / ((k + 1.0) * (k + 2.0));
            k += 2.0;
        }
        sum
    } else {
        t - t.sin()
    }
}

/// The unique `θ ∈ (0, π)` with `θ / sin θ = ℓ`.
pub fn theta_of_ell(ell: f64) -> Result<f64, GeometryError> {
    if !(ell > 1.0) || !ell.is_finite() {
        return Err(GeometryError::Domain(ell));
    }
    let e = ell - 1.0;
    // h(θ) = (θ − sin θ) − (ℓ − 1) sin θ, increasing on (0, π)
    let h = |t: f64| theta_minus_sin(t) - e * t.sin();
    let dh = |t: f64| 2.0 * (0.5 * t).sin().powi(2) - e * t.cos();
    let mut lo = 0.0_f64;
    let mut hi = PI;
    let mut t = if e < 0.5 {
        (6.0 * e).sqrt().min(3.0)
    } else {
        // for large ℓ, θ ≈ π(1 − 1/ℓ)
        (PI * (1.0 - 1.0 / ell)).max(1.0)
    };
    for _ in 0..200 {
        let v = h(t);
        if v > 0.0 {
            hi = hi.min(t);
        } else {
            lo = lo.max(t);
        }
        let d = dh(t);
        let mut next = t - v / d;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() <= 1e-16 * t.max(1e-300) || hi - lo <= 4.0 * f64::EPSILON * hi {
            return Ok(next);
        }
        t = next;
    }
    Ok(t)
}

/// `2θ − sin 2θ`, accurate for small θ.
fn two_theta_minus_sin(t: f64) -> f64 {
    theta_minus_sin(2.0 * t)
}

/// Area between a circular arc of length `2πℓ` and its chord of length `2π`.
pub fn area_a(ell: f64) -> Result<f64, GeometryError> {
    let t = theta_of_ell(ell)?;
    let s = t.sin();
    Ok(PI * PI * two_theta_minus_sin(t) / (2.0 * s * s))
}

/// `A′(ℓ) = 2π² / sin θ(ℓ)`.
pub fn area_a_prime(ell: f64) -> Result<f64, GeometryError> {
    Ok(2.0 * PI * PI / theta_of_ell(ell)?.sin())
}

/// `A(ℓ)` extended by continuity with `A(1) = 0`.
pub fn area_a_closed(ell: f64) -> f64 {
    if ell == 1.0 {
        0.0
    } else {
        area_a(ell).unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct GeometryReport {
    pub ell: f64,
    pub m: f64,
    pub theta_osc: f64,
    pub self_intersects: bool,
    pub supnorm_bound_ok: bool,
    pub area_bound_ok: bool,
    pub sup_w: f64,
    pub signed_area: f64,
    pub min_omega: f64,
    pub mean_log_omega: f64,
}

impl GeometryReport {
    pub fn from_geometry(g: &Geometry) -> Self {
        let ell = g.ell();
        let sup_w = g.w.padded_samples().iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let bound = PI * (ell * ell - 1.0).max(0.0).sqrt();
        let area = g.signed_area();
        let a_bound = if ell > 1.0 { area_a(ell).unwrap_or(f64::INFINITY) } else { 0.0 };
        Self {
            ell,
            m: g.m(),
            theta_osc: g.theta_osc(),
            self_intersects: g.curve().self_intersects(),
            supnorm_bound_ok: sup_w <= bound * (1.0 + 1e-10) + 1e-300,
            area_bound_ok: area <= a_bound * (1.0 + 1e-10) + 1e-300,
            sup_w,
            signed_area: area,
            min_omega: g.min_omega(),
            mean_log_omega: g.log_omega.mean(),
        }
    }
}

pub fn check_bounds(w: &Field) -> Result<GeometryReport, GeometryError> {
    Ok(GeometryReport::from_geometry(&Geometry::new(w)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    const M: usize = 64;

    fn cosine(eps: f64, m: usize) -> Field {
        Field::from_fn(m, |t| eps * t.cos()).unwrap()
    }

    #[test]
    fn flat_state() {
        let g = Geometry::new(&Field::zeros(M).unwrap()).unwrap();
        assert!((&g.omega - &Field::constant(M, 1.0).unwrap()).sup_norm() < 1e-15);
        assert!(g.theta.sup_norm() < 1e-15);
        assert!(g.sigma.sup_norm() < 1e-15);
        assert!((g.ell() - 1.0).abs() < 1e-15);
        let r = GeometryReport::from_geometry(&g);
        assert!(r.supnorm_bound_ok && r.area_bound_ok && !r.self_intersects);
        assert_eq!(r.theta_osc, 0.0);
    }

    #[test]
    fn omega_of_cosine() {
        let eps = 0.1;
        let o = omega(&cosine(eps, M)).unwrap();
        for (t, v) in o.nodes().iter().zip(o.samples()) {
            let exact = (1.0 + 2.0 * eps * t.cos() + eps * eps).sqrt();
            assert!((v - exact).abs() < 1e-13);
        }
        assert!((o.samples()[0] - 1.1).abs() < 1e-13);
    }

    #[test]
    fn theta_and_sigma_leading_order() {
        for eps in [1e-3, 2e-3] {
            let g = Geometry::new(&cosine(eps, M)).unwrap();
            let t = Field::from_fn(M, |t| -eps * t.sin()).unwrap();
            let s = Field::from_fn(M, |t| -eps * t.cos()).unwrap();
            assert!((&g.theta - &t).sup_norm() < 2.0 * eps * eps);
            assert!((&g.sigma - &s).sup_norm() < 4.0 * eps * eps);
            assert!(g.theta.mean().abs() < 1e-17);
        }
    }

    #[test]
    fn sigma_matches_polyline_turning_angle() {
        let m = 512;
        let w = Field::from_trig(m, 0.0, &[0.2, 0.03], &[0.0, 0.05]).unwrap();
        let g = Geometry::new(&w).unwrap();
        let p = g.curve().closed_polyline();
        let mut worst: f64 = 0.0;
        for j in 1..m - 1 {
            let (a, b, c) = (p[j - 1], p[j], p[j + 1]);
            let ang = |u: (f64, f64), v: (f64, f64)| (v.1 - u.1).atan2(v.0 - u.0);
            let mut d = ang(b, c) - ang(a, b);
            if d > PI {
                d -= 2.0 * PI;
            }
            if d < -PI {
                d += 2.0 * PI;
            }
            let ds = 0.5 * ((c.0 - b.0).hypot(c.1 - b.1) + (b.0 - a.0).hypot(b.1 - a.1));
            // τ increases towards −X; the curvature is signed for increasing X
            worst = worst.max((-d / ds - g.sigma.samples()[j]).abs());
        }
        assert!(worst < 1e-3, "worst = {worst}");
    }

    #[test]
    fn ell_expansion_and_polyline() {
        for eps in [1e-2, 2e-2] {
            let l = ell(&cosine(eps, M)).unwrap();
            assert!((l - 1.0 - eps * eps / 4.0).abs() < eps.powi(4));
        }
        let m = 4096;
        let w = Field::from_trig(m, 0.0, &[0.3, 0.05], &[0.0, -0.04]).unwrap();
        let g = Geometry::new(&w).unwrap();
        let poly = g.curve().polyline_length() / (2.0 * PI);
        assert!((g.ell() - poly).abs() / g.ell() < 1e-6);
    }

    #[test]
    fn theta_of_ell_examples() {
        assert!((theta_of_ell(PI / 2.0).unwrap() - PI / 2.0).abs() < 1e-14);
        assert!(theta_of_ell(1.0 + 1e-14).unwrap() < 1e-6);
        // bisection oracle for θ = 2 sin θ
        let (mut lo, mut hi) = (1.0_f64, 3.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid - 2.0 * mid.sin() > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert!((theta_of_ell(2.0).unwrap() - lo).abs() < 1e-14);
        assert_eq!(theta_of_ell(1.0), Err(GeometryError::Domain(1.0)));
        assert!(theta_of_ell(0.5).is_err());
    }

    #[test]
    fn theta_of_ell_residual() {
        for k in 0..100 {
            let ell = 1.0 + 10f64.powf(-8.0 + 12.0 * k as f64 / 99.0);
            let t = theta_of_ell(ell).unwrap();
            assert!(t > 0.0 && t < PI);
            // Newton correction of h(θ) = (θ − sin θ) − (ℓ − 1) sin θ, relative to θ
            let e = ell - 1.0;
            let h = theta_minus_sin(t) - e * t.sin();
            let dh = 2.0 * (0.5 * t).sin().powi(2) - e * t.cos();
            assert!((h / dh).abs() / t < 1e-12, "ell = {ell}");
        }
    }

    #[test]
    fn area_examples() {
        let a = area_a(PI / 2.0).unwrap();
        assert!((a - PI.powi(3) / 2.0).abs() / a < 1e-12);
        let e = 1e-8;
        let small = area_a(1.0 + e).unwrap() / e.sqrt();
        let lim = 2.0 * (2.0_f64 / 3.0).sqrt() * PI * PI;
        assert!((small - lim).abs() / lim < 1e-3);
        let big = area_a(1e4).unwrap() / 1e8;
        assert!((big - PI).abs() / PI < 1e-3);
        assert!(area_a(1.0).is_err());
    }

    #[test]
    fn self_intersection_examples() {
        assert!(!self_intersects(&Field::zeros(M).unwrap()).unwrap());
        assert!(!self_intersects(&cosine(0.05, M)).unwrap());
        // a loop: a circle of radius 2 swept while moving left by 2π
        let n = 200;
        let pts: Vec<(f64, f64)> = (0..=n)
            .map(|j| {
                let s = 2.0 * PI * j as f64 / n as f64;
                (-s + 2.0 * s.sin(), 2.0 * s.cos())
            })
            .collect();
        assert!(polyline_self_intersects(&pts, -2.0 * PI));
        assert!(segments_intersect((0.0, 0.0), (1.0, 1.0), (0.0, 1.0), (1.0, 0.0)));
        assert!(!segments_intersect((0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)));
    }

    #[test]
    fn bounds_for_cosine() {
        let eps = 0.1;
        let r = check_bounds(&cosine(eps, M)).unwrap();
        assert!((r.sup_w - eps).abs() < 1e-14);
        assert!(r.supnorm_bound_ok && r.area_bound_ok);
        let approx = PI * eps / 2f64.sqrt();
        assert!((PI * (r.ell * r.ell - 1.0).sqrt() - approx).abs() / approx < 0.01);
    }

    #[test]
    fn degenerate_curve_is_rejected() {
        // ε = 1 gives a cusp at τ = π; rounding leaves Ω ~ 1e-8 there
        match Geometry::new(&cosine(1.0, M)) {
            Err(GeometryError::Degenerate(_)) => {}
            Ok(g) => assert!(g.min_omega() < 1e-6),
            Err(e) => panic!("{e}"),
        }
    }
}
