//! Limited-memory quasi-Newton ascent on the reduced Lagrangian `J̃(w)`,
//! plus warm-started continuation in `c²`.

use std::collections::VecDeque;

use serde::Serialize;
use thiserror::Error;

use crate::energy::{admissible_c2_interval, check_hypotheses, EnergyError, EnergyModel, GridSpec};
use crate::geometry::{Geometry, GeometryReport};
use crate::lagrangian::{grad_w_reduced, j0, reduced, LagrangianError, WaveState};
use crate::residuals::{certify, ResidualReport};
use crate::spectral::{Field, SpectralError};

const HISTORY: usize = 10;
const ARMIJO: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
const MAX_BACKTRACKS: usize = 60;
/// Accepted steps without halving the gradient before a gradient restart.
const STALL_STEPS: usize = 30;
const POLISH_STEPS: usize = 40;
/// Relative tolerance on `J̃` below which changes are treated as rounding.
const F_TOL: f64 = 1e-13;
const GUARD_OMEGA: f64 = 1e-6;
const ABORT_OMEGA: f64 = 1e-8;
/// Amplitude below which a result is reported as the trivial solution.
pub const TRIVIAL_AMPLITUDE: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("hypothesis check failed: {0}")]
    Hypothesis(String),
    #[error("c2 = {c2} lies outside the admissible interval ({lo}, {hi}]")]
    Inadmissible { c2: f64, lo: f64, hi: f64 },
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Lagrangian(#[from] LagrangianError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveConfig {
    /// Number of modes `N`; `w` uses wavenumbers `1..N`.
    pub n_modes: usize,
    /// Grid size `M`.
    pub grid: usize,
    pub c2: f64,
    pub g: f64,
    pub mu_star: f64,
    pub eps0: f64,
    pub tol_grad: f64,
    pub max_iter: usize,
    pub schedule: Vec<f64>,
    /// Run the hypothesis checker before solving.
    pub check: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            n_modes: 128,
            grid: 256,
            c2: 4.0,
            g: 1.0,
            mu_star: 0.95,
            eps0: 1e-3,
            tol_grad: 1e-9,
            max_iter: 5000,
            schedule: Vec::new(),
            check: true,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        let bad = |m: String| Err(SolveError::Config(m));
        if self.grid < 8 || !self.grid.is_multiple_of(2) {
            return bad(format!("grid M = {} must be even and at least 8", self.grid));
        }
        if self.n_modes < 2 || self.n_modes > self.grid / 2 {
            return bad(format!("modes N = {} must satisfy 2 <= N <= M/2 = {}", self.n_modes, self.grid / 2));
        }
        if !(self.tol_grad > 0.0) {
            return bad(format!("tol_grad = {} must be positive", self.tol_grad));
        }
        if !(self.c2 > 0.0) || !(self.g > 0.0) {
            return bad(format!("c2 = {} and g = {} must be positive", self.c2, self.g));
        }
        if !(self.mu_star > 0.0 && self.mu_star < 1.0) {
            return bad(format!("mu_star = {} must lie in (0, 1)", self.mu_star));
        }
        if !self.eps0.is_finite() || self.eps0 < 0.0 {
            return bad(format!("eps0 = {} must be finite and non-negative", self.eps0));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveResult {
    #[serde(skip)]
    pub state: WaveState,
    pub c2: f64,
    pub j0_value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub restarts: usize,
    pub converged: bool,
    /// `‖w‖∞ < 1e-8`.
    pub trivial: bool,
    /// Sup-norm of the reduced gradient restricted to the search space.
    pub grad_sup: f64,
    /// Sup-norm of the full reduced gradient, including modes `≥ N`.
    pub grad_sup_full: f64,
    pub height: f64,
    pub gamma0: f64,
    pub min_chi_prime: f64,
    pub geometry: GeometryReport,
    pub residuals: ResidualReport,
    pub w_cos: Vec<f64>,
    pub w_sin: Vec<f64>,
    #[serde(skip)]
    pub history: Vec<f64>,
}

/// Search-space coordinates: cosine modes `1..N` then sine modes `2..N`,
/// each scaled by `√h_k`, `h_k = π(g + c²k + E₂₂k⁴)`.
struct Chart {
    n: usize,
    m: usize,
    scale: Vec<f64>,
}

impl Chart {
    fn new(cfg: &SolveConfig, e22: f64) -> Self {
        let n = cfg.n_modes;
        let h = |k: usize| {
            let k = k as f64;
            (std::f64::consts::PI * (cfg.g + cfg.c2 * k + e22 * k.powi(4))).sqrt()
        };
        let scale = (1..n).chain(2..n).map(h).collect();
        Self { n, m: cfg.grid, scale }
    }

    #[cfg(test)]
    fn dim(&self) -> usize {
        self.scale.len()
    }

    fn split(&self, coef: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let cos = coef[..n - 1].to_vec();
        let mut sin = vec![0.0];
        sin.extend_from_slice(&coef[n - 1..]);
        (cos, sin)
    }

    fn field(&self, y: &[f64]) -> Result<Field, SpectralError> {
        let coef: Vec<f64> = y.iter().zip(&self.scale).map(|(y, s)| y / s).collect();
        let (c, s) = self.split(&coef);
        Field::from_trig(self.m, 0.0, &c, &s)
    }

    fn coords(&self, w: &Field) -> Vec<f64> {
        let n = self.n;
        let mut coef: Vec<f64> = (1..n).map(|k| w.trig_coeff(k).0).collect();
        coef.extend((2..n).map(|k| w.trig_coeff(k).1));
        coef.iter().zip(&self.scale).map(|(c, s)| c * s).collect()
    }

    /// `∂/∂y` of `−J̃` from the gradient field `G`.
    fn gradient(&self, gfield: &Field) -> Vec<f64> {
        let tp = 2.0 * std::f64::consts::PI;
        let n = self.n;
        let mut d: Vec<f64> = (1..n).map(|k| -tp * gfield.coeff(k as i64).re).collect();
        d.extend((2..n).map(|k| tp * gfield.coeff(k as i64).im));
        d.iter().zip(&self.scale).map(|(d, s)| d / s).collect()
    }
}

struct Point {
    y: Vec<f64>,
    f: f64,
    grad: Vec<f64>,
    state: WaveState,
    gfield: Field,
    gsup: f64,
}

enum Eval {
    Ok(Box<Point>),
    Guard,
    Fail,
}

struct Objective<'a, M: EnergyModel + ?Sized> {
    chart: Chart,
    model: &'a M,
    c2: f64,
    g: f64,
    evaluations: usize,
}

impl<M: EnergyModel + ?Sized> Objective<'_, M> {
    fn eval(&mut self, y: Vec<f64>, gamma_guess: Option<f64>) -> Eval {
        let w = match self.chart.field(&y) {
            Ok(w) => w,
            Err(_) => return Eval::Fail,
        };
        match Geometry::new(&w) {
            Ok(geom) if geom.min_omega() >= GUARD_OMEGA => {}
            Ok(_) | Err(_) => return Eval::Guard,
        }
        self.evaluations += 1;
        let Ok((j, state)) = reduced(&w, self.model, self.c2, self.g, gamma_guess) else {
            return Eval::Fail;
        };
        let Ok(gfield) = grad_w_reduced(&state, self.model) else {
            return Eval::Fail;
        };
        if !j.is_finite() {
            return Eval::Fail;
        }
        let grad = self.chart.gradient(&gfield);
        let gsup = projected_sup(&gfield, self.chart.n);
        Eval::Ok(Box::new(Point { y, f: -j, grad, state, gfield, gsup }))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn two_loop(grad: &[f64], mem: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = grad.to_vec();
    let mut alphas = Vec::with_capacity(mem.len());
    for (s, y, rho) in mem.iter().rev() {
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(q, y)| *q -= a * y);
        alphas.push(a);
    }
    if let Some((s, y, _)) = mem.back() {
        let h0 = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= h0);
    }
    for ((s, y, rho), a) in mem.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(q, s)| *q += (a - b) * s);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

fn projected_sup(gfield: &Field, n: usize) -> f64 {
    gfield.lowpass(n - 1).sup_norm()
}

/// `w = ε₀ cos τ` with `χ′ = (1 + ε₀ cos τ)/mean`.
pub fn initial_guess(config: &SolveConfig) -> Result<WaveState, SolveError> {
    config.validate()?;
    let eps = config.eps0;
    let w = Field::from_fn(config.grid, |t| eps * t.cos())?;
    let chi = Field::from_fn(config.grid, |t| 1.0 + eps * t.cos())?;
    Ok(WaveState::with_chi_prime(&w, &chi, config.c2, config.g)?)
}

fn guard_hypotheses<M: EnergyModel + ?Sized>(config: &SolveConfig, model: &M) -> Result<(), SolveError> {
    let report = check_hypotheses(model, config.c2, config.g, config.mu_star, &GridSpec::default())?;
    if !report.mandatory_ok() {
        let failed: Vec<&str> =
            report.checks.iter().filter(|c| c.status.is_fail()).map(|c| c.id.as_str()).collect();
        return Err(SolveError::Hypothesis(format!("failing checks: {}", failed.join(", "))));
    }
    Ok(())
}

/// Maximizes `J̃` from `ε₀ cos τ`.
pub fn maximize<M: EnergyModel + ?Sized>(config: &SolveConfig, model: &M) -> Result<SolveResult, SolveError> {
    maximize_from(config, model, None)
}

/// Maximizes `J̃`, starting from `start` when given (resampled to the
/// configured grid and truncated to the configured modes).
pub fn maximize_from<M: EnergyModel + ?Sized>(
    config: &SolveConfig,
    model: &M,
    start: Option<&Field>,
) -> Result<SolveResult, SolveError> {
    config.validate()?;
    if config.check {
        guard_hypotheses(config, model)?;
    }
    let chart = Chart::new(config, model.e22_rest());
    let w0 = match start {
        Some(w) => w.resample(config.grid)?,
        None => Field::from_fn(config.grid, |t| config.eps0 * t.cos())?,
    };
    let y0 = chart.coords(&w0);
    let mut obj = Objective { chart, model, c2: config.c2, g: config.g, evaluations: 0 };
    let mut cur = match obj.eval(y0, None) {
        Eval::Ok(p) => p,
        _ => return Err(SolveError::Degenerate("initial state is not admissible".into())),
    };
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(HISTORY);
    let mut history = vec![-cur.f];
    let mut iterations = 0;
    let mut restarts = 0;
    // Remaining steps of a gradient restart; zero means quasi-Newton.
    let mut polish = 0usize;
    let mut best = cur.gsup;
    let mut since_best = 0usize;
    let mut converged = cur.gsup <= config.tol_grad;

    while !converged && iterations < config.max_iter {
        let mut d: Vec<f64> =
            if polish > 0 { cur.grad.iter().map(|g| -g).collect() } else { two_loop(&cur.grad, &mem) };
        let mut slope = dot(&cur.grad, &d);
        if !(slope < 0.0) {
            mem.clear();
            d = cur.grad.iter().map(|g| -g).collect();
            slope = dot(&cur.grad, &d);
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let y: Vec<f64> = cur.y.iter().zip(&d).map(|(y, d)| y + alpha * d).collect();
            match obj.eval(y, cur.state.gamma0) {
                Eval::Ok(p) => {
                    let armijo = p.f <= cur.f + ARMIJO * alpha * slope;
                    let ds = dot(&p.grad, &d);
                    // Near a maximizer the change in J̃ drops below its rounding
                    // error; steps are then judged by the gradient instead.
                    let level = p.f <= cur.f + F_TOL * cur.f.abs().max(1.0);
                    let approx_wolfe = level && ds >= 0.9 * slope && ds <= -0.8 * slope;
                    let flatter = level && p.gsup < 0.9 * cur.gsup;
                    if armijo || approx_wolfe || flatter {
                        accepted = Some(p);
                        break;
                    }
                }
                Eval::Guard | Eval::Fail => {}
            }
            alpha *= BACKTRACK;
        }
        iterations += 1;
        let Some(p) = accepted else {
            if polish > 0 {
                break;
            }
            mem.clear();
            polish = POLISH_STEPS;
            restarts += 1;
            continue;
        };
        let s: Vec<f64> = p.y.iter().zip(&cur.y).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = p.grad.iter().zip(&cur.grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        if sy > 1e-14 * dot(&s, &s).sqrt() * dot(&yv, &yv).sqrt() {
            if mem.len() == HISTORY {
                mem.pop_front();
            }
            mem.push_back((s, yv, 1.0 / sy));
        }
        cur = p;
        history.push(-cur.f);
        converged = cur.gsup <= config.tol_grad;
        if cur.gsup < 0.5 * best {
            best = cur.gsup;
            since_best = 0;
        } else {
            since_best += 1;
        }
        if polish > 0 {
            polish -= 1;
            if polish == 0 {
                mem.clear();
            }
        } else if since_best >= STALL_STEPS {
            mem.clear();
            polish = POLISH_STEPS;
            restarts += 1;
            since_best = 0;
        }
    }

    let min_omega = cur.state.geom.min_omega();
    if min_omega < ABORT_OMEGA {
        return Err(SolveError::Degenerate(format!("min Omega = {min_omega:e}")));
    }
    finish(cur, config, model, iterations, obj.evaluations, restarts, converged, history)
}

#[allow(clippy::too_many_arguments)]
fn finish<M: EnergyModel + ?Sized>(
    p: Box<Point>,
    config: &SolveConfig,
    model: &M,
    iterations: usize,
    evaluations: usize,
    restarts: usize,
    converged: bool,
    history: Vec<f64>,
) -> Result<SolveResult, SolveError> {
    let Point { state, gfield, .. } = *p;
    let geometry = GeometryReport::from_geometry(&state.geom);
    if geometry.self_intersects {
        return Err(SolveError::Degenerate("profile self-intersects".into()));
    }
    let residuals = certify(&state, model)?;
    let w = state.w();
    let n = config.n_modes;
    let w_cos = (1..n).map(|k| w.trig_coeff(k).0).collect();
    let w_sin = (1..n).map(|k| w.trig_coeff(k).1).collect();
    Ok(SolveResult {
        c2: state.c2,
        j0_value: j0(&state, model)?,
        iterations,
        evaluations,
        restarts,
        converged,
        trivial: w.sup_norm() < TRIVIAL_AMPLITUDE,
        grad_sup: projected_sup(&gfield, n),
        grad_sup_full: gfield.sup_norm(),
        height: w.max() - w.min(),
        gamma0: state.gamma0.unwrap_or(residuals.gamma0),
        min_chi_prime: state.min_chi_prime(),
        geometry,
        residuals,
        w_cos,
        w_sin,
        history,
        state,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub c2: f64,
    pub result: Option<SolveResult>,
    pub error: Option<String>,
}

/// Solves along `config.schedule`, warm-starting each point from the last
/// converged nontrivial state. Failures are recorded and the sweep goes on.
pub fn continuation_sweep<M: EnergyModel + ?Sized>(config: &SolveConfig, model: &M) -> Vec<SweepPoint> {
    let interval = config.check.then(|| admissible_c2_interval(model, config.g, config.mu_star, 1e3));
    let closed = model.closed_form_c2_max(config.g);
    let mut warm: Option<Field> = None;
    let mut out = Vec::with_capacity(config.schedule.len());
    for &c2 in &config.schedule {
        let cfg = SolveConfig { c2, ..config.clone() };
        let outcome = (|| {
            if let Some(iv) = &interval {
                let hi = closed.map_or(iv.hi, |c| c.min(iv.hi));
                if iv.empty || !(c2 > iv.lo && c2 <= hi) {
                    return Err(SolveError::Inadmissible { c2, lo: iv.lo, hi });
                }
            }
            maximize_from(&cfg, model, warm.as_ref())
        })();
        match outcome {
            Ok(r) => {
                if r.converged && !r.trivial {
                    warm = Some(r.state.w().clone());
                }
                out.push(SweepPoint { c2, result: Some(r), error: None });
            }
            Err(e) => out.push(SweepPoint { c2, result: None, error: Some(e.to_string()) }),
        }
    }
    out
}
