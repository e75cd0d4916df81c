#![allow(dead_code)]

use hydroelastic::energy::{IllustrativeEnergy, IllustrativeParams};
use hydroelastic::spectral::Field;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn reference_params() -> IllustrativeParams {
    IllustrativeParams { a: 40.0, b: 30.0, beta: 0.5, d: 0.25, r: 4.0, s: 3.0, p: 4.0, alpha: 2.0, delta: 0.5 }
}

pub fn reference_model() -> IllustrativeEnergy {
    IllustrativeEnergy::new(reference_params()).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Zero-mean field with modes `1..=k`, coefficients uniform in `[-1, 1]/n²`.
pub fn random_field(rng: &mut ChaCha8Rng, m: usize, k: usize) -> Field {
    let c: Vec<f64> = (1..=k).map(|n| rng.gen_range(-1.0..1.0) / (n * n) as f64).collect();
    let s: Vec<f64> = (1..=k).map(|n| rng.gen_range(-1.0..1.0) / (n * n) as f64).collect();
    Field::from_trig(m, 0.0, &c, &s).unwrap()
}

/// Zero-mean elevation with `Σ n|ŵₙ|·2 = amp`, so that `Ω ≥ 1 − amp`.
pub fn random_elevation(rng: &mut ChaCha8Rng, m: usize, k: usize, amp: f64) -> Field {
    let w = random_field(rng, m, k);
    let norm: f64 = (1..=k).map(|n| 2.0 * n as f64 * w.coeff(n as i64).norm()).sum();
    w.scale(amp / norm)
}

/// Random elevation with random bandwidth in `1..=kmax` and amplitude in
/// `[0.02, amp_max]`.
pub fn random_state_w(rng: &mut ChaCha8Rng, m: usize, kmax: usize, amp_max: f64) -> Field {
    let k = rng.gen_range(1..=kmax);
    let amp = rng.gen_range(0.02..amp_max);
    random_elevation(rng, m, k, amp)
}
