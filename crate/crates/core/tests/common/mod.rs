#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use optrec_core::{ModelSet, ObservationSetup};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

pub struct Instance {
    pub obs: ObservationSetup,
    pub model: ModelSet,
    pub y: DVector<f64>,
}

/// Gaussian instance whose data come from an element at distance
/// `frac * eps` from `V`, so the data are consistent with the model set.
pub fn instance(seed: u64, big_n: usize, m: usize, n: usize, eps: f64, frac: f64) -> Instance {
    let mut r = rng(seed);
    let obs = ObservationSetup::new(gaussian(&mut r, m, big_n)).unwrap();
    let model = ModelSet::new(gaussian(&mut r, big_n, n), eps).unwrap();
    let v = model.combine(&gaussian_vec(&mut r, n));
    let e = model.residual(&gaussian_vec(&mut r, big_n));
    let f0 = v + e.clone() * (frac * eps / e.norm().max(1e-300));
    let y = obs.observe(&f0);
    Instance { obs, model, y }
}

/// Random sizes `(N, m, n)` with `n <= m <= N`.
pub fn sizes(seed: u64, max_n: usize) -> (usize, usize, usize) {
    let mut r = rng(seed ^ 0x5eed);
    let big_n = r.random_range(2..=max_n);
    let m = r.random_range(1..=big_n);
    let n = r.random_range(0..=m);
    (big_n, m, n)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}
