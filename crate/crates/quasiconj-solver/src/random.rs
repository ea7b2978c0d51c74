use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use section_space::{sample_section, Section};
use torus_geometry::{Grid, Vector};

const MODES: usize = 4;
const MAX_FREQUENCY: i32 = 2;

/// A smooth random section with unit sup norm: a few low-frequency
/// Fourier modes with random vector amplitudes.
pub fn random_section(grid: &Grid, seed: u64) -> Section {
    let d = grid.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<(Vec<f64>, f64, Vector)> = (0..MODES)
        .map(|_| {
            let k = (0..d).map(|_| rng.random_range(-MAX_FREQUENCY..=MAX_FREQUENCY) as f64).collect();
            let phase = rng.random::<f64>() * TAU;
            let mut a = Vector::zeros(d);
            for i in 0..d {
                a[i] = rng.random::<f64>() * 2.0 - 1.0;
            }
            (k, phase, a)
        })
        .collect();
    let s = sample_section(grid, |x| {
        let mut v = Vector::zeros(d);
        for (k, phase, a) in &modes {
            let arg: f64 = k.iter().zip(x.coords()).map(|(k, x)| k * x).sum();
            v += *a * (TAU * arg + phase).cos();
        }
        v
    })
    .expect("finite modes");
    let n = s.sup_norm();
    if n > 0.0 {
        s.scale(1.0 / n)
    } else {
        s
    }
}
