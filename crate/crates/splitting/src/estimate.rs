use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use torus_geometry::{Grid, TorusPoint};

use dynamics_catalog::MapSpec;

use crate::{
    constants_from_frames, finish_splitting, orthonormalize, random_point, Frame, Representation, Splitting,
    SplittingError,
};

pub const DEFAULT_ORBIT_LENGTH: usize = 40;

/// Fixed generic orthonormal frame; coordinate frames can sit inside
/// invariant subspaces.
fn generic_frame(d: usize) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6e6e);
    let m = DMatrix::from_fn(d, d, |_, _| rng.random::<f64>() - 0.5);
    m.qr().q()
}

/// Push a generic frame along an orbit with QR re-orthonormalization.
/// Returns the final orthonormal frame and the accumulated log growth of
/// each column.
fn push_frame(d: usize, steps: impl Iterator<Item = DMatrix<f64>>) -> (DMatrix<f64>, Vec<f64>) {
    let mut q = generic_frame(d);
    let mut logs = vec![0.0; d];
    for m in steps {
        let qr = (m * q).qr();
        let r = qr.r();
        let mut qq = qr.q();
        for i in 0..d {
            // keep a positive diagonal so columns do not flip sign
            if r[(i, i)] < 0.0 {
                qq.column_mut(i).neg_mut();
            }
            logs[i] += r[(i, i)].abs().ln();
        }
        q = qq;
    }
    (q, logs)
}

/// `E^{cu}` and `E^{cs}` frames at `x` with the column growth rates.
fn power_frames(f: &MapSpec, x: &TorusPoint, n: usize) -> (DMatrix<f64>, DMatrix<f64>, Vec<f64>) {
    let d = f.dim();
    let mut back = Vec::with_capacity(n + 1);
    back.push(*x);
    for k in 0..n {
        back.push(f.inverse(&back[k]));
    }
    // Df(p_n), ..., Df(p_1): from f^{-n}(x) forward to x
    let (qu, logs) = push_frame(d, (1..=n).rev().map(|k| f.differential(&back[k])));
    let mut fwd = Vec::with_capacity(n + 1);
    fwd.push(*x);
    for k in 0..n {
        fwd.push(f.forward(&fwd[k]));
    }
    let (qs, _) =
        push_frame(d, (0..n).rev().map(|k| f.differential(&fwd[k]).try_inverse().expect("differential is invertible")));
    let rates = logs.iter().map(|l| l / n as f64).collect();
    (qu, qs, rates)
}

/// Growth rates (finite-time Lyapunov exponents) along the backward orbit
/// of length `n` ending at `x`, in decreasing order.
pub fn growth_rates(f: &MapSpec, x: &TorusPoint, n: usize) -> Vec<f64> {
    power_frames(f, x, n).2
}

/// `(d_s, d_c, d_u)` from growth rates: the `d_c` rates closest to zero are
/// center, the remaining positive ones unstable.
fn classify(rates: &[f64], dc: usize) -> Result<(usize, usize, usize), SplittingError> {
    let mut by_size: Vec<f64> = rates.to_vec();
    by_size.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let rest = &by_size[dc..];
    if dc > 0 && !rest.is_empty() && by_size[dc - 1].abs() >= rest[0].abs() * 0.5 {
        return Err(SplittingError::NoGap(format!("growth rates {rates:?}")));
    }
    if rest.iter().any(|r| r.abs() < 1e-6) {
        return Err(SplittingError::NoGap(format!("growth rates {rates:?}")));
    }
    let du = rest.iter().filter(|&&r| r > 0.0).count();
    Ok((rest.len() - du, dc, du))
}

/// Splitting at one point by power iteration along its orbit.
pub fn estimate_frame_at(
    f: &MapSpec,
    x: &TorusPoint,
    orbit_length: usize,
    dims: (usize, usize, usize),
) -> Result<Frame, SplittingError> {
    let (ds, dc, du) = dims;
    let (qu, qs, _) = power_frames(f, x, orbit_length);
    let bu = qu.columns(0, du).into_owned();
    let bs = qs.columns(0, ds).into_owned();
    let bc = if dc == 0 {
        DMatrix::zeros(f.dim(), 0)
    } else {
        let bcu = qu.columns(0, du + dc).into_owned();
        let bcs = qs.columns(0, ds + dc).into_owned();
        intersection(&bcu, &bcs, dc)
    };
    Frame::from_bases(&bs, &bc, &bu)
}

/// `dc`-dimensional intersection of two column spans.
fn intersection(a: &DMatrix<f64>, b: &DMatrix<f64>, dc: usize) -> DMatrix<f64> {
    let (d, na, nb) = (a.nrows(), a.ncols(), b.ncols());
    let mut m = DMatrix::zeros(d, na + nb);
    m.columns_mut(0, na).copy_from(a);
    m.columns_mut(na, nb).copy_from(&(-b));
    let eig = (m.transpose() * &m).symmetric_eigen();
    let mut order: Vec<usize> = (0..na + nb).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let mut out = DMatrix::zeros(d, dc);
    for (k, &j) in order.iter().take(dc).enumerate() {
        let coeff = eig.eigenvectors.column(j).rows(0, na).into_owned();
        out.set_column(k, &(a * coeff));
    }
    orthonormalize(&out)
}

/// Per-grid-point splitting by power iteration; constants are the extreme
/// one-step growth factors over the grid.
pub fn estimate_splitting(f: &MapSpec, orbit_length: usize, grid: &Grid) -> Result<Splitting, SplittingError> {
    estimate_splitting_seeded(f, orbit_length, grid, 0)
}

pub fn estimate_splitting_seeded(
    f: &MapSpec,
    orbit_length: usize,
    grid: &Grid,
    seed: u64,
) -> Result<Splitting, SplittingError> {
    let d = f.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let probe = random_point(&mut rng, d);
    let (_, _, rates) = power_frames(f, &probe, orbit_length);
    let dims = classify(&rates, f.center_dimension())?;
    let points: Vec<TorusPoint> = grid.nodes().collect();
    let frames =
        points.par_iter().map(|x| estimate_frame_at(f, x, orbit_length, dims)).collect::<Result<Vec<_>, _>>()?;
    let constants = constants_from_frames(f, &points, &frames);
    finish_splitting(d, dims, Representation::PerGridPoint { grid: grid.clone(), frames }, constants, seed)
}
