//! Synthetic two-phase RVEs: a centered disc in 2D, periodic random
//! sequential adsorption of identical spheres in 3D. Matrix is phase 0,
//! inclusions phase 1.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::microstructure::PhaseGrid;
use super::IoError;
use crate::grid::GridSpec;

/// Attempts per sphere before the packing is declared infeasible.
pub const RSA_ATTEMPTS: usize = 100_000;

/// Radius of a centered disc covering `fraction` of the cell area.
pub fn disc_radius(grid: &GridSpec, fraction: f64) -> f64 {
    let [l1, l2, _] = grid.lengths();
    (fraction * l1 * l2 / std::f64::consts::PI).sqrt()
}

/// Centered circular inclusion; a voxel belongs to it iff its center lies
/// strictly inside the disc.
pub fn generate_rve_2d(grid: &GridSpec, fraction: f64) -> PhaseGrid {
    let r = disc_radius(grid, fraction.max(0.0));
    let [l1, l2, _] = grid.lengths();
    let phases = (0..grid.len())
        .map(|i| {
            let c = grid.center(i);
            u8::from((c[0] - 0.5 * l1).powi(2) + (c[1] - 0.5 * l2).powi(2) < r * r)
        })
        .collect();
    PhaseGrid { grid: grid.clone(), phases }
}

/// Radius of `n` identical spheres occupying `fraction` of the cell.
pub fn sphere_radius(grid: &GridSpec, n: usize, fraction: f64) -> f64 {
    (3.0 * fraction * grid.volume() / (4.0 * std::f64::consts::PI * n as f64)).cbrt()
}

fn periodic_dist_sq(a: &[f64; 3], b: &[f64; 3], lengths: &[f64; 3]) -> f64 {
    (0..3)
        .map(|d| {
            let mut x = (a[d] - b[d]).abs() % lengths[d];
            x = x.min(lengths[d] - x);
            x * x
        })
        .sum()
}

/// Sphere centers placed by periodic random sequential adsorption.
pub fn pack_spheres(grid: &GridSpec, n: usize, fraction: f64, seed: u64) -> Result<(Vec<[f64; 3]>, f64), IoError> {
    let r = sphere_radius(grid, n, fraction);
    let lengths = grid.lengths();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<[f64; 3]> = Vec::with_capacity(n);
    let min_sq = 4.0 * r * r;
    while centers.len() < n {
        let mut placed = false;
        for _ in 0..RSA_ATTEMPTS {
            let c = [0, 1, 2].map(|d| rng.random::<f64>() * lengths[d]);
            if centers.iter().all(|o| periodic_dist_sq(&c, o, &lengths) >= min_sq) {
                centers.push(c);
                placed = true;
                break;
            }
        }
        if !placed {
            let achieved = centers.len() as f64 * 4.0 / 3.0 * std::f64::consts::PI * r.powi(3) / grid.volume();
            return Err(IoError::Packing { placed: centers.len(), requested: n, achieved });
        }
    }
    Ok((centers, r))
}

/// Periodic, non-overlapping identical spheres; deterministic in `seed`.
pub fn generate_rve_3d_spheres(grid: &GridSpec, n: usize, fraction: f64, seed: u64) -> Result<PhaseGrid, IoError> {
    if n == 0 || !(fraction > 0.0 && fraction < 1.0) {
        return Err(IoError::Config("need at least one sphere and a fraction in (0, 1)".into()));
    }
    let (centers, r) = pack_spheres(grid, n, fraction, seed)?;
    let lengths = grid.lengths();
    let phases = (0..grid.len())
        .map(|i| {
            let c = grid.center(i);
            u8::from(centers.iter().any(|s| periodic_dist_sq(&c, s, &lengths) < r * r))
        })
        .collect();
    Ok(PhaseGrid { grid: grid.clone(), phases })
}
