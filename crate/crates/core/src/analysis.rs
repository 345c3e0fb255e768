//! Post-processing of histories and damage fields: failure strain, band
//! orientation and width, and peaks on either side of a phase interface.
//!
//! Field analyses work on the first `x3` layer of the grid.

use std::collections::VecDeque;

use crate::fft::FftEngine;
use crate::grid::GridSpec;

/// Index, strain and stress of the stress maximum of a curve.
pub fn peak(curve: &[(f64, f64)]) -> Option<(usize, f64, f64)> {
    curve
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .map(|(i, &(e, s))| (i, e, s))
}

/// Strain at which the stress first falls to `fraction` of its peak after
/// the peak, interpolated linearly between recorded points.
pub fn failure_strain(curve: &[(f64, f64)], fraction: f64) -> Option<f64> {
    let (ip, _, sp) = peak(curve)?;
    if sp <= 0.0 {
        return None;
    }
    let level = fraction * sp;
    curve[ip..].windows(2).find_map(|w| {
        let ((e0, s0), (e1, s1)) = (w[0], w[1]);
        (s1 <= level).then(|| if s0 == s1 { e1 } else { e0 + (s0 - level) / (s0 - s1) * (e1 - e0) })
    })
}

/// Orientation of an elongated feature.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BandOrientation {
    /// Acute angle between the band axis and `x1`, degrees in `[0, 90]`.
    pub angle: f64,
    /// Square root of the ratio of principal second moments.
    pub elongation: f64,
}

fn layer(grid: &GridSpec, field: &[f64]) -> (usize, usize, Vec<f64>) {
    let [n1, n2, _] = grid.cells();
    (n1, n2, field[..n1 * n2].to_vec())
}

/// Periodic autocorrelation of the fluctuation of one layer, normalized to
/// one at zero shift.
pub fn autocorrelation(grid: &GridSpec, field: &[f64]) -> Option<Vec<f64>> {
    let (n1, n2, mut v) = layer(grid, field);
    let g2 = GridSpec::new([n1, n2, 1], [1.0, 1.0, 1.0]).ok()?;
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
    let engine = FftEngine::new(&g2);
    let mut spec = engine.forward(&v);
    spec.iter_mut().for_each(|c| *c *= c.conj());
    let a = engine.inverse(&spec);
    let a0 = a[0];
    (a0 > 0.0).then(|| a.iter().map(|x| x / a0).collect())
}

/// Band orientation from the second moments of the central lobe of the
/// periodic autocorrelation (the 8-connected region above one half around
/// zero shift). Shifts are measured in physical units, so anisotropic
/// spacings are handled. `None` for a flat field or a single-point lobe.
pub fn band_orientation(grid: &GridSpec, field: &[f64]) -> Option<BandOrientation> {
    let a = autocorrelation(grid, field)?;
    let [n1, n2, _] = grid.cells();
    let h = grid.spacing();
    let (h1, h2) = (n1 as i64 / 2, n2 as i64 / 2);
    let mut seen = vec![false; n1 * n2];
    let mut queue = VecDeque::from([(0i64, 0i64)]);
    seen[0] = true;
    let (mut mxx, mut myy, mut mxy) = (0.0, 0.0, 0.0);
    while let Some((dx, dy)) = queue.pop_front() {
        let idx = dx.rem_euclid(n1 as i64) as usize + n1 * dy.rem_euclid(n2 as i64) as usize;
        let w = a[idx];
        let (x, y) = (dx as f64 * h[0], dy as f64 * h[1]);
        mxx += w * x * x;
        myy += w * y * y;
        mxy += w * x * y;
        for (sx, sy) in [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1), (1, -1), (-1, 1)] {
            let (nx, ny) = (dx + sx, dy + sy);
            if nx.abs() > h1 || ny.abs() > h2 {
                continue;
            }
            let j = nx.rem_euclid(n1 as i64) as usize + n1 * ny.rem_euclid(n2 as i64) as usize;
            if !seen[j] && a[j] >= 0.5 {
                seen[j] = true;
                queue.push_back((nx, ny));
            }
        }
    }
    if mxx + myy <= 0.0 {
        return None;
    }
    let phi = 0.5 * (2.0 * mxy).atan2(mxx - myy);
    let tr = mxx + myy;
    let disc = ((mxx - myy).powi(2) + 4.0 * mxy * mxy).sqrt();
    let (l1, l2) = (0.5 * (tr + disc), 0.5 * (tr - disc));
    let elongation = if l2 > 0.0 { (l1 / l2).sqrt() } else { f64::INFINITY };
    Some(BandOrientation { angle: phi.to_degrees().abs(), elongation })
}

/// Full width at half maximum of a periodic 1D profile around its maximum,
/// in samples; `None` for a flat profile.
pub fn profile_fwhm(v: &[f64]) -> Option<f64> {
    let n = v.len();
    let (im, &max) = v.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    if max - min <= 1e-12 * max.abs().max(1.0) {
        return None;
    }
    let half = min + 0.5 * (max - min);
    let at = |k: i64| v[k.rem_euclid(n as i64) as usize];
    let edge = |dir: i64| {
        let mut k = im as i64;
        for _ in 0..n {
            let next = k + dir;
            let (a, b) = (at(k), at(next));
            if b < half {
                return (k as f64) + dir as f64 * (a - half) / (a - b);
            }
            k = next;
        }
        k as f64
    };
    Some((edge(1) - edge(-1)).min(n as f64))
}

/// Width of a band measured normal to its axis, in voxels of the first
/// axis: the median FWHM of cuts along `x1` (or `x2` for bands closer to
/// horizontal) times the obliquity factor.
pub fn band_width(grid: &GridSpec, field: &[f64], angle_deg: f64) -> Option<f64> {
    let (n1, n2, v) = layer(grid, field);
    let a = angle_deg.to_radians();
    let mut widths: Vec<f64> = if angle_deg >= 45.0 {
        (0..n2).filter_map(|j| profile_fwhm(&v[j * n1..(j + 1) * n1])).map(|w| w * a.sin()).collect()
    } else {
        let r = grid.spacing()[1] / grid.spacing()[0];
        (0..n1)
            .filter_map(|i| {
                let col: Vec<f64> = (0..n2).map(|j| v[i + j * n1]).collect();
                profile_fwhm(&col)
            })
            .map(|w| w * a.cos() * r)
            .collect()
    };
    if widths.is_empty() {
        return None;
    }
    widths.sort_by(f64::total_cmp);
    Some(widths[widths.len() / 2])
}

/// Largest value inside `phase` and largest value among the other phases'
/// voxels within `shell` voxels (periodic Chebyshev distance) of it.
pub fn interface_peaks(grid: &GridSpec, phases: &[u8], field: &[f64], phase: u8, shell: usize) -> (f64, f64) {
    let [n1, n2, n3] = grid.cells();
    let s = shell as i64;
    let mut inside: f64 = f64::NEG_INFINITY;
    let mut outside: f64 = f64::NEG_INFINITY;
    for i in 0..grid.len() {
        if phases[i] == phase {
            inside = inside.max(field[i]);
            continue;
        }
        let [c1, c2, c3] = grid.coords(i);
        let r3 = if n3 > 1 { s } else { 0 };
        let near = (-s..=s).any(|d1| {
            (-s..=s).any(|d2| {
                (-r3..=r3).any(|d3| {
                    let j = grid.index(
                        (c1 as i64 + d1).rem_euclid(n1 as i64) as usize,
                        (c2 as i64 + d2).rem_euclid(n2 as i64) as usize,
                        (c3 as i64 + d3).rem_euclid(n3 as i64) as usize,
                    );
                    phases[j] == phase
                })
            })
        });
        if near {
            outside = outside.max(field[i]);
        }
    }
    (inside, outside)
}

/// Whether every value is at least the corresponding earlier one.
pub fn is_monotone(before: &[f64], after: &[f64]) -> bool {
    before.len() == after.len() && before.iter().zip(after).all(|(a, b)| b >= a)
}
