//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process fails if any criterion fails.
//!
//! Pass criterion numbers as arguments to run a subset, e.g.
//! `cargo test --release --test acceptance -- 1 2 10`.
//! Set `ACCEPTANCE_PROGRESS=1` for per-increment lines on stderr.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spectral_damage::analysis::{band_orientation, band_width, failure_strain, interface_peaks, is_monotone, peak};
use spectral_damage::driver::{DriverError, RunEnd, Simulation, StaggeredConfig};
use spectral_damage::exec::Exec;
use spectral_damage::fft::FftEngine;
use spectral_damage::grid::{FrequencyTable, GridSpec, Scheme};
use spectral_damage::helmholtz::{CgConfig, HelmholtzSolver};
use spectral_damage::io::generate::{generate_rve_2d, generate_rve_3d_spheres};
use spectral_damage::materials::{
    aravas_flow_stress, ElasticModuli, Gurson, GursonParams, Internal, Lemaitre, Material, Nonlocal,
    VoxelState,
};
use spectral_damage::mechanics::{MacroLoad, MaterialMap, MechanicsSolver, NewtonConfig};
use spectral_damage::presets::{Preset, ELL_INCLUSION, ELL_LOCAL, ELL_MATRIX};
use spectral_damage::tensor::SymTensor;

type Outcome = Result<String, String>;

fn report_progress(label: &str, sim: &Simulation) {
    if std::env::var_os("ACCEPTANCE_PROGRESS").is_none() {
        return;
    }
    if let Some(r) = sim.history().last() {
        eprintln!(
            "  [{label}] inc {} E11 {:.4} S11 {:.1} stag {} newton {} cutbacks {} max damage {:.3} ({:.1} s)",
            r.increment,
            r.strain[0],
            r.stress[0],
            r.staggered_iterations,
            r.newton_iterations,
            sim.history().cutbacks,
            r.max_damage,
            r.wall_time
        );
    }
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform(r: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * r.random::<f64>()
}

// ---------------------------------------------------------------------------
// Helmholtz oracles

fn helmholtz(grid: &GridSpec, scheme: Scheme, ell_sq: Vec<f64>) -> HelmholtzSolver {
    let engine = Arc::new(FftEngine::new(grid));
    let freq = Arc::new(FrequencyTable::new(grid, scheme));
    HelmholtzSolver::new(engine, freq, ell_sq).expect("valid lengths")
}

fn shift(grid: &GridSpec, i: usize, d: [usize; 3]) -> usize {
    let c = grid.coords(i);
    let n = grid.cells();
    grid.index((c[0] + d[0]) % n[0], (c[1] + d[1]) % n[1], (c[2] + d[2]) % n[2])
}

/// Finite-volume assembly of `I - div(ℓ² grad)` with harmonic-mean face
/// coefficients.
fn finite_volume_matrix(grid: &GridSpec, ell_sq: &[f64]) -> DMatrix<f64> {
    let n = grid.len();
    let h = grid.spacing();
    let mut m = DMatrix::identity(n, n);
    for j in (0..3).filter(|&j| grid.cells()[j] > 1) {
        let mut d = [0; 3];
        d[j] = 1;
        for i in 0..n {
            let up = shift(grid, i, d);
            let (a, b) = (ell_sq[i], ell_sq[up]);
            let w = if a + b > 0.0 { 2.0 * a * b / (a + b) } else { 0.0 } / (h[j] * h[j]);
            m[(i, i)] += w;
            m[(up, up)] += w;
            m[(i, up)] -= w;
            m[(up, i)] -= w;
        }
    }
    m
}

/// Rotated-scheme assembly: the gradient along `j` is the forward
/// difference averaged over the cell edges parallel to `j` that meet at the
/// upper corner of each voxel, and `ℓ²` is taken per voxel.
fn rotated_matrix(grid: &GridSpec, ell_sq: &[f64]) -> DMatrix<f64> {
    let n = grid.len();
    let h = grid.spacing();
    let active: Vec<usize> = (0..3).filter(|&j| grid.cells()[j] > 1).collect();
    let mut m = DMatrix::identity(n, n);
    for &j in &active {
        let others: Vec<usize> = active.iter().copied().filter(|&l| l != j).collect();
        let corners = 1usize << others.len();
        let mut g = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for bits in 0..corners {
                let mut d = [0usize; 3];
                for (b, &l) in others.iter().enumerate() {
                    d[l] = (bits >> b) & 1;
                }
                let lo = shift(grid, i, d);
                d[j] = 1;
                let hi = shift(grid, i, d);
                g[(i, hi)] += 1.0 / (corners as f64 * h[j]);
                g[(i, lo)] -= 1.0 / (corners as f64 * h[j]);
            }
        }
        m += g.transpose() * DMatrix::from_diagonal(&DVector::from_column_slice(ell_sq)) * &g;
    }
    m
}

/// Matrix inclusion with `ℓ_M / ℓ_I = 50`: a centered block of a third of
/// the cell per axis.
fn two_phase_lengths(grid: &GridSpec) -> Vec<f64> {
    let n = grid.cells();
    (0..grid.len())
        .map(|i| {
            let c = grid.coords(i);
            let inside = (0..3).all(|a| n[a] == 1 || (c[a] >= n[a] / 3 && c[a] < n[a] - n[a] / 3));
            if inside {
                ELL_INCLUSION * ELL_INCLUSION
            } else {
                ELL_MATRIX * ELL_MATRIX
            }
        })
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn criterion_1() -> Outcome {
    let cfg = CgConfig { tolerance: 1e-13, max_iter: 10_000, preconditioner: Default::default() };
    let mut worst: f64 = 0.0;
    let mut worst_mean: f64 = 0.0;
    let mut r = rng(1);
    for grid in [GridSpec::square(8, 1.0).unwrap(), GridSpec::cube(8, 1.0).unwrap()] {
        let ell = two_phase_lengths(&grid);
        for scheme in [Scheme::Forward, Scheme::WillotRotated] {
            let dense = match scheme {
                Scheme::Forward => finite_volume_matrix(&grid, &ell),
                _ => rotated_matrix(&grid, &ell),
            };
            let lu = dense.lu();
            let s = helmholtz(&grid, scheme, ell.clone());
            for _ in 0..3 {
                let src: Vec<f64> = (0..grid.len()).map(|_| uniform(&mut r, -1.0, 1.0)).collect();
                let exact = lu.solve(&DVector::from_column_slice(&src)).ok_or("singular dense operator")?;
                let mut sol = vec![0.0; grid.len()];
                s.solve(&src, &mut sol, &cfg).map_err(|e| e.to_string())?;
                let err = (DVector::from_column_slice(&sol) - &exact).norm() / exact.norm();
                worst = worst.max(err);
                worst_mean = worst_mean.max((mean(&sol) - mean(&src)).abs());
            }
        }
    }
    check(
        worst < 1e-8 && worst_mean < 1e-10,
        format!("max relative error {worst:.2e} (limit 1e-8), max mean drift {worst_mean:.2e}"),
    )
}

fn criterion_2() -> Outcome {
    let grid = GridSpec::cube(32, 1.0).unwrap();
    let cfg = CgConfig { tolerance: 1e-10, ..CgConfig::for_cells(grid.cells()) };
    let mut r = rng(2);
    let mut iterations = Vec::new();
    let mut drift: f64 = 0.0;
    for scheme in [Scheme::Forward, Scheme::WillotRotated] {
        let s = helmholtz(&grid, scheme, vec![ELL_MATRIX * ELL_MATRIX; grid.len()]);
        let src: Vec<f64> = (0..grid.len()).map(|_| uniform(&mut r, 0.0, 1.0)).collect();
        let mut sol = vec![0.0; grid.len()];
        let rep = s.solve(&src, &mut sol, &cfg).map_err(|e| e.to_string())?;
        iterations.push(rep.iterations);
        drift = drift.max((mean(&sol) - mean(&src)).abs());
        // Heterogeneous solve for mean preservation.
        let s = helmholtz(&grid, scheme, two_phase_lengths(&grid));
        let mut sol = vec![0.0; grid.len()];
        s.solve(&src, &mut sol, &cfg).map_err(|e| e.to_string())?;
        drift = drift.max((mean(&sol) - mean(&src)).abs());
    }
    check(
        iterations.iter().all(|&i| i == 1) && drift < 1e-10,
        format!("uniform-length iterations {iterations:?} (expected 1), max mean drift {drift:.2e}"),
    )
}

// ---------------------------------------------------------------------------
// Operator properties

fn random_tensor_field(r: &mut ChaCha8Rng, n: usize) -> Vec<SymTensor> {
    (0..n).map(|_| SymTensor(std::array::from_fn(|_| uniform(r, -1.0, 1.0)))).collect()
}

fn field_norm(f: &[SymTensor]) -> f64 {
    f.iter().map(|t| t.dot(t)).sum::<f64>().sqrt()
}

fn criterion_3() -> Outcome {
    let mut runner = TestRunner::new(PropConfig { cases: 48, ..PropConfig::default() });
    let dims = (1usize..9, 1usize..7, 1usize..5, any::<u64>(), 0usize..3);
    let mut failures = Vec::new();
    let result = runner.run(&dims, |(n1, n2, n3, seed, scheme_id)| {
        let grid = GridSpec::new([n1, n2, n3], [1.0, 0.9, 0.7]).unwrap();
        let scheme = [Scheme::Continuous, Scheme::WillotRotated, Scheme::Forward][scheme_id];
        let mut r = rng(seed);
        let n = grid.len();
        let engine = Arc::new(FftEngine::new(&grid));

        // Transform round trip.
        let v: Vec<f64> = (0..n).map(|_| uniform(&mut r, -1.0, 1.0)).collect();
        let back = engine.inverse(&engine.forward(&v));
        let rt = v.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(rt <= 1e-12, "round trip error {rt}");

        // Helmholtz operator: self-adjoint and bounded below by the identity.
        let ell: Vec<f64> = (0..n).map(|_| uniform(&mut r, 0.0, 0.01)).collect();
        let s = helmholtz(&grid, scheme, ell);
        let apply = |f: &[f64]| {
            let a = engine.forward(f);
            let mut out = vec![Complex64::new(0.0, 0.0); a.len()];
            s.apply_operator(&a, &mut out);
            engine.inverse(&out)
        };
        let u: Vec<f64> = (0..n).map(|_| uniform(&mut r, -1.0, 1.0)).collect();
        let w: Vec<f64> = (0..n).map(|_| uniform(&mut r, -1.0, 1.0)).collect();
        let (au, aw) = (apply(&u), apply(&w));
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let (lhs, rhs) = (dot(&au, &w), dot(&u, &aw));
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(dot(&u, &u)), "asymmetry {lhs} vs {rhs}");
        prop_assert!(dot(&au, &u) >= (1.0 - 1e-12) * dot(&u, &u), "operator not bounded below by the identity");

        // Projection idempotence, for the mechanical schemes.
        if scheme != Scheme::Forward {
            let mech = MechanicsSolver::new(engine.clone(), Arc::new(FrequencyTable::new(&grid, scheme)), NewtonConfig::default());
            let mask: [bool; 6] = std::array::from_fn(|_| r.random::<bool>());
            let tau = random_tensor_field(&mut r, n);
            let g1 = mech.apply_g(&tau, &mask);
            let g2 = mech.apply_g(&g1, &mask);
            let diff: Vec<SymTensor> = g1.iter().zip(&g2).map(|(a, b)| *a - *b).collect();
            prop_assert!(field_norm(&diff) <= 1e-10 * field_norm(&tau), "projection not idempotent");
        }
        Ok(())
    });
    if let Err(e) = result {
        failures.push(e.to_string());
    }

    // Dense positive-definiteness on a small heterogeneous grid.
    let grid = GridSpec::new([5, 4, 3], [1.0, 0.8, 0.6]).unwrap();
    let ell = two_phase_lengths(&grid);
    let mut min_eig = f64::INFINITY;
    for dense in [finite_volume_matrix(&grid, &ell), rotated_matrix(&grid, &ell)] {
        min_eig = min_eig.min(dense.symmetric_eigenvalues().min());
    }
    if min_eig < 1.0 - 1e-10 {
        failures.push(format!("smallest eigenvalue {min_eig}"));
    }
    check(
        failures.is_empty(),
        if failures.is_empty() {
            format!("48 random grids and schemes, smallest dense eigenvalue {min_eig:.6}")
        } else {
            failures.join("; ")
        },
    )
}

// ---------------------------------------------------------------------------
// Material points

fn gurson_2d() -> Gurson {
    match Preset::Gurson2d.matrix() {
        Material::Gurson(g) => g,
        _ => unreachable!(),
    }
}

fn lemaitre_2d() -> Lemaitre {
    match Preset::Lemaitre2d.matrix() {
        Material::Lemaitre(l) => l,
        _ => unreachable!(),
    }
}

/// GTN yield function in units of the flow stress.
fn gtn_phi(stress: &SymTensor, sigma0: f64, f_star: f64, p: &GursonParams) -> f64 {
    let dev = stress.deviator();
    let s = (1.5 * dev.dot(&dev)).sqrt();
    let pressure = -stress.trace() / 3.0;
    (s / sigma0).powi(2) + 2.0 * f_star * p.q1 * (-1.5 * p.q2 * pressure / sigma0).cosh() - (1.0 + p.q3 * f_star * f_star)
}

/// Flow stress of the implicit power law by bisection on
/// `y = (y + 3μ ε / σ_Y)^N`.
fn flow_stress_oracle(eps: f64, sigma_y: f64, mu: f64, n: f64) -> f64 {
    let b = 3.0 * mu * eps / sigma_y;
    let (mut lo, mut hi) = (1.0, 2.0 + b);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid - (mid + b).powf(n) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    sigma_y * 0.5 * (lo + hi)
}

/// Von Mises radial return: isotropic elasticity, flow stress `flow(ε)`.
fn radial_return(
    moduli: &ElasticModuli,
    elastic_trial: &SymTensor,
    eps_n: f64,
    flow: impl Fn(f64) -> f64,
) -> (SymTensor, f64) {
    let (k, mu) = (moduli.bulk(), moduli.shear());
    let tr = elastic_trial.trace();
    let dev = elastic_trial.deviator();
    let trial = dev.scale(2.0 * mu) + SymTensor::IDENTITY.scale(k * tr);
    let q_tr = (1.5 * trial.deviator().dot(&trial.deviator())).sqrt();
    if q_tr <= flow(eps_n) {
        return (trial, eps_n);
    }
    let g = |d: f64| q_tr - 3.0 * mu * d - flow(eps_n + d);
    let (mut lo, mut hi) = (0.0, q_tr / (3.0 * mu));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let d = 0.5 * (lo + hi);
    let scale = 1.0 - 3.0 * mu * d / q_tr;
    (trial.deviator().scale(scale) + SymTensor::IDENTITY.scale(k * tr), eps_n + d)
}

fn random_increment(r: &mut ChaCha8Rng, size: f64) -> SymTensor {
    SymTensor(std::array::from_fn(|_| uniform(r, -size, size)))
}

fn fd_tangent_error(m: &Material, prev: &VoxelState, strain: &SymTensor, nl: &Nonlocal) -> Result<f64, String> {
    let resp = m.update(prev, strain, nl).map_err(|e| e.to_string())?;
    let h = 1e-7;
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..6 {
        let mut plus = *strain;
        let mut minus = *strain;
        plus.0[j] += h;
        minus.0[j] -= h;
        let sp = m.update(prev, &plus, nl).map_err(|e| e.to_string())?.state.stress;
        let sm = m.update(prev, &minus, nl).map_err(|e| e.to_string())?.state.stress;
        for i in 0..6 {
            let fd = (sp.0[i] - sm.0[i]) / (2.0 * h);
            num += (fd - resp.tangent.0[i][j]).powi(2);
            den += resp.tangent.0[i][j].powi(2);
        }
    }
    Ok((num / den).sqrt())
}

fn criterion_4() -> Outcome {
    let mut r = rng(4);
    let mut notes = Vec::new();
    let mut ok = true;

    // Yield consistency on random paths, non-local variables tracking the
    // local ones with a one-step lag.
    let g = gurson_2d();
    let gm = Material::Gurson(g.clone());
    let (mut worst_g, mut plastic_g) = (0.0f64, 0usize);
    for _ in 0..1000 {
        let mut state = gm.initial_state();
        let mut strain = SymTensor::ZERO;
        let mut nl = Nonlocal::default();
        for _ in 0..10 {
            strain += random_increment(&mut r, 0.01);
            nl.previous = nl.current;
            nl.current = state.local_sources();
            let resp = gm.update(&state, &strain, &nl).map_err(|e| e.to_string())?;
            if resp.plastic {
                let Internal::Gurson { eps0_p, effective_porosity, .. } = resp.state.internal else { unreachable!() };
                let s0 = flow_stress_oracle(eps0_p, g.params.sigma_y, g.elastic.shear(), g.params.exponent);
                worst_g = worst_g.max(gtn_phi(&resp.state.stress, s0, effective_porosity, &g.params).abs());
                plastic_g += 1;
            }
            state = resp.state;
        }
    }
    ok &= worst_g <= 1e-8;
    notes.push(format!("GTN |phi| max {worst_g:.1e} over {plastic_g} plastic updates"));

    let l = lemaitre_2d();
    let lm = Material::Lemaitre(l.clone());
    let (mut worst_l, mut plastic_l) = (0.0f64, 0usize);
    for _ in 0..1000 {
        let mut state = lm.initial_state();
        let mut strain = SymTensor::ZERO;
        let mut nl = Nonlocal::default();
        for _ in 0..10 {
            strain += random_increment(&mut r, 0.01);
            nl.previous = nl.current;
            nl.current = state.local_sources();
            let resp = lm.update(&state, &strain, &nl).map_err(|e| e.to_string())?;
            if resp.plastic {
                let Internal::Lemaitre { eps_p, effective_stress, .. } = resp.state.internal else { unreachable!() };
                let phi = effective_stress.von_mises() - (l.params.sigma_y + l.params.hardening * eps_p);
                worst_l = worst_l.max(phi.abs() / l.params.sigma_y);
                plastic_l += 1;
            }
            state = resp.state;
        }
    }
    ok &= worst_l <= 1e-8;
    notes.push(format!("Lemaitre |phi|/sigma_Y max {worst_l:.1e} over {plastic_l}"));

    // Porosity-free GTN against a von Mises return with the same hardening.
    let dense = Gurson::new(g.elastic, GursonParams { f0: 0.0, f_n: 0.0, ..g.params });
    let dm = Material::Gurson(dense.clone());
    let mut worst_j2: f64 = 0.0;
    for _ in 0..200 {
        let mut state = dm.initial_state();
        let mut strain = SymTensor::ZERO;
        let mut eps_oracle = 0.0;
        let mut plastic_oracle = SymTensor::ZERO;
        for _ in 0..5 {
            strain += random_increment(&mut r, 0.01);
            let resp = dm.update(&state, &strain, &Nonlocal::default()).map_err(|e| e.to_string())?;
            let (mu, sy, n) = (dense.elastic.shear(), dense.params.sigma_y, dense.params.exponent);
            let (s, e) = radial_return(&dense.elastic, &(strain - plastic_oracle), eps_oracle, |x| {
                flow_stress_oracle(x, sy, mu, n)
            });
            let dev_e = (strain - plastic_oracle).deviator();
            let elastic_dev = s.deviator().scale(0.5 / mu);
            plastic_oracle += (dev_e - elastic_dev);
            eps_oracle = e;
            worst_j2 = worst_j2.max(resp.state.stress.max_abs_diff(&s) / sy);
            state = resp.state;
        }
    }
    ok &= worst_j2 <= 1e-8;
    notes.push(format!("GTN f=0 vs J2 {worst_j2:.1e}"));

    // Undamaged Lemaitre against linear-hardening radial return.
    let mut worst_lj2: f64 = 0.0;
    for _ in 0..200 {
        let mut state = lm.initial_state();
        let mut strain = SymTensor::ZERO;
        let mut eps_oracle = 0.0;
        let mut plastic_oracle = SymTensor::ZERO;
        for _ in 0..5 {
            strain += random_increment(&mut r, 0.01);
            let resp = lm.update(&state, &strain, &Nonlocal::default()).map_err(|e| e.to_string())?;
            let mu = l.elastic.shear();
            let (s, e) = radial_return(&l.elastic, &(strain - plastic_oracle), eps_oracle, |x| {
                l.params.sigma_y + l.params.hardening * x
            });
            let dev_e = (strain - plastic_oracle).deviator();
            plastic_oracle += (dev_e - s.deviator().scale(0.5 / mu));
            eps_oracle = e;
            worst_lj2 = worst_lj2.max(resp.state.stress.max_abs_diff(&s) / l.params.sigma_y);
            state = resp.state;
        }
    }
    ok &= worst_lj2 <= 1e-10;
    notes.push(format!("Lemaitre D=0 vs J2 {worst_lj2:.1e}"));

    // Finite-difference tangents at plastic states away from the elastic
    // boundary and from the porosity kinks.
    let mut worst_fd: f64 = 0.0;
    let mut samples = 0;
    while samples < 200 {
        let f = uniform(&mut r, 0.0, 0.2);
        if (f - g.params.f_c).abs() < 0.01 {
            continue;
        }
        let eps0 = uniform(&mut r, 0.0, 0.3);
        let prev = VoxelState {
            stress: SymTensor::ZERO,
            plastic_strain: SymTensor::ZERO,
            internal: Internal::Gurson { eps0_p: eps0, porosity: f, effective_porosity: 0.0 },
        };
        let strain = random_increment(&mut r, 0.02);
        let nl = Nonlocal { current: [eps0, 0.0], previous: [eps0, 0.0] };
        let trial = gm.update(&prev, &strain, &nl).map_err(|e| e.to_string())?;
        let Internal::Gurson { eps0_p, .. } = trial.state.internal else { unreachable!() };
        if !trial.plastic || eps0_p - eps0 < 1e-4 {
            continue;
        }
        worst_fd = worst_fd.max(fd_tangent_error(&gm, &prev, &strain, &nl)?);
        let lprev = VoxelState {
            stress: SymTensor::ZERO,
            plastic_strain: SymTensor::ZERO,
            internal: Internal::Lemaitre { eps_p: eps0, damage: 0.0, effective_stress: SymTensor::ZERO },
        };
        let lnl = Nonlocal { current: [uniform(&mut r, 0.0, 0.3), 0.0], previous: [0.0; 2] };
        let lresp = lm.update(&lprev, &strain, &lnl).map_err(|e| e.to_string())?;
        if lresp.plastic {
            worst_fd = worst_fd.max(fd_tangent_error(&lm, &lprev, &strain, &lnl)?);
        }
        samples += 1;
    }
    ok &= worst_fd < 1e-4;
    notes.push(format!("tangent FD error {worst_fd:.1e}"));
    check(ok, notes.join(", "))
}

// ---------------------------------------------------------------------------
// Elastic homogenization

fn elastic_solve(grid: &GridSpec, phases: &[u8], materials: &[Material], load: &MacroLoad) -> Result<SymTensor, String> {
    let engine = Arc::new(FftEngine::new(grid));
    let freq = Arc::new(FrequencyTable::new(grid, Scheme::WillotRotated));
    let config = NewtonConfig { tolerance: 1e-12, cg_tolerance: 1e-14, cg_floor: 0.0, ..Default::default() };
    let solver = MechanicsSolver::new(engine, freq, config);
    let map = MaterialMap { phases, materials };
    let n = grid.len();
    let mut strain = vec![SymTensor::ZERO; n];
    let (_, rep) = solver
        .newton_solve(&map, &vec![VoxelState::elastic(); n], &vec![Nonlocal::default(); n], load, &mut strain)
        .map_err(|e| e.to_string())?;
    Ok(rep.mean_stress)
}

fn criterion_5() -> Outcome {
    let e = 300e3;
    let e11 = 1e-3;
    let grid = GridSpec::cube(6, 1.0).unwrap();
    let uni = elastic_solve(
        &grid,
        &vec![0; grid.len()],
        &[Material::Elastic(ElasticModuli::new(e, 0.3))],
        &MacroLoad::uniaxial_stress(e11),
    )?;
    let err_uni = (uni[0] - e * e11).abs() / (e * e11);

    // Laminate with layers normal to x1, loaded in normal and shear strain.
    let grid = GridSpec::new([10, 4, 1], [1.0, 0.4, 0.1]).unwrap();
    let phases: Vec<u8> = (0..grid.len()).map(|i| u8::from(grid.coords(i)[0] >= 4)).collect();
    let (ma, mb) = (ElasticModuli::new(300e3, 0.3), ElasticModuli::new(900e3, 0.2));
    let mats = [Material::Elastic(ma), Material::Elastic(mb)];
    let fa = 0.4;
    let p_wave = |m: &ElasticModuli| m.bulk() + 4.0 / 3.0 * m.shear();
    let s11 = e11 / (fa / p_wave(&ma) + (1.0 - fa) / p_wave(&mb));
    let lam = |m: &ElasticModuli| m.bulk() - 2.0 / 3.0 * m.shear();
    let s22 = fa * lam(&ma) * s11 / p_wave(&ma) + (1.0 - fa) * lam(&mb) * s11 / p_wave(&mb);
    let normal = elastic_solve(&grid, &phases, &mats, &MacroLoad::strain([e11, 0.0, 0.0, 0.0, 0.0, 0.0]))?;
    let e12 = 5e-4;
    let shear = elastic_solve(&grid, &phases, &mats, &MacroLoad::strain([0.0, 0.0, 0.0, 0.0, 0.0, e12]))?;
    let s12 = 2.0 * e12 / (fa / ma.shear() + (1.0 - fa) / mb.shear());
    let s12_solver = shear.component(0, 1);
    let err_lam = [
        (normal[0] - s11).abs() / s11,
        (normal[1] - s22).abs() / s11,
        (s12_solver - s12).abs() / s12,
    ]
    .into_iter()
    .fold(0.0, f64::max);
    check(
        err_uni < 1e-8 && err_lam < 1e-8,
        format!("uniaxial relative error {err_uni:.1e}, laminate relative error {err_lam:.1e}"),
    )
}

// ---------------------------------------------------------------------------
// Full simulations

struct RunResult {
    grid: GridSpec,
    phases: Vec<u8>,
    end: Result<RunEnd, DriverError>,
    curve: Vec<(f64, f64)>,
    damage: Vec<f64>,
    regularized: Vec<f64>,
    increments: usize,
    seconds: f64,
}

impl RunResult {
    fn fail50(&self) -> Option<f64> {
        failure_strain(&self.curve, 0.5)
    }
}

#[derive(Default)]
struct Runs {
    cache: HashMap<String, RunResult>,
}

impl Runs {
    /// 2D disc composite (10% inclusion) under plane-strain tension, run
    /// until the stress falls below 45% of its peak.
    fn get(&mut self, preset: Preset, n: usize, ell_m: f64, ell_i: f64) -> &RunResult {
        let key = format!("{} n={n} ell_m={ell_m} ell_i={ell_i}", preset.name());
        self.cache.entry(key.clone()).or_insert_with(|| {
            let grid = GridSpec::square(n, 1.0).unwrap();
            let micro = generate_rve_2d(&grid, 0.1);
            let (e_end, de) = match preset {
                Preset::Gurson2d => (0.8, 0.002),
                _ => (0.2, 0.001),
            };
            let mut load = preset.load(e_end, de);
            load.dt_max = 2.0 * de;
            let cfg = StaggeredConfig { stop_stress_fraction: Some(0.45), ..Default::default() };
            let start = Instant::now();
            let mut sim = Simulation::new(&micro, &preset.phases(ell_m, ell_i), Scheme::WillotRotated, load, cfg, Exec::default())
                .expect("valid simulation setup");
            let end = sim.run(|s| {
                report_progress(&key, s);
                Ok(())
            });
            let res = RunResult {
                grid: grid.clone(),
                phases: sim.phases().to_vec(),
                curve: sim.history().curve(0),
                damage: sim.damage_field(),
                regularized: sim.nonlocal()[0].clone(),
                increments: sim.history().len() - 1,
                seconds: start.elapsed().as_secs_f64(),
                end,
            };
            println!(
                "  run {key}: {:?} after {} increments, {:.0} s",
                res.end.as_ref().map_err(|e| e.to_string()),
                res.increments,
                res.seconds
            );
            res
        })
    }
}

fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

fn criterion_6(runs: &mut Runs) -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for preset in [Preset::Gurson2d, Preset::Lemaitre2d] {
        let mut fails = Vec::new();
        let mut widths = Vec::new();
        for n in [32, 64] {
            let r = runs.get(preset, n, ELL_MATRIX, ELL_INCLUSION);
            let f = r.fail50();
            let o = band_orientation(&r.grid, &r.damage);
            let w = o.and_then(|o| band_width(&r.grid, &r.damage, o.angle));
            let angle_ok = o.is_some_and(|o| (o.angle - 45.0).abs() <= 10.0);
            ok &= r.end.is_ok() && f.is_some() && angle_ok && w.is_some();
            notes.push(format!(
                "{} {n}: fail {} angle {}",
                preset.name(),
                f.map_or("none".into(), |f| format!("{f:.4}")),
                o.map_or("none".into(), |o| format!("{:.1}", o.angle)),
            ));
            fails.extend(f);
            widths.extend(w.map(|w| w / n as f64));
        }
        if let ([a, b], [wa, wb]) = (fails.as_slice(), widths.as_slice()) {
            let (gf, gw) = (relative_gap(*a, *b), relative_gap(*wa, *wb));
            ok &= gf < 0.10 && gw < 0.30;
            notes.push(format!("{} fail gap {:.1}%, width {wa:.3}/{wb:.3} L gap {:.1}%", preset.name(), 100.0 * gf, 100.0 * gw));
        } else {
            ok = false;
        }
        for n in [32, 64] {
            let r = runs.get(preset, n, ELL_LOCAL, ELL_LOCAL);
            let w = band_orientation(&r.grid, &r.damage).and_then(|o| band_width(&r.grid, &r.damage, o.angle));
            ok &= w.is_some_and(|w| w <= 2.0);
            notes.push(format!(
                "{} local {n}: width {} voxels",
                preset.name(),
                w.map_or("none".into(), |w| format!("{w:.2}"))
            ));
        }
    }
    check(ok, notes.join("; "))
}

fn criterion_7(runs: &mut Runs) -> Outcome {
    let mut fails = Vec::new();
    for ell in [0.025, ELL_MATRIX, 0.075] {
        fails.push(runs.get(Preset::Gurson2d, 64, ell, ELL_INCLUSION).fail50());
    }
    let values: Option<Vec<f64>> = fails.iter().copied().collect();
    let detail = format!("failure strains {fails:?} for ell_M 0.025, 0.05, 0.075");
    check(values.is_some_and(|v| v.windows(2).all(|w| w[1] > w[0])), detail)
}

fn criterion_8(runs: &mut Runs) -> Outcome {
    let mut inside = Vec::new();
    let mut ratio50 = f64::NAN;
    for ratio in [1.0, 5.0, 50.0] {
        let r = runs.get(Preset::Gurson2d, 64, ELL_MATRIX, ELL_MATRIX / ratio);
        let (peak_in, peak_adj) = interface_peaks(&r.grid, &r.phases, &r.regularized, 1, 1);
        inside.push(peak_in);
        if ratio == 50.0 {
            ratio50 = peak_in / peak_adj;
        }
    }
    let monotone = inside.windows(2).all(|w| w[1] < w[0]);
    check(
        monotone && ratio50 <= 0.05,
        format!(
            "inclusion peaks {:.4e}, {:.4e}, {:.4e} for ratios 1, 5, 50; ratio-50 peak is {:.2}% of the adjacent matrix peak",
            inside[0],
            inside[1],
            inside[2],
            100.0 * ratio50
        ),
    )
}

fn criterion_9() -> Outcome {
    let grid = GridSpec::cube(32, 1.0).unwrap();
    let micro = generate_rve_3d_spheres(&grid, 30, 0.2, 2024).map_err(|e| e.to_string())?;
    let preset = Preset::Gurson3d;
    let mut load = preset.load(0.6, 0.01);
    load.dt_max = 0.01;
    let cfg = StaggeredConfig { max_increments: 60, ..Default::default() };
    let mut sim = Simulation::new(&micro, &preset.phases(ELL_MATRIX, ELL_INCLUSION), Scheme::WillotRotated, load, cfg, Exec::default())
        .map_err(|e| e.to_string())?;
    let mut previous = sim.damage_field();
    let mut monotone = true;
    let end = sim.run(|s| {
        report_progress("3D", s);
        let d = s.damage_field();
        monotone &= is_monotone(&previous, &d);
        previous = d;
        Ok(())
    });
    let increments = sim.history().len() - 1;
    let cutbacks = sim.history().cutbacks;
    let peak = peak(&sim.history().curve(0)).map(|p| p.2).unwrap_or(0.0);
    let detail = format!(
        "{:?}: {increments} increments to E11 = {:.3}, {cutbacks} cutbacks, damage monotone {monotone}, peak stress {peak:.1}, max f* {:.3}",
        end.as_ref().map_err(|e| e.to_string()),
        sim.time(),
        previous.iter().copied().fold(0.0, f64::max)
    );
    check(end.is_ok() && increments >= 50 && monotone && cutbacks >= 1, detail)
}

fn criterion_10() -> Outcome {
    let Material::Gurson(g) = Preset::Gurson2d.matrix() else { unreachable!() };
    let fu = g.params.f_ultimate();
    let cap = g.params.f_star_max;
    #[allow(clippy::eq_op)]
    let exact = (1.5 + (2.25f64 - 2.25).sqrt()) / 2.25;
    let (s0, _) = aravas_flow_stress(0.0, g.params.sigma_y, g.elastic.shear(), g.params.exponent).map_err(|e| e.to_string())?;
    let Material::Gurson(g3) = Preset::Gurson3d.matrix() else { unreachable!() };
    let (s3, _) = aravas_flow_stress(0.0, g3.params.sigma_y, g3.elastic.shear(), g3.params.exponent).map_err(|e| e.to_string())?;
    check(
        fu == exact && fu == 2.0 / 3.0 && cap == 0.6 && s0 == g.params.sigma_y && s3 == g3.params.sigma_y,
        format!("f_V* = {fu:?}, cap = {cap:?}, flow stress at zero strain {s0:?} and {s3:?}"),
    )
}

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |n: usize| selected.is_empty() || selected.contains(&n);
    let mut runs = Runs::default();
    let names = [
        "Helmholtz oracle equivalence",
        "preconditioner exactness",
        "operator properties",
        "material-point suite",
        "homogeneous and laminate mechanics",
        "2D grid regularization",
        "ductility increases with length",
        "interface confinement",
        "3D smoke run",
        "derived constants",
    ];
    let mut failed = 0;
    for (i, name) in names.iter().enumerate() {
        let n = i + 1;
        if !wanted(n) {
            continue;
        }
        let start = Instant::now();
        let outcome = match n {
            1 => criterion_1(),
            2 => criterion_2(),
            3 => criterion_3(),
            4 => criterion_4(),
            5 => criterion_5(),
            6 => criterion_6(&mut runs),
            7 => criterion_7(&mut runs),
            8 => criterion_8(&mut runs),
            9 => criterion_9(),
            _ => criterion_10(),
        };
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("criterion {n:>2} PASS  {name} ({secs:.1} s): {d}"),
            Err(d) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name} ({secs:.1} s): {d}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
