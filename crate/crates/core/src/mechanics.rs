//! Galerkin FFT solver for periodic small-strain equilibrium under mixed
//! macroscopic strain/stress control.
//!
//! The unknown is the total strain field. Its mean is carried explicitly:
//! strain-controlled mean components are set to their targets before the
//! first iteration and never change, the remaining mean components and the
//! compatible fluctuation are corrected by Newton steps. Each Newton step
//! solves `G*(C : δε) = -G*(σ - Σ̄)` with conjugate gradients, where `G*`
//! is the compatible-strain projection at non-zero frequencies and a
//! mask over the stress-controlled components at zero frequency.

use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::exec::Exec;
use crate::fft::FftEngine;
use crate::grid::{FrequencyTable, GridError};
use crate::materials::{Material, MaterialError, Nonlocal, VoxelState};
use crate::tensor::{SymTensor, Tangent};

const SQRT2: f64 = std::f64::consts::SQRT_2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MechanicsError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("material update failed in voxel {voxel}: {source}")]
    Material { voxel: usize, source: MaterialError },
    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("inner conjugate gradient failed after {iterations} iterations (residual {residual:e})")]
    LinearSolver { iterations: usize, residual: f64 },
    #[error("phase index {phase} has no material")]
    UnknownPhase { phase: u8 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Control {
    Strain,
    Stress,
}

/// Macroscopic loading at the end of an increment, per tensor component in
/// the order `11, 22, 33, 23, 13, 12`. Targets are ordinary tensor
/// components (not engineering shears).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MacroLoad {
    pub control: [Control; 6],
    pub target: [f64; 6],
}

impl MacroLoad {
    pub fn new(control: [Control; 6], target: [f64; 6]) -> Self {
        MacroLoad { control, target }
    }

    /// All components strain controlled.
    pub fn strain(target: [f64; 6]) -> Self {
        MacroLoad { control: [Control::Strain; 6], target }
    }

    /// `E11` prescribed, every other stress component zero.
    pub fn uniaxial_stress(e11: f64) -> Self {
        let mut control = [Control::Stress; 6];
        control[0] = Control::Strain;
        MacroLoad { control, target: [e11, 0.0, 0.0, 0.0, 0.0, 0.0] }
    }

    /// `E11` prescribed, in-plane stresses `Σ22 = Σ12 = 0`, out-of-plane
    /// strains zero.
    pub fn plane_strain_tension(e11: f64) -> Self {
        use Control::*;
        MacroLoad {
            control: [Strain, Stress, Strain, Strain, Strain, Stress],
            target: [e11, 0.0, 0.0, 0.0, 0.0, 0.0],
        }
    }

    pub fn stress_mask(&self) -> [bool; 6] {
        self.control.map(|c| c == Control::Stress)
    }

    /// Targets as a Mandel vector (shear entries scaled by `√2`).
    pub fn mandel_target(&self) -> SymTensor {
        SymTensor::from_component_array(self.target)
    }

    /// Same control modes with targets scaled by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        MacroLoad { control: self.control, target: self.target.map(|t| t * s) }
    }
}

/// Compatible-strain projection assembled from the discrete derivative
/// symbols, with a mask over stress-controlled components at zero frequency.
#[derive(Clone, Debug)]
pub struct ProjectionOperator {
    freq: Arc<FrequencyTable>,
}

/// Mandel strain of a displacement mode: `ε = sym(D ⊗ u)`.
fn sym_grad(d: &[Complex64; 3], u: &[Complex64; 3]) -> [Complex64; 6] {
    [
        d[0] * u[0],
        d[1] * u[1],
        d[2] * u[2],
        (d[1] * u[2] + d[2] * u[1]) / SQRT2,
        (d[0] * u[2] + d[2] * u[0]) / SQRT2,
        (d[0] * u[1] + d[1] * u[0]) / SQRT2,
    ]
}

/// Adjoint of [`sym_grad`] with respect to the Mandel inner product.
fn sym_grad_adjoint(d: &[Complex64; 3], t: &[Complex64; 6]) -> [Complex64; 3] {
    let c = [d[0].conj(), d[1].conj(), d[2].conj()];
    [
        c[0] * t[0] + (c[1] * t[5] + c[2] * t[4]) / SQRT2,
        c[1] * t[1] + (c[0] * t[5] + c[2] * t[3]) / SQRT2,
        c[2] * t[2] + (c[0] * t[4] + c[1] * t[3]) / SQRT2,
    ]
}

impl ProjectionOperator {
    pub fn new(freq: Arc<FrequencyTable>) -> Self {
        ProjectionOperator { freq }
    }

    pub fn frequencies(&self) -> &FrequencyTable {
        &self.freq
    }

    /// Applies the projection at non-zero spectral index `k`, in place.
    pub fn apply_at(&self, k: usize, t: &mut [Complex64; 6]) {
        let d = self.freq.derivative(k);
        let n2 = self.freq.norm_sq(k);
        if n2 == 0.0 {
            *t = [Complex64::new(0.0, 0.0); 6];
            return;
        }
        let w = sym_grad_adjoint(d, t);
        // (½(|D|² I + D Dᴴ))⁻¹ w
        let dw = d[0].conj() * w[0] + d[1].conj() * w[1] + d[2].conj() * w[2];
        let u = [0, 1, 2].map(|i| (w[i] - d[i] * dw / (2.0 * n2)) * (2.0 / n2));
        *t = sym_grad(d, &u);
    }

    /// Dense 6x6 block at spectral index `k` (zero-frequency block excluded).
    pub fn block(&self, k: usize) -> [[Complex64; 6]; 6] {
        let mut m = [[Complex64::new(0.0, 0.0); 6]; 6];
        for b in 0..6 {
            let mut e = [Complex64::new(0.0, 0.0); 6];
            e[b] = Complex64::new(1.0, 0.0);
            self.apply_at(k, &mut e);
            for a in 0..6 {
                m[a][b] = e[a];
            }
        }
        m
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonConfig {
    /// Tolerance on the normalized equilibrium residual.
    pub tolerance: f64,
    pub max_iter: usize,
    /// Relative tolerance of the inner conjugate gradient.
    pub cg_tolerance: f64,
    pub cg_max_iter: usize,
    /// The inner solve also stops once its normalized residual falls below
    /// this fraction of the Newton tolerance; zero disables the floor.
    pub cg_floor: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig { tolerance: 1e-6, max_iter: 30, cg_tolerance: 1e-8, cg_max_iter: 2000, cg_floor: 0.1 }
    }
}

/// Scratch buffers of one projection.
struct Workspace {
    spec: Vec<[Complex64; 6]>,
    comp: Vec<f64>,
    block: Vec<Complex64>,
}

impl Workspace {
    fn new(grid: &crate::grid::GridSpec) -> Self {
        let ns = grid.spectral_len();
        Workspace {
            spec: vec![[Complex64::new(0.0, 0.0); 6]; ns],
            comp: vec![0.0; grid.len()],
            block: vec![Complex64::new(0.0, 0.0); ns],
        }
    }
}

/// Phase map plus one material per phase index.
#[derive(Clone, Copy, Debug)]
pub struct MaterialMap<'a> {
    pub phases: &'a [u8],
    pub materials: &'a [Material],
}

impl MaterialMap<'_> {
    pub fn material(&self, voxel: usize) -> &Material {
        &self.materials[self.phases[voxel] as usize]
    }

    pub fn check(&self) -> Result<(), MechanicsError> {
        if let Some(&phase) = self.phases.iter().find(|&&p| p as usize >= self.materials.len()) {
            return Err(MechanicsError::UnknownPhase { phase });
        }
        Ok(())
    }

    /// Smallest positive reference stress over the phases.
    pub fn reference_stress(&self) -> f64 {
        self.materials
            .iter()
            .map(|m| m.reference_stress())
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    pub cg_iterations: usize,
    pub residual: f64,
    pub mean_stress: SymTensor,
    pub mean_strain: SymTensor,
}

#[derive(Clone, Debug)]
pub struct MechanicsSolver {
    engine: Arc<FftEngine>,
    projection: ProjectionOperator,
    /// Mandel components whose fluctuations can be non-zero.
    active: Vec<usize>,
    pub config: NewtonConfig,
}

fn res_norm(a: &[SymTensor]) -> f64 {
    field_dot(a, a).sqrt()
}

fn field_dot(a: &[SymTensor], b: &[SymTensor]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

/// Mean of a tensor field.
pub fn field_mean(field: &[SymTensor]) -> SymTensor {
    let mut m = SymTensor::ZERO;
    for t in field {
        m += *t;
    }
    m.scale(1.0 / field.len().max(1) as f64)
}

impl MechanicsSolver {
    pub fn new(engine: Arc<FftEngine>, freq: Arc<FrequencyTable>, config: NewtonConfig) -> Self {
        let cells = engine.grid().cells();
        // A normal strain along a single-voxel axis has no fluctuation.
        let active = (0..6).filter(|&c| c >= 3 || cells[c] > 1).collect();
        MechanicsSolver { engine, projection: ProjectionOperator::new(freq), active, config }
    }

    pub fn projection(&self) -> &ProjectionOperator {
        &self.projection
    }

    pub fn exec(&self) -> Exec {
        self.engine.exec()
    }

    /// `G*(τ)`: projection of the fluctuation plus the zero-frequency mask.
    pub fn apply_g(&self, field: &[SymTensor], stress_mask: &[bool; 6]) -> Vec<SymTensor> {
        let mut out = vec![SymTensor::ZERO; field.len()];
        self.apply_g_into(field, stress_mask, &mut out, &mut Workspace::new(self.engine.grid()));
        out
    }

    fn apply_g_into(&self, field: &[SymTensor], stress_mask: &[bool; 6], out: &mut [SymTensor], ws: &mut Workspace) {
        let exec = self.engine.exec();
        let Workspace { spec, comp, block } = ws;
        for &c in &self.active {
            exec.for_each_mut(comp, |i, v| *v = field[i][c]);
            self.engine.forward_into(comp, block);
            for (s, b) in spec.iter_mut().zip(block.iter()) {
                s[c] = *b;
            }
        }
        let proj = &self.projection;
        exec.for_each_mut(spec, |k, t| {
            if k > 0 {
                proj.apply_at(k, t);
            }
        });
        let mean = field_mean(field);
        for c in 0..6 {
            let m = if stress_mask[c] { mean[c] } else { 0.0 };
            if self.active.contains(&c) {
                for (b, s) in block.iter_mut().zip(spec.iter()) {
                    *b = s[c];
                }
                block[0] = Complex64::new(0.0, 0.0);
                self.engine.inverse_into(block, comp);
                exec.zip_mut(out, comp, |_, o, v| o[c] = v + m);
            } else {
                exec.for_each_mut(out, |_, o| o[c] = m);
            }
        }
    }

    /// Equilibrium residual `G*(σ - Σ̄)`.
    pub fn residual(&self, stress: &[SymTensor], load: &MacroLoad) -> Vec<SymTensor> {
        let mask = load.stress_mask();
        let target = load.mandel_target();
        let mut r = self.apply_g(stress, &mask);
        for c in 0..6 {
            if mask[c] {
                for v in r.iter_mut() {
                    v[c] -= target[c];
                }
            }
        }
        r
    }

    fn normalized(&self, r: &[SymTensor], mean_stress: &SymTensor, stress_ref: f64) -> f64 {
        let rms = (field_dot(r, r) / r.len() as f64).sqrt();
        let s = mean_stress.norm();
        let denom = if s > 1e-3 * stress_ref { s } else { stress_ref };
        rms / denom
    }

    /// Sets the strain-controlled mean components to their targets.
    pub fn impose_mean_strain(&self, strain: &mut [SymTensor], load: &MacroLoad) {
        let mean = field_mean(strain);
        let target = load.mandel_target();
        let mut shift = SymTensor::ZERO;
        for c in 0..6 {
            if load.control[c] == Control::Strain {
                shift[c] = target[c] - mean[c];
            }
        }
        self.exec().for_each_mut(strain, |_, e| *e += shift);
        // Exact targets regardless of summation round-off.
        let mean = field_mean(strain);
        for c in 0..6 {
            if load.control[c] == Control::Strain && mean[c] != target[c] {
                let d = target[c] - mean[c];
                strain.iter_mut().for_each(|e| e[c] += d);
            }
        }
    }

    fn update_materials(
        &self,
        map: &MaterialMap,
        states_n: &[VoxelState],
        nonlocal: &[Nonlocal],
        strain: &[SymTensor],
    ) -> Result<(Vec<VoxelState>, Vec<Tangent>), MechanicsError> {
        let responses = self.exec().try_map(strain.len(), |i| {
            map.material(i)
                .update(&states_n[i], &strain[i], &nonlocal[i])
                .map_err(|source| MechanicsError::Material { voxel: i, source })
        })?;
        let mut states = Vec::with_capacity(responses.len());
        let mut tangents = Vec::with_capacity(responses.len());
        for r in responses {
            states.push(r.state);
            tangents.push(r.tangent.symmetrized());
        }
        Ok((states, tangents))
    }

    /// Conjugate gradient for `G*(C : x) = b` on the range of `G*`. Stops
    /// at the relative tolerance or once `‖r‖ ≤ floor`.
    fn solve_linear(
        &self,
        tangents: &[Tangent],
        b: &[SymTensor],
        mask: &[bool; 6],
        floor: f64,
    ) -> Result<(Vec<SymTensor>, usize), MechanicsError> {
        let n = b.len();
        let exec = self.exec();
        let mut ws = Workspace::new(self.engine.grid());
        let mut cp = vec![SymTensor::ZERO; n];
        let mut ap = vec![SymTensor::ZERO; n];
        let mut x = vec![SymTensor::ZERO; n];
        let b_norm = field_dot(b, b).sqrt();
        if b_norm == 0.0 {
            return Ok((x, 0));
        }
        let mut r = b.to_vec();
        let mut p = r.clone();
        let mut rr = field_dot(&r, &r);
        let tol = (self.config.cg_tolerance * b_norm).max(floor);
        for it in 1..=self.config.cg_max_iter {
            exec.zip_mut(&mut cp, &p, |i, c, v| *c = tangents[i].apply(v));
            self.apply_g_into(&cp, mask, &mut ap, &mut ws);
            let pap = field_dot(&p, &ap);
            if !(pap > 0.0) {
                return Err(MechanicsError::LinearSolver {
                    iterations: it,
                    residual: rr.sqrt() / b_norm,
                });
            }
            let alpha = rr / pap;
            for i in 0..n {
                x[i] += p[i].scale(alpha);
                r[i] -= ap[i].scale(alpha);
            }
            let rr_new = field_dot(&r, &r);
            if rr_new.sqrt() <= tol {
                return Ok((x, it));
            }
            let beta = rr_new / rr;
            rr = rr_new;
            for i in 0..n {
                p[i] = r[i] + p[i].scale(beta);
            }
        }
        Err(MechanicsError::LinearSolver {
            iterations: self.config.cg_max_iter,
            residual: rr.sqrt() / b_norm,
        })
    }

    /// Newton iteration for equilibrium at frozen non-local fields.
    ///
    /// `strain` holds the initial guess on entry and the converged field on
    /// success. Returns the updated voxel states.
    pub fn newton_solve(
        &self,
        map: &MaterialMap,
        states_n: &[VoxelState],
        nonlocal: &[Nonlocal],
        load: &MacroLoad,
        strain: &mut [SymTensor],
    ) -> Result<(Vec<VoxelState>, NewtonReport), MechanicsError> {
        let grid = self.engine.grid();
        grid.check_len(strain.len())?;
        grid.check_len(states_n.len())?;
        grid.check_len(nonlocal.len())?;
        grid.check_len(map.phases.len())?;
        map.check()?;
        let stress_ref = map.reference_stress();
        let mask = load.stress_mask();

        self.impose_mean_strain(strain, load);
        let mut cg_total = 0;
        let mut iterations = 0;
        loop {
            let (states, tangents) = self.update_materials(map, states_n, nonlocal, strain)?;
            let stress: Vec<SymTensor> = states.iter().map(|s| s.stress).collect();
            let r = self.residual(&stress, load);
            let mean_stress = field_mean(&stress);
            let res = self.normalized(&r, &mean_stress, stress_ref);
            if !res.is_finite() {
                return Err(MechanicsError::NotConverged { iterations, residual: res });
            }
            if res <= self.config.tolerance {
                let report = NewtonReport {
                    iterations,
                    cg_iterations: cg_total,
                    residual: res,
                    mean_stress,
                    mean_strain: field_mean(strain),
                };
                return Ok((states, report));
            }
            if iterations >= self.config.max_iter {
                return Err(MechanicsError::NotConverged { iterations, residual: res });
            }
            let rhs: Vec<SymTensor> = r.iter().map(|v| -*v).collect();
            // A linear residual well below what the Newton test can resolve
            // is wasted work.
            let floor = self.config.cg_floor * self.config.tolerance * (res_norm(&r) / res);
            let (delta, cg) = self.solve_linear(&tangents, &rhs, &mask, floor)?;
            cg_total += cg;
            iterations += 1;
            self.exec().zip_mut(strain, &delta, |_, e, d| *e += *d);
        }
    }
}
