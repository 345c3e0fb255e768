//! Time incrementation and the implicit staggered coupling between the
//! mechanical solve and the Helmholtz regularization.
//!
//! Within an increment the scheme alternates: equilibrium at frozen
//! non-local fields, then one Helmholtz solve per regularized variable with
//! the updated local sources. It stops when neither the strain field nor
//! the non-local fields change by more than the tolerance and the last
//! mechanical solve converged. Any failure cuts the increment back.

use std::sync::Arc;
use std::time::Instant;

use thiserror::Error;

use crate::exec::Exec;
use crate::fft::FftEngine;
use crate::grid::{FrequencyTable, GridSpec, Scheme};
use crate::helmholtz::{CgConfig, HelmholtzError, HelmholtzSolver};
use crate::io::microstructure::PhaseGrid;
use crate::materials::{Material, ModelKind, Nonlocal, VoxelState};
use crate::mechanics::{Control, MacroLoad, MaterialMap, MechanicsError, MechanicsSolver, NewtonConfig};
use crate::tensor::SymTensor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DriverError {
    #[error("invalid setup: {0}")]
    Invalid(String),
    #[error(transparent)]
    Mechanics(#[from] MechanicsError),
    #[error(transparent)]
    Helmholtz(#[from] HelmholtzError),
    #[error("staggered iteration did not converge after {iterations} iterations (ERR {err:e})")]
    StaggeredNotConverged { iterations: usize, err: f64 },
    #[error(
        "increment at t = {time} cut below the minimum strain increment \
         (ΔE = {delta_e:e}); last failure: {cause}"
    )]
    MinimumStep { time: f64, delta_e: f64, cause: String },
    #[error("output failed: {0}")]
    Output(String),
}

/// Piecewise-linear macroscopic loading in pseudo-time.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadHistory {
    pub control: [Control; 6],
    /// `(t, targets)` knots with strictly increasing `t`; targets are
    /// ordinary tensor components in the order `11, 22, 33, 23, 13, 12`.
    pub knots: Vec<(f64, [f64; 6])>,
    pub dt_initial: f64,
    pub dt_max: f64,
}

impl LoadHistory {
    /// Linear ramp from zero at `t = 0` with the given rates.
    pub fn ramp(control: [Control; 6], rates: [f64; 6], t_end: f64, dt: f64) -> Self {
        LoadHistory {
            control,
            knots: vec![(0.0, [0.0; 6]), (t_end, rates.map(|r| r * t_end))],
            dt_initial: dt,
            dt_max: dt,
        }
    }

    pub fn validate(&self) -> Result<(), DriverError> {
        if self.knots.len() < 2 {
            return Err(DriverError::Invalid("load history needs at least two knots".into()));
        }
        if self.knots.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(DriverError::Invalid("load history times must increase".into()));
        }
        if self.knots.iter().any(|(t, v)| !t.is_finite() || v.iter().any(|x| !x.is_finite())) {
            return Err(DriverError::Invalid("load history values must be finite".into()));
        }
        if !(self.dt_initial > 0.0 && self.dt_max >= self.dt_initial) {
            return Err(DriverError::Invalid("need 0 < dt_initial <= dt_max".into()));
        }
        Ok(())
    }

    pub fn start(&self) -> f64 {
        self.knots[0].0
    }

    pub fn end(&self) -> f64 {
        self.knots[self.knots.len() - 1].0
    }

    pub fn targets_at(&self, t: f64) -> [f64; 6] {
        let k = &self.knots;
        if t <= k[0].0 {
            return k[0].1;
        }
        for w in k.windows(2) {
            let ((t0, a), (t1, b)) = (w[0], w[1]);
            if t <= t1 {
                let s = (t - t0) / (t1 - t0);
                return [0, 1, 2, 3, 4, 5].map(|c| a[c] + s * (b[c] - a[c]));
            }
        }
        k[k.len() - 1].1
    }

    pub fn load_at(&self, t: f64) -> MacroLoad {
        MacroLoad::new(self.control, self.targets_at(t))
    }

    /// Largest change of a strain-controlled target over `[t0, t1]`. For
    /// purely stress-controlled histories, the time fraction of the run.
    pub fn strain_increment(&self, t0: f64, t1: f64) -> f64 {
        let (a, b) = (self.targets_at(t0), self.targets_at(t1));
        let mut m: f64 = 0.0;
        let mut any = false;
        for c in 0..6 {
            if self.control[c] == Control::Strain {
                let full = self.knots.iter().any(|(_, v)| v[c] != 0.0);
                if full {
                    any = true;
                    m = m.max((b[c] - a[c]).abs());
                }
            }
        }
        if any {
            m
        } else {
            (t1 - t0) / (self.end() - self.start())
        }
    }

    /// Component whose stress response is monitored: the first
    /// strain-controlled component with a non-zero target.
    pub fn monitor_component(&self) -> usize {
        (0..6)
            .find(|&c| self.control[c] == Control::Strain && self.knots.iter().any(|(_, v)| v[c] != 0.0))
            .unwrap_or(0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StaggeredConfig {
    pub tolerance: f64,
    pub max_iter: usize,
    pub cutback: f64,
    pub growth: f64,
    /// Consecutive converged increments before the step grows.
    pub growth_streak: usize,
    /// Minimum admissible strain increment.
    pub delta_e_min: f64,
    /// Stop once the monitored stress falls below this fraction of its peak.
    pub stop_stress_fraction: Option<f64>,
    pub max_increments: usize,
    /// Linear extrapolation of the strain field as the initial guess.
    pub extrapolate: bool,
    pub newton: NewtonConfig,
    pub helmholtz: CgConfig,
    /// Derivative rule of the regularization. The rotated scheme's symbols
    /// vanish at the checkerboard frequency, which would leave that mode
    /// unregularized, so the default is the forward (finite-volume) rule.
    pub helmholtz_scheme: Scheme,
}

impl Default for StaggeredConfig {
    fn default() -> Self {
        StaggeredConfig {
            tolerance: 1e-4,
            max_iter: 100,
            cutback: 0.5,
            growth: 1.2,
            growth_streak: 2,
            delta_e_min: 1e-5,
            stop_stress_fraction: None,
            max_increments: 100_000,
            extrapolate: true,
            newton: NewtonConfig::default(),
            helmholtz: CgConfig {
                tolerance: 1e-6,
                max_iter: 1000,
                preconditioner: Default::default(),
            },
            helmholtz_scheme: Scheme::Forward,
        }
    }
}

impl StaggeredConfig {
    pub fn validate(&self) -> Result<(), DriverError> {
        let bad = |m: &str| Err(DriverError::Invalid(m.to_string()));
        if !(self.tolerance > 0.0) {
            return bad("staggered tolerance must be positive");
        }
        if !(self.cutback > 0.0 && self.cutback < 1.0 && self.growth >= 1.0) {
            return bad("need 0 < cutback < 1 <= growth");
        }
        if !(self.newton.tolerance > 0.0 && self.newton.cg_tolerance > 0.0 && self.helmholtz.tolerance > 0.0) {
            return bad("solver tolerances must be positive");
        }
        if self.max_iter == 0 || self.newton.max_iter == 0 {
            return bad("iteration limits must be positive");
        }
        Ok(())
    }
}

/// One converged increment.
#[derive(Clone, Debug, PartialEq)]
pub struct IncrementRecord {
    pub increment: usize,
    pub time: f64,
    /// Mean strain, ordinary tensor components.
    pub strain: [f64; 6],
    /// Mean stress, ordinary tensor components.
    pub stress: [f64; 6],
    pub staggered_iterations: usize,
    pub newton_iterations: usize,
    pub cg_iterations: usize,
    pub helmholtz_iterations: usize,
    pub max_damage: f64,
    pub wall_time: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SimulationHistory {
    records: Vec<IncrementRecord>,
    pub cutbacks: usize,
}

impl SimulationHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: IncrementRecord) {
        if let Some(last) = self.records.last() {
            assert!(record.time >= last.time, "history time must not decrease");
        }
        self.records.push(record);
    }

    pub fn records(&self) -> &[IncrementRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IncrementRecord> {
        self.records.last()
    }

    /// `(strain, stress)` pairs of one tensor component.
    pub fn curve(&self, component: usize) -> Vec<(f64, f64)> {
        self.records.iter().map(|r| (r.strain[component], r.stress[component])).collect()
    }
}

/// One phase of the microstructure.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseSpec {
    pub material: Material,
    /// Characteristic length of the regularization.
    pub length: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepReport {
    pub staggered_iterations: usize,
    pub newton_iterations: usize,
    pub cg_iterations: usize,
    pub helmholtz_iterations: usize,
    pub err: f64,
    /// ERR after each staggered iteration.
    pub err_trace: Vec<f64>,
    pub mean_strain: SymTensor,
    pub mean_stress: SymTensor,
}

/// Why a run ended without error.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunEnd {
    Completed,
    StressDrop,
    MaxIncrements,
}

pub struct Simulation {
    grid: GridSpec,
    phases: Vec<u8>,
    materials: Vec<Material>,
    kind: ModelKind,
    mech: MechanicsSolver,
    helmholtz: Option<HelmholtzSolver>,
    load: LoadHistory,
    pub config: StaggeredConfig,
    /// Print one progress line per increment on stderr.
    pub progress: bool,
    time: f64,
    increment: usize,
    dt_last: f64,
    states: Vec<VoxelState>,
    strain: Vec<SymTensor>,
    strain_prev: Vec<SymTensor>,
    nonlocal: Vec<Vec<f64>>,
    history: SimulationHistory,
    peak_stress: f64,
}

impl std::fmt::Debug for Simulation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Simulation")
            .field("grid", &self.grid)
            .field("time", &self.time)
            .field("increment", &self.increment)
            .finish()
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl Simulation {
    pub fn new(
        micro: &PhaseGrid,
        table: &[PhaseSpec],
        scheme: Scheme,
        load: LoadHistory,
        config: StaggeredConfig,
        exec: Exec,
    ) -> Result<Self, DriverError> {
        load.validate()?;
        config.validate()?;
        let grid = micro.grid.clone();
        let phases = micro.phases.clone();
        if let Some(&p) = phases.iter().find(|&&p| p as usize >= table.len()) {
            return Err(DriverError::Invalid(format!("phase {p} has no entry in the phase table")));
        }
        let mut kind = ModelKind::Elastic;
        for spec in table {
            spec.material.validate().map_err(|e| DriverError::Invalid(e.to_string()))?;
            if !(spec.length >= 0.0 && spec.length.is_finite()) {
                return Err(DriverError::Invalid("characteristic lengths must be non-negative".into()));
            }
            let k = spec.material.kind();
            if k != ModelKind::Elastic {
                if kind != ModelKind::Elastic && kind != k {
                    return Err(DriverError::Invalid(
                        "all inelastic phases must use the same damage model".into(),
                    ));
                }
                kind = k;
            }
        }
        let engine = Arc::new(FftEngine::with_exec(&grid, exec));
        let freq = Arc::new(FrequencyTable::new(&grid, scheme));
        let mech = MechanicsSolver::new(engine.clone(), freq.clone(), config.newton);
        let helmholtz = if kind.nonlocal_count() > 0 {
            let ell_sq = phases.iter().map(|&p| table[p as usize].length.powi(2)).collect();
            let hfreq = if config.helmholtz_scheme == scheme {
                freq
            } else {
                Arc::new(FrequencyTable::new(&grid, config.helmholtz_scheme))
            };
            Some(HelmholtzSolver::new(engine, hfreq, ell_sq)?)
        } else {
            None
        };
        let materials: Vec<Material> = table.iter().map(|s| s.material.clone()).collect();
        let states = phases.iter().map(|&p| materials[p as usize].initial_state()).collect();
        let n = grid.len();
        let mut sim = Simulation {
            grid,
            phases,
            materials,
            kind,
            mech,
            helmholtz,
            time: load.start(),
            load,
            config,
            progress: false,
            increment: 0,
            dt_last: 0.0,
            states,
            strain: vec![SymTensor::ZERO; n],
            strain_prev: vec![SymTensor::ZERO; n],
            nonlocal: vec![vec![0.0; n]; kind.nonlocal_count()],
            history: SimulationHistory::new(),
            peak_stress: 0.0,
        };
        let initial = sim.record(0, 0, 0, 0, 0.0);
        sim.history.push(initial);
        Ok(sim)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn phases(&self) -> &[u8] {
        &self.phases
    }

    pub fn model_kind(&self) -> ModelKind {
        self.kind
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn load(&self) -> &LoadHistory {
        &self.load
    }

    pub fn history(&self) -> &SimulationHistory {
        &self.history
    }

    pub fn states(&self) -> &[VoxelState] {
        &self.states
    }

    pub fn strain(&self) -> &[SymTensor] {
        &self.strain
    }

    /// Regularized fields, in model order.
    pub fn nonlocal(&self) -> &[Vec<f64>] {
        &self.nonlocal
    }

    /// Damage indicator per voxel (`f*` or `D`).
    pub fn damage_field(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.damage()).collect()
    }

    /// Local sources of regularized variable `j` per voxel.
    pub fn local_field(&self, j: usize) -> Vec<f64> {
        self.states.iter().map(|s| s.local_sources()[j]).collect()
    }

    pub fn stress_field(&self) -> Vec<SymTensor> {
        self.states.iter().map(|s| s.stress).collect()
    }

    fn record(&self, stag: usize, newton: usize, cg: usize, helm: usize, wall: f64) -> IncrementRecord {
        let n = self.grid.len() as f64;
        let mut e = SymTensor::ZERO;
        let mut s = SymTensor::ZERO;
        for (eps, st) in self.strain.iter().zip(&self.states) {
            e += *eps;
            s += st.stress;
        }
        IncrementRecord {
            increment: self.increment,
            time: self.time,
            strain: e.scale(1.0 / n).components(),
            stress: s.scale(1.0 / n).components(),
            staggered_iterations: stag,
            newton_iterations: newton,
            cg_iterations: cg,
            helmholtz_iterations: helm,
            max_damage: self.states.iter().map(|s| s.damage()).fold(0.0, f64::max),
            wall_time: wall,
        }
    }

    fn initial_guess(&self, dt: f64) -> Vec<SymTensor> {
        if self.config.extrapolate && self.dt_last > 0.0 {
            let r = dt / self.dt_last;
            self.strain
                .iter()
                .zip(&self.strain_prev)
                .map(|(e, p)| *e + (*e - *p).scale(r))
                .collect()
        } else {
            self.strain.clone()
        }
    }

    /// Solves one increment to `t_next` without committing it.
    fn solve_increment(
        &self,
        t_next: f64,
        mut strain: Vec<SymTensor>,
    ) -> Result<(Vec<VoxelState>, Vec<SymTensor>, Vec<Vec<f64>>, StepReport), DriverError> {
        let load = self.load.load_at(t_next);
        let map = MaterialMap { phases: &self.phases, materials: &self.materials };
        let n = self.grid.len();
        let j_count = self.nonlocal.len();
        let mut nl = self.nonlocal.clone();
        let mut report = StepReport {
            staggered_iterations: 0,
            newton_iterations: 0,
            cg_iterations: 0,
            helmholtz_iterations: 0,
            err: f64::INFINITY,
            err_trace: Vec::new(),
            mean_strain: SymTensor::ZERO,
            mean_stress: SymTensor::ZERO,
        };
        let mut prev_iter: Option<Vec<SymTensor>> = None;
        for k in 1..=self.config.max_iter {
            let frozen: Vec<Nonlocal> = (0..n)
                .map(|i| {
                    let mut v = Nonlocal::default();
                    for j in 0..j_count {
                        v.current[j] = nl[j][i];
                        v.previous[j] = self.nonlocal[j][i];
                    }
                    v
                })
                .collect();
            let (states, newton) =
                self.mech.newton_solve(&map, &self.states, &frozen, &load, &mut strain)?;
            report.staggered_iterations = k;
            report.newton_iterations += newton.iterations;
            report.cg_iterations += newton.cg_iterations;
            report.mean_strain = newton.mean_strain;
            report.mean_stress = newton.mean_stress;

            let mut err: f64 = 0.0;
            if let Some(prev) = &prev_iter {
                let diff = strain
                    .iter()
                    .zip(prev)
                    .map(|(a, b)| (*a - *b).norm())
                    .fold(0.0, f64::max);
                let denom = newton.mean_strain.norm();
                err = err.max(if denom < 1e-12 { diff } else { diff / denom });
            }
            if let Some(helm) = &self.helmholtz {
                for (j, field) in nl.iter_mut().enumerate() {
                    let source: Vec<f64> = states.iter().map(|s| s.local_sources()[j]).collect();
                    let before = field.clone();
                    let r = helm.solve(&source, field, &self.config.helmholtz)?;
                    report.helmholtz_iterations += r.iterations;
                    let change: Vec<f64> = field.iter().zip(&before).map(|(a, b)| a - b).collect();
                    let (dn, fnorm) = (l2(&change), l2(field));
                    let scale = (n as f64).sqrt();
                    err = err.max(if fnorm / scale < 1e-12 { dn / scale } else { dn / fnorm });
                }
            }
            report.err = err;
            report.err_trace.push(err);
            if err < self.config.tolerance {
                return Ok((states, strain, nl, report));
            }
            prev_iter = Some(strain.clone());
        }
        Err(DriverError::StaggeredNotConverged { iterations: self.config.max_iter, err: report.err })
    }

    /// Advances to `t_next` and commits the converged state.
    pub fn staggered_step(&mut self, t_next: f64) -> Result<StepReport, DriverError> {
        let start = Instant::now();
        let guess = self.initial_guess(t_next - self.time);
        let (states, strain, nl, report) = self.solve_increment(t_next, guess)?;
        self.dt_last = t_next - self.time;
        self.strain_prev = std::mem::replace(&mut self.strain, strain);
        self.states = states;
        self.nonlocal = nl;
        self.time = t_next;
        self.increment += 1;
        let rec = self.record(
            report.staggered_iterations,
            report.newton_iterations,
            report.cg_iterations,
            report.helmholtz_iterations,
            start.elapsed().as_secs_f64(),
        );
        if self.progress {
            let c = self.load.monitor_component();
            eprintln!(
                "inc {:5}  t {:.5e}  E{} {:+.5e}  S{} {:+.5e}  stag {:3}  newton {:3}  cg {:5}  ERR {:.2e}  dmax {:.3}",
                rec.increment,
                rec.time,
                crate::tensor::COMPONENT_NAMES[c],
                rec.strain[c],
                crate::tensor::COMPONENT_NAMES[c],
                rec.stress[c],
                rec.staggered_iterations,
                rec.newton_iterations,
                rec.cg_iterations,
                report.err,
                rec.max_damage,
            );
        }
        self.history.push(rec);
        Ok(report)
    }

    /// Solves the current increment again from the committed state at zero
    /// load, without committing; used to validate a configuration.
    pub fn dry_run(&self) -> Result<StepReport, DriverError> {
        let t = self.load.start();
        self.solve_increment(t, self.strain.clone()).map(|r| r.3)
    }

    /// Runs the full load history with adaptive stepping. `on_increment` is
    /// called after every converged increment.
    pub fn run<F>(&mut self, mut on_increment: F) -> Result<RunEnd, DriverError>
    where
        F: FnMut(&Simulation) -> Result<(), DriverError>,
    {
        let t_end = self.load.end();
        let mut dt = self.load.dt_initial;
        let mut streak = 0;
        let monitor = self.load.monitor_component();
        let eps_t = 1e-12 * (t_end - self.load.start());
        while self.time < t_end - eps_t {
            if self.increment >= self.config.max_increments {
                return Ok(RunEnd::MaxIncrements);
            }
            let dt_try = dt.min(t_end - self.time);
            match self.staggered_step(self.time + dt_try) {
                Ok(_) => {
                    streak += 1;
                    if streak >= self.config.growth_streak {
                        dt = (dt * self.config.growth).min(self.load.dt_max);
                        streak = 0;
                    }
                    on_increment(self)?;
                    let s = self.history.last().map(|r| r.stress[monitor]).unwrap_or(0.0);
                    self.peak_stress = self.peak_stress.max(s);
                    if let Some(frac) = self.config.stop_stress_fraction {
                        if self.peak_stress > 0.0 && s < frac * self.peak_stress {
                            return Ok(RunEnd::StressDrop);
                        }
                    }
                }
                Err(e @ DriverError::Invalid(_)) | Err(e @ DriverError::Output(_)) => return Err(e),
                Err(e) => {
                    streak = 0;
                    self.history.cutbacks += 1;
                    dt = dt_try * self.config.cutback;
                    let delta_e = self.load.strain_increment(self.time, self.time + dt);
                    if self.progress {
                        eprintln!("cutback at t {:.5e}: {e}; new dt {:.3e}", self.time, dt);
                    }
                    if delta_e < self.config.delta_e_min {
                        return Err(DriverError::MinimumStep {
                            time: self.time,
                            delta_e,
                            cause: e.to_string(),
                        });
                    }
                }
            }
        }
        Ok(RunEnd::Completed)
    }
}
