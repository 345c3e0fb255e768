//! Voxel-based spectral homogenization with implicit-gradient non-local
//! ductile damage.
//!
//! The crate couples a Galerkin FFT solver for periodic mechanical
//! equilibrium (with mixed macroscopic strain/stress control) with a
//! preconditioned conjugate-gradient solver for heterogeneous modified
//! Helmholtz equations, inside an implicit staggered time-stepping driver.
//!
//! Module map:
//!
//! - [`grid`]: periodic voxel grids, frequency tables, real fields.
//! - [`fft`]: multi-dimensional real-to-complex transforms and spectral
//!   differential operators.
//! - [`materials`]: elasticity, Gurson-Tvergaard-Needleman and Lemaitre
//!   point-level updates with consistent tangents.
//! - [`helmholtz`]: the heterogeneous Helmholtz regularization solver.
//! - [`mechanics`]: projection operator and Newton/CG equilibrium solver.
//! - [`driver`]: load histories, the staggered scheme and adaptive stepping.
//! - [`io`]: microstructure files, run configuration, CSV and VTK output.
//! - [`analysis`]: post-processing of histories and damage fields.

pub mod analysis;
pub mod driver;
pub mod exec;
pub mod fft;
pub mod grid;
pub mod helmholtz;
pub mod io;
pub mod materials;
pub mod mechanics;
pub mod presets;
pub mod tensor;

pub use driver::{LoadHistory, Simulation, SimulationHistory, StaggeredConfig};
pub use exec::Exec;
pub use grid::{GridSpec, Scheme};
pub use io::microstructure::PhaseGrid;
pub use tensor::{SymTensor, Tangent};
