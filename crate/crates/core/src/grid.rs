//! Regular periodic voxel grids and their discrete frequency tables.
//!
//! Real fields are stored with `x1` fastest: `index = i1 + N1 (i2 + N2 i3)`.
//! Spectra use the half-spectrum layout of a real-to-complex transform
//! along `x1`: `k1 ∈ [0, N1/2]`, then the full wrapped range along `x2`
//! and `x3`.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::tensor::SymTensor;

pub type ScalarField = Vec<f64>;
pub type TensorField = Vec<SymTensor>;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum GridError {
    #[error("voxel count along axis {axis} must be at least 1, got {value}")]
    EmptyAxis { axis: usize, value: usize },
    #[error("cell length along axis {axis} must be positive and finite, got {value}")]
    BadLength { axis: usize, value: f64 },
    #[error("field has {found} entries but the grid has {expected}")]
    ShapeMismatch { expected: usize, found: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    cells: [usize; 3],
    lengths: [f64; 3],
}

impl GridSpec {
    pub fn new(cells: [usize; 3], lengths: [f64; 3]) -> Result<Self, GridError> {
        for axis in 0..3 {
            if cells[axis] == 0 {
                return Err(GridError::EmptyAxis { axis, value: cells[axis] });
            }
            if !(lengths[axis] > 0.0 && lengths[axis].is_finite()) {
                return Err(GridError::BadLength { axis, value: lengths[axis] });
            }
        }
        Ok(GridSpec { cells, lengths })
    }

    /// Square `n × n` plane grid of side `length` (one voxel thick).
    pub fn square(n: usize, length: f64) -> Result<Self, GridError> {
        Self::new([n, n, 1], [length, length, length / n.max(1) as f64])
    }

    pub fn cube(n: usize, length: f64) -> Result<Self, GridError> {
        Self::new([n, n, n], [length; 3])
    }

    pub fn cells(&self) -> [usize; 3] {
        self.cells
    }

    pub fn lengths(&self) -> [f64; 3] {
        self.lengths
    }

    /// 2 when `N3 = 1`, otherwise 3.
    pub fn dims(&self) -> usize {
        if self.cells[2] == 1 {
            2
        } else {
            3
        }
    }

    pub fn len(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> [f64; 3] {
        [0, 1, 2].map(|a| self.lengths[a] / self.cells[a] as f64)
    }

    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    pub fn index(&self, i1: usize, i2: usize, i3: usize) -> usize {
        i1 + self.cells[0] * (i2 + self.cells[1] * i3)
    }

    pub fn coords(&self, index: usize) -> [usize; 3] {
        let [n1, n2, _] = self.cells;
        [index % n1, (index / n1) % n2, index / (n1 * n2)]
    }

    /// Voxel center `x_i = (1/2 + n_i) L_i / N_i`.
    pub fn center(&self, index: usize) -> [f64; 3] {
        let c = self.coords(index);
        let h = self.spacing();
        [0, 1, 2].map(|a| (0.5 + c[a] as f64) * h[a])
    }

    /// Half-spectrum shape `[N1/2 + 1, N2, N3]`.
    pub fn spectral_cells(&self) -> [usize; 3] {
        [self.cells[0] / 2 + 1, self.cells[1], self.cells[2]]
    }

    pub fn spectral_len(&self) -> usize {
        self.spectral_cells().iter().product()
    }

    pub fn spectral_coords(&self, k: usize) -> [usize; 3] {
        let [m1, n2, _] = self.spectral_cells();
        [k % m1, (k / m1) % n2, k / (m1 * n2)]
    }

    /// Parseval weight of a half-spectrum coefficient: 1 for the `k1 = 0`
    /// and even-`N1` Nyquist planes, 2 for modes standing in for their
    /// conjugate partner.
    pub fn spectral_weight(&self, k: usize) -> f64 {
        let k1 = k % self.spectral_cells()[0];
        let n1 = self.cells[0];
        if k1 == 0 || (n1.is_multiple_of(2) && k1 == n1 / 2) {
            1.0
        } else {
            2.0
        }
    }

    pub fn check_len(&self, found: usize) -> Result<(), GridError> {
        if found == self.len() {
            Ok(())
        } else {
            Err(GridError::ShapeMismatch { expected: self.len(), found })
        }
    }
}

/// Signed frequency index for wrapped storage position `k` of an `n`-point axis.
pub fn signed_index(k: usize, n: usize) -> i64 {
    if 2 * k < n || (2 * k == n && n % 2 == 1) {
        k as i64
    } else if 2 * k == n {
        // Nyquist of an even axis; the centered set carries it as -N/2.
        -(k as i64)
    } else {
        k as i64 - n as i64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Exact spectral derivatives `iξ`.
    Continuous,
    /// Finite differences of the rotated (corner-centred) scheme.
    #[default]
    WillotRotated,
    /// One-sided differences `(e^{iξh} - 1) / h`: gradients live on voxel
    /// faces. Suited to the scalar regularization, where it gives the
    /// conservative finite-volume Laplacian with no null space besides
    /// constants.
    Forward,
}

impl Scheme {
    pub fn parse(s: &str) -> Option<Scheme> {
        match s.to_ascii_lowercase().as_str() {
            "continuous" | "spectral" => Some(Scheme::Continuous),
            "willot" | "rotated" | "willot_rotated" | "willot-rotated" => Some(Scheme::WillotRotated),
            "forward" => Some(Scheme::Forward),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Continuous => "continuous",
            Scheme::WillotRotated => "willot",
            Scheme::Forward => "forward",
        }
    }
}

/// Discrete frequencies of a grid.
///
/// `axis_values` holds the plain frequencies `2π m / L` per axis in wrapped
/// storage order (the centered set, with `-N/2` for even `N`). The derivative
/// symbols `D = iξ` on the half spectrum are what the operators use: for the
/// continuous scheme the Nyquist entry of an even axis is zeroed there, since
/// `iξ` with a single unpaired Nyquist frequency does not map real fields to
/// real fields. For the finite-difference schemes `ξ` is complex valued.
#[derive(Clone, Debug)]
pub struct FrequencyTable {
    scheme: Scheme,
    axis_values: [Vec<f64>; 3],
    symbols: Vec<[Complex64; 3]>,
    norm_sq: Vec<f64>,
}

/// Builds the frequency table of `grid` for `scheme`.
/// `exp(2πi k/n)`, exact at the quarter turns so that the rotated symbols
/// vanish exactly on the Nyquist planes.
fn unit_phase(k: usize, n: usize) -> Complex64 {
    let k = k % n;
    if k == 0 {
        Complex64::new(1.0, 0.0)
    } else if 2 * k == n {
        Complex64::new(-1.0, 0.0)
    } else if 4 * k == n {
        Complex64::new(0.0, 1.0)
    } else if 4 * k == 3 * n {
        Complex64::new(0.0, -1.0)
    } else {
        Complex64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64)
    }
}

pub fn build_frequencies(grid: &GridSpec, scheme: Scheme) -> FrequencyTable {
    FrequencyTable::new(grid, scheme)
}

impl FrequencyTable {
    pub fn new(grid: &GridSpec, scheme: Scheme) -> Self {
        let cells = grid.cells();
        let lengths = grid.lengths();
        let h = grid.spacing();
        let axis_values = [0, 1, 2].map(|a| {
            (0..cells[a])
                .map(|k| 2.0 * PI * signed_index(k, cells[a]) as f64 / lengths[a])
                .collect::<Vec<_>>()
        });

        let symbols: Vec<[Complex64; 3]> = (0..grid.spectral_len())
            .map(|k| {
                let kc = grid.spectral_coords(k);
                match scheme {
                    Scheme::Continuous => [0, 1, 2].map(|a| {
                        let n = cells[a];
                        if n.is_multiple_of(2) && 2 * kc[a] == n {
                            Complex64::new(0.0, 0.0)
                        } else {
                            Complex64::new(0.0, axis_values[a][kc[a]])
                        }
                    }),
                    Scheme::WillotRotated => {
                        let e = [0, 1, 2].map(|a| unit_phase(kc[a], cells[a]));
                        let one = Complex64::new(1.0, 0.0);
                        [0, 1, 2].map(|j| {
                            let mut d = (e[j] - one) / h[j];
                            for l in 0..3 {
                                if l != j {
                                    d *= (one + e[l]) * 0.5;
                                }
                            }
                            d
                        })
                    }
                    Scheme::Forward => [0, 1, 2].map(|j| {
                        (unit_phase(kc[j], cells[j]) - Complex64::new(1.0, 0.0)) / h[j]
                    }),
                }
            })
            .collect();
        let norm_sq = symbols
            .iter()
            .map(|d| d.iter().map(|c| c.norm_sqr()).sum())
            .collect();
        FrequencyTable { scheme, axis_values, symbols, norm_sq }
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// Plain frequencies along `axis` in wrapped storage order.
    pub fn axis_values(&self, axis: usize) -> &[f64] {
        &self.axis_values[axis]
    }

    /// Derivative symbol `D = iξ` at half-spectrum index `k`.
    pub fn derivative(&self, k: usize) -> &[Complex64; 3] {
        &self.symbols[k]
    }

    pub fn derivatives(&self) -> &[[Complex64; 3]] {
        &self.symbols
    }

    /// Frequency vector `ξ = D / i` at half-spectrum index `k`.
    pub fn xi(&self, k: usize) -> [Complex64; 3] {
        self.symbols[k].map(|d| Complex64::new(d.im, -d.re))
    }

    /// `ξ · conj(ξ)` at half-spectrum index `k`.
    pub fn norm_sq(&self, k: usize) -> f64 {
        self.norm_sq[k]
    }

    pub fn norms_sq(&self) -> &[f64] {
        &self.norm_sq
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}
