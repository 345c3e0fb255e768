//! Symmetric second-order tensors and fourth-order tangents in Mandel form.
//!
//! A [`SymTensor`] stores `[a11, a22, a33, √2·a23, √2·a13, √2·a12]`, so the
//! Euclidean dot product of two Mandel vectors equals the double contraction
//! of the underlying tensors. A [`Tangent`] is the matching 6×6 matrix; it is
//! symmetric exactly when the fourth-order tensor has major symmetry.

use std::f64::consts::SQRT_2;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

/// Mandel slot for each tensor index pair.
const SLOT: [[usize; 3]; 3] = [[0, 5, 4], [5, 1, 3], [4, 3, 2]];

/// Tensor index pairs in Mandel order.
pub const MANDEL_PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)];

/// Component labels in Mandel order, 1-based as usual in mechanics.
pub const COMPONENT_NAMES: [&str; 6] = ["11", "22", "33", "23", "13", "12"];

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SymTensor(pub [f64; 6]);

impl SymTensor {
    pub const ZERO: SymTensor = SymTensor([0.0; 6]);
    pub const IDENTITY: SymTensor = SymTensor([1.0, 1.0, 1.0, 0.0, 0.0, 0.0]);

    /// Builds a tensor from ordinary components.
    pub fn from_components(a11: f64, a22: f64, a33: f64, a23: f64, a13: f64, a12: f64) -> Self {
        SymTensor([a11, a22, a33, SQRT_2 * a23, SQRT_2 * a13, SQRT_2 * a12])
    }

    pub fn from_matrix(m: &[[f64; 3]; 3]) -> Self {
        Self::from_components(
            m[0][0],
            m[1][1],
            m[2][2],
            0.5 * (m[1][2] + m[2][1]),
            0.5 * (m[0][2] + m[2][0]),
            0.5 * (m[0][1] + m[1][0]),
        )
    }

    pub fn to_matrix(&self) -> [[f64; 3]; 3] {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.component(i, j);
            }
        }
        m
    }

    /// Ordinary tensor component `a_ij` (0-based indices).
    pub fn component(&self, i: usize, j: usize) -> f64 {
        let slot = SLOT[i][j];
        if slot < 3 {
            self.0[slot]
        } else {
            self.0[slot] / SQRT_2
        }
    }

    /// Ordinary components in Mandel order `[11, 22, 33, 23, 13, 12]`.
    pub fn components(&self) -> [f64; 6] {
        let m = &self.0;
        [m[0], m[1], m[2], m[3] / SQRT_2, m[4] / SQRT_2, m[5] / SQRT_2]
    }

    pub fn from_component_array(c: [f64; 6]) -> Self {
        Self::from_components(c[0], c[1], c[2], c[3], c[4], c[5])
    }

    pub fn trace(&self) -> f64 {
        self.0[0] + self.0[1] + self.0[2]
    }

    pub fn deviator(&self) -> SymTensor {
        let m = self.trace() / 3.0;
        let mut d = *self;
        d.0[0] -= m;
        d.0[1] -= m;
        d.0[2] -= m;
        d
    }

    /// Double contraction `a : b`.
    pub fn dot(&self, other: &SymTensor) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    /// Frobenius norm `sqrt(a : a)`.
    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Von Mises equivalent `sqrt(3/2 dev:dev)`.
    pub fn von_mises(&self) -> f64 {
        (1.5f64).sqrt() * self.deviator().norm()
    }

    pub fn scale(&self, s: f64) -> SymTensor {
        SymTensor(self.0.map(|v| v * s))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &SymTensor) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Index<usize> for SymTensor {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for SymTensor {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl Add for SymTensor {
    type Output = SymTensor;
    fn add(mut self, rhs: SymTensor) -> SymTensor {
        self += rhs;
        self
    }
}

impl AddAssign for SymTensor {
    fn add_assign(&mut self, rhs: SymTensor) {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a += b;
        }
    }
}

impl Sub for SymTensor {
    type Output = SymTensor;
    fn sub(mut self, rhs: SymTensor) -> SymTensor {
        self -= rhs;
        self
    }
}

impl SubAssign for SymTensor {
    fn sub_assign(&mut self, rhs: SymTensor) {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a -= b;
        }
    }
}

impl Neg for SymTensor {
    type Output = SymTensor;
    fn neg(self) -> SymTensor {
        self.scale(-1.0)
    }
}

impl Mul<SymTensor> for f64 {
    type Output = SymTensor;
    fn mul(self, rhs: SymTensor) -> SymTensor {
        rhs.scale(self)
    }
}

/// Fourth-order tangent as a 6×6 Mandel matrix (row-major).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tangent(pub [[f64; 6]; 6]);

impl Default for Tangent {
    fn default() -> Self {
        Tangent([[0.0; 6]; 6])
    }
}

impl Tangent {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn identity() -> Self {
        let mut t = Self::zero();
        for i in 0..6 {
            t.0[i][i] = 1.0;
        }
        t
    }

    /// `I ⊗ I` for the second-order identity.
    pub fn volumetric() -> Self {
        Self::outer(&SymTensor::IDENTITY, &SymTensor::IDENTITY)
    }

    /// Deviatoric projector `Id - (1/3) I ⊗ I`.
    pub fn deviatoric() -> Self {
        let mut t = Self::identity();
        for i in 0..3 {
            for j in 0..3 {
                t.0[i][j] -= 1.0 / 3.0;
            }
        }
        t
    }

    /// Isotropic tensor `K I⊗I + 2μ (Id - I⊗I/3)`.
    pub fn isotropic(bulk: f64, shear: f64) -> Self {
        Self::volumetric()
            .scale(bulk)
            .add(&Self::deviatoric().scale(2.0 * shear))
    }

    /// `a ⊗ b`.
    pub fn outer(a: &SymTensor, b: &SymTensor) -> Self {
        let mut t = Self::zero();
        for i in 0..6 {
            for j in 0..6 {
                t.0[i][j] = a.0[i] * b.0[j];
            }
        }
        t
    }

    pub fn scale(&self, s: f64) -> Self {
        Tangent(self.0.map(|row| row.map(|v| v * s)))
    }

    pub fn add(&self, other: &Tangent) -> Self {
        let mut t = *self;
        for i in 0..6 {
            for j in 0..6 {
                t.0[i][j] += other.0[i][j];
            }
        }
        t
    }

    pub fn add_scaled(&mut self, s: f64, other: &Tangent) {
        for i in 0..6 {
            for j in 0..6 {
                self.0[i][j] += s * other.0[i][j];
            }
        }
    }

    /// `C : a`.
    pub fn apply(&self, a: &SymTensor) -> SymTensor {
        let mut out = [0.0; 6];
        for (o, row) in out.iter_mut().zip(&self.0) {
            *o = row.iter().zip(&a.0).map(|(c, x)| c * x).sum();
        }
        SymTensor(out)
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zero();
        for i in 0..6 {
            for j in 0..6 {
                t.0[i][j] = self.0[j][i];
            }
        }
        t
    }

    /// `(C + Cᵀ) / 2`.
    pub fn symmetrized(&self) -> Self {
        self.add(&self.transpose()).scale(0.5)
    }

    pub fn frobenius(&self) -> f64 {
        self.0.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Tangent) -> f64 {
        self.0
            .iter()
            .flatten()
            .zip(other.0.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
