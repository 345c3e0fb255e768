//! Multi-dimensional real-to-complex transforms and spectral derivatives.
//!
//! The forward transform is unnormalized and the inverse divides by the
//! voxel count, so `inverse(forward(f)) = f`.

use std::sync::Arc;

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};

use crate::exec::Exec;
use crate::grid::{FrequencyTable, GridError, GridSpec};

/// Complex coefficients on the half spectrum, one block per component.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    pub blocks: Vec<Vec<Complex64>>,
}

impl SpectralField {
    pub fn zeros(components: usize, len: usize) -> Self {
        SpectralField { blocks: vec![vec![Complex64::new(0.0, 0.0); len]; components] }
    }

    pub fn scalar(block: Vec<Complex64>) -> Self {
        SpectralField { blocks: vec![block] }
    }

    pub fn components(&self) -> usize {
        self.blocks.len()
    }
}

/// Discrete L² inner product of two real fields given by their half spectra,
/// `Re Σ_k w_k a_k conj(b_k) / N` with Parseval weights `w_k`.
pub fn spectral_dot(grid: &GridSpec, a: &[Complex64], b: &[Complex64]) -> f64 {
    let n = grid.len() as f64;
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(k, (x, y))| grid.spectral_weight(k) * (x * y.conj()).re)
        .sum::<f64>()
        / n
}

/// Planned transforms for one grid.
pub struct FftEngine {
    grid: GridSpec,
    exec: Exec,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    axis_fwd: [Arc<dyn Fft<f64>>; 2],
    axis_inv: [Arc<dyn Fft<f64>>; 2],
}

impl std::fmt::Debug for FftEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftEngine").field("grid", &self.grid).finish()
    }
}

impl FftEngine {
    pub fn new(grid: &GridSpec) -> Self {
        Self::with_exec(grid, Exec::default())
    }

    pub fn with_exec(grid: &GridSpec, exec: Exec) -> Self {
        let [n1, n2, n3] = grid.cells();
        let mut real = RealFftPlanner::<f64>::new();
        let mut cplx = FftPlanner::<f64>::new();
        FftEngine {
            grid: grid.clone(),
            exec,
            r2c: real.plan_fft_forward(n1),
            c2r: real.plan_fft_inverse(n1),
            axis_fwd: [cplx.plan_fft_forward(n2), cplx.plan_fft_forward(n3)],
            axis_inv: [cplx.plan_fft_inverse(n2), cplx.plan_fft_inverse(n3)],
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn exec(&self) -> Exec {
        self.exec
    }

    /// Forward transform of a real field into `out` (half spectrum).
    pub fn forward_into(&self, input: &[f64], out: &mut [Complex64]) {
        let [n1, _, _] = self.grid.cells();
        let m1 = n1 / 2 + 1;
        debug_assert_eq!(input.len(), self.grid.len());
        debug_assert_eq!(out.len(), self.grid.spectral_len());
        let r2c = &self.r2c;
        self.exec.for_each_chunk_mut(out, m1, |row, dst| {
            let mut buf = input[row * n1..(row + 1) * n1].to_vec();
            let mut scratch = r2c.make_scratch_vec();
            r2c.process_with_scratch(&mut buf, dst, &mut scratch)
                .expect("row lengths match the plan");
        });
        self.transform_outer_axes(out, true);
    }

    pub fn forward(&self, input: &[f64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.grid.spectral_len()];
        self.forward_into(input, &mut out);
        out
    }

    /// Checked forward transform.
    pub fn forward_transform(&self, input: &[f64]) -> Result<Vec<Complex64>, GridError> {
        self.grid.check_len(input.len())?;
        Ok(self.forward(input))
    }

    /// Inverse transform; `spec` is used as scratch and left unspecified.
    pub fn inverse_into(&self, spec: &mut [Complex64], out: &mut [f64]) {
        let [n1, _, _] = self.grid.cells();
        let m1 = n1 / 2 + 1;
        debug_assert_eq!(out.len(), self.grid.len());
        self.transform_outer_axes(spec, false);
        let scale = 1.0 / self.grid.len() as f64;
        let c2r = &self.c2r;
        let spec_ro: &[Complex64] = spec;
        self.exec.for_each_chunk_mut(out, n1, |row, dst| {
            let mut buf = spec_ro[row * m1..(row + 1) * m1].to_vec();
            // Hermitian rows: the k1 = 0 (and even-N1 Nyquist) entries are real.
            buf[0].im = 0.0;
            if n1 % 2 == 0 {
                buf[m1 - 1].im = 0.0;
            }
            let mut scratch = c2r.make_scratch_vec();
            c2r.process_with_scratch(&mut buf, dst, &mut scratch)
                .expect("row lengths match the plan");
            for v in dst.iter_mut() {
                *v *= scale;
            }
        });
    }

    pub fn inverse(&self, spec: &[Complex64]) -> Vec<f64> {
        let mut tmp = spec.to_vec();
        let mut out = vec![0.0; self.grid.len()];
        self.inverse_into(&mut tmp, &mut out);
        out
    }

    /// Checked inverse transform.
    pub fn inverse_transform(&self, spec: &[Complex64]) -> Result<Vec<f64>, GridError> {
        if spec.len() != self.grid.spectral_len() {
            return Err(GridError::ShapeMismatch {
                expected: self.grid.spectral_len(),
                found: spec.len(),
            });
        }
        Ok(self.inverse(spec))
    }

    pub fn forward_field(&self, components: &[Vec<f64>]) -> SpectralField {
        SpectralField { blocks: components.iter().map(|c| self.forward(c)).collect() }
    }

    pub fn inverse_field(&self, spec: &SpectralField) -> Vec<Vec<f64>> {
        spec.blocks.iter().map(|b| self.inverse(b)).collect()
    }

    /// Complex transforms along x2 and x3 of a half-spectrum array.
    fn transform_outer_axes(&self, data: &mut [Complex64], forward: bool) {
        let [m1, n2, n3] = self.grid.spectral_cells();
        let plans = if forward { &self.axis_fwd } else { &self.axis_inv };
        if n2 > 1 {
            strided_fft(self.exec, data, m1, n2, &plans[0]);
        }
        if n3 > 1 {
            strided_fft(self.exec, data, m1 * n2, n3, &plans[1]);
        }
    }
}

/// FFT along the middle axis of `data` viewed as `[outer][len][inner]`
/// (`inner` fastest), via a transpose into contiguous rows.
fn strided_fft(
    exec: Exec,
    data: &mut [Complex64],
    inner: usize,
    len: usize,
    plan: &Arc<dyn Fft<f64>>,
) {
    let mut buf = vec![Complex64::new(0.0, 0.0); data.len()];
    {
        let src: &[Complex64] = data;
        exec.for_each_chunk_mut(&mut buf, len, |q, row| {
            let (r, p) = (q / inner, q % inner);
            for (l, v) in row.iter_mut().enumerate() {
                *v = src[p + inner * (l + len * r)];
            }
        });
    }
    exec.for_each_chunk_mut(&mut buf, len * inner.min(64), |_, rows| {
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(rows, &mut scratch);
    });
    let src: &[Complex64] = &buf;
    exec.for_each_chunk_mut(data, inner, |row, dst| {
        let (l, r) = (row % len, row / len);
        for (p, v) in dst.iter_mut().enumerate() {
            *v = src[(r * inner + p) * len + l];
        }
    });
}

/// Spectral gradient: multiplies a scalar spectrum by `D = iξ` per axis.
/// Returns one block per grid axis (three blocks; unused axes are zero).
pub fn gradient_spectral(scalar: &[Complex64], freq: &FrequencyTable) -> SpectralField {
    SpectralField {
        blocks: (0..3)
            .map(|a| {
                scalar
                    .iter()
                    .zip(freq.derivatives())
                    .map(|(s, d)| d[a] * s)
                    .collect()
            })
            .collect(),
    }
}

/// Spectral divergence, the negative adjoint of [`gradient_spectral`]:
/// `Σ_a -conj(D_a) v_a` (equal to `iξ · v` for real frequencies).
pub fn divergence_spectral(vector: &SpectralField, freq: &FrequencyTable) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); freq.len()];
    for (a, block) in vector.blocks.iter().enumerate().take(3) {
        for ((o, v), d) in out.iter_mut().zip(block).zip(freq.derivatives()) {
            *o -= d[a].conj() * v;
        }
    }
    out
}
