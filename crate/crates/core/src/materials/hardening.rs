use super::MaterialError;

/// Power-law hardening in the implicit form
/// `σ₀/σ_Y = (σ₀/σ_Y + 3μ ε₀ᵖ/σ_Y)^N`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AravasHardening {
    pub sigma_y: f64,
    pub shear: f64,
    pub exponent: f64,
}

impl AravasHardening {
    /// Flow stress and its slope `dσ₀/dε₀ᵖ`.
    pub fn flow_stress(&self, eps0_p: f64) -> Result<(f64, f64), MaterialError> {
        aravas_flow_stress(eps0_p, self.sigma_y, self.shear, self.exponent)
    }
}

/// Solves the implicit hardening law for `σ₀` with a bracketed Newton
/// iteration on `y = σ₀/σ_Y`. Returns `(σ₀, dσ₀/dε₀ᵖ)`.
pub fn aravas_flow_stress(
    eps0_p: f64,
    sigma_y: f64,
    shear: f64,
    exponent: f64,
) -> Result<(f64, f64), MaterialError> {
    let n = exponent;
    let b = 3.0 * shear * eps0_p.max(0.0) / sigma_y;
    if b == 0.0 {
        // y = y^N has the root y = 1.
        let slope = 3.0 * shear * n / (1.0 - n);
        return Ok((sigma_y, slope));
    }
    let residual = |y: f64| y - (y + b).powf(n);
    let mut lo = 1.0;
    let mut hi = b.max(2f64.powf(n / (1.0 - n))).max(1.0);
    let mut y = (1.0 + b).powf(n).clamp(lo, hi);
    for _ in 0..100 {
        let g = residual(y);
        if g.abs() <= 4.0 * f64::EPSILON * y {
            let t = n * (y + b).powf(n - 1.0);
            return Ok((sigma_y * y, 3.0 * shear * t / (1.0 - t)));
        }
        if g < 0.0 {
            lo = y;
        } else {
            hi = y;
        }
        let dg = 1.0 - n * (y + b).powf(n - 1.0);
        let mut next = y - g / dg;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - y).abs() <= f64::EPSILON * y {
            y = next;
            let t = n * (y + b).powf(n - 1.0);
            return Ok((sigma_y * y, 3.0 * shear * t / (1.0 - t)));
        }
        y = next;
    }
    Err(MaterialError::Hardening { eps0_p, residual: residual(y) })
}
