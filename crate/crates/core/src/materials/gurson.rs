//! Porous plasticity with void nucleation, growth and coalescence.
//!
//! The yield function is
//! `φ = (q/σ₀)² + 2 q₁ f* cosh(-3 q₂ p / 2σ₀) - (1 + q₃ f*²)`
//! with `p = -tr σ / 3` and `q` the von Mises stress. The porosity is
//! driven by the regularized matrix plastic strain and volumetric plastic
//! strain, so `f*` is a known quantity during the return mapping.

use nalgebra::{Matrix3, Vector3};

use super::{
    elastic_update, AravasHardening, ElasticModuli, Internal, MaterialError, MaterialResponse,
    Nonlocal, VoxelState,
};
use crate::tensor::{SymTensor, Tangent};

const MAX_ITER: usize = 50;
const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GursonParams {
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    /// Initial porosity.
    pub f0: f64,
    /// Critical porosity at which coalescence starts.
    pub f_c: f64,
    /// Porosity at final failure.
    pub f_f: f64,
    /// Volume fraction of nucleating particles.
    pub f_n: f64,
    /// Mean nucleation strain.
    pub eps_n: f64,
    /// Standard deviation of the nucleation strain.
    pub s_n: f64,
    pub sigma_y: f64,
    /// Hardening exponent.
    pub exponent: f64,
    /// Upper bound applied to `f*` to keep the yield surface non-degenerate.
    pub f_star_max: f64,
}

impl GursonParams {
    /// Porosity at which the yield surface shrinks to a point.
    pub fn f_ultimate(&self) -> f64 {
        (self.q1 + (self.q1 * self.q1 - self.q3).max(0.0).sqrt()) / self.q3
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gurson {
    pub elastic: ElasticModuli,
    pub params: GursonParams,
}

/// Effective porosity: identity below `f_c`, linear acceleration up to
/// `f_V*` at `f_f`, capped at `params.f_star_max`.
pub fn effective_porosity(f: f64, params: &GursonParams) -> f64 {
    let fu = params.f_ultimate();
    let fs = if f < params.f_c {
        f
    } else if f < params.f_f {
        params.f_c + (fu - params.f_c) / (params.f_f - params.f_c) * (f - params.f_c)
    } else {
        fu
    };
    fs.max(0.0).min(params.f_star_max)
}

/// Strain-controlled nucleation intensity `A_N(ε₀ᵖ)`.
pub fn nucleation_rate(eps0_p: f64, params: &GursonParams) -> f64 {
    let t = (eps0_p - params.eps_n) / params.s_n;
    params.f_n / (params.s_n * (2.0 * std::f64::consts::PI).sqrt()) * (-0.5 * t * t).exp()
}

/// Pressure `p = -tr σ / 3`, von Mises stress and unit flow direction
/// `n = 3 s / 2q`.
fn invariants(stress: &SymTensor) -> (f64, f64, SymTensor) {
    let p = -stress.trace() / 3.0;
    let s = stress.deviator();
    let q = (1.5 * s.dot(&s)).sqrt();
    let n = if q > 0.0 { s.scale(1.5 / q) } else { SymTensor::ZERO };
    (p, q, n)
}

/// Yield function at pressure `p`, equivalent stress `q`.
pub(crate) fn yield_function(p: f64, q: f64, sigma0: f64, f_star: f64, params: &GursonParams) -> f64 {
    let qq = q / sigma0;
    qq * qq + 2.0 * params.q1 * f_star * (1.5 * params.q2 * p / sigma0).cosh()
        - (1.0 + params.q3 * f_star * f_star)
}

struct Local<'a> {
    params: &'a GursonParams,
    hardening: AravasHardening,
    bulk: f64,
    shear: f64,
    p_tr: f64,
    q_tr: f64,
    eps0_n: f64,
    /// Local porosity, enters the plastic work balance.
    f: f64,
    /// Effective porosity, enters the yield surface.
    f_star: f64,
    /// Row weights that bring the three residuals to a common scale.
    w: f64,
}

struct Eval {
    r: Vector3<f64>,
    jac: Matrix3<f64>,
    p: f64,
    q: f64,
    sigma0: f64,
}

impl Local<'_> {
    fn eval(&self, x: &Vector3<f64>) -> Result<Eval, MaterialError> {
        let pr = self.params;
        let (k, mu) = (self.bulk, self.shear);
        let (x1, x2, x3) = (x[0], x[1], x[2]);
        let p = self.p_tr + k * x1;
        let q = self.q_tr - 3.0 * mu * x2;
        let (s0, h) = self.hardening.flow_stress(self.eps0_n + x3)?;
        let a = 1.5 * pr.q2 / s0;
        let z = a * p;
        let (sh, ch) = (z.sinh(), z.cosh());
        let c = 3.0 * self.f_star * pr.q1 * pr.q2;
        let qq = q / s0;
        let fq = 2.0 * self.f_star * pr.q1;
        let sy = pr.sigma_y;
        let w = self.w;

        let r = Vector3::new(
            w * (2.0 * x1 * qq + c * x2 * sh),
            qq * qq + fq * ch - (1.0 + pr.q3 * self.f_star * self.f_star),
            w * ((1.0 - self.f) * s0 * x3 + p * x1 - q * x2) / sy,
        );
        let jac = Matrix3::new(
            w * (2.0 * qq + c * x2 * ch * a * k),
            w * (-6.0 * mu * x1 / s0 + c * sh),
            w * (-2.0 * x1 * q * h / (s0 * s0) - c * x2 * ch * z * h / s0),
            fq * sh * a * k,
            -6.0 * mu * qq / s0,
            -2.0 * qq * q * h / (s0 * s0) - fq * sh * z * h / s0,
            w * (k * x1 + p) / sy,
            w * (3.0 * mu * x2 - q) / sy,
            w * (1.0 - self.f) * (h * x3 + s0) / sy,
        );
        Ok(Eval { r, jac, p, q, sigma0: s0 })
    }

    /// Partial derivatives of the residual with respect to the trial
    /// invariants at fixed unknowns.
    fn trial_sensitivities(&self, x: &Vector3<f64>, e: &Eval) -> (Vector3<f64>, Vector3<f64>) {
        let pr = self.params;
        let a = 1.5 * pr.q2 / e.sigma0;
        let z = a * e.p;
        let c = 3.0 * self.f_star * pr.q1 * pr.q2;
        let fq = 2.0 * self.f_star * pr.q1;
        let sy = pr.sigma_y;
        let w = self.w;
        let rp = Vector3::new(w * c * x[1] * z.cosh() * a, fq * z.sinh() * a, w * x[0] / sy);
        let rq = Vector3::new(
            w * 2.0 * x[0] / e.sigma0,
            2.0 * e.q / (e.sigma0 * e.sigma0),
            -w * x[1] / sy,
        );
        (rp, rq)
    }

    /// Largest step fraction that keeps `0 <= Δε_q <= q_tr/3μ` and `Δε₀ᵖ >= 0`.
    fn max_fraction(&self, x: &Vector3<f64>, dx: &Vector3<f64>) -> f64 {
        let mut alpha: f64 = 1.0;
        let x2_max = self.q_tr / (3.0 * self.shear);
        if dx[1] < 0.0 {
            alpha = alpha.min(-0.99 * x[1] / dx[1]);
        }
        if dx[1] > 0.0 && x[1] + dx[1] > x2_max {
            alpha = alpha.min(0.99 * (x2_max - x[1]) / dx[1]);
        }
        if dx[2] < 0.0 {
            alpha = alpha.min(-0.99 * x[2] / dx[2]);
        }
        alpha.max(0.0)
    }
}

impl Gurson {
    pub fn new(elastic: ElasticModuli, params: GursonParams) -> Self {
        Gurson { elastic, params }
    }

    pub fn hardening(&self) -> AravasHardening {
        AravasHardening {
            sigma_y: self.params.sigma_y,
            shear: self.elastic.shear(),
            exponent: self.params.exponent,
        }
    }

    pub fn validate(&self) -> Result<(), MaterialError> {
        self.elastic.validate()?;
        let p = &self.params;
        let bad = |msg: &str| Err(MaterialError::InvalidParameters(msg.to_string()));
        if !(p.q1 > 0.0 && p.q2 > 0.0 && p.q3 > 0.0) {
            return bad("q1, q2, q3 must be positive");
        }
        if p.q1 * p.q1 < p.q3 {
            return bad("q1^2 must not be smaller than q3");
        }
        if !(0.0 <= p.f0 && p.f0 < p.f_c && p.f_c < p.f_f) {
            return bad("porosities must satisfy 0 <= f0 < f_c < f_f");
        }
        if !(p.f_star_max > 0.0 && p.f_star_max < p.f_ultimate()) {
            return bad("f_star_max must lie in (0, f_ultimate)");
        }
        if !(p.sigma_y > 0.0 && p.s_n > 0.0 && p.f_n >= 0.0) {
            return bad("sigma_y and s_n must be positive, f_n non-negative");
        }
        if !(p.exponent > 0.0 && p.exponent < 1.0) {
            return bad("hardening exponent must lie in (0, 1)");
        }
        Ok(())
    }

    pub fn initial_state(&self) -> VoxelState {
        VoxelState {
            stress: SymTensor::ZERO,
            plastic_strain: SymTensor::ZERO,
            internal: Internal::Gurson {
                eps0_p: 0.0,
                porosity: self.params.f0,
                effective_porosity: effective_porosity(self.params.f0, &self.params),
            },
        }
    }

    /// Porosity after the increment, driven by the non-local increments.
    pub fn porosity_update(&self, f_n: f64, nonlocal: &Nonlocal) -> f64 {
        let d_eps0 = nonlocal.current[0] - nonlocal.previous[0];
        let d_tr = nonlocal.current[1] - nonlocal.previous[1];
        let a_n = nucleation_rate(nonlocal.current[0], &self.params);
        let f = (f_n + a_n * d_eps0 + d_tr) / (1.0 + d_tr);
        f.max(f_n).clamp(0.0, 1.0 - 1e-12)
    }

    pub fn update(
        &self,
        prev: &VoxelState,
        strain: &SymTensor,
        nonlocal: &Nonlocal,
    ) -> Result<MaterialResponse, MaterialError> {
        let (eps0_n, f_n) = match prev.internal {
            Internal::Gurson { eps0_p, porosity, .. } => (eps0_p, porosity),
            _ => (0.0, self.params.f0),
        };
        let f = self.porosity_update(f_n, nonlocal);
        let f_star = effective_porosity(f, &self.params);
        let (k, mu) = (self.elastic.bulk(), self.elastic.shear());

        let (trial, c_el) = elastic_update(&self.elastic, &(*strain - prev.plastic_strain));
        let (p_tr, q_tr, n) = invariants(&trial);
        let hardening = self.hardening();
        let (s0_n, _) = hardening.flow_stress(eps0_n)?;

        let elastic_state = |stress: SymTensor| VoxelState {
            stress,
            plastic_strain: prev.plastic_strain,
            internal: Internal::Gurson { eps0_p: eps0_n, porosity: f, effective_porosity: f_star },
        };
        if yield_function(p_tr, q_tr, s0_n, f_star, &self.params) <= 0.0 {
            return Ok(MaterialResponse { state: elastic_state(trial), tangent: c_el, plastic: false });
        }

        let local = Local {
            params: &self.params,
            hardening,
            bulk: k,
            shear: mu,
            p_tr,
            q_tr,
            eps0_n,
            f,
            f_star,
            w: 3.0 * mu / self.params.sigma_y,
        };
        let mut x = Vector3::zeros();
        let mut e = local.eval(&x)?;
        let mut merit = e.r.norm_squared();
        // Radial return at frozen hardening is often a closer start.
        let d = ((q_tr - s0_n) / (3.0 * mu)).max(0.0);
        let radial = Vector3::new(0.0, d, d);
        if let Ok(re) = local.eval(&radial) {
            let rm = re.r.norm_squared();
            if rm.is_finite() && rm < merit {
                (x, e, merit) = (radial, re, rm);
            }
        }
        let mut converged = false;
        for _ in 0..MAX_ITER {
            if e.r.amax() < RESIDUAL_TOL {
                converged = true;
                break;
            }
            let dx = match e.jac.lu().solve(&(-e.r)) {
                Some(dx) => dx,
                None => break,
            };
            let mut alpha = local.max_fraction(&x, &dx);
            let mut accepted = false;
            for _ in 0..30 {
                let trial_x = x + dx * alpha;
                if let Ok(te) = local.eval(&trial_x) {
                    let tm = te.r.norm_squared();
                    if tm.is_finite() && tm <= (1.0 - 1e-4 * alpha) * merit {
                        x = trial_x;
                        e = te;
                        merit = tm;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if !converged && e.r.amax() >= RESIDUAL_TOL {
            return Err(MaterialError::ReturnMapping { iterations: MAX_ITER, residual: e.r.amax() });
        }

        let stress = SymTensor::IDENTITY.scale(-e.p) + n.scale(2.0 * e.q / 3.0);
        let d_eps_p = SymTensor::IDENTITY.scale(x[0] / 3.0) + n.scale(x[1]);

        let (rp, rq) = local.trial_sensitivities(&x, &e);
        let lu = e.jac.lu();
        let a = lu.solve(&(-rp)).unwrap_or_else(Vector3::zeros);
        let b = lu.solve(&(-rq)).unwrap_or_else(Vector3::zeros);
        let ratio = if q_tr > 0.0 { e.q / q_tr } else { 1.0 };
        let id = SymTensor::IDENTITY;
        let mut tangent = Tangent::outer(&id, &id).scale(k * (1.0 + k * a[0]));
        tangent.add_scaled(-2.0 * mu * k * b[0], &Tangent::outer(&id, &n));
        tangent.add_scaled(4.0 / 3.0 * mu * (1.0 - 3.0 * mu * b[1]), &Tangent::outer(&n, &n));
        tangent.add_scaled(2.0 * mu * k * a[1], &Tangent::outer(&n, &id));
        tangent.add_scaled(2.0 * mu * ratio, &Tangent::deviatoric());
        tangent.add_scaled(-4.0 / 3.0 * mu * ratio, &Tangent::outer(&n, &n));

        Ok(MaterialResponse {
            state: VoxelState {
                stress,
                plastic_strain: prev.plastic_strain + d_eps_p,
                internal: Internal::Gurson {
                    eps0_p: eps0_n + x[2],
                    porosity: f,
                    effective_porosity: f_star,
                },
            },
            tangent,
            plastic: true,
        })
    }
}
