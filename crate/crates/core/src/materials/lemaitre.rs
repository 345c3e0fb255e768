//! Von Mises plasticity with linear isotropic hardening in effective-stress
//! space, coupled to a scalar damage variable driven by the regularized
//! equivalent plastic strain.

use super::{elastic_update, ElasticModuli, Internal, MaterialError, MaterialResponse, Nonlocal, VoxelState};
use crate::tensor::{SymTensor, Tangent};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LemaitreParams {
    pub sigma_y: f64,
    /// Linear hardening modulus.
    pub hardening: f64,
    /// Plastic strain at damage onset.
    pub eps_c: f64,
    /// Plastic strain at rupture.
    pub eps_r: f64,
    /// Upper bound on the damage variable.
    pub d_max: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Lemaitre {
    pub elastic: ElasticModuli,
    pub params: LemaitreParams,
}

/// Linear damage law in the regularized plastic strain, clamped to `[0, 1]`.
pub fn lemaitre_damage(eps_bar: f64, params: &LemaitreParams) -> f64 {
    ((eps_bar - params.eps_c) / (params.eps_r - params.eps_c)).clamp(0.0, 1.0)
}

impl Lemaitre {
    pub fn new(elastic: ElasticModuli, params: LemaitreParams) -> Self {
        Lemaitre { elastic, params }
    }

    pub fn validate(&self) -> Result<(), MaterialError> {
        self.elastic.validate()?;
        let p = &self.params;
        if !(p.sigma_y > 0.0 && p.hardening >= 0.0) {
            return Err(MaterialError::InvalidParameters(
                "sigma_y must be positive and the hardening modulus non-negative".into(),
            ));
        }
        if !(0.0 <= p.eps_c && p.eps_c < p.eps_r) {
            return Err(MaterialError::InvalidParameters("need 0 <= eps_c < eps_r".into()));
        }
        if !(0.0 < p.d_max && p.d_max < 1.0) {
            return Err(MaterialError::InvalidParameters("d_max must lie in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn initial_state() -> VoxelState {
        VoxelState {
            stress: SymTensor::ZERO,
            plastic_strain: SymTensor::ZERO,
            internal: Internal::Lemaitre { eps_p: 0.0, damage: 0.0, effective_stress: SymTensor::ZERO },
        }
    }

    pub fn update(
        &self,
        prev: &VoxelState,
        strain: &SymTensor,
        nonlocal: &Nonlocal,
    ) -> Result<MaterialResponse, MaterialError> {
        let (eps_n, d_n) = match prev.internal {
            Internal::Lemaitre { eps_p, damage, .. } => (eps_p, damage),
            _ => (0.0, 0.0),
        };
        let p = &self.params;
        let damage = d_n.max(lemaitre_damage(nonlocal.current[0], p).min(p.d_max));
        let keep = 1.0 - damage;

        let (k, mu) = (self.elastic.bulk(), self.elastic.shear());
        let (trial, c_el) = elastic_update(&self.elastic, &(*strain - prev.plastic_strain));
        let s = trial.deviator();
        let s_norm = s.norm();
        let radius = (2.0f64 / 3.0).sqrt() * (p.sigma_y + p.hardening * eps_n);
        let phi = s_norm - radius;

        if phi <= 0.0 {
            return Ok(MaterialResponse {
                state: VoxelState {
                    stress: trial.scale(keep),
                    plastic_strain: prev.plastic_strain,
                    internal: Internal::Lemaitre { eps_p: eps_n, damage, effective_stress: trial },
                },
                tangent: c_el.scale(keep),
                plastic: false,
            });
        }

        let d_lambda = phi / (2.0 * mu + 2.0 / 3.0 * p.hardening);
        let n = s.scale(1.0 / s_norm);
        let effective = trial - n.scale(2.0 * mu * d_lambda);
        let beta = 1.0 - 2.0 * mu * d_lambda / s_norm;
        let gamma = 1.0 / (1.0 + p.hardening / (3.0 * mu)) - (1.0 - beta);
        let mut c_ep = Tangent::volumetric().scale(k);
        c_ep.add_scaled(2.0 * mu * beta, &Tangent::deviatoric());
        c_ep.add_scaled(-2.0 * mu * gamma, &Tangent::outer(&n, &n));

        Ok(MaterialResponse {
            state: VoxelState {
                stress: effective.scale(keep),
                plastic_strain: prev.plastic_strain + n.scale(d_lambda),
                internal: Internal::Lemaitre {
                    eps_p: eps_n + (2.0f64 / 3.0).sqrt() * d_lambda,
                    damage,
                    effective_stress: effective,
                },
            },
            tangent: c_ep.scale(keep),
            plastic: true,
        })
    }
}
