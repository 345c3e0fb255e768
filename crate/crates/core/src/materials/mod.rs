//! Point-level constitutive models.
//!
//! Every model is rate independent and integrated with backward Euler from
//! the converged state of the previous increment. The non-local fields are
//! inputs: within one mechanical solve they are frozen at the current
//! staggered iterate, so damage is fixed while the stress is returned to
//! the yield surface.

mod elastic;
mod gurson;
mod hardening;
mod lemaitre;
mod tangent_fd;

pub use elastic::{elastic_update, ElasticModuli};
pub use gurson::{effective_porosity, nucleation_rate, Gurson, GursonParams};
pub use hardening::{aravas_flow_stress, AravasHardening};
pub use lemaitre::{lemaitre_damage, Lemaitre, LemaitreParams};
pub use tangent_fd::{consistent_tangent_fd, FdError};

use thiserror::Error;

use crate::tensor::{SymTensor, Tangent};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaterialError {
    #[error("flow stress solve did not converge (eps0_p = {eps0_p}, residual = {residual:e})")]
    Hardening { eps0_p: f64, residual: f64 },
    #[error("return mapping did not converge after {iterations} iterations (residual {residual:e})")]
    ReturnMapping { iterations: usize, residual: f64 },
    #[error("invalid material parameters: {0}")]
    InvalidParameters(String),
}

/// Internal variables beyond stress and plastic strain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Internal {
    None,
    Gurson {
        /// Matrix equivalent plastic strain.
        eps0_p: f64,
        /// Void volume fraction.
        porosity: f64,
        /// Effective porosity `f*`.
        effective_porosity: f64,
    },
    Lemaitre {
        /// Equivalent plastic strain.
        eps_p: f64,
        damage: f64,
        effective_stress: SymTensor,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VoxelState {
    pub stress: SymTensor,
    pub plastic_strain: SymTensor,
    pub internal: Internal,
}

impl VoxelState {
    pub fn elastic() -> Self {
        VoxelState {
            stress: SymTensor::ZERO,
            plastic_strain: SymTensor::ZERO,
            internal: Internal::None,
        }
    }

    /// Damage indicator: `f*` for Gurson, `D` for Lemaitre, 0 otherwise.
    pub fn damage(&self) -> f64 {
        match self.internal {
            Internal::None => 0.0,
            Internal::Gurson { effective_porosity, .. } => effective_porosity,
            Internal::Lemaitre { damage, .. } => damage,
        }
    }

    /// Local sources of the regularized variables, in model order:
    /// Gurson `[ε₀ᵖ, tr εᵖ]`, Lemaitre `[εₚ, 0]`.
    pub fn local_sources(&self) -> [f64; 2] {
        match self.internal {
            Internal::None => [0.0, 0.0],
            Internal::Gurson { eps0_p, .. } => [eps0_p, self.plastic_strain.trace()],
            Internal::Lemaitre { eps_p, .. } => [eps_p, 0.0],
        }
    }
}

/// Non-local variables at the current iterate and at the previous increment.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Nonlocal {
    pub current: [f64; 2],
    pub previous: [f64; 2],
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaterialResponse {
    pub state: VoxelState,
    pub tangent: Tangent,
    /// Whether the step left the elastic domain.
    pub plastic: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Elastic,
    Gurson,
    Lemaitre,
}

impl ModelKind {
    /// Number of regularized variables the model consumes.
    pub fn nonlocal_count(self) -> usize {
        match self {
            ModelKind::Elastic => 0,
            ModelKind::Gurson => 2,
            ModelKind::Lemaitre => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Elastic => "elastic",
            ModelKind::Gurson => "gurson",
            ModelKind::Lemaitre => "lemaitre",
        }
    }

    pub fn parse(s: &str) -> Option<ModelKind> {
        match s.to_ascii_lowercase().as_str() {
            "elastic" => Some(ModelKind::Elastic),
            "gurson" | "gtn" => Some(ModelKind::Gurson),
            "lemaitre" => Some(ModelKind::Lemaitre),
            _ => None,
        }
    }

    /// Names of the regularized variables.
    pub fn nonlocal_names(self) -> &'static [&'static str] {
        match self {
            ModelKind::Elastic => &[],
            ModelKind::Gurson => &["eps0_p_bar", "tr_eps_p_bar"],
            ModelKind::Lemaitre => &["eps_p_bar"],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Material {
    Elastic(ElasticModuli),
    Gurson(Gurson),
    Lemaitre(Lemaitre),
}

impl Material {
    pub fn kind(&self) -> ModelKind {
        match self {
            Material::Elastic(_) => ModelKind::Elastic,
            Material::Gurson(_) => ModelKind::Gurson,
            Material::Lemaitre(_) => ModelKind::Lemaitre,
        }
    }

    pub fn moduli(&self) -> &ElasticModuli {
        match self {
            Material::Elastic(m) => m,
            Material::Gurson(g) => &g.elastic,
            Material::Lemaitre(l) => &l.elastic,
        }
    }

    /// Stress scale used to normalize equilibrium residuals.
    pub fn reference_stress(&self) -> f64 {
        match self {
            Material::Elastic(m) => 1e-3 * m.young,
            Material::Gurson(g) => g.params.sigma_y,
            Material::Lemaitre(l) => l.params.sigma_y,
        }
    }

    pub fn validate(&self) -> Result<(), MaterialError> {
        match self {
            Material::Elastic(m) => m.validate(),
            Material::Gurson(g) => g.validate(),
            Material::Lemaitre(l) => l.validate(),
        }
    }

    pub fn initial_state(&self) -> VoxelState {
        match self {
            Material::Elastic(_) => VoxelState::elastic(),
            Material::Gurson(g) => g.initial_state(),
            Material::Lemaitre(_) => Lemaitre::initial_state(),
        }
    }

    /// Backward-Euler update from `prev` to total strain `strain`.
    pub fn update(
        &self,
        prev: &VoxelState,
        strain: &SymTensor,
        nonlocal: &Nonlocal,
    ) -> Result<MaterialResponse, MaterialError> {
        match self {
            Material::Elastic(m) => {
                let (stress, tangent) = elastic_update(m, &(*strain - prev.plastic_strain));
                Ok(MaterialResponse {
                    state: VoxelState { stress, ..*prev },
                    tangent,
                    plastic: false,
                })
            }
            Material::Gurson(g) => g.update(prev, strain, nonlocal),
            Material::Lemaitre(l) => l.update(prev, strain, nonlocal),
        }
    }
}
