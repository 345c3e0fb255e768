use crate::tensor::{SymTensor, Tangent};

use super::MaterialError;

/// Isotropic linear elasticity given by Young's modulus and Poisson ratio.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElasticModuli {
    pub young: f64,
    pub poisson: f64,
}

impl ElasticModuli {
    pub fn new(young: f64, poisson: f64) -> Self {
        ElasticModuli { young, poisson }
    }

    pub fn bulk(&self) -> f64 {
        self.young / (3.0 * (1.0 - 2.0 * self.poisson))
    }

    pub fn shear(&self) -> f64 {
        self.young / (2.0 * (1.0 + self.poisson))
    }

    pub fn lame_lambda(&self) -> f64 {
        self.young * self.poisson / ((1.0 + self.poisson) * (1.0 - 2.0 * self.poisson))
    }

    pub fn tangent(&self) -> Tangent {
        Tangent::isotropic(self.bulk(), self.shear())
    }

    pub fn validate(&self) -> Result<(), MaterialError> {
        if !(self.young > 0.0 && self.young.is_finite()) {
            return Err(MaterialError::InvalidParameters(format!(
                "Young's modulus must be positive, got {}",
                self.young
            )));
        }
        if !(self.poisson > -1.0 && self.poisson < 0.5) {
            return Err(MaterialError::InvalidParameters(format!(
                "Poisson ratio must lie in (-1, 0.5), got {}",
                self.poisson
            )));
        }
        Ok(())
    }
}

/// `σ = K tr[εᵉ] I + 2μ dev[εᵉ]` and the isotropic elasticity tensor.
pub fn elastic_update(moduli: &ElasticModuli, elastic_strain: &SymTensor) -> (SymTensor, Tangent) {
    let k = moduli.bulk();
    let mu = moduli.shear();
    let stress =
        SymTensor::IDENTITY.scale(k * elastic_strain.trace()) + elastic_strain.deviator().scale(2.0 * mu);
    (stress, Tangent::isotropic(k, mu))
}
