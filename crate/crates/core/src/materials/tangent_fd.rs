use thiserror::Error;

use super::{MaterialError, MaterialResponse};
use crate::tensor::{SymTensor, Tangent};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FdError {
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error("perturbation of component {0} crosses the elastic/plastic boundary")]
    Straddle(usize),
}

/// Central-difference tangent of a stress update in Mandel coordinates.
pub fn consistent_tangent_fd<F>(update: F, strain: &SymTensor, step: f64) -> Result<Tangent, FdError>
where
    F: Fn(&SymTensor) -> Result<MaterialResponse, MaterialError>,
{
    let base = update(strain)?;
    let mut t = Tangent::zero();
    for b in 0..6 {
        let mut plus = *strain;
        plus[b] += step;
        let mut minus = *strain;
        minus[b] -= step;
        let rp = update(&plus)?;
        let rm = update(&minus)?;
        if rp.plastic != base.plastic || rm.plastic != base.plastic {
            return Err(FdError::Straddle(b));
        }
        for a in 0..6 {
            t.0[a][b] = (rp.state.stress[a] - rm.state.stress[a]) / (2.0 * step);
        }
    }
    Ok(t)
}
