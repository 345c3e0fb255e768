//! Named parameter sets: the 2D disc-reinforced composite and the 3D
//! sphere-reinforced aluminium composite. Stresses in MPa, lengths in
//! units of the cell edge `L`.

use crate::driver::{LoadHistory, PhaseSpec};
use crate::materials::{ElasticModuli, Gurson, GursonParams, Lemaitre, LemaitreParams, Material};
use crate::mechanics::Control;

/// Regularization lengths of the non-local runs.
pub const ELL_MATRIX: f64 = 0.05;
pub const ELL_INCLUSION: f64 = 0.001;
/// Length used for the local counterparts, below any grid spacing used.
pub const ELL_LOCAL: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Gurson2d,
    Lemaitre2d,
    Gurson3d,
    Lemaitre3d,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Gurson2d, Preset::Lemaitre2d, Preset::Gurson3d, Preset::Lemaitre3d];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Gurson2d => "gurson2d",
            Preset::Lemaitre2d => "lemaitre2d",
            Preset::Gurson3d => "gurson3d",
            Preset::Lemaitre3d => "lemaitre3d",
        }
    }

    pub fn parse(s: &str) -> Option<Preset> {
        Preset::ALL.into_iter().find(|p| p.name() == s)
    }

    pub fn is_3d(self) -> bool {
        matches!(self, Preset::Gurson3d | Preset::Lemaitre3d)
    }

    pub fn matrix(self) -> Material {
        match self {
            Preset::Gurson2d => gurson_matrix_2d(),
            Preset::Lemaitre2d => lemaitre_matrix_2d(),
            Preset::Gurson3d => gurson_matrix_3d(),
            Preset::Lemaitre3d => lemaitre_matrix_3d(),
        }
    }

    pub fn inclusion(self) -> Material {
        if self.is_3d() {
            inclusion_3d()
        } else {
            inclusion_2d()
        }
    }

    /// Matrix as phase 0, inclusion as phase 1.
    pub fn phases(self, ell_matrix: f64, ell_inclusion: f64) -> Vec<PhaseSpec> {
        vec![
            PhaseSpec { material: self.matrix(), length: ell_matrix },
            PhaseSpec { material: self.inclusion(), length: ell_inclusion },
        ]
    }

    /// Monotonic `E11` ramp at unit rate to `e_end`: plane strain with
    /// free lateral stress in 2D, uniaxial stress in 3D.
    pub fn load(self, e_end: f64, de: f64) -> LoadHistory {
        let control = if self.is_3d() { uniaxial_control() } else { plane_strain_control() };
        LoadHistory::ramp(control, [1.0, 0.0, 0.0, 0.0, 0.0, 0.0], e_end, de)
    }
}

/// `E11` prescribed, `Σ22 = Σ12 = 0`, out-of-plane strains zero.
pub fn plane_strain_control() -> [Control; 6] {
    use Control::*;
    [Strain, Stress, Strain, Strain, Strain, Stress]
}

/// `E11` prescribed, all other stress components zero.
pub fn uniaxial_control() -> [Control; 6] {
    use Control::*;
    [Strain, Stress, Stress, Stress, Stress, Stress]
}

fn gurson_params(sigma_y: f64, eps_n: f64, s_n: f64) -> GursonParams {
    let mut p = GursonParams {
        q1: 1.5,
        q2: 1.0,
        q3: 2.25,
        f0: 0.0,
        f_c: 0.15,
        f_f: 0.25,
        f_n: 0.04,
        eps_n,
        s_n,
        sigma_y,
        exponent: 0.1,
        f_star_max: 0.0,
    };
    p.f_star_max = 0.9 * p.f_ultimate();
    p
}

fn lemaitre_params(sigma_y: f64) -> LemaitreParams {
    LemaitreParams { sigma_y, hardening: 10e3, eps_c: 0.03, eps_r: 0.2, d_max: 0.99 }
}

pub fn gurson_matrix_2d() -> Material {
    Material::Gurson(Gurson::new(ElasticModuli::new(300e3, 0.3), gurson_params(1000.0, 0.3, 0.1)))
}

pub fn lemaitre_matrix_2d() -> Material {
    Material::Lemaitre(Lemaitre::new(ElasticModuli::new(300e3, 0.3), lemaitre_params(1000.0)))
}

pub fn inclusion_2d() -> Material {
    Material::Elastic(ElasticModuli::new(900e3, 0.3))
}

pub fn gurson_matrix_3d() -> Material {
    Material::Gurson(Gurson::new(ElasticModuli::new(70e3, 0.33), gurson_params(200.0, 0.1, 0.05)))
}

pub fn lemaitre_matrix_3d() -> Material {
    Material::Lemaitre(Lemaitre::new(ElasticModuli::new(70e3, 0.33), lemaitre_params(200.0)))
}

pub fn inclusion_3d() -> Material {
    Material::Elastic(ElasticModuli::new(400e3, 0.2))
}
