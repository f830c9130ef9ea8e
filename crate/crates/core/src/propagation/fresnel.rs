//! Fresnel reflection at a planar air/material interface.
//!
//! The material is described by a complex relative permittivity
//! `eps_r - j sigma / (omega eps_0)` (time dependence `exp(j omega t)`).
//! Sign convention: the TE (s) field is referenced to `s = k x n`, the TM (p)
//! field to `s x k` before and `s x k'` after reflection. With that choice a
//! reflected field is `Gamma_TE E_s s + Gamma_TM E_p p'` and both
//! coefficients tend to -1 at grazing incidence.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::units::VACUUM_PERMITTIVITY;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavePolarization {
    /// Electric field perpendicular to the plane of incidence.
    Te,
    /// Electric field in the plane of incidence.
    Tm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    pub relative_permittivity: f64,
    /// S/m
    pub conductivity: f64,
}

impl Material {
    /// Matches free space exactly, so it reflects nothing.
    pub const ABSORBER: Material = Material {
        relative_permittivity: 1.0,
        conductivity: 0.0,
    };

    pub const CONCRETE: Material = Material {
        relative_permittivity: 5.0,
        conductivity: 0.1,
    };

    pub fn is_valid(&self) -> bool {
        self.relative_permittivity.is_finite()
            && self.relative_permittivity >= 1.0
            && self.conductivity.is_finite()
            && self.conductivity >= 0.0
    }

    pub fn complex_permittivity(&self, frequency: f64) -> Complex64 {
        let omega = 2.0 * PI * frequency;
        Complex64::new(
            self.relative_permittivity,
            -self.conductivity / (omega * VACUUM_PERMITTIVITY),
        )
    }
}

/// Reflection coefficient for a wave in air hitting `material` at
/// `incidence_angle` (radians from the surface normal).
///
/// Angles at or beyond grazing return the grazing limit `-1`.
pub fn fresnel_coefficient(
    polarization: WavePolarization,
    incidence_angle: f64,
    material: &Material,
    frequency: f64,
) -> Complex64 {
    if incidence_angle >= FRAC_PI_2 {
        return Complex64::new(-1.0, 0.0);
    }
    let cos_i = incidence_angle.cos();
    let sin2 = incidence_angle.sin().powi(2);
    let eps = material.complex_permittivity(frequency);
    fresnel_from_cos(polarization, cos_i, sin2, eps)
}

/// Same as [`fresnel_coefficient`] but takes `cos` of the incidence angle,
/// which ray code already has as a dot product.
pub(crate) fn fresnel_from_cosine(
    polarization: WavePolarization,
    cos_incidence: f64,
    material: &Material,
    frequency: f64,
) -> Complex64 {
    let cos_i = cos_incidence.clamp(0.0, 1.0);
    if cos_i == 0.0 {
        return Complex64::new(-1.0, 0.0);
    }
    let sin2 = 1.0 - cos_i * cos_i;
    fresnel_from_cos(
        polarization,
        cos_i,
        sin2,
        material.complex_permittivity(frequency),
    )
}

fn fresnel_from_cos(pol: WavePolarization, cos_i: f64, sin2: f64, eps: Complex64) -> Complex64 {
    let root = (eps - sin2).sqrt();
    match pol {
        WavePolarization::Te => (cos_i - root) / (cos_i + root),
        WavePolarization::Tm => (eps * cos_i - root) / (eps * cos_i + root),
    }
}
