use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::PropagationError;
use crate::units::db_to_linear;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarization {
    Horizontal,
    Vertical,
}

/// Radiation pattern shape. The peak is always `gain_dbi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Pattern {
    /// Same gain in every direction.
    IsotropicWithGain,
    /// `G0 * cos^n(angle off boresight)` in the front hemisphere, nothing behind.
    PatchCosine { exponent: f64 },
}

impl Pattern {
    /// Cosine exponent whose front-hemisphere pattern has the given peak
    /// directivity: a `cos^n` power pattern has directivity `2 (n + 1)`.
    pub fn patch_for_gain(gain_dbi: f64) -> Self {
        let exponent = (db_to_linear(gain_dbi) / 2.0 - 1.0).max(0.0);
        Pattern::PatchCosine { exponent }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Antenna {
    pub position: Vector3<f64>,
    boresight: Vector3<f64>,
    pub gain_dbi: f64,
    pub polarization: Polarization,
    pub pattern: Pattern,
}

impl Antenna {
    pub fn new(
        position: Vector3<f64>,
        boresight: Vector3<f64>,
        gain_dbi: f64,
        polarization: Polarization,
        pattern: Pattern,
    ) -> Result<Self, PropagationError> {
        let norm = boresight.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(PropagationError::InvalidBoresight);
        }
        if !gain_dbi.is_finite() {
            return Err(PropagationError::InvalidGain(gain_dbi));
        }
        if !position.iter().all(|c| c.is_finite()) {
            return Err(PropagationError::NonFinitePosition);
        }
        if let Pattern::PatchCosine { exponent } = pattern {
            if !(exponent.is_finite() && exponent >= 0.0) {
                return Err(PropagationError::InvalidPatternExponent(exponent));
            }
        }
        Ok(Self {
            position,
            boresight: boresight / norm,
            gain_dbi,
            polarization,
            pattern,
        })
    }

    pub fn isotropic(position: Vector3<f64>, gain_dbi: f64) -> Self {
        Self {
            position,
            boresight: Vector3::y(),
            gain_dbi,
            polarization: Polarization::Horizontal,
            pattern: Pattern::IsotropicWithGain,
        }
    }

    pub fn boresight(&self) -> Vector3<f64> {
        self.boresight
    }

    /// Same antenna moved to `position`.
    pub fn at(&self, position: Vector3<f64>) -> Self {
        Self {
            position,
            ..self.clone()
        }
    }

    /// Linear power gain toward the unit vector `direction` (pointing away
    /// from the antenna).
    pub fn gain_toward(&self, direction: &Vector3<f64>) -> f64 {
        let peak = db_to_linear(self.gain_dbi);
        match self.pattern {
            Pattern::IsotropicWithGain => peak,
            Pattern::PatchCosine { exponent } => {
                let c = direction.dot(&self.boresight);
                if c <= 0.0 {
                    0.0
                } else {
                    peak * c.powf(exponent)
                }
            }
        }
    }

    /// Unit polarization axis fixed to the antenna body: horizontal is
    /// `boresight x z`, vertical is `z`. Turning an antenna around to face
    /// the opposite way therefore reverses its horizontal field.
    pub fn polarization_axis(&self) -> Vector3<f64> {
        match self.polarization {
            Polarization::Vertical => Vector3::z(),
            Polarization::Horizontal => {
                let h = self.boresight.cross(&Vector3::z());
                if h.norm() < 1e-12 {
                    Vector3::x()
                } else {
                    h.normalize()
                }
            }
        }
    }

    /// Radiated (or accepted) field direction for a ray along unit `k`:
    /// the polarization axis projected onto the transverse plane. Zero when
    /// the ray runs along the axis.
    pub fn transverse_polarization(&self, k: &Vector3<f64>) -> Vector3<f64> {
        let axis = self.polarization_axis();
        let t = axis - k * axis.dot(k);
        let n = t.norm();
        if n < 1e-12 {
            Vector3::zeros()
        } else {
            t / n
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn patch(boresight: Vector3<f64>) -> Antenna {
        Antenna::new(
            Vector3::zeros(),
            boresight,
            6.0,
            Polarization::Horizontal,
            Pattern::patch_for_gain(6.0),
        )
        .unwrap()
    }

    #[test]
    fn patch_peak_and_backlobe() {
        let a = patch(Vector3::y());
        assert_relative_eq!(a.gain_toward(&Vector3::y()), db_to_linear(6.0));
        assert_eq!(a.gain_toward(&-Vector3::y()), 0.0);
        assert_eq!(a.gain_toward(&Vector3::x()), 0.0);
        let off = Vector3::new(1.0, 1.0, 0.0).normalize();
        assert!(a.gain_toward(&off) < a.gain_toward(&Vector3::y()));
    }

    #[test]
    fn patch_pattern_integrates_to_isotropic_power() {
        // Gain averaged over the sphere must be 1 for a lossless antenna.
        let Pattern::PatchCosine { exponent } = Pattern::patch_for_gain(6.0) else {
            unreachable!()
        };
        let g0 = db_to_linear(6.0);
        let steps = 20_000;
        let mut acc = 0.0;
        for i in 0..steps {
            let theta = (i as f64 + 0.5) * std::f64::consts::FRAC_PI_2 / steps as f64;
            acc += g0 * theta.cos().powf(exponent) * theta.sin();
        }
        let mean = acc * std::f64::consts::FRAC_PI_2 / steps as f64 / 2.0;
        assert_relative_eq!(mean, 1.0, max_relative = 1e-6);
    }

    #[test]
    fn horizontal_axis_turns_with_antenna() {
        assert_eq!(patch(Vector3::y()).polarization_axis(), Vector3::x());
        assert_eq!(patch(-Vector3::y()).polarization_axis(), -Vector3::x());
        assert_eq!(patch(Vector3::x()).polarization_axis(), -Vector3::y());
    }

    #[test]
    fn transverse_projection() {
        let a = patch(Vector3::y());
        assert_eq!(a.transverse_polarization(&Vector3::y()), Vector3::x());
        assert_eq!(a.transverse_polarization(&Vector3::x()), Vector3::zeros());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Antenna::new(
            Vector3::zeros(),
            Vector3::zeros(),
            0.0,
            Polarization::Vertical,
            Pattern::IsotropicWithGain
        )
        .is_err());
        assert!(Antenna::new(
            Vector3::zeros(),
            Vector3::x(),
            f64::NAN,
            Polarization::Vertical,
            Pattern::IsotropicWithGain
        )
        .is_err());
    }
}
