//! Per-path voltage phasors from a transmitter to a receiver point.
//!
//! Free space yields the direct ray only. A box room adds image-method
//! reflections; each bounce splits the field into TE/TM parts relative to
//! its plane of incidence and applies the matching Fresnel coefficient.

mod antenna;
mod fresnel;
mod room;

pub use antenna::{Antenna, Pattern, Polarization};
pub use fresnel::{fresnel_coefficient, Material, WavePolarization};
pub use room::{BoxRoom, Room, Surface};

use nalgebra::Vector3;
use num_complex::Complex64;
use std::f64::consts::{PI, TAU};
use thiserror::Error;

use crate::units::{dbm_to_watts, linear_to_db, wavelength, SPEED_OF_LIGHT};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PropagationError {
    #[error("boresight must be a finite nonzero vector")]
    InvalidBoresight,
    #[error("antenna gain must be finite, got {0} dBi")]
    InvalidGain(f64),
    #[error("antenna position must be finite")]
    NonFinitePosition,
    #[error("pattern exponent must be finite and non-negative, got {0}")]
    InvalidPatternExponent(f64),
    #[error("room extent along axis {axis} must be positive")]
    InvalidRoomExtent { axis: usize },
    #[error("material of surface {0} must have permittivity >= 1 and conductivity >= 0")]
    InvalidMaterial(&'static str),
    #[error("transmit power must be finite, got {0} dBm")]
    InvalidPower(f64),
    #[error("transmit power {power_dbm} dBm exceeds the {cap_dbm} dBm cap")]
    PowerAboveCap { power_dbm: f64, cap_dbm: f64 },
    #[error("distance must be positive, got {0} m")]
    NonPositiveDistance(f64),
    #[error("frequency must be positive, got {0} Hz")]
    NonPositiveFrequency(f64),
    #[error("transmitter and receiver coincide")]
    Coincident,
    #[error("point ({x}, {y}, {z}) is not strictly inside the room")]
    OutsideRoom { x: f64, y: f64, z: f64 },
    #[error("cannot aggregate an empty phasor list")]
    EmptyPhasorList,
}

/// Transmit power cap of the 950 MHz energy-transmission channels.
pub const DEFAULT_POWER_CAP_DBM: f64 = 30.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Transmitter {
    pub antenna: Antenna,
    pub power_dbm: f64,
    /// Hz, relative to the channel center.
    pub carrier_offset: f64,
}

impl Transmitter {
    pub fn new(
        antenna: Antenna,
        power_dbm: f64,
        carrier_offset: f64,
        power_cap_dbm: Option<f64>,
    ) -> Result<Self, PropagationError> {
        if !power_dbm.is_finite() {
            return Err(PropagationError::InvalidPower(power_dbm));
        }
        if let Some(cap_dbm) = power_cap_dbm {
            if power_dbm > cap_dbm {
                return Err(PropagationError::PowerAboveCap { power_dbm, cap_dbm });
            }
        }
        Ok(Self {
            antenna,
            power_dbm,
            carrier_offset,
        })
    }

    pub fn power_watts(&self) -> f64 {
        dbm_to_watts(self.power_dbm)
    }
}

/// A carrier as center plus offset; phases are accumulated per part so a
/// 50 Hz shift on a 952 MHz carrier is not lost to rounding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Carrier {
    pub center: f64,
    pub offset: f64,
}

impl Carrier {
    pub fn new(center: f64, offset: f64) -> Self {
        Self { center, offset }
    }

    pub fn frequency(&self) -> f64 {
        self.center + self.offset
    }

    /// Propagation phase delay `2 pi L f / c`, wrapped to `[0, 2 pi)`.
    pub fn phase_delay(&self, length: f64) -> f64 {
        let main = (TAU * (length / SPEED_OF_LIGHT) * self.center).rem_euclid(TAU);
        let shift = (TAU * (length / SPEED_OF_LIGHT) * self.offset).rem_euclid(TAU);
        (main + shift).rem_euclid(TAU)
    }
}

/// One ray from a transmitter to the receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct PathComponent {
    pub total_length: f64,
    /// Fresnel bounces and polarization coupling; 1 for a co-polarized
    /// direct ray.
    pub reflection_product: Complex64,
    /// Linear `G_tx * G_rx` along the departure and arrival directions.
    pub pattern_gain: f64,
    pub order: u32,
    pub source_tx: usize,
    pub bounces: Vec<Surface>,
}

/// Rectified voltage `V` and phase `theta` of one received contribution,
/// i.e. `v(t) = sqrt(2) V cos(omega t + theta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phasor {
    amplitude: f64,
    phase: f64,
}

impl Phasor {
    pub fn new(amplitude: f64, phase: f64) -> Self {
        debug_assert!(amplitude >= 0.0);
        Self {
            amplitude,
            phase: phase.rem_euclid(TAU),
        }
    }

    pub fn from_complex(z: Complex64) -> Self {
        let (r, theta) = z.to_polar();
        Self::new(r, theta)
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// Radians in `[0, 2 pi)`.
    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn to_complex(&self) -> Complex64 {
        Complex64::from_polar(self.amplitude, self.phase)
    }

    /// DC power delivered into `load` ohms.
    pub fn power(&self, load: f64) -> f64 {
        self.amplitude * self.amplitude / load
    }
}

/// Free-space link power in dBm with both antenna gains evaluated along the
/// line between them.
pub fn friis_power(
    tx: &Transmitter,
    rx: &Antenna,
    distance: f64,
    frequency: f64,
) -> Result<f64, PropagationError> {
    if distance.is_nan() || distance <= 0.0 {
        return Err(PropagationError::NonPositiveDistance(distance));
    }
    if frequency.is_nan() || frequency <= 0.0 {
        return Err(PropagationError::NonPositiveFrequency(frequency));
    }
    let los = rx.position - tx.antenna.position;
    let dir = if los.norm() > 0.0 {
        los.normalize()
    } else {
        tx.antenna.boresight()
    };
    let g = tx.antenna.gain_toward(&dir) * rx.gain_toward(&-dir);
    let fspl_db = 20.0 * (4.0 * PI * distance / wavelength(frequency)).log10();
    Ok(tx.power_dbm + linear_to_db(g) - fspl_db)
}

/// Direct ray plus image-method reflections up to `max_order` bounces.
/// `rx.position` is the receiver point.
pub fn enumerate_paths(
    room: &Room,
    tx: &Transmitter,
    tx_index: usize,
    rx: &Antenna,
    frequency: f64,
    max_order: u32,
) -> Result<Vec<PathComponent>, PropagationError> {
    let src = tx.antenna.position;
    let dst = rx.position;
    if (dst - src).norm() == 0.0 {
        return Err(PropagationError::Coincident);
    }
    for p in [&src, &dst] {
        if !room.contains(p) {
            return Err(PropagationError::OutsideRoom {
                x: p.x,
                y: p.y,
                z: p.z,
            });
        }
    }
    match room {
        Room::FreeSpace => Ok(vec![trace(None, tx, tx_index, rx, frequency, &src, [0; 3])]),
        Room::Box(b) => Ok(b
            .images(&src, max_order)
            .into_iter()
            .map(|img| trace(Some(b), tx, tx_index, rx, frequency, &img.position, img.reflections))
            .collect()),
    }
}

/// Follows the unfolded straight ray `image -> rx` through its bounces.
fn trace(
    room: Option<&BoxRoom>,
    tx: &Transmitter,
    tx_index: usize,
    rx: &Antenna,
    frequency: f64,
    image: &Vector3<f64>,
    reflections: [u32; 3],
) -> PathComponent {
    let unfolded = rx.position - image;
    let total_length = unfolded.norm();
    let u = unfolded / total_length;

    // Real departure direction: odd reflection counts flip that component.
    let mut k = u;
    for axis in 0..3 {
        if reflections[axis] % 2 == 1 {
            k[axis] = -k[axis];
        }
    }
    let departure = k;
    let mut field: Vector3<Complex64> = tx.antenna.transverse_polarization(&k).map(Complex64::from);

    let bounces = match room {
        Some(b) => b.bounce_sequence(image, &rx.position),
        None => Vec::new(),
    };
    for surface in &bounces {
        let axis = surface.axis();
        let mut normal = Vector3::zeros();
        normal[axis] = 1.0;
        let cos_i = k[axis].abs();
        let material = room.expect("bounces imply a room").material(*surface);
        let gamma_te = fresnel::fresnel_from_cosine(WavePolarization::Te, cos_i, material, frequency);
        let gamma_tm = fresnel::fresnel_from_cosine(WavePolarization::Tm, cos_i, material, frequency);

        let s = {
            let c = k.cross(&normal);
            if c.norm() > 1e-12 {
                c.normalize()
            } else {
                any_perpendicular(&k)
            }
        };
        let p_in = s.cross(&k);
        let mut k_out = k;
        k_out[axis] = -k_out[axis];
        let p_out = s.cross(&k_out);

        let e_s = complex_dot(&field, &s);
        let e_p = complex_dot(&field, &p_in);
        field = s.map(Complex64::from) * (gamma_te * e_s) + p_out.map(Complex64::from) * (gamma_tm * e_p);
        k = k_out;
    }
    debug_assert!((k - u).norm() < 1e-9);

    let receive = rx.transverse_polarization(&u);
    let reflection_product = complex_dot(&field, &receive);
    let pattern_gain = tx.antenna.gain_toward(&departure) * rx.gain_toward(&-u);

    PathComponent {
        total_length,
        reflection_product,
        pattern_gain,
        order: reflections.iter().sum(),
        source_tx: tx_index,
        bounces,
    }
}

fn complex_dot(field: &Vector3<Complex64>, real: &Vector3<f64>) -> Complex64 {
    field[0] * real[0] + field[1] * real[1] + field[2] * real[2]
}

fn any_perpendicular(k: &Vector3<f64>) -> Vector3<f64> {
    let trial = if k.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    (trial - k * trial.dot(k)).normalize()
}

/// Rectified phasor of one path at `carrier`, assuming lossless RF to DC
/// conversion into `rectenna_load` ohms.
pub fn path_phasor(
    path: &PathComponent,
    tx: &Transmitter,
    carrier: Carrier,
    rectenna_load: f64,
) -> Phasor {
    let lambda = wavelength(carrier.frequency());
    let spreading = lambda / (4.0 * PI * path.total_length);
    let power = tx.power_watts()
        * path.pattern_gain
        * spreading
        * spreading
        * path.reflection_product.norm_sqr();
    let amplitude = (power * rectenna_load).sqrt();
    let phase = path.reflection_product.arg() - carrier.phase_delay(path.total_length);
    Phasor::new(amplitude, phase)
}

/// Coherent sum of same-carrier phasors.
pub fn aggregate_phasor(phasors: &[Phasor]) -> Result<Phasor, PropagationError> {
    if phasors.is_empty() {
        return Err(PropagationError::EmptyPhasorList);
    }
    Ok(Phasor::from_complex(
        phasors.iter().map(Phasor::to_complex).sum(),
    ))
}
