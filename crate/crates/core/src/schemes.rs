//! Time-averaged received power for the three transmission schemes.
//!
//! * SP: one transmitter, its multipath rays add coherently.
//! * MP: all transmitters on one carrier, so their phasors add coherently
//!   and can cancel.
//! * MPCSD: distinct carriers per transmitter; averaged over the beat period
//!   the cross terms vanish and the powers simply add.
//!
//! [`time_domain_power`] integrates the received envelope directly and is
//! kept independent of the closed forms so it can check them.

use num_complex::Complex64;
use std::fmt;
use std::f64::consts::TAU;
use std::str::FromStr;
use thiserror::Error;

use crate::propagation::{aggregate_phasor, Phasor, PropagationError};
use crate::spectrum::{common_beat_period, SpectrumError};
use crate::units::watts_to_dbm;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemeError {
    #[error("at least one phasor is required")]
    Empty,
    #[error("{phasors} phasors but {offsets} carrier offsets")]
    LengthMismatch { phasors: usize, offsets: usize },
    #[error("transmitters {first} and {second} share carrier offset {offset} Hz")]
    DuplicateOffsets {
        first: usize,
        second: usize,
        offset: f64,
    },
    #[error("need at least 100 samples per beat period, got {0}")]
    TooFewSamples(usize),
    #[error("averaging window must span at least one beat period")]
    NoBeats,
    #[error(
        "beat harmonic {harmonic} is not resolved by {samples_per_beat} samples per beat period"
    )]
    Undersampled {
        harmonic: f64,
        samples_per_beat: usize,
    },
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error(transparent)]
    Propagation(#[from] PropagationError),
}

/// Transmission scheme. `Sp` holds a 0-based transmitter index; it is shown
/// and parsed 1-based (`sp1` is the first transmitter).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    Sp(usize),
    Mp,
    Mpcsd,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Sp(i) => write!(f, "sp{}", i + 1),
            Scheme::Mp => f.write_str("mp"),
            Scheme::Mpcsd => f.write_str("mpcsd"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown scheme `{0}` (expected sp<N>, mp or mpcsd)")]
pub struct ParseSchemeError(pub String);

impl FromStr for Scheme {
    type Err = ParseSchemeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "mp" => Ok(Scheme::Mp),
            "mpcsd" => Ok(Scheme::Mpcsd),
            other => other
                .strip_prefix("sp")
                .and_then(|n| n.parse::<usize>().ok())
                .filter(|n| *n >= 1)
                .map(|n| Scheme::Sp(n - 1))
                .ok_or_else(|| ParseSchemeError(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeResult {
    pub scheme: Scheme,
    /// Watts.
    pub power: f64,
    /// Watts each transmitter would deliver alone.
    pub per_tx_power: Vec<f64>,
}

impl SchemeResult {
    pub fn power_dbm(&self) -> f64 {
        watts_to_dbm(self.power)
    }
}

/// Single transmitter: coherent sum of its multipath phasors.
pub fn sp_power(per_path: &[Phasor], load: f64) -> Result<f64, SchemeError> {
    Ok(aggregate_phasor(per_path)?.power(load))
}

/// All transmitters on a common carrier.
pub fn mp_power(per_tx: &[Phasor], load: f64) -> Result<f64, SchemeError> {
    if per_tx.is_empty() {
        return Err(SchemeError::Empty);
    }
    if let [single] = per_tx {
        return Ok(single.power(load));
    }
    let sum: Complex64 = per_tx.iter().map(Phasor::to_complex).sum();
    Ok(sum.norm_sqr() / load)
}

/// Transmitters on pairwise distinct carriers: the phases drop out.
pub fn mpcsd_power(per_tx: &[Phasor], load: f64) -> Result<f64, SchemeError> {
    if per_tx.is_empty() {
        return Err(SchemeError::Empty);
    }
    Ok(per_tx.iter().map(|p| p.power(load)).sum())
}

/// Transmitters that share an offset with another, grouped by offset.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedCarriers {
    pub groups: Vec<Vec<usize>>,
}

impl fmt::Display for SharedCarriers {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .groups
            .iter()
            .map(|g| {
                let names: Vec<String> = g.iter().map(|i| format!("tx{}", i + 1)).collect();
                names.join("+")
            })
            .collect();
        write!(
            f,
            "transmitters {} share a carrier and interfere as in MP",
            parts.join(", ")
        )
    }
}

/// Carrier-shifted power when offsets may repeat: transmitters on the same
/// offset add coherently, distinct groups add in power. Repeats are reported
/// rather than rejected.
pub fn shifted_carrier_power(
    per_tx: &[Phasor],
    offsets: &[f64],
    load: f64,
) -> Result<(f64, Option<SharedCarriers>), SchemeError> {
    if per_tx.is_empty() {
        return Err(SchemeError::Empty);
    }
    if per_tx.len() != offsets.len() {
        return Err(SchemeError::LengthMismatch {
            phasors: per_tx.len(),
            offsets: offsets.len(),
        });
    }
    let groups = group_by_offset(offsets);
    let mut power = 0.0;
    for g in &groups {
        power += match g.as_slice() {
            [single] => per_tx[*single].power(load),
            many => {
                let members: Vec<Phasor> = many.iter().map(|&i| per_tx[i]).collect();
                mp_power(&members, load)?
            }
        };
    }
    let shared: Vec<Vec<usize>> = groups.into_iter().filter(|g| g.len() > 1).collect();
    let warning = (!shared.is_empty()).then_some(SharedCarriers { groups: shared });
    Ok((power, warning))
}

fn group_by_offset(offsets: &[f64]) -> Vec<Vec<usize>> {
    let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
    for (i, &o) in offsets.iter().enumerate() {
        match groups.iter_mut().find(|(v, _)| *v == o) {
            Some((_, members)) => members.push(i),
            None => groups.push((o, vec![i])),
        }
    }
    groups.into_iter().map(|(_, m)| m).collect()
}

/// Settings for the brute-force time average.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    pub samples_per_beat: usize,
    pub beats: u32,
    /// Seconds; start of the averaging window.
    pub start_time: f64,
    /// Reject repeated offsets instead of letting them interfere.
    pub require_distinct: bool,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            samples_per_beat: 256,
            beats: 1,
            start_time: 0.0,
            require_distinct: false,
        }
    }
}

/// Mean received power obtained by sampling the squared voltage
/// `(sum_n sqrt(2) V_n cos(2 pi (f_c + df_n) t + theta_n))^2 / R` over whole
/// beat periods.
///
/// The common carrier is removed analytically (its `cos^2` averages to 1/2),
/// which leaves `|sum_n V_n exp(j (2 pi df_n t + theta_n))|^2 / R` to be
/// integrated over the beat envelope.
pub fn time_domain_power(
    per_tx: &[Phasor],
    offsets: &[f64],
    load: f64,
    config: &OracleConfig,
) -> Result<f64, SchemeError> {
    if per_tx.is_empty() {
        return Err(SchemeError::Empty);
    }
    if per_tx.len() != offsets.len() {
        return Err(SchemeError::LengthMismatch {
            phasors: per_tx.len(),
            offsets: offsets.len(),
        });
    }
    if config.samples_per_beat < 100 {
        return Err(SchemeError::TooFewSamples(config.samples_per_beat));
    }
    if config.beats == 0 {
        return Err(SchemeError::NoBeats);
    }
    if config.require_distinct {
        for (i, a) in offsets.iter().enumerate() {
            if let Some(j) = offsets[i + 1..].iter().position(|b| b == a) {
                return Err(SchemeError::DuplicateOffsets {
                    first: i,
                    second: i + 1 + j,
                    offset: *a,
                });
            }
        }
    }
    // Without any beating the envelope is constant; any window length works.
    let period = common_beat_period(offsets)?.unwrap_or(1.0);
    let spread = offsets.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - offsets.iter().cloned().fold(f64::INFINITY, f64::min);
    let harmonic = spread * period;
    if harmonic.round() >= config.samples_per_beat as f64 {
        return Err(SchemeError::Undersampled {
            harmonic,
            samples_per_beat: config.samples_per_beat,
        });
    }
    let samples = config.samples_per_beat * config.beats as usize;
    let duration = period * f64::from(config.beats);
    Ok(window_average_power(
        per_tx,
        offsets,
        load,
        config.start_time,
        duration,
        samples,
    ))
}

/// Rectangle-rule mean of the envelope power over `[start, start + duration)`
/// with `samples` equally spaced points. Exact for whole beat periods once
/// the sampling resolves every beat harmonic; any other window leaves a
/// residual cross term.
pub fn window_average_power(
    per_tx: &[Phasor],
    offsets: &[f64],
    load: f64,
    start: f64,
    duration: f64,
    samples: usize,
) -> f64 {
    let dt = duration / samples as f64;
    let mut acc = 0.0;
    for k in 0..samples {
        let t = start + k as f64 * dt;
        let envelope: Complex64 = per_tx
            .iter()
            .zip(offsets)
            .map(|(p, df)| {
                let angle = (TAU * df * t).rem_euclid(TAU) + p.phase();
                Complex64::from_polar(p.amplitude(), angle)
            })
            .sum();
        acc += envelope.norm_sqr();
    }
    acc / samples as f64 / load
}

/// Per-transmitter aggregate phasors evaluated for one scheme.
///
/// `per_tx` must already be evaluated at the carriers the scheme uses:
/// the common center for MP, each transmitter's own carrier otherwise.
pub fn evaluate(
    scheme: Scheme,
    per_tx: &[Phasor],
    offsets: &[f64],
    load: f64,
) -> Result<(SchemeResult, Option<SharedCarriers>), SchemeError> {
    let per_tx_power: Vec<f64> = per_tx.iter().map(|p| p.power(load)).collect();
    let (power, warning) = match scheme {
        Scheme::Sp(i) => (*per_tx_power.get(i).ok_or(SchemeError::Empty)?, None),
        Scheme::Mp => (mp_power(per_tx, load)?, None),
        Scheme::Mpcsd => shifted_carrier_power(per_tx, offsets, load)?,
    };
    Ok((
        SchemeResult {
            scheme,
            power,
            per_tx_power,
        },
        warning,
    ))
}
