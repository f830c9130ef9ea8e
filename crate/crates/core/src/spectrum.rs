//! Carrier allocation for carrier shift diversity.
//!
//! A channel of bandwidth `B` around `f_c` is split into `N` equally spaced
//! subcarriers, one per transmission point. Carriers are handled as offsets
//! from the channel center so that Hz-scale shifts on a ~1 GHz carrier keep
//! full double precision.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectrumError {
    #[error("subcarrier count must be at least 1")]
    NoSubcarriers,
    #[error("bandwidth must be positive and finite, got {0} Hz")]
    InvalidBandwidth(f64),
    #[error("center frequency must be positive and finite, got {0} Hz")]
    InvalidCenter(f64),
    #[error("carrier offset list is empty")]
    NoOffsets,
    #[error("carrier offset {index} is not finite")]
    NonFiniteOffset { index: usize },
    #[error("carrier offsets have no common period (differences are not commensurate)")]
    Incommensurate,
}

/// An equal-split subcarrier plan over one channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyPlan {
    center_frequency: f64,
    bandwidth: f64,
    subcarrier_count: usize,
}

impl FrequencyPlan {
    pub fn new(
        center_frequency: f64,
        bandwidth: f64,
        subcarrier_count: usize,
    ) -> Result<Self, SpectrumError> {
        if !(center_frequency.is_finite() && center_frequency > 0.0) {
            return Err(SpectrumError::InvalidCenter(center_frequency));
        }
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(SpectrumError::InvalidBandwidth(bandwidth));
        }
        if subcarrier_count == 0 {
            return Err(SpectrumError::NoSubcarriers);
        }
        Ok(Self {
            center_frequency,
            bandwidth,
            subcarrier_count,
        })
    }

    pub fn center_frequency(&self) -> f64 {
        self.center_frequency
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn subcarrier_count(&self) -> usize {
        self.subcarrier_count
    }

    /// Spacing between adjacent subcarriers, `B / N`.
    pub fn spacing(&self) -> f64 {
        self.bandwidth / self.subcarrier_count as f64
    }

    /// Offsets of each subcarrier from the channel center, ascending.
    ///
    /// The n-th (1-based) offset is `-B/2 + (2n - 1) B / (2N)`.
    pub fn carrier_offsets(&self) -> Vec<f64> {
        let n_total = self.subcarrier_count as f64;
        (1..=self.subcarrier_count)
            .map(|n| {
                -self.bandwidth / 2.0 + (2.0 * n as f64 - 1.0) * self.bandwidth / (2.0 * n_total)
            })
            .collect()
    }

    /// Absolute carrier frequencies, ascending.
    pub fn carrier_frequencies(&self) -> Vec<f64> {
        self.carrier_offsets()
            .into_iter()
            .map(|off| self.center_frequency + off)
            .collect()
    }

    /// Longest period of the artificial fading, `N / B`.
    pub fn beat_period(&self) -> f64 {
        self.subcarrier_count as f64 / self.bandwidth
    }

    /// Whether a sensor data period is long enough to see the averaged power.
    pub fn duty_cycle_feasible(&self, data_period: f64) -> bool {
        duty_cycle_feasible(self.beat_period(), data_period)
    }
}

/// `data_period >= beat_period`, with a relative slack of a few ulps so that
/// e.g. `100e-6 >= 20 / 200e3` is not lost to rounding.
pub fn duty_cycle_feasible(beat_period: f64, data_period: f64) -> bool {
    data_period > 0.0 && data_period >= beat_period * (1.0 - 4.0 * f64::EPSILON)
}

/// Per-transmitter carrier assignment.
///
/// Either derived from an equal-split [`FrequencyPlan`] or given explicitly as
/// offsets from the center frequency (the latter matches bench setups that
/// shift one carrier by a few tens of Hz with a phase shifter).
#[derive(Debug, Clone, PartialEq)]
pub enum CarrierAssignment {
    Plan(FrequencyPlan),
    Offsets {
        center_frequency: f64,
        offsets: Vec<f64>,
    },
}

impl CarrierAssignment {
    pub fn explicit(center_frequency: f64, offsets: Vec<f64>) -> Result<Self, SpectrumError> {
        if !(center_frequency.is_finite() && center_frequency > 0.0) {
            return Err(SpectrumError::InvalidCenter(center_frequency));
        }
        if offsets.is_empty() {
            return Err(SpectrumError::NoOffsets);
        }
        if let Some(index) = offsets.iter().position(|o| !o.is_finite()) {
            return Err(SpectrumError::NonFiniteOffset { index });
        }
        Ok(Self::Offsets {
            center_frequency,
            offsets,
        })
    }

    pub fn center_frequency(&self) -> f64 {
        match self {
            Self::Plan(plan) => plan.center_frequency(),
            Self::Offsets {
                center_frequency, ..
            } => *center_frequency,
        }
    }

    pub fn offsets(&self) -> Vec<f64> {
        match self {
            Self::Plan(plan) => plan.carrier_offsets(),
            Self::Offsets { offsets, .. } => offsets.clone(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Plan(plan) => plan.subcarrier_count(),
            Self::Offsets { offsets, .. } => offsets.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Period after which every pairwise beat returns to its start.
    ///
    /// `None` when all carriers coincide (no beating at all).
    pub fn beat_period(&self) -> Result<Option<f64>, SpectrumError> {
        match self {
            Self::Plan(plan) if plan.subcarrier_count() > 1 => Ok(Some(plan.beat_period())),
            Self::Plan(_) => Ok(None),
            Self::Offsets { offsets, .. } => common_beat_period(offsets),
        }
    }
}

/// Fundamental period shared by all pairwise differences of `offsets`.
///
/// Differences are reduced with a tolerant Euclid; the result is rejected if
/// the differences are not integer multiples of a common frequency.
pub fn common_beat_period(offsets: &[f64]) -> Result<Option<f64>, SpectrumError> {
    let Some(&first) = offsets.first() else {
        return Err(SpectrumError::NoOffsets);
    };
    let diffs: Vec<f64> = offsets
        .iter()
        .map(|o| (o - first).abs())
        .filter(|d| *d > 0.0)
        .collect();
    let Some(max_diff) = diffs.iter().cloned().reduce(f64::max) else {
        return Ok(None);
    };
    let tol = max_diff * 1e-9;
    let fundamental = diffs.iter().fold(0.0, |g, &d| float_gcd(g, d, tol));
    if fundamental <= tol {
        return Err(SpectrumError::Incommensurate);
    }
    for o in offsets {
        let ratio = (o - first) / fundamental;
        if (ratio - ratio.round()).abs() > 1e-6 {
            return Err(SpectrumError::Incommensurate);
        }
    }
    Ok(Some(1.0 / fundamental))
}

fn float_gcd(mut a: f64, mut b: f64, tol: f64) -> f64 {
    while b > tol {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}
