//! Receiver-grid sweeps and the coverage metric.
//!
//! Coverage `C(P_req)` is the fraction of grid points whose received power
//! reaches `P_req` (ties count as covered).

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::propagation::{aggregate_phasor, enumerate_paths, path_phasor, Carrier, Phasor, PropagationError};
use crate::scenario::Scenario;
use crate::schemes::{evaluate, Scheme, SchemeError};
use crate::units::watts_to_dbm;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SweepError {
    #[error("grid `{grid}` point {index}: {source}")]
    Propagation {
        grid: String,
        index: usize,
        #[source]
        source: PropagationError,
    },
    #[error("grid `{grid}` point {index}: {source}")]
    Scheme {
        grid: String,
        index: usize,
        #[source]
        source: SchemeError,
    },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("{axis} step must be positive and finite, got {step}")]
    InvalidStep { axis: &'static str, step: f64 },
    #[error("{axis} range is empty ({start} > {stop})")]
    EmptyRange {
        axis: &'static str,
        start: f64,
        stop: f64,
    },
    #[error("{axis} range bounds must be finite")]
    NonFinite { axis: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

/// Inclusive sample range `start, start + step, ..., <= stop` along one axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl AxisRange {
    pub fn single(value: f64) -> Self {
        Self {
            start: value,
            stop: value,
            step: 1.0,
        }
    }

    pub fn validate(&self, axis: &'static str) -> Result<(), GridError> {
        if !(self.start.is_finite() && self.stop.is_finite()) {
            return Err(GridError::NonFinite { axis });
        }
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(GridError::InvalidStep {
                axis,
                step: self.step,
            });
        }
        if self.start > self.stop {
            return Err(GridError::EmptyRange {
                axis,
                start: self.start,
                stop: self.stop,
            });
        }
        Ok(())
    }

    pub fn count(&self) -> usize {
        ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count()).map(move |i| self.start + i as f64 * self.step)
    }
}

/// A named receiver grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub name: String,
    pub x: AxisRange,
    pub y: AxisRange,
    pub z: AxisRange,
    /// Axis along which per-slice coverage is reported, if any.
    pub slice_axis: Option<Axis>,
}

impl GridSpec {
    pub fn new(name: impl Into<String>, x: AxisRange, y: AxisRange, z: AxisRange) -> Result<Self, GridError> {
        x.validate("x")?;
        y.validate("y")?;
        z.validate("z")?;
        Ok(Self {
            name: name.into(),
            x,
            y,
            z,
            slice_axis: None,
        })
    }

    pub fn len(&self) -> usize {
        self.x.count() * self.y.count() * self.z.count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Points with x outermost and z innermost.
    pub fn points(&self) -> Vec<Vector3<f64>> {
        let mut out = Vec::with_capacity(self.len());
        for x in self.x.values() {
            for y in self.y.values() {
                for z in self.z.values() {
                    out.push(Vector3::new(x, y, z));
                }
            }
        }
        out
    }
}

/// Received power of one scheme at every point of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub name: String,
    pub scheme: Scheme,
    pub points: Vec<Vector3<f64>>,
    /// Watts, one per point.
    pub power: Vec<f64>,
}

impl FieldGrid {
    pub fn len(&self) -> usize {
        self.power.len()
    }

    pub fn is_empty(&self) -> bool {
        self.power.is_empty()
    }

    pub fn power_dbm(&self) -> Vec<f64> {
        self.power.iter().map(|&w| watts_to_dbm(w)).collect()
    }

    /// Concatenation of several grids of the same scheme.
    pub fn pooled<'a>(name: impl Into<String>, parts: impl IntoIterator<Item = &'a FieldGrid>) -> Option<FieldGrid> {
        let mut iter = parts.into_iter().peekable();
        let scheme = iter.peek()?.scheme;
        let mut out = FieldGrid {
            name: name.into(),
            scheme,
            points: Vec::new(),
            power: Vec::new(),
        };
        for g in iter {
            debug_assert_eq!(g.scheme, scheme);
            out.points.extend_from_slice(&g.points);
            out.power.extend_from_slice(&g.power);
        }
        Some(out)
    }

    /// Sub-grids sharing one coordinate value along `axis`, in ascending order.
    pub fn slices(&self, axis: Axis) -> Vec<(f64, FieldGrid)> {
        let a = axis.index();
        let mut values: Vec<f64> = self.points.iter().map(|p| p[a]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        values
            .into_iter()
            .map(|v| {
                let (points, power) = self
                    .points
                    .iter()
                    .zip(&self.power)
                    .filter(|(p, _)| p[a] == v)
                    .map(|(p, w)| (*p, *w))
                    .unzip();
                let g = FieldGrid {
                    name: format!("{}@{}={:.3}", self.name, axis.name(), v),
                    scheme: self.scheme,
                    points,
                    power,
                };
                (v, g)
            })
            .collect()
    }
}

/// Per-transmitter aggregate phasors at one receiver point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointPhasors {
    /// Each transmitter at its own carrier (SP and MPCSD).
    pub own_carrier: Vec<Phasor>,
    /// Each transmitter at the common center carrier (MP).
    pub common_carrier: Vec<Phasor>,
}

fn tx_phasor(
    scenario: &Scenario,
    tx_index: usize,
    rx_point: Vector3<f64>,
    carrier: Carrier,
) -> Result<Phasor, PropagationError> {
    let tx = &scenario.transmitters[tx_index];
    let rx = scenario.receiver.at(rx_point);
    let paths = enumerate_paths(
        &scenario.room,
        tx,
        tx_index,
        &rx,
        carrier.frequency(),
        scenario.max_order,
    )?;
    let phasors: Vec<Phasor> = paths
        .iter()
        .map(|p| path_phasor(p, tx, carrier, scenario.load_ohms))
        .collect();
    aggregate_phasor(&phasors)
}

/// Per-transmitter phasors at every grid point, computed in parallel.
pub fn sweep_phasors(scenario: &Scenario, grid: &GridSpec) -> Result<Vec<PointPhasors>, SweepError> {
    let center = scenario.carriers.center_frequency();
    let offsets = scenario.carrier_offsets();
    let need_common = offsets.iter().any(|&o| o != 0.0);
    grid.points()
        .into_par_iter()
        .enumerate()
        .map(|(index, point)| {
            let wrap = |source| SweepError::Propagation {
                grid: grid.name.clone(),
                index,
                source,
            };
            let own_carrier = (0..scenario.transmitters.len())
                .map(|n| tx_phasor(scenario, n, point, Carrier::new(center, offsets[n])))
                .collect::<Result<Vec<_>, _>>()
                .map_err(wrap)?;
            let common_carrier = if need_common {
                (0..scenario.transmitters.len())
                    .map(|n| tx_phasor(scenario, n, point, Carrier::new(center, 0.0)))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(wrap)?
            } else {
                own_carrier.clone()
            };
            Ok(PointPhasors {
                own_carrier,
                common_carrier,
            })
        })
        .collect()
}

/// Applies each scheme's power formula to already swept phasors.
pub fn fields_from_phasors(
    scenario: &Scenario,
    grid: &GridSpec,
    phasors: &[PointPhasors],
    schemes: &[Scheme],
) -> Result<Vec<FieldGrid>, SweepError> {
    let offsets = scenario.carrier_offsets();
    let points = grid.points();
    schemes
        .iter()
        .map(|&scheme| {
            let power = phasors
                .iter()
                .enumerate()
                .map(|(index, pp)| {
                    let per_tx = match scheme {
                        Scheme::Mp => &pp.common_carrier,
                        _ => &pp.own_carrier,
                    };
                    evaluate(scheme, per_tx, &offsets, scenario.load_ohms)
                        .map(|(r, _)| r.power)
                        .map_err(|source| SweepError::Scheme {
                            grid: grid.name.clone(),
                            index,
                            source,
                        })
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(FieldGrid {
                name: grid.name.clone(),
                scheme,
                points: points.clone(),
                power,
            })
        })
        .collect()
}

/// Received power of `scheme` over `grid`.
pub fn sweep(scenario: &Scenario, grid: &GridSpec, scheme: Scheme) -> Result<FieldGrid, SweepError> {
    let phasors = sweep_phasors(scenario, grid)?;
    let mut fields = fields_from_phasors(scenario, grid, &phasors, &[scheme])?;
    Ok(fields.remove(0))
}

/// `C(P_req)`: fraction of points with power `>= p_req_dbm`.
pub fn coverage(grid: &FieldGrid, p_req_dbm: f64) -> f64 {
    if grid.is_empty() {
        return 0.0;
    }
    let covered = grid
        .power
        .iter()
        .filter(|&&w| watts_to_dbm(w) >= p_req_dbm)
        .count();
    covered as f64 / grid.len() as f64
}

/// Points below `p_req_dbm`.
pub fn deadspot_count(grid: &FieldGrid, p_req_dbm: f64) -> usize {
    grid.power
        .iter()
        .filter(|&&w| watts_to_dbm(w) < p_req_dbm)
        .count()
}

/// Largest `P_req` that still covers every point: the weakest point.
pub fn max_required_power_full_coverage(grid: &FieldGrid) -> f64 {
    grid.power_dbm()
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

/// Power at which coverage drops to zero: any `P_req` above the strongest
/// point covers nothing.
pub fn zero_coverage_power(grid: &FieldGrid) -> f64 {
    grid.power_dbm()
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Sampled coverage curve, ascending in `P_req`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageCurve {
    /// `(P_req dBm, C)` pairs.
    pub points: Vec<(f64, f64)>,
}

impl CoverageCurve {
    /// Linear interpolation between samples, clamped to the end values.
    pub fn value_at(&self, p_req_dbm: f64) -> f64 {
        let pts = &self.points;
        match pts.iter().position(|&(p, _)| p >= p_req_dbm) {
            None => pts.last().map_or(0.0, |&(_, c)| c),
            Some(0) => pts[0].1,
            Some(i) => {
                let (p0, c0) = pts[i - 1];
                let (p1, c1) = pts[i];
                if p1 == p0 {
                    c1
                } else {
                    c0 + (c1 - c0) * (p_req_dbm - p0) / (p1 - p0)
                }
            }
        }
    }

    pub fn range(&self) -> Option<(f64, f64)> {
        Some((self.points.first()?.0, self.points.last()?.0))
    }
}

/// Coverage sampled every `step_db` over `[min_dbm, max_dbm]`, plus the exact
/// value at every grid power inside that range.
pub fn coverage_curve(grid: &FieldGrid, min_dbm: f64, max_dbm: f64, step_db: f64) -> CoverageCurve {
    assert!(step_db > 0.0, "coverage curve step must be positive");
    let mut abscissa: Vec<f64> = Vec::new();
    if max_dbm >= min_dbm {
        let n = ((max_dbm - min_dbm) / step_db + 1e-9).floor() as usize;
        abscissa.extend((0..=n).map(|i| min_dbm + i as f64 * step_db));
        abscissa.extend(
            grid.power_dbm()
                .into_iter()
                .filter(|p| *p >= min_dbm && *p <= max_dbm),
        );
    }
    abscissa.sort_by(f64::total_cmp);
    abscissa.dedup();
    CoverageCurve {
        points: abscissa.into_iter().map(|p| (p, coverage(grid, p))).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingPoint {
    pub p_req_dbm: f64,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CrossingReport {
    pub points: Vec<CrossingPoint>,
    /// The curves coincide over the whole overlap.
    pub degenerate_overlap: bool,
}

/// Power levels where `C_a - C_b` changes sign over the common range.
pub fn crossing_points(a: &CoverageCurve, b: &CoverageCurve) -> CrossingReport {
    let (Some((a_lo, a_hi)), Some((b_lo, b_hi))) = (a.range(), b.range()) else {
        return CrossingReport::default();
    };
    let (lo, hi) = (a_lo.max(b_lo), a_hi.min(b_hi));
    if lo > hi {
        return CrossingReport::default();
    }
    let mut xs: Vec<f64> = a
        .points
        .iter()
        .chain(&b.points)
        .map(|&(p, _)| p)
        .filter(|p| *p >= lo && *p <= hi)
        .collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let diffs: Vec<f64> = xs.iter().map(|&p| a.value_at(p) - b.value_at(p)).collect();

    if diffs.iter().all(|d| *d == 0.0) {
        return CrossingReport {
            points: Vec::new(),
            degenerate_overlap: true,
        };
    }

    let mut points = Vec::new();
    let mut last_nonzero: Option<usize> = None;
    for (i, &d) in diffs.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        if let Some(j) = last_nonzero {
            if diffs[j].signum() != d.signum() {
                let p = if j + 1 == i {
                    xs[j] + diffs[j] / (diffs[j] - d) * (xs[i] - xs[j])
                } else {
                    (xs[j + 1] + xs[i - 1]) / 2.0
                };
                points.push(CrossingPoint {
                    p_req_dbm: p,
                    coverage: a.value_at(p),
                });
            }
        }
        last_nonzero = Some(i);
    }
    CrossingReport {
        points,
        degenerate_overlap: false,
    }
}
