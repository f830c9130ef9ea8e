//! Scenario files: a strict TOML description of carriers, room,
//! transmitters, receiver and receiver grids.
//!
//! Unknown keys are rejected. Parse errors carry a line and column;
//! validation errors carry the path of the offending field.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::path::Path;
use thiserror::Error;

use crate::coverage::{Axis, AxisRange, GridSpec};
use crate::propagation::{
    Antenna, BoxRoom, Material, Pattern, Polarization, Room, Surface, Transmitter,
    DEFAULT_POWER_CAP_DBM,
};
use crate::schemes::{Scheme, SharedCarriers};
use crate::spectrum::{CarrierAssignment, FrequencyPlan};

/// Two facing patch transmitters in free space.
pub const FREESPACE_SCENARIO: &str = include_str!("../scenarios/freespace.scenario");
/// Same geometry inside a concrete box room.
pub const ROOM_SCENARIO: &str = include_str!("../scenarios/room.scenario");

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid `{path}`: {message}")]
    Validation { path: String, message: String },
}

impl ScenarioError {
    fn invalid(path: impl Into<String>, message: impl ToString) -> Self {
        ScenarioError::Validation {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

// ---------------------------------------------------------------------------
// On-disk form
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    #[serde(default = "default_max_order")]
    pub max_order: u32,
    #[serde(default = "default_load")]
    pub load_ohms: f64,
    #[serde(default = "default_true")]
    pub enforce_power_cap: bool,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<String>,
    pub carriers: CarriersFile,
    pub room: RoomFile,
    #[serde(default)]
    pub receiver: ReceiverFile,
    pub transmitters: Vec<TransmitterFile>,
    pub grids: Vec<GridFile>,
    #[serde(default)]
    pub output: OutputControls,
}

fn default_max_order() -> u32 {
    2
}

fn default_load() -> f64 {
    50.0
}

fn default_true() -> bool {
    true
}

fn default_schemes() -> Vec<String> {
    vec!["sp1".into(), "mp".into(), "mpcsd".into()]
}

/// Either explicit per-transmitter offsets or an equal split of a channel
/// (one subcarrier per transmitter).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarriersFile {
    pub center_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offsets_hz: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth_hz: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoomKind {
    FreeSpace,
    Box,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomFile {
    pub kind: RoomKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub materials: Option<MaterialsFile>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialsFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<Material>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_min: Option<Material>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_max: Option<Material>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_min: Option<Material>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_max: Option<Material>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor: Option<Material>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ceiling: Option<Material>,
}

impl MaterialsFile {
    fn surface(&self, s: Surface) -> Option<Material> {
        let own = match s {
            Surface::XMin => self.x_min,
            Surface::XMax => self.x_max,
            Surface::YMin => self.y_min,
            Surface::YMax => self.y_max,
            Surface::ZMin => self.floor,
            Surface::ZMax => self.ceiling,
        };
        own.or(self.default)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternKind {
    IsotropicWithGain,
    PatchCosine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternFile {
    pub kind: PatternKind,
    /// Derived from the peak gain when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverFile {
    #[serde(default)]
    pub gain_dbi: f64,
    #[serde(default = "default_polarization")]
    pub polarization: Polarization,
    #[serde(default = "default_rx_boresight")]
    pub boresight: [f64; 3],
    #[serde(default = "default_rx_pattern")]
    pub pattern: PatternFile,
}

fn default_polarization() -> Polarization {
    Polarization::Horizontal
}

fn default_rx_boresight() -> [f64; 3] {
    [0.0, 1.0, 0.0]
}

fn default_rx_pattern() -> PatternFile {
    PatternFile {
        kind: PatternKind::IsotropicWithGain,
        exponent: None,
    }
}

impl Default for ReceiverFile {
    fn default() -> Self {
        Self {
            gain_dbi: 0.0,
            polarization: default_polarization(),
            boresight: default_rx_boresight(),
            pattern: default_rx_pattern(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmitterFile {
    pub name: String,
    pub position: [f64; 3],
    pub boresight: [f64; 3],
    pub power_dbm: f64,
    pub gain_dbi: f64,
    #[serde(default = "default_polarization")]
    pub polarization: Polarization,
    pub pattern: PatternFile,
}

/// A grid axis: a single coordinate or an inclusive stepped range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisFile {
    Single(f64),
    Range(AxisRange),
}

impl AxisFile {
    fn range(self) -> AxisRange {
        match self {
            AxisFile::Single(v) => AxisRange::single(v),
            AxisFile::Range(r) => r,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    pub name: String,
    pub x: AxisFile,
    pub y: AxisFile,
    pub z: AxisFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slice_axis: Option<Axis>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputControls {
    #[serde(default = "default_p_req_min")]
    pub p_req_min_dbm: f64,
    #[serde(default = "default_p_req_max")]
    pub p_req_max_dbm: f64,
    #[serde(default = "default_p_req_step")]
    pub p_req_step_db: f64,
    #[serde(default = "default_true")]
    pub field_files: bool,
}

fn default_p_req_min() -> f64 {
    -60.0
}

fn default_p_req_max() -> f64 {
    20.0
}

fn default_p_req_step() -> f64 {
    0.1
}

impl Default for OutputControls {
    fn default() -> Self {
        Self {
            p_req_min_dbm: default_p_req_min(),
            p_req_max_dbm: default_p_req_max(),
            p_req_step_db: default_p_req_step(),
            field_files: true,
        }
    }
}

// ---------------------------------------------------------------------------
// Validated form
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub carriers: CarrierAssignment,
    pub room: Room,
    pub transmitters: Vec<Transmitter>,
    pub transmitter_names: Vec<String>,
    pub receiver: Antenna,
    pub load_ohms: f64,
    pub grids: Vec<GridSpec>,
    pub max_order: u32,
    pub schemes: Vec<Scheme>,
    pub output: OutputControls,
    pub enforce_power_cap: bool,
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Scenario::from_toml_str(&text)
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| {
            let (line, column) = e
                .span()
                .map(|s| line_column(text, s.start))
                .unwrap_or((1, 1));
            ScenarioError::Parse {
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        Self::from_file(file)
    }

    pub fn from_file(file: ScenarioFile) -> Result<Self, ScenarioError> {
        if file.name.trim().is_empty() {
            return Err(ScenarioError::invalid("name", "must not be empty"));
        }
        if !(file.load_ohms.is_finite() && file.load_ohms > 0.0) {
            return Err(ScenarioError::invalid("load_ohms", "must be positive"));
        }
        if file.transmitters.is_empty() {
            return Err(ScenarioError::invalid("transmitters", "at least one transmitter is required"));
        }
        if file.grids.is_empty() {
            return Err(ScenarioError::invalid("grids", "at least one grid is required"));
        }

        let n_tx = file.transmitters.len();
        let carriers = carriers_from_file(&file.carriers, n_tx)?;
        let offsets = carriers.offsets();
        let room = room_from_file(&file.room)?;
        let receiver = antenna_from_parts(
            "receiver",
            [0.0; 3],
            file.receiver.boresight,
            file.receiver.gain_dbi,
            file.receiver.polarization,
            file.receiver.pattern,
        )?;

        let cap = file.enforce_power_cap.then_some(DEFAULT_POWER_CAP_DBM);
        let mut transmitters = Vec::with_capacity(n_tx);
        let mut names = Vec::with_capacity(n_tx);
        let mut seen = HashSet::new();
        for (i, t) in file.transmitters.iter().enumerate() {
            let path = format!("transmitters[{i}]");
            if t.name.trim().is_empty() {
                return Err(ScenarioError::invalid(format!("{path}.name"), "must not be empty"));
            }
            if !seen.insert(t.name.clone()) {
                return Err(ScenarioError::invalid(
                    format!("{path}.name"),
                    format!("duplicate transmitter name `{}`", t.name),
                ));
            }
            let antenna = antenna_from_parts(&path, t.position, t.boresight, t.gain_dbi, t.polarization, t.pattern)?;
            if !room.contains(&antenna.position) {
                return Err(ScenarioError::invalid(
                    format!("{path}.position"),
                    format!("transmitter `{}` is not strictly inside the room", t.name),
                ));
            }
            let tx = Transmitter::new(antenna, t.power_dbm, offsets[i], cap)
                .map_err(|e| ScenarioError::invalid(format!("{path}.power_dbm"), e))?;
            transmitters.push(tx);
            names.push(t.name.clone());
        }

        let mut grids = Vec::with_capacity(file.grids.len());
        let mut grid_names = HashSet::new();
        for (i, g) in file.grids.iter().enumerate() {
            let path = format!("grids[{i}]");
            if g.name.trim().is_empty() || g.name.contains(['/', '\\', ',']) {
                return Err(ScenarioError::invalid(
                    format!("{path}.name"),
                    "must be non-empty and free of '/', '\\' and ','",
                ));
            }
            if !grid_names.insert(g.name.clone()) {
                return Err(ScenarioError::invalid(
                    format!("{path}.name"),
                    format!("duplicate grid name `{}`", g.name),
                ));
            }
            let mut spec = GridSpec::new(g.name.clone(), g.x.range(), g.y.range(), g.z.range())
                .map_err(|e| ScenarioError::invalid(path.clone(), e))?;
            spec.slice_axis = g.slice_axis;
            for (k, p) in spec.points().iter().enumerate() {
                if !room.contains(p) {
                    return Err(ScenarioError::invalid(
                        path.clone(),
                        format!("point {k} ({:.3}, {:.3}, {:.3}) is not strictly inside the room", p.x, p.y, p.z),
                    ));
                }
                if let Some(t) = transmitters.iter().position(|tx| tx.antenna.position == *p) {
                    return Err(ScenarioError::invalid(
                        path.clone(),
                        format!("point {k} coincides with transmitter `{}`", names[t]),
                    ));
                }
            }
            grids.push(spec);
        }

        let mut schemes = Vec::with_capacity(file.schemes.len());
        for (i, s) in file.schemes.iter().enumerate() {
            let scheme: Scheme = s
                .parse()
                .map_err(|e| ScenarioError::invalid(format!("schemes[{i}]"), e))?;
            check_scheme(scheme, n_tx).map_err(|m| ScenarioError::invalid(format!("schemes[{i}]"), m))?;
            if !schemes.contains(&scheme) {
                schemes.push(scheme);
            }
        }
        if schemes.is_empty() {
            return Err(ScenarioError::invalid("schemes", "at least one scheme is required"));
        }

        let o = &file.output;
        if !(o.p_req_step_db.is_finite() && o.p_req_step_db > 0.0) {
            return Err(ScenarioError::invalid("output.p_req_step_db", "must be positive"));
        }
        if !(o.p_req_min_dbm.is_finite() && o.p_req_max_dbm.is_finite() && o.p_req_min_dbm <= o.p_req_max_dbm) {
            return Err(ScenarioError::invalid(
                "output.p_req_min_dbm",
                "must be finite and not above p_req_max_dbm",
            ));
        }

        Ok(Scenario {
            name: file.name,
            carriers,
            room,
            transmitters,
            transmitter_names: names,
            receiver,
            load_ohms: file.load_ohms,
            grids,
            max_order: file.max_order,
            schemes,
            output: file.output,
            enforce_power_cap: file.enforce_power_cap,
        })
    }

    /// Offsets of each transmitter from the center carrier, Hz.
    pub fn carrier_offsets(&self) -> Vec<f64> {
        self.transmitters.iter().map(|t| t.carrier_offset).collect()
    }

    /// Transmitters left sharing a carrier, which MPCSD treats as MP.
    pub fn shared_carriers(&self) -> Option<SharedCarriers> {
        let offsets = self.carrier_offsets();
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for (i, o) in offsets.iter().enumerate() {
            if groups.iter().any(|g| g.contains(&i)) {
                continue;
            }
            let g: Vec<usize> = (i..offsets.len()).filter(|&j| offsets[j] == *o).collect();
            if g.len() > 1 {
                groups.push(g);
            }
        }
        (!groups.is_empty()).then_some(SharedCarriers { groups })
    }

    pub fn grid(&self, name: &str) -> Option<&GridSpec> {
        self.grids.iter().find(|g| g.name == name)
    }

    /// Back to the on-disk form; re-parsing it yields an equal scenario.
    pub fn to_file(&self) -> ScenarioFile {
        let carriers = match &self.carriers {
            CarrierAssignment::Plan(p) => CarriersFile {
                center_hz: p.center_frequency(),
                offsets_hz: None,
                bandwidth_hz: Some(p.bandwidth()),
            },
            CarrierAssignment::Offsets {
                center_frequency,
                offsets,
            } => CarriersFile {
                center_hz: *center_frequency,
                offsets_hz: Some(offsets.clone()),
                bandwidth_hz: None,
            },
        };
        let room = match &self.room {
            Room::FreeSpace => RoomFile {
                kind: RoomKind::FreeSpace,
                min: None,
                max: None,
                materials: None,
            },
            Room::Box(b) => {
                let m = |s| Some(*b.material(s));
                RoomFile {
                    kind: RoomKind::Box,
                    min: Some(b.min().into()),
                    max: Some(b.max().into()),
                    materials: Some(MaterialsFile {
                        default: None,
                        x_min: m(Surface::XMin),
                        x_max: m(Surface::XMax),
                        y_min: m(Surface::YMin),
                        y_max: m(Surface::YMax),
                        floor: m(Surface::ZMin),
                        ceiling: m(Surface::ZMax),
                    }),
                }
            }
        };
        let pattern_file = |p: Pattern| match p {
            Pattern::IsotropicWithGain => PatternFile {
                kind: PatternKind::IsotropicWithGain,
                exponent: None,
            },
            Pattern::PatchCosine { exponent } => PatternFile {
                kind: PatternKind::PatchCosine,
                exponent: Some(exponent),
            },
        };
        ScenarioFile {
            name: self.name.clone(),
            max_order: self.max_order,
            load_ohms: self.load_ohms,
            enforce_power_cap: self.enforce_power_cap,
            schemes: self.schemes.iter().map(Scheme::to_string).collect(),
            carriers,
            room,
            receiver: ReceiverFile {
                gain_dbi: self.receiver.gain_dbi,
                polarization: self.receiver.polarization,
                boresight: self.receiver.boresight().into(),
                pattern: pattern_file(self.receiver.pattern),
            },
            transmitters: self
                .transmitters
                .iter()
                .zip(&self.transmitter_names)
                .map(|(t, name)| TransmitterFile {
                    name: name.clone(),
                    position: t.antenna.position.into(),
                    boresight: t.antenna.boresight().into(),
                    power_dbm: t.power_dbm,
                    gain_dbi: t.antenna.gain_dbi,
                    polarization: t.antenna.polarization,
                    pattern: pattern_file(t.antenna.pattern),
                })
                .collect(),
            grids: self
                .grids
                .iter()
                .map(|g| {
                    let axis = |r: AxisRange| {
                        if r.start == r.stop {
                            AxisFile::Single(r.start)
                        } else {
                            AxisFile::Range(r)
                        }
                    };
                    GridFile {
                        name: g.name.clone(),
                        x: axis(g.x),
                        y: axis(g.y),
                        z: axis(g.z),
                        slice_axis: g.slice_axis,
                    }
                })
                .collect(),
            output: self.output.clone(),
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&self.to_file()).expect("scenario serializes to TOML")
    }
}

pub fn check_scheme(scheme: Scheme, n_tx: usize) -> Result<(), String> {
    match scheme {
        Scheme::Sp(i) if i >= n_tx => Err(format!(
            "{scheme} refers to transmitter {} but only {n_tx} are defined",
            i + 1
        )),
        _ => Ok(()),
    }
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn carriers_from_file(c: &CarriersFile, n_tx: usize) -> Result<CarrierAssignment, ScenarioError> {
    match (&c.offsets_hz, c.bandwidth_hz) {
        (Some(offsets), None) => {
            if offsets.len() != n_tx {
                return Err(ScenarioError::invalid(
                    "carriers.offsets_hz",
                    format!("{} offsets for {n_tx} transmitters", offsets.len()),
                ));
            }
            CarrierAssignment::explicit(c.center_hz, offsets.clone())
                .map_err(|e| ScenarioError::invalid("carriers.offsets_hz", e))
        }
        (None, Some(bw)) => FrequencyPlan::new(c.center_hz, bw, n_tx)
            .map(CarrierAssignment::Plan)
            .map_err(|e| ScenarioError::invalid("carriers.bandwidth_hz", e)),
        (None, None) => CarrierAssignment::explicit(c.center_hz, vec![0.0; n_tx])
            .map_err(|e| ScenarioError::invalid("carriers.center_hz", e)),
        (Some(_), Some(_)) => Err(ScenarioError::invalid(
            "carriers",
            "give either offsets_hz or bandwidth_hz, not both",
        )),
    }
}

fn room_from_file(r: &RoomFile) -> Result<Room, ScenarioError> {
    match r.kind {
        RoomKind::FreeSpace => {
            if r.min.is_some() || r.max.is_some() || r.materials.is_some() {
                return Err(ScenarioError::invalid(
                    "room",
                    "free_space takes no extents or materials",
                ));
            }
            Ok(Room::FreeSpace)
        }
        RoomKind::Box => {
            let min = r.min.ok_or_else(|| ScenarioError::invalid("room.min", "required for a box room"))?;
            let max = r.max.ok_or_else(|| ScenarioError::invalid("room.max", "required for a box room"))?;
            let materials = r.materials.clone().unwrap_or_default();
            let mut resolved = [Material::ABSORBER; 6];
            for s in Surface::ALL {
                resolved[s as usize] = materials.surface(s).ok_or_else(|| {
                    ScenarioError::invalid(
                        format!("room.materials.{}", s.name()),
                        "missing (and no default given)",
                    )
                })?;
            }
            BoxRoom::new(Vector3::from(min), Vector3::from(max), resolved)
                .map(Room::Box)
                .map_err(|e| ScenarioError::invalid("room", e))
        }
    }
}

fn antenna_from_parts(
    path: &str,
    position: [f64; 3],
    boresight: [f64; 3],
    gain_dbi: f64,
    polarization: Polarization,
    pattern: PatternFile,
) -> Result<Antenna, ScenarioError> {
    let pattern = match (pattern.kind, pattern.exponent) {
        (PatternKind::IsotropicWithGain, None) => Pattern::IsotropicWithGain,
        (PatternKind::IsotropicWithGain, Some(_)) => {
            return Err(ScenarioError::invalid(
                format!("{path}.pattern.exponent"),
                "isotropic_with_gain takes no exponent",
            ))
        }
        (PatternKind::PatchCosine, Some(exponent)) => Pattern::PatchCosine { exponent },
        (PatternKind::PatchCosine, None) => Pattern::patch_for_gain(gain_dbi),
    };
    Antenna::new(
        Vector3::from(position),
        Vector3::from(boresight),
        gain_dbi,
        polarization,
        pattern,
    )
    .map_err(|e| ScenarioError::invalid(path.to_string(), e))
}
