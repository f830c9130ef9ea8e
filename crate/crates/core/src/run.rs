//! Running a scenario end to end and writing its report files.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

use crate::coverage::{
    coverage_curve, crossing_points, deadspot_count, fields_from_phasors,
    max_required_power_full_coverage, sweep_phasors, zero_coverage_power, Axis, CoverageCurve,
    FieldGrid, PointPhasors, SweepError,
};
use crate::scenario::{check_scheme, Scenario};
use crate::schemes::{time_domain_power, OracleConfig, Scheme, SchemeError};
use crate::units::watts_to_dbm;

/// Name of the pooled pseudo-grid reported when a scenario has several grids.
pub const OVERALL: &str = "overall";

/// Relative tolerance between the closed-form MPCSD power and its
/// time-averaged counterpart.
pub const ORACLE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error("oracle check failed on grid `{grid}` point {index}: closed form {closed_form:e} W, time average {time_average:e} W")]
    OracleMismatch {
        grid: String,
        index: usize,
        closed_form: f64,
        time_average: f64,
    },
    #[error("oracle check failed on grid `{grid}` point {index}: {source}")]
    Oracle {
        grid: String,
        index: usize,
        #[source]
        source: SchemeError,
    },
    #[error("cannot write {path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl RunError {
    /// Input problems exit with 1, failures while running with 2.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Invalid(_) => 1,
            _ => 2,
        }
    }
}

/// Command-line overrides applied on top of a scenario.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub schemes: Option<Vec<Scheme>>,
    pub grids: Option<Vec<String>>,
    pub max_order: Option<u32>,
    pub p_req_min_dbm: Option<f64>,
    pub p_req_max_dbm: Option<f64>,
    pub p_req_step_db: Option<f64>,
    pub oracle_check: bool,
    pub seed: Option<u64>,
}

impl RunOptions {
    pub fn apply(&self, scenario: &Scenario) -> Result<Scenario, RunError> {
        let mut s = scenario.clone();
        if let Some(schemes) = &self.schemes {
            if schemes.is_empty() {
                return Err(RunError::Invalid("no schemes selected".into()));
            }
            let mut kept = Vec::new();
            for &scheme in schemes {
                check_scheme(scheme, s.transmitters.len()).map_err(RunError::Invalid)?;
                if !kept.contains(&scheme) {
                    kept.push(scheme);
                }
            }
            s.schemes = kept;
        }
        if let Some(names) = &self.grids {
            let mut kept = Vec::new();
            for name in names {
                let grid = scenario
                    .grid(name)
                    .ok_or_else(|| RunError::Invalid(format!("scenario has no grid named `{name}`")))?;
                if !kept.iter().any(|g: &crate::coverage::GridSpec| g.name == *name) {
                    kept.push(grid.clone());
                }
            }
            if kept.is_empty() {
                return Err(RunError::Invalid("no grids selected".into()));
            }
            s.grids = kept;
        }
        if let Some(order) = self.max_order {
            s.max_order = order;
        }
        if let Some(v) = self.p_req_min_dbm {
            s.output.p_req_min_dbm = v;
        }
        if let Some(v) = self.p_req_max_dbm {
            s.output.p_req_max_dbm = v;
        }
        if let Some(v) = self.p_req_step_db {
            s.output.p_req_step_db = v;
        }
        let o = &s.output;
        if !(o.p_req_step_db.is_finite() && o.p_req_step_db > 0.0) {
            return Err(RunError::Invalid("P_req step must be positive".into()));
        }
        if !(o.p_req_min_dbm.is_finite() && o.p_req_max_dbm.is_finite() && o.p_req_min_dbm <= o.p_req_max_dbm) {
            return Err(RunError::Invalid("P_req range must be finite with min <= max".into()));
        }
        Ok(s)
    }
}

#[derive(Debug, Clone)]
pub struct GridResult {
    pub name: String,
    /// One field per scheme, in scenario order.
    pub fields: Vec<FieldGrid>,
    pub curves: Vec<CoverageCurve>,
    pub slice_axis: Option<Axis>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub scenario: Scenario,
    pub grids: Vec<GridResult>,
    /// Pooled over all grids, present when there is more than one.
    pub overall: Option<GridResult>,
    pub summary: Summary,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Summary {
    pub scenario: String,
    pub schemes: Vec<String>,
    pub center_frequency_hz: f64,
    pub carrier_offsets_hz: Vec<f64>,
    pub beat_period_s: Option<f64>,
    pub max_order: u32,
    pub warnings: Vec<String>,
    pub grids: Vec<GridSummary>,
    pub overall: Option<GridSummary>,
    pub oracle_check: Option<OracleSummary>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct GridSummary {
    pub name: String,
    pub points: usize,
    pub schemes: Vec<SchemeSummary>,
    pub threshold_gaps: Vec<ThresholdGap>,
    pub crossings: Vec<CrossingSummary>,
    pub slices: Vec<SliceSummary>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SchemeSummary {
    pub scheme: String,
    /// Largest `P_req` with full coverage.
    pub full_coverage_threshold_dbm: f64,
    pub zero_coverage_power_dbm: f64,
    /// Dead spots of this scheme at each scheme's full-coverage threshold.
    pub deadspots: Vec<DeadspotCount>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct DeadspotCount {
    pub at_threshold_of: String,
    pub p_req_dbm: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ThresholdGap {
    pub scheme: String,
    pub reference: String,
    pub gap_db: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CrossingSummary {
    pub a: String,
    pub b: String,
    pub degenerate_overlap: bool,
    pub points: Vec<CrossingPointSummary>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CrossingPointSummary {
    pub p_req_dbm: f64,
    pub coverage: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SliceSummary {
    pub axis: String,
    pub coordinate_m: f64,
    pub points: usize,
    pub schemes: Vec<SliceScheme>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SliceScheme {
    pub scheme: String,
    pub full_coverage_threshold_dbm: f64,
    pub zero_coverage_power_dbm: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct OracleSummary {
    pub points_checked: usize,
    pub max_relative_error: f64,
    pub start_time_s: f64,
}

/// Sweeps every grid for every scheme and assembles the report.
pub fn execute(scenario: &Scenario, options: &RunOptions) -> Result<RunReport, RunError> {
    let scenario = options.apply(scenario)?;
    let schemes = scenario.schemes.clone();
    let out = &scenario.output;

    let start_time = options.seed.map_or(0.0, |seed| {
        let period = scenario.carriers.beat_period().ok().flatten().unwrap_or(1.0);
        ChaCha8Rng::seed_from_u64(seed).gen_range(0.0..period)
    });
    let mut oracle = OracleSummary {
        points_checked: 0,
        max_relative_error: 0.0,
        start_time_s: start_time,
    };

    let mut grids = Vec::with_capacity(scenario.grids.len());
    for spec in &scenario.grids {
        let phasors = sweep_phasors(&scenario, spec)?;
        let fields = fields_from_phasors(&scenario, spec, &phasors, &schemes)?;
        if options.oracle_check {
            if let Some(mpcsd) = fields.iter().find(|f| f.scheme == Scheme::Mpcsd) {
                let worst = check_against_oracle(&scenario, mpcsd, &phasors, start_time)?;
                oracle.points_checked += mpcsd.len();
                oracle.max_relative_error = oracle.max_relative_error.max(worst);
            }
        }
        grids.push(grid_result(spec.name.clone(), fields, spec.slice_axis, out));
    }

    let overall = (grids.len() > 1).then(|| {
        let fields = (0..schemes.len())
            .map(|k| {
                FieldGrid::pooled(OVERALL, grids.iter().map(|g| &g.fields[k]))
                    .expect("at least one grid")
            })
            .collect();
        grid_result(OVERALL.to_string(), fields, None, out)
    });

    let mut warnings = Vec::new();
    if let Some(shared) = scenario.shared_carriers() {
        for group in &shared.groups {
            let names: Vec<&str> = group.iter().map(|&i| scenario.transmitter_names[i].as_str()).collect();
            warnings.push(format!(
                "transmitters {} share a carrier; MPCSD combines them coherently",
                names.join(", ")
            ));
        }
    }

    let summary = Summary {
        scenario: scenario.name.clone(),
        schemes: schemes.iter().map(Scheme::to_string).collect(),
        center_frequency_hz: scenario.carriers.center_frequency(),
        carrier_offsets_hz: scenario.carrier_offsets(),
        beat_period_s: scenario.carriers.beat_period().ok().flatten(),
        max_order: scenario.max_order,
        warnings,
        grids: grids.iter().map(grid_summary).collect(),
        overall: overall.as_ref().map(grid_summary),
        oracle_check: options.oracle_check.then_some(oracle),
    };

    Ok(RunReport {
        scenario,
        grids,
        overall,
        summary,
    })
}

/// Worst relative error between closed-form MPCSD power and the time average.
fn check_against_oracle(
    scenario: &Scenario,
    mpcsd: &FieldGrid,
    phasors: &[PointPhasors],
    start_time: f64,
) -> Result<f64, RunError> {
    let offsets = scenario.carrier_offsets();
    let config = OracleConfig {
        start_time,
        ..OracleConfig::default()
    };
    let errors: Vec<f64> = phasors
        .par_iter()
        .enumerate()
        .map(|(index, pp)| {
            let closed_form = mpcsd.power[index];
            let time_average = time_domain_power(&pp.own_carrier, &offsets, scenario.load_ohms, &config)
                .map_err(|source| RunError::Oracle {
                    grid: mpcsd.name.clone(),
                    index,
                    source,
                })?;
            let rel = (time_average - closed_form).abs() / closed_form.abs().max(f64::MIN_POSITIVE);
            if rel > ORACLE_TOLERANCE {
                return Err(RunError::OracleMismatch {
                    grid: mpcsd.name.clone(),
                    index,
                    closed_form,
                    time_average,
                });
            }
            Ok(rel)
        })
        .collect::<Result<_, _>>()?;
    Ok(errors.into_iter().fold(0.0, f64::max))
}

fn grid_result(
    name: String,
    fields: Vec<FieldGrid>,
    slice_axis: Option<Axis>,
    out: &crate::scenario::OutputControls,
) -> GridResult {
    let curves = fields
        .iter()
        .map(|f| coverage_curve(f, out.p_req_min_dbm, out.p_req_max_dbm, out.p_req_step_db))
        .collect();
    GridResult {
        name,
        fields,
        curves,
        slice_axis,
    }
}

fn grid_summary(g: &GridResult) -> GridSummary {
    let thresholds: Vec<(String, f64)> = g
        .fields
        .iter()
        .map(|f| (f.scheme.to_string(), max_required_power_full_coverage(f)))
        .collect();
    let schemes = g
        .fields
        .iter()
        .map(|f| SchemeSummary {
            scheme: f.scheme.to_string(),
            full_coverage_threshold_dbm: max_required_power_full_coverage(f),
            zero_coverage_power_dbm: zero_coverage_power(f),
            deadspots: thresholds
                .iter()
                .map(|(name, p)| DeadspotCount {
                    at_threshold_of: name.clone(),
                    p_req_dbm: *p,
                    count: deadspot_count(f, *p),
                })
                .collect(),
        })
        .collect();

    let mut threshold_gaps = Vec::new();
    if let Some(m) = g.fields.iter().position(|f| f.scheme == Scheme::Mpcsd) {
        for (k, f) in g.fields.iter().enumerate() {
            if k != m {
                threshold_gaps.push(ThresholdGap {
                    scheme: Scheme::Mpcsd.to_string(),
                    reference: f.scheme.to_string(),
                    gap_db: thresholds[m].1 - thresholds[k].1,
                });
            }
        }
    }

    let mut crossings = Vec::new();
    for i in 0..g.fields.len() {
        for j in i + 1..g.fields.len() {
            let r = crossing_points(&g.curves[i], &g.curves[j]);
            crossings.push(CrossingSummary {
                a: g.fields[i].scheme.to_string(),
                b: g.fields[j].scheme.to_string(),
                degenerate_overlap: r.degenerate_overlap,
                points: r
                    .points
                    .iter()
                    .map(|p| CrossingPointSummary {
                        p_req_dbm: p.p_req_dbm,
                        coverage: p.coverage,
                    })
                    .collect(),
            });
        }
    }

    let slices = match g.slice_axis {
        None => Vec::new(),
        Some(axis) => {
            let per_scheme: Vec<Vec<(f64, FieldGrid)>> = g.fields.iter().map(|f| f.slices(axis)).collect();
            (0..per_scheme.first().map_or(0, Vec::len))
                .map(|s| SliceSummary {
                    axis: axis.name().to_string(),
                    coordinate_m: per_scheme[0][s].0,
                    points: per_scheme[0][s].1.len(),
                    schemes: per_scheme
                        .iter()
                        .map(|slices| SliceScheme {
                            scheme: slices[s].1.scheme.to_string(),
                            full_coverage_threshold_dbm: max_required_power_full_coverage(&slices[s].1),
                            zero_coverage_power_dbm: zero_coverage_power(&slices[s].1),
                        })
                        .collect(),
                })
                .collect()
        }
    };

    GridSummary {
        name: g.name.clone(),
        points: g.fields.first().map_or(0, FieldGrid::len),
        schemes,
        threshold_gaps,
        crossings,
        slices,
    }
}

fn fmt_dbm(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.3}")
    } else if v < 0.0 {
        "-inf".into()
    } else {
        "inf".into()
    }
}

/// Writes `field_<grid>_<scheme>.csv`, `coverage.csv`, `summary.txt` and
/// `summary.json` into `dir`, returning the paths written.
pub fn write_outputs(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>, RunError> {
    let io = |path: &Path, e: &dyn std::fmt::Display| RunError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    std::fs::create_dir_all(dir).map_err(|e| io(dir, &e))?;
    let mut written = Vec::new();

    if report.scenario.output.field_files {
        for g in &report.grids {
            for f in &g.fields {
                let path = dir.join(format!("field_{}_{}.csv", g.name, f.scheme));
                let mut w = csv::Writer::from_path(&path).map_err(|e| io(&path, &e))?;
                w.write_record(["x_m", "y_m", "z_m", "power_dBm", "scheme"])
                    .map_err(|e| io(&path, &e))?;
                let scheme = f.scheme.to_string();
                for (p, dbm) in f.points.iter().zip(f.power_dbm()) {
                    w.write_record([
                        format!("{:.4}", p.x),
                        format!("{:.4}", p.y),
                        format!("{:.4}", p.z),
                        fmt_dbm(dbm),
                        scheme.clone(),
                    ])
                    .map_err(|e| io(&path, &e))?;
                }
                w.flush().map_err(|e| io(&path, &e))?;
                written.push(path);
            }
        }
    }

    let path = dir.join("coverage.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| io(&path, &e))?;
    w.write_record(["p_req_dBm", "coverage_fraction", "scheme", "grid_name"])
        .map_err(|e| io(&path, &e))?;
    for g in report.grids.iter().chain(&report.overall) {
        for (f, c) in g.fields.iter().zip(&g.curves) {
            let scheme = f.scheme.to_string();
            for &(p, cov) in &c.points {
                w.write_record([fmt_dbm(p), format!("{cov:.6}"), scheme.clone(), g.name.clone()])
                    .map_err(|e| io(&path, &e))?;
            }
        }
    }
    w.flush().map_err(|e| io(&path, &e))?;
    written.push(path);

    let path = dir.join("summary.json");
    let json = serde_json::to_string_pretty(&report.summary).expect("summary serializes");
    std::fs::write(&path, json + "\n").map_err(|e| io(&path, &e))?;
    written.push(path);

    let path = dir.join("summary.txt");
    std::fs::write(&path, render_summary(&report.summary)).map_err(|e| io(&path, &e))?;
    written.push(path);

    Ok(written)
}

/// Plain-text rendering of the summary.
pub fn render_summary(s: &Summary) -> String {
    let mut t = String::new();
    let _ = writeln!(t, "scenario: {}", s.scenario);
    let _ = writeln!(t, "schemes: {}", s.schemes.join(", "));
    let offsets: Vec<String> = s.carrier_offsets_hz.iter().map(|o| format!("{o}")).collect();
    let _ = writeln!(
        t,
        "carrier: {} Hz, offsets [{}] Hz",
        s.center_frequency_hz,
        offsets.join(", ")
    );
    match s.beat_period_s {
        Some(p) => {
            let _ = writeln!(t, "beat period: {p} s");
        }
        None => {
            let _ = writeln!(t, "beat period: none (no carrier shift)");
        }
    }
    let _ = writeln!(t, "max reflection order: {}", s.max_order);
    for w in &s.warnings {
        let _ = writeln!(t, "warning: {w}");
    }
    for g in s.grids.iter().chain(&s.overall) {
        let _ = writeln!(t);
        let _ = writeln!(t, "grid {} ({} points)", g.name, g.points);
        for sc in &g.schemes {
            let _ = writeln!(
                t,
                "  {:<6} full coverage up to {} dBm, zero coverage above {} dBm",
                sc.scheme,
                fmt_dbm(sc.full_coverage_threshold_dbm),
                fmt_dbm(sc.zero_coverage_power_dbm)
            );
            for d in &sc.deadspots {
                let _ = writeln!(
                    t,
                    "         dead spots at {} threshold ({} dBm): {}",
                    d.at_threshold_of,
                    fmt_dbm(d.p_req_dbm),
                    d.count
                );
            }
        }
        for gap in &g.threshold_gaps {
            let _ = writeln!(t, "  gap {} - {}: {:.3} dB", gap.scheme, gap.reference, gap.gap_db);
        }
        for c in &g.crossings {
            if c.degenerate_overlap {
                let _ = writeln!(t, "  {} vs {}: curves coincide", c.a, c.b);
            } else if c.points.is_empty() {
                let _ = writeln!(t, "  {} vs {}: no crossing", c.a, c.b);
            } else {
                let pts: Vec<String> = c
                    .points
                    .iter()
                    .map(|p| format!("{} dBm (C = {:.4})", fmt_dbm(p.p_req_dbm), p.coverage))
                    .collect();
                let _ = writeln!(t, "  {} vs {}: cross at {}", c.a, c.b, pts.join(", "));
            }
        }
        for sl in &g.slices {
            let parts: Vec<String> = sl
                .schemes
                .iter()
                .map(|x| format!("{} {}", x.scheme, fmt_dbm(x.full_coverage_threshold_dbm)))
                .collect();
            let _ = writeln!(
                t,
                "  slice {} = {:.3} m ({} points): {}",
                sl.axis,
                sl.coordinate_m,
                sl.points,
                parts.join(", ")
            );
        }
    }
    if let Some(o) = &s.oracle_check {
        let _ = writeln!(t);
        let _ = writeln!(
            t,
            "oracle check: {} points, max relative error {:e}, window start {} s",
            o.points_checked, o.max_relative_error, o.start_time_s
        );
    }
    t
}

/// Threshold of `scheme` on the named grid, in dBm.
pub fn threshold(summary: &Summary, grid: &str, scheme: Scheme) -> Option<f64> {
    let name = scheme.to_string();
    summary
        .grids
        .iter()
        .chain(&summary.overall)
        .find(|g| g.name == grid)?
        .schemes
        .iter()
        .find(|s| s.scheme == name)
        .map(|s| s.full_coverage_threshold_dbm)
}

/// Field of `scheme` on the named grid.
pub fn field<'a>(report: &'a RunReport, grid: &str, scheme: Scheme) -> Option<&'a FieldGrid> {
    report
        .grids
        .iter()
        .chain(&report.overall)
        .find(|g| g.name == grid)?
        .fields
        .iter()
        .find(|f| f.scheme == scheme)
}

/// Convenience for callers that only need dBm values.
pub fn field_dbm(report: &RunReport, grid: &str, scheme: Scheme) -> Option<Vec<f64>> {
    field(report, grid, scheme).map(|f| f.power.iter().map(|&w| watts_to_dbm(w)).collect())
}
