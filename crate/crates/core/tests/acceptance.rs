//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::path::Path;
use std::time::{Duration, Instant};

use wetsim::coverage::{coverage, deadspot_count, max_required_power_full_coverage, FieldGrid};
use wetsim::propagation::Phasor;
use wetsim::run::{execute, field, threshold, write_outputs, RunOptions, RunReport};
use wetsim::scenario::{Scenario, FREESPACE_SCENARIO, ROOM_SCENARIO};
use wetsim::schemes::{mp_power, mpcsd_power, time_domain_power, OracleConfig, Scheme};

const LOAD: f64 = 50.0;
const SP1: Scheme = Scheme::Sp(0);
const SP2: Scheme = Scheme::Sp(1);

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome);

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn line_report(text: &str) -> (RunReport, Duration) {
    let s = Scenario::from_toml_str(text).unwrap();
    let opts = RunOptions {
        grids: Some(vec!["line".into()]),
        ..RunOptions::default()
    };
    let t = Instant::now();
    let r = execute(&s, &opts).unwrap();
    (r, t.elapsed())
}

fn line_gap(r: &RunReport) -> f64 {
    threshold(&r.summary, "line", Scheme::Mpcsd).unwrap() - threshold(&r.summary, "line", SP1).unwrap()
}

/// Boresight link budget of the bundled transmitters at `r` metres:
/// 30 dBm, 6 dBi, isotropic 0 dBi receiver, 952.4 MHz.
fn friis_dbm(r: f64) -> f64 {
    let lambda = 299_792_458.0 / 952.4e6;
    30.0 + 6.0 + 20.0 * (lambda / (4.0 * PI * r)).log10()
}

fn free_space_gap_oracle() -> f64 {
    20.0 * (6.2f64 / 3.35).log10() + 10.0 * 2f64.log10()
}

fn criterion_1() -> Outcome {
    let (r, elapsed) = line_report(FREESPACE_SCENARIO);
    let gap = line_gap(&r);
    let oracle = free_space_gap_oracle();
    let sp1 = threshold(&r.summary, "line", SP1).unwrap();
    let mpcsd = threshold(&r.summary, "line", Scheme::Mpcsd).unwrap();
    // farthest point for SP, midpoint with both links for MPCSD
    let sp1_oracle = friis_dbm(6.2);
    let mpcsd_oracle = friis_dbm(3.35) + 10.0 * 2f64.log10();
    let pass = (gap - 8.4).abs() <= 0.2
        && (gap - oracle).abs() <= 0.01
        && (sp1 - sp1_oracle).abs() < 1e-6
        && (mpcsd - mpcsd_oracle).abs() < 1e-6
        && elapsed < Duration::from_secs(1);
    outcome(
        pass,
        format!(
            "gap {gap:.3} dB (target 8.4 +/- 0.2, closed form {oracle:.3}); SP1 {sp1:.3} vs {sp1_oracle:.3} dBm; MPCSD {mpcsd:.3} vs {mpcsd_oracle:.3} dBm; {:.3} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_2() -> Outcome {
    let (r, _) = line_report(FREESPACE_SCENARIO);
    let mp = threshold(&r.summary, "line", Scheme::Mp).unwrap();
    let sp = threshold(&r.summary, "line", SP1).unwrap();
    let mpcsd = threshold(&r.summary, "line", Scheme::Mpcsd).unwrap();
    let pass = mp < sp && sp < mpcsd && sp - mp >= 10.0;
    outcome(
        pass,
        format!("MP {mp:.3} < SP1 {sp:.3} < MPCSD {mpcsd:.3} dBm; SP1 - MP = {:.3} dB (need >= 10)", sp - mp),
    )
}

fn criterion_3() -> Outcome {
    let (r, _) = line_report(FREESPACE_SCENARIO);
    // first P_req with C = 0 is just above the strongest point
    let zero = |scheme| {
        let f = field(&r, "line", scheme).unwrap();
        let p = f.power_dbm().into_iter().fold(f64::NEG_INFINITY, f64::max);
        assert!(coverage(f, p) > 0.0);
        assert_eq!(coverage(f, p + 1e-9), 0.0);
        p
    };
    let v = [zero(SP1), zero(Scheme::Mp), zero(Scheme::Mpcsd)];
    let spread = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v.iter().cloned().fold(f64::INFINITY, f64::min);
    outcome(
        spread <= 1.0,
        format!(
            "zero coverage above SP1 {:.3}, MP {:.3}, MPCSD {:.3} dBm; spread {spread:.3} dB (need <= 1)",
            v[0], v[1], v[2]
        ),
    )
}

fn random_phasors(rng: &mut ChaCha8Rng, n: usize) -> Vec<Phasor> {
    (0..n)
        .map(|_| Phasor::new(rng.gen_range(0.01..1.0), rng.gen_range(-PI..PI)))
        .collect()
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let t = Instant::now();
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=8);
        let phasors = random_phasors(&mut rng, n);
        let mut ks: Vec<i32> = Vec::new();
        while ks.len() < n {
            let k = rng.gen_range(-20..=20);
            if !ks.contains(&k) {
                ks.push(k);
            }
        }
        let offsets: Vec<f64> = ks.iter().map(|&k| f64::from(k) * 50.0).collect();
        let config = OracleConfig {
            require_distinct: true,
            ..OracleConfig::default()
        };
        let td = time_domain_power(&phasors, &offsets, LOAD, &config).unwrap();
        // sum of individual powers, computed here from amplitudes
        let expected: f64 = phasors.iter().map(|p| p.amplitude().powi(2)).sum::<f64>() / LOAD;
        let closed = mpcsd_power(&phasors, LOAD).unwrap();
        worst = worst.max(rel(td, closed)).max(rel(closed, expected));
    }
    let elapsed = t.elapsed();
    outcome(
        worst < 1e-6 && elapsed < Duration::from_secs(10),
        format!("1000 cases, worst relative error {worst:.2e} (need < 1e-6), {:.3} s", elapsed.as_secs_f64()),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=8);
        let phasors = random_phasors(&mut rng, n);
        let offsets = vec![0.0; n];
        let td = time_domain_power(&phasors, &offsets, LOAD, &OracleConfig::default()).unwrap();
        let (re, im) = phasors.iter().fold((0.0, 0.0), |(re, im), p| {
            (re + p.amplitude() * p.phase().cos(), im + p.amplitude() * p.phase().sin())
        });
        let coherent = (re * re + im * im) / LOAD;
        let closed = mp_power(&phasors, LOAD).unwrap();
        worst = worst.max(rel(td, closed)).max(rel(closed, coherent));
    }
    outcome(worst < 1e-9, format!("1000 cases, worst relative error {worst:.2e} (need < 1e-9)"))
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    let steps = 720;
    for _ in 0..200 {
        let a = random_phasors(&mut rng, 2);
        let mean = (0..steps)
            .map(|i| {
                let dtheta = 2.0 * PI * i as f64 / steps as f64;
                let b = Phasor::new(a[1].amplitude(), a[0].phase() + dtheta);
                mp_power(&[a[0], b], LOAD).unwrap()
            })
            .sum::<f64>()
            / steps as f64;
        worst = worst.max(rel(mean, mpcsd_power(&a, LOAD).unwrap()));
    }
    outcome(worst < 1e-6, format!("200 pairs, worst relative error {worst:.2e} (need < 1e-6)"))
}

fn grid_mw(mw: &[f64]) -> FieldGrid {
    FieldGrid {
        name: "hand".into(),
        scheme: Scheme::Mpcsd,
        points: (0..mw.len()).map(|i| nalgebra::Vector3::new(i as f64, 0.0, 0.0)).collect(),
        power: mw.iter().map(|p| p * 1e-3).collect(),
    }
}

fn criterion_7() -> Outcome {
    let g = grid_mw(&[1.0, 2.0, 3.0, 4.0]);
    let dbm = |mw: f64| 10.0 * mw.log10();
    let checks = [
        coverage(&g, dbm(2.5)) == 0.5,
        coverage(&g, dbm(0.5)) == 1.0,
        coverage(&g, dbm(5.0)) == 0.0,
        // ties are covered
        coverage(&g, dbm(2.0)) == 0.75,
        coverage(&g, dbm(4.0)) == 0.25,
        deadspot_count(&g, dbm(2.5)) == 2,
        deadspot_count(&g, dbm(0.5)) == 0,
        max_required_power_full_coverage(&g) == dbm(1.0),
    ];
    let passed = checks.iter().filter(|&&c| c).count();
    outcome(
        passed == checks.len(),
        format!("{passed}/{} hand-grid checks on {{1,2,3,4}} mW", checks.len()),
    )
}

/// Interior local minima at least `depth` dB below the highest sample within
/// `reach` metres on each side.
fn ripple_minima(f: &FieldGrid, depth: f64, reach: f64) -> Vec<(f64, f64)> {
    let p = f.power_dbm();
    let y: Vec<f64> = f.points.iter().map(|q| q.y).collect();
    let mut out = Vec::new();
    for i in 1..p.len() - 1 {
        if !(p[i] <= p[i - 1] && p[i] <= p[i + 1]) {
            continue;
        }
        let side_max = |range: &mut dyn Iterator<Item = usize>| {
            range
                .filter(|&j| (y[j] - y[i]).abs() <= reach + 1e-9)
                .map(|j| p[j])
                .fold(f64::NEG_INFINITY, f64::max)
        };
        let left = side_max(&mut (0..i));
        let right = side_max(&mut (i + 1..p.len()));
        if left - p[i] >= depth && right - p[i] >= depth {
            out.push((y[i], p[i]));
        }
    }
    out
}

/// Every value at which a dead-spot count can change, plus a point between
/// each pair and beyond both ends.
fn probe_levels(fields: &[&FieldGrid]) -> Vec<f64> {
    let mut v: Vec<f64> = fields.iter().flat_map(|f| f.power_dbm()).filter(|p| p.is_finite()).collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    let mut out = vec![v[0] - 1.0, v[v.len() - 1] + 1.0];
    for w in v.windows(2) {
        out.push(w[0]);
        out.push(0.5 * (w[0] + w[1]));
    }
    out.push(v[v.len() - 1]);
    out
}

fn criterion_8() -> Outcome {
    let s = Scenario::from_toml_str(ROOM_SCENARIO).unwrap();
    let t = Instant::now();
    let r = execute(&s, &RunOptions::default()).unwrap();
    let elapsed = t.elapsed();
    assert_eq!(r.scenario.max_order, 2);

    let sp1_line = field(&r, "line", SP1).unwrap();
    let sp2_line = field(&r, "line", SP2).unwrap();
    let minima1 = ripple_minima(sp1_line, 3.0, 0.5);
    let minima2 = ripple_minima(sp2_line, 3.0, 0.5);
    let a = !minima1.is_empty() && !minima2.is_empty();

    let mut violations = 0;
    let mut levels = 0;
    for g in &r.grids {
        let sp1 = field(&r, &g.name, SP1).unwrap();
        let sp2 = field(&r, &g.name, SP2).unwrap();
        let mpcsd = field(&r, &g.name, Scheme::Mpcsd).unwrap();
        for p in probe_levels(&[sp1, sp2, mpcsd]) {
            levels += 1;
            if deadspot_count(mpcsd, p) > deadspot_count(sp1, p).min(deadspot_count(sp2, p)) {
                violations += 1;
            }
        }
    }
    let b = violations == 0;

    let room_gap = line_gap(&r);
    let (fs, _) = line_report(FREESPACE_SCENARIO);
    let fs_gap = line_gap(&fs);
    let c = room_gap >= fs_gap;
    let fast = elapsed < Duration::from_secs(30);

    let deepest = minima1
        .iter()
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .map_or("none".to_string(), |(y, p)| format!("{p:.2} dBm at y = {y:.2} m"));
    outcome(
        a && b && c && fast,
        format!(
            "(a) {} SP1 / {} SP2 ripple minima, deepest SP1 {deepest}; (b) {violations} violations over {levels} levels; (c) room gap {room_gap:.3} dB >= free-space {fs_gap:.3} dB; {:.2} s",
            minima1.len(),
            minima2.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn write_run(text: &str, dir: &Path) {
    let s = Scenario::from_toml_str(text).unwrap();
    let r = execute(&s, &RunOptions::default()).unwrap();
    write_outputs(&r, dir).unwrap();
}

fn criterion_9() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut compared = 0;
    let mut differing = Vec::new();
    for (name, text) in [("freespace", FREESPACE_SCENARIO), ("room", ROOM_SCENARIO)] {
        let a = tmp.path().join(format!("{name}_a"));
        let b = tmp.path().join(format!("{name}_b"));
        write_run(text, &a);
        write_run(text, &b);
        let mut files: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
        files.sort();
        for f in files {
            compared += 1;
            if std::fs::read(a.join(&f)).unwrap() != std::fs::read(b.join(&f)).unwrap() {
                differing.push(format!("{name}/{}", f.to_string_lossy()));
            }
        }
    }
    outcome(
        differing.is_empty() && compared > 0,
        format!("{compared} files compared, {} differ {differing:?}", differing.len()),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("free-space MPCSD - SP gap", criterion_1),
        ("threshold ordering MP < SP < MPCSD", criterion_2),
        ("zero-coverage convergence", criterion_3),
        ("shifted-carrier time average", criterion_4),
        ("common-carrier time average", criterion_5),
        ("phase-average identity", criterion_6),
        ("coverage metric on hand grid", criterion_7),
        ("multipath qualitative suite", criterion_8),
        ("deterministic output", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {}: {} {name}: {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
