//! Acceptance criteria 1-9, one PASS/FAIL line each. Exits non-zero if any
//! criterion fails.

use std::time::{Duration, Instant};

use geoflow::atlas::closed_geodesics_up_to;
use geoflow::report::{atlas_crossings, atlas_json, partner_csv, AtlasEntry, SMALL_ANGLE};
use geoflow::verify::{
    atlas_batch, closing_suite, constructed_partners, crossing_suite, encounter_geodesics,
    fixture_geodesics, legacy_suite, moebius_suite, partner_bound_suite, run_batch,
    shadowing_suite, small_angle_suite, trichotomy_suite, SuiteOutcome,
};
use geoflow::{FuchsianGroup, QuotientMetric};

const SEED: u64 = 20240917;
const DT: f64 = 0.05;
const RADIUS: usize = 4;

struct Line {
    id: u32,
    passed: bool,
    text: String,
}

fn line(id: u32, passed: bool, text: String) -> Line {
    let verdict = if passed { "PASS" } else { "FAIL" };
    println!("criterion {id}: {verdict} {text}");
    Line { id, passed, text }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn details(s: &SuiteOutcome) -> String {
    let mut out = format!("{} cases, max {:.3e}", s.cases, s.max_residual);
    for n in &s.notes {
        out.push_str("; ");
        out.push_str(n);
    }
    out
}

fn main() {
    let group = FuchsianGroup::bolza();
    let metric = QuotientMetric::new(&group, RADIUS);
    let mut lines = Vec::new();

    let (m, dt) = timed(|| moebius_suite(SEED, 1000));
    lines.push(line(
        1,
        m.passed && dt < Duration::from_secs(1),
        format!(
            "identities and round trips < 1e-9: {} in {:.3}s",
            details(&m),
            dt.as_secs_f64()
        ),
    ));

    let (s, dt) = timed(|| shadowing_suite(SEED, 100));
    lines.push(line(
        2,
        s.passed && s.max_residual < 1.0 && dt < Duration::from_secs(10),
        format!(
            "shadowing ratio < 1, eps in {{0.01, 0.1}}: {} in {:.3}s",
            details(&s),
            dt.as_secs_f64()
        ),
    ));

    let geos = encounter_geodesics(&group, 12.0).expect("encounter geodesics");
    let partners = constructed_partners(&geos, &metric, DT);
    let c = closing_suite(&partners);
    lines.push(line(
        3,
        c.passed,
        format!(
            "holonomy trace (relative to |tr|) < 1e-9 and 5|u's'|e^-T bound: {}",
            details(&c)
        ),
    ));

    let (stated, dt5) = timed(|| atlas_batch(&metric, 8.0, 6, DT).expect("atlas batch"));
    let fixtures = run_batch(fixture_geodesics(&group), &metric, DT);

    let mut rows = stated.rows.clone();
    rows.extend(fixtures.rows.iter().cloned());
    let b = partner_bound_suite(&partners, &rows);
    lines.push(line(
        4,
        b.passed,
        format!(
            "|(T'-T)/2 - ln(1+u's')| <= |u's'|e^-T, eps' < 9 eps, closeness: {}",
            details(&b)
        ),
    ));

    let s5 = small_angle_suite("stated batch", &stated);
    let f5 = small_angle_suite("fixtures", &fixtures);
    let small_crossings: usize = stated
        .crossings
        .iter()
        .filter_map(|c| c.as_ref().ok())
        .map(|cs| cs.iter().filter(|c| c.phi < SMALL_ANGLE).count())
        .sum();
    lines.push(line(
        5,
        s5.passed && f5.passed && f5.cases > 0 && dt5 < Duration::from_secs(600),
        format!(
            "T' < T, eps' <= 6|sin|, angle bound, loop lengths: {} geodesics with T <= 8, {} crossings with phi < 1/3, {} rows ({:.1}s); fixtures {}",
            stated.atlas.len(),
            small_crossings,
            s5.cases,
            dt5.as_secs_f64(),
            details(&f5)
        ),
    ));

    let c6 = crossing_suite("stated batch", &stated, DT, &group);
    let f6 = crossing_suite("fixtures", &fixtures, DT, &group);
    lines.push(line(
        6,
        c6.passed && f6.passed,
        format!(
            "e^-L < cos^2(theta/2) and crossing/encounter agreement: atlas {}; fixtures {}",
            details(&c6),
            details(&f6)
        ),
    ));

    let t = trichotomy_suite();
    lines.push(line(
        7,
        t.passed,
        format!("Shorter/Equal/Longer at T = 10: {}", details(&t)),
    ));

    let l = legacy_suite(&rows);
    lines.push(line(
        8,
        l.passed && l.cases == rows.iter().filter(|r| r.report.is_some()).count(),
        format!("2 <= 12 and 6 <= 9 on every row: {}", details(&l)),
    ));

    let again = run_batch(fixture_geodesics(&group), &metric, DT);
    let csv_a = partner_csv(&fixtures.rows);
    let csv_b = partner_csv(&again.rows);
    let atlas = closed_geodesics_up_to(&group, 6.0, 4).expect("atlas");
    let json = |a: &[geoflow::ClosedGeodesic]| {
        let cs = atlas_crossings(&group, a);
        let entries: Vec<_> = a
            .iter()
            .zip(&cs)
            .map(|(g, c)| AtlasEntry::new(&group, g, c.as_deref().unwrap_or(&[])))
            .collect();
        atlas_json(&entries)
    };
    let atlas_again = closed_geodesics_up_to(&group, 6.0, 4).expect("atlas");
    lines.push(line(
        9,
        csv_a == csv_b && json(&atlas) == json(&atlas_again),
        format!(
            "byte-identical CSV ({} bytes) and atlas JSON across runs",
            csv_a.len()
        ),
    ));

    let failed: Vec<&Line> = lines.iter().filter(|l| !l.passed).collect();
    println!(
        "acceptance: {} of {} criteria pass",
        lines.len() - failed.len(),
        lines.len()
    );
    if !failed.is_empty() {
        for l in failed {
            eprintln!("criterion {} failed: {}", l.id, l.text);
        }
        std::process::exit(1);
    }
}
