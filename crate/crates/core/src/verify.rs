//! Verification suites shared by the `verify` command and the acceptance
//! tests. Each suite reports its case count, worst residual and verdict.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atlas::{
    closed_geodesics_up_to, ClosedGeodesic, Crossing, DomainNeighbors, SMALL_ANGLE_WORDS,
};
use crate::encounters::{detect_2antiparallel_with, shadowing_check, EncounterReport};
use crate::fuchsian::{FuchsianGroup, GroupConfig, QuotientMetric};
use crate::moebius::{
    d_pi, flow, local_distance, nsa_decompose, rotation, stable, unstable, PslElement,
};
use crate::partner::{
    classify_period_change, closing_period, construct_partner_with, predicted_trace,
    ClosingConvention, PartnerInput, PartnerReport, PeriodChange,
};
use crate::report::{atlas_crossings, partner_batch, PartnerRow, SMALL_ANGLE};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteOutcome {
    pub name: String,
    pub cases: usize,
    pub max_residual: f64,
    pub passed: bool,
    pub notes: Vec<String>,
}

impl SuiteOutcome {
    fn new(name: &str) -> Self {
        SuiteOutcome {
            name: name.to_string(),
            cases: 0,
            max_residual: 0.0,
            passed: true,
            notes: Vec::new(),
        }
    }

    fn record(&mut self, residual: f64, ok: bool) {
        self.cases += 1;
        self.max_residual = self.max_residual.max(residual);
        self.passed &= ok;
    }

    fn fail(&mut self, note: String) {
        self.passed = false;
        self.notes.push(note);
    }

    pub fn line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        format!(
            "{verdict} {}: {} cases, max residual {:.3e}",
            self.name, self.cases, self.max_residual
        )
    }
}

pub const IDENTITY_TOL: f64 = 1e-9;

fn random_element(rng: &mut ChaCha8Rng) -> PslElement {
    rotation(rng.gen_range(-3.0..3.0))
        * flow(rng.gen_range(-3.0..3.0))
        * rotation(rng.gen_range(-3.0..3.0))
}

/// Conjugation by `d_π` and the `c_u b_s a_t` round trip.
pub fn moebius_suite(seed: u64, n: usize) -> SuiteOutcome {
    let mut out = SuiteOutcome::new("moebius");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dp = d_pi();
    for _ in 0..n {
        let t: f64 = rng.gen_range(-5.0..5.0);
        let r = local_distance(&(flow(t) * dp), &(dp * flow(-t)))
            .max(local_distance(&(stable(t) * dp), &(dp * unstable(-t))))
            .max(local_distance(&(unstable(t) * dp), &(dp * stable(-t))));
        out.record(r, r < IDENTITY_TOL);
    }
    let mut tried = 0;
    while tried < n {
        let g = random_element(&mut rng);
        if g.rep().a.abs() <= 0.01 {
            continue;
        }
        tried += 1;
        match nsa_decompose(&g) {
            Ok(d) => {
                let r = local_distance(&d.reconstruct(), &g);
                out.record(r, r < IDENTITY_TOL);
            }
            Err(e) => out.fail(format!("decomposition failed: {e}")),
        }
    }
    out
}

/// Random triples `x`, `x₁ = x b_s`, `x₂ = x c_u` with `|s|, |u| < ε`.
pub fn shadowing_suite(seed: u64, n: usize) -> SuiteOutcome {
    let mut out = SuiteOutcome::new("shadowing");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let forward: Vec<f64> = (0..=40).map(|k| 0.25 * k as f64).collect();
    let backward: Vec<f64> = forward.iter().map(|t| -t).collect();
    for eps in [0.01, 0.1] {
        for _ in 0..n {
            let x = random_element(&mut rng);
            let x1 = x * stable(eps * rng.gen_range(-0.99..0.99));
            let x2 = x * unstable(eps * rng.gen_range(-0.99..0.99));
            let f = shadowing_check(&x1, &x2, &x, eps, &forward);
            let b = shadowing_check(&x1, &x2, &x, eps, &backward);
            let r = f.max_ratio.max(b.max_ratio);
            out.record(r, f.passed && b.passed);
        }
    }
    out
}

/// The Bolza group loads from its own config; a generator with determinant
/// off by 1e-3 is rejected.
pub fn group_suite(group: &FuchsianGroup) -> SuiteOutcome {
    let mut out = SuiteOutcome::new("group");
    let cfg = group.to_config();
    match FuchsianGroup::from_config(&cfg) {
        Ok(_) => out.record(0.0, true),
        Err(e) => out.fail(format!("round trip rejected: {e}")),
    }
    let mut bad: GroupConfig = cfg.clone();
    bad.generators[0][0] *= 1.001;
    out.record(0.0, FuchsianGroup::from_config(&bad).is_err());
    out
}

pub fn fixture_geodesics(group: &FuchsianGroup) -> Vec<ClosedGeodesic> {
    SMALL_ANGLE_WORDS
        .iter()
        .filter_map(|w| ClosedGeodesic::from_word(group, group.parse_word(w).ok()?).ok())
        .collect()
}

/// Atlas geodesics up to `max_length` (word length ≤ 6) plus the fixtures.
pub fn encounter_geodesics(
    group: &FuchsianGroup,
    max_length: f64,
) -> Result<Vec<ClosedGeodesic>, crate::atlas::AtlasError> {
    let mut geos = closed_geodesics_up_to(group, max_length, 6)?;
    geos.extend(fixture_geodesics(group));
    Ok(geos)
}

pub type ConstructedPartner = (
    ClosedGeodesic,
    EncounterReport,
    Result<PartnerReport, String>,
);

/// Encounters at `ε = 1/4` on `geos`, each fed to the general partner
/// construction with `ε` just above `max(|u|, |s|)`.
pub fn constructed_partners(
    geos: &[ClosedGeodesic],
    metric: &QuotientMetric,
    dt: f64,
) -> Vec<ConstructedPartner> {
    let group = metric.group();
    let nb = DomainNeighbors::new(group);
    let per_geo: Vec<Vec<(ClosedGeodesic, EncounterReport)>> = geos
        .par_iter()
        .map(|geo| {
            detect_2antiparallel_with(geo, group, 0.25, dt, &nb)
                .map(|encs| encs.into_iter().map(|e| (geo.clone(), e)).collect())
                .unwrap_or_default()
        })
        .collect();
    per_geo
        .into_par_iter()
        .flatten()
        .map(|(geo, e)| {
            let eps = (e.coords.u.abs().max(e.coords.s.abs()) * (1.0 + 1e-9) + 1e-12).min(0.2499);
            let input = PartnerInput::from_encounter(&geo, &e, eps);
            let r = construct_partner_with(&input, metric, dt).map_err(|err| err.to_string());
            (geo, e, r)
        })
        .collect()
}

pub const TRACE_TOL: f64 = 1e-9;

/// Holonomy trace against `tr(a_T b_{−s′} c_{−u′})` (relative to the trace),
/// the `5|u′s′|e^{−T}` log bound, and which exponent convention reproduces `T′`.
pub fn closing_suite(partners: &[ConstructedPartner]) -> SuiteOutcome {
    let mut out = SuiteOutcome::new("closing identity");
    let (mut gap_holonomy, mut gap_negative) = (0.0f64, 0.0f64);
    for (geo, _, r) in partners {
        let r = match r {
            Ok(r) => r,
            Err(e) => {
                out.fail(format!("{:?}: {e}", geo.word));
                continue;
            }
        };
        let tr = r.partner_element.abs_trace();
        let rel = (tr - predicted_trace(r.period, r.u_prime, r.s_prime)).abs() / tr;
        out.record(rel, rel < TRACE_TOL && r.bound_closing_holds());
        gap_holonomy = gap_holonomy.max((r.period_closing - r.period_partner).abs());
        if let Some(p) = r.period_negative_exponent {
            gap_negative = gap_negative.max((p - r.period_partner).abs());
        }
    }
    if out.cases < 20 {
        out.fail(format!("only {} encounters constructed", out.cases));
    }
    out.notes.push(format!(
        "max |T′ − T′(e^(+T/2))| = {gap_holonomy:.3e}, max |T′ − T′(e^(−T/2))| = {gap_negative:.3e}"
    ));
    out
}

/// `|(T′−T)/2 − ln(1+u′s′)| ≤ |u′s′|e^{−T}`, `ε′ < 9ε` and closeness at `ε′`.
pub fn partner_bound_suite(partners: &[ConstructedPartner], rows: &[PartnerRow]) -> SuiteOutcome {
    let mut out = SuiteOutcome::new("partner bound");
    let reports = partners
        .iter()
        .filter_map(|(_, _, r)| r.as_ref().ok())
        .chain(
            rows.iter()
                .filter_map(|r| r.report.as_ref().map(|s| &s.partner)),
        );
    let (mut bound, mut negative, mut radius, mut close) = (0, 0, 0, 0);
    for r in reports {
        let ok = r.log_bound_holds() && r.eps_prime_below_nine_eps() && r.closeness_verified;
        if !r.log_bound_holds() {
            bound += 1;
            if r.u_prime * r.s_prime < 0.0 {
                negative += 1;
            }
        }
        radius += usize::from(!r.eps_prime_below_nine_eps());
        close += usize::from(!r.closeness_verified);
        out.record(r.log_bound_lhs / r.log_bound_rhs, ok);
    }
    if !out.passed {
        out.notes.push(format!(
            "log bound fails on {bound} of {} ({negative} with u's' < 0), eps' >= 9 eps on {radius}, closeness fails on {close}",
            out.cases
        ));
    }
    out
}

pub struct Batch {
    pub atlas: Vec<ClosedGeodesic>,
    pub crossings: Vec<Result<Vec<Crossing>, String>>,
    pub rows: Vec<PartnerRow>,
}

pub fn run_batch(atlas: Vec<ClosedGeodesic>, metric: &QuotientMetric, dt: f64) -> Batch {
    let crossings = atlas_crossings(metric.group(), &atlas);
    let rows = partner_batch(&atlas, &crossings, metric, dt);
    Batch {
        atlas,
        crossings,
        rows,
    }
}

pub fn atlas_batch(
    metric: &QuotientMetric,
    max_length: f64,
    max_word_length: usize,
    dt: f64,
) -> Result<Batch, crate::atlas::AtlasError> {
    let atlas = closed_geodesics_up_to(metric.group(), max_length, max_word_length)?;
    Ok(run_batch(atlas, metric, dt))
}

/// Small-angle checks on every row of a batch.
pub fn small_angle_suite(name: &str, batch: &Batch) -> SuiteOutcome {
    let mut out = SuiteOutcome::new(name);
    for row in &batch.rows {
        match &row.report {
            Some(r) => out.record(r.angle_bound_lhs / r.angle_bound_rhs, r.all_checks_pass()),
            None => out.fail(format!(
                "{}: {}",
                row.word,
                row.error.as_deref().unwrap_or("error")
            )),
        }
    }
    out
}

/// `e^{−L} < cos²(θ/2)` for every crossing, and agreement of crossing and
/// encounter detection for small angles.
pub fn crossing_suite(name: &str, batch: &Batch, dt: f64, group: &FuchsianGroup) -> SuiteOutcome {
    let mut out = SuiteOutcome::new(name);
    let nb = DomainNeighbors::new(group);
    for (geo, cs) in batch.atlas.iter().zip(&batch.crossings) {
        let cs = match cs {
            Ok(cs) => cs,
            Err(e) => {
                out.fail(format!("{}: {e}", group.format_word(&geo.word)));
                continue;
            }
        };
        for c in cs {
            let r = (-c.loop_length).exp() / (0.5 * c.theta).cos().powi(2);
            out.record(r, c.loop_bound_holds());
        }
        match encounter_agreement(geo, cs, group, &nb, dt) {
            Ok(()) => {}
            Err(note) => out.fail(format!("{}: {note}", group.format_word(&geo.word))),
        }
    }
    out
}

fn circ_close(a: f64, b: f64, period: f64, tol: f64) -> bool {
    let d = (a - b).rem_euclid(period);
    d.min(period - d) < tol
}

/// Every crossing with `φ < 1/3` shows up as an encounter at
/// `ε = 1.25 sin(φ/2)` at the crossing times, and every encounter at
/// `ε = 1/4` with angle below 1/3 comes from a crossing.
pub fn encounter_agreement(
    geo: &ClosedGeodesic,
    crossings: &[Crossing],
    group: &FuchsianGroup,
    nb: &DomainNeighbors,
    dt: f64,
) -> Result<(), String> {
    let small: Vec<&Crossing> = crossings.iter().filter(|c| c.phi < SMALL_ANGLE).collect();
    let time_tol = 2.0 * dt;
    let matches = |c: &Crossing, e: &EncounterReport| {
        e.crossing_angle()
            .is_some_and(|phi| (phi - c.phi).abs() < 1e-7)
            && circ_close(c.tau, e.base_time, geo.period, time_tol)
            && circ_close(c.tau + c.loop_length, e.partner_time, geo.period, time_tol)
    };
    for c in &small {
        let eps = 1.25 * (0.5 * c.phi).sin();
        let enc = detect_2antiparallel_with(geo, group, eps, dt, nb).map_err(|e| e.to_string())?;
        if !enc.iter().any(|e| matches(c, e)) {
            return Err(format!("no encounter for crossing at tau = {}", c.tau));
        }
    }
    for e in detect_2antiparallel_with(geo, group, 0.25, dt, nb).map_err(|e| e.to_string())? {
        if e.crossing_angle().is_some_and(|phi| phi < SMALL_ANGLE)
            && !small.iter().any(|c| matches(c, &e))
        {
            return Err(format!("encounter at {} has no crossing", e.base_time));
        }
    }
    Ok(())
}

/// `u′s′ ∈ {−0.01, 0, 0.01}` at `T = 10`.
pub fn trichotomy_suite() -> SuiteOutcome {
    let mut out = SuiteOutcome::new("trichotomy");
    let t = 10.0;
    for (p, want) in [
        (-0.01, PeriodChange::Shorter),
        (0.0, PeriodChange::Equal),
        (0.01, PeriodChange::Longer),
    ] {
        match closing_period(t, p, ClosingConvention::Holonomy) {
            Ok(tp) => {
                let by_value = if p == 0.0 {
                    (tp - t).abs() < 1e-12
                } else {
                    (tp > t) == (p > 0.0)
                };
                let r = if p == 0.0 { (tp - t).abs() } else { 0.0 };
                out.record(r, by_value && classify_period_change(p) == want);
            }
            Err(e) => out.fail(e.to_string()),
        }
    }
    out
}

/// The current constants against the earlier `12 sin²` and `9|sin|`.
pub fn legacy_suite(rows: &[PartnerRow]) -> SuiteOutcome {
    let mut out = SuiteOutcome::new("legacy comparison");
    for r in rows.iter().filter_map(|r| r.report.as_ref()) {
        match crate::partner::legacy_bound_compare(r, r.t1) {
            Ok(c) => out.record(c.new_rhs / c.old_rhs, c.new_dominates()),
            Err(e) => out.fail(e.to_string()),
        }
    }
    out
}
