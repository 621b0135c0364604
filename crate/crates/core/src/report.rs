//! Machine-readable output: the atlas JSON, partner rows as CSV and JSON,
//! and the batch driver that produces the rows.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atlas::{detect_self_crossings_with, ClosedGeodesic, Crossing, DomainNeighbors};
use crate::fuchsian::{FuchsianGroup, QuotientMetric};
use crate::partner::{legacy_bound_compare, small_angle_pipeline, SmallAngleReport};

/// Crossings with `φ` below this go through the partner pipeline.
pub const SMALL_ANGLE: f64 = 1.0 / 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingEntry {
    pub tau: f64,
    #[serde(rename = "L")]
    pub loop_length: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtlasEntry {
    pub word: String,
    pub trace: f64,
    pub period: f64,
    pub crossings: Vec<CrossingEntry>,
}

impl AtlasEntry {
    pub fn new(group: &FuchsianGroup, geo: &ClosedGeodesic, crossings: &[Crossing]) -> Self {
        AtlasEntry {
            word: group.format_word(&geo.word),
            trace: geo.trace(),
            period: geo.period,
            crossings: crossings
                .iter()
                .map(|c| CrossingEntry {
                    tau: c.tau,
                    loop_length: c.loop_length,
                    theta: c.theta,
                })
                .collect(),
        }
    }
}

pub fn atlas_json(entries: &[AtlasEntry]) -> String {
    let mut s = serde_json::to_string_pretty(entries).expect("atlas entries serialize");
    s.push('\n');
    s
}

/// Crossings of every atlas entry, computed in parallel, in atlas order.
pub fn atlas_crossings(
    group: &FuchsianGroup,
    atlas: &[ClosedGeodesic],
) -> Vec<Result<Vec<Crossing>, String>> {
    let nb = DomainNeighbors::new(group);
    atlas
        .par_iter()
        .map(|geo| detect_self_crossings_with(geo, group, &nb).map_err(|e| e.to_string()))
        .collect()
}

pub const CSV_COLUMNS: [&str; 20] = [
    "word",
    "T",
    "tau",
    "L",
    "theta",
    "phi",
    "u",
    "s",
    "u_prime",
    "s_prime",
    "T_partner",
    "action_diff",
    "bound31_lhs",
    "bound31_rhs",
    "eq33_lhs",
    "eq33_rhs",
    "eps_prime",
    "closeness_verified",
    "trichotomy",
    "error",
];

/// One orbit pair. Items whose pipeline failed carry `error` and no numbers
/// past the crossing data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartnerRow {
    pub word: String,
    #[serde(rename = "T")]
    pub period: f64,
    pub tau: f64,
    #[serde(rename = "L")]
    pub loop_length: f64,
    pub theta: f64,
    pub phi: f64,
    pub report: Option<SmallAngleReport>,
    pub error: Option<String>,
}

/// PASS/FAIL flags behind a summary line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowChecks {
    pub log_bound: bool,
    pub angle_bound: bool,
    pub closeness: bool,
    pub shorter: bool,
    pub legacy: bool,
}

impl RowChecks {
    pub fn all(&self) -> bool {
        self.log_bound && self.angle_bound && self.closeness && self.shorter && self.legacy
    }
}

fn pass(b: bool) -> &'static str {
    if b {
        "PASS"
    } else {
        "FAIL"
    }
}

impl PartnerRow {
    pub fn checks(&self) -> Option<RowChecks> {
        let r = self.report.as_ref()?;
        let p = &r.partner;
        Some(RowChecks {
            log_bound: p.log_bound_holds() && p.eps_prime_below_nine_eps(),
            angle_bound: r.angle_bound_holds,
            closeness: p.closeness_verified && r.eps_prime_within,
            shorter: r.period_shorter,
            legacy: legacy_bound_compare(r, r.t1).is_ok_and(|c| c.new_dominates()),
        })
    }

    pub fn passed(&self) -> bool {
        self.checks().is_some_and(|c| c.all())
    }

    pub fn summary_line(&self) -> String {
        let head = format!(
            "{} tau={:.6} L={:.6} phi={:.6}",
            self.word, self.tau, self.loop_length, self.phi
        );
        match (self.checks(), &self.error) {
            (Some(c), _) => format!(
                "{head}: log-bound {} angle-bound {} closeness {} shorter {}",
                pass(c.log_bound),
                pass(c.angle_bound),
                pass(c.closeness),
                pass(c.shorter)
            ),
            (None, Some(e)) => format!("{head}: ERROR {e}"),
            (None, None) => format!("{head}: ERROR"),
        }
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn partner_csv(rows: &[PartnerRow]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(CSV_COLUMNS).expect("in-memory write");
    for row in rows {
        let mut fields = vec![
            row.word.clone(),
            num(row.period),
            num(row.tau),
            num(row.loop_length),
            num(row.theta),
            num(row.phi),
        ];
        match &row.report {
            Some(r) => {
                let p = &r.partner;
                fields.extend(
                    [
                        p.u,
                        p.s,
                        p.u_prime,
                        p.s_prime,
                        p.period_partner,
                        p.action_diff,
                        p.log_bound_lhs,
                        p.log_bound_rhs,
                        r.angle_bound_lhs,
                        r.angle_bound_rhs,
                        p.eps_prime,
                    ]
                    .map(num),
                );
                fields.push(p.closeness_verified.to_string());
                fields.push(p.trichotomy.as_str().to_string());
                fields.push(String::new());
            }
            None => {
                fields.extend(std::iter::repeat_n(String::new(), 13));
                fields.push(row.error.clone().unwrap_or_default());
            }
        }
        w.write_record(&fields).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8 fields")
}

pub fn partner_json(rows: &[PartnerRow]) -> String {
    let mut s = serde_json::to_string_pretty(rows).expect("partner rows serialize");
    s.push('\n');
    s
}

/// Runs the small-angle partner pipeline on every crossing with
/// `φ < 1/3` of every geodesic. Failures become rows with `error` set.
pub fn partner_batch(
    atlas: &[ClosedGeodesic],
    crossings: &[Result<Vec<Crossing>, String>],
    metric: &QuotientMetric,
    dt: f64,
) -> Vec<PartnerRow> {
    let group = metric.group();
    let mut jobs = Vec::new();
    for (geo, cs) in atlas.iter().zip(crossings) {
        match cs {
            Ok(cs) => jobs.extend(
                cs.iter()
                    .filter(|c| c.phi < SMALL_ANGLE)
                    .map(|c| (geo, Some(c), None)),
            ),
            Err(e) => jobs.push((geo, None, Some(e.clone()))),
        }
    }
    jobs.par_iter()
        .map(|(geo, c, err)| {
            let word = group.format_word(&geo.word);
            let Some(c) = c else {
                return PartnerRow {
                    word,
                    period: geo.period,
                    tau: f64::NAN,
                    loop_length: f64::NAN,
                    theta: f64::NAN,
                    phi: f64::NAN,
                    report: None,
                    error: err.clone(),
                };
            };
            let (report, error) = match small_angle_pipeline(geo, c, metric, dt) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            PartnerRow {
                word,
                period: geo.period,
                tau: c.tau,
                loop_length: c.loop_length,
                theta: c.theta,
                phi: c.phi,
                report,
                error,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atlas::{closed_geodesics_up_to, SMALL_ANGLE_WORDS};

    #[test]
    fn atlas_json_fields() {
        let g = FuchsianGroup::bolza();
        let atlas = closed_geodesics_up_to(&g, 4.0, 1).unwrap();
        let cs = atlas_crossings(&g, &atlas);
        let entries: Vec<_> = atlas
            .iter()
            .zip(&cs)
            .map(|(geo, c)| AtlasEntry::new(&g, geo, c.as_ref().unwrap()))
            .collect();
        let s = atlas_json(&entries);
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v.as_array().unwrap().len(), 4);
        let first = s.find("\"word\"").unwrap();
        assert!(
            first < s.find("\"trace\"").unwrap()
                && s.find("\"trace\"").unwrap() < s.find("\"period\"").unwrap()
        );
        let back: Vec<AtlasEntry> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, entries);
    }

    #[test]
    fn empty_batch_has_header_only() {
        let csv = partner_csv(&[]);
        assert_eq!(csv, format!("{}\n", CSV_COLUMNS.join(",")));
    }

    #[test]
    fn fixture_rows_match_small_crossings() {
        let g = FuchsianGroup::bolza();
        let metric = QuotientMetric::new(&g, 4);
        let atlas: Vec<_> = SMALL_ANGLE_WORDS[..2]
            .iter()
            .map(|w| ClosedGeodesic::from_word(&g, g.parse_word(w).unwrap()).unwrap())
            .collect();
        let cs = atlas_crossings(&g, &atlas);
        let expected: usize = cs
            .iter()
            .map(|c| {
                c.as_ref()
                    .unwrap()
                    .iter()
                    .filter(|c| c.phi < SMALL_ANGLE)
                    .count()
            })
            .sum();
        let rows = partner_batch(&atlas, &cs, &metric, 0.05);
        assert_eq!(rows.len(), expected);
        let csv = partner_csv(&rows);
        assert_eq!(csv.lines().count(), expected + 1);
        for line in csv.lines() {
            assert_eq!(line.split(',').count(), CSV_COLUMNS.len());
        }
        assert!(!csv.contains('\r'));
        // round-trips doubles
        let f: f64 = csv
            .lines()
            .nth(1)
            .unwrap()
            .split(',')
            .nth(1)
            .unwrap()
            .parse()
            .unwrap();
        assert_eq!(f, rows[0].period);
    }
}
