//! Poincaré sections, time reversal, antiparallel 2-encounters, shadowing
//! and the ε-orbit-pair test.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::atlas::{ClosedGeodesic, DomainNeighbors};
use crate::fuchsian::{FuchsianGroup, GroupError, QuotientMetric, QuotientPoint, Word};
use crate::moebius::{cosh_distance, d_pi, flow, local_distance, nsa_decompose, Mat2, PslElement};

/// Encounters closer than this in both times are the same encounter.
const ENCOUNTER_DEDUPE_TOL: f64 = 1e-6;
pub const DEFAULT_SAMPLING_STEP: f64 = 0.05;

#[derive(Debug, Error)]
pub enum EncounterError {
    #[error("ε = {0} outside (0, 1/4]")]
    BadEpsilon(f64),
    #[error("sampling step must be positive, got {0}")]
    BadStep(f64),
    #[error(transparent)]
    Group(#[from] GroupError),
}

/// `y = ρ·x·c_u b_s a_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionCoords {
    pub u: f64,
    pub s: f64,
    pub t: f64,
}

impl SectionCoords {
    pub fn in_section(&self, eps: f64, t_tol: f64) -> bool {
        self.u.abs() < eps && self.s.abs() < eps && self.t.abs() <= t_tol
    }
}

/// `T(φ_{partner_time} x) = σ · φ_{base_time} x · c_u b_s` along one orbit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EncounterReport {
    pub base_time: f64,
    pub partner_time: f64,
    pub coords: SectionCoords,
    pub reversed: bool,
    pub witness: PslElement,
    pub witness_word: Word,
}

impl EncounterReport {
    /// Flow time from the base point to the partner point.
    pub fn gap(&self, period: f64) -> f64 {
        (self.partner_time - self.base_time).rem_euclid(period)
    }

    /// Angle of the configuration-space crossing this encounter comes
    /// from, when `us < 0`.
    pub fn crossing_angle(&self) -> Option<f64> {
        let p = self.coords.u * self.coords.s;
        (p < 0.0 && p > -1.0).then(|| 2.0 * (-p).sqrt().asin())
    }
}

/// `T(x) = Γ g d_π`.
pub fn time_reversal(x: &QuotientPoint) -> QuotientPoint {
    QuotientPoint::new(x.frame * d_pi())
}

pub fn flow_point(x: &QuotientPoint, t: f64) -> QuotientPoint {
    QuotientPoint::new(x.frame * flow(t))
}

/// Tolerance on the flow coordinate for section membership.
pub fn section_tolerance(period: f64) -> f64 {
    1e-9 * (1.0 + period)
}

/// Section coordinates of `y` relative to `x`, searching the group ball of
/// radius `n` and growing it while the best element sits on its boundary.
pub fn section_coords(
    group: &FuchsianGroup,
    x: &QuotientPoint,
    y: &QuotientPoint,
    eps: f64,
    n: usize,
    t_tol: f64,
) -> Result<Option<SectionCoords>, EncounterError> {
    check_eps(eps)?;
    let mut radius = n.max(1);
    loop {
        let metric = QuotientMetric::new(group, radius);
        let hit = metric.section_search(&x.frame, &y.frame, eps, t_tol)?;
        match hit {
            Some(h) if h.window_length >= radius && radius < 8 => radius += 1,
            other => {
                return Ok(other.map(|h| SectionCoords {
                    u: h.coords.u,
                    s: h.coords.s,
                    t: h.coords.t,
                }))
            }
        }
    }
}

fn check_eps(eps: f64) -> Result<(), EncounterError> {
    if !(eps > 0.0 && eps <= 0.25) {
        return Err(EncounterError::BadEpsilon(eps));
    }
    Ok(())
}

/// Orbit sampled on a uniform grid, each frame moved into the domain.
struct Samples {
    times: Vec<f64>,
    /// `V_i g a_{t_i}` with base point in the domain.
    frames: Vec<PslElement>,
    words: Vec<Word>,
    points: Vec<Complex64>,
    radii: Vec<f64>,
}

impl Samples {
    fn new(
        group: &FuchsianGroup,
        frame: &PslElement,
        period: f64,
        dt: f64,
    ) -> Result<Self, GroupError> {
        let n = ((period / dt).ceil() as usize).max(8);
        let step = period / n as f64;
        let times: Vec<f64> = (0..n).map(|i| i as f64 * step).collect();
        let reduced: Vec<(PslElement, Word)> = times
            .par_iter()
            .map(|&t| group.reduce_frame(&(*frame * flow(t))))
            .collect::<Result<_, _>>()?;
        let i = Complex64::i();
        let points: Vec<Complex64> = reduced.iter().map(|(f, _)| f.base_point()).collect();
        let radii = points
            .iter()
            .map(|&z| cosh_distance(z, i).max(1.0).acosh())
            .collect();
        let (frames, words) = reduced.into_iter().unzip();
        Ok(Samples {
            times,
            frames,
            words,
            points,
            radii,
        })
    }

    fn max_radius(&self) -> f64 {
        self.radii.iter().copied().fold(0.0, f64::max)
    }
}

/// All `(i, j, ρ)` with `d(ρ·z_j, z_i) < d_cut`, in deterministic order.
fn close_pairs<'t>(
    a: &Samples,
    b: &Samples,
    tiles: &[(&'t Word, &'t PslElement)],
    tile_disp: &[f64],
    d_cut: f64,
) -> Vec<(usize, usize, &'t Word, &'t PslElement)> {
    let ra = a.max_radius();
    let cosh_cut = d_cut.cosh();
    let i = Complex64::i();
    (0..b.points.len())
        .into_par_iter()
        .map(|j| {
            let mut out = Vec::new();
            let lim = ra + b.radii[j] + d_cut;
            for (k, &(w, rho)) in tiles.iter().enumerate() {
                if tile_disp[k] > lim {
                    break;
                }
                let z = rho.act(b.points[j]);
                if cosh_distance(z, i).max(1.0).acosh() > ra + d_cut {
                    continue;
                }
                for (ia, &za) in a.points.iter().enumerate() {
                    if cosh_distance(z, za) < cosh_cut {
                        out.push((ia, j, w, rho));
                    }
                }
            }
            out
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// Antiparallel 2-encounters of a closed geodesic with `|u|, |s| < ε`.
///
/// Candidate pairs come from a sampled scan; each hit is moved onto the
/// section (`t = 0`) and then slid along the orbit to the balanced point
/// `|u| = |s|`, which is where `a_{−δ} c_u b_s a_δ = c_{u e^δ} b_{s e^{−δ}}`
/// makes the two coordinates equal.
pub fn detect_2antiparallel(
    geo: &ClosedGeodesic,
    group: &FuchsianGroup,
    eps: f64,
    dt: f64,
) -> Result<Vec<EncounterReport>, EncounterError> {
    detect_2antiparallel_with(geo, group, eps, dt, &DomainNeighbors::new(group))
}

pub fn detect_2antiparallel_with(
    geo: &ClosedGeodesic,
    group: &FuchsianGroup,
    eps: f64,
    dt: f64,
    neighbors: &DomainNeighbors,
) -> Result<Vec<EncounterReport>, EncounterError> {
    check_eps(eps)?;
    if !(dt > 0.0) {
        return Err(EncounterError::BadStep(dt));
    }
    let period = geo.period;
    let samples = Samples::new(group, &geo.frame, period, dt)?;
    let step = period / samples.times.len() as f64;
    let d_cut = 2.0 * eps + step;
    let reach = 2.0 * samples.max_radius() + d_cut;
    let tile_list: Vec<(&Word, &PslElement)> =
        neighbors.within(reach).map(|t| (&t.1, &t.2)).collect();
    let tile_disp: Vec<f64> = neighbors.within(reach).map(|t| t.0).collect();
    let pairs = close_pairs(&samples, &samples, &tile_list, &tile_disp, d_cut);

    let dpi = d_pi();
    let mut found: Vec<EncounterReport> = Vec::new();
    for (i, j, w, rho) in pairs {
        let x = samples.frames[i];
        let y = samples.frames[j] * dpi;
        let m = x.inverse() * rho.inverse() * y;
        let Ok(nsa) = nsa_decompose(&m) else { continue };
        if nsa.t.abs() > 2.0 * step + eps {
            continue;
        }
        // onto the section, then balance
        let tj = samples.times[j] + nsa.t;
        let delta = if nsa.u != 0.0 && nsa.s != 0.0 {
            0.5 * (nsa.s.abs() / nsa.u.abs()).ln()
        } else {
            0.0
        };
        let u = nsa.u * delta.exp();
        let s = nsa.s * (-delta).exp();
        if !(u.abs() < eps && s.abs() < eps) {
            continue;
        }
        let base_raw = samples.times[i] + delta;
        let partner_raw = tj - delta;
        let base = base_raw.rem_euclid(period);
        let partner = partner_raw.rem_euclid(period);
        if gap_close(base, partner, period) {
            continue;
        }
        // T(g a_tj) = σ g a_ti c_u b_s with σ = V_j⁻¹ ρ V_i, then both
        // times wrapped into [0, T) using g a_{t+nT} = γⁿ g a_t
        let m = ((base_raw - base) / period).round() as i64;
        let n = ((partner_raw - partner) / period).round() as i64;
        let vj_inv = group.inverse_word(&samples.words[j]);
        let word = group.concat(&[
            &power(group, &geo.word, -n),
            &vj_inv,
            w,
            &samples.words[i],
            &power(group, &geo.word, m),
        ]);
        let witness = group.evaluate(&word)?;
        let mut rep = EncounterReport {
            base_time: base,
            partner_time: partner,
            coords: SectionCoords { u, s, t: 0.0 },
            reversed: true,
            witness,
            witness_word: word,
        };
        if base > partner {
            rep = swap_roles(group, &rep);
        }
        let dup = found.iter().any(|f| {
            gap_close(f.base_time, rep.base_time, period)
                && gap_close(f.partner_time, rep.partner_time, period)
        });
        if !dup {
            found.push(rep);
        }
    }
    found.sort_by(|a, b| {
        a.base_time
            .total_cmp(&b.base_time)
            .then_with(|| a.partner_time.total_cmp(&b.partner_time))
    });
    Ok(found)
}

fn power(group: &FuchsianGroup, w: &Word, n: i64) -> Word {
    let base = if n < 0 {
        group.inverse_word(w)
    } else {
        w.clone()
    };
    let parts: Vec<&Word> = (0..n.unsigned_abs()).map(|_| &base).collect();
    group.concat(&parts)
}

fn gap_close(a: f64, b: f64, period: f64) -> bool {
    let d = (a - b).rem_euclid(period);
    d < ENCOUNTER_DEDUPE_TOL || period - d < ENCOUNTER_DEDUPE_TOL
}

/// The same encounter seen from the other passage:
/// `T(x) = σ⁻¹ · y · c_s b_u` when `T(y) = σ · x · c_u b_s`.
fn swap_roles(group: &FuchsianGroup, rep: &EncounterReport) -> EncounterReport {
    EncounterReport {
        base_time: rep.partner_time,
        partner_time: rep.base_time,
        coords: SectionCoords {
            u: rep.coords.s,
            s: rep.coords.u,
            t: 0.0,
        },
        reversed: true,
        witness: rep.witness.inverse(),
        witness_word: group.inverse_word(&rep.witness_word),
    }
}

/// Residual of the encounter relation `T(g a_{t_j}) = σ g a_{t_i} c_u b_s`.
pub fn encounter_residual(geo: &ClosedGeodesic, enc: &EncounterReport) -> f64 {
    let lhs = geo.frame_at(enc.partner_time) * d_pi();
    let rhs = enc.witness
        * geo.frame_at(enc.base_time)
        * crate::moebius::unstable(enc.coords.u)
        * crate::moebius::stable(enc.coords.s);
    local_distance(&lhs, &rhs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShadowingOutcome {
    pub passed: bool,
    pub max_ratio: f64,
}

/// Checks `d(φ_t x₁, φ_t x) < ε e^{−t}` on the grid points `t ≥ 0` and
/// `d(φ_t x₂, φ_t x) < ε e^{t}` on the grid points `t ≤ 0`.
pub fn shadowing_check(
    x1: &PslElement,
    x2: &PslElement,
    x: &PslElement,
    eps: f64,
    grid: &[f64],
) -> ShadowingOutcome {
    let mut max_ratio: f64 = 0.0;
    for &t in grid {
        let a = flow(t);
        let (other, bound) = if t >= 0.0 {
            (x1, eps * (-t).exp())
        } else {
            (x2, eps * t.exp())
        };
        let d = local_distance(&(*other * a), &(*x * a));
        max_ratio = max_ratio.max(d / bound);
    }
    ShadowingOutcome {
        passed: max_ratio < 1.0,
        max_ratio,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StretchKind {
    /// `c(P_j + t) ~ c′(Q_j + t)`.
    Parallel,
    /// `c(P_j + t) ~ T(c′(Q_{j+1} − t))`.
    Reversed,
}

/// An `L = 2` decomposition witnessing an ε-orbit pair. Stretch `j` of `c`
/// is `[c_cuts[j], c_cuts[j+1]]` (the second one wraps by `T`) and is
/// matched with stretch `j` of `c′`, `[c_prime_cuts[j], c_prime_cuts[j+1]]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairDecomposition {
    pub c_cuts: [f64; 2],
    pub c_prime_cuts: [f64; 2],
    pub kinds: [StretchKind; 2],
    pub permutation: [usize; 2],
    /// Largest sampled quotient distance along the two stretches.
    pub max_distance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrbitPairOutcome {
    pub verified: bool,
    pub decomposition: Option<PairDecomposition>,
}

/// A fixed lift relating a time interval of `c` to `c′`.
#[derive(Debug, Clone, Copy)]
struct StretchMatch {
    kind: StretchKind,
    /// Parallel: `c′` time is `t + offset`. Reversed: `c′` time is `offset − t`.
    offset: f64,
    lo: f64,
    hi: f64,
}

impl StretchMatch {
    fn shifted(&self, n: i64, period: f64) -> StretchMatch {
        let d = n as f64 * period;
        StretchMatch {
            kind: self.kind,
            offset: match self.kind {
                StretchKind::Parallel => self.offset - d,
                StretchKind::Reversed => self.offset + d,
            },
            lo: self.lo + d,
            hi: self.hi + d,
        }
    }

    /// `c′` time matched with `c` time `t`.
    fn partner_time(&self, t: f64) -> f64 {
        match self.kind {
            StretchKind::Parallel => t + self.offset,
            StretchKind::Reversed => self.offset - t,
        }
    }
}

/// `{x : ‖a_{−x} N a_x ∓ 1‖ < ε}`, an interval because the squared
/// distance is `A + n₁₂² e^{−2x} + n₂₁² e^{2x}`.
fn closeness_interval(n: &Mat2, eps: f64, cap: f64) -> Option<(f64, f64)> {
    let plus = (n.a - 1.0).powi(2) + (n.d - 1.0).powi(2);
    let minus = (n.a + 1.0).powi(2) + (n.d + 1.0).powi(2);
    let a = plus.min(minus);
    let (p, q) = (n.c * n.c, n.b * n.b);
    let r = eps * eps - a;
    if r <= 0.0 {
        return None;
    }
    // p X² − r X + q < 0 with X = e^{2x}
    let (lo, hi) = if p == 0.0 && q == 0.0 {
        (-cap, cap)
    } else if p == 0.0 {
        (0.5 * (q / r).ln(), cap)
    } else if q == 0.0 {
        (-cap, 0.5 * (r / p).ln())
    } else {
        let disc = r * r - 4.0 * p * q;
        if disc <= 0.0 {
            return None;
        }
        let big = 0.5 * (r + disc.sqrt());
        // roots big/p and q/big
        (0.5 * (q / big).ln(), 0.5 * (big / p).ln())
    };
    Some((lo.max(-cap), hi.min(cap)))
}

/// Searches for an `L = 2` decomposition making `c` and `c′` an ε-orbit
/// pair. Candidate lifts come from a sampled scan at step `dt`; for a fixed
/// lift the closeness set is an exact interval, so the split search is
/// interval arithmetic. The decomposition found is re-checked by sampling
/// the quotient distance at step `dt`.
pub fn orbit_pair_verify(
    c: &ClosedGeodesic,
    c_prime: &ClosedGeodesic,
    metric: &QuotientMetric,
    eps: f64,
    dt: f64,
) -> Result<OrbitPairOutcome, EncounterError> {
    if !(dt > 0.0) {
        return Err(EncounterError::BadStep(dt));
    }
    let group = metric.group();
    let (t, tp) = (c.period, c_prime.period);
    let a = Samples::new(group, &c.frame, t, dt)?;
    let b = Samples::new(group, &c_prime.frame, tp, dt)?;
    let step = t / a.times.len() as f64;
    let step_p = tp / b.times.len() as f64;
    // ‖M ∓ 1‖ < ε forces cosh d(M i, i) < (ε + √2)² / 2
    let d_cut = ((eps + std::f64::consts::SQRT_2).powi(2) / 2.0)
        .max(1.0)
        .acosh()
        + step
        + step_p;
    let reach = a.max_radius() + b.max_radius() + d_cut;
    let tiles: Vec<(&Word, &PslElement)> = metric.window_within(reach).collect();
    let tile_disp: Vec<f64> = tiles
        .iter()
        .map(|(_, g)| (0.5 * g.rep().frobenius_sq()).max(1.0).acosh())
        .collect();
    let pairs = close_pairs(&a, &b, &tiles, &tile_disp, d_cut);

    let cap = 3.0 * (t + tp);
    let dpi = d_pi();
    let mut matches: Vec<StretchMatch> = Vec::new();
    for (i, j, _, rho) in pairs {
        let x = a.frames[i];
        let base = x.inverse() * rho.inverse() * b.frames[j];
        for kind in [StretchKind::Parallel, StretchKind::Reversed] {
            let n = match kind {
                StretchKind::Parallel => base,
                StretchKind::Reversed => base * dpi,
            };
            let Ok(nsa) = nsa_decompose(&n) else { continue };
            let refined = (n * flow(-nsa.t)).rep();
            let Some((lo, hi)) = closeness_interval(&refined, eps, cap) else {
                continue;
            };
            let ti = a.times[i];
            let offset = match kind {
                StretchKind::Parallel => b.times[j] - nsa.t - ti,
                StretchKind::Reversed => b.times[j] + nsa.t + ti,
            };
            let m = StretchMatch {
                kind,
                offset,
                lo: ti + lo,
                hi: ti + hi,
            };
            let centre = 0.5 * (m.lo + m.hi);
            let m = m.shifted(-(centre / t).floor() as i64, t);
            let dup = matches.iter().any(|o| {
                o.kind == m.kind
                    && circ_close(o.offset, m.offset, tp, 1e-6)
                    && o.lo < m.hi
                    && m.lo < o.hi
            });
            if !dup {
                matches.push(m);
            }
        }
    }

    // longest intervals first so the first feasible split is a robust one
    matches.sort_by(|x, y| (y.hi - y.lo).total_cmp(&(x.hi - x.lo)));
    for ma in &matches {
        for mb in &matches {
            for n in -2..=3 {
                let mb = mb.shifted(n, t);
                let Some(dec) = split_for(ma, &mb, t, tp) else {
                    continue;
                };
                let max_distance = sampled_pair_distance(c, c_prime, metric, &dec, dt)?;
                if max_distance < eps {
                    return Ok(OrbitPairOutcome {
                        verified: true,
                        decomposition: Some(PairDecomposition {
                            max_distance,
                            ..dec
                        }),
                    });
                }
            }
        }
    }
    Ok(OrbitPairOutcome {
        verified: false,
        decomposition: None,
    })
}

fn circ_close(a: f64, b: f64, period: f64, tol: f64) -> bool {
    let d = (a - b).rem_euclid(period);
    d < tol || period - d < tol
}

fn intersect(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0.max(b.0), a.1.min(b.1))
}

/// Finds `P₀ < P₁ < P₀ + T` with `[P₀, P₁] ⊂ I_A`, `[P₁, P₀+T] ⊂ I_B` and
/// `c′` cut points consistent with both lifts.
fn split_for(ma: &StretchMatch, mb: &StretchMatch, t: f64, tp: f64) -> Option<PairDecomposition> {
    // stay clear of the interval ends
    let margin = 1e-9 * (1.0 + t);
    let ia = (ma.lo + margin, ma.hi - margin);
    let ib = (mb.lo + margin, mb.hi - margin);
    let junction = intersect(ia, ib);
    let start = intersect(ia, (ib.0 - t, ib.1 - t));
    if start.0 >= start.1 || junction.0 >= junction.1 {
        return None;
    }
    use StretchKind::*;
    let (p0, p1) = match (ma.kind, mb.kind) {
        (Parallel, Parallel) | (Reversed, Reversed) => {
            let p0 = 0.5 * (start.0 + start.1);
            let range = intersect(junction, (p0, p0 + t));
            if range.0 >= range.1 {
                return None;
            }
            // both cut points of c′ must differ
            let clash = |p1: f64| {
                let (alpha, beta) = cut_points(ma, mb, p0, p1, tp);
                circ_close(alpha, beta, tp, 1e-6)
            };
            let mut p1 = 0.5 * (range.0 + range.1);
            if clash(p1) {
                p1 = range.0 + 0.25 * (range.1 - range.0);
                if clash(p1) {
                    return None;
                }
            }
            (p0, p1)
        }
        _ => {
            // P₁ ≡ C − P₀ (mod T′); C from the shared c′ cut point
            let c0 = match ma.kind {
                Parallel => mb.offset - ma.offset,
                Reversed => ma.offset - mb.offset,
            };
            let span = (start.1 - start.0).min(4.0 * t);
            let j_lo = ((2.0 * start.0 - c0) / tp).floor() as i64 - 1;
            let j_hi = ((2.0 * (start.0 + span) + t - c0) / tp).ceil() as i64 + 1;
            let mut pick = None;
            for jj in j_lo..=j_hi {
                let cc = c0 + jj as f64 * tp;
                // P₀ ∈ start, C − P₀ ∈ junction, 0 < C − 2P₀ < T
                let mut r = start;
                r = intersect(r, (cc - junction.1, cc - junction.0));
                r = intersect(r, (0.5 * (cc - t), 0.5 * cc));
                if r.0 < r.1 {
                    let p0 = 0.5 * (r.0 + r.1);
                    pick = Some((p0, cc - p0));
                    break;
                }
            }
            pick?
        }
    };
    let (alpha, beta) = cut_points(ma, mb, p0, p1, tp);
    let p0n = p0.rem_euclid(t);
    Some(PairDecomposition {
        c_cuts: [p0n, p0n + (p1 - p0)],
        c_prime_cuts: [alpha.rem_euclid(tp), beta.rem_euclid(tp)],
        kinds: [ma.kind, mb.kind],
        permutation: [0, 1],
        max_distance: f64::NAN,
    })
}

/// Cut points `(α, β)` of `c′`: its stretch 0 is `[α, β]`, stretch 1 is
/// `[β, α + T′]`.
fn cut_points(ma: &StretchMatch, mb: &StretchMatch, p0: f64, p1: f64, tp: f64) -> (f64, f64) {
    use StretchKind::*;
    let len0 = p1 - p0;
    match (ma.kind, mb.kind) {
        (Parallel, Parallel) => (ma.partner_time(p0), mb.partner_time(p1)),
        (Reversed, Reversed) => (mb.partner_time(p1), ma.partner_time(p0)),
        (Parallel, Reversed) => {
            let alpha = ma.partner_time(p0);
            let beta = alpha + len0;
            if circ_close(alpha, beta, tp, 1e-6) {
                (alpha, alpha + 0.5 * tp)
            } else {
                (alpha, beta)
            }
        }
        (Reversed, Parallel) => {
            let beta = ma.partner_time(p0);
            let alpha = beta - len0;
            if circ_close(alpha, beta, tp, 1e-6) {
                (beta - 0.5 * tp, beta)
            } else {
                (alpha, beta)
            }
        }
    }
}

/// Largest quotient distance along both stretches, sampled at step `dt`.
fn sampled_pair_distance(
    c: &ClosedGeodesic,
    c_prime: &ClosedGeodesic,
    metric: &QuotientMetric,
    dec: &PairDecomposition,
    dt: f64,
) -> Result<f64, EncounterError> {
    let t = c.period;
    let [p0, p1] = dec.c_cuts;
    let [alpha, beta] = dec.c_prime_cuts;
    let stretches = [
        (p0, p1, dec.kinds[0], alpha, beta),
        (p1, p0 + t, dec.kinds[1], beta, alpha + c_prime.period),
    ];
    let mut points = Vec::new();
    for (start, end, kind, q_start, q_end) in stretches {
        let len = end - start;
        let n = ((len / dt).ceil() as usize).max(1);
        for k in 0..=n {
            let s = len * k as f64 / n as f64;
            let tp = c_prime.period;
            let x = c.frame_at((start + s).rem_euclid(t));
            let y = match kind {
                StretchKind::Parallel => c_prime.frame_at((q_start + s).rem_euclid(tp)),
                StretchKind::Reversed => c_prime.frame_at((q_end - s).rem_euclid(tp)) * d_pi(),
            };
            points.push((x, y));
        }
    }
    let dists: Vec<f64> = points
        .par_iter()
        .map(|(x, y)| metric.nearest(x, y).map(|n| n.distance))
        .collect::<Result<_, _>>()?;
    Ok(dists.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atlas::{closed_geodesics_up_to, detect_self_crossings};

    use crate::fuchsian::quotient_distance;
    use crate::moebius::{rotation, stable, unstable};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bolza() -> FuchsianGroup {
        FuchsianGroup::bolza()
    }

    fn random_frame(rng: &mut ChaCha8Rng) -> PslElement {
        let z = Complex64::new(rng.gen_range(-0.5..0.5), rng.gen_range(0.6..1.6));
        let th: f64 = rng.gen_range(-3.0..3.0);
        PslElement::new(z.im.sqrt(), z.re / z.im.sqrt(), 0.0, 1.0 / z.im.sqrt()).unwrap()
            * rotation(th)
    }

    #[test]
    fn reversal_is_an_involution_and_commutes_with_flow() {
        let g = bolza();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let x = QuotientPoint::new(random_frame(&mut rng));
            let back = time_reversal(&time_reversal(&x));
            assert!(quotient_distance(&g, &x, &back, 2).unwrap() < 1e-10);
            let t: f64 = rng.gen_range(-2.0..2.0);
            let lhs = flow_point(&time_reversal(&x), t);
            let rhs = time_reversal(&flow_point(&x, -t));
            assert!(quotient_distance(&g, &lhs, &rhs, 2).unwrap() < 1e-10);
            assert!((time_reversal(&x).base() - x.base()).norm() < 1e-12);
        }
    }

    #[test]
    fn section_coords_examples() {
        let g = bolza();
        let x = QuotientPoint::new(PslElement::IDENTITY);
        let y = QuotientPoint::new(unstable(0.01) * stable(0.02));
        let c = section_coords(&g, &x, &y, 0.25, 2, 1e-9).unwrap().unwrap();
        assert_abs_diff_eq!(c.u, 0.01, epsilon = 1e-12);
        assert_abs_diff_eq!(c.s, 0.02, epsilon = 1e-12);
        assert_abs_diff_eq!(c.t, 0.0, epsilon = 1e-12);
        let moved = QuotientPoint::new(g.generator(3) * y.frame);
        let c2 = section_coords(&g, &x, &moved, 0.25, 2, 1e-9)
            .unwrap()
            .unwrap();
        assert_abs_diff_eq!(c2.u, 0.01, epsilon = 1e-10);
        assert_abs_diff_eq!(c2.s, 0.02, epsilon = 1e-10);
        let far = QuotientPoint::new(flow(0.9) * rotation(1.0));
        assert!(section_coords(&g, &x, &far, 0.1, 2, 1e-9)
            .unwrap()
            .is_none());
        assert!(section_coords(&g, &x, &y, 0.3, 2, 1e-9).is_err());
    }

    #[test]
    fn shadowing_examples() {
        let x = PslElement::IDENTITY * rotation(0.3);
        let grid: Vec<f64> = (0..=10).map(|k| k as f64).collect();
        let x1 = x * stable(-0.1);
        let x2 = x * unstable(-0.1);
        let fwd = shadowing_check(&x1, &x2, &x, 0.2, &grid);
        assert!(fwd.passed);
        assert_abs_diff_eq!(fwd.max_ratio, 0.5, epsilon = 1e-12);
        let back: Vec<f64> = grid.iter().map(|t| -t).collect();
        assert!(shadowing_check(&x1, &x2, &x, 0.2, &back).passed);
        let same = shadowing_check(&x, &x2, &x, 0.2, &grid);
        assert!(same.max_ratio < 1e-9);
    }

    #[test]
    fn systole_has_no_small_encounters() {
        let g = bolza();
        let geo = ClosedGeodesic::from_word(&g, Word(vec![0])).unwrap();
        assert!(detect_2antiparallel(&geo, &g, 0.05, 0.05)
            .unwrap()
            .is_empty());
    }

    fn long_fixtures(g: &FuchsianGroup) -> Vec<ClosedGeodesic> {
        crate::atlas::SMALL_ANGLE_WORDS
            .iter()
            .map(|w| ClosedGeodesic::from_word(g, g.parse_word(w).unwrap()).unwrap())
            .collect()
    }

    #[test]
    fn encounters_satisfy_their_relation() {
        let g = bolza();
        let nb = DomainNeighbors::new(&g);
        let mut seen = 0;
        for geo in long_fixtures(&g) {
            for e in detect_2antiparallel_with(&geo, &g, 0.25, 0.05, &nb).unwrap() {
                seen += 1;
                assert!(encounter_residual(&geo, &e) < 1e-7);
                assert!(e.base_time < e.partner_time);
                assert_abs_diff_eq!(e.coords.u.abs(), e.coords.s.abs(), epsilon = 1e-9);
            }
        }
        assert!(seen > 0);
    }

    #[test]
    fn crossings_and_encounters_agree() {
        let g = bolza();
        let nb = DomainNeighbors::new(&g);
        for geo in long_fixtures(&g) {
            let crossings = detect_self_crossings(&geo, &g).unwrap();
            let small: Vec<_> = crossings.iter().filter(|c| c.phi < 1.0 / 3.0).collect();
            assert!(!small.is_empty());
            let matches = |c: &crate::atlas::Crossing, e: &EncounterReport| {
                e.crossing_angle()
                    .is_some_and(|phi| (phi - c.phi).abs() < 1e-7)
                    && circ_close(c.tau, e.base_time, geo.period, 0.1)
                    && circ_close(c.tau + c.loop_length, e.partner_time, geo.period, 0.1)
            };
            for c in &small {
                let eps = 1.25 * (0.5 * c.phi).sin();
                let enc = detect_2antiparallel_with(&geo, &g, eps, 0.05, &nb).unwrap();
                assert!(enc.iter().any(|e| matches(c, e)), "{:?}", geo.word);
            }
            for e in detect_2antiparallel_with(&geo, &g, 0.25, 0.05, &nb).unwrap() {
                if e.crossing_angle().is_some_and(|phi| phi < 1.0 / 3.0) {
                    assert!(small.iter().any(|c| matches(c, &e)), "{e:?}");
                }
            }
        }
    }

    #[test]
    fn orbit_pairs_identity_and_unrelated() {
        let g = bolza();
        let metric = QuotientMetric::new(&g, 4);
        let atlas = closed_geodesics_up_to(&g, 6.0, 4).unwrap();
        let c = atlas.last().unwrap();
        let same = orbit_pair_verify(c, c, &metric, 0.05, 0.05).unwrap();
        assert!(same.verified);
        let d = same.decomposition.unwrap();
        assert!(d.max_distance < 1e-8);
        let other = &atlas[atlas.len() / 2];
        assert!(
            !orbit_pair_verify(c, other, &metric, 0.05, 0.05)
                .unwrap()
                .verified
        );
        // a reversed copy is a pair of its own kind
        let rev = c.reversed(&g);
        assert!(
            orbit_pair_verify(c, &rev, &metric, 0.05, 0.05)
                .unwrap()
                .verified
        );
    }

    #[test]
    fn closeness_interval_matches_direct_evaluation() {
        let n = (unstable(0.003) * stable(-0.02)).rep();
        let (lo, hi) = closeness_interval(&n, 0.1, 100.0).unwrap();
        for x in [lo + 1e-6, hi - 1e-6, 0.5 * (lo + hi)] {
            let m = flow(-x) * PslElement::from_mat(n) * flow(x);
            assert!(local_distance(&PslElement::IDENTITY, &m) < 0.1);
        }
        for x in [lo - 1e-3, hi + 1e-3] {
            let m = flow(-x) * PslElement::from_mat(n) * flow(x);
            assert!(local_distance(&PslElement::IDENTITY, &m) > 0.1);
        }
    }
}
