//! Closed geodesics as conjugacy classes, their traces in the fundamental
//! domain, and configuration-space self-crossings.

use std::collections::HashSet;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fuchsian::{FuchsianGroup, GroupError, Word};
use crate::moebius::{
    axis_frame, cosh_distance, flow, local_distance, rotation, translation_length, Mat2,
    MoebiusError, PslElement,
};

/// Bolza geodesics (periods 13.5 to 16) with crossings of angle
/// `φ = π − θ < 1/3`; no such crossing exists below period 13.
pub const SMALL_ANGLE_WORDS: [&str; 4] = ["acdCAc", "cdCdcDD", "adAdAbD", "abcBCBd"];

/// Crossings closer than this in both passage times are merged.
pub const CROSSING_DEDUPE_TOL: f64 = 1e-8;
/// Exit times closer than this are treated as a tie (vertex passage).
const VERTEX_TIE_TOL: f64 = 1e-9;
const MAX_UNFOLD_STEPS: usize = 100_000;

#[derive(Debug, Error)]
pub enum AtlasError {
    #[error("unfolding failed: {0}")]
    UnfoldFailure(String),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Moebius(#[from] MoebiusError),
}

/// A primitive closed geodesic: `γ g = g a_T`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClosedGeodesic {
    /// Cyclically canonical cutting sequence of the class.
    pub word: Word,
    pub element: PslElement,
    pub period: f64,
    pub frame: PslElement,
}

impl ClosedGeodesic {
    /// Builds the geodesic of the conjugacy class of `gamma`, normalising
    /// the word to the canonical cutting sequence of its axis.
    pub fn from_element(group: &FuchsianGroup, gamma: &PslElement) -> Result<Self, AtlasError> {
        let frame = axis_frame(gamma)?;
        let period = translation_length(gamma)?;
        let word = class_key(group, &frame, period, true)?;
        Self::from_word(group, word)
    }

    /// Geodesic of an explicit (not necessarily canonical) word.
    pub fn from_word(group: &FuchsianGroup, word: Word) -> Result<Self, AtlasError> {
        let element = group.evaluate(&word)?;
        let period = translation_length(&element)?;
        let frame = axis_frame(&element)?;
        Ok(ClosedGeodesic {
            word,
            element,
            period,
            frame,
        })
    }

    /// The same closed geodesic traversed backwards: `γ⁻¹` with frame `g d_π`.
    pub fn reversed(&self, group: &FuchsianGroup) -> ClosedGeodesic {
        ClosedGeodesic {
            word: group.inverse_word(&self.word),
            element: self.element.inverse(),
            period: self.period,
            frame: self.frame * crate::moebius::d_pi(),
        }
    }

    /// Same orbit, different starting frame on it.
    pub fn shifted(&self, t: f64) -> ClosedGeodesic {
        ClosedGeodesic {
            frame: self.frame * flow(t),
            ..self.clone()
        }
    }

    /// Frame at orbit time `t`.
    pub fn frame_at(&self, t: f64) -> PslElement {
        self.frame * flow(t)
    }

    pub fn trace(&self) -> f64 {
        self.element.abs_trace()
    }

    /// `‖g⁻¹γg − a_T‖` in the local chart.
    pub fn closure_residual(&self) -> f64 {
        local_distance(
            &(self.frame.inverse() * self.element * self.frame),
            &flow(self.period),
        )
    }
}

/// One arc of the orbit inside the closed fundamental domain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeodesicSegment {
    pub start: Complex64,
    pub end: Complex64,
    pub t_begin: f64,
    pub t_end: f64,
    /// `F` with the arc equal to `F·(e^t i)`, `t ∈ [t_begin, t_end]`.
    pub frame: PslElement,
    /// `V` with `F = V·g` for the geodesic's frame `g`.
    pub transport: Word,
}

impl GeodesicSegment {
    pub fn length(&self) -> f64 {
        self.t_end - self.t_begin
    }
}

/// Unfolded orbit: segments plus the sequence of sides crossed.
#[derive(Debug, Clone)]
pub struct Unfolding {
    pub segments: Vec<GeodesicSegment>,
    /// Side indices `k₁…k_m` with `γ` conjugate to `g_{k₁}⋯g_{k_m}`.
    pub cutting: Word,
    /// `‖F_last a_T − F_0‖`; small when the chain closes up.
    pub closure_residual: f64,
}

/// Follows the axis through copies of the Dirichlet domain centred at `i`.
///
/// The exit time through the side facing `g_k·i` solves
/// `cosh d(F a_t i, i) = cosh d(F a_t i, g_k i)`, which is
/// `(P₀−P_k) e^t + (Q₀−Q_k) e^{−t} = 0` with `P, Q` the squared column
/// norms of `F` and `g_k⁻¹F`.
pub fn unfold(
    group: &FuchsianGroup,
    frame: &PslElement,
    period: f64,
) -> Result<Unfolding, AtlasError> {
    unfold_curve(group, frame, period, 0.0)
}

/// Offset of the equidistant curves used for class keys.
const KEY_OFFSET: f64 = 1e-6;

/// Conjugacy key of the orbit through `frame`: the least canonical cutting
/// sequence of the two equidistant curves at distance `KEY_OFFSET`. Those
/// curves miss the vertices, so the key does not depend on how a vertex
/// passage of the orbit itself would be resolved.
fn class_key(
    group: &FuchsianGroup,
    frame: &PslElement,
    period: f64,
    oriented: bool,
) -> Result<Word, AtlasError> {
    let x = KEY_OFFSET.tanh();
    let mut best: Option<Word> = None;
    for side in [x, -x] {
        let cut = unfold_curve(group, frame, period, side)?.cutting;
        let w = if oriented {
            group.oriented_canonical(&cut)
        } else {
            group.cyclic_canonical(&cut).word
        };
        if best.as_ref().is_none_or(|b| w < *b) {
            best = Some(w);
        }
    }
    Ok(best.expect("two sides"))
}

/// Unfolds the curve `t ↦ F a_t p` with `p = x + i√(1−x²)`; `x = 0` is the
/// orbit itself, `x ≠ 0` an equidistant curve. With `S = FᵀF` the distance
/// to `i` is governed by `S₁₁ e^t + 2x S₁₂ + S₂₂ e^{−t}`.
fn unfold_curve(
    group: &FuchsianGroup,
    frame: &PslElement,
    period: f64,
    x: f64,
) -> Result<Unfolding, AtlasError> {
    let p = Complex64::new(x, (1.0 - x * x).sqrt());
    let (_, w0) = group.reduce_point(frame.act(p))?;
    let f0 = group.evaluate(&w0)? * *frame;
    let inverses: Vec<Mat2> = group
        .generators()
        .iter()
        .map(|g| g.inverse().rep())
        .collect();
    let gram = |m: &Mat2| {
        (
            m.a * m.a + m.c * m.c,
            m.a * m.b + m.c * m.d,
            m.b * m.b + m.d * m.d,
        )
    };
    let mut f = f0;
    let mut transport = w0;
    let mut t = 0.0;
    let mut segments = Vec::new();
    let mut cutting = Vec::new();
    let mut stalled = 0usize;
    for _ in 0..MAX_UNFOLD_STEPS {
        let m = f.rep();
        let (s11, s12, s22) = gram(&m);
        let mut exit: Option<(f64, usize)> = None;
        for (k, gi) in inverses.iter().enumerate() {
            let (h11, h12, h22) = gram(&gi.mul(&m));
            let alpha = s11 - h11;
            let beta = s22 - h22;
            let mid = 2.0 * x * (s12 - h12);
            // orbit runs along this side
            if x == 0.0 && alpha.abs() + beta.abs() < 1e-9 * (s11 + s22) {
                continue;
            }
            let Some(tk) = first_upcrossing(alpha, mid, beta, t) else {
                continue;
            };
            match exit {
                Some((te, _)) if tk > te - VERTEX_TIE_TOL => {}
                _ => exit = Some((tk, k)),
            }
        }
        let Some((t_exit, k)) = exit else {
            return Err(AtlasError::UnfoldFailure(format!(
                "no exit side found at t = {t}"
            )));
        };
        if t_exit >= period {
            segments.push(segment(&f, &transport, t, period, p));
            // the end frame is a translate of the start frame; on the
            // boundary it need not be the identity translate. The loose
            // tolerance only guards the word lookup, the residual is reported.
            let gap = f * flow(period) * f0.inverse();
            let tail = group
                .identify(&gap, 1e-3)
                .map_err(|e| AtlasError::UnfoldFailure(format!("chain does not close: {e}")))?;
            let residual =
                local_distance(&(group.evaluate(&tail)?.inverse() * f * flow(period)), &f0);
            cutting.extend(tail.0);
            return Ok(Unfolding {
                segments,
                cutting: Word(cutting),
                closure_residual: residual,
            });
        }
        if t_exit - t > 1e-12 {
            segments.push(segment(&f, &transport, t, t_exit, p));
            t = t_exit;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled > 4 * group.rank() {
                return Err(AtlasError::UnfoldFailure(format!(
                    "stuck at a vertex at t = {t}"
                )));
            }
        }
        let kinv = group.inverse_letter(k);
        f = PslElement::from_mat(inverses[k].mul(&f.rep()));
        transport = group.concat(&[&Word(vec![kinv]), &transport]);
        cutting.push(k);
    }
    Err(AtlasError::UnfoldFailure("too many segments".into()))
}

/// First time `≥ t` (up to slack) where `α e^s + μ + β e^{−s}` crosses
/// zero upwards.
fn first_upcrossing(alpha: f64, mu: f64, beta: f64, t: f64) -> Option<f64> {
    // α X² + μ X + β with X = e^s
    let mut roots = [f64::NAN; 2];
    if alpha.abs() < 1e-300 {
        if mu > 0.0 {
            roots[0] = -beta / mu;
        }
    } else {
        let disc = mu * mu - 4.0 * alpha * beta;
        if disc < 0.0 {
            return None;
        }
        let q = -0.5 * (mu + mu.signum() * disc.sqrt());
        roots = [q / alpha, if q != 0.0 { beta / q } else { f64::NAN }];
    }
    roots
        .into_iter()
        .filter(|&r| r > 0.0 && 2.0 * alpha * r + mu > 0.0)
        .map(f64::ln)
        .filter(|&s| s >= t - 1e-7)
        .map(|s| s.max(t))
        .min_by(f64::total_cmp)
}

fn segment(f: &PslElement, transport: &Word, t0: f64, t1: f64, p: Complex64) -> GeodesicSegment {
    GeodesicSegment {
        start: (*f * flow(t0)).act(p),
        end: (*f * flow(t1)).act(p),
        t_begin: t0,
        t_end: t1,
        frame: *f,
        transport: transport.clone(),
    }
}

/// Segment chain of a closed geodesic; lengths add up to the period.
pub fn geodesic_segments(
    geo: &ClosedGeodesic,
    group: &FuchsianGroup,
) -> Result<Vec<GeodesicSegment>, AtlasError> {
    Ok(unfold(group, &geo.frame, geo.period)?.segments)
}

/// A transversal self-intersection: `g a_{τ+L} = w · g a_τ d_{sign·θ}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Crossing {
    pub tau: f64,
    #[serde(rename = "L")]
    pub loop_length: f64,
    pub theta: f64,
    pub phi: f64,
    pub point: Complex64,
    pub witness: PslElement,
    pub witness_word: Word,
    pub sign: i8,
}

impl Crossing {
    /// `e^{-L} < cos²(θ/2)` for this loop.
    pub fn loop_bound_holds(&self) -> bool {
        (-self.loop_length).exp() < (0.5 * self.theta).cos().powi(2)
    }
}

/// Group elements whose translate of the domain can meet the domain.
pub struct DomainNeighbors {
    /// `(d(ρi, i), word, ρ)`, sorted by displacement.
    tiles: Vec<(f64, Word, PslElement)>,
}

impl DomainNeighbors {
    pub fn new(group: &FuchsianGroup) -> Self {
        let mut tiles: Vec<(f64, Word, PslElement)> = group
            .enumerate_ball(4)
            .into_iter()
            .map(|(w, g)| ((0.5 * g.rep().frobenius_sq()).max(1.0).acosh(), w, g))
            .collect();
        tiles.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        DomainNeighbors { tiles }
    }

    pub fn within(&self, displacement: f64) -> impl Iterator<Item = &(f64, Word, PslElement)> {
        self.tiles.iter().take_while(move |t| t.0 <= displacement)
    }
}

pub fn detect_self_crossings(
    geo: &ClosedGeodesic,
    group: &FuchsianGroup,
) -> Result<Vec<Crossing>, AtlasError> {
    detect_self_crossings_with(geo, group, &DomainNeighbors::new(group))
}

/// Intersects every pair of segments, the second one moved by each tile
/// adjacent to the domain, and reports each crossing once with `τ < τ+L`.
pub fn detect_self_crossings_with(
    geo: &ClosedGeodesic,
    group: &FuchsianGroup,
    neighbors: &DomainNeighbors,
) -> Result<Vec<Crossing>, AtlasError> {
    let segs = geodesic_segments(geo, group)?;
    let period = geo.period;
    let i = Complex64::i();
    let r_max = segs
        .iter()
        .flat_map(|s| [s.start, s.end])
        .map(|z| cosh_distance(z, i).max(1.0).acosh())
        .fold(0.0, f64::max);
    let tiles: Vec<&(f64, Word, PslElement)> = neighbors.within(2.0 * r_max + 1e-6).collect();
    let transports: Vec<PslElement> = segs
        .iter()
        .map(|s| group.evaluate(&s.transport))
        .collect::<Result<_, _>>()?;

    let mut found: Vec<Crossing> = Vec::new();
    for (ia, a) in segs.iter().enumerate() {
        for (ib, b) in segs.iter().enumerate() {
            for (_, rho_word, rho) in tiles.iter().copied() {
                if ia == ib && rho_word.is_empty() {
                    continue;
                }
                let moved = *rho * b.frame;
                let Some((t1, t2, psi)) = arc_intersection(a, &moved, b) else {
                    continue;
                };
                if (t1 - t2).abs() < CROSSING_DEDUPE_TOL
                    || ((t1 - t2).abs() - period).abs() < CROSSING_DEDUPE_TOL
                {
                    continue;
                }
                // g a_{t2} = W g a_{t1} d_ψ with W = V_b⁻¹ ρ V_a
                let vb_inv = group.inverse_word(&b.transport);
                let word = group.concat(&[&vb_inv, rho_word, &a.transport]);
                let w = transports[ib].inverse() * *rho * transports[ia];
                let (tau, second, witness, witness_word, psi) = if t1 < t2 {
                    (t1, t2, w, word, psi)
                } else {
                    (t2, t1, w.inverse(), group.inverse_word(&word), -psi)
                };
                let theta = psi.abs();
                let c = Crossing {
                    tau,
                    loop_length: second - tau,
                    theta,
                    phi: std::f64::consts::PI - theta,
                    point: (a.frame * flow(t1)).base_point(),
                    witness,
                    witness_word,
                    sign: if psi >= 0.0 { 1 } else { -1 },
                };
                if !found.iter().any(|f| same_crossing(f, &c, period)) {
                    found.push(c);
                }
            }
        }
    }
    found.sort_by(|x, y| {
        x.tau
            .total_cmp(&y.tau)
            .then_with(|| x.loop_length.total_cmp(&y.loop_length))
    });
    Ok(found)
}

fn same_crossing(a: &Crossing, b: &Crossing, period: f64) -> bool {
    let close = |x: f64, y: f64| {
        let d = (x - y).rem_euclid(period);
        d < CROSSING_DEDUPE_TOL || period - d < CROSSING_DEDUPE_TOL
    };
    close(a.tau, b.tau) && close(a.tau + a.loop_length, b.tau + b.loop_length)
}

/// Transversal intersection of arc `a` with the arc `moved·(e^t i)` over
/// the time range of `b`. Returns `(t_a, t_b, ψ)` where the frames satisfy
/// `moved a_{t_b} = a.frame a_{t_a} d_ψ`.
fn arc_intersection(
    a: &GeodesicSegment,
    moved: &PslElement,
    b: &GeodesicSegment,
) -> Option<(f64, f64, f64)> {
    const SLACK: f64 = 1e-9;
    let ma = 0.5 * (a.t_begin + a.t_end);
    let mb = 0.5 * (b.t_begin + b.t_end);
    let fa = a.frame * flow(ma);
    let fb = *moved * flow(mb);
    let m = (fa.inverse() * fb).rep();
    if m.c == 0.0 || m.d == 0.0 {
        return None;
    }
    // endpoints of the second line in the first line's chart
    let x0 = m.b / m.d;
    let x1 = m.a / m.c;
    if x0 * x1 >= 0.0 {
        return None;
    }
    let y = (-x0 * x1).sqrt();
    let sa = y.ln();
    let w = PslElement::from_mat(m)
        .inverse()
        .act(Complex64::new(0.0, y));
    let sb = w.im.ln();
    let ta = ma + sa;
    let tb = mb + sb;
    if ta < a.t_begin - SLACK
        || ta > a.t_end + SLACK
        || tb < b.t_begin - SLACK
        || tb > b.t_end + SLACK
    {
        return None;
    }
    // (fa a_sa)⁻¹ (fb a_sb) fixes i, so it is a rotation d_ψ
    let k = (flow(-sa) * fa.inverse() * fb * flow(sb)).rep();
    let mut psi = 2.0 * k.c.atan2(k.a);
    if psi > std::f64::consts::PI {
        psi -= 2.0 * std::f64::consts::PI;
    } else if psi <= -std::f64::consts::PI {
        psi += 2.0 * std::f64::consts::PI;
    }
    let eps = 1e-9;
    if psi.abs() < eps || std::f64::consts::PI - psi.abs() < eps {
        return None;
    }
    Some((ta, tb, psi))
}

/// `local_distance(g a_{τ+L}, w · g a_τ d_{sign·θ})`.
pub fn crossing_relation_check(geo: &ClosedGeodesic, crossing: &Crossing) -> f64 {
    let lhs = geo.frame_at(crossing.tau + crossing.loop_length);
    let rhs = crossing.witness
        * geo.frame_at(crossing.tau)
        * rotation(crossing.sign as f64 * crossing.theta);
    local_distance(&lhs, &rhs)
}

fn is_proper_power(w: &Word) -> bool {
    let n = w.len();
    (1..n)
        .filter(|p| n % p == 0)
        .any(|p| w.0.iter().enumerate().all(|(i, &l)| l == w.0[(i + p) % n]))
}

/// Primitive closed geodesics with a representative word of length
/// `≤ max_word_length` and period `≤ max_length`, one per unoriented class,
/// sorted by period and then by word.
pub fn closed_geodesics_up_to(
    group: &FuchsianGroup,
    max_length: f64,
    max_word_length: usize,
) -> Result<Vec<ClosedGeodesic>, AtlasError> {
    if max_word_length == 0 {
        return Ok(Vec::new());
    }
    let tr_max = 2.0 * (0.5 * max_length).cosh() * (1.0 + 1e-12);
    let ball = group.enumerate_ball(max_word_length);
    let candidates: Vec<&PslElement> = ball
        .iter()
        .skip(1)
        .map(|(_, g)| g)
        .filter(|g| g.abs_trace() <= tr_max)
        .collect();
    let keyed: Vec<Result<Word, AtlasError>> = candidates
        .par_iter()
        .map(|g| class_key(group, &axis_frame(g)?, translation_length(g)?, false))
        .collect();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for key in keyed {
        let key = key?;
        if is_proper_power(&key) || !seen.insert(key.clone()) {
            continue;
        }
        out.push(ClosedGeodesic::from_word(group, key)?);
    }
    out.sort_by(|a, b| {
        a.period
            .total_cmp(&b.period)
            .then_with(|| a.word.cmp(&b.word))
    });
    Ok(out)
}
