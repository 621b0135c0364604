//! Partner orbits of antiparallel 2-encounters: coordinates, the closing
//! identity for the new period, the partner's holonomy, and the bounds on
//! the period difference.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::atlas::{AtlasError, ClosedGeodesic, Crossing};
use crate::encounters::{orbit_pair_verify, EncounterError, EncounterReport, PairDecomposition};
use crate::fuchsian::{FuchsianGroup, GroupError, QuotientMetric, Word};
use crate::moebius::{
    classify, dphi_decompose, flow, local_distance, stable, translation_length, unstable,
    ElementClass, PslElement,
};

/// Band around zero in which `u′s′` counts as zero.
pub const EQUAL_BAND: f64 = 1e-14;
/// Holonomy lookups must reproduce the closing relation to this accuracy.
pub const HOLONOMY_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum PartnerError {
    #[error("closing identity has no hyperbolic solution (right-hand side {0} < 2)")]
    NoHyperbolicClosing(f64),
    #[error("1 + u′s′ = {0} is not positive")]
    LogDomain(f64),
    #[error("no group element closes the partner orbit (residual {0:e})")]
    WitnessNotFound(f64),
    #[error("partner holonomy is {0:?}, not hyperbolic")]
    NotHyperbolic(ElementClass),
    #[error("crossing angle φ = {0} outside (0, 1/3)")]
    AngleOutOfRange(f64),
    #[error("invalid partner input: {0}")]
    BadInput(String),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Atlas(#[from] AtlasError),
    #[error(transparent)]
    Encounter(#[from] EncounterError),
    #[error(transparent)]
    Moebius(#[from] crate::moebius::MoebiusError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PeriodChange {
    Longer,
    Shorter,
    Equal,
}

impl PeriodChange {
    pub fn as_str(&self) -> &'static str {
        match self {
            PeriodChange::Longer => "Longer",
            PeriodChange::Shorter => "Shorter",
            PeriodChange::Equal => "Equal",
        }
    }
}

/// Which exponent multiplies `u′s′` in the closing identity
/// `2 cosh(T′/2) = 2 cosh(T/2) + u′s′ e^{±T/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClosingConvention {
    /// `e^{+T/2}`: the trace of `a_T b_{−s′} c_{−u′}`.
    Holonomy,
    /// `e^{−T/2}`.
    NegativeExponent,
}

/// An antiparallel encounter `T(g a_{T₁}) = σ g c_u b_s` on a closed orbit
/// whose frame `geo.frame` is the base point `g`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartnerInput {
    pub geo: ClosedGeodesic,
    pub t1: f64,
    pub t2: f64,
    pub u: f64,
    pub s: f64,
    pub eps: f64,
    pub witness: PslElement,
}

impl PartnerInput {
    pub fn from_encounter(geo: &ClosedGeodesic, enc: &EncounterReport, eps: f64) -> Self {
        let t1 = enc.gap(geo.period);
        PartnerInput {
            geo: geo.shifted(enc.base_time),
            t1,
            t2: geo.period - t1,
            u: enc.coords.u,
            s: enc.coords.s,
            eps,
            witness: enc.witness,
        }
    }

    /// Residual of the encounter relation this input claims.
    pub fn relation_residual(&self) -> f64 {
        let g = self.geo.frame;
        let lhs = g * flow(self.t1) * crate::moebius::d_pi();
        let rhs = self.witness * g * unstable(self.u) * stable(self.s);
        local_distance(&lhs, &rhs)
    }

    fn validate(&self) -> Result<(), PartnerError> {
        let t = self.geo.period;
        if !(self.t1 > 0.0 && self.t1 < t) || (self.t1 + self.t2 - t).abs() > 1e-9 * (1.0 + t) {
            return Err(PartnerError::BadInput(format!(
                "T1 = {}, T2 = {} for period {t}",
                self.t1, self.t2
            )));
        }
        if !(self.eps > 0.0 && self.eps < 0.25) {
            return Err(PartnerError::BadInput(format!(
                "ε = {} outside (0, 1/4)",
                self.eps
            )));
        }
        if !(self.u.abs() < self.eps && self.s.abs() < self.eps) {
            return Err(PartnerError::BadInput(format!(
                "|u| = {}, |s| = {} not below ε = {}",
                self.u.abs(),
                self.s.abs(),
                self.eps
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartnerReport {
    pub u: f64,
    pub s: f64,
    pub u_prime: f64,
    pub s_prime: f64,
    #[serde(rename = "T")]
    pub period: f64,
    #[serde(rename = "T_partner")]
    pub period_partner: f64,
    /// Period from the `e^{−T/2}` form of the closing identity.
    pub period_negative_exponent: Option<f64>,
    /// Period from the `e^{+T/2}` form.
    pub period_closing: f64,
    pub partner_element: PslElement,
    /// Word found for the holonomy by domain reduction.
    pub holonomy_word: Word,
    /// Canonical class word of the partner orbit.
    pub partner_word: Word,
    pub holonomy_residual: f64,
    /// `|tr ρ| − tr(a_T b_{−s′} c_{−u′})`.
    pub trace_gap: f64,
    pub eps: f64,
    pub eps_prime: f64,
    pub action_diff: f64,
    pub log_bound_lhs: f64,
    pub log_bound_rhs: f64,
    pub trichotomy: PeriodChange,
    pub closeness_verified: bool,
    pub decomposition: Option<PairDecomposition>,
    #[serde(skip)]
    pub partner: Option<ClosedGeodesic>,
}

impl PartnerReport {
    pub fn log_bound_holds(&self) -> bool {
        self.log_bound_lhs <= self.log_bound_rhs
    }

    /// The closing bound with constant 5.
    pub fn bound_closing_holds(&self) -> bool {
        self.log_bound_lhs < 5.0 * self.log_bound_rhs
    }

    pub fn eps_prime_below_nine_eps(&self) -> bool {
        self.eps_prime < 9.0 * self.eps
    }
}

/// `u′ = s − u e^{−T₂}`, `s′ = u − s e^{−T₁}`.
pub fn partner_coords(u: f64, s: f64, t1: f64, t2: f64) -> (f64, f64) {
    (s - u * (-t2).exp(), u - s * (-t1).exp())
}

/// Solves `2 cosh(T′/2) = 2 cosh(T/2) + p e^{±T/2}` for `T′`.
pub fn closing_period(t: f64, p: f64, convention: ClosingConvention) -> Result<f64, PartnerError> {
    if p == 0.0 {
        return Ok(t);
    }
    let e = match convention {
        ClosingConvention::Holonomy => (0.5 * t).exp(),
        ClosingConvention::NegativeExponent => (-0.5 * t).exp(),
    };
    let rhs = 2.0 * (0.5 * t).cosh() + p * e;
    if !(rhs >= 2.0) {
        return Err(PartnerError::NoHyperbolicClosing(rhs));
    }
    Ok(2.0 * (0.5 * rhs).acosh())
}

/// `tr(a_T b_{−s′} c_{−u′}) = e^{T/2}(1 + u′s′) + e^{−T/2}`.
pub fn predicted_trace(t: f64, u_prime: f64, s_prime: f64) -> f64 {
    (0.5 * t).exp() * (1.0 + u_prime * s_prime) + (-0.5 * t).exp()
}

pub fn classify_period_change(p: f64) -> PeriodChange {
    if p.abs() < EQUAL_BAND {
        PeriodChange::Equal
    } else if p > 0.0 {
        PeriodChange::Longer
    } else {
        PeriodChange::Shorter
    }
}

/// `|(T′−T)/2 − ln(1+p)|`.
pub fn log_bound_lhs(t: f64, t_prime: f64, p: f64) -> Result<f64, PartnerError> {
    if !(1.0 + p > 0.0) {
        return Err(PartnerError::LogDomain(1.0 + p));
    }
    Ok((0.5 * (t_prime - t) - p.ln_1p()).abs())
}

/// Builds the partner of an antiparallel encounter.
///
/// With `ŵ = g c_u a_{−T₂}` one has `ŵ a_T = ρ ŵ c_{u′} b_{s′}` for some
/// `ρ ∈ Γ`; that `ρ` is the partner's holonomy and is recovered from
/// `ŵ a_T b_{−s′} c_{−u′} ŵ⁻¹` by reduction to the fundamental domain.
/// `n` is the word radius of the quotient metric used for the closeness
/// check.
pub fn construct_partner(
    input: &PartnerInput,
    group: &FuchsianGroup,
    n: usize,
) -> Result<PartnerReport, PartnerError> {
    let metric = QuotientMetric::new(group, n);
    construct_partner_with(input, &metric, crate::encounters::DEFAULT_SAMPLING_STEP)
}

pub fn construct_partner_with(
    input: &PartnerInput,
    metric: &QuotientMetric,
    dt: f64,
) -> Result<PartnerReport, PartnerError> {
    input.validate()?;
    let group = metric.group();
    let t = input.geo.period;
    let (u_prime, s_prime) = partner_coords(input.u, input.s, input.t1, input.t2);
    let p = u_prime * s_prime;

    let w_hat = input.geo.frame * unstable(input.u) * flow(-input.t2);
    let lhs = w_hat * flow(t);
    let target = lhs * stable(-s_prime) * unstable(-u_prime) * w_hat.inverse();
    let holonomy_word = group
        .identify(&target, 1e-3)
        .map_err(|_| PartnerError::WitnessNotFound(f64::INFINITY))?;
    let rho = group.evaluate(&holonomy_word)?;
    let residual = local_distance(&(rho * w_hat * unstable(u_prime) * stable(s_prime)), &lhs);
    if residual > HOLONOMY_TOL {
        return Err(PartnerError::WitnessNotFound(residual));
    }
    match classify(&rho) {
        ElementClass::Hyperbolic => {}
        other => return Err(PartnerError::NotHyperbolic(other)),
    }
    let period_partner = translation_length(&rho)?;
    let trace_gap = rho.abs_trace() - predicted_trace(t, u_prime, s_prime);
    let period_closing = closing_period(t, p, ClosingConvention::Holonomy)?;
    let period_negative_exponent = closing_period(t, p, ClosingConvention::NegativeExponent).ok();

    let partner = ClosedGeodesic::from_element(group, &rho)?;
    let eps_prime = input.eps + 2.0 * (u_prime.abs() + s_prime.abs());
    let pair = orbit_pair_verify(&input.geo, &partner, metric, eps_prime, dt)?;

    Ok(PartnerReport {
        u: input.u,
        s: input.s,
        u_prime,
        s_prime,
        period: t,
        period_partner,
        period_negative_exponent,
        period_closing,
        partner_element: rho,
        holonomy_word,
        partner_word: partner.word.clone(),
        holonomy_residual: residual,
        trace_gap,
        eps: input.eps,
        eps_prime,
        action_diff: 0.5 * (period_partner - t),
        log_bound_lhs: log_bound_lhs(t, period_partner, p)?,
        log_bound_rhs: p.abs() * (-t).exp(),
        trichotomy: classify_period_change(p),
        closeness_verified: pair.verified,
        decomposition: pair.decomposition,
        partner: Some(partner),
    })
}

/// Partner of a small-angle self-crossing together with the checks of the
/// small-angle estimates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmallAngleReport {
    pub word: Word,
    pub crossing: Crossing,
    /// Encounter gap `T₁ = L + 2 ln cos(φ/2)`.
    pub t1: f64,
    pub input_residual: f64,
    pub partner: PartnerReport,
    pub angle_bound_lhs: f64,
    pub angle_bound_rhs: f64,
    pub period_shorter: bool,
    pub eps_prime_within: bool,
    pub angle_bound_holds: bool,
    /// `e^{−L} < sin²(φ/2)` and `e^{−(T−L)} < sin²(φ/2)`.
    pub loop_lengths_hold: bool,
}

impl SmallAngleReport {
    pub fn all_checks_pass(&self) -> bool {
        self.period_shorter
            && self.eps_prime_within
            && self.angle_bound_holds
            && self.loop_lengths_hold
    }
}

/// Encounter input for a crossing `g a_{τ+L} = w g a_τ d_{±θ}`.
///
/// With `θ = π − φ` and `G = g a_τ` the relation reads
/// `G a_L d_π = w G d_{∓φ}`; splitting `d_{∓φ} = c_u b_s a_{τ′}` and moving
/// `a_{τ′}` across `d_π` gives `G a_{L+τ′} d_π = w G c_u b_s`.
pub fn crossing_encounter(geo: &ClosedGeodesic, crossing: &Crossing) -> PartnerInput {
    let phi = crossing.phi;
    let split = dphi_decompose(-(crossing.sign as f64) * phi);
    let t1 = crossing.loop_length + split.tau;
    PartnerInput {
        geo: geo.shifted(crossing.tau),
        t1,
        t2: geo.period - t1,
        u: split.u,
        s: split.s,
        eps: 1.2 * (0.5 * phi).sin().abs(),
        witness: crossing.witness,
    }
}

/// Small-angle bound terms `(lhs, rhs)` for angle `φ`, encounter gap `T₁`, period
/// `T` and partner period `T′`.
pub fn angle_bound_terms(
    phi: f64,
    t1: f64,
    t: f64,
    t_prime: f64,
) -> Result<(f64, f64), PartnerError> {
    let (sh, ch) = (0.5 * phi).sin_cos();
    let (s2, c2) = (sh * sh, ch * ch);
    let p = -s2 * (1.0 / c2 + (-t1).exp()) * (c2 + (t1 - t).exp());
    Ok((log_bound_lhs(t, t_prime, p)?, 2.0 * s2 * (-t).exp()))
}

pub fn small_angle_pipeline(
    geo: &ClosedGeodesic,
    crossing: &Crossing,
    metric: &QuotientMetric,
    dt: f64,
) -> Result<SmallAngleReport, PartnerError> {
    let phi = crossing.phi;
    if !(phi > 0.0 && phi < 1.0 / 3.0) {
        return Err(PartnerError::AngleOutOfRange(phi));
    }
    let input = crossing_encounter(geo, crossing);
    let input_residual = input.relation_residual();
    let report = construct_partner_with(&input, metric, dt)?;
    let sin_half = (0.5 * phi).sin().abs();
    let (angle_bound_lhs, angle_bound_rhs) =
        angle_bound_terms(phi, input.t1, geo.period, report.period_partner)?;
    let s2 = sin_half * sin_half;
    let l = crossing.loop_length;
    Ok(SmallAngleReport {
        word: geo.word.clone(),
        crossing: crossing.clone(),
        t1: input.t1,
        input_residual,
        period_shorter: report.period_partner < geo.period,
        eps_prime_within: report.eps_prime <= 6.0 * sin_half,
        angle_bound_holds: angle_bound_lhs <= angle_bound_rhs,
        loop_lengths_hold: (-l).exp() < s2 && (l - geo.period).exp() < s2,
        angle_bound_lhs,
        angle_bound_rhs,
        partner: report,
    })
}

/// Earlier estimate next to the current one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LegacyComparison {
    pub old_lhs: f64,
    pub old_rhs: f64,
    pub new_rhs: f64,
    pub old_eps_prime: f64,
    pub new_eps_prime: f64,
}

impl LegacyComparison {
    pub fn new_dominates(&self) -> bool {
        self.new_rhs <= self.old_rhs && self.new_eps_prime <= self.old_eps_prime
    }
}

/// Old bound `|(T′−T)/2 − ln(1 − (1+e^{−T₁})(1+e^{−T₂}) sin²(φ/2))| ≤
/// 12 sin²(φ/2) e^{−T}` and radius `9|sin(φ/2)|`, against `2 sin²` and `6|sin|`.
pub fn legacy_bound_compare(
    report: &SmallAngleReport,
    t1: f64,
) -> Result<LegacyComparison, PartnerError> {
    let t = report.partner.period;
    let sh = (0.5 * report.crossing.phi).sin();
    let s2 = sh * sh;
    let p_old = -(1.0 + (-t1).exp()) * (1.0 + (t1 - t).exp()) * s2;
    Ok(LegacyComparison {
        old_lhs: log_bound_lhs(t, report.partner.period_partner, p_old)?,
        old_rhs: 12.0 * s2 * (-t).exp(),
        new_rhs: 2.0 * s2 * (-t).exp(),
        old_eps_prime: 9.0 * sh.abs(),
        new_eps_prime: 6.0 * sh.abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atlas::{detect_self_crossings, SMALL_ANGLE_WORDS};
    use crate::encounters::detect_2antiparallel;
    use approx::assert_abs_diff_eq;

    #[test]
    fn partner_coords_examples() {
        assert_eq!(partner_coords(0.0, 0.0, 3.0, 4.0), (0.0, 0.0));
        let (u, s) = partner_coords(0.1, -0.1, 5.0, 5.0);
        assert_abs_diff_eq!(u, -0.10067379469990855, epsilon = 1e-15);
        assert_abs_diff_eq!(s, 0.10067379469990855, epsilon = 1e-15);
        // s = u e^{−T₂} makes u′ vanish
        let (u, _) = partner_coords(0.1, 0.1 * (-2.0f64).exp(), 1.0, 2.0);
        assert_abs_diff_eq!(u, 0.0, epsilon = 1e-17);
    }

    #[test]
    fn closing_period_examples() {
        assert_eq!(
            closing_period(10.0, 0.0, ClosingConvention::Holonomy).unwrap(),
            10.0
        );
        let t = closing_period(10.0, -0.01, ClosingConvention::Holonomy).unwrap();
        assert_abs_diff_eq!(t, 9.9798984018152218, epsilon = 1e-12);
        assert!((t - (10.0 + 2.0 * 0.99f64.ln())).abs() < 2e-6);
        assert!(matches!(
            closing_period(0.5, -1.2, ClosingConvention::Holonomy),
            Err(PartnerError::NoHyperbolicClosing(_))
        ));
        // the e^{−T/2} form moves T′ by a negligible amount
        let minus = closing_period(10.0, -0.01, ClosingConvention::NegativeExponent).unwrap();
        assert!((minus - 10.0).abs() < 1e-5);
    }

    #[test]
    fn trichotomy() {
        assert_eq!(classify_period_change(0.0), PeriodChange::Equal);
        assert_eq!(classify_period_change(-0.01), PeriodChange::Shorter);
        assert_eq!(classify_period_change(0.01), PeriodChange::Longer);
        for p in [-0.01, 0.01] {
            let tp = closing_period(10.0, p, ClosingConvention::Holonomy).unwrap();
            let by_sign = if tp > 10.0 {
                PeriodChange::Longer
            } else {
                PeriodChange::Shorter
            };
            assert_eq!(classify_period_change(p), by_sign);
        }
    }

    #[test]
    fn angle_bound_synthetic_example() {
        let (phi, t1, t) = (0.2f64, 6.0f64, 12.0f64);
        let (sh, ch) = (0.5f64 * phi).sin_cos();
        let inner =
            (1.0 - sh * sh * (1.0 / (ch * ch) + (-t1).exp()) * (ch * ch + (t1 - t).exp())).ln();
        assert_abs_diff_eq!(inner, -0.010066684279376918, epsilon = 1e-15);
        let (_, rhs) = angle_bound_terms(phi, t1, t, t).unwrap();
        assert_abs_diff_eq!(rhs, 1.2247517867e-7, epsilon = 1e-16);
    }

    fn fixture(g: &FuchsianGroup, w: &str) -> ClosedGeodesic {
        ClosedGeodesic::from_word(g, g.parse_word(w).unwrap()).unwrap()
    }

    #[test]
    fn pipeline_on_small_angle_crossings() {
        let g = FuchsianGroup::bolza();
        let metric = QuotientMetric::new(&g, 4);
        let mut runs = 0;
        for w in SMALL_ANGLE_WORDS {
            let geo = fixture(&g, w);
            for c in detect_self_crossings(&geo, &g).unwrap() {
                if c.phi >= 1.0 / 3.0 {
                    assert!(matches!(
                        small_angle_pipeline(&geo, &c, &metric, 0.05),
                        Err(PartnerError::AngleOutOfRange(_))
                    ));
                    continue;
                }
                runs += 1;
                let r = small_angle_pipeline(&geo, &c, &metric, 0.05).unwrap();
                assert!(r.input_residual < 1e-7, "{}", r.input_residual);
                assert!(r.partner.holonomy_residual < 1e-7);
                assert!(
                    r.partner.trace_gap.abs() < 1e-9 * r.partner.partner_element.abs_trace(),
                    "{}",
                    r.partner.trace_gap
                );
                assert_abs_diff_eq!(
                    r.partner.period_partner,
                    r.partner.period_closing,
                    epsilon = 1e-9
                );
                assert!(r.all_checks_pass(), "{r:?}");
                assert!(r.partner.bound_closing_holds());
                assert!(r.partner.eps_prime_below_nine_eps());
                assert!(r.partner.closeness_verified);
                assert_eq!(r.partner.trichotomy, PeriodChange::Shorter);
                let rho = g.evaluate(&r.partner.holonomy_word).unwrap();
                assert!(rho.approx_eq(&r.partner.partner_element, 1e-12));
                let legacy = legacy_bound_compare(&r, r.t1).unwrap();
                assert!(legacy.new_dominates());
            }
        }
        assert!(runs > 0);
    }

    #[test]
    fn partner_of_partner_is_the_original_class() {
        let g = FuchsianGroup::bolza();
        let metric = QuotientMetric::new(&g, 4);
        let geo = fixture(&g, SMALL_ANGLE_WORDS[0]);
        let c = detect_self_crossings(&geo, &g)
            .unwrap()
            .into_iter()
            .find(|c| c.phi < 1.0 / 3.0)
            .unwrap();
        let r = small_angle_pipeline(&geo, &c, &metric, 0.05).unwrap();
        let partner = r.partner.partner.clone().unwrap();
        let original = g.cyclic_canonical(&geo.word).word;
        let back = detect_2antiparallel(&partner, &g, 0.25, 0.05)
            .unwrap()
            .into_iter()
            .filter_map(|e| {
                let input = PartnerInput::from_encounter(&partner, &e, 0.249);
                construct_partner_with(&input, &metric, 0.05).ok()
            })
            .any(|rep| g.cyclic_canonical(&rep.partner_word).word == original);
        assert!(back);
    }

    #[test]
    fn degenerate_encounter_keeps_the_period() {
        let g = FuchsianGroup::bolza();
        let geo = fixture(&g, SMALL_ANGLE_WORDS[0]);
        let input = PartnerInput {
            geo: geo.clone(),
            t1: 5.0,
            t2: geo.period - 5.0,
            u: 0.0,
            s: 0.0,
            eps: 0.1,
            witness: PslElement::IDENTITY,
        };
        let (u, s) = partner_coords(0.0, 0.0, input.t1, input.t2);
        assert_eq!(classify_period_change(u * s), PeriodChange::Equal);
        assert_eq!(
            closing_period(geo.period, u * s, ClosingConvention::Holonomy).unwrap(),
            geo.period
        );
    }
}

#[cfg(test)]
mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn antiparallel_data_shortens(u in -0.2..0.2f64, t1 in 2.0..10.0f64, t2 in 2.0..10.0f64) {
            prop_assume!(u.abs() > 1e-3);
            let (up, sp) = partner_coords(u, -u, t1, t2);
            prop_assert!(up * sp < 0.0);
        }

        #[test]
        fn closing_period_is_monotone(t in 4.0..20.0f64, p in -0.05..0.05f64) {
            let a = closing_period(t, p, ClosingConvention::Holonomy).unwrap();
            let b = closing_period(t, p + 1e-3, ClosingConvention::Holonomy).unwrap();
            prop_assert!(b > a);
        }
    }
}
