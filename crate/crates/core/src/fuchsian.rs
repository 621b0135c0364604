//! Cocompact Fuchsian groups, words over their generators and the quotient
//! `Γ\PSL(2,R)`.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::moebius::{
    classify, cosh_distance, distance_to_identity, nsa_decompose, ElementClass, MoebiusError,
    NsaTriple, PslElement,
};

/// Tolerance for identifying group elements during ball enumeration.
pub const DEDUPE_TOL: f64 = 1e-8;
/// Default step cap for fundamental-domain reduction.
pub const DEFAULT_REDUCE_STEPS: usize = 200;
/// Default word-length radius of the quotient-distance search window.
pub const DEFAULT_QUOTIENT_RADIUS: usize = 4;

/// `cosh` of the inradius of the regular octagon with interior angles π/4.
pub const BOLZA_COSH_INRADIUS: f64 = 1.0 + std::f64::consts::SQRT_2;
/// `cosh` of its circumradius, `(1+√2)²`.
pub const BOLZA_COSH_CIRCUMRADIUS: f64 = 3.0 + 2.0 * std::f64::consts::SQRT_2;

#[derive(Debug, Error)]
pub enum GroupError {
    #[error("letter {0} is not a generator index (group has {1} generators)")]
    BadIndex(usize, usize),
    #[error("point {0} is not in the upper half-plane")]
    NotInUpperHalfPlane(Complex64),
    #[error("fundamental-domain reduction did not converge in {0} steps")]
    NoConvergence(usize),
    #[error("element is not in the group (residual {0:e})")]
    NotInGroup(f64),
    #[error("invalid group: {0}")]
    Invalid(String),
    #[error(transparent)]
    Moebius(#[from] MoebiusError),
    #[error("reading group file: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing group file: {0}")]
    Json(#[from] serde_json::Error),
}

/// A word over generator indices, freely reduced when produced by the group.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Word(pub Vec<usize>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn letters(&self) -> &[usize] {
        &self.0
    }
}

impl From<Vec<usize>> for Word {
    fn from(v: Vec<usize>) -> Self {
        Word(v)
    }
}

/// Output of [`FuchsianGroup::cyclic_canonical`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CanonicalWord {
    pub word: Word,
    /// True when the minimum was attained by the inverse word, i.e. the key
    /// describes the orientation-reversed class.
    pub reversed: bool,
}

/// JSON layout of a group file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupConfig {
    pub generators: Vec<[f64; 4]>,
    #[serde(default)]
    pub labels: Vec<String>,
    #[serde(default)]
    pub relation: Option<Vec<usize>>,
}

#[derive(Debug, Clone)]
pub struct FuchsianGroup {
    generators: Vec<PslElement>,
    labels: Vec<String>,
    inverse: Vec<usize>,
    relation: Option<Word>,
}

impl FuchsianGroup {
    /// The genus-two Bolza group: the eight side pairings of the regular
    /// hyperbolic octagon with interior angles π/4, centred at `i`.
    ///
    /// Generator `k` translates along the direction at angle `kπ/4` through
    /// `i` by twice the inradius, so generator `k+4` is the inverse of `k`.
    pub fn bolza() -> Self {
        let c = BOLZA_COSH_INRADIUS;
        let s = (c * c - 1.0).sqrt();
        let generators = (0..8)
            .map(|k| {
                let (sn, cs) = (k as f64 * std::f64::consts::FRAC_PI_4).sin_cos();
                PslElement::new(c + s * cs, -s * sn, -s * sn, c - s * cs)
                    .expect("octagon pairing has unit determinant")
            })
            .collect();
        let labels = ["a", "b", "c", "d", "A", "B", "C", "D"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        FuchsianGroup {
            generators,
            labels,
            inverse: (0..8).map(|k| (k + 4) % 8).collect(),
            relation: Some(Word(vec![0, 3, 6, 1, 4, 7, 2, 5])),
        }
    }

    /// Builds a group from a config, checking every invariant.
    pub fn from_config(cfg: &GroupConfig) -> Result<Self, GroupError> {
        if cfg.generators.is_empty() {
            return Err(GroupError::Invalid("no generators".into()));
        }
        let mut generators = Vec::with_capacity(cfg.generators.len());
        for (k, g) in cfg.generators.iter().enumerate() {
            let el = PslElement::new(g[0], g[1], g[2], g[3])
                .map_err(|e| GroupError::Invalid(format!("generator {k}: {e}")))?;
            if classify(&el) != ElementClass::Hyperbolic {
                return Err(GroupError::Invalid(format!(
                    "generator {k} is not hyperbolic (|tr| = {})",
                    el.abs_trace()
                )));
            }
            generators.push(el);
        }
        let mut inverse = Vec::with_capacity(generators.len());
        for (k, g) in generators.iter().enumerate() {
            let inv = g.inverse();
            let j = generators
                .iter()
                .position(|h| h.approx_eq(&inv, 1e-10))
                .ok_or_else(|| {
                    GroupError::Invalid(format!("inverse of generator {k} is not in the list"))
                })?;
            inverse.push(j);
        }
        let labels = if cfg.labels.is_empty() {
            (0..generators.len()).map(|k| format!("g{k}")).collect()
        } else if cfg.labels.len() == generators.len() {
            cfg.labels.clone()
        } else {
            return Err(GroupError::Invalid(format!(
                "{} labels for {} generators",
                cfg.labels.len(),
                generators.len()
            )));
        };
        let group = FuchsianGroup {
            generators,
            labels,
            inverse,
            relation: cfg.relation.clone().map(Word),
        };
        if let Some(rel) = &group.relation {
            let r = group.evaluate(rel)?;
            if !r.is_identity(1e-8) {
                return Err(GroupError::Invalid(format!(
                    "relation does not evaluate to the identity: {r}"
                )));
            }
        }
        Ok(group)
    }

    pub fn load(path: &Path) -> Result<Self, GroupError> {
        let text = std::fs::read_to_string(path)?;
        let cfg: GroupConfig = serde_json::from_str(&text)?;
        Self::from_config(&cfg)
    }

    pub fn to_config(&self) -> GroupConfig {
        GroupConfig {
            generators: self.generators.iter().map(|g| g.as_array()).collect(),
            labels: self.labels.clone(),
            relation: self.relation.as_ref().map(|w| w.0.clone()),
        }
    }

    pub fn rank(&self) -> usize {
        self.generators.len()
    }

    pub fn generators(&self) -> &[PslElement] {
        &self.generators
    }

    pub fn generator(&self, k: usize) -> PslElement {
        self.generators[k]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn relation(&self) -> Option<&Word> {
        self.relation.as_ref()
    }

    pub fn inverse_letter(&self, k: usize) -> usize {
        self.inverse[k]
    }

    pub fn evaluate(&self, w: &Word) -> Result<PslElement, GroupError> {
        let mut acc = PslElement::IDENTITY;
        for &k in &w.0 {
            let g = self
                .generators
                .get(k)
                .ok_or(GroupError::BadIndex(k, self.generators.len()))?;
            acc = acc * *g;
        }
        Ok(acc)
    }

    /// Cancels adjacent letter/inverse pairs.
    pub fn free_reduce(&self, letters: impl IntoIterator<Item = usize>) -> Word {
        let mut out: Vec<usize> = Vec::new();
        for k in letters {
            if out.last().is_some_and(|&l| self.inverse[l] == k) {
                out.pop();
            } else {
                out.push(k);
            }
        }
        Word(out)
    }

    pub fn inverse_word(&self, w: &Word) -> Word {
        Word(w.0.iter().rev().map(|&k| self.inverse[k]).collect())
    }

    /// Freely reduced product of words.
    pub fn concat(&self, parts: &[&Word]) -> Word {
        self.free_reduce(parts.iter().flat_map(|w| w.0.iter().copied()))
    }

    pub fn format_word(&self, w: &Word) -> String {
        if w.is_empty() {
            return "e".to_string();
        }
        w.0.iter().map(|&k| self.labels[k].as_str()).collect()
    }

    /// Parses a word written with generator labels, longest label first.
    pub fn parse_word(&self, s: &str) -> Result<Word, GroupError> {
        if s == "e" || s.is_empty() {
            return Ok(Word::empty());
        }
        let mut order: Vec<usize> = (0..self.labels.len()).collect();
        order.sort_by_key(|&k| std::cmp::Reverse(self.labels[k].len()));
        let mut rest = s;
        let mut letters = Vec::new();
        'outer: while !rest.is_empty() {
            for &k in &order {
                if let Some(r) = rest.strip_prefix(self.labels[k].as_str()) {
                    letters.push(k);
                    rest = r;
                    continue 'outer;
                }
            }
            return Err(GroupError::Invalid(format!("cannot parse word {s:?}")));
        }
        Ok(self.free_reduce(letters))
    }

    /// All freely reduced words of length ≤ `n`, one per distinct element,
    /// in breadth-first order (so each element carries a shortest word
    /// among those enumerated).
    pub fn enumerate_ball(&self, n: usize) -> Vec<(Word, PslElement)> {
        let mut out: Vec<(Word, PslElement)> = vec![(Word::empty(), PslElement::IDENTITY)];
        let mut index = ElementIndex::default();
        index.insert(&PslElement::IDENTITY, 0);
        let mut frontier: Vec<usize> = vec![0];
        for _ in 0..n {
            let mut next = Vec::new();
            for &idx in &frontier {
                let (w, g) = out[idx].clone();
                for k in 0..self.rank() {
                    if w.0.last().is_some_and(|&l| self.inverse[l] == k) {
                        continue;
                    }
                    let h = g * self.generators[k];
                    if index.find(&h, &out).is_some() {
                        continue;
                    }
                    let mut letters = w.0.clone();
                    letters.push(k);
                    out.push((Word(letters), h));
                    index.insert(&h, out.len() - 1);
                    next.push(out.len() - 1);
                }
            }
            frontier = next;
        }
        out
    }

    /// Moves `z` into the Dirichlet domain centred at `i` by greedy descent.
    ///
    /// Returns `(z0, w)` with `z0 = evaluate(w)·z`.
    pub fn reduce_point(&self, z: Complex64) -> Result<(Complex64, Word), GroupError> {
        self.reduce_point_with(z, DEFAULT_REDUCE_STEPS)
    }

    pub fn reduce_point_with(
        &self,
        z: Complex64,
        max_steps: usize,
    ) -> Result<(Complex64, Word), GroupError> {
        if !(z.im > 0.0) || !z.re.is_finite() {
            return Err(GroupError::NotInUpperHalfPlane(z));
        }
        let i = Complex64::i();
        let mut cur = z;
        let mut cur_c = cosh_distance(cur, i);
        let mut prefix: Vec<usize> = Vec::new();
        for _ in 0..max_steps {
            let mut best: Option<(usize, Complex64, f64)> = None;
            for (k, g) in self.generators.iter().enumerate() {
                let w = g.act(cur);
                let c = cosh_distance(w, i);
                if c < cur_c * (1.0 - 1e-13) && best.is_none_or(|b| c < b.2) {
                    best = Some((k, w, c));
                }
            }
            match best {
                None => {
                    prefix.reverse();
                    return Ok((cur, self.free_reduce(prefix)));
                }
                Some((k, w, c)) => {
                    prefix.push(k);
                    cur = w;
                    cur_c = c;
                }
            }
        }
        Err(GroupError::NoConvergence(max_steps))
    }

    /// Reduces a frame so that its base point lies in the fundamental
    /// domain; returns `(evaluate(w)·g, w)`.
    pub fn reduce_frame(&self, g: &PslElement) -> Result<(PslElement, Word), GroupError> {
        let (_, w) = self.reduce_point(g.base_point())?;
        Ok((self.evaluate(&w)? * *g, w))
    }

    /// Recovers a word for an element that is (numerically) in the group.
    pub fn identify(&self, m: &PslElement, tol: f64) -> Result<Word, GroupError> {
        let (_, w) = self.reduce_point_with(m.base_point(), 10 * DEFAULT_REDUCE_STEPS)?;
        let wm = self.evaluate(&w)? * *m;
        let res = distance_to_identity(&wm.rep());
        if res > tol {
            return Err(GroupError::NotInGroup(res));
        }
        Ok(self.inverse_word(&w))
    }

    /// Strips letter/inverse pairs from the two ends.
    pub fn cyclic_reduce(&self, w: &Word) -> Word {
        let w = self.free_reduce(w.0.iter().copied());
        let mut lo = 0;
        let mut hi = w.len();
        while hi - lo >= 2 && self.inverse[w.0[lo]] == w.0[hi - 1] {
            lo += 1;
            hi -= 1;
        }
        Word(w.0[lo..hi].to_vec())
    }

    /// Lexicographically least rotation of the cyclic reduction.
    pub fn oriented_canonical(&self, w: &Word) -> Word {
        min_rotation(&self.cyclic_reduce(w))
    }

    /// Conjugacy key that also identifies a word with its inverse.
    pub fn cyclic_canonical(&self, w: &Word) -> CanonicalWord {
        let fwd = self.oriented_canonical(w);
        let bwd = self.oriented_canonical(&self.inverse_word(w));
        if bwd < fwd {
            CanonicalWord {
                word: bwd,
                reversed: true,
            }
        } else {
            CanonicalWord {
                word: fwd,
                reversed: false,
            }
        }
    }
}

fn min_rotation(w: &Word) -> Word {
    let n = w.len();
    if n == 0 {
        return w.clone();
    }
    let mut best: Vec<usize> = w.0.clone();
    let mut cand = Vec::with_capacity(n);
    for r in 1..n {
        cand.clear();
        cand.extend_from_slice(&w.0[r..]);
        cand.extend_from_slice(&w.0[..r]);
        if cand < best {
            best.clone_from(&cand);
        }
    }
    Word(best)
}

/// Spatial hash over matrix entries for tolerant element lookup.
#[derive(Default)]
struct ElementIndex {
    cells: HashMap<[i64; 4], Vec<usize>>,
}

const CELL: f64 = 1e-6;

impl ElementIndex {
    fn key(m: [f64; 4]) -> [i64; 4] {
        m.map(|x| (x / CELL).floor() as i64)
    }

    fn insert(&mut self, g: &PslElement, idx: usize) {
        self.cells
            .entry(Self::key(g.as_array()))
            .or_default()
            .push(idx);
    }

    fn find(&self, g: &PslElement, store: &[(Word, PslElement)]) -> Option<usize> {
        let rep = g.as_array();
        for m in [rep, rep.map(|x| -x)] {
            let mut opts: [[i64; 2]; 4] = [[0; 2]; 4];
            let mut counts = [1usize; 4];
            for (j, &x) in m.iter().enumerate() {
                let scaled = x / CELL;
                let base = scaled.floor();
                let frac = scaled - base;
                opts[j][0] = base as i64;
                let slack = DEDUPE_TOL / CELL;
                if frac < slack {
                    opts[j][1] = base as i64 - 1;
                    counts[j] = 2;
                } else if frac > 1.0 - slack {
                    opts[j][1] = base as i64 + 1;
                    counts[j] = 2;
                }
            }
            for i0 in 0..counts[0] {
                for i1 in 0..counts[1] {
                    for i2 in 0..counts[2] {
                        for i3 in 0..counts[3] {
                            let key = [opts[0][i0], opts[1][i1], opts[2][i2], opts[3][i3]];
                            if let Some(list) = self.cells.get(&key) {
                                for &idx in list {
                                    if store[idx].1.approx_eq(g, DEDUPE_TOL) {
                                        return Some(idx);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        None
    }
}

/// A point `Γg` of the quotient, carried by a representative frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuotientPoint {
    pub frame: PslElement,
}

impl QuotientPoint {
    pub fn new(frame: PslElement) -> Self {
        QuotientPoint { frame }
    }

    /// Base point `g·i` in the upper half-plane.
    pub fn base(&self) -> Complex64 {
        self.frame.base_point()
    }
}

impl fmt::Display for QuotientPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Γ{}", self.frame)
    }
}

/// Closest group translate found by [`QuotientMetric::nearest`].
#[derive(Debug, Clone)]
pub struct Nearest {
    pub distance: f64,
    /// `ρ` such that `local_distance(ρ·x, y)` is the reported distance.
    pub rho: PslElement,
    pub word: Word,
    /// Word length of the minimiser inside the search window.
    pub window_length: usize,
}

/// Quotient distance with a precomputed search window.
///
/// Both frames are first moved into the fundamental domain, then the group
/// ball (sorted by displacement of `i`) is scanned until the triangle
/// inequality rules out any further improvement.
pub struct QuotientMetric<'g> {
    group: &'g FuchsianGroup,
    radius: usize,
    /// `(d(ρ·i, i), word, ρ)` sorted by displacement.
    window: Vec<(f64, Word, PslElement)>,
}

impl<'g> QuotientMetric<'g> {
    pub fn new(group: &'g FuchsianGroup, radius: usize) -> Self {
        let mut window: Vec<(f64, Word, PslElement)> = group
            .enumerate_ball(radius)
            .into_iter()
            .map(|(w, g)| ((0.5 * g.rep().frobenius_sq()).max(1.0).acosh(), w, g))
            .collect();
        window.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        QuotientMetric {
            group,
            radius,
            window,
        }
    }

    pub fn group(&self) -> &FuchsianGroup {
        self.group
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    /// Window elements with `d(ρ·i, i) ≤ displacement`, nearest first.
    pub fn window_within(
        &self,
        displacement: f64,
    ) -> impl Iterator<Item = (&Word, &PslElement)> + '_ {
        self.window
            .iter()
            .take_while(move |t| t.0 <= displacement)
            .map(|t| (&t.1, &t.2))
    }

    pub fn distance(&self, x: &PslElement, y: &PslElement) -> f64 {
        self.nearest(x, y)
            .map(|n| n.distance)
            .unwrap_or(f64::INFINITY)
    }

    pub fn nearest(&self, x: &PslElement, y: &PslElement) -> Result<Nearest, GroupError> {
        let (x0, wx) = self.group.reduce_frame(x)?;
        let (y0, wy) = self.group.reduce_frame(y)?;
        let i = Complex64::i();
        let zx = x0.base_point();
        let zy = y0.base_point();
        let rx = cosh_distance(zx, i).max(1.0).acosh();
        let ry = cosh_distance(zy, i).max(1.0).acosh();
        let x0_inv = x0.inverse().rep();
        let y0m = y0.rep();
        let mut best = f64::INFINITY;
        let mut arg = 0usize;
        for (idx, (disp, _, rho)) in self.window.iter().enumerate() {
            let gap = disp - rx - ry;
            if gap > 0.0 && lower_bound_from_base(gap) >= best {
                break;
            }
            // local_distance(ρ x0, y0) = ‖x0⁻¹ ρ⁻¹ y0 ∓ 1‖
            let m = x0_inv.mul(&rho.inverse().rep()).mul(&y0m);
            let d = distance_to_identity(&m);
            if d < best {
                best = d;
                arg = idx;
            }
        }
        let (_, w0, rho0) = &self.window[arg];
        // ρ·x ≈ y with ρ = wy⁻¹ ρ0 wx
        let wy_inv = self.group.inverse_word(&wy);
        let word = self.group.concat(&[&wy_inv, w0, &wx]);
        let rho = self.group.evaluate(&wy_inv)? * *rho0 * self.group.evaluate(&wx)?;
        Ok(Nearest {
            distance: best,
            rho,
            word,
            window_length: w0.len(),
        })
    }

    /// Best `c_u b_s a_t` decomposition of `x⁻¹ρ⁻¹y` over the window, ranked by
    /// `|u|+|s|` among candidates with `|u|, |s| < radius` and `|t| ≤ t_max`.
    pub fn section_search(
        &self,
        x: &PslElement,
        y: &PslElement,
        radius: f64,
        t_max: f64,
    ) -> Result<Option<SectionHit>, GroupError> {
        let (x0, wx) = self.group.reduce_frame(x)?;
        let (y0, wy) = self.group.reduce_frame(y)?;
        let i = Complex64::i();
        let rx = cosh_distance(x0.base_point(), i).max(1.0).acosh();
        let ry = cosh_distance(y0.base_point(), i).max(1.0).acosh();
        // |u|,|s| < r and |t| ≤ t_max bound ‖c_u b_s a_t ∓ 1‖
        let cap = section_distance_cap(radius, t_max);
        let x0_inv = x0.inverse();
        let mut best: Option<(f64, usize, NsaTriple)> = None;
        for (idx, (disp, _, rho)) in self.window.iter().enumerate() {
            let gap = disp - rx - ry;
            if gap > 0.0 && lower_bound_from_base(gap) > cap {
                break;
            }
            let m = x0_inv * rho.inverse() * y0;
            if distance_to_identity(&m.rep()) > cap {
                continue;
            }
            let Ok(tsu) = nsa_decompose(&m) else { continue };
            if tsu.u.abs() < radius && tsu.s.abs() < radius && tsu.t.abs() <= t_max {
                let score = tsu.u.abs() + tsu.s.abs();
                if best.as_ref().is_none_or(|b| score < b.0) {
                    best = Some((score, idx, tsu));
                }
            }
        }
        let Some((_, idx, coords)) = best else {
            return Ok(None);
        };
        let (_, w0, rho0) = &self.window[idx];
        let wy_inv = self.group.inverse_word(&wy);
        let word = self.group.concat(&[&wy_inv, w0, &wx]);
        let rho = self.group.evaluate(&wy_inv)? * *rho0 * self.group.evaluate(&wx)?;
        Ok(Some(SectionHit {
            coords,
            rho,
            word,
            window_length: w0.len(),
        }))
    }
}

/// Result of [`QuotientMetric::section_search`]: `y = ρ·x·c_u b_s a_t`.
#[derive(Debug, Clone)]
pub struct SectionHit {
    pub coords: NsaTriple,
    pub rho: PslElement,
    pub word: Word,
    pub window_length: usize,
}

/// Smallest `‖M ∓ 1‖_F` compatible with `d(M·i, i) = dist`.
fn lower_bound_from_base(dist: f64) -> f64 {
    (2.0 * dist.cosh()).sqrt() - std::f64::consts::SQRT_2
}

fn section_distance_cap(radius: f64, t_max: f64) -> f64 {
    // C_u B_s A_t - 1 = [[e^{t/2}-1, s e^{-t/2}], [u e^{t/2}, (1+su) e^{-t/2} - 1]]
    let e = (0.5 * t_max).exp();
    let q = e - 1.0;
    let r = radius;
    (q * q + 2.0 * r * r * e * e + (q + r * r * e).powi(2)).sqrt() + 1e-12
}

/// `min_ρ local_distance(ρ·x, y)` over the ball of radius `n`, raising the
/// radius while the minimiser sits on the window boundary (up to 8).
pub fn quotient_distance(
    group: &FuchsianGroup,
    x: &QuotientPoint,
    y: &QuotientPoint,
    n: usize,
) -> Result<f64, GroupError> {
    let mut radius = n.max(1);
    loop {
        let metric = QuotientMetric::new(group, radius);
        let a = metric.nearest(&x.frame, &y.frame)?;
        let b = metric.nearest(&y.frame, &x.frame)?;
        let best = if a.distance <= b.distance { &a } else { &b };
        if best.window_length < radius || radius >= 8 {
            return Ok(a.distance.min(b.distance));
        }
        radius += 1;
    }
}


#[cfg(test)]
mod properties {
    use super::*;
    use crate::moebius::{flow, local_distance, rotation};
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn reduction_stays_in_the_orbit(p in -3.0..3.0f64, t in -3.0..3.0f64, q in -3.0..3.0f64) {
            let group = FuchsianGroup::bolza();
            let g = rotation(p) * flow(t) * rotation(q);
            let (g0, w) = group.reduce_frame(&g).unwrap();
            let rho = group.evaluate(&w).unwrap();
            prop_assert!(local_distance(&(rho * g), &g0) < 1e-9);
        }
    }
}
