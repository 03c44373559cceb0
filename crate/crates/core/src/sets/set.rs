use crate::error::{Error, Result};
use crate::walk_core::{ContinuousLaw, LatticeLaw, Site, StepLaw, Walk};
use serde::{Deserialize, Serialize};
use std::fmt::Debug;

/// Zone flags of a position relative to `B`.
pub const HULL: u8 = 1;
pub const PLUS: u8 = 2;
pub const MINUS: u8 = 4;
pub const SET: u8 = 8;

/// One component of an avoid set, in real coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Component {
    Interval {
        a: f64,
        b: f64,
        a_closed: bool,
        b_closed: bool,
    },
    Points(Vec<f64>),
}

impl Component {
    fn contains(&self, x: f64) -> bool {
        match self {
            Component::Interval { a, b, a_closed, b_closed } => {
                (x > *a || (*a_closed && x == *a)) && (x < *b || (*b_closed && x == *b))
            }
            Component::Points(ps) => ps.contains(&x),
        }
    }

    fn bounds(&self) -> (f64, f64) {
        match self {
            Component::Interval { a, b, .. } => (*a, *b),
            Component::Points(ps) => (
                ps.iter().copied().fold(f64::INFINITY, f64::min),
                ps.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ),
        }
    }

    fn has_interior(&self) -> bool {
        matches!(self, Component::Interval { a, b, .. } if b > a)
    }

    fn spec_string(&self) -> String {
        match self {
            Component::Interval { a, b, a_closed, b_closed } => {
                let kind = match (a_closed, b_closed) {
                    (false, false) => "open",
                    (true, true) => "closed",
                    (false, true) => "lopen",
                    (true, false) => "ropen",
                };
                format!("interval({a},{b},{kind})")
            }
            Component::Points(ps) => {
                let body: Vec<String> = ps.iter().map(|p| p.to_string()).collect();
                format!("points{{{}}}", body.join(","))
            }
        }
    }
}

/// A bounded avoid set as written by the user, before snapping to a law's
/// state space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AvoidSet {
    components: Vec<Component>,
}

fn num(s: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("not a number: {s:?}")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidSet(format!("unbounded component bound {s}")))
    }
}

fn parse_component(text: &str) -> Result<Component> {
    let t = text.trim().to_ascii_lowercase();
    if let Some(body) = t.strip_prefix("interval(").and_then(|r| r.strip_suffix(')')) {
        let parts: Vec<&str> = body.split(',').map(str::trim).collect();
        let (a, b, kind) = match parts.as_slice() {
            [a, b] => (num(a)?, num(b)?, "open"),
            [a, b, k] => (num(a)?, num(b)?, *k),
            _ => return Err(Error::Parse(format!("bad interval {text:?}"))),
        };
        let (a_closed, b_closed) = match kind {
            "open" => (false, false),
            "closed" => (true, true),
            "lopen" => (false, true),
            "ropen" => (true, false),
            other => return Err(Error::Parse(format!("unknown interval kind {other:?}"))),
        };
        if b < a || (b == a && !(a_closed && b_closed)) {
            return Err(Error::InvalidSet(format!("empty interval {text:?}")));
        }
        return Ok(Component::Interval { a, b, a_closed, b_closed });
    }
    if let Some(body) = t.strip_prefix("points{").and_then(|r| r.strip_suffix('}')) {
        let mut ps = body
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(num)
            .collect::<Result<Vec<_>>>()?;
        if ps.is_empty() {
            return Err(Error::InvalidSet("empty point list".into()));
        }
        ps.sort_by(f64::total_cmp);
        ps.dedup();
        return Ok(Component::Points(ps));
    }
    Err(Error::Parse(format!("unknown set component {text:?}")))
}

/// Splits on `+` outside brackets, so signed bounds stay intact.
fn split_union(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in text.char_indices() {
        match c {
            '(' | '{' => depth += 1,
            ')' | '}' => depth -= 1,
            '+' if depth == 0 => {
                out.push(&text[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&text[start..]);
    out
}

impl AvoidSet {
    pub fn new(components: Vec<Component>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidSet("no components".into()));
        }
        for (i, c) in components.iter().enumerate() {
            let (lo, hi) = c.bounds();
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidSet("unbounded component".into()));
            }
            for d in &components[i + 1..] {
                if overlaps(c, d) {
                    return Err(Error::InvalidSet(format!(
                        "components {} and {} intersect",
                        c.spec_string(),
                        d.spec_string()
                    )));
                }
            }
        }
        Ok(Self { components })
    }

    /// Parses `interval(a,b,open|closed|lopen|ropen)`, `points{p,q,...}` and
    /// unions of those joined by `+`.
    pub fn parse(text: &str) -> Result<Self> {
        let comps = split_union(text)
            .into_iter()
            .map(parse_component)
            .collect::<Result<Vec<_>>>()?;
        Self::new(comps)
    }

    pub fn interval(a: f64, b: f64, a_closed: bool, b_closed: bool) -> Self {
        Self::new(vec![Component::Interval { a, b, a_closed, b_closed }]).expect("valid interval")
    }

    /// The open interval `(-d, d)`.
    pub fn symmetric_open(d: f64) -> Self {
        Self::interval(-d, d, false, false)
    }

    pub fn points(ps: &[f64]) -> Self {
        let mut v = ps.to_vec();
        v.sort_by(f64::total_cmp);
        v.dedup();
        Self::new(vec![Component::Points(v)]).expect("valid points")
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn contains(&self, x: f64) -> bool {
        self.components.iter().any(|c| c.contains(x))
    }

    pub fn spec_string(&self) -> String {
        let parts: Vec<String> = self.components.iter().map(Component::spec_string).collect();
        parts.join("+")
    }
}

fn overlaps(c: &Component, d: &Component) -> bool {
    match (c, d) {
        (Component::Points(ps), other) | (other, Component::Points(ps)) => {
            ps.iter().any(|&p| other.contains(p))
        }
        (
            Component::Interval { a: a1, b: b1, a_closed: ac1, b_closed: bc1 },
            Component::Interval { a: a2, b: b2, a_closed: ac2, b_closed: bc2 },
        ) => {
            let lo = a1.max(*a2);
            let hi = b1.min(*b2);
            if lo < hi {
                return true;
            }
            if lo > hi {
                return false;
            }
            // Touching at a single point: shared only if both ends include it.
            let in1 = (lo > *a1 || *ac1) && (lo < *b1 || *bc1);
            let in2 = (lo > *a2 || *ac2) && (lo < *b2 || *bc2);
            in1 && in2
        }
    }
}

/// Membership and edges of a normalized set in site coordinates.
pub trait Region<S: Site>: Debug + Send + Sync {
    fn contains(&self, x: S) -> bool;
    /// `l = inf B`.
    fn lo(&self) -> S;
    /// `r = sup B`.
    fn hi(&self) -> S;

    #[inline]
    fn zone(&self, x: S) -> u8 {
        if self.contains(x) {
            return SET | HULL;
        }
        let mut z = 0;
        if x >= self.lo() && x <= self.hi() {
            z |= HULL;
        }
        if x >= self.hi() {
            z |= PLUS;
        }
        if x <= self.lo() {
            z |= MINUS;
        }
        z
    }

    fn in_hull(&self, x: S) -> bool {
        x >= self.lo() && x <= self.hi()
    }
}

/// `B ∩ λℤ` as explicit sites.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeSet {
    points: Vec<i64>,
    mask: Vec<bool>,
}

impl LatticeSet {
    pub fn from_sites(mut points: Vec<i64>) -> Result<Self> {
        points.sort_unstable();
        points.dedup();
        if points.is_empty() {
            return Err(Error::InvalidSet(
                "set contains no lattice point (empty interior in the state space)".into(),
            ));
        }
        let l = points[0];
        let span = (points[points.len() - 1] - l) as usize + 1;
        let mut mask = vec![false; span];
        for &p in &points {
            mask[(p - l) as usize] = true;
        }
        Ok(Self { points, mask })
    }

    pub fn sites(&self) -> &[i64] {
        &self.points
    }
}

impl Region<i64> for LatticeSet {
    #[inline]
    fn contains(&self, x: i64) -> bool {
        let i = x - self.points[0];
        i >= 0 && (i as usize) < self.mask.len() && self.mask[i as usize]
    }
    #[inline]
    fn lo(&self) -> i64 {
        self.points[0]
    }
    #[inline]
    fn hi(&self) -> i64 {
        self.points[self.points.len() - 1]
    }
    #[inline]
    fn zone(&self, x: i64) -> u8 {
        let i = x - self.points[0];
        if i < 0 {
            MINUS
        } else if i as usize >= self.mask.len() {
            PLUS
        } else if self.mask[i as usize] {
            SET | HULL
        } else {
            HULL
        }
    }
}

/// A set in `ℝ` with non-empty interior.
#[derive(Clone, Debug, PartialEq)]
pub struct RealSet {
    components: Vec<Component>,
    l: f64,
    r: f64,
}

impl RealSet {
    pub fn components(&self) -> &[Component] {
        &self.components
    }
}

impl Region<f64> for RealSet {
    #[inline]
    fn contains(&self, x: f64) -> bool {
        x >= self.l && x <= self.r && self.components.iter().any(|c| c.contains(x))
    }
    #[inline]
    fn lo(&self) -> f64 {
        self.l
    }
    #[inline]
    fn hi(&self) -> f64 {
        self.r
    }
}

fn snap(set: &AvoidSet, law: &LatticeLaw) -> Result<LatticeSet> {
    let lam = law.lambda();
    let on = |v: f64| v.abs().max(1.0) * 1e-12;
    let mut sites = Vec::new();
    for c in set.components() {
        match c {
            Component::Interval { a, b, .. } => {
                let lo = (a / lam - on(a / lam)).ceil() as i64;
                let hi = (b / lam + on(b / lam)).floor() as i64;
                for k in lo..=hi {
                    let v = k as f64 * lam;
                    let v = if (v - a).abs() <= on(*a) {
                        *a
                    } else if (v - b).abs() <= on(*b) {
                        *b
                    } else {
                        v
                    };
                    if c.contains(v) {
                        sites.push(k);
                    }
                }
            }
            Component::Points(ps) => {
                // Points off the lattice are not in the state space.
                sites.extend(ps.iter().filter_map(|&p| law.site_of(p).ok()));
            }
        }
    }
    LatticeSet::from_sites(sites)
}

fn realize(set: &AvoidSet) -> Result<RealSet> {
    if !set.components().iter().any(Component::has_interior) {
        return Err(Error::InvalidSet(
            "set has empty interior in the real line".into(),
        ));
    }
    let (l, r) = set
        .components()
        .iter()
        .map(Component::bounds)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, r), (a, b)| (l.min(a), r.max(b)));
    Ok(RealSet {
        components: set.components().to_vec(),
        l,
        r,
    })
}

/// A law together with the set snapped to its state space.
#[derive(Clone, Debug)]
pub enum Model {
    Lattice(LatticeLaw, LatticeSet),
    Real(ContinuousLaw, RealSet),
}

impl Model {
    pub fn new(law: &StepLaw, set: &AvoidSet) -> Result<Self> {
        match law {
            StepLaw::Lattice(l) => Ok(Model::Lattice(l.clone(), snap(set, l)?)),
            StepLaw::Continuous(c) => Ok(Model::Real(*c, realize(set)?)),
        }
    }

    /// `l` and `r` in real units.
    pub fn edges(&self) -> (f64, f64) {
        match self {
            Model::Lattice(w, b) => (w.real(b.lo()), w.real(b.hi())),
            Model::Real(_, b) => (b.lo(), b.hi()),
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        match self {
            Model::Lattice(w, b) => w.site_of(x).map(|s| b.contains(s)).unwrap_or(false),
            Model::Real(_, b) => b.contains(x),
        }
    }

    pub fn in_hull(&self, x: f64) -> bool {
        let (l, r) = self.edges();
        x >= l && x <= r
    }

    pub fn sigma(&self) -> f64 {
        match self {
            Model::Lattice(w, _) => w.variance().sqrt(),
            Model::Real(w, _) => w.variance().sqrt(),
        }
    }

    pub fn is_lattice(&self) -> bool {
        matches!(self, Model::Lattice(..))
    }
}

/// Runs `$body` with `$w: &impl Walk` and `$b: &impl Region` bound to the
/// concrete pair inside a [`Model`].
#[macro_export]
macro_rules! with_model {
    ($model:expr, |$w:ident, $b:ident| $body:expr) => {
        match $model {
            $crate::sets::Model::Lattice($w, $b) => $body,
            $crate::sets::Model::Real($w, $b) => $body,
        }
    };
}
