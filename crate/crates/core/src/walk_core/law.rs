use super::Walk;
use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::distr::{Distribution, Uniform};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::fmt;

/// A centred step law.
#[derive(Clone, Debug)]
pub enum StepLaw {
    Lattice(LatticeLaw),
    Continuous(ContinuousLaw),
}

/// Finite-support law on λℤ. Steps are stored in units of λ and the
/// probabilities as integer weights over a common denominator.
#[derive(Clone, Debug)]
pub struct LatticeLaw {
    name: String,
    lambda_num: i64,
    lambda_den: i64,
    steps: Vec<i64>,
    weights: Vec<u64>,
    denom: u64,
    probs: Vec<f64>,
    variance: f64,
    sampler: Sampler,
}

#[derive(Clone, Debug)]
enum Sampler {
    Pow2 { shift: u32, table: Vec<i64> },
    Table { dist: Uniform<u32>, table: Vec<i64> },
    Cumulative { dist: Uniform<u32>, cum: Vec<u32>, steps: Vec<i64> },
}

const TABLE_LIMIT: u64 = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ContinuousLaw {
    Gauss { sigma: f64 },
    Unif { a: f64 },
}

fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a number: {s:?}"));
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| bad())?;
        let q: BigInt = q.trim().parse().map_err(|_| bad())?;
        if q.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(p, q));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits: BigInt = format!("0{int}{frac}").parse().map_err(|_| bad())?;
    let scale = num_traits::pow(BigInt::from(10), frac.len());
    let r = BigRational::new(digits, scale);
    Ok(if neg { -r } else { r })
}

fn ratio_f64(r: &BigRational) -> f64 {
    r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN)
}

impl LatticeLaw {
    /// Builds a law from exact `(value, probability)` pairs.
    pub fn from_pairs(name: &str, pairs: &[(BigRational, BigRational)]) -> Result<Self> {
        let mut merged: Vec<(BigRational, BigRational)> = Vec::new();
        for (v, p) in pairs {
            if p.is_negative() {
                return Err(Error::InvalidLaw(format!("negative probability {p} at {v}")));
            }
            if p.is_zero() {
                continue;
            }
            match merged.iter_mut().find(|(w, _)| w == v) {
                Some((_, q)) => *q += p,
                None => merged.push((v.clone(), p.clone())),
            }
        }
        merged.sort_by(|a, b| a.0.cmp(&b.0));
        let total: BigRational = merged.iter().map(|(_, p)| p.clone()).sum();
        if total != BigRational::one() {
            return Err(Error::InvalidLaw(format!("probabilities sum to {total}, not 1")));
        }
        let mean: BigRational = merged.iter().map(|(v, p)| v * p).sum();
        if !mean.is_zero() {
            return Err(Error::InvalidLaw(format!("nonzero mean {mean}")));
        }
        let var: BigRational = merged.iter().map(|(v, p)| v * v * p).sum();
        if var.is_zero() {
            return Err(Error::InvalidLaw("zero variance".into()));
        }

        let q = merged
            .iter()
            .fold(BigInt::one(), |acc, (v, _)| acc.lcm(v.denom()));
        let ints: Vec<BigInt> = merged
            .iter()
            .map(|(v, _)| (v * BigRational::from_integer(q.clone())).to_integer())
            .collect();
        let g = ints
            .iter()
            .filter(|v| !v.is_zero())
            .fold(BigInt::zero(), |acc, v| acc.gcd(v));
        let too_big = || Error::InvalidLaw("support values too large".into());
        let steps = ints
            .iter()
            .map(|v| (v / &g).to_i64().ok_or_else(too_big))
            .collect::<Result<Vec<_>>>()?;
        let lam = BigRational::new(g, q);
        let lambda_num = lam.numer().to_i64().ok_or_else(too_big)?;
        let lambda_den = lam.denom().to_i64().ok_or_else(too_big)?;

        let d = merged
            .iter()
            .fold(BigInt::one(), |acc, (_, p)| acc.lcm(p.denom()));
        let denom = d
            .to_u64()
            .filter(|&d| d <= u32::MAX as u64)
            .ok_or_else(|| Error::InvalidLaw("probability denominators too large".into()))?;
        let weights: Vec<u64> = merged
            .iter()
            .map(|(_, p)| (p * BigRational::from_integer(d.clone())).to_integer().to_u64().unwrap())
            .collect();
        let probs: Vec<f64> = weights.iter().map(|&w| w as f64 / denom as f64).collect();
        let variance = ratio_f64(&var);
        let sampler = Sampler::new(&steps, &weights, denom);
        Ok(Self {
            name: name.to_string(),
            lambda_num,
            lambda_den,
            steps,
            weights,
            denom,
            probs,
            variance,
            sampler,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Support in units of λ, ascending.
    pub fn steps(&self) -> &[i64] {
        &self.steps
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Integer weights over [`Self::denom`].
    pub fn weights(&self) -> &[u64] {
        &self.weights
    }

    pub fn denom(&self) -> u64 {
        self.denom
    }

    pub fn lambda(&self) -> f64 {
        self.lambda_num as f64 / self.lambda_den as f64
    }

    /// Variance in real units.
    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn max_up(&self) -> i64 {
        (*self.steps.last().unwrap()).max(0)
    }

    pub fn max_down(&self) -> i64 {
        (-self.steps[0]).max(0)
    }

    pub fn max_step(&self) -> i64 {
        self.max_up().max(self.max_down())
    }

    /// The same law reflected through 0.
    pub fn mirrored(&self) -> Self {
        let mut pairs: Vec<(i64, u64)> = self
            .steps
            .iter()
            .zip(&self.weights)
            .map(|(&s, &w)| (-s, w))
            .collect();
        pairs.sort();
        let steps: Vec<i64> = pairs.iter().map(|p| p.0).collect();
        let weights: Vec<u64> = pairs.iter().map(|p| p.1).collect();
        let probs = weights.iter().map(|&w| w as f64 / self.denom as f64).collect();
        let sampler = Sampler::new(&steps, &weights, self.denom);
        Self {
            name: format!("{}-mirrored", self.name),
            steps,
            weights,
            probs,
            sampler,
            ..self.clone()
        }
    }

    /// Canonical textual form accepted by [`StepLaw::parse`].
    pub fn spec_string(&self) -> String {
        let body: Vec<String> = self
            .steps
            .iter()
            .zip(&self.weights)
            .map(|(&s, &w)| {
                let v = BigRational::new(
                    BigInt::from(s) * BigInt::from(self.lambda_num),
                    BigInt::from(self.lambda_den),
                );
                let p = BigRational::new(BigInt::from(w), BigInt::from(self.denom));
                format!("{v}:{p}")
            })
            .collect();
        format!("lattice: {}", body.join(", "))
    }
}

impl Sampler {
    fn new(steps: &[i64], weights: &[u64], denom: u64) -> Self {
        let table = || -> Vec<i64> {
            steps
                .iter()
                .zip(weights)
                .flat_map(|(&s, &w)| std::iter::repeat_n(s, w as usize))
                .collect()
        };
        if denom.is_power_of_two() && denom <= TABLE_LIMIT {
            Sampler::Pow2 {
                shift: 32 - denom.trailing_zeros(),
                table: table(),
            }
        } else {
            let dist = Uniform::new(0u32, denom as u32).expect("denominator is positive");
            if denom <= TABLE_LIMIT {
                Sampler::Table { dist, table: table() }
            } else {
                let mut acc = 0u64;
                let cum = weights
                    .iter()
                    .map(|&w| {
                        acc += w;
                        acc as u32
                    })
                    .collect();
                Sampler::Cumulative {
                    dist,
                    cum,
                    steps: steps.to_vec(),
                }
            }
        }
    }

    #[inline]
    fn draw<R: RngCore + ?Sized>(&self, rng: &mut R) -> i64 {
        match self {
            Sampler::Pow2 { shift, table } => {
                let u = rng.next_u32();
                // shift == 32 only for the degenerate one-atom law, rejected earlier.
                table[(u >> shift) as usize]
            }
            Sampler::Table { dist, table } => table[dist.sample(rng) as usize],
            Sampler::Cumulative { dist, cum, steps } => {
                let u = dist.sample(rng);
                steps[cum.partition_point(|&c| c <= u)]
            }
        }
    }
}

impl Walk for LatticeLaw {
    type Site = i64;

    #[inline]
    fn increment<R: RngCore + ?Sized>(&self, rng: &mut R) -> i64 {
        self.sampler.draw(rng)
    }

    fn scale(&self) -> f64 {
        self.lambda()
    }

    fn sigma_site(&self) -> f64 {
        self.variance.sqrt() / self.lambda()
    }

    fn site_of(&self, x: f64) -> Result<i64> {
        let k = x / self.lambda();
        let r = k.round();
        if (k - r).abs() > 1e-9 * k.abs().max(1.0) {
            return Err(Error::Domain(format!(
                "{x} is not a multiple of the span {}",
                self.lambda()
            )));
        }
        Ok(r as i64)
    }
}

impl ContinuousLaw {
    pub fn variance(&self) -> f64 {
        match *self {
            ContinuousLaw::Gauss { sigma } => sigma * sigma,
            ContinuousLaw::Unif { a } => a * a / 3.0,
        }
    }

    pub fn max_step(&self) -> f64 {
        match *self {
            ContinuousLaw::Gauss { .. } => f64::INFINITY,
            ContinuousLaw::Unif { a } => a,
        }
    }

    pub fn name(&self) -> String {
        match *self {
            ContinuousLaw::Gauss { sigma } if sigma == 1.0 => "GAUSS".into(),
            ContinuousLaw::Gauss { sigma } => format!("GAUSS({sigma})"),
            ContinuousLaw::Unif { a } if a == 1.0 => "UNIF".into(),
            ContinuousLaw::Unif { a } => format!("UNIF({a})"),
        }
    }

    pub fn spec_string(&self) -> String {
        match *self {
            ContinuousLaw::Gauss { sigma } => format!("gauss:{sigma}"),
            ContinuousLaw::Unif { a } => format!("unif:{a}"),
        }
    }
}

impl Walk for ContinuousLaw {
    type Site = f64;

    #[inline]
    fn increment<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ContinuousLaw::Gauss { sigma } => {
                let z: f64 = rng.sample(StandardNormal);
                z * sigma
            }
            ContinuousLaw::Unif { a } => (rng.random::<f64>() * 2.0 - 1.0) * a,
        }
    }

    fn scale(&self) -> f64 {
        1.0
    }

    fn sigma_site(&self) -> f64 {
        self.variance().sqrt()
    }

    fn site_of(&self, x: f64) -> Result<f64> {
        if x.is_finite() {
            Ok(x)
        } else {
            Err(Error::Domain(format!("non-finite position {x}")))
        }
    }
}

fn int_pairs(pairs: &[(i64, i64, i64)]) -> Vec<(BigRational, BigRational)> {
    pairs
        .iter()
        .map(|&(v, p, q)| {
            (
                BigRational::from_integer(BigInt::from(v)),
                BigRational::new(BigInt::from(p), BigInt::from(q)),
            )
        })
        .collect()
}

impl StepLaw {
    pub fn srw() -> Self {
        Self::builtin("SRW", &[(-1, 1, 2), (1, 1, 2)])
    }

    pub fn tent() -> Self {
        Self::builtin("TENT", &[(-2, 1, 4), (-1, 1, 4), (1, 1, 4), (2, 1, 4)])
    }

    pub fn skew() -> Self {
        Self::builtin("SKEW", &[(-3, 2, 5), (2, 3, 5)])
    }

    pub fn gauss() -> Self {
        StepLaw::Continuous(ContinuousLaw::Gauss { sigma: 1.0 })
    }

    pub fn unif() -> Self {
        StepLaw::Continuous(ContinuousLaw::Unif { a: 1.0 })
    }

    fn builtin(name: &str, pairs: &[(i64, i64, i64)]) -> Self {
        StepLaw::Lattice(LatticeLaw::from_pairs(name, &int_pairs(pairs)).expect("builtin law"))
    }

    /// Parses a law description.
    ///
    /// ```text
    /// srw | tent | skew | gauss | unif
    /// gauss:SIGMA | unif:A                 (uniform on [-A, A])
    /// lattice: V:P, V:P, ...               (V, P decimals or p/q)
    /// ```
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        let lower = t.to_ascii_lowercase();
        let (head, arg) = match lower.split_once(':') {
            Some((h, a)) => (h.trim().to_string(), Some(a.trim().to_string())),
            None => (lower.clone(), None),
        };
        let positive = |a: &str| -> Result<f64> {
            let v: f64 = a
                .parse()
                .map_err(|_| Error::Parse(format!("bad parameter {a:?}")))?;
            if v.is_finite() && v > 0.0 {
                Ok(v)
            } else {
                Err(Error::InvalidLaw(format!("parameter must be positive, got {a}")))
            }
        };
        match (head.as_str(), arg.as_deref()) {
            ("srw", None) => Ok(Self::srw()),
            ("tent", None) => Ok(Self::tent()),
            ("skew", None) => Ok(Self::skew()),
            ("gauss", None) => Ok(Self::gauss()),
            ("unif", None) => Ok(Self::unif()),
            ("gauss", Some(a)) => Ok(StepLaw::Continuous(ContinuousLaw::Gauss { sigma: positive(a)? })),
            ("unif", Some(a)) => Ok(StepLaw::Continuous(ContinuousLaw::Unif { a: positive(a)? })),
            ("lattice", Some(body)) => {
                let mut pairs = Vec::new();
                for item in body.split(',').filter(|s| !s.trim().is_empty()) {
                    let (v, p) = item
                        .split_once(':')
                        .ok_or_else(|| Error::Parse(format!("expected value:prob, got {item:?}")))?;
                    pairs.push((parse_rational(v)?, parse_rational(p)?));
                }
                if pairs.is_empty() {
                    return Err(Error::Parse("empty lattice support".into()));
                }
                Ok(StepLaw::Lattice(LatticeLaw::from_pairs("lattice", &pairs)?))
            }
            _ => Err(Error::Parse(format!("unknown step law {t:?}"))),
        }
    }

    pub fn name(&self) -> String {
        match self {
            StepLaw::Lattice(l) => l.name().to_string(),
            StepLaw::Continuous(c) => c.name(),
        }
    }

    pub fn spec_string(&self) -> String {
        match self {
            StepLaw::Lattice(l) => l.spec_string(),
            StepLaw::Continuous(c) => c.spec_string(),
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            StepLaw::Lattice(l) => l.variance(),
            StepLaw::Continuous(c) => c.variance(),
        }
    }

    pub fn sigma(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Span λ, or `None` for non-arithmetic laws.
    pub fn lambda(&self) -> Option<f64> {
        match self {
            StepLaw::Lattice(l) => Some(l.lambda()),
            StepLaw::Continuous(_) => None,
        }
    }

    pub fn max_step(&self) -> f64 {
        match self {
            StepLaw::Lattice(l) => l.max_step() as f64 * l.lambda(),
            StepLaw::Continuous(c) => c.max_step(),
        }
    }

    pub fn as_lattice(&self) -> Result<&LatticeLaw> {
        match self {
            StepLaw::Lattice(l) => Ok(l),
            StepLaw::Continuous(c) => Err(Error::Unsupported(format!(
                "{} is not a lattice law",
                c.name()
            ))),
        }
    }
}

impl fmt::Display for StepLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walk_core::derive_substream;

    fn lat(s: &str) -> LatticeLaw {
        StepLaw::parse(s).unwrap().as_lattice().unwrap().clone()
    }

    #[test]
    fn builtin_moments() {
        let srw = lat("srw");
        assert_eq!(srw.lambda(), 1.0);
        assert_eq!(srw.variance(), 1.0);
        let tent = lat("tent");
        assert_eq!(tent.variance(), 2.5);
        assert_eq!(tent.lambda(), 1.0);
        let skew = lat("skew");
        assert_eq!(skew.variance(), 6.0);
        assert_eq!(skew.lambda(), 1.0);
        assert_eq!(skew.weights(), &[2, 3]);
        assert_eq!(StepLaw::unif().variance(), 1.0 / 3.0);
        assert_eq!(StepLaw::gauss().variance(), 1.0);
    }

    #[test]
    fn decimal_grammar_is_exact() {
        let a = lat("lattice: -2:0.25, -1:0.25, 1:0.25, 2:0.25");
        assert_eq!(a.steps(), lat("tent").steps());
        assert_eq!(a.denom(), 4);
        let b = lat("lattice: -3:2/5, 2:0.6");
        assert_eq!(b.weights(), &[2, 3]);
    }

    #[test]
    fn span_is_detected() {
        let l = lat("lattice: -4:0.5, 4:0.5");
        assert_eq!(l.lambda(), 4.0);
        assert_eq!(l.steps(), &[-1, 1]);
        let h = lat("lattice: -0.5:1/2, 0.5:1/2");
        assert_eq!(h.lambda(), 0.5);
        let lazy = lat("lattice: -2:1/4, 0:1/2, 2:1/4");
        assert_eq!(lazy.lambda(), 2.0);
        assert_eq!(lazy.steps(), &[-1, 0, 1]);
        assert_eq!(h.site_of(1.5).unwrap(), 3);
        assert!(h.site_of(0.25).is_err());
    }

    #[test]
    fn invalid_laws_are_rejected() {
        assert!(matches!(StepLaw::parse("lattice: 1:0.5, 2:0.5"), Err(Error::InvalidLaw(_))));
        assert!(matches!(StepLaw::parse("lattice: 0:1"), Err(Error::InvalidLaw(_))));
        assert!(matches!(
            StepLaw::parse("lattice: -1:-0.5, 1:1.5"),
            Err(Error::InvalidLaw(_))
        ));
        assert!(matches!(StepLaw::parse("lattice: -1:0.5, 1:0.4"), Err(Error::InvalidLaw(_))));
        assert!(StepLaw::parse("cauchy").is_err());
        assert!(StepLaw::parse("gauss:-1").is_err());
    }

    #[test]
    fn spec_string_round_trips() {
        for s in ["srw", "tent", "skew", "lattice: -0.5:1/2, 0.5:1/2", "gauss:2", "unif"] {
            let law = StepLaw::parse(s).unwrap();
            let again = StepLaw::parse(&law.spec_string()).unwrap();
            assert_eq!(law.spec_string(), again.spec_string());
        }
    }

    #[test]
    fn mirrored_law_negates_support() {
        let m = lat("skew").mirrored();
        assert_eq!(m.steps(), &[-2, 3]);
        assert_eq!(m.weights(), &[3, 2]);
    }

    #[test]
    fn empirical_step_mean_is_centred() {
        let n = 1_000_000;
        for law in [StepLaw::srw(), StepLaw::tent(), StepLaw::skew(), StepLaw::gauss(), StepLaw::unif()] {
            let mut rng = derive_substream(11, 0);
            let sum: f64 = match &law {
                StepLaw::Lattice(l) => (0..n).map(|_| l.increment(&mut rng) as f64 * l.lambda()).sum(),
                StepLaw::Continuous(c) => (0..n).map(|_| c.increment(&mut rng)).sum(),
            };
            let mean = sum / n as f64;
            assert!(
                mean.abs() < 4.0 * law.sigma() / (n as f64).sqrt(),
                "{law}: mean {mean}"
            );
        }
    }

    #[test]
    fn lattice_frequencies_match_weights() {
        let l = lat("skew");
        let mut rng = derive_substream(3, 9);
        let n = 200_000;
        let ups = (0..n).filter(|_| l.increment(&mut rng) == 2).count() as f64 / n as f64;
        assert!((ups - 0.6).abs() < 4.0 * (0.24f64 / n as f64).sqrt());
    }
}
