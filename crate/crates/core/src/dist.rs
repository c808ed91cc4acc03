//! Inter-arrival laws, their exact moments and reproducible sampling.
//!
//! Two kinds of law are supported: [`LatticeLaw`], a finite probability mass
//! function on `{d, 2d, ..., Md}` that drives the exact renewal tables, and
//! [`SmoothLaw`], a parametric continuous law on `(0, ∞)` used by the
//! simulators. [`Law`] wraps both and implements the textual grammar used on
//! the command line (`exp:rate=1`, `lattice:d=1;p=0.5,0.5`, ...).

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, Uniform};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Additive tolerance on `Σ p_m = 1`.
pub const PMF_SUM_TOLERANCE: f64 = 1e-12;

/// Mass left out when a geometric law is truncated to a finite pmf.
pub const GEOMETRIC_TAIL_MASS: f64 = 1e-15;

/// Mean, second moment and variance of a law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub second_moment: f64,
    pub variance: f64,
}

impl Moments {
    /// Builds the triple from mean and second moment; the variance is
    /// `Eξ² − μ²`, clamped at zero against rounding.
    pub fn from_raw(mean: f64, second_moment: f64) -> Self {
        let variance = (second_moment - mean * mean).max(0.0);
        Moments {
            mean,
            second_moment,
            variance,
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// A `d`-lattice law: `P{ξ = m·d} = p_m` for `m = 1..=M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeLaw {
    span: f64,
    pmf: Vec<f64>,
}

impl LatticeLaw {
    /// Validates and builds a lattice law. `pmf[0]` is `p_1`. Trailing zero
    /// masses are dropped.
    pub fn new(span: f64, pmf: Vec<f64>) -> Result<Self> {
        if !(span.is_finite() && span > 0.0) {
            return Err(Error::InvalidLaw(format!("span must be positive, got {span}")));
        }
        let mut pmf = pmf;
        while pmf.last() == Some(&0.0) {
            pmf.pop();
        }
        if pmf.is_empty() {
            return Err(Error::EmptyLaw);
        }
        if let Some(p) = pmf.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::InvalidLaw(format!("probability {p} is not a nonnegative number")));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > PMF_SUM_TOLERANCE {
            return Err(Error::InvalidLaw(format!("masses sum to {total}, not 1")));
        }
        let support: Vec<usize> = pmf
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(i, _)| i + 1)
            .collect();
        if !lattice_span_check(&support)? {
            return Err(Error::InvalidLaw(format!(
                "support {support:?} has a common factor; the span is not maximal"
            )));
        }
        Ok(LatticeLaw { span, pmf })
    }

    /// Point mass at `d`.
    pub fn point_mass(span: f64) -> Result<Self> {
        LatticeLaw::new(span, vec![1.0])
    }

    /// Geometric law `P{ξ = m} = p(1−p)^{m−1}` on `{1, 2, ...}` scaled by
    /// `span`, truncated once the tail mass falls below
    /// [`GEOMETRIC_TAIL_MASS`] and renormalized.
    pub fn geometric(p: f64, span: f64) -> Result<Self> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidLaw(format!("geometric parameter {p} not in (0, 1]")));
        }
        let mut pmf = Vec::new();
        let mut tail = 1.0;
        while tail >= GEOMETRIC_TAIL_MASS {
            pmf.push(tail * p);
            tail *= 1.0 - p;
        }
        let total: f64 = pmf.iter().sum();
        pmf.iter_mut().for_each(|q| *q /= total);
        LatticeLaw::new(span, pmf)
    }

    pub fn span(&self) -> f64 {
        self.span
    }

    /// `p_1..p_M`.
    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    /// Largest support index `M`.
    pub fn max_index(&self) -> usize {
        self.pmf.len()
    }

    /// `P{ξ = m·d}`, zero outside `1..=M`.
    pub fn mass(&self, m: usize) -> f64 {
        if m == 0 {
            0.0
        } else {
            self.pmf.get(m - 1).copied().unwrap_or(0.0)
        }
    }

    pub fn moments(&self) -> Moments {
        let d = self.span;
        let (mut mean, mut second) = (0.0, 0.0);
        for (i, p) in self.pmf.iter().enumerate() {
            let x = (i + 1) as f64 * d;
            mean += p * x;
            second += p * x * x;
        }
        Moments::from_raw(mean, second)
    }

    fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.pmf
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect()
    }
}

/// Returns whether the gcd of a support set of positive integers is 1.
pub fn lattice_span_check(support: &[usize]) -> Result<bool> {
    if support.is_empty() {
        return Err(Error::EmptyLaw);
    }
    if support.contains(&0) {
        return Err(Error::InvalidLaw("support indices start at 1".into()));
    }
    let g = support.iter().fold(0usize, |g, &m| gcd(g, m));
    Ok(g == 1)
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Continuous laws on `(0, ∞)` with closed-form moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SmoothLaw {
    Exponential { rate: f64 },
    Gamma { shape: f64, rate: f64 },
    /// Uniform on `[lo, hi]` with `0 <= lo < hi`.
    ShiftedUniform { lo: f64, hi: f64 },
}

impl SmoothLaw {
    pub fn exponential(rate: f64) -> Result<Self> {
        SmoothLaw::Exponential { rate }.validated()
    }

    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        SmoothLaw::Gamma { shape, rate }.validated()
    }

    pub fn shifted_uniform(lo: f64, hi: f64) -> Result<Self> {
        SmoothLaw::ShiftedUniform { lo, hi }.validated()
    }

    fn validated(self) -> Result<Self> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        let ok = match self {
            SmoothLaw::Exponential { rate } => positive(rate),
            SmoothLaw::Gamma { shape, rate } => positive(shape) && positive(rate),
            SmoothLaw::ShiftedUniform { lo, hi } => lo.is_finite() && lo >= 0.0 && hi.is_finite() && hi > lo,
        };
        if ok {
            Ok(self)
        } else {
            Err(Error::InvalidLaw(format!("bad parameters for {self:?}")))
        }
    }

    pub fn moments(&self) -> Moments {
        match *self {
            SmoothLaw::Exponential { rate } => Moments::from_raw(1.0 / rate, 2.0 / (rate * rate)),
            SmoothLaw::Gamma { shape, rate } => {
                let mean = shape / rate;
                let var = shape / (rate * rate);
                Moments {
                    mean,
                    second_moment: var + mean * mean,
                    variance: var,
                }
            }
            SmoothLaw::ShiftedUniform { lo, hi } => {
                let mean = 0.5 * (lo + hi);
                let var = (hi - lo) * (hi - lo) / 12.0;
                Moments {
                    mean,
                    second_moment: var + mean * mean,
                    variance: var,
                }
            }
        }
    }
}

/// Any supported law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Law {
    Lattice(LatticeLaw),
    Smooth(SmoothLaw),
}

impl Law {
    pub fn moments(&self) -> Moments {
        match self {
            Law::Lattice(l) => l.moments(),
            Law::Smooth(s) => s.moments(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.moments().mean
    }

    pub fn as_lattice(&self) -> Option<&LatticeLaw> {
        match self {
            Law::Lattice(l) => Some(l),
            Law::Smooth(_) => None,
        }
    }

    /// Lattice span, `None` for nonlattice laws.
    pub fn span(&self) -> Option<f64> {
        self.as_lattice().map(LatticeLaw::span)
    }

    /// Rate of an exponential law, the one smooth family with closed-form
    /// renewal functions.
    pub fn exponential_rate(&self) -> Option<f64> {
        match self {
            Law::Smooth(SmoothLaw::Exponential { rate }) => Some(*rate),
            _ => None,
        }
    }

    /// Smallest value in the support.
    pub fn infimum(&self) -> f64 {
        match self {
            Law::Lattice(l) => {
                let first = l.pmf.iter().position(|p| *p > 0.0).unwrap_or(0);
                (first + 1) as f64 * l.span
            }
            Law::Smooth(SmoothLaw::ShiftedUniform { lo, .. }) => *lo,
            Law::Smooth(_) => 0.0,
        }
    }

    pub fn sampler(&self) -> Sampler {
        match self {
            Law::Lattice(l) => Sampler::Lattice {
                span: l.span,
                cumulative: l.cumulative(),
            },
            Law::Smooth(SmoothLaw::Exponential { rate }) => {
                Sampler::Exponential(Exp::new(*rate).expect("validated rate"))
            }
            Law::Smooth(SmoothLaw::Gamma { shape, rate }) => {
                Sampler::Gamma(Gamma::new(*shape, 1.0 / rate).expect("validated gamma"))
            }
            Law::Smooth(SmoothLaw::ShiftedUniform { lo, hi }) => {
                Sampler::Uniform(Uniform::new_inclusive(*lo, *hi).expect("validated bounds"))
            }
        }
    }
}

impl From<LatticeLaw> for Law {
    fn from(l: LatticeLaw) -> Self {
        Law::Lattice(l)
    }
}

impl From<SmoothLaw> for Law {
    fn from(s: SmoothLaw) -> Self {
        Law::Smooth(s)
    }
}

impl fmt::Display for Law {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Law::Smooth(SmoothLaw::Exponential { rate }) => write!(f, "exp:rate={rate}"),
            Law::Smooth(SmoothLaw::Gamma { shape, rate }) => write!(f, "gamma:shape={shape},rate={rate}"),
            Law::Smooth(SmoothLaw::ShiftedUniform { lo, hi }) => write!(f, "unif:lo={lo},hi={hi}"),
            Law::Lattice(l) => {
                write!(f, "lattice:d={};p=", l.span)?;
                for (i, p) in l.pmf.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{p}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for Law {
    type Err = Error;

    /// Parses `exp:rate=..`, `gamma:shape=..,rate=..`, `unif:lo=..,hi=..`,
    /// `lattice:d=..;p=p1,p2,..` and the shorthand `geom:p=..[,d=..]`.
    fn from_str(spec: &str) -> Result<Self> {
        let fail = |reason: &str| Error::LawSpec {
            spec: spec.to_string(),
            reason: reason.to_string(),
        };
        let (family, params) = spec.trim().split_once(':').ok_or_else(|| fail("missing `family:`"))?;
        let number = |s: &str| -> Result<f64> { s.trim().parse::<f64>().map_err(|_| fail(&format!("`{s}` is not a number"))) };

        if family == "lattice" {
            let mut span = None;
            let mut pmf = None;
            for part in params.split(';') {
                match part.split_once('=') {
                    Some(("d", v)) => span = Some(number(v)?),
                    Some(("p", v)) => pmf = Some(v.split(',').map(number).collect::<Result<Vec<_>>>()?),
                    _ => return Err(fail(&format!("unknown lattice parameter `{part}`"))),
                }
            }
            let law = LatticeLaw::new(span.ok_or_else(|| fail("missing d"))?, pmf.ok_or_else(|| fail("missing p"))?)?;
            return Ok(Law::Lattice(law));
        }

        let mut kv = Vec::new();
        for part in params.split(',').filter(|s| !s.trim().is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(|| fail(&format!("expected key=value, got `{part}`")))?;
            kv.push((k.trim(), number(v)?));
        }
        let get = |key: &str| kv.iter().find(|(k, _)| *k == key).map(|(_, v)| *v);
        let require = |key: &str| get(key).ok_or_else(|| fail(&format!("missing {key}")));
        let known = |keys: &[&str]| -> Result<()> {
            match kv.iter().find(|(k, _)| !keys.contains(k)) {
                Some((k, _)) => Err(fail(&format!("unknown parameter `{k}`"))),
                None => Ok(()),
            }
        };
        match family {
            "exp" => {
                known(&["rate"])?;
                Ok(SmoothLaw::exponential(require("rate")?)?.into())
            }
            "gamma" => {
                known(&["shape", "rate"])?;
                Ok(SmoothLaw::gamma(require("shape")?, require("rate")?)?.into())
            }
            "unif" => {
                known(&["lo", "hi"])?;
                Ok(SmoothLaw::shifted_uniform(require("lo")?, require("hi")?)?.into())
            }
            "geom" => {
                known(&["p", "d"])?;
                Ok(LatticeLaw::geometric(require("p")?, get("d").unwrap_or(1.0))?.into())
            }
            other => Err(fail(&format!("unknown family `{other}`"))),
        }
    }
}

/// Per-law sampler with distribution objects built once.
#[derive(Debug, Clone)]
pub enum Sampler {
    Exponential(Exp<f64>),
    Gamma(Gamma<f64>),
    Uniform(Uniform<f64>),
    Lattice { span: f64, cumulative: Vec<f64> },
}

impl Sampler {
    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Exponential(e) => e.sample(rng),
            Sampler::Gamma(g) => g.sample(rng),
            Sampler::Uniform(u) => u.sample(rng),
            Sampler::Lattice { span, cumulative } => {
                let u: f64 = rng.random();
                let idx = cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1);
                (idx + 1) as f64 * span
            }
        }
    }
}

/// One independent random stream per replica, derived from a master seed.
///
/// Backed by ChaCha8 with the replica index as stream id, so a given
/// `(seed, index)` pair yields the same sequence on every platform and under
/// any thread schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub index: u64,
}

impl RngStream {
    pub fn new(seed: u64, index: u64) -> Self {
        RngStream { seed, index }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.index);
        rng
    }
}

/// `n` i.i.d. draws from `law` on the given stream.
pub fn sample(law: &Law, stream: RngStream, n: usize) -> Vec<f64> {
    let sampler = law.sampler();
    let mut rng = stream.rng();
    (0..n).map(|_| sampler.draw(&mut rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn exponential_moments() {
        let m = SmoothLaw::exponential(1.0).unwrap().moments();
        assert_eq!((m.mean, m.second_moment, m.variance), (1.0, 2.0, 1.0));
    }

    #[test]
    fn geometric_moments_match_series() {
        // independent partial sums of k (1/2)^k and k^2 (1/2)^k
        let (mut s1, mut s2) = (0.0f64, 0.0f64);
        for k in 1..200 {
            let p = 0.5f64.powi(k);
            s1 += k as f64 * p;
            s2 += (k * k) as f64 * p;
        }
        let m = LatticeLaw::geometric(0.5, 1.0).unwrap().moments();
        assert!(close(m.mean, s1, 1e-12) && close(s1, 2.0, 1e-12));
        // truncation at index 50 leaves Σ_{k>50} k² 2^{-k} ≈ 5e-12 out
        assert!(close(m.second_moment, s2, 1e-10) && close(s2, 6.0, 1e-12));
        assert!(close(m.variance, 2.0, 1e-10));
    }

    #[test]
    fn geometric_truncation_index() {
        let g = LatticeLaw::geometric(0.5, 1.0).unwrap();
        assert_eq!(g.max_index(), 50);
        let sum: f64 = g.pmf().iter().sum();
        assert!(close(sum, 1.0, 1e-15));
    }

    #[test]
    fn point_mass_moments() {
        let m = LatticeLaw::point_mass(1.0).unwrap().moments();
        assert_eq!((m.mean, m.variance), (1.0, 0.0));
    }

    #[test]
    fn span_check() {
        assert!(lattice_span_check(&[1, 2]).unwrap());
        assert!(!lattice_span_check(&[2, 4]).unwrap());
        assert!(lattice_span_check(&[2, 3]).unwrap());
        assert_eq!(lattice_span_check(&[]), Err(Error::EmptyLaw));
    }

    #[test]
    fn lattice_law_rejects_bad_input() {
        assert!(LatticeLaw::new(1.0, vec![0.0, 0.5, 0.0, 0.5]).is_err());
        assert!(LatticeLaw::new(1.0, vec![0.5, 0.4]).is_err());
        assert!(LatticeLaw::new(0.0, vec![1.0]).is_err());
        assert_eq!(LatticeLaw::new(1.0, vec![0.0]), Err(Error::EmptyLaw));
        assert!(LatticeLaw::new(1.0, vec![-0.5, 1.5]).is_err());
    }

    #[test]
    fn sample_edge_cases() {
        let det: Law = LatticeLaw::point_mass(1.0).unwrap().into();
        assert!(sample(&det, RngStream::new(1, 0), 0).is_empty());
        assert_eq!(sample(&det, RngStream::new(1, 0), 3), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn exponential_law_of_large_numbers() {
        let law: Law = SmoothLaw::exponential(1.0).unwrap().into();
        let xs = sample(&law, RngStream::new(2024, 3), 1_000_000);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!(close(mean, 1.0, 0.005), "mean {mean}");
    }

    #[test]
    fn streams_are_schedule_independent() {
        let law: Law = SmoothLaw::gamma(2.0, 1.0).unwrap().into();
        let forward: Vec<_> = (0..8).map(|i| sample(&law, RngStream::new(9, i), 16)).collect();
        let backward: Vec<_> = (0..8).rev().map(|i| sample(&law, RngStream::new(9, i), 16)).collect();
        for (i, v) in forward.iter().enumerate() {
            assert_eq!(v, &backward[7 - i]);
        }
        assert_ne!(forward[0], forward[1]);
    }

    #[test]
    fn parse_and_display_round_trip() {
        for spec in ["exp:rate=1", "gamma:shape=2,rate=1", "unif:lo=0.5,hi=1.5", "lattice:d=1;p=0.5,0.3,0.2"] {
            let law: Law = spec.parse().unwrap();
            assert_eq!(law.to_string(), spec);
            assert_eq!(law.to_string().parse::<Law>().unwrap(), law);
        }
        let g: Law = "geom:p=0.5".parse().unwrap();
        assert!(close(g.mean(), 2.0, 1e-12));
    }

    #[test]
    fn parse_errors() {
        for bad in ["exp", "exp:rate=x", "exp:mu=1", "weibull:k=1", "lattice:d=1", "unif:lo=2,hi=1", "lattice:d=1;p=0,1"] {
            assert!(bad.parse::<Law>().is_err(), "{bad} should fail");
        }
    }

    #[test]
    fn smooth_moment_formulas() {
        let g = SmoothLaw::gamma(2.0, 1.0).unwrap().moments();
        assert_eq!((g.mean, g.variance, g.second_moment), (2.0, 2.0, 6.0));
        let u = SmoothLaw::shifted_uniform(0.5, 1.5).unwrap().moments();
        assert!(close(u.mean, 1.0, 1e-15) && close(u.variance, 1.0 / 12.0, 1e-15));
    }
}
