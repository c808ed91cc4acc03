//! Crump–Mode–Jagers populations generated by iterated random walks.
//!
//! Generation 1 is born at the points of the walk `S_n` (or the perturbed
//! walk `T_n = S_{n−1} + η_n`); every individual born at time `s` starts an
//! independent copy of the walk shifted by `s`. Only births in `[0, t]` are
//! materialized, generation by generation, and offspring walks are stopped
//! as soon as they can no longer produce a birth `≤ t`.

use serde::{Deserialize, Serialize};

use crate::dist::{Law, Moments, RngStream, Sampler};
use crate::parallel::map_indexed;
use crate::renewal::{factorial, leading_term, lil_constant, nonlattice_constant, RenewalMean};
use crate::stats::{Quantiles, SampleSummary};
use crate::{Error, Result};

/// Default cap on the expected number of births per replica.
pub const DEFAULT_POPULATION_CAP: f64 = 1e7;

/// A replica is aborted once its materialized births exceed this multiple
/// of the population cap.
pub const HARD_CAP_FACTOR: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub xi: Law,
    pub eta: Option<Law>,
    pub max_generation: usize,
    pub horizon: f64,
    /// Increasing time points in `(0, horizon]` at which paths are recorded.
    pub grid: Option<Vec<f64>>,
    pub seed: u64,
    pub replicas: usize,
    pub population_cap: f64,
    pub retain_first_generation: bool,
}

impl SimConfig {
    pub fn new(xi: Law, max_generation: usize, horizon: f64) -> Self {
        SimConfig {
            xi,
            eta: None,
            max_generation,
            horizon,
            grid: None,
            seed: 0,
            replicas: 1,
            population_cap: DEFAULT_POPULATION_CAP,
            retain_first_generation: false,
        }
    }

    pub fn with_eta(mut self, eta: Law) -> Self {
        self.eta = Some(eta);
        self
    }

    pub fn with_grid(mut self, grid: Vec<f64>) -> Self {
        self.grid = Some(grid);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_replicas(mut self, replicas: usize) -> Self {
        self.replicas = replicas;
        self
    }

    pub fn with_population_cap(mut self, cap: f64) -> Self {
        self.population_cap = cap;
        self
    }

    pub fn retaining_first_generation(mut self) -> Self {
        self.retain_first_generation = true;
        self
    }

    /// Expected births per replica over generations `1..=K`.
    pub fn expected_births(&self) -> f64 {
        let mu = self.xi.mean();
        (1..=self.max_generation)
            .map(|k| expected_population(k, mu, self.horizon))
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::InvalidConfig(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.max_generation == 0 {
            return Err(Error::InvalidConfig("max generation must be at least 1".into()));
        }
        if self.replicas == 0 {
            return Err(Error::InvalidConfig("replica count must be at least 1".into()));
        }
        if let Some(grid) = &self.grid {
            let ordered = grid.windows(2).all(|w| w[0] < w[1]);
            let inside = grid.iter().all(|&g| g > 0.0 && g <= self.horizon);
            if grid.is_empty() || !ordered || !inside {
                return Err(Error::InvalidConfig("grid must be increasing within (0, horizon]".into()));
            }
        }
        let expected = self.expected_births();
        if expected > self.population_cap {
            return Err(Error::PopulationCap(format!(
                "expected {expected:.3e} births per replica exceed the cap {:.3e}",
                self.population_cap
            )));
        }
        Ok(())
    }
}

/// `t^k / (k! μ^k)`, the admission-control estimate of generation size.
pub fn expected_population(k: usize, mean: f64, t: f64) -> f64 {
    leading_term(k, mean, t)
}

/// Generation counts of one replica.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutcome {
    pub replica: u64,
    /// `Y_k(t)` for `k = 1..=K` (index `k − 1`).
    pub counts: Vec<u64>,
    /// `path[k−1][j] = Y_k(t_j)` when a grid was configured.
    pub path: Option<Vec<Vec<u64>>>,
    /// Sorted generation-1 birth times, when retained.
    pub first_generation: Option<Vec<f64>>,
}

impl SimOutcome {
    pub fn count(&self, k: usize) -> u64 {
        self.counts[k - 1]
    }
}

struct Walker {
    xi: Sampler,
    eta: Option<Sampler>,
}

impl Walker {
    /// Emits every birth `≤ t` of a walk started at `start`.
    #[inline]
    fn births<R: rand::Rng + ?Sized>(&self, start: f64, t: f64, rng: &mut R, mut emit: impl FnMut(f64)) {
        match &self.eta {
            None => {
                let mut s = start + self.xi.draw(rng);
                while s <= t {
                    emit(s);
                    s += self.xi.draw(rng);
                }
            }
            Some(eta) => {
                // T_n = S_{n−1} + η_n exceeds t for all n once S_{n−1} > t.
                let mut s = start;
                while s <= t {
                    let b = s + eta.draw(rng);
                    if b <= t {
                        emit(b);
                    }
                    s += self.xi.draw(rng);
                }
            }
        }
    }
}

/// Simulates replica `replica` of the configured population.
pub fn simulate_generations(config: &SimConfig, replica: u64) -> Result<SimOutcome> {
    config.validate()?;
    simulate_unchecked(config, replica)
}

fn simulate_unchecked(config: &SimConfig, replica: u64) -> Result<SimOutcome> {
    let walker = Walker {
        xi: config.xi.sampler(),
        eta: config.eta.as_ref().map(Law::sampler),
    };
    let mut rng = RngStream::new(config.seed, replica).rng();
    let t = config.horizon;
    let k_max = config.max_generation;
    let hard_cap = (config.population_cap * HARD_CAP_FACTOR) as u64;
    let keep_all = config.grid.is_some();

    let mut counts = Vec::with_capacity(k_max);
    let mut path = config.grid.as_ref().map(|_| Vec::with_capacity(k_max));
    let mut total: u64 = 0;

    let mut current: Vec<f64> = Vec::new();
    walker.births(0.0, t, &mut rng, |b| current.push(b));
    total += current.len() as u64;
    counts.push(current.len() as u64);
    let first_generation = config.retain_first_generation.then(|| {
        let mut v = current.clone();
        v.sort_by(f64::total_cmp);
        v
    });
    if let (Some(p), Some(grid)) = (path.as_mut(), &config.grid) {
        p.push(counts_on_grid(&mut current, grid));
    }

    for k in 2..=k_max {
        let store = keep_all || k < k_max;
        let mut next: Vec<f64> = Vec::new();
        let mut born: u64 = 0;
        for &s in &current {
            walker.births(s, t, &mut rng, |b| {
                born += 1;
                if store {
                    next.push(b);
                }
            });
            if total + born > hard_cap {
                return Err(Error::PopulationCap(format!(
                    "replica {replica} exceeded {hard_cap} births in generation {k}"
                )));
            }
        }
        total += born;
        counts.push(born);
        if let (Some(p), Some(grid)) = (path.as_mut(), &config.grid) {
            p.push(counts_on_grid(&mut next, grid));
        }
        current = next;
    }

    Ok(SimOutcome {
        replica,
        counts,
        path,
        first_generation,
    })
}

fn counts_on_grid(times: &mut [f64], grid: &[f64]) -> Vec<u64> {
    times.sort_by(f64::total_cmp);
    grid.iter()
        .map(|&g| times.partition_point(|&x| x <= g) as u64)
        .collect()
}

/// How `Y_k(t)` is centered in the normalized statistics.
#[derive(Clone, Copy)]
pub enum Centering<'a> {
    /// `t^k / (k! μ^k)`.
    Formula,
    /// Formula plus the nonlattice second-order term `b k t^{k−1}/((k−1)! μ^{k−1})`.
    SecondOrder,
    /// Exact `V_k(t)`.
    Exact(&'a dyn RenewalMean),
}

impl Centering<'_> {
    pub fn center(&self, k: usize, t: f64, moments: &Moments) -> Result<f64> {
        let mu = moments.mean;
        match self {
            Centering::Formula => Ok(leading_term(k, mu, t)),
            Centering::SecondOrder => {
                let correction =
                    nonlattice_constant(moments) * k as f64 * t.powi(k as i32 - 1) / (factorial(k - 1) * mu.powi(k as i32 - 1));
                Ok(leading_term(k, mu, t) + correction)
            }
            Centering::Exact(mean) => mean.renewal_mean(k, t),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Centering::Formula => "formula",
            Centering::SecondOrder => "formula+second-order",
            Centering::Exact(_) => "exact",
        }
    }
}

/// `a_k (y − center) / t^{k − 1/2}`.
pub fn clt_statistic(yk: f64, k: usize, t: f64, moments: &Moments, center: f64) -> Result<f64> {
    let a = lil_constant(k, moments.mean, moments.std_dev())?;
    Ok(a * (yk - center) / t.powf(k as f64 - 0.5))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LilStatistic {
    pub k: usize,
    pub t: f64,
    pub center: f64,
    pub value: f64,
}

/// `a_k (y − center) / (2 t^{2k−1} log log t)^{1/2}`, defined for `t > e`.
pub fn lil_statistic(yk: f64, k: usize, t: f64, moments: &Moments, center: f64) -> Result<LilStatistic> {
    if !(t > std::f64::consts::E) {
        return Err(Error::LilUndefined(t));
    }
    let a = lil_constant(k, moments.mean, moments.std_dev())?;
    let scale = (2.0 * t.powi(2 * k as i32 - 1) * t.ln().ln()).sqrt();
    Ok(LilStatistic {
        k,
        t,
        center,
        value: a * (yk - center) / scale,
    })
}

/// `Y_k(t) − V_k(t) = I_k(t) + J_k(t)` with
/// `J_k(t) = Σ_{S_r ≤ t} V_{k−1}(t − S_r) − V_k(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluctuationParts {
    pub i_k: f64,
    pub j_k: f64,
    pub total: f64,
}

pub fn decompose_fluctuation(
    first_generation: Option<&[f64]>,
    yk: u64,
    k: usize,
    t: f64,
    mean: &dyn RenewalMean,
) -> Result<FluctuationParts> {
    if k < 2 {
        return Err(Error::InvalidConfig("decomposition needs k >= 2".into()));
    }
    let births = first_generation.ok_or(Error::MissingBirthTimes)?;
    let vk = mean.renewal_mean(k, t)?;
    let mut acc = crate::stats::CompensatedSum::new();
    for &s in births.iter().filter(|&&s| s <= t) {
        acc.add(mean.renewal_mean(k - 1, t - s)?);
    }
    let j_k = acc.value() - vk;
    let total = yk as f64 - vk;
    Ok(FluctuationParts {
        i_k: total - j_k,
        j_k,
        total,
    })
}

/// Per-generation ensemble statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub k: usize,
    pub center: f64,
    pub counts: SampleSummary,
    pub clt: Option<SampleSummary>,
    pub clt_quantiles: Option<Quantiles>,
    pub lil_quantiles: Option<Quantiles>,
    #[serde(skip)]
    pub clt_sample: Vec<f64>,
    #[serde(skip)]
    pub lil_sample: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub replicas: usize,
    pub seed: u64,
    pub horizon: f64,
    pub centering: String,
    pub levels: Vec<LevelSummary>,
    #[serde(skip)]
    pub outcomes: Vec<SimOutcome>,
}

/// Runs all replicas (in parallel on `threads` workers) and summarizes.
/// The result depends only on the configuration and its seed.
pub fn monte_carlo(config: &SimConfig, centering: Centering<'_>, threads: usize) -> Result<EnsembleSummary> {
    config.validate()?;
    if config.replicas < 2 {
        return Err(Error::InvalidConfig("an ensemble needs at least two replicas".into()));
    }
    let outcomes = map_indexed(config.replicas, threads, |r| simulate_unchecked(config, r as u64))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    summarize(config, centering, outcomes)
}

/// Summary of precomputed outcomes.
pub fn summarize(config: &SimConfig, centering: Centering<'_>, outcomes: Vec<SimOutcome>) -> Result<EnsembleSummary> {
    let moments = config.xi.moments();
    let t = config.horizon;
    let mut levels = Vec::with_capacity(config.max_generation);
    for k in 1..=config.max_generation {
        let ys: Vec<f64> = outcomes.iter().map(|o| o.count(k) as f64).collect();
        let center = centering.center(k, t, &moments)?;
        let clt_sample: Vec<f64> = if moments.variance > 0.0 {
            ys.iter()
                .map(|&y| clt_statistic(y, k, t, &moments, center))
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        let lil_sample: Vec<f64> = if moments.variance > 0.0 && t > std::f64::consts::E {
            ys.iter()
                .map(|&y| lil_statistic(y, k, t, &moments, center).map(|s| s.value))
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        levels.push(LevelSummary {
            k,
            center,
            counts: SampleSummary::of(&ys),
            clt: (!clt_sample.is_empty()).then(|| SampleSummary::of(&clt_sample)),
            clt_quantiles: (!clt_sample.is_empty()).then(|| Quantiles::of(&clt_sample)),
            lil_quantiles: (!lil_sample.is_empty()).then(|| Quantiles::of(&lil_sample)),
            clt_sample,
            lil_sample,
        });
    }
    Ok(EnsembleSummary {
        replicas: outcomes.len(),
        seed: config.seed,
        horizon: t,
        centering: centering.label().to_string(),
        levels,
        outcomes,
    })
}

/// `t_j = start · base^j` for `j = 0..count`.
pub fn geometric_grid(start: f64, base: f64, count: usize) -> Vec<f64> {
    (0..count).map(|j| start * base.powi(j as i32)).collect()
}

/// One point of a running-extrema trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtremaPoint {
    pub t: f64,
    pub value: f64,
    pub running_max: f64,
    pub running_min: f64,
}

/// LIL statistic along a recorded path with its running max and min.
/// Grid points `≤ e` are skipped. Report-only: nothing here is asserted
/// against the limit set.
pub fn lil_running_extrema(
    outcome: &SimOutcome,
    grid: &[f64],
    k: usize,
    moments: &Moments,
    centering: Centering<'_>,
) -> Result<Vec<ExtremaPoint>> {
    let path = outcome
        .path
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("outcome has no recorded path".into()))?;
    let ys = &path[k - 1];
    let mut hi = f64::NEG_INFINITY;
    let mut lo = f64::INFINITY;
    let mut out = Vec::new();
    for (&t, &y) in grid.iter().zip(ys) {
        if t <= std::f64::consts::E {
            continue;
        }
        let center = centering.center(k, t, moments)?;
        let value = lil_statistic(y as f64, k, t, moments, center)?.value;
        hi = hi.max(value);
        lo = lo.min(value);
        out.push(ExtremaPoint {
            t,
            value,
            running_max: hi,
            running_min: lo,
        });
    }
    Ok(out)
}
