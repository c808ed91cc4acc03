//! Random recursive trees and their level profiles.
//!
//! Vertex-count convention: `n` is the number of non-root vertices. The
//! tree after `n` attachments has `n + 1` vertices; vertex `m` (for
//! `m = 1..=n`) chooses its parent uniformly among the `m` vertices present
//! before it (the root included). `X_n(k)` counts vertices at distance `k`
//! from the root, so `Σ_k X_n(k) = n`.
//!
//! In the continuous-time embedding every vertex reproduces at the
//! arrival times of an independent unit-rate Poisson process; with `m`
//! vertices present the next birth comes after an `Exp(m)` gap and its
//! parent is uniform, so `X_n(k) = Y_k(τ_n)` holds literally.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::dist::RngStream;
use crate::{Error, Result};

/// Largest `n` accepted by [`enumerate_profiles`] (`9! = 362880` sequences).
pub const MAX_ENUMERATION: usize = 9;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrowthOptions {
    /// Keep `X_m(1..=K)` for every `m`.
    pub history: bool,
    /// Keep the level of every vertex.
    pub vertex_levels: bool,
}

/// Level counts of a grown tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileTrace {
    pub n: usize,
    pub max_level: usize,
    /// `X_n(k)` for every level `k ≥ 1` present in the tree (index `k − 1`).
    pub profile: Vec<u64>,
    /// Rows of length `K + 1`: `X_m(1..=K)` followed by the number of
    /// vertices deeper than `K`, for `m = 1..=n`.
    pub history: Option<Vec<Vec<u64>>>,
    /// Birth epochs `τ_1 < ... < τ_n` (Yule growth only).
    pub epochs: Option<Vec<f64>>,
    /// Level of vertex `m` at index `m`; the root sits at index 0.
    pub vertex_levels: Option<Vec<u32>>,
}

impl ProfileTrace {
    /// `X_n(k)`, zero beyond the tree height.
    pub fn level_count(&self, k: usize) -> u64 {
        if k == 0 {
            return 1;
        }
        self.profile.get(k - 1).copied().unwrap_or(0)
    }

    /// `(X_n(1), ..., X_n(K))`.
    pub fn truncated_profile(&self, max_level: usize) -> Vec<u64> {
        (1..=max_level).map(|k| self.level_count(k)).collect()
    }

    /// `X_m(k)` from the recorded history, `k ≤ K`.
    pub fn level_count_at(&self, m: usize, k: usize) -> Option<u64> {
        let h = self.history.as_ref()?;
        if m == 0 || k == 0 || k > self.max_level {
            return None;
        }
        h.get(m - 1).map(|row| row[k - 1])
    }

    /// `τ_n`.
    pub fn last_epoch(&self) -> Option<f64> {
        self.epochs.as_ref().and_then(|e| e.last().copied())
    }

    /// `e^{−τ_n} n`, which converges a.s. to the Yule limit `W`.
    pub fn yule_normalized_size(&self) -> Option<f64> {
        self.last_epoch().map(|t| (-t).exp() * self.n as f64)
    }

    /// Every step of the history satisfies `Σ_k X_m(k) = m`, and the
    /// final profile sums to `n`.
    pub fn is_conserved(&self) -> bool {
        let final_ok = self.profile.iter().sum::<u64>() == self.n as u64;
        let history_ok = self.history.as_ref().is_none_or(|h| {
            h.iter()
                .enumerate()
                .all(|(i, row)| row.iter().sum::<u64>() == (i + 1) as u64)
        });
        final_ok && history_ok
    }
}

fn grow<R: Rng>(n: usize, max_level: usize, rng: &mut R, options: GrowthOptions, yule: bool) -> ProfileTrace {
    let mut levels: Vec<u32> = Vec::with_capacity(n + 1);
    levels.push(0);
    let mut profile: Vec<u64> = Vec::new();
    let mut deeper: u64 = 0;
    let mut history = options.history.then(|| Vec::with_capacity(n));
    let mut epochs = yule.then(|| Vec::with_capacity(n));
    let mut clock = 0.0;

    for m in 1..=n {
        if let Some(e) = epochs.as_mut() {
            let gap: f64 = Exp1.sample(rng);
            clock += gap / m as f64;
            e.push(clock);
        }
        let parent = rng.random_range(0..m);
        let level = levels[parent] + 1;
        levels.push(level);
        let l = level as usize;
        if profile.len() < l {
            profile.resize(l, 0);
        }
        profile[l - 1] += 1;
        if l > max_level {
            deeper += 1;
        }
        if let Some(h) = history.as_mut() {
            let mut row: Vec<u64> = (1..=max_level).map(|k| profile.get(k - 1).copied().unwrap_or(0)).collect();
            row.push(deeper);
            h.push(row);
        }
    }

    ProfileTrace {
        n,
        max_level,
        profile,
        history,
        epochs,
        vertex_levels: options.vertex_levels.then_some(levels),
    }
}

/// Uniform-attachment growth of `n` non-root vertices.
pub fn grow_discrete(n: usize, max_level: usize, stream: RngStream, options: GrowthOptions) -> ProfileTrace {
    grow(n, max_level, &mut stream.rng(), options, false)
}

/// Continuous-time (Yule) growth, recording the birth epochs `τ_m`.
pub fn grow_yule(n: usize, max_level: usize, stream: RngStream, options: GrowthOptions) -> ProfileTrace {
    grow(n, max_level, &mut stream.rng(), options, true)
}

/// `Σ_{j ≤ n} B_j` with independent `B_j ~ Bernoulli(1/j)`; same law as
/// `X_n(1)`.
pub fn bernoulli_level1(n: usize, stream: RngStream) -> u64 {
    let mut rng = stream.rng();
    (1..=n).filter(|&j| rng.random::<f64>() * (j as f64) < 1.0).count() as u64
}

/// `(k−1)! (2k−1)^{1/2} (x − (log n)^k/k!) / (2 (log n)^{2k−1} log log log n)^{1/2}`,
/// defined for `n > e^e`.
pub fn rrt_lil_statistic(xnk: f64, n: u64, k: usize) -> Result<f64> {
    let nf = n as f64;
    if !(nf > std::f64::consts::E.powf(std::f64::consts::E)) {
        return Err(Error::RrtStatisticUndefined(n));
    }
    let ln = nf.ln();
    let fact = |j: usize| (1..=j).map(|i| i as f64).product::<f64>();
    let center = ln.powi(k as i32) / fact(k);
    let scale = (2.0 * ln.powi(2 * k as i32 - 1) * ln.ln().ln()).sqrt();
    Ok(fact(k - 1) * ((2 * k - 1) as f64).sqrt() * (xnk - center) / scale)
}

/// Exact law of `(X_n(1), ..., X_n(K))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfilePmf {
    pub n: usize,
    pub max_level: usize,
    pub sequences: u64,
    pub pmf: BTreeMap<Vec<u64>, f64>,
}

impl ProfilePmf {
    /// Probabilities keyed by `"(x1,x2,...)"`, the JSON dump layout.
    pub fn keyed(&self) -> BTreeMap<String, f64> {
        self.pmf
            .iter()
            .map(|(k, p)| {
                let parts: Vec<String> = k.iter().map(u64::to_string).collect();
                (format!("({})", parts.join(",")), *p)
            })
            .collect()
    }

    /// `E X_n(k)` under the exact law.
    pub fn mean(&self, k: usize) -> f64 {
        self.pmf.iter().map(|(x, p)| x[k - 1] as f64 * p).sum()
    }

    /// Total-variation distance to an empirical law given as profile counts.
    /// Profiles absent from the exact support count fully.
    pub fn tv_distance(&self, empirical: &BTreeMap<Vec<u64>, u64>) -> f64 {
        let total: u64 = empirical.values().sum();
        let total = total as f64;
        let mut dist = 0.0;
        for (x, p) in &self.pmf {
            let q = empirical.get(x).copied().unwrap_or(0) as f64 / total;
            dist += (p - q).abs();
        }
        for (x, c) in empirical {
            if !self.pmf.contains_key(x) {
                dist += *c as f64 / total;
            }
        }
        0.5 * dist
    }
}

/// Enumerates all `n!` equally likely attachment sequences.
pub fn enumerate_profiles(n: usize, max_level: usize) -> Result<ProfilePmf> {
    if n > MAX_ENUMERATION {
        return Err(Error::EnumerationTooLarge {
            n,
            max: MAX_ENUMERATION,
        });
    }
    if max_level == 0 {
        return Err(Error::InvalidConfig("profile needs at least one level".into()));
    }
    let mut counts: BTreeMap<Vec<u64>, u64> = BTreeMap::new();
    let mut levels = vec![0u32; n + 1];
    let mut profile = vec![0u64; max_level];
    enumerate_rec(1, n, &mut levels, &mut profile, &mut counts);
    let sequences: u64 = (1..=n as u64).product();
    let pmf = counts
        .into_iter()
        .map(|(k, c)| (k, c as f64 / sequences as f64))
        .collect();
    Ok(ProfilePmf {
        n,
        max_level,
        sequences,
        pmf,
    })
}

fn enumerate_rec(m: usize, n: usize, levels: &mut [u32], profile: &mut [u64], counts: &mut BTreeMap<Vec<u64>, u64>) {
    if m > n {
        *counts.entry(profile.to_vec()).or_insert(0) += 1;
        return;
    }
    for parent in 0..m {
        let level = levels[parent] + 1;
        levels[m] = level;
        let idx = level as usize - 1;
        let tracked = idx < profile.len();
        if tracked {
            profile[idx] += 1;
        }
        enumerate_rec(m + 1, n, levels, profile, counts);
        if tracked {
            profile[idx] -= 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::harmonic;

    #[test]
    fn single_vertex_sits_at_level_one() {
        for seed in 0..10 {
            let t = grow_discrete(1, 3, RngStream::new(seed, 0), GrowthOptions::default());
            assert_eq!(t.level_count(1), 1);
        }
    }

    #[test]
    fn enumeration_small_cases() {
        let p1 = enumerate_profiles(1, 1).unwrap();
        assert_eq!(p1.pmf.len(), 1);
        assert_eq!(p1.pmf[&vec![1]], 1.0);

        let p2 = enumerate_profiles(2, 2).unwrap();
        assert_eq!(p2.sequences, 2);
        assert_eq!(p2.pmf[&vec![2, 0]], 0.5);
        assert_eq!(p2.pmf[&vec![1, 1]], 0.5);
        let keyed = p2.keyed();
        assert_eq!(keyed["(2,0)"], 0.5);

        let p4 = enumerate_profiles(4, 4).unwrap();
        assert!((p4.mean(1) - 25.0 / 12.0).abs() < 1e-15);
        let p3 = enumerate_profiles(3, 3).unwrap();
        assert!((p3.mean(1) - 11.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn enumeration_cap() {
        assert!(matches!(enumerate_profiles(10, 2), Err(Error::EnumerationTooLarge { .. })));
        let p = enumerate_profiles(9, 9).unwrap();
        assert_eq!(p.sequences, 362_880);
        let total: f64 = p.pmf.values().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((p.mean(1) - harmonic(9)).abs() < 1e-12);
    }

    #[test]
    fn history_is_conserved() {
        let opts = GrowthOptions {
            history: true,
            vertex_levels: true,
        };
        for seed in 0..5 {
            let d = grow_discrete(500, 3, RngStream::new(seed, 1), opts);
            let y = grow_yule(500, 3, RngStream::new(seed, 2), opts);
            assert!(d.is_conserved() && y.is_conserved());
            let levels = d.vertex_levels.as_ref().unwrap();
            assert_eq!(levels.len(), 501);
            assert_eq!(levels[0], 0);
            assert_eq!(d.level_count_at(500, 1), Some(d.level_count(1)));
            let e = y.epochs.as_ref().unwrap();
            assert!(e.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn first_epoch_is_unit_exponential() {
        let mean = (0..10_000)
            .map(|r| grow_yule(1, 1, RngStream::new(77, r), GrowthOptions::default()).last_epoch().unwrap())
            .sum::<f64>()
            / 10_000.0;
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
    }

    #[test]
    fn bernoulli_sampler() {
        for r in 0..20 {
            assert_eq!(bernoulli_level1(1, RngStream::new(3, r)), 1);
        }
        let reps = 20_000;
        let xs: Vec<f64> = (0..reps).map(|r| bernoulli_level1(100, RngStream::new(5, r)) as f64).collect();
        let s = crate::stats::SampleSummary::of(&xs);
        assert!((s.mean - harmonic(100)).abs() < 4.0 * s.std_err);
    }

    #[test]
    fn rrt_statistic_values() {
        let n = 1_000_000u64;
        let ln = (n as f64).ln();
        assert_eq!(rrt_lil_statistic(ln, n, 1).unwrap(), 0.0);
        let v = rrt_lil_statistic(20.0, n, 1).unwrap();
        assert!((v - 1.1974).abs() < 1e-3, "{v}");
        assert!(matches!(rrt_lil_statistic(3.0, 15, 1), Err(Error::RrtStatisticUndefined(15))));
        assert!(rrt_lil_statistic(3.0, 16, 1).is_ok());
        let c2 = ln * ln / 2.0;
        assert!(rrt_lil_statistic(c2, n, 2).unwrap().abs() < 1e-12);
    }

    #[test]
    fn tv_distance_of_exact_law_against_itself() {
        let p = enumerate_profiles(4, 4).unwrap();
        let counts: BTreeMap<Vec<u64>, u64> = p.pmf.iter().map(|(k, v)| (k.clone(), (v * 24.0).round() as u64)).collect();
        assert!(p.tv_distance(&counts) < 1e-12);
        let mut off = counts.clone();
        off.insert(vec![9, 9, 9, 9], 24);
        assert!((p.tv_distance(&off) - 0.5).abs() < 1e-12);
    }
}
