//! Discretized Brownian paths and the weighted integrals
//! `B_{1,k}(t) = ∫_{(0,t]} (t−x)^{k−1} dW(x)` and
//! `B_{2,k}(t) = ∫_{(0,t]} f_k(t−x) dW(x)` with
//! `f_k(s) = V_{k−1}(s) − s^{k−1}/((k−1)! μ^{k−1})`.
//!
//! Integrals use the left-point (Itô) rule on the path grid.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dist::RngStream;
use crate::renewal::{factorial, RenewalTable};
use crate::stats::CompensatedSum;
use crate::{Error, Result};

/// Default discretization step.
pub const DEFAULT_STEP: f64 = 0.01;

const GRID_TOLERANCE: f64 = 1e-9;

/// Values `W(jh)` for `j = 0..=T/h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BmPath {
    pub step: f64,
    pub values: Vec<f64>,
}

impl BmPath {
    pub fn horizon(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.step
    }

    /// `W(jh)`.
    pub fn at(&self, j: usize) -> f64 {
        self.values[j]
    }

    /// Grid index of `t`, which must be a multiple of the step within the
    /// path horizon.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        grid_index(t, self.step, self.values.len() - 1)
    }

    /// `Σ_{j < m} g_j (W_{j+1} − W_j)` for the first `m = g.len()` cells.
    pub fn weighted_sum(&self, weights: &[f64]) -> f64 {
        let mut acc = CompensatedSum::new();
        for (j, g) in weights.iter().enumerate() {
            acc.add(g * (self.values[j + 1] - self.values[j]));
        }
        acc.value()
    }
}

fn grid_index(t: f64, step: f64, max: usize) -> Result<usize> {
    let r = t / step;
    let n = r.round();
    if t < 0.0 || (r - n).abs() > GRID_TOLERANCE * r.abs().max(1.0) {
        return Err(Error::GridMismatch(format!("{t} is not a multiple of step {step}")));
    }
    let n = n as usize;
    if n > max {
        return Err(Error::BeyondHorizon {
            point: t,
            horizon: max as f64 * step,
        });
    }
    Ok(n)
}

/// Cumulative sum of i.i.d. `N(0, h)` increments on `[0, T]`.
pub fn sample_bm(horizon: f64, step: f64, stream: RngStream) -> Result<BmPath> {
    if !(step > 0.0 && horizon >= step) {
        return Err(Error::InvalidConfig(format!("need 0 < h <= T, got h = {step}, T = {horizon}")));
    }
    let n = (horizon / step).round() as usize;
    let sd = step.sqrt();
    let mut rng = stream.rng();
    let mut values = Vec::with_capacity(n + 1);
    let mut w = 0.0;
    values.push(w);
    for _ in 0..n {
        let z: f64 = StandardNormal.sample(&mut rng);
        w += sd * z;
        values.push(w);
    }
    Ok(BmPath { step, values })
}

/// Left-point weights `(t − jh)^{k−1}` for the cells below `t`.
pub fn b1k_weights(k: usize, t: f64, step: f64, cells: usize) -> Vec<f64> {
    (0..cells).map(|j| (t - j as f64 * step).powi(k as i32 - 1)).collect()
}

/// `B_{1,k}(t)`.
pub fn b1k(path: &BmPath, k: usize, t: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    let m = path.index_of(t)?;
    if k == 1 {
        return Ok(path.at(m));
    }
    Ok(path.weighted_sum(&b1k_weights(k, t, path.step, m)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum FkSource {
    /// `V_{k−1}` on the lattice `{id}`.
    Lattice { span: f64, previous_level: Vec<f64> },
    /// Exponential law: `V_{k−1}` is the polynomial itself, so `f_k ≡ 0`.
    Poisson,
}

/// Grid values of `f_k` on `{i h}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FkTable {
    pub k: usize,
    pub mean: f64,
    pub step: f64,
    pub values: Vec<f64>,
    source: FkSource,
}

impl FkTable {
    /// Builds `f_k` from an exact lattice table holding level `k − 1`.
    /// The lattice span must be an integer multiple of `step`.
    pub fn from_table(table: &RenewalTable, k: usize, mean: f64, step: f64, horizon: f64) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidConfig("f_k is defined for k >= 2".into()));
        }
        let span = table.span();
        let ratio = span / step;
        if ratio < 1.0 - GRID_TOLERANCE || (ratio - ratio.round()).abs() > GRID_TOLERANCE * ratio {
            return Err(Error::GridMismatch(format!("span {span} is not a multiple of step {step}")));
        }
        let ratio = ratio.round() as usize;
        let cells = (horizon / step).round() as usize;
        let lattice_points = cells / ratio;
        if lattice_points > table.horizon() {
            return Err(Error::BeyondHorizon {
                point: horizon,
                horizon: table.horizon() as f64 * span,
            });
        }
        let previous_level = table.level(k - 1)?.to_vec();
        let poly = |s: f64| s.powi(k as i32 - 1) / (factorial(k - 1) * mean.powi(k as i32 - 1));
        let values = (0..=cells)
            .map(|i| previous_level[i / ratio] - poly(i as f64 * step))
            .collect();
        Ok(FkTable {
            k,
            mean,
            step,
            values,
            source: FkSource::Lattice { span, previous_level },
        })
    }

    /// `f_k ≡ 0` for an exponential law of any rate.
    pub fn poisson(k: usize, rate: f64, step: f64, horizon: f64) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidConfig("f_k is defined for k >= 2".into()));
        }
        let cells = (horizon / step).round() as usize;
        Ok(FkTable {
            k,
            mean: 1.0 / rate,
            step,
            values: vec![0.0; cells + 1],
            source: FkSource::Poisson,
        })
    }

    pub fn horizon(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.step
    }
}

/// `B_{2,k}(t) = Σ_{j < m} f_k(t − jh) ΔW_j`.
pub fn b2k(path: &BmPath, fk: &FkTable, t: f64) -> Result<f64> {
    if (path.step - fk.step).abs() > GRID_TOLERANCE * path.step {
        return Err(Error::GridMismatch(format!("path step {} vs f_k step {}", path.step, fk.step)));
    }
    let m = path.index_of(t)?;
    if m >= fk.values.len() {
        return Err(Error::BeyondHorizon {
            point: t,
            horizon: fk.horizon(),
        });
    }
    let weights: Vec<f64> = (0..m).map(|j| fk.values[m - j]).collect();
    Ok(path.weighted_sum(&weights))
}

/// `∫_0^n f_k(x)² dx`: exact for lattice tables (Gauss–Legendre on every
/// lattice cell, where `f_k` is a polynomial of degree `k − 1`), zero for
/// the exponential law.
pub fn variance_b2k(fk: &FkTable, n: f64) -> Result<f64> {
    if n > fk.horizon() * (1.0 + GRID_TOLERANCE) {
        return Err(Error::BeyondHorizon {
            point: n,
            horizon: fk.horizon(),
        });
    }
    match &fk.source {
        FkSource::Poisson => Ok(0.0),
        FkSource::Lattice { span, previous_level } => {
            let k = fk.k;
            let norm = factorial(k - 1) * fk.mean.powi(k as i32 - 1);
            let poly = |s: f64| s.powi(k as i32 - 1) / norm;
            let (nodes, weights) = gauss_legendre(k.max(2));
            let mut acc = CompensatedSum::new();
            let mut i = 0usize;
            loop {
                let a = i as f64 * span;
                if a >= n {
                    break;
                }
                let b = ((i + 1) as f64 * span).min(n);
                let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
                let c = previous_level[i];
                let cell: f64 = nodes
                    .iter()
                    .zip(&weights)
                    .map(|(x, w)| {
                        let f = c - poly(mid + half * x);
                        w * f * f
                    })
                    .sum();
                acc.add(half * cell);
                i += 1;
            }
            Ok(acc.value())
        }
    }
}

/// Nodes and weights of the `m`-point Gauss–Legendre rule on `[−1, 1]`.
fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=m {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    (nodes, weights)
}
