//! Exact lattice renewal calculus and the asymptotic constants of `V_k`.
//!
//! For a `d`-lattice law with masses `p_m = P{ξ = md}` the renewal sequence
//! `u_n` (expected number of walk points at `nd`, with `u_0 = 1`) solves
//! `u_n = Σ_m p_m u_{n−m}`. Then `V(nd) = Σ_{1 ≤ m ≤ n} u_m`, `U = V + 1`,
//! and `V_k` is the k-fold Stieltjes convolution
//! `V_k(nd) = Σ_{m ≤ n} V_{k−1}((n−m)d) ΔV(md)`.
//!
//! Everything is evaluated in `f64` with compensated accumulation; a memory
//! guard refuses tables whose entry count exceeds [`TableLimits`].

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::dist::{LatticeLaw, Moments};
use crate::stats::CompensatedSum;
use crate::{Error, Result};

/// Default cap on `K·(N+1)` table entries.
pub const DEFAULT_MAX_ENTRIES: usize = 100_000_000;

/// Relative tolerance used when deciding whether two spans coincide or a
/// point sits on the grid.
const GRID_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableLimits {
    pub max_entries: usize,
}

impl Default for TableLimits {
    fn default() -> Self {
        TableLimits {
            max_entries: DEFAULT_MAX_ENTRIES,
        }
    }
}

impl TableLimits {
    fn admit(&self, levels: usize, horizon: usize) -> Result<()> {
        let entries = levels.saturating_mul(horizon.saturating_add(1));
        if entries > self.max_entries {
            Err(Error::HorizonTooLarge {
                entries,
                cap: self.max_entries,
            })
        } else {
            Ok(())
        }
    }
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Renewal sequence `u_0..u_N` of a lattice law.
pub fn renewal_sequence(law: &LatticeLaw, horizon: usize, limits: TableLimits) -> Result<Vec<f64>> {
    limits.admit(1, horizon)?;
    let pmf = law.pmf();
    let mut u = Vec::with_capacity(horizon + 1);
    u.push(1.0);
    for n in 1..=horizon {
        let mut acc = CompensatedSum::new();
        for (i, p) in pmf.iter().take(n).enumerate() {
            acc.add(p * u[n - 1 - i]);
        }
        u.push(acc.value());
    }
    Ok(u)
}

/// Stieltjes convolution on a common grid:
/// `(f ⋆ dg)(n) = Σ_{0 ≤ m ≤ n} f(n−m) Δg(m)`, with `Δg(0) = g(0)`.
pub fn stieltjes_convolve(f: &[f64], integrator: &[f64]) -> Vec<f64> {
    let len = f.len().min(integrator.len());
    let dg: Vec<f64> = (0..len)
        .map(|m| if m == 0 { integrator[0] } else { integrator[m] - integrator[m - 1] })
        .collect();
    (0..len)
        .map(|n| {
            let mut acc = CompensatedSum::new();
            for m in 0..=n {
                if dg[m] != 0.0 {
                    acc.add(f[n - m] * dg[m]);
                }
            }
            acc.value()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableKind {
    /// `V_k` of the standard iterated walk.
    Standard,
    /// `V*_k` of the iterated perturbed walk.
    Perturbed,
}

/// Arrays `V_k(nd)` for `k = 1..=K`, `n = 0..=N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenewalTable {
    span: f64,
    kind: TableKind,
    levels: Vec<Vec<f64>>,
}

impl RenewalTable {
    /// Level-1 table `V(nd) = Σ_{1 ≤ m ≤ n} u_m`.
    pub fn standard(law: &LatticeLaw, horizon: usize, limits: TableLimits) -> Result<Self> {
        let u = renewal_sequence(law, horizon, limits)?;
        let mut acc = CompensatedSum::new();
        let v = u
            .iter()
            .enumerate()
            .map(|(n, &un)| {
                if n > 0 {
                    acc.add(un);
                }
                acc.value()
            })
            .collect();
        Ok(RenewalTable {
            span: law.span(),
            kind: TableKind::Standard,
            levels: vec![v],
        })
    }

    /// Level-1 perturbed table `V*` for the walk `S_{n−1} + η_n`.
    pub fn perturbed(xi: &LatticeLaw, eta: &LatticeLaw, horizon: usize, limits: TableLimits) -> Result<Self> {
        check_commensurable(xi.span(), eta.span())?;
        let u = renewal_sequence(xi, horizon, limits)?;
        perturbed_table(&u, xi.span(), eta, horizon)
    }

    /// Wraps a precomputed level-1 array.
    pub fn from_level_one(span: f64, kind: TableKind, values: Vec<f64>) -> Self {
        RenewalTable {
            span,
            kind,
            levels: vec![values],
        }
    }

    /// Extends (or truncates) the table to levels `1..=max_level`, each new
    /// level being `V_{k−1} ⋆ dV_1`.
    pub fn convolve_levels(&self, max_level: usize, limits: TableLimits) -> Result<RenewalTable> {
        if max_level == 0 {
            return Err(Error::InvalidConfig("maximum level must be at least 1".into()));
        }
        limits.admit(max_level, self.horizon())?;
        let mut levels: Vec<Vec<f64>> = self.levels.iter().take(max_level).cloned().collect();
        while levels.len() < max_level {
            let next = stieltjes_convolve(levels.last().expect("level 1"), &levels[0]);
            levels.push(next);
        }
        Ok(RenewalTable {
            span: self.span,
            kind: self.kind,
            levels,
        })
    }

    /// Builds levels with the factors swapped, `V_1 ⋆ dV_{k−1}`. Agrees with
    /// [`RenewalTable::convolve_levels`] up to rounding; kept as a cross-check.
    pub fn convolve_levels_reversed(&self, max_level: usize, limits: TableLimits) -> Result<RenewalTable> {
        if max_level == 0 {
            return Err(Error::InvalidConfig("maximum level must be at least 1".into()));
        }
        limits.admit(max_level, self.horizon())?;
        let mut levels = vec![self.levels[0].clone()];
        while levels.len() < max_level {
            let next = stieltjes_convolve(&levels[0], levels.last().expect("level 1"));
            levels.push(next);
        }
        Ok(RenewalTable {
            span: self.span,
            kind: self.kind,
            levels,
        })
    }

    pub fn span(&self) -> f64 {
        self.span
    }

    pub fn kind(&self) -> TableKind {
        self.kind
    }

    /// Largest grid index `N`.
    pub fn horizon(&self) -> usize {
        self.levels[0].len() - 1
    }

    pub fn max_level(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, k: usize) -> Result<&[f64]> {
        if k == 0 || k > self.levels.len() {
            return Err(Error::MissingLevel {
                level: k,
                max: self.levels.len(),
            });
        }
        Ok(&self.levels[k - 1])
    }

    /// `V_k(nd)`.
    pub fn value(&self, k: usize, n: usize) -> Result<f64> {
        let level = self.level(k)?;
        level.get(n).copied().ok_or(Error::BeyondHorizon {
            point: n as f64 * self.span,
            horizon: self.horizon() as f64 * self.span,
        })
    }

    /// Grid index of an on-grid point `x = nd`.
    pub fn grid_index(&self, x: f64) -> Result<usize> {
        let r = x / self.span;
        let n = r.round();
        if x < 0.0 || (r - n).abs() > GRID_TOLERANCE * r.abs().max(1.0) {
            return Err(Error::OffGrid(x));
        }
        let n = n as usize;
        if n > self.horizon() {
            return Err(Error::BeyondHorizon {
                point: x,
                horizon: self.horizon() as f64 * self.span,
            });
        }
        Ok(n)
    }

    /// `V_k(t)` for any `t ≥ 0`: the function is right-continuous and
    /// constant on `[nd, (n+1)d)`.
    pub fn value_at(&self, k: usize, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Ok(0.0);
        }
        let r = t / self.span;
        let near = r.round();
        let n = if (r - near).abs() <= GRID_TOLERANCE * r.abs().max(1.0) { near } else { r.floor() };
        let n = n as usize;
        if n > self.horizon() {
            return Err(Error::BeyondHorizon {
                point: t,
                horizon: self.horizon() as f64 * self.span,
            });
        }
        self.value(k, n)
    }

    /// CSV with header `n,t,V1,..,VK`; values use 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        write!(out, "n,t")?;
        for k in 1..=self.max_level() {
            write!(out, ",V{k}")?;
        }
        writeln!(out)?;
        for n in 0..=self.horizon() {
            write!(out, "{n},{}", fmt17(n as f64 * self.span))?;
            for level in &self.levels {
                write!(out, ",{}", fmt17(level[n]))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Decimal rendering with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn check_commensurable(a: f64, b: f64) -> Result<()> {
    if (a - b).abs() > GRID_TOLERANCE * a.abs().max(b.abs()) {
        Err(Error::IncommensurableLattices(a, b))
    } else {
        Ok(())
    }
}

/// Level-1 perturbed table from a renewal sequence:
/// `V*(nd) = Σ_{1 ≤ m ≤ n} q_m U((n−m)d)` with `q_m = P{η = md}`.
pub fn perturbed_table(u: &[f64], span: f64, eta: &LatticeLaw, horizon: usize) -> Result<RenewalTable> {
    check_commensurable(span, eta.span())?;
    if u.len() < horizon + 1 {
        return Err(Error::BeyondHorizon {
            point: horizon as f64 * span,
            horizon: (u.len().saturating_sub(1)) as f64 * span,
        });
    }
    let mut acc = CompensatedSum::new();
    let big_u: Vec<f64> = u[..=horizon]
        .iter()
        .map(|x| {
            acc.add(*x);
            acc.value()
        })
        .collect();
    let q = eta.pmf();
    let values = (0..=horizon)
        .map(|n| {
            let mut s = CompensatedSum::new();
            for (i, qm) in q.iter().take(n).enumerate() {
                s.add(qm * big_u[n - 1 - i]);
            }
            s.value()
        })
        .collect();
    Ok(RenewalTable::from_level_one(span, TableKind::Perturbed, values))
}

/// Mean generation sizes `V_k(t)`, from a table or a closed form.
pub trait RenewalMean: Sync {
    fn renewal_mean(&self, k: usize, t: f64) -> Result<f64>;
}

impl RenewalMean for RenewalTable {
    fn renewal_mean(&self, k: usize, t: f64) -> Result<f64> {
        self.value_at(k, t)
    }
}

/// Exponential inter-arrivals: `V_k(t) = (λt)^k / k!` exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonRenewal {
    pub rate: f64,
}

impl RenewalMean for PoissonRenewal {
    fn renewal_mean(&self, k: usize, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        Ok((self.rate * t).powi(k as i32) / factorial(k))
    }
}

/// `t^k / (k! μ^k)`.
pub fn leading_term(k: usize, mean: f64, t: f64) -> f64 {
    t.powi(k as i32) / (factorial(k) * mean.powi(k as i32))
}

/// `h t^{k−1} / ((k−1)! μ^k)`. For a lattice law (`span = Some(d)`), `h`
/// must be a positive multiple of `d`.
pub fn increment_asymptote(k: usize, mean: f64, h: f64, t: f64, span: Option<f64>) -> Result<f64> {
    if let Some(d) = span {
        let r = h / d;
        if r < 1.0 - GRID_TOLERANCE || (r - r.round()).abs() > GRID_TOLERANCE * r.max(1.0) {
            return Err(Error::IncrementNotOnLattice { h, span: d });
        }
    }
    Ok(h * t.powi(k as i32 - 1) / (factorial(k - 1) * mean.powi(k as i32)))
}

/// `a_k = σ^{−1} μ^{k+1/2} (k−1)! (2k−1)^{1/2}`.
pub fn lil_constant(k: usize, mean: f64, sigma: f64) -> Result<f64> {
    if sigma <= 0.0 {
        return Err(Error::DegenerateLaw);
    }
    Ok(mean.powf(k as f64 + 0.5) * factorial(k - 1) * ((2 * k - 1) as f64).sqrt() / sigma)
}

/// Nonlattice second-order constant `b = Eξ²/(2μ²) − 1`.
pub fn nonlattice_constant(m: &Moments) -> f64 {
    m.second_moment / (2.0 * m.mean * m.mean) - 1.0
}

/// Lattice constant in the closed form `d(2k−1)/(2μ) + k(Eξ²/(2μ²) − Eη/μ)`.
///
/// Exact tables do not support this form for `k ≥ 2`; see
/// [`lattice_constant_corrected`] for the value the tables converge to.
pub fn lattice_constant(k: usize, span: f64, m: &Moments, eta_mean: f64) -> f64 {
    span / (2.0 * m.mean) * (2 * k - 1) as f64 + k as f64 * (m.second_moment / (2.0 * m.mean * m.mean) - eta_mean / m.mean)
}

/// Limit of `(V*_k(nd) − (nd)^k/(k!μ^k)) μ^{k−1}(k−1)!/(nd)^{k−1}`:
/// `d/(2μ) + k(Eξ²/(2μ²) − Eη/μ)`.
///
/// Follows from `V*(nd) = nd/μ + c + o(1)` with `c = D − Eη/μ` and the
/// generating-function identity `Σ V*_k(nd) z^n = F(z)^k / (1 − z)`.
/// Coincides with [`lattice_constant`] at `k = 1`.
pub fn lattice_constant_corrected(k: usize, span: f64, m: &Moments, eta_mean: f64) -> f64 {
    span / (2.0 * m.mean) + k as f64 * (m.second_moment / (2.0 * m.mean * m.mean) - eta_mean / m.mean)
}

/// `D = d/(2μ) + Eξ²/(2μ²)`, the limit of `U(nd) − nd/μ`.
pub fn lattice_renewal_limit(span: f64, m: &Moments) -> f64 {
    span / (2.0 * m.mean) + m.second_moment / (2.0 * m.mean * m.mean)
}

/// Closed-form constants attached to generation `k` of a law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticConstants {
    pub k: usize,
    pub mean: f64,
    pub variance: f64,
    pub second_moment: f64,
    pub eta_mean: f64,
    pub span: Option<f64>,
    /// `None` for degenerate laws.
    pub a_k: Option<f64>,
    pub b: f64,
    pub c_k: Option<f64>,
    pub c_k_corrected: Option<f64>,
    pub d: Option<f64>,
}

impl AsymptoticConstants {
    /// `eta_mean` defaults to `μ` (unperturbed walk).
    pub fn new(k: usize, moments: &Moments, eta_mean: Option<f64>, span: Option<f64>) -> Self {
        let eta_mean = eta_mean.unwrap_or(moments.mean);
        AsymptoticConstants {
            k,
            mean: moments.mean,
            variance: moments.variance,
            second_moment: moments.second_moment,
            eta_mean,
            span,
            a_k: lil_constant(k, moments.mean, moments.std_dev()).ok(),
            b: nonlattice_constant(moments),
            c_k: span.map(|d| lattice_constant(k, d, moments, eta_mean)),
            c_k_corrected: span.map(|d| lattice_constant_corrected(k, d, moments, eta_mean)),
            d: span.map(|d| lattice_renewal_limit(d, moments)),
        }
    }

    fn moments(&self) -> Moments {
        Moments {
            mean: self.mean,
            second_moment: self.second_moment,
            variance: self.variance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpansionMode {
    Nonlattice,
    Lattice,
}

/// Second-order term of `V_k(t)`:
/// nonlattice `b k t^{k−1}/((k−1)! μ^{k−1})`, lattice
/// `C_k (nd)^{k−1}/(μ^{k−1}(k−1)!)` evaluated with
/// [`lattice_constant_corrected`].
pub fn second_order(k: usize, constants: &AsymptoticConstants, t: f64, mode: ExpansionMode) -> Result<f64> {
    let mu = constants.mean;
    let scale = t.powi(k as i32 - 1) / (factorial(k - 1) * mu.powi(k as i32 - 1));
    match mode {
        ExpansionMode::Nonlattice => Ok(constants.b * k as f64 * scale),
        ExpansionMode::Lattice => {
            let d = constants
                .span
                .ok_or_else(|| Error::InvalidConfig("lattice expansion needs a lattice law".into()))?;
            Ok(lattice_constant_corrected(k, d, &constants.moments(), constants.eta_mean) * scale)
        }
    }
}

/// `(V_k(nd) − (nd)^k/(k!μ^k)) μ^{k−1}(k−1)!/(nd)^{k−1}` from a table.
pub fn normalized_second_order_residual(table: &RenewalTable, k: usize, mean: f64, n: usize) -> Result<f64> {
    let t = n as f64 * table.span();
    let v = table.value(k, n)?;
    Ok((v - leading_term(k, mean, t)) * mean.powi(k as i32 - 1) * factorial(k - 1) / t.powi(k as i32 - 1))
}

/// Empirical `[min, max]` of the normalized residual over `n_from..=n_to`.
pub fn second_order_bracket(table: &RenewalTable, k: usize, mean: f64, n_from: usize, n_to: usize) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for n in n_from.max(1)..=n_to {
        let r = normalized_second_order_residual(table, k, mean, n)?;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok((lo, hi))
}

/// One evaluation of `V_k(x+h) − V_k(x) ≤ (V(h)+1) V(x+h)^{k−1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubadditivityCheck {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

/// Checks the increment bound at grid points `x`, `h`.
pub fn check_subadditivity(table: &RenewalTable, k: usize, x: f64, h: f64) -> Result<SubadditivityCheck> {
    let i = table.grid_index(x)?;
    let j = table.grid_index(h)?;
    if i + j > table.horizon() {
        return Err(Error::BeyondHorizon {
            point: x + h,
            horizon: table.horizon() as f64 * table.span(),
        });
    }
    check_subadditivity_at(table.level(1)?, table.level(k)?, k, i, j)
}

fn check_subadditivity_at(v1: &[f64], vk: &[f64], k: usize, i: usize, j: usize) -> Result<SubadditivityCheck> {
    let lhs = vk[i + j] - vk[i];
    let rhs = (v1[j] + 1.0) * v1[i + j].powi(k as i32 - 1);
    let slack = rhs - lhs;
    Ok(SubadditivityCheck {
        holds: slack >= -GRID_TOLERANCE * rhs.abs().max(1.0),
        lhs,
        rhs,
        slack,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubadditivitySweep {
    pub k: usize,
    pub pairs: u64,
    pub violations: u64,
    pub min_slack: f64,
}

/// Checks every grid pair with `x + h ≤ max_index`.
pub fn subadditivity_sweep(table: &RenewalTable, k: usize, max_index: usize) -> Result<SubadditivitySweep> {
    let v1 = table.level(1)?;
    let vk = table.level(k)?;
    if max_index > table.horizon() {
        return Err(Error::BeyondHorizon {
            point: max_index as f64 * table.span(),
            horizon: table.horizon() as f64 * table.span(),
        });
    }
    let mut sweep = SubadditivitySweep {
        k,
        pairs: 0,
        violations: 0,
        min_slack: f64::INFINITY,
    };
    for i in 0..=max_index {
        for j in 0..=(max_index - i) {
            let c = check_subadditivity_at(v1, vk, k, i, j)?;
            sweep.pairs += 1;
            if !c.holds {
                sweep.violations += 1;
            }
            sweep.min_slack = sweep.min_slack.min(c.slack);
        }
    }
    Ok(sweep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det() -> LatticeLaw {
        LatticeLaw::point_mass(1.0).unwrap()
    }

    fn geom() -> LatticeLaw {
        LatticeLaw::geometric(0.5, 1.0).unwrap()
    }

    fn binomial(n: usize, k: usize) -> f64 {
        if k > n {
            return 0.0;
        }
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    /// Brute force: number of compositions (m_1..m_k), m_i ≥ 1, Σ m_i ≤ n.
    fn compositions_at_most(n: usize, k: usize) -> u64 {
        if k == 0 {
            return 1;
        }
        (1..=n).map(|m| compositions_at_most(n - m, k - 1)).sum()
    }

    /// Σ_j P{S_j = n} by repeated convolution of the pmf.
    fn renewal_mass_by_convolution(pmf: &[f64], n: usize) -> Vec<f64> {
        let mut dist = vec![0.0; n + 1];
        dist[0] = 1.0;
        let mut u = dist.clone();
        for _ in 0..n {
            let mut next = vec![0.0; n + 1];
            for (s, &ps) in dist.iter().enumerate() {
                for (i, &p) in pmf.iter().enumerate() {
                    if s + i + 1 <= n {
                        next[s + i + 1] += ps * p;
                    }
                }
            }
            for (x, y) in u.iter_mut().zip(&next) {
                *x += y;
            }
            u[0] = 1.0;
            dist = next;
        }
        u
    }

    #[test]
    fn renewal_sequence_point_mass() {
        let u = renewal_sequence(&det(), 10, TableLimits::default()).unwrap();
        assert!(u.iter().all(|&x| x == 1.0));
        let t = RenewalTable::standard(&det(), 10, TableLimits::default()).unwrap();
        for n in 0..=10 {
            assert_eq!(t.value(1, n).unwrap(), n as f64);
        }
    }

    #[test]
    fn renewal_sequence_geometric_matches_convolution_oracle() {
        let law = geom();
        let u = renewal_sequence(&law, 30, TableLimits::default()).unwrap();
        let oracle = renewal_mass_by_convolution(law.pmf(), 30);
        for n in 0..=30 {
            assert!((u[n] - oracle[n]).abs() < 1e-12);
        }
        assert_eq!(u[0], 1.0);
        for &x in &u[1..] {
            assert!((x - 0.5).abs() < 1e-13);
        }
        let t = RenewalTable::standard(&law, 100, TableLimits::default()).unwrap();
        assert!((t.value(1, 100).unwrap() - 50.0).abs() < 1e-10);
    }

    #[test]
    fn renewal_sequence_two_point() {
        let law = LatticeLaw::new(1.0, vec![0.5, 0.5]).unwrap();
        let u = renewal_sequence(&law, 3, TableLimits::default()).unwrap();
        let oracle = renewal_mass_by_convolution(law.pmf(), 3);
        assert_eq!(&u[..], &[1.0, 0.5, 0.75, 0.625]);
        assert_eq!(u, oracle);
    }

    #[test]
    fn memory_guard() {
        let limits = TableLimits { max_entries: 100 };
        assert!(matches!(
            renewal_sequence(&det(), 100, limits),
            Err(Error::HorizonTooLarge { .. })
        ));
        let t = RenewalTable::standard(&det(), 40, limits).unwrap();
        assert!(t.convolve_levels(3, limits).is_err());
    }

    #[test]
    fn deterministic_levels_are_binomial() {
        let t = RenewalTable::standard(&det(), 20, TableLimits::default())
            .unwrap()
            .convolve_levels(3, TableLimits::default())
            .unwrap();
        assert_eq!(t.value(2, 5).unwrap(), 10.0);
        assert_eq!(t.value(3, 6).unwrap(), 20.0);
        for k in 1..=3 {
            for n in 0..=12 {
                let oracle = compositions_at_most(n, k) as f64;
                assert_eq!(oracle, binomial(n, k));
                assert!((t.value(k, n).unwrap() - oracle).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn level_one_is_identity() {
        let base = RenewalTable::standard(&geom(), 50, TableLimits::default()).unwrap();
        let t = base.convolve_levels(4, TableLimits::default()).unwrap();
        assert_eq!(t.level(1).unwrap(), base.level(1).unwrap());
        assert!(matches!(t.level(5), Err(Error::MissingLevel { .. })));
    }

    #[test]
    fn convolution_symmetry() {
        let law = LatticeLaw::new(1.0, vec![0.2, 0.3, 0.5]).unwrap();
        let base = RenewalTable::standard(&law, 300, TableLimits::default()).unwrap();
        let a = base.convolve_levels(4, TableLimits::default()).unwrap();
        let b = base.convolve_levels_reversed(4, TableLimits::default()).unwrap();
        for k in 1..=4 {
            for n in 0..=300 {
                let (x, y) = (a.value(k, n).unwrap(), b.value(k, n).unwrap());
                assert!((x - y).abs() <= 1e-9 * x.abs().max(1e-300), "k={k} n={n}");
            }
        }
    }

    #[test]
    fn perturbed_with_eta_equal_xi() {
        let law = geom();
        let t = RenewalTable::perturbed(&law, &law, 200, TableLimits::default()).unwrap();
        let s = RenewalTable::standard(&law, 200, TableLimits::default()).unwrap();
        for n in 0..=200 {
            assert!((t.value(1, n).unwrap() - s.value(1, n).unwrap()).abs() < 1e-10);
            assert!((t.value(1, n).unwrap() - n as f64 / 2.0).abs() < 1e-10);
        }
        assert_eq!(t.kind(), TableKind::Perturbed);
    }

    #[test]
    fn perturbed_with_unit_shift() {
        let xi = geom();
        let eta = LatticeLaw::point_mass(1.0).unwrap();
        let t = RenewalTable::perturbed(&xi, &eta, 50, TableLimits::default()).unwrap();
        let s = RenewalTable::standard(&xi, 50, TableLimits::default()).unwrap();
        for n in 1..=50 {
            let u_prev = s.value(1, n - 1).unwrap() + 1.0;
            assert!((t.value(1, n).unwrap() - u_prev).abs() < 1e-12);
        }
        assert!((t.value(1, 4).unwrap() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn perturbed_rejects_mismatched_spans() {
        let xi = LatticeLaw::point_mass(1.0).unwrap();
        let eta = LatticeLaw::point_mass(0.5).unwrap();
        assert!(matches!(
            RenewalTable::perturbed(&xi, &eta, 10, TableLimits::default()),
            Err(Error::IncommensurableLattices(..))
        ));
    }

    #[test]
    fn leading_and_increment_terms() {
        assert_eq!(leading_term(2, 1.0, 10.0), 50.0);
        assert_eq!(leading_term(1, 2.0, 8.0), 4.0);
        assert_eq!(increment_asymptote(2, 2.0, 1.0, 100.0, None).unwrap(), 25.0);
        assert_eq!(increment_asymptote(1, 2.0, 3.0, 7.0, Some(1.0)).unwrap(), 1.5);
        assert!(matches!(
            increment_asymptote(2, 2.0, 0.5, 100.0, Some(1.0)),
            Err(Error::IncrementNotOnLattice { .. })
        ));
    }

    #[test]
    fn poisson_leading_term_matches_integral_recursion() {
        // V_k(t) = ∫_0^t V_{k-1}(t-x) dx by midpoint quadrature from V_1(t) = t.
        let t = 10.0;
        let steps = 20_000;
        let h = t / steps as f64;
        let v2: f64 = (0..steps).map(|i| (t - (i as f64 + 0.5) * h) * h).sum();
        assert!((v2 - leading_term(2, 1.0, t)).abs() < 1e-6);
        assert_eq!(PoissonRenewal { rate: 1.0 }.renewal_mean(2, 10.0).unwrap(), 50.0);
    }

    #[test]
    fn geometric_increment_convergence() {
        let t = RenewalTable::standard(&geom(), 2001, TableLimits::default())
            .unwrap()
            .convolve_levels(2, TableLimits::default())
            .unwrap();
        let n = 2000;
        let inc = t.value(2, n + 1).unwrap() - t.value(2, n).unwrap();
        let target = increment_asymptote(2, 2.0, 1.0, n as f64, Some(1.0)).unwrap();
        assert!((inc / target - 1.0).abs() < 0.01);
    }

    #[test]
    fn lil_constants() {
        assert_eq!(lil_constant(1, 1.0, 1.0).unwrap(), 1.0);
        assert!((lil_constant(2, 1.0, 1.0).unwrap() - 3f64.sqrt()).abs() < 1e-15);
        assert!((lil_constant(3, 1.0, 1.0).unwrap() - 2.0 * 5f64.sqrt()).abs() < 1e-14);
        assert!((lil_constant(1, 2.0, 2f64.sqrt()).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(lil_constant(1, 1.0, 0.0), Err(Error::DegenerateLaw));
    }

    #[test]
    fn closed_form_constants() {
        let g = geom().moments();
        assert!((lattice_constant(1, 1.0, &g, 2.0)).abs() < 1e-12);
        assert!((lattice_constant(2, 1.0, &g, 2.0) - 0.25).abs() < 1e-12);
        assert!((lattice_constant_corrected(1, 1.0, &g, 2.0)).abs() < 1e-12);
        assert!((lattice_constant_corrected(2, 1.0, &g, 2.0) + 0.25).abs() < 1e-12);
        assert!((lattice_renewal_limit(1.0, &g) - 1.0).abs() < 1e-12);
        let e = crate::dist::SmoothLaw::exponential(1.0).unwrap().moments();
        assert_eq!(nonlattice_constant(&e), 0.0);
        let c = AsymptoticConstants::new(2, &e, None, None);
        assert_eq!(second_order(2, &c, 10.0, ExpansionMode::Nonlattice).unwrap(), 0.0);
        assert!(second_order(2, &c, 10.0, ExpansionMode::Lattice).is_err());
    }

    #[test]
    fn unit_renewal_limit_from_table() {
        for law in [geom(), LatticeLaw::new(1.0, vec![0.5, 0.5]).unwrap(), LatticeLaw::new(0.5, vec![0.1, 0.6, 0.3]).unwrap()] {
            let m = law.moments();
            let t = RenewalTable::standard(&law, 3000, TableLimits::default()).unwrap();
            let n = 3000;
            let u = t.value(1, n).unwrap() + 1.0;
            let gap = u - n as f64 * law.span() / m.mean;
            assert!((gap - lattice_renewal_limit(law.span(), &m)).abs() < 1e-9, "{gap}");
        }
    }

    #[test]
    fn lattice_second_order_geometric() {
        let law = geom();
        let m = law.moments();
        let base = RenewalTable::perturbed(&law, &law, 4000, TableLimits::default()).unwrap();
        let t = base.convolve_levels(3, TableLimits::default()).unwrap();
        // k = 1: C_1 = 0 and the residual vanishes identically.
        for n in 1..=4000 {
            assert!((t.value(1, n).unwrap() - n as f64 / 2.0).abs() < 1e-9);
        }
        for k in 2..=3 {
            let c = lattice_constant_corrected(k, 1.0, &m, m.mean);
            let r = normalized_second_order_residual(&t, k, m.mean, 4000).unwrap();
            assert!((r - c).abs() <= 0.02 * c.abs(), "k={k} r={r} c={c}");
        }
        let consts = AsymptoticConstants::new(2, &m, None, Some(1.0));
        let predicted = second_order(2, &consts, 4000.0, ExpansionMode::Lattice).unwrap();
        assert!((predicted + 4000.0 / 8.0).abs() < 1e-6);
    }

    #[test]
    fn lattice_second_order_general_eta() {
        let xi = LatticeLaw::new(1.0, vec![0.3, 0.2, 0.5]).unwrap();
        let eta = LatticeLaw::new(1.0, vec![0.6, 0.0, 0.4]).unwrap();
        let m = xi.moments();
        let eta_mean = eta.moments().mean;
        let t = RenewalTable::perturbed(&xi, &eta, 4000, TableLimits::default())
            .unwrap()
            .convolve_levels(3, TableLimits::default())
            .unwrap();
        for k in 1..=3 {
            let c = lattice_constant_corrected(k, 1.0, &m, eta_mean);
            let r = normalized_second_order_residual(&t, k, m.mean, 4000).unwrap();
            let tol = if c.abs() > 1e-12 { 0.02 * c.abs() } else { 0.5 };
            assert!((r - c).abs() <= tol, "k={k} r={r} c={c}");
        }
    }

    #[test]
    fn leading_ratio_geometric() {
        let t = RenewalTable::standard(&geom(), 4000, TableLimits::default())
            .unwrap()
            .convolve_levels(3, TableLimits::default())
            .unwrap();
        for k in 1..=3 {
            let ratio = t.value(k, 4000).unwrap() / leading_term(k, 2.0, 4000.0);
            assert!((ratio - 1.0).abs() <= 0.02, "k={k}");
        }
    }

    #[test]
    fn second_order_bracket_is_bounded() {
        let t = RenewalTable::standard(&LatticeLaw::new(1.0, vec![0.5, 0.5]).unwrap(), 2000, TableLimits::default())
            .unwrap()
            .convolve_levels(2, TableLimits::default())
            .unwrap();
        let (lo, hi) = second_order_bracket(&t, 2, 1.5, 100, 2000).unwrap();
        assert!(lo.is_finite() && hi.is_finite() && hi - lo < 0.1);
    }

    #[test]
    fn subadditivity_examples() {
        let t = RenewalTable::standard(&det(), 20, TableLimits::default())
            .unwrap()
            .convolve_levels(2, TableLimits::default())
            .unwrap();
        let c = check_subadditivity(&t, 2, 5.0, 5.0).unwrap();
        assert_eq!((c.lhs, c.rhs, c.slack), (35.0, 60.0, 25.0));
        assert!(c.holds);
        assert!(matches!(check_subadditivity(&t, 2, 0.5, 1.0), Err(Error::OffGrid(_))));
        assert!(check_subadditivity(&t, 2, 15.0, 10.0).is_err());
        let x0 = check_subadditivity(&t, 2, 0.0, 7.0).unwrap();
        assert!(x0.holds && x0.lhs <= 7.0 * 7.0);
    }

    #[test]
    fn subadditivity_sweep_geometric() {
        let t = RenewalTable::standard(&geom(), 300, TableLimits::default())
            .unwrap()
            .convolve_levels(3, TableLimits::default())
            .unwrap();
        for k in 1..=3 {
            let s = subadditivity_sweep(&t, k, 300).unwrap();
            assert_eq!(s.violations, 0);
            assert_eq!(s.pairs, 301 * 302 / 2);
        }
    }

    #[test]
    fn csv_export() {
        let t = RenewalTable::standard(&det(), 2, TableLimits::default())
            .unwrap()
            .convolve_levels(2, TableLimits::default())
            .unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "n,t,V1,V2");
        assert_eq!(lines[3], "2,2.0000000000000000e0,2.0000000000000000e0,1.0000000000000000e0");
        let parsed: f64 = lines[3].split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(parsed, 2.0);
    }

    #[test]
    fn value_at_is_right_continuous_step() {
        let t = RenewalTable::standard(&det(), 10, TableLimits::default()).unwrap();
        assert_eq!(t.value_at(1, 3.0).unwrap(), 3.0);
        assert_eq!(t.value_at(1, 3.999).unwrap(), 3.0);
        assert_eq!(t.value_at(1, 0.3 * 10.0).unwrap(), 3.0);
        assert!(t.value_at(1, 11.0).is_err());
    }
}
