//! Interim allocation/utility curves and the checks and constructions built on them.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::distributions::{efficient_curve, DistributionSpec, TypeGrid};
use crate::error::{Error, Result};
use crate::numerics::gauss_legendre;

/// Verification tolerances.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    /// Level comparisons such as `U ≤ Q`.
    pub level: f64,
    /// Discrete slopes, which amplify grid error.
    pub slope: f64,
    /// `|∫ (Q - Q_E) dF|` on a no-effort interval.
    pub binding: f64,
}

impl Tolerance {
    pub fn for_eta(eta: f64) -> Self {
        Tolerance { level: 1e-6 * eta.max(1.0), slope: 1e-3, binding: 1e-5 }
    }

    pub fn scaled(self, factor: f64) -> Self {
        Tolerance { level: self.level * factor, slope: self.slope * factor, binding: self.binding * factor }
    }
}

/// Interim allocation `Q` and utility `U` on a type grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PairFile", into = "PairFile")]
pub struct MechanismPair {
    pub grid: TypeGrid,
    pub q: Vec<f64>,
    pub u: Vec<f64>,
    pub eta: f64,
    pub n: usize,
    pub k: usize,
    pub alpha: f64,
}

#[derive(Serialize, Deserialize)]
struct PairRecord {
    theta: f64,
    weight: f64,
    #[serde(rename = "Q")]
    q: f64,
    #[serde(rename = "U")]
    u: f64,
}

#[derive(Serialize, Deserialize)]
struct PairFile {
    n: usize,
    k: usize,
    eta: f64,
    alpha: f64,
    points: Vec<PairRecord>,
}

impl TryFrom<PairFile> for MechanismPair {
    type Error = Error;
    fn try_from(f: PairFile) -> Result<Self> {
        let points = f.points.iter().map(|r| r.theta).collect();
        let weights = f.points.iter().map(|r| r.weight).collect();
        let grid = TypeGrid::new(points, weights)?;
        let q = f.points.iter().map(|r| r.q).collect();
        let u = f.points.iter().map(|r| r.u).collect();
        MechanismPair::new(grid, q, u, f.eta, f.n, f.k, f.alpha)
    }
}

impl From<MechanismPair> for PairFile {
    fn from(p: MechanismPair) -> Self {
        let points = (0..p.grid.len())
            .map(|j| PairRecord { theta: p.grid.points()[j], weight: p.grid.weights()[j], q: p.q[j], u: p.u[j] })
            .collect();
        PairFile { n: p.n, k: p.k, eta: p.eta, alpha: p.alpha, points }
    }
}

impl MechanismPair {
    pub fn new(grid: TypeGrid, q: Vec<f64>, u: Vec<f64>, eta: f64, n: usize, k: usize, alpha: f64) -> Result<Self> {
        if q.len() != grid.len() {
            return Err(Error::Shape { expected: grid.len(), got: q.len() });
        }
        if u.len() != grid.len() {
            return Err(Error::Shape { expected: grid.len(), got: u.len() });
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::Parameter(format!("eta must be positive, got {eta}")));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Parameter(format!("alpha must lie in [0, 1], got {alpha}")));
        }
        if k == 0 || k >= n {
            return Err(Error::Parameter(format!("need 0 < k < n, got n={n}, k={k}")));
        }
        Ok(MechanismPair { grid, q, u, eta, n, k, alpha })
    }

    pub fn points(&self) -> &[f64] {
        self.grid.points()
    }

    /// `E[θ Q(θ)]`.
    pub fn efficiency(&self) -> f64 {
        self.grid.weights().iter().zip(self.points()).zip(&self.q).map(|((w, t), q)| w * t * q).sum()
    }

    /// `E[U(θ)]`.
    pub fn utility(&self) -> f64 {
        self.grid.integrate(&self.u)
    }
}

fn first_decrease(q: &[f64], tol: f64) -> Option<usize> {
    q.windows(2).position(|w| w[1] < w[0] - tol).map(|i| i + 1)
}

/// The pointwise-largest utility compatible with `Q` and the lowest-type utility `u_low`:
/// `Û(θ) = min(u_low + η(θ - θ_0), inf_{θ' ≤ θ} Q(θ') + η(θ - θ'))`.
pub fn canonical_utility(points: &[f64], q: &[f64], eta: f64, u_low: f64) -> Result<Vec<f64>> {
    if points.len() != q.len() {
        return Err(Error::Shape { expected: points.len(), got: q.len() });
    }
    if let Some(i) = first_decrease(q, 1e-12) {
        return Err(Error::Precondition(format!("allocation decreases at index {i}")));
    }
    if u_low > q[0] + 1e-12 {
        return Err(Error::Precondition(format!("lowest utility {u_low} exceeds Q(lo) = {}", q[0])));
    }
    let t0 = points[0];
    let (mut best, mut at) = (f64::INFINITY, 0);
    Ok(points
        .iter()
        .zip(q)
        .enumerate()
        .map(|(j, (&t, &qj))| {
            let v = qj - eta * t;
            if v <= best {
                best = v;
                at = j;
            }
            (u_low + eta * (t - t0)).min(q[at] + eta * (t - points[at]))
        })
        .collect())
}

/// Worst violation found for each incentive condition (positive means violated).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IcReport {
    pub pass: bool,
    /// `max(-slope)`: utility decreasing.
    pub slope_below_zero: f64,
    /// `max(slope - η)`.
    pub slope_above_eta: f64,
    /// `max(U - Q)`.
    pub utility_above_allocation: f64,
    /// `max(η - slope)` over cells where `U < Q`.
    pub effort_slope_gap: f64,
    pub worst_index: Option<usize>,
}

/// Discrete check of the contest incentive conditions: slope of `U` in `[0, η]`,
/// `U ≤ Q`, and slope `η` wherever `U < Q`.
pub fn check_ic(pair: &MechanismPair, tol: &Tolerance) -> IcReport {
    let p = pair.points();
    let (q, u, eta) = (&pair.q, &pair.u, pair.eta);
    let m = p.len();
    let mut rep = IcReport {
        pass: true,
        slope_below_zero: f64::NEG_INFINITY,
        slope_above_eta: f64::NEG_INFINITY,
        utility_above_allocation: f64::NEG_INFINITY,
        effort_slope_gap: f64::NEG_INFINITY,
        worst_index: None,
    };
    let fail = |rep: &mut IcReport, j: usize| {
        if rep.pass {
            rep.worst_index = Some(j);
        }
        rep.pass = false;
    };
    for j in 0..m {
        let gap = u[j] - q[j];
        rep.utility_above_allocation = rep.utility_above_allocation.max(gap);
        if gap > tol.level {
            fail(&mut rep, j);
        }
        if j + 1 == m {
            continue;
        }
        let slope = (u[j + 1] - u[j]) / (p[j + 1] - p[j]);
        rep.slope_below_zero = rep.slope_below_zero.max(-slope);
        rep.slope_above_eta = rep.slope_above_eta.max(slope - eta);
        if slope < -tol.slope || slope > eta + tol.slope {
            fail(&mut rep, j);
        }
        if u[j] < q[j] - tol.level && u[j + 1] < q[j + 1] - tol.level {
            rep.effort_slope_gap = rep.effort_slope_gap.max(eta - slope);
            if slope < eta - tol.slope {
                fail(&mut rep, j);
            }
        }
    }
    if m < 2 {
        rep.slope_below_zero = 0.0;
        rep.slope_above_eta = 0.0;
    }
    if rep.effort_slope_gap == f64::NEG_INFINITY {
        rep.effort_slope_gap = 0.0;
    }
    rep
}

/// Largest excess of the tail integral of `Q` over that of `Q_E`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub pass: bool,
    /// `max_j (Σ_{l≥j} w_l Q_l - Σ_{l≥j} w_l Q_E,l)`; non-positive when feasible.
    pub worst_excess: f64,
    pub worst_theta: f64,
}

/// Symmetric interim feasibility: `∫_θ Q dF ≤ ∫_θ Q_E dF` for every grid `θ`.
pub fn check_interim_feasibility(
    q: &[f64],
    grid: &TypeGrid,
    spec: &DistributionSpec,
    n: usize,
    k: usize,
    tol: f64,
) -> Result<FeasibilityReport> {
    if q.len() != grid.len() {
        return Err(Error::Shape { expected: grid.len(), got: q.len() });
    }
    if let Some(index) = first_decrease(q, 1e-9) {
        return Err(Error::NotMonotone { index });
    }
    let qe = efficient_curve(spec, grid, n, k)?;
    let tq = grid.tail_sums(q);
    let te = grid.tail_sums(&qe);
    let (mut worst, mut at) = (f64::NEG_INFINITY, 0);
    for j in 0..grid.len() {
        let d = tq[j] - te[j];
        if d > worst {
            worst = d;
            at = j;
        }
    }
    Ok(FeasibilityReport { pass: worst <= tol, worst_excess: worst, worst_theta: grid.points()[at] })
}

/// Increasing rearrangement `Q†(θ) = G⁻¹(F(θ))`, where `G` is the distribution of the values of `Q`.
///
/// Each node receives the average of `G⁻¹` over its own block of `F`-mass, so the
/// mean of `Q` is preserved exactly and the value distribution up to one node's weight.
pub fn monotone_rearrangement(q: &[f64], grid: &TypeGrid) -> Result<Vec<f64>> {
    if q.len() != grid.len() {
        return Err(Error::Shape { expected: grid.len(), got: q.len() });
    }
    let w = grid.weights();
    let mut order: Vec<usize> = (0..q.len()).collect();
    order.sort_by(|&a, &b| q[a].total_cmp(&q[b]).then(a.cmp(&b)));
    let mut out = vec![0.0; q.len()];
    let mut src = 0;
    let mut src_left = w[order[0]];
    for (j, slot) in out.iter_mut().enumerate() {
        let mut need = w[j];
        let mut acc = 0.0;
        while need > 0.0 && src < order.len() {
            let take = need.min(src_left);
            acc += take * q[order[src]];
            need -= take;
            src_left -= take;
            if src_left <= 1e-300 {
                src += 1;
                if src < order.len() {
                    src_left = w[order[src]];
                }
            }
        }
        *slot = if w[j] > 0.0 { acc / (w[j] - need) } else { q[order[src.min(order.len() - 1)]] };
    }
    for j in 1..out.len() {
        out[j] = out[j].max(out[j - 1]);
    }
    Ok(out)
}

/// Region of the optimal contest.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionTag {
    /// `Q = U = Q_E`, slope of `U` below `η`.
    NoTension,
    /// `Q = U`, slope `η`, allocation randomised with a binding feasibility integral.
    NoEffort,
    /// `Q = Q_E > U`, slope `η`.
    Efficient,
}

impl fmt::Display for RegionTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegionTag::NoTension => "no_tension",
            RegionTag::NoEffort => "no_effort",
            RegionTag::Efficient => "efficient",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionInterval {
    pub lo: f64,
    pub hi: f64,
    pub tag: RegionTag,
    /// `∫ (Q - Q_E) dF` over the interval, for no-effort intervals.
    pub binding_residual: Option<f64>,
}

/// Ordered intervals covering the type space.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RegionPartition {
    pub intervals: Vec<RegionInterval>,
}

impl RegionPartition {
    pub fn tags(&self) -> Vec<RegionTag> {
        self.intervals.iter().map(|i| i.tag).collect()
    }

    /// Total `F`-measure of the intervals with `tag`.
    pub fn measure(&self, spec: &DistributionSpec, tag: RegionTag) -> f64 {
        self.intervals
            .iter()
            .filter(|i| i.tag == tag)
            .map(|i| spec.cdf_clamped(i.hi) - spec.cdf_clamped(i.lo))
            .sum()
    }

    pub fn max_binding_residual(&self) -> f64 {
        self.intervals.iter().filter_map(|i| i.binding_residual).map(f64::abs).fold(0.0, f64::max)
    }
}

pub const MAX_INTERVALS: usize = 64;

#[derive(Clone, Copy, PartialEq)]
enum PointTag {
    Tag(RegionTag),
    Either,
    Unmatched,
}

/// Partition the grid into no-tension, no-effort and efficient intervals.
///
/// Points where `Q = U = Q_E` with slope `η` fit both the no-tension and the
/// no-effort description; they join the interval on their left. Interval
/// boundaries are grid points, each assigned to the interval on its left.
pub fn classify_regions(pair: &MechanismPair, spec: &DistributionSpec, tol: &Tolerance) -> Result<RegionPartition> {
    let p = pair.points();
    let m = p.len();
    let qe = efficient_curve(spec, &pair.grid, pair.n, pair.k)?;
    let (q, u, eta) = (&pair.q, &pair.u, pair.eta);
    let slope = |j: usize| {
        if j + 1 < m {
            (u[j + 1] - u[j]) / (p[j + 1] - p[j])
        } else {
            (u[j] - u[j - 1]) / (p[j] - p[j - 1])
        }
    };
    let mut tags: Vec<PointTag> = (0..m)
        .map(|j| {
            let s = slope(j);
            let at_eta = (s - eta).abs() <= tol.slope;
            let qu = (q[j] - u[j]).abs() <= tol.level;
            let qq = (q[j] - qe[j]).abs() <= tol.level;
            match (qu, qq) {
                (true, true) if s < eta - tol.slope => PointTag::Tag(RegionTag::NoTension),
                (true, true) if at_eta => PointTag::Either,
                (true, false) if at_eta => PointTag::Tag(RegionTag::NoEffort),
                (false, true) if at_eta && u[j] < q[j] => PointTag::Tag(RegionTag::Efficient),
                _ => PointTag::Unmatched,
            }
        })
        .collect();
    for j in 0..m {
        match tags[j] {
            PointTag::Either => {
                tags[j] = if j == 0 { PointTag::Tag(RegionTag::NoTension) } else { tags[j - 1] };
            }
            PointTag::Unmatched => {
                // A cutoff point can straddle two regions; it belongs to the left one.
                let isolated = j > 0 && (j + 1 == m || tags[j + 1] != PointTag::Unmatched);
                if isolated {
                    tags[j] = tags[j - 1];
                } else {
                    return Err(Error::Classification {
                        theta: p[j],
                        detail: format!(
                            "Q={:.9} U={:.9} Q_E={:.9} slope={:.6} eta={}",
                            q[j],
                            u[j],
                            qe[j],
                            slope(j),
                            eta
                        ),
                    });
                }
            }
            PointTag::Tag(_) => {}
        }
    }
    // The first interval already opens at p[0], so a lone first point would be empty.
    if m > 1 && tags[0] != tags[1] {
        tags[0] = tags[1];
    }
    let tq = pair.grid.tail_sums(q);
    let te = pair.grid.tail_sums(&qe);
    let mut intervals: Vec<RegionInterval> = Vec::new();
    let mut start = 0;
    for j in 1..=m {
        if j < m && tags[j] == tags[start] {
            continue;
        }
        let PointTag::Tag(tag) = tags[start] else { unreachable!() };
        let lo = if start == 0 { p[0] } else { p[start - 1] };
        let hi = p[j - 1];
        let binding_residual = (tag == RegionTag::NoEffort).then(|| (tq[start] - te[start]) - (tq[j] - te[j]));
        if let Some(r) = binding_residual {
            if r.abs() > tol.binding {
                return Err(Error::Classification {
                    theta: lo,
                    detail: format!("no-effort interval [{lo}, {hi}] has feasibility residual {r:e}"),
                });
            }
        }
        intervals.push(RegionInterval { lo, hi, tag, binding_residual });
        if intervals.len() > MAX_INTERVALS {
            return Err(Error::TooManyIntervals(MAX_INTERVALS));
        }
        start = j;
    }
    Ok(RegionPartition { intervals })
}

/// Recommended signals `ŝ(θ) = θ + (Q(θ) - U(θ)) / η`.
pub fn equilibrium_signal_map(pair: &MechanismPair) -> Result<Vec<f64>> {
    let rep = check_ic(pair, &Tolerance::for_eta(pair.eta));
    if !rep.pass {
        return Err(Error::Precondition(format!("pair violates incentive compatibility: {rep:?}")));
    }
    Ok(pair.points().iter().zip(&pair.q).zip(&pair.u).map(|((t, q), u)| t + (q - u) / pair.eta).collect())
}

/// Disjoint open pooling intervals in signal space.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CoarseRanking {
    pools: Vec<(f64, f64)>,
}

impl CoarseRanking {
    pub fn strict() -> Self {
        CoarseRanking { pools: Vec::new() }
    }

    pub fn new(mut pools: Vec<(f64, f64)>) -> Result<Self> {
        pools.sort_by(|a, b| a.0.total_cmp(&b.0));
        for pool in &pools {
            if !(pool.0 < pool.1) {
                return Err(Error::Parameter(format!("pool ({}, {}) is empty", pool.0, pool.1)));
            }
        }
        if pools.windows(2).any(|w| w[1].0 < w[0].1) {
            return Err(Error::Parameter("pools overlap".into()));
        }
        Ok(CoarseRanking { pools })
    }

    /// Pools from the no-effort intervals of a partition; zero-mass pools are dropped.
    /// A pool reaching the top type also absorbs every higher (off-path) signal.
    pub fn from_regions(regions: &RegionPartition, spec: &DistributionSpec) -> Self {
        let pools = regions
            .intervals
            .iter()
            .filter(|i| i.tag == RegionTag::NoEffort && spec.cdf_clamped(i.hi) > spec.cdf_clamped(i.lo))
            .map(|i| (i.lo, if i.hi >= spec.hi() { f64::INFINITY } else { i.hi }))
            .collect();
        CoarseRanking { pools }
    }

    pub fn pools(&self) -> &[(f64, f64)] {
        &self.pools
    }

    /// Index of the open pool containing `s`.
    pub fn pool_of(&self, s: f64) -> Option<usize> {
        let i = self.pools.partition_point(|p| p.0 < s);
        (i > 0 && s < self.pools[i - 1].1).then(|| i - 1)
    }

    /// Signal after pooling: the pool ceiling inside a pool, the signal itself outside.
    pub fn ceiling(&self, s: f64) -> f64 {
        self.pool_of(s).map_or(s, |i| self.pools[i].1)
    }
}

/// Rank `r_i` (rivals strictly above) and tie count `z_i` (1 + rivals level) for every agent.
pub fn coarse_rank(ranking: &CoarseRanking, signals: &[f64]) -> Vec<(usize, usize)> {
    let c: Vec<f64> = signals.iter().map(|&s| ranking.ceiling(s)).collect();
    c.iter()
        .map(|&ci| {
            let above = c.iter().filter(|&&cj| cj > ci).count();
            let level = c.iter().filter(|&&cj| cj == ci).count();
            (above, level)
        })
        .collect()
}

/// Allocation of `k` items under the coarse-ranking contest rule.
pub fn contest_allocate(ranking: &CoarseRanking, signals: &[f64], k: usize) -> Vec<f64> {
    coarse_rank(ranking, signals).into_iter().map(|(r, z)| rank_share(r, z, k)).collect()
}

/// Share of an agent ranked below `r` rivals and tied with `z - 1` others.
pub fn rank_share(r: usize, z: usize, k: usize) -> f64 {
    if k >= r + z {
        1.0
    } else if k > r {
        (k - r) as f64 / z as f64
    } else {
        0.0
    }
}

/// Pool of the two-agent ex-post rule with its upset probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct PoolKernel {
    pub lo: f64,
    pub hi: f64,
    thetas: Vec<f64>,
    upset: Vec<f64>,
}

impl PoolKernel {
    /// Probability that the lower of two pooled signals wins, as a function of the lower signal.
    pub fn upset(&self, s: f64) -> f64 {
        let t = &self.thetas;
        let i = t.partition_point(|x| *x <= s).clamp(1, t.len() - 1);
        let w = ((s - t[i - 1]) / (t[i] - t[i - 1])).clamp(0.0, 1.0);
        self.upset[i - 1] + w * (self.upset[i] - self.upset[i - 1])
    }

    pub fn table(&self) -> (&[f64], &[f64]) {
        (&self.thetas, &self.upset)
    }
}

/// Ex-post rule for two agents and one item reproducing an interim allocation.
///
/// Outside the pools the higher signal wins. When both signals fall in the same
/// pool the lower one wins with probability `upset(lower)`, so the higher signal
/// still wins with probability strictly below one.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpostRule {
    ranking: CoarseRanking,
    kernels: Vec<PoolKernel>,
}

impl ExpostRule {
    pub fn ranking(&self) -> &CoarseRanking {
        &self.ranking
    }

    pub fn kernels(&self) -> &[PoolKernel] {
        &self.kernels
    }

    /// Probability that the agent with signal `own` beats the rival with signal `other`.
    pub fn win_probability(&self, own: f64, other: f64) -> f64 {
        let po = self.ranking.pool_of(own);
        if po.is_some() && po == self.ranking.pool_of(other) {
            let kernel = &self.kernels[po.unwrap()];
            if own == other {
                0.5
            } else if own < other {
                kernel.upset(own)
            } else {
                1.0 - kernel.upset(other)
            }
        } else if own > other {
            1.0
        } else if own == other {
            0.5
        } else {
            0.0
        }
    }
}

/// Build the two-agent ex-post rule implementing `pair` (one item).
///
/// Inside a pool `[a, b]` with `G(θ) = F(b) - F(θ)` the upset probability is
/// `∫_θ^b (f - Q') G dt / G(θ)²`, which makes the interim allocation equal `Q`
/// whenever `∫_a^b (Q - F) dF = 0`.
pub fn expost_rule_pair(pair: &MechanismPair, spec: &DistributionSpec) -> Result<ExpostRule> {
    if pair.n != 2 || pair.k != 1 {
        return Err(Error::Precondition(format!("ex-post rule needs n=2, k=1, got n={}, k={}", pair.n, pair.k)));
    }
    let regions = classify_regions(pair, spec, &Tolerance::for_eta(pair.eta))?;
    let ranking = CoarseRanking::from_regions(&regions, spec);
    let p = pair.points();
    let (gx, gw) = gauss_legendre(8);
    let mut kernels = Vec::with_capacity(ranking.pools().len());
    for &(a, b) in ranking.pools() {
        let b = b.min(spec.hi());
        let ia = p.partition_point(|x| *x < a);
        let ib = p.partition_point(|x| *x <= b) - 1;
        let thetas: Vec<f64> = p[ia..=ib].to_vec();
        let fb = spec.cdf_clamped(b);
        let mut numer = vec![0.0; thetas.len()];
        for i in (0..thetas.len() - 1).rev() {
            let (lo, hi) = (thetas[i], thetas[i + 1]);
            let dq = (pair.q[ia + i + 1] - pair.q[ia + i]) / (hi - lo);
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            let cell: f64 = gx
                .iter()
                .zip(&gw)
                .map(|(x, w)| {
                    let t = mid + half * x;
                    w * (spec.pdf_clamped(t) - dq) * (fb - spec.cdf_clamped(t))
                })
                .sum::<f64>()
                * half;
            numer[i] = numer[i + 1] + cell;
        }
        let last = thetas.len() - 1;
        let mut upset: Vec<f64> = (0..thetas.len())
            .map(|i| {
                let g = fb - spec.cdf_clamped(thetas[i]);
                if i < last && g > 0.0 {
                    numer[i] / (g * g)
                } else {
                    f64::NAN
                }
            })
            .collect();
        let dq_end = (pair.q[ia + last] - pair.q[ia + last - 1]) / (thetas[last] - thetas[last - 1]);
        upset[last] = 0.5 * (1.0 - dq_end / spec.pdf_clamped(b));
        // The numerator carries the pool's binding residual, which the classifier lets through.
        let ga = fb - spec.cdf_clamped(a);
        let slack = 1e-9 + Tolerance::for_eta(pair.eta).binding / (ga * ga);
        for (i, s) in upset.iter_mut().enumerate() {
            if !s.is_finite() || *s < -slack || *s > 1.0 + slack {
                return Err(Error::Construction(format!(
                    "upset probability {s} at theta={} leaves [0, 1]",
                    thetas[i]
                )));
            }
            *s = s.clamp(0.0, 1.0);
        }
        kernels.push(PoolKernel { lo: a, hi: b, thetas, upset });
    }
    Ok(ExpostRule { ranking, kernels })
}

/// Format with 12 significant digits.
pub fn sig12(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let r: f64 = format!("{x:.11e}").parse().unwrap_or(x);
    format!("{r}")
}

/// CSV with columns `theta,Q,U,Q_E,region`.
pub fn write_curves_csv<W: Write>(
    out: W,
    pair: &MechanismPair,
    spec: &DistributionSpec,
    regions: Option<&RegionPartition>,
) -> Result<()> {
    let qe = efficient_curve(spec, &pair.grid, pair.n, pair.k)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["theta", "Q", "U", "Q_E", "region"])?;
    for (j, &t) in pair.points().iter().enumerate() {
        let tag = regions
            .and_then(|r| r.intervals.iter().find(|i| (j == 0 || t > i.lo) && t <= i.hi))
            .map_or(String::new(), |i| i.tag.to_string());
        w.write_record([sig12(t), sig12(pair.q[j]), sig12(pair.u[j]), sig12(qe[j]), tag])?;
    }
    w.flush()?;
    Ok(())
}

/// CSV with columns `lo,hi,region,binding_residual`.
pub fn write_regions_csv<W: Write>(out: W, regions: &RegionPartition) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["lo", "hi", "region", "binding_residual"])?;
    for i in &regions.intervals {
        w.write_record([sig12(i.lo), sig12(i.hi), i.tag.to_string(), i.binding_residual.map_or(String::new(), sig12)])?;
    }
    w.flush()?;
    Ok(())
}
