//! The optimal contest: linear program, closed form for convex `Q_E`, and sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{efficient_curve, efficient_from_cdf, efficient_slope, DistributionSpec, TypeGrid};
use crate::error::{Error, Result};
use crate::lp::{BandedLp, IpmOptions};
use crate::mechanism::{
    canonical_utility, check_ic, check_interim_feasibility, classify_regions, FeasibilityReport, IcReport,
    MechanismPair, RegionPartition, RegionTag, Tolerance,
};
use crate::numerics::{bisect, golden_max, Quadrature};

/// Solution method.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Lp,
    ClosedForm,
    /// Closed form when `k = 1` and `Q_E` is convex, otherwise the LP.
    Auto,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lp" => Ok(Method::Lp),
            "closed-form" => Ok(Method::ClosedForm),
            "auto" => Ok(Method::Auto),
            other => Err(Error::Config { field: "method".into(), message: format!("unknown method `{other}`") }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub spec: DistributionSpec,
    pub n: usize,
    pub k: usize,
    pub eta: f64,
    pub alpha: f64,
    /// Number of grid cells `M`; the grid has `M + 1` points.
    pub grid: usize,
    pub lp_tol: f64,
    pub method: Method,
}

impl SolveConfig {
    pub fn new(spec: DistributionSpec, n: usize, k: usize, eta: f64, alpha: f64) -> Self {
        SolveConfig { spec, n, k, eta, alpha, grid: 2000, lp_tol: 1e-9, method: Method::Auto }
    }

    pub fn with_grid(mut self, grid: usize) -> Self {
        self.grid = grid;
        self
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, message: String| Err(Error::Config { field: field.into(), message });
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad("alpha", format!("{} is outside [0, 1]", self.alpha));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad("eta", format!("{} must be positive", self.eta));
        }
        if self.grid < 100 {
            return bad("grid", format!("{} is below the minimum of 100", self.grid));
        }
        if self.k == 0 || self.k >= self.n {
            return bad("k", format!("need 0 < k < n, got n={}, k={}", self.n, self.k));
        }
        if !(self.lp_tol > 0.0) {
            return bad("lp_tol", "must be positive".into());
        }
        Ok(())
    }

    pub fn type_grid(&self) -> Result<TypeGrid> {
        TypeGrid::uniform(&self.spec, self.grid)
    }

    pub fn tolerance(&self) -> Tolerance {
        Tolerance::for_eta(self.eta)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub method: Method,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    /// Largest `|∫ (Q - Q_E) dF|` over the no-effort intervals.
    pub max_binding_residual: f64,
    /// Largest tail-integral excess of `Q` over `Q_E`.
    pub feasibility_excess: f64,
    pub ic_pass: bool,
    /// Interior region boundaries.
    pub cutoffs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub config: SolveConfig,
    pub pair: MechanismPair,
    pub objective: f64,
    pub regions: RegionPartition,
    pub diagnostics: Diagnostics,
}

impl SolveResult {
    pub fn no_tension_measure(&self) -> f64 {
        self.regions.measure(&self.config.spec, RegionTag::NoTension)
    }

    /// Re-run the incentive check at `factor` times the default tolerance.
    pub fn ic_report(&self, factor: f64) -> IcReport {
        check_ic(&self.pair, &self.config.tolerance().scaled(factor))
    }

    pub fn feasibility_report(&self, factor: f64) -> Result<FeasibilityReport> {
        let tol = self.config.tolerance().scaled(factor).level;
        check_interim_feasibility(&self.pair.q, &self.pair.grid, &self.config.spec, self.pair.n, self.pair.k, tol)
    }
}

/// Per-agent objective `E[α θ Q(θ) + (1 - α) U(θ)]` by grid quadrature.
pub fn objective_value(pair: &MechanismPair) -> f64 {
    let w = pair.grid.weights();
    let t = pair.points();
    (0..w.len()).map(|j| w[j] * (pair.alpha * t[j] * pair.q[j] + (1.0 - pair.alpha) * pair.u[j])).sum()
}

/// Dispatch on `config.method`.
pub fn solve(config: &SolveConfig) -> Result<SolveResult> {
    config.validate()?;
    match config.method {
        Method::Lp => solve_lp(config),
        Method::ClosedForm => solve_convex_closed_form(config),
        Method::Auto => {
            if config.k == 1 && efficient_is_convex(config)? {
                solve_convex_closed_form(config)
            } else {
                solve_lp(config)
            }
        }
    }
}

fn efficient_is_convex(config: &SolveConfig) -> Result<bool> {
    let grid = config.type_grid()?;
    let qe = efficient_curve(&config.spec, &grid, config.n, config.k)?;
    Ok(qe.windows(3).all(|w| w[2] - 2.0 * w[1] + w[0] >= -1e-8))
}

/// Solve the discretised problem as a linear program.
pub fn solve_lp(config: &SolveConfig) -> Result<SolveResult> {
    solve_lp_scaled(config, 1.0)
}

/// Excess allocation mass, relative to the LP tolerance, below which bottom
/// nodes are treated as solver noise.
const LP_NOISE_MASS: f64 = 0.1;

/// Efficiency weights tried, in order, to select among the optima when `α = 0`.
/// A tied solution that allocates everything attains the `α = 0` optimum, and
/// among those it is the most efficient; small weights are the fallback.
const ALPHA_TIE_BREAK: [f64; 2] = [0.5, 1e-3];

type Index = fn(usize) -> usize;

/// Variable layout: `(Q index, U index, tail index)`. The tied layout shares Q and U.
fn layout(tied: bool) -> (Index, Index, Index) {
    if tied {
        (|j: usize| 2 * j, |j: usize| 2 * j, |j: usize| 2 * j + 1)
    } else {
        (|j: usize| 3 * j, |j: usize| 3 * j + 1, |j: usize| 3 * j + 2)
    }
}

fn build_lp(grid: &TypeGrid, bound: &[f64], eta: f64, alpha: f64, tied: bool) -> BandedLp {
    let (t, w) = (grid.points(), grid.weights());
    let np = grid.len();
    let (qv, uv, tv) = layout(tied);
    let mut lp = BandedLp::new(if tied { 2 * np } else { 3 * np });
    for j in 0..np {
        if tied {
            lp.set_cost(uv(j), -(alpha * t[j] + 1.0 - alpha) * w[j]);
        } else {
            lp.set_cost(qv(j), -alpha * w[j] * t[j]);
            lp.set_cost(uv(j), -(1.0 - alpha) * w[j]);
            lp.add_le(&[(uv(j), 1.0), (qv(j), -1.0)], 0.0);
        }
        lp.add_le(&[(tv(j), 1.0)], bound[j]);
        if j + 1 < np {
            let dt = t[j + 1] - t[j];
            if !tied {
                lp.add_le(&[(qv(j), 1.0), (qv(j + 1), -1.0)], 0.0);
            }
            lp.add_le(&[(uv(j), 1.0), (uv(j + 1), -1.0)], 0.0);
            lp.add_le(&[(uv(j + 1), 1.0), (uv(j), -1.0)], eta * dt);
            lp.add_le(&[(qv(j), w[j]), (tv(j + 1), 1.0), (tv(j), -1.0)], 0.0);
        } else {
            lp.add_le(&[(qv(j), 1.0)], 1.0);
            lp.add_le(&[(qv(j), w[j]), (tv(j), -1.0)], 0.0);
        }
    }
    lp.add_le(&[(uv(0), -1.0)], 0.0);
    lp
}

/// [`solve_lp`] with the feasibility bound `∫_θ Q_E dF` multiplied by `scale`.
pub fn solve_lp_scaled(config: &SolveConfig, scale: f64) -> Result<SolveResult> {
    config.validate()?;
    let spec = &config.spec;
    let grid = config.type_grid()?;
    let qe = efficient_curve(spec, &grid, config.n, config.k)?;
    let bound: Vec<f64> = grid.tail_sums(&qe).iter().map(|b| scale * b).collect();
    let (t, w) = (grid.points(), grid.weights());
    let np = grid.len();
    let eta = config.eta;
    let opts = IpmOptions { feasibility_tol: config.lp_tol, gap_tol: config.lp_tol * 0.1, ..IpmOptions::default() };

    // With no weight on efficiency the optimum is a whole face (the lottery
    // Q = U = k/n already attains it) and the interior point stalls inside it.
    let tied = config.alpha == 0.0;
    let (qv, uv, _) = layout(tied);
    let sol = if tied {
        let mut last = None;
        for alpha in ALPHA_TIE_BREAK {
            let sol = build_lp(&grid, &bound, eta, alpha, true).solve(&opts)?;
            let total: f64 = (0..np).map(|j| w[j] * sol.x[qv(j)]).sum();
            let full = total >= bound[0] - 10.0 * config.lp_tol;
            last = Some(sol);
            if full {
                break;
            }
        }
        last.expect("tie-break list is not empty")
    } else {
        let alpha = if config.alpha >= 1.0 { 1.0 - 1e-9 } else { config.alpha };
        build_lp(&grid, &bound, eta, alpha, false).solve(&opts)?
    };

    let mut q: Vec<f64> = (0..np).map(|j| sol.x[qv(j)].clamp(0.0, 1.0)).collect();
    for j in 1..np {
        q[j] = q[j].max(q[j - 1]);
    }
    // Low nodes carry so little mass that the LP cannot resolve them; snap
    // them to Q_E. Lowering Q only loosens the tail bounds, and the mass
    // added by raising it stays far below the LP tolerance.
    // Excess that is passed on as utility belongs to a pool and stays.
    let tol = Tolerance::for_eta(eta);
    let raw = q.clone();
    let mut raised = 0.0;
    let mut snapped = 0;
    while snapped < np {
        let j = snapped;
        let rises = j + 1 < np && sol.x[uv(j + 1)] - sol.x[uv(j)] >= (eta - tol.slope) * (t[j + 1] - t[j]);
        let pooled = rises && (q[j] - sol.x[uv(j)]).abs() <= tol.level;
        let noise = LP_NOISE_MASS * config.lp_tol;
        raised += w[j] * (qe[j] - q[j]).max(0.0);
        if pooled || w[j] * (q[j] - qe[j]).abs() > noise || raised > noise {
            break;
        }
        q[j] = qe[j];
        snapped += 1;
    }
    while snapped > 0 && snapped < np && q[snapped] < q[snapped - 1] {
        snapped -= 1;
        q[snapped] = raw[snapped];
    }
    let u_low = sol.x[uv(0)].clamp(0.0, q[0]);
    let u = canonical_utility(t, &q, eta, u_low)?;
    let pair = MechanismPair::new(grid, q, u, eta, config.n, config.k, config.alpha)?;
    let diag = Diagnostics {
        method: Method::Lp,
        iterations: sol.iterations,
        primal_residual: sol.primal_residual,
        dual_residual: sol.dual_residual,
        gap: sol.gap,
        max_binding_residual: 0.0,
        feasibility_excess: 0.0,
        ic_pass: false,
        cutoffs: Vec::new(),
    };
    assemble(config, pair, diag, scale == 1.0)
}

/// Attach checks, regions and the objective to a solved pair.
fn assemble(config: &SolveConfig, pair: MechanismPair, mut diag: Diagnostics, full: bool) -> Result<SolveResult> {
    let tol = config.tolerance();
    diag.ic_pass = check_ic(&pair, &tol.scaled(10.0)).pass;
    let regions = if full {
        let feas = check_interim_feasibility(&pair.q, &pair.grid, &config.spec, pair.n, pair.k, tol.level * 10.0)?;
        diag.feasibility_excess = feas.worst_excess;
        classify_regions(&pair, &config.spec, &tol)?
    } else {
        RegionPartition::default()
    };
    diag.max_binding_residual = regions.max_binding_residual();
    if diag.cutoffs.is_empty() && !regions.intervals.is_empty() {
        diag.cutoffs = regions.intervals[..regions.intervals.len() - 1].iter().map(|i| i.hi).collect();
    }
    let objective = objective_value(&pair);
    Ok(SolveResult { config: config.clone(), pair, objective, regions, diagnostics: diag })
}

/// Closed-form candidate for one item and convex `Q_E`.
struct ConvexCase<'a> {
    spec: &'a DistributionSpec,
    n: usize,
    eta: f64,
    alpha: f64,
    quad: Quadrature,
}

impl ConvexCase<'_> {
    fn qe(&self, t: f64) -> f64 {
        efficient_from_cdf(self.n, 1, self.spec.cdf_clamped(t))
    }

    fn slope(&self, t: f64) -> f64 {
        efficient_slope(self.spec, self.n, 1, t.clamp(self.spec.lo(), self.spec.hi())).unwrap_or(0.0)
    }

    fn line(&self, t1: f64, t: f64) -> f64 {
        self.qe(t1) + self.eta * (t - t1)
    }

    fn dens(&self, t: f64) -> f64 {
        self.spec.pdf_clamped(t)
    }

    /// `∫_{t1}^{t} (line - Q_E) dF`.
    fn excess(&self, t1: f64, t: f64) -> f64 {
        self.quad.integrate(t1, t, |x| (self.line(t1, x) - self.qe(x)) * self.dens(x))
    }

    /// Type where `Q_E' = η`, clamped to the support.
    fn tangent_point(&self) -> f64 {
        let (lo, hi) = self.spec.support();
        if self.slope(lo) >= self.eta {
            lo
        } else if self.slope(hi) <= self.eta {
            hi
        } else {
            bisect(|t| self.slope(t) - self.eta, lo, hi, 1e-13, 0.0)
        }
    }

    /// End of the no-effort interval that starts at `t1`, or `None` if the
    /// feasibility integral cannot bind before the top of the support.
    fn upper_cutoff(&self, t1: f64) -> Option<f64> {
        let hi = self.spec.hi();
        if self.eta <= self.slope(t1) || t1 >= hi {
            return Some(t1);
        }
        if self.line(t1, hi) > self.qe(hi) {
            return None;
        }
        let cross = bisect(|t| self.line(t1, t) - self.qe(t), t1 + 1e-15, hi, 1e-14, 0.0);
        if self.excess(t1, hi) > 0.0 {
            return None;
        }
        Some(bisect(|t| self.excess(t1, t), cross, hi, 1e-13, 1e-10))
    }

    fn objective(&self, t1: f64, t2: f64) -> f64 {
        let (lo, hi) = self.spec.support();
        let (a, e) = (self.alpha, self.eta);
        let line = |t: f64| self.qe(t1) + e * (t - t1);
        let below = self.quad.integrate(lo, t1, |t| (a * t + 1.0 - a) * self.qe(t) * self.dens(t));
        let pooled = self.quad.integrate(t1, t2, |t| (a * t + 1.0 - a) * line(t) * self.dens(t));
        let above = self.quad.integrate(t2, hi, |t| (a * t * self.qe(t) + (1.0 - a) * line(t)) * self.dens(t));
        below + pooled + above
    }
}

/// Three-region solution for one item when `Q_E` is convex.
///
/// Below `θ1` the allocation is efficient without effort; on `[θ1, θ2]` it follows the
/// line of slope `η` through `Q_E(θ1)` until the feasibility integral binds; above
/// `θ2` it is efficient again with effort. `θ1` maximises the objective.
pub fn solve_convex_closed_form(config: &SolveConfig) -> Result<SolveResult> {
    config.validate()?;
    if config.k != 1 {
        return Err(Error::Precondition("closed form requires k = 1".into()));
    }
    if !efficient_is_convex(config)? {
        return Err(Error::Precondition("efficient allocation is not convex; use the LP".into()));
    }
    let alpha = if config.alpha >= 1.0 { 1.0 - 1e-9 } else { config.alpha };
    let case = ConvexCase { spec: &config.spec, n: config.n, eta: config.eta, alpha, quad: Quadrature::new(16, 8) };
    let (lo, _) = config.spec.support();
    let top = case.tangent_point();
    let full = |t1: f64| case.excess(t1, config.spec.hi());
    let bottom = if top <= lo || full(lo) <= 0.0 {
        lo
    } else {
        // Slightly inside the feasible side so the binding root exists.
        let r = bisect(full, lo, top, 1e-13, 0.0);
        if full(r) > 0.0 {
            (r + 1e-12).min(top)
        } else {
            r
        }
    };
    let value = |t1: f64| match case.upper_cutoff(t1) {
        Some(t2) => case.objective(t1, t2),
        None => f64::NEG_INFINITY,
    };
    let scan: usize = 200;
    let mut best = (top, value(top));
    let mut best_i = scan;
    for i in (0..scan).rev() {
        let t1 = bottom + (top - bottom) * i as f64 / scan as f64;
        let v = value(t1);
        if v > best.1 {
            best = (t1, v);
            best_i = i;
        }
    }
    let step = (top - bottom) / scan as f64;
    if step > 0.0 {
        let a = (bottom + step * best_i.saturating_sub(1) as f64).max(bottom);
        let b = (bottom + step * (best_i + 1) as f64).min(top);
        let (x, v) = golden_max(value, a, b, 1e-6);
        if v > best.1 {
            best = (x, v);
        }
    }
    let mut t1 = best.0;
    let hi = config.spec.hi();
    let mut t2 = case.upper_cutoff(t1).unwrap_or(t1);
    if hi - t2 < 1e-9 {
        t2 = hi;
    }

    let grid = config.type_grid()?;
    let qe = efficient_curve(&config.spec, &grid, config.n, 1)?;
    // A cell split by a cutoff takes Q_E plus the cell average of the line's excess,
    // so the discrete tail sums see the jump at θ2 where it actually happens.
    let pts = grid.points();
    let w = grid.weights();
    let cell = Quadrature::new(8, 1);
    let build = |t1: f64, t2: f64| -> Vec<f64> {
        (0..pts.len())
            .map(|j| {
                let a = if j == 0 { lo } else { 0.5 * (pts[j - 1] + pts[j]) };
                let b = if j + 1 == pts.len() { hi } else { 0.5 * (pts[j] + pts[j + 1]) };
                let (a2, b2) = (a.max(t1), b.min(t2));
                if b2 <= a2 || w[j] <= 0.0 {
                    return qe[j];
                }
                // A pool reaching θ̄ still jumps back to Q_E there.
                let top = j + 1 == pts.len() && t2 >= hi;
                if a2 == a && b2 == b && !top {
                    return case.line(t1, pts[j]).clamp(0.0, 1.0);
                }
                let extra = cell.integrate(a2, b2, |x| (case.line(t1, x) - case.qe(x)) * case.dens(x));
                (qe[j] + extra / w[j]).clamp(0.0, 1.0)
            })
            .collect()
    };
    // Re-solve the cutoffs so the binding integral holds for the grid sums,
    // not only for the continuous integral. A pool reaching θ̄ moves θ1 instead.
    let residual = |t1: f64, t2: f64| -> f64 {
        build(t1, t2).iter().zip(&qe).zip(w).map(|((q, e), w)| w * (q - e)).sum()
    };
    if t2 > t1 && residual(t1, t2).abs() > 1e-13 {
        let cross = bisect(|t| case.line(t1, t) - case.qe(t), t1 + 1e-15, t2, 1e-14, 0.0);
        let r = |t| residual(t1, t);
        let (a, b) = if r(t2) < 0.0 { (cross, t2) } else { (t2, hi) };
        if r(a) >= 0.0 && r(b) <= 0.0 && b > a {
            t2 = bisect(r, a, b, 1e-13, 1e-15);
        } else if t2 >= hi && r(t2) > 0.0 {
            let r1 = |s| residual(s, hi);
            if r1(top) <= 0.0 {
                t1 = bisect(r1, t1, top, 1e-13, 1e-15);
            }
        }
    }
    let mut q = build(t1, t2);
    for j in 1..q.len() {
        q[j] = q[j].max(q[j - 1]);
    }
    let u = canonical_utility(grid.points(), &q, config.eta, qe[0])?;
    let pair = MechanismPair::new(grid, q, u, config.eta, config.n, 1, config.alpha)?;
    let diag = Diagnostics {
        method: Method::ClosedForm,
        iterations: 0,
        primal_residual: 0.0,
        dual_residual: 0.0,
        gap: 0.0,
        max_binding_residual: 0.0,
        feasibility_excess: 0.0,
        ic_pass: false,
        cutoffs: [t1, t2].into_iter().filter(|&t| t > lo && t < hi && t2 > t1).collect(),
    };
    assemble(config, pair, diag, true)
}

/// A point on the efficiency-utility frontier.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub alpha: f64,
    /// `E[θ Q]`.
    pub efficiency: f64,
    /// `E[U]`.
    pub utility: f64,
}

/// Solve for every `α` and report the frontier points.
pub fn pareto_sweep(config: &SolveConfig, alphas: &[f64]) -> Result<Vec<ParetoPoint>> {
    alphas
        .par_iter()
        .map(|&alpha| {
            let r = solve(&config.clone().with_alpha(alpha))?;
            Ok(ParetoPoint { alpha, efficiency: r.pair.efficiency(), utility: r.pair.utility() })
        })
        .collect()
}

/// Slopes `Δ efficiency / Δ utility` of the frontier ordered by utility,
/// skipping coincident points.
pub fn frontier_slopes(points: &[ParetoPoint]) -> Vec<f64> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.utility.total_cmp(&b.utility));
    let mut out = Vec::new();
    let mut prev = pts[0];
    for p in &pts[1..] {
        let du = p.utility - prev.utility;
        if du > 1e-12 {
            out.push((p.efficiency - prev.efficiency) / du);
            prev = *p;
        }
    }
    out
}

/// Scale the economy to `z·n` agents and `z·k` items.
pub fn replicate_economy(config: &SolveConfig, z: usize) -> Result<SolveConfig> {
    if z < 1 {
        return Err(Error::Parameter("scale must be at least 1".into()));
    }
    let mut c = config.clone();
    c.n *= z;
    c.k *= z;
    Ok(c)
}

/// Type `θ_c` with `1 - F(θ_c) = k/n`.
pub fn cutoff_type(spec: &DistributionSpec, n: usize, k: usize) -> f64 {
    spec.quantile_clamped(1.0 - k as f64 / n as f64)
}
