//! Baseline mechanisms: the winner-takes-all contest, the VCG-format mechanism,
//! and the payoff ratio bound for large `n`.

use serde::{Deserialize, Serialize};

use crate::distributions::{check_nk, efficient_curve, efficient_from_cdf, DistributionSpec, TypeGrid};
use crate::error::{Error, Result};
use crate::mechanism::{canonical_utility, MechanismPair};
use crate::numerics::Quadrature;
use crate::solver::objective_value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    Wta,
    VcgFormat,
}

impl std::fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BaselineKind::Wta => "wta",
            BaselineKind::VcgFormat => "vcg-format",
        })
    }
}

/// Efficient allocation implemented by the least-effort contest.
pub fn wta_pair(spec: &DistributionSpec, grid: &TypeGrid, n: usize, k: usize, eta: f64, alpha: f64) -> Result<MechanismPair> {
    check_nk(n, k)?;
    let q = efficient_curve(spec, grid, n, k)?;
    let u = canonical_utility(grid.points(), &q, eta, q[0])?;
    MechanismPair::new(grid.clone(), q, u, eta, n, k, alpha)
}

/// Interim utility under the VCG format, `η ∫_{θ-1/η}^{θ} Q_E(t) dt` with `Q_E = 0` below the support.
pub fn vcg_interim_utility(spec: &DistributionSpec, n: usize, k: usize, eta: f64, theta: f64) -> Result<f64> {
    check_nk(n, k)?;
    if !(eta > 0.0) {
        return Err(Error::Parameter(format!("eta must be positive, got {eta}")));
    }
    spec.cdf(theta)?;
    let a = (theta - 1.0 / eta).max(spec.lo());
    if a >= theta {
        return Ok(0.0);
    }
    let quad = Quadrature::default();
    Ok(eta * quad.integrate(a, theta, |t| efficient_from_cdf(n, k, spec.cdf_clamped(t))))
}

/// VCG-format pair on a grid: efficient allocation with the mechanism's utilities.
pub fn vcg_pair(spec: &DistributionSpec, grid: &TypeGrid, n: usize, k: usize, eta: f64, alpha: f64) -> Result<MechanismPair> {
    let q = efficient_curve(spec, grid, n, k)?;
    let u = grid.points().iter().map(|&t| vcg_interim_utility(spec, n, k, eta, t)).collect::<Result<Vec<_>>>()?;
    MechanismPair::new(grid.clone(), q, u, eta, n, k, alpha)
}

/// Lower bound on the optimal-to-WTA payoff ratio.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RatioBound {
    pub delta: f64,
    /// `false` when `δ ≤ 1`, i.e. `ε` is too large for the bound to say anything.
    pub bites: bool,
}

/// `δ = ((θ̄ - ε)α + 1 - α) / (θ̄α + (1 - α)(1 - 1/e + ε))`.
pub fn nonconvergence_bound(theta_hi: f64, alpha: f64, eps: f64) -> Result<RatioBound> {
    if !(theta_hi > 0.0 && theta_hi.is_finite()) {
        return Err(Error::Parameter(format!("upper type must be positive, got {theta_hi}")));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Parameter(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    if !(eps > 0.0) {
        return Err(Error::Parameter(format!("epsilon must be positive, got {eps}")));
    }
    let e_inv = (-1.0f64).exp();
    let delta = ((theta_hi - eps) * alpha + 1.0 - alpha) / (theta_hi * alpha + (1.0 - alpha) * (1.0 - e_inv + eps));
    Ok(RatioBound { delta, bites: delta > 1.0 })
}

/// Total utility `n·E[U]` of the WTA contest with one item.
pub fn efficient_utility_total(spec: &DistributionSpec, n: usize, eta: f64) -> Result<f64> {
    // Q_E steepens like n near the top, and the grid error grows like (n h)².
    let grid = TypeGrid::uniform(spec, (400 * n).clamp(8000, 400_000))?;
    let pair = wta_pair(spec, &grid, n, 1, eta, 0.5)?;
    Ok(n as f64 * pair.utility())
}

/// One row of a mechanism comparison; all values are totals over the `n` agents.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub mechanism: String,
    pub alpha: f64,
    pub efficiency: f64,
    pub total_utility: f64,
    pub objective: f64,
}

impl ComparisonRow {
    pub fn from_pair(mechanism: impl Into<String>, pair: &MechanismPair) -> Self {
        let n = pair.n as f64;
        ComparisonRow {
            mechanism: mechanism.into(),
            alpha: pair.alpha,
            efficiency: n * pair.efficiency(),
            total_utility: n * pair.utility(),
            objective: n * objective_value(pair),
        }
    }
}
