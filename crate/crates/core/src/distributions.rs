//! Type distributions on a bounded support, the type grid, and the
//! order-statistic quantities built on them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::binomial_cdf;

/// Parametric family of a type distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Uniform,
    /// `F(θ) = ((θ - lo) / (hi - lo))^p`.
    Power { p: f64 },
    /// Knots `(θ, F(θ))`, linearly interpolated.
    PiecewiseLinear { knots: Vec<(f64, f64)> },
}

/// A type distribution `F` on `[lo, hi]`.
///
/// ```
/// use contest_opt::distributions::DistributionSpec;
/// let f: DistributionSpec =
///     serde_json::from_str(r#"{"family":"power","p":2.0,"support":[0.0,1.0]}"#).unwrap();
/// assert_eq!(f.cdf(0.5).unwrap(), 0.25);
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct DistributionSpec {
    family: Family,
    lo: f64,
    hi: f64,
}

#[derive(Serialize, Deserialize)]
struct RawSpec {
    #[serde(flatten)]
    family: Family,
    support: [f64; 2],
}

impl TryFrom<RawSpec> for DistributionSpec {
    type Error = Error;
    fn try_from(raw: RawSpec) -> Result<Self> {
        DistributionSpec::new(raw.family, raw.support[0], raw.support[1])
    }
}

impl From<DistributionSpec> for RawSpec {
    fn from(s: DistributionSpec) -> Self {
        RawSpec { family: s.family, support: [s.lo, s.hi] }
    }
}

/// Assumption-style density bounds: `f ∈ [lower, upper]` and `f' ≥ -slope`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityBounds {
    pub lower: f64,
    pub upper: f64,
    pub slope: f64,
}

impl DensityBounds {
    /// Smallest `n` from which `Q_E` (one item) is guaranteed convex, if any.
    pub fn convexity_threshold(&self) -> Option<f64> {
        if self.slope == 0.0 {
            Some(2.0)
        } else if self.lower > 0.0 && self.slope.is_finite() {
            Some(2.0 + self.slope / (self.lower * self.lower))
        } else {
            None
        }
    }
}

impl DistributionSpec {
    pub fn new(family: Family, lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo < hi) {
            return Err(Error::Parameter(format!("support [{lo}, {hi}] must satisfy 0 <= lo < hi < inf")));
        }
        match &family {
            Family::Uniform => {}
            Family::Power { p } => {
                if !(p.is_finite() && *p > 0.0) {
                    return Err(Error::Parameter(format!("power exponent {p} must be positive")));
                }
            }
            Family::PiecewiseLinear { knots } => {
                if knots.len() < 2 {
                    return Err(Error::Parameter("piecewise cdf needs at least two knots".into()));
                }
                let (first, last) = (knots[0], knots[knots.len() - 1]);
                if first.0 != lo || last.0 != hi || first.1 != 0.0 || last.1 != 1.0 {
                    return Err(Error::Parameter(
                        "knots must run from (lo, 0) to (hi, 1)".into(),
                    ));
                }
                for w in knots.windows(2) {
                    if !(w[1].0 > w[0].0 && w[1].1 > w[0].1) {
                        return Err(Error::Parameter(
                            "knots must be strictly increasing in both coordinates".into(),
                        ));
                    }
                }
            }
        }
        Ok(DistributionSpec { family, lo, hi })
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        Self::new(Family::Uniform, lo, hi)
    }

    pub fn power(p: f64, lo: f64, hi: f64) -> Result<Self> {
        Self::new(Family::Power { p }, lo, hi)
    }

    pub fn piecewise_linear(knots: Vec<(f64, f64)>) -> Result<Self> {
        let lo = knots.first().map_or(0.0, |k| k.0);
        let hi = knots.last().map_or(0.0, |k| k.0);
        Self::new(Family::PiecewiseLinear { knots }, lo, hi)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    fn check(&self, theta: f64) -> Result<()> {
        if theta >= self.lo && theta <= self.hi {
            Ok(())
        } else {
            Err(Error::Domain { value: theta, lo: self.lo, hi: self.hi })
        }
    }

    pub fn cdf(&self, theta: f64) -> Result<f64> {
        self.check(theta)?;
        Ok(self.cdf_clamped(theta))
    }

    pub fn pdf(&self, theta: f64) -> Result<f64> {
        self.check(theta)?;
        Ok(self.pdf_clamped(theta))
    }

    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::Domain { value: u, lo: 0.0, hi: 1.0 });
        }
        Ok(self.quantile_clamped(u))
    }

    /// `F(θ)` with `θ` clamped into the support.
    pub fn cdf_clamped(&self, theta: f64) -> f64 {
        if theta <= self.lo {
            return 0.0;
        }
        if theta >= self.hi {
            return 1.0;
        }
        let x = (theta - self.lo) / (self.hi - self.lo);
        match &self.family {
            Family::Uniform => x,
            Family::Power { p } => x.powf(*p),
            Family::PiecewiseLinear { knots } => {
                let i = knots.partition_point(|k| k.0 <= theta).clamp(1, knots.len() - 1);
                let (a, b) = (knots[i - 1], knots[i]);
                a.1 + (b.1 - a.1) * (theta - a.0) / (b.0 - a.0)
            }
        }
    }

    /// `f(θ)` with `θ` clamped into the support (right derivative at knots).
    pub fn pdf_clamped(&self, theta: f64) -> f64 {
        let theta = theta.clamp(self.lo, self.hi);
        let w = self.hi - self.lo;
        match &self.family {
            Family::Uniform => 1.0 / w,
            Family::Power { p } => {
                let x = (theta - self.lo) / w;
                if *p == 1.0 {
                    1.0 / w
                } else {
                    p * x.powf(p - 1.0) / w
                }
            }
            Family::PiecewiseLinear { knots } => {
                let i = knots.partition_point(|k| k.0 <= theta).clamp(1, knots.len() - 1);
                let (a, b) = (knots[i - 1], knots[i]);
                (b.1 - a.1) / (b.0 - a.0)
            }
        }
    }

    pub fn quantile_clamped(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let w = self.hi - self.lo;
        match &self.family {
            Family::Uniform => self.lo + w * u,
            Family::Power { p } => self.lo + w * u.powf(1.0 / p),
            Family::PiecewiseLinear { knots } => {
                let i = knots.partition_point(|k| k.1 <= u).clamp(1, knots.len() - 1);
                let (a, b) = (knots[i - 1], knots[i]);
                a.0 + (b.0 - a.0) * (u - a.1) / (b.1 - a.1)
            }
        }
    }

    /// Density bounds of the family; an infinite `slope` means no finite bound exists.
    pub fn density_bounds(&self) -> DensityBounds {
        let w = self.hi - self.lo;
        match &self.family {
            Family::Uniform => DensityBounds { lower: 1.0 / w, upper: 1.0 / w, slope: 0.0 },
            Family::Power { p } => {
                if *p >= 1.0 {
                    DensityBounds { lower: if *p == 1.0 { 1.0 / w } else { 0.0 }, upper: p / w, slope: 0.0 }
                } else {
                    DensityBounds { lower: p / w, upper: f64::INFINITY, slope: f64::INFINITY }
                }
            }
            Family::PiecewiseLinear { knots } => {
                let d: Vec<f64> = knots.windows(2).map(|k| (k[1].1 - k[0].1) / (k[1].0 - k[0].0)).collect();
                let lower = d.iter().cloned().fold(f64::INFINITY, f64::min);
                let upper = d.iter().cloned().fold(0.0, f64::max);
                let drops = d.windows(2).any(|x| x[1] < x[0]);
                DensityBounds { lower, upper, slope: if drops { f64::INFINITY } else { 0.0 } }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        let q = crate::numerics::Quadrature::new(16, 64);
        q.integrate(0.0, 1.0, |u| self.quantile_clamped(u))
    }
}

pub(crate) fn check_nk(n: usize, k: usize) -> Result<()> {
    if k == 0 || k >= n {
        return Err(Error::Parameter(format!("need 0 < k < n, got n={n}, k={k}")));
    }
    Ok(())
}

/// `Q_E` as a function of `F(θ)`: the chance that at most `k-1` of `n-1` rivals beat the agent.
pub fn efficient_from_cdf(n: usize, k: usize, f: f64) -> f64 {
    binomial_cdf(n - 1, 1.0 - f, k - 1)
}

/// Interim allocation of the efficient rule that gives the `k` items to the top `k` types.
pub fn efficient_allocation(spec: &DistributionSpec, n: usize, k: usize, theta: f64) -> Result<f64> {
    check_nk(n, k)?;
    Ok(efficient_from_cdf(n, k, spec.cdf(theta)?))
}

/// `d Q_E / dθ`.
pub fn efficient_slope(spec: &DistributionSpec, n: usize, k: usize, theta: f64) -> Result<f64> {
    check_nk(n, k)?;
    let f = spec.cdf(theta)?;
    let dens = spec.pdf(theta)?;
    Ok(dens * (n - 1) as f64 * crate::numerics::binomial_pmf(n - 2, 1.0 - f, k - 1))
}

/// `∫_θ^{hi} Q_E dF`, in closed form.
pub fn efficient_tail_integral(spec: &DistributionSpec, n: usize, k: usize, theta: f64) -> Result<f64> {
    check_nk(n, k)?;
    let f = spec.cdf(theta)?;
    Ok(efficient_tail_from_cdf(n, k, f))
}

pub(crate) fn efficient_tail_from_cdf(n: usize, k: usize, f: f64) -> f64 {
    (0..k).map(|j| binomial_cdf(n, f, n - j - 1)).sum::<f64>() / n as f64
}

/// `count` i.i.d. type profiles of `n` agents each, reproducible from `seed`.
pub fn sample_types(spec: &DistributionSpec, n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..n).map(|_| spec.quantile_clamped(rng.random::<f64>())).collect())
        .collect()
}

/// Kolmogorov-Smirnov distance between a sample and `spec`.
pub fn ks_statistic(spec: &DistributionSpec, sample: &[f64]) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let m = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = spec.cdf_clamped(x);
            (f - i as f64 / m).abs().max(((i + 1) as f64 / m - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Discretised type space with integration weights against `dF`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypeGrid {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl TypeGrid {
    /// `m + 1` evenly spaced points; each weight is the `F`-mass of the cell
    /// centred on its point, so the weights sum to one.
    pub fn uniform(spec: &DistributionSpec, m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::Parameter(format!("grid size {m} too small")));
        }
        let (lo, hi) = spec.support();
        let h = (hi - lo) / m as f64;
        let points: Vec<f64> = (0..=m).map(|j| if j == m { hi } else { lo + j as f64 * h }).collect();
        Ok(Self::from_points(spec, points))
    }

    /// Grid on arbitrary increasing points spanning the support.
    pub fn from_points(spec: &DistributionSpec, points: Vec<f64>) -> Self {
        let m = points.len() - 1;
        let edge = |j: usize| -> f64 {
            if j == 0 {
                points[0]
            } else if j > m {
                points[m]
            } else {
                0.5 * (points[j - 1] + points[j])
            }
        };
        let mut weights: Vec<f64> =
            (0..=m).map(|j| spec.cdf_clamped(edge(j + 1)) - spec.cdf_clamped(edge(j))).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        TypeGrid { points, weights }
    }

    /// Grid with caller-supplied weights.
    pub fn new(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::Shape { expected: points.len(), got: weights.len() });
        }
        if points.len() < 2 || points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Parameter("grid points must be strictly increasing".into()));
        }
        if weights.iter().any(|w| *w < 0.0) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
            return Err(Error::Parameter("grid weights must be non-negative and sum to one".into()));
        }
        Ok(TypeGrid { points, weights })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `Σ_j w_j v_j`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// `T_j = Σ_{l ≥ j} w_l v_l`, with a trailing zero at index `len()`.
    pub fn tail_sums(&self, values: &[f64]) -> Vec<f64> {
        let mut t = vec![0.0; self.len() + 1];
        for j in (0..self.len()).rev() {
            t[j] = t[j + 1] + self.weights[j] * values[j];
        }
        t
    }

    /// Linear interpolation of grid values at `theta`.
    pub fn interpolate(&self, values: &[f64], theta: f64) -> f64 {
        let p = &self.points;
        if theta <= p[0] {
            return values[0];
        }
        let last = p.len() - 1;
        if theta >= p[last] {
            return values[last];
        }
        let i = p.partition_point(|x| *x <= theta).clamp(1, last);
        let t = (theta - p[i - 1]) / (p[i] - p[i - 1]);
        values[i - 1] + t * (values[i] - values[i - 1])
    }
}

/// `Q_E` evaluated on every grid point.
pub fn efficient_curve(spec: &DistributionSpec, grid: &TypeGrid, n: usize, k: usize) -> Result<Vec<f64>> {
    check_nk(n, k)?;
    Ok(grid.points().iter().map(|&t| efficient_from_cdf(n, k, spec.cdf_clamped(t))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_examples() {
        let u = DistributionSpec::uniform(0.0, 1.0).unwrap();
        assert_eq!(u.cdf(0.3).unwrap(), 0.3);
        let p = DistributionSpec::power(2.0, 0.0, 1.0).unwrap();
        assert_eq!(p.cdf(0.5).unwrap(), 0.25);
        let pl = DistributionSpec::piecewise_linear(vec![(0.0, 0.0), (0.5, 0.8), (1.0, 1.0)]).unwrap();
        assert!((pl.quantile(0.8).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(u.cdf(1.2), Err(Error::Domain { .. })));
        assert!(u.quantile(-0.1).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let s = r#"{"family":"power","p":2.0,"support":[0.0,1.0]}"#;
        let spec: DistributionSpec = serde_json::from_str(s).unwrap();
        assert_eq!(spec, DistributionSpec::power(2.0, 0.0, 1.0).unwrap());
        let back = serde_json::to_string(&spec).unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<DistributionSpec>(r#"{"family":"power","p":-1.0,"support":[0.0,1.0]}"#).is_err());
        let pl = r#"{"family":"piecewise_linear","knots":[[0.0,0.0],[0.5,0.8],[1.0,1.0]],"support":[0.0,1.0]}"#;
        assert!(serde_json::from_str::<DistributionSpec>(pl).is_ok());
    }

    #[test]
    fn efficient_allocation_examples() {
        let u = DistributionSpec::uniform(0.0, 1.0).unwrap();
        let p = DistributionSpec::power(2.0, 0.0, 1.0).unwrap();
        assert!((efficient_allocation(&u, 2, 1, 0.7).unwrap() - 0.7).abs() < 1e-15);
        assert!((efficient_allocation(&p, 2, 1, 0.5).unwrap() - 0.25).abs() < 1e-15);
        assert!((efficient_allocation(&u, 3, 2, 0.5).unwrap() - 0.75).abs() < 1e-15);
        assert!(efficient_allocation(&u, 2, 2, 0.5).is_err());
        assert_eq!(efficient_allocation(&u, 5, 2, 1.0).unwrap(), 1.0);
        assert_eq!(efficient_allocation(&u, 5, 2, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn tail_integral_examples() {
        let u = DistributionSpec::uniform(0.0, 1.0).unwrap();
        let p = DistributionSpec::power(2.0, 0.0, 1.0).unwrap();
        assert!((efficient_tail_integral(&u, 2, 1, 0.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(efficient_tail_integral(&p, 2, 1, 1.0).unwrap().abs() < 1e-15);
        let third: f64 = 1.0 / 3.0;
        let exact = 0.5 - third.powi(4) / 2.0;
        assert!((efficient_tail_integral(&p, 2, 1, third).unwrap() - exact).abs() < 1e-12);
        let numeric = crate::numerics::Quadrature::default().integrate(third, 1.0, |z| z * z * 2.0 * z);
        assert!((numeric - 0.493_827_160_493_827).abs() < 1e-12);
        assert!((exact - numeric).abs() < 1e-12);
        for &(n, k) in &[(5usize, 2usize), (100, 50), (200, 1)] {
            let v = efficient_tail_integral(&u, n, k, 0.0).unwrap();
            assert!((v - k as f64 / n as f64).abs() < 1e-6, "{n} {k} {v}");
        }
    }

    #[test]
    fn grid_weights_sum_to_one() {
        let p = DistributionSpec::power(2.0, 0.0, 1.0).unwrap();
        let g = TypeGrid::uniform(&p, 2000).unwrap();
        assert!((g.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(g.points()[0], 0.0);
        assert_eq!(*g.points().last().unwrap(), 1.0);
        let et: f64 = g.integrate(g.points());
        assert!((et - 2.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn density_bounds_and_threshold() {
        assert_eq!(DistributionSpec::uniform(0.0, 1.0).unwrap().density_bounds().convexity_threshold(), Some(2.0));
        assert_eq!(DistributionSpec::power(0.5, 0.0, 1.0).unwrap().density_bounds().convexity_threshold(), None);
        let pl = DistributionSpec::piecewise_linear(vec![(0.0, 0.0), (0.5, 0.8), (1.0, 1.0)]).unwrap();
        assert_eq!(pl.density_bounds().convexity_threshold(), None);
        let up = DistributionSpec::piecewise_linear(vec![(0.0, 0.0), (0.5, 0.2), (1.0, 1.0)]).unwrap();
        assert_eq!(up.density_bounds().convexity_threshold(), Some(2.0));
    }
}
