//! Small numerical helpers: Gauss-Legendre rules, binomial tails, 1-D search.

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let m = order.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=order {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = order as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss-Legendre quadrature rule over `[a, b]`.
#[derive(Clone, Debug)]
pub struct Quadrature {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    panels: usize,
}

impl Quadrature {
    pub fn new(order: usize, panels: usize) -> Self {
        let (nodes, weights) = gauss_legendre(order);
        Quadrature { nodes, weights, panels: panels.max(1) }
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        if b <= a {
            return 0.0;
        }
        let h = (b - a) / self.panels as f64;
        let mut total = 0.0;
        for p in 0..self.panels {
            let mid = a + (p as f64 + 0.5) * h;
            let half = 0.5 * h;
            let mut s = 0.0;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                s += w * f(mid + half * x);
            }
            total += s * half;
        }
        total
    }
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature::new(16, 16)
    }
}

fn ln_choose(n: usize, j: usize) -> f64 {
    let m = j.min(n - j);
    (1..=m).map(|i| ((n - m + i) as f64 / i as f64).ln()).sum()
}

/// `P(Bin(trials, p) <= upto)`.
pub fn binomial_cdf(trials: usize, p: f64, upto: usize) -> f64 {
    if upto >= trials {
        return 1.0;
    }
    if p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return 0.0;
    }
    let q = 1.0 - p;
    if trials <= 60 {
        let mut term = q.powi(trials as i32);
        let mut sum = term;
        let ratio = p / q;
        for i in 1..=upto {
            term *= (trials - i + 1) as f64 / i as f64 * ratio;
            sum += term;
        }
        return sum.min(1.0);
    }
    let (lp, lq) = (p.ln(), q.ln());
    let mut lterm = trials as f64 * lq;
    let mut sum = lterm.exp();
    for i in 1..=upto {
        lterm += ((trials - i + 1) as f64 / i as f64).ln() + lp - lq;
        sum += lterm.exp();
    }
    sum.min(1.0)
}

/// `P(Bin(trials, p) = j)`.
pub fn binomial_pmf(trials: usize, p: f64, j: usize) -> f64 {
    if j > trials {
        return 0.0;
    }
    if p <= 0.0 {
        return if j == 0 { 1.0 } else { 0.0 };
    }
    if p >= 1.0 {
        return if j == trials { 1.0 } else { 0.0 };
    }
    let ln = ln_choose(trials, j)
        + j as f64 * p.ln()
        + (trials - j) as f64 * (1.0 - p).ln();
    ln.exp()
}

/// Bisection for a sign change of `f` on `[lo, hi]`; `f(lo)` and `f(hi)` must differ in sign.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, xtol: f64, ftol: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm.abs() <= ftol && hi - lo <= xtol {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if hi - lo <= xtol * 1e-3 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Golden-section maximisation of a unimodal `f` on `[lo, hi]`.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 > f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    let x = 0.5 * (lo + hi);
    let fx = f(x);
    [(x1, f1), (x2, f2), (x, fx)]
        .into_iter()
        .fold((x, fx), |a, b| if b.1 > a.1 { b } else { a })
}
