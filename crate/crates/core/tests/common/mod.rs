//! Randomised batteries shared by the nonlinear-cost tests and the acceptance run.

use contest_opt::nonlinear::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_cost(rng: &mut ChaCha8Rng) -> CostSpec {
    let c = rng.random_range(0.2..5.0);
    match rng.random_range(0..3) {
        0 => CostSpec::Linear { eta: c },
        1 => CostSpec::Quadratic { c },
        _ => CostSpec::Power { c, p: rng.random_range(1.0..=2.0) },
    }
}

/// Random lotteries checked against `C(e_G + ε) - C(e_G) ≥ E[C(e + ε)] - E[C(e)]` and `e_G ≥ E[e]`.
/// Returns the number of failing cases.
pub fn certainty_equivalent_failures(seed: u64, cases: usize) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    for _ in 0..cases {
        let cost = random_cost(&mut rng);
        let m = rng.random_range(1..6);
        let efforts: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..3.0)).collect();
        let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.01..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let probs: Vec<f64> = raw.iter().map(|p| p / total).collect();
        let eps = rng.random_range(0.0..2.0);
        let eg = certainty_equivalent_effort(&cost, &efforts, &probs).unwrap();
        let mean: f64 = efforts.iter().zip(&probs).map(|(e, p)| e * p).sum();
        let margin = certainty_equivalent_margin(&cost, &efforts, &probs, eps).unwrap();
        let scale = 1.0 + cost.cost(eps + 3.0);
        if margin < -1e-12 * scale || eg < mean - 1e-12 {
            failures += 1;
        }
    }
    failures
}

/// Utility of a type taking menu item `(q, lottery)`: allocation minus expected cost of the recommended lottery.
pub fn menu_payoff(cost: &CostSpec, q: f64, lottery: &[(f64, f64)], theta: f64) -> f64 {
    q - lottery.iter().map(|(s, p)| p * cost.signal_cost(*s, theta)).sum::<f64>()
}

/// A random mechanism with stochastic signal recommendations and allocation `q`;
/// each lottery is shifted just far enough to deter the type below, plus slack.
fn random_stochastic_mechanism(rng: &mut ChaCha8Rng, cost: &CostSpec, types: &[f64], q: &[f64]) -> Vec<Vec<(f64, f64)>> {
    let mut menus: Vec<Vec<(f64, f64)>> = vec![vec![(types[0] + rng.random_range(0.0..0.05), 1.0)]];
    let mut utils = vec![menu_payoff(cost, q[0], &menus[0], types[0])];
    for k in 1..types.len() {
        let atoms = rng.random_range(1..4);
        let offsets: Vec<f64> = (0..atoms).map(|_| rng.random_range(0.0..0.5)).collect();
        let raw: Vec<f64> = (0..atoms).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let lottery = |x: f64| -> Vec<(f64, f64)> { offsets.iter().zip(&raw).map(|(d, p)| (types[k - 1] + x + d, p / total)).collect() };
        let deterred = |x: f64| menu_payoff(cost, q[k], &lottery(x), types[k - 1]) <= utils[k - 1];
        let (mut lo, mut hi) = (0.0, 1.0);
        while !deterred(hi) {
            hi *= 2.0;
        }
        if deterred(lo) {
            hi = lo;
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if deterred(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let menu = lottery(hi + rng.random_range(0.0..0.05));
        utils.push(menu_payoff(cost, q[k], &menu, types[k]));
        menus.push(menu);
    }
    menus
}

/// Outcome of comparing the deterministic construction with random stochastic mechanisms.
#[derive(Debug, Default)]
pub struct DominanceTally {
    pub checked: usize,
    /// Constructed contest failing the global incentive check.
    pub not_ic: usize,
    /// Some type strictly worse off than under the stochastic mechanism.
    pub dominated: usize,
}

/// Draw incentive-compatible stochastic mechanisms until `instances` have been compared.
pub fn stochastic_dominance(seed: u64, instances: usize) -> DominanceTally {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = DominanceTally::default();
    let mut attempts = 0;
    while tally.checked < instances {
        attempts += 1;
        assert!(attempts < 25 * instances, "too few incentive-compatible instances");
        let cost = random_cost(&mut rng);
        let m = rng.random_range(2..7);
        let mut types: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..1.0)).collect();
        types.sort_by(f64::total_cmp);
        if types.windows(2).any(|w| w[1] - w[0] < 1e-3) {
            continue;
        }
        let mut q: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..1.0)).collect();
        q.sort_by(f64::total_cmp);
        let menus = random_stochastic_mechanism(&mut rng, &cost, &types, &q);
        let utils: Vec<f64> = (0..m).map(|j| menu_payoff(&cost, q[j], &menus[j], types[j])).collect();
        let ic = (0..m).all(|j| (0..m).all(|l| menu_payoff(&cost, q[l], &menus[l], types[j]) <= utils[j] + 1e-12));
        if !ic {
            continue;
        }
        let model = DiscreteTypeModel::new(types, vec![1.0 / m as f64; m], q).unwrap();
        let out = construct_discrete_contest(&model, &cost).unwrap();
        if !global_ic_check_discrete(&model, &cost, &out.signals, &out.utilities).unwrap().pass {
            tally.not_ic += 1;
        }
        if out.utilities.iter().zip(&utils).any(|(dagger, u)| *dagger < u - 1e-9) {
            tally.dominated += 1;
        }
        tally.checked += 1;
    }
    tally
}
