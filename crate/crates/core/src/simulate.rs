//! Monte Carlo checks of ex-post rules: interim estimates, deviation scans and
//! the VCG-format mechanism.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{check_nk, DistributionSpec};
use crate::error::{Error, Result};
use crate::mechanism::{
    contest_allocate, equilibrium_signal_map, rank_share, sig12, CoarseRanking, ExpostRule, MechanismPair,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
    /// Number of deviant signals, evenly spaced on `[lo, hi + 1/η]`.
    pub deviation_points: usize,
    /// Number of quantile-spaced probe types.
    pub probes: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig { samples: 100_000, seed: 7, deviation_points: 201, probes: 33 }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples < 1000 {
            return Err(Error::Config { field: "samples".into(), message: format!("need at least 1000, got {}", self.samples) });
        }
        if self.deviation_points < 2 {
            return Err(Error::Config { field: "deviation_points".into(), message: "need at least 2".into() });
        }
        if self.probes < 1 {
            return Err(Error::Config { field: "probes".into(), message: "need at least 1".into() });
        }
        Ok(())
    }

    /// Generator for probe row `row`: one ChaCha stream per row off the master seed.
    fn rng(&self, row: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(row as u64);
        rng
    }
}

/// An ex-post allocation rule seen from agent 0.
pub trait Rule: Sync {
    fn agents(&self) -> usize;
    /// Expected share of agent 0 (over the rule's own randomisation) given every signal.
    fn share(&self, own: f64, others: &[f64]) -> f64;
}

/// Coarse-ranking contest with `n` agents and `k` items.
#[derive(Clone, Debug, PartialEq)]
pub struct ContestRule {
    pub ranking: CoarseRanking,
    pub n: usize,
    pub k: usize,
}

impl ContestRule {
    pub fn new(ranking: CoarseRanking, n: usize, k: usize) -> Result<Self> {
        check_nk(n, k)?;
        Ok(ContestRule { ranking, n, k })
    }

    /// Allocation to every agent of one profile.
    pub fn allocate(&self, signals: &[f64]) -> Vec<f64> {
        contest_allocate(&self.ranking, signals, self.k)
    }
}

impl Rule for ContestRule {
    fn agents(&self) -> usize {
        self.n
    }

    fn share(&self, own: f64, others: &[f64]) -> f64 {
        let c = self.ranking.ceiling(own);
        let mut above = 0;
        let mut level = 1;
        for &o in others {
            let co = self.ranking.ceiling(o);
            if co > c {
                above += 1;
            } else if co == c {
                level += 1;
            }
        }
        rank_share(above, level, self.k)
    }
}

impl Rule for ExpostRule {
    fn agents(&self) -> usize {
        2
    }

    fn share(&self, own: f64, others: &[f64]) -> f64 {
        self.win_probability(own, others[0])
    }
}

/// Rule that hands every agent the same share regardless of signals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantRule {
    pub n: usize,
    pub value: f64,
}

impl Rule for ConstantRule {
    fn agents(&self) -> usize {
        self.n
    }

    fn share(&self, _own: f64, _others: &[f64]) -> f64 {
        self.value
    }
}

/// Interim estimate at one probe type.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InterimEstimate {
    pub theta: f64,
    pub q_hat: f64,
    pub q_se: f64,
    pub u_hat: f64,
    pub u_se: f64,
}

/// `count` probe types at the quantiles `(i + 1/2) / count`.
pub fn quantile_probes(spec: &DistributionSpec, count: usize) -> Vec<f64> {
    (0..count).map(|i| spec.quantile_clamped((i as f64 + 0.5) / count as f64)).collect()
}

fn mean_se(sum: f64, sum_sq: f64, count: usize) -> (f64, f64) {
    let n = count as f64;
    let mean = sum / n;
    let var = ((sum_sq / n - mean * mean) * n / (n - 1.0)).max(0.0);
    (mean, (var / n).sqrt())
}

/// Opponent signals for one probe row, `samples × (n-1)` row-major.
fn opponent_signals<S: Fn(f64) -> f64>(spec: &DistributionSpec, strategy: &S, rivals: usize, cfg: &McConfig, row: usize) -> Vec<f64> {
    let mut rng = cfg.rng(row);
    (0..cfg.samples * rivals).map(|_| strategy(spec.quantile_clamped(rng.random::<f64>()))).collect()
}

/// Estimate `Q(θ)` and `U(θ) = Q(θ) - η(ŝ(θ) - θ)⁺` at each probe when everyone plays `strategy`.
pub fn mc_interim_estimate<R: Rule, S: Fn(f64) -> f64 + Sync>(
    rule: &R,
    strategy: &S,
    spec: &DistributionSpec,
    eta: f64,
    probes: &[f64],
    cfg: &McConfig,
) -> Result<Vec<InterimEstimate>> {
    cfg.validate()?;
    let rivals = rule.agents() - 1;
    Ok(probes
        .par_iter()
        .enumerate()
        .map(|(row, &theta)| {
            let others = opponent_signals(spec, strategy, rivals, cfg, row);
            let own = strategy(theta);
            let (mut s, mut s2) = (0.0, 0.0);
            for chunk in others.chunks_exact(rivals) {
                let x = rule.share(own, chunk);
                s += x;
                s2 += x * x;
            }
            let (q_hat, q_se) = mean_se(s, s2, cfg.samples);
            let cost = eta * (own - theta).max(0.0);
            InterimEstimate { theta, q_hat, q_se, u_hat: q_hat - cost, u_se: q_se }
        })
        .collect())
}

/// Best deviation found for one probe type.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DeviationRow {
    pub theta: f64,
    pub equilibrium_payoff: f64,
    pub best_signal: f64,
    /// Deviation payoff minus equilibrium payoff.
    pub gain: f64,
    /// Standard error of `gain` under common random numbers.
    pub se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeviationReport {
    pub rows: Vec<DeviationRow>,
    pub max_gain: f64,
    pub max_gain_se: f64,
    /// `max_gain ≤ 3·SE + 1e-3`.
    pub certified: bool,
}

/// Evenly spaced deviant signals on `[lo, hi + 1/η]`.
pub fn deviation_grid(spec: &DistributionSpec, eta: f64, count: usize) -> Vec<f64> {
    let (lo, hi) = spec.support();
    let top = hi + 1.0 / eta;
    (0..count).map(|i| lo + (top - lo) * i as f64 / (count - 1) as f64).collect()
}

/// Largest gain from signalling `s'` instead of `ŝ(θ)` over probe types and deviation signals.
/// All deviations of one probe row share the same opponent draws.
pub fn deviation_scan<R: Rule, S: Fn(f64) -> f64 + Sync>(
    rule: &R,
    strategy: &S,
    spec: &DistributionSpec,
    eta: f64,
    probes: &[f64],
    cfg: &McConfig,
) -> Result<DeviationReport> {
    cfg.validate()?;
    let rivals = rule.agents() - 1;
    let deviations = deviation_grid(spec, eta, cfg.deviation_points);
    let rows: Vec<DeviationRow> = probes
        .par_iter()
        .enumerate()
        .map(|(row, &theta)| {
            let others = opponent_signals(spec, strategy, rivals, cfg, row);
            let own = strategy(theta);
            let base: Vec<f64> = others.chunks_exact(rivals).map(|c| rule.share(own, c)).collect();
            let base_payoff = base.iter().sum::<f64>() / cfg.samples as f64 - eta * (own - theta).max(0.0);
            let mut best = DeviationRow { theta, equilibrium_payoff: base_payoff, best_signal: own, gain: 0.0, se: 0.0 };
            for &s in &deviations {
                let cost_gap = eta * ((own - theta).max(0.0) - (s - theta).max(0.0));
                let (mut d, mut d2) = (0.0, 0.0);
                for (c, b) in others.chunks_exact(rivals).zip(&base) {
                    let x = rule.share(s, c) - b;
                    d += x;
                    d2 += x * x;
                }
                let (mean, se) = mean_se(d, d2, cfg.samples);
                let gain = mean + cost_gap;
                if gain > best.gain {
                    best = DeviationRow { theta, equilibrium_payoff: base_payoff, best_signal: s, gain, se };
                }
            }
            best
        })
        .collect();
    let worst = rows.iter().copied().max_by(|a, b| a.gain.total_cmp(&b.gain));
    let (max_gain, max_gain_se) = worst.map_or((0.0, 0.0), |r| (r.gain, r.se));
    let certified = rows.iter().all(|r| r.gain <= 3.0 * r.se + 1e-3);
    Ok(DeviationReport { rows, max_gain, max_gain_se, certified })
}

/// Interim outcome of the VCG-format mechanism under truthful reports.
///
/// The `k` highest reports win (ties split evenly); a winner is asked for the signal
/// `1/η + ` highest losing report and may instead take nothing.
pub fn simulate_vcg(spec: &DistributionSpec, n: usize, k: usize, eta: f64, probes: &[f64], cfg: &McConfig) -> Result<Vec<InterimEstimate>> {
    check_nk(n, k)?;
    cfg.validate()?;
    let rivals = n - 1;
    Ok(probes
        .par_iter()
        .enumerate()
        .map(|(row, &theta)| {
            let others = opponent_signals(spec, &|t| t, rivals, cfg, row);
            let mut buf = vec![0.0; rivals];
            let (mut qs, mut qs2, mut us, mut us2) = (0.0, 0.0, 0.0, 0.0);
            for chunk in others.chunks_exact(rivals) {
                buf.copy_from_slice(chunk);
                buf.sort_by(|a, b| b.total_cmp(a));
                let above = buf.iter().take_while(|&&o| o > theta).count();
                let level = 1 + buf[above..].iter().take_while(|&&o| o == theta).count();
                let x = rank_share(above, level, k);
                // Highest losing report among the rivals once agent 0 takes a slot.
                let threshold = buf[k - 1];
                let target = 1.0 / eta + threshold;
                let u = x * (1.0 - eta * (target - theta).max(0.0)).max(0.0);
                qs += x;
                qs2 += x * x;
                us += u;
                us2 += u * u;
            }
            let (q_hat, q_se) = mean_se(qs, qs2, cfg.samples);
            let (u_hat, u_se) = mean_se(us, us2, cfg.samples);
            InterimEstimate { theta, q_hat, q_se, u_hat, u_se }
        })
        .collect())
}

/// CSV with columns `theta,Q_hat,Q_se,U_hat,U_se,max_deviation_gain`; the last column is empty
/// when no scan was run.
pub fn write_simulation_csv<W: Write>(out: W, estimates: &[InterimEstimate], gains: Option<&[f64]>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["theta", "Q_hat", "Q_se", "U_hat", "U_se", "max_deviation_gain"])?;
    for (i, e) in estimates.iter().enumerate() {
        let gain = gains.and_then(|g| g.get(i)).map_or(String::new(), |g| sig12(*g));
        w.write_record([sig12(e.theta), sig12(e.q_hat), sig12(e.q_se), sig12(e.u_hat), sig12(e.u_se), gain])?;
    }
    w.flush()?;
    Ok(())
}

/// Piecewise-linear signal strategy on a type grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalCurve {
    points: Vec<f64>,
    signals: Vec<f64>,
}

impl SignalCurve {
    pub fn new(points: Vec<f64>, signals: Vec<f64>) -> Result<Self> {
        if points.len() != signals.len() {
            return Err(Error::Shape { expected: points.len(), got: signals.len() });
        }
        if points.len() < 2 || points.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Parameter("signal curve needs at least two increasing points".into()));
        }
        Ok(SignalCurve { points, signals })
    }

    /// Equilibrium signals `θ + (Q - U)/η` of an incentive-compatible pair.
    pub fn from_pair(pair: &MechanismPair) -> Result<Self> {
        SignalCurve::new(pair.points().to_vec(), equilibrium_signal_map(pair)?)
    }

    pub fn eval(&self, theta: f64) -> f64 {
        let p = &self.points;
        let i = p.partition_point(|x| *x <= theta).clamp(1, p.len() - 1);
        let w = ((theta - p[i - 1]) / (p[i] - p[i - 1])).clamp(0.0, 1.0);
        self.signals[i - 1] + w * (self.signals[i] - self.signals[i - 1])
    }
}
