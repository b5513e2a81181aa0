//! Efficiency against agent utility as the welfare weight moves.

use contest_opt::solver::*;
use contest_opt::distributions::DistributionSpec;

fn main() -> contest_opt::Result<()> {
    let spec = DistributionSpec::power(2.0, 0.0, 1.0)?;
    let alphas: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let pts = pareto_sweep(&SolveConfig::new(spec, 2, 1, 1.0, 0.5), &alphas)?;
    for p in &pts {
        println!("alpha {:.1}: E[theta Q] {:.6}  E[U] {:.6}", p.alpha, p.efficiency, p.utility);
    }
    println!("slopes {:.4?}", frontier_slopes(&pts));
    Ok(())
}
