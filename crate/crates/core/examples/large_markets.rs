//! Many agents: the no-tension share grows with n, and a replicated economy pools around the cutoff.

use contest_opt::baselines::wta_pair;
use contest_opt::solver::*;
use contest_opt::distributions::DistributionSpec;

fn main() -> contest_opt::Result<()> {
    let power = DistributionSpec::power(2.0, 0.0, 1.0)?;
    for n in [5, 20, 100] {
        let res = solve(&SolveConfig::new(power.clone(), n, 1, 1.0, 0.5))?;
        let wta = wta_pair(&power, &res.pair.grid, n, 1, 1.0, 0.5)?;
        println!(
            "n = {n:>3}: no-tension measure {:.4}, V_opt / V_WTA {:.4}",
            res.no_tension_measure(),
            res.objective / objective_value(&wta)
        );
    }

    let uniform = DistributionSpec::uniform(0.0, 1.0)?;
    let base = SolveConfig::new(uniform.clone(), 2, 1, 2.5, 0.5);
    for z in [1, 10, 50] {
        let cfg = replicate_economy(&base, z)?;
        let res = solve(&cfg)?;
        println!("z = {z:>2}: cutoff {:.3}, regions {:?}", cutoff_type(&uniform, cfg.n, cfg.k), res.regions.tags());
    }
    Ok(())
}
