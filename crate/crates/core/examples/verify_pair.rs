//! Incentive and feasibility checks on a solved pair and on two tampered copies.

use contest_opt::mechanism::*;
use contest_opt::solver::*;
use contest_opt::distributions::DistributionSpec;

fn main() -> contest_opt::Result<()> {
    let spec = DistributionSpec::power(2.0, 0.0, 1.0)?;
    let cfg = SolveConfig::new(spec.clone(), 2, 1, 1.0, 0.5);
    let res = solve(&cfg)?;
    let tol = cfg.tolerance();
    let report = |label: &str, pair: &MechanismPair| -> contest_opt::Result<()> {
        let ic = check_ic(pair, &tol);
        let feas = check_interim_feasibility(&pair.q, &pair.grid, &spec, 2, 1, tol.level)?;
        println!("{label}: IC {} feasible {} (worst excess {:.2e})", ic.pass, feas.pass, feas.worst_excess);
        Ok(())
    };
    report("optimum", &res.pair)?;

    let mut greedy = res.pair.clone();
    let m = greedy.q.len();
    for j in m - 20..m {
        greedy.q[j] = 1.0;
    }
    report("top types always win", &greedy)?;

    let mut steep = res.pair.clone();
    let j = m / 2;
    steep.u[j + 1] = steep.u[j] + 2.0 * (steep.points()[j + 1] - steep.points()[j]);
    report("utility slope 2 eta", &steep)?;
    Ok(())
}
