//! Winner-takes-all, the VCG format and the optimal contest side by side.

use contest_opt::baselines::*;
use contest_opt::solver::*;
use contest_opt::distributions::DistributionSpec;

fn main() -> contest_opt::Result<()> {
    let spec = DistributionSpec::uniform(0.0, 1.0)?;
    for n in [2, 10, 100] {
        let res = solve(&SolveConfig::new(spec.clone(), n, 1, 1.0, 0.5))?;
        let grid = &res.pair.grid;
        let rows = [
            ComparisonRow::from_pair("optimal", &res.pair),
            ComparisonRow::from_pair(BaselineKind::Wta.to_string(), &wta_pair(&spec, grid, n, 1, 1.0, 0.5)?),
            ComparisonRow::from_pair(BaselineKind::VcgFormat.to_string(), &vcg_pair(&spec, grid, n, 1, 1.0, 0.5)?),
        ];
        println!("n = {n}");
        for r in &rows {
            println!("  {:<11} efficiency {:.4} utility {:.4} objective {:.4}", r.mechanism, r.efficiency, r.total_utility, r.objective);
        }
        println!("  ratio {:.4}", rows[0].objective / rows[1].objective);
    }
    for eps in [0.01, 0.1, 0.3] {
        let b = nonconvergence_bound(1.0, 0.5, eps)?;
        println!("delta(eps = {eps}) = {:.4} (bites: {})", b.delta, b.bites);
    }
    Ok(())
}
