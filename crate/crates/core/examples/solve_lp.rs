//! Solve the discretised problem as a linear program and print the region structure.

use contest_opt::solver::*;
use contest_opt::distributions::DistributionSpec;

fn main() -> contest_opt::Result<()> {
    let spec = DistributionSpec::power(2.0, 0.0, 1.0)?;
    for (n, k, alpha) in [(2, 1, 0.5), (2, 1, 0.9), (10, 3, 0.5)] {
        let cfg = SolveConfig::new(spec.clone(), n, k, 1.0, alpha).with_method(Method::Lp).with_grid(1000);
        let res = solve(&cfg)?;
        println!("n={n} k={k} alpha={alpha}: objective {:.6}, {} IPM iterations", res.objective, res.diagnostics.iterations);
        for i in &res.regions.intervals {
            println!("  [{:.4}, {:.4}] {:?}", i.lo, i.hi, i.tag);
        }
    }
    Ok(())
}
