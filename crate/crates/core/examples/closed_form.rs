//! The closed-form solver for convex Q_E against the LP on the same grid.

use contest_opt::solver::*;
use contest_opt::distributions::DistributionSpec;

fn main() -> contest_opt::Result<()> {
    let spec = DistributionSpec::power(2.0, 0.0, 1.0)?;
    for alpha in [0.3, 0.5, 0.9] {
        let cfg = SolveConfig::new(spec.clone(), 2, 1, 1.0, alpha);
        let cf = solve_convex_closed_form(&cfg)?;
        let lp = solve_lp(&cfg)?;
        println!(
            "alpha {alpha}: closed form {:.8} cutoffs {:.4?} | LP {:.8} cutoffs {:.4?}",
            cf.objective, cf.diagnostics.cutoffs, lp.objective, lp.diagnostics.cutoffs
        );
    }
    Ok(())
}
