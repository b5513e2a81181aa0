//! Build the two-agent ex-post contest for an optimum, then check it by simulation.

use contest_opt::mechanism::expost_rule_pair;
use contest_opt::simulate::*;
use contest_opt::solver::*;
use contest_opt::distributions::DistributionSpec;

fn main() -> contest_opt::Result<()> {
    let spec = DistributionSpec::power(2.0, 0.0, 1.0)?;
    let res = solve(&SolveConfig::new(spec.clone(), 2, 1, 1.0, 0.5))?;
    let rule = expost_rule_pair(&res.pair, &spec)?;
    let strategy = SignalCurve::from_pair(&res.pair)?;
    let cfg = McConfig { samples: 20_000, seed: 1, deviation_points: 51, probes: 9 };
    let probes = quantile_probes(&spec, cfg.probes);

    for e in mc_interim_estimate(&rule, &|t| strategy.eval(t), &spec, 1.0, &probes, &cfg)? {
        let q = res.pair.grid.interpolate(&res.pair.q, e.theta);
        println!("theta {:.3}: Q {:.4}  simulated {:.4} +/- {:.4}", e.theta, q, e.q_hat, e.q_se);
    }
    let scan = deviation_scan(&rule, &|t| strategy.eval(t), &spec, 1.0, &probes, &cfg)?;
    println!("largest deviation gain {:.2e} (se {:.2e}), certified {}", scan.max_gain, scan.max_gain_se, scan.certified);

    let vcg = simulate_vcg(&spec, 2, 1, 1.0, &probes, &cfg)?;
    let mut out = std::io::stdout();
    write_simulation_csv(&mut out, &vcg, None)?;
    Ok(())
}
