//! Efficient interim allocation and its tail integrals for a few type distributions.

use contest_opt::distributions::*;

fn main() -> contest_opt::Result<()> {
    let specs = [
        ("uniform", DistributionSpec::uniform(0.0, 1.0)?),
        ("power p=2", DistributionSpec::power(2.0, 0.0, 1.0)?),
        ("piecewise cdf", DistributionSpec::piecewise_linear(vec![(0.0, 0.0), (0.5, 0.2), (1.0, 1.0)])?),
    ];
    for (name, spec) in &specs {
        println!("{name}: mean {:.4}, convex from n >= {:?}", spec.mean(), spec.density_bounds().convexity_threshold());
        for theta in [0.25, 0.5, 0.75] {
            println!(
                "  theta {theta}: Q_E(n=5,k=2) {:.4}  slope {:.4}  tail {:.4}",
                efficient_allocation(spec, 5, 2, theta)?,
                efficient_slope(spec, 5, 2, theta)?,
                efficient_tail_integral(spec, 5, 2, theta)?,
            );
        }
    }
    let draws = sample_types(&specs[1].1, 1, 5000, 3);
    let flat: Vec<f64> = draws.into_iter().flatten().collect();
    println!("KS distance of 5000 power draws: {:.4}", ks_statistic(&specs[1].1, &flat));
    Ok(())
}
