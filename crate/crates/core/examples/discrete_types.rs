//! Finitely many types with a convex effort cost: the type-by-type construction.

use contest_opt::nonlinear::*;

fn main() -> contest_opt::Result<()> {
    let model = DiscreteTypeModel::new(vec![0.0, 1.0], vec![0.5, 0.5], vec![0.2, 0.8])?;
    let cost = CostSpec::Quadratic { c: 1.0 };
    let out = construct_discrete_contest(&model, &cost)?;
    println!("signals {:?}\nutilities {:?}", out.signals, out.utilities);
    let rep = global_ic_check_discrete(&model, &cost, &out.signals, &out.utilities)?;
    println!("globally IC: {} (worst gain {:.2e})", rep.pass, rep.worst_gain);

    // A recommendation lottery costs as much as its certainty-equivalent effort.
    let efforts = [0.0, 2.0];
    let probs = [0.5, 0.5];
    println!("certainty equivalent of {efforts:?}: {:.6}", certainty_equivalent_effort(&cost, &efforts, &probs)?);
    println!("margin at eps 0.5: {:.6}", certainty_equivalent_margin(&cost, &efforts, &probs, 0.5)?);
    Ok(())
}
