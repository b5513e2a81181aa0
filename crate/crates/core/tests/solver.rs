use contest_opt::baselines::wta_pair;
use contest_opt::distributions::*;
use contest_opt::mechanism::*;
use contest_opt::solver::*;
use contest_opt::Error;

fn uniform() -> DistributionSpec {
    DistributionSpec::uniform(0.0, 1.0).unwrap()
}

fn power(p: f64) -> DistributionSpec {
    DistributionSpec::power(p, 0.0, 1.0).unwrap()
}

#[test]
fn objective_of_identity_allocation() {
    let grid = TypeGrid::uniform(&uniform(), 4000).unwrap();
    let q = grid.points().to_vec();
    for (alpha, want) in [(0.5, 5.0 / 12.0), (0.0, 0.5), (1.0, 1.0 / 3.0)] {
        let pair = MechanismPair::new(grid.clone(), q.clone(), q.clone(), 1.0, 2, 1, alpha).unwrap();
        assert!((objective_value(&pair) - want).abs() < 1e-6, "alpha {alpha}");
    }
}

#[test]
fn uniform_two_agents_lp_is_efficient() {
    let cfg = SolveConfig::new(uniform(), 2, 1, 1.0, 0.5).with_method(Method::Lp);
    let res = solve(&cfg).unwrap();
    for (&t, &q) in res.pair.points().iter().zip(&res.pair.q) {
        assert!((q - t).abs() < 1e-3, "{t}: {q}");
    }
    assert!((res.objective - 5.0 / 12.0).abs() < 1e-4);
    assert!(res.diagnostics.ic_pass);
}

fn battery() -> Vec<SolveConfig> {
    let mut out = Vec::new();
    for (spec, n, k) in [(uniform(), 2, 1), (power(2.0), 2, 1), (power(2.0), 5, 2), (power(0.6), 3, 1), (uniform(), 20, 1)] {
        for alpha in [0.1, 0.5, 0.9] {
            for eta in [0.5, 1.0, 3.0] {
                out.push(SolveConfig::new(spec.clone(), n, k, eta, alpha).with_grid(400));
            }
        }
    }
    out
}

#[test]
fn winner_take_all_never_beats_the_optimum() {
    for cfg in battery() {
        let res = solve(&cfg).unwrap();
        let grid = cfg.type_grid().unwrap();
        let wta = wta_pair(&cfg.spec, &grid, cfg.n, cfg.k, cfg.eta, cfg.alpha).unwrap();
        let slack = 1e-6 * res.objective.abs().max(1.0);
        assert!(objective_value(&wta) <= res.objective + slack, "{cfg:?}: {} > {}", objective_value(&wta), res.objective);
    }
}

#[test]
fn solutions_pass_checks_at_ten_times_tolerance() {
    for cfg in battery() {
        let res = solve(&cfg).unwrap();
        let ic = res.ic_report(10.0);
        assert!(ic.pass, "{cfg:?}: {ic:?}");
        let feas = res.feasibility_report(10.0).unwrap();
        assert!(feas.pass, "{cfg:?}: {feas:?}");
    }
}

#[test]
fn tighter_feasibility_never_helps() {
    for (spec, n, alpha) in [(power(2.0), 2, 0.5), (uniform(), 4, 0.3), (power(0.6), 3, 0.8)] {
        let cfg = SolveConfig::new(spec, n, 1, 1.0, alpha).with_grid(400);
        let mut prev = f64::INFINITY;
        for scale in [1.0, 0.9, 0.7, 0.4] {
            let obj = solve_lp_scaled(&cfg, scale).unwrap().objective;
            assert!(obj <= prev + 1e-8, "scale {scale}: {obj} > {prev}");
            prev = obj;
        }
    }
}

#[test]
fn utility_only_objective_allocates_everything() {
    for (spec, n, k) in [(power(2.0), 3, 1), (uniform(), 5, 2), (power(0.6), 2, 1)] {
        let cfg = SolveConfig::new(spec, n, k, 1.0, 0.0).with_method(Method::Lp).with_grid(800);
        let res = solve(&cfg).unwrap();
        let grid = &res.pair.grid;
        let total = grid.integrate(&res.pair.q);
        let bound = grid.integrate(&efficient_curve(&cfg.spec, grid, n, k).unwrap());
        assert!((total - bound).abs() < 1e-5, "n={n} k={k}: {total} vs {bound}");
        // The grid integral of Q_E approximates k/n.
        assert!((bound - k as f64 / n as f64).abs() < 1e-3);
    }
}

#[test]
fn lp_and_closed_form_agree_on_convex_cases() {
    let cases = [
        (power(2.0), 2, 1.0, 0.5),
        (power(2.0), 2, 1.0, 0.9),
        (power(2.0), 2, 2.0, 0.6),
        (uniform(), 10, 1.0, 0.5),
        (power(1.5), 5, 1.0, 0.7),
    ];
    for (spec, n, eta, alpha) in cases {
        let base = SolveConfig::new(spec, n, 1, eta, alpha).with_grid(2000);
        let lp = solve(&base.clone().with_method(Method::Lp)).unwrap();
        let cf = solve(&base.clone().with_method(Method::ClosedForm)).unwrap();
        assert!((lp.objective - cf.objective).abs() < 2e-3, "{base:?}");
        let l1 = lp.pair.grid.weights().iter().zip(lp.pair.q.iter().zip(&cf.pair.q)).map(|(w, (a, b))| w * (a - b).abs()).sum::<f64>();
        assert!(l1 < 2e-3, "{base:?}: L1 {l1}");
        assert_eq!(lp.regions.tags(), cf.regions.tags(), "{base:?}");
    }
}

#[test]
fn closed_form_power_square_cutoffs() {
    let cfg = SolveConfig::new(power(2.0), 2, 1, 1.0, 0.5).with_method(Method::ClosedForm);
    let res = solve(&cfg).unwrap();
    let c = &res.diagnostics.cutoffs;
    assert!(!c.is_empty() && c[0] < 0.5, "{c:?}");
    assert!(c.len() < 2 || c[1] > 0.5);
    assert!(res.diagnostics.max_binding_residual < 1e-5);
    let lp = solve(&cfg.clone().with_method(Method::Lp).with_grid(4000)).unwrap();
    let lo = lp.regions.intervals.iter().find(|i| i.tag == RegionTag::NoEffort).unwrap().lo;
    assert!((lo - c[0]).abs() < 5e-3, "{lo} vs {}", c[0]);
}

#[test]
fn closed_form_high_alpha_approaches_tangency() {
    // Q_E = θ² has slope η = 1 at θ = 1/2.
    let res = solve(&SolveConfig::new(power(2.0), 2, 1, 1.0, 0.999).with_method(Method::ClosedForm)).unwrap();
    let c = &res.diagnostics.cutoffs;
    assert!((c[0] - 0.5).abs() < 0.02, "{c:?}");
    let grid = res.pair.grid.clone();
    let qe = efficient_curve(&power(2.0), &grid, 2, 1).unwrap();
    let l1: f64 = grid.weights().iter().zip(res.pair.q.iter().zip(&qe)).map(|(w, (a, b))| w * (a - b).abs()).sum();
    assert!(l1 < 5e-3, "{l1}");
}

#[test]
fn closed_form_preconditions() {
    let err = solve(&SolveConfig::new(power(2.0), 4, 2, 1.0, 0.5).with_method(Method::ClosedForm)).unwrap_err();
    assert!(matches!(err, Error::Precondition(_)), "{err}");
    let err = solve(&SolveConfig::new(power(0.5), 2, 1, 1.0, 0.5).with_method(Method::ClosedForm)).unwrap_err();
    assert!(matches!(err, Error::Precondition(_)), "{err}");
    // Auto falls back to the LP.
    assert_eq!(solve(&SolveConfig::new(power(0.5), 2, 1, 1.0, 0.5)).unwrap().diagnostics.method, Method::Lp);
}

#[test]
fn config_validation() {
    assert!(SolveConfig::new(uniform(), 1, 1, 1.0, 0.5).validate().is_err());
    assert!(SolveConfig::new(uniform(), 3, 3, 1.0, 0.5).validate().is_err());
    assert!(SolveConfig::new(uniform(), 3, 1, 0.0, 0.5).validate().is_err());
    assert!(SolveConfig::new(uniform(), 3, 1, 1.0, 1.5).validate().is_err());
    assert!(SolveConfig::new(uniform(), 3, 1, 1.0, 0.5).with_grid(10).validate().is_err());
}

#[test]
fn pareto_frontier_shapes() {
    let flat = pareto_sweep(&SolveConfig::new(uniform(), 2, 1, 1.0, 0.5).with_grid(800), &[0.1, 0.5, 0.9]).unwrap();
    for p in &flat {
        assert!((p.efficiency - 1.0 / 3.0).abs() < 1e-3 && (p.utility - 0.5).abs() < 1e-3, "{p:?}");
    }
    let alphas: Vec<f64> = (1..10).map(|i| i as f64 / 10.0).collect();
    let pts = pareto_sweep(&SolveConfig::new(power(2.0), 2, 1, 1.0, 0.5), &alphas).unwrap();
    let mut distinct: Vec<(f64, f64)> = Vec::new();
    for p in &pts {
        if !distinct.iter().any(|d| (d.0 - p.efficiency).abs() < 1e-6 && (d.1 - p.utility).abs() < 1e-6) {
            distinct.push((p.efficiency, p.utility));
        }
    }
    assert!(distinct.len() >= 3, "{distinct:?}");
    // Larger α trades utility for efficiency.
    for w in pts.windows(2) {
        assert!(w[1].efficiency >= w[0].efficiency - 1e-7 && w[1].utility <= w[0].utility + 1e-7);
    }
    let slopes = frontier_slopes(&pts);
    assert!(slopes.windows(2).all(|s| s[1] <= s[0] + 1e-6), "{slopes:?}");
}

#[test]
fn replicated_economy_and_cutoff() {
    let cfg = SolveConfig::new(uniform(), 2, 1, 1.0, 0.5);
    let one = replicate_economy(&cfg, 1).unwrap();
    assert_eq!((one.n, one.k), (2, 1));
    let big = replicate_economy(&cfg, 50).unwrap();
    assert_eq!((big.n, big.k), (100, 50));
    assert!(replicate_economy(&cfg, 0).is_err());
    assert!((cutoff_type(&uniform(), 2, 1) - 0.5).abs() < 1e-12);
    assert!((cutoff_type(&power(2.0), 4, 1) - 0.75f64.sqrt()).abs() < 1e-12);
    let res = solve(&big).unwrap();
    let c = cutoff_type(&uniform(), big.n, big.k);
    assert!(res.regions.intervals.iter().any(|i| i.tag == RegionTag::NoEffort && i.lo < c && c < i.hi));
}

#[test]
fn solve_is_deterministic() {
    let cfg = SolveConfig::new(power(2.0), 3, 1, 1.0, 0.5).with_method(Method::Lp).with_grid(500);
    let a = solve(&cfg).unwrap();
    let b = solve(&cfg).unwrap();
    assert_eq!(a.pair.q, b.pair.q);
    assert_eq!(a.objective, b.objective);
}
