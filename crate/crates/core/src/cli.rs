//! Command-line front end: experiment configs, subcommands and file output.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{nonconvergence_bound, vcg_pair, wta_pair, ComparisonRow};
use crate::distributions::DistributionSpec;
use crate::error::{Error, Result};
use crate::mechanism::{
    check_ic, check_interim_feasibility, classify_regions, expost_rule_pair, sig12, write_curves_csv,
    write_regions_csv, CoarseRanking,
};
use crate::simulate::{
    deviation_scan, mc_interim_estimate, quantile_probes, simulate_vcg, write_simulation_csv, ContestRule,
    DeviationReport, McConfig, SignalCurve,
};
use crate::solver::{objective_value, replicate_economy, solve, Method, SolveConfig, SolveResult};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "contest-opt", version, about = "Welfare-optimal screening contests")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Monte Carlo seed; overrides `mc.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// lp, closed-form or auto.
    #[arg(long, global = true)]
    pub method: Option<String>,
    /// Grid cells M.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the optimal contest; writes result.json, curves.csv and regions.csv.
    Solve,
    /// Compare the optimum with the WTA contest and the VCG format; writes compare.csv.
    Compare,
    /// Solve across the configured sweep; writes sweep.csv.
    Sweep,
    /// Re-check a result.json: incentives, feasibility, binding and (n=2) deviations.
    Verify {
        result: PathBuf,
        /// Skip the Monte Carlo deviation scan.
        #[arg(long)]
        no_simulate: bool,
    },
    /// Monte Carlo interim estimates and deviation scan of the optimal contest; writes
    /// simulation.csv and vcg.csv.
    Simulate,
}

/// `alpha` in a config: one value or a list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaSpec {
    One(f64),
    Many(Vec<f64>),
}

impl AlphaSpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            AlphaSpec::One(a) => vec![*a],
            AlphaSpec::Many(v) => v.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// Number of agents, `k` fixed.
    N,
    /// Replication factor: `z·n` agents, `z·k` items.
    Z,
    Alpha,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

fn default_k() -> usize {
    1
}
fn default_eta() -> f64 {
    1.0
}
fn default_alpha() -> AlphaSpec {
    AlphaSpec::One(0.5)
}
fn default_grid() -> usize {
    2000
}
fn default_lp_tol() -> f64 {
    1e-9
}
fn default_epsilon() -> f64 {
    0.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub distribution: DistributionSpec,
    pub n: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_alpha")]
    pub alpha: AlphaSpec,
    #[serde(default = "auto_method")]
    pub method: Method,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_lp_tol")]
    pub lp_tol: f64,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    /// `ε` in the payoff-ratio bound reported by `compare` and `sweep`.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn auto_method() -> Method {
    Method::Auto
}

fn config_error(field: &str, message: impl Into<String>) -> Error {
    Error::Config { field: field.into(), message: message.into() }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| config_error("config", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| config_error("config", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Fold command-line overrides into the config.
    pub fn apply(&mut self, common: &CommonArgs) -> Result<()> {
        if let Some(out) = &common.out {
            self.output_dir = Some(out.clone());
        }
        if let Some(seed) = common.seed {
            self.mc.seed = seed;
        }
        if let Some(m) = &common.method {
            self.method = m.parse()?;
        }
        if let Some(g) = common.grid {
            self.grid = g;
        }
        Ok(())
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.alpha.values()
    }

    pub fn solve_config(&self, alpha: f64) -> SolveConfig {
        SolveConfig {
            spec: self.distribution.clone(),
            n: self.n,
            k: self.k,
            eta: self.eta,
            alpha,
            grid: self.grid,
            lp_tol: self.lp_tol,
            method: self.method,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let alphas = self.alphas();
        if alphas.is_empty() {
            return Err(config_error("alpha", "list is empty"));
        }
        for &a in &alphas {
            self.solve_config(a).validate()?;
        }
        self.mc.validate()?;
        if !(self.epsilon > 0.0) {
            return Err(config_error("epsilon", format!("{} must be positive", self.epsilon)));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(config_error("sweep.values", "list is empty"));
            }
            for &v in &sweep.values {
                match sweep.parameter {
                    SweepParameter::N | SweepParameter::Z => {
                        if !(v >= 1.0 && v.fract() == 0.0) {
                            return Err(config_error("sweep.values", format!("{v} is not a positive integer")));
                        }
                    }
                    SweepParameter::Alpha => {
                        if !(0.0..=1.0).contains(&v) {
                            return Err(config_error("sweep.values", format!("{v} is outside [0, 1]")));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    /// Directory for one `α`: the output directory itself unless several are configured.
    fn alpha_dir(&self, alpha: f64) -> PathBuf {
        let base = self.output_dir();
        if self.alphas().len() == 1 {
            base
        } else {
            base.join(format!("alpha-{alpha}"))
        }
    }
}

/// Write through a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

/// Apply `CONTEST_OPT_THREADS` to the global pool.
fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("CONTEST_OPT_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|t| *t > 0)
        .ok_or_else(|| config_error("CONTEST_OPT_THREADS", format!("`{raw}` is not a positive integer")))?;
    // A pool already exists when run twice in one process (tests); keep it.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

/// Outcome of a subcommand that ran to completion.
#[derive(Debug, PartialEq)]
pub enum Outcome {
    Ok,
    CheckFailed(String),
}

fn load_config(common: &CommonArgs) -> Result<ExperimentConfig> {
    let path = common.config.as_deref().ok_or_else(|| config_error("config", "--config is required"))?;
    let mut cfg = ExperimentConfig::load(path)?;
    cfg.apply(common)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn cmd_solve(cfg: &ExperimentConfig) -> Result<Outcome> {
    let results: Vec<(f64, Result<SolveResult>)> =
        cfg.alphas().into_par_iter().map(|a| (a, solve(&cfg.solve_config(a)))).collect();
    for (alpha, res) in results {
        let res = res?;
        let dir = cfg.alpha_dir(alpha);
        write_atomic(&dir.join("result.json"), &serde_json::to_vec_pretty(&res)?)?;
        let curves = csv_bytes(|b| write_curves_csv(b, &res.pair, &cfg.distribution, Some(&res.regions)))?;
        write_atomic(&dir.join("curves.csv"), &curves)?;
        let regions = csv_bytes(|b| write_regions_csv(b, &res.regions))?;
        write_atomic(&dir.join("regions.csv"), &regions)?;
        let tags: Vec<String> = res.regions.tags().iter().map(|t| t.to_string()).collect();
        eprintln!("alpha={alpha} objective={} regions=[{}] -> {}", sig12(res.objective), tags.join(", "), dir.display());
    }
    Ok(Outcome::Ok)
}

/// Optimal, WTA and VCG-format rows for one `α`, plus the optimal-to-WTA ratio.
pub fn comparison_rows(cfg: &ExperimentConfig, alpha: f64) -> Result<(Vec<ComparisonRow>, f64)> {
    let sc = cfg.solve_config(alpha);
    let opt = solve(&sc)?;
    let grid = sc.type_grid()?;
    let wta = wta_pair(&cfg.distribution, &grid, cfg.n, cfg.k, cfg.eta, alpha)?;
    let vcg = vcg_pair(&cfg.distribution, &grid, cfg.n, cfg.k, cfg.eta, alpha)?;
    let ratio = opt.objective / objective_value(&wta);
    Ok((
        vec![
            ComparisonRow::from_pair("optimal", &opt.pair),
            ComparisonRow::from_pair("wta", &wta),
            ComparisonRow::from_pair("vcg-format", &vcg),
        ],
        ratio,
    ))
}

pub fn cmd_compare(cfg: &ExperimentConfig) -> Result<Outcome> {
    let alphas = cfg.alphas();
    let blocks: Vec<Result<(Vec<ComparisonRow>, f64)>> = alphas.par_iter().map(|&a| comparison_rows(cfg, a)).collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["mechanism", "alpha", "efficiency", "total_utility", "objective", "ratio", "delta_bound"])?;
    for (&alpha, block) in alphas.iter().zip(blocks) {
        let (rows, ratio) = block?;
        let delta = nonconvergence_bound(cfg.distribution.hi(), alpha, cfg.epsilon)?;
        if !delta.bites {
            eprintln!("alpha={alpha}: delta bound {} does not exceed 1 at epsilon={}", sig12(delta.delta), cfg.epsilon);
        }
        for r in rows {
            let row_ratio = if r.mechanism == "optimal" { sig12(ratio) } else { String::new() };
            w.write_record([
                r.mechanism.clone(),
                sig12(r.alpha),
                sig12(r.efficiency),
                sig12(r.total_utility),
                sig12(r.objective),
                row_ratio,
                sig12(delta.delta),
            ])?;
        }
        eprintln!("alpha={alpha} V_opt/V_WTA={}", sig12(ratio));
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(&cfg.output_dir().join("compare.csv"), &bytes)?;
    Ok(Outcome::Ok)
}

/// One solved point of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub parameter: String,
    pub value: f64,
    pub alpha: f64,
    pub n: usize,
    pub k: usize,
    pub objective: f64,
    pub wta_objective: f64,
    pub ratio: f64,
    pub no_tension_measure: f64,
    pub efficiency: f64,
    pub utility: f64,
    pub cutoffs: Vec<f64>,
    pub regions: Vec<String>,
}

pub fn sweep_rows(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let sweep = cfg.sweep.as_ref().ok_or_else(|| config_error("sweep", "missing sweep section"))?;
    let mut jobs = Vec::new();
    for &v in &sweep.values {
        let alphas = if sweep.parameter == SweepParameter::Alpha { vec![v] } else { cfg.alphas() };
        for a in alphas {
            let base = cfg.solve_config(a);
            let sc = match sweep.parameter {
                SweepParameter::N => SolveConfig { n: v as usize, ..base },
                SweepParameter::Z => replicate_economy(&base, v as usize)?,
                SweepParameter::Alpha => base,
            };
            sc.validate()?;
            jobs.push((v, sc));
        }
    }
    let label = match sweep.parameter {
        SweepParameter::N => "n",
        SweepParameter::Z => "z",
        SweepParameter::Alpha => "alpha",
    };
    jobs.into_par_iter()
        .map(|(value, sc)| {
            let res = solve(&sc)?;
            let grid = sc.type_grid()?;
            let wta = wta_pair(&sc.spec, &grid, sc.n, sc.k, sc.eta, sc.alpha)?;
            let wta_objective = objective_value(&wta);
            Ok(SweepRow {
                parameter: label.into(),
                value,
                alpha: sc.alpha,
                n: sc.n,
                k: sc.k,
                objective: res.objective,
                wta_objective,
                ratio: res.objective / wta_objective,
                no_tension_measure: res.no_tension_measure(),
                efficiency: res.pair.efficiency(),
                utility: res.pair.utility(),
                cutoffs: res.diagnostics.cutoffs.clone(),
                regions: res.regions.tags().iter().map(|t| t.to_string()).collect(),
            })
        })
        .collect()
}

pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<Outcome> {
    let rows = sweep_rows(cfg)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "parameter",
        "value",
        "alpha",
        "n",
        "k",
        "objective",
        "wta_objective",
        "ratio",
        "no_tension_measure",
        "efficiency",
        "utility",
        "cutoffs",
        "regions",
    ])?;
    for r in &rows {
        let cutoffs: Vec<String> = r.cutoffs.iter().map(|c| sig12(*c)).collect();
        w.write_record([
            r.parameter.clone(),
            sig12(r.value),
            sig12(r.alpha),
            r.n.to_string(),
            r.k.to_string(),
            sig12(r.objective),
            sig12(r.wta_objective),
            sig12(r.ratio),
            sig12(r.no_tension_measure),
            sig12(r.efficiency),
            sig12(r.utility),
            cutoffs.join(";"),
            r.regions.join(";"),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(&cfg.output_dir().join("sweep.csv"), &bytes)?;
    eprintln!("{} sweep rows -> {}", rows.len(), cfg.output_dir().display());
    Ok(Outcome::Ok)
}

/// Findings of `verify`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub ic_pass: bool,
    pub feasibility_pass: bool,
    pub worst_feasibility_excess: Option<f64>,
    pub binding_pass: bool,
    pub detail: Vec<String>,
    pub deviation: Option<DeviationReport>,
}

impl VerifyReport {
    pub fn pass(&self) -> bool {
        self.ic_pass && self.feasibility_pass && self.binding_pass && self.deviation.as_ref().is_none_or(|d| d.certified)
    }
}

pub fn verify_result(res: &SolveResult, mc: Option<&McConfig>) -> Result<VerifyReport> {
    let spec = &res.config.spec;
    let tol = res.config.tolerance();
    let pair = &res.pair;
    let mut detail = Vec::new();
    let ic = check_ic(pair, &tol.scaled(10.0));
    if !ic.pass {
        detail.push(format!("incentive check failed: {ic:?}"));
    }
    let (feasibility_pass, worst) = match check_interim_feasibility(&pair.q, &pair.grid, spec, pair.n, pair.k, tol.level * 10.0) {
        Ok(f) => {
            if !f.pass {
                detail.push(format!("tail integral exceeds the efficient bound by {:e} at theta={}", f.worst_excess, f.worst_theta));
            }
            (f.pass, Some(f.worst_excess))
        }
        Err(e) => {
            detail.push(format!("feasibility check failed: {e}"));
            (false, None)
        }
    };
    let binding_pass = if ic.pass && feasibility_pass {
        match classify_regions(pair, spec, &tol) {
            Ok(_) => true,
            Err(e) => {
                detail.push(format!("region check failed: {e}"));
                false
            }
        }
    } else {
        false
    };
    let mut deviation = None;
    if let Some(mc) = mc {
        if ic.pass && feasibility_pass && binding_pass && pair.n == 2 && pair.k == 1 {
            let rule = expost_rule_pair(pair, spec)?;
            let strategy = SignalCurve::from_pair(pair)?;
            let probes = quantile_probes(spec, mc.probes);
            let rep = deviation_scan(&rule, &|t| strategy.eval(t), spec, pair.eta, &probes, mc)?;
            if !rep.certified {
                detail.push(format!("profitable deviation: gain {:e} (se {:e})", rep.max_gain, rep.max_gain_se));
            }
            deviation = Some(rep);
        }
    }
    Ok(VerifyReport { ic_pass: ic.pass, feasibility_pass, worst_feasibility_excess: worst, binding_pass, detail, deviation })
}

pub fn cmd_verify(path: &Path, common: &CommonArgs, simulate: bool) -> Result<Outcome> {
    let text = fs::read_to_string(path).map_err(|e| config_error("result", format!("{}: {e}", path.display())))?;
    let res: SolveResult = serde_json::from_str(&text).map_err(|e| config_error("result", e.to_string()))?;
    let mc = McConfig { samples: 20_000, seed: common.seed.unwrap_or(7), deviation_points: 101, probes: 33 };
    let report = verify_result(&res, simulate.then_some(&mc))?;
    let json = serde_json::to_vec_pretty(&report)?;
    if let Some(out) = &common.out {
        write_atomic(&out.join("verify.json"), &json)?;
    }
    println!("{}", String::from_utf8_lossy(&json));
    if report.pass() {
        Ok(Outcome::Ok)
    } else {
        Ok(Outcome::CheckFailed(report.detail.join("; ")))
    }
}

pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut failures = Vec::new();
    for alpha in cfg.alphas() {
        let res = solve(&cfg.solve_config(alpha))?;
        let spec = &cfg.distribution;
        let strategy = SignalCurve::from_pair(&res.pair)?;
        let s = |t: f64| strategy.eval(t);
        let probes = quantile_probes(spec, cfg.mc.probes);
        let (est, dev) = if cfg.n == 2 && cfg.k == 1 {
            let rule = expost_rule_pair(&res.pair, spec)?;
            (mc_interim_estimate(&rule, &s, spec, cfg.eta, &probes, &cfg.mc)?, deviation_scan(&rule, &s, spec, cfg.eta, &probes, &cfg.mc)?)
        } else {
            let rule = ContestRule::new(CoarseRanking::from_regions(&res.regions, spec), cfg.n, cfg.k)?;
            (mc_interim_estimate(&rule, &s, spec, cfg.eta, &probes, &cfg.mc)?, deviation_scan(&rule, &s, spec, cfg.eta, &probes, &cfg.mc)?)
        };
        let gains: Vec<f64> = dev.rows.iter().map(|r| r.gain).collect();
        let dir = cfg.alpha_dir(alpha);
        write_atomic(&dir.join("simulation.csv"), &csv_bytes(|b| write_simulation_csv(b, &est, Some(&gains)))?)?;
        let vcg = simulate_vcg(spec, cfg.n, cfg.k, cfg.eta, &probes, &cfg.mc)?;
        write_atomic(&dir.join("vcg.csv"), &csv_bytes(|b| write_simulation_csv(b, &vcg, None))?)?;
        eprintln!(
            "alpha={alpha} max deviation gain {} (se {}) certified={} -> {}",
            sig12(dev.max_gain),
            sig12(dev.max_gain_se),
            dev.certified,
            dir.display()
        );
        if !dev.certified {
            failures.push(format!("alpha={alpha}: deviation gain {:e}", dev.max_gain));
        }
    }
    Ok(if failures.is_empty() { Outcome::Ok } else { Outcome::CheckFailed(failures.join("; ")) })
}

fn is_config_error(e: &Error) -> bool {
    matches!(e, Error::Config { .. } | Error::Json(_))
}

/// Parse `args`, run the subcommand and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let outcome = configure_threads().and_then(|_| match &cli.command {
        Command::Verify { result, no_simulate } => cmd_verify(result, &cli.common, !no_simulate),
        cmd => {
            let cfg = load_config(&cli.common)?;
            match cmd {
                Command::Solve => cmd_solve(&cfg),
                Command::Compare => cmd_compare(&cfg),
                Command::Sweep => cmd_sweep(&cfg),
                Command::Simulate => cmd_simulate(&cfg),
                Command::Verify { .. } => unreachable!(),
            }
        }
    });
    match outcome {
        Ok(Outcome::Ok) => EXIT_OK,
        Ok(Outcome::CheckFailed(msg)) => {
            eprintln!("check failed: {msg}");
            EXIT_CHECK
        }
        Err(e) if is_config_error(&e) => {
            eprintln!("config error: {e}");
            EXIT_CONFIG
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CHECK
        }
    }
}
