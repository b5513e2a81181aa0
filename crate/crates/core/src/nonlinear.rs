//! Discrete-type contests with convex effort costs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Effort cost `C(e)` with `C(0) = 0`, `C'' ≥ 0` and `C''' ≤ 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CostSpec {
    /// `η e`.
    Linear { eta: f64 },
    /// `c e² / 2`.
    Quadratic { c: f64 },
    /// `c e^p` with `1 ≤ p ≤ 2`.
    Power { c: f64, p: f64 },
}

impl CostSpec {
    pub fn validate(&self) -> Result<()> {
        let scale = match *self {
            CostSpec::Linear { eta } => eta,
            CostSpec::Quadratic { c } => c,
            CostSpec::Power { c, p } => {
                if !(1.0..=2.0).contains(&p) {
                    return Err(Error::Parameter(format!("power cost exponent must lie in [1, 2], got {p}")));
                }
                c
            }
        };
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Parameter(format!("cost scale must be positive, got {scale}")));
        }
        Ok(())
    }

    /// `C(e)`, zero for `e ≤ 0`.
    pub fn cost(&self, e: f64) -> f64 {
        if e <= 0.0 {
            return 0.0;
        }
        match *self {
            CostSpec::Linear { eta } => eta * e,
            CostSpec::Quadratic { c } => 0.5 * c * e * e,
            CostSpec::Power { c, p } => c * e.powf(p),
        }
    }

    /// `C⁻¹(y)` for `y ≥ 0`.
    pub fn inverse(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        match *self {
            CostSpec::Linear { eta } => y / eta,
            CostSpec::Quadratic { c } => (2.0 * y / c).sqrt(),
            CostSpec::Power { c, p } => (y / c).powf(1.0 / p),
        }
    }

    /// Cost of signalling `s` with true type `θ`: `C((s - θ)⁺)`.
    pub fn signal_cost(&self, s: f64, theta: f64) -> f64 {
        self.cost(s - theta)
    }
}

/// Finite type space with an interim allocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelFile", into = "ModelFile")]
pub struct DiscreteTypeModel {
    types: Vec<f64>,
    probs: Vec<f64>,
    q: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    types: Vec<f64>,
    probs: Vec<f64>,
    #[serde(rename = "Q")]
    q: Vec<f64>,
}

impl TryFrom<ModelFile> for DiscreteTypeModel {
    type Error = Error;
    fn try_from(f: ModelFile) -> Result<Self> {
        DiscreteTypeModel::new(f.types, f.probs, f.q)
    }
}

impl From<DiscreteTypeModel> for ModelFile {
    fn from(m: DiscreteTypeModel) -> Self {
        ModelFile { types: m.types, probs: m.probs, q: m.q }
    }
}

impl DiscreteTypeModel {
    pub fn new(types: Vec<f64>, probs: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        let m = types.len();
        if m == 0 {
            return Err(Error::Parameter("type space is empty".into()));
        }
        for v in [&probs, &q] {
            if v.len() != m {
                return Err(Error::Shape { expected: m, got: v.len() });
            }
        }
        if types.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Parameter("types must be strictly increasing".into()));
        }
        if probs.iter().any(|p| !(*p >= 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Parameter("probabilities must be non-negative and sum to 1".into()));
        }
        if q.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::Parameter("allocation values must lie in [0, 1]".into()));
        }
        if let Some(i) = q.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::NotMonotone { index: i + 1 });
        }
        Ok(DiscreteTypeModel { types, probs, q })
    }

    pub fn types(&self) -> &[f64] {
        &self.types
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }
}

/// Discrete model and cost as read from one JSON document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteProblem {
    #[serde(flatten)]
    pub model: DiscreteTypeModel,
    pub cost: CostSpec,
}

/// Recommended signal and utility per type.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiscreteContest {
    pub signals: Vec<f64>,
    pub utilities: Vec<f64>,
}

/// Signals and utilities built type by type: each type signals just enough that
/// the type below is indifferent to mimicking it.
pub fn construct_discrete_contest(model: &DiscreteTypeModel, cost: &CostSpec) -> Result<DiscreteContest> {
    cost.validate()?;
    let (t, q) = (&model.types, &model.q);
    let mut signals = vec![t[0]];
    let mut utilities = vec![q[0]];
    for k in 1..model.len() {
        let gap = q[k] - utilities[k - 1];
        if gap < 0.0 {
            return Err(Error::Construction(format!(
                "Q({}) = {} is below the utility {} of the type beneath",
                t[k],
                q[k],
                utilities[k - 1]
            )));
        }
        let s = t[k - 1] + cost.inverse(gap);
        signals.push(s);
        utilities.push(q[k] - cost.signal_cost(s, t[k]));
    }
    Ok(DiscreteContest { signals, utilities })
}

/// `e_G` with `C(e_G) = E_G[C(e)]`.
pub fn certainty_equivalent_effort(cost: &CostSpec, efforts: &[f64], probs: &[f64]) -> Result<f64> {
    cost.validate()?;
    if efforts.len() != probs.len() || efforts.is_empty() {
        return Err(Error::Shape { expected: efforts.len(), got: probs.len() });
    }
    if efforts.iter().any(|e| !(*e >= 0.0)) || probs.iter().any(|p| !(*p >= 0.0)) {
        return Err(Error::Parameter("efforts and probabilities must be non-negative".into()));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Parameter(format!("probabilities sum to {total}")));
    }
    if efforts.iter().all(|e| *e == efforts[0]) {
        return Ok(efforts[0]);
    }
    let expected: f64 = efforts.iter().zip(probs).map(|(e, p)| p * cost.cost(*e)).sum();
    Ok(cost.inverse(expected))
}

/// `C(ε + e_G) - E_G[C(ε + e)]`; non-negative for admissible costs.
pub fn certainty_equivalent_margin(cost: &CostSpec, efforts: &[f64], probs: &[f64], eps: f64) -> Result<f64> {
    let eg = certainty_equivalent_effort(cost, efforts, probs)?;
    let shifted: f64 = efforts.iter().zip(probs).map(|(e, p)| p * cost.cost(eps + e)).sum();
    Ok(cost.cost(eps + eg) - shifted)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiscreteIcReport {
    pub pass: bool,
    /// Largest `Q(l) - C((s_l - θ_j)⁺) - U(j)`.
    pub worst_gain: f64,
    /// `(true type, mimicked type)` attaining `worst_gain`.
    pub worst_pair: Option<(usize, usize)>,
}

/// Check that no type gains by producing another type's signal.
pub fn global_ic_check_discrete(model: &DiscreteTypeModel, cost: &CostSpec, signals: &[f64], utilities: &[f64]) -> Result<DiscreteIcReport> {
    let m = model.len();
    for v in [signals, utilities] {
        if v.len() != m {
            return Err(Error::Shape { expected: m, got: v.len() });
        }
    }
    let mut worst = (f64::NEG_INFINITY, None);
    for j in 0..m {
        for l in 0..m {
            if l == j {
                continue;
            }
            let gain = model.q[l] - cost.signal_cost(signals[l], model.types[j]) - utilities[j];
            if gain > worst.0 {
                worst = (gain, Some((j, l)));
            }
        }
    }
    let worst_gain = if m > 1 { worst.0 } else { 0.0 };
    let pass = worst_gain <= 1e-9;
    Ok(DiscreteIcReport { pass, worst_gain, worst_pair: if pass { None } else { worst.1 } })
}
