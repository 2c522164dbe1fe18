//! Problem instances, allocations, and the two distortion functionals.
//!
//! A *class* groups `count` identical sources with a common variance, sensing
//! cost, and (for the joint problem) channel noise. Every per-class quantity
//! is stored once and weighted by `count` when summed, so a class of `q`
//! sources behaves exactly like `q` separate sources receiving equal
//! fractions and rates.
//!
//! The separate problem minimizes `sum q_k s_k f(theta_k, R_k)` subject to
//! `sum q_k theta_k eps_k <= E` and `sum q_k R_k <= R`, where
//! `f(theta, R) = (1 - theta) + theta 2^(-2R/theta)` and `f(0, R) = 1`.
//!
//! The joint problem minimizes `sum q_k s_k h(theta_k, P_k)` subject to
//! `sum q_k (theta_k eps_k + tau P_k) <= B`, with
//! `h(theta, P) = (1 - theta) + theta (1 + P/N)^(-2 tau/theta)` and `h(0, P) = 1`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance used when classifying constraints as violated.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// One class of identical Gaussian sources.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceClass {
    /// Source power (per-sample variance).
    pub variance: f64,
    /// Energy spent per sensed source sample.
    pub sensing_cost: f64,
    /// Number of sources in the class.
    pub count: u32,
    /// Noise variance of the class channel; required by the joint problem.
    pub channel_noise: Option<f64>,
}

impl SourceClass {
    pub fn new(variance: f64, sensing_cost: f64, count: u32) -> Result<Self> {
        let class = Self {
            variance,
            sensing_cost,
            count,
            channel_noise: None,
        };
        class.validate()?;
        Ok(class)
    }

    pub fn with_noise(mut self, noise: f64) -> Result<Self> {
        self.channel_noise = Some(noise);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.variance.is_finite() && self.variance > 0.0) {
            return Err(Error::InvalidInput(format!(
                "variance must be positive and finite, got {}",
                self.variance
            )));
        }
        if !(self.sensing_cost.is_finite() && self.sensing_cost >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "sensing cost must be non-negative and finite, got {}",
                self.sensing_cost
            )));
        }
        if self.count == 0 {
            return Err(Error::InvalidInput("class count must be at least 1".into()));
        }
        if let Some(noise) = self.channel_noise {
            if !(noise.is_finite() && noise > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "channel noise must be positive and finite, got {noise}"
                )));
            }
        }
        Ok(())
    }

    pub(crate) fn q(&self) -> f64 {
        f64::from(self.count)
    }

    /// Channel noise, panicking if absent. Only called after
    /// [`JointInstance::validate`].
    pub(crate) fn noise(&self) -> f64 {
        self.channel_noise
            .expect("joint instances validate that every class has a channel noise")
    }
}

fn check_budget(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "{name} must be non-negative and finite, got {value}"
        )))
    }
}

fn check_classes(classes: &[SourceClass]) -> Result<()> {
    if classes.is_empty() {
        return Err(Error::InvalidInput(
            "at least one source class is required".into(),
        ));
    }
    classes.iter().try_for_each(SourceClass::validate)
}

/// Multiplies each class variance by its weight, turning a weighted-MSE
/// objective into a plain one.
pub fn fold_weights(classes: &[SourceClass], weights: &[f64]) -> Result<Vec<SourceClass>> {
    if weights.len() != classes.len() {
        return Err(Error::DimensionMismatch {
            expected: classes.len(),
            found: weights.len(),
        });
    }
    classes
        .iter()
        .zip(weights)
        .map(|(class, &w)| {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "weights must be positive, got {w}"
                )));
            }
            Ok(SourceClass {
                variance: w * class.variance,
                ..*class
            })
        })
        .collect()
}

/// Separate sensing-energy and communication-rate budgets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparateInstance {
    pub classes: Vec<SourceClass>,
    /// Sensing energy per source sample (`E`).
    pub energy_budget: f64,
    /// Communication rate in bits per source sample (`R`).
    pub rate_budget: f64,
}

impl SeparateInstance {
    pub fn new(classes: Vec<SourceClass>, energy_budget: f64, rate_budget: f64) -> Result<Self> {
        let instance = Self {
            classes,
            energy_budget,
            rate_budget,
        };
        instance.validate()?;
        Ok(instance)
    }

    pub fn validate(&self) -> Result<()> {
        check_classes(&self.classes)?;
        check_budget("energy budget", self.energy_budget)?;
        check_budget("rate budget", self.rate_budget)
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn fold_weights(&self, weights: &[f64]) -> Result<Self> {
        Ok(Self {
            classes: fold_weights(&self.classes, weights)?,
            ..self.clone()
        })
    }

    /// `sum q_k s_k`, the distortion with nothing sensed.
    pub fn total_variance(&self) -> f64 {
        total_variance(&self.classes)
    }

    /// `sum q_k eps_k`, the energy needed to sense every source fully.
    pub fn full_sensing_energy(&self) -> f64 {
        full_sensing_energy(&self.classes)
    }
}

/// One energy budget shared by sensing and transmission over per-class
/// Gaussian channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointInstance {
    pub classes: Vec<SourceClass>,
    /// Channel uses per source sample (`tau`).
    pub bandwidth_ratio: f64,
    /// Joint energy budget per source sample (`B`).
    pub budget: f64,
}

impl JointInstance {
    pub fn new(classes: Vec<SourceClass>, bandwidth_ratio: f64, budget: f64) -> Result<Self> {
        let instance = Self {
            classes,
            bandwidth_ratio,
            budget,
        };
        instance.validate()?;
        Ok(instance)
    }

    pub fn validate(&self) -> Result<()> {
        check_classes(&self.classes)?;
        if let Some(k) = self.classes.iter().position(|c| c.channel_noise.is_none()) {
            return Err(Error::InvalidInput(format!(
                "class {} has no channel noise; joint instances need one per class",
                k + 1
            )));
        }
        if !(self.bandwidth_ratio.is_finite() && self.bandwidth_ratio > 0.0) {
            return Err(Error::InvalidInput(format!(
                "bandwidth ratio must be positive, got {}",
                self.bandwidth_ratio
            )));
        }
        check_budget("budget", self.budget)
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn fold_weights(&self, weights: &[f64]) -> Result<Self> {
        Ok(Self {
            classes: fold_weights(&self.classes, weights)?,
            ..self.clone()
        })
    }

    pub fn total_variance(&self) -> f64 {
        total_variance(&self.classes)
    }

    pub fn full_sensing_energy(&self) -> f64 {
        full_sensing_energy(&self.classes)
    }

    pub fn noises(&self) -> Vec<f64> {
        self.classes.iter().map(SourceClass::noise).collect()
    }
}

pub(crate) fn total_variance(classes: &[SourceClass]) -> f64 {
    classes.iter().map(|c| c.q() * c.variance).sum()
}

pub(crate) fn full_sensing_energy(classes: &[SourceClass]) -> f64 {
    classes.iter().map(|c| c.q() * c.sensing_cost).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparateAllocation {
    /// Sampling fraction per class, in `[0, 1]`.
    pub fractions: Vec<f64>,
    /// Rate per source of each class, bits per source sample.
    pub rates: Vec<f64>,
}

impl SeparateAllocation {
    pub fn zeros(k: usize) -> Self {
        Self {
            fractions: vec![0.0; k],
            rates: vec![0.0; k],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointAllocation {
    pub fractions: Vec<f64>,
    /// Transmit power per channel of each class.
    pub powers: Vec<f64>,
}

impl JointAllocation {
    pub fn zeros(k: usize) -> Self {
        Self {
            fractions: vec![0.0; k],
            powers: vec![0.0; k],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Allocation {
    Separate(SeparateAllocation),
    Joint(JointAllocation),
}

impl Allocation {
    pub fn fractions(&self) -> &[f64] {
        match self {
            Allocation::Separate(a) => &a.fractions,
            Allocation::Joint(a) => &a.fractions,
        }
    }

    /// Rates for separate allocations, powers for joint ones.
    pub fn resources(&self) -> &[f64] {
        match self {
            Allocation::Separate(a) => &a.rates,
            Allocation::Joint(a) => &a.powers,
        }
    }
}

/// Which solution branch produced a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "kebab-case")]
pub enum CaseTag {
    /// All budgets zero (or unusable); nothing is sensed.
    Degenerate,
    /// The first `sensed` classes are fully sampled; rate is the binding
    /// resource. `energy_slack` marks leftover sensing energy.
    FullPrefix {
        sensed: usize,
        energy_slack: bool,
    },
    /// Classes before `partial` are fully sampled, class `partial` takes the
    /// remaining energy.
    PartialLast {
        partial: usize,
    },
    /// Zero sensing cost: the first `powered` classes receive power.
    ZeroCost {
        powered: usize,
    },
    /// Budget at or above the full-sampling threshold.
    LargeBudget,
    LowerCostFirst,
    EqualSamplingFraction,
    /// Numerical solver; `delta_shrunk` flags a lowered fraction floor.
    General {
        iterations: usize,
        delta_shrunk: bool,
    },
}

impl fmt::Display for CaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            CaseTag::Degenerate => write!(f, "degenerate"),
            CaseTag::FullPrefix {
                sensed,
                energy_slack,
            } => {
                write!(f, "case1(l={sensed}")?;
                if energy_slack {
                    write!(f, ";slack")?;
                }
                write!(f, ")")
            }
            CaseTag::PartialLast { partial } => write!(f, "case2(m={partial})"),
            CaseTag::ZeroCost { powered } => write!(f, "zero-cost(m={powered})"),
            CaseTag::LargeBudget => write!(f, "large-budget"),
            CaseTag::LowerCostFirst => write!(f, "lcf"),
            CaseTag::EqualSamplingFraction => write!(f, "esf"),
            CaseTag::General {
                iterations,
                delta_shrunk,
            } => {
                write!(f, "general(it={iterations}")?;
                if delta_shrunk {
                    write!(f, ";delta-shrunk")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Per-source distortion of one class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassDistortion {
    /// MSE of one source of the class, `s_k f(theta_k, R_k)`.
    pub total: f64,
    /// MSE over the sampled fraction only; `None` when nothing is sampled.
    pub sampled: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub allocation: Allocation,
    pub objective: f64,
    /// Multiplier of the rate constraint (`alpha`).
    pub rate_price: Option<f64>,
    /// Multiplier of the sensing-energy constraint, or of the joint energy
    /// budget (`beta`).
    pub energy_price: Option<f64>,
    pub kkt_residual: f64,
    pub case_tag: CaseTag,
    pub per_class: Vec<ClassDistortion>,
}

/// `f(theta, R)`: per-source distortion factor of the separate problem.
pub fn distortion_factor_separate(fraction: f64, rate: f64) -> f64 {
    if fraction <= 0.0 {
        return 1.0;
    }
    (1.0 - fraction) + fraction * (-2.0 * rate / fraction).exp2()
}

/// `(1 + P/N)^(-2 tau / theta)`, the distortion factor of the sampled part.
pub(crate) fn sampled_factor_joint(fraction: f64, power: f64, noise: f64, tau: f64) -> f64 {
    (-2.0 * tau / fraction * (power / noise).ln_1p()).exp()
}

/// `h(theta, P)`: per-source distortion factor of the joint problem.
pub fn distortion_factor_joint(fraction: f64, power: f64, noise: f64, bandwidth_ratio: f64) -> f64 {
    if fraction <= 0.0 {
        return 1.0;
    }
    (1.0 - fraction) + fraction * sampled_factor_joint(fraction, power, noise, bandwidth_ratio)
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

fn check_separate_dims(instance: &SeparateInstance, alloc: &SeparateAllocation) -> Result<()> {
    check_len(instance.len(), alloc.fractions.len())?;
    check_len(instance.len(), alloc.rates.len())
}

fn check_joint_dims(instance: &JointInstance, alloc: &JointAllocation) -> Result<()> {
    check_len(instance.len(), alloc.fractions.len())?;
    check_len(instance.len(), alloc.powers.len())
}

pub fn objective_separate(instance: &SeparateInstance, alloc: &SeparateAllocation) -> Result<f64> {
    check_separate_dims(instance, alloc)?;
    Ok(instance
        .classes
        .iter()
        .zip(alloc.fractions.iter().zip(&alloc.rates))
        .map(|(c, (&theta, &rate))| c.q() * c.variance * distortion_factor_separate(theta, rate))
        .sum())
}

pub fn objective_joint(instance: &JointInstance, alloc: &JointAllocation) -> Result<f64> {
    instance.validate()?;
    check_joint_dims(instance, alloc)?;
    let tau = instance.bandwidth_ratio;
    Ok(instance
        .classes
        .iter()
        .zip(alloc.fractions.iter().zip(&alloc.powers))
        .map(|(c, (&theta, &power))| {
            c.q() * c.variance * distortion_factor_joint(theta, power, c.noise(), tau)
        })
        .sum())
}

pub fn per_class_separate(
    instance: &SeparateInstance,
    alloc: &SeparateAllocation,
) -> Vec<ClassDistortion> {
    instance
        .classes
        .iter()
        .zip(alloc.fractions.iter().zip(&alloc.rates))
        .map(|(c, (&theta, &rate))| ClassDistortion {
            total: c.variance * distortion_factor_separate(theta, rate),
            sampled: (theta > 0.0).then(|| c.variance * (-2.0 * rate / theta).exp2()),
        })
        .collect()
}

pub fn per_class_joint(instance: &JointInstance, alloc: &JointAllocation) -> Vec<ClassDistortion> {
    let tau = instance.bandwidth_ratio;
    instance
        .classes
        .iter()
        .zip(alloc.fractions.iter().zip(&alloc.powers))
        .map(|(c, (&theta, &power))| ClassDistortion {
            total: c.variance * distortion_factor_joint(theta, power, c.noise(), tau),
            sampled: (theta > 0.0)
                .then(|| c.variance * sampled_factor_joint(theta, power, c.noise(), tau)),
        })
        .collect()
}

/// Usage of one budget constraint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintUsage {
    pub name: &'static str,
    pub used: f64,
    pub limit: f64,
    /// `limit - used`; negative when violated.
    pub slack: f64,
    pub violated: bool,
}

impl ConstraintUsage {
    fn new(name: &'static str, used: f64, limit: f64) -> Self {
        let slack = limit - used;
        Self {
            name,
            used,
            limit,
            slack,
            violated: slack < -FEASIBILITY_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub constraints: Vec<ConstraintUsage>,
    /// Largest violation of a variable bound (`0 <= theta <= 1`, resource `>= 0`).
    pub bound_violation: f64,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.bound_violation <= FEASIBILITY_TOL && self.constraints.iter().all(|c| !c.violated)
    }

    pub fn constraint(&self, name: &str) -> Option<&ConstraintUsage> {
        self.constraints.iter().find(|c| c.name == name)
    }

    /// Largest positive constraint or bound violation.
    pub fn max_violation(&self) -> f64 {
        self.constraints
            .iter()
            .map(|c| (-c.slack).max(0.0))
            .fold(self.bound_violation, f64::max)
    }
}

fn bound_violation(fractions: &[f64], resources: &[f64]) -> f64 {
    let frac = fractions
        .iter()
        .map(|&t| (-t).max(t - 1.0).max(0.0))
        .fold(0.0, f64::max);
    let res = resources.iter().map(|&r| (-r).max(0.0)).fold(0.0, f64::max);
    let nan = fractions.iter().chain(resources).any(|v| !v.is_finite());
    if nan {
        f64::INFINITY
    } else {
        frac.max(res)
    }
}

pub fn check_feasible_separate(
    instance: &SeparateInstance,
    alloc: &SeparateAllocation,
) -> Result<FeasibilityReport> {
    check_separate_dims(instance, alloc)?;
    let energy: f64 = instance
        .classes
        .iter()
        .zip(&alloc.fractions)
        .map(|(c, &t)| c.q() * t * c.sensing_cost)
        .sum();
    let rate: f64 = instance
        .classes
        .iter()
        .zip(&alloc.rates)
        .map(|(c, &r)| c.q() * r)
        .sum();
    Ok(FeasibilityReport {
        constraints: vec![
            ConstraintUsage::new("energy", energy, instance.energy_budget),
            ConstraintUsage::new("rate", rate, instance.rate_budget),
        ],
        bound_violation: bound_violation(&alloc.fractions, &alloc.rates),
    })
}

pub fn check_feasible_joint(
    instance: &JointInstance,
    alloc: &JointAllocation,
) -> Result<FeasibilityReport> {
    check_joint_dims(instance, alloc)?;
    let used: f64 = instance
        .classes
        .iter()
        .zip(alloc.fractions.iter().zip(&alloc.powers))
        .map(|(c, (&t, &p))| c.q() * (t * c.sensing_cost + instance.bandwidth_ratio * p))
        .sum();
    Ok(FeasibilityReport {
        constraints: vec![ConstraintUsage::new("budget", used, instance.budget)],
        bound_violation: bound_violation(&alloc.fractions, &alloc.powers),
    })
}
