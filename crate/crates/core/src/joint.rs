//! Joint sensing/communication with a single energy budget and analog
//! (uncoded) transmission.
//!
//! Ordered instances have variances strictly descending and channel noises
//! non-decreasing. Closed forms exist when sensing is free (power
//! water-filling over a prefix of classes) and when the budget is large
//! enough that every class is fully sampled.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kkt::{Condition, KktCertificate, ViolationLog};
use crate::model::{
    check_feasible_joint, objective_joint, per_class_joint, Allocation, CaseTag, JointAllocation,
    JointInstance, SolveReport, SourceClass, FEASIBILITY_TOL,
};
use crate::separate::{check_strictly_descending_variances, UPPER_BOUND_TOL};

const BISECTION_STEPS: usize = 200;

/// Tolerance used by [`structure_check`].
pub const STRUCTURE_TOL: f64 = 1e-7;

fn check_nondecreasing_noises(classes: &[SourceClass]) -> Result<()> {
    for (k, pair) in classes.windows(2).enumerate() {
        if pair[1].noise() < pair[0].noise() {
            return Err(Error::Ordering(format!(
                "channel noises must be non-decreasing, but class {} ({}) < class {} ({})",
                k + 2,
                pair[1].noise(),
                k + 1,
                pair[0].noise()
            )));
        }
    }
    Ok(())
}

/// Checks the ordered-case precondition shared by the closed forms.
pub fn check_ordered_joint(instance: &JointInstance) -> Result<()> {
    instance.validate()?;
    check_strictly_descending_variances(&instance.classes)?;
    check_nondecreasing_noises(&instance.classes)
}

/// `(2 s N^(2 tau))^(1/(2 tau + 1))`, the weight of a fully sampled class in
/// the zero-cost water-filling.
fn waterfill_weight(class: &SourceClass, tau: f64) -> f64 {
    let n = class.noise();
    (2.0 * class.variance * n.powf(2.0 * tau)).powf(1.0 / (2.0 * tau + 1.0))
}

/// Budget levels `b_1..b_{K-1}`: with free sensing, class `i+1` receives
/// power exactly when the budget exceeds `b_i`.
pub fn budget_thresholds(instance: &JointInstance) -> Result<Vec<f64>> {
    check_ordered_joint(instance)?;
    let classes = &instance.classes;
    let tau = instance.bandwidth_ratio;
    let exponent = 1.0 / (2.0 * tau + 1.0);
    Ok((1..classes.len())
        .map(|i| {
            let next = &classes[i];
            tau * classes[..i]
                .iter()
                .map(|c| {
                    let ratio = (c.variance * next.noise()) / (next.variance * c.noise());
                    c.q() * c.noise() * (ratio.powf(exponent) - 1.0)
                })
                .sum::<f64>()
        })
        .collect())
}

/// Output of [`waterfill_powers`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    pub powers: Vec<f64>,
    /// `beta`; `None` when the budget is zero or cannot be used.
    pub power_price: Option<f64>,
    /// Positive budget but nothing sensed to spend it on.
    pub unusable: bool,
}

/// Power of one class at price `exp(ln_beta)`:
/// `N [(2 s / (beta N))^(theta / (2 tau + theta)) - 1]^+`.
fn power_at(class: &SourceClass, fraction: f64, tau: f64, ln_beta: f64) -> f64 {
    let n = class.noise();
    let excess = (2.0 * class.variance / n).ln() - ln_beta;
    if excess <= 0.0 {
        return 0.0;
    }
    n * (fraction / (2.0 * tau + fraction) * excess).exp_m1()
}

/// Spends `power_budget = tau * sum q_k P_k` across the sensed classes at a
/// common marginal price `beta`.
///
/// The price is bisected in log space: with small fractions the optimal
/// `beta` can sit hundreds of thousands of e-folds below 1.
pub fn waterfill_powers(
    classes: &[SourceClass],
    fractions: &[f64],
    bandwidth_ratio: f64,
    power_budget: f64,
) -> Result<PowerAllocation> {
    if fractions.len() != classes.len() {
        return Err(Error::DimensionMismatch {
            expected: classes.len(),
            found: fractions.len(),
        });
    }
    if let Some(&t) = fractions.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::InvalidInput(format!(
            "fraction {t} is outside [0, 1]"
        )));
    }
    if !(bandwidth_ratio.is_finite() && bandwidth_ratio > 0.0) {
        return Err(Error::InvalidInput(format!(
            "bandwidth ratio must be positive, got {bandwidth_ratio}"
        )));
    }
    if !(power_budget.is_finite() && power_budget >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "power budget must be non-negative, got {power_budget}"
        )));
    }
    for c in classes {
        c.validate()?;
        if c.channel_noise.is_none() {
            return Err(Error::InvalidInput(
                "every class needs a channel noise".into(),
            ));
        }
    }
    let tau = bandwidth_ratio;
    let sensed: Vec<usize> = (0..classes.len()).filter(|&k| fractions[k] > 0.0).collect();
    let mut powers = vec![0.0; classes.len()];
    if power_budget == 0.0 || sensed.is_empty() {
        return Ok(PowerAllocation {
            powers,
            power_price: None,
            unusable: power_budget > 0.0,
        });
    }
    let spent = |ln_beta: f64| -> f64 {
        tau * sensed
            .iter()
            .map(|&k| classes[k].q() * power_at(&classes[k], fractions[k], tau, ln_beta))
            .sum::<f64>()
    };

    let mut hi = sensed
        .iter()
        .map(|&k| (2.0 * classes[k].variance / classes[k].noise()).ln())
        .fold(f64::NEG_INFINITY, f64::max);
    let mut step = 1.0;
    let mut lo = hi - step;
    while spent(lo) < power_budget {
        hi = lo;
        step *= 2.0;
        lo -= step;
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if spent(mid) >= power_budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let ln_beta = 0.5 * (lo + hi);
    for &k in &sensed {
        powers[k] = power_at(&classes[k], fractions[k], tau, ln_beta);
    }
    // Land on the budget exactly; the correction is at rounding level.
    let used = spent(ln_beta);
    if used > 0.0 {
        let scale = power_budget / used;
        powers.iter_mut().for_each(|p| *p *= scale);
    }
    Ok(PowerAllocation {
        powers,
        power_price: Some(ln_beta.exp()),
        unusable: false,
    })
}

/// Closed-form water-filling over fully sampled, ordered classes with
/// `tau * sum q P = power_budget`. Returns the powers, the price, and the
/// number of powered classes.
fn prefix_powers(
    instance: &JointInstance,
    power_budget: f64,
) -> Result<(Vec<f64>, Option<f64>, usize)> {
    let classes = &instance.classes;
    let tau = instance.bandwidth_ratio;
    let levels = budget_thresholds(instance)?;
    let k = classes.len();
    if power_budget == 0.0 {
        return Ok((vec![0.0; k], None, 0));
    }
    let m = levels
        .iter()
        .position(|&b| power_budget <= b)
        .map_or(k, |i| i + 1);
    let active = &classes[..m];
    let weights: f64 = active
        .iter()
        .map(|c| c.q() * waterfill_weight(c, tau))
        .sum();
    let noise_mass: f64 = active.iter().map(|c| c.q() * c.noise()).sum();
    // beta^(-1/(2 tau + 1))
    let level = (power_budget / tau + noise_mass) / weights;
    let mut powers = vec![0.0; k];
    for (p, c) in powers.iter_mut().zip(active) {
        *p = (level * waterfill_weight(c, tau) - c.noise()).max(0.0);
    }
    Ok((powers, Some(level.powf(-(2.0 * tau + 1.0))), m))
}

/// Optimal allocation when every sensing cost is zero: sample everything and
/// water-fill the budget over a prefix of classes.
pub fn solve_zero_cost(instance: &JointInstance) -> Result<SolveReport> {
    check_ordered_joint(instance)?;
    if let Some((i, c)) = instance
        .classes
        .iter()
        .enumerate()
        .find(|(_, c)| c.sensing_cost != 0.0)
    {
        return Err(Error::InvalidInput(format!(
            "class {} has sensing cost {}; the zero-cost solution needs all costs 0",
            i + 1,
            c.sensing_cost
        )));
    }
    let (powers, _, m) = prefix_powers(instance, instance.budget)?;
    let alloc = JointAllocation {
        fractions: vec![1.0; instance.len()],
        powers,
    };
    report(instance, alloc, CaseTag::ZeroCost { powered: m })
}

/// The budget above which sampling every class fully is optimal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullSamplingBudget {
    pub budget: f64,
    /// Power of the last class at that budget.
    pub reference_power: f64,
    /// The last class senses for free, so the threshold collapses to the
    /// point where it starts receiving power.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointThresholds {
    pub budget_levels: Vec<f64>,
    pub full_sampling_budget: f64,
    pub reference_power: f64,
}

pub fn joint_thresholds(instance: &JointInstance) -> Result<JointThresholds> {
    let budget_levels = budget_thresholds(instance)?;
    let full = full_sampling_budget(instance)?;
    Ok(JointThresholds {
        budget_levels,
        full_sampling_budget: full.budget,
        reference_power: full.reference_power,
    })
}

/// Solves for the budget at which the upper-bound multiplier of the last
/// fraction reaches zero with every class fully sampled.
///
/// With all classes sampled and powered, the price is
/// `beta = (tau sum q (2 s N^(2 tau))^(1/(2 tau+1)) / (B - sum q (eps - tau N)))^(2 tau+1)`,
/// and fully sampling class `k` is optimal iff
/// `s_k/eps_k (1 - (1+P_k/N_k)^(-2 tau) [1 + 2 tau ln(1+P_k/N_k)]) >= beta`.
/// The left side grows and the right side shrinks with `B`, so the root is
/// unique. Every class is checked and the largest root is returned; on
/// instances with non-decreasing costs that is the last class.
pub fn full_sampling_budget(instance: &JointInstance) -> Result<FullSamplingBudget> {
    check_ordered_joint(instance)?;
    let classes = &instance.classes;
    let k = classes.len();
    let tau = instance.bandwidth_ratio;
    let sensing: f64 = instance.full_sensing_energy();
    let levels = budget_thresholds(instance)?;
    let floor = sensing + levels.last().copied().unwrap_or(0.0);

    let power_at_budget = |b: f64| -> Vec<f64> {
        let weights: f64 = classes
            .iter()
            .map(|c| c.q() * waterfill_weight(c, tau))
            .sum();
        let noise_mass: f64 = classes.iter().map(|c| c.q() * c.noise()).sum();
        let level = ((b - sensing) / tau + noise_mass) / weights;
        classes
            .iter()
            .map(|c| (level * waterfill_weight(c, tau) - c.noise()).max(0.0))
            .collect()
    };
    let price = |b: f64| -> f64 {
        let weights: f64 = classes
            .iter()
            .map(|c| c.q() * waterfill_weight(c, tau))
            .sum();
        let denom = b - classes
            .iter()
            .map(|c| c.q() * (c.sensing_cost - tau * c.noise()))
            .sum::<f64>();
        (tau * weights / denom).powf(2.0 * tau + 1.0)
    };
    // Positive when fully sampling class `i` is optimal at budget `b`.
    let margin = |i: usize, b: f64| -> f64 {
        let c = &classes[i];
        let snr = power_at_budget(b)[i] / c.noise();
        let gain =
            c.variance * (1.0 - (-2.0 * tau * snr.ln_1p()).exp() * (1.0 + 2.0 * tau * snr.ln_1p()));
        gain - price(b) * c.sensing_cost
    };

    if classes[k - 1].sensing_cost == 0.0 {
        return Ok(FullSamplingBudget {
            budget: floor,
            reference_power: power_at_budget(floor)[k - 1],
            degenerate: true,
        });
    }

    let mut budget = floor;
    for (i, class) in classes.iter().enumerate() {
        if class.sensing_cost == 0.0 || margin(i, floor) >= 0.0 {
            continue;
        }
        let mut lo = floor;
        let mut width = floor.abs().max(1.0);
        let mut hi = floor + width;
        while margin(i, hi) < 0.0 {
            lo = hi;
            width *= 2.0;
            hi += width;
        }
        while hi - lo > 1e-10 * hi.max(1.0) {
            let mid = 0.5 * (lo + hi);
            if margin(i, mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        budget = budget.max(0.5 * (lo + hi));
    }
    Ok(FullSamplingBudget {
        budget,
        reference_power: power_at_budget(budget)[k - 1],
        degenerate: false,
    })
}

/// Optimal allocation for budgets at or above the full-sampling threshold:
/// every class is fully sampled and the budget left after sensing is
/// water-filled over the powers.
pub fn solve_large_budget(instance: &JointInstance) -> Result<SolveReport> {
    let threshold = full_sampling_budget(instance)?;
    if instance.budget < threshold.budget {
        return Err(Error::BelowFullSamplingBudget {
            budget: instance.budget,
            threshold: threshold.budget,
        });
    }
    let (powers, _, _) = prefix_powers(instance, instance.budget - instance.full_sensing_energy())?;
    let alloc = JointAllocation {
        fractions: vec![1.0; instance.len()],
        powers,
    };
    report(instance, alloc, CaseTag::LargeBudget)
}

/// First way an allocation departs from the ordered-case shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "class")]
pub enum StructureViolation {
    /// `theta_{k+1} > theta_k` (this covers a sensed class after an unsensed one).
    Increasing(usize),
    /// `theta_{k+1} = theta_k < 1` on sensed classes.
    EqualBelowOne(usize),
    /// Power positive on an unsensed class or zero on a sensed one.
    PowerMismatch(usize),
}

impl std::fmt::Display for StructureViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Increasing(k) => write!(f, "fraction increases at class {}", k + 1),
            Self::EqualBelowOne(k) => {
                write!(f, "classes {} and {} share a fraction below 1", k, k + 1)
            }
            Self::PowerMismatch(k) => {
                write!(
                    f,
                    "class {} has power inconsistent with its fraction",
                    k + 1
                )
            }
        }
    }
}

/// Checks that fractions are non-increasing, strictly so below 1, that the
/// sensed classes form a prefix, and that exactly the sensed classes carry
/// power. Indices in the violation are 0-based.
pub fn structure_check(alloc: &JointAllocation) -> std::result::Result<(), StructureViolation> {
    let t = &alloc.fractions;
    for k in 1..t.len() {
        if t[k] > t[k - 1] + STRUCTURE_TOL {
            return Err(StructureViolation::Increasing(k));
        }
        if t[k] > 0.0 && (t[k] - t[k - 1]).abs() <= STRUCTURE_TOL && t[k - 1] < 1.0 - STRUCTURE_TOL
        {
            return Err(StructureViolation::EqualBelowOne(k));
        }
    }
    for (k, (&theta, &p)) in t.iter().zip(&alloc.powers).enumerate() {
        if (theta > 0.0) != (p > 0.0) {
            return Err(StructureViolation::PowerMismatch(k));
        }
    }
    Ok(())
}

/// Per-source derivative of `s h(theta, P)` in `theta`.
pub(crate) fn fraction_gradient(
    variance: f64,
    fraction: f64,
    power: f64,
    noise: f64,
    tau: f64,
) -> f64 {
    let log_snr = (power / noise).ln_1p();
    let e = 2.0 * tau / fraction * log_snr;
    variance * (-1.0 + (-e).exp() * (1.0 + e))
}

/// Marginal value `2 s / N (1 + P/N)^(-2 tau / theta - 1)` of power in a
/// sensed class; equals `beta` wherever the power is positive.
pub(crate) fn power_marginal(
    variance: f64,
    fraction: f64,
    power: f64,
    noise: f64,
    tau: f64,
) -> f64 {
    let log_snr = (power / noise).ln_1p();
    2.0 * variance / noise * (-(2.0 * tau / fraction + 1.0) * log_snr).exp()
}

/// Best per-unit-fraction Lagrangian change of an unsensed class when it
/// starts sensing with the ideal power per unit fraction.
pub(crate) fn exclusion_value(variance: f64, cost: f64, noise: f64, beta: f64) -> f64 {
    let knee = 2.0 * variance / (beta * noise);
    if knee > 1.0 {
        variance * (1.0 / knee - 1.0) + beta * cost + 0.5 * beta * noise * knee.ln()
    } else {
        beta * cost
    }
}

pub(crate) fn report(
    instance: &JointInstance,
    alloc: JointAllocation,
    case_tag: CaseTag,
) -> Result<SolveReport> {
    let objective = objective_joint(instance, &alloc)?;
    let cert = kkt_certificate_joint(instance, &alloc)?;
    Ok(SolveReport {
        per_class: per_class_joint(instance, &alloc),
        objective,
        rate_price: None,
        energy_price: Some(cert.energy_price),
        kkt_residual: cert.residual,
        case_tag,
        allocation: Allocation::Joint(alloc),
    })
}

/// Recovers the energy price from the lowest-index powered class and
/// measures every KKT violation; unsensed classes get the one-sided
/// exclusion test.
pub fn kkt_certificate_joint(
    instance: &JointInstance,
    alloc: &JointAllocation,
) -> Result<KktCertificate> {
    instance.validate()?;
    let feas = check_feasible_joint(instance, alloc)?;
    let classes = &instance.classes;
    let tau = instance.bandwidth_ratio;
    let t = &alloc.fractions;
    let p = &alloc.powers;
    let k = classes.len();
    let used = feas.constraint("budget").map_or(0.0, |c| c.used);
    let slack = instance.budget - used > FEASIBILITY_TOL;

    let mut log = ViolationLog::default();
    let mut mu = vec![0.0; k];
    let mut nu = vec![0.0; k];
    if instance.budget > 0.0 && t.iter().all(|&x| x <= 0.0) {
        log.push(Condition::NotCertifiable, None, f64::INFINITY);
        return Ok(log.finish(None, 0.0, mu, nu));
    }

    let beta = match (0..k).find(|&i| t[i] > 0.0 && p[i] > 0.0) {
        Some(i) => power_marginal(classes[i].variance, t[i], p[i], classes[i].noise(), tau),
        None if slack => 0.0,
        None => classes
            .iter()
            .map(|c| 2.0 * c.variance / c.noise())
            .fold(0.0, f64::max),
    };

    for (i, c) in classes.iter().enumerate() {
        let q = c.q();
        let n = c.noise();
        if t[i] <= 0.0 {
            let value = exclusion_value(c.variance, c.sensing_cost, n, beta);
            log.push(Condition::Exclusion, Some(i), -q * value);
            continue;
        }
        let grad = q * (fraction_gradient(c.variance, t[i], p[i], n, tau) + beta * c.sensing_cost);
        if t[i] >= 1.0 - UPPER_BOUND_TOL {
            mu[i] = -grad;
            log.push(Condition::DualFeasibility, Some(i), grad);
        } else {
            log.push(Condition::FractionStationarity, Some(i), grad.abs());
        }
        let resource = q * tau * (beta - power_marginal(c.variance, t[i], p[i], n, tau));
        if p[i] > 0.0 {
            log.push(Condition::ResourceStationarity, Some(i), resource.abs());
        } else {
            nu[i] = resource;
            log.push(Condition::DualFeasibility, Some(i), -resource);
        }
    }
    log.push(
        Condition::ComplementarySlackness,
        None,
        beta * (used - instance.budget).abs(),
    );
    log.push(Condition::PrimalFeasibility, None, feas.max_violation());
    Ok(log.finish(None, beta, mu, nu))
}

/// Result of [`capacity_waterfill`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityAllocation {
    pub powers: Vec<f64>,
    pub water_level: f64,
    /// `tau * sum q log2(1 + P/N)` in bits per source sample.
    pub rate: f64,
}

/// Classic water-filling of `sum q (lambda - N)^+ = power_budget` over
/// parallel Gaussian channels; turns a power budget into the rate budget of
/// the separate problem.
pub fn capacity_waterfill(
    noises: &[f64],
    counts: &[u32],
    bandwidth_ratio: f64,
    power_budget: f64,
) -> Result<CapacityAllocation> {
    if noises.len() != counts.len() {
        return Err(Error::DimensionMismatch {
            expected: noises.len(),
            found: counts.len(),
        });
    }
    if noises.is_empty() {
        return Err(Error::InvalidInput(
            "at least one channel is required".into(),
        ));
    }
    if let Some(n) = noises.iter().find(|n| !(n.is_finite() && **n > 0.0)) {
        return Err(Error::InvalidInput(format!(
            "channel noise must be positive, got {n}"
        )));
    }
    if counts.contains(&0) {
        return Err(Error::InvalidInput(
            "channel counts must be at least 1".into(),
        ));
    }
    if !(bandwidth_ratio.is_finite() && bandwidth_ratio > 0.0) {
        return Err(Error::InvalidInput(format!(
            "bandwidth ratio must be positive, got {bandwidth_ratio}"
        )));
    }
    if !(power_budget.is_finite() && power_budget >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "power budget must be non-negative, got {power_budget}"
        )));
    }
    let mut order: Vec<usize> = (0..noises.len()).collect();
    order.sort_by(|&a, &b| noises[a].total_cmp(&noises[b]));
    let mut mass = 0.0;
    let mut weight = 0.0;
    let mut level = noises[order[0]];
    for (pos, &i) in order.iter().enumerate() {
        let q = f64::from(counts[i]);
        mass += q * noises[i];
        weight += q;
        level = (power_budget + mass) / weight;
        match order.get(pos + 1) {
            Some(&next) if noises[next] < level => continue,
            _ => break,
        }
    }
    let powers: Vec<f64> = noises.iter().map(|&n| (level - n).max(0.0)).collect();
    let rate = bandwidth_ratio
        * noises
            .iter()
            .zip(counts)
            .zip(&powers)
            .map(|((&n, &q), &p)| f64::from(q) * (p / n).ln_1p() / std::f64::consts::LN_2)
            .sum::<f64>();
    Ok(CapacityAllocation {
        powers,
        water_level: level,
        rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cls(spec: &[(f64, f64, u32, f64)]) -> Vec<SourceClass> {
        spec.iter()
            .map(|&(s, e, q, n)| SourceClass::new(s, e, q).unwrap().with_noise(n).unwrap())
            .collect()
    }

    fn inst(spec: &[(f64, f64, u32, f64)], tau: f64, budget: f64) -> JointInstance {
        JointInstance::new(cls(spec), tau, budget).unwrap()
    }

    fn fig6(budget: f64) -> JointInstance {
        inst(&[(1.25, 1.0, 1, 4.0), (1.0, 1.0, 1, 4.0)], 1.0, budget)
    }

    fn joint(report: &SolveReport) -> &JointAllocation {
        match &report.allocation {
            Allocation::Joint(a) => a,
            Allocation::Separate(_) => panic!("expected a joint allocation"),
        }
    }

    /// Plain bisection on the scalar equation for a single unit class.
    fn scalar_root(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        assert!(f(lo) < 0.0 && f(hi) > 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn threshold_examples() {
        let b =
            budget_thresholds(&inst(&[(2.0, 0.0, 1, 1.0), (1.0, 0.0, 1, 1.0)], 1.0, 1.0)).unwrap();
        assert_relative_eq!(b[0], 2f64.cbrt() - 1.0, epsilon = 1e-15);
        assert_relative_eq!(b[0], 0.259921, epsilon = 1e-6);

        let b = budget_thresholds(&fig6(1.0)).unwrap();
        assert_relative_eq!(b[0], 4.0 * (1.25f64.cbrt() - 1.0), epsilon = 1e-15);
        assert_relative_eq!(b[0] + 2.0, 2.3, epsilon = 0.01);

        // The level vanishes as s_1 N_2 / (s_2 N_1) approaches 1.
        let b = budget_thresholds(&inst(
            &[(1.0 + 3e-9, 0.0, 1, 1.0), (1.0, 0.0, 1, 1.0)],
            1.0,
            1.0,
        ))
        .unwrap();
        assert_relative_eq!(b[0], 1e-9, max_relative = 1e-6);

        let unordered = inst(&[(2.0, 0.0, 1, 2.0), (1.0, 0.0, 1, 1.0)], 1.0, 1.0);
        assert!(matches!(
            budget_thresholds(&unordered),
            Err(Error::Ordering(_))
        ));
    }

    #[test]
    fn thresholds_are_nondecreasing() {
        let b = budget_thresholds(&inst(
            &[
                (5.0, 0.0, 2, 0.5),
                (3.0, 0.0, 1, 0.5),
                (1.0, 0.0, 3, 0.9),
                (0.5, 0.0, 1, 2.0),
            ],
            0.7,
            1.0,
        ))
        .unwrap();
        assert!(b[0] >= 0.0);
        assert!(b.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn waterfill_examples() {
        let c = cls(&[(2.0, 0.0, 1, 1.0), (1.0, 0.0, 1, 1.0)]);
        let low = waterfill_powers(&c, &[1.0, 1.0], 1.0, 0.2).unwrap();
        assert_relative_eq!(low.powers[0], 0.2, epsilon = 1e-12);
        assert_eq!(low.powers[1], 0.0);

        let two = waterfill_powers(&c, &[1.0, 1.0], 1.0, 2.0).unwrap();
        assert_relative_eq!(two.powers[0], 1.2301, epsilon = 1e-4);
        assert_relative_eq!(two.powers[1], 0.7700, epsilon = 1e-4);
        assert_relative_eq!(two.powers[0] + two.powers[1], 2.0, max_relative = 1e-12);

        let single = cls(&[(1.0, 0.0, 1, 1.0)]);
        let out = waterfill_powers(&single, &[1.0], 1.0, 3.0).unwrap();
        assert_relative_eq!(out.powers[0], 3.0, epsilon = 1e-12);

        let none = waterfill_powers(&c, &[0.0, 0.0], 1.0, 1.0).unwrap();
        assert!(none.unusable);
        assert_eq!(none.power_price, None);
    }

    #[test]
    fn waterfill_matches_closed_form_at_full_sampling() {
        let spec = [(5.0, 0.0, 2, 0.5), (3.0, 0.0, 1, 0.5), (1.0, 0.0, 3, 0.9)];
        for tau in [0.5, 1.0, 2.5] {
            for budget in [0.05, 0.8, 3.0, 20.0] {
                let instance = inst(&spec, tau, budget);
                let (closed, beta, _) = prefix_powers(&instance, budget).unwrap();
                let bisected = waterfill_powers(&instance.classes, &[1.0; 3], tau, budget).unwrap();
                for (a, b) in closed.iter().zip(&bisected.powers) {
                    assert_relative_eq!(*a, *b, epsilon = 1e-9, max_relative = 1e-9);
                }
                assert_relative_eq!(
                    beta.unwrap(),
                    bisected.power_price.unwrap(),
                    max_relative = 1e-9
                );
            }
        }
    }

    #[test]
    fn waterfill_handles_tiny_fractions() {
        let c = cls(&[(2.0, 0.0, 1, 1.0), (1.0, 0.0, 1, 1.0)]);
        let out = waterfill_powers(&c, &[1e-6, 1.0], 1.0, 2.0).unwrap();
        assert!(out.power_price.unwrap() > 0.0);
        assert_relative_eq!(out.powers.iter().sum::<f64>(), 2.0, max_relative = 1e-12);
        let m0 = power_marginal(2.0, 1e-6, out.powers[0], 1.0, 1.0);
        let m1 = power_marginal(1.0, 1.0, out.powers[1], 1.0, 1.0);
        if out.powers[0] > 0.0 && out.powers[1] > 0.0 {
            assert_relative_eq!(m0, m1, max_relative = 1e-6);
        }
    }

    #[test]
    fn zero_cost_examples() {
        let rep =
            solve_zero_cost(&inst(&[(2.0, 0.0, 1, 1.0), (1.0, 0.0, 1, 1.0)], 1.0, 2.0)).unwrap();
        let d: Vec<f64> = rep.per_class.iter().map(|c| c.total).collect();
        assert_relative_eq!(d[0] / d[1], 2f64.cbrt(), max_relative = 1e-12);
        assert_relative_eq!(d[0], 0.4022, epsilon = 1e-4);
        assert_relative_eq!(d[1], 0.3192, epsilon = 1e-4);
        assert_eq!(rep.case_tag, CaseTag::ZeroCost { powered: 2 });
        assert!(rep.kkt_residual <= 1e-9, "{}", rep.kkt_residual);

        let rep =
            solve_zero_cost(&inst(&[(2.0, 0.0, 1, 1.0), (1.0, 0.0, 1, 1.0)], 1.0, 0.2)).unwrap();
        let a = joint(&rep);
        assert_relative_eq!(a.powers[0], 0.2, epsilon = 1e-15);
        assert_eq!(a.powers[1], 0.0);
        assert_eq!(rep.per_class[1].total, 1.0);
        assert!(rep.kkt_residual <= 1e-9);

        // s N^(2 tau) constant: all distortions equal once everything is powered.
        let rep =
            solve_zero_cost(&inst(&[(4.0, 0.0, 1, 1.0), (1.0, 0.0, 2, 2.0)], 1.0, 5.0)).unwrap();
        assert_relative_eq!(
            rep.per_class[0].total,
            rep.per_class[1].total,
            max_relative = 1e-12
        );

        assert!(solve_zero_cost(&fig6(3.0)).is_err());
    }

    #[test]
    fn zero_cost_distortions_follow_the_price() {
        let spec = [(5.0, 0.0, 2, 0.5), (3.0, 0.0, 1, 0.6), (1.0, 0.0, 3, 0.9)];
        let tau = 0.8;
        let rep = solve_zero_cost(&inst(&spec, tau, 6.0)).unwrap();
        let beta = rep.energy_price.unwrap();
        let a = joint(&rep);
        for ((c, d), &p) in cls(&spec).iter().zip(&rep.per_class).zip(&a.powers) {
            if p > 0.0 {
                let want = (beta / 2.0).powf(2.0 * tau / (2.0 * tau + 1.0))
                    * (c.variance * c.noise().powf(2.0 * tau)).powf(1.0 / (2.0 * tau + 1.0));
                assert_relative_eq!(d.total, want, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn powered_prefix_follows_thresholds() {
        let spec = [(5.0, 0.0, 2, 0.5), (3.0, 0.0, 1, 0.6), (1.0, 0.0, 3, 0.9)];
        let levels = budget_thresholds(&inst(&spec, 1.0, 1.0)).unwrap();
        let bounds = [0.0, levels[0], levels[1], levels[1] * 3.0];
        for m in 1..=3 {
            let b = 0.5 * (bounds[m - 1] + bounds[m]);
            let rep = solve_zero_cost(&inst(&spec, 1.0, b)).unwrap();
            let powered = joint(&rep).powers.iter().filter(|&&p| p > 0.0).count();
            assert_eq!(powered, m, "budget {b}");
        }
    }

    #[test]
    fn full_sampling_budget_single_class() {
        let single = inst(&[(1.0, 1.0, 1, 1.0)], 1.0, 1.0);
        let out = full_sampling_budget(&single).unwrap();
        let oracle = scalar_root(
            |b| 1.0 - (1.0 + 2.0 * b.ln()) / (b * b) - 2.0 / (b * b * b),
            1.0,
            10.0,
        );
        assert_relative_eq!(out.budget, oracle, max_relative = 1e-9);
        assert_relative_eq!(out.budget, 1.815, epsilon = 1e-3);
        assert_relative_eq!(out.reference_power, out.budget - 1.0, max_relative = 1e-9);
        assert!(!out.degenerate);
    }

    #[test]
    fn full_sampling_budget_two_classes() {
        let instance = fig6(1.0);
        let out = full_sampling_budget(&instance).unwrap();
        let levels = budget_thresholds(&instance).unwrap();
        assert!(out.budget > levels[0] + 2.0);
        assert_relative_eq!(out.budget, 6.0, epsilon = 0.3);
    }

    #[test]
    fn full_sampling_budget_with_free_sensing_collapses() {
        let instance = inst(&[(2.0, 0.0, 1, 1.0), (1.0, 0.0, 1, 1.0)], 1.0, 1.0);
        let out = full_sampling_budget(&instance).unwrap();
        assert!(out.degenerate);
        assert_relative_eq!(out.budget, 2f64.cbrt() - 1.0, epsilon = 1e-15);
    }

    #[test]
    fn large_budget_examples() {
        let rep = solve_large_budget(&fig6(8.0)).unwrap();
        let a = joint(&rep);
        assert_eq!(a.fractions, vec![1.0, 1.0]);
        assert_relative_eq!(a.powers.iter().sum::<f64>(), 6.0, max_relative = 1e-12);
        assert!(rep.kkt_residual <= 1e-9);

        let single = inst(&[(1.0, 1.0, 1, 1.0)], 1.0, 3.0);
        let rep = solve_large_budget(&single).unwrap();
        assert_relative_eq!(joint(&rep).powers[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(rep.objective, 1.0 / 9.0, epsilon = 1e-12);

        assert!(matches!(
            solve_large_budget(&fig6(5.0)),
            Err(Error::BelowFullSamplingBudget { .. })
        ));
    }

    #[test]
    fn large_budget_at_threshold_has_zero_last_multiplier() {
        let b = full_sampling_budget(&fig6(1.0)).unwrap().budget;
        let instance = fig6(b);
        let rep = solve_large_budget(&instance).unwrap();
        let cert = kkt_certificate_joint(&instance, joint(&rep)).unwrap();
        assert!(
            cert.fraction_multipliers[1].abs() <= 1e-8,
            "{:?}",
            cert.fraction_multipliers
        );
        assert!(cert.residual <= 1e-9);
    }

    #[test]
    fn large_budget_matches_discounted_zero_cost() {
        let instance = fig6(9.0);
        let rep = solve_large_budget(&instance).unwrap();
        let mut free = instance.clone();
        free.classes.iter_mut().for_each(|c| c.sensing_cost = 0.0);
        free.budget = 7.0;
        let zero = solve_zero_cost(&free).unwrap();
        assert_eq!(joint(&rep), joint(&zero));
    }

    #[test]
    fn full_sampling_below_threshold_is_not_certified() {
        let b = full_sampling_budget(&fig6(1.0)).unwrap().budget;
        let instance = fig6(0.9 * b);
        let powers = waterfill_powers(&instance.classes, &[1.0, 1.0], 1.0, 0.9 * b - 2.0).unwrap();
        let alloc = JointAllocation {
            fractions: vec![1.0, 1.0],
            powers: powers.powers,
        };
        let cert = kkt_certificate_joint(&instance, &alloc).unwrap();
        assert!(cert.fraction_multipliers[1] < 0.0);
        assert!(cert.residual > 1e-4);
    }

    #[test]
    fn empty_sensed_set_is_not_certifiable() {
        let cert = kkt_certificate_joint(&fig6(1.0), &JointAllocation::zeros(2)).unwrap();
        assert!(cert.residual.is_infinite());
        assert_eq!(cert.worst().unwrap().condition, Condition::NotCertifiable);
        let cert = kkt_certificate_joint(&fig6(0.0), &JointAllocation::zeros(2)).unwrap();
        assert_eq!(cert.residual, 0.0);
    }

    #[test]
    fn structure_examples() {
        let ok = JointAllocation {
            fractions: vec![1.0, 0.4, 0.0],
            powers: vec![2.0, 1.0, 0.0],
        };
        assert_eq!(structure_check(&ok), Ok(()));
        let tied = JointAllocation {
            fractions: vec![0.4, 0.4, 0.0],
            powers: vec![1.0, 1.0, 0.0],
        };
        assert_eq!(
            structure_check(&tied),
            Err(StructureViolation::EqualBelowOne(1))
        );
        let rising = JointAllocation {
            fractions: vec![0.5, 1.0, 0.0],
            powers: vec![1.0, 1.0, 0.0],
        };
        assert_eq!(
            structure_check(&rising),
            Err(StructureViolation::Increasing(1))
        );
        let gap = JointAllocation {
            fractions: vec![1.0, 0.0, 0.3],
            powers: vec![1.0, 0.0, 1.0],
        };
        assert_eq!(
            structure_check(&gap),
            Err(StructureViolation::Increasing(2))
        );
        let unpowered = JointAllocation {
            fractions: vec![1.0, 0.5],
            powers: vec![1.0, 0.0],
        };
        assert_eq!(
            structure_check(&unpowered),
            Err(StructureViolation::PowerMismatch(1))
        );
    }

    #[test]
    fn capacity_examples() {
        let out = capacity_waterfill(&[1.0, 1.0], &[1, 1], 1.0, 2.0).unwrap();
        assert_eq!(out.powers, vec![1.0, 1.0]);
        assert_relative_eq!(out.rate, 2.0, epsilon = 1e-15);

        let out = capacity_waterfill(&[1.0, 4.0], &[1, 1], 1.0, 1.0).unwrap();
        assert_eq!(out.powers, vec![1.0, 0.0]);
        assert_relative_eq!(out.water_level, 2.0);
        assert_relative_eq!(out.rate, 1.0, epsilon = 1e-15);

        let out = capacity_waterfill(&[3.0, 1.0], &[2, 1], 0.5, 0.0).unwrap();
        assert_eq!(out.rate, 0.0);
    }
}
