//! Separate sensing-energy / rate budgets.
//!
//! For ordered instances (variances strictly descending, sensing costs
//! non-decreasing) the optimum is in closed form: sense a prefix of the
//! classes, at most the last one partially, and split the rate by a
//! fraction-scaled reverse water-filling that gives every rate-carrying class
//! the same distortion on its sampled part.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kkt::{Condition, KktCertificate, ViolationLog};
use crate::model::{
    check_feasible_separate, objective_separate, per_class_separate, CaseTag, SeparateAllocation,
    SeparateInstance, SolveReport, SourceClass, FEASIBILITY_TOL,
};

/// Fractions at least this close to 1 are treated as sitting on the upper bound.
pub(crate) const UPPER_BOUND_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparateThresholds {
    /// `e_m = sum_{i<=m} q_i eps_i` for `m = 1..K`.
    pub energy_levels: Vec<f64>,
    /// `r_l` for `l = 1..K-1`: the rate beyond which class `l+1` gets rate.
    pub rate_levels: Vec<f64>,
}

pub(crate) fn check_strictly_descending_variances(classes: &[SourceClass]) -> Result<()> {
    for (k, pair) in classes.windows(2).enumerate() {
        if pair[1].variance >= pair[0].variance {
            return Err(Error::Ordering(format!(
                "variances must be strictly descending, but class {} ({}) >= class {} ({}); \
                 merge equal-variance classes into one",
                k + 2,
                pair[1].variance,
                k + 1,
                pair[0].variance
            )));
        }
    }
    Ok(())
}

pub(crate) fn check_nondecreasing_costs(classes: &[SourceClass]) -> Result<()> {
    for (k, pair) in classes.windows(2).enumerate() {
        if pair[1].sensing_cost < pair[0].sensing_cost {
            return Err(Error::Ordering(format!(
                "sensing costs must be non-decreasing, but class {} ({}) < class {} ({})",
                k + 2,
                pair[1].sensing_cost,
                k + 1,
                pair[0].sensing_cost
            )));
        }
    }
    Ok(())
}

/// Checks the ordered-case precondition of [`solve_ordered`].
pub fn check_ordered_separate(classes: &[SourceClass]) -> Result<()> {
    check_strictly_descending_variances(classes)?;
    check_nondecreasing_costs(classes)
}

pub fn thresholds(instance: &SeparateInstance) -> Result<SeparateThresholds> {
    instance.validate()?;
    let classes = &instance.classes;
    check_strictly_descending_variances(classes)?;
    let energy_levels = classes
        .iter()
        .scan(0.0, |acc, c| {
            *acc += c.q() * c.sensing_cost;
            Some(*acc)
        })
        .collect();
    let rate_levels = (1..classes.len())
        .map(|l| {
            let next = classes[l].variance;
            0.5 * classes[..l]
                .iter()
                .map(|c| c.q() * (c.variance / next).log2())
                .sum::<f64>()
        })
        .collect();
    Ok(SeparateThresholds {
        energy_levels,
        rate_levels,
    })
}

/// Output of [`reverse_waterfill_rates`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateAllocation {
    pub rates: Vec<f64>,
    /// `alpha`; `None` when the rate budget is zero or cannot be used.
    pub rate_price: Option<f64>,
    /// Positive rate budget but nothing sensed to spend it on.
    pub unusable: bool,
}

/// Splits `total_rate` across the sensed classes so that every class with
/// positive rate reaches the same sampled-part distortion
/// `s_k 2^(-2 R_k / theta_k) = alpha / (2 ln 2)`.
///
/// Classes with fraction 0 receive no rate.
pub fn reverse_waterfill_rates(
    classes: &[SourceClass],
    fractions: &[f64],
    total_rate: f64,
) -> Result<RateAllocation> {
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
    if !(total_rate.is_finite() && total_rate >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "rate budget must be non-negative, got {total_rate}"
        )));
    }
    let mut rates = vec![0.0; classes.len()];
    let mut order: Vec<usize> = (0..classes.len()).filter(|&k| fractions[k] > 0.0).collect();
    if total_rate == 0.0 || order.is_empty() {
        return Ok(RateAllocation {
            rates,
            rate_price: None,
            unusable: total_rate > 0.0,
        });
    }
    order.sort_by(|&a, &b| classes[b].variance.total_cmp(&classes[a].variance));

    // Water level in log2 units: log2 of the common sampled-part distortion.
    // Adding classes in variance order, the level is a running weighted mean
    // and the active set ends at the first class whose variance sits below it.
    let mut weight = 0.0;
    let mut weighted_log = 0.0;
    let mut level = f64::NAN;
    let mut active = 0;
    for (pos, &k) in order.iter().enumerate() {
        let w = classes[k].q() * fractions[k];
        weight += w;
        weighted_log += w * classes[k].variance.log2();
        level = (weighted_log - 2.0 * total_rate) / weight;
        active = pos + 1;
        match order.get(pos + 1) {
            Some(&next) if classes[next].variance.log2() > level => continue,
            _ => break,
        }
    }
    for &k in &order[..active] {
        rates[k] = (0.5 * fractions[k] * (classes[k].variance.log2() - level)).max(0.0);
    }
    Ok(RateAllocation {
        rates,
        rate_price: Some(2.0 * LN_2 * level.exp2()),
        unusable: false,
    })
}

/// Per-source derivative of `s f(theta, R)` in `theta` at ratio `x = R/theta`.
pub(crate) fn fraction_gradient(variance: f64, ratio: f64) -> f64 {
    variance * (-1.0 + (-2.0 * ratio).exp2() * (1.0 + 2.0 * LN_2 * ratio))
}

/// Best per-unit-fraction Lagrangian change of an unsensed class, before the
/// energy term: `min_{x>=0} s (2^(-2x) - 1) + alpha x`.
pub(crate) fn exclusion_gain(variance: f64, alpha: f64) -> f64 {
    let knee = 2.0 * LN_2 * variance;
    if alpha >= knee {
        0.0
    } else if alpha <= 0.0 {
        -variance
    } else {
        let ratio = 0.5 * (knee / alpha).log2();
        variance * (alpha / knee - 1.0) + alpha * ratio
    }
}

/// Optimal allocation for an ordered instance.
///
/// With `E` in `(e_{m-1}, e_m]` and `R` in `(r_{l-1}, r_l]`: if `l < m` the
/// first `l` classes are fully sampled and share the rate by classic reverse
/// water-filling; otherwise the first `m-1` classes are fully sampled, class
/// `m` takes the remaining energy, and the rate is split by the fractional
/// variant. Zero budgets give the all-zero allocation.
pub fn solve_ordered(instance: &SeparateInstance) -> Result<SolveReport> {
    instance.validate()?;
    let classes = &instance.classes;
    check_ordered_separate(classes)?;
    let k = classes.len();
    let levels = thresholds(instance)?;
    let energy = instance.energy_budget;
    let rate = instance.rate_budget;

    let free_prefix = classes.iter().take_while(|c| c.sensing_cost == 0.0).count();
    if rate == 0.0 || (energy == 0.0 && free_prefix == 0) {
        return report(instance, SeparateAllocation::zeros(k), CaseTag::Degenerate);
    }

    let m = (1..k)
        .find(|&m| energy <= levels.energy_levels[m - 1])
        .unwrap_or(k)
        .max(free_prefix);
    let l = (1..k)
        .find(|&l| rate <= levels.rate_levels[l - 1])
        .unwrap_or(k);

    let mut alloc = SeparateAllocation::zeros(k);
    let tag = if l < m {
        alloc.fractions[..l].fill(1.0);
        let weight: f64 = classes[..l].iter().map(SourceClass::q).sum();
        for i in 0..l {
            let spread: f64 = classes[..l]
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, c)| c.q() * (classes[i].variance / c.variance).log2())
                .sum();
            alloc.rates[i] = ((rate + 0.5 * spread) / weight).max(0.0);
        }
        CaseTag::FullPrefix {
            sensed: l,
            energy_slack: energy - levels.energy_levels[l - 1] > FEASIBILITY_TOL,
        }
    } else {
        alloc.fractions[..m - 1].fill(1.0);
        let last = &classes[m - 1];
        let spent_before = if m >= 2 {
            levels.energy_levels[m - 2]
        } else {
            0.0
        };
        let last_cost = last.q() * last.sensing_cost;
        alloc.fractions[m - 1] = if last_cost == 0.0 {
            1.0
        } else {
            ((energy - spent_before) / last_cost).clamp(0.0, 1.0)
        };
        let weight: f64 = classes[..m]
            .iter()
            .zip(&alloc.fractions)
            .map(|(c, &t)| c.q() * t)
            .sum();
        for i in 0..m {
            let spread: f64 = classes[..m]
                .iter()
                .zip(&alloc.fractions)
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, (c, &t))| c.q() * t * (classes[i].variance / c.variance).log2())
                .sum();
            alloc.rates[i] = (alloc.fractions[i] / weight * (rate + 0.5 * spread)).max(0.0);
        }
        CaseTag::PartialLast { partial: m }
    };
    report(instance, alloc, tag)
}

/// Builds a report with objective, per-class distortions, and certificate.
pub(crate) fn report(
    instance: &SeparateInstance,
    alloc: SeparateAllocation,
    case_tag: CaseTag,
) -> Result<SolveReport> {
    let objective = objective_separate(instance, &alloc)?;
    let cert = kkt_certificate_separate(instance, &alloc)?;
    Ok(SolveReport {
        per_class: per_class_separate(instance, &alloc),
        objective,
        rate_price: cert.rate_price,
        energy_price: Some(cert.energy_price),
        kkt_residual: cert.residual,
        case_tag,
        allocation: crate::model::Allocation::Separate(alloc),
    })
}

/// Recovers multipliers for `alloc` and measures every KKT violation.
///
/// `alpha` comes from the lowest-index class with positive rate and `beta`
/// from the lowest-index class sampled strictly between 0 and 1 (with a
/// positive cost). When no class pins a multiplier, slack budgets force it to
/// zero and tight ones take the smallest value consistent with the sign
/// conditions.
pub fn kkt_certificate_separate(
    instance: &SeparateInstance,
    alloc: &SeparateAllocation,
) -> Result<KktCertificate> {
    instance.validate()?;
    let feas = check_feasible_separate(instance, alloc)?;
    let classes = &instance.classes;
    let thetas = &alloc.fractions;
    let rates = &alloc.rates;
    let k = classes.len();
    let sensed = |i: usize| thetas[i] > 0.0;
    let ratio = |i: usize| rates[i] / thetas[i];

    let rate_used = feas.constraint("rate").map_or(0.0, |c| c.used);
    let energy_used = feas.constraint("energy").map_or(0.0, |c| c.used);
    let rate_slack = instance.rate_budget - rate_used > FEASIBILITY_TOL;
    let energy_slack = instance.energy_budget - energy_used > FEASIBILITY_TOL;

    let alpha = match (0..k).find(|&i| sensed(i) && rates[i] > 0.0) {
        Some(i) => 2.0 * LN_2 * classes[i].variance * (-2.0 * ratio(i)).exp2(),
        None if rate_slack => 0.0,
        None => classes
            .iter()
            .map(|c| 2.0 * LN_2 * c.variance)
            .fold(0.0, f64::max),
    };

    let interior = (0..k)
        .find(|&i| sensed(i) && thetas[i] < 1.0 - UPPER_BOUND_TOL && classes[i].sensing_cost > 0.0);
    let beta = match interior {
        Some(i) => -fraction_gradient(classes[i].variance, ratio(i)) / classes[i].sensing_cost,
        None if energy_slack => 0.0,
        None => (0..k)
            .filter(|&i| !sensed(i) && classes[i].sensing_cost > 0.0)
            .map(|i| -exclusion_gain(classes[i].variance, alpha) / classes[i].sensing_cost)
            .fold(0.0, f64::max),
    };

    let mut log = ViolationLog::default();
    let mut mu = vec![0.0; k];
    let mut nu = vec![0.0; k];
    for (i, c) in classes.iter().enumerate() {
        let q = c.q();
        if !sensed(i) {
            let gain = exclusion_gain(c.variance, alpha) + beta * c.sensing_cost;
            log.push(Condition::Exclusion, Some(i), -q * gain);
            continue;
        }
        let grad = q * (fraction_gradient(c.variance, ratio(i)) + beta * c.sensing_cost);
        if thetas[i] >= 1.0 - UPPER_BOUND_TOL {
            mu[i] = -grad;
            log.push(Condition::DualFeasibility, Some(i), grad);
        } else {
            log.push(Condition::FractionStationarity, Some(i), grad.abs());
        }
        let resource = q * (alpha - 2.0 * LN_2 * c.variance * (-2.0 * ratio(i)).exp2());
        if rates[i] > 0.0 {
            log.push(Condition::ResourceStationarity, Some(i), resource.abs());
        } else {
            nu[i] = resource;
            log.push(Condition::DualFeasibility, Some(i), -resource);
        }
    }
    log.push(
        Condition::ComplementarySlackness,
        None,
        alpha * (rate_used - instance.rate_budget).abs(),
    );
    log.push(
        Condition::ComplementarySlackness,
        None,
        beta * (energy_used - instance.energy_budget).abs(),
    );
    log.push(Condition::PrimalFeasibility, None, feas.max_violation());
    Ok(log.finish(Some(alpha), beta, mu, nu))
}
