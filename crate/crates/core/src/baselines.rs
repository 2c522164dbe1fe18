//! Heuristic allocations for the separate problem, used as comparison points.

use crate::error::Result;
use crate::model::{CaseTag, SeparateAllocation, SeparateInstance, SolveReport};
use crate::separate::{self, reverse_waterfill_rates};

/// Lower Cost First: fully sample classes in order of increasing sensing
/// cost (ties go to the larger variance) until the energy runs out, sampling
/// the last one partially, then split the rate by fractional reverse
/// water-filling.
pub fn solve_lcf(instance: &SeparateInstance) -> Result<SolveReport> {
    instance.validate()?;
    let classes = &instance.classes;
    let mut order: Vec<usize> = (0..classes.len()).collect();
    order.sort_by(|&a, &b| {
        classes[a]
            .sensing_cost
            .total_cmp(&classes[b].sensing_cost)
            .then(classes[b].variance.total_cmp(&classes[a].variance))
    });
    let mut fractions = vec![0.0; classes.len()];
    let mut remaining = instance.energy_budget;
    for k in order {
        let cost = classes[k].q() * classes[k].sensing_cost;
        if cost <= remaining {
            fractions[k] = 1.0;
            remaining -= cost;
        } else {
            fractions[k] = remaining / cost;
            break;
        }
    }
    let rates = reverse_waterfill_rates(classes, &fractions, instance.rate_budget)?.rates;
    separate::report(
        instance,
        SeparateAllocation { fractions, rates },
        CaseTag::LowerCostFirst,
    )
}

/// Equal Sampling Fraction: pick the classes that classic reverse
/// water-filling would give positive rate while ignoring energy, sample all
/// of them at one common fraction that the energy affords (capped at 1), and
/// split the rate by fractional reverse water-filling. Leftover energy is not
/// spent.
pub fn solve_esf(instance: &SeparateInstance) -> Result<SolveReport> {
    instance.validate()?;
    let classes = &instance.classes;
    let k = classes.len();
    let classic = reverse_waterfill_rates(classes, &vec![1.0; k], instance.rate_budget)?;
    let selected: Vec<usize> = (0..k).filter(|&i| classic.rates[i] > 0.0).collect();
    let cost: f64 = selected
        .iter()
        .map(|&i| classes[i].q() * classes[i].sensing_cost)
        .sum();
    let common = if cost > 0.0 {
        (instance.energy_budget / cost).min(1.0)
    } else {
        1.0
    };
    let mut fractions = vec![0.0; k];
    for &i in &selected {
        fractions[i] = common;
    }
    let rates = reverse_waterfill_rates(classes, &fractions, instance.rate_budget)?.rates;
    separate::report(
        instance,
        SeparateAllocation { fractions, rates },
        CaseTag::EqualSamplingFraction,
    )
}
