//! Numerical solver for instances without a closed form.
//!
//! Rates (or powers) are eliminated exactly for fixed fractions, which leaves
//! a convex, smooth problem in the fractions over `delta <= theta <= 1` and a
//! single linear energy constraint. That problem is solved by projected
//! gradient descent with Armijo backtracking. The gradient comes from the
//! envelope theorem, so it needs only the inner multiplier.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::joint::{self, waterfill_powers};
use crate::model::{
    CaseTag, JointAllocation, JointInstance, SeparateAllocation, SeparateInstance, SolveReport,
};
use crate::separate::{self, reverse_waterfill_rates};

const ARMIJO: f64 = 1e-4;
const SHRINK: f64 = 0.5;
const MIN_STEP: f64 = 1e-20;
const MIN_BB: f64 = 1e-12;
const MAX_BB: f64 = 1e12;
const STATIONARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Lower bound on every fraction while iterating.
    pub delta: f64,
    /// Stop once the relative objective decrease falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Unused by the single-start solver; kept so configs stay stable.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            delta: 1e-6,
            tolerance: 1e-10,
            max_iterations: 100_000,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidInput(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::InvalidInput(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidInput(
                "max_iterations must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Euclidean projection onto `{lower <= x <= upper, costs . x <= budget}`.
///
/// The multiplier of the linear constraint is bisected with box clipping;
/// the free set at the bracketed multiplier then gives it in closed form.
pub fn project_box_halfspace(
    point: &[f64],
    costs: &[f64],
    budget: f64,
    lower: &[f64],
    upper: &[f64],
) -> Result<Vec<f64>> {
    let n = point.len();
    for len in [costs.len(), lower.len(), upper.len()] {
        if len != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: len,
            });
        }
    }
    if lower
        .iter()
        .zip(upper)
        .any(|(l, u)| l.partial_cmp(u).map_or(true, |o| o.is_gt()))
    {
        return Err(Error::Infeasible("lower bound above upper bound".into()));
    }
    let floor: f64 = costs
        .iter()
        .zip(lower.iter().zip(upper))
        .map(|(&c, (&l, &u))| if c > 0.0 { c * l } else { c * u })
        .sum();
    if floor > budget + 1e-12 * budget.abs().max(1.0) {
        return Err(Error::Infeasible(format!(
            "the cheapest point in the box costs {floor}, above the budget {budget}"
        )));
    }

    let at = |nu: f64| -> Vec<f64> {
        (0..n)
            .map(|k| (point[k] - nu * costs[k]).clamp(lower[k], upper[k]))
            .collect()
    };
    let spend = |x: &[f64]| -> f64 { x.iter().zip(costs).map(|(x, c)| x * c).sum() };

    let clipped = at(0.0);
    if spend(&clipped) <= budget {
        return Ok(clipped);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while spend(&at(hi)) > budget {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Infeasible("projection multiplier diverged".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if spend(&at(mid)) > budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    // Exact multiplier on the free set identified by the bracket.
    let trial = at(hi);
    let free: Vec<usize> = (0..n)
        .filter(|&k| costs[k] != 0.0 && trial[k] > lower[k] && trial[k] < upper[k])
        .collect();
    let norm: f64 = free.iter().map(|&k| costs[k] * costs[k]).sum();
    if norm > 0.0 {
        let fixed: f64 = (0..n)
            .filter(|k| !free.contains(k))
            .map(|k| costs[k] * trial[k])
            .sum();
        let reach: f64 = free.iter().map(|&k| costs[k] * point[k]).sum();
        let nu = (reach + fixed - budget) / norm;
        let exact = at(nu);
        let same_set = (0..n).all(|k| {
            let inside = costs[k] != 0.0 && exact[k] > lower[k] && exact[k] < upper[k];
            inside == free.contains(&k)
        });
        if same_set && spend(&exact) <= budget + 1e-12 * budget.abs().max(1.0) {
            return Ok(exact);
        }
    }
    Ok(trial)
}

/// One evaluation of the reduced problem.
struct Reduced {
    value: f64,
    gradient: Vec<f64>,
}

struct Outcome {
    fractions: Vec<f64>,
    iterations: usize,
}

/// Projected gradient with Armijo backtracking; the objective never
/// increases between accepted iterates. Trial steps start from the
/// Barzilai-Borwein length of the previous move.
fn descend(
    start: Vec<f64>,
    project: impl Fn(&[f64]) -> Result<Vec<f64>>,
    eval: impl Fn(&[f64]) -> Result<Reduced>,
    config: &SolverConfig,
) -> Result<Outcome> {
    let mut theta = project(&start)?;
    let mut current = eval(&theta)?;
    let mut iterations = 0;
    let mut trial_step = 1.0;
    while iterations < config.max_iterations {
        iterations += 1;
        let mut step = trial_step;
        let accepted = loop {
            let trial: Vec<f64> = theta
                .iter()
                .zip(&current.gradient)
                .map(|(t, g)| t - step * g)
                .collect();
            let cand = project(&trial)?;
            let decrease: f64 = cand
                .iter()
                .zip(&theta)
                .zip(&current.gradient)
                .map(|((c, t), g)| g * (c - t))
                .sum();
            if cand == theta || decrease >= 0.0 {
                break None;
            }
            let next = eval(&cand)?;
            if next.value <= current.value + ARMIJO * decrease {
                break Some((cand, next));
            }
            step *= SHRINK;
            if step < MIN_STEP {
                break None;
            }
        };
        let Some((cand, next)) = accepted else { break };
        assert!(
            next.value <= current.value,
            "line search accepted an increase: {} -> {}",
            current.value,
            next.value
        );
        let (mut ss, mut sy) = (0.0, 0.0);
        for i in 0..theta.len() {
            let s = cand[i] - theta[i];
            ss += s * s;
            sy += s * (next.gradient[i] - current.gradient[i]);
        }
        trial_step = if sy > 0.0 {
            (ss / sy).clamp(MIN_BB, MAX_BB)
        } else {
            MAX_BB
        };
        let change = (current.value - next.value) / current.value.abs().max(f64::MIN_POSITIVE);
        theta = cand;
        current = next;
        if change < config.tolerance && stationary(&theta, &current.gradient, &project)? {
            break;
        }
    }
    Ok(Outcome {
        fractions: theta,
        iterations,
    })
}

/// Unit-step projected gradient is (numerically) zero.
fn stationary(
    theta: &[f64],
    gradient: &[f64],
    project: &impl Fn(&[f64]) -> Result<Vec<f64>>,
) -> Result<bool> {
    let trial: Vec<f64> = theta.iter().zip(gradient).map(|(t, g)| t - g).collect();
    let moved = project(&trial)?
        .iter()
        .zip(theta)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(moved <= STATIONARY_TOL)
}

/// Descends inside the box and energy halfspace, snaps fractions at most
/// `2 delta` to zero, and re-optimizes with the snapped classes pinned so the
/// freed energy is spent.
fn descend_snapped(
    costs: &[f64],
    budget: f64,
    lower: &[f64],
    upper: &[f64],
    delta: f64,
    eval: impl Fn(&[f64]) -> Result<Reduced>,
    config: &SolverConfig,
) -> Result<Outcome> {
    let project = |x: &[f64]| project_box_halfspace(x, costs, budget, lower, upper);
    let mut outcome = descend(upper.to_vec(), project, &eval, config)?;
    let snapped: Vec<bool> = outcome
        .fractions
        .iter()
        .map(|&t| t <= 2.0 * delta)
        .collect();
    if !snapped.iter().any(|&s| s) {
        return Ok(outcome);
    }
    let pin = |bounds: &[f64]| -> Vec<f64> {
        bounds
            .iter()
            .zip(&snapped)
            .map(|(&b, &s)| if s { 0.0 } else { b })
            .collect()
    };
    let (lower, upper) = (pin(lower), pin(upper));
    let project = |x: &[f64]| project_box_halfspace(x, costs, budget, &lower, &upper);
    let start = pin(&outcome.fractions);
    let polished = descend(start, project, &eval, config)?;
    outcome.fractions = polished.fractions;
    outcome.iterations += polished.iterations;
    Ok(outcome)
}

/// Solves the separate problem for any class order.
pub fn solve_separate_general(
    instance: &SeparateInstance,
    config: &SolverConfig,
) -> Result<SolveReport> {
    instance.validate()?;
    config.validate()?;
    let classes = &instance.classes;
    let k = classes.len();
    if instance.rate_budget == 0.0 {
        return separate::report(instance, SeparateAllocation::zeros(k), CaseTag::Degenerate);
    }
    let costs: Vec<f64> = classes.iter().map(|c| c.q() * c.sensing_cost).collect();
    let sensing = instance.full_sensing_energy();
    let mut delta = config.delta;
    if delta * sensing > instance.energy_budget {
        delta = instance.energy_budget / sensing * 0.5;
    }
    let delta_shrunk = delta < config.delta;
    let lower = vec![delta; k];
    let upper = vec![1.0; k];
    let eval = |theta: &[f64]| -> Result<Reduced> {
        let rates = reverse_waterfill_rates(classes, theta, instance.rate_budget)?.rates;
        let mut value = 0.0;
        let mut gradient = vec![0.0; k];
        for (i, c) in classes.iter().enumerate() {
            let t = theta[i];
            value += c.q() * c.variance * crate::model::distortion_factor_separate(t, rates[i]);
            if t > 0.0 {
                gradient[i] = c.q() * separate::fraction_gradient(c.variance, rates[i] / t);
            }
        }
        Ok(Reduced { value, gradient })
    };
    let outcome = descend_snapped(
        &costs,
        instance.energy_budget,
        &lower,
        &upper,
        delta,
        eval,
        config,
    )?;
    let fractions = outcome.fractions;
    let rates = reverse_waterfill_rates(classes, &fractions, instance.rate_budget)?.rates;
    separate::report(
        instance,
        SeparateAllocation { fractions, rates },
        CaseTag::General {
            iterations: outcome.iterations,
            delta_shrunk,
        },
    )
}

/// Solves the joint problem for any class order.
///
/// When the budget cannot even cover `delta`-sampling of every class, the
/// longest prefix of classes that it can cover is optimized and the rest are
/// left unsensed; the case tag then reports `delta_shrunk`.
pub fn solve_joint_general(instance: &JointInstance, config: &SolverConfig) -> Result<SolveReport> {
    instance.validate()?;
    config.validate()?;
    let classes = &instance.classes;
    let k = classes.len();
    let tau = instance.bandwidth_ratio;
    let budget = instance.budget;
    if budget == 0.0 {
        return joint::report(instance, JointAllocation::zeros(k), CaseTag::Degenerate);
    }
    let costs: Vec<f64> = classes.iter().map(|c| c.q() * c.sensing_cost).collect();
    let delta = config.delta;
    let mut covered = 0;
    let mut floor = 0.0;
    for &c in &costs {
        if floor + delta * c >= budget {
            break;
        }
        floor += delta * c;
        covered += 1;
    }
    let restricted = covered < k;
    let lower: Vec<f64> = (0..k)
        .map(|i| if i < covered { delta } else { 0.0 })
        .collect();
    let upper: Vec<f64> = (0..k)
        .map(|i| if i < covered { 1.0 } else { 0.0 })
        .collect();
    let inner = |theta: &[f64]| -> Result<Vec<f64>> {
        let spent: f64 = theta.iter().zip(&costs).map(|(t, c)| t * c).sum();
        Ok(waterfill_powers(classes, theta, tau, (budget - spent).max(0.0))?.powers)
    };
    let eval = |theta: &[f64]| -> Result<Reduced> {
        let powers = inner(theta)?;
        let beta = (0..k)
            .find(|&i| theta[i] > 0.0 && powers[i] > 0.0)
            .map(|i| {
                joint::power_marginal(
                    classes[i].variance,
                    theta[i],
                    powers[i],
                    classes[i].noise(),
                    tau,
                )
            })
            .unwrap_or_else(|| {
                (0..k)
                    .filter(|&i| theta[i] > 0.0)
                    .map(|i| 2.0 * classes[i].variance / classes[i].noise())
                    .fold(0.0, f64::max)
            });
        let mut value = 0.0;
        let mut gradient = vec![0.0; k];
        for (i, c) in classes.iter().enumerate() {
            let t = theta[i];
            value += c.q()
                * c.variance
                * crate::model::distortion_factor_joint(t, powers[i], c.noise(), tau);
            if t > 0.0 {
                gradient[i] = c.q()
                    * (joint::fraction_gradient(c.variance, t, powers[i], c.noise(), tau)
                        + beta * c.sensing_cost);
            }
        }
        Ok(Reduced { value, gradient })
    };
    let outcome = descend_snapped(&costs, budget, &lower, &upper, delta, eval, config)?;
    let fractions = outcome.fractions;
    let powers = inner(&fractions)?;
    joint::report(
        instance,
        JointAllocation { fractions, powers },
        CaseTag::General {
            iterations: outcome.iterations,
            delta_shrunk: restricted,
        },
    )
}
