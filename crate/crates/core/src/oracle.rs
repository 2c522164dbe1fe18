//! Brute-force reference optima and convexity probes.
//!
//! Everything here evaluates candidates through the `model` functions only,
//! so it can check the closed forms and the solver without sharing their
//! reasoning.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    distortion_factor_joint, distortion_factor_separate, objective_joint, objective_separate,
    JointAllocation, JointInstance, SeparateAllocation, SeparateInstance,
};

/// Hard cap on objective evaluations per search.
pub const MAX_GRID_EVALUATIONS: f64 = 1e9;

pub const MAX_GRID_CLASSES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Points per fraction axis, endpoints included.
    pub fraction_resolution: usize,
    /// Points per coordinate of the resource-share simplex.
    pub allocation_resolution: usize,
}

impl GridSpec {
    pub fn uniform(resolution: usize) -> Self {
        Self {
            fraction_resolution: resolution,
            allocation_resolution: resolution,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.fraction_resolution < 11 || self.allocation_resolution < 11 {
            return Err(Error::InvalidInput(format!(
                "grid resolutions must be at least 11, got {} and {}",
                self.fraction_resolution, self.allocation_resolution
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOptimum<A> {
    pub allocation: A,
    pub objective: f64,
    pub evaluations: u64,
}

fn check_class_count(k: usize) -> Result<()> {
    if k > MAX_GRID_CLASSES {
        return Err(Error::InvalidInput(format!(
            "grid search handles at most {MAX_GRID_CLASSES} classes, got {k}"
        )));
    }
    Ok(())
}

/// Number of ways to write `steps` as an ordered sum of `parts` non-negative
/// integers.
fn compositions(steps: usize, parts: usize) -> f64 {
    (1..parts).fold(1.0, |acc, i| acc * (steps + i) as f64 / i as f64)
}

fn guard(points: f64) -> Result<()> {
    if points > MAX_GRID_EVALUATIONS {
        return Err(Error::GridTooLarge {
            points,
            limit: MAX_GRID_EVALUATIONS,
        });
    }
    Ok(())
}

fn grid_points(resolution: usize) -> Vec<f64> {
    let last = (resolution - 1) as f64;
    (0..resolution).map(|i| i as f64 / last).collect()
}

/// Fraction candidates for one class given the energy still available: the
/// affordable grid points, plus the fraction that spends exactly the rest.
fn fraction_candidates(grid: &[f64], cost: f64, remaining: f64) -> Vec<f64> {
    if cost == 0.0 {
        return grid.to_vec();
    }
    let mut out: Vec<f64> = grid
        .iter()
        .copied()
        .filter(|&t| t * cost <= remaining)
        .collect();
    let exhaust = remaining / cost;
    if exhaust < 1.0 && !out.contains(&exhaust) {
        out.push(exhaust);
    }
    out
}

/// The largest affordable fraction; sampling more never hurts at fixed rate.
fn largest_fraction(cost: f64, remaining: f64) -> f64 {
    if cost == 0.0 {
        1.0
    } else {
        (remaining / cost).clamp(0.0, 1.0)
    }
}

/// `min_{j_1 + .. + j_K = steps} sum_k tables[k][j_k]` with the argmin.
fn min_plus(tables: &[Vec<f64>], steps: usize) -> (f64, Vec<usize>) {
    match tables.len() {
        1 => (tables[0][steps], vec![steps]),
        2 => {
            let mut best = (f64::INFINITY, vec![0, 0]);
            for j in 0..=steps {
                let v = tables[0][j] + tables[1][steps - j];
                if v < best.0 {
                    best = (v, vec![j, steps - j]);
                }
            }
            best
        }
        _ => {
            let last: Vec<f64> = tables[2].iter().rev().copied().collect();
            let mut best = (f64::INFINITY, vec![0, 0, 0]);
            for j1 in 0..=steps {
                let head = tables[0][j1];
                let span = steps - j1;
                // tables[2][steps - j1 - j2] == last[j1 + j2]
                let (mut inner, mut arg) = (f64::INFINITY, 0);
                for (j2, (a, b)) in tables[1][..=span].iter().zip(&last[j1..]).enumerate() {
                    let v = a + b;
                    if v < inner {
                        inner = v;
                        arg = j2;
                    }
                }
                if head + inner < best.0 {
                    best = (head + inner, vec![j1, arg, span - arg]);
                }
            }
            best
        }
    }
}

/// Exhaustive search of the separate problem: fractions on a grid (plus the
/// energy-exhausting value on each axis, and the largest affordable value on
/// the last), rates on the simplex of shares that use the whole rate budget.
pub fn grid_search_separate(
    instance: &SeparateInstance,
    grid: GridSpec,
) -> Result<GridOptimum<SeparateAllocation>> {
    instance.validate()?;
    grid.validate()?;
    let classes = &instance.classes;
    let k = classes.len();
    check_class_count(k)?;
    let steps = grid.allocation_resolution - 1;
    let fraction_axes = (grid.fraction_resolution + 1) as f64;
    guard(fraction_axes.powi(k as i32 - 1) * compositions(steps, k))?;

    let thetas = grid_points(grid.fraction_resolution);
    let costs: Vec<f64> = classes.iter().map(|c| c.q() * c.sensing_cost).collect();
    let table = |i: usize, theta: f64| -> Vec<f64> {
        let c = &classes[i];
        (0..=steps)
            .map(|j| {
                let rate = j as f64 / steps as f64 * instance.rate_budget / c.q();
                c.q() * c.variance * distortion_factor_separate(theta, rate)
            })
            .collect()
    };

    let mut best: Option<(f64, Vec<f64>, Vec<usize>)> = None;
    let mut evaluations = 0u64;
    let mut visit = |fractions: Vec<f64>| {
        let tables: Vec<Vec<f64>> = (0..k).map(|i| table(i, fractions[i])).collect();
        let (value, shares) = min_plus(&tables, steps);
        evaluations += compositions(steps, k) as u64;
        if best.as_ref().map_or(true, |b| value < b.0) {
            best = Some((value, fractions, shares));
        }
    };

    let energy = instance.energy_budget;
    match k {
        1 => visit(vec![largest_fraction(costs[0], energy)]),
        2 => {
            for t1 in fraction_candidates(&thetas, costs[0], energy) {
                let left = energy - t1 * costs[0];
                visit(vec![t1, largest_fraction(costs[1], left)]);
            }
        }
        _ => {
            for t1 in fraction_candidates(&thetas, costs[0], energy) {
                let left1 = energy - t1 * costs[0];
                for t2 in fraction_candidates(&thetas, costs[1], left1) {
                    let left2 = left1 - t2 * costs[1];
                    visit(vec![t1, t2, largest_fraction(costs[2], left2)]);
                }
            }
        }
    }

    let (_, fractions, shares) = best.expect("at least one grid point");
    let rates = shares
        .iter()
        .zip(classes)
        .map(|(&j, c)| j as f64 / steps as f64 * instance.rate_budget / c.q())
        .collect();
    let allocation = SeparateAllocation { fractions, rates };
    let objective = objective_separate(instance, &allocation)?;
    Ok(GridOptimum {
        allocation,
        objective,
        evaluations,
    })
}

/// Exhaustive search of the joint problem: fractions on a grid, powers on the
/// simplex of shares of whatever budget sensing leaves over.
pub fn grid_search_joint(
    instance: &JointInstance,
    grid: GridSpec,
) -> Result<GridOptimum<JointAllocation>> {
    instance.validate()?;
    grid.validate()?;
    let classes = &instance.classes;
    let k = classes.len();
    check_class_count(k)?;
    let steps = grid.allocation_resolution - 1;
    let fraction_axes = grid.fraction_resolution as f64;
    guard(fraction_axes.powi(k as i32) * compositions(steps, k))?;

    let tau = instance.bandwidth_ratio;
    let thetas = grid_points(grid.fraction_resolution);
    let costs: Vec<f64> = classes.iter().map(|c| c.q() * c.sensing_cost).collect();

    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    let mut evaluations = 0u64;
    let mut index = vec![0usize; k];
    'outer: loop {
        let fractions: Vec<f64> = index.iter().map(|&i| thetas[i]).collect();
        let spent: f64 = fractions.iter().zip(&costs).map(|(t, c)| t * c).sum();
        if spent <= instance.budget {
            let residual = (instance.budget - spent) / tau;
            let tables: Vec<Vec<f64>> = classes
                .iter()
                .zip(&fractions)
                .map(|(c, &t)| {
                    (0..=steps)
                        .map(|j| {
                            let power = j as f64 / steps as f64 * residual / c.q();
                            c.q() * c.variance * distortion_factor_joint(t, power, c.noise(), tau)
                        })
                        .collect()
                })
                .collect();
            let (value, shares) = min_plus(&tables, steps);
            evaluations += compositions(steps, k) as u64;
            if best.as_ref().map_or(true, |b| value < b.0) {
                let powers = shares
                    .iter()
                    .zip(classes)
                    .map(|(&j, c)| j as f64 / steps as f64 * residual / c.q())
                    .collect();
                best = Some((value, fractions, powers));
            }
        }
        for slot in index.iter_mut() {
            *slot += 1;
            if *slot < thetas.len() {
                continue 'outer;
            }
            *slot = 0;
        }
        break;
    }

    let (_, fractions, powers) = best.expect("the all-zero point is always affordable");
    let allocation = JointAllocation { fractions, powers };
    let objective = objective_joint(instance, &allocation)?;
    Ok(GridOptimum {
        allocation,
        objective,
        evaluations,
    })
}

/// Moves a separate allocation onto the rate-share lattice of `grid`
/// (largest-remainder rounding), keeping fractions and the total rate.
/// The objective there bounds how far the grid optimum can sit above the
/// true one when the fractions are already grid candidates.
pub fn round_rates_to_grid(
    instance: &SeparateInstance,
    alloc: &SeparateAllocation,
    grid: GridSpec,
) -> Result<SeparateAllocation> {
    instance.validate()?;
    grid.validate()?;
    let steps = grid.allocation_resolution - 1;
    let total = instance.rate_budget;
    let classes = &instance.classes;
    if alloc.rates.len() != classes.len() {
        return Err(Error::DimensionMismatch {
            expected: classes.len(),
            found: alloc.rates.len(),
        });
    }
    let exact: Vec<f64> = if total > 0.0 {
        alloc
            .rates
            .iter()
            .zip(classes)
            .map(|(r, c)| r * c.q() / total * steps as f64)
            .collect()
    } else {
        vec![0.0; classes.len()]
    };
    let mut units: Vec<usize> = exact.iter().map(|x| x.floor().max(0.0) as usize).collect();
    // The floors fall short of `steps` by fewer units than there are classes.
    let spare = steps.saturating_sub(units.iter().sum());
    let mut order: Vec<usize> = (0..units.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())));
    for &i in order.iter().take(spare) {
        units[i] += 1;
    }
    Ok(SeparateAllocation {
        fractions: alloc.fractions.clone(),
        rates: units
            .iter()
            .zip(classes)
            .map(|(&u, c)| u as f64 / steps as f64 * total / c.q())
            .collect(),
    })
}

/// Which objective [`midpoint_convexity_probe`] samples.
#[derive(Debug, Clone, Copy)]
pub enum ProbeTarget<'a> {
    Separate(&'a SeparateInstance),
    Joint(&'a JointInstance),
}

/// Random point on the simplex scaled by `total`, one share per class.
fn random_split(rng: &mut ChaCha8Rng, k: usize, total: f64) -> Vec<f64> {
    let draws: Vec<f64> = (0..k).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let sum: f64 = draws.iter().sum();
    draws.iter().map(|d| d / sum * total).collect()
}

/// Random fractions within the energy budget; some classes are left unsensed
/// so the boundary is exercised too.
fn random_fractions(rng: &mut ChaCha8Rng, costs: &[f64], budget: f64) -> Vec<f64> {
    let mut t: Vec<f64> = costs
        .iter()
        .map(|_| if rng.gen_bool(0.15) { 0.0 } else { rng.gen() })
        .collect();
    let spent: f64 = t.iter().zip(costs).map(|(t, c)| t * c).sum();
    if spent > budget {
        let scale = budget / spent * rng.gen::<f64>();
        t.iter_mut().for_each(|x| *x *= scale);
    }
    t
}

/// Largest value of `D((x+y)/2) - (D(x)+D(y))/2` over `samples` random
/// feasible pairs. Convexity means the result is at most rounding noise.
pub fn midpoint_convexity_probe(target: ProbeTarget<'_>, samples: usize, seed: u64) -> Result<f64> {
    if samples == 0 {
        return Err(Error::InvalidInput(
            "sample count must be at least 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    match target {
        ProbeTarget::Separate(inst) => {
            inst.validate()?;
            let costs: Vec<f64> = inst
                .classes
                .iter()
                .map(|c| c.q() * c.sensing_cost)
                .collect();
            let draw = |rng: &mut ChaCha8Rng| -> SeparateAllocation {
                let fractions = random_fractions(rng, &costs, inst.energy_budget);
                let used = inst.rate_budget * rng.gen::<f64>();
                let rates = random_split(rng, costs.len(), used)
                    .iter()
                    .zip(&inst.classes)
                    .zip(&fractions)
                    .map(|((r, c), &t)| if t > 0.0 { r / c.q() } else { 0.0 })
                    .collect();
                SeparateAllocation { fractions, rates }
            };
            for _ in 0..samples {
                let x = draw(&mut rng);
                let y = draw(&mut rng);
                worst = worst.max(midpoint_gap_separate(inst, &x, &y)?);
            }
        }
        ProbeTarget::Joint(inst) => {
            inst.validate()?;
            let costs: Vec<f64> = inst
                .classes
                .iter()
                .map(|c| c.q() * c.sensing_cost)
                .collect();
            let tau = inst.bandwidth_ratio;
            let draw = |rng: &mut ChaCha8Rng| -> JointAllocation {
                let fractions = random_fractions(rng, &costs, inst.budget);
                let spent: f64 = fractions.iter().zip(&costs).map(|(t, c)| t * c).sum();
                let used = (inst.budget - spent).max(0.0) / tau * rng.gen::<f64>();
                let powers = random_split(rng, costs.len(), used)
                    .iter()
                    .zip(&inst.classes)
                    .zip(&fractions)
                    .map(|((p, c), &t)| if t > 0.0 { p / c.q() } else { 0.0 })
                    .collect();
                JointAllocation { fractions, powers }
            };
            for _ in 0..samples {
                let x = draw(&mut rng);
                let y = draw(&mut rng);
                worst = worst.max(midpoint_gap_joint(inst, &x, &y)?);
            }
        }
    }
    Ok(worst)
}

fn midpoint(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect()
}

pub fn midpoint_gap_separate(
    instance: &SeparateInstance,
    x: &SeparateAllocation,
    y: &SeparateAllocation,
) -> Result<f64> {
    let mid = SeparateAllocation {
        fractions: midpoint(&x.fractions, &y.fractions),
        rates: midpoint(&x.rates, &y.rates),
    };
    let dx = objective_separate(instance, x)?;
    let dy = objective_separate(instance, y)?;
    Ok(objective_separate(instance, &mid)? - 0.5 * (dx + dy))
}

pub fn midpoint_gap_joint(
    instance: &JointInstance,
    x: &JointAllocation,
    y: &JointAllocation,
) -> Result<f64> {
    let mid = JointAllocation {
        fractions: midpoint(&x.fractions, &y.fractions),
        powers: midpoint(&x.powers, &y.powers),
    };
    let dx = objective_joint(instance, x)?;
    let dy = objective_joint(instance, y)?;
    Ok(objective_joint(instance, &mid)? - 0.5 * (dx + dy))
}
