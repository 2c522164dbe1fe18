#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use senscomm_core::{JointInstance, SeparateInstance, SourceClass};

pub fn separate(spec: &[(f64, f64, u32)], energy: f64, rate: f64) -> SeparateInstance {
    let classes = spec
        .iter()
        .map(|&(s, e, q)| SourceClass::new(s, e, q).unwrap())
        .collect();
    SeparateInstance::new(classes, energy, rate).unwrap()
}

pub fn joint(spec: &[(f64, f64, u32, f64)], tau: f64, budget: f64) -> JointInstance {
    let classes = spec
        .iter()
        .map(|&(s, e, q, n)| SourceClass::new(s, e, q).unwrap().with_noise(n).unwrap())
        .collect();
    JointInstance::new(classes, tau, budget).unwrap()
}

pub fn fig3(energy: f64) -> SeparateInstance {
    separate(&[(2.0, 3.0, 1), (1.0, 1.0, 1)], energy, 1.0)
}

pub fn fig6(budget: f64) -> JointInstance {
    joint(&[(1.25, 1.0, 1, 4.0), (1.0, 1.0, 1, 4.0)], 1.0, budget)
}

pub fn linspace(from: f64, to: f64, steps: usize) -> Vec<f64> {
    (0..steps)
        .map(|i| from + (to - from) * i as f64 / (steps - 1) as f64)
        .collect()
}

fn sorted_desc(rng: &mut ChaCha8Rng, k: usize, lo: f64, hi: f64) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..k).map(|_| rng.gen_range(lo..hi)).collect();
        v.sort_by(|a, b| b.total_cmp(a));
        if v.windows(2).all(|w| w[0] > w[1]) {
            return v;
        }
    }
}

/// Variances strictly descending in [0.5, 4], costs ascending in [0.2, 4].
pub fn random_ordered_separate(rng: &mut ChaCha8Rng) -> SeparateInstance {
    let k = rng.gen_range(2..=3);
    let variances = sorted_desc(rng, k, 0.5, 4.0);
    let mut costs = sorted_desc(rng, k, 0.2, 4.0);
    costs.reverse();
    let counts: Vec<u32> = (0..k).map(|_| rng.gen_range(1..=3)).collect();
    let spec: Vec<(f64, f64, u32)> = (0..k)
        .map(|i| (variances[i], costs[i], counts[i]))
        .collect();
    let full: f64 = spec.iter().map(|&(_, e, q)| e * f64::from(q)).sum();
    separate(
        &spec,
        rng.gen_range(0.0..1.2 * full),
        rng.gen_range(0.0..3.0),
    )
}

/// No ordering between variances and costs.
pub fn random_separate(rng: &mut ChaCha8Rng) -> SeparateInstance {
    let k = rng.gen_range(2..=3);
    let spec: Vec<(f64, f64, u32)> = (0..k)
        .map(|_| {
            (
                rng.gen_range(0.5..4.0),
                rng.gen_range(0.2..4.0),
                rng.gen_range(1..=3),
            )
        })
        .collect();
    let full: f64 = spec.iter().map(|&(_, e, q)| e * f64::from(q)).sum();
    separate(
        &spec,
        rng.gen_range(0.0..1.2 * full),
        rng.gen_range(0.0..3.0),
    )
}

/// Variances strictly descending, noises non-decreasing, costs ascending.
pub fn random_ordered_joint(rng: &mut ChaCha8Rng) -> JointInstance {
    let k = rng.gen_range(2..=3);
    let variances = sorted_desc(rng, k, 0.5, 4.0);
    let mut noises = sorted_desc(rng, k, 0.5, 4.0);
    noises.reverse();
    let mut costs = sorted_desc(rng, k, 0.2, 2.0);
    costs.reverse();
    let spec: Vec<(f64, f64, u32, f64)> = (0..k)
        .map(|i| (variances[i], costs[i], rng.gen_range(1..=2), noises[i]))
        .collect();
    let tau = rng.gen_range(0.5..2.0);
    let full: f64 = spec.iter().map(|&(_, e, q, _)| e * f64::from(q)).sum();
    joint(&spec, tau, rng.gen_range(0.1..3.0 * full))
}
