//! Instance families shared by the benchmarks.

use senscomm_core::{JointInstance, SeparateInstance, SourceClass};

/// `k` classes with descending variances and ascending costs.
pub fn ordered_separate(k: usize, energy: f64, rate: f64) -> SeparateInstance {
    let classes = (0..k)
        .map(|i| {
            let i = i as f64;
            SourceClass::new(4.0 / (1.0 + 0.3 * i), 0.5 + 0.2 * i, 1).unwrap()
        })
        .collect();
    SeparateInstance::new(classes, energy, rate).unwrap()
}

/// `k` classes with descending variances, ascending costs and noises.
pub fn ordered_joint(k: usize, budget: f64) -> JointInstance {
    let classes = (0..k)
        .map(|i| {
            let i = i as f64;
            SourceClass::new(4.0 / (1.0 + 0.3 * i), 0.5 + 0.2 * i, 1)
                .unwrap()
                .with_noise(1.0 + 0.5 * i)
                .unwrap()
        })
        .collect();
    JointInstance::new(classes, 1.0, budget).unwrap()
}

/// The two-class instance of the energy sweep figure.
pub fn fig3(energy: f64) -> SeparateInstance {
    let classes = vec![
        SourceClass::new(2.0, 3.0, 1).unwrap(),
        SourceClass::new(1.0, 1.0, 1).unwrap(),
    ];
    SeparateInstance::new(classes, energy, 1.0).unwrap()
}

/// The two-class instance of the joint budget sweep figure.
pub fn fig6(budget: f64) -> JointInstance {
    let classes = vec![
        SourceClass::new(1.25, 1.0, 1)
            .unwrap()
            .with_noise(4.0)
            .unwrap(),
        SourceClass::new(1.0, 1.0, 1)
            .unwrap()
            .with_noise(4.0)
            .unwrap(),
    ];
    JointInstance::new(classes, 1.0, budget).unwrap()
}
