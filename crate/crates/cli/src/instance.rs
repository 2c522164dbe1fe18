//! JSON instance files.

use std::fs;
use std::path::Path;

use senscomm_core::{JointInstance, SeparateInstance, SourceClass};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Kind {
    Separate,
    Joint,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassEntry {
    variance: f64,
    sensing_cost: f64,
    #[serde(default = "one")]
    count: u32,
    noise: Option<f64>,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    kind: Kind,
    classes: Vec<ClassEntry>,
    rate_budget: Option<f64>,
    energy_budget: Option<f64>,
    budget: Option<f64>,
    bandwidth_ratio: Option<f64>,
    weights: Option<Vec<f64>>,
}

/// A loaded instance with any weights already folded into the variances.
#[derive(Debug, Clone, PartialEq)]
pub enum Instance {
    Separate(SeparateInstance),
    Joint(JointInstance),
}

impl Instance {
    pub fn len(&self) -> usize {
        match self {
            Instance::Separate(i) => i.len(),
            Instance::Joint(i) => i.len(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Instance::Separate(_) => "separate",
            Instance::Joint(_) => "joint",
        }
    }
}

fn required(value: Option<f64>, field: &str, kind: &str) -> CliResult<f64> {
    value.ok_or_else(|| CliError::Input(format!("{kind} instance needs `{field}`")))
}

fn reject(value: Option<f64>, field: &str, kind: &str) -> CliResult<()> {
    match value {
        Some(_) => Err(CliError::Input(format!(
            "`{field}` does not apply to a {kind} instance"
        ))),
        None => Ok(()),
    }
}

pub fn parse(text: &str) -> CliResult<Instance> {
    let file: InstanceFile = serde_json::from_str(text)
        .map_err(|e| CliError::Input(format!("bad instance file: {e}")))?;
    let mut classes = Vec::with_capacity(file.classes.len());
    for (i, c) in file.classes.iter().enumerate() {
        let class = SourceClass::new(c.variance, c.sensing_cost, c.count)
            .and_then(|s| match c.noise {
                Some(n) => s.with_noise(n),
                None => Ok(s),
            })
            .map_err(|e| CliError::Input(format!("class {}: {e}", i + 1)))?;
        classes.push(class);
    }
    let instance = match file.kind {
        Kind::Separate => {
            reject(file.budget, "budget", "separate")?;
            reject(file.bandwidth_ratio, "bandwidth_ratio", "separate")?;
            let energy = required(file.energy_budget, "energy_budget", "separate")?;
            let rate = required(file.rate_budget, "rate_budget", "separate")?;
            Instance::Separate(SeparateInstance::new(classes, energy, rate)?)
        }
        Kind::Joint => {
            reject(file.energy_budget, "energy_budget", "joint")?;
            reject(file.rate_budget, "rate_budget", "joint")?;
            let budget = required(file.budget, "budget", "joint")?;
            let tau = required(file.bandwidth_ratio, "bandwidth_ratio", "joint")?;
            Instance::Joint(JointInstance::new(classes, tau, budget)?)
        }
    };
    Ok(match (instance, file.weights) {
        (i, None) => i,
        (Instance::Separate(i), Some(w)) => Instance::Separate(i.fold_weights(&w)?),
        (Instance::Joint(i), Some(w)) => Instance::Joint(i.fold_weights(&w)?),
    })
}

pub fn load(path: &Path) -> CliResult<Instance> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}
