//! Budget sweeps written as CSV.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::thread;

use clap::ValueEnum;
use senscomm_core::{check_feasible_joint, check_feasible_separate, Allocation, SolverConfig};

use crate::error::{CliError, CliResult};
use crate::format::sig12;
use crate::instance::Instance;
use crate::method::Method;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Param {
    Energy,
    Rate,
    Budget,
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub param: Param,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
    pub methods: Vec<Method>,
}

impl SweepSpec {
    fn validate(&self, instance: &Instance) -> CliResult<()> {
        if !(self.from.is_finite() && self.to.is_finite() && self.from < self.to) {
            return Err(CliError::Input(format!(
                "sweep range must satisfy from < to, got {} and {}",
                self.from, self.to
            )));
        }
        if self.steps < 2 {
            return Err(CliError::Input(format!(
                "steps must be at least 2, got {}",
                self.steps
            )));
        }
        if self.methods.is_empty() {
            return Err(CliError::Input("at least one method is required".into()));
        }
        let fits = matches!(
            (self.param, instance),
            (Param::Energy | Param::Rate, Instance::Separate(_))
                | (Param::Budget, Instance::Joint(_))
        );
        if !fits {
            return Err(CliError::Input(format!(
                "parameter `{}` does not apply to a {} instance",
                self.param
                    .to_possible_value()
                    .expect("no skipped variants")
                    .get_name(),
                instance.kind()
            )));
        }
        for m in &self.methods {
            m.check_applies(instance)?;
        }
        Ok(())
    }

    fn values(&self) -> Vec<f64> {
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| self.from + (self.to - self.from) * i as f64 / last)
            .collect()
    }
}

fn with_value(instance: &Instance, param: Param, value: f64) -> CliResult<Instance> {
    let out = match (instance.clone(), param) {
        (Instance::Separate(mut i), Param::Energy) => {
            i.energy_budget = value;
            i.validate()?;
            Instance::Separate(i)
        }
        (Instance::Separate(mut i), Param::Rate) => {
            i.rate_budget = value;
            i.validate()?;
            Instance::Separate(i)
        }
        (Instance::Joint(mut i), Param::Budget) => {
            i.budget = value;
            i.validate()?;
            Instance::Joint(i)
        }
        _ => unreachable!("parameter checked against the instance kind"),
    };
    Ok(out)
}

fn header(k: usize) -> String {
    let mut h = String::from("sweep_value,method,objective,kkt_residual,case_tag");
    for i in 1..=k {
        write!(h, ",theta_{i}").unwrap();
    }
    for i in 1..=k {
        write!(h, ",alloc_{i}").unwrap();
    }
    h
}

fn rows_for(
    instance: &Instance,
    spec: &SweepSpec,
    value: f64,
    config: &SolverConfig,
) -> CliResult<String> {
    let point = with_value(instance, spec.param, value)?;
    let mut rows = String::new();
    for &method in &spec.methods {
        let report = method.run(&point, config)?;
        let feasibility = match (&point, &report.allocation) {
            (Instance::Separate(i), Allocation::Separate(a)) => check_feasible_separate(i, a)?,
            (Instance::Joint(i), Allocation::Joint(a)) => check_feasible_joint(i, a)?,
            _ => unreachable!("solvers return the allocation kind of their instance"),
        };
        if !feasibility.is_feasible() {
            return Err(CliError::Verification(format!(
                "{method} at {} produced an infeasible allocation (violation {})",
                sig12(value),
                sig12(feasibility.max_violation())
            )));
        }
        write!(
            rows,
            "{},{},{},{},{}",
            sig12(value),
            method,
            sig12(report.objective),
            sig12(report.kkt_residual),
            report.case_tag
        )
        .unwrap();
        for &x in report
            .allocation
            .fractions()
            .iter()
            .chain(report.allocation.resources())
        {
            write!(rows, ",{}", sig12(x)).unwrap();
        }
        rows.push('\n');
    }
    Ok(rows)
}

/// Solves every sweep point and returns the CSV text. Points are split
/// across threads; the output order does not depend on scheduling.
pub fn render(instance: &Instance, spec: &SweepSpec, config: &SolverConfig) -> CliResult<String> {
    let mut spec = spec.clone();
    spec.methods.sort_by_key(|m| m.name());
    spec.methods.dedup();
    spec.validate(instance)?;
    let values = spec.values();
    let workers = thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(values.len());
    let chunk = values.len().div_ceil(workers);
    let blocks: Vec<CliResult<String>> = thread::scope(|scope| {
        let handles: Vec<_> = values
            .chunks(chunk)
            .map(|part| {
                let spec = &spec;
                scope.spawn(move || {
                    let mut text = String::new();
                    for &v in part {
                        text.push_str(&rows_for(instance, spec, v, config)?);
                    }
                    Ok(text)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });
    let mut csv = header(instance.len());
    csv.push('\n');
    for block in blocks {
        csv.push_str(&block?);
    }
    Ok(csv)
}

/// Writes the whole file at once; a failed write leaves no file behind.
pub fn write(path: &Path, csv: &str) -> CliResult<()> {
    fs::write(path, csv).map_err(|e| {
        let _ = fs::remove_file(path);
        CliError::Input(format!("cannot write {}: {e}", path.display()))
    })
}
