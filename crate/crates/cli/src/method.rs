use std::fmt;
use std::str::FromStr;

use senscomm_core::{
    solve_esf, solve_joint_general, solve_large_budget, solve_lcf, solve_ordered,
    solve_separate_general, solve_zero_cost, SolveReport, SolverConfig,
};

use crate::error::{CliError, CliResult};
use crate::instance::Instance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Ordered,
    General,
    Lcf,
    Esf,
    ZeroCost,
    LargeBudget,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Ordered,
        Method::General,
        Method::Lcf,
        Method::Esf,
        Method::ZeroCost,
        Method::LargeBudget,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ordered => "ordered",
            Method::General => "general",
            Method::Lcf => "lcf",
            Method::Esf => "esf",
            Method::ZeroCost => "zero-cost",
            Method::LargeBudget => "large-budget",
        }
    }

    fn applies_to(self, instance: &Instance) -> bool {
        match instance {
            Instance::Separate(_) => matches!(
                self,
                Method::Ordered | Method::General | Method::Lcf | Method::Esf
            ),
            Instance::Joint(_) => matches!(
                self,
                Method::General | Method::ZeroCost | Method::LargeBudget
            ),
        }
    }

    pub fn check_applies(self, instance: &Instance) -> CliResult<()> {
        if self.applies_to(instance) {
            Ok(())
        } else {
            Err(CliError::Input(format!(
                "method `{self}` does not apply to a {} instance",
                instance.kind()
            )))
        }
    }

    pub fn run(self, instance: &Instance, config: &SolverConfig) -> CliResult<SolveReport> {
        self.check_applies(instance)?;
        let report = match (self, instance) {
            (Method::Ordered, Instance::Separate(i)) => solve_ordered(i)?,
            (Method::General, Instance::Separate(i)) => solve_separate_general(i, config)?,
            (Method::Lcf, Instance::Separate(i)) => solve_lcf(i)?,
            (Method::Esf, Instance::Separate(i)) => solve_esf(i)?,
            (Method::General, Instance::Joint(i)) => solve_joint_general(i, config)?,
            (Method::ZeroCost, Instance::Joint(i)) => {
                if let Some(k) = i.classes.iter().position(|c| c.sensing_cost != 0.0) {
                    return Err(CliError::Precondition(format!(
                        "zero-cost method needs every sensing cost to be 0, class {} costs {}",
                        k + 1,
                        i.classes[k].sensing_cost
                    )));
                }
                solve_zero_cost(i)?
            }
            (Method::LargeBudget, Instance::Joint(i)) => solve_large_budget(i)?,
            _ => unreachable!("applicability checked above"),
        };
        Ok(report)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
                format!("unknown method `{s}`, expected one of {}", names.join(", "))
            })
    }
}
