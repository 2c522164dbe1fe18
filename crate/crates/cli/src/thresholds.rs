use std::fmt::Write as _;

use senscomm_core::{joint_thresholds, thresholds};
use serde_json::json;

use crate::error::CliResult;
use crate::format::join;
use crate::instance::Instance;
use crate::OutputFormat;

pub fn run(instance: &Instance, format: OutputFormat) -> CliResult<String> {
    let mut out = String::new();
    match (instance, format) {
        (Instance::Separate(i), OutputFormat::Text) => {
            let t = thresholds(i)?;
            writeln!(out, "energy_levels  {}", join(&t.energy_levels)).unwrap();
            writeln!(out, "rate_levels    {}", join(&t.rate_levels)).unwrap();
        }
        (Instance::Joint(i), OutputFormat::Text) => {
            let t = joint_thresholds(i)?;
            writeln!(out, "budget_levels          {}", join(&t.budget_levels)).unwrap();
            writeln!(
                out,
                "full_sampling_budget   {}",
                join(&[t.full_sampling_budget])
            )
            .unwrap();
            writeln!(out, "reference_power        {}", join(&[t.reference_power])).unwrap();
        }
        (Instance::Separate(i), OutputFormat::Json) => {
            let value = json!({ "kind": "separate", "thresholds": thresholds(i)? });
            out = serde_json::to_string_pretty(&value).expect("thresholds serialize") + "\n";
        }
        (Instance::Joint(i), OutputFormat::Json) => {
            let value = json!({ "kind": "joint", "thresholds": joint_thresholds(i)? });
            out = serde_json::to_string_pretty(&value).expect("thresholds serialize") + "\n";
        }
    }
    Ok(out)
}
