use std::fmt::Write as _;

use senscomm_core::{Allocation, SolveReport, SolverConfig};
use serde_json::json;

use crate::error::CliResult;
use crate::format::sig12;
use crate::instance::Instance;
use crate::method::Method;
use crate::OutputFormat;

pub fn run(
    instance: &Instance,
    method: Method,
    config: &SolverConfig,
    format: OutputFormat,
) -> CliResult<String> {
    let report = method.run(instance, config)?;
    Ok(match format {
        OutputFormat::Text => render_text(method, &report),
        OutputFormat::Json => {
            let value = json!({ "method": method.name(), "report": report });
            serde_json::to_string_pretty(&value).expect("reports serialize") + "\n"
        }
    })
}

fn render_text(method: Method, report: &SolveReport) -> String {
    let resource = match report.allocation {
        Allocation::Separate(_) => "rate",
        Allocation::Joint(_) => "power",
    };
    let mut out = String::new();
    let price = |p: Option<f64>| p.map_or_else(|| "-".to_string(), sig12);
    writeln!(out, "method        {method}").unwrap();
    writeln!(out, "case          {}", report.case_tag).unwrap();
    writeln!(out, "objective     {}", sig12(report.objective)).unwrap();
    writeln!(out, "rate_price    {}", price(report.rate_price)).unwrap();
    writeln!(out, "energy_price  {}", price(report.energy_price)).unwrap();
    writeln!(out, "kkt_residual  {}", sig12(report.kkt_residual)).unwrap();
    writeln!(out).unwrap();
    writeln!(
        out,
        "{:<6} {:>16} {:>16} {:>16}",
        "class", "theta", resource, "distortion"
    )
    .unwrap();
    let fractions = report.allocation.fractions();
    let resources = report.allocation.resources();
    for (k, d) in report.per_class.iter().enumerate() {
        writeln!(
            out,
            "{:<6} {:>16} {:>16} {:>16}",
            k + 1,
            sig12(fractions[k]),
            sig12(resources[k]),
            sig12(d.total)
        )
        .unwrap();
    }
    out
}
