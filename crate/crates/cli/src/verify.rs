//! Self-verification of an instance: reference solution, KKT certificate,
//! grid oracle, convexity probe, and (joint) ordered structure.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use senscomm_core::{
    check_feasible_joint, check_feasible_separate, check_ordered_joint, check_ordered_separate,
    full_sampling_budget, grid_search_joint, grid_search_separate, kkt_certificate_joint,
    kkt_certificate_separate, midpoint_convexity_probe, objective_separate, round_rates_to_grid,
    solve_joint_general, solve_large_budget, solve_ordered, solve_separate_general,
    solve_zero_cost, structure_check, Allocation, GridSpec, JointAllocation, JointInstance,
    KktCertificate, ProbeTarget, SeparateAllocation, SeparateInstance, SolveReport, SolverConfig,
    CERTIFY_TOL,
};
use serde::Deserialize;

use crate::error::{CliError, CliResult};
use crate::format::sig12;
use crate::instance::Instance;

const CLOSED_FORM_KKT: f64 = 1e-9;
const GENERAL_KKT: f64 = 1e-5;
const ORACLE_SLACK: f64 = 1e-9;
const CONVEXITY_TOL: f64 = 1e-12;
const PROBE_SAMPLES: usize = 1000;

struct Check {
    name: String,
    passed: bool,
    detail: String,
}

#[derive(Default)]
struct Checks(Vec<Check>);

impl Checks {
    fn push(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.0.push(Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    fn kkt(&mut self, name: &str, report: &SolveReport, tol: f64) {
        self.push(
            name,
            report.kkt_residual <= tol,
            format!(
                "kkt_residual {} (limit {})",
                sig12(report.kkt_residual),
                sig12(tol)
            ),
        );
    }

    fn certificate(&mut self, cert: &KktCertificate) {
        let detail = match cert.worst() {
            Some(v) if !cert.certifies(CERTIFY_TOL) => format!(
                "{} violated{} by {}",
                v.condition,
                v.class
                    .map_or(String::new(), |k| format!(" at class {}", k + 1)),
                sig12(v.magnitude)
            ),
            _ => format!("kkt_residual {}", sig12(cert.residual)),
        };
        self.push("allocation-kkt", cert.certifies(CERTIFY_TOL), detail);
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AllocationFile {
    fractions: Vec<f64>,
    rates: Option<Vec<f64>>,
    powers: Option<Vec<f64>>,
}

fn load_allocation(path: &Path, instance: &Instance) -> CliResult<Allocation> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let file: AllocationFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("bad allocation file: {e}")))?;
    match (instance, file.rates, file.powers) {
        (Instance::Separate(_), Some(rates), None) => {
            Ok(Allocation::Separate(SeparateAllocation {
                fractions: file.fractions,
                rates,
            }))
        }
        (Instance::Joint(_), None, Some(powers)) => Ok(Allocation::Joint(JointAllocation {
            fractions: file.fractions,
            powers,
        })),
        (Instance::Separate(_), ..) => Err(CliError::Input(
            "a separate allocation needs `fractions` and `rates`".into(),
        )),
        (Instance::Joint(_), ..) => Err(CliError::Input(
            "a joint allocation needs `fractions` and `powers`".into(),
        )),
    }
}

fn verify_separate(
    inst: &SeparateInstance,
    grid: GridSpec,
    config: &SolverConfig,
    checks: &mut Checks,
) -> CliResult<()> {
    let general = solve_separate_general(inst, config)?;
    checks.kkt("general-kkt", &general, GENERAL_KKT);
    let ordered = check_ordered_separate(&inst.classes).is_ok();
    let reference = if ordered {
        let closed = solve_ordered(inst)?;
        checks.kkt("closed-form-kkt", &closed, CLOSED_FORM_KKT);
        let gap = (general.objective - closed.objective).abs();
        let allowed = (10.0 * config.delta).max(1e-6);
        checks.push(
            "general-vs-closed-form",
            gap <= allowed,
            format!("gap {} (limit {})", sig12(gap), sig12(allowed)),
        );
        closed
    } else {
        general
    };
    let found = grid_search_separate(inst, grid)?;
    let Allocation::Separate(best) = &reference.allocation else {
        unreachable!("separate solvers return separate allocations")
    };
    let mut detail = format!(
        "reference {} grid {} ({} points)",
        sig12(reference.objective),
        sig12(found.objective),
        found.evaluations
    );
    let mut passed = reference.objective <= found.objective + ORACLE_SLACK;
    if ordered {
        let rounded = round_rates_to_grid(inst, best, grid)?;
        let bound = objective_separate(inst, &rounded)? - reference.objective + 1e-12;
        passed &= found.objective <= reference.objective + bound;
        write!(detail, " bound {}", sig12(bound)).unwrap();
    }
    checks.push("oracle", passed, detail);
    let gap = midpoint_convexity_probe(ProbeTarget::Separate(inst), PROBE_SAMPLES, config.seed)?;
    checks.push(
        "convexity",
        gap <= CONVEXITY_TOL,
        format!("worst midpoint gap {}", sig12(gap)),
    );
    Ok(())
}

fn joint_reference(inst: &JointInstance, config: &SolverConfig) -> CliResult<(SolveReport, f64)> {
    if check_ordered_joint(inst).is_ok() {
        if inst.classes.iter().all(|c| c.sensing_cost == 0.0) {
            return Ok((solve_zero_cost(inst)?, CLOSED_FORM_KKT));
        }
        if inst.budget >= full_sampling_budget(inst)?.budget {
            return Ok((solve_large_budget(inst)?, CLOSED_FORM_KKT));
        }
    }
    Ok((solve_joint_general(inst, config)?, GENERAL_KKT))
}

fn verify_joint(
    inst: &JointInstance,
    grid: GridSpec,
    config: &SolverConfig,
    checks: &mut Checks,
) -> CliResult<()> {
    let (reference, tol) = joint_reference(inst, config)?;
    checks.kkt("reference-kkt", &reference, tol);
    let Allocation::Joint(best) = &reference.allocation else {
        unreachable!("joint solvers return joint allocations")
    };
    if check_ordered_joint(inst).is_ok() {
        let result = structure_check(best);
        let detail = match &result {
            Ok(()) => "fractions and powers ordered".to_string(),
            Err(v) => v.to_string(),
        };
        checks.push("structure", result.is_ok(), detail);
    }
    let found = grid_search_joint(inst, grid)?;
    checks.push(
        "oracle",
        reference.objective <= found.objective + ORACLE_SLACK,
        format!(
            "reference {} grid {} ({} points)",
            sig12(reference.objective),
            sig12(found.objective),
            found.evaluations
        ),
    );
    let gap = midpoint_convexity_probe(ProbeTarget::Joint(inst), PROBE_SAMPLES, config.seed)?;
    checks.push(
        "convexity",
        gap <= CONVEXITY_TOL,
        format!("worst midpoint gap {}", sig12(gap)),
    );
    Ok(())
}

fn verify_allocation(
    instance: &Instance,
    alloc: &Allocation,
    checks: &mut Checks,
) -> CliResult<()> {
    let (feasibility, cert) = match (instance, alloc) {
        (Instance::Separate(i), Allocation::Separate(a)) => (
            check_feasible_separate(i, a)?,
            kkt_certificate_separate(i, a)?,
        ),
        (Instance::Joint(i), Allocation::Joint(a)) => {
            (check_feasible_joint(i, a)?, kkt_certificate_joint(i, a)?)
        }
        _ => unreachable!("allocation kind follows the instance kind"),
    };
    checks.push(
        "allocation-feasible",
        feasibility.is_feasible(),
        format!("max violation {}", sig12(feasibility.max_violation())),
    );
    checks.certificate(&cert);
    if let (Instance::Joint(i), Allocation::Joint(a)) = (instance, alloc) {
        if check_ordered_joint(i).is_ok() {
            let result = structure_check(a);
            let detail = match &result {
                Ok(()) => "fractions and powers ordered".to_string(),
                Err(v) => v.to_string(),
            };
            checks.push("allocation-structure", result.is_ok(), detail);
        }
    }
    Ok(())
}

/// Runs every check and returns the report. A failed check turns into a
/// verification error carrying the full report.
pub fn run(
    instance: &Instance,
    grid: usize,
    allocation: Option<&Path>,
    config: &SolverConfig,
) -> CliResult<String> {
    let grid = GridSpec::uniform(grid);
    let mut checks = Checks::default();
    match instance {
        Instance::Separate(i) => verify_separate(i, grid, config, &mut checks)?,
        Instance::Joint(i) => verify_joint(i, grid, config, &mut checks)?,
    }
    if let Some(path) = allocation {
        let alloc = load_allocation(path, instance)?;
        verify_allocation(instance, &alloc, &mut checks)?;
    }
    let mut out = String::new();
    for c in &checks.0 {
        let mark = if c.passed { "PASS" } else { "FAIL" };
        writeln!(out, "{mark} {:<24} {}", c.name, c.detail).unwrap();
    }
    let failed = checks.0.iter().filter(|c| !c.passed).count();
    if failed == 0 {
        writeln!(out, "all {} checks passed", checks.0.len()).unwrap();
        Ok(out)
    } else {
        write!(out, "{failed} of {} checks failed", checks.0.len()).unwrap();
        Err(CliError::Verification(out))
    }
}
