//! Recovered Lagrange multipliers and per-condition KKT violations.
//!
//! Both problems are convex with affine constraints, so a candidate whose
//! residual is (numerically) zero is optimal. The objective is not
//! differentiable at `theta_k = 0`; unsensed classes are therefore checked
//! with a one-sided directional test instead of a stationarity equation.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Residual below which a certificate counts as proof of optimality.
pub const CERTIFY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    /// Derivative of the Lagrangian in a sampling fraction.
    FractionStationarity,
    /// Derivative of the Lagrangian in a rate or power.
    ResourceStationarity,
    /// Sign of a recovered bound multiplier (`mu_k`, `nu_k`).
    DualFeasibility,
    ComplementarySlackness,
    PrimalFeasibility,
    /// An unsensed class would lower the Lagrangian if it started sensing.
    Exclusion,
    /// No multiplier exists (nothing sensed although budget remains).
    NotCertifiable,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Condition::FractionStationarity => "fraction-stationarity",
            Condition::ResourceStationarity => "resource-stationarity",
            Condition::DualFeasibility => "dual-feasibility",
            Condition::ComplementarySlackness => "complementary-slackness",
            Condition::PrimalFeasibility => "primal-feasibility",
            Condition::Exclusion => "exclusion",
            Condition::NotCertifiable => "not-certifiable",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub condition: Condition,
    /// 0-based class index, `None` for constraint-level conditions.
    pub class: Option<usize>,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktCertificate {
    /// `alpha`; absent for the joint problem.
    pub rate_price: Option<f64>,
    /// `beta`: sensing-energy price (separate) or joint energy price.
    pub energy_price: f64,
    /// `mu_k`, multipliers of `theta_k <= 1` (zero for unsensed classes).
    pub fraction_multipliers: Vec<f64>,
    /// `nu_k`, multipliers of the resource lower bounds.
    pub resource_multipliers: Vec<f64>,
    pub violations: Vec<Violation>,
    /// Largest violation magnitude.
    pub residual: f64,
}

impl KktCertificate {
    pub fn certifies(&self, tol: f64) -> bool {
        self.residual <= tol
    }

    pub fn worst(&self) -> Option<&Violation> {
        self.violations
            .iter()
            .max_by(|a, b| a.magnitude.total_cmp(&b.magnitude))
    }
}

/// Collects violation entries; magnitudes are stored as given (non-negative).
#[derive(Debug, Default)]
pub(crate) struct ViolationLog {
    entries: Vec<Violation>,
}

impl ViolationLog {
    pub(crate) fn push(&mut self, condition: Condition, class: Option<usize>, magnitude: f64) {
        let magnitude = if magnitude.is_nan() {
            f64::INFINITY
        } else {
            magnitude.max(0.0)
        };
        self.entries.push(Violation {
            condition,
            class,
            magnitude,
        });
    }

    pub(crate) fn finish(
        self,
        rate_price: Option<f64>,
        energy_price: f64,
        fraction_multipliers: Vec<f64>,
        resource_multipliers: Vec<f64>,
    ) -> KktCertificate {
        let residual = self.entries.iter().map(|v| v.magnitude).fold(0.0, f64::max);
        KktCertificate {
            rate_price,
            energy_price,
            fraction_multipliers,
            resource_multipliers,
            violations: self.entries,
            residual,
        }
    }
}
