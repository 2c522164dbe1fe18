//! Acceptance criteria, one line each. Runs without the libtest harness so
//! the PASS/FAIL lines are always printed; exits non-zero if any fail.

mod common;

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use senscomm_core::oracle::{midpoint_convexity_probe, round_rates_to_grid, ProbeTarget};
use senscomm_core::*;

use common::{fig3, fig6, joint, linspace, random_ordered_separate, random_separate};

/// Failures collected for one criterion.
#[derive(Default)]
struct Findings(Vec<String>);

impl Findings {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.0.push(what());
        }
    }

    fn within(&mut self, elapsed: Duration, limit: Duration) {
        self.check(elapsed <= limit, || {
            format!("runtime {:.2?} exceeds {:.0?}", elapsed, limit)
        });
    }
}

fn general() -> SolverConfig {
    SolverConfig::default()
}

struct Fig3Row {
    energy: f64,
    optimal: SolveReport,
    lcf: SolveReport,
    esf: SolveReport,
}

fn fig3_sweep() -> Vec<Fig3Row> {
    linspace(0.05, 5.0, 100)
        .into_iter()
        .map(|energy| {
            let inst = fig3(energy);
            Fig3Row {
                energy,
                optimal: solve_separate_general(&inst, &general()).unwrap(),
                lcf: solve_lcf(&inst).unwrap(),
                esf: solve_esf(&inst).unwrap(),
            }
        })
        .collect()
}

fn fig6_sweep() -> Vec<(f64, SolveReport)> {
    linspace(0.2, 8.0, 100)
        .into_iter()
        .map(|b| (b, solve_joint_general(&fig6(b), &general()).unwrap()))
        .collect()
}

fn criterion_1() -> Findings {
    let mut f = Findings::default();
    let start = Instant::now();
    let rows = fig3_sweep();
    f.within(start.elapsed(), Duration::from_secs(10));
    for pair in rows.windows(2) {
        f.check(
            pair[1].optimal.objective <= pair[0].optimal.objective,
            || {
                format!(
                    "optimum rises from E={} to E={}",
                    pair[0].energy, pair[1].energy
                )
            },
        );
    }
    let tail: Vec<f64> = rows
        .iter()
        .filter(|r| r.energy >= 4.0)
        .map(|r| r.optimal.objective)
        .collect();
    let spread = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - tail.iter().copied().fold(f64::INFINITY, f64::min);
    f.check(spread <= 1e-6, || {
        format!("optimum varies by {spread:e} for E >= 4")
    });
    for r in rows.iter().filter(|r| r.energy <= 1.0) {
        let gap = (r.lcf.objective - r.optimal.objective).abs();
        f.check(gap <= 1e-4, || {
            format!("|LCF - optimum| = {gap:.3e} > 1e-4 at E={}", r.energy)
        });
    }
    for r in rows.iter().filter(|r| (2.0..=3.5).contains(&r.energy)) {
        f.check(r.esf.objective < r.lcf.objective, || {
            format!(
                "ESF {} not below LCF {} at E={}",
                r.esf.objective, r.lcf.objective, r.energy
            )
        });
    }
    f
}

fn criterion_2() -> Findings {
    let mut f = Findings::default();
    for r in fig3_sweep() {
        let t = r.optimal.allocation.fractions();
        if r.energy <= 0.85 {
            f.check(t[0] <= 1e-4, || {
                format!("theta_1 = {} at E={}", t[0], r.energy)
            });
        }
        if (1.7..=4.0).contains(&r.energy) {
            f.check(t[0] > t[1], || {
                format!("theta = ({}, {}) at E={}", t[0], t[1], r.energy)
            });
        }
    }
    f
}

fn criterion_3() -> Findings {
    let mut f = Findings::default();
    let start = Instant::now();
    let rows = fig6_sweep();
    let full = full_sampling_budget(&fig6(1.0)).unwrap().budget;
    let levels = budget_thresholds(&fig6(1.0)).unwrap();
    f.within(start.elapsed(), Duration::from_secs(30));
    for (b, rep) in &rows {
        let t = rep.allocation.fractions();
        f.check(t[0] >= t[1] - 1e-7, || format!("theta = {t:?} at B={b}"));
        if (2.4..=2.8).contains(b) {
            let inside = t.iter().all(|&x| x > 0.01 && x < 0.99);
            f.check(inside, || {
                format!("theta = ({:.4}, {:.4}) at B={b:.4}", t[0], t[1])
            });
        }
        if *b >= full {
            let ones = t.iter().all(|&x| (x - 1.0).abs() <= 1e-4);
            f.check(ones, || format!("theta = {t:?} at B={b} above {full}"));
        }
    }
    f.check((5.7..=6.3).contains(&full), || {
        format!("full-sampling budget {full}")
    });
    let first = levels[0] + fig6(1.0).full_sensing_energy();
    f.check((2.25..=2.35).contains(&first), || {
        format!("b_1 + sum eps = {first}")
    });
    f
}

fn criterion_4() -> Findings {
    let mut f = Findings::default();
    let start = Instant::now();
    let grid = GridSpec::uniform(201);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for n in 0..50 {
        let inst = random_ordered_separate(&mut rng);
        let closed = solve_ordered(&inst).unwrap();
        let best = grid_search_separate(&inst, grid).unwrap();
        let Allocation::Separate(alloc) = &closed.allocation else {
            unreachable!()
        };
        let rounded = round_rates_to_grid(&inst, alloc, grid).unwrap();
        // Distance from the optimum to its nearest grid point, plus rounding
        // noise from recomputing the same fractions in a different order.
        let bound = objective_separate(&inst, &rounded).unwrap() - closed.objective + 1e-12;
        f.check(closed.objective <= best.objective + 1e-9, || {
            format!(
                "instance {n}: closed {} above grid {}",
                closed.objective, best.objective
            )
        });
        f.check(best.objective <= closed.objective + bound, || {
            format!(
                "instance {n}: grid {} exceeds closed {} by more than {bound:e}",
                best.objective, closed.objective
            )
        });
    }
    f.within(start.elapsed(), Duration::from_secs(120));
    f
}

fn criterion_5() -> Findings {
    let mut f = Findings::default();
    let mut closed: Vec<(String, f64)> = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in 0..50 {
        let inst = random_ordered_separate(&mut rng);
        closed.push((
            format!("ordered #{n}"),
            solve_ordered(&inst).unwrap().kkt_residual,
        ));
    }
    for b in [0.1, 0.25, 0.5, 1.0, 2.0, 5.0] {
        let inst = joint(&[(2.0, 0.0, 1, 1.0), (1.0, 0.0, 1, 1.0)], 1.0, b);
        closed.push((
            format!("zero-cost B={b}"),
            solve_zero_cost(&inst).unwrap().kkt_residual,
        ));
    }
    let full = full_sampling_budget(&fig6(1.0)).unwrap().budget;
    for b in [full, 6.5, 8.0, 12.0] {
        closed.push((
            format!("large budget B={b}"),
            solve_large_budget(&fig6(b)).unwrap().kkt_residual,
        ));
    }
    for (name, r) in &closed {
        f.check(*r <= 1e-9, || format!("{name}: residual {r:e}"));
    }
    for row in fig3_sweep() {
        let r = row.optimal.kkt_residual;
        f.check(r <= 1e-5, || {
            format!("general separate E={}: residual {r:e}", row.energy)
        });
    }
    for (b, rep) in fig6_sweep() {
        let r = rep.kkt_residual;
        f.check(r <= 1e-5, || format!("general joint B={b}: residual {r:e}"));
    }
    f
}

fn criterion_6() -> Findings {
    let mut f = Findings::default();
    let inst = joint(&[(2.0, 0.0, 1, 1.0), (1.0, 0.0, 1, 1.0)], 1.0, 2.0);
    let rep = solve_zero_cost(&inst).unwrap();
    let p = rep.allocation.resources();
    f.check(
        (p[0] - 1.2301).abs() <= 1e-3 && (p[1] - 0.7700).abs() <= 1e-3,
        || format!("powers {p:?}"),
    );
    let ratio = rep.per_class[0].total / rep.per_class[1].total;
    f.check((ratio - 2f64.cbrt()).abs() <= 1e-6, || {
        format!("D_1/D_2 = {ratio}")
    });
    f
}

fn criterion_7() -> Findings {
    let mut f = Findings::default();
    for b in [6.5, 8.0] {
        let closed = solve_large_budget(&fig6(b)).unwrap();
        let numeric = solve_joint_general(&fig6(b), &general()).unwrap();
        let pairs = closed
            .allocation
            .fractions()
            .iter()
            .chain(closed.allocation.resources())
            .zip(
                numeric
                    .allocation
                    .fractions()
                    .iter()
                    .chain(numeric.allocation.resources()),
            );
        for (a, n) in pairs {
            f.check((a - n).abs() <= 1e-4, || {
                format!("B={b}: closed {a} vs general {n}")
            });
        }
    }
    let below = 0.95 * full_sampling_budget(&fig6(1.0)).unwrap().budget;
    let rep = solve_joint_general(&fig6(below), &general()).unwrap();
    let t2 = rep.allocation.fractions()[1];
    f.check(t2 < 1.0 - 1e-3, || format!("theta_2 = {t2} at B={below}"));
    f
}

/// Regula falsi (Illinois variant) on `1 - (1 + 2 ln b)/b^2 - 2/b^3`.
fn single_class_root() -> f64 {
    let g = |b: f64| 1.0 - (1.0 + 2.0 * b.ln()) / (b * b) - 2.0 / (b * b * b);
    let (mut a, mut c) = (1.0, 4.0);
    let (mut ga, mut gc) = (g(a), g(c));
    assert!(ga < 0.0 && gc > 0.0);
    let mut side = 0;
    for _ in 0..200 {
        let x = (a * gc - c * ga) / (gc - ga);
        let gx = g(x);
        if gx == 0.0 || (c - a).abs() < 1e-14 {
            return x;
        }
        if gx.signum() == ga.signum() {
            a = x;
            ga = gx;
            if side == -1 {
                gc *= 0.5;
            }
            side = -1;
        } else {
            c = x;
            gc = gx;
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        }
    }
    0.5 * (a + c)
}

fn criterion_8() -> Findings {
    let mut f = Findings::default();
    let inst = joint(&[(1.0, 1.0, 1, 1.0)], 1.0, 1.0);
    let got = full_sampling_budget(&inst).unwrap().budget;
    let want = single_class_root();
    f.check((got - want).abs() <= 0.01, || {
        format!("b = {got}, scalar root {want}")
    });
    f.check((got - 1.815).abs() <= 0.01, || {
        format!("b = {got}, expected 1.815")
    });
    f
}

fn criterion_9() -> Findings {
    let mut f = Findings::default();
    let start = Instant::now();

    for (name, gap) in [
        (
            "separate",
            midpoint_convexity_probe(ProbeTarget::Separate(&fig3(2.0)), 1000, 9).unwrap(),
        ),
        (
            "joint",
            midpoint_convexity_probe(ProbeTarget::Joint(&fig6(4.0)), 1000, 9).unwrap(),
        ),
    ] {
        f.check(gap <= 1e-12, || format!("{name} midpoint gap {gap:e}"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..1000 {
        let (t, r, p) = (
            rng.gen::<f64>(),
            rng.gen_range(0.0..4.0),
            rng.gen_range(0.0..4.0),
        );
        let (dt, dr) = (rng.gen_range(0.0..1.0 - t), rng.gen_range(0.0..1.0));
        let (n, tau) = (rng.gen_range(0.2..4.0), rng.gen_range(0.2..3.0));
        let fs = distortion_factor_separate;
        let fj = |t, p| distortion_factor_joint(t, p, n, tau);
        f.check(
            fs(t + dt, r) <= fs(t, r) && fs(t, r + dr) <= fs(t, r),
            || format!("f not monotone at ({t}, {r})"),
        );
        f.check(
            fj(t + dt, p) <= fj(t, p) && fj(t, p + dr) <= fj(t, p),
            || format!("h not monotone at ({t}, {p})"),
        );
    }

    let mut rng = ChaCha8Rng::seed_from_u64(19);
    for n in 0..50 {
        let ordered = random_ordered_separate(&mut rng);
        let rep = solve_ordered(&ordered).unwrap();
        let rates: f64 = ordered
            .classes
            .iter()
            .zip(rep.allocation.resources())
            .map(|(c, r)| f64::from(c.count) * r)
            .sum();
        if rep.case_tag != CaseTag::Degenerate {
            let err = (rates - ordered.rate_budget).abs() / ordered.rate_budget;
            f.check(err <= 1e-12, || {
                format!("ordered #{n}: rate used {rates} of {}", ordered.rate_budget)
            });
        }

        let inst = random_separate(&mut rng);
        let optimum = solve_separate_general(&inst, &general()).unwrap();
        for rep in [solve_lcf(&inst).unwrap(), solve_esf(&inst).unwrap()] {
            let Allocation::Separate(a) = &rep.allocation else {
                unreachable!()
            };
            let feas = check_feasible_separate(&inst, a).unwrap();
            f.check(feas.is_feasible(), || {
                format!("{} infeasible on #{n}", rep.case_tag)
            });
            f.check(rep.objective >= optimum.objective - 1e-9, || {
                format!(
                    "{} beats the optimum on #{n}: {} < {}",
                    rep.case_tag, rep.objective, optimum.objective
                )
            });
        }
    }
    for b in linspace(0.2, 8.0, 25) {
        let rep = solve_joint_general(&fig6(b), &general()).unwrap();
        let Allocation::Joint(a) = &rep.allocation else {
            unreachable!()
        };
        let used = check_feasible_joint(&fig6(b), a).unwrap().constraints[0].used;
        f.check((used - b).abs() <= 1e-9 * b, || {
            format!("joint budget used {used} of {b}")
        });
    }
    f.within(start.elapsed(), Duration::from_secs(60));
    f
}

fn main() {
    type Criterion = (&'static str, fn() -> Findings);
    let criteria: [Criterion; 9] = [
        ("fig3 objective sweep and baselines", criterion_1),
        ("fig3 sampling fractions", criterion_2),
        ("fig6 joint sweep and thresholds", criterion_3),
        ("closed form vs grid oracle", criterion_4),
        ("KKT certification", criterion_5),
        ("zero-cost worked value", criterion_6),
        ("large-budget consistency", criterion_7),
        ("single-class full-sampling root", criterion_8),
        ("property suites", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let findings = run();
        let elapsed = start.elapsed();
        if findings.0.is_empty() {
            println!("PASS criterion {}: {name} ({elapsed:.2?})", i + 1);
        } else {
            failed += 1;
            println!(
                "FAIL criterion {}: {name} ({elapsed:.2?}): {} finding(s)",
                i + 1,
                findings.0.len()
            );
            for line in &findings.0 {
                println!("    {line}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
