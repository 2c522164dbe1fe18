//! Box/halfspace projection against a dense active-set enumeration.

use proptest::prelude::*;
use senscomm_core::project_box_halfspace;

/// Tries every assignment of each coordinate to {lower, upper, free} and of
/// the halfspace to {active, inactive}, solves the stationarity equations in
/// closed form, and keeps the nearest feasible candidate.
fn qp_oracle(p: &[f64], c: &[f64], b: f64, lo: &[f64], hi: &[f64]) -> Vec<f64> {
    let n = p.len();
    let feasible = |x: &[f64]| {
        x.iter()
            .zip(lo.iter().zip(hi))
            .all(|(v, (l, h))| *v >= l - 1e-12 && *v <= h + 1e-12)
            && x.iter().zip(c).map(|(v, c)| v * c).sum::<f64>() <= b + 1e-10
    };
    let dist = |x: &[f64]| x.iter().zip(p).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    let mut best: Option<Vec<f64>> = None;
    for code in 0..3usize.pow(n as u32) {
        let mut state = vec![0; n];
        let mut rest = code;
        for s in state.iter_mut() {
            *s = rest % 3;
            rest /= 3;
        }
        for active in [false, true] {
            let mut x: Vec<f64> = (0..n)
                .map(|i| match state[i] {
                    0 => lo[i],
                    1 => hi[i],
                    _ => p[i],
                })
                .collect();
            if active {
                let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
                let norm: f64 = free.iter().map(|&i| c[i] * c[i]).sum();
                if norm == 0.0 {
                    continue;
                }
                let spend: f64 = x.iter().zip(c).map(|(x, c)| x * c).sum();
                let nu = (spend - b) / norm;
                if nu < 0.0 {
                    continue;
                }
                for &i in &free {
                    x[i] = p[i] - nu * c[i];
                }
            }
            if feasible(&x) && best.as_ref().map_or(true, |bx| dist(&x) < dist(bx)) {
                best = Some(x);
            }
        }
    }
    best.expect("feasible set is nonempty")
}

#[test]
fn identity_inside_the_set() {
    let x = project_box_halfspace(
        &[0.1, 0.7, 0.3],
        &[1.0, 0.5, 2.0],
        5.0,
        &[0.0; 3],
        &[1.0; 3],
    )
    .unwrap();
    assert_eq!(x, vec![0.1, 0.7, 0.3]);
}

proptest! {
    #[test]
    fn matches_active_set_enumeration(
        n in 1usize..=4,
        seed in proptest::collection::vec((-2.0f64..3.0, 0.0f64..3.0, 0.0f64..0.4, 0.5f64..1.0), 4),
        slack in 0.0f64..1.0,
    ) {
        let p: Vec<f64> = seed[..n].iter().map(|s| s.0).collect();
        let c: Vec<f64> = seed[..n].iter().map(|s| s.1).collect();
        let lo: Vec<f64> = seed[..n].iter().map(|s| s.2).collect();
        let hi: Vec<f64> = seed[..n].iter().map(|s| s.3).collect();
        let floor: f64 = c.iter().zip(&lo).map(|(c, l)| c * l).sum();
        let ceil: f64 = c.iter().zip(&hi).map(|(c, h)| c * h).sum();
        let b = floor + slack * (ceil - floor);
        let got = project_box_halfspace(&p, &c, b, &lo, &hi).unwrap();
        let want = qp_oracle(&p, &c, b, &lo, &hi);
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() <= 1e-8, "got {:?} want {:?}", got, want);
        }
    }
}
