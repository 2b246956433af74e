use pcvote_core::theory::{
    binary_threshold, check_assumptions, lambda, objective_decomposition, population_objective,
};
use pcvote_core::{ExactKernel, Kernel, Rational64, Weight, WeightFamily};
use proptest::prelude::*;

fn normalize(weights: &[u32]) -> Vec<Rational64> {
    let total: i64 = weights.iter().map(|&w| w as i64).sum();
    weights.iter().map(|&w| Rational64::new(w as i64, total)).collect()
}

/// Random exact kernel: integer weights normalized to rationals.
fn exact_kernel(max_m: usize) -> impl Strategy<Value = ExactKernel> {
    (2..=max_m).prop_flat_map(|m| {
        (
            prop::collection::vec(1u32..20, m),
            prop::collection::vec(prop::collection::vec(0u32..20, m), m),
            0..m,
        )
            .prop_filter_map("rows need mass", |(pi, rows, correct)| {
                if rows.iter().any(|r| r.iter().all(|&x| x == 0)) {
                    return None;
                }
                let t = rows.iter().map(|r| normalize(r)).collect();
                ExactKernel::new(normalize(&pi), t, correct).ok()
            })
    })
}

fn float_kernel(max_m: usize) -> impl Strategy<Value = Kernel> {
    (2..=max_m).prop_flat_map(|m| {
        (
            prop::collection::vec(0.01f64..1.0, m),
            prop::collection::vec(prop::collection::vec(0.0f64..1.0, m), m),
            0..m,
        )
            .prop_filter_map("rows need mass", |(pi, rows, correct)| {
                let norm = |v: &[f64]| {
                    let s: f64 = v.iter().sum();
                    (s > 1e-3).then(|| v.iter().map(|x| x / s).collect::<Vec<f64>>())
                };
                let t: Option<Vec<Vec<f64>>> = rows.iter().map(|r| norm(r)).collect();
                Kernel::new(norm(&pi)?, t?, correct).ok()
            })
    })
}

/// Arbitrary weight on the K = 1 consistency grid {0, 1/2, 1}.
struct GridWeight {
    half: Rational64,
    one: Rational64,
}

impl Weight<Rational64> for GridWeight {
    fn weight(&self, c: Rational64) -> Rational64 {
        if c == Rational64::new(1, 2) {
            self.half
        } else if c == Rational64::from_integer(1) {
            self.one
        } else {
            Rational64::from_integer(0)
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn decomposition_is_exact(k in exact_kernel(5), n in 1u32..=3) {
        let w = WeightFamily::new(n).unwrap();
        for a in 0..k.m() {
            prop_assert_eq!(population_objective(&k, &w, a), objective_decomposition(&k, &w, a));
        }
    }

    #[test]
    fn decomposition_agrees_in_floats(k in float_kernel(6), n in 1u32..=3) {
        let w = WeightFamily::new(n).unwrap();
        for a in 0..k.m() {
            let d = population_objective(&k, &w, a) - objective_decomposition(&k, &w, a);
            prop_assert!(d.abs() < 1e-12, "{}", d);
        }
    }

    #[test]
    fn binary_margin_identity(p in 1i64..20, rc in 0i64..=20, rw in 0i64..=20, n in 1u32..=3) {
        let q = |x: i64| Rational64::new(x, 20);
        let k = ExactKernel::binary(q(p), q(rc), q(rw)).unwrap();
        let w = WeightFamily::new(n).unwrap();
        let margin = population_objective(&k, &w, 0) - population_objective(&k, &w, 1);
        let one = Rational64::from_integer(1);
        prop_assert_eq!(margin, one * (q(p) * q(rc) - (one - q(p)) * q(rw)));
        let report = check_assumptions(&k, &[n]).unwrap();
        prop_assert_eq!(report.margin(n), Some(margin));
    }

    #[test]
    fn dominance_implies_positive_margin(
        k in exact_kernel(4),
        half in 0i64..10,
        extra in 0i64..10,
    ) {
        // w(0) = 0, w(1) > 0, lambda >= 0
        let half = Rational64::new(half, 10);
        let one = half * 2 + Rational64::new(extra + 1, 10);
        let w = GridWeight { half, one };
        prop_assume!(lambda(&w) >= Rational64::from_integer(0));
        let star = k.correct();
        let pi_star = k.pi()[star];
        prop_assume!(pi_star > Rational64::from_integer(0) && pi_star < Rational64::from_integer(1));
        let report = check_assumptions(&k, &[1, 2, 3]).unwrap();
        if report.a1 && report.a2 {
            for a in (0..k.m()).filter(|&a| a != star) {
                prop_assert!(population_objective(&k, &w, star) > population_objective(&k, &w, a));
            }
            for (_, d) in &report.margins {
                prop_assert!(*d > Rational64::from_integer(0));
            }
        }
    }

    #[test]
    fn threshold_monotone(rc in 0.01f64..1.0, rw in 0.01f64..1.0, bump in 0.001f64..0.5) {
        let base = binary_threshold(rc, rw).unwrap();
        prop_assert!(binary_threshold(rc + bump, rw).unwrap() < base);
        prop_assert!(binary_threshold(rc, rw + bump).unwrap() > base);
    }
}

#[test]
fn identity_kernel_rates() {
    let k = Kernel::new(vec![0.7, 0.3], vec![vec![1.0, 0.0], vec![0.0, 1.0]], 0).unwrap();
    let (rc, rw) = k.reproduction_rates().unwrap();
    assert_eq!((rc, rw), (1.0, 1.0));
    assert_eq!(binary_threshold(rc, rw).unwrap(), 0.5);
}
