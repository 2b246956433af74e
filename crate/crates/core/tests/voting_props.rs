use pcvote_core::voting::{
    ac_criterion, ac_stop, filtered_vote, generic_wmv, majority_vote, pc_tally, pc_wmv, regularized_incomplete_beta,
};
use pcvote_core::{ClusterId, ExactTally, Group, Rational64, WeightFamily};
use proptest::prelude::*;

/// Groups sharing K, with small answer alphabets so ties are common.
fn groups() -> impl Strategy<Value = Vec<Group>> {
    (1usize..5, 1usize..30, 1u32..4).prop_flat_map(|(k, n, alphabet)| {
        prop::collection::vec(prop::collection::vec(0..alphabet, k + 1), n).prop_map(move |gs| {
            gs.into_iter().map(|g| Group::new(g.into_iter().map(ClusterId).collect(), k)).collect()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn pc_linear_is_pooled_majority(gs in groups()) {
        let pooled: Vec<ClusterId> = gs.iter().flat_map(|g| g.members.iter().copied()).collect();
        let pc = pc_wmv::<Rational64, _>(&gs, &WeightFamily::LINEAR).unwrap();
        prop_assert_eq!(pc, majority_vote(&pooled).unwrap());
        // and the tallies are proportional, not merely co-maximal
        let tally: ExactTally = pc_tally(&gs, &WeightFamily::LINEAR).unwrap();
        let slots = Rational64::from_integer(gs[0].slots as i64);
        for a in 0..4u32 {
            let count = pooled.iter().filter(|&&c| c == ClusterId(a)).count() as i64;
            prop_assert_eq!(tally.get(ClusterId(a)) * slots, Rational64::from_integer(count));
        }
    }

    #[test]
    fn full_retention_with_constant_scores_is_majority(answers in prop::collection::vec(0u32..4, 1..40)) {
        let answers: Vec<ClusterId> = answers.into_iter().map(ClusterId).collect();
        let scores = vec![0.7; answers.len()];
        prop_assert_eq!(filtered_vote(&answers, &scores, 1.0).unwrap(), majority_vote(&answers).unwrap());
        let ones = vec![1.0; answers.len()];
        prop_assert_eq!(generic_wmv(&answers, &ones).unwrap(), majority_vote(&answers).unwrap());
    }

    #[test]
    fn ac_criterion_in_unit_interval_and_monotone(n1 in 0usize..40, n2 in 0usize..40) {
        let c = ac_criterion(n1, n2);
        prop_assert!((0.0..=1.0).contains(&c));
        prop_assert!(ac_criterion(n1 + 1, n2) >= c);
    }
}

#[test]
fn incomplete_beta_closed_form_is_exact() {
    for n in 0..=20u32 {
        let got = regularized_incomplete_beta(0.5f64, n as f64 + 1.0, 1.0).unwrap();
        assert_eq!(got, 0.5f64.powi(n as i32 + 1), "n={n}");
    }
}

#[test]
fn ac_worked_example_stops_at_four() {
    let out = ac_stop(vec![ClusterId(3); 10], 0.95).unwrap();
    assert_eq!(out.consumed, 4);
    assert_eq!(out.answer, Some(ClusterId(3)));
    assert!(out.stopped_early);
}

#[test]
fn ties_go_to_lowest_cluster() {
    assert_eq!(majority_vote(&[ClusterId(5), ClusterId(2), ClusterId(5), ClusterId(2)]).unwrap(), ClusterId(2));
}
