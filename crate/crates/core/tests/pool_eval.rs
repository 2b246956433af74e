use pcvote_core::eval::{
    auroc::is_mixed, cost_accuracy_curve, empirical_rates, macro_auroc, monotone_envelope, per_problem_auroc,
    token_efficiency_ratio, BudgetGrid, EvalConfig, GroupSpec, Method, MissingScores, ScoreSource,
};
use pcvote_core::pool::{read_pool, write_pool_to, Continuation, PoolMetadata};
use pcvote_core::rng::substream;
use pcvote_core::sim::{synthetic_pool, SyntheticPoolSpec};
use pcvote_core::{AnswerPool, ClusterId, Kernel, Problem, Sample, WeightFamily};
use rand::Rng;

fn sample(answer: u32, regen: u32) -> Sample {
    Sample {
        answer_raw: Some(answer.to_string()),
        cluster: Some(ClusterId(answer)),
        n_tokens: 100,
        logprobs: None,
        continuations: vec![Continuation {
            tau: 0.75,
            answer_raw: Some(regen.to_string()),
            cluster: Some(ClusterId(regen)),
            n_tokens: 25,
        }],
        verbal: Vec::new(),
    }
}

/// One problem with `c` correct initials (`rc` reproduced) and `w` wrong
/// initials (`rw` reproduced).
fn rated_problem(id: usize, c: usize, rc: usize, w: usize, rw: usize) -> Problem {
    let mut samples = Vec::new();
    samples.extend((0..c).map(|i| sample(0, if i < rc { 0 } else { 1 })));
    samples.extend((0..w).map(|i| sample(1, if i < rw { 1 } else { 0 })));
    Problem { id: format!("p{id}"), gold_cluster: Some(ClusterId(0)), samples, partial: false }
}

fn pool(problems: Vec<Problem>) -> AnswerPool {
    AnswerPool {
        metadata: PoolMetadata { model: "m".into(), benchmark: "b".into(), n: 0, taus: vec![0.75], k: 1, truncation: None },
        problems,
    }
}

#[test]
fn auroc_identity_on_random_problems() {
    let mut rng = substream(42, &[]);
    for id in 0..500 {
        let c = rng.random_range(1..40);
        let w = rng.random_range(1..40);
        let rc = rng.random_range(0..=c);
        let rw = rng.random_range(0..=w);
        let p = rated_problem(id, c, rc, w, rw);
        let scores: Vec<f64> = p
            .samples
            .iter()
            .map(|s| if s.continuations[0].cluster == s.cluster { 1.0 } else { 0.5 })
            .collect();
        let labels: Vec<bool> = p.samples.iter().map(|s| s.cluster == Some(ClusterId(0))).collect();
        let d = rc as f64 / c as f64 - rw as f64 / w as f64;
        let got = per_problem_auroc(&scores, &labels).unwrap();
        assert!((got - (1.0 + d) / 2.0).abs() < 1e-12, "problem {id}");
    }
}

#[test]
fn macro_pipeline_on_uniform_gap() {
    // r_C = 0.660, r_W = 0.223 in every problem
    let p = pool((0..5).map(|i| rated_problem(i, 1000, 660, 1000, 223)).collect());
    let rates = empirical_rates(&p, 0.75).unwrap();
    assert!((rates.d - 0.437).abs() < 1e-12);
    let auroc = macro_auroc(&p, ScoreSource::PrefixConsistency { tau: 0.75, k: 1 }, MissingScores::Drop).unwrap();
    assert!((auroc.value - 0.7185).abs() < 1e-12);
    assert_eq!(auroc.problems, 5);
    assert_eq!(format!("{:.3}", auroc.value), "0.719");
}

#[test]
fn macro_auroc_averages_problems_and_skips_single_class() {
    // AUROC 0.6 and 0.8 from gaps 0.2 and 0.6
    let mut problems = vec![rated_problem(0, 10, 6, 10, 4), rated_problem(1, 10, 8, 10, 2)];
    problems.push(rated_problem(2, 10, 5, 0, 0));
    let p = pool(problems);
    assert!(!is_mixed(&p.problems[2]));
    let auroc = macro_auroc(&p, ScoreSource::PrefixConsistency { tau: 0.75, k: 1 }, MissingScores::Drop).unwrap();
    assert!((auroc.value - 0.7).abs() < 1e-12);
    assert_eq!(auroc.problems, 2);

    let single = pool(vec![rated_problem(0, 10, 5, 0, 0)]);
    assert!(macro_auroc(&single, ScoreSource::PrefixConsistency { tau: 0.75, k: 1 }, MissingScores::Drop).is_err());
}

#[test]
fn synthetic_rates_match_kernel() {
    for kernel in [
        Kernel::binary(0.5, 0.8, 0.4).unwrap(),
        Kernel::new(vec![0.5, 0.3, 0.2], vec![vec![0.9, 0.05, 0.05], vec![0.3, 0.4, 0.3], vec![0.4, 0.2, 0.4]], 0)
            .unwrap(),
    ] {
        let spec = SyntheticPoolSpec { problems: 200, n: 64, k: 4, tau: 0.75, initial_tokens: 400 };
        let p = synthetic_pool(&kernel, &spec, 7).unwrap();
        let rates = empirical_rates(&p, 0.75).unwrap();
        let (rc, rw) = kernel.reproduction_rates().unwrap();
        let pi = kernel.pi()[0];
        let pairs = |mass: f64| rates.problems as f64 * spec.n as f64 * mass * spec.k as f64;
        let sc = (rc * (1.0 - rc) / pairs(pi)).sqrt();
        let sw = (rw * (1.0 - rw) / pairs(1.0 - pi)).sqrt();
        assert!((rates.r_c - rc).abs() <= 4.0 * sc, "{rates:?}");
        assert!((rates.r_w - rw).abs() <= 4.0 * sw, "{rates:?}");
    }
}

#[test]
fn pool_round_trips_through_jsonl() {
    let kernel = Kernel::binary(0.4, 0.8, 0.4).unwrap();
    let spec = SyntheticPoolSpec { problems: 3, n: 4, k: 2, tau: 0.5, initial_tokens: 10 };
    let p = synthetic_pool(&kernel, &spec, 1).unwrap();
    let mut buf = Vec::new();
    write_pool_to(&p, &mut buf).unwrap();
    assert_eq!(read_pool(buf.as_slice()).unwrap(), p);
}

#[test]
fn pc_curve_beats_mv_on_favourable_kernel() {
    let kernel = Kernel::binary(0.42, 0.85, 0.3).unwrap();
    let spec = SyntheticPoolSpec { problems: 12, n: 64, k: 1, tau: 0.75, initial_tokens: 200 };
    let p = synthetic_pool(&kernel, &spec, 3).unwrap();
    let config = EvalConfig { grid: BudgetGrid::parse("2.5:4.5:0.25").unwrap(), trials: 100, ..Default::default() };
    let groups = GroupSpec { tau: 0.75, k: 1 };
    let mv = cost_accuracy_curve(&p, Method::Mv, groups, &config).unwrap();
    let pc = cost_accuracy_curve(&p, Method::Pc(WeightFamily::CUBIC), groups, &config).unwrap();
    assert!(pc.points.last().unwrap().accuracy > mv.points.last().unwrap().accuracy);
    let env = |c: &pcvote_core::eval::CostAccuracyCurve| -> Vec<(f64, f64)> {
        monotone_envelope(c).points.iter().map(|q| (q.budget, q.accuracy)).collect()
    };
    let pass1 = pcvote_core::eval::benchmark_pass1(&p).unwrap();
    let plateau = mv.points.last().unwrap().accuracy.max(pass1);
    for alpha in [0.75, 0.9, 0.99] {
        assert_eq!(token_efficiency_ratio(&env(&mv), &env(&mv), pass1, plateau, alpha).unwrap(), Some(1.0));
    }
}
