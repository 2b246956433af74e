use anyhow::{bail, Context, Result};
use pcvote_core::eval::{
    ac_esc_curve, benchmark_pass1, cost_accuracy_curve, empirical_rates, macro_auroc, parametric_bootstrap_ratio,
    BudgetGrid, CostAccuracyCurve, EvalConfig, GroupSpec, Method, MissingScores, OperatingPoint, ScoreSource,
    StoppingPoint, StoppingRule,
};
use pcvote_core::pool::{load_edges, load_pool, recluster};
use pcvote_core::signals::SignalKind;
use pcvote_core::{AnswerPool, WeightFamily};

use crate::manifest::{write_csv, Run};
use crate::{AurocArgs, CurveArgs, EvalCommand, Missing, PoolArgs, RatesArgs, RatiosArgs};

pub fn run(cmd: &EvalCommand) -> Result<()> {
    match cmd {
        EvalCommand::Auroc(args) => auroc(args),
        EvalCommand::Rates(args) => rates(args),
        EvalCommand::Curves(args) => {
            let mut run = Run::start("eval curves", Some(args.curve.seed), args, &args.curve.pool.out)?;
            let pool = load(&args.curve.pool, &mut run)?;
            let (curves, stopping) = compute_curves(&pool, &args.curve)?;
            write_curves(&mut run, &curves, stopping.as_deref())?;
            run.finish()
        }
        EvalCommand::Ratios(args) => ratios(args),
    }
}

fn load(args: &PoolArgs, run: &mut Run) -> Result<AnswerPool> {
    run.input(&args.pool);
    let pool = load_pool(&args.pool).with_context(|| format!("loading pool {}", args.pool.display()))?;
    match &args.edges {
        None => Ok(pool),
        Some(path) => {
            run.input(path);
            let edges = load_edges(path).with_context(|| format!("loading edges {}", path.display()))?;
            Ok(recluster(&pool, &edges)?)
        }
    }
}

fn rates(args: &RatesArgs) -> Result<()> {
    let mut run = Run::start("eval rates", None, args, &args.pool.out)?;
    let pool = load(&args.pool, &mut run)?;
    let r = empirical_rates(&pool, args.tau)?;
    write_csv(
        &run.output("rates.csv"),
        &["benchmark", "tau", "r_c", "r_w", "d", "problems"],
        [(&pool.metadata.benchmark, args.tau, r.r_c, r.r_w, r.d, r.problems)],
    )?;
    run.finish()
}

fn score_sources(args: &AurocArgs) -> Result<Vec<ScoreSource>> {
    let consistency = ScoreSource::PrefixConsistency { tau: args.tau, k: args.k };
    if args.signals.is_empty() {
        return Ok(std::iter::once(consistency).chain(SignalKind::ALL.map(ScoreSource::Signal)).collect());
    }
    args.signals
        .iter()
        .map(|name| {
            if name == "prefix-consistency" {
                return Ok(consistency);
            }
            match SignalKind::ALL.iter().find(|k| k.name() == name) {
                Some(&k) => Ok(ScoreSource::Signal(k)),
                None => {
                    let valid: Vec<&str> = SignalKind::ALL.iter().map(|k| k.name()).collect();
                    bail!("unknown signal `{name}`; valid signals: prefix-consistency, {}", valid.join(", "))
                }
            }
        })
        .collect()
}

fn auroc(args: &AurocArgs) -> Result<()> {
    let sources = score_sources(args)?;
    let mut run = Run::start("eval auroc", None, args, &args.pool.out)?;
    let pool = load(&args.pool, &mut run)?;
    let missing = match args.missing {
        Missing::Drop => MissingScores::Drop,
        Missing::Impute => MissingScores::ImputeMedian,
    };
    let mut rows = Vec::new();
    for source in sources {
        // signals a pool does not carry leave an empty cell
        let (value, problems) = match macro_auroc(&pool, source, missing) {
            Ok(m) => (Some(m.value), m.problems),
            Err(pcvote_core::Error::Undefined(_)) => (None, 0),
            Err(e) => return Err(e).with_context(|| format!("AUROC for {}", source.name())),
        };
        rows.push((source.name(), &pool.metadata.benchmark, value, problems));
    }
    write_csv(&run.output("auroc.csv"), &["signal", "benchmark", "value", "problems"], rows)?;
    run.finish()
}

fn methods(args: &CurveArgs) -> Result<Vec<Method>> {
    if args.methods.is_empty() {
        return Ok(vec![Method::Mv, Method::Pc(WeightFamily::parse(&args.weight)?)]);
    }
    Ok(args.methods.iter().map(|m| m.parse()).collect::<pcvote_core::Result<_>>()?)
}

fn eval_config(args: &CurveArgs) -> Result<EvalConfig> {
    Ok(EvalConfig { grid: BudgetGrid::parse(&args.budget_grid)?, trials: args.trials, seed: args.seed, ..Default::default() })
}

fn compute_curves(pool: &AnswerPool, args: &CurveArgs) -> Result<(Vec<CostAccuracyCurve>, Option<Vec<StoppingPoint>>)> {
    let config = eval_config(args)?;
    let groups = GroupSpec { tau: args.tau, k: args.k };
    let curves = methods(args)?
        .into_iter()
        .map(|m| cost_accuracy_curve(pool, m, groups, &config).with_context(|| format!("curve for {}", m.name())))
        .collect::<Result<Vec<_>>>()?;
    let stopping = if args.stopping {
        let rules: Vec<StoppingRule> = StoppingRule::ac_sweep().into_iter().chain(StoppingRule::esc_sweep()).collect();
        let horizon = args.horizon.unwrap_or(pool.metadata.n).max(1);
        Some(ac_esc_curve(pool, &rules, horizon, args.trials, args.seed)?)
    } else {
        None
    };
    Ok((curves, stopping))
}

fn write_curves(run: &mut Run, curves: &[CostAccuracyCurve], stopping: Option<&[StoppingPoint]>) -> Result<()> {
    let rows = curves.iter().flat_map(|c| c.points.iter().map(move |p| (&c.method, p.budget, p.accuracy, p.ci)));
    write_csv(&run.output("curves.csv"), &["method", "budget", "accuracy", "ci"], rows)?;
    if let Some(points) = stopping {
        let rows = points.iter().map(|p| (&p.method, p.param, p.budget, p.budget_ci, p.accuracy, p.ci));
        write_csv(
            &run.output("stopping.csv"),
            &["method", "param", "budget", "budget_ci", "accuracy", "ci"],
            rows,
        )?;
    }
    Ok(())
}

fn ratios(args: &RatiosArgs) -> Result<()> {
    let c = &args.curve;
    let mut run = Run::start("eval ratios", Some(c.seed), args, &c.pool.out)?;
    let pool = load(&c.pool, &mut run)?;
    let mut with_mv = c.methods.clone();
    if !c.methods.is_empty() && !c.methods.iter().any(|m| m == "mv") {
        with_mv.insert(0, "mv".into());
    }
    let curve_args = CurveArgs { methods: with_mv, ..c.clone() };
    let (curves, stopping) = compute_curves(&pool, &curve_args)?;
    write_curves(&mut run, &curves, stopping.as_deref())?;

    let mv = curves.iter().find(|c| c.method == "mv").expect("mv curve present").operating_points();
    let pass1 = benchmark_pass1(&pool)?;
    let mut candidates: Vec<(String, Vec<OperatingPoint>)> =
        curves.iter().map(|c| (c.method.clone(), c.operating_points())).collect();
    if let Some(points) = &stopping {
        for family in ["ac", "esc"] {
            let ops = points.iter().filter(|p| p.method == family).map(StoppingPoint::operating_point).collect();
            candidates.push((family.to_string(), ops));
        }
    }
    let mut rows = Vec::new();
    for (method, points) in &candidates {
        for &alpha in &args.alpha {
            // an undefined target (plateau below pass@1) leaves empty cells
            match parametric_bootstrap_ratio(points, &mv, pass1, alpha, args.replicates, c.seed) {
                Ok(est) => rows.push((method, alpha, est.ratio, est.ci, Some(est.reach_fraction))),
                Err(pcvote_core::Error::Undefined(_)) => rows.push((method, alpha, None, None, None)),
                Err(e) => return Err(e).with_context(|| format!("ratio for {method}")),
            }
        }
    }
    write_csv(&run.output("ratios.csv"), &["method", "alpha", "ratio", "ci", "reach_fraction"], rows)?;
    run.finish()
}
