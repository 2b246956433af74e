use anyhow::{Context, Result};
use pcvote_core::sim::{boundary_scan, convergence_experiment, estimate_objective, parse_grid, BoundaryConfig, SimConfig};
use pcvote_core::theory::population_objective;
use pcvote_core::{Kernel, WeightFamily};

use crate::manifest::{write_csv, Run};
use crate::SimulateArgs;

pub fn run(args: &SimulateArgs) -> Result<()> {
    let weight = WeightFamily::parse(&args.weight)?;
    let mut run = Run::start("simulate", Some(args.seed), args, &args.out)?;
    match (&args.kernel, args.rc, args.rw) {
        (Some(path), _, _) => {
            run.input(path);
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let kernel = Kernel::from_json(&text).with_context(|| format!("kernel {}", path.display()))?;
            kernel_run(&mut run, kernel, weight, args)?;
        }
        (None, Some(r_c), Some(r_w)) => {
            let config = BoundaryConfig {
                r_c,
                r_w,
                grid: parse_grid(&args.pi_grid)?,
                n: args.n,
                trials: args.trials,
                weight,
                seed: args.seed,
            };
            let scan = boundary_scan(&config)?;
            let rows = scan.rows.iter().map(|r| (&r.method, r.pi, r.success_rate, r.ci, r.successes, r.trials));
            write_csv(
                &run.output("boundary.csv"),
                &["method", "pi", "success_rate", "ci", "successes", "trials"],
                rows,
            )?;
            println!("threshold {}", scan.threshold);
            match scan.crossover {
                Some(x) => println!("crossover {x}"),
                None => println!("crossover none on grid"),
            }
        }
        _ => unreachable!("clap enforces a kernel source"),
    }
    run.finish()
}

fn kernel_run(run: &mut Run, kernel: Kernel, weight: WeightFamily, args: &SimulateArgs) -> Result<()> {
    let config = SimConfig { kernel, n: args.n, trials: args.trials, weight, seed: args.seed };
    let result = convergence_experiment(&config)?;
    let pc = format!("pc-{}", weight.name());
    let rows = [("mv", &result.mv), (pc.as_str(), &result.pc)]
        .map(|(m, r)| (m.to_string(), r.rate, r.ci, r.successes, r.trials));
    write_csv(&run.output("convergence.csv"), &["method", "success_rate", "ci", "successes", "trials"], rows)?;

    let mut objective = Vec::new();
    for exponent in 1..=3 {
        let w = WeightFamily::new(exponent)?;
        let cfg = SimConfig { weight: w, ..config.clone() };
        for a in 0..cfg.kernel.m() {
            let est = estimate_objective(&cfg, a)?;
            objective.push((a, w.name(), est.mean, est.std_error, population_objective(&cfg.kernel, &w, a)));
        }
    }
    write_csv(
        &run.output("objective.csv"),
        &["answer", "weight", "estimate", "std_error", "closed_form"],
        objective,
    )?;
    println!("mv {} pc {}", result.mv.rate, result.pc.rate);
    Ok(())
}
