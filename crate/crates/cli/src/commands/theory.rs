use std::fmt::Display;

use anyhow::{Context, Result};
use pcvote_core::theory::{binary_threshold, check_assumptions, objective_decomposition, population_objective};
use pcvote_core::{ExactKernel, Kernel, Scalar, TransitionKernel, WeightFamily};

use crate::TheoryArgs;

pub fn run(args: &TheoryArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.kernel).with_context(|| format!("reading {}", args.kernel.display()))?;
    let weights = args.exponents.iter().map(|&n| WeightFamily::new(n)).collect::<pcvote_core::Result<Vec<_>>>()?;
    let report = if args.exact {
        let kernel: ExactKernel = ExactKernel::from_json_exact(&text).with_context(|| args.kernel.display().to_string())?;
        render(&kernel, &weights, |x| format!("{x} ({:.6})", x.to_f64_lossy()))?
    } else {
        let kernel: Kernel = Kernel::from_json(&text).with_context(|| args.kernel.display().to_string())?;
        render(&kernel, &weights, |x| format!("{x:.6}"))?
    };
    print!("{report}");
    Ok(())
}

fn vector<T: Copy>(xs: &[T], show: &impl Fn(T) -> String) -> String {
    xs.iter().map(|&x| show(x)).collect::<Vec<_>>().join(", ")
}

/// Plain-text report: marginals, rates, threshold, objective table and
/// dominance checks.
pub fn render<T: Scalar + Display>(
    kernel: &TransitionKernel<T>,
    weights: &[WeightFamily],
    show: impl Fn(T) -> String,
) -> Result<String> {
    let star = kernel.correct();
    let mut out = String::new();
    let mut line = |s: String| {
        out.push_str(&s);
        out.push('\n');
    };
    line(format!("answers {}  correct {star}", kernel.m()));
    line(format!("pi        [{}]", vector(kernel.pi(), &show)));
    line(format!("pi_after  [{}]", vector(&kernel.marginal_after(), &show)));
    let (r_c, r_w) = kernel.reproduction_rates().context("degenerate kernel")?;
    line(format!("r_C {}  r_W {}", show(r_c), show(r_w)));
    line(format!("threshold {}", show(binary_threshold(r_c, r_w)?)));

    line(String::new());
    let header: Vec<String> = weights.iter().map(|w| format!("phi_{}", w.name())).collect();
    line(format!("answer  {}", header.join("  ")));
    for a in 0..kernel.m() {
        let mut cells = Vec::new();
        for w in weights {
            let direct = population_objective(kernel, w, a);
            let split = objective_decomposition(kernel, w, a);
            debug_assert!(direct.abs_diff(split).to_f64_lossy() < 1e-9);
            cells.push(show(direct));
        }
        let mark = if a == star { "*" } else { " " };
        line(format!("{a}{mark}      {}", cells.join("  ")));
    }

    line(String::new());
    match check_assumptions(kernel, &weights.iter().map(|w| w.exponent()).collect::<Vec<_>>()) {
        Ok(report) => {
            for c in &report.per_answer {
                line(format!("answer {}  A1 {}  A2 {}", c.answer, c.a1, c.a2));
            }
            line(format!("A1 {}  A2 {}", report.a1, report.a2));
            for (n, margin) in &report.margins {
                line(format!("margin n={n} {}", show(*margin)));
            }
        }
        Err(e) => line(format!("assumptions not checked: {e}")),
    }
    Ok(out)
}
