//! Population theory of PC-WMV at K = 1 over a finite answer space.
//!
//! A [`TransitionKernel`] fixes the initial-answer distribution `pi` and the
//! regeneration kernel `T(b -> a)`. The population objective
//! `Phi_w(a) = E[w(c_i(a))]` is computed two ways: directly over the four
//! (initial match, regeneration match) outcomes, and through the closed-form
//! decomposition `w(1/2)[pi(a) + pi_after(a)] + lambda_w pi(a) T(a -> a)`
//! with `lambda_w = w(1) - 2 w(1/2)`. With an exact scalar the two agree
//! identically.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::scalar::{rational_from_decimal, Scalar};
use crate::voting::{Weight, WeightFamily};
use num_rational::Rational64;

#[derive(Clone, Debug, PartialEq)]
pub struct TransitionKernel<T> {
    pi: Vec<T>,
    t: Vec<Vec<T>>,
    correct: usize,
}

/// On-disk kernel: `{"m": .., "correct": .., "pi": [..], "T": [[..], ..]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KernelFile<N> {
    pub m: usize,
    pub correct: usize,
    pub pi: Vec<N>,
    #[serde(rename = "T")]
    pub t: Vec<Vec<N>>,
}

fn check_distribution<T: Scalar>(row: &[T], what: &str) -> Result<()> {
    if row.iter().any(|p| !(*p >= T::zero())) {
        return Err(Error::InvalidKernel(format!("{what} has a negative entry")));
    }
    let sum = row.iter().fold(T::zero(), |acc, p| acc + *p);
    if sum.abs_diff(T::one()) > T::sum_tolerance() {
        return Err(Error::InvalidKernel(format!("{what} sums to {:?}, not 1", sum)));
    }
    Ok(())
}

impl<T: Scalar> TransitionKernel<T> {
    pub fn new(pi: Vec<T>, t: Vec<Vec<T>>, correct: usize) -> Result<Self> {
        let m = pi.len();
        if m == 0 {
            return Err(Error::InvalidKernel("empty answer space".into()));
        }
        if correct >= m {
            return Err(Error::InvalidKernel(format!("correct index {correct} out of range for m={m}")));
        }
        if t.len() != m || t.iter().any(|row| row.len() != m) {
            return Err(Error::InvalidKernel(format!("T must be {m}x{m}")));
        }
        check_distribution(&pi, "pi")?;
        for (b, row) in t.iter().enumerate() {
            check_distribution(row, &format!("row {b} of T"))?;
        }
        Ok(Self { pi, t, correct })
    }

    /// Two answers, index 0 correct: `T(a* -> a*) = r_c`, `T(a' -> a') = r_w`.
    pub fn binary(pi_correct: T, r_c: T, r_w: T) -> Result<Self> {
        let one = T::one();
        Self::new(
            vec![pi_correct, one - pi_correct],
            vec![vec![r_c, one - r_c], vec![one - r_w, r_w]],
            0,
        )
    }

    pub fn from_file(file: KernelFile<T>) -> Result<Self> {
        if file.pi.len() != file.m {
            return Err(Error::InvalidKernel(format!("m={} but pi has {} entries", file.m, file.pi.len())));
        }
        Self::new(file.pi, file.t, file.correct)
    }

    pub fn to_file(&self) -> KernelFile<T> {
        KernelFile { m: self.m(), correct: self.correct, pi: self.pi.clone(), t: self.t.clone() }
    }

    pub fn m(&self) -> usize {
        self.pi.len()
    }

    pub fn correct(&self) -> usize {
        self.correct
    }

    pub fn pi(&self) -> &[T] {
        &self.pi
    }

    /// `T(from -> to)`.
    pub fn transition(&self, from: usize, to: usize) -> T {
        self.t[from][to]
    }

    pub fn rows(&self) -> &[Vec<T>] {
        &self.t
    }

    /// Marginal of the regenerated answer: `pi^T T`.
    pub fn marginal_after(&self) -> Vec<T> {
        (0..self.m())
            .map(|a| (0..self.m()).fold(T::zero(), |acc, b| acc + self.pi[b] * self.t[b][a]))
            .collect()
    }

    /// `(r_C, r_W)`; `r_W` averages self-transition over wrong answers
    /// weighted by `pi`.
    pub fn reproduction_rates(&self) -> Result<(T, T)> {
        let r_c = self.t[self.correct][self.correct];
        let wrong = (0..self.m()).filter(|&a| a != self.correct);
        let mass = wrong.clone().fold(T::zero(), |acc, a| acc + self.pi[a]);
        if mass == T::zero() {
            return Err(Error::Undefined("r_W is undefined when pi(a*) = 1".into()));
        }
        let num = wrong.fold(T::zero(), |acc, a| acc + self.pi[a] * self.t[a][a]);
        Ok((r_c, num / mass))
    }
}

impl TransitionKernel<f64> {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: KernelFile<f64> =
            serde_json::from_str(text).map_err(|e| Error::InvalidKernel(e.to_string()))?;
        Self::from_file(file)
    }
}

impl TransitionKernel<Rational64> {
    /// Reads a kernel file treating every decimal literal as an exact rational.
    pub fn from_json_exact(text: &str) -> Result<Self> {
        let file: KernelFile<Value> =
            serde_json::from_str(text).map_err(|e| Error::InvalidKernel(e.to_string()))?;
        let exact = |v: &Value| -> Result<Rational64> {
            match v {
                Value::Number(n) => rational_from_decimal(&n.to_string())
                    .ok_or_else(|| Error::InvalidKernel(format!("cannot represent {n} exactly"))),
                other => Err(Error::InvalidKernel(format!("expected a number, got {other}"))),
            }
        };
        let pi = file.pi.iter().map(exact).collect::<Result<Vec<_>>>()?;
        let t = file
            .t
            .iter()
            .map(|row| row.iter().map(exact).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Self::from_file(KernelFile { m: file.m, correct: file.correct, pi, t })
    }
}

/// `Phi_w(a)` by direct expectation over `b ~ pi`, `Z ~ Bern(T(b -> a))`.
pub fn population_objective<T: Scalar, W: Weight<T>>(
    kernel: &TransitionKernel<T>,
    w: &W,
    a: usize,
) -> T {
    let half = T::half();
    (0..kernel.m()).fold(T::zero(), |acc, b| {
        let hit = if a == b { T::one() } else { T::zero() };
        let p = kernel.transition(b, a);
        let with_regen = w.weight((hit + T::one()) * half);
        let without = w.weight(hit * half);
        acc + kernel.pi()[b] * (p * with_regen + (T::one() - p) * without)
    })
}

pub fn lambda<T: Scalar, W: Weight<T>>(w: &W) -> T {
    w.weight(T::one()) - (T::one() + T::one()) * w.weight(T::half())
}

/// `Phi_w(a)` through the pooled-mass / self-reproduction decomposition.
pub fn objective_decomposition<T: Scalar, W: Weight<T>>(
    kernel: &TransitionKernel<T>,
    w: &W,
    a: usize,
) -> T {
    let after = kernel.marginal_after();
    let pi_a = kernel.pi()[a];
    w.weight(T::half()) * (pi_a + after[a]) + lambda(w) * pi_a * kernel.transition(a, a)
}

/// Smallest Pass@1 at which PC-WMV converges to the correct answer in the
/// binary case: `r_W / (r_C + r_W)`.
pub fn binary_threshold<T: Scalar>(r_c: T, r_w: T) -> Result<T> {
    if r_c < T::zero() || r_w < T::zero() || r_c + r_w == T::zero() {
        return Err(Error::InvalidArgument("threshold needs r_C + r_W > 0 and non-negative rates".into()));
    }
    Ok(r_w / (r_c + r_w))
}

#[derive(Clone, Debug, PartialEq)]
pub struct WrongAnswerCheck {
    pub answer: usize,
    /// Self-reproduction dominance.
    pub a1: bool,
    /// Pooled-mass dominance.
    pub a2: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionReport<T> {
    pub per_answer: Vec<WrongAnswerCheck>,
    pub a1: bool,
    pub a2: bool,
    /// `(n, Delta_{w^(n)})`: the worst-case margin of the correct answer.
    pub margins: Vec<(u32, T)>,
}

impl<T: Scalar> AssumptionReport<T> {
    pub fn margin(&self, exponent: u32) -> Option<T> {
        self.margins.iter().find(|(n, _)| *n == exponent).map(|(_, d)| *d)
    }
}

/// Checks both dominance assumptions for every wrong answer and reports the
/// power-family margins. Requires `0 < pi(a*) < 1`.
pub fn check_assumptions<T: Scalar>(
    kernel: &TransitionKernel<T>,
    exponents: &[u32],
) -> Result<AssumptionReport<T>> {
    let star = kernel.correct();
    let pi = kernel.pi();
    if !(pi[star] > T::zero() && pi[star] < T::one()) {
        return Err(Error::Undefined(format!(
            "assumption checks need 0 < pi(a*) < 1, got {:?}",
            pi[star]
        )));
    }
    let after = kernel.marginal_after();
    let self_mass = |a: usize| pi[a] * kernel.transition(a, a);
    let pooled = |a: usize| pi[a] + after[a];

    let per_answer: Vec<WrongAnswerCheck> = (0..kernel.m())
        .filter(|&a| a != star)
        .map(|a| WrongAnswerCheck {
            answer: a,
            a1: self_mass(star) > self_mass(a),
            a2: pooled(star) > pooled(a),
        })
        .collect();

    let mut margins = Vec::with_capacity(exponents.len());
    for &n in exponents {
        let w = WeightFamily::new(n)?;
        let phi: Vec<T> = (0..kernel.m()).map(|a| objective_decomposition(kernel, &w, a)).collect();
        let delta = (0..kernel.m())
            .filter(|&a| a != star)
            .map(|a| phi[star] - phi[a])
            .fold(None, |acc: Option<T>, d| Some(match acc {
                Some(m) if m <= d => m,
                _ => d,
            }))
            .expect("pi(a*) < 1 implies a wrong answer exists");
        if delta > T::zero() {
            debug_assert!(
                (0..kernel.m()).all(|a| a == star || phi[a] < phi[star]),
                "positive margin must make a* the unique maximizer"
            );
        }
        margins.push((n, delta));
    }

    Ok(AssumptionReport {
        a1: per_answer.iter().all(|c| c.a1),
        a2: per_answer.iter().all(|c| c.a2),
        per_answer,
        margins,
    })
}
