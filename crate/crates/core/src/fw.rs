//! Frank-Wolfe on the convex relaxation `min f(y), y in conv(Y)`.
//!
//! The linear subproblem over `conv(Y)` decomposes into one best response
//! per agent, so each iteration costs `N` oracle calls. Since `f` is convex,
//! `f(y) - <grad f(y), y - y_bar>` lower-bounds the relaxed value at every
//! iterate; the largest such bound seen is reported as a certificate.

use alloc::vec::Vec;

use crate::aggregative::{self, AggregateVector, AggregativeProblem};
use crate::exec::Executor;
use crate::{Error, Result};

/// Step size `omega_k`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum StepRule {
    /// `2 / (k + 2)`.
    #[default]
    Classic,
    Constant(f64),
}

impl StepRule {
    pub fn omega(&self, k: usize) -> f64 {
        match *self {
            StepRule::Classic => 2.0 / (k as f64 + 2.0),
            StepRule::Constant(w) => w,
        }
    }

    pub fn check(&self) -> Result<()> {
        match *self {
            StepRule::Constant(w) if !(0.0..=1.0).contains(&w) => Err(Error::InvalidParameter(
                alloc::format!("step size {w} outside [0, 1]"),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FwRecord {
    pub k: usize,
    /// `f(y^k)`.
    pub value: f64,
    /// `<grad f(y^k), y^k - y_bar^k>`.
    pub gap: f64,
    pub omega: f64,
    /// Running maximum of `f(y^j) - gap_j` over `j <= k`.
    pub lower_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedRunResult {
    /// Rows `k = 0..=K`; the step of row `K` is not applied.
    pub records: Vec<FwRecord>,
    pub final_point: AggregateVector,
    pub final_value: f64,
    pub certified_lower_bound: f64,
}

impl RelaxedRunResult {
    /// First iteration whose gap fell below `tol`.
    pub fn first_below(&self, tol: f64) -> Option<usize> {
        self.records.iter().find(|r| r.gap < tol).map(|r| r.k)
    }
}

/// `y_bar = (1/N) Σ_i g_i(S_i(y))` together with the best responses.
pub fn linear_oracle<P, E>(
    problem: &P,
    y: &AggregateVector,
    exec: &E,
) -> Result<(AggregateVector, Vec<P::Decision>)>
where
    P: AggregativeProblem,
    E: Executor,
{
    let prices = aggregative::gradient(problem.social_costs(), y)?;
    let responses = exec.map(problem.num_agents(), |i| {
        let x = problem.best_response(i, &prices)?;
        let g = problem.contribution(i, &x)?;
        Ok((x, g))
    });
    let responses = responses.into_iter().collect::<Result<Vec<_>>>()?;
    let y_bar = AggregateVector::mean_of(
        problem.num_blocks(),
        responses.iter().map(|(_, g)| g.as_slice()),
    );
    Ok((y_bar, responses.into_iter().map(|(x, _)| x).collect()))
}

/// The Frank-Wolfe gap `<grad f(y), y - y_bar>` at `y`.
pub fn fw_gap<P, E>(problem: &P, y: &AggregateVector, exec: &E) -> Result<f64>
where
    P: AggregativeProblem,
    E: Executor,
{
    let (y_bar, _) = linear_oracle(problem, y, exec)?;
    gap_between(problem, y, &y_bar)
}

fn gap_between<P: AggregativeProblem>(problem: &P, y: &AggregateVector, y_bar: &AggregateVector) -> Result<f64> {
    let prices = aggregative::gradient(problem.social_costs(), y)?;
    Ok(y.dot(&prices) - y_bar.dot(&prices))
}

/// The starting point: the aggregate of every agent's initial decision.
pub fn initial_point<P: AggregativeProblem>(problem: &P) -> Result<AggregateVector> {
    let x0 = (0..problem.num_agents())
        .map(|i| problem.initial_decision(i))
        .collect::<Result<Vec<_>>>()?;
    aggregative::aggregate(problem, &x0)
}

pub fn fw_run<P, E>(problem: &P, iterations: usize, rule: StepRule, exec: &E) -> Result<RelaxedRunResult>
where
    P: AggregativeProblem,
    E: Executor,
{
    fw_run_with(problem, iterations, rule, exec, |_| {})
}

/// Runs exactly `iterations` steps, calling `observe` after each row.
pub fn fw_run_with<P, E, O>(
    problem: &P,
    iterations: usize,
    rule: StepRule,
    exec: &E,
    mut observe: O,
) -> Result<RelaxedRunResult>
where
    P: AggregativeProblem,
    E: Executor,
    O: FnMut(&FwRecord),
{
    if iterations == 0 {
        return Err(Error::ZeroIterations);
    }
    rule.check()?;
    problem.check()?;
    let costs = problem.social_costs();
    let mut y = initial_point(problem)?;
    let mut records = Vec::with_capacity(iterations + 1);
    let mut lower_bound = f64::NEG_INFINITY;
    for k in 0..=iterations {
        let value = aggregative::evaluate_social(costs, &y)?;
        let (y_bar, _) = linear_oracle(problem, &y, exec)?;
        let gap = gap_between(problem, &y, &y_bar)?;
        lower_bound = lower_bound.max(value - gap);
        let omega = rule.omega(k);
        let record = FwRecord {
            k,
            value,
            gap,
            omega,
            lower_bound,
        };
        observe(&record);
        records.push(record);
        if k < iterations {
            y = y.lerp(&y_bar, omega);
        }
    }
    let final_value = records[iterations].value;
    Ok(RelaxedRunResult {
        records,
        final_point: y,
        final_value,
        certified_lower_bound: lower_bound,
    })
}
