//! Stochastic Frank-Wolfe.
//!
//! Each iteration computes every agent's best response `x_bar_i` to the
//! prices at the current aggregate, draws `n_k` candidate profiles in which
//! agent `i` independently switches to `x_bar_i` with probability `omega_k`,
//! and keeps the cheapest of the candidates and the incumbent. Iterates are
//! always feasible and their costs never increase.
//!
//! The Bernoulli draw `lambda_i^{k,j}` is a pure function of
//! `(master_seed, k, j, i)`, so a run is reproducible under any parallel
//! schedule.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::aggregative::{self, AggregateVector, AggregativeProblem};
use crate::exec::Executor;
use crate::fw::StepRule;
use crate::rng;
use crate::{Error, Result};

/// Per-iteration sample counts `n_k`.
#[derive(Debug, Clone, PartialEq)]
pub enum SampleRule {
    Constant(usize),
    /// `n_k` for `k = 0, 1, ..`; must cover every iteration run.
    PerIteration(Vec<usize>),
}

impl SampleRule {
    pub fn at(&self, k: usize) -> usize {
        match self {
            SampleRule::Constant(n) => *n,
            SampleRule::PerIteration(v) => v[k],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SfwSchedule {
    pub iterations: usize,
    pub step: StepRule,
    pub samples: SampleRule,
    pub master_seed: u64,
}

impl SfwSchedule {
    pub const DEFAULT_SAMPLES: usize = 20;

    pub fn new(iterations: usize, master_seed: u64) -> Self {
        Self {
            iterations,
            step: StepRule::Classic,
            samples: SampleRule::Constant(Self::DEFAULT_SAMPLES),
            master_seed,
        }
    }

    pub fn with_samples(mut self, samples: SampleRule) -> Self {
        self.samples = samples;
        self
    }

    pub fn with_step(mut self, step: StepRule) -> Self {
        self.step = step;
        self
    }

    pub fn check(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::ZeroIterations);
        }
        self.step.check()?;
        match &self.samples {
            SampleRule::Constant(0) => Err(Error::InvalidParameter("n_k must be at least 1".into())),
            SampleRule::PerIteration(v) if v.len() < self.iterations => Err(Error::InvalidParameter(format!(
                "{} sample counts for {} iterations",
                v.len(),
                self.iterations
            ))),
            SampleRule::PerIteration(v) if v.iter().take(self.iterations).any(|&n| n == 0) => {
                Err(Error::InvalidParameter("n_k must be at least 1".into()))
            }
            _ => Ok(()),
        }
    }
}

/// `lambda_i^{k,j}`, with `j` counted from 1.
#[inline]
pub fn selection_draw(master_seed: u64, k: usize, j: usize, agent: usize, omega: f64) -> bool {
    rng::bernoulli(master_seed, &[k as u64, j as u64, agent as u64], omega)
}

/// The iterate `x^k` with its cached contributions, aggregate and cost.
#[derive(Debug, Clone, PartialEq)]
pub struct SfwState<D> {
    pub k: usize,
    pub x: Vec<D>,
    pub contributions: Vec<Vec<f64>>,
    pub aggregate: AggregateVector,
    pub value: f64,
}

impl<D: Clone> SfwState<D> {
    fn from_profile<P: AggregativeProblem<Decision = D>>(problem: &P, k: usize, x: Vec<D>) -> Result<Self> {
        let contributions = x
            .iter()
            .enumerate()
            .map(|(i, xi)| problem.contribution(i, xi))
            .collect::<Result<Vec<_>>>()?;
        let aggregate = AggregateVector::mean_of(problem.num_blocks(), contributions.iter().map(Vec::as_slice));
        let value = aggregative::evaluate_social(problem.social_costs(), &aggregate)?;
        Ok(Self {
            k,
            x,
            contributions,
            aggregate,
            value,
        })
    }
}

/// What one iteration did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub omega: f64,
    pub samples: usize,
    /// Sample index `j` of the accepted candidate, `None` if `x^k` was kept.
    pub accepted: Option<usize>,
    /// Switches (`lambda = 1`) in the accepted candidate.
    pub swaps: usize,
    /// Switches drawn across all candidates.
    pub draws: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SfwRecord {
    pub k: usize,
    /// `J(x^k)`.
    pub value: f64,
    pub omega: f64,
    pub samples: usize,
    pub swaps: usize,
    pub draws: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SfwRunResult<D> {
    /// Rows `k = 0..=K`; the row for `K` carries no step (`swaps = draws = 0`).
    pub records: Vec<SfwRecord>,
    pub best_x: Vec<D>,
    pub best_value: f64,
    /// `J(x^K)` minus a relaxed reference value, when one was attached.
    pub gap_vs_relaxed: Option<f64>,
}

impl<D> SfwRunResult<D> {
    pub fn with_reference(mut self, relaxed_value: f64) -> Self {
        self.gap_vs_relaxed = Some(self.best_value - relaxed_value);
        self
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.value)
    }
}

/// `x^0`: every agent's initial decision.
pub fn sfw_start<P: AggregativeProblem>(problem: &P) -> Result<SfwState<P::Decision>> {
    let x = (0..problem.num_agents())
        .map(|i| problem.initial_decision(i))
        .collect::<Result<Vec<_>>>()?;
    SfwState::from_profile(problem, 0, x)
}

/// One iteration `x^k -> x^{k+1}`.
pub fn sfw_iterate<P, E>(
    problem: &P,
    schedule: &SfwSchedule,
    state: &SfwState<P::Decision>,
    exec: &E,
) -> Result<(SfwState<P::Decision>, StepReport)>
where
    P: AggregativeProblem,
    E: Executor,
{
    let k = state.k;
    let n = problem.num_agents();
    let blocks = problem.num_blocks();
    let costs = problem.social_costs();
    let omega = schedule.step.omega(k);
    let samples = schedule.samples.at(k);
    let seed = schedule.master_seed;

    let prices = aggregative::gradient(costs, &state.aggregate)?;
    let responses = exec
        .map(n, |i| {
            let x = problem.best_response(i, &prices)?;
            let g = problem.contribution(i, &x)?;
            Ok((x, g))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let deltas: Vec<Vec<f64>> = responses
        .iter()
        .zip(&state.contributions)
        .map(|((_, g_bar), g)| g_bar.iter().zip(g).map(|(a, b)| a - b).collect())
        .collect();

    // Candidate j changes the aggregate by (1/N) Σ_{lambda_i = 1} (g_i(x_bar_i) - g_i(x_i)).
    let nf = n as f64;
    let candidates = exec.map(samples, |j0| {
        let j = j0 + 1;
        let mut shift = vec![0.0; blocks];
        let mut swaps = 0usize;
        for (i, d) in deltas.iter().enumerate() {
            if selection_draw(seed, k, j, i, omega) {
                swaps += 1;
                for (s, v) in shift.iter_mut().zip(d) {
                    *s += v;
                }
            }
        }
        let y = AggregateVector(
            state
                .aggregate
                .0
                .iter()
                .zip(&shift)
                .map(|(y, s)| y + s / nf)
                .collect(),
        );
        aggregative::evaluate_social(costs, &y).map(|v| (v, swaps))
    });
    let candidates = candidates.into_iter().collect::<Result<Vec<_>>>()?;
    let draws = candidates.iter().map(|&(_, s)| s).sum();

    let mut best: Option<usize> = None;
    let mut best_value = state.value;
    for (j0, &(v, _)) in candidates.iter().enumerate() {
        if v < best_value {
            best_value = v;
            best = Some(j0);
        }
    }

    let mut report = StepReport {
        omega,
        samples,
        accepted: None,
        swaps: 0,
        draws,
    };
    let keep = |state: &SfwState<P::Decision>| SfwState {
        k: k + 1,
        ..state.clone()
    };
    let Some(j0) = best else {
        return Ok((keep(state), report));
    };
    let j = j0 + 1;
    let x: Vec<P::Decision> = state
        .x
        .iter()
        .zip(&responses)
        .enumerate()
        .map(|(i, (xi, (x_bar, _)))| {
            if selection_draw(seed, k, j, i, omega) {
                x_bar.clone()
            } else {
                xi.clone()
            }
        })
        .collect();
    let next = SfwState::from_profile(problem, k + 1, x)?;
    // The candidate was ranked on an incrementally updated aggregate; keep the
    // incumbent if a full re-evaluation loses the improvement to rounding.
    if next.value > state.value {
        return Ok((keep(state), report));
    }
    report.accepted = Some(j);
    report.swaps = candidates[j0].1;
    Ok((next, report))
}

pub fn sfw_run<P, E>(problem: &P, schedule: &SfwSchedule, exec: &E) -> Result<SfwRunResult<P::Decision>>
where
    P: AggregativeProblem,
    E: Executor,
{
    sfw_run_with(problem, schedule, exec, |_| {})
}

/// Runs `K` iterations from [`sfw_start`], calling `observe` after each row.
pub fn sfw_run_with<P, E, O>(
    problem: &P,
    schedule: &SfwSchedule,
    exec: &E,
    mut observe: O,
) -> Result<SfwRunResult<P::Decision>>
where
    P: AggregativeProblem,
    E: Executor,
    O: FnMut(&SfwRecord),
{
    schedule.check()?;
    problem.check()?;
    let mut state = sfw_start(problem)?;
    let mut records = Vec::with_capacity(schedule.iterations + 1);
    for k in 0..schedule.iterations {
        let (next, step) = sfw_iterate(problem, schedule, &state, exec)?;
        let record = SfwRecord {
            k,
            value: state.value,
            omega: step.omega,
            samples: step.samples,
            swaps: step.swaps,
            draws: step.draws,
        };
        observe(&record);
        records.push(record);
        state = next;
    }
    let k = schedule.iterations;
    let record = SfwRecord {
        k,
        value: state.value,
        omega: schedule.step.omega(k),
        samples: match &schedule.samples {
            SampleRule::PerIteration(v) => v.get(k).copied().unwrap_or(0),
            rule => rule.at(k),
        },
        swaps: 0,
        draws: 0,
    };
    observe(&record);
    records.push(record);
    Ok(SfwRunResult {
        records,
        best_value: state.value,
        best_x: state.x,
        gap_vs_relaxed: None,
    })
}

/// Quantities of the high-probability convergence bound for `omega_k = 2/(k+2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoremBounds {
    pub c0: f64,
    pub c1: f64,
    pub num_agents: usize,
    pub iterations: usize,
    pub v_k: f64,
    pub m_k: f64,
    /// `4 C1 / K`.
    pub expectation_bound: f64,
    pub epsilon: f64,
    /// `1 - exp(-eps^2 N / (2 (v_K + eps m_K / 3)))` at [`epsilon`](Self::epsilon).
    pub probability_lower_bound: f64,
    /// `false` when `K` lies outside `1..=2N`, where the bound is not
    /// guaranteed.
    pub certified: bool,
}

impl TheoremBounds {
    pub fn probability_at(&self, epsilon: f64) -> f64 {
        probability(self.num_agents, self.v_k, self.m_k, epsilon)
    }
}

fn probability(n: usize, v: f64, m: f64, eps: f64) -> f64 {
    let denom = 2.0 * (v + eps * m / 3.0);
    if denom <= 0.0 {
        return 1.0;
    }
    1.0 - libm::exp(-eps * eps * n as f64 / denom)
}

pub fn theorem_bounds(
    c0: f64,
    c1: f64,
    num_agents: usize,
    iterations: usize,
    samples: &SampleRule,
    epsilon: f64,
) -> Result<TheoremBounds> {
    if iterations == 0 {
        return Err(Error::ZeroIterations);
    }
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    if let SampleRule::PerIteration(v) = samples {
        if v.len() < iterations {
            return Err(Error::InvalidParameter(format!(
                "{} sample counts for K = {iterations}",
                v.len()
            )));
        }
    }
    let kf = iterations as f64;
    let mut sum = 0.0;
    let mut max = 0.0f64;
    for k in 1..iterations {
        let nk = samples.at(k);
        if nk == 0 {
            return Err(Error::InvalidParameter("n_k must be at least 1".into()));
        }
        let (k, nk) = (k as f64, nk as f64);
        sum += k * (k + 1.0) * (k + 1.0) / nk;
        max = max.max((k + 1.0) * (k + 2.0) / nk);
    }
    let v_k = 2.0 * c0 * c0 / (kf * kf * (kf + 1.0) * (kf + 1.0)) * sum;
    let m_k = c0 / (kf * (kf + 1.0)) * max;
    Ok(TheoremBounds {
        c0,
        c1,
        num_agents,
        iterations,
        v_k,
        m_k,
        expectation_bound: 4.0 * c1 / kf,
        epsilon,
        probability_lower_bound: probability(num_agents, v_k, m_k, epsilon),
        certified: iterations <= 2 * num_agents,
    })
}
