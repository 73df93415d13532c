//! Per-agent best response by backward induction.
//!
//! For prices `mu`, the agent minimizes `Σ_t l^t[mu^t](s^t, u^t)` with
//! `l^t[mu^t](s, u) = l^t(s, u) + mu^t h^t(s, u)` over its feasible
//! trajectories. The backward pass computes the value tables `V^t`, with
//! `V^{T+1} = 0`; the forward pass follows first minimizers in state and
//! control order. Cost is `O(T |S| |U|)` per call.

use alloc::vec;
use alloc::vec::Vec;

use crate::aggregative::MultiplierVector;
use crate::model::{AgentSpec, Trajectory};
use crate::{Error, Result};

/// `V^t(s)` for `t = 0..=T+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    horizon: usize,
    num_states: usize,
    values: Vec<f64>,
}

impl ValueTable {
    pub fn get(&self, t: usize, s: usize) -> f64 {
        self.values[t * self.num_states + s]
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.num_states..(t + 1) * self.num_states]
    }
}

/// `l^t(s, u) + mu_t h^t(s, u)`. The terminal block price is taken as 1,
/// which is what the identity terminal cost always yields.
pub fn priced_cost(
    agent: &AgentSpec,
    prices: &MultiplierVector,
    t: usize,
    s: usize,
    u: usize,
) -> Result<f64> {
    check_prices(agent, prices)?;
    if t > agent.horizon() || s >= agent.num_states() || u >= agent.num_controls() || !agent.is_allowed(t, s, u) {
        return Err(Error::Infeasible {
            agent: 0,
            time: t,
            reason: "control not feasible in this state",
        });
    }
    Ok(stage(agent, prices, t, s, u))
}

#[inline]
fn stage(agent: &AgentSpec, prices: &MultiplierVector, t: usize, s: usize, u: usize) -> f64 {
    agent.individual_cost(t, s, u) + prices[t] * agent.contribution(t, s, u)
}

fn check_prices(agent: &AgentSpec, prices: &MultiplierVector) -> Result<()> {
    let blocks = agent.horizon() + 2;
    if prices.len() != blocks {
        return Err(Error::BlockCount {
            expected: blocks,
            got: prices.len(),
        });
    }
    Ok(())
}

pub fn backward_pass(agent: &AgentSpec, prices: &MultiplierVector) -> Result<ValueTable> {
    check_prices(agent, prices)?;
    backward(agent, |t, s, u| stage(agent, prices, t, s, u))
}

/// Returns the optimal trajectory and its priced cost `min_{s0} V^0(s0)`.
pub fn best_response(agent: &AgentSpec, prices: &MultiplierVector) -> Result<(Trajectory, f64)> {
    check_prices(agent, prices)?;
    minimize(agent, |t, s, u| stage(agent, prices, t, s, u))
}

/// Minimizes an arbitrary additive stage cost over the agent's trajectories.
pub fn minimize<F>(agent: &AgentSpec, cost: F) -> Result<(Trajectory, f64)>
where
    F: Fn(usize, usize, usize) -> f64,
{
    let table = backward(agent, &cost)?;
    forward(agent, &table, &cost)
}

/// Minimum and maximum of an additive stage cost over all trajectories.
pub fn range<F>(agent: &AgentSpec, cost: F) -> Result<(f64, f64)>
where
    F: Fn(usize, usize, usize) -> f64,
{
    let (_, lo) = minimize(agent, &cost)?;
    let (_, neg_hi) = minimize(agent, |t, s, u| -cost(t, s, u))?;
    Ok((lo, -neg_hi))
}

fn backward<F>(agent: &AgentSpec, cost: F) -> Result<ValueTable>
where
    F: Fn(usize, usize, usize) -> f64,
{
    let horizon = agent.horizon();
    let n = agent.num_states();
    let mut values = vec![0.0; (horizon + 2) * n];
    for t in (0..=horizon).rev() {
        let (head, tail) = values.split_at_mut((t + 1) * n);
        let here = &mut head[t * n..];
        let ahead = &tail[..n];
        for (s, slot) in here.iter_mut().enumerate() {
            let mut best = f64::INFINITY;
            let mut any = false;
            for u in agent.controls_at(t, s) {
                let v = cost(t, s, u) + continuation(agent, ahead, t, s, u)?;
                if !any || v < best {
                    best = v;
                    any = true;
                }
            }
            if !any {
                return Err(Error::EmptyControlSet {
                    agent: 0,
                    time: t,
                    state: s,
                });
            }
            *slot = best;
        }
    }
    Ok(ValueTable {
        horizon,
        num_states: n,
        values,
    })
}

#[inline]
fn continuation(agent: &AgentSpec, ahead: &[f64], t: usize, s: usize, u: usize) -> Result<f64> {
    if t == agent.horizon() {
        return Ok(0.0);
    }
    ahead
        .get(agent.next_state(t, s, u))
        .copied()
        .ok_or(Error::Infeasible {
            agent: 0,
            time: t,
            reason: "transition leaves the state set",
        })
}

fn forward<F>(agent: &AgentSpec, table: &ValueTable, cost: F) -> Result<(Trajectory, f64)>
where
    F: Fn(usize, usize, usize) -> f64,
{
    let horizon = agent.horizon();
    let first = table.row(0);
    let mut start: Option<(usize, f64)> = None;
    for &s in agent.initial_states() {
        let v = *first.get(s).ok_or(Error::Infeasible {
            agent: 0,
            time: 0,
            reason: "initial state index out of range",
        })?;
        if start.is_none_or(|(_, b)| v < b) {
            start = Some((s, v));
        }
    }
    let (mut s, value) = start.ok_or(Error::EmptyInitialSet { agent: 0 })?;
    let mut states = Vec::with_capacity(horizon + 1);
    let mut controls = Vec::with_capacity(horizon + 1);
    for t in 0..=horizon {
        let ahead = table.row(t + 1);
        let mut pick: Option<(usize, f64)> = None;
        for u in agent.controls_at(t, s) {
            let v = cost(t, s, u) + continuation(agent, ahead, t, s, u)?;
            if pick.is_none_or(|(_, b)| v < b) {
                pick = Some((u, v));
            }
        }
        let (u, _) = pick.ok_or(Error::EmptyControlSet {
            agent: 0,
            time: t,
            state: s,
        })?;
        states.push(s);
        controls.push(u);
        if t < horizon {
            s = agent.next_state(t, s, u);
        }
    }
    Ok((Trajectory { states, controls }, value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::battery::{self, BatteryParams};
    use crate::rng::CounterRng;
    use crate::synthetic::{self, Shape};

    fn two_path_agent() -> AgentSpec {
        // s_in = 0, s_max = 1, u_max = 1, T = 1, beta = 1.
        let p = BatteryParams {
            agents: 1,
            horizon: 1,
            u_max: 1,
            s_in_range: (0, 0),
            s_max_range: (1, 1),
            alpha_range: (1.0, 1.0),
            beta_range: (1.0, 1.0),
            ..BatteryParams::default()
        };
        battery::generate(&p).unwrap().agents.remove(0)
    }

    fn prices(v: &[f64]) -> MultiplierVector {
        MultiplierVector(v.to_vec())
    }

    fn priced_total(agent: &AgentSpec, mu: &MultiplierVector, x: &Trajectory) -> f64 {
        (0..=agent.horizon())
            .map(|t| priced_cost(agent, mu, t, x.states[t], x.controls[t]).unwrap())
            .sum()
    }

    #[test]
    fn priced_cost_examples() {
        let a = two_path_agent();
        // mu_t = 0 leaves the individual cost; h = u = 1 at t = 0 prices to 10.
        assert_eq!(priced_cost(&a, &prices(&[0.0, 0.0, 1.0]), 0, 0, 1).unwrap(), 0.0);
        assert_eq!(priced_cost(&a, &prices(&[10.0, 0.0, 1.0]), 0, 0, 1).unwrap(), 10.0);
        // Terminal: h^T = 0, so the price at T does not matter.
        for mu in [-3.0, 0.0, 7.5] {
            assert_eq!(priced_cost(&a, &prices(&[0.0, mu, 1.0]), 1, 0, 0).unwrap(), 1.0);
        }
        assert!(priced_cost(&a, &prices(&[0.0, 0.0, 1.0]), 0, 1, 1).is_err());
    }

    #[test]
    fn two_path_values() {
        let a = two_path_agent();
        let v = backward_pass(&a, &prices(&[10.0, 0.0, 1.0])).unwrap();
        assert_eq!(v.get(1, 0), 1.0);
        assert_eq!(v.get(1, 1), 0.0);
        assert_eq!(v.get(0, 0), 1.0);
        assert_eq!(v.get(2, 0), 0.0);
        assert_eq!(v.get(2, 1), 0.0);
        let (x, value) = best_response(&a, &prices(&[10.0, 0.0, 1.0])).unwrap();
        assert_eq!(x.controls[0], 0);
        assert_eq!(value, 1.0);

        let v = backward_pass(&a, &prices(&[0.0, 0.0, 1.0])).unwrap();
        assert_eq!(v.get(0, 0), 0.0);
        let (x, value) = best_response(&a, &prices(&[0.0, 0.0, 1.0])).unwrap();
        assert_eq!(x.controls[0], 1);
        assert_eq!(value, 0.0);
    }

    #[test]
    fn zero_costs_pick_first_in_order() {
        let mut inst = synthetic::random_instance(17, &Shape::default());
        let a = &mut inst.agents[0];
        let zero = crate::model::AgentSpec::from_fn(
            a.state_labels().to_vec(),
            a.control_labels().to_vec(),
            a.initial_states().to_vec(),
            a.horizon(),
            |t, s, u| {
                a.is_allowed(t, s, u).then(|| crate::model::Move {
                    next: a.next_state(t, s, u),
                    contribution: 0.0,
                    cost: 0.0,
                })
            },
        );
        let mu = MultiplierVector(vec![0.0; zero.horizon() + 2]);
        let v = backward_pass(&zero, &mu).unwrap();
        for t in 0..=zero.horizon() + 1 {
            for s in 0..zero.num_states() {
                assert_eq!(v.get(t, s), 0.0);
            }
        }
        let (x, value) = best_response(&zero, &mu).unwrap();
        assert_eq!(value, 0.0);
        assert_eq!(x, zero.first_trajectory().unwrap());
    }

    fn random_prices(rng: &mut CounterRng, blocks: usize) -> MultiplierVector {
        MultiplierVector((0..blocks).map(|_| rng.uniform(-5.0, 5.0)).collect())
    }

    #[test]
    fn bellman_consistency() {
        let mut rng = CounterRng::new(1, 0);
        for seed in 0..40 {
            let inst = synthetic::random_instance(seed, &Shape::default());
            for a in &inst.agents {
                let mu = random_prices(&mut rng, a.horizon() + 2);
                let v = backward_pass(a, &mu).unwrap();
                for t in 0..=a.horizon() {
                    for s in 0..a.num_states() {
                        let best = a
                            .controls_at(t, s)
                            .map(|u| {
                                let next = if t < a.horizon() { v.get(t + 1, a.next_state(t, s, u)) } else { 0.0 };
                                stage(a, &mu, t, s, u) + next
                            })
                            .fold(f64::INFINITY, f64::min);
                        assert_eq!(v.get(t, s), best);
                    }
                }
            }
        }
    }

    #[test]
    fn matches_brute_force_on_random_agents() {
        let mut rng = CounterRng::new(2, 0);
        let mut checked = 0;
        let mut seed = 0;
        while checked < 200 {
            seed += 1;
            let inst = synthetic::random_instance(seed, &Shape::default());
            for a in &inst.agents {
                if a.count_trajectories() > 500 {
                    continue;
                }
                let mu = random_prices(&mut rng, a.horizon() + 2);
                let (x, value) = best_response(a, &mu).unwrap();
                let brute = a
                    .trajectories()
                    .iter()
                    .map(|z| priced_total(a, &mu, z))
                    .fold(f64::INFINITY, f64::min);
                assert!((value - brute).abs() <= 1e-9, "{value} vs {brute}");
                assert!((priced_total(a, &mu, &x) - value).abs() <= 1e-9);
                checked += 1;
            }
        }
    }

    #[test]
    fn best_response_is_feasible_and_deterministic() {
        let mut rng = CounterRng::new(3, 0);
        for seed in 0..40 {
            let inst = synthetic::random_instance(seed, &Shape::default());
            for (i, a) in inst.agents.iter().enumerate() {
                let mu = random_prices(&mut rng, a.horizon() + 2);
                let first = best_response(a, &mu).unwrap();
                assert!(inst.is_feasible(i, &first.0).unwrap());
                assert_eq!(first, best_response(a, &mu).unwrap());
            }
        }
    }

    #[test]
    fn monotone_in_prices_for_nonnegative_contributions() {
        let mut rng = CounterRng::new(4, 0);
        for seed in 0..40 {
            let inst = synthetic::random_instance(
                seed,
                &Shape {
                    contribution_range: (0.0, 3.0),
                    ..Shape::default()
                },
            );
            for a in &inst.agents {
                let mu = random_prices(&mut rng, a.horizon() + 2);
                let (_, base) = best_response(a, &mu).unwrap();
                let t = rng.int_inclusive(0, a.horizon() as i64) as usize;
                let mut up = mu.clone();
                up.0[t] += rng.uniform(0.0, 4.0);
                let (_, raised) = best_response(a, &up).unwrap();
                assert!(raised >= base);
            }
        }
    }

    #[test]
    fn range_matches_enumeration() {
        for seed in 0..30 {
            let inst = synthetic::random_instance(seed, &Shape::default());
            for a in &inst.agents {
                let t = seed as usize % (a.horizon() + 1);
                let (lo, hi) = range(a, |tt, s, u| if tt == t { a.contribution(tt, s, u) } else { 0.0 }).unwrap();
                let vals: Vec<f64> = a
                    .trajectories()
                    .iter()
                    .map(|x| a.contribution(t, x.states[t], x.controls[t]))
                    .collect();
                assert_eq!(lo, vals.iter().copied().fold(f64::INFINITY, f64::min));
                assert_eq!(hi, vals.iter().copied().fold(f64::NEG_INFINITY, f64::max));
            }
        }
    }

    #[test]
    fn wrong_price_length_is_rejected() {
        let a = two_path_agent();
        assert!(matches!(
            best_response(&a, &prices(&[1.0])),
            Err(Error::BlockCount { expected: 3, got: 1 })
        ));
    }
}
