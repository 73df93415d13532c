//! Seeded random instances for tests, benchmarks and cross-checks.
//!
//! Generated instances always pass validation: every `(t, s)` has at least
//! one feasible control and the terminal social cost is the identity. Values
//! are rounded to one decimal so that ties occur now and then.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::aggregative::SocialCost;
use crate::model::{AgentSpec, Move, OcInstance};
use crate::rng::CounterRng;

/// Inclusive size ranges and value ranges for [`random_instance`].
#[derive(Debug, Clone)]
pub struct Shape {
    pub agents: (usize, usize),
    pub horizon: (usize, usize),
    pub states: (usize, usize),
    pub controls: (usize, usize),
    /// Probability that a control is feasible at a given `(t, s)`.
    pub density: f64,
    pub contribution_range: (f64, f64),
    pub cost_range: (f64, f64),
    pub alpha_range: (f64, f64),
    pub target_range: (f64, f64),
}

impl Default for Shape {
    fn default() -> Self {
        Self {
            agents: (1, 3),
            horizon: (1, 4),
            states: (1, 5),
            controls: (1, 4),
            density: 0.6,
            contribution_range: (-2.0, 3.0),
            cost_range: (0.0, 2.0),
            alpha_range: (0.0, 2.0),
            target_range: (-1.0, 2.0),
        }
    }
}

fn pick(rng: &mut CounterRng, (lo, hi): (usize, usize)) -> usize {
    rng.int_inclusive(lo as i64, hi as i64) as usize
}

fn tenth(v: f64) -> f64 {
    libm::round(v * 10.0) / 10.0
}

fn labels(prefix: &str, n: usize) -> Vec<String> {
    (0..n)
        .map(|k| {
            let mut s = String::from(prefix);
            s.push_str(&k.to_string());
            s
        })
        .collect()
}

pub fn random_agent(rng: &mut CounterRng, shape: &Shape, horizon: usize) -> AgentSpec {
    let n_states = pick(rng, shape.states);
    let n_controls = pick(rng, shape.controls);
    let n_initial = rng.int_inclusive(1, n_states.min(2) as i64) as usize;
    let mut initial = Vec::new();
    while initial.len() < n_initial {
        let s = pick(rng, (0, n_states - 1));
        if !initial.contains(&s) {
            initial.push(s);
        }
    }
    let mut agent = AgentSpec::new(labels("s", n_states), labels("u", n_controls), horizon);
    agent.set_initial_states(initial);
    for t in 0..=horizon {
        for s in 0..n_states {
            let forced = pick(rng, (0, n_controls - 1));
            for u in 0..n_controls {
                if u != forced && rng.next_f64() >= shape.density {
                    continue;
                }
                let (hl, hh) = shape.contribution_range;
                let (cl, ch) = shape.cost_range;
                agent.allow(
                    t,
                    s,
                    u,
                    Move {
                        next: pick(rng, (0, n_states - 1)),
                        contribution: tenth(rng.uniform(hl, hh)),
                        cost: tenth(rng.uniform(cl, ch)),
                    },
                );
            }
        }
    }
    agent
}

pub fn random_social(rng: &mut CounterRng, shape: &Shape, horizon: usize) -> Vec<SocialCost> {
    let mut social: Vec<SocialCost> = (0..=horizon)
        .map(|_| {
            let roll = rng.next_f64();
            if roll < 0.7 {
                SocialCost::Quadratic {
                    alpha: tenth(rng.uniform(shape.alpha_range.0, shape.alpha_range.1)),
                    target: tenth(rng.uniform(shape.target_range.0, shape.target_range.1)),
                }
            } else if roll < 0.85 {
                SocialCost::Linear {
                    weight: tenth(rng.uniform(-1.0, 1.0)),
                }
            } else {
                SocialCost::Zero
            }
        })
        .collect();
    social.push(SocialCost::Identity);
    social
}

pub fn random_instance(seed: u64, shape: &Shape) -> OcInstance {
    let mut rng = CounterRng::new(seed, 0x5359_4e54);
    let horizon = pick(&mut rng, shape.horizon);
    let n = pick(&mut rng, shape.agents);
    let agents = (0..n).map(|_| random_agent(&mut rng, shape, horizon)).collect();
    let social = random_social(&mut rng, shape, horizon);
    OcInstance::new(horizon, agents, social)
}
