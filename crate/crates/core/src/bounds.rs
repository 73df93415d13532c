//! Relaxation constants `C0`, `C1` and the relaxation-gap bound `C1 / (2N)`.
//!
//! The range set of every contribution block is never materialized. For each
//! agent and block we compute the exact minimum and maximum of `g_it` over
//! the agent's trajectories by dynamic programming; their difference is the
//! diameter `d_it`, and the averaged extremes give an interval enclosing
//! `conv(Y_t)` on which Lipschitz constants are evaluated. That interval can
//! overestimate `L_t`, which keeps the bounds valid.

use alloc::vec::Vec;

use crate::aggregative::SocialCost;
use crate::model::OcInstance;
use crate::{dp, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub num_agents: usize,
    /// `d[i][t]`.
    pub diameters: Vec<Vec<f64>>,
    /// Interval enclosing `conv(Y_t)`, per block.
    pub intervals: Vec<(f64, f64)>,
    pub lipschitz: Vec<f64>,
    pub grad_lipschitz: Vec<f64>,
    pub c0: f64,
    pub c1: f64,
    pub gap_bound: f64,
}

impl BoundReport {
    /// Derives `C0`, `C1` and the gap bound from per-block data.
    pub fn assemble(
        num_agents: usize,
        diameters: Vec<Vec<f64>>,
        intervals: Vec<(f64, f64)>,
        lipschitz: Vec<f64>,
        grad_lipschitz: Vec<f64>,
    ) -> Self {
        let (c0, c1, gap_bound) = constants(num_agents, &diameters, &lipschitz, &grad_lipschitz);
        Self {
            num_agents,
            diameters,
            intervals,
            lipschitz,
            grad_lipschitz,
            c0,
            c1,
            gap_bound,
        }
    }

    /// Whether the stored constants are exactly what the stored per-block data
    /// yields.
    pub fn is_consistent(&self) -> bool {
        let (c0, c1, gap) = constants(
            self.num_agents,
            &self.diameters,
            &self.lipschitz,
            &self.grad_lipschitz,
        );
        c0.to_bits() == self.c0.to_bits()
            && c1.to_bits() == self.c1.to_bits()
            && gap.to_bits() == self.gap_bound.to_bits()
    }

    pub fn num_blocks(&self) -> usize {
        self.lipschitz.len()
    }

    /// `max_i d_it`.
    pub fn max_diameter(&self, t: usize) -> f64 {
        self.diameters.iter().map(|d| d[t]).fold(0.0, f64::max)
    }
}

fn constants(n: usize, d: &[Vec<f64>], lip: &[f64], glip: &[f64]) -> (f64, f64, f64) {
    let mut c0 = 0.0;
    let mut c1_sum = 0.0;
    for t in 0..lip.len() {
        let max_d = d.iter().map(|row| row[t]).fold(0.0, f64::max);
        c0 += lip[t] * max_d;
        let sq: f64 = d.iter().map(|row| row[t] * row[t]).sum();
        c1_sum += glip[t] * sq;
    }
    let nf = n as f64;
    let c1 = c1_sum / nf;
    (c0, c1, c1 / (2.0 * nf))
}

/// `(min, max)` of `g_it` over agent `i`'s trajectories, indexed `[i][t]`.
pub fn block_ranges(instance: &OcInstance) -> Result<Vec<Vec<(f64, f64)>>> {
    instance.ensure_valid()?;
    let horizon = instance.horizon;
    instance
        .agents
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let mut ranges = Vec::with_capacity(horizon + 2);
            for t in 0..=horizon {
                let r = dp::range(a, |tt, s, u| if tt == t { a.contribution(tt, s, u) } else { 0.0 });
                ranges.push(r.map_err(|e| e.for_agent(i))?);
            }
            let r = dp::range(a, |t, s, u| a.individual_cost(t, s, u));
            ranges.push(r.map_err(|e| e.for_agent(i))?);
            Ok(ranges)
        })
        .collect()
}

/// Assembles a report from per-agent block ranges.
pub fn constants_from_ranges(social: &[SocialCost], ranges: &[Vec<(f64, f64)>]) -> BoundReport {
    let n = ranges.len();
    let nf = n as f64;
    let diameters: Vec<Vec<f64>> = ranges
        .iter()
        .map(|row| row.iter().map(|&(lo, hi)| hi - lo).collect())
        .collect();
    let intervals: Vec<(f64, f64)> = (0..social.len())
        .map(|t| {
            let lo: f64 = ranges.iter().map(|row| row[t].0).sum();
            let hi: f64 = ranges.iter().map(|row| row[t].1).sum();
            (lo / nf, hi / nf)
        })
        .collect();
    let lipschitz = social
        .iter()
        .zip(&intervals)
        .map(|(c, &(lo, hi))| c.lipschitz_on(lo, hi))
        .collect();
    let grad_lipschitz = social.iter().map(SocialCost::gradient_lipschitz).collect();
    BoundReport::assemble(n, diameters, intervals, lipschitz, grad_lipschitz)
}

pub fn compute_constants(instance: &OcInstance) -> Result<BoundReport> {
    let ranges = block_ranges(instance)?;
    Ok(constants_from_ranges(&instance.social, &ranges))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AgentSpec, Move};
    use crate::synthetic::{self, Shape};
    use alloc::string::ToString;
    use alloc::vec;

    fn labels(n: usize) -> Vec<alloc::string::String> {
        (0..n).map(|k| k.to_string()).collect()
    }

    #[test]
    fn constant_contributions_have_zero_gap() {
        let agent = AgentSpec::from_fn(labels(3), labels(2), vec![0, 1], 2, |t, s, u| {
            (t <= 2).then_some(Move {
                next: (s + u) % 3,
                contribution: 1.5,
                cost: 0.0,
            })
        });
        let inst = OcInstance::new(2, vec![agent.clone(), agent], vec![
            SocialCost::Quadratic { alpha: 2.0, target: 0.0 },
            SocialCost::Quadratic { alpha: 1.0, target: 3.0 },
            SocialCost::Zero,
            SocialCost::Identity,
        ]);
        let r = compute_constants(&inst).unwrap();
        assert!(r.diameters.iter().flatten().all(|&d| d == 0.0));
        assert_eq!(r.c1, 0.0);
        assert_eq!(r.gap_bound, 0.0);
    }

    #[test]
    fn single_agent_hand_example() {
        // h in {0, 4}, alpha = 1: d = 4, L~ = 2, C1 = 2 * 16 = 32, gap = 16.
        let agent = AgentSpec::from_fn(labels(1), labels(2), vec![0], 1, |t, _, u| {
            Some(Move {
                next: 0,
                contribution: if t == 0 { 4.0 * u as f64 } else { 0.0 },
                cost: 0.0,
            })
        });
        let inst = OcInstance::new(1, vec![agent], vec![
            SocialCost::Quadratic { alpha: 1.0, target: 0.0 },
            SocialCost::Zero,
            SocialCost::Identity,
        ]);
        let r = compute_constants(&inst).unwrap();
        assert_eq!(r.diameters[0][0], 4.0);
        assert_eq!(r.grad_lipschitz[0], 2.0);
        assert_eq!(r.c1, 32.0);
        assert_eq!(r.gap_bound, 16.0);
        // L_0 on [0, 4] around target 0.
        assert_eq!(r.lipschitz[0], 8.0);
        assert_eq!(r.c0, 8.0 * 4.0);
    }

    #[test]
    fn reports_are_internally_consistent() {
        for seed in 0..50 {
            let inst = synthetic::random_instance(seed, &Shape::default());
            let r = compute_constants(&inst).unwrap();
            assert!(r.is_consistent());
            let mut tampered = r.clone();
            tampered.c1 += 1.0;
            assert!(!tampered.is_consistent());
        }
    }

    #[test]
    fn diameters_match_enumeration() {
        for seed in 0..60 {
            let inst = synthetic::random_instance(seed, &Shape::default());
            let r = compute_constants(&inst).unwrap();
            for (i, a) in inst.agents.iter().enumerate() {
                let all = a.trajectories();
                if all.len() > 200 {
                    continue;
                }
                let gs: Vec<Vec<f64>> = all.iter().map(|x| inst.contribution_vector(i, x).unwrap()).collect();
                for t in 0..inst.horizon + 2 {
                    let lo = gs.iter().map(|g| g[t]).fold(f64::INFINITY, f64::min);
                    let hi = gs.iter().map(|g| g[t]).fold(f64::NEG_INFINITY, f64::max);
                    // The terminal block sums several doubles; summation order may differ.
                    assert!(libm::fabs(r.diameters[i][t] - (hi - lo)) <= 1e-12 * (1.0 + hi - lo));
                }
            }
        }
    }

    #[test]
    fn invalid_instance_is_rejected() {
        let mut inst = synthetic::random_instance(5, &Shape::default());
        inst.agents[0].set_initial_states(vec![]);
        assert!(compute_constants(&inst).is_err());
    }
}
