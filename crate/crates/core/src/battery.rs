//! Battery-fleet charging scenario.
//!
//! Battery `i` starts at charge `s_in`, can never exceed `s_max` and charges
//! by `u in 0..=min(u_max, s_max - s)` per step, additively. The fleet's
//! average charging rate tracks a target profile `c^t` under a quadratic
//! penalty `alpha^t (y_t - c^t)^2` for `t < T`; each battery pays
//! `beta_i (s_max - s^T)^2` for its final shortfall.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::aggregative::SocialCost;
use crate::bounds::{compute_constants, BoundReport};
use crate::model::{AgentSpec, Move, OcInstance};
use crate::rng::CounterRng;
use crate::{Error, Result};

const AGENT_STREAM: u64 = 1 << 32;
const ALPHA_STREAM: u64 = 2 << 32;

#[derive(Debug, Clone, PartialEq)]
pub struct BatteryParams {
    pub agents: usize,
    pub horizon: usize,
    pub u_max: i64,
    /// Inclusive integer range for the initial charge.
    pub s_in_range: (i64, i64),
    /// Inclusive integer range for the capacity.
    pub s_max_range: (i64, i64),
    /// `alpha^t` is drawn uniformly from `[lo, hi)`.
    pub alpha_range: (f64, f64),
    /// `beta_i` is drawn uniformly from `[lo, hi)`.
    pub beta_range: (f64, f64),
    pub target_scale: f64,
    /// Use `scale * (sin(pi t / 12) + 1)` instead of the floored profile.
    pub smooth_target: bool,
    pub seed: u64,
}

impl Default for BatteryParams {
    fn default() -> Self {
        Self {
            agents: 100,
            horizon: 24,
            u_max: 4,
            s_in_range: (0, 20),
            s_max_range: (20, 40),
            alpha_range: (1.0, 2.0),
            beta_range: (0.0, 1.0),
            target_scale: 1.5,
            smooth_target: false,
            seed: 0,
        }
    }
}

impl BatteryParams {
    pub fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.agents == 0 || self.horizon == 0 {
            return bad("agent count and horizon must be positive".into());
        }
        if self.u_max < 1 {
            return bad(format!("u_max must be positive, got {}", self.u_max));
        }
        let (a, b) = self.s_in_range;
        let (c, d) = self.s_max_range;
        if a > b || c > d || a < 0 {
            return bad(format!("charge ranges must be nonempty and nonnegative: [{a}, {b}], [{c}, {d}]"));
        }
        if b > c {
            return bad(format!("initial charges [{a}, {b}] may exceed capacities [{c}, {d}]"));
        }
        let real = |(lo, hi): (f64, f64), name: &str| {
            if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
                return Err(Error::InvalidParameter(format!("{name} range [{lo}, {hi}] must be finite, nonnegative and ordered")));
            }
            Ok(())
        };
        real(self.alpha_range, "alpha")?;
        real(self.beta_range, "beta")?;
        if !self.target_scale.is_finite() {
            return bad("target scale must be finite".into());
        }
        Ok(())
    }
}

/// Per-battery parameters drawn by [`generate_fleet`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Battery {
    pub s_in: i64,
    pub s_max: i64,
    pub u_max: i64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fleet {
    pub batteries: Vec<Battery>,
    pub alpha: Vec<f64>,
    pub target: Vec<f64>,
    pub instance: OcInstance,
}

/// `scale * floor(sin(pi t / 12) + 1)`, or without the floor when `smooth`.
pub fn target_profile(t: usize, horizon: usize, scale: f64, smooth: bool) -> Result<f64> {
    if t >= horizon {
        return Err(Error::InvalidParameter(format!(
            "target time {t} outside 0..{horizon}"
        )));
    }
    let wave = libm::sin(PI * t as f64 / 12.0) + 1.0;
    Ok(if smooth { scale * wave } else { scale * libm::floor(wave) })
}

pub fn battery_agent(b: &Battery, horizon: usize) -> AgentSpec {
    let n_states = (b.s_max - b.s_in + 1) as usize;
    let states = (b.s_in..=b.s_max).map(|s| s.to_string()).collect();
    let controls = (0..=b.u_max).map(|u| u.to_string()).collect();
    AgentSpec::from_fn(states, controls, alloc::vec![0], horizon, |t, s, u| {
        let charge = b.s_in + s as i64;
        let u_i = u as i64;
        if u_i > b.u_max.min(b.s_max - charge) {
            return None;
        }
        let shortfall = (b.s_max - charge) as f64;
        let (contribution, cost) = if t < horizon {
            (u as f64, 0.0)
        } else {
            (0.0, b.beta * shortfall * shortfall)
        };
        debug_assert!(s + u < n_states);
        Some(Move {
            next: s + u,
            contribution,
            cost,
        })
    })
}

pub fn generate_fleet(params: &BatteryParams) -> Result<Fleet> {
    params.check()?;
    let batteries: Vec<Battery> = (0..params.agents)
        .map(|i| {
            let mut rng = CounterRng::new(params.seed, AGENT_STREAM | i as u64);
            let s_in = rng.int_inclusive(params.s_in_range.0, params.s_in_range.1);
            let s_max = rng.int_inclusive(params.s_max_range.0, params.s_max_range.1);
            let beta = rng.uniform(params.beta_range.0, params.beta_range.1);
            Battery {
                s_in,
                s_max,
                u_max: params.u_max,
                beta,
            }
        })
        .collect();
    let alpha: Vec<f64> = (0..params.horizon)
        .map(|t| {
            let mut rng = CounterRng::new(params.seed, ALPHA_STREAM | t as u64);
            rng.uniform(params.alpha_range.0, params.alpha_range.1)
        })
        .collect();
    let target = (0..params.horizon)
        .map(|t| target_profile(t, params.horizon, params.target_scale, params.smooth_target))
        .collect::<Result<Vec<f64>>>()?;
    let mut social: Vec<SocialCost> = alpha
        .iter()
        .zip(&target)
        .map(|(&alpha, &target)| SocialCost::Quadratic { alpha, target })
        .collect();
    social.push(SocialCost::Zero);
    social.push(SocialCost::Identity);
    let agents = batteries
        .iter()
        .map(|b| battery_agent(b, params.horizon))
        .collect();
    Ok(Fleet {
        batteries,
        alpha,
        target,
        instance: OcInstance::new(params.horizon, agents, social),
    })
}

pub fn generate(params: &BatteryParams) -> Result<OcInstance> {
    generate_fleet(params).map(|f| f.instance)
}

/// Constants with the coarse battery bounds: `d_it <= u_max` and
/// `L~_t <= 2 max(alpha)` on the charging blocks; the remaining blocks keep
/// their exact values.
pub fn coarse_constants(instance: &OcInstance, params: &BatteryParams) -> Result<BoundReport> {
    let tight = compute_constants(instance)?;
    let horizon = instance.horizon;
    let u_max = params.u_max as f64;
    let alpha_hi = params.alpha_range.1;
    let mut diameters = tight.diameters.clone();
    for row in &mut diameters {
        for d in row.iter_mut().take(horizon) {
            *d = u_max;
        }
    }
    let mut intervals = tight.intervals.clone();
    let mut lipschitz = tight.lipschitz.clone();
    let mut grad = tight.grad_lipschitz.clone();
    for t in 0..horizon {
        let target = match instance.social[t] {
            SocialCost::Quadratic { target, .. } => target,
            _ => 0.0,
        };
        intervals[t] = (0.0, u_max);
        lipschitz[t] = 2.0 * alpha_hi * f64::max(libm::fabs(target), libm::fabs(u_max - target));
        grad[t] = 2.0 * alpha_hi;
    }
    Ok(BoundReport::assemble(
        instance.num_agents(),
        diameters,
        intervals,
        lipschitz,
        grad,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregative::evaluate_j;
    use crate::model::Trajectory;
    use alloc::vec;

    #[test]
    fn target_profile_values() {
        assert_eq!(target_profile(0, 24, 1.5, false).unwrap(), 1.5);
        assert_eq!(target_profile(6, 24, 1.5, false).unwrap(), 3.0);
        assert_eq!(target_profile(13, 24, 1.5, false).unwrap(), 0.0);
        assert!(target_profile(24, 24, 1.5, false).is_err());
        let levels: Vec<f64> = (0..24).map(|t| target_profile(t, 24, 1.5, false).unwrap()).collect();
        assert!(levels.iter().all(|&c| c == 0.0 || c == 1.5 || c == 3.0));
        assert!(libm::fabs(target_profile(6, 24, 1.5, true).unwrap() - 3.0) < 1e-15);
    }

    #[test]
    fn defaults_respect_ranges() {
        let fleet = generate_fleet(&BatteryParams::default()).unwrap();
        assert_eq!(fleet.instance.num_agents(), 100);
        assert_eq!(fleet.instance.horizon, 24);
        for b in &fleet.batteries {
            assert!((0..=20).contains(&b.s_in));
            assert!((20..=40).contains(&b.s_max));
            assert!((0.0..1.0).contains(&b.beta));
            assert_eq!(b.u_max, 4);
        }
        assert!(fleet.alpha.iter().all(|a| (1.0..2.0).contains(a)));
        assert!(fleet.instance.validate().is_empty());
    }

    #[test]
    fn generation_is_deterministic() {
        let p = BatteryParams {
            seed: 77,
            ..BatteryParams::default()
        };
        assert_eq!(generate(&p).unwrap(), generate(&p).unwrap());
        let q = BatteryParams { seed: 78, ..p.clone() };
        assert_ne!(generate(&p).unwrap(), generate(&q).unwrap());
    }

    #[test]
    fn degenerate_params_give_the_two_path_agent() {
        let p = BatteryParams {
            agents: 1,
            horizon: 1,
            u_max: 1,
            s_in_range: (0, 0),
            s_max_range: (1, 1),
            ..BatteryParams::default()
        };
        let inst = generate(&p).unwrap();
        // Two charging decisions; the final control is free only when empty.
        assert_eq!(inst.agents[0].count_trajectories(), 3);
        let all = inst.agents[0].trajectories();
        assert_eq!(all.iter().filter(|x| x.controls[1] == 0).count(), 2);
    }

    #[test]
    fn feasible_control_rule() {
        let fleet = generate_fleet(&BatteryParams {
            agents: 10,
            seed: 3,
            ..BatteryParams::default()
        })
        .unwrap();
        for (b, a) in fleet.batteries.iter().zip(&fleet.instance.agents) {
            for t in 0..=24 {
                for s in 0..a.num_states() {
                    let charge = b.s_in + s as i64;
                    for u in 0..a.num_controls() {
                        let expect = (u as i64) <= b.u_max.min(b.s_max - charge);
                        assert_eq!(a.is_allowed(t, s, u), expect);
                        if expect && t < 24 {
                            assert!(b.s_in + a.next_state(t, s, u) as i64 <= b.s_max);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn cost_matches_closed_form() {
        let p = BatteryParams {
            agents: 6,
            horizon: 8,
            seed: 12,
            ..BatteryParams::default()
        };
        let fleet = generate_fleet(&p).unwrap();
        let inst = &fleet.instance;
        let mut rng = CounterRng::new(99, 0);
        for _ in 0..200 {
            let x: Vec<Trajectory> = inst
                .agents
                .iter()
                .map(|a| {
                    let mut s = 0;
                    let mut states = vec![];
                    let mut controls = vec![];
                    for t in 0..=p.horizon {
                        let opts: Vec<usize> = a.controls_at(t, s).collect();
                        let u = opts[rng.int_inclusive(0, opts.len() as i64 - 1) as usize];
                        states.push(s);
                        controls.push(u);
                        if t < p.horizon {
                            s = a.next_state(t, s, u);
                        }
                    }
                    Trajectory { states, controls }
                })
                .collect();
            let n = p.agents as f64;
            let mut closed = 0.0;
            for t in 0..p.horizon {
                let mean = x.iter().map(|xi| xi.controls[t] as f64).sum::<f64>() / n;
                closed += fleet.alpha[t] * (mean - fleet.target[t]) * (mean - fleet.target[t]);
            }
            let terminal: f64 = x
                .iter()
                .zip(&fleet.batteries)
                .map(|(xi, b)| {
                    let s_t = (b.s_in + xi.states[p.horizon] as i64) as f64;
                    b.beta * (s_t - b.s_max as f64) * (s_t - b.s_max as f64)
                })
                .sum();
            closed += terminal / n;
            let direct = inst.evaluate_oc_cost(&x).unwrap();
            let via = evaluate_j(inst, &x).unwrap();
            assert!(libm::fabs(direct - closed) <= 1e-12 * (1.0 + closed));
            assert!(libm::fabs(via - closed) <= 1e-12 * (1.0 + closed));
        }
    }

    #[test]
    fn two_charging_agents_aggregate_to_one() {
        let p = BatteryParams {
            agents: 2,
            horizon: 3,
            u_max: 1,
            s_in_range: (0, 0),
            s_max_range: (5, 5),
            ..BatteryParams::default()
        };
        let inst = generate(&p).unwrap();
        let x = Trajectory {
            states: vec![0, 1, 2, 3],
            controls: vec![1, 1, 1, 0],
        };
        let y = inst.aggregate(&[x.clone(), x]).unwrap();
        assert_eq!(&y.as_slice()[..3], &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn coarse_bound_on_defaults_is_7_68() {
        let p = BatteryParams::default();
        let inst = generate(&p).unwrap();
        let coarse = coarse_constants(&inst, &p).unwrap();
        assert_eq!(coarse.gap_bound, 7.68);
        assert!(coarse.is_consistent());
        let tight = compute_constants(&inst).unwrap();
        assert!(tight.c1 <= coarse.c1);
        for (dt, dc) in tight.diameters.iter().flatten().zip(coarse.diameters.iter().flatten()) {
            assert!(dt <= dc);
        }
    }

    #[test]
    fn invalid_params_are_rejected() {
        let p = BatteryParams {
            s_in_range: (0, 25),
            ..BatteryParams::default()
        };
        assert!(generate(&p).is_err());
        let p = BatteryParams {
            u_max: 0,
            ..BatteryParams::default()
        };
        assert!(generate(&p).is_err());
    }
}
