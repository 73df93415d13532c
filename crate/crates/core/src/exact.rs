//! Exact minimization of `J` by enumerating the product of the agents'
//! trajectory sets. Only usable on tiny instances; guarded by a cap.

use alloc::vec;
use alloc::vec::Vec;

use crate::aggregative::{self, AggregateVector};
use crate::exec::Executor;
use crate::model::{OcInstance, Trajectory};
use crate::{Error, Result};

pub const DEFAULT_CAP: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ExactSolution {
    pub x: Vec<Trajectory>,
    pub value: f64,
    /// Number of profiles evaluated.
    pub profiles: u128,
}

/// Size of the product space, refusing it if above `cap`.
pub fn check_size(instance: &OcInstance, cap: u128) -> Result<u128> {
    let size = instance.profile_count();
    if size > cap {
        return Err(Error::CapExceeded { size, cap });
    }
    Ok(size)
}

/// Global minimizer of `J` over all feasible profiles.
///
/// Profiles are visited in lexicographic order (agent 0 most significant,
/// each agent's trajectories in [`AgentSpec::trajectories`] order) and the
/// first minimizer wins, whatever the executor.
///
/// [`AgentSpec::trajectories`]: crate::model::AgentSpec::trajectories
pub fn enumerate_optimum<E: Executor>(instance: &OcInstance, cap: u128, exec: &E) -> Result<ExactSolution> {
    instance.ensure_valid()?;
    let size = check_size(instance, cap)?;
    let lists: Vec<Vec<Trajectory>> = instance.agents.iter().map(|a| a.trajectories()).collect();
    let contributions = lists
        .iter()
        .enumerate()
        .map(|(i, list)| {
            list.iter()
                .map(|x| instance.contribution_vector(i, x))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let blocks = instance.social.len();
    let n = lists.len();

    let partial = exec.map(lists[0].len(), |first| {
        let mut idx = vec![0usize; n];
        idx[0] = first;
        let mut best: Option<(f64, Vec<usize>)> = None;
        loop {
            let y = AggregateVector::mean_of(
                blocks,
                idx.iter().enumerate().map(|(i, &c)| contributions[i][c].as_slice()),
            );
            let v = aggregative::evaluate_social(&instance.social, &y)?;
            if best.as_ref().is_none_or(|(b, _)| v < *b) {
                best = Some((v, idx.clone()));
            }
            // Odometer over agents 1..N, last agent fastest.
            let mut i = n;
            loop {
                i -= 1;
                if i == 0 {
                    return Ok(best);
                }
                idx[i] += 1;
                if idx[i] < lists[i].len() {
                    break;
                }
                idx[i] = 0;
            }
        }
    });

    let mut best: Option<(f64, Vec<usize>)> = None;
    for part in partial {
        if let Some((v, idx)) = part? {
            if best.as_ref().is_none_or(|(b, _)| v < *b) {
                best = Some((v, idx));
            }
        }
    }
    let (value, idx) = best.ok_or(Error::InvalidParameter("no feasible profile".into()))?;
    Ok(ExactSolution {
        x: idx.iter().enumerate().map(|(i, &c)| lists[i][c].clone()).collect(),
        value,
        profiles: size,
    })
}
