//! The abstract aggregative problem `min_x f(G(x))` with
//! `G(x) = (1/N) Σ_i g_i(x_i)` and a blockwise separable convex `f`.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Index;

use crate::{Error, Result};

/// Convex scalar cost applied to one block of the aggregate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SocialCost {
    /// `alpha * (y - target)^2`, `alpha >= 0`.
    Quadratic { alpha: f64, target: f64 },
    /// `weight * y`.
    Linear { weight: f64 },
    /// `y`; houses the averaged individual costs in the terminal block.
    Identity,
    Zero,
}

impl SocialCost {
    pub fn value(&self, y: f64) -> f64 {
        match *self {
            SocialCost::Quadratic { alpha, target } => {
                let d = y - target;
                alpha * d * d
            }
            SocialCost::Linear { weight } => weight * y,
            SocialCost::Identity => y,
            SocialCost::Zero => 0.0,
        }
    }

    pub fn derivative(&self, y: f64) -> f64 {
        match *self {
            SocialCost::Quadratic { alpha, target } => 2.0 * alpha * (y - target),
            SocialCost::Linear { weight } => weight,
            SocialCost::Identity => 1.0,
            SocialCost::Zero => 0.0,
        }
    }

    /// Lipschitz constant of the cost on `[lo, hi]`.
    pub fn lipschitz_on(&self, lo: f64, hi: f64) -> f64 {
        match *self {
            SocialCost::Quadratic { alpha, target } => {
                2.0 * alpha * f64::max(libm::fabs(lo - target), libm::fabs(hi - target))
            }
            SocialCost::Linear { weight } => libm::fabs(weight),
            SocialCost::Identity => 1.0,
            SocialCost::Zero => 0.0,
        }
    }

    /// Lipschitz constant of the derivative (independent of the interval for
    /// every supported kind).
    pub fn gradient_lipschitz(&self) -> f64 {
        match *self {
            SocialCost::Quadratic { alpha, .. } => 2.0 * alpha,
            _ => 0.0,
        }
    }
}

/// A point `y` of the aggregate space, one real per block.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateVector(pub Vec<f64>);

/// Prices `mu_t = f_t'(y_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierVector(pub Vec<f64>);

macro_rules! block_vector {
    ($name:ident) => {
        impl $name {
            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.0
            }
        }

        impl Index<usize> for $name {
            type Output = f64;

            fn index(&self, t: usize) -> &f64 {
                &self.0[t]
            }
        }
    };
}

block_vector!(AggregateVector);
block_vector!(MultiplierVector);

impl AggregateVector {
    /// `<mu, self>`.
    pub fn dot(&self, prices: &MultiplierVector) -> f64 {
        self.0.iter().zip(&prices.0).map(|(y, m)| y * m).sum()
    }

    /// `(1 - w) * self + w * other`.
    pub fn lerp(&self, other: &AggregateVector, w: f64) -> AggregateVector {
        AggregateVector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| (1.0 - w) * a + w * b)
                .collect(),
        )
    }

    /// Averages per-agent contribution vectors: sum in agent order, then
    /// divide by the agent count.
    pub fn mean_of<'a, I>(blocks: usize, contributions: I) -> AggregateVector
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut sum = vec![0.0; blocks];
        let mut n = 0usize;
        for g in contributions {
            for (s, v) in sum.iter_mut().zip(g) {
                *s += v;
            }
            n += 1;
        }
        let n = n as f64;
        AggregateVector(sum.into_iter().map(|s| s / n).collect())
    }
}

/// An aggregative optimization problem over per-agent decision sets.
///
/// Implementors supply the contribution map `g_i`, the social costs and the
/// per-agent linear minimization oracle; the Frank-Wolfe solvers are written
/// against this trait only.
pub trait AggregativeProblem: Sync {
    type Decision: Clone + PartialEq + Send + Sync;

    fn num_agents(&self) -> usize;

    /// One social cost per aggregate block.
    fn social_costs(&self) -> &[SocialCost];

    /// `g_i(x_i)`, one entry per block. Fails if `decision` is infeasible.
    fn contribution(&self, agent: usize, decision: &Self::Decision) -> Result<Vec<f64>>;

    /// A minimizer of `<prices, g_i(x_i)>` over agent `agent`'s decisions.
    fn best_response(&self, agent: usize, prices: &MultiplierVector) -> Result<Self::Decision>;

    /// A fixed feasible decision used to start the solvers.
    fn initial_decision(&self, agent: usize) -> Result<Self::Decision>;

    fn num_blocks(&self) -> usize {
        self.social_costs().len()
    }

    /// Structural validation run once by the solvers before iterating.
    fn check(&self) -> Result<()> {
        Ok(())
    }
}

/// `G(x) = (1/N) Σ_i g_i(x_i)`.
pub fn aggregate<P: AggregativeProblem>(problem: &P, x: &[P::Decision]) -> Result<AggregateVector> {
    if x.len() != problem.num_agents() {
        return Err(Error::AgentCount {
            expected: problem.num_agents(),
            got: x.len(),
        });
    }
    let contributions = x
        .iter()
        .enumerate()
        .map(|(i, xi)| problem.contribution(i, xi))
        .collect::<Result<Vec<_>>>()?;
    Ok(AggregateVector::mean_of(
        problem.num_blocks(),
        contributions.iter().map(Vec::as_slice),
    ))
}

/// `f(y) = Σ_t f_t(y_t)`.
pub fn evaluate_social(costs: &[SocialCost], y: &AggregateVector) -> Result<f64> {
    check_blocks(costs, y.len())?;
    Ok(costs.iter().zip(&y.0).map(|(c, &v)| c.value(v)).sum())
}

/// `mu_t = f_t'(y_t)`.
pub fn gradient(costs: &[SocialCost], y: &AggregateVector) -> Result<MultiplierVector> {
    check_blocks(costs, y.len())?;
    Ok(MultiplierVector(
        costs.iter().zip(&y.0).map(|(c, &v)| c.derivative(v)).collect(),
    ))
}

/// `J(x) = f(G(x))`.
pub fn evaluate_j<P: AggregativeProblem>(problem: &P, x: &[P::Decision]) -> Result<f64> {
    let y = aggregate(problem, x)?;
    evaluate_social(problem.social_costs(), &y)
}

fn check_blocks(costs: &[SocialCost], got: usize) -> Result<()> {
    if costs.len() != got {
        return Err(Error::BlockCount {
            expected: costs.len(),
            got,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;

    #[test]
    fn zero_blocks_cost_nothing() {
        let costs = [SocialCost::Zero; 3];
        let y = AggregateVector(vec![1.0, -7.0, 3.5]);
        assert_eq!(evaluate_social(&costs, &y).unwrap(), 0.0);
    }

    #[test]
    fn quadratic_value_and_slope() {
        let q = SocialCost::Quadratic {
            alpha: 1.0,
            target: 0.0,
        };
        assert_eq!(evaluate_social(&[q], &AggregateVector(vec![2.0])).unwrap(), 4.0);
        assert_eq!(gradient(&[q], &AggregateVector(vec![3.0])).unwrap()[0], 6.0);
    }

    #[test]
    fn identity_slope_is_one() {
        for y in [-3.0, 0.0, 1e6] {
            assert_eq!(SocialCost::Identity.derivative(y), 1.0);
        }
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let costs = [SocialCost::Identity, SocialCost::Zero];
        let y = AggregateVector(vec![1.0]);
        assert!(matches!(
            evaluate_social(&costs, &y),
            Err(Error::BlockCount { expected: 2, got: 1 })
        ));
        assert!(gradient(&costs, &y).is_err());
    }

    fn random_cost(rng: &mut CounterRng) -> SocialCost {
        match rng.int_inclusive(0, 3) {
            0 => SocialCost::Quadratic {
                alpha: rng.uniform(0.0, 3.0),
                target: rng.uniform(-5.0, 5.0),
            },
            1 => SocialCost::Linear {
                weight: rng.uniform(-4.0, 4.0),
            },
            2 => SocialCost::Identity,
            _ => SocialCost::Zero,
        }
    }

    #[test]
    fn convexity_witness() {
        let mut rng = CounterRng::new(42, 1);
        for _ in 0..2000 {
            let c = random_cost(&mut rng);
            let a = rng.uniform(-10.0, 10.0);
            let b = rng.uniform(-10.0, 10.0);
            let l = rng.next_f64();
            let lhs = c.value(l * a + (1.0 - l) * b);
            let rhs = l * c.value(a) + (1.0 - l) * c.value(b);
            assert!(lhs <= rhs + 1e-12 * (1.0 + libm::fabs(rhs)), "{c:?} {a} {b} {l}");
        }
    }

    #[test]
    fn lipschitz_bounds_hold_on_interval() {
        let mut rng = CounterRng::new(3, 2);
        for _ in 0..500 {
            let c = random_cost(&mut rng);
            let lo = rng.uniform(-5.0, 0.0);
            let hi = rng.uniform(0.0, 5.0);
            let lip = c.lipschitz_on(lo, hi);
            for _ in 0..10 {
                let a = rng.uniform(lo, hi);
                let b = rng.uniform(lo, hi);
                let diff = libm::fabs(c.value(a) - c.value(b));
                assert!(diff <= lip * libm::fabs(a - b) + 1e-9);
                let gdiff = libm::fabs(c.derivative(a) - c.derivative(b));
                assert!(gdiff <= c.gradient_lipschitz() * libm::fabs(a - b) + 1e-9);
            }
        }
    }
}
