//! The indicator-variable mixed-integer reformulation.
//!
//! One variable `m_i^t(s, u)` per agent `i`, time `t` and feasible pair
//! `(s, u) ∈ Z_i^t`. A profile `x` maps to the `m` that is 1 exactly on the
//! visited pairs, and back. Constraint families:
//!
//! * (i) integrality, (ii) `m >= 0` and one pair per `(i, t)`,
//! * (iii) no weight on non-initial states at `t = 0`,
//! * (iv) flow conservation: the weight leaving `s` at `θ` equals the weight
//!   of the pairs `z ∈ Z_i^{θ-1}` whose transition lands in `s`.
//!
//! Integrality and nonnegativity are variable attributes; (ii)-(iv) are
//! stored as explicit linear rows.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::aggregative::SocialCost;
use crate::model::{OcInstance, Trajectory};
use crate::{Error, Result};

/// Tolerance used when checking a candidate `m`.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Variable {
    pub agent: usize,
    pub t: usize,
    pub state: usize,
    pub control: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Integrality,
    Simplex,
    InitialState,
    Flow,
}

impl Family {
    pub fn roman(self) -> &'static str {
        match self {
            Family::Integrality => "i",
            Family::Simplex => "ii",
            Family::InitialState => "iii",
            Family::Flow => "iv",
        }
    }
}

/// `Σ coef * m[var] = rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub family: Family,
    pub agent: usize,
    /// `t` for (ii), `0` for (iii), `θ` for (iv).
    pub t: usize,
    /// `ŝ` for (iii), `s^θ` for (iv).
    pub state: Option<usize>,
    /// `u` for (iii).
    pub control: Option<usize>,
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl Constraint {
    pub fn lhs(&self, m: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * m[v]).sum()
    }
}

/// `cost((1/N) Σ coef * m[var])`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveBlock {
    pub cost: SocialCost,
    pub terms: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MicpModel {
    pub num_agents: usize,
    pub horizon: usize,
    pub variables: Vec<Variable>,
    pub blocks: Vec<ObjectiveBlock>,
    pub constraints: Vec<Constraint>,
    num_states: Vec<usize>,
    num_controls: Vec<usize>,
    /// Per agent, dense `(t, s, u) -> variable` table.
    index: Vec<Vec<Option<usize>>>,
}

pub fn build_micp(instance: &OcInstance) -> Result<MicpModel> {
    instance.ensure_valid()?;
    let horizon = instance.horizon;
    let mut variables = Vec::new();
    let mut index = Vec::with_capacity(instance.num_agents());
    for (i, a) in instance.agents.iter().enumerate() {
        let (ns, nu) = (a.num_states(), a.num_controls());
        let mut table = vec![None; (horizon + 1) * ns * nu];
        for t in 0..=horizon {
            for s in 0..ns {
                for u in a.controls_at(t, s) {
                    table[(t * ns + s) * nu + u] = Some(variables.len());
                    variables.push(Variable {
                        agent: i,
                        t,
                        state: s,
                        control: u,
                    });
                }
            }
        }
        index.push(table);
    }

    let mut blocks: Vec<ObjectiveBlock> = instance
        .social
        .iter()
        .map(|&cost| ObjectiveBlock {
            cost,
            terms: Vec::new(),
        })
        .collect();
    for (v, var) in variables.iter().enumerate() {
        let a = &instance.agents[var.agent];
        let h = a.contribution(var.t, var.state, var.control);
        let l = a.individual_cost(var.t, var.state, var.control);
        if h != 0.0 {
            blocks[var.t].terms.push((v, h));
        }
        if l != 0.0 {
            blocks[horizon + 1].terms.push((v, l));
        }
    }

    let mut constraints = Vec::new();
    for (i, a) in instance.agents.iter().enumerate() {
        let (ns, nu) = (a.num_states(), a.num_controls());
        let var = |t: usize, s: usize, u: usize| index[i][(t * ns + s) * nu + u];
        for t in 0..=horizon {
            let terms: Vec<(usize, f64)> = (0..ns)
                .flat_map(|s| a.controls_at(t, s).map(move |u| (s, u)))
                .filter_map(|(s, u)| var(t, s, u).map(|v| (v, 1.0)))
                .collect();
            constraints.push(Constraint {
                family: Family::Simplex,
                agent: i,
                t,
                state: None,
                control: None,
                terms,
                rhs: 1.0,
            });
        }
        for s in (0..ns).filter(|s| !a.initial_states().contains(s)) {
            for u in a.controls_at(0, s) {
                constraints.push(Constraint {
                    family: Family::InitialState,
                    agent: i,
                    t: 0,
                    state: Some(s),
                    control: Some(u),
                    terms: vec![(var(0, s, u).expect("feasible pair"), 1.0)],
                    rhs: 0.0,
                });
            }
        }
        for theta in 1..=horizon {
            for s in 0..ns {
                let mut terms: Vec<(usize, f64)> =
                    a.controls_at(theta, s).filter_map(|u| var(theta, s, u)).map(|v| (v, 1.0)).collect();
                for sp in 0..ns {
                    for u in a.controls_at(theta - 1, sp) {
                        if a.next_state(theta - 1, sp, u) == s {
                            terms.push((var(theta - 1, sp, u).expect("feasible pair"), -1.0));
                        }
                    }
                }
                constraints.push(Constraint {
                    family: Family::Flow,
                    agent: i,
                    t: theta,
                    state: Some(s),
                    control: None,
                    terms,
                    rhs: 0.0,
                });
            }
        }
    }

    Ok(MicpModel {
        num_agents: instance.num_agents(),
        horizon,
        variables,
        blocks,
        constraints,
        num_states: instance.agents.iter().map(|a| a.num_states()).collect(),
        num_controls: instance.agents.iter().map(|a| a.num_controls()).collect(),
        index,
    })
}

/// `d(m) = Σ_{i,t} |Z_i^t|` without building the model.
pub fn variable_count(instance: &OcInstance) -> u64 {
    instance
        .agents
        .iter()
        .map(|a| (0..=instance.horizon).map(|t| a.feasible_pairs(t) as u64).sum::<u64>())
        .sum()
}

impl MicpModel {
    /// `d(m)`.
    pub fn variable_count(&self) -> usize {
        self.variables.len()
    }

    pub fn constraints_of(&self, family: Family) -> impl Iterator<Item = &Constraint> {
        self.constraints.iter().filter(move |c| c.family == family)
    }

    pub fn variable_index(&self, agent: usize, t: usize, state: usize, control: usize) -> Option<usize> {
        let (ns, nu) = (self.num_states[agent], self.num_controls[agent]);
        if t > self.horizon || state >= ns || control >= nu {
            return None;
        }
        self.index[agent][(t * ns + state) * nu + control]
    }

    /// `f_b` of block `b` at `m`.
    pub fn block_value(&self, block: usize, m: &[f64]) -> f64 {
        let b = &self.blocks[block];
        let sum: f64 = b.terms.iter().map(|&(v, c)| c * m[v]).sum();
        b.cost.value(sum / self.num_agents as f64)
    }

    /// `J_bar(m)`.
    pub fn evaluate(&self, m: &[f64]) -> Result<f64> {
        self.check_len(m)?;
        Ok((0..self.blocks.len()).map(|b| self.block_value(b, m)).sum())
    }

    fn check_len(&self, m: &[f64]) -> Result<()> {
        if m.len() != self.variables.len() {
            return Err(Error::InvalidParameter(format!(
                "assignment has {} entries, model has {} variables",
                m.len(),
                self.variables.len()
            )));
        }
        Ok(())
    }

    /// Every violated constraint, in family order.
    pub fn violations(&self, m: &[f64]) -> Result<Vec<(Family, alloc::string::String)>> {
        self.check_len(m)?;
        let mut out = Vec::new();
        for (v, &x) in m.iter().enumerate() {
            if !x.is_finite() || libm::fabs(x - libm::round(x)) > FEASIBILITY_TOL {
                out.push((Family::Integrality, format!("m[{v}] = {x} is not integral")));
            }
        }
        for (v, &x) in m.iter().enumerate() {
            if x < -FEASIBILITY_TOL {
                out.push((Family::Simplex, format!("m[{v}] = {x} is negative")));
            }
        }
        let mut rows: Vec<&Constraint> = self.constraints.iter().collect();
        rows.sort_by_key(|c| c.family);
        for c in rows {
            let lhs = c.lhs(m);
            if libm::fabs(lhs - c.rhs) > FEASIBILITY_TOL {
                out.push((
                    c.family,
                    format!(
                        "agent {} t={} state={:?} control={:?}: lhs {lhs} != {}",
                        c.agent, c.t, c.state, c.control, c.rhs
                    ),
                ));
            }
        }
        Ok(out)
    }

    /// `Ok` iff `m` satisfies (i)-(iv); otherwise the first violation.
    pub fn check(&self, m: &[f64]) -> Result<()> {
        match self.violations(m)?.into_iter().next() {
            None => Ok(()),
            Some((family, detail)) => Err(Error::ConstraintViolation {
                family: family.roman(),
                detail,
            }),
        }
    }

    /// The indicator assignment of a feasible profile.
    pub fn trajectory_to_m(&self, x: &[Trajectory]) -> Result<Vec<f64>> {
        if x.len() != self.num_agents {
            return Err(Error::AgentCount {
                expected: self.num_agents,
                got: x.len(),
            });
        }
        let mut m = vec![0.0; self.variables.len()];
        for (i, xi) in x.iter().enumerate() {
            let n = self.horizon + 1;
            if xi.states.len() != n || xi.controls.len() != n {
                return Err(Error::TrajectoryLength {
                    agent: i,
                    states: xi.states.len(),
                    controls: xi.controls.len(),
                    expected: n,
                });
            }
            for t in 0..n {
                let v = self
                    .variable_index(i, t, xi.states[t], xi.controls[t])
                    .ok_or(Error::Infeasible {
                        agent: i,
                        time: t,
                        reason: "control not feasible in this state",
                    })?;
                m[v] = 1.0;
            }
        }
        self.check(&m)?;
        Ok(m)
    }

    /// The profile encoded by a feasible `m`.
    pub fn m_to_trajectory(&self, m: &[f64]) -> Result<Vec<Trajectory>> {
        self.check(m)?;
        let n = self.horizon + 1;
        let mut x: Vec<Trajectory> = (0..self.num_agents)
            .map(|_| Trajectory {
                states: vec![0; n],
                controls: vec![0; n],
            })
            .collect();
        for (v, var) in self.variables.iter().enumerate() {
            if libm::round(m[v]) == 1.0 {
                x[var.agent].states[var.t] = var.state;
                x[var.agent].controls[var.t] = var.control;
            }
        }
        Ok(x)
    }
}

/// Minimum of `J_bar` over integer-feasible `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct MicpOptimum {
    pub m: Vec<f64>,
    pub value: f64,
    /// Number of integer-feasible assignments visited.
    pub feasible: u128,
}

/// Enumerates every integer-feasible `m` of a tiny model and returns the
/// first minimizer of `J_bar`.
///
/// Works from the constraint rows only: each agent's one-hot choices per `t`
/// are pruned by the rows of that agent whose variables are all decided, and
/// the surviving per-agent patterns are combined.
pub fn enumerate_integer_feasible(model: &MicpModel, cap: u128) -> Result<MicpOptimum> {
    let d = model.variable_count();
    let n = model.num_agents;
    let steps = model.horizon + 1;

    // Variables of each (agent, t) and the rows closed once (agent, t) is set.
    let mut cells = vec![vec![Vec::new(); steps]; n];
    for (v, var) in model.variables.iter().enumerate() {
        cells[var.agent][var.t].push(v);
    }
    let mut closing = vec![vec![Vec::new(); steps]; n];
    for (r, c) in model.constraints.iter().enumerate() {
        let last = c.terms.iter().map(|&(v, _)| model.variables[v].t).max().unwrap_or(0);
        closing[c.agent][last].push(r);
    }

    let mut patterns: Vec<Vec<Vec<usize>>> = Vec::with_capacity(n);
    let mut m = vec![0.0; d];
    for i in 0..n {
        let mut found = Vec::new();
        let mut chosen = Vec::with_capacity(steps);
        dfs(model, &cells[i], &closing[i], 0, &mut m, &mut chosen, &mut found);
        patterns.push(found);
    }
    let size = patterns
        .iter()
        .fold(1u128, |acc, p| acc.saturating_mul(p.len() as u128));
    if size > cap {
        return Err(Error::CapExceeded { size, cap });
    }
    if size == 0 {
        return Err(Error::InvalidParameter("no integer-feasible assignment".into()));
    }

    let mut idx = vec![0usize; n];
    let mut best: Option<(f64, Vec<f64>)> = None;
    loop {
        let mut m = vec![0.0; d];
        for (i, &p) in idx.iter().enumerate() {
            for &v in &patterns[i][p] {
                m[v] = 1.0;
            }
        }
        let value = model.evaluate(&m)?;
        if best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, m));
        }
        let mut i = n;
        loop {
            if i == 0 {
                let (value, m) = best.expect("nonempty product");
                return Ok(MicpOptimum {
                    m,
                    value,
                    feasible: size,
                });
            }
            i -= 1;
            idx[i] += 1;
            if idx[i] < patterns[i].len() {
                break;
            }
            idx[i] = 0;
        }
    }
}

fn dfs(
    model: &MicpModel,
    cells: &[Vec<usize>],
    closing: &[Vec<usize>],
    t: usize,
    m: &mut [f64],
    chosen: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if t == cells.len() {
        out.push(chosen.clone());
        return;
    }
    for &v in &cells[t] {
        m[v] = 1.0;
        let ok = closing[t].iter().all(|&r| {
            let c = &model.constraints[r];
            libm::fabs(c.lhs(m) - c.rhs) <= FEASIBILITY_TOL
        });
        if ok {
            chosen.push(v);
            dfs(model, cells, closing, t + 1, m, chosen, out);
            chosen.pop();
        }
        m[v] = 0.0;
    }
}
