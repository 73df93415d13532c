//! Finite-state multi-agent control model and its aggregative reformulation.
//!
//! Agent `i` has states `S_i`, controls `U_i`, initial states `S_i^0`, feasible
//! control sets `U_i^t(s)` for `t = 0..=T`, transitions `pi_i^t` for
//! `t = 0..T`, contributions `h_i^t` and individual costs `l_i^t`. The
//! instance cost is
//!
//! ```text
//! J(s, u) = Σ_{t=0}^{T} f_t((1/N) Σ_i h_i^t(s_i^t, u_i^t)) + (1/N) Σ_i Σ_t l_i^t(s_i^t, u_i^t)
//! ```
//!
//! Viewed as an aggregative problem, the aggregate has `T + 2` blocks: block
//! `t <= T` averages `h_i^t` and block `T + 1` averages the summed individual
//! costs under an identity social cost.
//!
//! States and controls are dense indices; labels are kept only for I/O. All
//! tie-breaking in the solvers follows index order.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::aggregative::{AggregateVector, AggregativeProblem, MultiplierVector, SocialCost};
use crate::{dp, Error, Result};

/// One feasible `(t, s, u)` entry of an agent's tables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Move {
    /// `pi^t(s, u)`; ignored at the final time.
    pub next: usize,
    pub contribution: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentSpec {
    states: Vec<String>,
    controls: Vec<String>,
    initial_states: Vec<usize>,
    horizon: usize,
    allowed: Vec<bool>,
    next: Vec<usize>,
    contribution: Vec<f64>,
    individual_cost: Vec<f64>,
}

impl AgentSpec {
    /// An agent with no initial state and no feasible control anywhere.
    pub fn new(states: Vec<String>, controls: Vec<String>, horizon: usize) -> Self {
        let cells = (horizon + 1) * states.len() * controls.len();
        Self {
            states,
            controls,
            initial_states: Vec::new(),
            horizon,
            allowed: vec![false; cells],
            next: vec![0; cells],
            contribution: vec![0.0; cells],
            individual_cost: vec![0.0; cells],
        }
    }

    /// Builds the tables from `table(t, s, u)`, which returns `None` for
    /// infeasible controls.
    pub fn from_fn<F>(
        states: Vec<String>,
        controls: Vec<String>,
        initial_states: Vec<usize>,
        horizon: usize,
        mut table: F,
    ) -> Self
    where
        F: FnMut(usize, usize, usize) -> Option<Move>,
    {
        let mut agent = Self::new(states, controls, horizon);
        agent.set_initial_states(initial_states);
        for t in 0..=horizon {
            for s in 0..agent.num_states() {
                for u in 0..agent.num_controls() {
                    if let Some(m) = table(t, s, u) {
                        agent.allow(t, s, u, m);
                    }
                }
            }
        }
        agent
    }

    pub fn set_initial_states(&mut self, mut initial: Vec<usize>) {
        initial.sort_unstable();
        initial.dedup();
        self.initial_states = initial;
    }

    /// Marks `u` feasible at `(t, s)` with the given transition and costs.
    pub fn allow(&mut self, t: usize, s: usize, u: usize, m: Move) {
        let k = self.cell(t, s, u);
        self.allowed[k] = true;
        self.next[k] = if t < self.horizon { m.next } else { 0 };
        self.contribution[k] = m.contribution;
        self.individual_cost[k] = m.cost;
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_controls(&self) -> usize {
        self.controls.len()
    }

    pub fn state_labels(&self) -> &[String] {
        &self.states
    }

    pub fn control_labels(&self) -> &[String] {
        &self.controls
    }

    pub fn initial_states(&self) -> &[usize] {
        &self.initial_states
    }

    #[inline]
    fn cell(&self, t: usize, s: usize, u: usize) -> usize {
        (t * self.states.len() + s) * self.controls.len() + u
    }

    #[inline]
    pub fn is_allowed(&self, t: usize, s: usize, u: usize) -> bool {
        self.allowed[self.cell(t, s, u)]
    }

    /// `U^t(s)` in control order.
    pub fn controls_at(&self, t: usize, s: usize) -> impl Iterator<Item = usize> + '_ {
        let base = self.cell(t, s, 0);
        (0..self.controls.len()).filter(move |&u| self.allowed[base + u])
    }

    #[inline]
    pub fn next_state(&self, t: usize, s: usize, u: usize) -> usize {
        self.next[self.cell(t, s, u)]
    }

    #[inline]
    pub fn contribution(&self, t: usize, s: usize, u: usize) -> f64 {
        self.contribution[self.cell(t, s, u)]
    }

    #[inline]
    pub fn individual_cost(&self, t: usize, s: usize, u: usize) -> f64 {
        self.individual_cost[self.cell(t, s, u)]
    }

    /// Number of `(s, u)` pairs with `u` feasible at time `t`.
    pub fn feasible_pairs(&self, t: usize) -> usize {
        let per_t = self.states.len() * self.controls.len();
        self.allowed[t * per_t..(t + 1) * per_t]
            .iter()
            .filter(|&&a| a)
            .count()
    }

    fn check(&self, traj: &Trajectory) -> core::result::Result<(), Flaw> {
        let len = self.horizon + 1;
        if traj.states.len() != len || traj.controls.len() != len {
            return Err(Flaw::Length);
        }
        let s0 = traj.states[0];
        if self.initial_states.binary_search(&s0).is_err() {
            return Err(Flaw::At(0, "initial state not in the initial set"));
        }
        for t in 0..len {
            let (s, u) = (traj.states[t], traj.controls[t]);
            if s >= self.num_states() {
                return Err(Flaw::At(t, "state index out of range"));
            }
            if u >= self.num_controls() || !self.is_allowed(t, s, u) {
                return Err(Flaw::At(t, "control not feasible in this state"));
            }
            if t < self.horizon && traj.states[t + 1] != self.next_state(t, s, u) {
                return Err(Flaw::At(t, "next state does not follow the transition"));
            }
        }
        Ok(())
    }

    /// The trajectory taking the first initial state and the first feasible
    /// control at every step.
    pub fn first_trajectory(&self) -> Option<Trajectory> {
        let mut s = *self.initial_states.first()?;
        let mut states = Vec::with_capacity(self.horizon + 1);
        let mut controls = Vec::with_capacity(self.horizon + 1);
        for t in 0..=self.horizon {
            let u = self.controls_at(t, s).next()?;
            states.push(s);
            controls.push(u);
            if t < self.horizon {
                s = self.next_state(t, s, u);
                if s >= self.num_states() {
                    return None;
                }
            }
        }
        Some(Trajectory { states, controls })
    }

    /// Number of feasible trajectories, saturating at `u128::MAX`.
    pub fn count_trajectories(&self) -> u128 {
        let n = self.num_states();
        let mut ahead = vec![1u128; n];
        for t in (0..=self.horizon).rev() {
            let mut here = vec![0u128; n];
            for (s, slot) in here.iter_mut().enumerate() {
                for u in self.controls_at(t, s) {
                    let tail = if t < self.horizon {
                        ahead.get(self.next_state(t, s, u)).copied().unwrap_or(0)
                    } else {
                        1
                    };
                    *slot = slot.saturating_add(tail);
                }
            }
            ahead = here;
        }
        self.initial_states
            .iter()
            .filter_map(|&s| ahead.get(s))
            .fold(0u128, |acc, &c| acc.saturating_add(c))
    }

    /// Every feasible trajectory, in lexicographic order of
    /// `(s^0, u^0, u^1, ..)`.
    pub fn trajectories(&self) -> Vec<Trajectory> {
        let mut out = Vec::new();
        let mut states = Vec::with_capacity(self.horizon + 1);
        let mut controls = Vec::with_capacity(self.horizon + 1);
        for &s0 in &self.initial_states {
            self.extend_paths(0, s0, &mut states, &mut controls, &mut out);
        }
        out
    }

    fn extend_paths(
        &self,
        t: usize,
        s: usize,
        states: &mut Vec<usize>,
        controls: &mut Vec<usize>,
        out: &mut Vec<Trajectory>,
    ) {
        if s >= self.num_states() {
            return;
        }
        states.push(s);
        for u in self.controls_at(t, s) {
            controls.push(u);
            if t == self.horizon {
                out.push(Trajectory {
                    states: states.clone(),
                    controls: controls.clone(),
                });
            } else {
                self.extend_paths(t + 1, self.next_state(t, s, u), states, controls, out);
            }
            controls.pop();
        }
        states.pop();
    }
}

enum Flaw {
    Length,
    At(usize, &'static str),
}

/// A state-control sequence `(s^0..s^T, u^0..u^T)` of one agent.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Trajectory {
    pub states: Vec<usize>,
    pub controls: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OcInstance {
    pub horizon: usize,
    pub agents: Vec<AgentSpec>,
    /// `T + 2` social costs; the last one is the identity.
    pub social: Vec<SocialCost>,
}

impl OcInstance {
    pub fn new(horizon: usize, agents: Vec<AgentSpec>, social: Vec<SocialCost>) -> Self {
        Self {
            horizon,
            agents,
            social,
        }
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    /// Lists every structural violation; an empty report means the instance
    /// satisfies all model invariants.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let mut push = |v: Violation| report.0.push(v);
        if self.horizon == 0 {
            push(Violation::global(ViolationKind::ZeroHorizon));
        }
        if self.agents.is_empty() {
            push(Violation::global(ViolationKind::NoAgents));
        }
        let blocks = self.horizon + 2;
        if self.social.len() != blocks {
            push(Violation::global(ViolationKind::SocialBlockCount {
                expected: blocks,
                got: self.social.len(),
            }));
        }
        for (t, c) in self.social.iter().enumerate() {
            let terminal = t + 1 == blocks;
            match *c {
                SocialCost::Identity if !terminal => {
                    push(Violation::block(t, ViolationKind::IdentityOutsideTerminal))
                }
                SocialCost::Quadratic { alpha, target } => {
                    if alpha < 0.0 || !alpha.is_finite() || !target.is_finite() {
                        push(Violation::block(t, ViolationKind::NonConvexSocial));
                    }
                }
                SocialCost::Linear { weight } if !weight.is_finite() => {
                    push(Violation::block(t, ViolationKind::NonConvexSocial))
                }
                _ => {}
            }
            if terminal && *c != SocialCost::Identity {
                push(Violation::block(t, ViolationKind::TerminalNotIdentity));
            }
        }
        for (i, a) in self.agents.iter().enumerate() {
            validate_agent(i, a, self.horizon, &mut push);
        }
        report
    }

    /// `Ok` iff [`validate`](Self::validate) reports nothing.
    pub fn ensure_valid(&self) -> Result<()> {
        let report = self.validate();
        if report.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(report))
        }
    }

    pub fn check_trajectory(&self, agent: usize, traj: &Trajectory) -> Result<()> {
        match self.agents[agent].check(traj) {
            Ok(()) => Ok(()),
            Err(Flaw::Length) => Err(Error::TrajectoryLength {
                agent,
                states: traj.states.len(),
                controls: traj.controls.len(),
                expected: self.horizon + 1,
            }),
            Err(Flaw::At(time, reason)) => Err(Error::Infeasible {
                agent,
                time,
                reason,
            }),
        }
    }

    /// Whether `traj` is a feasible trajectory of agent `agent`; only a
    /// length mismatch is an error.
    pub fn is_feasible(&self, agent: usize, traj: &Trajectory) -> Result<bool> {
        match self.check_trajectory(agent, traj) {
            Ok(()) => Ok(true),
            Err(e @ Error::TrajectoryLength { .. }) => Err(e),
            Err(_) => Ok(false),
        }
    }

    /// `g_i(x_i)`: `h_i^t(s^t, u^t)` for `t <= T`, then `Σ_t l_i^t(s^t, u^t)`.
    pub fn contribution_vector(&self, agent: usize, traj: &Trajectory) -> Result<Vec<f64>> {
        self.check_trajectory(agent, traj)?;
        let a = &self.agents[agent];
        let mut g = Vec::with_capacity(self.horizon + 2);
        let mut individual = 0.0;
        for t in 0..=self.horizon {
            let (s, u) = (traj.states[t], traj.controls[t]);
            g.push(a.contribution(t, s, u));
            individual += a.individual_cost(t, s, u);
        }
        g.push(individual);
        Ok(g)
    }

    /// The control cost evaluated directly from its definition, without the
    /// aggregative reformulation.
    pub fn evaluate_oc_cost(&self, x: &[Trajectory]) -> Result<f64> {
        let n = self.num_agents();
        if x.len() != n {
            return Err(Error::AgentCount {
                expected: n,
                got: x.len(),
            });
        }
        for (i, xi) in x.iter().enumerate() {
            self.check_trajectory(i, xi)?;
        }
        let nf = n as f64;
        let mut total = 0.0;
        for t in 0..=self.horizon {
            let sum: f64 = x
                .iter()
                .zip(&self.agents)
                .map(|(xi, a)| a.contribution(t, xi.states[t], xi.controls[t]))
                .sum();
            total += self.social[t].value(sum / nf);
        }
        let individual: f64 = x
            .iter()
            .zip(&self.agents)
            .map(|(xi, a)| {
                (0..=self.horizon)
                    .map(|t| a.individual_cost(t, xi.states[t], xi.controls[t]))
                    .sum::<f64>()
            })
            .sum();
        Ok(total + individual / nf)
    }

    /// The aggregate of a full profile.
    pub fn aggregate(&self, x: &[Trajectory]) -> Result<AggregateVector> {
        crate::aggregative::aggregate(self, x)
    }

    /// Product of the per-agent trajectory counts, saturating.
    pub fn profile_count(&self) -> u128 {
        self.agents
            .iter()
            .fold(1u128, |acc, a| acc.saturating_mul(a.count_trajectories()))
    }
}

impl AggregativeProblem for OcInstance {
    type Decision = Trajectory;

    fn num_agents(&self) -> usize {
        self.agents.len()
    }

    fn social_costs(&self) -> &[SocialCost] {
        &self.social
    }

    fn contribution(&self, agent: usize, decision: &Trajectory) -> Result<Vec<f64>> {
        self.contribution_vector(agent, decision)
    }

    fn best_response(&self, agent: usize, prices: &MultiplierVector) -> Result<Trajectory> {
        dp::best_response(&self.agents[agent], prices)
            .map(|(traj, _)| traj)
            .map_err(|e| e.for_agent(agent))
    }

    fn check(&self) -> Result<()> {
        self.ensure_valid()
    }

    fn initial_decision(&self, agent: usize) -> Result<Trajectory> {
        self.agents[agent]
            .first_trajectory()
            .ok_or(Error::EmptyInitialSet { agent })
    }
}

impl Error {
    /// Re-attributes a per-agent error to agent `agent`.
    pub(crate) fn for_agent(self, agent: usize) -> Error {
        match self {
            Error::EmptyControlSet { time, state, .. } => Error::EmptyControlSet { agent, time, state },
            Error::EmptyInitialSet { .. } => Error::EmptyInitialSet { agent },
            Error::Infeasible { time, reason, .. } => Error::Infeasible { agent, time, reason },
            other => other,
        }
    }
}

fn validate_agent(i: usize, a: &AgentSpec, horizon: usize, push: &mut impl FnMut(Violation)) {
    let at = |kind| Violation {
        agent: Some(i),
        ..Violation::global(kind)
    };
    if a.horizon != horizon {
        push(at(ViolationKind::HorizonMismatch {
            expected: horizon,
            got: a.horizon,
        }));
        return;
    }
    if a.states.is_empty() {
        push(at(ViolationKind::NoStates));
    }
    if a.controls.is_empty() {
        push(at(ViolationKind::NoControls));
    }
    if a.initial_states.is_empty() {
        push(at(ViolationKind::EmptyInitialSet));
    }
    for &s in &a.initial_states {
        if s >= a.num_states() {
            push(Violation {
                state: Some(s),
                ..at(ViolationKind::InitialStateOutOfRange)
            });
        }
    }
    for t in 0..=horizon {
        for s in 0..a.num_states() {
            let mut any = false;
            for u in a.controls_at(t, s) {
                any = true;
                let here = Violation {
                    agent: Some(i),
                    time: Some(t),
                    state: Some(s),
                    control: Some(u),
                    kind: ViolationKind::TransitionOutOfRange,
                };
                if t < horizon && a.next_state(t, s, u) >= a.num_states() {
                    push(here.clone());
                }
                if !a.contribution(t, s, u).is_finite() || !a.individual_cost(t, s, u).is_finite() {
                    push(Violation {
                        kind: ViolationKind::NonFiniteValue,
                        ..here
                    });
                }
            }
            if !any {
                push(Violation {
                    time: Some(t),
                    state: Some(s),
                    ..at(ViolationKind::EmptyControlSet)
                });
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    ZeroHorizon,
    NoAgents,
    SocialBlockCount { expected: usize, got: usize },
    TerminalNotIdentity,
    IdentityOutsideTerminal,
    NonConvexSocial,
    HorizonMismatch { expected: usize, got: usize },
    NoStates,
    NoControls,
    EmptyInitialSet,
    InitialStateOutOfRange,
    EmptyControlSet,
    TransitionOutOfRange,
    NonFiniteValue,
}

/// One broken invariant, located as precisely as possible. `block` is set
/// for social-cost violations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub agent: Option<usize>,
    pub time: Option<usize>,
    pub state: Option<usize>,
    pub control: Option<usize>,
    pub kind: ViolationKind,
}

impl Violation {
    fn global(kind: ViolationKind) -> Self {
        Self {
            agent: None,
            time: None,
            state: None,
            control: None,
            kind,
        }
    }

    fn block(t: usize, kind: ViolationKind) -> Self {
        Self {
            time: Some(t),
            ..Self::global(kind)
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ViolationKind::*;
        let what = match &self.kind {
            ZeroHorizon => "horizon T must be positive",
            NoAgents => "instance has no agents",
            SocialBlockCount { .. } => "social cost list must have T+2 blocks",
            TerminalNotIdentity => "terminal social block must be the identity",
            IdentityOutsideTerminal => "identity social cost is reserved for the terminal block",
            NonConvexSocial => "social cost must be convex with finite parameters",
            HorizonMismatch { .. } => "agent horizon differs from the instance horizon",
            NoStates => "empty state set",
            NoControls => "empty control set",
            EmptyInitialSet => "empty initial state set",
            InitialStateOutOfRange => "initial state index out of range",
            EmptyControlSet => "no feasible control",
            TransitionOutOfRange => "transition leaves the state set",
            NonFiniteValue => "non-finite contribution or individual cost",
        };
        f.write_str(what)?;
        match &self.kind {
            SocialBlockCount { expected, got } | HorizonMismatch { expected, got } => {
                write!(f, " (expected {expected}, got {got})")?
            }
            _ => {}
        }
        let mut sep = " at";
        let mut field = |f: &mut fmt::Formatter<'_>, name: &str, v: Option<usize>| {
            if let Some(v) = v {
                write!(f, "{sep} {name}={v}")?;
                sep = ",";
            }
            Ok::<(), fmt::Error>(())
        };
        let time_name = if self.agent.is_none() { "block" } else { "t" };
        field(f, "agent", self.agent)?;
        field(f, time_name, self.time)?;
        field(f, "state", self.state)?;
        field(f, "control", self.control)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport(pub Vec<Violation>);

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Violation> {
        self.0.iter()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.0 {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}
