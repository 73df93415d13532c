//! JSON instance files.
//!
//! ```json
//! {
//!   "N": 1,
//!   "T": 1,
//!   "social": [
//!     {"kind": "quadratic", "alpha": 1.0, "target": 0.5},
//!     {"kind": "zero"},
//!     {"kind": "identity"}
//!   ],
//!   "agents": [{
//!     "states": ["0", "1"],
//!     "initial_states": ["0"],
//!     "controls": ["0", "1"],
//!     "feasible": [[["0", "1"], ["0"]], [["0", "1"], ["0"]]],
//!     "transition": [[["0", "1"], ["1"]]],
//!     "contribution": [[[0.0, 1.0], [0.0]], [[0.0, 0.0], [0.0]]],
//!     "individual_cost": [[[0.0, 0.0], [0.0]], [[1.0, 0.0], [0.0]]]
//!   }]
//! }
//! ```
//!
//! `feasible[t][s]` lists the control labels of `U^t(s)` for `t = 0..=T`.
//! `transition[t][s]` (only `t < T`), `contribution[t][s]` and
//! `individual_cost[t][s]` are aligned with `feasible[t][s]`. States and
//! controls are referenced by label everywhere.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use aggoc_core::model::Move;
use aggoc_core::{AgentSpec, OcInstance, SocialCost};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Schema(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SocialBlock {
    Quadratic { alpha: f64, target: f64 },
    Linear { weight: f64 },
    Identity,
    Zero,
}

impl From<SocialCost> for SocialBlock {
    fn from(c: SocialCost) -> Self {
        match c {
            SocialCost::Quadratic { alpha, target } => SocialBlock::Quadratic { alpha, target },
            SocialCost::Linear { weight } => SocialBlock::Linear { weight },
            SocialCost::Identity => SocialBlock::Identity,
            SocialCost::Zero => SocialBlock::Zero,
        }
    }
}

impl From<SocialBlock> for SocialCost {
    fn from(c: SocialBlock) -> Self {
        match c {
            SocialBlock::Quadratic { alpha, target } => SocialCost::Quadratic { alpha, target },
            SocialBlock::Linear { weight } => SocialCost::Linear { weight },
            SocialBlock::Identity => SocialCost::Identity,
            SocialBlock::Zero => SocialCost::Zero,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentFile {
    pub states: Vec<String>,
    pub initial_states: Vec<String>,
    pub controls: Vec<String>,
    pub feasible: Vec<Vec<Vec<String>>>,
    pub transition: Vec<Vec<Vec<String>>>,
    pub contribution: Vec<Vec<Vec<f64>>>,
    pub individual_cost: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub social: Vec<SocialBlock>,
    pub agents: Vec<AgentFile>,
}

fn schema(msg: String) -> FormatError {
    FormatError::Schema(msg)
}

fn lookup(labels: &[String]) -> HashMap<&str, usize> {
    labels.iter().enumerate().map(|(k, l)| (l.as_str(), k)).collect()
}

impl AgentFile {
    pub fn from_spec(a: &AgentSpec) -> Self {
        let horizon = a.horizon();
        let states = a.state_labels().to_vec();
        let controls = a.control_labels().to_vec();
        let mut feasible = Vec::with_capacity(horizon + 1);
        let mut transition = Vec::with_capacity(horizon);
        let mut contribution = Vec::with_capacity(horizon + 1);
        let mut individual_cost = Vec::with_capacity(horizon + 1);
        for t in 0..=horizon {
            let per_s = |f: &dyn Fn(usize, usize) -> f64| -> Vec<Vec<f64>> {
                (0..a.num_states())
                    .map(|s| a.controls_at(t, s).map(|u| f(s, u)).collect())
                    .collect()
            };
            feasible.push(
                (0..a.num_states())
                    .map(|s| a.controls_at(t, s).map(|u| controls[u].clone()).collect())
                    .collect(),
            );
            if t < horizon {
                transition.push(
                    (0..a.num_states())
                        .map(|s| {
                            a.controls_at(t, s)
                                .map(|u| states[a.next_state(t, s, u)].clone())
                                .collect()
                        })
                        .collect(),
                );
            }
            contribution.push(per_s(&|s, u| a.contribution(t, s, u)));
            individual_cost.push(per_s(&|s, u| a.individual_cost(t, s, u)));
        }
        Self {
            initial_states: a.initial_states().iter().map(|&s| states[s].clone()).collect(),
            states,
            controls,
            feasible,
            transition,
            contribution,
            individual_cost,
        }
    }

    pub fn to_spec(&self, agent: usize, horizon: usize) -> Result<AgentSpec, FormatError> {
        let states = lookup(&self.states);
        let controls = lookup(&self.controls);
        if states.len() != self.states.len() || controls.len() != self.controls.len() {
            return Err(schema(format!("agent {agent}: duplicate state or control label")));
        }
        let ns = self.states.len();
        let expect = |what: &str, got: usize, want: usize| {
            if got == want {
                Ok(())
            } else {
                Err(schema(format!("agent {agent}: {what} has {got} entries, expected {want}")))
            }
        };
        expect("feasible", self.feasible.len(), horizon + 1)?;
        expect("transition", self.transition.len(), horizon)?;
        expect("contribution", self.contribution.len(), horizon + 1)?;
        expect("individual_cost", self.individual_cost.len(), horizon + 1)?;

        let state = |label: &str, ctx: &dyn Fn() -> String| {
            states
                .get(label)
                .copied()
                .ok_or_else(|| schema(format!("agent {agent}: unknown state {label:?} {}", ctx())))
        };
        let initial = self
            .initial_states
            .iter()
            .map(|l| state(l, &|| "in initial_states".into()))
            .collect::<Result<Vec<_>, _>>()?;

        let mut spec = AgentSpec::new(self.states.clone(), self.controls.clone(), horizon);
        spec.set_initial_states(initial);
        for t in 0..=horizon {
            expect(&format!("feasible[{t}]"), self.feasible[t].len(), ns)?;
            expect(&format!("contribution[{t}]"), self.contribution[t].len(), ns)?;
            expect(&format!("individual_cost[{t}]"), self.individual_cost[t].len(), ns)?;
            if t < horizon {
                expect(&format!("transition[{t}]"), self.transition[t].len(), ns)?;
            }
            for s in 0..ns {
                let list = &self.feasible[t][s];
                let k = list.len();
                expect(&format!("contribution[{t}][{s}]"), self.contribution[t][s].len(), k)?;
                expect(&format!("individual_cost[{t}][{s}]"), self.individual_cost[t][s].len(), k)?;
                if t < horizon {
                    expect(&format!("transition[{t}][{s}]"), self.transition[t][s].len(), k)?;
                }
                for (j, label) in list.iter().enumerate() {
                    let u = *controls.get(label.as_str()).ok_or_else(|| {
                        schema(format!("agent {agent}: unknown control {label:?} in feasible[{t}][{s}]"))
                    })?;
                    if spec.is_allowed(t, s, u) {
                        return Err(schema(format!(
                            "agent {agent}: control {label:?} listed twice in feasible[{t}][{s}]"
                        )));
                    }
                    let next = if t < horizon {
                        state(&self.transition[t][s][j], &|| format!("in transition[{t}][{s}][{j}]"))?
                    } else {
                        0
                    };
                    spec.allow(
                        t,
                        s,
                        u,
                        Move {
                            next,
                            contribution: self.contribution[t][s][j],
                            cost: self.individual_cost[t][s][j],
                        },
                    );
                }
            }
        }
        Ok(spec)
    }
}

impl InstanceFile {
    pub fn from_instance(inst: &OcInstance) -> Self {
        Self {
            n: inst.num_agents(),
            t: inst.horizon,
            social: inst.social.iter().map(|&c| c.into()).collect(),
            agents: inst.agents.iter().map(AgentFile::from_spec).collect(),
        }
    }

    /// Converts to the in-memory model. Structural checks beyond the file
    /// layout are left to [`OcInstance::validate`].
    pub fn to_instance(&self) -> Result<OcInstance, FormatError> {
        if self.agents.len() != self.n {
            return Err(schema(format!("N = {} but {} agents listed", self.n, self.agents.len())));
        }
        let agents = self
            .agents
            .iter()
            .enumerate()
            .map(|(i, a)| a.to_spec(i, self.t))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(OcInstance::new(
            self.t,
            agents,
            self.social.iter().cloned().map(Into::into).collect(),
        ))
    }
}

pub fn parse_instance(text: &str) -> Result<OcInstance, FormatError> {
    serde_json::from_str::<InstanceFile>(text)?.to_instance()
}

pub fn instance_to_string(inst: &OcInstance) -> String {
    let mut s = serde_json::to_string_pretty(&InstanceFile::from_instance(inst)).expect("serializable");
    s.push('\n');
    s
}

pub fn read_instance(path: &Path) -> anyhow::Result<OcInstance> {
    let text = fs::read_to_string(path)?;
    Ok(parse_instance(&text)?)
}

pub fn write_instance(path: &Path, inst: &OcInstance) -> std::io::Result<()> {
    fs::write(path, instance_to_string(inst))
}
