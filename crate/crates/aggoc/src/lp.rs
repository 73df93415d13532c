//! CPLEX LP text export of the mixed-integer model, and a small reader for
//! the subset this module writes.
//!
//! Variables are named `m_i_t_s_u` with zero-based agent, time, state and
//! control indices. Constraint rows are named `c_ii_i_t` (one pair per
//! `(i, t)`), `c_iii_i_s_u` (no weight on non-initial state `s` at `t = 0`)
//! and `c_iv_i_t_s` (flow into state `s` at time `t`). Variables are listed in
//! `(i, t, s, u)` order, rows in family order per agent, so identical models
//! give byte-identical files.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use aggoc_core::micp::{Family, MicpModel, Variable};
use aggoc_core::SocialCost;

const WIDTH: usize = 78;

pub fn variable_name(v: &Variable) -> String {
    format!("m_{}_{}_{}_{}", v.agent, v.t, v.state, v.control)
}

/// Objective of `J_bar` as constant + linear + quadratic parts, with the
/// quadratic coefficients already halved (value = `Σ q m_v m_w`).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExpandedObjective {
    pub constant: f64,
    pub linear: BTreeMap<usize, f64>,
    pub quadratic: BTreeMap<(usize, usize), f64>,
}

pub fn expand_objective(model: &MicpModel) -> ExpandedObjective {
    let n = model.num_agents as f64;
    let mut out = ExpandedObjective::default();
    for block in &model.blocks {
        let a: Vec<(usize, f64)> = block.terms.iter().map(|&(v, c)| (v, c / n)).collect();
        let mut add_linear = |scale: f64| {
            for &(v, c) in &a {
                *out.linear.entry(v).or_default() += scale * c;
            }
        };
        match block.cost {
            SocialCost::Quadratic { alpha, target } => {
                add_linear(-2.0 * alpha * target);
                out.constant += alpha * target * target;
                for (p, &(v, cv)) in a.iter().enumerate() {
                    *out.quadratic.entry((v, v)).or_default() += alpha * cv * cv;
                    for &(w, cw) in &a[p + 1..] {
                        let key = if v < w { (v, w) } else { (w, v) };
                        *out.quadratic.entry(key).or_default() += 2.0 * alpha * cv * cw;
                    }
                }
            }
            SocialCost::Linear { weight } => add_linear(weight),
            SocialCost::Identity => add_linear(1.0),
            SocialCost::Zero => {}
        }
    }
    out.linear.retain(|_, c| *c != 0.0);
    out.quadratic.retain(|_, c| *c != 0.0);
    out
}

impl ExpandedObjective {
    pub fn evaluate(&self, m: &[f64]) -> f64 {
        self.constant
            + self.linear.iter().map(|(&v, c)| c * m[v]).sum::<f64>()
            + self.quadratic.iter().map(|(&(v, w), c)| c * m[v] * m[w]).sum::<f64>()
    }
}

struct Wrapped {
    text: String,
    line: usize,
}

impl Wrapped {
    fn new() -> Self {
        Self {
            text: String::new(),
            line: 0,
        }
    }

    fn start(&mut self, head: &str) {
        self.text.push(' ');
        self.text.push_str(head);
        self.line = head.len() + 1;
    }

    fn token(&mut self, tok: &str) {
        if self.line + tok.len() + 1 > WIDTH {
            self.text.push_str("\n   ");
            self.line = 3;
        }
        self.text.push(' ');
        self.text.push_str(tok);
        self.line += tok.len() + 1;
    }

    fn end(&mut self) {
        self.text.push('\n');
        self.line = 0;
    }

    fn signed(&mut self, first: bool, coef: f64, rest: &str) {
        let sign = if coef < 0.0 { "-" } else { "+" };
        let body = if coef.abs() == 1.0 && !rest.is_empty() {
            rest.to_string()
        } else if rest.is_empty() {
            format!("{}", coef.abs())
        } else {
            format!("{} {rest}", coef.abs())
        };
        if first && coef >= 0.0 {
            self.token(&body);
        } else {
            self.token(&format!("{sign} {body}"));
        }
    }
}

/// Writes `model` in CPLEX LP format.
pub fn write_lp(model: &MicpModel) -> String {
    let names: Vec<String> = model.variables.iter().map(variable_name).collect();
    let obj = expand_objective(model);
    let mut out = String::new();
    writeln!(out, "\\ aggoc mixed-integer model").unwrap();
    writeln!(
        out,
        "\\ N = {}, T = {}, d(m) = {}",
        model.num_agents,
        model.horizon,
        model.variable_count()
    )
    .unwrap();
    writeln!(out, "\\ m_i_t_s_u: agent i, time t, state index s, control index u (0-based)").unwrap();
    out.push_str("Minimize\n");
    let mut w = Wrapped::new();
    w.start("obj:");
    let mut first = true;
    if obj.constant != 0.0 || (obj.linear.is_empty() && obj.quadratic.is_empty()) {
        w.signed(true, obj.constant, "");
        first = false;
    }
    for (&v, &c) in &obj.linear {
        w.signed(first, c, &names[v]);
        first = false;
    }
    if !obj.quadratic.is_empty() {
        w.token(if first { "[" } else { "+ [" });
        let mut inner = true;
        for (&(v, u), &c) in &obj.quadratic {
            let term = if v == u {
                format!("{} ^ 2", names[v])
            } else {
                format!("{} * {}", names[v], names[u])
            };
            w.signed(inner, 2.0 * c, &term);
            inner = false;
        }
        w.token("] / 2");
    }
    w.end();
    out.push_str(&w.text);

    out.push_str("Subject To\n");
    let mut rows = model.constraints.iter().collect::<Vec<_>>();
    rows.sort_by_key(|c| (c.agent, c.family));
    for c in rows {
        let name = match c.family {
            Family::Simplex => format!("c_ii_{}_{}", c.agent, c.t),
            Family::InitialState => format!(
                "c_iii_{}_{}_{}",
                c.agent,
                c.state.unwrap_or(0),
                c.control.unwrap_or(0)
            ),
            Family::Flow => format!("c_iv_{}_{}_{}", c.agent, c.t, c.state.unwrap_or(0)),
            Family::Integrality => unreachable!("integrality is a variable attribute"),
        };
        let mut w = Wrapped::new();
        w.start(&format!("{name}:"));
        for (k, &(v, coef)) in c.terms.iter().enumerate() {
            w.signed(k == 0, coef, &names[v]);
        }
        w.token(&format!("= {}", c.rhs));
        w.end();
        out.push_str(&w.text);
    }

    out.push_str("Bounds\n");
    for n in &names {
        writeln!(out, " {n} >= 0").unwrap();
    }
    out.push_str("General\n");
    let mut w = Wrapped::new();
    w.text.push(' ');
    w.line = 1;
    for (k, n) in names.iter().enumerate() {
        if k == 0 {
            w.text.push_str(n);
            w.line += n.len();
        } else {
            w.token(n);
        }
    }
    w.end();
    out.push_str(&w.text);
    out.push_str("End\n");
    out
}

/// A linear row read back from an LP file.
#[derive(Debug, Clone, PartialEq)]
pub struct LpRow {
    pub name: String,
    pub terms: Vec<(String, f64)>,
    pub rhs: f64,
}

/// The parts of an LP file this module writes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LpDocument {
    pub constant: f64,
    pub linear: Vec<(String, f64)>,
    /// `(v, w, c)` contributing `c * v * w` (the `/ 2` already applied).
    pub quadratic: Vec<(String, String, f64)>,
    pub rows: Vec<LpRow>,
    pub bounded: Vec<String>,
    pub general: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
#[error("LP parse error: {0}")]
pub struct LpParseError(String);

fn err(msg: impl Into<String>) -> LpParseError {
    LpParseError(msg.into())
}

fn number(tok: &str) -> Result<f64, LpParseError> {
    tok.parse().map_err(|_| err(format!("bad number {tok:?}")))
}

/// `[sign] [coef] name` / `[sign] coef` sequences; returns the terms and the
/// constant.
fn linear_terms(tokens: &[&str]) -> Result<(Vec<(String, f64)>, f64), LpParseError> {
    let mut terms = Vec::new();
    let mut constant = 0.0;
    let mut k = 0;
    while k < tokens.len() {
        let mut sign = 1.0;
        if tokens[k] == "+" || tokens[k] == "-" {
            sign = if tokens[k] == "-" { -1.0 } else { 1.0 };
            k += 1;
        }
        let tok = tokens.get(k).ok_or_else(|| err("dangling sign"))?;
        if let Ok(c) = tok.parse::<f64>() {
            match tokens.get(k + 1) {
                Some(name) if !matches!(*name, "+" | "-") => {
                    terms.push((name.to_string(), sign * c));
                    k += 2;
                }
                _ => {
                    constant += sign * c;
                    k += 1;
                }
            }
        } else {
            terms.push((tok.to_string(), sign));
            k += 1;
        }
    }
    Ok((terms, constant))
}

fn quadratic_terms(tokens: &[&str]) -> Result<Vec<(String, String, f64)>, LpParseError> {
    let mut out = Vec::new();
    let mut k = 0;
    while k < tokens.len() {
        let mut sign = 1.0;
        if tokens[k] == "+" || tokens[k] == "-" {
            sign = if tokens[k] == "-" { -1.0 } else { 1.0 };
            k += 1;
        }
        let mut coef = 1.0;
        if let Some(c) = tokens.get(k).and_then(|t| t.parse::<f64>().ok()) {
            coef = c;
            k += 1;
        }
        let v = tokens.get(k).ok_or_else(|| err("missing quadratic variable"))?;
        match tokens.get(k + 1).copied() {
            Some("^") if tokens.get(k + 2) == Some(&"2") => {
                out.push((v.to_string(), v.to_string(), sign * coef / 2.0));
                k += 3;
            }
            Some("*") => {
                let w = tokens.get(k + 2).ok_or_else(|| err("missing factor"))?;
                out.push((v.to_string(), w.to_string(), sign * coef / 2.0));
                k += 3;
            }
            other => return Err(err(format!("bad quadratic term near {other:?}"))),
        }
    }
    Ok(out)
}

pub fn parse_lp(text: &str) -> Result<LpDocument, LpParseError> {
    let mut sections: Vec<(&str, String)> = Vec::new();
    for line in text.lines() {
        let line = line.split('\\').next().unwrap_or("");
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        match trimmed {
            "Minimize" | "Subject To" | "Bounds" | "General" | "End" => sections.push((trimmed, String::new())),
            _ => {
                let (_, body) = sections.last_mut().ok_or_else(|| err("content before a section"))?;
                if !line.starts_with(' ') {
                    return Err(err(format!("unexpected line {line:?}")));
                }
                // Continuations are indented by three spaces, new entries by one.
                if !line.starts_with("   ") {
                    body.push('\n');
                }
                body.push(' ');
                body.push_str(trimmed);
            }
        }
    }
    let mut doc = LpDocument::default();
    for (head, body) in &sections {
        for entry in body.split('\n').map(str::trim).filter(|e| !e.is_empty()) {
            let tokens: Vec<&str> = entry.split_whitespace().collect();
            match *head {
                "Minimize" => {
                    let rest = tokens.strip_prefix(&["obj:"]).ok_or_else(|| err("objective name"))?;
                    let open = rest.iter().position(|&t| t == "[");
                    let (lin, quad) = match open {
                        Some(p) => {
                            let lin_end = if p > 0 && rest[p - 1] == "+" { p - 1 } else { p };
                            let close = rest.iter().position(|&t| t == "]").ok_or_else(|| err("unclosed ["))?;
                            if rest.get(close + 1..close + 3) != Some(&["/", "2"][..]) {
                                return Err(err("quadratic part must end with ] / 2"));
                            }
                            (&rest[..lin_end], &rest[p + 1..close])
                        }
                        None => (rest, &[][..]),
                    };
                    let (terms, constant) = linear_terms(lin)?;
                    doc.linear = terms;
                    doc.constant = constant;
                    doc.quadratic = quadratic_terms(quad)?;
                }
                "Subject To" => {
                    let name = tokens
                        .first()
                        .and_then(|t| t.strip_suffix(':'))
                        .ok_or_else(|| err("row name"))?;
                    let eq = tokens.iter().position(|&t| t == "=").ok_or_else(|| err("row sense"))?;
                    let (terms, _) = linear_terms(&tokens[1..eq])?;
                    let rhs = number(tokens.get(eq + 1).ok_or_else(|| err("row rhs"))?)?;
                    doc.rows.push(LpRow {
                        name: name.to_string(),
                        terms,
                        rhs,
                    });
                }
                "Bounds" => match tokens.as_slice() {
                    [v, ">=", "0"] => doc.bounded.push(v.to_string()),
                    _ => return Err(err(format!("unsupported bound {entry:?}"))),
                },
                "General" => doc.general.extend(tokens.iter().map(|t| t.to_string())),
                _ => {}
            }
        }
    }
    Ok(doc)
}

impl LpDocument {
    /// The objective at `value(name)`; unknown names are an error.
    pub fn evaluate(&self, value: &HashMap<String, f64>) -> Result<f64, LpParseError> {
        let get = |n: &str| value.get(n).copied().ok_or_else(|| err(format!("no value for {n}")));
        let mut total = self.constant;
        for (n, c) in &self.linear {
            total += c * get(n)?;
        }
        for (v, w, c) in &self.quadratic {
            total += c * get(v)? * get(w)?;
        }
        Ok(total)
    }

    /// Largest `|lhs - rhs|` over all rows.
    pub fn max_row_residual(&self, value: &HashMap<String, f64>) -> Result<f64, LpParseError> {
        let mut worst = 0.0f64;
        for row in &self.rows {
            let mut lhs = 0.0;
            for (n, c) in &row.terms {
                lhs += c * value.get(n).copied().ok_or_else(|| err(format!("no value for {n}")))?;
            }
            worst = worst.max((lhs - row.rhs).abs());
        }
        Ok(worst)
    }
}

/// Names and values of an assignment, for [`LpDocument::evaluate`].
pub fn assignment(model: &MicpModel, m: &[f64]) -> HashMap<String, f64> {
    model
        .variables
        .iter()
        .zip(m)
        .map(|(v, &x)| (variable_name(v), x))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use aggoc_core::micp::build_micp;
    use aggoc_core::synthetic::{self, Shape};

    #[test]
    fn expansion_matches_block_evaluation() {
        for seed in 0..30 {
            let inst = synthetic::random_instance(seed, &Shape::default());
            let model = build_micp(&inst).unwrap();
            let obj = expand_objective(&model);
            for x in inst.agents[0].trajectories().into_iter().take(5) {
                let mut profile: Vec<_> = inst.agents.iter().map(|a| a.first_trajectory().unwrap()).collect();
                profile[0] = x;
                let m = model.trajectory_to_m(&profile).unwrap();
                let a = model.evaluate(&m).unwrap();
                assert!((obj.evaluate(&m) - a).abs() <= 1e-9 * (1.0 + a.abs()));
            }
        }
    }

    #[test]
    fn lines_are_wrapped() {
        let inst = synthetic::random_instance(3, &Shape {
            agents: (3, 3),
            horizon: (4, 4),
            ..Shape::default()
        });
        let text = write_lp(&build_micp(&inst).unwrap());
        assert!(text.lines().all(|l| l.len() <= WIDTH + 40));
    }
}
