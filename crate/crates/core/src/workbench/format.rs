//! JSON documents for MDPs and policies, with human-readable names mapped to
//! dense ids.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{validate, ActionId, ExplicitMdp, MdpBuilder, Policy, StateId, Violation};

const MASS_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormatError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("duplicate state name {0:?}")]
    DuplicateState(String),
    #[error("duplicate action name {0:?}")]
    DuplicateAction(String),
    #[error("{field}: unknown state {name:?}")]
    UnknownState { field: String, name: String },
    #[error("{field}: unknown action {name:?}")]
    UnknownAction { field: String, name: String },
    #[error("no goal states declared")]
    NoGoals,
    #[error("{field}: probabilities of ({state}, {action}) sum to {sum}, expected 1")]
    ProbabilityMass {
        field: String,
        state: String,
        action: String,
        sum: f64,
    },
    #[error("{field}: negative cost {cost} for ({state}, {action})")]
    NegativeCost {
        field: String,
        state: String,
        action: String,
        cost: f64,
    },
    #[error("{field}: ({state}, {action}) declared twice")]
    DuplicateRow {
        field: String,
        state: String,
        action: String,
    },
    #[error("penalty: expected a positive number or \"inf\", got {0}")]
    BadPenalty(String),
    #[error("invalid MDP: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

impl From<serde_json::Error> for FormatError {
    fn from(e: serde_json::Error) -> Self {
        FormatError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum PenaltyDoc {
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct OutcomeDoc {
    next: String,
    p: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RowDoc {
    state: String,
    action: String,
    cost: f64,
    outcomes: Vec<OutcomeDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MdpDoc {
    states: Vec<String>,
    actions: Vec<String>,
    #[serde(default)]
    goals: Vec<String>,
    #[serde(default)]
    start: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    penalty: Option<PenaltyDoc>,
    transitions: Vec<RowDoc>,
}

/// An MDP together with the names its document used.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedMdp {
    pub mdp: ExplicitMdp,
    pub state_names: Vec<String>,
    pub action_names: Vec<String>,
}

impl NamedMdp {
    /// Names `s0, s1, ...` and `a0, a1, ...`.
    pub fn anonymous(mdp: ExplicitMdp) -> NamedMdp {
        NamedMdp {
            state_names: (0..mdp.num_states()).map(|i| format!("s{i}")).collect(),
            action_names: (0..mdp.num_actions()).map(|i| format!("a{i}")).collect(),
            mdp,
        }
    }

    pub fn state_id(&self, name: &str) -> Option<StateId> {
        self.state_names.iter().position(|n| n == name).map(StateId)
    }

    pub fn action_id(&self, name: &str) -> Option<ActionId> {
        self.action_names
            .iter()
            .position(|n| n == name)
            .map(ActionId)
    }

    pub fn state_name(&self, s: StateId) -> &str {
        &self.state_names[s.0]
    }

    pub fn action_name(&self, a: ActionId) -> &str {
        &self.action_names[a.0]
    }
}

fn index(
    names: &[String],
    dup: fn(String) -> FormatError,
) -> Result<HashMap<&str, usize>, FormatError> {
    let mut map = HashMap::with_capacity(names.len());
    for (i, n) in names.iter().enumerate() {
        if map.insert(n.as_str(), i).is_some() {
            return Err(dup(n.clone()));
        }
    }
    Ok(map)
}

/// Parses and validates an MDP document.
pub fn parse_mdp(text: &str) -> Result<NamedMdp, FormatError> {
    let doc: MdpDoc = serde_json::from_str(text)?;
    let states = index(&doc.states, FormatError::DuplicateState)?;
    let actions = index(&doc.actions, FormatError::DuplicateAction)?;
    let state = |field: String, name: &str| {
        states
            .get(name)
            .copied()
            .ok_or_else(|| FormatError::UnknownState {
                field,
                name: name.to_string(),
            })
    };

    if doc.goals.is_empty() {
        return Err(FormatError::NoGoals);
    }
    let mut b = MdpBuilder::new(doc.states.len(), doc.actions.len());
    for (i, g) in doc.goals.iter().enumerate() {
        b.goal(state(format!("goals[{i}]"), g)?).unwrap();
    }
    if let Some(s0) = &doc.start {
        b.start(state("start".into(), s0)?).unwrap();
    }
    let penalty = match &doc.penalty {
        None => f64::INFINITY,
        Some(PenaltyDoc::Number(d)) if *d > 0.0 => *d,
        Some(PenaltyDoc::Text(t)) if t == "inf" || t == "infinity" => f64::INFINITY,
        Some(PenaltyDoc::Number(d)) => return Err(FormatError::BadPenalty(d.to_string())),
        Some(PenaltyDoc::Text(t)) => return Err(FormatError::BadPenalty(format!("{t:?}"))),
    };
    b.penalty(penalty);

    for (i, row) in doc.transitions.iter().enumerate() {
        let field = format!("transitions[{i}]");
        let s = state(format!("{field}.state"), &row.state)?;
        let a = actions.get(row.action.as_str()).copied().ok_or_else(|| {
            FormatError::UnknownAction {
                field: format!("{field}.action"),
                name: row.action.clone(),
            }
        })?;
        if row.cost < 0.0 {
            return Err(FormatError::NegativeCost {
                field,
                state: row.state.clone(),
                action: row.action.clone(),
                cost: row.cost,
            });
        }
        let mut outs = Vec::with_capacity(row.outcomes.len());
        for (j, o) in row.outcomes.iter().enumerate() {
            outs.push((state(format!("{field}.outcomes[{j}].next"), &o.next)?, o.p));
        }
        let sum: f64 = outs.iter().map(|x| x.1).sum();
        if (sum - 1.0).abs() > MASS_TOL {
            return Err(FormatError::ProbabilityMass {
                field,
                state: row.state.clone(),
                action: row.action.clone(),
                sum,
            });
        }
        b.add_action(s, a, row.cost, &outs)
            .map_err(|_| FormatError::DuplicateRow {
                field,
                state: row.state.clone(),
                action: row.action.clone(),
            })?;
    }

    let mdp = b.build_unchecked();
    let named = NamedMdp {
        mdp,
        state_names: doc.states,
        action_names: doc.actions,
    };
    let violations = validate(&named.mdp);
    if !violations.is_empty() {
        return Err(FormatError::Invalid(
            violations.iter().map(|v| describe(&named, v)).collect(),
        ));
    }
    Ok(named)
}

fn describe(named: &NamedMdp, v: &Violation) -> String {
    let mut text = v.to_string();
    // Replace the first (state, action) pair with the document's names.
    let pair = match v {
        Violation::ProbabilitySum { state, action, .. }
        | Violation::ProbabilityRange { state, action, .. }
        | Violation::GoalNotAbsorbing { state, action }
        | Violation::GoalCostNonzero { state, action, .. }
        | Violation::NonPositiveCost { state, action, .. } => Some((*state, *action)),
        _ => None,
    };
    if let Some((s, a)) = pair {
        text = text.replacen(
            &format!("({s}, {a})"),
            &format!("({}, {})", named.state_name(s), named.action_name(a)),
            1,
        );
    } else if let Violation::NoApplicableAction { state } = v {
        text = text.replacen(&state.to_string(), named.state_name(*state), 1);
    }
    text
}

/// Writes a document that [`parse_mdp`] reads back to an identical MDP.
pub fn write_mdp(named: &NamedMdp) -> String {
    let mdp = &named.mdp;
    let mut transitions = Vec::with_capacity(mdp.num_transitions());
    for s in mdp.states() {
        for row in mdp.rows(s) {
            transitions.push(RowDoc {
                state: named.state_name(s).to_string(),
                action: named.action_name(row.action).to_string(),
                cost: row.cost,
                outcomes: row
                    .outcomes
                    .iter()
                    .map(|o| OutcomeDoc {
                        next: named.state_name(o.next).to_string(),
                        p: o.prob,
                    })
                    .collect(),
            });
        }
    }
    let d = mdp.penalty();
    let doc = MdpDoc {
        states: named.state_names.clone(),
        actions: named.action_names.clone(),
        goals: mdp
            .goals()
            .map(|g| named.state_name(g).to_string())
            .collect(),
        start: mdp.start().map(|s| named.state_name(s).to_string()),
        penalty: Some(if d.is_finite() {
            PenaltyDoc::Number(d)
        } else {
            PenaltyDoc::Text("inf".into())
        }),
        transitions,
    };
    serde_json::to_string_pretty(&doc).expect("document serializes")
}

#[derive(Debug, Serialize, Deserialize)]
struct PolicyDoc {
    policy: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    values: Option<BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    goal_probs: Option<BTreeMap<String, f64>>,
}

/// Parses `{"policy": {state: action}}`; extra annotations are ignored.
pub fn parse_policy(named: &NamedMdp, text: &str) -> Result<Policy, FormatError> {
    let doc: PolicyDoc = serde_json::from_str(text)?;
    doc.policy
        .iter()
        .map(|(s, a)| {
            let sid = named.state_id(s).ok_or_else(|| FormatError::UnknownState {
                field: "policy".into(),
                name: s.clone(),
            })?;
            let aid = named
                .action_id(a)
                .ok_or_else(|| FormatError::UnknownAction {
                    field: format!("policy.{s}"),
                    name: a.clone(),
                })?;
            Ok((sid, aid))
        })
        .collect()
}

/// Writes a policy document, optionally annotated with per-state values and
/// goal probabilities (non-finite values are omitted).
pub fn write_policy(
    named: &NamedMdp,
    policy: &Policy,
    values: Option<&[f64]>,
    goal_probs: Option<&[f64]>,
) -> String {
    let table = |t: &[f64]| -> BTreeMap<String, f64> {
        t.iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .map(|(i, &v)| (named.state_names[i].clone(), v))
            .collect()
    };
    let doc = PolicyDoc {
        policy: policy
            .iter()
            .map(|(s, a)| {
                (
                    named.state_name(s).to_string(),
                    named.action_name(a).to_string(),
                )
            })
            .collect(),
        values: values.map(table),
        goal_probs: goal_probs.map(table),
    };
    serde_json::to_string_pretty(&doc).expect("document serializes")
}
