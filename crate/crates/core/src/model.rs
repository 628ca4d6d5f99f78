//! Explicit tabular MDPs with goals, an optional start state and a dead-end
//! penalty, plus the qualitative graph analyses the solvers rely on.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::ops::{Index, IndexMut};

use thiserror::Error;

/// Tolerance for the "successor probabilities sum to one" check.
pub const PROB_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActionId(pub usize);

impl StateId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl ActionId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a{}", self.0)
    }
}

/// One stored successor of a state-action pair. Zero-probability successors
/// are never stored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub next: StateId,
    pub prob: f64,
}

/// An applicable action in some state together with its cost and sparse
/// successor distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionRow {
    pub action: ActionId,
    pub cost: f64,
    pub outcomes: Vec<Outcome>,
}

impl ActionRow {
    /// Expectation of `table` over this row's successors.
    #[inline]
    pub fn expect(&self, table: &[f64]) -> f64 {
        let mut acc = 0.0;
        for o in &self.outcomes {
            let v = table[o.next.0];
            if v == f64::INFINITY {
                return f64::INFINITY;
            }
            acc += o.prob * v;
        }
        acc
    }
}

/// A goal-oriented MDP in explicit form. Immutable once built.
///
/// Rows are stored per state, sorted by action id. An action with no row in
/// a state is inapplicable there. The penalty is `f64::INFINITY` for the
/// infinite-penalty criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitMdp {
    num_states: usize,
    num_actions: usize,
    rows: Vec<Vec<ActionRow>>,
    goals: Vec<bool>,
    start: Option<StateId>,
    penalty: f64,
}

impl ExplicitMdp {
    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn start(&self) -> Option<StateId> {
        self.start
    }

    pub fn penalty(&self) -> f64 {
        self.penalty
    }

    pub fn is_goal(&self, s: StateId) -> bool {
        self.goals[s.0]
    }

    pub fn goal_mask(&self) -> &[bool] {
        &self.goals
    }

    pub fn goals(&self) -> impl Iterator<Item = StateId> + '_ {
        self.goals
            .iter()
            .enumerate()
            .filter(|(_, &g)| g)
            .map(|(i, _)| StateId(i))
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> {
        (0..self.num_states).map(StateId)
    }

    /// Applicable actions of `s` with their rows, in increasing action id.
    pub fn rows(&self, s: StateId) -> &[ActionRow] {
        &self.rows[s.0]
    }

    pub fn row(&self, s: StateId, a: ActionId) -> Option<&ActionRow> {
        let rows = &self.rows[s.0];
        rows.binary_search_by_key(&a, |r| r.action)
            .ok()
            .map(|i| &rows[i])
    }

    pub fn is_applicable(&self, s: StateId, a: ActionId) -> bool {
        self.row(s, a).is_some()
    }

    pub fn applicable(&self, s: StateId) -> impl Iterator<Item = ActionId> + '_ {
        self.rows[s.0].iter().map(|r| r.action)
    }

    pub fn num_transitions(&self) -> usize {
        self.rows
            .iter()
            .flat_map(|rs| rs.iter())
            .map(|r| r.outcomes.len())
            .sum()
    }

    /// Returns a copy with a different penalty.
    pub fn with_penalty(&self, penalty: f64) -> ExplicitMdp {
        ExplicitMdp {
            penalty,
            ..self.clone()
        }
    }

    /// Returns a copy with a different start state.
    pub fn with_start(&self, start: Option<StateId>) -> ExplicitMdp {
        ExplicitMdp {
            start,
            ..self.clone()
        }
    }

    /// Returns a copy keeping only the actions for which `keep` holds.
    /// Goal rows are never removed.
    pub fn restrict_actions(&self, mut keep: impl FnMut(StateId, ActionId) -> bool) -> ExplicitMdp {
        let rows = self
            .rows
            .iter()
            .enumerate()
            .map(|(s, rs)| {
                rs.iter()
                    .filter(|r| self.goals[s] || keep(StateId(s), r.action))
                    .cloned()
                    .collect()
            })
            .collect();
        ExplicitMdp {
            rows,
            ..self.clone()
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MdpError {
    #[error("state {0} out of range")]
    StateOutOfRange(usize),
    #[error("action {0} out of range")]
    ActionOutOfRange(usize),
    #[error("row ({state}, {action}) declared twice")]
    DuplicateRow { state: StateId, action: ActionId },
    #[error("invalid MDP: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
}

/// Incremental constructor for [`ExplicitMdp`].
///
/// `add_action` merges repeated successors and drops zero-probability ones.
#[derive(Debug, Clone)]
pub struct MdpBuilder {
    num_states: usize,
    num_actions: usize,
    rows: Vec<BTreeMap<ActionId, ActionRow>>,
    goals: Vec<bool>,
    start: Option<StateId>,
    penalty: f64,
}

impl MdpBuilder {
    pub fn new(num_states: usize, num_actions: usize) -> Self {
        MdpBuilder {
            num_states,
            num_actions,
            rows: vec![BTreeMap::new(); num_states],
            goals: vec![false; num_states],
            start: None,
            penalty: f64::INFINITY,
        }
    }

    pub fn goal(&mut self, s: usize) -> Result<&mut Self, MdpError> {
        self.check_state(s)?;
        self.goals[s] = true;
        Ok(self)
    }

    pub fn start(&mut self, s: usize) -> Result<&mut Self, MdpError> {
        self.check_state(s)?;
        self.start = Some(StateId(s));
        Ok(self)
    }

    pub fn penalty(&mut self, d: f64) -> &mut Self {
        self.penalty = d;
        self
    }

    pub fn add_action(
        &mut self,
        s: usize,
        a: usize,
        cost: f64,
        outcomes: &[(usize, f64)],
    ) -> Result<&mut Self, MdpError> {
        self.check_state(s)?;
        if a >= self.num_actions {
            return Err(MdpError::ActionOutOfRange(a));
        }
        let action = ActionId(a);
        if self.rows[s].contains_key(&action) {
            return Err(MdpError::DuplicateRow {
                state: StateId(s),
                action,
            });
        }
        let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
        for &(next, p) in outcomes {
            self.check_state(next)?;
            *merged.entry(next).or_insert(0.0) += p;
        }
        let outcomes = merged
            .into_iter()
            .filter(|&(_, p)| p != 0.0)
            .map(|(next, prob)| Outcome {
                next: StateId(next),
                prob,
            })
            .collect();
        self.rows[s].insert(
            action,
            ActionRow {
                action,
                cost,
                outcomes,
            },
        );
        Ok(self)
    }

    fn check_state(&self, s: usize) -> Result<(), MdpError> {
        if s >= self.num_states {
            Err(MdpError::StateOutOfRange(s))
        } else {
            Ok(())
        }
    }

    /// Builds without validating. Useful for exercising [`validate`].
    pub fn build_unchecked(&self) -> ExplicitMdp {
        ExplicitMdp {
            num_states: self.num_states,
            num_actions: self.num_actions,
            rows: self
                .rows
                .iter()
                .map(|m| m.values().cloned().collect())
                .collect(),
            goals: self.goals.clone(),
            start: self.start,
            penalty: self.penalty,
        }
    }

    pub fn build(&self) -> Result<ExplicitMdp, MdpError> {
        let mdp = self.build_unchecked();
        let violations = validate(&mdp);
        if violations.is_empty() {
            Ok(mdp)
        } else {
            Err(MdpError::Invalid(violations))
        }
    }
}

/// A structural defect found by [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    ProbabilitySum {
        state: StateId,
        action: ActionId,
        sum: f64,
    },
    ProbabilityRange {
        state: StateId,
        action: ActionId,
        next: StateId,
        prob: f64,
    },
    SuccessorOutOfRange {
        state: StateId,
        action: ActionId,
        next: StateId,
    },
    ActionOutOfRange {
        state: StateId,
        action: ActionId,
    },
    GoalNotAbsorbing {
        state: StateId,
        action: ActionId,
    },
    GoalCostNonzero {
        state: StateId,
        action: ActionId,
        cost: f64,
    },
    NoApplicableAction {
        state: StateId,
    },
    NonPositiveCost {
        state: StateId,
        action: ActionId,
        cost: f64,
    },
    StartOutOfRange(StateId),
    InvalidPenalty(f64),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ProbabilitySum { state, action, sum } => {
                write!(f, "({state}, {action}): probabilities sum to {sum} ≠ 1")
            }
            Violation::ProbabilityRange {
                state,
                action,
                next,
                prob,
            } => write!(
                f,
                "({state}, {action}): probability {prob} of successor {next} outside (0, 1]"
            ),
            Violation::SuccessorOutOfRange {
                state,
                action,
                next,
            } => write!(f, "({state}, {action}): successor {next} out of range"),
            Violation::ActionOutOfRange { state, action } => {
                write!(f, "({state}, {action}): action out of range")
            }
            Violation::GoalNotAbsorbing { state, action } => {
                write!(f, "({state}, {action}): goal action leaves the goal")
            }
            Violation::GoalCostNonzero {
                state,
                action,
                cost,
            } => write!(f, "({state}, {action}): goal action cost nonzero ({cost})"),
            Violation::NoApplicableAction { state } => {
                write!(f, "{state}: non-goal state has no applicable action")
            }
            Violation::NonPositiveCost {
                state,
                action,
                cost,
            } => write!(
                f,
                "({state}, {action}): cost {cost} must be strictly positive and finite"
            ),
            Violation::StartOutOfRange(s) => write!(f, "start state {s} out of range"),
            Violation::InvalidPenalty(d) => write!(f, "penalty {d} must be positive"),
        }
    }
}

/// Lists every structural defect of `mdp`. Empty means valid.
pub fn validate(mdp: &ExplicitMdp) -> Vec<Violation> {
    let mut out = Vec::new();
    if !(mdp.penalty > 0.0) {
        out.push(Violation::InvalidPenalty(mdp.penalty));
    }
    if let Some(s0) = mdp.start {
        if s0.0 >= mdp.num_states {
            out.push(Violation::StartOutOfRange(s0));
        }
    }
    for s in mdp.states() {
        let goal = mdp.is_goal(s);
        let rows = mdp.rows(s);
        if !goal && rows.is_empty() {
            out.push(Violation::NoApplicableAction { state: s });
        }
        for row in rows {
            let a = row.action;
            if a.0 >= mdp.num_actions {
                out.push(Violation::ActionOutOfRange {
                    state: s,
                    action: a,
                });
            }
            let mut sum = 0.0;
            for o in &row.outcomes {
                if o.next.0 >= mdp.num_states {
                    out.push(Violation::SuccessorOutOfRange {
                        state: s,
                        action: a,
                        next: o.next,
                    });
                }
                if !(o.prob > 0.0 && o.prob <= 1.0) {
                    out.push(Violation::ProbabilityRange {
                        state: s,
                        action: a,
                        next: o.next,
                        prob: o.prob,
                    });
                }
                sum += o.prob;
            }
            if !((sum - 1.0).abs() <= PROB_SUM_TOL) {
                out.push(Violation::ProbabilitySum {
                    state: s,
                    action: a,
                    sum,
                });
            }
            if goal {
                if row.outcomes.iter().any(|o| o.next != s) {
                    out.push(Violation::GoalNotAbsorbing {
                        state: s,
                        action: a,
                    });
                }
                if row.cost != 0.0 {
                    out.push(Violation::GoalCostNonzero {
                        state: s,
                        action: a,
                        cost: row.cost,
                    });
                }
            } else if !(row.cost > 0.0 && row.cost.is_finite()) {
                out.push(Violation::NonPositiveCost {
                    state: s,
                    action: a,
                    cost: row.cost,
                });
            }
        }
    }
    out
}

/// Forward reachability over all applicable actions.
pub fn reachable_mask(mdp: &ExplicitMdp, source: StateId) -> Vec<bool> {
    let mut seen = vec![false; mdp.num_states()];
    let mut queue = VecDeque::new();
    seen[source.0] = true;
    queue.push_back(source);
    while let Some(s) = queue.pop_front() {
        for row in mdp.rows(s) {
            for o in &row.outcomes {
                if !seen[o.next.0] {
                    seen[o.next.0] = true;
                    queue.push_back(o.next);
                }
            }
        }
    }
    seen
}

pub fn reachable_from(mdp: &ExplicitMdp, source: StateId) -> BTreeSet<StateId> {
    mask_to_set(&reachable_mask(mdp, source))
}

/// `true` for every state from which no goal is reachable.
pub fn dead_end_mask(mdp: &ExplicitMdp) -> Vec<bool> {
    let n = mdp.num_states();
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for s in 0..n {
        for row in &mdp.rows[s] {
            for o in &row.outcomes {
                preds[o.next.0].push(s);
            }
        }
    }
    let mut alive = vec![false; n];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for g in mdp.goals() {
        alive[g.0] = true;
        queue.push_back(g.0);
    }
    while let Some(s) = queue.pop_front() {
        for &p in &preds[s] {
            if !alive[p] {
                alive[p] = true;
                queue.push_back(p);
            }
        }
    }
    alive.into_iter().map(|a| !a).collect()
}

/// Exact dead-end detection: states with no path of positive-probability
/// transitions to a goal.
pub fn detect_dead_ends(mdp: &ExplicitMdp) -> BTreeSet<StateId> {
    mask_to_set(&dead_end_mask(mdp))
}

pub(crate) fn mask_to_set(mask: &[bool]) -> BTreeSet<StateId> {
    mask.iter()
        .enumerate()
        .filter(|(_, &m)| m)
        .map(|(i, _)| StateId(i))
        .collect()
}

/// Partial deterministic Markovian policy.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Policy {
    assignment: BTreeMap<StateId, ActionId>,
}

impl Policy {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn assign(&mut self, s: StateId, a: ActionId) {
        self.assignment.insert(s, a);
    }

    pub fn get(&self, s: StateId) -> Option<ActionId> {
        self.assignment.get(&s).copied()
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (StateId, ActionId)> + '_ {
        self.assignment.iter().map(|(&s, &a)| (s, a))
    }

    /// States assigned an action that is not applicable there.
    pub fn inapplicable(&self, mdp: &ExplicitMdp) -> Vec<(StateId, ActionId)> {
        self.iter()
            .filter(|&(s, a)| s.0 >= mdp.num_states() || !mdp.is_applicable(s, a))
            .collect()
    }

    /// Restriction to the states in `keep`.
    pub fn restricted(&self, keep: impl Fn(StateId) -> bool) -> Policy {
        Policy {
            assignment: self
                .assignment
                .iter()
                .filter(|(&s, _)| keep(s))
                .map(|(&s, &a)| (s, a))
                .collect(),
        }
    }
}

impl FromIterator<(StateId, ActionId)> for Policy {
    fn from_iter<T: IntoIterator<Item = (StateId, ActionId)>>(iter: T) -> Self {
        Policy {
            assignment: iter.into_iter().collect(),
        }
    }
}

macro_rules! table_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name(pub Vec<f64>);

        impl $name {
            pub fn filled(n: usize, v: f64) -> Self {
                $name(vec![v; n])
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.0
            }

            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }

            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }
        }

        impl Index<StateId> for $name {
            type Output = f64;
            fn index(&self, s: StateId) -> &f64 {
                &self.0[s.0]
            }
        }

        impl IndexMut<StateId> for $name {
            fn index_mut(&mut self, s: StateId) -> &mut f64 {
                &mut self.0[s.0]
            }
        }

        impl AsRef<[f64]> for $name {
            fn as_ref(&self) -> &[f64] {
                &self.0
            }
        }
    };
}

table_newtype!(
    /// Per-state costs; `f64::INFINITY` is a legitimate value.
    ValueFn
);
table_newtype!(
    /// Per-state goal probabilities in `[0, 1]`.
    GoalProbFn
);
