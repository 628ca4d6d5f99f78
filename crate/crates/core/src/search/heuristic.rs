use crate::model::{dead_end_mask, ExplicitMdp, StateId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HeuristicKind {
    /// 0 everywhere.
    ZeroCost,
    /// The penalty (or +inf without one) on graph-detected dead ends, 0 elsewhere.
    DeadendAwareCost,
    /// 1 everywhere.
    AllOnesProb,
    /// 0 on graph-detected dead ends, 1 elsewhere.
    ReachabilityProb,
}

impl HeuristicKind {
    pub fn is_cost(self) -> bool {
        matches!(
            self,
            HeuristicKind::ZeroCost | HeuristicKind::DeadendAwareCost
        )
    }
}

/// Initial value estimates. Admissible by construction: cost kinds never
/// exceed the optimal cost, probability kinds never undershoot the optimal
/// goal probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Heuristic {
    kind: HeuristicKind,
}

impl Heuristic {
    pub fn new(kind: HeuristicKind) -> Heuristic {
        Heuristic { kind }
    }

    pub fn kind(&self) -> HeuristicKind {
        self.kind
    }

    /// Prepares the heuristic for one MDP, running dead-end detection once
    /// if the kind needs it.
    pub fn bind<'a>(&self, mdp: &'a ExplicitMdp) -> BoundHeuristic<'a> {
        let needs_mask = matches!(
            self.kind,
            HeuristicKind::DeadendAwareCost | HeuristicKind::ReachabilityProb
        );
        BoundHeuristic {
            kind: self.kind,
            mdp,
            dead: needs_mask.then(|| dead_end_mask(mdp)),
        }
    }

    /// Heuristic value of `s`. Goals get cost 0 or probability 1.
    pub fn value(&self, mdp: &ExplicitMdp, s: StateId) -> f64 {
        self.bind(mdp).value(s)
    }

    pub fn table(&self, mdp: &ExplicitMdp) -> Vec<f64> {
        self.bind(mdp).table()
    }
}

/// A heuristic tied to one MDP.
#[derive(Debug, Clone)]
pub struct BoundHeuristic<'a> {
    kind: HeuristicKind,
    mdp: &'a ExplicitMdp,
    dead: Option<Vec<bool>>,
}

impl BoundHeuristic<'_> {
    fn is_dead(&self, s: StateId) -> bool {
        self.dead.as_ref().is_some_and(|d| d[s.0])
    }

    pub fn value(&self, s: StateId) -> f64 {
        let goal = self.mdp.is_goal(s);
        match self.kind {
            HeuristicKind::ZeroCost => 0.0,
            HeuristicKind::DeadendAwareCost => {
                if !goal && self.is_dead(s) {
                    self.mdp.penalty()
                } else {
                    0.0
                }
            }
            HeuristicKind::AllOnesProb => 1.0,
            HeuristicKind::ReachabilityProb => {
                if goal || !self.is_dead(s) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn table(&self) -> Vec<f64> {
        self.mdp.states().map(|s| self.value(s)).collect()
    }
}
