//! Greedy transition graphs and goal-free end components ("traps") of the
//! goal-probability problem.
//!
//! A Bellman fixed point of the max-probability backup can overestimate the
//! optimum on sets of states that can circulate among themselves forever
//! without reaching a goal. Such a set is an end component of the graph of
//! greedy actions. Its optimal value can be no larger than the best value
//! obtainable by leaving it, which is what [`eliminate_traps`] assigns.

use crate::model::{ActionId, ExplicitMdp, StateId};

/// The transition graph induced by all `eta`-greedy actions of a
/// goal-probability table, optionally restricted to what a root reaches.
#[derive(Debug, Clone)]
pub struct GreedyGraph {
    /// Per state: greedy actions, empty for goals and states outside the graph.
    pub actions: Vec<Vec<ActionId>>,
    pub in_graph: Vec<bool>,
    /// States of the graph in discovery order.
    pub members: Vec<StateId>,
    /// Largest `|best Q - table[s]|` over non-goal members.
    pub max_residual: f64,
    /// Q-value evaluations spent building the graph.
    pub q_evals: usize,
}

impl GreedyGraph {
    pub fn build(mdp: &ExplicitMdp, probs: &[f64], root: Option<StateId>, eta: f64) -> GreedyGraph {
        let n = mdp.num_states();
        let mut g = GreedyGraph {
            actions: vec![Vec::new(); n],
            in_graph: vec![false; n],
            members: Vec::new(),
            max_residual: 0.0,
            q_evals: 0,
        };
        let mut stack: Vec<StateId> = match root {
            Some(r) => vec![r],
            None => mdp.states().collect(),
        };
        for &s in &stack {
            g.in_graph[s.0] = true;
        }
        match root {
            Some(r) => g.members.push(r),
            None => g.members = stack.clone(),
        }
        while let Some(s) = stack.pop() {
            if mdp.is_goal(s) {
                continue;
            }
            let rows = mdp.rows(s);
            let scores: Vec<f64> = rows.iter().map(|r| r.expect(probs)).collect();
            g.q_evals += rows.len();
            let best = scores.iter().copied().fold(0.0, f64::max);
            g.max_residual = g.max_residual.max((best - probs[s.0]).abs());
            for (row, &q) in rows.iter().zip(&scores) {
                if q >= best - eta {
                    g.actions[s.0].push(row.action);
                    if root.is_some() {
                        for o in &row.outcomes {
                            if !g.in_graph[o.next.0] {
                                g.in_graph[o.next.0] = true;
                                g.members.push(o.next);
                                stack.push(o.next);
                            }
                        }
                    }
                }
            }
        }
        g
    }
}

/// Maximal end components of the sub-MDP given by `actions`, ignoring goal
/// states and any action with an outcome in a goal. Each component is a
/// sorted list of states; every state in it keeps at least one action whose
/// outcomes all stay inside the component.
pub fn goal_free_end_components(mdp: &ExplicitMdp, actions: &[Vec<ActionId>]) -> Vec<Vec<StateId>> {
    let n = mdp.num_states();
    let mut avail: Vec<Vec<ActionId>> = (0..n)
        .map(|s| {
            if mdp.is_goal(StateId(s)) {
                return Vec::new();
            }
            actions[s]
                .iter()
                .copied()
                .filter(|&a| {
                    mdp.row(StateId(s), a)
                        .map(|r| r.outcomes.iter().all(|o| !mdp.is_goal(o.next)))
                        .unwrap_or(false)
                })
                .collect()
        })
        .collect();
    loop {
        let comp = scc_ids(mdp, &avail);
        let mut changed = false;
        let alive: Vec<bool> = avail.iter().map(|a| !a.is_empty()).collect();
        for s in 0..n {
            let before = avail[s].len();
            let cs = comp[s];
            avail[s].retain(|&a| {
                mdp.row(StateId(s), a)
                    .unwrap()
                    .outcomes
                    .iter()
                    .all(|o| comp[o.next.0] == cs && alive[o.next.0])
            });
            changed |= avail[s].len() != before;
        }
        if !changed {
            let mut groups: std::collections::BTreeMap<usize, Vec<StateId>> = Default::default();
            for s in 0..n {
                if !avail[s].is_empty() {
                    groups.entry(comp[s]).or_default().push(StateId(s));
                }
            }
            return groups.into_values().collect();
        }
    }
}

/// Strongly connected component id per state over the edges of `avail`.
/// States with no available action get a component of their own.
fn scc_ids(mdp: &ExplicitMdp, avail: &[Vec<ActionId>]) -> Vec<usize> {
    const UNSET: usize = usize::MAX;
    let n = mdp.num_states();
    let succ: Vec<Vec<usize>> = (0..n)
        .map(|s| {
            let mut v: Vec<usize> = avail[s]
                .iter()
                .flat_map(|&a| mdp.row(StateId(s), a).unwrap().outcomes.iter())
                .map(|o| o.next.0)
                .filter(|&t| !avail[t].is_empty())
                .collect();
            v.sort_unstable();
            v.dedup();
            v
        })
        .collect();
    let mut index = vec![UNSET; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![UNSET; n];
    let mut stack = Vec::new();
    let mut next_index = 0;
    let mut next_comp = 0;
    // (node, next child position)
    let mut call: Vec<(usize, usize)> = Vec::new();
    for root in 0..n {
        if index[root] != UNSET {
            continue;
        }
        call.push((root, 0));
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if *pos < succ[v].len() {
                let w = succ[v][*pos];
                *pos += 1;
                if index[w] == UNSET {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(u, _)) = call.last() {
                    low[u] = low[u].min(low[v]);
                }
                if low[v] == index[v] {
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp[w] = next_comp;
                        if w == v {
                            break;
                        }
                    }
                    next_comp += 1;
                }
            }
        }
    }
    comp
}

/// Best probability of leaving `component` from inside it, assuming the
/// process may wander inside the component for free. Zero if no action of
/// any member leaves it.
pub fn escape_value(
    mdp: &ExplicitMdp,
    probs: &[f64],
    inside: &[bool],
    component: &[StateId],
) -> f64 {
    escape_by(mdp, probs, |t| inside[t], component)
}

fn escape_by(
    mdp: &ExplicitMdp,
    probs: &[f64],
    inside: impl Fn(usize) -> bool,
    component: &[StateId],
) -> f64 {
    let mut best: f64 = 0.0;
    for &s in component {
        for row in mdp.rows(s) {
            let mut stay = 0.0;
            let mut out = 0.0;
            let mut leaves = false;
            for o in &row.outcomes {
                if inside(o.next.0) {
                    stay += o.prob;
                } else {
                    leaves = true;
                    out += o.prob * probs[o.next.0];
                }
            }
            if leaves {
                let leave_mass = 1.0 - stay;
                let v = if leave_mass > 0.0 {
                    (out / leave_mass).min(1.0)
                } else {
                    0.0
                };
                best = best.max(v);
            }
        }
    }
    best
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrapRound {
    /// End components found in the greedy graph.
    pub components: usize,
    /// Components whose value was lowered.
    pub lowered: usize,
    /// States whose value was lowered.
    pub lowered_states: usize,
}

/// The goal-free maximal end components of the whole MDP. Inside one of
/// them every state can reach every other surely, so all share one optimal
/// goal probability: the best escape value of the component.
#[derive(Debug, Clone, Default)]
pub struct EndComponents {
    pub components: Vec<Vec<StateId>>,
    id: Vec<Option<usize>>,
}

impl EndComponents {
    pub fn of(mdp: &ExplicitMdp) -> EndComponents {
        let n = mdp.num_states();
        let all: Vec<Vec<ActionId>> = (0..n)
            .map(|s| mdp.applicable(StateId(s)).collect())
            .collect();
        let components = goal_free_end_components(mdp, &all);
        let mut id = vec![None; n];
        for (i, c) in components.iter().enumerate() {
            for s in c {
                id[s.0] = Some(i);
            }
        }
        EndComponents { components, id }
    }

    pub fn component_of(&self, s: StateId) -> Option<usize> {
        self.id[s.0]
    }

    /// Escape value of component `i`.
    pub fn escape(&self, mdp: &ExplicitMdp, probs: &[f64], i: usize) -> f64 {
        escape_by(mdp, probs, |t| self.id[t] == Some(i), &self.components[i])
    }
}

/// Finds the goal-free end components of `graph` and lowers every one whose
/// value exceeds its escape value by more than `eta` to that escape value.
/// The goal-free maximal end component of the whole MDP enclosing each trap
/// is then capped at its own escape value the same way.
///
/// The second step matters when states just outside a greedy trap are
/// overestimated themselves: their values make leaving the trap look almost
/// as good as staying, while the enclosing component may have a much lower
/// exit.
pub fn eliminate_traps(
    mdp: &ExplicitMdp,
    probs: &mut [f64],
    graph: &GreedyGraph,
    ecs: &EndComponents,
    eta: f64,
) -> TrapRound {
    let comps = goal_free_end_components(mdp, &graph.actions);
    let mut inside = vec![false; mdp.num_states()];
    let mut round = TrapRound {
        components: comps.len(),
        ..Default::default()
    };
    let lower = |probs: &mut [f64], comp: &[StateId], escape: f64, round: &mut TrapRound| {
        let internal = comp.iter().map(|s| probs[s.0]).fold(0.0, f64::max);
        if internal > escape + eta {
            log::debug!(
                "trap of {} states lowered from {internal} to {escape}",
                comp.len()
            );
            round.lowered += 1;
            for s in comp {
                if probs[s.0] > escape {
                    probs[s.0] = escape;
                    round.lowered_states += 1;
                }
            }
        }
    };
    for comp in &comps {
        for s in comp {
            inside[s.0] = true;
        }
        let escape = escape_value(mdp, probs, &inside, comp);
        lower(probs, comp, escape, &mut round);
        for s in comp {
            inside[s.0] = false;
        }
    }
    let mut enclosing: Vec<usize> = comps
        .iter()
        .filter_map(|c| ecs.component_of(c[0]))
        .collect();
    enclosing.sort_unstable();
    enclosing.dedup();
    for i in enclosing {
        let comp = &ecs.components[i];
        let escape = ecs.escape(mdp, probs, i);
        lower(probs, comp, escape, &mut round);
    }
    round
}
