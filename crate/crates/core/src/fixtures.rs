//! Small hand-built instances used throughout the tests, the CLI and the
//! documentation.

use crate::model::{ActionId, ExplicitMdp, MdpBuilder, StateId};

pub const START: StateId = StateId(0);
pub const DEAD: StateId = StateId(1);
pub const GOAL: StateId = StateId(2);

/// The risky action of [`three_state`]: cost 1, half to the dead end.
pub const A_D: ActionId = ActionId(0);
/// The safe action of [`three_state`]: cost 3, straight to the goal.
pub const A_G: ActionId = ActionId(1);

/// Start `s0`, dead end `d`, goal `g`.
///
/// `a_d` costs 1 and moves to `d` or `g` with probability 0.5 each; `a_g`
/// costs 3 and reaches `g` surely. `d` only has a unit-cost self-loop.
/// With penalty 4 both single-action policies cost 3 from `s0`.
pub fn three_state(penalty: f64) -> ExplicitMdp {
    let mut b = MdpBuilder::new(3, 2);
    b.goal(GOAL.0)
        .unwrap()
        .start(START.0)
        .unwrap()
        .penalty(penalty);
    b.add_action(START.0, A_D.0, 1.0, &[(DEAD.0, 0.5), (GOAL.0, 0.5)])
        .unwrap();
    b.add_action(START.0, A_G.0, 3.0, &[(GOAL.0, 1.0)]).unwrap();
    b.add_action(DEAD.0, A_D.0, 1.0, &[(DEAD.0, 1.0)]).unwrap();
    b.build().unwrap()
}

/// [`three_state`] with `a_d` removed from the start state.
pub fn three_state_safe_only() -> ExplicitMdp {
    three_state(f64::INFINITY).restrict_actions(|s, a| s != START || a == A_G)
}

/// States: `s`, dead end, goal. One action at `s` of cost `eps * (D + 1)`
/// that reaches the goal with probability `eps` and the dead end otherwise.
///
/// Under the uncapped reading the cost at `s` is `D + eps`; capping yields `D`.
pub fn epsilon_gamble(eps: f64, penalty: f64) -> ExplicitMdp {
    let mut b = MdpBuilder::new(3, 1);
    b.goal(2).unwrap().start(0).unwrap().penalty(penalty);
    b.add_action(0, 0, eps * (penalty + 1.0), &[(2, eps), (1, 1.0 - eps)])
        .unwrap();
    b.add_action(1, 0, 1.0, &[(1, 1.0)]).unwrap();
    b.build().unwrap()
}

/// States: `s0`, dead end, goal. Single action at `s0` of cost 1 reaching
/// goal or dead end with probability 0.5 each.
pub fn half_chance() -> ExplicitMdp {
    let mut b = MdpBuilder::new(3, 1);
    b.goal(2).unwrap().start(0).unwrap();
    b.add_action(0, 0, 1.0, &[(2, 0.5), (1, 0.5)]).unwrap();
    b.add_action(1, 0, 1.0, &[(1, 1.0)]).unwrap();
    b.build().unwrap()
}

/// States: `s`, dead end, goal. One unit-cost action at `s`:
/// 0.5 back to `s`, 0.25 to goal, 0.25 to the dead end.
/// Goal probability 0.5, conditional cost 2.
pub fn self_loop_chain() -> ExplicitMdp {
    let mut b = MdpBuilder::new(3, 1);
    b.goal(2).unwrap().start(0).unwrap();
    b.add_action(0, 0, 1.0, &[(0, 0.5), (2, 0.25), (1, 0.25)])
        .unwrap();
    b.add_action(1, 0, 1.0, &[(1, 1.0)]).unwrap();
    b.build().unwrap()
}

/// Two states, one deterministic action of the given cost into the goal.
pub fn two_state_chain(cost: f64) -> ExplicitMdp {
    let mut b = MdpBuilder::new(2, 1);
    b.goal(1).unwrap().start(0).unwrap();
    b.add_action(0, 0, cost, &[(1, 1.0)]).unwrap();
    b.build().unwrap()
}
