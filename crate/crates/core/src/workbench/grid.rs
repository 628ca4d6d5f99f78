//! Slippery gridworlds with pits.
//!
//! Cells are `[x, y]` with `y = 0` the top row. Every free cell is a state.
//! The four moves N, E, S, W succeed with probability `1 - p_slip` and
//! otherwise deflect to one of the two lateral directions with equal
//! probability. Moves into a wall or off the board leave the agent in place.
//! Pits keep the agent forever.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::format::NamedMdp;
use crate::model::{ExplicitMdp, MdpBuilder};

pub type Cell = [usize; 2];

pub const MOVES: [&str; 4] = ["N", "E", "S", "W"];
const DELTAS: [(isize, isize); 4] = [(0, -1), (1, 0), (0, 1), (-1, 0)];

fn default_cost() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    pub start: Cell,
    pub goal: Cell,
    #[serde(default)]
    pub pits: Vec<Cell>,
    #[serde(default)]
    pub walls: Vec<Cell>,
    #[serde(default)]
    pub p_slip: f64,
    #[serde(default = "default_cost")]
    pub move_cost: f64,
    /// Rows whose odd columns and both edge cells are pits, leaving openings
    /// at even interior columns: crossing such a row risks a lateral slip
    /// into a pit whatever the policy does.
    #[serde(default)]
    pub hazard_rows: Vec<usize>,
    /// Additional pits placed uniformly on free cells from the seed.
    #[serde(default)]
    pub random_pits: usize,
    /// Penalty written into the generated MDP; infinite when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penalty: Option<f64>,
}

impl GridSpec {
    pub fn open(width: usize, height: usize) -> GridSpec {
        GridSpec {
            width,
            height,
            start: [0, 0],
            goal: [width.saturating_sub(1), height.saturating_sub(1)],
            pits: Vec::new(),
            walls: Vec::new(),
            p_slip: 0.0,
            move_cost: 1.0,
            hazard_rows: Vec::new(),
            random_pits: 0,
            penalty: None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid must be at least 1x1")]
    Empty,
    #[error("cell {0:?} lies outside the grid")]
    OutOfBounds(Cell),
    #[error("{0} cell lies inside a wall")]
    InWall(&'static str),
    #[error("{0} cell is a pit")]
    InPit(&'static str),
    #[error("slip probability {0} outside [0, 1)")]
    Slip(f64),
    #[error("move cost {0} must be positive and finite")]
    Cost(f64),
    #[error("hazard row {0} outside the grid")]
    HazardRow(usize),
    #[error("start and goal coincide")]
    StartIsGoal,
}

/// The cell each state stands for, and back.
#[derive(Debug, Clone, PartialEq)]
pub struct GridLayout {
    pub width: usize,
    pub height: usize,
    pub cells: Vec<Cell>,
    state_of: Vec<Option<usize>>,
    pub pits: BTreeSet<Cell>,
}

impl GridLayout {
    pub fn state_at(&self, c: Cell) -> Option<usize> {
        if c[0] < self.width && c[1] < self.height {
            self.state_of[c[1] * self.width + c[0]]
        } else {
            None
        }
    }
}

/// A generated grid: the MDP with names plus its layout.
#[derive(Debug, Clone, PartialEq)]
pub struct GridWorld {
    pub named: NamedMdp,
    pub layout: GridLayout,
}

pub fn generate_grid(spec: &GridSpec, seed: u64) -> Result<ExplicitMdp, GridError> {
    generate_grid_world(spec, seed).map(|g| g.named.mdp)
}

pub fn generate_grid_world(spec: &GridSpec, seed: u64) -> Result<GridWorld, GridError> {
    let (w, h) = (spec.width, spec.height);
    if w == 0 || h == 0 {
        return Err(GridError::Empty);
    }
    if !(0.0..1.0).contains(&spec.p_slip) {
        return Err(GridError::Slip(spec.p_slip));
    }
    if !(spec.move_cost > 0.0 && spec.move_cost.is_finite()) {
        return Err(GridError::Cost(spec.move_cost));
    }
    let in_bounds = |c: &Cell| c[0] < w && c[1] < h;
    for c in [&spec.start, &spec.goal]
        .into_iter()
        .chain(&spec.pits)
        .chain(&spec.walls)
    {
        if !in_bounds(c) {
            return Err(GridError::OutOfBounds(*c));
        }
    }
    if let Some(&r) = spec.hazard_rows.iter().find(|&&r| r >= h) {
        return Err(GridError::HazardRow(r));
    }
    if spec.start == spec.goal {
        return Err(GridError::StartIsGoal);
    }
    let walls: BTreeSet<Cell> = spec.walls.iter().copied().collect();
    for (name, c) in [("start", spec.start), ("goal", spec.goal)] {
        if walls.contains(&c) {
            return Err(GridError::InWall(name));
        }
        if spec.pits.contains(&c) {
            return Err(GridError::InPit(name));
        }
    }

    let reserved = |c: &Cell| walls.contains(c) || *c == spec.start || *c == spec.goal;
    let mut pits: BTreeSet<Cell> = spec
        .pits
        .iter()
        .copied()
        .filter(|c| !walls.contains(c))
        .collect();
    for &row in &spec.hazard_rows {
        for x in (1..w).step_by(2).chain([0, w - 1]) {
            let c = [x, row];
            if !reserved(&c) {
                pits.insert(c);
            }
        }
    }
    if spec.random_pits > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let free: Vec<Cell> = (0..h)
            .flat_map(|y| (0..w).map(move |x| [x, y]))
            .filter(|c| !reserved(c) && !pits.contains(c))
            .collect();
        pits.extend(free.choose_multiple(&mut rng, spec.random_pits.min(free.len())));
    }

    let mut cells = Vec::new();
    let mut state_of = vec![None; w * h];
    for y in 0..h {
        for x in 0..w {
            if !walls.contains(&[x, y]) {
                state_of[y * w + x] = Some(cells.len());
                cells.push([x, y]);
            }
        }
    }
    let layout = GridLayout {
        width: w,
        height: h,
        cells,
        state_of,
        pits,
    };

    let step = |c: Cell, dir: usize| -> usize {
        let (dx, dy) = DELTAS[dir];
        let nx = c[0] as isize + dx;
        let ny = c[1] as isize + dy;
        if nx >= 0 && ny >= 0 {
            if let Some(s) = layout.state_at([nx as usize, ny as usize]) {
                return s;
            }
        }
        layout.state_at(c).unwrap()
    };

    let n = layout.cells.len();
    let mut b = MdpBuilder::new(n, MOVES.len());
    let goal = layout.state_at(spec.goal).unwrap();
    b.goal(goal).unwrap();
    b.start(layout.state_at(spec.start).unwrap()).unwrap();
    b.penalty(spec.penalty.unwrap_or(f64::INFINITY));
    let slip = spec.p_slip / 2.0;
    for (s, &c) in layout.cells.iter().enumerate() {
        if s == goal {
            continue;
        }
        for dir in 0..MOVES.len() {
            if layout.pits.contains(&c) {
                b.add_action(s, dir, spec.move_cost, &[(s, 1.0)]).unwrap();
                continue;
            }
            let mut outs = vec![(step(c, dir), 1.0 - spec.p_slip)];
            if slip > 0.0 {
                outs.push((step(c, (dir + 1) % 4), slip));
                outs.push((step(c, (dir + 3) % 4), slip));
            }
            b.add_action(s, dir, spec.move_cost, &outs).unwrap();
        }
    }
    let mdp = b.build().expect("generated grids are valid");
    let state_names = layout
        .cells
        .iter()
        .map(|c| {
            let tag = if layout.pits.contains(c) { "pit" } else { "c" };
            format!("{tag}_{}_{}", c[0], c[1])
        })
        .collect();
    Ok(GridWorld {
        named: NamedMdp {
            mdp,
            state_names,
            action_names: MOVES.iter().map(|m| m.to_string()).collect(),
        },
        layout,
    })
}
