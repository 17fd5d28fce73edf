//! Tabular deterministic grid-world MDP without a reward function.
//!
//! Cells are addressed by `(row, col)` with row 0 at the top. Open cells are
//! numbered row-major into dense [`StateId`]s, which every other module uses
//! to index feature tables, Q tables and visit counts.

mod layout;
mod oracle;

pub use layout::{parse_layout, CANONICAL_LAYOUT};
pub use oracle::{bfs_distance, greedy_path, task_value_iteration, GreedyPath};

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of actions. The ordering `Up, Down, Left, Right` is the global
/// tie-breaking order everywhere in the crate.
pub const NUM_ACTIONS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Up = 0,
    Down = 1,
    Left = 2,
    Right = 3,
}

impl Action {
    pub const ALL: [Action; NUM_ACTIONS] = [Action::Up, Action::Down, Action::Left, Action::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Action> {
        Self::ALL.get(index).copied()
    }

    pub fn inverse(self) -> Action {
        match self {
            Action::Up => Action::Down,
            Action::Down => Action::Up,
            Action::Left => Action::Right,
            Action::Right => Action::Left,
        }
    }

    /// `(d_row, d_col)` of a successful move.
    pub fn delta(self) -> (isize, isize) {
        match self {
            Action::Up => (-1, 0),
            Action::Down => (1, 0),
            Action::Left => (0, -1),
            Action::Right => (0, 1),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Up => "Up",
            Action::Down => "Down",
            Action::Left => "Left",
            Action::Right => "Right",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Action {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "up" | "u" | "w" => Ok(Action::Up),
            "down" | "d" | "s" => Ok(Action::Down),
            "left" | "l" | "a" => Ok(Action::Left),
            "right" | "r" => Ok(Action::Right),
            _ => Err(Error::UnknownAction(s.to_string())),
        }
    }
}

/// A grid position. Rendered 1-based as `X{row}Y{col}` in heat maps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub fn new(row: usize, col: usize) -> Self {
        Cell { row, col }
    }

    pub fn is_adjacent(self, other: Cell) -> bool {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col) == 1
    }

    /// Heat-map label, 1-based: row 4 col 0 is `X5Y1`.
    pub fn label(self) -> String {
        format!("X{}Y{}", self.row + 1, self.col + 1)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.row, self.col)
    }
}

/// Dense index of an open cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateId(pub usize);

impl StateId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Generic one-step dynamics, used by the value-iteration routines so they do
/// not depend on the transition being deterministic.
pub trait Dynamics {
    fn num_states(&self) -> usize;

    /// Absorbing state: the episode ends on entry and nothing accrues afterwards.
    fn is_terminal(&self, s: StateId) -> bool;

    /// Calls `f(next, probability)` for each possible successor of `(s, a)`.
    fn for_each_outcome<F: FnMut(StateId, f64)>(&self, s: StateId, a: Action, f: F);
}

#[derive(Clone, Debug)]
pub struct GridWorld {
    width: usize,
    height: usize,
    blocked: Vec<bool>,
    walls: BTreeSet<(Cell, Cell)>,
    start: Cell,
    goal: Cell,
    cells: Vec<Cell>,
    index_of: Vec<Option<StateId>>,
    next: Vec<[StateId; NUM_ACTIONS]>,
}

fn wall_key(a: Cell, b: Cell) -> (Cell, Cell) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl GridWorld {
    /// Builds and validates a grid. `blocked` is row-major, `width * height` long.
    pub fn new(
        width: usize,
        height: usize,
        blocked: Vec<bool>,
        walls: impl IntoIterator<Item = (Cell, Cell)>,
        start: Cell,
        goal: Cell,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidLayout("grid must be at least 1x1".into()));
        }
        if blocked.len() != width * height {
            return Err(Error::InvalidLayout(format!(
                "expected {} cells, got {}",
                width * height,
                blocked.len()
            )));
        }
        let in_bounds = |c: Cell| c.row < height && c.col < width;
        for (name, c) in [("start", start), ("goal", goal)] {
            if !in_bounds(c) || blocked[c.row * width + c.col] {
                return Err(Error::InvalidLayout(format!("{name} cell {c} is not open")));
            }
        }
        if start == goal {
            return Err(Error::InvalidLayout("start and goal coincide".into()));
        }

        let mut wall_set = BTreeSet::new();
        for (a, b) in walls {
            if !in_bounds(a) || !in_bounds(b) {
                return Err(Error::InvalidLayout(format!("wall {a} {b} leaves the grid")));
            }
            if !a.is_adjacent(b) {
                return Err(Error::InvalidLayout(format!("wall {a} {b} joins non-adjacent cells")));
            }
            wall_set.insert(wall_key(a, b));
        }

        let mut cells = Vec::new();
        let mut index_of = vec![None; width * height];
        for row in 0..height {
            for col in 0..width {
                if !blocked[row * width + col] {
                    index_of[row * width + col] = Some(StateId(cells.len()));
                    cells.push(Cell::new(row, col));
                }
            }
        }

        let mut grid = GridWorld {
            width,
            height,
            blocked,
            walls: wall_set,
            start,
            goal,
            cells,
            index_of,
            next: Vec::new(),
        };
        grid.next = (0..grid.cells.len())
            .map(|i| {
                let from = grid.cells[i];
                Action::ALL.map(|a| {
                    grid.move_cell(from, a)
                        .and_then(|c| grid.state_of(c))
                        .unwrap_or(StateId(i))
                })
            })
            .collect();

        if bfs_distance(&grid, grid.start_state(), grid.goal_state())?.is_none() {
            return Err(Error::InvalidLayout("goal is unreachable from start".into()));
        }
        Ok(grid)
    }

    /// The shipped 6x5 layout, checked against its defining properties.
    pub fn canonical() -> Self {
        let grid = parse_layout(CANONICAL_LAYOUT).expect("canonical layout parses");
        grid.check_canonical().expect("canonical layout invariants");
        grid
    }

    /// 30 open cells, start next to goal across a wall, 19-step optimum.
    pub fn check_canonical(&self) -> Result<()> {
        if self.num_states() != 30 {
            return Err(Error::InvalidLayout(format!("{} open cells, expected 30", self.num_states())));
        }
        if !self.start.is_adjacent(self.goal) || !self.has_wall(self.start, self.goal) {
            return Err(Error::InvalidLayout("start and goal must be adjacent across a wall".into()));
        }
        let d = bfs_distance(self, self.start_state(), self.goal_state())?;
        if d != Some(19) {
            return Err(Error::InvalidLayout(format!("BFS start->goal is {d:?}, expected 19")));
        }
        Ok(())
    }

    fn move_cell(&self, from: Cell, a: Action) -> Option<Cell> {
        let (dr, dc) = a.delta();
        let row = from.row.checked_add_signed(dr)?;
        let col = from.col.checked_add_signed(dc)?;
        let to = Cell::new(row, col);
        if row >= self.height || col >= self.width || self.is_blocked(to) || self.has_wall(from, to) {
            return None;
        }
        Some(to)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_states(&self) -> usize {
        self.cells.len()
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> + '_ {
        (0..self.cells.len()).map(StateId)
    }

    pub fn start(&self) -> Cell {
        self.start
    }

    pub fn goal(&self) -> Cell {
        self.goal
    }

    pub fn start_state(&self) -> StateId {
        self.index_of[self.start.row * self.width + self.start.col].expect("start is open")
    }

    pub fn goal_state(&self) -> StateId {
        self.index_of[self.goal.row * self.width + self.goal.col].expect("goal is open")
    }

    pub fn is_blocked(&self, c: Cell) -> bool {
        self.blocked[c.row * self.width + c.col]
    }

    pub fn has_wall(&self, a: Cell, b: Cell) -> bool {
        self.walls.contains(&wall_key(a, b))
    }

    pub fn walls(&self) -> impl Iterator<Item = (Cell, Cell)> + '_ {
        self.walls.iter().copied()
    }

    pub fn state_of(&self, c: Cell) -> Option<StateId> {
        if c.row >= self.height || c.col >= self.width {
            return None;
        }
        self.index_of[c.row * self.width + c.col]
    }

    pub fn cell(&self, s: StateId) -> Result<Cell> {
        self.cells.get(s.0).copied().ok_or(Error::InvalidState(s.0))
    }

    /// Cell of a state known to belong to this grid.
    pub fn cell_of(&self, s: StateId) -> Cell {
        self.cells[s.0]
    }

    /// Deterministic move. Walls, edges and blocked cells leave the agent in place.
    pub fn transition(&self, s: StateId, a: Action) -> Result<StateId> {
        self.next
            .get(s.0)
            .map(|row| row[a.index()])
            .ok_or(Error::InvalidState(s.0))
    }

    /// Infallible [`transition`](Self::transition) for ids produced by this grid.
    #[inline]
    pub fn successor(&self, s: StateId, a: Action) -> StateId {
        self.next[s.0][a.index()]
    }

    pub fn is_goal(&self, s: StateId) -> bool {
        s == self.goal_state()
    }

    /// Renders the grid back into layout-file form.
    pub fn to_layout_string(&self) -> String {
        let mut out = format!("{} {}\n", self.width, self.height);
        for row in 0..self.height {
            for col in 0..self.width {
                let c = Cell::new(row, col);
                out.push(if c == self.start {
                    'S'
                } else if c == self.goal {
                    'G'
                } else if self.is_blocked(c) {
                    '#'
                } else {
                    '.'
                });
            }
            out.push('\n');
        }
        for (a, b) in &self.walls {
            out.push_str(&format!("wall {a} {b}\n"));
        }
        out
    }
}

impl Dynamics for GridWorld {
    fn num_states(&self) -> usize {
        self.cells.len()
    }

    fn is_terminal(&self, s: StateId) -> bool {
        self.is_goal(s)
    }

    fn for_each_outcome<F: FnMut(StateId, f64)>(&self, s: StateId, a: Action, mut f: F) {
        f(self.successor(s, a), 1.0);
    }
}

/// Action values indexed by `[state][action]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    values: Vec<[f64; NUM_ACTIONS]>,
}

impl QTable {
    pub fn zeros(num_states: usize) -> Self {
        QTable { values: vec![[0.0; NUM_ACTIONS]; num_states] }
    }

    pub fn from_rows(values: Vec<[f64; NUM_ACTIONS]>) -> Self {
        QTable { values }
    }

    pub fn num_states(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, s: StateId, a: Action) -> f64 {
        self.values[s.0][a.index()]
    }

    pub fn set(&mut self, s: StateId, a: Action, v: f64) {
        self.values[s.0][a.index()] = v;
    }

    pub fn row(&self, s: StateId) -> &[f64; NUM_ACTIONS] {
        &self.values[s.0]
    }

    pub fn set_row(&mut self, s: StateId, row: [f64; NUM_ACTIONS]) {
        self.values[s.0] = row;
    }

    pub fn value(&self, s: StateId) -> f64 {
        self.values[s.0].iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Argmax with ties going to the lowest action index.
    pub fn greedy(&self, s: StateId) -> Action {
        argmax_action(&self.values[s.0])
    }

    /// Every action whose value is within `tol` of the best.
    pub fn greedy_set(&self, s: StateId, tol: f64) -> Vec<Action> {
        let best = self.value(s);
        Action::ALL
            .into_iter()
            .filter(|a| self.get(s, *a) >= best - tol)
            .collect()
    }

    pub fn rows(&self) -> &[[f64; NUM_ACTIONS]] {
        &self.values
    }

    pub fn max_abs_diff(&self, other: &QTable) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

/// Index of the largest entry; the first one wins ties.
pub fn argmax_action(values: &[f64; NUM_ACTIONS]) -> Action {
    let mut best = 0;
    for i in 1..NUM_ACTIONS {
        if values[i] > values[best] {
            best = i;
        }
    }
    Action::ALL[best]
}
