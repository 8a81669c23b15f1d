use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cell {
    Empty,
    Wall,
    LockedDoor,
    OpenDoor,
    Key,
    Goal,
}

impl Cell {
    const KINDS: usize = 6;

    fn channel(self) -> usize {
        match self {
            Cell::Empty => 0,
            Cell::Wall => 1,
            Cell::LockedDoor => 2,
            Cell::OpenDoor => 3,
            Cell::Key => 4,
            Cell::Goal => 5,
        }
    }

    fn glyph(self) -> char {
        match self {
            Cell::Empty => '.',
            Cell::Wall => '#',
            Cell::LockedDoor => 'D',
            Cell::OpenDoor => '/',
            Cell::Key => 'K',
            Cell::Goal => 'G',
        }
    }

    fn passable(self) -> bool {
        matches!(self, Cell::Empty | Cell::OpenDoor | Cell::Goal)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Action {
    TurnLeft = 0,
    TurnRight = 1,
    Forward = 2,
    Pickup = 3,
    Toggle = 4,
}

pub const N_ACTIONS: usize = 5;

impl Action {
    pub fn from_index(a: i64) -> Result<Self> {
        Ok(match a {
            0 => Action::TurnLeft,
            1 => Action::TurnRight,
            2 => Action::Forward,
            3 => Action::Pickup,
            4 => Action::Toggle,
            _ => return Err(Error::Argument(format!("action {a} outside 0..{N_ACTIONS}"))),
        })
    }
}

/// Heading: 0 east, 1 south, 2 west, 3 north.
const DIRS: [(i64, i64); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Variant {
    Empty(usize),
    DoorKey(usize),
}

impl Variant {
    pub fn size(self) -> usize {
        match self {
            Variant::Empty(n) | Variant::DoorKey(n) => n,
        }
    }

    pub fn obs_dim(self) -> usize {
        let n = self.size();
        n * n * (Cell::KINDS + 1) + 4 + 1
    }

    pub fn max_steps(self) -> usize {
        4 * self.size() * self.size()
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::Empty(n) => write!(f, "empty_{n}"),
            Variant::DoorKey(n) => write!(f, "doorkey_{n}"),
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::config("env.variant", format!("'{s}' is not empty_<n> or doorkey_<n>"));
        let (name, n) = s.rsplit_once('_').ok_or_else(bad)?;
        let n: usize = n.parse().map_err(|_| bad())?;
        let v = match name {
            "empty" if n >= 4 => Variant::Empty(n),
            "doorkey" if n >= 5 => Variant::DoorKey(n),
            "empty" | "doorkey" => {
                return Err(Error::config("env.variant", format!("grid size {n} too small for {name}")))
            }
            _ => return Err(bad()),
        };
        Ok(v)
    }
}

impl TryFrom<String> for Variant {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Variant> for String {
    fn from(v: Variant) -> String {
        v.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub reward: f64,
    pub done: bool,
}

/// Fully observable gridworld with border walls.
///
/// `empty_n` always starts at (1, 1) facing east with the goal at the opposite
/// corner. `doorkey_n` splits the grid with a wall column holding a locked
/// door; the key and the agent are placed left of it and the goal sits in the
/// bottom-right corner.
#[derive(Debug, Clone, PartialEq)]
pub struct GridWorld {
    variant: Variant,
    cells: Vec<Cell>,
    pos: (usize, usize),
    heading: usize,
    carrying: bool,
    steps: usize,
    done: bool,
}

impl GridWorld {
    pub fn new(variant: Variant, seed: u64) -> Self {
        let mut env = Self {
            variant,
            cells: Vec::new(),
            pos: (1, 1),
            heading: 0,
            carrying: false,
            steps: 0,
            done: false,
        };
        env.reset(seed);
        env
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn size(&self) -> usize {
        self.variant.size()
    }

    pub fn max_steps(&self) -> usize {
        self.variant.max_steps()
    }

    pub fn position(&self) -> (usize, usize) {
        self.pos
    }

    pub fn heading(&self) -> usize {
        self.heading
    }

    pub fn carrying_key(&self) -> bool {
        self.carrying
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn cell(&self, x: usize, y: usize) -> Cell {
        self.cells[y * self.size() + x]
    }

    fn set(&mut self, x: usize, y: usize, c: Cell) {
        let n = self.size();
        self.cells[y * n + x] = c;
    }

    /// Lay out a fresh level; the layout is a pure function of `seed`.
    pub fn reset(&mut self, seed: u64) -> Vec<f64> {
        let n = self.size();
        self.cells = vec![Cell::Empty; n * n];
        for i in 0..n {
            self.set(i, 0, Cell::Wall);
            self.set(i, n - 1, Cell::Wall);
            self.set(0, i, Cell::Wall);
            self.set(n - 1, i, Cell::Wall);
        }
        self.set(n - 2, n - 2, Cell::Goal);
        self.carrying = false;
        self.steps = 0;
        self.done = false;
        match self.variant {
            Variant::Empty(_) => {
                self.pos = (1, 1);
                self.heading = 0;
            }
            Variant::DoorKey(_) => {
                let mut rng = Rng::new(seed, 0);
                let split = rng.range(2, n - 2);
                for y in 1..n - 1 {
                    self.set(split, y, Cell::Wall);
                }
                let door_y = rng.range(1, n - 1);
                self.set(split, door_y, Cell::LockedDoor);
                let left: Vec<(usize, usize)> = (1..n - 1)
                    .flat_map(|y| (1..split).map(move |x| (x, y)))
                    .collect();
                let key = left[rng.below(left.len())];
                self.set(key.0, key.1, Cell::Key);
                let free: Vec<(usize, usize)> = left.iter().copied().filter(|&p| p != key).collect();
                self.pos = free[rng.below(free.len())];
                self.heading = rng.below(4);
            }
        }
        self.observation()
    }

    fn ahead(&self) -> (usize, usize) {
        let (dx, dy) = DIRS[self.heading];
        (
            (self.pos.0 as i64 + dx) as usize,
            (self.pos.1 as i64 + dy) as usize,
        )
    }

    /// Apply an action. Stepping a finished episode is a no-op returning
    /// `done` again.
    pub fn step(&mut self, action: Action) -> Step {
        if self.done {
            return Step {
                reward: 0.0,
                done: true,
            };
        }
        self.steps += 1;
        let mut reward = 0.0;
        let (fx, fy) = self.ahead();
        match action {
            Action::TurnLeft => self.heading = (self.heading + 3) % 4,
            Action::TurnRight => self.heading = (self.heading + 1) % 4,
            Action::Forward => {
                let c = self.cell(fx, fy);
                if c.passable() {
                    self.pos = (fx, fy);
                }
                if c == Cell::Goal {
                    reward = 1.0 - 0.9 * self.steps as f64 / self.max_steps() as f64;
                    self.done = true;
                }
            }
            Action::Pickup => {
                if self.cell(fx, fy) == Cell::Key && !self.carrying {
                    self.carrying = true;
                    self.set(fx, fy, Cell::Empty);
                }
            }
            Action::Toggle => {
                if self.cell(fx, fy) == Cell::LockedDoor && self.carrying {
                    self.set(fx, fy, Cell::OpenDoor);
                }
            }
        }
        if self.steps >= self.max_steps() {
            self.done = true;
        }
        Step {
            reward,
            done: self.done,
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.variant.obs_dim()
    }

    /// Per-cell one-hot cell type plus an agent channel, then a heading
    /// one-hot and the carrying bit.
    pub fn observation(&self) -> Vec<f64> {
        let mut obs = vec![0.0; self.obs_dim()];
        self.write_observation(&mut obs);
        obs
    }

    pub fn write_observation(&self, obs: &mut [f64]) {
        let n = self.size();
        let per = Cell::KINDS + 1;
        obs.fill(0.0);
        for (i, c) in self.cells.iter().enumerate() {
            obs[i * per + c.channel()] = 1.0;
        }
        obs[(self.pos.1 * n + self.pos.0) * per + Cell::KINDS] = 1.0;
        obs[n * n * per + self.heading] = 1.0;
        if self.carrying {
            obs[n * n * per + 4] = 1.0;
        }
    }

    /// One character per cell, rows top to bottom; the agent is drawn as
    /// `>v<^` by heading.
    pub fn render(&self) -> String {
        let n = self.size();
        let mut s = String::with_capacity(n * (n + 1));
        for y in 0..n {
            for x in 0..n {
                if (x, y) == self.pos {
                    s.push(['>', 'v', '<', '^'][self.heading]);
                } else {
                    s.push(self.cell(x, y).glyph());
                }
            }
            s.push('\n');
        }
        s
    }

    /// Breadth-first check that the key (if any) is reachable from the agent
    /// and the goal is reachable once the door is open.
    pub fn is_solvable(&self) -> bool {
        let n = self.size();
        let reach = |from: (usize, usize), door_open: bool| -> Vec<bool> {
            let mut seen = vec![false; n * n];
            let mut queue = VecDeque::from([from]);
            seen[from.1 * n + from.0] = true;
            while let Some((x, y)) = queue.pop_front() {
                for (dx, dy) in DIRS {
                    let (nx, ny) = ((x as i64 + dx) as usize, (y as i64 + dy) as usize);
                    let c = self.cell(nx, ny);
                    let ok = c.passable() || (door_open && c == Cell::LockedDoor);
                    if ok && !seen[ny * n + nx] {
                        seen[ny * n + nx] = true;
                        queue.push_back((nx, ny));
                    }
                }
            }
            seen
        };
        let goal = (n - 2) * n + (n - 2);
        let key = self.cells.iter().position(|&c| c == Cell::Key);
        match key {
            None => reach(self.pos, self.carrying)[goal],
            Some(k) => {
                let (kx, ky) = (k % n, k / n);
                let near = reach(self.pos, false);
                let key_adjacent = DIRS.iter().any(|(dx, dy)| {
                    let (x, y) = ((kx as i64 + dx) as usize, (ky as i64 + dy) as usize);
                    near[y * n + x]
                });
                key_adjacent && reach(self.pos, true)[goal]
            }
        }
    }
}
