//! Continuous 2-D navigation arena.
//!
//! The agent moves kinematically: each action displaces it by
//! `speed * step_duration` along one of nine directions. Obstacles are
//! axis-aligned rectangles with open interiors, so an agent may slide along a
//! wall but never enter it. A move that would cross a wall or the arena edge
//! stops at the contact point and is penalized.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Fe;

/// Rejections tried before checking whether the arena has any free space.
const QUICK_REJECTIONS: usize = 10_000;
const MAX_REJECTIONS: usize = 1_000_000;
/// Cells per side of the grid used to detect a fully blocked arena.
const FREE_SPACE_GRID: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn distance_sq(&self, other: &Position) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn distance(&self, other: &Position) -> f64 {
        self.distance_sq(other).sqrt()
    }
}

/// The nine movements available to the agent. `Stay` is index 0, so a
/// value function that ties everywhere (e.g. all-zero weights) keeps the
/// agent in place.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum Action {
    Stay = 0,
    Forward = 1,
    Backward = 2,
    Left = 3,
    Right = 4,
    ForwardLeft = 5,
    ForwardRight = 6,
    BackwardLeft = 7,
    BackwardRight = 8,
}

impl Action {
    pub const COUNT: usize = 9;

    pub const ALL: [Action; Action::COUNT] = [
        Action::Stay,
        Action::Forward,
        Action::Backward,
        Action::Left,
        Action::Right,
        Action::ForwardLeft,
        Action::ForwardRight,
        Action::BackwardLeft,
        Action::BackwardRight,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Action> {
        Action::ALL.get(index).copied()
    }

    /// Unit direction vector; forward is +x and left is +y.
    pub fn direction(self) -> (f64, f64) {
        const D: f64 = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            Action::Stay => (0.0, 0.0),
            Action::Forward => (1.0, 0.0),
            Action::Backward => (-1.0, 0.0),
            Action::Left => (0.0, 1.0),
            Action::Right => (0.0, -1.0),
            Action::ForwardLeft => (D, D),
            Action::ForwardRight => (D, -D),
            Action::BackwardLeft => (-D, D),
            Action::BackwardRight => (-D, -D),
        }
    }
}

/// Axis-aligned rectangle. Its interior is open: points on the border are
/// not inside.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Rect {
    pub fn contains_strict(&self, p: &Position) -> bool {
        p.x > self.min_x && p.x < self.max_x && p.y > self.min_y && p.y < self.max_y
    }

    /// Parameter `t` in `[0, 1)` at which the segment `p + t*d` first enters
    /// the open interior, with the axis crossed (0 = x, 1 = y) and the face
    /// coordinate on that axis.
    fn entry(&self, p: &Position, d: (f64, f64)) -> Option<(f64, usize, f64)> {
        let slab = |pos: f64, dir: f64, lo: f64, hi: f64| -> Option<(f64, f64)> {
            if dir == 0.0 {
                if pos > lo && pos < hi {
                    Some((f64::NEG_INFINITY, f64::INFINITY))
                } else {
                    None
                }
            } else {
                let t1 = (lo - pos) / dir;
                let t2 = (hi - pos) / dir;
                Some((t1.min(t2), t1.max(t2)))
            }
        };
        let (lo_x, hi_x) = slab(p.x, d.0, self.min_x, self.max_x)?;
        let (lo_y, hi_y) = slab(p.y, d.1, self.min_y, self.max_y)?;
        let (t_enter, axis) = if lo_x >= lo_y { (lo_x, 0) } else { (lo_y, 1) };
        let t_exit = hi_x.min(hi_y);
        if t_enter < t_exit && t_exit > 0.0 && t_enter < 1.0 {
            let face = match axis {
                0 if d.0 > 0.0 => self.min_x,
                0 => self.max_x,
                _ if d.1 > 0.0 => self.min_y,
                _ => self.max_y,
            };
            Some((t_enter.max(0.0), axis, face))
        } else {
            None
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stimulus {
    pub center: Position,
    /// Spatial spread of the Gaussian activation, in length units.
    pub spread: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArenaSpec {
    pub width: f64,
    pub height: f64,
    #[serde(default)]
    pub obstacles: Vec<Rect>,
    #[serde(default)]
    pub stimuli: Vec<Stimulus>,
    /// Seconds between action decisions.
    pub step_duration: f64,
    /// Movement speed in length units per second.
    pub speed: f64,
}

impl ArenaSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.height > 0.0) {
            return Err(Error::config("arena width and height must be positive"));
        }
        if !(self.speed > 0.0) || !(self.step_duration > 0.0) {
            return Err(Error::config("speed and step_duration must be positive"));
        }
        for (i, r) in self.obstacles.iter().enumerate() {
            if !(r.min_x < r.max_x && r.min_y < r.max_y) {
                return Err(Error::config(format!("obstacle {i} is degenerate")));
            }
            if r.min_x < 0.0 || r.min_y < 0.0 || r.max_x > self.width || r.max_y > self.height {
                return Err(Error::config(format!("obstacle {i} lies outside the arena")));
            }
        }
        for (i, s) in self.stimuli.iter().enumerate() {
            if !self.in_bounds(&s.center) {
                return Err(Error::config(format!("stimulus {i} lies outside the arena")));
            }
            if !(s.spread > 0.0) {
                return Err(Error::config(format!("stimulus {i} has non-positive spread")));
            }
        }
        Ok(())
    }

    pub fn in_bounds(&self, p: &Position) -> bool {
        p.x >= 0.0 && p.x <= self.width && p.y >= 0.0 && p.y <= self.height
    }

    pub fn in_obstacle(&self, p: &Position) -> bool {
        self.obstacles.iter().any(|r| r.contains_strict(p))
    }

    /// In bounds and outside every obstacle interior.
    pub fn is_valid(&self, p: &Position) -> bool {
        p.x.is_finite() && p.y.is_finite() && self.in_bounds(p) && !self.in_obstacle(p)
    }

    /// Distance covered by one action.
    pub fn step_length(&self) -> f64 {
        self.speed * self.step_duration
    }

    pub fn stimulus_count(&self) -> usize {
        self.stimuli.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    #[serde(default)]
    pub name: String,
    pub goal_center: Position,
    pub goal_radius: f64,
    pub goal_reward: f64,
    pub obstacle_penalty: f64,
    pub living_penalty: f64,
    /// Stimulus activations that identify the task.
    #[serde(default)]
    pub fe_signature: Vec<f64>,
}

impl TaskSpec {
    pub fn validate(&self, arena: &ArenaSpec) -> Result<()> {
        if !(self.goal_radius > 0.0) {
            return Err(Error::config(format!("task {:?}: goal_radius must be positive", self.name)));
        }
        if !(self.goal_reward > 0.0 && self.obstacle_penalty < 0.0) {
            return Err(Error::config(format!(
                "task {:?}: need goal_reward > 0 > obstacle_penalty",
                self.name
            )));
        }
        if !(self.living_penalty < 0.0) {
            return Err(Error::config(format!("task {:?}: living_penalty must be negative", self.name)));
        }
        if !arena.in_bounds(&self.goal_center) {
            return Err(Error::config(format!("task {:?}: goal outside arena", self.name)));
        }
        Ok(())
    }

    pub fn in_goal(&self, p: &Position) -> bool {
        p.distance_sq(&self.goal_center) <= self.goal_radius * self.goal_radius
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub next: Position,
    pub reward: f64,
    pub terminal: bool,
    /// The move was stopped by a wall or obstacle.
    pub bumped: bool,
}

/// Advance the agent by one action.
pub fn step(p: Position, a: Action, task: &TaskSpec, arena: &ArenaSpec) -> Result<Transition> {
    if !arena.is_valid(&p) {
        return Err(Error::contract(format!("invalid start position ({}, {})", p.x, p.y)));
    }
    let (ux, uy) = a.direction();
    let len = arena.step_length();
    let d = (ux * len, uy * len);

    // Earliest contact with the arena edge or an obstacle: (t, axis, face).
    let mut contact: Option<(f64, usize, f64)> = None;
    let mut consider = |c: (f64, usize, f64)| {
        if contact.is_none_or(|best| c.0 < best.0) {
            contact = Some(c);
        }
    };
    if d.0 > 0.0 && p.x + d.0 > arena.width {
        consider(((arena.width - p.x) / d.0, 0, arena.width));
    } else if d.0 < 0.0 && p.x + d.0 < 0.0 {
        consider((p.x / -d.0, 0, 0.0));
    }
    if d.1 > 0.0 && p.y + d.1 > arena.height {
        consider(((arena.height - p.y) / d.1, 1, arena.height));
    } else if d.1 < 0.0 && p.y + d.1 < 0.0 {
        consider((p.y / -d.1, 1, 0.0));
    }
    for r in &arena.obstacles {
        if let Some(c) = r.entry(&p, d) {
            consider(c);
        }
    }

    let (next, bumped) = match contact {
        None => (Position::new(p.x + d.0, p.y + d.1), false),
        Some((t, axis, face)) => {
            let mut q = Position::new(p.x + t * d.0, p.y + t * d.1);
            if axis == 0 {
                q.x = face;
            } else {
                q.y = face;
            }
            q.x = q.x.clamp(0.0, arena.width);
            q.y = q.y.clamp(0.0, arena.height);
            (q, true)
        }
    };
    debug_assert!(arena.is_valid(&next), "step produced invalid position {next:?}");

    let in_goal = task.in_goal(&next);
    let reward = if bumped {
        task.obstacle_penalty
    } else if in_goal {
        task.goal_reward
    } else {
        task.living_penalty
    };
    Ok(Transition {
        next,
        reward,
        terminal: in_goal,
        bumped,
    })
}

fn is_start_candidate(p: &Position, arena: &ArenaSpec, task: &TaskSpec) -> bool {
    !arena.in_obstacle(p) && !task.in_goal(p)
}

/// Uniform draw over positions outside obstacles and outside the task's goal.
pub fn sample_start<R: Rng + ?Sized>(arena: &ArenaSpec, task: &TaskSpec, rng: &mut R) -> Result<Position> {
    let draw = |rng: &mut R| Position::new(rng.random::<f64>() * arena.width, rng.random::<f64>() * arena.height);
    for _ in 0..QUICK_REJECTIONS {
        let p = draw(rng);
        if is_start_candidate(&p, arena, task) {
            return Ok(p);
        }
    }
    if !has_free_space(arena, task) {
        return Err(Error::config("arena has no free space outside obstacles and the goal"));
    }
    for _ in QUICK_REJECTIONS..MAX_REJECTIONS {
        let p = draw(rng);
        if is_start_candidate(&p, arena, task) {
            return Ok(p);
        }
    }
    Err(Error::config("free space too small to sample a start position"))
}

fn has_free_space(arena: &ArenaSpec, task: &TaskSpec) -> bool {
    let n = FREE_SPACE_GRID;
    (0..n).any(|i| {
        (0..n).any(|j| {
            let p = Position::new(
                (i as f64 + 0.5) / n as f64 * arena.width,
                (j as f64 + 0.5) / n as f64 * arena.height,
            );
            is_start_candidate(&p, arena, task)
        })
    })
}

/// Gaussian activation of every stimulus at `p`.
pub fn stimulus_vector(p: &Position, arena: &ArenaSpec) -> Fe {
    Fe(arena
        .stimuli
        .iter()
        .map(|s| (-p.distance_sq(&s.center) / (2.0 * s.spread * s.spread)).exp())
        .collect())
}
