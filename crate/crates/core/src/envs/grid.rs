//! Shared grid state, MiniGrid-style movement, egocentric observation, and
//! ASCII rendering for the 2-D environments (and the 1-D coin line, which is
//! a 1-row grid without facing).

use super::{
    Action, EnvError, CHANNELS, CH_COIN, CH_DOOR_LOCKED, CH_DOOR_OPEN, CH_EMPTY, CH_KEY,
    CH_OTHER_AGENT, CH_SELF, CH_WALL,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Facing of an agent on the grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    North,
    East,
    South,
    West,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::North,
        Direction::East,
        Direction::South,
        Direction::West,
    ];

    /// Row/column delta of one forward step.
    pub fn delta(self) -> (isize, isize) {
        match self {
            Direction::North => (-1, 0),
            Direction::East => (0, 1),
            Direction::South => (1, 0),
            Direction::West => (0, -1),
        }
    }

    pub fn turn_left(self) -> Direction {
        match self {
            Direction::North => Direction::West,
            Direction::West => Direction::South,
            Direction::South => Direction::East,
            Direction::East => Direction::North,
        }
    }

    pub fn turn_right(self) -> Direction {
        match self {
            Direction::North => Direction::East,
            Direction::East => Direction::South,
            Direction::South => Direction::West,
            Direction::West => Direction::North,
        }
    }

    pub fn glyph(self) -> char {
        match self {
            Direction::North => '^',
            Direction::East => '>',
            Direction::South => 'v',
            Direction::West => '<',
        }
    }
}

/// Static cell terrain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Terrain {
    Floor,
    Wall,
    /// Permanently open gap in a room wall.
    Doorway,
}

/// Where the key currently is (DoorKey only).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KeyLocation {
    OnGrid(usize, usize),
    Held(usize),
}

/// Full mutable state of one episode.
#[derive(Clone, Debug)]
pub struct GridState {
    pub width: usize,
    pub height: usize,
    pub terrain: Vec<Terrain>,
    pub agent_pos: Vec<(usize, usize)>,
    pub agent_dir: Vec<Direction>,
    pub coin_pos: (usize, usize),
    /// DoorKey only: the key and who holds it.
    pub key: Option<KeyLocation>,
    /// DoorKey only: door cell and lock flag.
    pub door: Option<((usize, usize), bool)>,
    /// Team reward accumulated but not yet emitted.
    pub accumulated_reward: f64,
    /// Per-agent attributed share of the accumulated reward.
    pub attributed: Vec<f64>,
    /// Index `j` counts episodes' `j`-agent simultaneous collections.
    pub collect_counts: Vec<u64>,
    pub step_count: usize,
    pub horizon: usize,
    pub done: bool,
    /// Last action index per agent, `None` right after reset.
    pub last_action: Vec<Option<usize>>,
}

impl GridState {
    pub fn new(
        width: usize,
        height: usize,
        terrain: Vec<Terrain>,
        n_agents: usize,
        horizon: usize,
    ) -> Self {
        assert_eq!(terrain.len(), width * height);
        GridState {
            width,
            height,
            terrain,
            agent_pos: vec![(0, 0); n_agents],
            agent_dir: vec![Direction::East; n_agents],
            coin_pos: (0, 0),
            key: None,
            door: None,
            accumulated_reward: 0.0,
            attributed: vec![0.0; n_agents],
            collect_counts: vec![0; n_agents + 1],
            step_count: 0,
            horizon,
            done: false,
            last_action: vec![None; n_agents],
        }
    }

    pub fn n_agents(&self) -> usize {
        self.agent_pos.len()
    }

    pub fn terrain_at(&self, r: usize, c: usize) -> Terrain {
        self.terrain[r * self.width + c]
    }

    fn in_bounds(&self, r: isize, c: isize) -> bool {
        r >= 0 && c >= 0 && (r as usize) < self.height && (c as usize) < self.width
    }

    fn key_on_grid_at(&self, pos: (usize, usize)) -> bool {
        matches!(self.key, Some(KeyLocation::OnGrid(r, c)) if (r, c) == pos)
    }

    pub fn key_held(&self) -> bool {
        matches!(self.key, Some(KeyLocation::Held(_)))
    }

    fn door_locked_at(&self, pos: (usize, usize)) -> bool {
        matches!(self.door, Some((p, true)) if p == pos)
    }

    /// Whether an agent may stand on the cell, given pre-step key possession.
    /// Locked doors open to movement whenever any agent holds the key.
    pub fn walkable(&self, r: isize, c: isize, key_held: bool) -> bool {
        if !self.in_bounds(r, c) {
            return false;
        }
        let pos = (r as usize, c as usize);
        if self.terrain_at(pos.0, pos.1) == Terrain::Wall {
            return false;
        }
        if self.key_on_grid_at(pos) {
            return false;
        }
        if self.door_locked_at(pos) && !key_held {
            return false;
        }
        true
    }

    /// Cells a coin or agent may occupy: floor, unlocked-door-free, key-free.
    pub fn spawn_cells(&self, exclude: &[(usize, usize)]) -> Vec<(usize, usize)> {
        let mut cells = Vec::new();
        for r in 0..self.height {
            for c in 0..self.width {
                let pos = (r, c);
                if self.terrain_at(r, c) != Terrain::Floor {
                    continue;
                }
                if self.key_on_grid_at(pos) {
                    continue;
                }
                if let Some((dp, _)) = self.door {
                    if dp == pos {
                        continue;
                    }
                }
                if exclude.contains(&pos) {
                    continue;
                }
                cells.push(pos);
            }
        }
        cells
    }

    /// Applies one simultaneous joint action (grid movement semantics).
    ///
    /// `p` lists the reward increments: `p[j-1]` for `j` simultaneous
    /// collectors. Returns the emitted reward and done flag.
    pub fn grid_step_actions(
        &mut self,
        actions: &[Action],
        p: &[f64],
        rng: &mut ChaCha8Rng,
    ) -> Result<(f64, bool), EnvError> {
        if self.done {
            return Err(EnvError::EpisodeDone);
        }
        let key_held_before = self.key_held();

        // turns and pickups read only pre-step state; moves don't collide
        let mut pickup_requests: Vec<usize> = Vec::new();
        for (i, &a) in actions.iter().enumerate() {
            match a {
                Action::TurnLeft => self.agent_dir[i] = self.agent_dir[i].turn_left(),
                Action::TurnRight => self.agent_dir[i] = self.agent_dir[i].turn_right(),
                Action::Forward => {
                    let (dr, dc) = self.agent_dir[i].delta();
                    let (r, c) = self.agent_pos[i];
                    let (nr, nc) = (r as isize + dr, c as isize + dc);
                    if self.walkable(nr, nc, key_held_before) {
                        let target = (nr as usize, nc as usize);
                        if self.door_locked_at(target) {
                            self.door = Some((target, false));
                        }
                        self.agent_pos[i] = target;
                    }
                }
                Action::Pickup => {
                    let (dr, dc) = self.agent_dir[i].delta();
                    let (r, c) = self.agent_pos[i];
                    let (fr, fc) = (r as isize + dr, c as isize + dc);
                    if self.in_bounds(fr, fc)
                        && self.key_on_grid_at((fr as usize, fc as usize))
                    {
                        pickup_requests.push(i);
                    }
                }
                Action::Left | Action::Right => {
                    return Err(EnvError::InvalidAction(format!(
                        "{a} not a grid action"
                    )))
                }
            }
            self.last_action[i] = Some(action_index_grid(a));
        }
        // lowest index wins a contested pickup
        if let Some(&winner) = pickup_requests.first() {
            self.key = Some(KeyLocation::Held(winner));
        }

        self.resolve_collection(p, rng);
        Ok(self.advance_clock())
    }

    /// Counts collectors on the coin cell, accumulates `p_j`, regenerates
    /// the coin at a different free cell not under any agent.
    pub fn resolve_collection(&mut self, p: &[f64], rng: &mut ChaCha8Rng) {
        let collectors: Vec<usize> = (0..self.n_agents())
            .filter(|&i| self.agent_pos[i] == self.coin_pos)
            .collect();
        let j = collectors.len();
        if j == 0 {
            return;
        }
        let reward = p.get(j - 1).copied().unwrap_or_else(|| *p.last().unwrap());
        self.accumulated_reward += reward;
        for &i in &collectors {
            self.attributed[i] += reward / j as f64;
        }
        self.collect_counts[j] += 1;

        let mut exclude = vec![self.coin_pos];
        exclude.extend_from_slice(&self.agent_pos);
        let cells = self.spawn_cells(&exclude);
        if !cells.is_empty() {
            self.coin_pos = cells[rng.gen_range(0..cells.len())];
        }
    }

    /// Increments the step counter and emits the delayed reward at horizon.
    pub fn advance_clock(&mut self) -> (f64, bool) {
        self.step_count += 1;
        if self.step_count >= self.horizon {
            self.done = true;
            (self.accumulated_reward, true)
        } else {
            (0.0, false)
        }
    }

    /// Egocentric `view x view` observation rotated so the agent faces the
    /// top of its window, one-hot over the cell channels, followed by the
    /// agent's last action one-hot.
    pub fn observe_grid(&self, agent: usize, view: usize, n_actions: usize) -> Vec<u8> {
        let half = (view / 2) as isize;
        let mut out = vec![0u8; view * view * CHANNELS + n_actions];
        let (ar, ac) = self.agent_pos[agent];
        let dir = self.agent_dir[agent];
        let (fr, fc) = dir.delta();
        let (rr, rc) = dir.turn_right().delta();
        for vr in 0..view {
            for vc in 0..view {
                let ahead = half - vr as isize;
                let right = vc as isize - half;
                let r = ar as isize + ahead * fr + right * rr;
                let c = ac as isize + ahead * fc + right * rc;
                let ch = self.cell_channel(r, c, agent);
                out[(vr * view + vc) * CHANNELS + ch] = 1;
            }
        }
        if let Some(a) = self.last_action[agent] {
            out[view * view * CHANNELS + a] = 1;
        }
        out
    }

    /// Length-`view` 1-D observation for the coin line (no facing).
    pub fn observe_line(&self, agent: usize, view: usize, n_actions: usize) -> Vec<u8> {
        let half = (view / 2) as isize;
        let mut out = vec![0u8; view * CHANNELS + n_actions];
        let (ar, ac) = self.agent_pos[agent];
        for v in 0..view {
            let c = ac as isize + (v as isize - half);
            let ch = self.cell_channel(ar as isize, c, agent);
            out[v * CHANNELS + ch] = 1;
        }
        if let Some(a) = self.last_action[agent] {
            out[view * CHANNELS + a] = 1;
        }
        out
    }

    /// One-hot channel of the cell as seen by `agent`; out-of-bounds reads
    /// as wall, occupants mask items.
    fn cell_channel(&self, r: isize, c: isize, agent: usize) -> usize {
        if !self.in_bounds(r, c) {
            return CH_WALL;
        }
        let pos = (r as usize, c as usize);
        if self.agent_pos[agent] == pos {
            return CH_SELF;
        }
        if self.agent_pos.iter().enumerate().any(|(i, &p)| i != agent && p == pos) {
            return CH_OTHER_AGENT;
        }
        if self.coin_pos == pos {
            return CH_COIN;
        }
        if self.key_on_grid_at(pos) {
            return CH_KEY;
        }
        if let Some((dp, locked)) = self.door {
            if dp == pos {
                return if locked { CH_DOOR_LOCKED } else { CH_DOOR_OPEN };
            }
        }
        match self.terrain_at(pos.0, pos.1) {
            Terrain::Wall => CH_WALL,
            Terrain::Doorway => CH_DOOR_OPEN,
            Terrain::Floor => CH_EMPTY,
        }
    }

    /// Flood fill over walkable cells from a start position. Locked doors
    /// block unless `key_held`.
    pub fn reachable_from(&self, start: (usize, usize), key_held: bool) -> Vec<bool> {
        let mut seen = vec![false; self.width * self.height];
        let mut queue = std::collections::VecDeque::new();
        seen[start.0 * self.width + start.1] = true;
        queue.push_back(start);
        while let Some((r, c)) = queue.pop_front() {
            for (dr, dc) in [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)] {
                let (nr, nc) = (r as isize + dr, c as isize + dc);
                if self.walkable(nr, nc, key_held) {
                    let idx = nr as usize * self.width + nc as usize;
                    if !seen[idx] {
                        seen[idx] = true;
                        queue.push_back((nr as usize, nc as usize));
                    }
                }
            }
        }
        seen
    }

    /// ASCII snapshot: `#` wall, `.` floor, `+` doorway, `D`/`d` locked/open
    /// door, `k` key, `o` coin, digits for agents (facing in the legend).
    pub fn render_ascii(&self) -> String {
        let mut lines = Vec::with_capacity(self.height + self.n_agents() + 1);
        for r in 0..self.height {
            let mut line = String::with_capacity(self.width);
            for c in 0..self.width {
                let pos = (r, c);
                let ch = if let Some(i) =
                    self.agent_pos.iter().position(|&p| p == pos)
                {
                    char::from_digit(i as u32 % 10, 10).unwrap()
                } else if self.coin_pos == pos {
                    'o'
                } else if self.key_on_grid_at(pos) {
                    'k'
                } else if let Some((dp, locked)) = self.door {
                    if dp == pos {
                        if locked {
                            'D'
                        } else {
                            'd'
                        }
                    } else {
                        terrain_glyph(self.terrain_at(r, c))
                    }
                } else {
                    terrain_glyph(self.terrain_at(r, c))
                };
                line.push(ch);
            }
            lines.push(line);
        }
        for i in 0..self.n_agents() {
            let held = matches!(self.key, Some(KeyLocation::Held(h)) if h == i);
            lines.push(format!(
                "agent {i} at ({}, {}) facing {}{}",
                self.agent_pos[i].0,
                self.agent_pos[i].1,
                self.agent_dir[i].glyph(),
                if held { ", holds key" } else { "" }
            ));
        }
        lines.push(format!(
            "step {}/{}  accumulated reward {:.3}",
            self.step_count, self.horizon, self.accumulated_reward
        ));
        lines.join("\n")
    }
}

fn terrain_glyph(t: Terrain) -> char {
    match t {
        Terrain::Wall => '#',
        Terrain::Floor => '.',
        Terrain::Doorway => '+',
    }
}

/// Index of a grid action in the grid action set.
pub(crate) fn action_index_grid(a: Action) -> usize {
    match a {
        Action::TurnLeft => 0,
        Action::TurnRight => 1,
        Action::Forward => 2,
        Action::Pickup => 3,
        _ => unreachable!("not a grid action"),
    }
}
