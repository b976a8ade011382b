//! DoorKey: an 8x8 grid split by a center divider with one locked door.
//!
//! The key spawns on the agents' side, the coin on the other. The door
//! opens permanently when an agent walks into it while the team holds the
//! key; until then the coin side is unreachable.

use super::grid::{Direction, GridState, KeyLocation, Terrain};
use super::{
    validate_actions, Action, AgentObservation, EnvError, EnvSpec, Environment, StepResult,
    CHANNELS, DEFAULT_HORIZON,
};
use crate::rng::{component_rng, Stream};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const GRID_SIZE: usize = 8;
pub const VIEW: usize = 5;
/// Divider column, down the center of the grid.
pub const DIVIDER_COL: usize = GRID_SIZE / 2;

pub struct DoorKey {
    spec: EnvSpec,
    state: GridState,
    p: Vec<f64>,
    rng: ChaCha8Rng,
}

impl DoorKey {
    pub fn new(
        n_agents: usize,
        p: Vec<f64>,
        gamma: f64,
        horizon: usize,
        seed: u64,
    ) -> Self {
        let spec = EnvSpec {
            n_agents,
            action_set: vec![
                Action::TurnLeft,
                Action::TurnRight,
                Action::Forward,
                Action::Pickup,
            ],
            obs_len: VIEW * VIEW * CHANNELS + 4,
            gamma,
            horizon,
        };
        let mut env = DoorKey {
            spec,
            state: GridState::new(
                GRID_SIZE,
                GRID_SIZE,
                vec![Terrain::Floor; GRID_SIZE * GRID_SIZE],
                n_agents,
                horizon,
            ),
            p,
            rng: component_rng(seed, Stream::Env),
        };
        env.generate();
        env
    }

    pub fn default_desk(seed: u64) -> Self {
        DoorKey::new(2, vec![1.0, 1.0], 0.99, DEFAULT_HORIZON, seed)
    }

    fn generate(&mut self) {
        let mut terrain = vec![Terrain::Floor; GRID_SIZE * GRID_SIZE];
        for r in 0..GRID_SIZE {
            for c in 0..GRID_SIZE {
                if r == 0 || c == 0 || r == GRID_SIZE - 1 || c == GRID_SIZE - 1 {
                    terrain[r * GRID_SIZE + c] = Terrain::Wall;
                }
            }
        }
        for r in 1..GRID_SIZE - 1 {
            terrain[r * GRID_SIZE + DIVIDER_COL] = Terrain::Wall;
        }
        let door_row = self.rng.gen_range(1..GRID_SIZE - 1);
        terrain[door_row * GRID_SIZE + DIVIDER_COL] = Terrain::Floor;

        let mut state = GridState::new(
            GRID_SIZE,
            GRID_SIZE,
            terrain,
            self.spec.n_agents,
            self.spec.horizon,
        );
        state.door = Some(((door_row, DIVIDER_COL), true));

        // key side (agents start there) chosen at random
        let key_on_left = self.rng.gen_bool(0.5);
        let side_cols = |left: bool| -> Vec<usize> {
            if left {
                (1..DIVIDER_COL).collect()
            } else {
                (DIVIDER_COL + 1..GRID_SIZE - 1).collect()
            }
        };
        let key_cols = side_cols(key_on_left);
        let coin_cols = side_cols(!key_on_left);

        let pick_cell =
            |rng: &mut ChaCha8Rng, cols: &[usize], exclude: &[(usize, usize)]| -> (usize, usize) {
                loop {
                    let r = rng.gen_range(1..GRID_SIZE - 1);
                    let c = cols[rng.gen_range(0..cols.len())];
                    if !exclude.contains(&(r, c)) {
                        return (r, c);
                    }
                }
            };

        let key_pos = pick_cell(&mut self.rng, &key_cols, &[]);
        state.key = Some(KeyLocation::OnGrid(key_pos.0, key_pos.1));
        let coin_pos = pick_cell(&mut self.rng, &coin_cols, &[]);
        state.coin_pos = coin_pos;

        let mut taken = vec![key_pos];
        for i in 0..self.spec.n_agents {
            let pos = pick_cell(&mut self.rng, &key_cols, &taken);
            taken.push(pos);
            state.agent_pos[i] = pos;
            state.agent_dir[i] = Direction::ALL[self.rng.gen_range(0..4)];
        }
        self.state = state;
    }

    fn observations(&self) -> Vec<AgentObservation> {
        (0..self.spec.n_agents)
            .map(|i| self.state.observe_grid(i, VIEW, 4))
            .collect()
    }
}

impl Environment for DoorKey {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self) -> Vec<AgentObservation> {
        self.generate();
        self.observations()
    }

    fn reset_with_seed(&mut self, seed: u64) -> Vec<AgentObservation> {
        self.rng = component_rng(seed, Stream::Env);
        self.reset()
    }

    fn step(&mut self, actions: &[Action]) -> Result<StepResult, EnvError> {
        validate_actions(actions, &self.spec)?;
        let (reward, done) = self
            .state
            .grid_step_actions(actions, &self.p, &mut self.rng)?;
        Ok(StepResult {
            observations: self.observations(),
            reward,
            done,
        })
    }

    fn state(&self) -> &GridState {
        &self.state
    }

    fn attributed_totals(&self) -> Vec<f64> {
        self.state.attributed.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn side(c: usize) -> i32 {
        if c < DIVIDER_COL {
            -1
        } else if c > DIVIDER_COL {
            1
        } else {
            0
        }
    }

    #[test]
    fn key_and_coin_on_opposite_sides() {
        for seed in 0..30 {
            let env = DoorKey::default_desk(seed);
            let s = env.state();
            let key_pos = match s.key {
                Some(KeyLocation::OnGrid(r, c)) => (r, c),
                _ => panic!("key must start on the grid"),
            };
            assert_ne!(side(key_pos.1), 0);
            assert_eq!(side(key_pos.1), -side(s.coin_pos.1), "seed {seed}");
            for &(_, c) in &s.agent_pos {
                assert_eq!(side(c), side(key_pos.1), "agents start on the key side");
            }
        }
    }

    #[test]
    fn seeded_reset_is_deterministic() {
        let a = DoorKey::default_desk(11);
        let b = DoorKey::default_desk(11);
        assert_eq!(a.state().terrain, b.state().terrain);
        assert_eq!(a.state().agent_pos, b.state().agent_pos);
        assert_eq!(a.state().coin_pos, b.state().coin_pos);
        assert_eq!(a.state().key, b.state().key);
        assert_eq!(a.state().door, b.state().door);
    }

    #[test]
    fn pickup_acquires_key_and_removes_it_from_grid() {
        let mut env = DoorKey::default_desk(3);
        // stage: agent 0 faces the key
        let key_pos = match env.state.key {
            Some(KeyLocation::OnGrid(r, c)) => (r, c),
            _ => unreachable!(),
        };
        env.state.agent_pos[0] = (key_pos.0, key_pos.1 - 1);
        env.state.agent_dir[0] = Direction::East;
        // keep agent 1 away from the key
        env.state.agent_pos[1] = env.state.agent_pos[0];
        env.state.agent_dir[1] = Direction::West;
        env.step(&[Action::Pickup, Action::TurnLeft]).unwrap();
        assert_eq!(env.state().key, Some(KeyLocation::Held(0)));
    }

    #[test]
    fn locked_door_blocks_until_key_held() {
        let mut env = DoorKey::default_desk(4);
        let (door_pos, locked) = env.state.door.unwrap();
        assert!(locked);
        env.state.agent_pos[0] = (door_pos.0, door_pos.1 - 1);
        env.state.agent_dir[0] = Direction::East;
        env.state.agent_pos[1] = (1, 1);
        env.state.agent_dir[1] = Direction::North;
        let before = env.state.agent_pos[0];
        env.step(&[Action::Forward, Action::TurnLeft]).unwrap();
        assert_eq!(env.state().agent_pos[0], before, "locked door blocks");

        // give the team the key: the same move now unlocks and enters
        env.state.key = Some(KeyLocation::Held(1));
        env.step(&[Action::Forward, Action::TurnLeft]).unwrap();
        assert_eq!(env.state().agent_pos[0], door_pos);
        assert_eq!(env.state().door, Some((door_pos, false)));
    }

    #[test]
    fn key_cell_blocks_movement() {
        let mut env = DoorKey::default_desk(6);
        let key_pos = match env.state.key {
            Some(KeyLocation::OnGrid(r, c)) => (r, c),
            _ => unreachable!(),
        };
        env.state.agent_pos[0] = (key_pos.0, key_pos.1 - 1);
        env.state.agent_dir[0] = Direction::East;
        env.state.agent_pos[1] = (key_pos.0, key_pos.1 - 1);
        env.state.agent_dir[1] = Direction::West;
        let before = env.state.agent_pos[0];
        env.step(&[Action::Forward, Action::TurnLeft]).unwrap();
        assert_eq!(env.state().agent_pos[0], before);
    }
}
