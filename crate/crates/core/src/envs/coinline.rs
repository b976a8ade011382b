//! 1-D coin collection: a line of 13 cells, two agents, one coin.
//!
//! A lone collector adds `p_1` to the team accumulator, simultaneous
//! collectors add `p_2`, and the coin re-appears at a different cell. The
//! whole accumulator is emitted once, at the final step.

use super::grid::{GridState, Terrain};
use super::{
    validate_actions, Action, AgentObservation, EnvError, EnvSpec, Environment, StepResult,
    CHANNELS, DEFAULT_HORIZON,
};
use crate::rng::{component_rng, Stream};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Line length fixed by the task definition.
pub const LINE_LENGTH: usize = 13;
/// Field of view (cells), agent at the center.
pub const VIEW: usize = 5;

pub struct CoinLine {
    spec: EnvSpec,
    state: GridState,
    p: Vec<f64>,
    rng: ChaCha8Rng,
}

impl CoinLine {
    /// `p` holds the reward increments: `p[0]` for a lone collector,
    /// `p[1]` for a simultaneous pair.
    pub fn new(n_agents: usize, p: Vec<f64>, gamma: f64, horizon: usize, seed: u64) -> Self {
        assert!(n_agents >= 1 && n_agents < LINE_LENGTH);
        assert!(!p.is_empty());
        let spec = EnvSpec {
            n_agents,
            action_set: vec![Action::Left, Action::Right],
            obs_len: VIEW * CHANNELS + 2,
            gamma,
            horizon,
        };
        let state = GridState::new(
            LINE_LENGTH,
            1,
            vec![Terrain::Floor; LINE_LENGTH],
            n_agents,
            horizon,
        );
        CoinLine {
            spec,
            state,
            p,
            rng: component_rng(seed, Stream::Env),
        }
    }

    pub fn default_two_agent(seed: u64) -> Self {
        CoinLine::new(2, vec![0.25, 1.0], 0.99, DEFAULT_HORIZON, seed)
    }

    fn observations(&self) -> Vec<AgentObservation> {
        (0..self.spec.n_agents)
            .map(|i| self.state.observe_line(i, VIEW, 2))
            .collect()
    }

    fn do_reset(&mut self) -> Vec<AgentObservation> {
        let n = self.spec.n_agents;
        // distinct uniformly random cells for the agents and the coin
        let mut cells: Vec<usize> = (0..LINE_LENGTH).collect();
        for k in 0..=n {
            let pick = self.rng.gen_range(k..LINE_LENGTH);
            cells.swap(k, pick);
        }
        self.state = GridState::new(
            LINE_LENGTH,
            1,
            vec![Terrain::Floor; LINE_LENGTH],
            n,
            self.spec.horizon,
        );
        for i in 0..n {
            self.state.agent_pos[i] = (0, cells[i]);
        }
        self.state.coin_pos = (0, cells[n]);
        self.observations()
    }
}

impl Environment for CoinLine {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self) -> Vec<AgentObservation> {
        self.do_reset()
    }

    fn reset_with_seed(&mut self, seed: u64) -> Vec<AgentObservation> {
        self.rng = component_rng(seed, Stream::Env);
        self.do_reset()
    }

    fn step(&mut self, actions: &[Action]) -> Result<StepResult, EnvError> {
        validate_actions(actions, &self.spec)?;
        if self.state.done {
            return Err(EnvError::EpisodeDone);
        }
        for (i, &a) in actions.iter().enumerate() {
            let (r, c) = self.state.agent_pos[i];
            let nc = match a {
                Action::Left => c.saturating_sub(1),
                Action::Right => (c + 1).min(LINE_LENGTH - 1),
                _ => unreachable!("validated above"),
            };
            self.state.agent_pos[i] = (r, nc);
            self.state.last_action[i] = Some(match a {
                Action::Left => 0,
                Action::Right => 1,
                _ => unreachable!(),
            });
        }
        self.state.resolve_collection(&self.p, &mut self.rng);
        let (reward, done) = self.state.advance_clock();
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

    #[test]
    fn seeded_reset_is_deterministic() {
        let mut a = CoinLine::default_two_agent(9);
        let mut b = CoinLine::default_two_agent(9);
        let oa = a.reset();
        let ob = b.reset();
        assert_eq!(oa, ob);
        assert_eq!(a.state().agent_pos, b.state().agent_pos);
        assert_eq!(a.state().coin_pos, b.state().coin_pos);
    }

    #[test]
    fn reset_places_distinct_cells() {
        let mut env = CoinLine::default_two_agent(3);
        for _ in 0..50 {
            env.reset();
            let s = env.state();
            assert_ne!(s.agent_pos[0], s.agent_pos[1]);
            assert_ne!(s.agent_pos[0], s.coin_pos);
            assert_ne!(s.agent_pos[1], s.coin_pos);
        }
    }

    #[test]
    fn lone_collection_accumulates_p1_and_emits_zero() {
        let mut env = CoinLine::new(2, vec![0.25, 1.0], 0.99, 200, 0);
        env.reset();
        // place agent 0 adjacent to the coin by hand
        env.state.agent_pos[0] = (0, 5);
        env.state.agent_pos[1] = (0, 0);
        env.state.coin_pos = (0, 6);
        let res = env
            .step(&[Action::Right, Action::Left])
            .unwrap();
        assert_eq!(res.reward, 0.0);
        assert!(!res.done);
        assert!((env.state().accumulated_reward - 0.25).abs() < 1e-12);
        assert_ne!(env.state().coin_pos, (0, 6), "coin must move");
    }

    #[test]
    fn simultaneous_collection_accumulates_p2() {
        let mut env = CoinLine::new(2, vec![0.25, 1.0], 0.99, 200, 0);
        env.reset();
        env.state.agent_pos[0] = (0, 5);
        env.state.agent_pos[1] = (0, 7);
        env.state.coin_pos = (0, 6);
        env.step(&[Action::Right, Action::Left]).unwrap();
        assert!((env.state().accumulated_reward - 1.0).abs() < 1e-12);
        assert_eq!(env.state().collect_counts[2], 1);
        // equal split of the attributed reward
        assert!((env.state().attributed[0] - 0.5).abs() < 1e-12);
        assert!((env.state().attributed[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn boundary_moves_are_clipped() {
        let mut env = CoinLine::default_two_agent(1);
        env.reset();
        env.state.agent_pos[0] = (0, 0);
        env.state.agent_pos[1] = (0, 12);
        env.state.coin_pos = (0, 6);
        env.step(&[Action::Left, Action::Right]).unwrap();
        assert_eq!(env.state().agent_pos[0], (0, 0));
        assert_eq!(env.state().agent_pos[1], (0, 12));
    }

    #[test]
    fn final_step_emits_accumulator_and_further_steps_error() {
        let mut env = CoinLine::new(2, vec![0.25, 1.0], 0.99, 3, 4);
        env.reset();
        let mut last = None;
        for _ in 0..3 {
            last = Some(env.step(&[Action::Left, Action::Left]).unwrap());
        }
        let last = last.unwrap();
        assert!(last.done);
        assert_eq!(last.reward, env.state().accumulated_reward);
        assert!(matches!(
            env.step(&[Action::Left, Action::Left]),
            Err(EnvError::EpisodeDone)
        ));
    }

    #[test]
    fn out_of_bounds_view_reads_as_wall() {
        let mut env = CoinLine::default_two_agent(2);
        env.reset();
        env.state.agent_pos[0] = (0, 0);
        let obs = env.state().observe_line(0, VIEW, 2);
        // cells -2 and -1 are out of bounds -> wall channel
        assert_eq!(obs[0 * CHANNELS + super::super::CH_WALL], 1);
        assert_eq!(obs[CHANNELS + super::super::CH_WALL], 1);
        // center is self
        assert_eq!(obs[2 * CHANNELS + super::super::CH_SELF], 1);
    }

    #[test]
    fn grid_actions_rejected() {
        let mut env = CoinLine::default_two_agent(2);
        env.reset();
        assert!(matches!(
            env.step(&[Action::Forward, Action::Left]),
            Err(EnvError::InvalidAction(_))
        ));
    }
}
