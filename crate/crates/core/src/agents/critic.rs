//! Value estimators: per-agent state-value baselines and the centralized
//! counterfactual critic.

use super::mlp::Mlp;
use crate::nn::graph::{Graph, Var};
use crate::nn::params::{BoundParams, ParamSet};
use crate::nn::tensor::NnError;
use rand::Rng;

const CRITIC_HIDDEN: usize = 64;

/// Scalar state-value network over one agent's observation.
/// The head starts at zero, so fresh estimates are exactly zero.
pub struct ValueNet {
    pub params: ParamSet,
    mlp: Mlp,
}

impl ValueNet {
    pub fn new<R: Rng>(obs_len: usize, rng: &mut R) -> Self {
        let mut params = ParamSet::new();
        let mlp = Mlp::init(
            &mut params,
            "v",
            &[obs_len, CRITIC_HIDDEN, CRITIC_HIDDEN, 1],
            rng,
        );
        ValueNet { params, mlp }
    }

    pub fn forward_graph(
        &self,
        g: &mut Graph,
        bound: &BoundParams,
        obs: Var,
    ) -> Result<Var, NnError> {
        self.mlp.forward_graph(g, bound, obs)
    }
}

/// Centralized action-value critic for the counterfactual learner.
///
/// Input: every agent's observation concatenated, the other agents'
/// actions one-hot, and the evaluated agent's index one-hot (no global
/// state is available in these environments). Output: one value per
/// candidate action of the evaluated agent.
pub struct CentralCritic {
    pub params: ParamSet,
    mlp: Mlp,
    obs_len: usize,
    n_actions: usize,
}

impl CentralCritic {
    pub fn new<R: Rng>(n_agents: usize, obs_len: usize, n_actions: usize, rng: &mut R) -> Self {
        let input = n_agents * obs_len + (n_agents.saturating_sub(1)) * n_actions + n_agents;
        let mut params = ParamSet::new();
        let mlp = Mlp::init(
            &mut params,
            "q",
            &[input, CRITIC_HIDDEN, CRITIC_HIDDEN, n_actions],
            rng,
        );
        CentralCritic {
            params,
            mlp,

            obs_len,
            n_actions,
        }
    }

    pub fn input_width(&self) -> usize {
        self.mlp.input_width()
    }

    /// Builds one critic input row for agent `agent` at a single timestep.
    ///
    /// `all_obs[i]` is agent i's packed observation; `actions[i]` the action
    /// each agent took.
    pub fn input_row(&self, all_obs: &[&[u8]], actions: &[usize], agent: usize) -> Vec<f64> {
        let mut row = vec![0.0; self.input_width()];
        let mut off = 0;
        for obs in all_obs {
            for (k, &b) in obs.iter().enumerate() {
                row[off + k] = b as f64;
            }
            off += self.obs_len;
        }
        for (i, &a) in actions.iter().enumerate() {
            if i == agent {
                continue;
            }
            row[off + a] = 1.0;
            off += self.n_actions;
        }
        row[off + agent] = 1.0;
        row
    }

    pub fn forward_graph(
        &self,
        g: &mut Graph,
        bound: &BoundParams,
        input: Var,
    ) -> Result<Var, NnError> {
        self.mlp.forward_graph(g, bound, input)
    }
}

/// Counterfactual advantage: the chosen action's value minus the
/// policy-weighted average over the agent's alternatives.
pub fn coma_advantage(
    q_values: &[f64],
    policy_probs: &[f64],
    chosen: usize,
) -> Result<f64, NnError> {
    if q_values.len() != policy_probs.len() {
        return Err(NnError::Dimension(format!(
            "{} action values vs {} probabilities",
            q_values.len(),
            policy_probs.len()
        )));
    }
    if chosen >= q_values.len() {
        return Err(NnError::Dimension(format!(
            "chosen action {chosen} out of {}",
            q_values.len()
        )));
    }
    let sum: f64 = policy_probs.iter().sum();
    if policy_probs.iter().any(|&p| p < 0.0) || (sum - 1.0).abs() > 1e-6 {
        return Err(NnError::Config(format!(
            "policy probabilities must form a distribution (sum {sum})"
        )));
    }
    let baseline: f64 = q_values
        .iter()
        .zip(policy_probs)
        .map(|(&q, &p)| p * q)
        .sum();
    Ok(q_values[chosen] - baseline)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed_advantage() {
        // uniform over 2 actions, Q = [1, 3], chosen 1 -> 3 - 2 = 1
        let adv = coma_advantage(&[1.0, 3.0], &[0.5, 0.5], 1).unwrap();
        assert!((adv - 1.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic_policy_has_zero_advantage() {
        let adv = coma_advantage(&[5.0, -2.0, 0.3], &[0.0, 1.0, 0.0], 1).unwrap();
        assert_eq!(adv, 0.0);
    }

    #[test]
    fn expected_advantage_is_zero() {
        let q = [2.0, -1.0, 0.5, 3.0];
        let pi = [0.1, 0.4, 0.3, 0.2];
        let expectation: f64 = (0..4)
            .map(|a| pi[a] * coma_advantage(&q, &pi, a).unwrap())
            .sum();
        assert!(expectation.abs() < 1e-12);
    }

    #[test]
    fn invalid_distribution_rejected() {
        assert!(matches!(
            coma_advantage(&[1.0, 2.0], &[0.9, 0.3], 0),
            Err(NnError::Config(_))
        ));
    }
}
