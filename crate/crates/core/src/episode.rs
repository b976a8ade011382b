//! One recorded rollout: the unit stored in the buffer and consumed by both
//! the reward models and the policy learners.

use crate::nn::Tensor;

/// Per-agent observation/action sequences plus the global reward sequence
/// for one rollout. Observations are stored as packed 0/1 bytes.
#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    /// `[agent][t * obs_len + k]` packed observations.
    pub obs: Vec<Vec<u8>>,
    /// `[agent][t]` action indices into the environment's action set.
    pub actions: Vec<Vec<usize>>,
    /// `[agent][t]` log-probabilities recorded at sampling time.
    pub log_probs: Vec<Vec<f64>>,
    /// `[t]` global reward emitted by the environment (delayed: all zero
    /// until the final step).
    pub rewards: Vec<f64>,
    /// Optional per-agent attributed totals, emitted like the global stream
    /// (zeros before the final step). Training-time-only information.
    pub attributed: Option<Vec<Vec<f64>>>,
    pub obs_len: usize,
    pub n_actions: usize,
}

impl Episode {
    pub fn n_agents(&self) -> usize {
        self.obs.len()
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    /// Total environment return (undiscounted sum of emitted rewards).
    pub fn total_return(&self) -> f64 {
        self.rewards.iter().sum()
    }

    /// Observation row `t` of one agent.
    pub fn obs_at(&self, agent: usize, t: usize) -> &[u8] {
        &self.obs[agent][t * self.obs_len..(t + 1) * self.obs_len]
    }

    /// Materializes one agent's observations as a `T x obs_len` float matrix.
    pub fn obs_matrix(&self, agent: usize) -> Tensor {
        let t = self.len();
        let data: Vec<f64> = self.obs[agent].iter().map(|&b| b as f64).collect();
        Tensor::new(vec![t, self.obs_len], data).expect("packed length matches")
    }

    /// Model input for one agent: observation concatenated with the one-hot
    /// of the action taken at the previous step (zero vector at t=0).
    pub fn model_input_matrix(&self, agent: usize) -> Tensor {
        let t = self.len();
        let width = self.obs_len + self.n_actions;
        let mut data = vec![0.0; t * width];
        for step in 0..t {
            let row = &mut data[step * width..(step + 1) * width];
            for (k, &b) in self.obs_at(agent, step).iter().enumerate() {
                row[k] = b as f64;
            }
            if step > 0 {
                row[self.obs_len + self.actions[agent][step - 1]] = 1.0;
            }
        }
        Tensor::new(vec![t, width], data).expect("sized above")
    }

    /// Width of one model-input row.
    pub fn model_input_width(&self) -> usize {
        self.obs_len + self.n_actions
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Episode {
        Episode {
            obs: vec![vec![1, 0, 0, 1, 1, 0]], // T=3, obs_len=2
            actions: vec![vec![1, 0, 1]],
            log_probs: vec![vec![-0.1, -0.2, -0.3]],
            rewards: vec![0.0, 0.0, 2.5],
            attributed: None,
            obs_len: 2,
            n_actions: 2,
        }
    }

    #[test]
    fn total_return_sums_emissions() {
        assert_eq!(tiny().total_return(), 2.5);
    }

    #[test]
    fn model_input_uses_previous_action() {
        let ep = tiny();
        let m = ep.model_input_matrix(0);
        assert_eq!(m.shape(), &[3, 4]);
        // t=0: zero action block
        assert_eq!(m.row(0), &[1.0, 0.0, 0.0, 0.0]);
        // t=1: one-hot of action taken at t=0 (index 1)
        assert_eq!(m.row(1), &[0.0, 1.0, 0.0, 1.0]);
        // t=2: one-hot of action taken at t=1 (index 0)
        assert_eq!(m.row(2), &[1.0, 0.0, 1.0, 0.0]);
    }
}
