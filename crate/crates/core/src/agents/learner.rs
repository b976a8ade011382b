//! Policy-gradient learners: independent REINFORCE with a value baseline,
//! independent actor-critic, and the counterfactual central-critic method.
//!
//! Learners are agnostic to where their per-agent reward streams came from
//! (raw environment emissions or a redistribution model); the streams are
//! plain inputs on the batch.

use super::critic::{coma_advantage, CentralCritic, ValueNet};
use super::mlp::softmax;
use super::policy::{PolicyArch, PolicyNet, PolicySet};
use crate::episode::Episode;
use crate::nn::graph::{Graph, Var};
use crate::nn::params::ParamSet;
use crate::nn::tensor::{NnError, Tensor};
use crate::nn::{adam_step, clip_grad_norm, OptimizerState};
use rand::Rng;

/// Hyperparameters shared by all learners.
#[derive(Clone, Debug)]
pub struct LearnerConfig {
    pub gamma: f64,
    pub policy_lr: f64,
    pub critic_lr: f64,
    pub entropy_coef: f64,
    pub grad_clip: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            gamma: 0.99,
            policy_lr: 3e-3,
            critic_lr: 3e-3,
            entropy_coef: 0.01,
            grad_clip: 5.0,
        }
    }
}

/// Episodes plus the per-agent reward stream each agent trains on.
pub struct RolloutBatch {
    pub episodes: Vec<Episode>,
    /// `[episode][agent][t]`.
    pub rewards: Vec<Vec<Vec<f64>>>,
}

impl RolloutBatch {
    pub fn validate(&self) -> Result<(), NnError> {
        if self.episodes.len() != self.rewards.len() {
            return Err(NnError::Dimension(
                "batch: episode/reward stream counts differ".into(),
            ));
        }
        for (ep, streams) in self.episodes.iter().zip(&self.rewards) {
            if streams.len() != ep.n_agents() {
                return Err(NnError::Dimension(
                    "batch: stream count differs from agent count".into(),
                ));
            }
            if streams.iter().any(|s| s.len() != ep.len()) {
                return Err(NnError::Dimension(
                    "batch: reward stream length differs from episode length".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Backward recursion `R_t = r_t + gamma * R_{t+1}`.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for t in (0..rewards.len()).rev() {
        acc = rewards[t] + gamma * acc;
        out[t] = acc;
    }
    out
}

/// Update diagnostics.
#[derive(Clone, Copy, Debug, Default)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub critic_loss: f64,
}

/// Common learner surface used by the trainer.
pub trait PolicyLearner: Send {
    fn policies(&self) -> &PolicySet;
    fn policies_mut(&mut self) -> &mut PolicySet;
    /// One gradient step per agent on a batch of complete episodes.
    fn update(&mut self, batch: &RolloutBatch) -> Result<UpdateStats, NnError>;
    /// Named parameter sets for checkpointing.
    fn named_params(&self) -> Vec<(String, ParamSet)>;
}

/// Flattens per-episode observation matrices for one agent.
fn stack_obs(episodes: &[Episode], agent: usize) -> (Vec<Tensor>, Vec<usize>, usize) {
    let mats: Vec<Tensor> = episodes.iter().map(|e| e.obs_matrix(agent)).collect();
    let actions: Vec<usize> = episodes
        .iter()
        .flat_map(|e| e.actions[agent].iter().copied())
        .collect();
    let total: usize = episodes.iter().map(Episode::len).sum();
    (mats, actions, total)
}

/// Policy logits over a whole batch: feed-forward trunks run one stacked
/// matrix; recurrent trunks run per episode and concatenate.
fn batch_logits(
    net: &PolicyNet,
    g: &mut Graph,
    bound: &crate::nn::BoundParams,
    obs_mats: &[Tensor],
) -> Result<Var, NnError> {
    match net.arch() {
        PolicyArch::FeedForward => {
            let total: usize = obs_mats.iter().map(Tensor::rows).sum();
            let cols = obs_mats[0].cols();
            let mut data = Vec::with_capacity(total * cols);
            for m in obs_mats {
                data.extend_from_slice(m.data());
            }
            let x = g.leaf(Tensor::new(vec![total, cols], data)?)?;
            net.forward_graph(g, bound, x)
        }
        PolicyArch::Recurrent => {
            let mut parts = Vec::with_capacity(obs_mats.len());
            for m in obs_mats {
                let x = g.leaf(m.clone())?;
                parts.push(net.forward_graph(g, bound, x)?);
            }
            g.concat_rows(&parts)
        }
    }
}

/// One REINFORCE-style step: maximize `mean(adv * log pi)` plus an entropy
/// bonus, by gradient descent on the negation. Returns the loss.
fn policy_step(
    net: &mut PolicyNet,
    opt: &mut OptimizerState,
    obs_mats: &[Tensor],
    actions: &[usize],
    advantages: &[f64],
    cfg: &LearnerConfig,
) -> Result<f64, NnError> {
    let mut g = Graph::new();
    let bound = g.bind(&net.params)?;
    let logits = batch_logits(net, &mut g, &bound, obs_mats)?;
    let lp = g.log_softmax_rows(logits)?;
    let picked = g.pick_per_row(lp, actions)?;
    let adv = g.leaf(Tensor::new(vec![advantages.len(), 1], advantages.to_vec())?)?;
    let weighted = g.mul(picked, adv)?;
    let gain = g.mean(weighted)?;
    let p = g.softmax_rows(logits)?;
    let plp = g.mul(p, lp)?;
    let neg_entropy = g.row_sums(plp)?;
    let neg_entropy_mean = g.mean(neg_entropy)?;
    let descent = g.scale(gain, -1.0)?;
    let entropy_term = g.scale(neg_entropy_mean, cfg.entropy_coef)?;
    let loss = g.add(descent, entropy_term)?;
    let grads = g.backward(loss)?;
    let mut grad_vec = grads.for_params(&bound, &g);
    clip_grad_norm(&mut grad_vec, cfg.grad_clip);
    adam_step(&mut net.params, &grad_vec, opt)?;
    Ok(g.value(loss).data()[0])
}

/// Fits a value net toward `targets` (one step) and returns the values it
/// predicted before the step, plus the regression loss.
fn value_step(
    net: &mut ValueNet,
    opt: &mut OptimizerState,
    obs_mats: &[Tensor],
    targets: &[f64],
    cfg: &LearnerConfig,
) -> Result<(Vec<f64>, f64), NnError> {
    let total: usize = obs_mats.iter().map(Tensor::rows).sum();
    let cols = obs_mats[0].cols();
    let mut data = Vec::with_capacity(total * cols);
    for m in obs_mats {
        data.extend_from_slice(m.data());
    }
    let mut g = Graph::new();
    let bound = g.bind(&net.params)?;
    let x = g.leaf(Tensor::new(vec![total, cols], data)?)?;
    let v = net.forward_graph(&mut g, &bound, x)?;
    let values = g.value(v).data().to_vec();
    let tgt = g.leaf(Tensor::new(vec![targets.len(), 1], targets.to_vec())?)?;
    let diff = g.sub(v, tgt)?;
    let sq = g.mul(diff, diff)?;
    let loss = g.mean(sq)?;
    let grads = g.backward(loss)?;
    let mut grad_vec = grads.for_params(&bound, &g);
    clip_grad_norm(&mut grad_vec, cfg.grad_clip);
    adam_step(&mut net.params, &grad_vec, opt)?;
    Ok((values, g.value(loss).data()[0]))
}

/// Independent policy gradient (REINFORCE) with a learned state-value
/// baseline per agent.
pub struct IpgLearner {
    policies: PolicySet,
    baselines: Vec<ValueNet>,
    policy_opts: Vec<OptimizerState>,
    baseline_opts: Vec<OptimizerState>,
    cfg: LearnerConfig,
}

impl IpgLearner {
    pub fn new<R: Rng>(
        n_agents: usize,
        obs_len: usize,
        n_actions: usize,
        arch: PolicyArch,
        cfg: LearnerConfig,
        rng: &mut R,
    ) -> Self {
        let policies = PolicySet::new(n_agents, obs_len, n_actions, arch, rng);
        let baselines: Vec<ValueNet> = (0..n_agents).map(|_| ValueNet::new(obs_len, rng)).collect();
        let policy_opts = policies
            .nets
            .iter()
            .map(|n| OptimizerState::new(&n.params, cfg.policy_lr))
            .collect();
        let baseline_opts = baselines
            .iter()
            .map(|b| OptimizerState::new(&b.params, cfg.critic_lr))
            .collect();
        IpgLearner {
            policies,
            baselines,
            policy_opts,
            baseline_opts,
            cfg,
        }
    }
}

impl PolicyLearner for IpgLearner {
    fn policies(&self) -> &PolicySet {
        &self.policies
    }

    fn policies_mut(&mut self) -> &mut PolicySet {
        &mut self.policies
    }

    fn update(&mut self, batch: &RolloutBatch) -> Result<UpdateStats, NnError> {
        batch.validate()?;
        let mut stats = UpdateStats::default();
        let n_agents = self.policies.n_agents();
        for agent in 0..n_agents {
            let (obs_mats, actions, _) = stack_obs(&batch.episodes, agent);
            let returns: Vec<f64> = batch
                .rewards
                .iter()
                .flat_map(|streams| discounted_returns(&streams[agent], self.cfg.gamma))
                .collect();
            let (values, vloss) = value_step(
                &mut self.baselines[agent],
                &mut self.baseline_opts[agent],
                &obs_mats,
                &returns,
                &self.cfg,
            )?;
            let advantages: Vec<f64> = returns
                .iter()
                .zip(&values)
                .map(|(&g_t, &v)| g_t - v)
                .collect();
            let ploss = policy_step(
                &mut self.policies.nets[agent],
                &mut self.policy_opts[agent],
                &obs_mats,
                &actions,
                &advantages,
                &self.cfg,
            )?;
            stats.policy_loss += ploss / n_agents as f64;
            stats.critic_loss += vloss / n_agents as f64;
        }
        Ok(stats)
    }

    fn named_params(&self) -> Vec<(String, ParamSet)> {
        let mut out = Vec::new();
        for (i, net) in self.policies.nets.iter().enumerate() {
            out.push((format!("agent{i}.policy"), net.params.clone()));
            out.push((format!("agent{i}.baseline"), self.baselines[i].params.clone()));
        }
        out
    }
}

/// Independent actor-critic: one-step temporal-difference critic, actor
/// stepped with the TD advantage.
pub struct IacLearner {
    policies: PolicySet,
    critics: Vec<ValueNet>,
    policy_opts: Vec<OptimizerState>,
    critic_opts: Vec<OptimizerState>,
    cfg: LearnerConfig,
}

impl IacLearner {
    pub fn new<R: Rng>(
        n_agents: usize,
        obs_len: usize,
        n_actions: usize,
        arch: PolicyArch,
        cfg: LearnerConfig,
        rng: &mut R,
    ) -> Self {
        let policies = PolicySet::new(n_agents, obs_len, n_actions, arch, rng);
        let critics: Vec<ValueNet> = (0..n_agents).map(|_| ValueNet::new(obs_len, rng)).collect();
        let policy_opts = policies
            .nets
            .iter()
            .map(|n| OptimizerState::new(&n.params, cfg.policy_lr))
            .collect();
        let critic_opts = critics
            .iter()
            .map(|c| OptimizerState::new(&c.params, cfg.critic_lr))
            .collect();
        IacLearner {
            policies,
            critics,
            policy_opts,
            critic_opts,
            cfg,
        }
    }

    pub fn critic_value(&self, agent: usize, obs: &[u8]) -> f64 {
        let dense: Vec<f64> = obs.iter().map(|&b| b as f64).collect();
        let mut g = Graph::new();
        let bound = g.bind(&self.critics[agent].params).expect("bind");
        let x = g
            .leaf(Tensor::new(vec![1, dense.len()], dense).expect("shape"))
            .expect("leaf");
        let v = self.critics[agent]
            .forward_graph(&mut g, &bound, x)
            .expect("forward");
        g.value(v).data()[0]
    }
}

impl PolicyLearner for IacLearner {
    fn policies(&self) -> &PolicySet {
        &self.policies
    }

    fn policies_mut(&mut self) -> &mut PolicySet {
        &mut self.policies
    }

    fn update(&mut self, batch: &RolloutBatch) -> Result<UpdateStats, NnError> {
        batch.validate()?;
        let mut stats = UpdateStats::default();
        let n_agents = self.policies.n_agents();
        for agent in 0..n_agents {
            let (obs_mats, actions, total) = stack_obs(&batch.episodes, agent);

            // critic forward over the whole batch, then per-episode one-step
            // TD targets with a zero bootstrap at the horizon
            let mut g = Graph::new();
            let bound = g.bind(&self.critics[agent].params)?;
            let cols = obs_mats[0].cols();
            let mut data = Vec::with_capacity(total * cols);
            for m in &obs_mats {
                data.extend_from_slice(m.data());
            }
            let x = g.leaf(Tensor::new(vec![total, cols], data)?)?;
            let v = self.critics[agent].forward_graph(&mut g, &bound, x)?;
            let values = g.value(v).data().to_vec();

            let mut targets = Vec::with_capacity(total);
            let mut offset = 0;
            for (ep, streams) in batch.episodes.iter().zip(&batch.rewards) {
                let t_len = ep.len();
                for t in 0..t_len {
                    let next_v = if t + 1 < t_len {
                        values[offset + t + 1]
                    } else {
                        0.0
                    };
                    targets.push(streams[agent][t] + self.cfg.gamma * next_v);
                }
                offset += t_len;
            }

            let tgt = g.leaf(Tensor::new(vec![total, 1], targets.clone())?)?;
            let diff = g.sub(v, tgt)?;
            let sq = g.mul(diff, diff)?;
            let closs = g.mean(sq)?;
            let grads = g.backward(closs)?;
            let mut grad_vec = grads.for_params(&bound, &g);
            clip_grad_norm(&mut grad_vec, self.cfg.grad_clip);
            adam_step(
                &mut self.critics[agent].params,
                &grad_vec,
                &mut self.critic_opts[agent],
            )?;
            stats.critic_loss += g.value(closs).data()[0] / n_agents as f64;

            let advantages: Vec<f64> = targets
                .iter()
                .zip(&values)
                .map(|(&t, &v)| t - v)
                .collect();
            let ploss = policy_step(
                &mut self.policies.nets[agent],
                &mut self.policy_opts[agent],
                &obs_mats,
                &actions,
                &advantages,
                &self.cfg,
            )?;
            stats.policy_loss += ploss / n_agents as f64;
        }
        Ok(stats)
    }

    fn named_params(&self) -> Vec<(String, ParamSet)> {
        let mut out = Vec::new();
        for (i, net) in self.policies.nets.iter().enumerate() {
            out.push((format!("agent{i}.policy"), net.params.clone()));
            out.push((format!("agent{i}.critic"), self.critics[i].params.clone()));
        }
        out
    }
}

/// Counterfactual multi-agent learner: a centralized action-value critic
/// over concatenated observations (no global state is available), actors
/// stepped with the counterfactual advantage.
pub struct ComaLearner {
    policies: PolicySet,
    critic: CentralCritic,
    policy_opts: Vec<OptimizerState>,
    critic_opt: OptimizerState,
    cfg: LearnerConfig,
}

impl ComaLearner {
    pub fn new<R: Rng>(
        n_agents: usize,
        obs_len: usize,
        n_actions: usize,
        arch: PolicyArch,
        cfg: LearnerConfig,
        rng: &mut R,
    ) -> Self {
        let policies = PolicySet::new(n_agents, obs_len, n_actions, arch, rng);
        let critic = CentralCritic::new(n_agents, obs_len, n_actions, rng);
        let policy_opts = policies
            .nets
            .iter()
            .map(|n| OptimizerState::new(&n.params, cfg.policy_lr))
            .collect();
        let critic_opt = OptimizerState::new(&critic.params, cfg.critic_lr);
        ComaLearner {
            policies,
            critic,
            policy_opts,
            critic_opt,
            cfg,
        }
    }
}

impl PolicyLearner for ComaLearner {
    fn policies(&self) -> &PolicySet {
        &self.policies
    }

    fn policies_mut(&mut self) -> &mut PolicySet {
        &mut self.policies
    }

    fn update(&mut self, batch: &RolloutBatch) -> Result<UpdateStats, NnError> {
        batch.validate()?;
        let n_agents = self.policies.n_agents();
        let n_actions = self.policies.nets[0].n_actions();
        let width = self.critic.input_width();

        // critic inputs for every (agent, episode, t)
        let total: usize = batch.episodes.iter().map(Episode::len).sum();
        let mut rows = Vec::with_capacity(n_agents * total * width);
        let mut chosen = Vec::with_capacity(n_agents * total);
        let mut mc_targets = Vec::with_capacity(n_agents * total);
        for agent in 0..n_agents {
            for (ep, streams) in batch.episodes.iter().zip(&batch.rewards) {
                let returns = discounted_returns(&streams[agent], self.cfg.gamma);
                for t in 0..ep.len() {
                    let all_obs: Vec<&[u8]> =
                        (0..n_agents).map(|i| ep.obs_at(i, t)).collect();
                    let actions_t: Vec<usize> =
                        (0..n_agents).map(|i| ep.actions[i][t]).collect();
                    rows.extend_from_slice(&self.critic.input_row(&all_obs, &actions_t, agent));
                    chosen.push(ep.actions[agent][t]);
                    mc_targets.push(returns[t]);
                }
            }
        }

        let mut g = Graph::new();
        let bound = g.bind(&self.critic.params)?;
        let x = g.leaf(Tensor::new(vec![n_agents * total, width], rows)?)?;
        let q = self.critic.forward_graph(&mut g, &bound, x)?;
        let q_values = g.value(q).clone();

        let picked = g.pick_per_row(q, &chosen)?;
        let tgt = g.leaf(Tensor::new(vec![mc_targets.len(), 1], mc_targets)?)?;
        let diff = g.sub(picked, tgt)?;
        let sq = g.mul(diff, diff)?;
        let closs = g.mean(sq)?;
        let grads = g.backward(closs)?;
        let mut grad_vec = grads.for_params(&bound, &g);
        clip_grad_norm(&mut grad_vec, self.cfg.grad_clip);
        adam_step(&mut self.critic.params, &grad_vec, &mut self.critic_opt)?;
        let critic_loss = g.value(closs).data()[0];

        // actors: counterfactual advantage from the pre-update critic values
        let mut stats = UpdateStats {
            policy_loss: 0.0,
            critic_loss,
        };
        for agent in 0..n_agents {
            let (obs_mats, actions, _) = stack_obs(&batch.episodes, agent);
            let mut advantages = Vec::with_capacity(total);
            let mut state = self.policies.nets[agent].init_state();
            let mut row_idx = agent * total;
            for ep in batch.episodes.iter() {
                if matches!(self.policies.nets[agent].arch(), PolicyArch::Recurrent) {
                    state = self.policies.nets[agent].init_state();
                }
                for t in 0..ep.len() {
                    let logits = self.policies.nets[agent]
                        .logits_infer(ep.obs_at(agent, t), &mut state);
                    let probs = softmax(&logits);
                    let q_row: Vec<f64> = (0..n_actions)
                        .map(|a| q_values.at2(row_idx, a))
                        .collect();
                    advantages.push(coma_advantage(&q_row, &probs, ep.actions[agent][t])?);
                    row_idx += 1;
                }
            }
            let ploss = policy_step(
                &mut self.policies.nets[agent],
                &mut self.policy_opts[agent],
                &obs_mats,
                &actions,
                &advantages,
                &self.cfg,
            )?;
            stats.policy_loss += ploss / n_agents as f64;
        }
        Ok(stats)
    }

    fn named_params(&self) -> Vec<(String, ParamSet)> {
        let mut out: Vec<(String, ParamSet)> = self
            .policies
            .nets
            .iter()
            .enumerate()
            .map(|(i, n)| (format!("agent{i}.policy"), n.params.clone()))
            .collect();
        out.push(("critic".to_string(), self.critic.params.clone()));
        out
    }
}
