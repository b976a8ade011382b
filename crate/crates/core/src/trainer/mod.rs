//! Training orchestration: rollout collection into a FIFO buffer, reward
//! model retraining to a loss threshold, redistribution of fresh rollouts
//! with the frozen model snapshot, and policy updates.

mod buffer;
mod collect;

pub use buffer::EpisodeBuffer;
pub use collect::{collect_one, collect_rollouts, Collected};

use crate::agents::{
    ComaLearner, IacLearner, IpgLearner, PolicyArch, PolicyLearner, RolloutBatch,
};
use crate::config::{Algorithm, EnvKind, ExperimentConfig, Redistribution, TimingMode};
use crate::envs::{CoinLine, DoorKey, Environment, MultiRoom};
use crate::episode::Episode;
use crate::nn::OptimizerState;
use crate::redistribution::{AtaModel, ModelConfig, RedistConfig, RewardModel, RudderModel};
use crate::rng::{component_rng, Stream};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::time::Instant;

/// Failure during a training run, tagged with episode index and phase.
#[derive(Debug, Clone)]
pub struct TrainError {
    pub episode: usize,
    pub phase: &'static str,
    pub message: String,
}

impl TrainError {
    pub fn new(episode: usize, phase: &'static str, message: String) -> Self {
        TrainError {
            episode,
            phase,
            message,
        }
    }
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "training failed at episode {} during {}: {}",
            self.episode, self.phase, self.message
        )
    }
}

impl std::error::Error for TrainError {}

/// Retraining cadence and limits.
#[derive(Clone, Debug)]
pub struct TrainSchedule {
    pub total_episodes: usize,
    pub retrain_interval: usize,
    pub min_loss: f64,
    pub max_steps: usize,
    pub warmup_episodes: usize,
    pub model_batch: usize,
}

impl TrainSchedule {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        TrainSchedule {
            total_episodes: cfg.episodes,
            retrain_interval: cfg.retrain_interval,
            min_loss: cfg.min_loss,
            max_steps: cfg.retrain_max_steps,
            warmup_episodes: cfg.warmup_episodes,
            model_batch: cfg.model_batch,
        }
    }
}

/// One metrics row per episode. Returns are always true environment
/// returns; redistributed rewards never appear here.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub episode: usize,
    pub env_return: f64,
    /// Reward-model loss at the last retraining, if any happened yet.
    pub model_loss: Option<f64>,
    pub seconds: f64,
}

/// Everything a finished run hands back.
pub struct TrainOutcome {
    pub metrics: Vec<MetricsRow>,
    pub learner: Box<dyn PolicyLearner>,
    pub reward_model: Option<RewardModel>,
}

/// Builds the configured environment with a component-seeded stream.
pub fn build_env(
    cfg: &ExperimentConfig,
    master_seed: u64,
) -> Result<Box<dyn Environment>, TrainError> {
    match cfg.env {
        EnvKind::CoinLine => Ok(Box::new(CoinLine::new(
            cfg.agents,
            cfg.p.clone(),
            cfg.gamma,
            cfg.horizon,
            master_seed,
        ))),
        EnvKind::MultiRoom => MultiRoom::new(
            cfg.rooms,
            cfg.agents,
            cfg.p.clone(),
            cfg.gamma,
            cfg.horizon,
            master_seed,
        )
        .map(|e| Box::new(e) as Box<dyn Environment>)
        .map_err(|e| TrainError::new(0, "env build", e.to_string())),
        EnvKind::DoorKey => Ok(Box::new(DoorKey::new(
            cfg.agents,
            cfg.p.clone(),
            cfg.gamma,
            cfg.horizon,
            master_seed,
        ))),
    }
}

/// Builds the configured learner with policy-init seeding.
pub fn build_learner(
    cfg: &ExperimentConfig,
    obs_len: usize,
    n_actions: usize,
    master_seed: u64,
) -> Box<dyn PolicyLearner> {
    let mut rng = component_rng(master_seed, Stream::PolicyInit);
    let arch = if cfg.policy_recurrent {
        PolicyArch::Recurrent
    } else {
        PolicyArch::FeedForward
    };
    let lc = cfg.learner_config();
    match cfg.algorithm {
        Algorithm::Ipg => Box::new(IpgLearner::new(
            cfg.agents, obs_len, n_actions, arch, lc, &mut rng,
        )),
        Algorithm::Iac => Box::new(IacLearner::new(
            cfg.agents, obs_len, n_actions, arch, lc, &mut rng,
        )),
        Algorithm::Coma => Box::new(ComaLearner::new(
            cfg.agents, obs_len, n_actions, arch, lc, &mut rng,
        )),
    }
}

/// Builds the configured reward model, if redistribution is enabled.
pub fn build_reward_model(
    cfg: &ExperimentConfig,
    obs_len: usize,
    n_actions: usize,
    master_seed: u64,
) -> Result<Option<RewardModel>, TrainError> {
    let mut rng = component_rng(master_seed, Stream::ModelInit);
    let input_dim = obs_len + n_actions;
    let model_cfg = ModelConfig {
        input_dim,
        latent: cfg.latent,
        heads: cfg.heads,
        arch: cfg.arch,
        aggregator: cfg.aggregator,
        residual: cfg.residual,
        layer_norm: cfg.layer_norm,
    };
    let build_err = |e: crate::nn::NnError| TrainError::new(0, "model build", e.to_string());
    match cfg.redistribution {
        Redistribution::None => Ok(None),
        Redistribution::Ata => Ok(Some(RewardModel::Ata(
            AtaModel::new(model_cfg, &mut rng).map_err(build_err)?,
        ))),
        Redistribution::Rudder => {
            let team_cfg = ModelConfig {
                input_dim: cfg.agents * input_dim,
                ..model_cfg
            };
            Ok(Some(RewardModel::Rudder(
                RudderModel::new(team_cfg, &mut rng).map_err(build_err)?,
            )))
        }
    }
}

/// Retrains the reward model on buffer samples until the loss reaches
/// `min_loss` or the step cap; returns the last computed loss.
///
/// The loss is evaluated before each step, so a model already at or below
/// the threshold takes zero gradient steps.
pub fn train_reward_model(
    model: &mut RewardModel,
    buffer: &EpisodeBuffer,
    schedule: &TrainSchedule,
    redist_cfg: &RedistConfig,
    attribution: bool,
    grad_clip: f64,
    opt: &mut OptimizerState,
    rng: &mut ChaCha8Rng,
) -> Result<f64, TrainError> {
    if buffer.is_empty() {
        return Err(TrainError::new(0, "model retrain", "empty buffer".into()));
    }
    let mut last_loss = f64::INFINITY;
    for _ in 0..schedule.max_steps {
        let batch: Vec<&Episode> = (0..schedule.model_batch)
            .map(|_| buffer.get(rng.gen_range(0..buffer.len())))
            .collect();
        let (loss, stepped) = model
            .train_step(
                &batch,
                redist_cfg,
                attribution,
                opt,
                grad_clip,
                schedule.min_loss,
            )
            .map_err(|e| TrainError::new(0, "model retrain", e.to_string()))?;
        last_loss = loss;
        if !stepped {
            break;
        }
    }
    Ok(last_loss)
}

/// Runs the full alternation loop for one master seed.
pub fn run_training(
    cfg: &ExperimentConfig,
    master_seed: u64,
) -> Result<TrainOutcome, TrainError> {
    let mut env = build_env(cfg, master_seed)?;
    let spec = env.spec().clone();
    let mut learner = build_learner(cfg, spec.obs_len, spec.n_actions(), master_seed);
    let mut model = build_reward_model(cfg, spec.obs_len, spec.n_actions(), master_seed)?;
    let mut model_opt = model
        .as_ref()
        .map(|m| OptimizerState::new(m.params(), cfg.model_lr));

    let schedule = TrainSchedule::from_config(cfg);
    let redist_cfg = cfg.redist_config();
    let mut buffer = EpisodeBuffer::new(cfg.buffer_capacity);
    let mut sample_rng = component_rng(master_seed, Stream::Sampling);
    let mut model_rng = component_rng(master_seed, Stream::ModelTraining);

    let mut metrics = Vec::with_capacity(schedule.total_episodes);
    let mut pending: Vec<Episode> = Vec::with_capacity(cfg.policy_batch);
    let mut last_loss: Option<f64> = None;
    let mut model_trained = false;
    let start = Instant::now();

    for ep_idx in 0..schedule.total_episodes {
        let collected = collect_one(
            env.as_mut(),
            learner.policies(),
            &mut sample_rng,
            cfg.attribution,
        )
        .map_err(|e| TrainError::new(ep_idx, e.phase, e.message))?;
        let env_return = collected.episode.total_return();
        buffer.push(collected.episode.clone());
        pending.push(collected.episode);

        if let (Some(m), Some(opt)) = (model.as_mut(), model_opt.as_mut()) {
            let done = ep_idx + 1;
            if done >= schedule.warmup_episodes
                && (done - schedule.warmup_episodes) % schedule.retrain_interval == 0
            {
                let loss = train_reward_model(
                    m,
                    &buffer,
                    &schedule,
                    &redist_cfg,
                    cfg.attribution,
                    cfg.model_grad_clip,
                    opt,
                    &mut model_rng,
                )
                .map_err(|e| TrainError::new(ep_idx, e.phase, e.message))?;
                last_loss = Some(loss);
                model_trained = true;
            }
        }

        if pending.len() == cfg.policy_batch {
            let episodes = std::mem::take(&mut pending);
            // one frozen snapshot redistributes the whole policy batch
            let rewards = assign_streams(&episodes, model.as_ref(), model_trained, cfg)
                .map_err(|e| TrainError::new(ep_idx, "redistribute", e))?;
            learner
                .update(&RolloutBatch { episodes, rewards })
                .map_err(|e| TrainError::new(ep_idx, "policy update", e.to_string()))?;
        }

        metrics.push(MetricsRow {
            episode: ep_idx,
            env_return,
            model_loss: last_loss,
            seconds: match cfg.timing {
                TimingMode::Wall => start.elapsed().as_secs_f64(),
                TimingMode::None => 0.0,
            },
        });
    }

    Ok(TrainOutcome {
        metrics,
        learner,
        reward_model: model,
    })
}

/// Per-agent reward streams for a policy batch: redistributed when a
/// trained model exists, otherwise the raw global stream for every agent.
fn assign_streams(
    episodes: &[Episode],
    model: Option<&RewardModel>,
    model_trained: bool,
    cfg: &ExperimentConfig,
) -> Result<Vec<Vec<Vec<f64>>>, String> {
    let mut out = Vec::with_capacity(episodes.len());
    for ep in episodes {
        let streams = match model {
            Some(m) if model_trained => m
                .redistribute_episode(ep, cfg.residual_correction)
                .map_err(|e| e.to_string())?
                .rewards,
            _ => vec![ep.rewards.clone(); ep.n_agents()],
        };
        out.push(streams);
    }
    Ok(out)
}

/// Evaluation diagnostics over frozen policies.
#[derive(Clone, Debug, Default)]
pub struct EvalStats {
    pub mean_return: f64,
    /// Mean per-episode count of simultaneous (2 or more agents) collections.
    pub co_collections_per_episode: f64,
}

/// Runs `count` evaluation episodes without learning.
pub fn evaluate_policies(
    env: &mut dyn Environment,
    policies: &crate::agents::PolicySet,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Result<EvalStats, TrainError> {
    let mut total_return = 0.0;
    let mut total_co = 0u64;
    for k in 0..count {
        let collected = collect_one(env, policies, rng, false)
            .map_err(|e| TrainError::new(k, e.phase, e.message))?;
        total_return += collected.episode.total_return();
        total_co += collected
            .collect_counts
            .iter()
            .skip(2)
            .sum::<u64>();
    }
    Ok(EvalStats {
        mean_return: total_return / count as f64,
        co_collections_per_episode: total_co as f64 / count as f64,
    })
}
