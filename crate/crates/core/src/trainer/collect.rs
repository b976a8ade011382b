//! Rollout collection with frozen policies.

use super::TrainError;
use crate::agents::{sample_actions, PolicySet};
use crate::envs::Environment;
use crate::episode::Episode;
use rand_chacha::ChaCha8Rng;

/// One complete episode plus per-episode environment diagnostics.
pub struct Collected {
    pub episode: Episode,
    /// Index `j` counts `j`-agent simultaneous coin collections.
    pub collect_counts: Vec<u64>,
}

/// Runs one full episode of exactly `horizon` steps.
pub fn collect_one(
    env: &mut dyn Environment,
    policies: &PolicySet,
    rng: &mut ChaCha8Rng,
    record_attribution: bool,
) -> Result<Collected, TrainError> {
    let spec = env.spec().clone();
    let n = spec.n_agents;
    let horizon = spec.horizon;
    let mut observations = env.reset();
    let mut states = policies.init_states();

    let mut obs = vec![Vec::with_capacity(horizon * spec.obs_len); n];
    let mut actions = vec![Vec::with_capacity(horizon); n];
    let mut log_probs = vec![Vec::with_capacity(horizon); n];
    let mut rewards = Vec::with_capacity(horizon);

    for step in 0..horizon {
        let sampled = sample_actions(policies, &observations, &mut states, rng)
            .map_err(|e| TrainError::new(step, "sample", e.to_string()))?;
        let joint: Vec<_> = sampled
            .iter()
            .map(|&(a, _)| spec.action_set[a])
            .collect();
        for i in 0..n {
            obs[i].extend_from_slice(&observations[i]);
            actions[i].push(sampled[i].0);
            log_probs[i].push(sampled[i].1);
        }
        let result = env
            .step(&joint)
            .map_err(|e| TrainError::new(step, "env step", e.to_string()))?;
        rewards.push(result.reward);
        observations = result.observations;
        if result.done {
            break;
        }
    }

    let attributed = if record_attribution {
        let totals = env.attributed_totals();
        let t = rewards.len();
        Some(
            totals
                .into_iter()
                .map(|total| {
                    let mut stream = vec![0.0; t];
                    stream[t - 1] = total;
                    stream
                })
                .collect(),
        )
    } else {
        None
    };

    Ok(Collected {
        episode: Episode {
            obs,
            actions,
            log_probs,
            rewards,
            attributed,
            obs_len: spec.obs_len,
            n_actions: spec.n_actions(),
        },
        collect_counts: env.state().collect_counts.clone(),
    })
}

/// Collects `count` complete episodes with frozen policies.
pub fn collect_rollouts(
    env: &mut dyn Environment,
    policies: &PolicySet,
    count: usize,
    rng: &mut ChaCha8Rng,
    record_attribution: bool,
) -> Result<Vec<Episode>, TrainError> {
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let collected = collect_one(env, policies, rng, record_attribution)
            .map_err(|e| TrainError::new(k, e.phase, e.message))?;
        out.push(collected.episode);
    }
    Ok(out)
}
