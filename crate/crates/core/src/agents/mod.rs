//! Policy learners consuming either raw environment rewards or
//! redistributed per-agent rewards.

mod critic;
mod learner;
mod mlp;
mod policy;

pub use critic::{coma_advantage, CentralCritic, ValueNet};
pub use learner::{
    discounted_returns, IacLearner, IpgLearner, ComaLearner, LearnerConfig, PolicyLearner,
    RolloutBatch, UpdateStats,
};
pub use mlp::{softmax, Mlp};
pub use policy::{sample_actions, PolicyArch, PolicyNet, PolicySet, PolicyState, POLICY_HIDDEN};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::episode::Episode;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// One-step bandit episode: fixed observation, per-action reward.
    fn bandit_episode(action: usize, log_prob: f64, reward: f64) -> Episode {
        Episode {
            obs: vec![vec![1, 0]],
            actions: vec![vec![action]],
            log_probs: vec![vec![log_prob]],
            rewards: vec![reward],
            attributed: None,
            obs_len: 2,
            n_actions: 2,
        }
    }

    #[test]
    fn discounted_returns_hand_cases() {
        assert_eq!(discounted_returns(&[0.0, 0.0, 1.0], 1.0), vec![1.0, 1.0, 1.0]);
        assert_eq!(
            discounted_returns(&[0.0, 0.0, 1.0], 0.5),
            vec![0.25, 0.5, 1.0]
        );
        assert_eq!(discounted_returns(&[0.0, 0.0, 0.0], 0.9), vec![0.0; 3]);
    }

    #[test]
    fn zero_returns_leave_policy_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut learner = IpgLearner::new(
            1,
            2,
            2,
            PolicyArch::FeedForward,
            LearnerConfig::default(),
            &mut rng,
        );
        let before = learner.policies().nets[0].params.clone();
        let batch = RolloutBatch {
            episodes: vec![bandit_episode(0, -0.69, 0.0), bandit_episode(1, -0.69, 0.0)],
            rewards: vec![vec![vec![0.0]], vec![vec![0.0]]],
        };
        learner.update(&batch).unwrap();
        assert_eq!(learner.policies().nets[0].params, before);
    }

    #[test]
    fn positive_return_raises_sampled_action_probability() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut learner = IpgLearner::new(
            1,
            2,
            2,
            PolicyArch::FeedForward,
            LearnerConfig::default(),
            &mut rng,
        );
        let obs = vec![1u8, 0];
        let prob_of = |l: &IpgLearner| {
            let mut st = l.policies().nets[0].init_state();
            let logits = l.policies().nets[0].logits_infer(&obs, &mut st);
            softmax(&logits)[0]
        };
        let before = prob_of(&learner);
        let batch = RolloutBatch {
            episodes: vec![bandit_episode(0, -0.69, 1.0)],
            rewards: vec![vec![vec![1.0]]],
        };
        learner.update(&batch).unwrap();
        assert!(
            prob_of(&learner) > before,
            "sampled action probability must strictly increase"
        );
    }

    #[test]
    fn negative_return_lowers_sampled_action_probability() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut learner = IpgLearner::new(
            1,
            2,
            2,
            PolicyArch::FeedForward,
            LearnerConfig::default(),
            &mut rng,
        );
        let obs = vec![1u8, 0];
        let prob_of = |l: &IpgLearner| {
            let mut st = l.policies().nets[0].init_state();
            let logits = l.policies().nets[0].logits_infer(&obs, &mut st);
            softmax(&logits)[0]
        };
        let before = prob_of(&learner);
        let batch = RolloutBatch {
            episodes: vec![bandit_episode(0, -0.69, -1.0)],
            rewards: vec![vec![vec![-1.0]]],
        };
        learner.update(&batch).unwrap();
        assert!(prob_of(&learner) < before);
    }

    #[test]
    fn bandit_learns_rewarding_action() {
        // rewards: 1 for action 0, 0 for action 1; after 2,000 episodes the
        // policy should strongly prefer action 0, averaged over 6 seeds
        let mut final_probs = Vec::new();
        for seed in 0..6u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cfg = LearnerConfig {
                policy_lr: 5e-3,
                critic_lr: 1e-3,
                ..LearnerConfig::default()
            };
            let mut learner =
                IpgLearner::new(1, 2, 2, PolicyArch::FeedForward, cfg, &mut rng);
            let obs = vec![1u8, 0];
            let mut sample_rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let mut pending: Vec<Episode> = Vec::new();
            for _ in 0..2000 {
                let mut st = learner.policies().nets[0].init_state();
                let actions = sample_actions(
                    learner.policies(),
                    &[obs.clone()],
                    std::slice::from_mut(&mut st),
                    &mut sample_rng,
                )
                .unwrap();
                let (a, lp) = actions[0];
                let reward = if a == 0 { 1.0 } else { 0.0 };
                pending.push(bandit_episode(a, lp, reward));
                if pending.len() == 8 {
                    let batch = RolloutBatch {
                        rewards: pending.iter().map(|e| vec![e.rewards.clone()]).collect(),
                        episodes: std::mem::take(&mut pending),
                    };
                    learner.update(&batch).unwrap();
                }
            }
            let mut st = learner.policies().nets[0].init_state();
            let logits = learner.policies().nets[0].logits_infer(&obs, &mut st);
            final_probs.push(softmax(&logits)[0]);
        }
        let mean: f64 = final_probs.iter().sum::<f64>() / final_probs.len() as f64;
        assert!(mean > 0.9, "mean P(action 0) = {mean} ({final_probs:?})");
    }

    #[test]
    fn iac_critic_converges_on_constant_reward() {
        // constant reward 1, gamma = 0: TD(0) fixed point is 1
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = LearnerConfig {
            gamma: 0.0,
            critic_lr: 5e-3,
            ..LearnerConfig::default()
        };
        let mut learner = IacLearner::new(1, 2, 2, PolicyArch::FeedForward, cfg, &mut rng);
        let ep = Episode {
            obs: vec![vec![1, 0, 1, 0, 1, 0, 1, 0]], // T=4
            actions: vec![vec![0, 1, 0, 1]],
            log_probs: vec![vec![0.0; 4]],
            rewards: vec![1.0; 4],
            attributed: None,
            obs_len: 2,
            n_actions: 2,
        };
        for _ in 0..1000 {
            let batch = RolloutBatch {
                episodes: vec![ep.clone()],
                rewards: vec![vec![vec![1.0; 4]]],
            };
            learner.update(&batch).unwrap();
        }
        let v = learner.critic_value(0, &[1, 0]);
        assert!((v - 1.0).abs() < 0.05, "critic value {v}");
    }

    #[test]
    fn iac_zero_rewards_keep_critic_and_policy_at_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut learner = IacLearner::new(
            1,
            2,
            2,
            PolicyArch::FeedForward,
            LearnerConfig::default(),
            &mut rng,
        );
        let before = learner.policies().nets[0].params.clone();
        let ep = Episode {
            obs: vec![vec![1, 0, 0, 1]],
            actions: vec![vec![0, 1]],
            log_probs: vec![vec![0.0; 2]],
            rewards: vec![0.0; 2],
            attributed: None,
            obs_len: 2,
            n_actions: 2,
        };
        for _ in 0..50 {
            let batch = RolloutBatch {
                episodes: vec![ep.clone()],
                rewards: vec![vec![vec![0.0; 2]]],
            };
            learner.update(&batch).unwrap();
        }
        assert!(learner.critic_value(0, &[1, 0]).abs() < 0.01);
        assert_eq!(learner.policies().nets[0].params, before);
    }

    #[test]
    fn coma_single_agent_reduces_to_standard_advantage() {
        // with n=1 the counterfactual baseline is E_pi[Q]
        let q = [1.0, 2.0];
        let pi = [0.25, 0.75];
        let adv = coma_advantage(&q, &pi, 0).unwrap();
        let expected = 1.0 - (0.25 * 1.0 + 0.75 * 2.0);
        assert!((adv - expected).abs() < 1e-12);
    }

    #[test]
    fn coma_learns_matrix_game_optimum() {
        // 2-agent, 2-action matrix game; brute-force optimum is (0, 1)
        let payoff = [[0.2, 1.0], [0.0, 0.6]];
        let mut best = (0, 0);
        let mut best_val = f64::NEG_INFINITY;
        for a in 0..2 {
            for b in 0..2 {
                if payoff[a][b] > best_val {
                    best_val = payoff[a][b];
                    best = (a, b);
                }
            }
        }

        let mut wins = 0;
        for seed in 0..6u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(10 + seed);
            let cfg = LearnerConfig {
                policy_lr: 5e-3,
                critic_lr: 2e-3,
                ..LearnerConfig::default()
            };
            let mut learner = ComaLearner::new(2, 2, 2, PolicyArch::FeedForward, cfg, &mut rng);
            let obs = vec![1u8, 0];
            let mut sample_rng = ChaCha8Rng::seed_from_u64(300 + seed);
            let mut pending: Vec<Episode> = Vec::new();
            for _ in 0..5000 {
                let mut states = learner.policies().init_states();
                let acts = sample_actions(
                    learner.policies(),
                    &[obs.clone(), obs.clone()],
                    &mut states,
                    &mut sample_rng,
                )
                .unwrap();
                let reward = payoff[acts[0].0][acts[1].0];
                pending.push(Episode {
                    obs: vec![vec![1, 0], vec![1, 0]],
                    actions: vec![vec![acts[0].0], vec![acts[1].0]],
                    log_probs: vec![vec![acts[0].1], vec![acts[1].1]],
                    rewards: vec![reward],
                    attributed: None,
                    obs_len: 2,
                    n_actions: 2,
                });
                if pending.len() == 8 {
                    let batch = RolloutBatch {
                        rewards: pending
                            .iter()
                            .map(|e| vec![e.rewards.clone(), e.rewards.clone()])
                            .collect(),
                        episodes: std::mem::take(&mut pending),
                    };
                    learner.update(&batch).unwrap();
                }
            }
            let greedy: Vec<usize> = (0..2)
                .map(|i| {
                    let mut st = learner.policies().nets[i].init_state();
                    let logits = learner.policies().nets[i].logits_infer(&obs, &mut st);
                    if logits[0] >= logits[1] {
                        0
                    } else {
                        1
                    }
                })
                .collect();
            if (greedy[0], greedy[1]) == best {
                wins += 1;
            }
        }
        assert!(
            wins >= 5,
            "greedy joint action matched optimum in only {wins}/6 seeds"
        );
    }

    #[test]
    fn reward_source_is_transparent_to_learners() {
        // identical streams, different provenance: parameter deltas match
        let make = || {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            IpgLearner::new(
                1,
                2,
                2,
                PolicyArch::FeedForward,
                LearnerConfig::default(),
                &mut rng,
            )
        };
        let mut from_env = make();
        let mut from_model = make();
        let ep = bandit_episode(0, -0.69, 1.0);
        let env_stream = vec![vec![ep.rewards.clone()]];
        let model_stream = vec![vec![vec![1.0]]]; // same numbers, other source
        from_env
            .update(&RolloutBatch {
                episodes: vec![ep.clone()],
                rewards: env_stream,
            })
            .unwrap();
        from_model
            .update(&RolloutBatch {
                episodes: vec![ep],
                rewards: model_stream,
            })
            .unwrap();
        assert_eq!(
            from_env.policies().nets[0].params,
            from_model.policies().nets[0].params
        );
    }
}
