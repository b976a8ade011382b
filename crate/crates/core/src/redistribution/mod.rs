//! Reward redistribution: return-prediction models, their training loss,
//! Monte Carlo return targets, and difference-based contribution analysis
//! that turns return predictions into dense per-agent, per-timestep rewards.

mod model;

pub use model::{
    AtaForward, AtaModel, ModelConfig, RewardModel, RudderModel, SeqArch,
};

use crate::episode::Episode;
use crate::nn::graph::{Graph, Var};
use crate::nn::tensor::{NnError, Tensor};

/// Cross-agent feature aggregation modes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Aggregator {
    Mean,
    LinearAttention,
    MultiLayerAttention,
}

/// Which timesteps contribute to the prediction loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimestepLossMode {
    /// Only the final prediction.
    FinalOnly,
    /// Average over every timestep.
    AllTimesteps,
}

/// Loss weighting and retraining limits.
#[derive(Clone, Debug)]
pub struct RedistConfig {
    /// Weight of the local (per-agent) prediction loss in `[0, 1]`.
    pub lambda: f64,
    pub timestep_mode: TimestepLossMode,
    /// Retraining stops once the loss falls to this level.
    pub min_loss: f64,
    /// Hard cap on gradient steps per retraining.
    pub max_steps: usize,
}

impl Default for RedistConfig {
    fn default() -> Self {
        RedistConfig {
            lambda: 0.0,
            timestep_mode: TimestepLossMode::AllTimesteps,
            min_loss: 1e-3,
            max_steps: 200,
        }
    }
}

impl RedistConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(NnError::Config(format!(
                "lambda must lie in [0, 1], got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// Monte Carlo prediction targets for one episode.
///
/// The target at every prefix `t` is the total undiscounted episode return,
/// so with delayed rewards the sequence is constant and equals the terminal
/// emission. Local targets exist only when per-agent attribution is on.
#[derive(Clone, Debug, PartialEq)]
pub struct ReturnTargets {
    /// `[t]` global target.
    pub global: Vec<f64>,
    /// `[agent][t]` attributed targets, when available.
    pub local: Option<Vec<Vec<f64>>>,
}

/// Dense per-agent rewards derived from return predictions.
#[derive(Clone, Debug, PartialEq)]
pub struct RedistributedBatch {
    /// `[agent][t]` rewards; per agent the sequence telescopes to the final
    /// return prediction.
    pub rewards: Vec<Vec<f64>>,
}

/// Builds return targets from a recorded episode.
///
/// With `use_attribution`, the per-agent targets are each agent's attributed
/// episode total (the environments split simultaneous collections equally).
pub fn compute_return_targets(episode: &Episode, use_attribution: bool) -> ReturnTargets {
    let t = episode.len();
    let total = episode.total_return();
    let global = vec![total; t];
    let local = if use_attribution {
        episode.attributed.as_ref().map(|attr| {
            attr.iter()
                .map(|stream| {
                    let agent_total: f64 = stream.iter().sum();
                    vec![agent_total; t]
                })
                .collect()
        })
    } else {
        None
    };
    ReturnTargets { global, local }
}

/// Return predictions for one episode, as plain values.
#[derive(Clone, Debug, PartialEq)]
pub struct Predictions {
    /// `[agent][t]` local return predictions.
    pub local: Vec<Vec<f64>>,
    /// `[t]` global return predictions.
    pub global: Vec<f64>,
}

/// Squared-error prediction loss inside a graph:
/// `(1 - lambda) * ||global - target||^2 + lambda * ||local - target||^2`,
/// averaged over the included timesteps (and agents for the local term).
pub fn loss_graph(
    g: &mut Graph,
    local_preds: &[Var],
    global_pred: Var,
    targets: &ReturnTargets,
    config: &RedistConfig,
) -> Result<Var, NnError> {
    config.validate()?;
    let t = targets.global.len();
    if t == 0 {
        return Err(NnError::Dimension("loss: empty targets".into()));
    }

    let term = |g: &mut Graph, pred: Var, target: &[f64]| -> Result<Var, NnError> {
        if g.value(pred).rows() != target.len() || g.value(pred).cols() != 1 {
            return Err(NnError::Dimension(format!(
                "loss: prediction {:?} vs {} targets",
                g.value(pred).shape(),
                target.len()
            )));
        }
        let tgt = g.leaf(Tensor::new(vec![target.len(), 1], target.to_vec())?)?;
        let diff = g.sub(pred, tgt)?;
        let sq = g.mul(diff, diff)?;
        match config.timestep_mode {
            TimestepLossMode::AllTimesteps => g.mean(sq),
            TimestepLossMode::FinalOnly => g.row_slice(sq, target.len() - 1),
        }
    };

    let global_term = term(g, global_pred, &targets.global)?;
    if config.lambda == 0.0 {
        return g.scale(global_term, 1.0);
    }

    let locals = targets.local.as_ref().ok_or_else(|| {
        NnError::Config("lambda > 0 requires local targets (enable attribution)".into())
    })?;
    if locals.len() != local_preds.len() {
        return Err(NnError::Dimension(format!(
            "loss: {} local predictions vs {} local targets",
            local_preds.len(),
            locals.len()
        )));
    }
    let mut local_terms = Vec::with_capacity(local_preds.len());
    for (pred, target) in local_preds.iter().zip(locals) {
        local_terms.push(term(g, *pred, target)?);
    }
    let mut local_sum = local_terms[0];
    for &lt in &local_terms[1..] {
        local_sum = g.add(local_sum, lt)?;
    }
    let local_mean = g.scale(local_sum, 1.0 / local_terms.len() as f64)?;

    let weighted_global = g.scale(global_term, 1.0 - config.lambda)?;
    let weighted_local = g.scale(local_mean, config.lambda)?;
    g.add(weighted_global, weighted_local)
}

/// The prediction loss on plain values.
pub fn ata_loss(
    predictions: &Predictions,
    targets: &ReturnTargets,
    config: &RedistConfig,
) -> Result<f64, NnError> {
    let mut g = Graph::new();
    let mut local_vars = Vec::with_capacity(predictions.local.len());
    for stream in &predictions.local {
        local_vars.push(g.leaf(Tensor::new(vec![stream.len(), 1], stream.clone())?)?);
    }
    let global_var = g.leaf(Tensor::new(
        vec![predictions.global.len(), 1],
        predictions.global.clone(),
    )?)?;
    let loss = loss_graph(&mut g, &local_vars, global_var, targets, config)?;
    Ok(g.value(loss).data()[0])
}

/// Difference contribution analysis over per-agent return predictions.
///
/// `r[i][0] = p[i][0]` and `r[i][t] = p[i][t] - p[i][t-1]`, so the dense
/// rewards telescope exactly to the final prediction.
pub fn redistribute(local_predictions: &[Vec<f64>]) -> Result<RedistributedBatch, NnError> {
    let mut rewards = Vec::with_capacity(local_predictions.len());
    for preds in local_predictions {
        if preds.is_empty() {
            return Err(NnError::Dimension(
                "redistribute: empty prediction sequence".into(),
            ));
        }
        let mut stream = Vec::with_capacity(preds.len());
        stream.push(preds[0]);
        for t in 1..preds.len() {
            stream.push(preds[t] - preds[t - 1]);
        }
        rewards.push(stream);
    }
    Ok(RedistributedBatch { rewards })
}

/// Time-difference redistribution of a global prediction, with the same
/// stream handed to every agent (no agent-axis credit assignment).
pub fn rudder_redistribute(
    global_predictions: &[f64],
    n_agents: usize,
) -> Result<RedistributedBatch, NnError> {
    let single = redistribute(&[global_predictions.to_vec()])?;
    Ok(RedistributedBatch {
        rewards: vec![single.rewards[0].clone(); n_agents],
    })
}

/// Parameters for one aggregation inside a graph.
pub enum AggSpec {
    Mean,
    Linear { score: Var },
    MultiLayer { w_q: Var, w_k: Var, w_v: Var },
}

/// Combines per-agent `T x d` feature vars into one `T x d` team feature.
pub fn aggregate_graph(
    g: &mut Graph,
    features: &[Var],
    spec: &AggSpec,
) -> Result<Var, NnError> {
    if features.is_empty() {
        return Err(NnError::Dimension("aggregate: no agent features".into()));
    }
    let n = features.len();
    if n == 1 {
        // nothing to combine; every mode reduces to the single feature
        return Ok(features[0]);
    }
    match spec {
        AggSpec::Mean => {
            let mut acc = features[0];
            for &f in &features[1..] {
                acc = g.add(acc, f)?;
            }
            g.scale(acc, 1.0 / n as f64)
        }
        AggSpec::Linear { score } => {
            // learned per-agent scores, softmax across agents at each t
            let mut scores = Vec::with_capacity(n);
            for &f in features {
                scores.push(g.matmul(f, *score)?);
            }
            let stacked = g.concat_cols(&scores)?;
            let weights = g.softmax_rows(stacked)?;
            let mut acc: Option<Var> = None;
            for (i, &f) in features.iter().enumerate() {
                let w_i = g.slice_cols(weights, i, 1)?;
                let contrib = g.mul_col_broadcast(f, w_i)?;
                acc = Some(match acc {
                    Some(a) => g.add(a, contrib)?,
                    None => contrib,
                });
            }
            Ok(acc.expect("n >= 1"))
        }
        AggSpec::MultiLayer { w_q, w_k, w_v } => {
            // one unmasked self-attention layer across agents at each t,
            // then the mean over agents
            let t_len = g.value(features[0]).rows();
            let d = g.value(features[0]).cols();
            let ones = Tensor::full(&[n, n], 1.0);
            let mean_row = g.leaf(Tensor::full(&[1, n], 1.0 / n as f64))?;
            let mut out_rows = Vec::with_capacity(t_len);
            for t in 0..t_len {
                let mut rows = Vec::with_capacity(n);
                for &f in features {
                    rows.push(g.row_slice(f, t)?);
                }
                let x = g.concat_rows(&rows)?;
                let (z, _) =
                    crate::nn::attention::attention_graph(g, x, *w_q, *w_k, *w_v, &ones, d)?;
                out_rows.push(g.matmul(mean_row, z)?);
            }
            g.concat_rows(&out_rows)
        }
    }
}

/// Cross-agent aggregation on plain feature tensors.
pub enum AggregatorParams<'a> {
    Mean,
    LinearAttention { score: &'a Tensor },
    MultiLayerAttention { w_q: &'a Tensor, w_k: &'a Tensor, w_v: &'a Tensor },
}

pub fn aggregate_agents(
    features: &[Tensor],
    params: AggregatorParams<'_>,
) -> Result<Tensor, NnError> {
    let mut g = Graph::new();
    let vars: Vec<Var> = features
        .iter()
        .map(|f| g.leaf(f.clone()))
        .collect::<Result<_, _>>()?;
    let spec = match params {
        AggregatorParams::Mean => AggSpec::Mean,
        AggregatorParams::LinearAttention { score } => AggSpec::Linear {
            score: g.leaf(score.clone())?,
        },
        AggregatorParams::MultiLayerAttention { w_q, w_k, w_v } => AggSpec::MultiLayer {
            w_q: g.leaf(w_q.clone())?,
            w_k: g.leaf(w_k.clone())?,
            w_v: g.leaf(w_v.clone())?,
        },
    };
    let out = aggregate_graph(&mut g, &vars, &spec)?;
    Ok(g.value(out).clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn delayed_episode(terminal: f64, t: usize) -> Episode {
        let mut rewards = vec![0.0; t];
        rewards[t - 1] = terminal;
        Episode {
            obs: vec![vec![0; t * 2]; 2],
            actions: vec![vec![0; t]; 2],
            log_probs: vec![vec![0.0; t]; 2],
            rewards,
            attributed: Some(vec![
                {
                    let mut a = vec![0.0; t];
                    a[t - 1] = terminal * 0.75;
                    a
                },
                {
                    let mut a = vec![0.0; t];
                    a[t - 1] = terminal * 0.25;
                    a
                },
            ]),
            obs_len: 2,
            n_actions: 2,
        }
    }

    #[test]
    fn delayed_targets_are_constant_terminal_return() {
        let ep = delayed_episode(3.0, 200);
        let t = compute_return_targets(&ep, false);
        assert_eq!(t.global.len(), 200);
        assert!(t.global.iter().all(|&v| v == 3.0));
        assert!(t.local.is_none());
    }

    #[test]
    fn attribution_targets_use_agent_totals() {
        let ep = delayed_episode(4.0, 10);
        let t = compute_return_targets(&ep, true);
        let local = t.local.unwrap();
        assert!(local[0].iter().all(|&v| v == 3.0));
        assert!(local[1].iter().all(|&v| v == 1.0));
    }

    #[test]
    fn dense_rewards_target_total_sum() {
        let ep = Episode {
            rewards: vec![1.0, 0.0, 2.0],
            ..delayed_episode(0.0, 3)
        };
        let t = compute_return_targets(&ep, false);
        assert_eq!(t.global, vec![3.0, 3.0, 3.0]);
    }

    #[test]
    fn perfect_predictions_have_zero_loss() {
        let preds = Predictions {
            local: vec![vec![2.0, 2.0]],
            global: vec![2.0, 2.0],
        };
        let targets = ReturnTargets {
            global: vec![2.0, 2.0],
            local: Some(vec![vec![2.0, 2.0]]),
        };
        let loss = ata_loss(&preds, &targets, &RedistConfig::default()).unwrap();
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn lambda_zero_is_global_mse_alone() {
        let preds = Predictions {
            local: vec![vec![100.0, -50.0]],
            global: vec![1.0, 3.0],
        };
        let targets = ReturnTargets {
            global: vec![0.0, 0.0],
            local: None,
        };
        let cfg = RedistConfig::default();
        let loss = ata_loss(&preds, &targets, &cfg).unwrap();
        assert!((loss - (1.0 + 9.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn hand_computed_mixed_loss() {
        // lambda=0.5, T=1, n=1: 0.5 (Rhat - R)^2 + 0.5 (Rhat_1 - R_1)^2
        let preds = Predictions {
            local: vec![vec![1.5]],
            global: vec![2.0],
        };
        let targets = ReturnTargets {
            global: vec![3.0],
            local: Some(vec![vec![0.5]]),
        };
        let cfg = RedistConfig {
            lambda: 0.5,
            ..RedistConfig::default()
        };
        let loss = ata_loss(&preds, &targets, &cfg).unwrap();
        let expected = 0.5 * (2.0f64 - 3.0).powi(2) + 0.5 * (1.5f64 - 0.5).powi(2);
        assert!((loss - expected).abs() < 1e-12);
    }

    #[test]
    fn lambda_without_local_targets_is_config_error() {
        let preds = Predictions {
            local: vec![vec![0.0]],
            global: vec![0.0],
        };
        let targets = ReturnTargets {
            global: vec![1.0],
            local: None,
        };
        let cfg = RedistConfig {
            lambda: 0.3,
            ..RedistConfig::default()
        };
        assert!(matches!(
            ata_loss(&preds, &targets, &cfg),
            Err(NnError::Config(_))
        ));
    }

    #[test]
    fn final_only_mode_uses_last_timestep() {
        let preds = Predictions {
            local: vec![],
            global: vec![10.0, 1.0],
        };
        let targets = ReturnTargets {
            global: vec![0.0, 0.0],
            local: None,
        };
        let cfg = RedistConfig {
            timestep_mode: TimestepLossMode::FinalOnly,
            ..RedistConfig::default()
        };
        let loss = ata_loss(&preds, &targets, &cfg).unwrap();
        assert!((loss - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_predictions_put_all_credit_at_zero() {
        let batch = redistribute(&[vec![2.5, 2.5, 2.5]]).unwrap();
        assert_eq!(batch.rewards[0], vec![2.5, 0.0, 0.0]);
    }

    #[test]
    fn credit_lands_where_prediction_jumps() {
        let batch = redistribute(&[vec![0.0, 0.0, 5.0]]).unwrap();
        assert_eq!(batch.rewards[0], vec![0.0, 0.0, 5.0]);
    }

    #[test]
    fn empty_sequence_is_dimension_error() {
        assert!(matches!(
            redistribute(&[vec![]]),
            Err(NnError::Dimension(_))
        ));
    }

    #[test]
    fn rudder_streams_identical_across_agents() {
        let batch = rudder_redistribute(&[1.0, 4.0, 2.0], 3).unwrap();
        assert_eq!(batch.rewards.len(), 3);
        assert_eq!(batch.rewards[0], vec![1.0, 3.0, -2.0]);
        assert_eq!(batch.rewards[0], batch.rewards[1]);
        assert_eq!(batch.rewards[1], batch.rewards[2]);
    }

    #[test]
    fn singleton_aggregation_is_identity_for_every_mode() {
        let f = Tensor::from_rows(&[vec![1.0, -2.0], vec![0.5, 0.25]]).unwrap();
        let score = Tensor::from_rows(&[vec![0.3], vec![-0.8]]).unwrap();
        let w = Tensor::from_rows(&[vec![0.1, 0.2], vec![-0.3, 0.4]]).unwrap();
        for params in [
            AggregatorParams::Mean,
            AggregatorParams::LinearAttention { score: &score },
            AggregatorParams::MultiLayerAttention {
                w_q: &w,
                w_k: &w,
                w_v: &w,
            },
        ] {
            let out = aggregate_agents(std::slice::from_ref(&f), params).unwrap();
            match out.data().iter().zip(f.data()).all(|(a, b)| (a - b).abs() < 1e-12) {
                true => {}
                false => panic!("singleton aggregation changed the feature: {out:?}"),
            }
        }
    }

    #[test]
    fn mean_mode_averages() {
        let a = Tensor::from_rows(&[vec![2.0, 4.0]]).unwrap();
        let b = Tensor::from_rows(&[vec![0.0, 2.0]]).unwrap();
        let out = aggregate_agents(&[a, b], AggregatorParams::Mean).unwrap();
        assert_eq!(out.data(), &[1.0, 3.0]);
    }

    #[test]
    fn equal_score_linear_attention_equals_mean() {
        let a = Tensor::from_rows(&[vec![2.0, 4.0], vec![1.0, 1.0]]).unwrap();
        let b = Tensor::from_rows(&[vec![0.0, 2.0], vec![3.0, 5.0]]).unwrap();
        // zero score vector makes every agent's score identical
        let score = Tensor::zeros(&[2, 1]);
        let out = aggregate_agents(
            &[a.clone(), b.clone()],
            AggregatorParams::LinearAttention { score: &score },
        )
        .unwrap();
        let mean = aggregate_agents(&[a, b], AggregatorParams::Mean).unwrap();
        for (x, y) in out.data().iter().zip(mean.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
