//! Return-prediction models.
//!
//! The agent-time model encodes each agent's observation-action sequence,
//! applies one layer of causally masked multi-head attention along time
//! (per agent), and decodes per-agent return predictions; an aggregate of
//! the post-attention features feeds the same decoder for the global
//! prediction. The baseline model runs one sequence network over the
//! concatenation of all agents' inputs and predicts global returns only.

use super::{
    aggregate_graph, loss_graph, AggSpec, Aggregator, Predictions, RedistConfig,
    RedistributedBatch, ReturnTargets,
};
use crate::episode::Episode;
use crate::nn::attention::{multi_head_graph_vars, AttnMask};
use crate::nn::graph::{Graph, Var};
use crate::nn::lstm::{lstm_sequence, LstmIds};
use crate::nn::params::{BoundParams, LinearIds, ParamId, ParamSet};
use crate::nn::positional::positional_encoding;
use crate::nn::tensor::{NnError, Tensor};
use crate::nn::{adam_step, clip_grad_norm, OptimizerState};
use rand::Rng;

/// Sequence backbone choice.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeqArch {
    Transformer,
    Lstm,
}

/// Architecture hyperparameters shared by both models.
#[derive(Clone, Debug)]
pub struct ModelConfig {
    /// Width of one input row (observation + action one-hot).
    pub input_dim: usize,
    /// Latent width after the encoder (and LSTM hidden size).
    pub latent: usize,
    pub heads: usize,
    pub arch: SeqArch,
    pub aggregator: Aggregator,
    /// Residual connection around the attention layer.
    pub residual: bool,
    /// Row-wise layer normalization after the attention layer.
    pub layer_norm: bool,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        if self.latent == 0 || self.latent % 2 != 0 {
            return Err(NnError::Config(format!(
                "latent width must be positive and even, got {}",
                self.latent
            )));
        }
        if self.heads == 0 || self.latent % self.heads != 0 {
            return Err(NnError::Config(format!(
                "latent {} not divisible by heads {}",
                self.latent, self.heads
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
struct AttnIds {
    w_q: ParamId,
    w_k: ParamId,
    w_v: ParamId,
    out: LinearIds,
}

impl AttnIds {
    fn init<R: Rng>(params: &mut ParamSet, prefix: &str, d: usize, rng: &mut R) -> Self {
        use crate::nn::params::init_matrix;
        AttnIds {
            w_q: params.add(&format!("{prefix}.w_q"), init_matrix(rng, d, d, d)),
            w_k: params.add(&format!("{prefix}.w_k"), init_matrix(rng, d, d, d)),
            w_v: params.add(&format!("{prefix}.w_v"), init_matrix(rng, d, d, d)),
            out: LinearIds::init(params, &format!("{prefix}.out"), d, d, rng),
        }
    }
}

/// Shared per-agent sequence backbone: encoder + attention or LSTM.
#[derive(Clone, Debug)]
struct Backbone {
    enc: LinearIds,
    attn: Option<AttnIds>,
    lstm: Option<LstmIds>,
}

impl Backbone {
    fn init<R: Rng>(params: &mut ParamSet, cfg: &ModelConfig, rng: &mut R) -> Self {
        let enc = LinearIds::init(params, "enc", cfg.input_dim, cfg.latent, rng);
        match cfg.arch {
            SeqArch::Transformer => Backbone {
                enc,
                attn: Some(AttnIds::init(params, "attn", cfg.latent, rng)),
                lstm: None,
            },
            SeqArch::Lstm => Backbone {
                enc,
                attn: None,
                lstm: Some(LstmIds::init(params, "lstm", cfg.latent, cfg.latent, rng)),
            },
        }
    }

    /// Per-agent features for one `T x input_dim` input leaf.
    fn features(
        &self,
        g: &mut Graph,
        bound: &BoundParams,
        x: Var,
        cfg: &ModelConfig,
        shared: &SharedSeq,
    ) -> Result<(Var, Vec<Var>), NnError> {
        let encoded = self.enc.apply(g, bound, x)?;
        let latent = g.tanh(encoded)?;
        match (&self.attn, &self.lstm) {
            (Some(attn), None) => {
                let with_pe = g.add(latent, shared.pe.expect("transformer has pe"))?;
                let (feat, weights) = multi_head_graph_vars(
                    g,
                    with_pe,
                    bound.var(attn.w_q),
                    bound.var(attn.w_k),
                    bound.var(attn.w_v),
                    bound.var(attn.out.w),
                    bound.var(attn.out.b),
                    cfg.heads,
                    AttnMask::Causal,
                )?;
                let mut out = feat;
                if cfg.residual {
                    out = g.add(with_pe, out)?;
                }
                if cfg.layer_norm {
                    out = g.layer_norm_rows(out)?;
                }
                Ok((out, weights))
            }
            (None, Some(lstm)) => {
                let t = g.value(latent).rows();
                let mut steps = Vec::with_capacity(t);
                for r in 0..t {
                    steps.push(g.row_slice(latent, r)?);
                }
                let hidden = lstm_sequence(g, &steps, lstm, bound)?;
                let feat = g.concat_rows(&hidden)?;
                Ok((feat, Vec::new()))
            }
            _ => unreachable!("backbone has exactly one sequence layer"),
        }
    }
}

/// Per-forward shared leaves (positional encoding).
struct SharedSeq {
    pe: Option<Var>,
}

impl SharedSeq {
    fn build(g: &mut Graph, cfg: &ModelConfig, t: usize) -> Result<Self, NnError> {
        match cfg.arch {
            SeqArch::Transformer => Ok(SharedSeq {
                pe: Some(g.leaf(positional_encoding(t, cfg.latent)?)?),
            }),
            SeqArch::Lstm => Ok(SharedSeq { pe: None }),
        }
    }
}

/// Agent-time return-prediction model.
pub struct AtaModel {
    pub cfg: ModelConfig,
    pub params: ParamSet,
    backbone: Backbone,
    dec: LinearIds,
    agg_score: Option<ParamId>,
    agg_attn: Option<AttnIds>,
}

/// Forward vars for one episode.
pub struct AtaForward {
    /// `[agent]` local return predictions, each `T x 1`.
    pub local: Vec<Var>,
    /// Global return predictions, `T x 1`.
    pub global: Var,
    /// `[agent][head]` attention weight matrices (transformer arch only).
    pub attention: Vec<Vec<Var>>,
}

impl AtaModel {
    pub fn new<R: Rng>(cfg: ModelConfig, rng: &mut R) -> Result<Self, NnError> {
        cfg.validate()?;
        let mut params = ParamSet::new();
        let backbone = Backbone::init(&mut params, &cfg, rng);
        let dec = LinearIds::init(&mut params, "dec", cfg.latent, 1, rng);
        let agg_score = match cfg.aggregator {
            Aggregator::LinearAttention => Some(params.add(
                "agg.score",
                crate::nn::params::init_matrix(rng, cfg.latent, 1, cfg.latent),
            )),
            _ => None,
        };
        let agg_attn = match cfg.aggregator {
            Aggregator::MultiLayerAttention => {
                Some(AttnIds::init(&mut params, "agg", cfg.latent, rng))
            }
            _ => None,
        };
        Ok(AtaModel {
            cfg,
            params,
            backbone,
            dec,
            agg_score,
            agg_attn,
        })
    }

    /// Builds the forward pass for one episode's per-agent input matrices.
    pub fn forward_graph(
        &self,
        g: &mut Graph,
        bound: &BoundParams,
        inputs: &[Tensor],
        shared: Option<&SharedSeqHandle>,
    ) -> Result<AtaForward, NnError> {
        if inputs.is_empty() {
            return Err(NnError::Dimension("forward: no agents".into()));
        }
        let t = inputs[0].rows();
        for x in inputs {
            if x.rows() != t {
                return Err(NnError::Dimension(
                    "forward: agents disagree on episode length".into(),
                ));
            }
            if x.cols() != self.cfg.input_dim {
                return Err(NnError::Dimension(format!(
                    "forward: input width {} vs configured {}",
                    x.cols(),
                    self.cfg.input_dim
                )));
            }
        }
        let owned;
        let shared = match shared {
            Some(h) => {
                if h.t != t {
                    return Err(NnError::Dimension(
                        "forward: shared leaves built for a different length".into(),
                    ));
                }
                &h.inner
            }
            None => {
                owned = SharedSeq::build(g, &self.cfg, t)?;
                &owned
            }
        };

        let mut features = Vec::with_capacity(inputs.len());
        let mut attention = Vec::with_capacity(inputs.len());
        for x in inputs {
            let leaf = g.leaf(x.clone())?;
            let (feat, weights) = self.backbone.features(g, bound, leaf, &self.cfg, shared)?;
            features.push(feat);
            attention.push(weights);
        }

        let mut local = Vec::with_capacity(features.len());
        for &f in &features {
            local.push(self.dec.apply(g, bound, f)?);
        }

        let agg_spec = match self.cfg.aggregator {
            Aggregator::Mean => AggSpec::Mean,
            Aggregator::LinearAttention => AggSpec::Linear {
                score: bound.var(self.agg_score.expect("linear aggregator params")),
            },
            Aggregator::MultiLayerAttention => {
                let ids = self.agg_attn.expect("multi-layer aggregator params");
                AggSpec::MultiLayer {
                    w_q: bound.var(ids.w_q),
                    w_k: bound.var(ids.w_k),
                    w_v: bound.var(ids.w_v),
                }
            }
        };
        let team = aggregate_graph(g, &features, &agg_spec)?;
        let global = self.dec.apply(g, bound, team)?;
        Ok(AtaForward {
            local,
            global,
            attention,
        })
    }

    /// Prepares the shared leaves once for a batch of equal-length episodes.
    pub fn shared_leaves(&self, g: &mut Graph, t: usize) -> Result<SharedSeqHandle, NnError> {
        Ok(SharedSeqHandle {
            t,
            inner: SharedSeq::build(g, &self.cfg, t)?,
        })
    }

    /// Local and global return predictions for one episode.
    pub fn predict(&self, episode: &Episode) -> Result<Predictions, NnError> {
        let inputs: Vec<Tensor> = (0..episode.n_agents())
            .map(|i| episode.model_input_matrix(i))
            .collect();
        let mut g = Graph::new();
        let bound = g.bind(&self.params)?;
        let fwd = self.forward_graph(&mut g, &bound, &inputs, None)?;
        Ok(Predictions {
            local: fwd
                .local
                .iter()
                .map(|&v| g.value(v).data().to_vec())
                .collect(),
            global: g.value(fwd.global).data().to_vec(),
        })
    }
}

/// Opaque handle for shared per-batch leaves.
pub struct SharedSeqHandle {
    t: usize,
    inner: SharedSeq,
}

/// Team-input baseline model: one sequence network over the concatenated
/// observation-action vectors of all agents, predicting global returns only.
pub struct RudderModel {
    pub cfg: ModelConfig,
    pub params: ParamSet,
    backbone: RudderBackbone,
    dec: LinearIds,
}

enum RudderBackbone {
    /// Encoder + positional encoding + masked attention, like the agent-time
    /// model but over the single concatenated stream.
    Transformer(Backbone),
    /// LSTM directly over the raw concatenated input.
    Lstm(LstmIds),
}

impl RudderModel {
    pub fn new<R: Rng>(cfg: ModelConfig, rng: &mut R) -> Result<Self, NnError> {
        cfg.validate()?;
        let mut params = ParamSet::new();
        let backbone = match cfg.arch {
            SeqArch::Transformer => RudderBackbone::Transformer(Backbone::init(&mut params, &cfg, rng)),
            SeqArch::Lstm => RudderBackbone::Lstm(LstmIds::init(
                &mut params,
                "lstm",
                cfg.input_dim,
                cfg.latent,
                rng,
            )),
        };
        let dec = LinearIds::init(&mut params, "dec", cfg.latent, 1, rng);
        Ok(RudderModel {
            cfg,
            params,
            backbone,
            dec,
        })
    }

    /// Concatenated team input for one episode: `T x (n * input_width)`.
    pub fn team_input(episode: &Episode) -> Tensor {
        let n = episode.n_agents();
        let t = episode.len();
        let w = episode.model_input_width();
        let mut data = vec![0.0; t * n * w];
        for i in 0..n {
            let m = episode.model_input_matrix(i);
            for step in 0..t {
                let dst = step * n * w + i * w;
                data[dst..dst + w].copy_from_slice(m.row(step));
            }
        }
        Tensor::new(vec![t, n * w], data).expect("sized above")
    }

    /// Global prediction vars for a batch of equal-length team inputs.
    ///
    /// The LSTM backbone runs the episodes in lockstep (one `B x d` matrix
    /// per step); the transformer backbone loops episodes.
    pub fn forward_batch_graph(
        &self,
        g: &mut Graph,
        bound: &BoundParams,
        inputs: &[Tensor],
    ) -> Result<Vec<Var>, NnError> {
        if inputs.is_empty() {
            return Err(NnError::Dimension("forward: empty batch".into()));
        }
        let t = inputs[0].rows();
        for x in inputs {
            if x.rows() != t || x.cols() != self.cfg.input_dim {
                return Err(NnError::Dimension(format!(
                    "forward: input {:?}, expected {} x {}",
                    x.shape(),
                    t,
                    self.cfg.input_dim
                )));
            }
        }
        match &self.backbone {
            RudderBackbone::Transformer(backbone) => {
                let shared = SharedSeq::build(g, &self.cfg, t)?;
                let mut preds = Vec::with_capacity(inputs.len());
                for x in inputs {
                    let leaf = g.leaf(x.clone())?;
                    let (feat, _) = backbone.features(g, bound, leaf, &self.cfg, &shared)?;
                    preds.push(self.dec.apply(g, bound, feat)?);
                }
                Ok(preds)
            }
            RudderBackbone::Lstm(lstm) => {
                let b = inputs.len();
                let d = self.cfg.input_dim;
                let mut steps = Vec::with_capacity(t);
                for step in 0..t {
                    let mut data = Vec::with_capacity(b * d);
                    for x in inputs {
                        data.extend_from_slice(x.row(step));
                    }
                    steps.push(g.leaf(Tensor::new(vec![b, d], data)?)?);
                }
                let hidden = lstm_sequence(g, &steps, lstm, bound)?;
                // decode each step, then split the B column streams
                let mut per_step = Vec::with_capacity(t);
                for &h in &hidden {
                    per_step.push(self.dec.apply(g, bound, h)?);
                }
                let all = g.concat_cols(&per_step)?; // B x T
                let mut preds = Vec::with_capacity(b);
                for e in 0..b {
                    let row = g.row_slice(all, e)?; // 1 x T
                    // transpose to T x 1 via per-column picks
                    let mut cols = Vec::with_capacity(t);
                    for step in 0..t {
                        cols.push(g.slice_cols(row, step, 1)?);
                    }
                    preds.push(g.concat_rows(&cols)?);
                }
                Ok(preds)
            }
        }
    }

    /// Global return predictions for one episode.
    pub fn predict_global(&self, episode: &Episode) -> Result<Vec<f64>, NnError> {
        let input = Self::team_input(episode);
        let mut g = Graph::new();
        let bound = g.bind(&self.params)?;
        let preds = self.forward_batch_graph(&mut g, &bound, std::slice::from_ref(&input))?;
        Ok(g.value(preds[0]).data().to_vec())
    }
}

/// Either reward-redistribution model behind one training/inference surface.
pub enum RewardModel {
    Ata(AtaModel),
    Rudder(RudderModel),
}

impl RewardModel {
    pub fn params(&self) -> &ParamSet {
        match self {
            RewardModel::Ata(m) => &m.params,
            RewardModel::Rudder(m) => &m.params,
        }
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        match self {
            RewardModel::Ata(m) => &mut m.params,
            RewardModel::Rudder(m) => &mut m.params,
        }
    }

    /// Builds the mean batch loss node for a set of episodes.
    fn batch_loss(
        &self,
        g: &mut Graph,
        episodes: &[&Episode],
        cfg: &RedistConfig,
        attribution: bool,
    ) -> Result<(Var, BoundParams), NnError> {
        if episodes.is_empty() {
            return Err(NnError::Dimension("batch loss: empty batch".into()));
        }
        let targets: Vec<ReturnTargets> = episodes
            .iter()
            .map(|ep| super::compute_return_targets(ep, attribution))
            .collect();
        match self {
            RewardModel::Ata(model) => {
                let bound = g.bind(&model.params)?;
                let t = episodes[0].len();
                let shared = model.shared_leaves(g, t)?;
                let mut per_episode = Vec::with_capacity(episodes.len());
                for (ep, tgt) in episodes.iter().zip(&targets) {
                    let inputs: Vec<Tensor> = (0..ep.n_agents())
                        .map(|i| ep.model_input_matrix(i))
                        .collect();
                    let fwd = model.forward_graph(g, &bound, &inputs, Some(&shared))?;
                    per_episode.push(loss_graph(g, &fwd.local, fwd.global, tgt, cfg)?);
                }
                Ok((mean_of(g, &per_episode)?, bound))
            }
            RewardModel::Rudder(model) => {
                let bound = g.bind(&model.params)?;
                let inputs: Vec<Tensor> =
                    episodes.iter().map(|ep| RudderModel::team_input(ep)).collect();
                let preds = model.forward_batch_graph(g, &bound, &inputs)?;
                // baseline trains on the global term only
                let rudder_cfg = RedistConfig {
                    lambda: 0.0,
                    ..cfg.clone()
                };
                let mut per_episode = Vec::with_capacity(episodes.len());
                for (pred, tgt) in preds.iter().zip(&targets) {
                    per_episode.push(loss_graph(g, &[], *pred, tgt, &rudder_cfg)?);
                }
                Ok((mean_of(g, &per_episode)?, bound))
            }
        }
    }

    /// Computes the batch loss and takes one optimizer step unless the loss
    /// is already at or below `skip_below`. Returns `(loss, stepped)`.
    pub fn train_step(
        &mut self,
        episodes: &[&Episode],
        cfg: &RedistConfig,
        attribution: bool,
        opt: &mut OptimizerState,
        grad_clip: f64,
        skip_below: f64,
    ) -> Result<(f64, bool), NnError> {
        let mut g = Graph::new();
        let (loss, bound) = self.batch_loss(&mut g, episodes, cfg, attribution)?;
        let loss_value = g.value(loss).data()[0];
        if loss_value <= skip_below {
            return Ok((loss_value, false));
        }
        let grads = g.backward(loss)?;
        let mut grad_vec = grads.for_params(&bound, &g);
        clip_grad_norm(&mut grad_vec, grad_clip);
        adam_step(self.params_mut(), &grad_vec, opt)?;
        Ok((loss_value, true))
    }

    /// Loss on a batch without updating parameters.
    pub fn eval_loss(
        &self,
        episodes: &[&Episode],
        cfg: &RedistConfig,
        attribution: bool,
    ) -> Result<f64, NnError> {
        let mut g = Graph::new();
        let (loss, _) = self.batch_loss(&mut g, episodes, cfg, attribution)?;
        Ok(g.value(loss).data()[0])
    }

    /// Dense per-agent rewards for one episode under the current parameters.
    ///
    /// With `residual_correction`, the gap between the actual episode return
    /// and the final global prediction is spread uniformly over every
    /// agent's timesteps.
    pub fn redistribute_episode(
        &self,
        episode: &Episode,
        residual_correction: bool,
    ) -> Result<RedistributedBatch, NnError> {
        let (mut batch, final_global) = match self {
            RewardModel::Ata(model) => {
                let preds = model.predict(episode)?;
                let final_global = *preds.global.last().unwrap_or(&0.0);
                (super::redistribute(&preds.local)?, final_global)
            }
            RewardModel::Rudder(model) => {
                let preds = model.predict_global(episode)?;
                let final_global = *preds.last().unwrap_or(&0.0);
                (
                    super::rudder_redistribute(&preds, episode.n_agents())?,
                    final_global,
                )
            }
        };
        if residual_correction {
            let t = episode.len() as f64;
            let delta = (episode.total_return() - final_global) / t;
            for stream in &mut batch.rewards {
                for r in stream.iter_mut() {
                    *r += delta;
                }
            }
        }
        Ok(batch)
    }
}

fn mean_of(g: &mut Graph, terms: &[Var]) -> Result<Var, NnError> {
    let mut acc = terms[0];
    for &t in &terms[1..] {
        acc = g.add(acc, t)?;
    }
    g.scale(acc, 1.0 / terms.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_config(arch: SeqArch) -> ModelConfig {
        ModelConfig {
            input_dim: 6,
            latent: 4,
            heads: 2,
            arch,
            aggregator: Aggregator::Mean,
            residual: false,
            layer_norm: false,
        }
    }

    fn tiny_episode(n: usize, t: usize, terminal: f64, seed: u64) -> Episode {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let obs_len = 4;
        let mut rewards = vec![0.0; t];
        rewards[t - 1] = terminal;
        Episode {
            obs: (0..n)
                .map(|_| (0..t * obs_len).map(|_| rng.gen_range(0..2) as u8).collect())
                .collect(),
            actions: (0..n).map(|_| (0..t).map(|_| rng.gen_range(0..2)).collect()).collect(),
            log_probs: vec![vec![0.0; t]; n],
            rewards,
            attributed: None,
            obs_len,
            n_actions: 2,
        }
    }

    #[test]
    fn zero_weights_predict_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut model = AtaModel::new(tiny_config(SeqArch::Transformer), &mut rng).unwrap();
        for t in model.params.tensors_mut() {
            for v in t.data_mut() {
                *v = 0.0;
            }
        }
        let ep = tiny_episode(2, 5, 3.0, 1);
        let preds = model.predict(&ep).unwrap();
        assert!(preds.global.iter().all(|&v| v == 0.0));
        assert!(preds.local.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn future_perturbation_leaves_prefix_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let model = AtaModel::new(tiny_config(SeqArch::Transformer), &mut rng).unwrap();
        let ep_a = tiny_episode(2, 6, 1.0, 3);
        let mut ep_b = ep_a.clone();
        // perturb the last two observation rows of both agents
        for agent in 0..2 {
            let start = 4 * ep_b.obs_len;
            for v in &mut ep_b.obs[agent][start..] {
                *v ^= 1;
            }
            ep_b.actions[agent][5] = 1 - ep_b.actions[agent][5];
        }
        let pa = model.predict(&ep_a).unwrap();
        let pb = model.predict(&ep_b).unwrap();
        for t in 0..4 {
            assert!(
                (pa.global[t] - pb.global[t]).abs() < 1e-12,
                "global prediction at t={t} changed"
            );
            for i in 0..2 {
                assert!((pa.local[i][t] - pb.local[i][t]).abs() < 1e-12);
            }
        }
        assert!(
            (pa.global[5] - pb.global[5]).abs() > 1e-9,
            "perturbation should reach the final step"
        );
    }

    #[test]
    fn mean_aggregation_matches_decoded_average_for_shared_decoder() {
        // with aggregator = mean and a linear decoder, the global prediction
        // equals the mean of the local predictions
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let model = AtaModel::new(tiny_config(SeqArch::Transformer), &mut rng).unwrap();
        let ep = tiny_episode(2, 5, 2.0, 5);
        let preds = model.predict(&ep).unwrap();
        for t in 0..5 {
            let mean = (preds.local[0][t] + preds.local[1][t]) / 2.0;
            assert!((preds.global[t] - mean).abs() < 1e-10);
        }
    }

    #[test]
    fn rudder_truncation_causality() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let model = RudderModel::new(
            ModelConfig {
                input_dim: 2 * 6,
                ..tiny_config(SeqArch::Lstm)
            },
            &mut rng,
        )
        .unwrap();
        let ep = tiny_episode(2, 6, 1.5, 7);
        let full = model.predict_global(&ep).unwrap();
        // truncate to the first 3 steps
        let mut short = ep.clone();
        for agent in 0..2 {
            short.obs[agent].truncate(3 * short.obs_len);
            short.actions[agent].truncate(3);
            short.log_probs[agent].truncate(3);
        }
        short.rewards.truncate(3);
        let truncated = model.predict_global(&short).unwrap();
        for t in 0..3 {
            assert!((full[t] - truncated[t]).abs() < 1e-12);
        }
    }

    #[test]
    fn training_reduces_loss_on_fixed_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let model = AtaModel::new(tiny_config(SeqArch::Transformer), &mut rng).unwrap();
        let mut rm = RewardModel::Ata(model);
        let episodes: Vec<Episode> = (0..4)
            .map(|k| tiny_episode(2, 5, if k % 2 == 0 { 1.0 } else { 0.0 }, 10 + k))
            .collect();
        let refs: Vec<&Episode> = episodes.iter().collect();
        let cfg = RedistConfig::default();
        let mut opt = OptimizerState::new(rm.params(), 1e-2);
        let first = rm.eval_loss(&refs, &cfg, false).unwrap();
        for _ in 0..100 {
            rm.train_step(&refs, &cfg, false, &mut opt, 5.0, 0.0).unwrap();
        }
        let last = rm.eval_loss(&refs, &cfg, false).unwrap();
        assert!(
            last < 0.5 * first,
            "loss should at least halve: {first} -> {last}"
        );
    }

    #[test]
    fn residual_correction_restores_actual_return() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let model = RudderModel::new(
            ModelConfig {
                input_dim: 2 * 6,
                ..tiny_config(SeqArch::Lstm)
            },
            &mut rng,
        )
        .unwrap();
        let rm = RewardModel::Rudder(model);
        let ep = tiny_episode(2, 5, 2.0, 12);
        let corrected = rm.redistribute_episode(&ep, true).unwrap();
        for stream in &corrected.rewards {
            let sum: f64 = stream.iter().sum();
            assert!((sum - ep.total_return()).abs() < 1e-9);
        }
    }
}
