//! Per-agent stochastic policies over discrete actions.

use super::mlp::{softmax, Mlp};
use crate::envs::AgentObservation;
use crate::nn::graph::{Graph, Var};
use crate::nn::lstm::{lstm_sequence, LstmIds};
use crate::nn::params::{BoundParams, LinearIds, ParamSet};
use crate::nn::tensor::NnError;
use rand::Rng;

/// Hidden width of the policy trunk.
pub const POLICY_HIDDEN: usize = 64;

/// Trunk architecture.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolicyArch {
    /// Two tanh hidden layers on the current observation.
    FeedForward,
    /// One tanh layer, an LSTM cell, then the linear head.
    Recurrent,
}

/// One agent's policy network. The logits head starts at zero, so a fresh
/// policy is exactly uniform.
pub struct PolicyNet {
    pub params: ParamSet,
    arch: PolicyArch,
    mlp: Option<Mlp>,
    embed: Option<LinearIds>,
    lstm: Option<LstmIds>,
    head: Option<LinearIds>,
    obs_len: usize,
    n_actions: usize,
}

/// Recurrent sampling state (hidden and cell vectors).
#[derive(Clone, Debug, Default)]
pub struct PolicyState {
    h: Vec<f64>,
    c: Vec<f64>,
}

impl PolicyNet {
    pub fn new<R: Rng>(
        obs_len: usize,
        n_actions: usize,
        arch: PolicyArch,
        rng: &mut R,
    ) -> Self {
        let mut params = ParamSet::new();
        match arch {
            PolicyArch::FeedForward => {
                let mlp = Mlp::init(
                    &mut params,
                    "pi",
                    &[obs_len, POLICY_HIDDEN, POLICY_HIDDEN, n_actions],
                    rng,
                );
                PolicyNet {
                    params,
                    arch,
                    mlp: Some(mlp),
                    embed: None,
                    lstm: None,
                    head: None,
                    obs_len,
                    n_actions,
                }
            }
            PolicyArch::Recurrent => {
                let embed = LinearIds::init(&mut params, "pi.embed", obs_len, POLICY_HIDDEN, rng);
                let lstm = LstmIds::init(&mut params, "pi.lstm", POLICY_HIDDEN, POLICY_HIDDEN, rng);
                let head = LinearIds::init_zero(&mut params, "pi.head", POLICY_HIDDEN, n_actions);
                PolicyNet {
                    params,
                    arch,
                    mlp: None,
                    embed: Some(embed),
                    lstm: Some(lstm),
                    head: Some(head),
                    obs_len,
                    n_actions,
                }
            }
        }
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn obs_len(&self) -> usize {
        self.obs_len
    }

    pub fn arch(&self) -> PolicyArch {
        self.arch
    }

    pub fn init_state(&self) -> PolicyState {
        PolicyState {
            h: vec![0.0; POLICY_HIDDEN],
            c: vec![0.0; POLICY_HIDDEN],
        }
    }

    /// Graph-free logits for one observation, advancing the recurrent state
    /// when the trunk has one.
    pub fn logits_infer(&self, obs: &[u8], state: &mut PolicyState) -> Vec<f64> {
        match self.arch {
            PolicyArch::FeedForward => self.mlp.as_ref().unwrap().infer_sparse(&self.params, obs),
            PolicyArch::Recurrent => self.recurrent_infer(obs, state),
        }
    }

    fn recurrent_infer(&self, obs: &[u8], state: &mut PolicyState) -> Vec<f64> {
        let embed = self.embed.as_ref().unwrap();
        let lstm = self.lstm.as_ref().unwrap();
        let head = self.head.as_ref().unwrap();
        let h_w = POLICY_HIDDEN;

        // embed with one-hot sparsity
        let w = self.params.tensor(embed.w);
        let b = self.params.tensor(embed.b);
        let mut x: Vec<f64> = b.data().to_vec();
        for (i, &bit) in obs.iter().enumerate() {
            if bit != 0 {
                let row = &w.data()[i * h_w..(i + 1) * h_w];
                for (a, &v) in x.iter_mut().zip(row) {
                    *a += v;
                }
            }
        }
        for v in x.iter_mut() {
            *v = v.tanh();
        }

        // the four gates
        let gate = |k: usize| -> Vec<f64> {
            let wk = self.params.tensor(lstm.w[k]);
            let uk = self.params.tensor(lstm.u[k]);
            let bk = self.params.tensor(lstm.b[k]);
            let mut out: Vec<f64> = bk.data().to_vec();
            for (i, &xi) in x.iter().enumerate() {
                let row = &wk.data()[i * h_w..(i + 1) * h_w];
                for (a, &v) in out.iter_mut().zip(row) {
                    *a += xi * v;
                }
            }
            for (i, &hi) in state.h.iter().enumerate() {
                let row = &uk.data()[i * h_w..(i + 1) * h_w];
                for (a, &v) in out.iter_mut().zip(row) {
                    *a += hi * v;
                }
            }
            out
        };
        let sigmoid = |v: f64| 1.0 / (1.0 + (-v).exp());
        let i_g: Vec<f64> = gate(0).into_iter().map(sigmoid).collect();
        let f_g: Vec<f64> = gate(1).into_iter().map(sigmoid).collect();
        let o_g: Vec<f64> = gate(2).into_iter().map(sigmoid).collect();
        let c_g: Vec<f64> = gate(3).into_iter().map(f64::tanh).collect();
        for k in 0..h_w {
            state.c[k] = f_g[k] * state.c[k] + i_g[k] * c_g[k];
            state.h[k] = o_g[k] * state.c[k].tanh();
        }

        let hw = self.params.tensor(head.w);
        let hb = self.params.tensor(head.b);
        let mut logits: Vec<f64> = hb.data().to_vec();
        for (i, &hi) in state.h.iter().enumerate() {
            let row = &hw.data()[i * self.n_actions..(i + 1) * self.n_actions];
            for (a, &v) in logits.iter_mut().zip(row) {
                *a += hi * v;
            }
        }
        logits
    }

    /// Logits for a whole `T x obs_len` episode inside a graph.
    pub fn forward_graph(
        &self,
        g: &mut Graph,
        bound: &BoundParams,
        obs: Var,
    ) -> Result<Var, NnError> {
        match self.arch {
            PolicyArch::FeedForward => self.mlp.as_ref().unwrap().forward_graph(g, bound, obs),
            PolicyArch::Recurrent => {
                let embed = self.embed.as_ref().unwrap();
                let lstm = self.lstm.as_ref().unwrap();
                let head = self.head.as_ref().unwrap();
                let e = embed.apply(g, bound, obs)?;
                let x = g.tanh(e)?;
                let t = g.value(x).rows();
                let mut steps = Vec::with_capacity(t);
                for r in 0..t {
                    steps.push(g.row_slice(x, r)?);
                }
                let hidden = lstm_sequence(g, &steps, lstm, bound)?;
                let seq = g.concat_rows(&hidden)?;
                head.apply(g, bound, seq)
            }
        }
    }
}

/// One stochastic policy per agent.
pub struct PolicySet {
    pub nets: Vec<PolicyNet>,
}

impl PolicySet {
    pub fn new<R: Rng>(
        n_agents: usize,
        obs_len: usize,
        n_actions: usize,
        arch: PolicyArch,
        rng: &mut R,
    ) -> Self {
        PolicySet {
            nets: (0..n_agents)
                .map(|_| PolicyNet::new(obs_len, n_actions, arch, rng))
                .collect(),
        }
    }

    pub fn n_agents(&self) -> usize {
        self.nets.len()
    }

    pub fn init_states(&self) -> Vec<PolicyState> {
        self.nets.iter().map(|n| n.init_state()).collect()
    }
}

/// Samples one action per agent from the policies' categorical
/// distributions, recording log-probabilities for the gradient estimator.
pub fn sample_actions<R: Rng>(
    policies: &PolicySet,
    observations: &[AgentObservation],
    states: &mut [PolicyState],
    rng: &mut R,
) -> Result<Vec<(usize, f64)>, NnError> {
    if observations.len() != policies.n_agents() {
        return Err(NnError::Dimension(format!(
            "{} observations for {} agents",
            observations.len(),
            policies.n_agents()
        )));
    }
    let mut out = Vec::with_capacity(observations.len());
    for (i, obs) in observations.iter().enumerate() {
        let logits = policies.nets[i].logits_infer(obs, &mut states[i]);
        if !logits.iter().all(|v| v.is_finite()) {
            return Err(NnError::NonFinite("policy logits".into()));
        }
        let probs = softmax(&logits);
        let draw: f64 = rng.gen();
        let mut cum = 0.0;
        let mut action = probs.len() - 1;
        for (a, &p) in probs.iter().enumerate() {
            cum += p;
            if draw < cum {
                action = a;
                break;
            }
        }
        out.push((action, probs[action].ln()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::tensor::Tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fresh_policy_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = PolicyNet::new(8, 4, PolicyArch::FeedForward, &mut rng);
        let mut state = net.init_state();
        let logits = net.logits_infer(&[1, 0, 1, 0, 1, 0, 1, 0], &mut state);
        let probs = softmax(&logits);
        for p in probs {
            assert!((p - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn saturated_logit_dominates() {
        let p = softmax(&[20.0, 0.0, 0.0, 0.0]);
        assert!(p[0] > 0.999);
    }

    #[test]
    fn sampling_frequency_matches_distribution() {
        // logits [1, 0]: P(action 0) = e/(e+1), checked against binomial
        // concentration over 10,000 seeded draws
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let expected = std::f64::consts::E / (std::f64::consts::E + 1.0);
        let probs = softmax(&[1.0, 0.0]);
        let n = 10_000;
        let mut count0 = 0usize;
        for _ in 0..n {
            let draw: f64 = rng.gen();
            if draw < probs[0] {
                count0 += 1;
            }
        }
        let freq = count0 as f64 / n as f64;
        let sigma = (expected * (1.0 - expected) / n as f64).sqrt();
        assert!(
            (freq - expected).abs() < 3.0 * sigma,
            "freq {freq} vs expected {expected} (3 sigma {})",
            3.0 * sigma
        );
    }

    #[test]
    fn recurrent_infer_matches_graph_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut net = PolicyNet::new(4, 3, PolicyArch::Recurrent, &mut rng);
        let head = net.params.find("pi.head.w").unwrap();
        *net.params.tensor_mut(head) =
            crate::nn::params::init_matrix(&mut rng, POLICY_HIDDEN, 3, POLICY_HIDDEN);

        let obs_seq: Vec<Vec<u8>> = vec![vec![1, 0, 0, 1], vec![0, 1, 1, 0], vec![1, 1, 0, 0]];
        let mut state = net.init_state();
        let mut fast = Vec::new();
        for obs in &obs_seq {
            fast.push(net.logits_infer(obs, &mut state));
        }

        let mut g = Graph::new();
        let bound = g.bind(&net.params).unwrap();
        let data: Vec<f64> = obs_seq.iter().flatten().map(|&b| b as f64).collect();
        let x = g.leaf(Tensor::new(vec![3, 4], data).unwrap()).unwrap();
        let logits = net.forward_graph(&mut g, &bound, x).unwrap();
        for t in 0..3 {
            for a in 0..3 {
                assert!(
                    (fast[t][a] - g.value(logits).at2(t, a)).abs() < 1e-10,
                    "t={t} a={a}"
                );
            }
        }
    }
}
