//! Small tanh multi-layer perceptron used by policies and critics, with a
//! fast graph-free inference path for rollout sampling.

use crate::nn::graph::{Graph, Var};
use crate::nn::params::{BoundParams, LinearIds, ParamSet};
use crate::nn::tensor::NnError;
use rand::Rng;

/// Dense layers with tanh between them and a linear head.
#[derive(Clone, Debug)]
pub struct Mlp {
    layers: Vec<LinearIds>,
    widths: Vec<usize>,
}

impl Mlp {
    /// `widths` runs input..output, e.g. `[obs, 64, 64, actions]`.
    /// The head starts at zero so fresh policies are exactly uniform and
    /// fresh value estimates are exactly zero.
    pub fn init<R: Rng>(
        params: &mut ParamSet,
        prefix: &str,
        widths: &[usize],
        rng: &mut R,
    ) -> Self {
        assert!(widths.len() >= 2);
        let mut layers = Vec::with_capacity(widths.len() - 1);
        for k in 0..widths.len() - 1 {
            let name = format!("{prefix}.l{k}");
            let layer = if k == widths.len() - 2 {
                LinearIds::init_zero(params, &name, widths[k], widths[k + 1])
            } else {
                LinearIds::init(params, &name, widths[k], widths[k + 1], rng)
            };
            layers.push(layer);
        }
        Mlp {
            layers,
            widths: widths.to_vec(),
        }
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().unwrap()
    }

    /// Forward over a batch matrix inside a graph.
    pub fn forward_graph(
        &self,
        g: &mut Graph,
        bound: &BoundParams,
        x: Var,
    ) -> Result<Var, NnError> {
        let mut cur = x;
        for (k, layer) in self.layers.iter().enumerate() {
            cur = layer.apply(g, bound, cur)?;
            if k + 1 < self.layers.len() {
                cur = g.tanh(cur)?;
            }
        }
        Ok(cur)
    }

    /// Graph-free forward for one packed 0/1 observation row.
    ///
    /// The first layer exploits the one-hot sparsity: only active rows of
    /// the weight matrix are accumulated.
    pub fn infer_sparse(&self, params: &ParamSet, obs: &[u8]) -> Vec<f64> {
        debug_assert_eq!(obs.len(), self.widths[0]);
        let first = &self.layers[0];
        let w = params.tensor(first.w);
        let b = params.tensor(first.b);
        let h = self.widths[1];
        let mut acc: Vec<f64> = b.data().to_vec();
        for (i, &bit) in obs.iter().enumerate() {
            if bit != 0 {
                let row = &w.data()[i * h..(i + 1) * h];
                for (a, &v) in acc.iter_mut().zip(row) {
                    *a += v;
                }
            }
        }
        if self.layers.len() > 1 {
            for a in acc.iter_mut() {
                *a = a.tanh();
            }
        }
        self.infer_dense_tail(params, acc, 1)
    }

    /// Graph-free forward for one dense f64 row.
    pub fn infer_dense(&self, params: &ParamSet, input: &[f64]) -> Vec<f64> {
        debug_assert_eq!(input.len(), self.widths[0]);
        let first = &self.layers[0];
        let w = params.tensor(first.w);
        let b = params.tensor(first.b);
        let h = self.widths[1];
        let mut acc: Vec<f64> = b.data().to_vec();
        for (i, &x) in input.iter().enumerate() {
            if x != 0.0 {
                let row = &w.data()[i * h..(i + 1) * h];
                for (a, &v) in acc.iter_mut().zip(row) {
                    *a += x * v;
                }
            }
        }
        if self.layers.len() > 1 {
            for a in acc.iter_mut() {
                *a = a.tanh();
            }
        }
        self.infer_dense_tail(params, acc, 1)
    }

    fn infer_dense_tail(&self, params: &ParamSet, mut cur: Vec<f64>, from: usize) -> Vec<f64> {
        for (k, layer) in self.layers.iter().enumerate().skip(from) {
            let w = params.tensor(layer.w);
            let b = params.tensor(layer.b);
            let out_w = w.cols();
            let mut next: Vec<f64> = b.data().to_vec();
            for (i, &x) in cur.iter().enumerate() {
                let row = &w.data()[i * out_w..(i + 1) * out_w];
                for (a, &v) in next.iter_mut().zip(row) {
                    *a += x * v;
                }
            }
            if k + 1 < self.layers.len() {
                for a in next.iter_mut() {
                    *a = a.tanh();
                }
            }
            cur = next;
        }
        cur
    }
}

/// Softmax of a logits row.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in out.iter_mut() {
        *v /= sum;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::tensor::Tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn inference_matches_graph_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut params = ParamSet::new();
        let mlp = Mlp::init(&mut params, "net", &[6, 8, 3], &mut rng);
        // give the zero-initialized head nonzero weights so the check is meaningful
        let head = params.find("net.l1.w").unwrap();
        *params.tensor_mut(head) = crate::nn::params::init_matrix(&mut rng, 8, 3, 8);

        let obs: Vec<u8> = vec![1, 0, 1, 1, 0, 1];
        let fast = mlp.infer_sparse(&params, &obs);

        let mut g = Graph::new();
        let bound = g.bind(&params).unwrap();
        let x = g
            .leaf(Tensor::new(vec![1, 6], obs.iter().map(|&b| b as f64).collect()).unwrap())
            .unwrap();
        let y = mlp.forward_graph(&mut g, &bound, x).unwrap();
        let slow = g.value(y).data();
        for (a, b) in fast.iter().zip(slow) {
            assert!((a - b).abs() < 1e-12, "{fast:?} vs {slow:?}");
        }
    }

    #[test]
    fn zero_head_outputs_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut params = ParamSet::new();
        let mlp = Mlp::init(&mut params, "net", &[4, 8, 2], &mut rng);
        let out = mlp.infer_sparse(&params, &[1, 1, 0, 1]);
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn softmax_normalizes() {
        let p = softmax(&[1.0, 2.0, 3.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.windows(2).all(|w| w[0] < w[1]));
    }
}
