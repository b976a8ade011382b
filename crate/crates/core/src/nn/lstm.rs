//! Gated LSTM recurrence with graph-based backpropagation through time.

use super::graph::{Graph, Var};
use super::params::{BoundParams, ParamId, ParamSet};
use super::tensor::{NnError, Tensor};
use rand::Rng;

/// Weights for the four LSTM gates (input, forget, output, cell).
///
/// Each gate has an input matrix `d_in x h`, a recurrent matrix `h x h`,
/// and a `1 x h` bias.
#[derive(Clone, Debug)]
pub struct LstmParams {
    pub w: [Tensor; 4],
    pub u: [Tensor; 4],
    pub b: [Tensor; 4],
    pub hidden_size: usize,
}

const GATES: [&str; 4] = ["i", "f", "o", "c"];

impl LstmParams {
    pub fn new(w: [Tensor; 4], u: [Tensor; 4], b: [Tensor; 4]) -> Result<Self, NnError> {
        let hidden_size = w[0].cols();
        let d_in = w[0].rows();
        for k in 0..4 {
            if w[k].shape() != [d_in, hidden_size] {
                return Err(NnError::Dimension(format!(
                    "gate {} input weights {:?}, expected {:?}",
                    GATES[k],
                    w[k].shape(),
                    [d_in, hidden_size]
                )));
            }
            if u[k].shape() != [hidden_size, hidden_size] {
                return Err(NnError::Dimension(format!(
                    "gate {} recurrent weights {:?}",
                    GATES[k],
                    u[k].shape()
                )));
            }
            if b[k].shape() != [1, hidden_size] {
                return Err(NnError::Dimension(format!(
                    "gate {} bias {:?}",
                    GATES[k],
                    b[k].shape()
                )));
            }
        }
        Ok(LstmParams {
            w,
            u,
            b,
            hidden_size,
        })
    }
}

/// Handles for LSTM parameters registered in a [`ParamSet`].
#[derive(Clone, Copy, Debug)]
pub struct LstmIds {
    pub w: [ParamId; 4],
    pub u: [ParamId; 4],
    pub b: [ParamId; 4],
    pub hidden_size: usize,
}

impl LstmIds {
    /// Registers gate parameters under `prefix.{w,u,b}_{i,f,o,c}`.
    /// The forget-gate bias starts at 1 to keep early memory open.
    pub fn init<R: Rng>(
        params: &mut ParamSet,
        prefix: &str,
        d_in: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        use super::params::init_matrix;
        let mut w = Vec::new();
        let mut u = Vec::new();
        let mut b = Vec::new();
        for gate in GATES {
            w.push(params.add(
                &format!("{prefix}.w_{gate}"),
                init_matrix(rng, d_in, hidden, d_in),
            ));
            u.push(params.add(
                &format!("{prefix}.u_{gate}"),
                init_matrix(rng, hidden, hidden, hidden),
            ));
            let bias = if gate == "f" {
                Tensor::full(&[1, hidden], 1.0)
            } else {
                Tensor::zeros(&[1, hidden])
            };
            b.push(params.add(&format!("{prefix}.b_{gate}"), bias));
        }
        LstmIds {
            w: [w[0], w[1], w[2], w[3]],
            u: [u[0], u[1], u[2], u[3]],
            b: [b[0], b[1], b[2], b[3]],
            hidden_size: hidden,
        }
    }
}

/// One LSTM step over a `B x d_in` input batch.
///
/// Returns the next `(hidden, cell)` pair, each `B x h`.
pub fn lstm_step(
    g: &mut Graph,
    x: Var,
    h_prev: Var,
    c_prev: Var,
    ids: &LstmIds,
    bound: &BoundParams,
) -> Result<(Var, Var), NnError> {
    let gate = |g: &mut Graph, k: usize| -> Result<Var, NnError> {
        let xw = g.matmul(x, bound.var(ids.w[k]))?;
        let hu = g.matmul(h_prev, bound.var(ids.u[k]))?;
        let s = g.add(xw, hu)?;
        g.add_row_broadcast(s, bound.var(ids.b[k]))
    };
    let i = {
        let a = gate(g, 0)?;
        g.sigmoid(a)?
    };
    let f = {
        let a = gate(g, 1)?;
        g.sigmoid(a)?
    };
    let o = {
        let a = gate(g, 2)?;
        g.sigmoid(a)?
    };
    let cand = {
        let a = gate(g, 3)?;
        g.tanh(a)?
    };
    let keep = g.mul(f, c_prev)?;
    let write = g.mul(i, cand)?;
    let c = g.add(keep, write)?;
    let ct = g.tanh(c)?;
    let h = g.mul(o, ct)?;
    Ok((h, c))
}

/// Unrolls the recurrence over per-step `B x d_in` input vars, starting from
/// zero hidden and cell states. Returns the per-step hidden vars.
pub fn lstm_sequence(
    g: &mut Graph,
    inputs: &[Var],
    ids: &LstmIds,
    bound: &BoundParams,
) -> Result<Vec<Var>, NnError> {
    if inputs.is_empty() {
        return Err(NnError::Dimension("lstm_sequence: empty input".into()));
    }
    let batch = g.value(inputs[0]).rows();
    let mut h = g.leaf(Tensor::zeros(&[batch, ids.hidden_size]))?;
    let mut c = g.leaf(Tensor::zeros(&[batch, ids.hidden_size]))?;
    let mut hidden = Vec::with_capacity(inputs.len());
    for &x in inputs {
        let (nh, nc) = lstm_step(g, x, h, c, ids, bound)?;
        h = nh;
        c = nc;
        hidden.push(h);
    }
    Ok(hidden)
}

/// Runs the recurrence over a `T x d_in` input sequence with zero initial
/// states, returning the `T x h` hidden sequence.
pub fn lstm_forward(inputs: &Tensor, params: &LstmParams) -> Result<Tensor, NnError> {
    inputs.check_finite("lstm_forward input")?;
    if !inputs.is_matrix() || inputs.cols() != params.w[0].rows() {
        return Err(NnError::Dimension(format!(
            "lstm_forward: input {:?} vs gate weights {:?}",
            inputs.shape(),
            params.w[0].shape()
        )));
    }
    let mut g = Graph::new();
    let mut set = ParamSet::new();
    let mut w = Vec::new();
    let mut u = Vec::new();
    let mut b = Vec::new();
    for k in 0..4 {
        w.push(set.add(&format!("w_{}", GATES[k]), params.w[k].clone()));
        u.push(set.add(&format!("u_{}", GATES[k]), params.u[k].clone()));
        b.push(set.add(&format!("b_{}", GATES[k]), params.b[k].clone()));
    }
    let ids = LstmIds {
        w: [w[0], w[1], w[2], w[3]],
        u: [u[0], u[1], u[2], u[3]],
        b: [b[0], b[1], b[2], b[3]],
        hidden_size: params.hidden_size,
    };
    let bound = g.bind(&set)?;
    let t = inputs.rows();
    let mut steps = Vec::with_capacity(t);
    for r in 0..t {
        steps.push(g.leaf(Tensor::new(vec![1, inputs.cols()], inputs.row(r).to_vec())?)?);
    }
    let hidden = lstm_sequence(&mut g, &steps, &ids, &bound)?;
    let out = g.concat_rows(&hidden)?;
    Ok(g.value(out).clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_params(d_in: usize, h: usize) -> LstmParams {
        LstmParams::new(
            std::array::from_fn(|_| Tensor::zeros(&[d_in, h])),
            std::array::from_fn(|_| Tensor::zeros(&[h, h])),
            std::array::from_fn(|_| Tensor::zeros(&[1, h])),
        )
        .unwrap()
    }

    #[test]
    fn zero_network_outputs_zeros() {
        let params = zero_params(3, 2);
        let x = Tensor::from_rows(&[vec![1.0, -2.0, 0.5], vec![0.3, 0.1, -0.9]]).unwrap();
        let h = lstm_forward(&x, &params).unwrap();
        assert_eq!(h.shape(), &[2, 2]);
        assert!(h.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hidden_values_bounded() {
        let mut params = zero_params(2, 3);
        for k in 0..4 {
            params.w[k] = Tensor::full(&[2, 3], 2.5);
            params.u[k] = Tensor::full(&[3, 3], -1.5);
            params.b[k] = Tensor::full(&[1, 3], 0.7);
        }
        let x = Tensor::from_rows(&[vec![3.0, -3.0], vec![5.0, 5.0], vec![-4.0, 2.0]]).unwrap();
        let h = lstm_forward(&x, &params).unwrap();
        assert!(h.data().iter().all(|&v| v > -1.0 && v < 1.0));
    }

    #[test]
    fn shape_mismatch_rejected() {
        let params = zero_params(3, 2);
        let x = Tensor::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(matches!(
            lstm_forward(&x, &params),
            Err(NnError::Dimension(_))
        ));
    }
}
