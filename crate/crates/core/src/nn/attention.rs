//! Masked scaled dot-product self-attention.
//!
//! Scores are masked multiplicatively and pushed to -C before the softmax,
//! so excluded positions receive exactly zero weight:
//! `softmax((M .* (Q K^T) - C (1 - M)) / sqrt(d_k)) V`.

use super::graph::{Graph, Var};
use super::tensor::{NnError, Tensor};

/// Constant subtracted from masked score entries before the softmax.
pub const MASK_PENALTY: f64 = 1e9;

/// Lower-triangular binary mask over a length-`T` sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct CausalMask {
    t: usize,
    entries: Tensor,
}

impl CausalMask {
    pub fn new(t: usize) -> Self {
        let mut entries = Tensor::zeros(&[t, t]);
        for i in 0..t {
            for j in 0..=i {
                entries.set2(i, j, 1.0);
            }
        }
        CausalMask { t, entries }
    }

    pub fn len(&self) -> usize {
        self.t
    }

    pub fn is_empty(&self) -> bool {
        self.t == 0
    }

    /// The binary mask matrix: `entries[t][l] = 1` iff `l <= t`.
    pub fn entries(&self) -> &Tensor {
        &self.entries
    }

    /// `C * (1 - M)`: the additive penalty applied to masked scores.
    pub fn penalty(&self) -> Tensor {
        self.entries.map(|m| MASK_PENALTY * (1.0 - m))
    }
}

/// Projection matrices for one attention operation.
///
/// For multi-head use, the heads are column blocks of the shared `W_q`,
/// `W_k`, `W_v` of width `d_k / head_count`.
#[derive(Clone, Debug)]
pub struct AttentionParams {
    pub w_q: Tensor,
    pub w_k: Tensor,
    pub w_v: Tensor,
    pub head_count: usize,
    pub d_k: usize,
}

impl AttentionParams {
    pub fn new(
        w_q: Tensor,
        w_k: Tensor,
        w_v: Tensor,
        head_count: usize,
    ) -> Result<Self, NnError> {
        if head_count == 0 {
            return Err(NnError::Config("head_count must be positive".into()));
        }
        let d_k = w_q.cols();
        for (name, w) in [("W_q", &w_q), ("W_k", &w_k), ("W_v", &w_v)] {
            if !w.is_matrix() {
                return Err(NnError::Dimension(format!("{name} must be a matrix")));
            }
            if w.shape() != w_q.shape() {
                return Err(NnError::Dimension(format!(
                    "{name} shape {:?} differs from W_q shape {:?}",
                    w.shape(),
                    w_q.shape()
                )));
            }
        }
        if d_k % head_count != 0 {
            return Err(NnError::Config(format!(
                "d_k {d_k} not divisible by head_count {head_count}"
            )));
        }
        Ok(AttentionParams {
            w_q,
            w_k,
            w_v,
            head_count,
            d_k,
        })
    }
}

/// Mask leaves shared by attention calls within one graph.
#[derive(Clone, Copy, Debug)]
pub struct MaskVars {
    pub mask: Var,
    pub penalty: Var,
}

impl MaskVars {
    /// Inserts the binary mask and its `C * (1 - M)` penalty as leaves.
    pub fn from_mask(g: &mut Graph, mask: &Tensor) -> Result<Self, NnError> {
        let penalty = mask.map(|m| MASK_PENALTY * (1.0 - m));
        Ok(MaskVars {
            mask: g.leaf(mask.clone())?,
            penalty: g.leaf(penalty)?,
        })
    }
}

/// The masking applied to attention scores.
///
/// `Causal` runs a fused lower-triangular softmax; it produces bit-identical
/// weights to `Explicit` with a [`CausalMask`] (excluded entries underflow
/// to exactly zero under the penalty) at half the work.
#[derive(Clone, Copy, Debug)]
pub enum AttnMask {
    Causal,
    Explicit(MaskVars),
}

/// Graph-level single-softmax attention over already-bound projections.
///
/// Returns `(z, weights)` where each row of `weights` sums to 1 and masked
/// positions carry exactly zero weight. `scale_dim` is the dimension used
/// for the `1/sqrt(d)` score scaling.
pub fn attention_graph_vars(
    g: &mut Graph,
    x: Var,
    w_q: Var,
    w_k: Var,
    w_v: Var,
    mask: AttnMask,
    scale_dim: usize,
) -> Result<(Var, Var), NnError> {
    let t = g.value(x).rows();
    let q = g.matmul(x, w_q)?;
    let k = g.matmul(x, w_k)?;
    let v = g.matmul(x, w_v)?;
    let scale = 1.0 / (scale_dim.max(1) as f64).sqrt();
    match mask {
        AttnMask::Causal => {
            let scores = g.matmul_nt(q, k)?;
            let weights = g.causal_softmax_scaled(scores, scale)?;
            let z = g.matmul(weights, v)?;
            Ok((z, weights))
        }
        AttnMask::Explicit(mv) => {
            if g.value(mv.mask).rows() != t || g.value(mv.mask).cols() != t {
                return Err(NnError::Dimension(format!(
                    "mask {:?} does not match sequence length {t}",
                    g.value(mv.mask).shape()
                )));
            }
            // softmax((M .* (Q K^T) - C (1 - M)) / sqrt(d_k))
            let scores = g.matmul_nt(q, k)?;
            let masked = g.mul(scores, mv.mask)?;
            let shifted = g.sub(masked, mv.penalty)?;
            let scaled = g.scale(shifted, scale)?;
            let weights = g.softmax_rows(scaled)?;
            let z = g.matmul(weights, v)?;
            Ok((z, weights))
        }
    }
}

/// [`attention_graph_vars`] with an explicit mask inserted on the fly.
pub fn attention_graph(
    g: &mut Graph,
    x: Var,
    w_q: Var,
    w_k: Var,
    w_v: Var,
    mask: &Tensor,
    scale_dim: usize,
) -> Result<(Var, Var), NnError> {
    let mv = MaskVars::from_mask(g, mask)?;
    attention_graph_vars(g, x, w_q, w_k, w_v, AttnMask::Explicit(mv), scale_dim)
}

/// Single-softmax masked self-attention on plain tensors.
///
/// The full projection matrices are used as one head regardless of
/// `params.head_count`; see [`multi_head_attention`] for the split form.
pub fn masked_self_attention(
    x: &Tensor,
    params: &AttentionParams,
    mask: &CausalMask,
) -> Result<(Tensor, Tensor), NnError> {
    x.check_finite("masked_self_attention input")?;
    if !x.is_matrix() || x.cols() != params.w_q.rows() {
        return Err(NnError::Dimension(format!(
            "input {:?} vs W_q {:?}",
            x.shape(),
            params.w_q.shape()
        )));
    }
    if mask.len() != x.rows() {
        return Err(NnError::Dimension(format!(
            "mask length {} vs sequence length {}",
            mask.len(),
            x.rows()
        )));
    }
    let mut g = Graph::new();
    let xv = g.leaf(x.clone())?;
    let wq = g.leaf(params.w_q.clone())?;
    let wk = g.leaf(params.w_k.clone())?;
    let wv = g.leaf(params.w_v.clone())?;
    let (z, w) = attention_graph(&mut g, xv, wq, wk, wv, mask.entries(), params.d_k)?;
    Ok((g.value(z).clone(), g.value(w).clone()))
}

/// Graph-level multi-head attention: per-head column blocks, per-head
/// softmax, concatenation, then one output linear map.
#[allow(clippy::too_many_arguments)]
pub fn multi_head_graph_vars(
    g: &mut Graph,
    x: Var,
    w_q: Var,
    w_k: Var,
    w_v: Var,
    w_o: Var,
    b_o: Var,
    head_count: usize,
    mask: AttnMask,
) -> Result<(Var, Vec<Var>), NnError> {
    if head_count == 0 {
        return Err(NnError::Config("head_count must be positive".into()));
    }
    let d_k = g.value(w_q).cols();
    if d_k % head_count != 0 {
        return Err(NnError::Config(format!(
            "d_k {d_k} not divisible by head_count {head_count}"
        )));
    }
    let dh = d_k / head_count;
    let mut outs = Vec::with_capacity(head_count);
    let mut weights = Vec::with_capacity(head_count);
    for h in 0..head_count {
        let wq_h = g.slice_cols(w_q, h * dh, dh)?;
        let wk_h = g.slice_cols(w_k, h * dh, dh)?;
        let wv_h = g.slice_cols(w_v, h * dh, dh)?;
        let (z, w) = attention_graph_vars(g, x, wq_h, wk_h, wv_h, mask, dh)?;
        outs.push(z);
        weights.push(w);
    }
    let cat = g.concat_cols(&outs)?;
    let projected = g.matmul(cat, w_o)?;
    let out = g.add_row_broadcast(projected, b_o)?;
    Ok((out, weights))
}

/// [`multi_head_graph_vars`] with an explicit mask inserted on the fly.
#[allow(clippy::too_many_arguments)]
pub fn multi_head_graph(
    g: &mut Graph,
    x: Var,
    w_q: Var,
    w_k: Var,
    w_v: Var,
    w_o: Var,
    b_o: Var,
    head_count: usize,
    mask: &Tensor,
) -> Result<(Var, Vec<Var>), NnError> {
    let mv = MaskVars::from_mask(g, mask)?;
    multi_head_graph_vars(g, x, w_q, w_k, w_v, w_o, b_o, head_count, AttnMask::Explicit(mv))
}

/// Multi-head masked self-attention on plain tensors.
///
/// `w_o`/`b_o` form the output linear map applied to the concatenated head
/// outputs (pass an identity matrix and zero bias to skip it).
pub fn multi_head_attention(
    x: &Tensor,
    params: &AttentionParams,
    w_o: &Tensor,
    b_o: &Tensor,
    mask: &CausalMask,
) -> Result<Tensor, NnError> {
    x.check_finite("multi_head_attention input")?;
    let mut g = Graph::new();
    let xv = g.leaf(x.clone())?;
    let wq = g.leaf(params.w_q.clone())?;
    let wk = g.leaf(params.w_k.clone())?;
    let wv = g.leaf(params.w_v.clone())?;
    let wo = g.leaf(w_o.clone())?;
    let bo = g.leaf(b_o.clone())?;
    let (out, _) = multi_head_graph(
        &mut g,
        xv,
        wq,
        wk,
        wv,
        wo,
        bo,
        params.head_count,
        mask.entries(),
    )?;
    Ok(g.value(out).clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::init_matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn seeded_params(d_i: usize, d_k: usize, heads: usize, seed: u64) -> AttentionParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        AttentionParams::new(
            init_matrix(&mut rng, d_i, d_k, d_i),
            init_matrix(&mut rng, d_i, d_k, d_i),
            init_matrix(&mut rng, d_i, d_k, d_i),
            heads,
        )
        .unwrap()
    }

    #[test]
    fn single_position_attends_to_itself() {
        let params = seeded_params(3, 4, 1, 1);
        let x = Tensor::from_rows(&[vec![0.3, -0.7, 1.1]]).unwrap();
        let (_, w) = masked_self_attention(&x, &params, &CausalMask::new(1)).unwrap();
        assert_eq!(w.shape(), &[1, 1]);
        assert!((w.data()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_query_gives_uniform_rows() {
        let mut params = seeded_params(2, 2, 1, 2);
        params.w_q = Tensor::zeros(&[2, 2]);
        let x = Tensor::from_rows(&[vec![1.0, 2.0], vec![-1.0, 0.5], vec![0.2, 0.9]]).unwrap();
        let (_, w) = masked_self_attention(&x, &params, &CausalMask::new(3)).unwrap();
        assert!((w.at2(0, 0) - 1.0).abs() < 1e-12);
        assert!((w.at2(1, 0) - 0.5).abs() < 1e-12);
        assert!((w.at2(1, 1) - 0.5).abs() < 1e-12);
        for j in 0..3 {
            assert!((w.at2(2, j) - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn masked_entries_are_exactly_zero() {
        let params = seeded_params(2, 4, 1, 3);
        let x = Tensor::from_rows(&[vec![1.0, 2.0], vec![-1.0, 0.5], vec![0.2, 0.9]]).unwrap();
        let (_, w) = masked_self_attention(&x, &params, &CausalMask::new(3)).unwrap();
        for t in 0..3 {
            for l in (t + 1)..3 {
                assert_eq!(w.at2(t, l), 0.0);
            }
            let sum: f64 = w.row(t).iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn mask_length_mismatch_is_dimension_error() {
        let params = seeded_params(2, 2, 1, 4);
        let x = Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let err = masked_self_attention(&x, &params, &CausalMask::new(3)).unwrap_err();
        assert!(matches!(err, NnError::Dimension(_)));
    }

    #[test]
    fn nonfinite_input_is_numeric_error() {
        let params = seeded_params(2, 2, 1, 5);
        let x = Tensor::new(vec![1, 2], vec![1.0, f64::NAN]).unwrap();
        let err = masked_self_attention(&x, &params, &CausalMask::new(1)).unwrap_err();
        assert!(matches!(err, NnError::NonFinite(_)));
    }

    #[test]
    fn causal_fast_path_matches_penalty_formula() {
        use crate::nn::graph::Graph;
        let params = seeded_params(3, 4, 1, 9);
        let x = Tensor::from_rows(&[
            vec![0.4, -1.2, 0.3],
            vec![1.0, 0.1, -0.5],
            vec![-0.3, 0.8, 0.9],
            vec![0.2, 0.2, -1.1],
        ])
        .unwrap();
        let mask = CausalMask::new(4);

        let run = |causal: bool| {
            let mut g = Graph::new();
            let xv = g.leaf(x.clone()).unwrap();
            let wq = g.leaf(params.w_q.clone()).unwrap();
            let wk = g.leaf(params.w_k.clone()).unwrap();
            let wv = g.leaf(params.w_v.clone()).unwrap();
            let m = if causal {
                AttnMask::Causal
            } else {
                AttnMask::Explicit(MaskVars::from_mask(&mut g, mask.entries()).unwrap())
            };
            let (z, w) = attention_graph_vars(&mut g, xv, wq, wk, wv, m, 4).unwrap();
            (g.value(z).clone(), g.value(w).clone())
        };
        let (z_fast, w_fast) = run(true);
        let (z_ref, w_ref) = run(false);
        for (a, b) in w_fast.data().iter().zip(w_ref.data()) {
            assert!((a - b).abs() < 1e-13, "weights differ: {a} vs {b}");
        }
        for (a, b) in z_fast.data().iter().zip(z_ref.data()) {
            assert!((a - b).abs() < 1e-13, "outputs differ: {a} vs {b}");
        }
        // masked entries stay exactly zero on the fast path too
        for t in 0..4 {
            for l in (t + 1)..4 {
                assert_eq!(w_fast.at2(t, l), 0.0);
            }
        }
    }

    #[test]
    fn identity_output_map_concatenates_heads() {
        let params = seeded_params(3, 4, 2, 6);
        let x =
            Tensor::from_rows(&[vec![0.1, -0.2, 0.3], vec![0.5, 0.2, -0.4]]).unwrap();
        let mask = CausalMask::new(2);
        let mut eye = Tensor::zeros(&[4, 4]);
        for i in 0..4 {
            eye.set2(i, i, 1.0);
        }
        let out =
            multi_head_attention(&x, &params, &eye, &Tensor::zeros(&[1, 4]), &mask).unwrap();

        // each head is a column block of the projections
        let head = |h: usize| {
            let take = |w: &Tensor| {
                let mut sub = Tensor::zeros(&[3, 2]);
                for i in 0..3 {
                    for j in 0..2 {
                        sub.set2(i, j, w.at2(i, h * 2 + j));
                    }
                }
                sub
            };
            AttentionParams::new(take(&params.w_q), take(&params.w_k), take(&params.w_v), 1)
                .unwrap()
        };
        let (z0, _) = masked_self_attention(&x, &head(0), &mask).unwrap();
        let (z1, _) = masked_self_attention(&x, &head(1), &mask).unwrap();
        for t in 0..2 {
            for j in 0..2 {
                assert!((out.at2(t, j) - z0.at2(t, j)).abs() < 1e-12);
                assert!((out.at2(t, 2 + j) - z1.at2(t, j)).abs() < 1e-12);
            }
        }
    }
}
