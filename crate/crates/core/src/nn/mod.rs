//! Minimal dense-tensor numerical core: reverse-mode autodiff, attention and
//! LSTM primitives, an adaptive-moment optimizer, and a finite-difference
//! gradient checker.

pub mod adam;
pub mod attention;
pub mod gradcheck;
pub mod graph;
pub mod lstm;
pub mod params;
pub mod positional;
pub mod tensor;

pub use adam::{adam_step, clip_grad_norm, OptimizerState};
pub use attention::{
    attention_graph, attention_graph_vars, masked_self_attention, multi_head_attention, AttnMask,
    multi_head_graph, multi_head_graph_vars, AttentionParams, CausalMask, MaskVars, MASK_PENALTY,
};
pub use gradcheck::{grad_check, GradCheckConfig};
pub use graph::{Gradients, Graph, Var};
pub use lstm::{lstm_forward, lstm_sequence, lstm_step, LstmIds, LstmParams};
pub use params::{init_matrix, BoundParams, LinearIds, ParamId, ParamSet};
pub use positional::positional_encoding;
pub use tensor::{NnError, Tensor};
