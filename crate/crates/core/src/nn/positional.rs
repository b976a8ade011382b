//! Fixed sinusoidal positional encoding.

use super::tensor::{NnError, Tensor};

/// `T x d` sinusoidal encoding: even columns `sin(t / 10000^(2i/d))`, odd
/// columns the matching `cos`. Row 0 is `[0, 1, 0, 1, ...]`; entries lie in
/// `[-1, 1]` and rows are distinct for positions below 10^4.
pub fn positional_encoding(t: usize, d: usize) -> Result<Tensor, NnError> {
    if t == 0 || d == 0 {
        return Err(NnError::Config(format!(
            "positional encoding needs T >= 1 and d >= 1, got T={t}, d={d}"
        )));
    }
    if d % 2 != 0 {
        return Err(NnError::Config(format!(
            "positional encoding width must be even, got {d}"
        )));
    }
    let mut out = Tensor::zeros(&[t, d]);
    for pos in 0..t {
        for i in 0..d / 2 {
            let freq = 1.0 / 10000f64.powf(2.0 * i as f64 / d as f64);
            let angle = pos as f64 * freq;
            out.set2(pos, 2 * i, angle.sin());
            out.set2(pos, 2 * i + 1, angle.cos());
        }
    }
    Ok(out)
}
