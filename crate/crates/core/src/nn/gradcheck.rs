//! Central-finite-difference verification of analytic gradients.

use super::params::ParamSet;
use super::tensor::{NnError, Tensor};
use rand::seq::SliceRandom;
use rand::Rng;

/// Settings for [`grad_check`].
#[derive(Clone, Copy, Debug)]
pub struct GradCheckConfig {
    /// Central-difference step.
    pub step: f64,
    /// Maximum number of parameter coordinates to probe (all if larger).
    pub max_coords: usize,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-5,
            max_coords: 256,
        }
    }
}

/// Compares analytic gradients against central finite differences.
///
/// `loss_and_grads` must evaluate the deterministic forward function and
/// return the scalar loss together with per-parameter analytic gradients.
/// The numeric side uses only the loss values of perturbed copies, keeping
/// the two routes independent. Returns the max relative error
/// `|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)` over the
/// sampled coordinates.
pub fn grad_check<F, R>(
    params: &ParamSet,
    loss_and_grads: F,
    cfg: GradCheckConfig,
    rng: &mut R,
) -> Result<f64, NnError>
where
    F: Fn(&ParamSet) -> Result<(f64, Vec<Tensor>), NnError>,
    R: Rng,
{
    let (_, analytic) = loss_and_grads(params)?;
    if analytic.len() != params.len() {
        return Err(NnError::Dimension(format!(
            "grad_check: {} gradients for {} parameters",
            analytic.len(),
            params.len()
        )));
    }

    let mut coords: Vec<(usize, usize)> = Vec::new();
    for (k, t) in params.tensors().enumerate() {
        for i in 0..t.numel() {
            coords.push((k, i));
        }
    }
    if coords.len() > cfg.max_coords {
        coords.shuffle(rng);
        coords.truncate(cfg.max_coords);
    }

    let mut worst = 0.0f64;
    let mut scratch = params.clone();
    for (k, i) in coords {
        let original = params.tensors().nth(k).expect("param index").data()[i];

        set_coord(&mut scratch, k, i, original + cfg.step);
        let (loss_plus, _) = loss_and_grads(&scratch)?;
        set_coord(&mut scratch, k, i, original - cfg.step);
        let (loss_minus, _) = loss_and_grads(&scratch)?;
        set_coord(&mut scratch, k, i, original);

        let numeric = (loss_plus - loss_minus) / (2.0 * cfg.step);
        let exact = analytic[k].data()[i];
        let denom = exact.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((exact - numeric).abs() / denom);
    }
    Ok(worst)
}

fn set_coord(params: &mut ParamSet, k: usize, i: usize, v: f64) {
    params
        .tensors_mut()
        .nth(k)
        .expect("param index")
        .data_mut()[i] = v;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::graph::Graph;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn linear_map_checks_to_rounding() {
        let mut params = ParamSet::new();
        let w = params.add("w", Tensor::from_rows(&[vec![0.3, -0.7], vec![1.2, 0.4]]).unwrap());
        let x = Tensor::from_rows(&[vec![0.9, -0.2]]).unwrap();

        let loss_fn = |p: &ParamSet| {
            let mut g = Graph::new();
            let bound = g.bind(p)?;
            let xv = g.leaf(x.clone())?;
            let y = g.matmul(xv, bound.var(w))?;
            let loss = g.sum(y)?;
            let grads = g.backward(loss)?;
            Ok((g.value(loss).data()[0], grads.for_params(&bound, &g)))
        };

        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = grad_check(&params, loss_fn, GradCheckConfig::default(), &mut rng).unwrap();
        assert!(err < 1e-8, "linear gradient error {err}");
    }
}
