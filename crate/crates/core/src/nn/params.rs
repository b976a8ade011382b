//! Named parameter storage shared by every model in the workbench.
//!
//! A `ParamSet` is a flat, ordered list of named tensors. Models hold
//! `ParamId` handles into their own set; training binds the set into a
//! graph, reads gradients back in the same order, and hands both to the
//! optimizer. The checkpoint container serializes exactly this structure.

use super::graph::Var;
use super::tensor::{NnError, Tensor};
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Handle to one tensor inside a [`ParamSet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamId(pub(crate) usize);

/// Ordered collection of named parameter tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a tensor under a unique name.
    pub fn add(&mut self, name: &str, tensor: Tensor) -> ParamId {
        assert!(
            !self.names.iter().any(|n| n == name),
            "duplicate parameter name: {name}"
        );
        self.names.push(name.to_string());
        self.tensors.push(tensor);
        ParamId(self.names.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn tensor(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn tensor_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn tensors(&self) -> impl Iterator<Item = &Tensor> {
        self.tensors.iter()
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.tensors.iter_mut()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(|n| n.as_str()).zip(self.tensors.iter())
    }

    /// Looks a parameter up by name.
    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    /// Replaces every tensor with same-named, same-shaped tensors from `other`.
    pub fn load_from(&mut self, other: &ParamSet) -> Result<(), NnError> {
        for (i, name) in self.names.iter().enumerate() {
            let src = other
                .find(name)
                .ok_or_else(|| NnError::Config(format!("missing parameter {name}")))?;
            if other.tensor(src).shape() != self.tensors[i].shape() {
                return Err(NnError::Dimension(format!(
                    "parameter {name}: shape {:?} vs {:?}",
                    other.tensor(src).shape(),
                    self.tensors[i].shape()
                )));
            }
            self.tensors[i] = other.tensor(src).clone();
        }
        Ok(())
    }

    /// Total number of scalar coordinates.
    pub fn coord_count(&self) -> usize {
        self.tensors.iter().map(Tensor::numel).sum()
    }
}

/// Graph leaves for a bound [`ParamSet`], aligned by index.
pub struct BoundParams {
    pub(crate) vars: Vec<Var>,
}

impl BoundParams {
    pub fn var(&self, id: ParamId) -> Var {
        self.vars[id.0]
    }
}

/// Gaussian init scaled by `1/sqrt(fan_in)`.
pub fn init_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, fan_in: usize) -> Tensor {
    let std = 1.0 / (fan_in.max(1) as f64).sqrt();
    let normal = Normal::new(0.0, std).expect("valid normal");
    let data: Vec<f64> = (0..rows * cols).map(|_| normal.sample(rng)).collect();
    Tensor::new(vec![rows, cols], data).expect("shape matches data")
}

/// One dense layer's handles.
#[derive(Clone, Copy, Debug)]
pub struct LinearIds {
    pub w: ParamId,
    pub b: ParamId,
}

impl LinearIds {
    /// Registers `prefix.w` / `prefix.b` with Gaussian weights and zero bias.
    pub fn init<R: Rng>(
        params: &mut ParamSet,
        prefix: &str,
        d_in: usize,
        d_out: usize,
        rng: &mut R,
    ) -> Self {
        let w = params.add(&format!("{prefix}.w"), init_matrix(rng, d_in, d_out, d_in));
        let b = params.add(&format!("{prefix}.b"), Tensor::zeros(&[1, d_out]));
        LinearIds { w, b }
    }

    /// Registers a layer whose weights and bias start at exactly zero.
    pub fn init_zero(params: &mut ParamSet, prefix: &str, d_in: usize, d_out: usize) -> Self {
        let w = params.add(&format!("{prefix}.w"), Tensor::zeros(&[d_in, d_out]));
        let b = params.add(&format!("{prefix}.b"), Tensor::zeros(&[1, d_out]));
        LinearIds { w, b }
    }

    /// `x @ W + b` inside a graph.
    pub fn apply(
        &self,
        g: &mut super::graph::Graph,
        bound: &BoundParams,
        x: Var,
    ) -> Result<Var, NnError> {
        let xw = g.matmul(x, bound.var(self.w))?;
        g.add_row_broadcast(xw, bound.var(self.b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha8Rng;
    use rand::SeedableRng;

    #[test]
    fn add_and_lookup() {
        let mut p = ParamSet::new();
        let id = p.add("enc.w", Tensor::zeros(&[2, 3]));
        assert_eq!(p.name(id), "enc.w");
        assert_eq!(p.find("enc.w"), Some(id));
        assert_eq!(p.find("missing"), None);
    }

    #[test]
    #[should_panic(expected = "duplicate parameter name")]
    fn duplicate_names_rejected() {
        let mut p = ParamSet::new();
        p.add("w", Tensor::zeros(&[1, 1]));
        p.add("w", Tensor::zeros(&[1, 1]));
    }

    #[test]
    fn init_is_seed_deterministic() {
        let mut r1 = ChaCha8Rng::seed_from_u64(7);
        let mut r2 = ChaCha8Rng::seed_from_u64(7);
        let a = init_matrix(&mut r1, 4, 5, 4);
        let b = init_matrix(&mut r2, 4, 5, 4);
        assert_eq!(a, b);
    }

    #[test]
    fn load_from_checks_shapes() {
        let mut dst = ParamSet::new();
        dst.add("w", Tensor::zeros(&[2, 2]));
        let mut src = ParamSet::new();
        src.add("w", Tensor::zeros(&[3, 2]));
        assert!(dst.load_from(&src).is_err());
    }
}
