//! Dense row-major `f64` tensors.
//!
//! Everything in this crate computes on these: model parameters, activations,
//! gradients, observation batches. Shapes are checked at construction and at
//! every operation; a `NaN`/`Inf` produced by a forward pass is an error
//! state, not a value to propagate silently.

use std::fmt;

/// Errors raised by tensor and graph operations.
#[derive(Debug, Clone, PartialEq)]
pub enum NnError {
    /// Shapes are inconsistent for the requested operation.
    Dimension(String),
    /// A non-finite value (NaN or Inf) appeared; the offending operation is named.
    NonFinite(String),
    /// An invalid configuration value (odd width, zero heads, bad mode).
    Config(String),
}

impl fmt::Display for NnError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NnError::Dimension(m) => write!(f, "dimension error: {m}"),
            NnError::NonFinite(m) => write!(f, "numeric error: non-finite value in {m}"),
            NnError::Config(m) => write!(f, "configuration error: {m}"),
        }
    }
}

impl std::error::Error for NnError {}

/// Dense tensor of 64-bit floats in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Builds a tensor, checking that the shape matches the data length.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, NnError> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(NnError::Dimension(format!(
                "shape {:?} implies {} elements, got {}",
                shape,
                numel,
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let numel: usize = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; numel],
        }
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        let numel: usize = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; numel],
        }
    }

    /// 2-D tensor from nested rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, NnError> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(NnError::Dimension("ragged rows".into()));
        }
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            data.extend_from_slice(row);
        }
        Tensor::new(vec![r, c], data)
    }

    /// Scalar wrapped as a 1x1 tensor.
    pub fn scalar(v: f64) -> Self {
        Tensor {
            shape: vec![1, 1],
            data: vec![v],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    /// Row count of a 2-D tensor.
    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    /// Column count of a 2-D tensor.
    pub fn cols(&self) -> usize {
        self.shape[1]
    }

    pub fn is_matrix(&self) -> bool {
        self.shape.len() == 2
    }

    pub fn at2(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.shape[1] + c]
    }

    pub fn set2(&mut self, r: usize, c: usize, v: f64) {
        let cols = self.shape[1];
        self.data[r * cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.shape[1];
        &self.data[r * c..(r + 1) * c]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn check_finite(&self, ctx: &str) -> Result<(), NnError> {
        if self.all_finite() {
            Ok(())
        } else {
            Err(NnError::NonFinite(ctx.to_string()))
        }
    }

    fn require_matrix(&self, ctx: &str) -> Result<(), NnError> {
        if self.is_matrix() {
            Ok(())
        } else {
            Err(NnError::Dimension(format!(
                "{ctx}: expected 2-D tensor, got shape {:?}",
                self.shape
            )))
        }
    }

    /// `self @ other` for 2-D tensors.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor, NnError> {
        self.require_matrix("matmul lhs")?;
        other.require_matrix("matmul rhs")?;
        let (m, k) = (self.shape[0], self.shape[1]);
        let (k2, n) = (other.shape[0], other.shape[1]);
        if k != k2 {
            return Err(NnError::Dimension(format!(
                "matmul: {m}x{k} @ {k2}x{n}"
            )));
        }
        let mut out = Tensor::zeros(&[m, n]);
        dgemm(
            m, k, n, 1.0, &self.data, k as isize, 1, &other.data, n as isize, 1, 0.0,
            &mut out.data, n as isize, 1,
        );
        Ok(out)
    }

    /// `self @ other^T`.
    pub fn matmul_nt(&self, other: &Tensor) -> Result<Tensor, NnError> {
        self.require_matrix("matmul_nt lhs")?;
        other.require_matrix("matmul_nt rhs")?;
        let (m, k) = (self.shape[0], self.shape[1]);
        let (n, k2) = (other.shape[0], other.shape[1]);
        if k != k2 {
            return Err(NnError::Dimension(format!(
                "matmul_nt: {m}x{k} @ ({n}x{k2})^T"
            )));
        }
        let mut out = Tensor::zeros(&[m, n]);
        dgemm(
            m, k, n, 1.0, &self.data, k as isize, 1, &other.data, 1, k2 as isize, 0.0,
            &mut out.data, n as isize, 1,
        );
        Ok(out)
    }

    /// `self^T @ other`.
    pub fn matmul_tn(&self, other: &Tensor) -> Result<Tensor, NnError> {
        self.require_matrix("matmul_tn lhs")?;
        other.require_matrix("matmul_tn rhs")?;
        let (k, m) = (self.shape[0], self.shape[1]);
        let (k2, n) = (other.shape[0], other.shape[1]);
        if k != k2 {
            return Err(NnError::Dimension(format!(
                "matmul_tn: ({k}x{m})^T @ {k2}x{n}"
            )));
        }
        let mut out = Tensor::zeros(&[m, n]);
        dgemm(
            m, k, n, 1.0, &self.data, 1, m as isize, &other.data, n as isize, 1, 0.0,
            &mut out.data, n as isize, 1,
        );
        Ok(out)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor, NnError> {
        self.zip(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor, NnError> {
        self.zip(other, "sub", |a, b| a - b)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor, NnError> {
        self.zip(other, "mul", |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> Tensor {
        self.map(|v| v * c)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    fn zip(
        &self,
        other: &Tensor,
        ctx: &str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor, NnError> {
        if self.shape != other.shape {
            return Err(NnError::Dimension(format!(
                "{ctx}: shape {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Tensor {
            shape: self.shape.clone(),
            data,
        })
    }
}

// matrixmultiply's dgemm signature is verbose; isolate the unsafe call here.
#[allow(clippy::too_many_arguments)]
fn dgemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    rsa: isize,
    csa: isize,
    b: &[f64],
    rsb: isize,
    csb: isize,
    beta: f64,
    c: &mut [f64],
    rsc: isize,
    csc: isize,
) {
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            rsc,
            csc,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_mismatch_rejected() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::new(vec![2, 3], vec![0.0; 6]).is_ok());
    }

    #[test]
    fn matmul_small() {
        let a = Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Tensor::from_rows(&[vec![5.0, 6.0], vec![7.0, 8.0]]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.data(), &[19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn matmul_transposed_variants_agree() {
        let a = Tensor::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let b = Tensor::from_rows(&[vec![1.0, 0.5], vec![-1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        let c = a.matmul(&b).unwrap();
        // a @ b == a @ (b^T)^T
        let bt = Tensor::from_rows(&[vec![1.0, -1.0, 0.0], vec![0.5, 2.0, 1.0]]).unwrap();
        let c2 = a.matmul_nt(&bt).unwrap();
        assert_eq!(c.data(), c2.data());
        // (a^T)^T @ b via matmul_tn
        let at = Tensor::from_rows(&[vec![1.0, 4.0], vec![2.0, 5.0], vec![3.0, 6.0]]).unwrap();
        let c3 = at.matmul_tn(&b).unwrap();
        assert_eq!(c.data(), c3.data());
    }

    #[test]
    fn finiteness_check() {
        let t = Tensor::new(vec![1, 2], vec![1.0, f64::NAN]).unwrap();
        assert!(t.check_finite("test").is_err());
    }
}
