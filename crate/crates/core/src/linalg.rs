//! Small dense complex linear algebra.
//!
//! State vectors, operators and density matrices on tensor-product spaces of
//! dimension at most a few dozen. Storage is dense and row-major. Every
//! Kronecker product uses the left operand as the major (slow) index, so
//! `|a⟩ ⊗ |b⟩` has amplitude `a[i] * b[j]` at index `i * dim(b) + j`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Largest dimension a tensor product may produce.
pub const MAX_DIM: usize = 4096;

/// Tolerance for algebraic identities (normalization, unitarity, Hermiticity, trace).
pub const ALGEBRA_TOL: f64 = 1e-12;

/// Smallest eigenvalue accepted for a positive semidefinite matrix.
pub const EIGEN_TOL: f64 = 1e-10;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Builds a complex scalar, rejecting NaN and infinite components.
pub fn complex(re: f64, im: f64) -> Result<C64> {
    if re.is_finite() && im.is_finite() {
        Ok(C64::new(re, im))
    } else {
        Err(Error::NonFinite("complex scalar"))
    }
}

fn all_finite(values: &[C64]) -> bool {
    values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

fn index_labels(dim: usize) -> Vec<String> {
    (0..dim).map(|i| i.to_string()).collect()
}

/// A vector of complex amplitudes over a labelled basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    amplitudes: Vec<C64>,
    labels: Vec<String>,
}

impl StateVector {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        let labels = index_labels(amplitudes.len());
        Self::with_labels(amplitudes, labels)
    }

    pub fn with_labels(amplitudes: Vec<C64>, labels: Vec<String>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidInput("state vector must be non-empty".into()));
        }
        if labels.len() != amplitudes.len() {
            return Err(Error::DimensionMismatch {
                left: amplitudes.len(),
                right: labels.len(),
            });
        }
        if !all_finite(&amplitudes) {
            return Err(Error::NonFinite("state vector"));
        }
        Ok(Self { amplitudes, labels })
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    /// The computational basis vector `e_index` of the given dimension.
    pub fn basis(dim: usize, index: usize) -> Self {
        assert!(
            index < dim,
            "basis index {index} out of range for dim {dim}"
        );
        let mut amplitudes = vec![ZERO; dim];
        amplitudes[index] = ONE;
        Self {
            amplitudes,
            labels: index_labels(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, index: usize) -> C64 {
        self.amplitudes[index]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn relabel(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: labels.len(),
            });
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= ALGEBRA_TOL
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr().sqrt();
        if n == 0.0 {
            return Err(Error::NotNormalized(0.0));
        }
        Ok(self.scaled(C64::new(1.0 / n, 0.0)))
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self {
            amplitudes: self.amplitudes.iter().map(|&z| z * factor).collect(),
            labels: self.labels.clone(),
        }
    }

    /// Componentwise sum; keeps the labels of `self`.
    pub fn add(&self, other: &Self) -> Result<Self> {
        check_dims(self.dim(), other.dim())?;
        Ok(Self {
            amplitudes: self
                .amplitudes
                .iter()
                .zip(&other.amplitudes)
                .map(|(a, b)| a + b)
                .collect(),
            labels: self.labels.clone(),
        })
    }

    /// `⟨self|other⟩`, conjugate-linear in `self`.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        check_dims(self.dim(), other.dim())?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// True when both states are normalized and `|⟨self|other⟩| = 1` within `tol`.
    pub fn equals_up_to_phase(&self, other: &Self, tol: f64) -> bool {
        match self.inner(other) {
            Ok(overlap) => {
                (self.norm_sqr() - 1.0).abs() <= tol
                    && (other.norm_sqr() - 1.0).abs() <= tol
                    && (overlap.norm() - 1.0).abs() <= tol
            }
            Err(_) => false,
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim());
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// A square complex matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Operator {
    dim: usize,
    entries: Vec<C64>,
}

impl Operator {
    pub fn new(dim: usize, entries: Vec<C64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput(
                "operator dimension must be positive".into(),
            ));
        }
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                left: dim * dim,
                right: entries.len(),
            });
        }
        if !all_finite(&entries) {
            return Err(Error::NonFinite("operator"));
        }
        Ok(Self { dim, entries })
    }

    pub fn from_rows<const N: usize>(rows: [[C64; N]; N]) -> Self {
        Self {
            dim: N,
            entries: rows.into_iter().flatten().collect(),
        }
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> C64) -> Self {
        let mut entries = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                entries.push(f(i, j));
            }
        }
        Self { dim, entries }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |i, j| if i == j { ONE } else { ZERO })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![ZERO; dim * dim],
        }
    }

    /// `|v⟩⟨v|` without any normalization check.
    pub fn projector(v: &StateVector) -> Self {
        let a = v.amplitudes();
        Self::from_fn(v.dim(), |i, j| a[i] * a[j].conj())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.entries[row * self.dim + col]
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self.get(j, i).conj())
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        check_dims(self.dim, other.dim)?;
        let n = self.dim;
        let mut out = vec![ZERO; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.entries[i * n + k];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    out[i * n + j] += a * other.entries[k * n + j];
                }
            }
        }
        Ok(Self {
            dim: n,
            entries: out,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_dims(self.dim, other.dim)?;
        Ok(Self {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|&z| z * factor).collect(),
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `U U† = I` entrywise within `tol`.
    pub fn is_unitary(&self, tol: f64) -> bool {
        let product = self
            .matmul(&self.adjoint())
            .expect("operator and its adjoint share a dimension");
        product.max_abs_diff(&Operator::identity(self.dim)) <= tol
    }

    pub fn hermiticity_error(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    /// Real eigenvalues of a Hermitian matrix in ascending order.
    ///
    /// Only the lower triangle is read, so the caller must check Hermiticity first.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let m = DMatrix::from_row_slice(self.dim, self.dim, &self.entries);
        let mut values: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        values.sort_by(f64::total_cmp);
        values
    }
}

/// A Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Operator", into = "Operator")]
pub struct DensityMatrix {
    inner: Operator,
}

impl DensityMatrix {
    pub fn new(dim: usize, entries: Vec<C64>) -> Result<Self> {
        Self::from_operator(Operator::new(dim, entries)?)
    }

    /// Validates Hermiticity, unit trace and eigenvalue positivity.
    pub fn from_operator(op: Operator) -> Result<Self> {
        let herm = op.hermiticity_error();
        if herm > ALGEBRA_TOL {
            return Err(Error::NotHermitian(herm));
        }
        let trace = op.trace();
        if (trace.re - 1.0).abs() > ALGEBRA_TOL || trace.im.abs() > ALGEBRA_TOL {
            return Err(Error::TraceNotOne(trace.re));
        }
        let smallest = op.hermitian_eigenvalues()[0];
        if smallest < -EIGEN_TOL {
            return Err(Error::NotPositive(smallest));
        }
        Ok(Self { inner: op })
    }

    /// Convex combination `Σ wᵢ ρᵢ`; weights must be nonnegative and sum to one.
    pub fn mixture(parts: &[(f64, &DensityMatrix)]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidInput("empty mixture".into()))?;
        let mut acc = Operator::zeros(first.1.dim());
        for &(w, rho) in parts {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::OutOfRange {
                    name: "mixture weight",
                    value: w,
                    range: "[0, 1]",
                });
            }
            acc = acc.add(&rho.inner.scaled(C64::new(w, 0.0)))?;
        }
        Self::from_operator(acc)
    }

    pub fn dim(&self) -> usize {
        self.inner.dim
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.inner.get(row, col)
    }

    pub fn entries(&self) -> &[C64] {
        self.inner.entries()
    }

    pub fn as_operator(&self) -> &Operator {
        &self.inner
    }

    pub fn trace(&self) -> f64 {
        self.inner.trace().re
    }

    /// `Tr(ρ²)`.
    pub fn purity(&self) -> f64 {
        trace_product(self, self).expect("a density matrix has a real purity")
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.inner.hermitian_eigenvalues()
    }

    /// Probability of the basis state `index`, the diagonal entry.
    pub fn population(&self, index: usize) -> f64 {
        self.get(index, index).re
    }
}

impl TryFrom<Operator> for DensityMatrix {
    type Error = Error;

    fn try_from(op: Operator) -> Result<Self> {
        Self::from_operator(op)
    }
}

impl From<DensityMatrix> for Operator {
    fn from(rho: DensityMatrix) -> Self {
        rho.inner
    }
}

fn check_dims(left: usize, right: usize) -> Result<()> {
    if left == right {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { left, right })
    }
}

fn checked_product_dim(a: usize, b: usize) -> Result<usize> {
    match a.checked_mul(b) {
        Some(d) if d <= MAX_DIM => Ok(d),
        Some(d) => Err(Error::DimensionOverflow(d)),
        None => Err(Error::DimensionOverflow(usize::MAX)),
    }
}

/// Kronecker product with the left operand as the major index.
pub trait Tensor: Sized {
    fn tensor(&self, other: &Self) -> Result<Self>;
}

impl Tensor for StateVector {
    fn tensor(&self, other: &Self) -> Result<Self> {
        checked_product_dim(self.dim(), other.dim())?;
        let mut amplitudes = Vec::with_capacity(self.dim() * other.dim());
        let mut labels = Vec::with_capacity(self.dim() * other.dim());
        for (a, la) in self.amplitudes.iter().zip(&self.labels) {
            for (b, lb) in other.amplitudes.iter().zip(&other.labels) {
                amplitudes.push(a * b);
                labels.push(format!("{la}⊗{lb}"));
            }
        }
        Ok(Self { amplitudes, labels })
    }
}

impl Tensor for Operator {
    fn tensor(&self, other: &Self) -> Result<Self> {
        let dim = checked_product_dim(self.dim, other.dim)?;
        let nb = other.dim;
        Ok(Operator::from_fn(dim, |i, j| {
            self.get(i / nb, j / nb) * other.get(i % nb, j % nb)
        }))
    }
}

pub fn tensor<T: Tensor>(a: &T, b: &T) -> Result<T> {
    a.tensor(b)
}

/// Kronecker product of a non-empty list of factors, left to right.
pub fn tensor_all<T: Tensor + Clone>(factors: &[T]) -> Result<T> {
    let (first, rest) = factors
        .split_first()
        .ok_or_else(|| Error::InvalidInput("empty tensor product".into()))?;
    rest.iter().try_fold(first.clone(), |acc, f| acc.tensor(f))
}

/// Matrix-vector product `op · v`; labels of `v` are kept.
pub fn apply(op: &Operator, v: &StateVector) -> Result<StateVector> {
    check_dims(op.dim, v.dim())?;
    let n = op.dim;
    let amplitudes = (0..n)
        .map(|i| {
            op.entries[i * n..(i + 1) * n]
                .iter()
                .zip(v.amplitudes())
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect();
    Ok(StateVector {
        amplitudes,
        labels: v.labels.clone(),
    })
}

/// The pure-state density matrix `|v⟩⟨v|`.
pub fn outer(v: &StateVector) -> Result<DensityMatrix> {
    if !v.is_normalized() {
        return Err(Error::NotNormalized(v.norm_sqr()));
    }
    DensityMatrix::from_operator(Operator::projector(v))
}

/// `op · ρ · op†`.
///
/// A non-unitary operator is logged and the product is still returned; the
/// result is then only guaranteed to be Hermitian.
pub fn conjugate_evolve(rho: &DensityMatrix, op: &Operator) -> Result<DensityMatrix> {
    check_dims(rho.dim(), op.dim)?;
    let evolved = op.matmul(&rho.inner)?.matmul(&op.adjoint())?;
    if op.is_unitary(ALGEBRA_TOL) {
        DensityMatrix::from_operator(evolved)
    } else {
        log::warn!("conjugate_evolve called with a non-unitary operator");
        Ok(DensityMatrix { inner: evolved })
    }
}

/// `Re Tr(a · b)`; fails if the imaginary part exceeds `EIGEN_TOL`.
pub fn trace_product(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    trace_product_op(&a.inner, &b.inner)
}

pub(crate) fn trace_product_op(a: &Operator, b: &Operator) -> Result<f64> {
    check_dims(a.dim, b.dim)?;
    let n = a.dim;
    let mut tr = ZERO;
    for i in 0..n {
        for k in 0..n {
            tr += a.get(i, k) * b.get(k, i);
        }
    }
    if tr.im.abs() >= EIGEN_TOL {
        return Err(Error::NonRealTrace(tr.im));
    }
    Ok(tr.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn complex_rejects_non_finite() {
        assert!(complex(f64::NAN, 0.0).is_err());
        assert!(complex(0.0, f64::INFINITY).is_err());
        assert_eq!(complex(1.0, -2.0).unwrap(), c(1.0, -2.0));
    }

    #[test]
    fn tensor_of_basis_vectors() {
        let x = StateVector::basis(2, 0);
        let y = StateVector::basis(2, 1);
        let xy = tensor(&x, &y).unwrap();
        assert_eq!(xy.amplitudes(), &[ZERO, ONE, ZERO, ZERO]);
        let yx = tensor(&y, &x).unwrap();
        assert_eq!(yx.amplitudes(), &[ZERO, ZERO, ONE, ZERO]);
        assert_eq!(xy.labels()[1], "0⊗1");
    }

    #[test]
    fn tensor_of_identities_is_identity() {
        let i4 = tensor(&Operator::identity(2), &Operator::identity(2)).unwrap();
        assert_eq!(i4, Operator::identity(4));
    }

    #[test]
    fn tensor_guard() {
        let big = StateVector::new(vec![ONE; 64]).unwrap();
        assert_eq!(tensor(&big, &big).unwrap().dim(), MAX_DIM);
        let huge = StateVector::new(vec![ONE; 128]).unwrap();
        assert!(matches!(
            tensor(&huge, &huge),
            Err(Error::DimensionOverflow(16384))
        ));
    }

    #[test]
    fn apply_identity_and_beamsplitter_column() {
        let v = StateVector::from_real(&[0.5, 0.5, 0.5, 0.5]).unwrap();
        assert_eq!(apply(&Operator::identity(4), &v).unwrap(), v);

        let h = FRAC_1_SQRT_2;
        let b = Operator::from_rows([[c(h, 0.0), c(0.0, h)], [c(0.0, h), c(h, 0.0)]]);
        let out = apply(&b, &StateVector::basis(2, 0)).unwrap();
        assert!((out.amplitude(0) - c(h, 0.0)).norm() < 1e-15);
        assert!((out.amplitude(1) - c(0.0, h)).norm() < 1e-15);
    }

    #[test]
    fn apply_dimension_mismatch() {
        let err = apply(&Operator::identity(4), &StateVector::basis(2, 0)).unwrap_err();
        assert!(matches!(
            err,
            Error::DimensionMismatch { left: 4, right: 2 }
        ));
    }

    #[test]
    fn outer_products() {
        let rho = outer(&StateVector::basis(2, 0)).unwrap();
        assert_eq!(rho.entries(), &[ONE, ZERO, ZERO, ZERO]);

        let h = FRAC_1_SQRT_2;
        let bell = StateVector::from_real(&[h, 0.0, 0.0, h]).unwrap();
        let rho = outer(&bell).unwrap();
        for (i, j) in [(0, 0), (0, 3), (3, 0), (3, 3)] {
            assert!((rho.get(i, j).re - 0.5).abs() < 1e-15);
        }
        assert!(rho.get(1, 1).norm() < 1e-15);
        assert!((rho.purity() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn outer_rejects_unnormalized() {
        let v = StateVector::from_real(&[1.0, 1.0]).unwrap();
        assert!(matches!(outer(&v), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn density_validation() {
        // Not Hermitian.
        let err = DensityMatrix::new(2, vec![c(0.5, 0.0), c(0.1, 0.0), ZERO, c(0.5, 0.0)]);
        assert!(matches!(err, Err(Error::NotHermitian(_))));
        // Wrong trace.
        let err = DensityMatrix::new(2, vec![ONE, ZERO, ZERO, ONE]);
        assert!(matches!(err, Err(Error::TraceNotOne(_))));
        // Negative eigenvalue.
        let err = DensityMatrix::new(2, vec![c(1.5, 0.0), ZERO, ZERO, c(-0.5, 0.0)]);
        assert!(matches!(err, Err(Error::NotPositive(_))));
    }

    #[test]
    fn evolve_by_identity() {
        let rho = DensityMatrix::new(2, vec![c(0.7, 0.0), c(0.1, 0.2), c(0.1, -0.2), c(0.3, 0.0)])
            .unwrap();
        let out = conjugate_evolve(&rho, &Operator::identity(2)).unwrap();
        assert!(out.as_operator().max_abs_diff(rho.as_operator()) < 1e-15);
    }

    #[test]
    fn non_unitary_evolution_still_computes() {
        let rho = outer(&StateVector::basis(2, 0)).unwrap();
        let op = Operator::identity(2).scaled(c(2.0, 0.0));
        let out = conjugate_evolve(&rho, &op).unwrap();
        assert!((out.trace() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn trace_product_of_pure_state_is_one() {
        let v = StateVector::new(vec![c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        let rho = outer(&v).unwrap();
        assert!((trace_product(&rho, &rho).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn density_serde_validates() {
        let rho = outer(&StateVector::basis(2, 1)).unwrap();
        let json = serde_json::to_string(&rho).unwrap();
        let back: DensityMatrix = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rho);
        let bad = json.replace("1.0", "2.0");
        assert!(serde_json::from_str::<DensityMatrix>(&bad).is_err());
    }
}
