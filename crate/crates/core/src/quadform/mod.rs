//! Normed spaces, symmetric operators and the quadratic forms they generate.
//!
//! A quadratic form on `R^m` is stored through its unique symmetric generator
//! `T`, so that `q(x) = ⟨Tx, x⟩`. Operators act from a space `X` into its dual
//! `X*`, which is identified with `R^m` through the standard pairing.

mod instances;
mod opnorm;
mod space;

pub use instances::{block_embedding, counterexample_form, duality_form, fullsign_matrix, hadamard_embedding, sylvester_hadamard, Variant};
pub use opnorm::{operator_norm, operator_norm_upper, NormMethod, OperatorNorm, SampleConfig};
pub use space::{dual_exponent, parse_exponent, NormedSpace, Outer};

use nalgebra::{DMatrix, DVector};

use crate::error::{shape_err, DclabError, Result};
use crate::linalg::{asymmetry, max_abs};

/// Default tolerance for algebraic identities.
pub const IDENTITY_TOL: f64 = 1e-10;

/// Symmetry tolerance for [`SymOperator`], relative to `max(1, max|T_ij|)`.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// A real-valued function on `R^m`, evaluated pointwise.
pub trait ScalarFn {
    fn value(&self, x: &[f64]) -> f64;
}

impl<F: Fn(&[f64]) -> f64> ScalarFn for F {
    fn value(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

impl ScalarFn for NormedSpace {
    fn value(&self, x: &[f64]) -> f64 {
        self.norm(x)
    }
}

impl ScalarFn for QuadraticForm {
    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x)
    }
}

/// A symmetric operator `T: X → X*`, i.e. a symmetric `m×m` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymOperator {
    matrix: DMatrix<f64>,
}

impl SymOperator {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(shape_err("square matrix", format!("{}x{}", matrix.nrows(), matrix.ncols())));
        }
        let scale = max_abs(&matrix).max(1.0);
        let gap = asymmetry(&matrix);
        if gap > SYMMETRY_TOL * scale {
            return Err(DclabError::Domain(format!("operator is not symmetric (max |T - Tᵀ| = {gap:e})")));
        }
        let matrix = (&matrix + matrix.transpose()) * 0.5;
        Ok(Self { matrix })
    }

    pub fn zeros(dim: usize) -> Self {
        Self { matrix: DMatrix::zeros(dim, dim) }
    }

    pub fn identity(dim: usize) -> Self {
        Self { matrix: DMatrix::identity(dim, dim) }
    }

    pub fn from_row_slice(dim: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(shape_err(format!("{} entries", dim * dim), entries.len()));
        }
        Self::new(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let v = &self.matrix * DVector::from_column_slice(x);
        v.iter().copied().collect()
    }
}

/// Symmetric part `(B + Bᵀ)/2` of a bilinear form; it generates the same quadratic form.
pub fn symmetrize(b: &DMatrix<f64>) -> Result<SymOperator> {
    if b.nrows() != b.ncols() {
        return Err(shape_err("square matrix", format!("{}x{}", b.nrows(), b.ncols())));
    }
    Ok(SymOperator { matrix: (b + b.transpose()) * 0.5 })
}

/// `q(x) = ⟨Tx, x⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm {
    op: SymOperator,
}

impl QuadraticForm {
    pub fn new(op: SymOperator) -> Self {
        Self { op }
    }

    /// Form generated by an arbitrary square matrix (symmetrised).
    pub fn from_bilinear(b: &DMatrix<f64>) -> Result<Self> {
        Ok(Self::new(symmetrize(b)?))
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(SymOperator::zeros(dim))
    }

    pub fn op(&self) -> &SymOperator {
        &self.op
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.op.matrix
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.bilinear(x, x)
    }

    pub fn try_eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(shape_err(format!("vector of dim {}", self.dim()), x.len()));
        }
        Ok(self.eval(x))
    }

    /// `⟨Tx, y⟩`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let m = &self.op.matrix;
        let mut acc = 0.0;
        for i in 0..m.nrows() {
            let mut row = 0.0;
            for j in 0..m.ncols() {
                row += m[(i, j)] * x[j];
            }
            acc += row * y[i];
        }
        acc
    }

    /// Fréchet derivative `q'(x) = 2Tx`.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.op.apply(x).into_iter().map(|v| 2.0 * v).collect()
    }

    pub fn try_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(shape_err(format!("vector of dim {}", self.dim()), x.len()));
        }
        Ok(self.gradient(x))
    }
}

/// Second difference `Δ²φ(x, u) = φ(x+u) + φ(x-u) - 2φ(x)`.
pub fn delta2<F: ScalarFn + ?Sized>(phi: &F, x: &[f64], u: &[f64]) -> f64 {
    let plus: Vec<f64> = x.iter().zip(u).map(|(a, b)| a + b).collect();
    let minus: Vec<f64> = x.iter().zip(u).map(|(a, b)| a - b).collect();
    phi.value(&plus) + phi.value(&minus) - 2.0 * phi.value(x)
}

/// `T` is symmetric iff `T11`, `T22` are symmetric and `T12ᵀ = T21`.
pub fn block_symmetry_check(
    t11: &DMatrix<f64>,
    t12: &DMatrix<f64>,
    t21: &DMatrix<f64>,
    t22: &DMatrix<f64>,
) -> Result<bool> {
    check_blocks(t11, t12, t21, t22)?;
    let scale = [t11, t12, t21, t22].iter().map(|b| max_abs(b)).fold(1.0, f64::max);
    let tol = SYMMETRY_TOL * scale;
    Ok(asymmetry(t11) <= tol && asymmetry(t22) <= tol && max_abs(&(t12.transpose() - t21)) <= tol)
}

pub(crate) fn check_blocks(
    t11: &DMatrix<f64>,
    t12: &DMatrix<f64>,
    t21: &DMatrix<f64>,
    t22: &DMatrix<f64>,
) -> Result<()> {
    let (a, b) = (t11.nrows(), t22.nrows());
    let ok = t11.ncols() == a
        && t22.ncols() == b
        && t12.shape() == (a, b)
        && t21.shape() == (b, a);
    if !ok {
        return Err(shape_err(
            "conformable blocks (a×a, a×b, b×a, b×b)",
            format!("{:?} {:?} {:?} {:?}", t11.shape(), t12.shape(), t21.shape(), t22.shape()),
        ));
    }
    Ok(())
}

/// `[[T11, T12], [T21, T22]]` without any symmetry check.
pub(crate) fn assemble(
    t11: &DMatrix<f64>,
    t12: &DMatrix<f64>,
    t21: &DMatrix<f64>,
    t22: &DMatrix<f64>,
) -> DMatrix<f64> {
    let (a, b) = (t11.nrows(), t22.nrows());
    let mut m = DMatrix::zeros(a + b, a + b);
    m.view_mut((0, 0), (a, a)).copy_from(t11);
    m.view_mut((0, a), (a, b)).copy_from(t12);
    m.view_mut((a, 0), (b, a)).copy_from(t21);
    m.view_mut((a, a), (b, b)).copy_from(t22);
    m
}

/// Splits a square matrix into blocks at index `a`.
pub fn split_blocks(m: &DMatrix<f64>, a: usize) -> [DMatrix<f64>; 4] {
    let b = m.nrows() - a;
    [
        m.view((0, 0), (a, a)).into_owned(),
        m.view((0, a), (a, b)).into_owned(),
        m.view((a, 0), (b, a)).into_owned(),
        m.view((a, a), (b, b)).into_owned(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetrize_examples() {
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let s = symmetrize(&b).unwrap();
        assert_eq!(s.matrix(), &DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]));
        let sym = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 3.0]);
        assert_eq!(symmetrize(&sym).unwrap().matrix(), &sym);
        assert!(symmetrize(&DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn eval_and_gradient_examples() {
        let q = QuadraticForm::new(SymOperator::identity(2));
        assert_eq!(q.eval(&[3.0, 4.0]), 25.0);
        assert_eq!(q.gradient(&[3.0, 4.0]), vec![6.0, 8.0]);
        let swap = QuadraticForm::new(SymOperator::from_row_slice(2, &[0.0, 0.5, 0.5, 0.0]).unwrap());
        assert_eq!(swap.eval(&[1.0, 1.0]), 1.0);
        assert!(swap.try_eval(&[1.0]).is_err());
    }

    #[test]
    fn delta2_examples() {
        let l1 = NormedSpace::lp(2, 1.0).unwrap();
        assert_eq!(delta2(&l1, &[0.0, 0.0], &[1.0, -1.0]), 4.0);
        let cube = |x: &[f64]| x[0].powi(3);
        assert_eq!(delta2(&cube, &[1.0], &[1.0]), 6.0);
        let q = QuadraticForm::new(SymOperator::from_row_slice(2, &[1.0, -2.0, -2.0, 0.5]).unwrap());
        let u = [0.3, -1.1];
        assert!((delta2(&q, &[5.0, 7.0], &u) - 2.0 * q.eval(&u)).abs() < 1e-12);
    }

    #[test]
    fn nonsymmetric_operator_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(SymOperator::new(m), Err(DclabError::Domain(_))));
    }

    #[test]
    fn block_symmetry_examples() {
        let j = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        let z = DMatrix::zeros(2, 2);
        assert!(block_symmetry_check(&z, &j.transpose(), &j, &z).unwrap());
        assert!(!block_symmetry_check(&z, &j, &j, &z).unwrap());
        assert!(block_symmetry_check(&z, &DMatrix::zeros(2, 3), &j, &z).is_err());
    }
}
