use nalgebra::DMatrix;

use super::{assemble, NormedSpace, QuadraticForm, SymOperator};
use crate::error::{DclabError, Result};

/// Finite truncation of the isometric embedding `ℓ₁ → ℓ∞` used by the `ℓ₁` counterexample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// `J` = Sylvester Hadamard matrix of order `m` (`m` a power of two).
    Hadamard,
    /// `J` = all `2^(m-1)` sign rows up to global sign; `‖Jx‖_∞ = ‖x‖₁` exactly.
    FullSign,
}

impl std::str::FromStr for Variant {
    type Err = DclabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hadamard" => Ok(Variant::Hadamard),
            "fullsign" => Ok(Variant::FullSign),
            _ => Err(DclabError::Parse(format!("unknown variant {s:?} (hadamard | fullsign)"))),
        }
    }
}

/// Sylvester construction `H_{2k} = [[H_k, H_k], [H_k, -H_k]]`.
pub fn sylvester_hadamard(m: usize) -> Result<DMatrix<f64>> {
    if m == 0 || !m.is_power_of_two() {
        return Err(DclabError::Config(format!("Hadamard order {m} is not a power of two")));
    }
    Ok(DMatrix::from_fn(m, m, |i, j| if (i & j).count_ones() % 2 == 0 { 1.0 } else { -1.0 }))
}

/// The `2^(m-1) × m` matrix whose rows are all sign vectors with first entry `+1`.
pub fn fullsign_matrix(m: usize) -> Result<DMatrix<f64>> {
    if m == 0 || m > 12 {
        return Err(DclabError::Config(format!("fullsign width must lie in 1..=12, got {m}")));
    }
    let rows = 1usize << (m - 1);
    Ok(DMatrix::from_fn(rows, m, |r, j| {
        if j == 0 || (r >> (m - 1 - j)) & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    }))
}

/// The form `q(x, y) = ⟨y, Jx⟩ + ⟨Jᵀy, x⟩ = 2⟨y, Jx⟩` with generator `[[0, Jᵀ], [J, 0]]`
/// on `ℓ₁ ⊕₁ ℓ₁`.
///
/// `J` has `max|J_ij| = 1`, i.e. norm one as a map `ℓ₁ → ℓ∞`.
pub fn counterexample_form(m: usize, variant: Variant) -> Result<(QuadraticForm, NormedSpace)> {
    let j = match variant {
        Variant::Hadamard => sylvester_hadamard(m)?,
        Variant::FullSign => fullsign_matrix(m)?,
    };
    let (rows, cols) = j.shape();
    let op = assemble(&DMatrix::zeros(cols, cols), &j.transpose(), &j, &DMatrix::zeros(rows, rows));
    let space = NormedSpace::sum1(NormedSpace::lp(cols, 1.0)?, NormedSpace::lp(rows, 1.0)?);
    Ok((QuadraticForm::new(SymOperator::new(op)?), space))
}

/// `(x, y) ↦ ((x, 0), (y, 0))` from `R^m ⊕ R^m` into `R^big ⊕ R^big`.
///
/// Isometric between `ℓ_p^m ⊕ ℓ_r^m` and `ℓ_p^big ⊕ ℓ_r^big` for every `p, r`.
pub fn block_embedding(m: usize, big: usize) -> Result<DMatrix<f64>> {
    if m == 0 || m > big {
        return Err(DclabError::Config(format!("cannot embed order {m} into order {big}")));
    }
    let mut e = DMatrix::zeros(2 * big, 2 * m);
    for i in 0..m {
        e[(i, i)] = 1.0;
        e[(big + i, m + i)] = 1.0;
    }
    Ok(e)
}

/// [`block_embedding`] for powers of two `m ≤ M`. It intertwines the Hadamard
/// counterexample forms, since `H_m` is the leading block of `H_M`.
pub fn hadamard_embedding(m: usize, big: usize) -> Result<DMatrix<f64>> {
    sylvester_hadamard(m)?;
    sylvester_hadamard(big)?;
    block_embedding(m, big)
}

/// The duality pairing `Q(x, x*) = x*(x)` on `X ⊕₁ X*`, generated by `½[[0, I], [I, 0]]`.
pub fn duality_form(space: &NormedSpace) -> Result<(QuadraticForm, NormedSpace)> {
    let NormedSpace::Lp { dim, .. } = space else {
        return Err(DclabError::Config(format!("duality form needs an lp space, got {space}")));
    };
    let m = *dim;
    let half = DMatrix::identity(m, m) * 0.5;
    let op = assemble(&DMatrix::zeros(m, m), &half, &half, &DMatrix::zeros(m, m));
    let sum = NormedSpace::sum1(space.clone(), space.dual());
    Ok((QuadraticForm::new(SymOperator::new(op)?), sum))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadform::block_symmetry_check;
    use crate::quadform::split_blocks;

    #[test]
    fn hadamard_m2_value() {
        let (q, space) = counterexample_form(2, Variant::Hadamard).unwrap();
        assert_eq!(space.to_string(), "sum1(lp:2:1,lp:2:1)");
        assert_eq!(q.eval(&[1.0, 0.0, 0.0, 1.0]), 2.0);
    }

    #[test]
    fn hadamard_m4_blocks() {
        let (q, _) = counterexample_form(4, Variant::Hadamard).unwrap();
        let [a, b, c, d] = split_blocks(q.matrix(), 4);
        assert!(block_symmetry_check(&a, &b, &c, &d).unwrap());
        assert_eq!(crate::linalg::max_abs(&c), 1.0);
        let h = sylvester_hadamard(4).unwrap();
        assert_eq!(&h * h.transpose(), DMatrix::identity(4, 4) * 4.0);
        assert!(counterexample_form(6, Variant::Hadamard).is_err());
    }

    #[test]
    fn embedding_intertwines_forms() {
        let (q2, s2) = counterexample_form(2, Variant::Hadamard).unwrap();
        let (q8, s8) = counterexample_form(8, Variant::Hadamard).unwrap();
        let e = hadamard_embedding(2, 8).unwrap();
        let v = nalgebra::DVector::from_vec(vec![0.5, -1.0, 2.0, 0.25]);
        let w: Vec<f64> = (&e * &v).iter().copied().collect();
        assert_eq!(q8.eval(&w), q2.eval(v.as_slice()));
        assert_eq!(s8.norm(&w), s2.norm(v.as_slice()));
    }

    #[test]
    fn fullsign_is_isometric() {
        let j = fullsign_matrix(3).unwrap();
        assert_eq!(j.shape(), (4, 3));
        let x = nalgebra::DVector::from_vec(vec![0.5, -1.5, 2.0]);
        let jx = &j * &x;
        assert_eq!(jx.amax(), 4.0);
        let (q, space) = counterexample_form(3, Variant::FullSign).unwrap();
        assert_eq!(space.dim(), 7);
        assert_eq!(q.dim(), 7);
        assert!(fullsign_matrix(13).is_err());
    }

    #[test]
    fn duality_form_examples() {
        let (q, space) = duality_form(&NormedSpace::lp(3, 1.0).unwrap()).unwrap();
        assert_eq!(space.to_string(), "sum1(lp:3:1,lp:3:inf)");
        assert_eq!(q.eval(&[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]), 1.0);
        assert_eq!(q.eval(&[1.0, 0.0, 0.0, 0.0, 2.0, 0.0]), 0.0);
    }
}
