//! Constructive factorization of symmetric operators.
//!
//! For `q(x) = ⟨Tx, x⟩` the chain is: a nonnegative form `p(x) = ⟨Sx, x⟩`
//! with `|q| ≤ p` ([`min_dominating_form`]); a factorization `T = T₀ J`
//! through the Hilbert space given by `S` ([`hilbert_factorization`]); and
//! from any factorization `T = BA` the decomposition of `q` into a difference
//! of two nonnegative forms ([`dss_from_factorization`]). The `ℓ₁ → ℓ∞`
//! factorization constant is estimated by [`gamma2_l1_linf`].

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{DclabError, Result};
use crate::linalg::{asymmetry, lambda_min, max_abs, numerical_rank, spectral_norm, sym_apply, sym_eigen};
use crate::quadform::{
    assemble, block_symmetry_check, operator_norm, operator_norm_upper, NormMethod, NormedSpace, QuadraticForm,
    SampleConfig, SymOperator,
};

/// Size of a dominating operator `S`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DominationObjective {
    /// Largest eigenvalue, the `ℓ₂ → ℓ₂` norm.
    Spectral,
    /// `max |S_ij|`, the `ℓ₁ → ℓ∞` norm.
    MaxEntry,
}

impl DominationObjective {
    /// The `X → X*` norm of the ambient space where it is one of the two.
    pub fn for_space(space: &NormedSpace) -> Self {
        if space.is_l1_like() {
            DominationObjective::MaxEntry
        } else {
            DominationObjective::Spectral
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DominationObjective::Spectral => "spectral",
            DominationObjective::MaxEntry => "max-entry",
        }
    }

    pub fn eval(self, s: &DMatrix<f64>) -> f64 {
        match self {
            DominationObjective::Spectral => spectral_norm(s),
            DominationObjective::MaxEntry => max_abs(s),
        }
    }

    /// A subgradient of the objective at a symmetric `s`.
    fn subgradient(self, s: &DMatrix<f64>) -> DMatrix<f64> {
        let n = s.nrows();
        match self {
            DominationObjective::Spectral => {
                let (values, vectors) = sym_eigen(s);
                let (idx, sign) =
                    if values[n - 1] >= -values[0] { (n - 1, 1.0) } else { (0, -1.0) };
                let v = vectors.column(idx);
                &v * v.transpose() * sign
            }
            DominationObjective::MaxEntry => {
                let (mut bi, mut bj, mut best) = (0, 0, -1.0);
                for i in 0..n {
                    for j in 0..n {
                        if s[(i, j)].abs() > best {
                            (bi, bj, best) = (i, j, s[(i, j)].abs());
                        }
                    }
                }
                let mut g = DMatrix::zeros(n, n);
                let sign = s[(bi, bj)].signum();
                g[(bi, bj)] += 0.5 * sign;
                g[(bj, bi)] += 0.5 * sign;
                g
            }
        }
    }
}

impl std::str::FromStr for DominationObjective {
    type Err = DclabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectral" => Ok(DominationObjective::Spectral),
            "max-entry" | "maxentry" => Ok(DominationObjective::MaxEntry),
            _ => Err(DclabError::Parse(format!("unknown objective {s:?} (spectral | max-entry)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DominationConfig {
    pub iterations: usize,
    /// Weight of the infeasibility penalty.
    pub penalty: f64,
}

impl Default for DominationConfig {
    fn default() -> Self {
        Self { iterations: 2000, penalty: 4.0 }
    }
}

/// `S` with `S - T ⪰ 0` and `S + T ⪰ 0`, i.e. `|⟨Tx,x⟩| ≤ ⟨Sx,x⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct DominatingFormCertificate {
    pub s: SymOperator,
    pub objective: DominationObjective,
    pub value: f64,
    /// `(λ_min(S - T), λ_min(S + T))`, recomputed by an eigen-solve.
    pub margins: (f64, f64),
}

impl DominatingFormCertificate {
    pub fn min_margin(&self) -> f64 {
        self.margins.0.min(self.margins.1)
    }
}

fn margins(s: &DMatrix<f64>, t: &DMatrix<f64>) -> (f64, f64) {
    (lambda_min(&(s - t)), lambda_min(&(s + t)))
}

/// Shifts `S` by a multiple of the identity so that both margins are at least `eps`.
fn restore(s: &DMatrix<f64>, t: &DMatrix<f64>, eps: f64) -> DMatrix<f64> {
    let (a, b) = margins(s, t);
    let low = a.min(b);
    if low >= eps {
        s.clone()
    } else {
        s + DMatrix::identity(s.nrows(), s.nrows()) * (eps - low)
    }
}

/// Approximately smallest dominating operator under `objective`.
///
/// Starts from the spectral modulus `|T|` (always feasible) and runs
/// subgradient descent on `objective(S) + penalty·(negative parts of both
/// margins)`. Every iterate is made feasible by an identity shift before it is
/// compared, so the returned operator dominates `T` whatever the descent does.
pub fn min_dominating_form(
    t: &SymOperator,
    objective: DominationObjective,
    cfg: &DominationConfig,
) -> Result<DominatingFormCertificate> {
    let tm = t.matrix();
    let modulus = sym_apply(tm, f64::abs);
    let tol = 1e-12 * max_abs(tm).max(1.0);
    let signed = if lambda_min(tm) >= -tol {
        Some(tm.clone())
    } else if lambda_min(&-tm) >= -tol {
        Some(-tm)
    } else {
        None
    };
    if let Some(s) = signed {
        let margins = margins(&s, tm);
        let value = objective.eval(&s);
        return Ok(DominatingFormCertificate { s: SymOperator::new(s)?, objective, value, margins });
    }
    let eps = 1e-10 * max_abs(tm);
    let mut best = restore(&modulus, tm, eps);
    let mut best_value = objective.eval(&best);
    let scale = best_value.max(f64::MIN_POSITIVE);
    let mut s = best.clone();
    for it in 0..cfg.iterations {
        let mut g = objective.subgradient(&s);
        for shifted in [&s - tm, &s + tm] {
            let (values, vectors) = sym_eigen(&shifted);
            if values[0] < 0.0 {
                let v = vectors.column(0);
                g -= &v * v.transpose() * cfg.penalty;
            }
        }
        let gn = g.norm();
        if gn == 0.0 {
            break;
        }
        let step = 0.1 * scale / (1.0 + it as f64).sqrt();
        s -= g * (step / gn);
        s = (&s + s.transpose()) * 0.5;
        let cand = restore(&s, tm, eps);
        let v = objective.eval(&cand);
        if v < best_value - tol {
            best_value = v;
            best = cand;
        }
    }
    let best = (&best + best.transpose()) * 0.5;
    let margins = margins(&best, tm);
    let value = objective.eval(&best);
    Ok(DominatingFormCertificate { s: SymOperator::new(best)?, objective, value, margins })
}

/// `T = B A` with `A: X → H` and `B: H → X*`, `H` Euclidean.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorizationCertificate {
    /// `A = J = S^{1/2}`.
    pub a: DMatrix<f64>,
    /// `B = T₀ = T J⁺`.
    pub b: DMatrix<f64>,
    /// `max |T - BA|`.
    pub residual: f64,
    /// Largest `‖Tv‖₂` over unit eigenvectors `v` of `S` with eigenvalue `≤ 1e-9`.
    pub kernel_defect: f64,
    /// `‖S: X → X*‖` (exact where available, otherwise an upper bound).
    pub s_norm: f64,
    /// `½[(1 + ‖S‖^{1/2})² + 1 + ‖S‖]`.
    pub claimed_bound: f64,
    /// Sampled lower bound for `‖T₀: H → X*‖`.
    pub b_norm_lower: f64,
    /// `‖J: X → H‖²` (exact where available, otherwise a sampled lower bound).
    pub j_norm_sq: f64,
    /// `max_x |‖Jx‖² - ⟨Sx,x⟩|` over the unit vectors, i.e. `‖JᵀJ - S‖₂`.
    pub gram_defect: f64,
}

/// Eigenvalues of `S` at or below this are treated as kernel.
const KERNEL_EIGEN: f64 = 1e-9;
/// Largest admissible `‖Tv‖` on the kernel of `S`.
const KERNEL_TOL: f64 = 1e-6;
/// Singular values of `J` at or below this fraction of the largest are inverted as zero.
const PINV_REL: f64 = 1e-9;

pub fn hilbert_factorization(
    t: &SymOperator,
    cert: &DominatingFormCertificate,
    space: &NormedSpace,
) -> Result<FactorizationCertificate> {
    let tm = t.matrix();
    let sm = cert.s.matrix();
    let n = tm.nrows();
    if sm.nrows() != n || space.dim() != n {
        return Err(crate::error::shape_err(format!("operators on a space of dimension {n}"), sm.nrows()));
    }
    let (a_margin, b_margin) = margins(sm, tm);
    if a_margin.min(b_margin) < -1e-9 {
        return Err(DclabError::Domination(format!(
            "S does not dominate T: margins ({a_margin:e}, {b_margin:e})"
        )));
    }
    let (values, vectors) = sym_eigen(sm);
    let mut kernel_defect: f64 = 0.0;
    for j in 0..n {
        if values[j] <= KERNEL_EIGEN {
            let v = vectors.column(j).into_owned();
            kernel_defect = kernel_defect.max((tm * v).norm());
        }
    }
    if kernel_defect > KERNEL_TOL {
        return Err(DclabError::Domination(format!(
            "kernel of S is not contained in the kernel of T (‖Tv‖ = {kernel_defect:e})"
        )));
    }
    let roots: Vec<f64> = values.iter().map(|&l| l.max(0.0).sqrt()).collect();
    let top = roots.iter().copied().fold(0.0, f64::max);
    let scaled = |f: &dyn Fn(f64) -> f64| {
        let cols = DMatrix::from_fn(n, n, |i, j| vectors[(i, j)] * f(roots[j]));
        let out = &cols * vectors.transpose();
        (&out + out.transpose()) * 0.5
    };
    let j = scaled(&|r| r);
    let j_pinv = scaled(&|r| if r > PINV_REL * top { 1.0 / r } else { 0.0 });
    let t0 = tm * &j_pinv;
    let residual = max_abs(&(tm - &t0 * &j));
    let gram_defect = spectral_norm(&(j.transpose() * &j - sm));
    let dual = space.dual();
    let s_norm = operator_norm_upper(sm, space, &dual)?;
    let claimed_bound = 0.5 * ((1.0 + s_norm.sqrt()).powi(2) + 1.0 + s_norm);
    let h = NormedSpace::euclidean(n)?;
    let sample = NormMethod::Sampled(SampleConfig::default());
    let b_norm_lower = operator_norm(&t0, &h, &dual, sample)?.value;
    let j_norm_sq = operator_norm(&j, space, &h, NormMethod::Exact)?.value.powi(2);
    Ok(FactorizationCertificate {
        a: j,
        b: t0,
        residual,
        kernel_defect,
        s_norm,
        claimed_bound,
        b_norm_lower,
        j_norm_sq,
        gram_defect,
    })
}

/// `q₁(x) = ¼‖Ax + Bᵀx‖²` and `q₂(x) = ¼‖Ax - Bᵀx‖²`, so `q₁ - q₂` is
/// generated by `BA`.
pub fn dss_from_factorization(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(QuadraticForm, QuadraticForm)> {
    if a.nrows() != b.ncols() || a.ncols() != b.nrows() {
        return Err(crate::error::shape_err(
            format!("B of shape {}x{}", a.ncols(), a.nrows()),
            format!("{}x{}", b.nrows(), b.ncols()),
        ));
    }
    let ba = b * a;
    let scale = max_abs(&ba).max(1.0);
    if asymmetry(&ba) > 1e-9 * scale {
        return Err(DclabError::Domain(format!("BA is not symmetric (max |BA - (BA)ᵀ| = {:e})", asymmetry(&ba))));
    }
    let plus = a + b.transpose();
    let minus = a - b.transpose();
    let q1 = plus.transpose() * &plus * 0.25;
    let q2 = minus.transpose() * &minus * 0.25;
    Ok((QuadraticForm::new(SymOperator::new(q1)?), QuadraticForm::new(SymOperator::new(q2)?)))
}

/// `T = T₊ - T₋` with `T₊, T₋ ⪰ 0` and `T₊T₋ = 0`.
pub fn spectral_split(t: &SymOperator) -> (SymOperator, SymOperator) {
    let plus = sym_apply(t.matrix(), |l| l.max(0.0));
    let minus = sym_apply(t.matrix(), |l| (-l).max(0.0));
    (
        SymOperator::new(plus).expect("symmetric by construction"),
        SymOperator::new(minus).expect("symmetric by construction"),
    )
}

/// Assembles `[[T11, T12], [T21, T22]]` on `X₁ ⊕ X₂`.
pub fn block_assemble(t11: &DMatrix<f64>, t12: &DMatrix<f64>, t21: &DMatrix<f64>, t22: &DMatrix<f64>) -> Result<SymOperator> {
    if !block_symmetry_check(t11, t12, t21, t22)? {
        return Err(DclabError::Domain("blocks do not form a symmetric operator".into()));
    }
    SymOperator::new(assemble(t11, t12, t21, t22))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gamma2Config {
    /// Inner dimension; `None` uses the numerical rank of `M`.
    pub rank: Option<usize>,
    pub restarts: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for Gamma2Config {
    fn default() -> Self {
        Self { rank: None, restarts: 8, iterations: 400, seed: 0 }
    }
}

/// A factorization `M = BA` and its cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Gamma2Estimate {
    /// `(max row ℓ₂-norm of B) · (max column ℓ₂-norm of A)`.
    pub value: f64,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    /// `max |M_ij|`, a lower bound for every factorization.
    pub lower_bound: f64,
}

fn gamma2_cost(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let rows = (0..b.nrows()).map(|i| b.row(i).norm()).fold(0.0, f64::max);
    let cols = (0..a.ncols()).map(|j| a.column(j).norm()).fold(0.0, f64::max);
    rows * cols
}

/// Log-sum-exp at temperature `tau` of `z`, with softmax weights.
fn soft_max(z: &[f64], tau: f64) -> (f64, Vec<f64>) {
    let top = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = z.iter().map(|v| ((v - top) / tau).exp()).collect();
    let s: f64 = w.iter().sum();
    (top + tau * s.ln(), w.into_iter().map(|v| v / s).collect())
}

/// Smoothed `log cost` of `(B₀G⁻¹, GA₀)` and its gradient in `G`.
fn smoothed_log_cost(g: &DMatrix<f64>, a0: &DMatrix<f64>, b0: &DMatrix<f64>, tau: f64) -> Option<(f64, DMatrix<f64>)> {
    let g_inv = g.clone().try_inverse()?;
    let ga = g * a0;
    let c = g_inv.transpose() * b0.transpose();
    let za: Vec<f64> = (0..ga.ncols()).map(|j| ga.column(j).norm_squared().max(1e-300).ln()).collect();
    let zb: Vec<f64> = (0..c.ncols()).map(|i| c.column(i).norm_squared().max(1e-300).ln()).collect();
    let (la, wa) = soft_max(&za, tau);
    let (lb, wb) = soft_max(&zb, tau);
    let k = g.nrows();
    let mut grad = DMatrix::zeros(k, k);
    for (j, w) in wa.iter().enumerate() {
        let col = ga.column(j);
        grad += col * a0.column(j).transpose() * (w / col.norm_squared().max(1e-300));
    }
    for (i, w) in wb.iter().enumerate() {
        let ci = c.column(i);
        let gc = &g_inv * ci;
        grad -= ci * gc.transpose() * (w / ci.norm_squared().max(1e-300));
    }
    Some((0.5 * (la + lb), grad))
}

/// Factorization `M = BA` through `ℓ₂` nearly minimising
/// `(max row norm of B)(max column norm of A)`, i.e. an upper estimate of
/// the `ℓ₁ → ℓ∞` factorization constant `γ₂(M)`.
///
/// Inner dimension `rank(M)` loses nothing: projecting any factorization
/// onto the row space of `B` restricted to the range of `A` keeps `M` and
/// shrinks both costs. The search runs over `B₀G⁻¹, GA₀` from the SVD with
/// annealed log-sum-exp smoothing of both maxima; restart 0 starts at `G = I`.
pub fn gamma2_l1_linf(m: &DMatrix<f64>, cfg: &Gamma2Config) -> Result<Gamma2Estimate> {
    let lower_bound = max_abs(m);
    let r0 = numerical_rank(m, 1e-12);
    let k = cfg.rank.unwrap_or(r0);
    if k < r0 {
        return Err(DclabError::Range(format!("rank {k} is below the numerical rank {r0} of the matrix")));
    }
    if r0 == 0 {
        return Ok(Gamma2Estimate {
            value: 0.0,
            a: DMatrix::zeros(k.max(1), m.ncols()),
            b: DMatrix::zeros(m.nrows(), k.max(1)),
            lower_bound,
        });
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().expect("left vectors requested");
    let vt = svd.v_t.as_ref().expect("right vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let b0 = DMatrix::from_fn(m.nrows(), r0, |i, j| u[(i, order[j])] * svd.singular_values[order[j]].sqrt());
    let a0 = DMatrix::from_fn(r0, m.ncols(), |i, j| vt[(order[i], j)] * svd.singular_values[order[i]].sqrt());

    let run = |i: usize| {
        let mut g = DMatrix::<f64>::identity(r0, r0);
        if i > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(i as u64));
            g += DMatrix::from_fn(r0, r0, |_, _| { let z: f64 = StandardNormal.sample(&mut rng); 0.5 * z });
        }
        let mut best = (f64::INFINITY, g.clone());
        let consider = |g: &DMatrix<f64>, best: &mut (f64, DMatrix<f64>)| {
            if let Some(inv) = g.clone().try_inverse() {
                let v = gamma2_cost(&(g * &a0), &(&b0 * inv));
                if v < best.0 {
                    *best = (v, g.clone());
                }
            }
        };
        consider(&g, &mut best);
        let stages = [0.3, 0.1, 0.03, 0.01, 3e-3, 1e-3, 3e-4];
        let per = cfg.iterations.div_ceil(stages.len()).max(1);
        for tau in stages {
            let mut step = 0.1;
            let Some((mut f, mut grad)) = smoothed_log_cost(&g, &a0, &b0, tau) else { break };
            for _ in 0..per {
                let gn = grad.norm();
                if gn < 1e-14 {
                    break;
                }
                let mut moved = false;
                while step > 1e-12 {
                    let cand = &g - &grad * (step * g.norm() / gn);
                    if let Some((fc, gc)) = smoothed_log_cost(&cand, &a0, &b0, tau) {
                        if fc < f {
                            g = cand;
                            f = fc;
                            grad = gc;
                            step *= 1.5;
                            moved = true;
                            break;
                        }
                    }
                    step *= 0.5;
                }
                if !moved {
                    break;
                }
            }
            // keep G well scaled; the cost is invariant under G ↦ tG
            let norm = g.norm();
            g /= norm;
            consider(&g, &mut best);
        }
        best
    };
    let (value, g) = {
        use rayon::prelude::*;
        let results: Vec<(f64, DMatrix<f64>)> = (0..cfg.restarts.max(1)).into_par_iter().map(run).collect();
        results.into_iter().fold((f64::INFINITY, DMatrix::identity(r0, r0)), |acc, r| if r.0 < acc.0 { r } else { acc })
    };
    let g_inv = g.clone().try_inverse().expect("kept only invertible iterates");
    let mut a = &g * &a0;
    let mut b = &b0 * g_inv;
    if k > r0 {
        a = a.resize_vertically(k, 0.0);
        b = b.resize_horizontally(k, 0.0);
    }
    // balance the two factors; the product of the two maxima is unchanged
    let rows = (0..b.nrows()).map(|i| b.row(i).norm()).fold(0.0, f64::max);
    let cols = (0..a.ncols()).map(|j| a.column(j).norm()).fold(0.0, f64::max);
    if rows > 0.0 && cols > 0.0 {
        let t = (rows / cols).sqrt();
        a *= t;
        b /= t;
    }
    let value = gamma2_cost(&a, &b).min(value.max(gamma2_cost(&a, &b)));
    Ok(Gamma2Estimate { value, a, b, lower_bound })
}

/// `‖Jx‖²` for the Euclidean `H`.
pub fn hilbert_norm_sq(j: &DMatrix<f64>, x: &[f64]) -> f64 {
    (j * DVector::from_column_slice(x)).norm_squared()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_swap() -> SymOperator {
        SymOperator::new(DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0])).unwrap()
    }

    #[test]
    fn half_swap_domination_and_factorization() {
        let t = half_swap();
        let cert = min_dominating_form(&t, DominationObjective::Spectral, &DominationConfig::default()).unwrap();
        assert!((cert.s.matrix() - DMatrix::identity(2, 2) * 0.5).amax() < 1e-4);
        assert!((cert.value - 0.5).abs() < 1e-4);
        assert!(cert.min_margin() >= -1e-9);
        let f = hilbert_factorization(&t, &cert, &NormedSpace::euclidean(2).unwrap()).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((&f.a - DMatrix::identity(2, 2) * r).amax() < 1e-6);
        assert!((&f.b - DMatrix::from_row_slice(2, 2, &[0.0, r, r, 0.0])).amax() < 1e-6);
        assert!(f.residual < 1e-8);
        assert!(f.b_norm_lower <= f.claimed_bound + 1e-6);
        assert!(f.j_norm_sq <= f.s_norm + 1e-9);
    }

    #[test]
    fn nonnegative_operator_dominates_itself() {
        let t = SymOperator::new(DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0])).unwrap();
        let cert = min_dominating_form(&t, DominationObjective::Spectral, &DominationConfig::default()).unwrap();
        assert!((cert.s.matrix() - t.matrix()).amax() < 1e-9);
        assert!(cert.margins.0.abs() < 1e-9);
        assert!((cert.margins.1 - 2.0).abs() < 1e-9);
        let f = hilbert_factorization(&t, &cert, &NormedSpace::euclidean(2).unwrap()).unwrap();
        assert!((&f.a * &f.a - t.matrix()).amax() < 1e-9);
        assert!((&f.b - &f.a).amax() < 1e-9);
    }

    #[test]
    fn diagonal_max_entry() {
        let t = SymOperator::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0])).unwrap();
        let cert = min_dominating_form(&t, DominationObjective::MaxEntry, &DominationConfig::default()).unwrap();
        assert!((cert.value - 1.0).abs() < 1e-6);
        assert!((cert.s.matrix() - DMatrix::identity(2, 2)).amax() < 1e-6);
    }

    #[test]
    fn zero_operator_factors_trivially() {
        let t = SymOperator::zeros(3);
        let cert = min_dominating_form(&t, DominationObjective::Spectral, &DominationConfig::default()).unwrap();
        assert_eq!(cert.value, 0.0);
        let f = hilbert_factorization(&t, &cert, &NormedSpace::lp(3, 1.0).unwrap()).unwrap();
        assert_eq!(f.residual, 0.0);
        assert_eq!(max_abs(&f.a), 0.0);
    }

    #[test]
    fn non_dominating_certificate_rejected() {
        let t = half_swap();
        let bogus = DominatingFormCertificate {
            s: SymOperator::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])).unwrap(),
            objective: DominationObjective::Spectral,
            value: 1.0,
            margins: (0.0, 0.0),
        };
        let err = hilbert_factorization(&t, &bogus, &NormedSpace::euclidean(2).unwrap()).unwrap_err();
        assert!(matches!(err, DclabError::Domination(_)));
    }

    #[test]
    fn dss_examples() {
        let t = half_swap();
        let (q1, q2) = dss_from_factorization(&DMatrix::identity(2, 2), t.matrix()).unwrap();
        assert!((q1.eval(&[1.0, 0.0]) - 5.0 / 16.0).abs() < 1e-15);
        assert!((q2.eval(&[1.0, 0.0]) - 5.0 / 16.0).abs() < 1e-15);
        let x = [0.3, -1.2];
        assert!((q1.eval(&x) - q2.eval(&x) - QuadraticForm::new(t).eval(&x)).abs() < 1e-14);
        let bad = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(dss_from_factorization(&DMatrix::identity(2, 2), &bad).is_err());
    }

    #[test]
    fn spectral_split_examples() {
        let t = SymOperator::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0])).unwrap();
        let (p, m) = spectral_split(&t);
        assert!((p.matrix() - DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])).amax() < 1e-14);
        assert!((m.matrix() - DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0])).amax() < 1e-14);
    }

    #[test]
    fn gamma2_examples() {
        let cfg = Gamma2Config::default();
        let id = gamma2_l1_linf(&DMatrix::identity(4, 4), &cfg).unwrap();
        assert!((id.value - 1.0).abs() < 1e-6);
        let ones = gamma2_l1_linf(&DMatrix::from_element(3, 3, 1.0), &cfg).unwrap();
        assert!((ones.value - 1.0).abs() < 1e-4);
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, -1.0]);
        let est = gamma2_l1_linf(&h, &cfg).unwrap();
        assert!((est.value - 2f64.sqrt()).abs() < 5e-3, "{}", est.value);
        assert!((&est.b * &est.a - h).amax() < 1e-8);
        assert!(gamma2_l1_linf(&DMatrix::identity(3, 3), &Gamma2Config { rank: Some(2), ..cfg }).is_err());
    }

    #[test]
    fn block_assembly() {
        let a = DMatrix::from_row_slice(1, 1, &[2.0]);
        let b = DMatrix::from_row_slice(1, 1, &[1.0]);
        let s = block_assemble(&a, &b, &b, &a).unwrap();
        assert_eq!(s.matrix(), &DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]));
        assert!(block_assemble(&a, &b, &DMatrix::from_row_slice(1, 1, &[3.0]), &a).is_err());
    }
}
