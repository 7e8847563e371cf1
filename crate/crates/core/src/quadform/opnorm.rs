use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::NormedSpace;
use crate::error::{shape_err, Result};
use crate::linalg::{mat_t_vec, mat_vec, spectral_norm};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleConfig {
    pub restarts: usize,
    pub steps: usize,
    pub seed: u64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self { restarts: 16, steps: 200, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormMethod {
    Exact,
    Sampled(SampleConfig),
}

/// Result of an operator-norm computation.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorNorm {
    pub value: f64,
    /// `true` when `value` is the norm itself; otherwise it is a lower bound
    /// attained at `witness`.
    pub exact: bool,
    /// Exact evaluation was requested for an unsupported pair of spaces.
    pub fell_back: bool,
    pub witness: Option<Vec<f64>>,
}

fn check_shape(m: &DMatrix<f64>, from: &NormedSpace, to: &NormedSpace) -> Result<()> {
    if m.ncols() != from.dim() || m.nrows() != to.dim() {
        return Err(shape_err(
            format!("{}x{} matrix", to.dim(), from.dim()),
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    Ok(())
}

fn exact_norm(m: &DMatrix<f64>, from: &NormedSpace, to: &NormedSpace) -> Option<f64> {
    if from.is_l1_like() {
        let best = (0..m.ncols())
            .map(|j| to.norm(m.column(j).as_slice()))
            .fold(0.0, f64::max);
        return Some(best);
    }
    if to.is_linf_like() {
        let dual = from.dual();
        let best = (0..m.nrows())
            .map(|i| {
                let row: Vec<f64> = m.row(i).iter().copied().collect();
                dual.norm(&row)
            })
            .fold(0.0, f64::max);
        return Some(best);
    }
    if from.is_euclidean() && to.is_euclidean() {
        return Some(spectral_norm(m));
    }
    None
}

/// `‖M: from → to‖`.
///
/// Exact for `from = ℓ₁` (largest column norm), `to = ℓ∞` (largest dual row
/// norm) and `ℓ₂ → ℓ₂` (largest singular value). Other pairs are handled by a
/// norm-ascent search whose result is a lower bound attained at a witness.
pub fn operator_norm(m: &DMatrix<f64>, from: &NormedSpace, to: &NormedSpace, method: NormMethod) -> Result<OperatorNorm> {
    check_shape(m, from, to)?;
    match method {
        NormMethod::Exact => match exact_norm(m, from, to) {
            Some(value) => Ok(OperatorNorm { value, exact: true, fell_back: false, witness: None }),
            None => {
                let mut out = sampled_norm(m, from, to, SampleConfig::default());
                out.fell_back = true;
                Ok(out)
            }
        },
        NormMethod::Sampled(cfg) => Ok(sampled_norm(m, from, to, cfg)),
    }
}

/// An upper bound: the exact norm where available, otherwise the Euclidean
/// norm scaled by the comparison constants of both spaces.
pub fn operator_norm_upper(m: &DMatrix<f64>, from: &NormedSpace, to: &NormedSpace) -> Result<f64> {
    check_shape(m, from, to)?;
    if let Some(v) = exact_norm(m, from, to) {
        return Ok(v);
    }
    let (a_from, _) = from.euclidean_comparison();
    let (_, b_to) = to.euclidean_comparison();
    Ok(spectral_norm(m) * b_to / a_from)
}

fn ratio(m: &DMatrix<f64>, from: &NormedSpace, to: &NormedSpace, x: &[f64], y: &mut [f64]) -> f64 {
    let nx = from.norm(x);
    if nx == 0.0 {
        return 0.0;
    }
    mat_vec(m, x, y);
    to.norm(y) / nx
}

fn sampled_norm(m: &DMatrix<f64>, from: &NormedSpace, to: &NormedSpace, cfg: SampleConfig) -> OperatorNorm {
    let n = m.ncols();
    let mut y = vec![0.0; m.nrows()];
    let mut starts: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();
    if let Some(v) = m.clone().svd(false, true).v_t {
        if v.nrows() > 0 {
            starts.push(v.row(0).iter().copied().collect());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.restarts {
        starts.push((0..n).map(|_| StandardNormal.sample(&mut rng)).collect());
    }

    let mut best = 0.0;
    let mut best_x = vec![0.0; n];
    let mut gy = vec![0.0; m.nrows()];
    let mut g = vec![0.0; n];
    let mut gx = vec![0.0; n];
    for start in starts {
        let nx = from.norm(&start);
        if nx == 0.0 {
            continue;
        }
        let mut x: Vec<f64> = start.iter().map(|v| v / nx).collect();
        let mut r = ratio(m, from, to, &x, &mut y);
        let mut step = 0.5;
        for _ in 0..cfg.steps {
            // ascent direction for ‖Mx‖ - r‖x‖ at ‖x‖ = 1
            to.norming_into(&y, &mut gy);
            mat_t_vec(m, &gy, &mut g);
            from.norming_into(&x, &mut gx);
            let dir: Vec<f64> = g.iter().zip(&gx).map(|(a, b)| a - r * b).collect();
            let dn = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            if dn < 1e-14 {
                break;
            }
            let mut improved = false;
            while step > 1e-10 {
                let cand: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + step * d / dn).collect();
                let cn = from.norm(&cand);
                let cand: Vec<f64> = cand.iter().map(|v| v / cn).collect();
                let rc = ratio(m, from, to, &cand, &mut y);
                if rc > r {
                    x = cand;
                    r = rc;
                    improved = true;
                    step *= 1.5;
                    break;
                }
                step *= 0.5;
            }
            if !improved {
                break;
            }
            mat_vec(m, &x, &mut y);
        }
        if r > best {
            best = r;
            best_x = x;
        }
    }
    OperatorNorm { value: best, exact: false, fell_back: false, witness: Some(best_x) }
}
