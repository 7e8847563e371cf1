use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::search::{anneal, ascend, smooth_energy, best_of, energy, pull_back, Params, RatioObjective, Tracker};
use super::{ConstantEstimate, EstimateKind, SearchConfig};
use crate::dyadic::{expectation_scalar, DyadicTable};
use crate::error::{shape_err, DclabError, Result};
use crate::linalg::{dot, mat_vec};
use crate::martingale::WalshPaleyMartingale;
use crate::quadform::{block_embedding, counterexample_form, NormedSpace, QuadraticForm, Variant};

/// Second-difference sums of a quadratic form along a martingale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcSumReport {
    /// `E Σ_k |Δ²q(f_{k-1}, df_k)| = 2 E Σ_k |q(df_k)|`.
    pub absolute: f64,
    /// `E Σ_k Δ²q(f_{k-1}, df_k)`.
    pub signed: f64,
    /// `2 E q(fₙ) - 2 q(f₀)`, which the signed sum telescopes to.
    pub telescoped: f64,
    /// `E‖fₙ‖²_X`.
    pub terminal_energy: f64,
    /// `absolute / terminal_energy`, or 0 for a zero terminal.
    pub ratio: f64,
}

fn check_dims(q: &QuadraticForm, space: &NormedSpace, m: usize) -> Result<()> {
    if q.dim() != space.dim() || q.dim() != m {
        return Err(shape_err(
            format!("form, space and martingale of dimension {}", q.dim()),
            format!("space {} and martingale {m}", space.dim()),
        ));
    }
    Ok(())
}

pub fn dc_sum(q: &QuadraticForm, space: &NormedSpace, mart: &WalshPaleyMartingale) -> Result<DcSumReport> {
    check_dims(q, space, mart.dim())?;
    let mut absolute = 0.0;
    let mut signed = 0.0;
    for k in 1..=mart.depth() {
        let inc = mart.increments(k);
        let nodes = inc.len() / mart.dim();
        let (mut a, mut s) = (0.0, 0.0);
        for d in inc.chunks(mart.dim()) {
            let v = q.eval(d);
            a += v.abs();
            s += v;
        }
        absolute += 2.0 * a / nodes as f64;
        signed += 2.0 * s / nodes as f64;
    }
    let terminal = mart.terminal();
    let eq = expectation_scalar(&terminal.map_scalar(|x| q.eval(x)));
    let telescoped = 2.0 * eq - 2.0 * q.eval(mart.initial());
    let terminal_energy = expectation_scalar(&terminal.map_scalar(|x| space.norm(x).powi(2)));
    let ratio = if terminal_energy > 0.0 { absolute / terminal_energy } else { 0.0 };
    Ok(DcSumReport { absolute, signed, telescoped, terminal_energy, ratio })
}

struct DcObjective<'a> {
    q: &'a QuadraticForm,
    space: &'a NormedSpace,
}

impl RatioObjective for DcObjective<'_> {
    fn energy(&self, p: &Params) -> f64 {
        energy(self.space, &p.leaves(), p.m, None)
    }

    fn ratio(&self, p: &Params, want_grad: bool) -> (f64, Option<Params>) {
        let (n, m) = (p.n, p.m);
        let leaves = p.leaves();
        let mut leaf_grad = Vec::new();
        let d = energy(self.space, &leaves, m, want_grad.then_some(&mut leaf_grad));
        if !(d > 0.0) {
            return (0.0, None);
        }
        let mut num = 0.0;
        let mut grad = want_grad.then(|| Params::zeros(n, m));
        let mut tq = vec![0.0; m];
        for (k, level) in p.inc.iter().enumerate() {
            let w = 2.0 / (1usize << k) as f64;
            for (node, dv) in level.chunks(m).enumerate() {
                mat_vec(self.q.matrix(), dv, &mut tq);
                let v = dot(&tq, dv);
                num += w * v.abs();
                if let Some(g) = grad.as_mut() {
                    if v != 0.0 {
                        let c = w * v.signum() * 2.0;
                        let gd = &mut g.inc[k][node * m..(node + 1) * m];
                        gd.iter_mut().zip(&tq).for_each(|(a, b)| *a = c * b);
                    }
                }
            }
        }
        let r = num / d;
        let grad = grad.map(|g| {
            let rows = (leaves.len() / m) as f64;
            let gd = pull_back(n, m, &leaf_grad, 1.0 / rows);
            // (∇N - r ∇D) / D
            let mut out = g.axpy(-r, &gd);
            out.scale(1.0 / d);
            out
        });
        (r, grad)
    }

    fn smoothed(&self, p: &Params, delta: f64) -> (f64, Params) {
        let (n, m) = (p.n, p.m);
        let leaves = p.leaves();
        let mut leaf_grad = Vec::new();
        let d = smooth_energy(self.space, &leaves, m, delta, &mut leaf_grad);
        let mut num = 0.0;
        let mut g = Params::zeros(n, m);
        let mut tq = vec![0.0; m];
        for (k, level) in p.inc.iter().enumerate() {
            let w = 2.0 / (1usize << k) as f64;
            for (node, dv) in level.chunks(m).enumerate() {
                mat_vec(self.q.matrix(), dv, &mut tq);
                let v = dot(&tq, dv);
                let a = (v * v + delta * delta).sqrt();
                num += w * (a - delta);
                let c = w * v / a * 2.0;
                let gd = &mut g.inc[k][node * m..(node + 1) * m];
                gd.iter_mut().zip(&tq).for_each(|(x, y)| *x = c * y);
            }
        }
        let r = num / d;
        let rows = (leaves.len() / m) as f64;
        let gd = pull_back(n, m, &leaf_grad, 1.0 / rows);
        let mut out = g.axpy(-r, &gd);
        out.scale(1.0 / d);
        (r, out)
    }
}

fn check_search(n: usize, m: usize, cfg: &SearchConfig) -> Result<()> {
    if n == 0 || n > crate::dyadic::MAX_DEPTH {
        return Err(DclabError::Range(format!("depth {n} outside 1..={}", crate::dyadic::MAX_DEPTH)));
    }
    if m == 0 {
        return Err(DclabError::Range("dimension must be positive".into()));
    }
    if cfg.restarts == 0 {
        return Err(DclabError::Config("at least one restart is required".into()));
    }
    Ok(())
}

/// Lower bound for the smallest `C` with `E Σ|Δ²q(f_{k-1}, df_k)| ≤ C E‖fₙ‖²`
/// over martingales of depth `n`.
///
/// Odd restarts search the Rademacher family `f_k = Σ_{j≤k} η_j x_j`, even
/// restarts arbitrary martingales. The reported value is recomputed from the
/// witness with [`dc_sum`].
pub fn dc_lower_bound(q: &QuadraticForm, space: &NormedSpace, n: usize, cfg: &SearchConfig) -> Result<ConstantEstimate> {
    let m = space.dim();
    check_search(n, m, cfg)?;
    check_dims(q, space, m)?;
    let obj = DcObjective { q, space };
    let run = |i: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(i as u64));
        let tied = i % 2 == 1;
        let start = match (&cfg.warm_start, i) {
            (Some(w), 0) if w.depth() == n && w.dim() == m => Params::from_martingale(w),
            _ => Params::random(n, m, tied, &mut rng),
        };
        let mut tracker = Tracker::default();
        let (p, _) = anneal(&obj, start, cfg.steps, tied, &mut tracker);
        let (p, r) = ascend(&obj, p, cfg.steps, tied, &mut tracker);
        (r, p, tracker)
    };
    let (_, _, best, tracker) = best_of(cfg.restarts, run).expect("at least one restart");
    let witness = best.to_martingale();
    let value = dc_sum(q, space, &witness)?.ratio;
    Ok(ConstantEstimate {
        kind: EstimateKind::Dc,
        value,
        witness,
        signs: None,
        depth: n,
        dim: m,
        restarts: cfg.restarts,
        seed: cfg.seed,
        max_evaluated: tracker.max_ratio.max(value),
        evaluations: tracker.evaluations + 1,
    })
}

/// Dc lower bounds along a family of forms on `R^m ⊕ R^m` of increasing
/// block size `m`, such that [`block_embedding`] maps each member isometrically
/// into the next and intertwines the forms. Each search starts from the
/// previous witness pushed forward, and keeps it when the search does no
/// better, so the returned values are nondecreasing.
pub fn embedded_dc_chain(forms: &[(QuadraticForm, NormedSpace)], n: usize, cfg: &SearchConfig) -> Result<Vec<ConstantEstimate>> {
    let mut out: Vec<ConstantEstimate> = Vec::with_capacity(forms.len());
    for (q, space) in forms {
        let dim = space.dim();
        if dim % 2 != 0 {
            return Err(shape_err("an even-dimensional sum space", dim));
        }
        let warm = match out.last() {
            Some(prev) => Some(prev.witness.map_linear(&block_embedding(prev.dim / 2, dim / 2)?)?),
            None => cfg.warm_start.clone(),
        };
        let mut est = dc_lower_bound(q, space, n, &SearchConfig { warm_start: warm.clone(), ..cfg.clone() })?;
        if let Some(w) = warm.filter(|w| w.depth() == n && w.dim() == dim) {
            let carried = dc_sum(q, space, &w)?.ratio;
            if carried > est.value {
                est.value = carried;
                est.witness = w;
            }
        }
        out.push(est);
    }
    Ok(out)
}

/// [`embedded_dc_chain`] over the Hadamard counterexample forms of the given
/// orders (increasing powers of two).
pub fn hadamard_dc_chain(orders: &[usize], n: usize, cfg: &SearchConfig) -> Result<Vec<ConstantEstimate>> {
    let forms = orders
        .iter()
        .map(|&m| counterexample_form(m, Variant::Hadamard))
        .collect::<Result<Vec<_>>>()?;
    embedded_dc_chain(&forms, n, cfg)
}

/// The largest dc ratio over an explicit family of terminal tables; zero
/// terminals are skipped. Returns `None` when every terminal vanishes.
pub fn dc_family_max(q: &QuadraticForm, space: &NormedSpace, terminals: &[DyadicTable]) -> Result<Option<ConstantEstimate>> {
    let mut best: Option<(f64, WalshPaleyMartingale)> = None;
    let mut evaluations = 0;
    for t in terminals {
        let mart = WalshPaleyMartingale::from_terminal(t.clone());
        let report = dc_sum(q, space, &mart)?;
        if report.terminal_energy == 0.0 {
            continue;
        }
        evaluations += 1;
        if best.as_ref().is_none_or(|(v, _)| report.ratio > *v) {
            best = Some((report.ratio, mart));
        }
    }
    Ok(best.map(|(value, witness)| ConstantEstimate {
        kind: EstimateKind::Dc,
        value,
        depth: witness.depth(),
        dim: witness.dim(),
        witness,
        signs: None,
        restarts: 0,
        seed: 0,
        max_evaluated: value,
        evaluations,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadform::SymOperator;
    use nalgebra::DMatrix;

    fn square() -> (QuadraticForm, NormedSpace) {
        (QuadraticForm::new(SymOperator::identity(1)), NormedSpace::lp(1, 2.0).unwrap())
    }

    #[test]
    fn dc_sum_worked_example() {
        let (q, space) = square();
        let t = DyadicTable::new(2, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let r = dc_sum(&q, &space, &WalshPaleyMartingale::from_terminal(t)).unwrap();
        assert!((r.absolute - 2.5).abs() < 1e-12);
        assert!((r.terminal_energy - 7.5).abs() < 1e-12);
        assert!((r.ratio - 1.0 / 3.0).abs() < 1e-12);
        assert!((r.signed - r.telescoped).abs() < 1e-12);
    }

    #[test]
    fn zero_form_gives_zero() {
        let space = NormedSpace::lp(2, 1.0).unwrap();
        let q = QuadraticForm::zero(2);
        let est = dc_lower_bound(&q, &space, 3, &SearchConfig { restarts: 4, ..Default::default() }).unwrap();
        assert_eq!(est.value, 0.0);
    }

    #[test]
    fn scalar_square_reaches_two() {
        let (q, space) = square();
        let est = dc_lower_bound(&q, &space, 6, &SearchConfig { restarts: 8, ..Default::default() }).unwrap();
        assert!(est.value >= 2.0 - 1e-3, "{}", est.value);
        assert!(est.max_evaluated <= 2.0 + 1e-9);
        assert!((dc_sum(&q, &space, &est.witness).unwrap().ratio - est.value).abs() < 1e-9);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let t = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, -0.3, 0.5, -2.0, 0.1, -0.3, 0.1, 0.7]);
        let q = QuadraticForm::new(SymOperator::new(t).unwrap());
        let space = NormedSpace::lp(3, 3.0).unwrap();
        let obj = DcObjective { q: &q, space: &space };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = Params::random(3, 3, false, &mut rng);
        let (r, g) = obj.ratio(&p, true);
        let g = g.unwrap();
        for (level, idx) in [(0usize, 1usize), (2, 7), (1, 4)] {
            let mut dir = Params::zeros(3, 3);
            dir.inc[level][idx] = 1.0;
            let h = 1e-6;
            let fd = (obj.ratio(&p.axpy(h, &dir), false).0 - r) / h;
            assert!((fd - g.inc[level][idx]).abs() < 1e-4, "{fd} vs {}", g.inc[level][idx]);
        }
        let mut dir = Params::zeros(3, 3);
        dir.initial[2] = 1.0;
        let fd = (obj.ratio(&p.axpy(1e-6, &dir), false).0 - r) / 1e-6;
        assert!((fd - g.initial[2]).abs() < 1e-4);
    }
}
