use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::search::{anneal, ascend, best_of, energy, pull_back, smooth_energy, Params, RatioObjective, Tracker};
use super::{ConstantEstimate, EstimateKind, SearchConfig};
use crate::dyadic::{expectation_scalar, DyadicTable, MAX_DEPTH};
use crate::error::{shape_err, DclabError, Result};
use crate::linalg::{mat_t_vec, mat_vec};
use crate::martingale::{transform, PredictableSigns, WalshPaleyMartingale};
use crate::quadform::NormedSpace;

/// Which transforming sequences are admitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignMode {
    /// Constant signs `ε ∈ {±1}ⁿ`.
    Fixed,
    /// Predictable `{±1}`-valued `ε_k`, measurable with respect to `Σ_{k-1}`.
    Predictable,
}

impl std::str::FromStr for SignMode {
    type Err = DclabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(SignMode::Fixed),
            "predictable" => Ok(SignMode::Predictable),
            _ => Err(DclabError::Parse(format!("unknown sign mode {s:?} (fixed | predictable)"))),
        }
    }
}

/// Sign trees with at most this many nodes are searched exhaustively.
const EXHAUSTIVE_NODES: usize = 15;

fn check_operator(t: &DMatrix<f64>, x: &NormedSpace, y: &NormedSpace) -> Result<()> {
    if t.ncols() != x.dim() || t.nrows() != y.dim() {
        return Err(shape_err(format!("{}x{} operator", y.dim(), x.dim()), format!("{}x{}", t.nrows(), t.ncols())));
    }
    Ok(())
}

/// `E‖Σ_k ε_k T df_k‖²_Y / E‖fₙ‖²_X` (0 for a zero terminal).
pub fn umd_ratio(
    t: &DMatrix<f64>,
    x: &NormedSpace,
    y: &NormedSpace,
    mart: &WalshPaleyMartingale,
    signs: &PredictableSigns,
) -> Result<f64> {
    check_operator(t, x, y)?;
    let g = transform(t, mart, signs)?;
    let den = expectation_scalar(&mart.terminal().map_scalar(|v| x.norm(v).powi(2)));
    if !(den > 0.0) {
        return Ok(0.0);
    }
    let num = expectation_scalar(&g.map_scalar(|v| y.norm(v).powi(2)));
    Ok(num / den)
}

/// The images `T d_k(ω)` of all increments.
fn images(t: &DMatrix<f64>, p: &Params) -> Vec<Vec<f64>> {
    let (m, r) = (p.m, t.nrows());
    p.inc
        .iter()
        .map(|level| {
            let mut out = vec![0.0; level.len() / m * r];
            for (d, o) in level.chunks(m).zip(out.chunks_mut(r)) {
                mat_vec(t, d, o);
            }
            out
        })
        .collect()
}

/// Leaf table of `Σ_k ε_k T df_k`.
fn transformed_leaves(td: &[Vec<f64>], signs: &[Vec<f64>], n: usize, r: usize) -> Vec<f64> {
    let mut inc = Params::zeros(n, r);
    for k in 0..n {
        for (w, (o, v)) in inc.inc[k].chunks_mut(r).zip(td[k].chunks(r)).enumerate() {
            let s = signs[k][w];
            o.iter_mut().zip(v).for_each(|(a, b)| *a = s * b);
        }
    }
    inc.leaves()
}

fn sq_norm_sum(y: &NormedSpace, leaves: &[f64], r: usize) -> f64 {
    leaves.chunks(r).map(|v| y.norm(v).powi(2)).sum()
}

/// Incrementally maintained transform table supporting sign flips at single
/// nodes of the sign tree.
struct SignState<'a> {
    td: &'a [Vec<f64>],
    y: &'a NormedSpace,
    n: usize,
    r: usize,
    signs: Vec<Vec<f64>>,
    g: Vec<f64>,
    buf: Vec<f64>,
}

impl<'a> SignState<'a> {
    fn new(td: &'a [Vec<f64>], y: &'a NormedSpace, n: usize, r: usize, signs: Vec<Vec<f64>>) -> Self {
        let g = transformed_leaves(td, &signs, n, r);
        Self { td, y, n, r, signs, g, buf: vec![0.0; r] }
    }

    fn total(&self) -> f64 {
        sq_norm_sum(self.y, &self.g, self.r)
    }

    /// Change of `Σ_η ‖G(η)‖²` caused by flipping `ε_k` on the prefixes in `nodes`, applying it when `commit`.
    fn flip(&mut self, k: usize, nodes: std::ops::Range<usize>, commit: bool) -> f64 {
        let (n, r) = (self.n, self.r);
        let span = 1usize << (n - k + 1);
        let mut delta = 0.0;
        for w in nodes.clone() {
            let s = self.signs[k - 1][w];
            let v = &self.td[k - 1][w * r..(w + 1) * r];
            for row in w * span..(w + 1) * span {
                let eta = if (row >> (n - k)) & 1 == 1 { 1.0 } else { -1.0 };
                let gr = &mut self.g[row * r..(row + 1) * r];
                let before = self.y.norm(gr).powi(2);
                for ((b, g), vi) in self.buf.iter_mut().zip(gr.iter()).zip(v) {
                    *b = g - 2.0 * s * eta * vi;
                }
                delta += self.y.norm(&self.buf).powi(2) - before;
                if commit {
                    gr.copy_from_slice(&self.buf);
                }
            }
            if commit {
                self.signs[k - 1][w] = -s;
            }
        }
        delta
    }

    /// Best constant signs, enumerating `ε₂..εₙ` by Gray code with `ε₁ = +1`
    /// (a global sign change does not alter the objective).
    fn best_constant(&mut self) -> f64 {
        let n = self.n;
        let mut best = self.total();
        let mut best_signs = self.signs.clone();
        for i in 1usize..(1 << (n - 1)) {
            let k = i.trailing_zeros() as usize + 2;
            self.flip(k, 0..(1 << (k - 1)), true);
            let v = self.total();
            if v > best {
                best = v;
                best_signs = self.signs.clone();
            }
        }
        self.reset(best_signs);
        best
    }

    fn reset(&mut self, signs: Vec<Vec<f64>>) {
        self.g = transformed_leaves(self.td, &signs, self.n, self.r);
        self.signs = signs;
    }

    fn node_list(&self) -> Vec<(usize, usize)> {
        (1..=self.n).flat_map(|k| (0..1usize << (k - 1)).map(move |w| (k, w))).collect()
    }

    /// All predictable sign trees with the root fixed to `+1`.
    fn best_exhaustive(&mut self) -> f64 {
        let nodes = self.node_list();
        let mut best = self.total();
        let mut best_signs = self.signs.clone();
        for i in 1usize..(1 << (nodes.len() - 1)) {
            let (k, w) = nodes[i.trailing_zeros() as usize + 1];
            self.flip(k, w..w + 1, true);
            let v = self.total();
            if v > best {
                best = v;
                best_signs = self.signs.clone();
            }
        }
        self.reset(best_signs);
        best
    }

    /// Level-by-level sweeps of improving single-node flips until none is left.
    fn sweep(&mut self) -> f64 {
        let nodes = self.node_list();
        let scale = self.total().max(1e-300);
        for _ in 0..64 {
            let mut improved = false;
            for &(k, w) in &nodes {
                if self.flip(k, w..w + 1, false) > 1e-13 * scale {
                    self.flip(k, w..w + 1, true);
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }
        self.total()
    }
}

/// Best signs for a fixed martingale; returns the signs and `Σ_η‖G(η)‖²`.
fn best_signs(t: &DMatrix<f64>, y: &NormedSpace, p: &Params, mode: SignMode) -> (Vec<Vec<f64>>, f64) {
    let td = images(t, p);
    let plus: Vec<Vec<f64>> = (0..p.n).map(|j| vec![1.0; 1 << j]).collect();
    let mut state = SignState::new(&td, y, p.n, t.nrows(), plus);
    let mut v = state.best_constant();
    if mode == SignMode::Predictable {
        v = if (1usize << p.n) - 1 <= EXHAUSTIVE_NODES { state.best_exhaustive() } else { state.sweep() };
    }
    (state.signs, v)
}

struct UmdObjective<'a> {
    t: &'a DMatrix<f64>,
    x: &'a NormedSpace,
    y: &'a NormedSpace,
    signs: Vec<Vec<f64>>,
}

impl UmdObjective<'_> {
    /// Ratio with gradient; `delta > 0` evaluates the smoothed norms.
    fn eval(&self, p: &Params, delta: f64) -> (f64, Option<Params>) {
        let (n, m, r) = (p.n, p.m, self.t.nrows());
        let leaves = p.leaves();
        let rows = (leaves.len() / m) as f64;
        let td = images(self.t, p);
        let g = transformed_leaves(&td, &self.signs, n, r);
        let mut leaf_grad = Vec::new();
        let mut g_grad = Vec::new();
        let (d, num) = if delta > 0.0 {
            (
                smooth_energy(self.x, &leaves, m, delta, &mut leaf_grad),
                smooth_energy(self.y, &g, r, delta, &mut g_grad),
            )
        } else {
            (energy(self.x, &leaves, m, Some(&mut leaf_grad)), energy(self.y, &g, r, Some(&mut g_grad)))
        };
        if !(d > 0.0) {
            return (0.0, None);
        }
        let ratio = num / d;
        let pg = pull_back(n, r, &g_grad, 1.0 / rows);
        let mut grad = Params::zeros(n, m);
        let mut tmp = vec![0.0; m];
        for k in 0..n {
            for (w, (o, v)) in grad.inc[k].chunks_mut(m).zip(pg.inc[k].chunks(r)).enumerate() {
                mat_t_vec(self.t, v, &mut tmp);
                let s = self.signs[k][w];
                o.iter_mut().zip(&tmp).for_each(|(a, b)| *a = s * b);
            }
        }
        let gd = pull_back(n, m, &leaf_grad, 1.0 / rows);
        let mut out = grad.axpy(-ratio, &gd);
        out.scale(1.0 / d);
        (ratio, Some(out))
    }
}

impl RatioObjective for UmdObjective<'_> {
    fn energy(&self, p: &Params) -> f64 {
        energy(self.x, &p.leaves(), p.m, None)
    }

    fn ratio(&self, p: &Params, want_grad: bool) -> (f64, Option<Params>) {
        if want_grad {
            return self.eval(p, 0.0);
        }
        let leaves = p.leaves();
        let d = energy(self.x, &leaves, p.m, None);
        if !(d > 0.0) {
            return (0.0, None);
        }
        let r = self.t.nrows();
        let g = transformed_leaves(&images(self.t, p), &self.signs, p.n, r);
        (energy(self.y, &g, r, None) / d, None)
    }

    fn smoothed(&self, p: &Params, delta: f64) -> (f64, Params) {
        match self.eval(p, delta) {
            (r, Some(g)) => (r, g),
            (r, None) => (r, Params::zeros(p.n, p.m)),
        }
    }
}

fn search_one(
    t: &DMatrix<f64>,
    x: &NormedSpace,
    y: &NormedSpace,
    start: Params,
    mode: SignMode,
    steps: usize,
    tied: bool,
    tracker: &mut Tracker,
) -> (f64, Params, Vec<Vec<f64>>) {
    const ROUNDS: usize = 4;
    let mut p = start;
    let per_round = steps.div_ceil(ROUNDS);
    for round in 0..ROUNDS {
        let (signs, _) = best_signs(t, y, &p, mode);
        let obj = UmdObjective { t, x, y, signs };
        if round == 0 {
            p = anneal(&obj, p, per_round, tied, tracker).0;
        }
        p = ascend(&obj, p, per_round, tied, tracker).0;
    }
    let (signs, _) = best_signs(t, y, &p, mode);
    let r = UmdObjective { t, x, y, signs: signs.clone() }.ratio(&p, false).0;
    tracker.record(r);
    (r, p, signs)
}

fn to_estimate(
    t: &DMatrix<f64>,
    x: &NormedSpace,
    y: &NormedSpace,
    p: &Params,
    signs: Vec<Vec<f64>>,
    mode: SignMode,
) -> Result<(f64, WalshPaleyMartingale, PredictableSigns, EstimateKind)> {
    let witness = p.to_martingale();
    let (signs, kind) = match mode {
        SignMode::Fixed => {
            let eps: Vec<f64> = signs.iter().map(|l| l[0]).collect();
            (PredictableSigns::constant(&eps)?, EstimateKind::UmdFixed)
        }
        SignMode::Predictable => (PredictableSigns::new(signs)?, EstimateKind::UmdPredictable),
    };
    let value = umd_ratio(t, x, y, &witness, &signs)?;
    Ok((value, witness, signs, kind))
}

/// Lower bound for the UMD constant `sup E‖Σ ε_k T df_k‖²_Y / E‖fₙ‖²_X` over
/// depth-`n` martingales.
///
/// Signs and martingale are optimised alternately. Fixed signs are chosen by
/// exact enumeration. Predictable signs are searched exhaustively for small
/// trees, otherwise by single-node flips starting from the best constant
/// signs; the predictable search also starts from the fixed-mode witness, so
/// its value is never below the fixed-mode value for the same configuration.
pub fn umd_lower_bound(
    t: &DMatrix<f64>,
    x: &NormedSpace,
    y: &NormedSpace,
    n: usize,
    mode: SignMode,
    cfg: &SearchConfig,
) -> Result<ConstantEstimate> {
    check_operator(t, x, y)?;
    if n == 0 || n > MAX_DEPTH.min(12) {
        return Err(DclabError::Range(format!("depth {n} outside 1..=12")));
    }
    if cfg.restarts == 0 {
        return Err(DclabError::Config("at least one restart is required".into()));
    }
    let m = x.dim();
    let warm = match mode {
        SignMode::Fixed => cfg.warm_start.clone(),
        SignMode::Predictable => Some(umd_lower_bound(t, x, y, n, SignMode::Fixed, cfg)?.witness),
    };
    let run = |i: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(i as u64));
        let tied = i % 2 == 1;
        let start = match (&warm, i) {
            (Some(w), 0) if w.depth() == n && w.dim() == m => Params::from_martingale(w),
            _ => Params::random(n, m, tied, &mut rng),
        };
        let mut tracker = Tracker::default();
        let (r, p, signs) = search_one(t, x, y, start, mode, cfg.steps, tied, &mut tracker);
        (r, (p, signs), tracker)
    };
    let (_, _, (p, signs), tracker) = best_of(cfg.restarts, run).expect("at least one restart");
    let (value, witness, signs, kind) = to_estimate(t, x, y, &p, signs, mode)?;
    Ok(ConstantEstimate {
        kind,
        value,
        witness,
        signs: Some(signs),
        depth: n,
        dim: m,
        restarts: cfg.restarts,
        seed: cfg.seed,
        max_evaluated: tracker.max_ratio.max(value),
        evaluations: tracker.evaluations + 1,
    })
}

/// The largest UMD ratio over an explicit family of terminal tables, with
/// signs optimised for each member; zero terminals are skipped.
pub fn umd_family_max(
    t: &DMatrix<f64>,
    x: &NormedSpace,
    y: &NormedSpace,
    terminals: &[DyadicTable],
    mode: SignMode,
) -> Result<Option<ConstantEstimate>> {
    check_operator(t, x, y)?;
    let mut best: Option<(f64, WalshPaleyMartingale, PredictableSigns, EstimateKind)> = None;
    let mut evaluations = 0;
    for term in terminals {
        if term.dim() != x.dim() {
            return Err(shape_err(format!("terminal of dimension {}", x.dim()), term.dim()));
        }
        let mart = WalshPaleyMartingale::from_terminal(term.clone());
        let p = Params::from_martingale(&mart);
        if energy(x, &p.leaves(), p.m, None) == 0.0 {
            continue;
        }
        evaluations += 1;
        let (signs, _) = best_signs(t, y, &p, mode);
        let cand = to_estimate(t, x, y, &p, signs, mode)?;
        if best.as_ref().is_none_or(|b| cand.0 > b.0) {
            best = Some(cand);
        }
    }
    Ok(best.map(|(value, witness, signs, kind)| ConstantEstimate {
        kind,
        value,
        depth: witness.depth(),
        dim: witness.dim(),
        witness,
        signs: Some(signs),
        restarts: 0,
        seed: 0,
        max_evaluated: value,
        evaluations,
    }))
}
