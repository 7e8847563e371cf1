//! Shared machinery for the martingale searches.
//!
//! A martingale of depth `n` is parameterised by its initial value `f₀` and
//! its increments `d_k(ω)`, `ω ∈ Γ^(k-1)`, so that
//! `fₙ(η) = f₀ + Σ_k η_k d_k(η₁..η_{k-1})`. This is a bijection with terminal
//! tables and makes the second-difference sums separable.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::martingale::WalshPaleyMartingale;
use crate::quadform::{NormedSpace, Outer};

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Params {
    pub n: usize,
    pub m: usize,
    pub initial: Vec<f64>,
    /// `inc[k-1]` holds `2^(k-1)` vectors of length `m`.
    pub inc: Vec<Vec<f64>>,
}

impl Params {
    pub fn zeros(n: usize, m: usize) -> Self {
        Self { n, m, initial: vec![0.0; m], inc: (0..n).map(|j| vec![0.0; (1 << j) * m]).collect() }
    }

    /// Gaussian increments; `tied` gives the Rademacher family `f_k = Σ_{j≤k} η_j x_j`.
    pub fn random<R: Rng>(n: usize, m: usize, tied: bool, rng: &mut R) -> Self {
        let mut p = Self::zeros(n, m);
        if tied {
            for level in &mut p.inc {
                let x: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
                for chunk in level.chunks_mut(m) {
                    chunk.copy_from_slice(&x);
                }
            }
        } else {
            p.initial.iter_mut().for_each(|v| *v = 0.1 * rng.sample::<f64, _>(StandardNormal));
            for level in &mut p.inc {
                level.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
            }
        }
        p
    }

    pub fn from_martingale(mart: &WalshPaleyMartingale) -> Self {
        Self {
            n: mart.depth(),
            m: mart.dim(),
            initial: mart.initial().to_vec(),
            inc: (1..=mart.depth()).map(|k| mart.increments(k)).collect(),
        }
    }

    pub fn to_martingale(&self) -> WalshPaleyMartingale {
        WalshPaleyMartingale::from_increments(&self.initial, &self.inc).expect("consistent parameter shapes")
    }

    /// Terminal table `fₙ`, row-major.
    pub fn leaves(&self) -> Vec<f64> {
        let m = self.m;
        let mut cur = self.initial.clone();
        for inc in &self.inc {
            let mut next = Vec::with_capacity(cur.len() * 2);
            for (parent, d) in cur.chunks(m).zip(inc.chunks(m)) {
                next.extend(parent.iter().zip(d).map(|(a, b)| a - b));
                next.extend(parent.iter().zip(d).map(|(a, b)| a + b));
            }
            cur = next;
        }
        cur
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.initial.iter().chain(self.inc.iter().flatten())
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.initial.iter_mut().chain(self.inc.iter_mut().flatten())
    }

    pub fn norm(&self) -> f64 {
        self.values().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, t: f64) {
        self.values_mut().for_each(|v| *v *= t);
    }

    pub fn axpy(&self, alpha: f64, dir: &Params) -> Params {
        let mut out = self.clone();
        for (o, d) in out.values_mut().zip(dir.values()) {
            *o += alpha * d;
        }
        out
    }

    /// Projection of a gradient onto the Rademacher family: `f₀` frozen and
    /// each level's increments moved together.
    pub fn tie(&mut self) {
        let m = self.m;
        self.initial.iter_mut().for_each(|v| *v = 0.0);
        for level in &mut self.inc {
            let mut sum = vec![0.0; m];
            for chunk in level.chunks(m) {
                sum.iter_mut().zip(chunk).for_each(|(s, v)| *s += v);
            }
            for chunk in level.chunks_mut(m) {
                chunk.copy_from_slice(&sum);
            }
        }
    }
}

/// Pulls a per-leaf gradient back to the parameters: `∂/∂f₀ = Σ_η g(η)` and
/// `∂/∂d_k(ω) = Σ_{η ⊒ (ω,+)} g(η) - Σ_{η ⊒ (ω,-)} g(η)`, all scaled by `scale`.
pub(crate) fn pull_back(n: usize, m: usize, leaf_grad: &[f64], scale: f64) -> Params {
    let mut out = Params::zeros(n, m);
    let mut cur = leaf_grad.to_vec();
    for k in (1..=n).rev() {
        let parents = 1usize << (k - 1);
        let mut next = vec![0.0; parents * m];
        let level = &mut out.inc[k - 1];
        for w in 0..parents {
            for c in 0..m {
                let minus = cur[(2 * w) * m + c];
                let plus = cur[(2 * w + 1) * m + c];
                level[w * m + c] = scale * (plus - minus);
                next[w * m + c] = plus + minus;
            }
        }
        cur = next;
    }
    out.initial = cur.into_iter().map(|v| v * scale).collect();
    out
}

/// `E‖fₙ‖²` and, when requested, its per-leaf gradient `2‖fₙ(η)‖ v(η)`.
pub(crate) fn energy(space: &NormedSpace, leaves: &[f64], m: usize, leaf_grad: Option<&mut Vec<f64>>) -> f64 {
    let rows = leaves.len() / m;
    let mut total = 0.0;
    match leaf_grad {
        Some(g) => {
            g.resize(leaves.len(), 0.0);
            for (x, gx) in leaves.chunks(m).zip(g.chunks_mut(m)) {
                let nx = space.norm(x);
                total += nx * nx;
                space.norming_into(x, gx);
                gx.iter_mut().for_each(|v| *v *= 2.0 * nx);
            }
        }
        None => {
            for x in leaves.chunks(m) {
                let nx = space.norm(x);
                total += nx * nx;
            }
        }
    }
    total / rows as f64
}

/// Smoothed norm: every `|v|` replaced by `√(v² + δ²) - δ` and every maximum
/// by a log-sum-exp at temperature `δ`. Writes the gradient into `grad`.
pub(crate) fn smooth_norm(space: &NormedSpace, x: &[f64], delta: f64, grad: &mut [f64]) -> f64 {
    match space {
        NormedSpace::Lp { p, .. } => {
            let soft: Vec<(f64, f64)> = x
                .iter()
                .map(|&v| {
                    let r = (v * v + delta * delta).sqrt();
                    (r - delta, v / r)
                })
                .collect();
            if *p == 1.0 {
                grad.iter_mut().zip(&soft).for_each(|(g, s)| *g = s.1);
                soft.iter().map(|s| s.0).sum()
            } else if p.is_infinite() {
                let top = soft.iter().map(|s| s.0).fold(0.0, f64::max);
                let w: Vec<f64> = soft.iter().map(|s| ((s.0 - top) / delta).exp()).collect();
                let z: f64 = w.iter().sum();
                grad.iter_mut().zip(w.iter().zip(&soft)).for_each(|(g, (wi, s))| *g = wi / z * s.1);
                top + delta * z.ln()
            } else {
                let n = soft.iter().map(|s| s.0.powf(*p)).sum::<f64>().powf(1.0 / p);
                if n == 0.0 {
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    return 0.0;
                }
                grad.iter_mut().zip(&soft).for_each(|(g, s)| *g = (s.0 / n).powf(p - 1.0) * s.1);
                n
            }
        }
        NormedSpace::DirectSum { left, right, outer } => {
            let k = left.dim();
            let (a, b) = x.split_at(k);
            let (ga, gb) = grad.split_at_mut(k);
            let na = smooth_norm(left, a, delta, ga);
            let nb = smooth_norm(right, b, delta, gb);
            match outer {
                Outer::One => na + nb,
                Outer::Infinity => {
                    let top = na.max(nb);
                    let (wa, wb) = (((na - top) / delta).exp(), ((nb - top) / delta).exp());
                    let z = wa + wb;
                    ga.iter_mut().for_each(|g| *g *= wa / z);
                    gb.iter_mut().for_each(|g| *g *= wb / z);
                    top + delta * z.ln()
                }
            }
        }
    }
}

/// Smoothed `E‖fₙ‖²` with per-leaf gradient.
pub(crate) fn smooth_energy(space: &NormedSpace, leaves: &[f64], m: usize, delta: f64, leaf_grad: &mut Vec<f64>) -> f64 {
    let rows = leaves.len() / m;
    leaf_grad.resize(leaves.len(), 0.0);
    let mut total = 0.0;
    for (x, gx) in leaves.chunks(m).zip(leaf_grad.chunks_mut(m)) {
        let nx = smooth_norm(space, x, delta, gx);
        total += nx * nx;
        gx.iter_mut().for_each(|v| *v *= 2.0 * nx);
    }
    total / rows as f64
}

/// A scale-invariant ratio to be maximised over martingales.
pub(crate) trait RatioObjective {
    /// Denominator `E‖fₙ‖²_X`, used for normalisation.
    fn energy(&self, p: &Params) -> f64;
    /// Ratio and (optionally) its gradient.
    fn ratio(&self, p: &Params, want_grad: bool) -> (f64, Option<Params>);
    /// A smooth approximation of the ratio at smoothing width `delta`, with gradient.
    fn smoothed(&self, p: &Params, delta: f64) -> (f64, Params);
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Tracker {
    pub evaluations: usize,
    pub max_ratio: f64,
}

impl Tracker {
    pub fn record(&mut self, r: f64) {
        self.evaluations += 1;
        if r > self.max_ratio {
            self.max_ratio = r;
        }
    }

    pub fn merge(&mut self, other: Tracker) {
        self.evaluations += other.evaluations;
        self.max_ratio = self.max_ratio.max(other.max_ratio);
    }
}

pub(crate) fn normalize<O: RatioObjective>(obj: &O, p: &mut Params) -> bool {
    let e = obj.energy(p);
    if !(e > 0.0) || !e.is_finite() {
        return false;
    }
    p.scale(1.0 / e.sqrt());
    true
}

/// Adam ascent on the smoothed ratio while the smoothing width decays
/// geometrically from `1e-1` to `1e-5`. Returns the best iterate under the
/// exact ratio.
pub(crate) fn anneal<O: RatioObjective>(
    obj: &O,
    mut p: Params,
    steps: usize,
    tied: bool,
    tracker: &mut Tracker,
) -> (Params, f64) {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    if !normalize(obj, &mut p) {
        return (p, 0.0);
    }
    let mut best = (p.clone(), obj.ratio(&p, false).0);
    tracker.record(best.1);
    let len = p.values().count();
    let mut mom = vec![0.0; len];
    let mut var = vec![0.0; len];
    let (d0, d1) = (1e-1f64, 1e-5f64);
    for t in 0..steps {
        let frac = t as f64 / steps.max(1) as f64;
        let delta = d0 * (d1 / d0).powf(frac);
        let (_, mut g) = obj.smoothed(&p, delta);
        if tied {
            g.tie();
        }
        let lr = 0.02 * (1.0 - 0.9 * frac);
        let bc1 = 1.0 - B1.powi(t as i32 + 1);
        let bc2 = 1.0 - B2.powi(t as i32 + 1);
        let mut step = Params::zeros(p.n, p.m);
        for (((s, gi), mi), vi) in step.values_mut().zip(g.values()).zip(mom.iter_mut()).zip(var.iter_mut()) {
            *mi = B1 * *mi + (1.0 - B1) * gi;
            *vi = B2 * *vi + (1.0 - B2) * gi * gi;
            *s = lr * (*mi / bc1) / ((*vi / bc2).sqrt() + 1e-12);
        }
        if tied {
            step.tie();
        }
        let mut cand = p.axpy(1.0, &step);
        if !normalize(obj, &mut cand) {
            break;
        }
        p = cand;
        if t % 8 == 7 || t + 1 == steps {
            let r = obj.ratio(&p, false).0;
            tracker.record(r);
            if r > best.1 {
                best = (p.clone(), r);
            }
        }
    }
    best
}

/// Normalised gradient ascent with backtracking. Every accepted step
/// increases the ratio; iterates are kept at unit energy.
pub(crate) fn ascend<O: RatioObjective>(
    obj: &O,
    mut p: Params,
    steps: usize,
    tied: bool,
    tracker: &mut Tracker,
) -> (Params, f64) {
    if !normalize(obj, &mut p) {
        return (p, 0.0);
    }
    let (mut r, mut grad) = obj.ratio(&p, true);
    tracker.record(r);
    let mut step = 0.2;
    for _ in 0..steps {
        let mut g = grad.take().expect("gradient requested");
        if tied {
            g.tie();
        }
        let gn = g.norm();
        if !(gn > 1e-14) {
            break;
        }
        let pn = p.norm();
        let mut accepted = false;
        while step > 1e-9 {
            let mut cand = p.axpy(step * pn / gn, &g);
            if normalize(obj, &mut cand) {
                let (rc, gc) = obj.ratio(&cand, true);
                tracker.record(rc);
                if rc > r {
                    p = cand;
                    r = rc;
                    grad = gc;
                    accepted = true;
                    step = (step * 1.5).min(1.0);
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (p, r)
}

/// Restart seeds are `seed + index`; the reduction keeps the largest value and
/// breaks ties by the lowest index, so results do not depend on scheduling.
pub(crate) fn best_of<T: Send>(
    restarts: usize,
    run: impl Fn(usize) -> (f64, T, Tracker) + Sync,
) -> Option<(usize, f64, T, Tracker)> {
    use rayon::prelude::*;
    let results: Vec<(f64, T, Tracker)> = (0..restarts).into_par_iter().map(&run).collect();
    let mut total = Tracker::default();
    let mut best: Option<(usize, f64, T)> = None;
    for (i, (v, payload, tr)) in results.into_iter().enumerate() {
        total.merge(tr);
        let better = match &best {
            None => true,
            Some((_, bv, _)) => v > *bv,
        };
        if better {
            best = Some((i, v, payload));
        }
    }
    best.map(|(i, v, p)| (i, v, p, total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn params_round_trip_through_martingale() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = Params::random(3, 2, false, &mut rng);
        let mart = p.to_martingale();
        let q = Params::from_martingale(&mart);
        assert!(p.values().zip(q.values()).all(|(a, b)| (a - b).abs() < 1e-12));
        assert_eq!(mart.terminal().values(), p.leaves().as_slice());
    }

    #[test]
    fn pull_back_matches_finite_differences() {
        // E⟨w, fₙ⟩ is linear in the parameters; its gradient is the pull-back of w.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = Params::random(3, 2, false, &mut rng);
        let w: Vec<f64> = (0..16).map(|i| (i as f64 * 0.37).sin()).collect();
        let f = |q: &Params| q.leaves().iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / 8.0;
        let g = pull_back(3, 2, &w, 1.0 / 8.0);
        let base = f(&p);
        let mut dir = Params::zeros(3, 2);
        dir.inc[2][3] = 1.0;
        let fd = f(&p.axpy(1e-6, &dir)) - base;
        assert!((fd / 1e-6 - g.inc[2][3]).abs() < 1e-8);
        dir = Params::zeros(3, 2);
        dir.initial[1] = 1.0;
        let fd = f(&p.axpy(1e-6, &dir)) - base;
        assert!((fd / 1e-6 - g.initial[1]).abs() < 1e-8);
    }
}
