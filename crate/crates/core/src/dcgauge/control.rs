//! Control functions on a grid by value iteration.
//!
//! `ψ(x) = inf E[ρ(fₙ)/2 - ½ Σ_k |Δ²φ(f_{k-1}, df_k)|]` over martingales
//! starting at `x` is approximated on a box by the Bellman recursion
//! `V_{t+1}(x) = min(V_t(x), min_u ½V_t(x+u) + ½V_t(x-u) - ½|Δ²φ(x,u)|)`.
//! Increments that leave the box are skipped.

use crate::error::{DclabError, Result};
use crate::quadform::{delta2, ScalarFn};

/// Box `[-R, R]^d` with step `h` and an increment set given in the same units.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlGridSpec {
    pub dims: usize,
    pub radius: f64,
    pub step: f64,
    pub increments: Vec<Vec<f64>>,
}

impl ControlGridSpec {
    /// Symmetric one-dimensional increment set `{±a : a ∈ sizes}`.
    pub fn line(radius: f64, step: f64, sizes: &[f64]) -> Self {
        let increments = sizes.iter().flat_map(|&a| [vec![a], vec![-a]]).collect();
        Self { dims: 1, radius, step, increments }
    }
}

fn to_units(v: f64, step: f64, what: &str) -> Result<i64> {
    let u = v / step;
    let r = u.round();
    if (u - r).abs() > 1e-9 * u.abs().max(1.0) {
        return Err(DclabError::Config(format!("{what} {v} is not a multiple of the step {step}")));
    }
    Ok(r as i64)
}

/// Values of a function on the nodes of a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlGrid {
    dims: usize,
    step: f64,
    /// Nodes per axis, `2R/h + 1`.
    per_axis: usize,
    increments: Vec<Vec<i64>>,
    values: Vec<f64>,
}

impl ControlGrid {
    pub fn new(spec: &ControlGridSpec) -> Result<Self> {
        if spec.dims != 1 && spec.dims != 2 {
            return Err(DclabError::Config(format!("grids must be 1- or 2-dimensional, got {}", spec.dims)));
        }
        if !(spec.step > 0.0) || !(spec.radius > 0.0) {
            return Err(DclabError::Config("radius and step must be positive".into()));
        }
        let half = to_units(spec.radius, spec.step, "radius")?;
        let mut increments = Vec::with_capacity(spec.increments.len());
        for u in &spec.increments {
            if u.len() != spec.dims {
                return Err(DclabError::Config(format!("increment {u:?} does not have {} coordinates", spec.dims)));
            }
            let units = u.iter().map(|&c| to_units(c, spec.step, "increment")).collect::<Result<Vec<_>>>()?;
            if units.iter().all(|&c| c == 0) {
                return Err(DclabError::Config("zero increment".into()));
            }
            increments.push(units);
        }
        for u in &increments {
            let neg: Vec<i64> = u.iter().map(|c| -c).collect();
            if !increments.contains(&neg) {
                return Err(DclabError::Config(format!("increment set is not closed under negation (missing -{u:?})")));
            }
        }
        let per_axis = (2 * half + 1) as usize;
        Ok(Self { dims: spec.dims, step: spec.step, per_axis, increments, values: vec![0.0; per_axis.pow(spec.dims as u32)] })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn radius(&self) -> f64 {
        self.half() as f64 * self.step
    }

    fn half(&self) -> i64 {
        (self.per_axis as i64 - 1) / 2
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Increments in grid units.
    pub fn increments(&self) -> &[Vec<i64>] {
        &self.increments
    }

    /// Integer coordinates of a node, each in `-R/h..=R/h`.
    pub fn units(&self, idx: usize) -> Vec<i64> {
        let h = self.half();
        let mut rest = idx;
        let mut out = vec![0; self.dims];
        for c in out.iter_mut().rev() {
            *c = (rest % self.per_axis) as i64 - h;
            rest /= self.per_axis;
        }
        out
    }

    pub fn coords(&self, idx: usize) -> Vec<f64> {
        self.units(idx).into_iter().map(|c| c as f64 * self.step).collect()
    }

    pub fn index_of(&self, units: &[i64]) -> Option<usize> {
        let h = self.half();
        let mut idx = 0usize;
        for &c in units {
            if c < -h || c > h {
                return None;
            }
            idx = idx * self.per_axis + (c + h) as usize;
        }
        Some(idx)
    }

    /// Node `x + s·u`, if it lies in the box.
    pub fn shift(&self, idx: usize, u: &[i64], s: i64) -> Option<usize> {
        let x: Vec<i64> = self.units(idx).iter().zip(u).map(|(a, b)| a + s * b).collect();
        self.index_of(&x)
    }

    pub fn node_value(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    /// `Δ²ψ(x, u)` from node values, if `x ± u` are nodes.
    pub fn second_difference(&self, idx: usize, u: &[i64]) -> Option<f64> {
        let p = self.shift(idx, u, 1)?;
        let m = self.shift(idx, u, -1)?;
        Some(self.values[p] + self.values[m] - 2.0 * self.values[idx])
    }

    /// Every pair `(x, u)` with `u ≠ 0` a grid vector, `x ± u` in the box, one
    /// representative per `±u`.
    pub fn all_pairs(&self) -> Vec<(usize, Vec<i64>)> {
        let span = 2 * self.half();
        let offsets: Vec<Vec<i64>> = match self.dims {
            1 => (1..=span).map(|a| vec![a]).collect(),
            _ => (-span..=span)
                .flat_map(|a| (-span..=span).map(move |b| vec![a, b]))
                .filter(|u| u[0] > 0 || (u[0] == 0 && u[1] > 0))
                .collect(),
        };
        let mut out = Vec::new();
        for idx in 0..self.len() {
            for u in &offsets {
                if self.shift(idx, u, 1).is_some() && self.shift(idx, u, -1).is_some() {
                    out.push((idx, u.clone()));
                }
            }
        }
        out
    }

    /// Nodes `x` for which `x/2` and `2x` are nodes as well.
    pub fn dyadic_samples(&self) -> Vec<Vec<f64>> {
        (0..self.len())
            .filter_map(|idx| {
                let u = self.units(idx);
                let double: Vec<i64> = u.iter().map(|c| 2 * c).collect();
                let even = u.iter().all(|c| c % 2 == 0);
                (even && self.index_of(&double).is_some()).then(|| self.coords(idx))
            })
            .collect()
    }

    /// Largest violation of the Bellman fixpoint equation.
    pub fn bellman_residual<F: ScalarFn + ?Sized>(&self, phi: &F) -> f64 {
        let mut worst: f64 = 0.0;
        for idx in 0..self.len() {
            let v = self.values[idx];
            let x = self.coords(idx);
            let mut best = v;
            for u in &self.increments {
                if let (Some(p), Some(m)) = (self.shift(idx, u, 1), self.shift(idx, u, -1)) {
                    let uf: Vec<f64> = u.iter().map(|&c| c as f64 * self.step).collect();
                    let cand = 0.5 * (self.values[p] + self.values[m]) - 0.5 * delta2(phi, &x, &uf).abs();
                    best = best.min(cand);
                }
            }
            worst = worst.max((v - best).abs());
        }
        worst
    }
}

/// Piecewise-linear (1-D) or bilinear (2-D) interpolation of the node values,
/// clamped to the box. Exact at nodes.
impl ScalarFn for ControlGrid {
    fn value(&self, x: &[f64]) -> f64 {
        let h = self.half() as f64;
        let axis: Vec<(usize, f64)> = x
            .iter()
            .map(|&c| {
                let t = (c / self.step + h).clamp(0.0, 2.0 * h);
                let i = (t.floor() as usize).min(self.per_axis.saturating_sub(2));
                (i, t - i as f64)
            })
            .collect();
        let at = |ix: &[usize]| self.values[ix.iter().fold(0, |acc, &i| acc * self.per_axis + i)];
        if self.per_axis == 1 {
            return self.values[0];
        }
        match axis.as_slice() {
            [(i, a)] => (1.0 - a) * at(&[*i]) + a * at(&[i + 1]),
            [(i, a), (j, b)] => {
                (1.0 - a) * ((1.0 - b) * at(&[*i, *j]) + b * at(&[*i, j + 1]))
                    + a * ((1.0 - b) * at(&[i + 1, *j]) + b * at(&[i + 1, j + 1]))
            }
            _ => f64::NAN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ControlStatus {
    Converged,
    /// Stopped at `max_sweeps` with the last change above tolerance.
    MaxSweeps,
    /// The iterate went below `-tol`, so no control function fits within `ρ/2`.
    Negative { min: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueIteration {
    pub grid: ControlGrid,
    pub sweeps: usize,
    pub last_change: f64,
    pub status: ControlStatus,
}

pub fn control_value_iteration<F: ScalarFn + ?Sized, G: ScalarFn + ?Sized>(
    phi: &F,
    rho: &G,
    spec: &ControlGridSpec,
    tol: f64,
    max_sweeps: usize,
) -> Result<ValueIteration> {
    let mut grid = ControlGrid::new(spec)?;
    for idx in 0..grid.len() {
        let x = grid.coords(idx);
        let r = rho.value(&x);
        if !(r >= 0.0) {
            return Err(DclabError::Domain(format!("ρ({x:?}) = {r} is negative")));
        }
        grid.values[idx] = r / 2.0;
    }
    // (x+u, x-u, ½|Δ²φ(x,u)|) per node
    let moves: Vec<Vec<(usize, usize, f64)>> = (0..grid.len())
        .map(|idx| {
            let x = grid.coords(idx);
            grid.increments
                .iter()
                .filter_map(|u| {
                    let p = grid.shift(idx, u, 1)?;
                    let m = grid.shift(idx, u, -1)?;
                    let uf: Vec<f64> = u.iter().map(|&c| c as f64 * grid.step).collect();
                    Some((p, m, 0.5 * delta2(phi, &x, &uf).abs()))
                })
                .collect()
        })
        .collect();
    let mut sweeps = 0;
    let mut last_change = f64::INFINITY;
    let mut status = ControlStatus::MaxSweeps;
    while sweeps < max_sweeps {
        let old = grid.values.clone();
        let mut change: f64 = 0.0;
        for (idx, mv) in moves.iter().enumerate() {
            let mut v = old[idx];
            for &(p, m, cost) in mv {
                v = v.min(0.5 * (old[p] + old[m]) - cost);
            }
            change = change.max(old[idx] - v);
            grid.values[idx] = v;
        }
        sweeps += 1;
        last_change = change;
        let min = grid.values.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -tol {
            status = ControlStatus::Negative { min };
            break;
        }
        if change < tol {
            status = ControlStatus::Converged;
            break;
        }
    }
    Ok(ValueIteration { grid, sweeps, last_change, status })
}

/// Whether `|Δ²φ(x,u)| ≤ Δ²ψ(x,u) + tol` and `Δ²ψ(x,u) ≥ -tol` on all pairs.
pub fn control_check<F: ScalarFn + ?Sized>(phi: &F, psi: &ControlGrid, pairs: &[(usize, Vec<i64>)], tol: f64) -> Result<bool> {
    for (idx, u) in pairs {
        if *idx >= psi.len() || u.len() != psi.dims() {
            return Err(DclabError::Domain(format!("pair ({idx}, {u:?}) does not fit the grid")));
        }
        let d2psi = psi
            .second_difference(*idx, u)
            .ok_or_else(|| DclabError::Domain(format!("pair ({idx}, {u:?}) leaves the grid")))?;
        let uf: Vec<f64> = u.iter().map(|&c| c as f64 * psi.step()).collect();
        let d2phi = delta2(phi, &psi.coords(*idx), &uf);
        if d2psi < -tol || d2phi.abs() > d2psi + tol {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `max |ψ(tx) - t^p ψ(x)| / (1 + t^p |ψ(x)|)` over the samples and `t ∈ {½, 2}`.
pub fn homogeneity_check<F: ScalarFn + ?Sized>(psi: &F, p: f64, samples: &[Vec<f64>]) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(DclabError::Domain(format!("homogeneity degree p = {p} must be at least 1")));
    }
    let mut worst: f64 = 0.0;
    for x in samples {
        let v = psi.value(x);
        for t in [0.5f64, 2.0] {
            let tx: Vec<f64> = x.iter().map(|c| t * c).collect();
            let tp = t.powf(p);
            worst = worst.max((psi.value(&tx) - tp * v).abs() / (1.0 + tp * v.abs()));
        }
    }
    Ok(worst)
}
