//! Walsh-Paley martingales on the dyadic cube.
//!
//! A martingale `(f₀, …, fₙ)` is determined by its terminal level through
//! `f_k = E(fₙ | Σ_k)`. Its `k`-th difference is `±d_k(ω)` at `(ω, ±1)` for a
//! prefix `ω ∈ Γ^(k-1)`, which makes every second difference
//! `Δ²φ(f_{k-1}, df_k)` a function of the first `k-1` coordinates only.

use nalgebra::DMatrix;

use crate::dyadic::{
    conditional_expectation, coordinate, pairwise_mean, DyadicTable, FiltrationLevel, Path,
};
use crate::error::{shape_err, DclabError, Result};
use crate::quadform::{NormedSpace, ScalarFn};

/// Tolerance used when validating the martingale property of given levels.
pub const MARTINGALE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct WalshPaleyMartingale {
    levels: Vec<DyadicTable>,
}

impl WalshPaleyMartingale {
    pub fn from_terminal(terminal: DyadicTable) -> Self {
        let n = terminal.depth();
        let mut levels = Vec::with_capacity(n + 1);
        for k in 0..n {
            levels.push(
                conditional_expectation(&terminal, FiltrationLevel(k)).expect("level within range"),
            );
        }
        levels.push(terminal);
        Self { levels }
    }

    /// Validates `f_k(ω) = ½f_{k+1}(ω,-1) + ½f_{k+1}(ω,+1)` and measurability.
    pub fn from_levels(levels: Vec<DyadicTable>) -> Result<Self> {
        let Some(last) = levels.last() else {
            return Err(DclabError::Domain("a martingale needs at least one level".into()));
        };
        let n = last.depth();
        if levels.len() != n + 1 {
            return Err(shape_err(format!("{} levels for depth {n}", n + 1), levels.len()));
        }
        for (k, level) in levels.iter().enumerate() {
            last.check_same_shape(level)?;
            if !level.is_measurable(FiltrationLevel(k), MARTINGALE_TOL) {
                return Err(DclabError::Domain(format!("level {k} is not Σ_{k}-measurable")));
            }
        }
        let mart = Self { levels };
        for k in 0..n {
            let avg = conditional_expectation(&mart.levels[k + 1], FiltrationLevel(k))?;
            let gap = avg.max_abs_diff(&mart.levels[k]);
            if gap > MARTINGALE_TOL * (1.0 + max_abs(&mart.levels[k])) {
                return Err(DclabError::Domain(format!(
                    "level {k} is not the average of level {} (gap {gap:e})",
                    k + 1
                )));
            }
        }
        Ok(mart)
    }

    /// `f_k = f₀ + Σ_{j≤k} η_j d_j(η₁..η_{j-1})` from the initial value and
    /// the per-prefix increments (`increments[j-1]` holds `2^(j-1)` rows).
    pub fn from_increments(initial: &[f64], increments: &[Vec<f64>]) -> Result<Self> {
        let m = initial.len();
        let n = increments.len();
        for (j, inc) in increments.iter().enumerate() {
            if inc.len() != (1usize << j) * m {
                return Err(shape_err(format!("2^{j} increments of dim {m}"), inc.len()));
            }
        }
        let mut prefix = initial.to_vec();
        for (j, inc) in increments.iter().enumerate() {
            let mut next = Vec::with_capacity(prefix.len() * 2);
            for (w, parent) in prefix.chunks(m).enumerate() {
                let d = &inc[w * m..(w + 1) * m];
                next.extend(parent.iter().zip(d).map(|(a, b)| a - b));
                next.extend(parent.iter().zip(d).map(|(a, b)| a + b));
            }
            debug_assert_eq!(next.len(), (1usize << (j + 1)) * m);
            prefix = next;
        }
        Ok(Self::from_terminal(DyadicTable::new(n, m, prefix)?))
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.levels[0].dim()
    }

    pub fn level(&self, k: usize) -> &DyadicTable {
        &self.levels[k]
    }

    pub fn levels(&self) -> &[DyadicTable] {
        &self.levels
    }

    pub fn terminal(&self) -> &DyadicTable {
        &self.levels[self.depth()]
    }

    pub fn initial(&self) -> &[f64] {
        self.levels[0].row(0)
    }

    /// `df_k = f_k - f_{k-1}` for `k = 1..=n`.
    pub fn differences(&self) -> Vec<DyadicTable> {
        (1..=self.depth())
            .map(|k| self.levels[k].sub(&self.levels[k - 1]).expect("levels share shape"))
            .collect()
    }

    /// `d_k(ω) = df_k(ω, +1)` for the `2^(k-1)` prefixes `ω`, flattened.
    pub fn increments(&self, k: usize) -> Vec<f64> {
        let m = self.dim();
        let children = self.levels[k].prefix_values(k);
        children
            .chunks(2 * m)
            .flat_map(|pair| (0..m).map(move |c| 0.5 * (pair[m + c] - pair[c])))
            .collect()
    }

    /// The same martingale followed by `extra` repetitions of its terminal level.
    pub fn padded(&self, extra: usize) -> Result<Self> {
        let mut levels = Vec::with_capacity(self.levels.len() + extra);
        for l in &self.levels {
            levels.push(l.extend_depth(extra)?);
        }
        let last = levels.last().cloned().expect("non-empty");
        levels.extend(std::iter::repeat_n(last, extra));
        Ok(Self { levels })
    }

    /// `(Tf₀, …, Tfₙ)` for a linear map `T`.
    pub fn map_linear(&self, t: &DMatrix<f64>) -> Result<Self> {
        if t.ncols() != self.dim() {
            return Err(shape_err(format!("matrix with {} columns", self.dim()), t.ncols()));
        }
        let levels = self
            .levels
            .iter()
            .map(|l| l.map_rows(t.nrows(), |x| apply(t, x)))
            .collect::<Result<_>>()?;
        Ok(Self { levels })
    }

    pub fn scale(&self, t: f64) -> Self {
        Self { levels: self.levels.iter().map(|l| l.scale(t)).collect() }
    }

    /// `g_k = f_{m+k}(ω̄, ·)` on `Γ^(n-m)` for a prefix `ω̄ ∈ Γ^m`.
    pub fn section(&self, prefix: &Path) -> Result<Self> {
        let m = prefix.len();
        let levels = self.levels[m..]
            .iter()
            .map(|l| crate::dyadic::section(l, prefix))
            .collect::<Result<_>>()?;
        Ok(Self { levels })
    }

    /// The stopped martingale `f_{min(k, τ)}`; `tau` gives `τ(η)` for each row.
    ///
    /// Fails unless `τ` is a stopping time (`{τ = m}` depends on the first `m` coordinates).
    pub fn stopped(&self, tau: &[usize]) -> Result<Self> {
        let n = self.depth();
        if tau.len() != 1 << n || tau.iter().any(|&t| t > n) {
            return Err(shape_err(format!("2^{n} stopping values in 0..={n}"), tau.len()));
        }
        if !is_stopping_time(tau, n) {
            return Err(DclabError::Domain("τ is not a stopping time".into()));
        }
        let m = self.dim();
        let levels = (0..=n)
            .map(|k| {
                let mut values = Vec::with_capacity((1 << n) * m);
                for (row, &t) in tau.iter().enumerate() {
                    values.extend_from_slice(self.levels[k.min(t)].row(row));
                }
                DyadicTable::new(n, m, values)
            })
            .collect::<Result<_>>()?;
        Ok(Self { levels })
    }
}

fn max_abs(t: &DyadicTable) -> f64 {
    t.values().iter().fold(0.0, |a, v| a.max(v.abs()))
}

pub(crate) fn apply(t: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (0..t.nrows()).map(|i| (0..t.ncols()).map(|j| t[(i, j)] * x[j]).sum()).collect()
}

/// Whether `{τ = m}` depends only on the first `m` coordinates for every `m`.
pub fn is_stopping_time(tau: &[usize], depth: usize) -> bool {
    for m in 0..=depth {
        let block = 1usize << (depth - m);
        for start in (0..tau.len()).step_by(block) {
            let first = tau[start] == m;
            if tau[start..start + block].iter().any(|&t| (t == m) != first) {
                return false;
            }
        }
    }
    true
}

/// Predictable signs `ε_k`, stored by their values on the prefixes `Γ^(k-1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictableSigns {
    levels: Vec<Vec<f64>>,
}

impl PredictableSigns {
    /// `levels[k-1]` holds `ε_k` on the `2^(k-1)` prefixes.
    pub fn new(levels: Vec<Vec<f64>>) -> Result<Self> {
        for (j, l) in levels.iter().enumerate() {
            if l.len() != 1 << j {
                return Err(shape_err(format!("2^{j} signs at level {}", j + 1), l.len()));
            }
            if l.iter().any(|&s| s != 1.0 && s != -1.0) {
                return Err(DclabError::Domain(format!("level {} has a sign other than ±1", j + 1)));
            }
        }
        Ok(Self { levels })
    }

    /// Deterministic signs `ε_k ≡ signs[k-1]`.
    pub fn constant(signs: &[f64]) -> Result<Self> {
        Self::new(signs.iter().enumerate().map(|(j, &s)| vec![s; 1 << j]).collect())
    }

    pub fn all_plus(depth: usize) -> Self {
        Self { levels: (0..depth).map(|j| vec![1.0; 1 << j]).collect() }
    }

    /// From full tables, checking that `ε_k` is `Σ_{k-1}`-measurable.
    pub fn from_tables(tables: &[DyadicTable]) -> Result<Self> {
        let levels = tables
            .iter()
            .enumerate()
            .map(|(j, t)| {
                if t.dim() != 1 || !t.is_measurable(FiltrationLevel(j), 0.0) {
                    return Err(DclabError::Domain(format!("ε_{} is not Σ_{j}-measurable", j + 1)));
                }
                Ok(t.prefix_values(j))
            })
            .collect::<Result<_>>()?;
        Self::new(levels)
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.levels
    }

    /// `ε_k` on the prefix with index `prefix` in `Γ^(k-1)`.
    pub fn sign(&self, k: usize, prefix: usize) -> f64 {
        self.levels[k - 1][prefix]
    }

    pub fn table(&self, k: usize, depth: usize) -> DyadicTable {
        DyadicTable::from_prefix_values(depth, k - 1, 1, &self.levels[k - 1]).expect("valid prefix table")
    }

    /// Whether the signs do not depend on the path.
    pub fn is_constant(&self) -> bool {
        self.levels.iter().all(|l| l.iter().all(|&s| s == l[0]))
    }
}

/// `Σ_k ε_k T df_k`.
pub fn transform(t: &DMatrix<f64>, mart: &WalshPaleyMartingale, signs: &PredictableSigns) -> Result<DyadicTable> {
    let n = mart.depth();
    let m = mart.dim();
    if t.ncols() != m {
        return Err(shape_err(format!("matrix with {m} columns"), format!("{} columns", t.ncols())));
    }
    if signs.depth() != n {
        return Err(shape_err(format!("signs of depth {n}"), signs.depth()));
    }
    let r = t.nrows();
    let rows = 1usize << n;
    let mut out = vec![0.0; rows * r];
    for k in 1..=n {
        let d = mart.increments(k);
        let td: Vec<f64> = d.chunks(m).flat_map(|v| apply(t, v)).collect();
        for row in 0..rows {
            let prefix = row >> (n - k + 1);
            let s = signs.sign(k, prefix) * coordinate(row, n, k);
            let src = &td[prefix * r..(prefix + 1) * r];
            for (o, v) in out[row * r..(row + 1) * r].iter_mut().zip(src) {
                *o += s * v;
            }
        }
    }
    DyadicTable::new(n, r, out)
}

/// `(E max_k ‖f_k‖^p)^{1/p} / (E‖fₙ‖^p)^{1/p}`, or `1` when `fₙ = 0` a.e.
pub fn doob_ratio(mart: &WalshPaleyMartingale, p: f64, space: &NormedSpace) -> Result<f64> {
    if !(p > 1.0) {
        return Err(DclabError::Domain(format!("Doob exponent p = {p} must exceed 1")));
    }
    check_space(mart, space)?;
    let rows = 1usize << mart.depth();
    let maxima: Vec<f64> = (0..rows)
        .map(|i| {
            mart.levels
                .iter()
                .map(|l| space.norm(l.row(i)))
                .fold(0.0, f64::max)
                .powf(p)
        })
        .collect();
    let terminal: Vec<f64> = (0..rows).map(|i| space.norm(mart.terminal().row(i)).powf(p)).collect();
    let denom = pairwise_mean(&terminal);
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok((pairwise_mean(&maxima) / denom).powf(1.0 / p))
}

fn check_space(mart: &WalshPaleyMartingale, space: &NormedSpace) -> Result<()> {
    if space.dim() != mart.dim() {
        return Err(shape_err(format!("space of dim {}", mart.dim()), space.dim()));
    }
    Ok(())
}

/// Stopping times `m_r(η) = min{0 ≤ k < n : max‖f_k(η) ± df_{k+1}(η)‖ > base^r}`
/// (or `n` when no level exceeds the threshold), for `r = 0, 1, …` until every
/// path runs to the end.
#[derive(Debug, Clone, PartialEq)]
pub struct StoppingProfile {
    pub base: f64,
    depth: usize,
    times: Vec<Vec<usize>>,
}

impl StoppingProfile {
    /// Number of radii `r = 0..len`.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `m_r` as one value per path.
    pub fn time(&self, r: usize) -> &[usize] {
        &self.times[r]
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Every `m_r` is a stopping time.
    pub fn is_measurable(&self) -> bool {
        self.times.iter().all(|t| is_stopping_time(t, self.depth))
    }

    pub fn is_monotone(&self) -> bool {
        self.times.windows(2).all(|w| w[0].iter().zip(&w[1]).all(|(a, b)| a <= b))
    }
}

/// `max‖f_k(η) ± df_{k+1}(η)‖` for `k = 0..n` at every path, i.e. the larger
/// norm of the two children of the node `(η₁..η_k)`.
fn child_maxima(mart: &WalshPaleyMartingale, space: &NormedSpace) -> Vec<Vec<f64>> {
    let n = mart.depth();
    (0..n)
        .map(|k| {
            let child = mart.level(k + 1).prefix_values(k + 1);
            let m = mart.dim();
            let per_node: Vec<f64> = child
                .chunks(2 * m)
                .map(|pair| space.norm(&pair[..m]).max(space.norm(&pair[m..])))
                .collect();
            (0..1usize << n).map(|row| per_node[row >> (n - k)]).collect()
        })
        .collect()
}

pub fn stopping_profile(mart: &WalshPaleyMartingale, space: &NormedSpace, base: f64) -> Result<StoppingProfile> {
    if !(base > 1.0) {
        return Err(DclabError::Domain(format!("radius base {base} must exceed 1")));
    }
    check_space(mart, space)?;
    let n = mart.depth();
    let rows = 1usize << n;
    let maxima = child_maxima(mart, space);
    let peak = maxima.iter().flatten().copied().fold(0.0, f64::max);
    let mut times = vec![vec![0usize; rows]];
    let mut r = 1i32;
    loop {
        let threshold = base.powi(r);
        let t: Vec<usize> = (0..rows)
            .map(|row| (0..n).find(|&k| maxima[k][row] > threshold).unwrap_or(n))
            .collect();
        times.push(t);
        if threshold >= peak {
            break;
        }
        r += 1;
    }
    Ok(StoppingProfile { base, depth: n, times })
}

/// Per-node second differences `Δ²φ(f_{k-1}(ω), d_k(ω))` for `k = 1..=n`.
fn node_second_differences<F: ScalarFn + ?Sized>(phi: &F, mart: &WalshPaleyMartingale) -> Vec<Vec<f64>> {
    let m = mart.dim();
    (1..=mart.depth())
        .map(|k| {
            let parent = mart.level(k - 1).prefix_values(k - 1);
            let child = mart.level(k).prefix_values(k);
            parent
                .chunks(m)
                .zip(child.chunks(2 * m))
                .map(|(x, pair)| phi.value(&pair[..m]) + phi.value(&pair[m..]) - 2.0 * phi.value(x))
                .collect()
        })
        .collect()
}

/// `(E Σ_k Δ²φ(f_{k-1}, df_k), E Σ_k |Δ²φ(f_{k-1}, df_k)|)`.
pub fn second_difference_sum<F: ScalarFn + ?Sized>(phi: &F, mart: &WalshPaleyMartingale) -> (f64, f64) {
    let nodes = node_second_differences(phi, mart);
    let signed = nodes.iter().map(|l| pairwise_mean(l)).sum();
    let absolute = nodes
        .iter()
        .map(|l| pairwise_mean(&l.iter().map(|v| v.abs()).collect::<Vec<_>>()))
        .sum();
    (signed, absolute)
}

/// `E Σ_{m_{r-1} < k ≤ m_r} |Δ²φ(f_{k-1}, df_k)|` for `r = 1..profile.len()`;
/// the bands partition the absolute second-difference sum.
pub fn band_sums<F: ScalarFn + ?Sized>(
    phi: &F,
    mart: &WalshPaleyMartingale,
    profile: &StoppingProfile,
) -> Result<Vec<f64>> {
    let n = mart.depth();
    if profile.depth() != n {
        return Err(shape_err(format!("profile of depth {n}"), profile.depth()));
    }
    let nodes = node_second_differences(phi, mart);
    let rows = 1usize << n;
    Ok((1..profile.len())
        .map(|r| {
            let lo = profile.time(r - 1);
            let hi = profile.time(r);
            let per_path: Vec<f64> = (0..rows)
                .map(|row| {
                    (lo[row] + 1..=hi[row])
                        .map(|k| nodes[k - 1][row >> (n - k + 1)].abs())
                        .sum()
                })
                .collect();
            pairwise_mean(&per_path)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m1234() -> WalshPaleyMartingale {
        WalshPaleyMartingale::from_terminal(DyadicTable::scalar(2, vec![1.0, 2.0, 3.0, 4.0]).unwrap())
    }

    #[test]
    fn from_terminal_examples() {
        let f = m1234();
        assert_eq!(f.level(1).prefix_values(1), vec![1.5, 3.5]);
        assert_eq!(f.initial(), &[2.5]);
        let c = WalshPaleyMartingale::from_terminal(DyadicTable::constant(3, &[2.0, -1.0]).unwrap());
        assert!(c.levels().iter().all(|l| l.values().chunks(2).all(|r| r == [2.0, -1.0])));
        let eta1 = WalshPaleyMartingale::from_terminal(DyadicTable::rademacher(3, 1).unwrap());
        assert_eq!(eta1.level(1), &DyadicTable::rademacher(3, 1).unwrap());
        assert_eq!(eta1.initial(), &[0.0]);
    }

    #[test]
    fn differences_examples() {
        let d = m1234().differences();
        assert_eq!(d[0].values(), &[-1.0, -1.0, 1.0, 1.0]);
        assert_eq!(d[1].values(), &[-0.5, 0.5, -0.5, 0.5]);
        assert_eq!(m1234().increments(1), vec![1.0]);
        assert_eq!(m1234().increments(2), vec![0.5, 0.5]);
    }

    #[test]
    fn from_levels_rejects_non_martingales() {
        let f = m1234();
        let mut levels = f.levels().to_vec();
        assert!(WalshPaleyMartingale::from_levels(levels.clone()).is_ok());
        levels[1] = DyadicTable::scalar(2, vec![1.0, 1.0, 4.0, 4.0]).unwrap();
        assert!(WalshPaleyMartingale::from_levels(levels).is_err());
    }

    #[test]
    fn transform_examples() {
        let f = m1234();
        let id = DMatrix::identity(1, 1);
        let plus = transform(&id, &f, &PredictableSigns::all_plus(2)).unwrap();
        assert_eq!(plus.values(), &[-1.5, -0.5, 0.5, 1.5]);
        let alt = transform(&id, &f, &PredictableSigns::constant(&[1.0, -1.0]).unwrap()).unwrap();
        assert_eq!(alt.values(), &[-0.5, -1.5, 1.5, 0.5]);
        let zero = transform(&DMatrix::zeros(1, 1), &f, &PredictableSigns::all_plus(2)).unwrap();
        assert_eq!(zero.values(), &[0.0; 4]);
        assert!(transform(&DMatrix::zeros(1, 2), &f, &PredictableSigns::all_plus(2)).is_err());
    }

    #[test]
    fn doob_examples() {
        let abs = NormedSpace::lp(1, 1.0).unwrap();
        let r = doob_ratio(&m1234(), 2.0, &abs).unwrap();
        assert!((r - (10.1875f64 / 7.5).sqrt()).abs() < 1e-12);
        assert!((r - 1.1655).abs() < 1e-3);
        let c = WalshPaleyMartingale::from_terminal(DyadicTable::constant(2, &[3.0]).unwrap());
        assert_eq!(doob_ratio(&c, 2.0, &abs).unwrap(), 1.0);
        let z = WalshPaleyMartingale::from_terminal(DyadicTable::zeros(2, 1).unwrap());
        assert_eq!(doob_ratio(&z, 2.0, &abs).unwrap(), 1.0);
        assert!(doob_ratio(&c, 1.0, &abs).is_err());
    }

    #[test]
    fn stopping_profile_example() {
        let abs = NormedSpace::lp(1, 1.0).unwrap();
        let prof = stopping_profile(&m1234(), &abs, 2.0).unwrap();
        assert_eq!(prof.len(), 3);
        assert_eq!(prof.time(0), &[0; 4]);
        assert_eq!(prof.time(1), &[0; 4]);
        assert_eq!(prof.time(2), &[2; 4]);
        assert!(prof.is_measurable() && prof.is_monotone());
        let c = WalshPaleyMartingale::from_terminal(DyadicTable::constant(3, &[1.5]).unwrap());
        let prof = stopping_profile(&c, &abs, 2.0).unwrap();
        assert!((1..prof.len()).all(|r| prof.time(r).iter().all(|&t| t == 3)));
        assert!(stopping_profile(&c, &abs, 1.0).is_err());
    }

    #[test]
    fn second_difference_examples() {
        let sq = |x: &[f64]| x[0] * x[0];
        let (s, a) = second_difference_sum(&sq, &m1234());
        assert!((s - 2.5).abs() < 1e-12 && (a - 2.5).abs() < 1e-12);
        let affine = |x: &[f64]| 3.0 * x[0] - 1.0;
        let (s, a) = second_difference_sum(&affine, &m1234());
        assert!(s.abs() < 1e-12 && a.abs() < 1e-12);
    }

    #[test]
    fn stopped_martingale_requires_stopping_time() {
        let f = m1234();
        assert!(f.stopped(&[1, 1, 2, 2]).is_ok());
        assert!(f.stopped(&[1, 2, 1, 2]).is_err());
        let s = f.stopped(&[1, 1, 2, 2]).unwrap();
        assert_eq!(s.terminal().values(), &[1.5, 1.5, 3.0, 4.0]);
        assert!(WalshPaleyMartingale::from_levels(s.levels().to_vec()).is_ok());
    }

    #[test]
    fn predictable_signs_validation() {
        assert!(PredictableSigns::new(vec![vec![1.0], vec![1.0, -1.0]]).is_ok());
        assert!(PredictableSigns::new(vec![vec![1.0], vec![1.0]]).is_err());
        assert!(PredictableSigns::new(vec![vec![0.5]]).is_err());
        let eta1 = DyadicTable::rademacher(2, 1).unwrap();
        let one = DyadicTable::constant(2, &[1.0]).unwrap();
        assert!(PredictableSigns::from_tables(&[one.clone(), eta1.clone()]).is_ok());
        assert!(PredictableSigns::from_tables(&[eta1, one]).is_err());
    }
}
