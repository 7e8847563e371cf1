//! The dyadic cube `Γⁿ = {-1,1}ⁿ` with uniform measure and its coordinate
//! filtration `Σ₀ ⊂ Σ₁ ⊂ … ⊂ Σₙ`.
//!
//! Tables are stored exhaustively: row `i` holds the value at the path whose
//! first coordinate `η₁` is the most significant bit of `i`, with bit `0`
//! standing for `-1` and bit `1` for `+1`. A `Σ_k`-measurable table is
//! therefore constant on consecutive blocks of `2^(n-k)` rows.

use crate::error::{shape_err, DclabError, Result};

/// Largest supported depth. A depth-20 table has about a million rows.
pub const MAX_DEPTH: usize = 20;

/// A point `η ∈ Γⁿ`, or a prefix `ω ∈ Γᵏ`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Path {
    bits: Vec<i8>,
}

impl Path {
    pub fn new(bits: Vec<i8>) -> Result<Self> {
        if bits.len() > MAX_DEPTH {
            return Err(DclabError::Range(format!(
                "path length {} exceeds the depth cap {MAX_DEPTH}",
                bits.len()
            )));
        }
        if let Some(b) = bits.iter().find(|&&b| b != 1 && b != -1) {
            return Err(DclabError::Domain(format!("path entry {b} is not ±1")));
        }
        Ok(Self { bits })
    }

    /// Path of length `len` encoded by `index` (first coordinate most significant).
    pub fn from_index(index: usize, len: usize) -> Self {
        let bits = (0..len)
            .map(|k| if (index >> (len - 1 - k)) & 1 == 1 { 1 } else { -1 })
            .collect();
        Self { bits }
    }

    pub fn index(&self) -> usize {
        self.bits
            .iter()
            .fold(0usize, |acc, &b| (acc << 1) | usize::from(b == 1))
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[i8] {
        &self.bits
    }
}

/// Sign of coordinate `k` (1-based) of the path with row index `row` at depth `depth`.
#[inline]
pub fn coordinate(row: usize, depth: usize, k: usize) -> f64 {
    if (row >> (depth - k)) & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Filtration level `k`, `0 ≤ k ≤ n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct FiltrationLevel(pub usize);

/// A function `Γⁿ → R^m` stored as a full table of `2ⁿ` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicTable {
    depth: usize,
    dim: usize,
    values: Vec<f64>,
}

impl DyadicTable {
    pub fn new(depth: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        check_depth(depth)?;
        if dim == 0 {
            return Err(DclabError::Domain("table dimension must be at least 1".into()));
        }
        let expected = (1usize << depth) * dim;
        if values.len() != expected {
            return Err(shape_err(
                format!("{expected} values (2^{depth} rows of dim {dim})"),
                values.len(),
            ));
        }
        Ok(Self { depth, dim, values })
    }

    /// Scalar table from `2ⁿ` values.
    pub fn scalar(depth: usize, values: Vec<f64>) -> Result<Self> {
        Self::new(depth, 1, values)
    }

    pub fn constant(depth: usize, value: &[f64]) -> Result<Self> {
        let rows = 1usize << check_depth(depth)?;
        Self::new(depth, value.len(), value.repeat(rows))
    }

    pub fn zeros(depth: usize, dim: usize) -> Result<Self> {
        let rows = 1usize << check_depth(depth)?;
        Self::new(depth, dim, vec![0.0; rows * dim])
    }

    /// Tabulates `f` over all paths.
    pub fn from_fn(depth: usize, dim: usize, mut f: impl FnMut(&Path) -> Vec<f64>) -> Result<Self> {
        let rows = 1usize << check_depth(depth)?;
        let mut values = Vec::with_capacity(rows * dim);
        for i in 0..rows {
            let v = f(&Path::from_index(i, depth));
            if v.len() != dim {
                return Err(shape_err(format!("vectors of dim {dim}"), v.len()));
            }
            values.extend_from_slice(&v);
        }
        Self::new(depth, dim, values)
    }

    /// The coordinate function `η ↦ η_k` (1-based `k`).
    pub fn rademacher(depth: usize, k: usize) -> Result<Self> {
        if k == 0 || k > depth {
            return Err(DclabError::Range(format!("coordinate {k} outside 1..={depth}")));
        }
        let rows = 1usize << depth;
        Self::scalar(depth, (0..rows).map(|i| coordinate(i, depth, k)).collect())
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        1 << self.depth
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn at(&self, path: &Path) -> Result<&[f64]> {
        if path.len() != self.depth {
            return Err(shape_err(format!("path of length {}", self.depth), path.len()));
        }
        Ok(self.row(path.index()))
    }

    pub fn max_abs_diff(&self, other: &DyadicTable) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Row-wise map to a new dimension.
    pub fn map_rows(&self, out_dim: usize, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Result<Self> {
        let mut values = Vec::with_capacity(self.rows() * out_dim);
        for i in 0..self.rows() {
            let v = f(self.row(i));
            if v.len() != out_dim {
                return Err(shape_err(format!("vectors of dim {out_dim}"), v.len()));
            }
            values.extend(v);
        }
        Self::new(self.depth, out_dim, values)
    }

    /// Scalar table of `f` applied to each row.
    pub fn map_scalar(&self, mut f: impl FnMut(&[f64]) -> f64) -> DyadicTable {
        let values = (0..self.rows()).map(|i| f(self.row(i))).collect();
        DyadicTable { depth: self.depth, dim: 1, values }
    }

    pub fn scale(&self, t: f64) -> DyadicTable {
        DyadicTable {
            depth: self.depth,
            dim: self.dim,
            values: self.values.iter().map(|v| v * t).collect(),
        }
    }

    pub fn add(&self, other: &DyadicTable) -> Result<DyadicTable> {
        self.check_same_shape(other)?;
        Ok(DyadicTable {
            depth: self.depth,
            dim: self.dim,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &DyadicTable) -> Result<DyadicTable> {
        self.add(&other.scale(-1.0))
    }

    /// Pointwise product with a scalar table.
    pub fn mul_scalar_table(&self, w: &DyadicTable) -> Result<DyadicTable> {
        if w.dim != 1 || w.depth != self.depth {
            return Err(shape_err(format!("scalar table of depth {}", self.depth), format!("depth {} dim {}", w.depth, w.dim)));
        }
        let mut values = self.values.clone();
        for (i, chunk) in values.chunks_mut(self.dim).enumerate() {
            chunk.iter_mut().for_each(|v| *v *= w.values[i]);
        }
        Ok(DyadicTable { depth: self.depth, dim: self.dim, values })
    }

    /// Row-wise inner product, giving a scalar table.
    pub fn inner(&self, other: &DyadicTable) -> Result<DyadicTable> {
        self.check_same_shape(other)?;
        Ok(DyadicTable {
            depth: self.depth,
            dim: 1,
            values: (0..self.rows())
                .map(|i| self.row(i).iter().zip(other.row(i)).map(|(a, b)| a * b).sum())
                .collect(),
        })
    }

    pub(crate) fn check_same_shape(&self, other: &DyadicTable) -> Result<()> {
        if self.depth != other.depth || self.dim != other.dim {
            return Err(shape_err(
                format!("depth {} dim {}", self.depth, self.dim),
                format!("depth {} dim {}", other.depth, other.dim),
            ));
        }
        Ok(())
    }

    /// Whether the table depends only on the first `k` coordinates.
    pub fn is_measurable(&self, k: FiltrationLevel, tol: f64) -> bool {
        if k.0 >= self.depth {
            return true;
        }
        let block = 1usize << (self.depth - k.0);
        (0..self.rows()).step_by(block).all(|start| {
            let first = self.row(start);
            (start + 1..start + block).all(|i| {
                self.row(i).iter().zip(first).all(|(a, b)| (a - b).abs() <= tol)
            })
        })
    }

    /// Same function viewed on a deeper cube (independent of the extra coordinates).
    pub fn extend_depth(&self, extra: usize) -> Result<DyadicTable> {
        let depth = check_depth(self.depth + extra)?;
        let reps = 1usize << extra;
        let mut values = Vec::with_capacity(self.values.len() * reps);
        for i in 0..self.rows() {
            for _ in 0..reps {
                values.extend_from_slice(self.row(i));
            }
        }
        Self::new(depth, self.dim, values)
    }

    /// Values at the `2^k` prefixes of a `Σ_k`-measurable table (one row per block).
    pub fn prefix_values(&self, k: usize) -> Vec<f64> {
        let block = 1usize << (self.depth - k.min(self.depth));
        (0..self.rows()).step_by(block).flat_map(|i| self.row(i).to_vec()).collect()
    }

    /// Inverse of [`Self::prefix_values`]: a `Σ_k`-measurable table from its prefix values.
    pub fn from_prefix_values(depth: usize, k: usize, dim: usize, prefix: &[f64]) -> Result<Self> {
        check_depth(depth)?;
        if k > depth || prefix.len() != (1usize << k) * dim {
            return Err(shape_err(format!("2^{k} prefix rows of dim {dim}"), prefix.len()));
        }
        let block = 1usize << (depth - k);
        let mut values = Vec::with_capacity((1usize << depth) * dim);
        for chunk in prefix.chunks(dim) {
            for _ in 0..block {
                values.extend_from_slice(chunk);
            }
        }
        Self::new(depth, dim, values)
    }
}

pub(crate) fn check_depth(depth: usize) -> Result<usize> {
    if depth > MAX_DEPTH {
        return Err(DclabError::Range(format!("depth {depth} exceeds the cap {MAX_DEPTH}")));
    }
    Ok(depth)
}

/// Pairwise (tree) sum of `rows` consecutive vectors of length `dim`, in index order.
///
/// `rows` must be a power of two.
pub fn pairwise_sum_rows(values: &[f64], dim: usize) -> Vec<f64> {
    let rows = values.len() / dim;
    debug_assert!(rows.is_power_of_two());
    let mut buf = values.to_vec();
    let mut live = rows;
    while live > 1 {
        let half = live / 2;
        for i in 0..half {
            for c in 0..dim {
                buf[i * dim + c] = buf[2 * i * dim + c] + buf[(2 * i + 1) * dim + c];
            }
        }
        live = half;
    }
    buf.truncate(dim);
    buf
}

/// Pairwise sum of a scalar slice whose length is a power of two.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    pairwise_sum_rows(values, 1)[0]
}

/// Mean of a scalar slice of power-of-two length using the pairwise order.
pub fn pairwise_mean(values: &[f64]) -> f64 {
    pairwise_sum(values) / values.len() as f64
}

/// `E f = 2⁻ⁿ Σ_η f(η)`.
pub fn expectation(f: &DyadicTable) -> Vec<f64> {
    let scale = 1.0 / f.rows() as f64;
    pairwise_sum_rows(&f.values, f.dim)
        .into_iter()
        .map(|v| v * scale)
        .collect()
}

/// Expectation of a scalar table.
pub fn expectation_scalar(f: &DyadicTable) -> f64 {
    expectation(f)[0]
}

/// `E(f | Σ_k)`: each block of `2^(n-k)` rows replaced by its average.
pub fn conditional_expectation(f: &DyadicTable, k: FiltrationLevel) -> Result<DyadicTable> {
    if k.0 > f.depth {
        return Err(DclabError::Range(format!(
            "filtration level {} outside 0..={}",
            k.0, f.depth
        )));
    }
    if k.0 == f.depth {
        return Ok(f.clone());
    }
    let block = 1usize << (f.depth - k.0);
    let dim = f.dim;
    let scale = 1.0 / block as f64;
    let mut values = Vec::with_capacity(f.values.len());
    for chunk in f.values.chunks(block * dim) {
        let avg: Vec<f64> = pairwise_sum_rows(chunk, dim).into_iter().map(|v| v * scale).collect();
        for _ in 0..block {
            values.extend_from_slice(&avg);
        }
    }
    DyadicTable::new(f.depth, dim, values)
}

/// The section `ξ ↦ f(prefix, ξ)` on `Γ^(n-len(prefix))`.
pub fn section(f: &DyadicTable, prefix: &Path) -> Result<DyadicTable> {
    if prefix.len() >= f.depth {
        return Err(DclabError::Range(format!(
            "prefix length {} must be below the depth {}",
            prefix.len(),
            f.depth
        )));
    }
    let depth = f.depth - prefix.len();
    let block = (1usize << depth) * f.dim;
    let start = prefix.index() * block;
    DyadicTable::new(depth, f.dim, f.values[start..start + block].to_vec())
}

/// Both sides of the dyadic tail estimate
/// `Σ_{j≥1} 2^{jp} P(g > 2^j) ≤ 2^p/(2^p-1) · E g^p`.
pub fn tail_weighted_sum(g: &DyadicTable, p: f64) -> Result<(f64, f64)> {
    if g.dim != 1 {
        return Err(shape_err("scalar table", format!("dim {}", g.dim)));
    }
    if !(p > 0.0) {
        return Err(DclabError::Domain(format!("exponent p = {p} must be positive")));
    }
    if let Some(v) = g.values.iter().find(|v| !(**v >= 0.0)) {
        return Err(DclabError::Domain(format!("table value {v} is negative")));
    }
    let rows = g.rows() as f64;
    let max = g.values.iter().copied().fold(0.0, f64::max);
    let mut lhs = 0.0;
    let mut j = 1i32;
    while 2f64.powi(j) < max {
        let threshold = 2f64.powi(j);
        let count = g.values.iter().filter(|&&v| v > threshold).count() as f64;
        lhs += 2f64.powf(f64::from(j) * p) * count / rows;
        j += 1;
    }
    let moments: Vec<f64> = g.values.iter().map(|v| v.powf(p)).collect();
    let two_p = 2f64.powf(p);
    let rhs = two_p / (two_p - 1.0) * pairwise_mean(&moments);
    Ok((lhs, rhs))
}
