#![allow(dead_code)]

use dclab::dyadic::DyadicTable;
use dclab::martingale::{PredictableSigns, WalshPaleyMartingale};
use dclab::quadform::{NormedSpace, SymOperator};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn table(rng: &mut ChaCha8Rng, n: usize, m: usize) -> DyadicTable {
    let vals = (0..(m << n)).map(|_| rng.random_range(-3.0..3.0)).collect();
    DyadicTable::new(n, m, vals).unwrap()
}

pub fn martingale(rng: &mut ChaCha8Rng, n: usize, m: usize) -> WalshPaleyMartingale {
    WalshPaleyMartingale::from_terminal(table(rng, n, m))
}

pub fn signs(rng: &mut ChaCha8Rng, n: usize) -> PredictableSigns {
    let levels = (1..=n)
        .map(|k| (0..1usize << (k - 1)).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect())
        .collect();
    PredictableSigns::new(levels).unwrap()
}

pub fn matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

pub fn symmetric(rng: &mut ChaCha8Rng, m: usize) -> SymOperator {
    let a = matrix(rng, m, m);
    SymOperator::new((&a + a.transpose()) * 0.5).unwrap()
}

pub fn space(rng: &mut ChaCha8Rng, m: usize) -> NormedSpace {
    let p = [1.0, 1.5, 2.0, 3.0, f64::INFINITY][rng.random_range(0..5)];
    NormedSpace::lp(m, p).unwrap()
}

/// Plain mean over the rows of a table, one coordinate at a time.
pub fn mean(t: &DyadicTable) -> Vec<f64> {
    let mut out = vec![0.0; t.dim()];
    for i in 0..t.rows() {
        for (o, v) in out.iter_mut().zip(t.row(i)) {
            *o += v;
        }
    }
    out.iter().map(|v| v / t.rows() as f64).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn mat_vec(m: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)] * x[j]).sum()).collect()
}

/// `η_k` on row `i` of a depth-`n` table.
pub fn eta(i: usize, n: usize, k: usize) -> f64 {
    if (i >> (n - k)) & 1 == 1 { 1.0 } else { -1.0 }
}
