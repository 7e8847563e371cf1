use std::fmt;
use std::str::FromStr;

use crate::error::{DclabError, Result};

/// How the two summands of a direct sum are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outer {
    /// `‖(x, y)‖ = ‖x‖ + ‖y‖`
    One,
    /// `‖(x, y)‖ = max(‖x‖, ‖y‖)`
    Infinity,
}

/// A finite-dimensional normed space: `ℓ_p^m` or a direct sum of two such.
#[derive(Debug, Clone, PartialEq)]
pub enum NormedSpace {
    Lp { dim: usize, p: f64 },
    DirectSum { left: Box<NormedSpace>, right: Box<NormedSpace>, outer: Outer },
}

/// Conjugate exponent with `1* = ∞` and `∞* = 1`.
pub fn dual_exponent(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

impl NormedSpace {
    pub fn lp(dim: usize, p: f64) -> Result<Self> {
        if dim == 0 {
            return Err(DclabError::Config("space dimension must be at least 1".into()));
        }
        if !(p >= 1.0) {
            return Err(DclabError::Config(format!("exponent p = {p} must lie in [1, ∞]")));
        }
        Ok(NormedSpace::Lp { dim, p })
    }

    pub fn euclidean(dim: usize) -> Result<Self> {
        Self::lp(dim, 2.0)
    }

    pub fn sum1(left: NormedSpace, right: NormedSpace) -> Self {
        NormedSpace::DirectSum { left: Box::new(left), right: Box::new(right), outer: Outer::One }
    }

    pub fn sum_inf(left: NormedSpace, right: NormedSpace) -> Self {
        NormedSpace::DirectSum { left: Box::new(left), right: Box::new(right), outer: Outer::Infinity }
    }

    pub fn dim(&self) -> usize {
        match self {
            NormedSpace::Lp { dim, .. } => *dim,
            NormedSpace::DirectSum { left, right, .. } => left.dim() + right.dim(),
        }
    }

    pub fn norm(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        match self {
            NormedSpace::Lp { p, .. } => lp_norm(x, *p),
            NormedSpace::DirectSum { left, right, outer } => {
                let (a, b) = x.split_at(left.dim());
                let (na, nb) = (left.norm(a), right.norm(b));
                match outer {
                    Outer::One => na + nb,
                    Outer::Infinity => na.max(nb),
                }
            }
        }
    }

    /// The dual space, identified with `R^m` through the standard pairing.
    pub fn dual(&self) -> NormedSpace {
        match self {
            NormedSpace::Lp { dim, p } => NormedSpace::Lp { dim: *dim, p: dual_exponent(*p) },
            NormedSpace::DirectSum { left, right, outer } => NormedSpace::DirectSum {
                left: Box::new(left.dual()),
                right: Box::new(right.dual()),
                outer: match outer {
                    Outer::One => Outer::Infinity,
                    Outer::Infinity => Outer::One,
                },
            },
        }
    }

    /// A norming functional: `v` with `⟨v, x⟩ = ‖x‖` and dual norm `≤ 1`
    /// (zero at `x = 0`).
    pub fn norming_functional(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.norming_into(x, &mut out);
        out
    }

    pub(crate) fn norming_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            NormedSpace::Lp { p, .. } => lp_norming(x, *p, out),
            NormedSpace::DirectSum { left, right, outer } => {
                let k = left.dim();
                let (a, b) = x.split_at(k);
                let (oa, ob) = out.split_at_mut(k);
                match outer {
                    Outer::One => {
                        left.norming_into(a, oa);
                        right.norming_into(b, ob);
                    }
                    Outer::Infinity => {
                        oa.iter_mut().chain(ob.iter_mut()).for_each(|v| *v = 0.0);
                        if left.norm(a) >= right.norm(b) {
                            left.norming_into(a, oa);
                        } else {
                            right.norming_into(b, ob);
                        }
                    }
                }
            }
        }
    }

    /// Extreme points of the unit ball are `±e_j` (an `ℓ₁`-sum of `ℓ₁` pieces).
    pub fn is_l1_like(&self) -> bool {
        match self {
            NormedSpace::Lp { p, .. } => *p == 1.0,
            NormedSpace::DirectSum { left, right, outer } => {
                *outer == Outer::One && left.is_l1_like() && right.is_l1_like()
            }
        }
    }

    /// The norm is the max-modulus norm.
    pub fn is_linf_like(&self) -> bool {
        match self {
            NormedSpace::Lp { p, .. } => p.is_infinite(),
            NormedSpace::DirectSum { left, right, outer } => {
                *outer == Outer::Infinity && left.is_linf_like() && right.is_linf_like()
            }
        }
    }

    pub fn is_euclidean(&self) -> bool {
        matches!(self, NormedSpace::Lp { p, .. } if *p == 2.0)
    }

    /// Constants `(a, b)` with `a‖x‖₂ ≤ ‖x‖ ≤ b‖x‖₂`.
    pub fn euclidean_comparison(&self) -> (f64, f64) {
        match self {
            NormedSpace::Lp { dim, p } => {
                let gap = 1.0 / p - 0.5;
                let scale = (*dim as f64).powf(gap.abs());
                if gap >= 0.0 {
                    (1.0, scale)
                } else {
                    (1.0 / scale, 1.0)
                }
            }
            NormedSpace::DirectSum { left, right, outer } => {
                let (la, lb) = left.euclidean_comparison();
                let (ra, rb) = right.euclidean_comparison();
                match outer {
                    Outer::One => (la.min(ra), lb.max(rb) * 2f64.sqrt()),
                    Outer::Infinity => (la.min(ra) / 2f64.sqrt(), lb.max(rb)),
                }
            }
        }
    }
}

pub(crate) fn lp_norm(x: &[f64], p: f64) -> f64 {
    if p == 1.0 {
        x.iter().map(|v| v.abs()).sum()
    } else if p == 2.0 {
        x.iter().map(|v| v * v).sum::<f64>().sqrt()
    } else if p.is_infinite() {
        x.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    } else {
        let top = x.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if top == 0.0 {
            return 0.0;
        }
        top * x.iter().map(|v| (v.abs() / top).powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn lp_norming(x: &[f64], p: f64, out: &mut [f64]) {
    let norm = lp_norm(x, p);
    if norm == 0.0 {
        out.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    if p == 1.0 {
        for (o, v) in out.iter_mut().zip(x) {
            *o = sign(*v);
        }
    } else if p.is_infinite() {
        out.iter_mut().for_each(|v| *v = 0.0);
        let (idx, _) = x
            .iter()
            .enumerate()
            .fold((0, -1.0), |best, (i, v)| if v.abs() > best.1 { (i, v.abs()) } else { best });
        out[idx] = sign(x[idx]);
    } else {
        for (o, v) in out.iter_mut().zip(x) {
            *o = sign(*v) * (v.abs() / norm).powf(p - 1.0);
        }
    }
}

fn fmt_exponent(p: f64) -> String {
    if p.is_infinite() {
        "inf".to_string()
    } else {
        format!("{p}")
    }
}

impl fmt::Display for NormedSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormedSpace::Lp { dim, p } => write!(f, "lp:{dim}:{}", fmt_exponent(*p)),
            NormedSpace::DirectSum { left, right, outer } => {
                let tag = match outer {
                    Outer::One => "sum1",
                    Outer::Infinity => "suminf",
                };
                write!(f, "{tag}({left},{right})")
            }
        }
    }
}

impl FromStr for NormedSpace {
    type Err = DclabError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || DclabError::Parse(format!("cannot parse space descriptor {s:?}"));
        if let Some(rest) = s.strip_prefix("lp:") {
            let (dim, p) = rest.split_once(':').ok_or_else(bad)?;
            let dim: usize = dim.parse().map_err(|_| bad())?;
            let p = parse_exponent(p).ok_or_else(bad)?;
            return NormedSpace::lp(dim, p);
        }
        let (outer, rest) = if let Some(r) = s.strip_prefix("sum1(") {
            (Outer::One, r)
        } else if let Some(r) = s.strip_prefix("suminf(") {
            (Outer::Infinity, r)
        } else {
            return Err(bad());
        };
        let inner = rest.strip_suffix(')').ok_or_else(bad)?;
        let mut depth = 0i32;
        let mut split = None;
        for (i, c) in inner.char_indices() {
            match c {
                '(' => depth += 1,
                ')' => depth -= 1,
                ',' if depth == 0 => {
                    split = Some(i);
                    break;
                }
                _ => {}
            }
        }
        let i = split.ok_or_else(bad)?;
        let left: NormedSpace = inner[..i].parse()?;
        let right: NormedSpace = inner[i + 1..].parse()?;
        Ok(NormedSpace::DirectSum { left: Box::new(left), right: Box::new(right), outer })
    }
}

/// Parses an exponent, accepting `inf`/`infinity`.
pub fn parse_exponent(s: &str) -> Option<f64> {
    match s.trim().to_ascii_lowercase().as_str() {
        "inf" | "infinity" | "∞" => Some(f64::INFINITY),
        other => other.parse().ok(),
    }
}
