use crate::dyadic::{expectation_scalar, DyadicTable};
use crate::error::{shape_err, Result};
use crate::martingale::{second_difference_sum, transform, PredictableSigns, WalshPaleyMartingale};
use crate::quadform::{NormedSpace, QuadraticForm};

/// The pairing identity `E Σ_k |Δ²q(f_{k-1}, df_k)| = 2 E⟨fₙ, Σ_k ε*_k T df_k⟩`
/// with `ε*_k = sign q(df_k)`, and the Cauchy-Schwarz bound that follows.
#[derive(Debug, Clone, PartialEq)]
pub struct PairingReport {
    /// Left side, from second differences along the martingale.
    pub absolute_sum: f64,
    /// Right side `2 E⟨fₙ, Σ ε*_k T df_k⟩`.
    pub pairing: f64,
    pub gap: f64,
    /// `2 (E‖fₙ‖²_X)^{1/2} (E‖Σ ε*_k T df_k‖²_{X*})^{1/2}`.
    pub cauchy_schwarz: f64,
    /// Whether the sign tables passed the `Σ_{k-1}`-measurability check.
    pub signs_predictable: bool,
    pub signs: PredictableSigns,
}

/// Ties `q(df_k) = 0` get the sign `+1`; those terms vanish on both sides.
pub fn pairing_chain(q: &QuadraticForm, space: &NormedSpace, mart: &WalshPaleyMartingale) -> Result<PairingReport> {
    let m = mart.dim();
    if q.dim() != m || space.dim() != m {
        return Err(shape_err(format!("form and space of dimension {m}"), format!("{} and {}", q.dim(), space.dim())));
    }
    let tables: Vec<DyadicTable> = mart
        .differences()
        .iter()
        .map(|d| d.map_scalar(|v| if q.eval(v) >= 0.0 { 1.0 } else { -1.0 }))
        .collect();
    let (signs, signs_predictable) = match PredictableSigns::from_tables(&tables) {
        Ok(s) => (s, true),
        Err(_) => {
            // fall back to the values on the `+` children, which is what evenness would give
            let levels = (1..=mart.depth())
                .map(|k| {
                    mart.increments(k)
                        .chunks(m)
                        .map(|d| if q.eval(d) >= 0.0 { 1.0 } else { -1.0 })
                        .collect()
                })
                .collect();
            (PredictableSigns::new(levels)?, false)
        }
    };
    let (_, absolute_sum) = second_difference_sum(q, mart);
    let g = transform(q.matrix(), mart, &signs)?;
    let terminal = mart.terminal();
    let pairing = 2.0 * expectation_scalar(&terminal.inner(&g)?);
    let dual = space.dual();
    let ex = expectation_scalar(&terminal.map_scalar(|v| space.norm(v).powi(2)));
    let eg = expectation_scalar(&g.map_scalar(|v| dual.norm(v).powi(2)));
    Ok(PairingReport {
        absolute_sum,
        pairing,
        gap: (absolute_sum - pairing).abs(),
        cauchy_schwarz: 2.0 * ex.sqrt() * eg.sqrt(),
        signs_predictable,
        signs,
    })
}
