//! Lower-bound estimation of delta-convexity and UMD constants over
//! Walsh-Paley martingales, the pairing identity behind the equivalence of the
//! two, and grid construction of control functions.
//!
//! Every estimate is the value of an explicit witness martingale, so it is a
//! certified lower bound for the supremum it approximates.

mod control;
mod dc;
mod pairing;
pub(crate) mod search;
mod umd;

pub use control::{
    control_check, control_value_iteration, homogeneity_check, ControlGrid, ControlGridSpec, ControlStatus,
    ValueIteration,
};
pub use dc::{dc_family_max, dc_lower_bound, dc_sum, embedded_dc_chain, hadamard_dc_chain, DcSumReport};
pub use pairing::{pairing_chain, PairingReport};
pub use umd::{umd_family_max, umd_lower_bound, umd_ratio, SignMode};

use crate::martingale::{PredictableSigns, WalshPaleyMartingale};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateKind {
    Dc,
    UmdFixed,
    UmdPredictable,
}

impl EstimateKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimateKind::Dc => "dc",
            EstimateKind::UmdFixed => "umd_fixed",
            EstimateKind::UmdPredictable => "umd_predictable",
        }
    }
}

impl std::fmt::Display for EstimateKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub restarts: usize,
    /// Ascent steps per restart.
    pub steps: usize,
    pub seed: u64,
    /// Optional starting point for restart 0.
    pub warm_start: Option<WalshPaleyMartingale>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { restarts: 16, steps: 300, seed: 0, warm_start: None }
    }
}

/// A lower bound for a martingale constant together with the martingale
/// (and signs) attaining it.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantEstimate {
    pub kind: EstimateKind,
    pub value: f64,
    pub witness: WalshPaleyMartingale,
    pub signs: Option<PredictableSigns>,
    pub depth: usize,
    pub dim: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Largest ratio seen at any point of the search.
    pub max_evaluated: f64,
    pub evaluations: usize,
}
