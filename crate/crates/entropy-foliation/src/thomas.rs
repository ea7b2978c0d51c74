use serde::{Deserialize, Serialize};

use crate::EntropyError;

/// Entropy bounds for `g(x) = ψ^{1 + τ̃(f x)}(x)` with `ψ` conjugate to
/// a flow whose time-one map has entropy `h_f`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThomasBracket {
    pub h_f: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    /// `(1 + min τ̃)² h_f`.
    pub low: f64,
    /// `(1 + max τ̃)² h_f`.
    pub high: f64,
    /// `(1 + min τ̃) h_f`.
    pub low_single: f64,
    /// `(1 + max τ̃) h_f`.
    pub high_single: f64,
}

impl ThomasBracket {
    /// `h` lies in the squared bracket, within `tol`.
    pub fn squared_contains(&self, h: f64, tol: f64) -> bool {
        h >= self.low - tol && h <= self.high + tol
    }

    /// `h` lies in the single-power bracket, within `tol`.
    pub fn single_contains(&self, h: f64, tol: f64) -> bool {
        h >= self.low_single - tol && h <= self.high_single + tol
    }
}

pub fn thomas_bracket(h_f: f64, tau_tilde: &[f64]) -> Result<ThomasBracket, EntropyError> {
    if tau_tilde.is_empty() {
        return Err(EntropyError::Params("empty τ̃".into()));
    }
    if tau_tilde.iter().any(|t| !t.is_finite()) || !h_f.is_finite() {
        return Err(EntropyError::Params("non-finite input".into()));
    }
    let tau_min = tau_tilde.iter().cloned().fold(f64::INFINITY, f64::min);
    let tau_max = tau_tilde.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (a, b) = (1.0 + tau_min, 1.0 + tau_max);
    if a <= 0.0 {
        return Err(EntropyError::Params(format!("1 + min τ̃ = {a} is not positive")));
    }
    Ok(ThomasBracket {
        h_f,
        tau_min,
        tau_max,
        low: a * a * h_f,
        high: b * b * h_f,
        low_single: a * h_f,
        high_single: b * h_f,
    })
}
