//! Closed-form output spectra for the resonant cavity and for the detuned
//! cavity with `Δ_a = J_a`, `Δ_b = J_b`. These are independent of the
//! matrix pipeline in [`crate::spectrum`] and serve as its cross-check.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{steady_state, SystemParams};

/// Resonant-cavity output spectra of either low-frequency mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonantVariances {
    pub s_x: f64,
    pub s_y: f64,
    /// `V(X_j, Y_j)`
    pub v_xy: f64,
    /// `V(X₁, X₂)`
    pub v_x1x2: f64,
    /// `V(Y₁, Y₂) = −V(X₁, X₂)`
    pub v_y1y2: f64,
}

/// Output spectra of the sum and difference quadratures
/// `X_p = X₁ + X₂`, `X_m = X₁ − X₂` (and likewise `Y`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombinedVariances {
    pub s_xp: f64,
    pub s_yp: f64,
    pub s_xm: f64,
    pub s_ym: f64,
}

fn equal_real_pump(p: &SystemParams) -> Result<f64> {
    p.equal_real_pump()
        .ok_or_else(|| Error::Domain("pumps must be equal and real".into()))
}

/// Uncoupled single-OPO spectra `(S_X, S_Y)` for pump `ε`, ignoring the
/// couplings.
pub fn single_opo_variances(p: &SystemParams, omega: f64) -> Result<(f64, f64)> {
    let ke = p.kappa * equal_real_pump(p)?;
    let (ga, gb) = (p.gamma_a, p.gamma_b);
    let num = 4.0 * ga * gb * ke;
    let w2 = gb * gb * omega * omega;
    Ok((
        1.0 + num / ((ga * gb - ke).powi(2) + w2),
        1.0 - num / ((ga * gb + ke).powi(2) + w2),
    ))
}

/// Closed-form resonant spectra.
///
/// `S_Y` is `S_X` with `κε → −κε`, which makes the last numerator term
/// `−2γ_a J_b² κε`.
pub fn analytic_variances(p: &SystemParams, omega: f64) -> Result<ResonantVariances> {
    if !p.is_resonant() {
        return Err(Error::Domain("detunings must be zero".into()));
    }
    let eps = equal_real_pump(p)?;
    steady_state(p)?;
    let ke = p.kappa * eps;
    let (ga, gb, ja, jb) = (p.gamma_a, p.gamma_b, p.j_a, p.j_b);
    let gta2 = ga * ga + ja * ja;
    let gtb2 = gb * gb + jb * jb;
    let w2 = omega * omega;
    let den = 4.0 * ga * ga * gtb2 * gtb2 * w2 + (gtb2 * (gta2 - w2) - ke * ke).powi(2);

    let bracket = |k: f64| {
        gb * (gtb2 * (w2 - ja * ja) + jb * jb * ga * ga + (ga * gb + k).powi(2))
            + 2.0 * ga * jb * jb * k
    };
    let s_x = 1.0 + 4.0 * ga * ke * bracket(ke) / den;
    let s_y = 1.0 - 4.0 * ga * ke * bracket(-ke) / den;
    let v_xy = 4.0 * ga * jb * ke * (gtb2 * (ga * ga - ja * ja + w2) + ke * ke) / den;
    let v_x1x2 = -8.0 * ja * jb * ga * ga * gtb2 * ke / den;
    Ok(ResonantVariances {
        s_x,
        s_y,
        v_xy,
        v_x1x2,
        v_y1y2: -v_x1x2,
    })
}

/// Closed-form combined-mode spectra for `Δ_a = J_a`, `Δ_b = J_b`.
pub fn analytic_combined(p: &SystemParams, omega: f64) -> Result<CombinedVariances> {
    if !p.detuning_matches_coupling(1e-12) || p.equal_real_pump().is_none() {
        return Err(Error::DetuningMismatch);
    }
    steady_state(p)?;
    let ke = p.kappa * p.eps1.re;
    let (ga, gb, ja) = (p.gamma_a, p.gamma_b, p.j_a);
    let w2 = omega * omega;
    let gagb = ga * gb;
    let num = 8.0 * gagb * ke;

    let s_xp = 2.0 + num / ((gagb - ke).powi(2) + gb * gb * w2);
    let s_yp = 2.0 - num / ((gagb + ke).powi(2) + gb * gb * w2);

    let detune = gb * gb * (4.0 * ja * ja - w2);
    let den = (gb * gb * (ga * ga + 4.0 * ja * ja - w2) - ke * ke).powi(2)
        + 4.0 * ga * ga * gb.powi(4) * w2;
    let s_xm = 2.0 + num * ((gagb + ke).powi(2) - detune) / den;
    let s_ym = 2.0 - num * ((gagb - ke).powi(2) - detune) / den;
    Ok(CombinedVariances {
        s_xp,
        s_yp,
        s_xm,
        s_ym,
    })
}
