//! Physical parameters, equations of motion, steady states and stability.
//!
//! The doubled phase-space state is always ordered
//! `[α₁, α₁⁺, α₂, α₂⁺, β₁, β₁⁺, β₂, β₂⁺]`, where `α` are the low-frequency
//! (downconverted) modes and `β` the high-frequency (pumped) modes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linearized::{build_linear_model, eigenvalues_of, sort_eigenvalues};
use crate::C64;

/// Relative guard band used when classifying a pump as below threshold.
pub const THRESHOLD_GUARD: f64 = 1e-9;

/// Physical constants of the coupled device, in units of the low-frequency
/// cavity decay rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    /// Effective χ⁽²⁾ nonlinearity.
    pub kappa: f64,
    pub gamma_a: f64,
    pub gamma_b: f64,
    /// Evanescent coupling at the low frequency.
    pub j_a: f64,
    /// Evanescent coupling at the high frequency.
    pub j_b: f64,
    /// `ω_a − ω_L`
    pub delta_a: f64,
    /// `ω_b − 2ω_L`
    pub delta_b: f64,
    pub eps1: C64,
    pub eps2: C64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            kappa: 0.01,
            gamma_a: 1.0,
            gamma_b: 1.0,
            j_a: 0.0,
            j_b: 0.0,
            delta_a: 0.0,
            delta_b: 0.0,
            eps1: C64::new(0.0, 0.0),
            eps2: C64::new(0.0, 0.0),
        }
    }
}

impl SystemParams {
    /// Equal cavity losses `γ_a = γ_b = gamma`, resonant, unpumped.
    pub fn symmetric(gamma: f64, j_a: f64, j_b: f64, kappa: f64) -> Self {
        Self {
            kappa,
            gamma_a: gamma,
            gamma_b: gamma,
            j_a,
            j_b,
            ..Self::default()
        }
    }

    pub fn with_detunings(mut self, delta_a: f64, delta_b: f64) -> Self {
        self.delta_a = delta_a;
        self.delta_b = delta_b;
        self
    }

    /// Equal real pumps `ε₁ = ε₂ = eps`.
    pub fn with_pump(mut self, eps: f64) -> Self {
        self.eps1 = C64::new(eps, 0.0);
        self.eps2 = C64::new(eps, 0.0);
        self
    }

    /// Equal real pumps at the given fraction of the oscillation threshold.
    pub fn with_pump_fraction(self, fraction: f64) -> Self {
        let eps_c = critical_pump(&self);
        self.with_pump(fraction * eps_c)
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("kappa", self.kappa),
            ("gamma_a", self.gamma_a),
            ("gamma_b", self.gamma_b),
        ];
        for (name, v) in rates {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "{name} must be finite and > 0, got {v}"
                )));
            }
        }
        let others = [
            ("j_a", self.j_a),
            ("j_b", self.j_b),
            ("delta_a", self.delta_a),
            ("delta_b", self.delta_b),
            ("eps1.re", self.eps1.re),
            ("eps1.im", self.eps1.im),
            ("eps2.re", self.eps2.re),
            ("eps2.im", self.eps2.im),
        ];
        for (name, v) in others {
            if !v.is_finite() {
                return Err(Error::InvalidParams(format!(
                    "{name} must be finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn is_resonant(&self) -> bool {
        self.delta_a == 0.0 && self.delta_b == 0.0
    }

    /// `Some(ε)` when both pumps are equal and real.
    pub fn equal_real_pump(&self) -> Option<f64> {
        (self.eps1 == self.eps2 && self.eps1.im == 0.0).then_some(self.eps1.re)
    }

    /// Largest pump modulus.
    pub fn pump_magnitude(&self) -> f64 {
        self.eps1.norm().max(self.eps2.norm())
    }

    /// Whether `Δ_a = J_a` and `Δ_b = J_b` to within `tol`.
    pub fn detuning_matches_coupling(&self, tol: f64) -> bool {
        (self.delta_a - self.j_a).abs() <= tol && (self.delta_b - self.j_b).abs() <= tol
    }
}

/// Rates derived from [`SystemParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedScales {
    /// `√(γ_a² + J_a²)`
    pub gamma_tilde_a: f64,
    /// `√(γ_b² + J_b²)`
    pub gamma_tilde_b: f64,
    /// Oscillation threshold for equal pumps.
    pub eps_crit: f64,
    /// Phase of the intracavity pump field, radians.
    pub theta_b: f64,
    /// `max|ε_j| / eps_crit`
    pub pump_fraction: f64,
}

fn critical_pump(p: &SystemParams) -> f64 {
    // The sum mode of the low-frequency pair sees the detuning J_a − Δ_a and
    // the difference mode J_a + Δ_a; the first to lose stability sets the
    // threshold.
    let a_sum = p.gamma_a.powi(2) + (p.j_a - p.delta_a).powi(2);
    let a_diff = p.gamma_a.powi(2) + (p.j_a + p.delta_a).powi(2);
    let b = p.gamma_b.powi(2) + (p.j_b - p.delta_b).powi(2);
    (a_sum.min(a_diff) * b).sqrt() / p.kappa
}

pub fn derived_scales(p: &SystemParams) -> Result<DerivedScales> {
    p.validate()?;
    let eps_crit = critical_pump(p);
    Ok(DerivedScales {
        gamma_tilde_a: p.gamma_a.hypot(p.j_a),
        gamma_tilde_b: p.gamma_b.hypot(p.j_b),
        eps_crit,
        theta_b: (p.j_b - p.delta_b).atan2(p.gamma_b),
        pump_fraction: p.pump_magnitude() / eps_crit,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    BelowThreshold,
    AtOrAboveThreshold,
}

/// Mean fields of the noise-free equations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub beta1: C64,
    pub beta2: C64,
    pub alpha1: C64,
    pub alpha2: C64,
    pub regime: Regime,
}

impl SteadyState {
    /// The steady state as a doubled phase-space vector (`x⁺ = x*`).
    pub fn as_state(&self) -> [C64; 8] {
        [
            self.alpha1,
            self.alpha1.conj(),
            self.alpha2,
            self.alpha2.conj(),
            self.beta1,
            self.beta1.conj(),
            self.beta2,
            self.beta2.conj(),
        ]
    }
}

/// Noise-free right-hand side of the positive-P equations of motion.
pub fn drift(p: &SystemParams, x: &[C64; 8]) -> [C64; 8] {
    let i = C64::i();
    let [a1, a1p, a2, a2p, b1, b1p, b2, b2p] = *x;
    let k = p.kappa;
    let da = C64::new(p.gamma_a, p.delta_a);
    let da_c = da.conj();
    let db = C64::new(p.gamma_b, p.delta_b);
    let db_c = db.conj();
    let ja = i * p.j_a;
    let jb = i * p.j_b;
    [
        -da * a1 + k * a1p * b1 + ja * a2,
        -da_c * a1p + k * a1 * b1p - ja * a2p,
        -da * a2 + k * a2p * b2 + ja * a1,
        -da_c * a2p + k * a2 * b2p - ja * a1p,
        p.eps1 - db * b1 - 0.5 * k * a1 * a1 + jb * b2,
        p.eps1.conj() - db_c * b1p - 0.5 * k * a1p * a1p - jb * b2p,
        p.eps2 - db * b2 - 0.5 * k * a2 * a2 + jb * b1,
        p.eps2.conj() - db_c * b2p - 0.5 * k * a2p * a2p - jb * b1p,
    ]
}

/// Multiplicative noise amplitudes `√(κβ₁), √(κβ₁⁺), √(κβ₂), √(κβ₂⁺)`
/// (principal branch) for the four low-frequency variables.
pub fn noise_amplitudes(p: &SystemParams, x: &[C64; 8]) -> [C64; 4] {
    let k = p.kappa;
    [
        (k * x[4]).sqrt(),
        (k * x[5]).sqrt(),
        (k * x[6]).sqrt(),
        (k * x[7]).sqrt(),
    ]
}

/// Below-threshold fixed point (`α = 0`) without any stability check.
///
/// Equal pumps use the closed form `β = ε / [γ_b − i(J_b − Δ_b)]`. Unequal
/// pumps are an extension: the pump equations are solved by damped Newton
/// iteration, which converges in a single step because they are linear
/// once `α = 0`.
pub fn fixed_point(p: &SystemParams) -> Result<SteadyState> {
    p.validate()?;
    let zero = C64::new(0.0, 0.0);
    let (beta1, beta2) = if p.eps1 == p.eps2 {
        let beta = p.eps1 / C64::new(p.gamma_b, -(p.j_b - p.delta_b));
        (beta, beta)
    } else {
        newton_pump_modes(p)?
    };
    let mut ss = SteadyState {
        beta1,
        beta2,
        alpha1: zero,
        alpha2: zero,
        regime: Regime::BelowThreshold,
    };
    ss.regime = classify(p, &ss)?.0;
    Ok(ss)
}

fn newton_pump_modes(p: &SystemParams) -> Result<(C64, C64)> {
    use nalgebra::{Matrix2, Vector2};
    // Only β₁, β₂ need solving; β⁺ are their conjugates at the fixed point.
    let i = C64::i();
    let db = C64::new(p.gamma_b, p.delta_b);
    let jac = Matrix2::new(-db, i * p.j_b, i * p.j_b, -db);
    let lu = jac.lu();
    let residual = |b: &Vector2<C64>| {
        let x = [
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            b[0],
            b[0].conj(),
            b[1],
            b[1].conj(),
        ];
        let f = drift(p, &x);
        Vector2::new(f[4], f[6])
    };
    let scale = 1.0 + p.pump_magnitude();
    let mut b = Vector2::new(C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    let mut r = residual(&b);
    for _ in 0..50 {
        if r.norm() <= 1e-14 * scale {
            return Ok((b[0], b[1]));
        }
        let step = lu.solve(&r).ok_or(Error::SteadyStateFailure(r.norm()))?;
        let mut damping = 1.0;
        loop {
            let trial = b - step * C64::new(damping, 0.0);
            let rt = residual(&trial);
            if rt.norm() < r.norm() || damping < 1e-6 {
                b = trial;
                r = rt;
                break;
            }
            damping *= 0.5;
        }
    }
    if r.norm() <= 1e-12 * scale {
        Ok((b[0], b[1]))
    } else {
        Err(Error::SteadyStateFailure(r.norm()))
    }
}

/// Regime and minimum real part of the drift-matrix eigenvalues.
fn classify(p: &SystemParams, ss: &SteadyState) -> Result<(Regime, f64)> {
    let model = build_linear_model(p, ss);
    let eig = eigenvalues_of(&model.drift)?;
    let min_re = eig.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    let below = if p.eps1 == p.eps2 {
        p.pump_magnitude() < critical_pump(p) * (1.0 - THRESHOLD_GUARD)
    } else {
        min_re > THRESHOLD_GUARD * p.gamma_a.min(p.gamma_b)
    };
    let regime = if below {
        Regime::BelowThreshold
    } else {
        Regime::AtOrAboveThreshold
    };
    Ok((regime, min_re))
}

/// Below-threshold steady state; fails with [`Error::AboveThreshold`] when
/// the linearised analysis would not be valid.
pub fn steady_state(p: &SystemParams) -> Result<SteadyState> {
    let ss = fixed_point(p)?;
    if ss.regime == Regime::AtOrAboveThreshold {
        let (_, min_real_part) = classify(p, &ss)?;
        return Err(Error::AboveThreshold {
            pump: p.pump_magnitude(),
            eps_crit: critical_pump(p),
            min_real_part,
        });
    }
    Ok(ss)
}

/// Stability eigenvalues of the linearised drift matrix, sorted by real
/// then imaginary part.
///
/// Resonant equal real pumps use the closed form
/// `{γ_b ± iJ_b, γ_a ± √(κ²ε²/γ̃_b² − J_a²)}` (each twice); anything else
/// falls back to a dense eigensolver.
pub fn stability_eigenvalues(p: &SystemParams) -> Result<[C64; 8]> {
    p.validate()?;
    match p.equal_real_pump() {
        Some(eps) if p.is_resonant() => {
            let gtb2 = p.gamma_b.powi(2) + p.j_b.powi(2);
            let root = C64::new((p.kappa * eps).powi(2) / gtb2 - p.j_a.powi(2), 0.0).sqrt();
            let b_plus = C64::new(p.gamma_b, p.j_b);
            let b_minus = C64::new(p.gamma_b, -p.j_b);
            let a = C64::new(p.gamma_a, 0.0);
            let mut eig = [
                b_plus,
                b_plus,
                b_minus,
                b_minus,
                a + root,
                a + root,
                a - root,
                a - root,
            ];
            sort_eigenvalues(&mut eig);
            Ok(eig)
        }
        _ => {
            let ss = fixed_point(p)?;
            eigenvalues_of(&build_linear_model(p, &ss).drift)
        }
    }
}

/// Numeric oscillation threshold: the equal real pump at which the minimum
/// real part of the drift eigenvalues crosses zero, found by bisection on
/// `[0, 10·eps_crit]`. The pump fields of `p` are ignored.
pub fn threshold_bisection(p: &SystemParams) -> Result<f64> {
    p.validate()?;
    let min_re = |eps: f64| -> Result<f64> {
        let q = p.with_pump(eps);
        let ss = fixed_point(&q)?;
        let eig = eigenvalues_of(&build_linear_model(&q, &ss).drift)?;
        Ok(eig.iter().map(|z| z.re).fold(f64::INFINITY, f64::min))
    };
    let mut lo = 0.0;
    let mut hi = 10.0 * critical_pump(p);
    if min_re(lo)? <= 0.0 || min_re(hi)? > 0.0 {
        return Err(Error::NoCrossing { lo, hi });
    }
    for _ in 0..200 {
        if hi - lo <= 1e-12 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if min_re(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
