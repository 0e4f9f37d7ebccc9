//! Intracavity spectral matrices and output quadrature spectra.
//!
//! For an Ornstein-Uhlenbeck process with drift `A` and diffusion `D = B Bᵀ`
//! the normally ordered spectral matrix is
//! `S(ω) = (A + iω)⁻¹ D (Aᵀ − iω)⁻¹`. A quadrature `X^θ = a e^{−iθ} + a† e^{iθ}`
//! projects onto it through the coefficient vector with `e^{−iθ}` on the `α`
//! slot and `e^{iθ}` on the `α⁺` slot. Output spectra follow the
//! input-output relation `S_out = baseline + 2γ_a V`, where the baseline is
//! the coherent-state value of the same moment.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Const, DimMin, SMatrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linearized::{CombinedModel, LinearModel};
use crate::{Matrix8, Vector8, C64};

/// Condition number of `A + iω` above which the spectrum is refused.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    One,
    Two,
}

impl Mode {
    /// Index of the mode's `α` slot in the doubled state vector.
    pub fn slot(self) -> usize {
        match self {
            Mode::One => 0,
            Mode::Two => 2,
        }
    }

    pub fn other(self) -> Mode {
        match self {
            Mode::One => Mode::Two,
            Mode::Two => Mode::One,
        }
    }
}

/// A single-mode quadrature `X_j^θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSelector {
    pub mode: Mode,
    pub theta: f64,
}

impl QuadratureSelector {
    pub fn new(mode: Mode, theta: f64) -> Self {
        Self { mode, theta }
    }

    /// `X_j^θ`
    pub fn x(mode: Mode, theta: f64) -> Self {
        Self::new(mode, theta)
    }

    /// The conjugate quadrature `X_j^{θ+π/2}`.
    pub fn y(mode: Mode, theta: f64) -> Self {
        Self::new(mode, theta + FRAC_PI_2)
    }

    /// Angle folded into `[0, π)`; `X^θ` and `X^{θ+π}` have equal variance.
    pub fn reported_theta(&self) -> f64 {
        normalize_angle(self.theta)
    }

    pub fn coefficients(&self) -> Vector8 {
        let mut c = Vector8::zeros();
        let s = self.mode.slot();
        c[s] = C64::from_polar(1.0, -self.theta);
        c[s + 1] = C64::from_polar(1.0, self.theta);
        c
    }
}

/// Fold an angle into `[0, π)`.
pub fn normalize_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(PI);
    if t >= PI {
        0.0
    } else {
        t
    }
}

/// Real linear combination of single-mode quadratures, e.g. `X₁ − X₂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureCombination {
    pub terms: Vec<(f64, QuadratureSelector)>,
}

impl QuadratureCombination {
    pub fn single(q: QuadratureSelector) -> Self {
        Self {
            terms: vec![(1.0, q)],
        }
    }

    pub fn sum(a: QuadratureSelector, b: QuadratureSelector) -> Self {
        Self {
            terms: vec![(1.0, a), (1.0, b)],
        }
    }

    pub fn difference(a: QuadratureSelector, b: QuadratureSelector) -> Self {
        Self {
            terms: vec![(1.0, a), (-1.0, b)],
        }
    }

    /// `X₊ = X₁^θ + X₂^θ`
    pub fn x_plus(theta: f64) -> Self {
        Self::sum(
            QuadratureSelector::x(Mode::One, theta),
            QuadratureSelector::x(Mode::Two, theta),
        )
    }

    /// `X₋ = X₁^θ − X₂^θ`
    pub fn x_minus(theta: f64) -> Self {
        Self::difference(
            QuadratureSelector::x(Mode::One, theta),
            QuadratureSelector::x(Mode::Two, theta),
        )
    }

    /// `Y₊ = Y₁ + Y₂` with `Y` at `θ + π/2`.
    pub fn y_plus(theta: f64) -> Self {
        Self::sum(
            QuadratureSelector::y(Mode::One, theta),
            QuadratureSelector::y(Mode::Two, theta),
        )
    }

    /// `Y₋ = Y₁ − Y₂` with `Y` at `θ + π/2`.
    pub fn y_minus(theta: f64) -> Self {
        Self::difference(
            QuadratureSelector::y(Mode::One, theta),
            QuadratureSelector::y(Mode::Two, theta),
        )
    }

    /// Parse a short name: `X1`, `Y1`, `X2`, `Y2`, `Xp`, `Yp`, `Xm`, `Ym`.
    /// `X` quadratures sit at `theta`, `Y` at `theta + π/2`.
    pub fn from_name(name: &str, theta: f64) -> Option<Self> {
        let q = match name {
            "X1" => Self::single(QuadratureSelector::x(Mode::One, theta)),
            "X2" => Self::single(QuadratureSelector::x(Mode::Two, theta)),
            "Y1" => Self::single(QuadratureSelector::y(Mode::One, theta)),
            "Y2" => Self::single(QuadratureSelector::y(Mode::Two, theta)),
            "Xp" => Self::x_plus(theta),
            "Xm" => Self::x_minus(theta),
            "Yp" => Self::y_plus(theta),
            "Ym" => Self::y_minus(theta),
            _ => return None,
        };
        Some(q)
    }

    pub fn coefficients(&self) -> Vector8 {
        self.terms.iter().fold(Vector8::zeros(), |acc, (w, q)| {
            acc + q.coefficients() * C64::new(*w, 0.0)
        })
    }

    /// Symmetrised coherent-state covariance with `other`: `cos(θ − θ')` for
    /// each pair of terms on the same mode.
    pub fn vacuum_covariance(&self, other: &Self) -> f64 {
        let mut v = 0.0;
        for (wa, qa) in &self.terms {
            for (wb, qb) in &other.terms {
                if qa.mode == qb.mode {
                    v += wa * wb * (qa.theta - qb.theta).cos();
                }
            }
        }
        v
    }
}

/// Normally ordered intracavity spectral correlations at one frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMatrix {
    pub omega: f64,
    pub matrix: Matrix8,
}

/// `(A + iω)⁻¹ D (Aᵀ − iω)⁻¹` by two LU solves.
pub fn ou_spectrum<const N: usize>(
    drift: &SMatrix<C64, N, N>,
    diffusion: &SMatrix<C64, N, N>,
    omega: f64,
) -> Result<SMatrix<C64, N, N>>
where
    Const<N>: DimMin<Const<N>, Output = Const<N>>,
{
    let shift = SMatrix::<C64, N, N>::identity() * C64::new(0.0, omega);
    let singular = |condition: f64| Error::SingularAtFrequency { omega, condition };

    let lu_plus = (drift + shift).lu();
    let inv = lu_plus
        .try_inverse()
        .ok_or_else(|| singular(f64::INFINITY))?;
    let condition = norm1(&(drift + shift)) * norm1(&inv);
    if condition.is_nan() || condition > MAX_CONDITION {
        return Err(singular(condition));
    }
    let left = lu_plus
        .solve(diffusion)
        .ok_or_else(|| singular(condition))?;
    // S (Aᵀ − iω) = left  ⇔  (A − iω) Sᵀ = leftᵀ
    let lu_minus = (drift - shift).lu();
    let s_t = lu_minus
        .solve(&left.transpose())
        .ok_or_else(|| singular(condition))?;
    Ok(s_t.transpose())
}

fn norm1<const N: usize>(m: &SMatrix<C64, N, N>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn spectral_matrix(m: &LinearModel, omega: f64) -> Result<SpectralMatrix> {
    Ok(SpectralMatrix {
        omega,
        matrix: ou_spectrum(&m.drift, &m.diffusion(), omega)?,
    })
}

impl SpectralMatrix {
    /// Intracavity correlation `cᵤᵀ S c_v`, averaged over `±ω`.
    ///
    /// Since `B Bᵀ` is symmetric, `S(−ω) = S(ω)ᵀ`, so the average equals
    /// the operator-order symmetrised form `½(uᵀ S v + vᵀ S u)`.
    pub fn projection(&self, u: &Vector8, v: &Vector8) -> C64 {
        let uv = (u.transpose() * self.matrix * v)[(0, 0)];
        let vu = (v.transpose() * self.matrix * u)[(0, 0)];
        0.5 * (uv + vu)
    }

    /// Output (co)variance of two quadrature combinations.
    pub fn output_covariance(
        &self,
        u: &QuadratureCombination,
        v: &QuadratureCombination,
        gamma_a: f64,
    ) -> f64 {
        let inner = self.projection(&u.coefficients(), &v.coefficients());
        debug_assert!(
            inner.im.abs() <= 1e-10 * (1.0 + inner.re.abs()),
            "imaginary residue {inner}"
        );
        u.vacuum_covariance(v) + 2.0 * gamma_a * inner.re
    }

    pub fn output_variance(&self, u: &QuadratureCombination, gamma_a: f64) -> f64 {
        self.output_covariance(u, u, gamma_a)
    }
}

/// Output (co)variance of two single-mode quadratures.
pub fn quadrature_variance_out(
    s: &SpectralMatrix,
    q1: &QuadratureSelector,
    q2: &QuadratureSelector,
    gamma_a: f64,
) -> f64 {
    s.output_covariance(
        &QuadratureCombination::single(*q1),
        &QuadratureCombination::single(*q2),
        gamma_a,
    )
}

/// Which combined low-frequency mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CombinedMode {
    /// `A_p = α₁ + α₂`
    Sum,
    /// `A_m = α₁ − α₂`
    Difference,
}

/// Output variance of the combined quadrature `A e^{−iθ} + A⁺ e^{iθ}`
/// computed from the 4×4 combined model (baseline 2).
pub fn combined_output_variance(
    cm: &CombinedModel,
    omega: f64,
    mode: CombinedMode,
    theta: f64,
    gamma_a: f64,
) -> Result<f64> {
    let s = ou_spectrum(&cm.drift, &cm.diffusion(), omega)?;
    let slot = match mode {
        CombinedMode::Sum => 0,
        CombinedMode::Difference => 2,
    };
    let mut c = nalgebra::SVector::<C64, 4>::zeros();
    c[slot] = C64::from_polar(1.0, -theta);
    c[slot + 1] = C64::from_polar(1.0, theta);
    let v = (c.transpose() * s * c)[(0, 0)];
    Ok(2.0 + 2.0 * gamma_a * v.re)
}

/// Evenly spaced analysis frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Default for FrequencyGrid {
    fn default() -> Self {
        Self {
            min: -20.0,
            max: 20.0,
            points: 1001,
        }
    }
}

impl FrequencyGrid {
    pub fn values(&self) -> Vec<f64> {
        match self.points {
            0 => vec![],
            1 => vec![self.min],
            n => {
                // mirror-exact: a grid symmetric about zero stays symmetric
                let m = (n - 1) as f64;
                (0..n)
                    .map(|i| (self.min * (m - i as f64) + self.max * i as f64) / m)
                    .collect()
            }
        }
    }
}

/// Evaluate `f` at every frequency in parallel, preserving order.
pub fn sweep<T, F>(omegas: &[f64], f: F) -> Vec<T>
where
    T: Send,
    F: Fn(f64) -> T + Sync + Send,
{
    omegas.par_iter().map(|&w| f(w)).collect()
}
