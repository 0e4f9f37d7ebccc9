//! Squeezing, Duan inseparability and Reid EPR criteria.
//!
//! Normalisation: coherent-state output variance 1 per single-mode
//! quadrature and 2 per two-mode sum or difference. Under this convention
//! the Duan sum certifies entanglement below **4** (not 2, as with conventions that
//! use unit-variance combined quadratures), and the product of inferred
//! variances demonstrates EPR correlations below 1.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::analytic::CombinedVariances;
use crate::error::{Error, Result};
use crate::linearized::{build_linear_model, LinearModel};
use crate::model::{steady_state, SystemParams};
use crate::spectrum::{
    normalize_angle, spectral_matrix, Mode, QuadratureCombination, QuadratureSelector,
    SpectralMatrix,
};

/// Duan sum below which entanglement is certified.
pub const DUAN_BOUND: f64 = 4.0;
/// Inferred-variance product below which EPR correlations are demonstrated.
pub const EPR_BOUND: f64 = 1.0;
/// Conditioning variance below which inference is refused.
pub const MIN_CONDITIONING_VARIANCE: f64 = 1e-14;

/// Which combined quadratures enter the Duan sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    /// `S(X₋) + S(Y₊)`
    XMinusYPlus,
    /// `S(X₊) + S(Y₋)`
    XPlusYMinus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Output variance of `X₁^θ`.
    Squeezing,
    Duan(Pairing),
    /// Inferred-variance product for the given mode.
    Epr(Mode),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Flags {
    pub squeezed: bool,
    pub entangled: bool,
    pub epr: bool,
}

impl Flags {
    /// `squeezed|entangled|epr` style label, `none` when nothing is set.
    pub fn label(&self) -> String {
        let names: Vec<&str> = [
            (self.squeezed, "squeezed"),
            (self.entangled, "entangled"),
            (self.epr, "epr"),
        ]
        .iter()
        .filter(|(set, _)| *set)
        .map(|(_, n)| *n)
        .collect();
        if names.is_empty() {
            "none".to_string()
        } else {
            names.join("|")
        }
    }
}

/// All criteria at one `(ω, θ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRecord {
    pub omega: f64,
    pub theta: f64,
    pub s_x: f64,
    pub s_y: f64,
    pub cov_xy: f64,
    pub duan_sum: f64,
    pub epr_product: f64,
    pub flags: Flags,
}

/// Angles of maximum squeezing and antisqueezing, both in `[0, π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaPair {
    pub squeezed: f64,
    pub antisqueezed: f64,
}

/// Extremal angles of `V(θ) = V_X cos²θ + V_Y sin²θ + 2 V_XY sinθ cosθ`.
///
/// Writing `V(θ) = mean + R cos(2θ − φ)` with `φ = atan2(2V_XY, V_X − V_Y)`
/// the maximum is at `φ/2` and the minimum a quarter turn away. With
/// `V_XY = 0` the pair is `{0, π/2}`.
pub fn theta_optimal(v_x: f64, v_y: f64, v_xy: f64) -> ThetaPair {
    let phi = (2.0 * v_xy).atan2(v_x - v_y);
    ThetaPair {
        squeezed: normalize_angle(0.5 * phi + FRAC_PI_2),
        antisqueezed: normalize_angle(0.5 * phi),
    }
}

/// Output spectra at a single frequency, shared by every criterion.
#[derive(Debug, Clone)]
pub struct SpectralPoint {
    pub gamma_a: f64,
    pub spectrum: SpectralMatrix,
}

impl SpectralPoint {
    pub fn new(p: &SystemParams, omega: f64) -> Result<Self> {
        let ss = steady_state(p)?;
        Self::from_model(&build_linear_model(p, &ss), p.gamma_a, omega)
    }

    pub fn from_model(m: &LinearModel, gamma_a: f64, omega: f64) -> Result<Self> {
        Ok(Self {
            gamma_a,
            spectrum: spectral_matrix(m, omega)?,
        })
    }

    pub fn omega(&self) -> f64 {
        self.spectrum.omega
    }

    pub fn covariance(&self, u: &QuadratureCombination, v: &QuadratureCombination) -> f64 {
        self.spectrum.output_covariance(u, v, self.gamma_a)
    }

    pub fn variance(&self, u: &QuadratureCombination) -> f64 {
        self.covariance(u, u)
    }

    /// `(S_X, S_Y, V(X, Y))` of one mode with `X` at `θ`, `Y` at `θ + π/2`.
    pub fn single_mode(&self, mode: Mode, theta: f64) -> (f64, f64, f64) {
        let x = QuadratureCombination::single(QuadratureSelector::x(mode, theta));
        let y = QuadratureCombination::single(QuadratureSelector::y(mode, theta));
        (
            self.variance(&x),
            self.variance(&y),
            self.covariance(&x, &y),
        )
    }

    pub fn combined(&self, theta: f64) -> CombinedVariances {
        CombinedVariances {
            s_xp: self.variance(&QuadratureCombination::x_plus(theta)),
            s_yp: self.variance(&QuadratureCombination::y_plus(theta)),
            s_xm: self.variance(&QuadratureCombination::x_minus(theta)),
            s_ym: self.variance(&QuadratureCombination::y_minus(theta)),
        }
    }

    pub fn duan(&self, theta: f64, pairing: Pairing) -> f64 {
        let (x, y) = match pairing {
            Pairing::XMinusYPlus => (
                QuadratureCombination::x_minus(theta),
                QuadratureCombination::y_plus(theta),
            ),
            Pairing::XPlusYMinus => (
                QuadratureCombination::x_plus(theta),
                QuadratureCombination::y_minus(theta),
            ),
        };
        self.variance(&x) + self.variance(&y)
    }

    /// Inferred variances `(S_inf(X), S_inf(Y))` of `target`, conditioned on
    /// the other mode.
    pub fn inferred_variances(&self, theta: f64, target: Mode) -> Result<(f64, f64)> {
        let infer = |sel: fn(Mode, f64) -> QuadratureSelector| -> Result<f64> {
            let own = QuadratureCombination::single(sel(target, theta));
            let other = QuadratureCombination::single(sel(target.other(), theta));
            let cond = self.variance(&other);
            if cond < MIN_CONDITIONING_VARIANCE {
                return Err(Error::DegenerateVariance(cond));
            }
            let v = self.covariance(&own, &other);
            Ok(self.variance(&own) - v * v / cond)
        };
        Ok((infer(QuadratureSelector::x)?, infer(QuadratureSelector::y)?))
    }

    pub fn epr(&self, theta: f64, target: Mode) -> Result<f64> {
        let (x, y) = self.inferred_variances(theta, target)?;
        Ok(x * y)
    }

    pub fn objective(&self, theta: f64, objective: Objective) -> Result<f64> {
        match objective {
            Objective::Squeezing => Ok(self.single_mode(Mode::One, theta).0),
            Objective::Duan(pairing) => Ok(self.duan(theta, pairing)),
            Objective::Epr(mode) => self.epr(theta, mode),
        }
    }

    pub fn record(&self, theta: f64, pairing: Pairing, target: Mode) -> Result<CorrelationRecord> {
        let (s_x, s_y, cov_xy) = self.single_mode(target, theta);
        let duan_sum = self.duan(theta, pairing);
        let epr_product = self.epr(theta, target)?;
        Ok(CorrelationRecord {
            omega: self.omega(),
            theta: normalize_angle(theta),
            s_x,
            s_y,
            cov_xy,
            duan_sum,
            epr_product,
            flags: Flags {
                squeezed: s_x.min(s_y) < 1.0,
                entangled: duan_sum < DUAN_BOUND,
                epr: epr_product < EPR_BOUND,
            },
        })
    }

    /// Minimise `objective` over `θ ∈ [0, π)`: a 181-point scan at 1°
    /// spacing, then golden-section refinement to 1e-6 rad around the best
    /// grid point. Returns `(θ_opt, value)` with `θ_opt` folded into `[0, π)`.
    pub fn optimize(&self, objective: Objective) -> Result<(f64, f64)> {
        self.optimize_from(objective, 0.0)
    }

    pub(crate) fn optimize_from(&self, objective: Objective, origin: f64) -> Result<(f64, f64)> {
        const GRID: usize = 181;
        let step = PI / (GRID - 1) as f64;
        let f = |t: f64| self.objective(t, objective);

        let mut best = (origin, f(origin)?);
        for k in 1..GRID {
            let t = origin + step * k as f64;
            let v = f(t)?;
            if v < best.1 {
                best = (t, v);
            }
        }

        let (mut a, mut b) = (best.0 - step, best.0 + step);
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - inv_phi * (b - a);
        let mut d = a + inv_phi * (b - a);
        let (mut fc, mut fd) = (f(c)?, f(d)?);
        while b - a > 1e-6 {
            if fc <= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = f(c)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = f(d)?;
            }
        }
        let t = 0.5 * (a + b);
        let v = f(t)?;
        if v <= best.1 {
            best = (t, v);
        }
        Ok((normalize_angle(best.0), best.1))
    }
}

pub fn duan_sum(p: &SystemParams, omega: f64, theta: f64, pairing: Pairing) -> Result<f64> {
    Ok(SpectralPoint::new(p, omega)?.duan(theta, pairing))
}

pub fn epr_product(p: &SystemParams, omega: f64, theta: f64, target: Mode) -> Result<f64> {
    SpectralPoint::new(p, omega)?.epr(theta, target)
}

pub fn optimize_angle(p: &SystemParams, omega: f64, objective: Objective) -> Result<(f64, f64)> {
    SpectralPoint::new(p, omega)?.optimize(objective)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn detuned(j_a: f64) -> SystemParams {
        SystemParams::symmetric(1.0, j_a, 1.0, 0.01)
            .with_detunings(j_a, 1.0)
            .with_pump_fraction(0.5)
    }

    fn resonant(j_a: f64, j_b: f64, fraction: f64) -> SystemParams {
        SystemParams::symmetric(1.0, j_a, j_b, 0.01).with_pump_fraction(fraction)
    }

    /// Brute-force minimum of `V(θ)` on a dense grid.
    fn grid_min(v_x: f64, v_y: f64, v_xy: f64, n: usize) -> f64 {
        (0..n)
            .map(|k| PI * k as f64 / n as f64)
            .min_by(|a, b| {
                let f = |t: f64| {
                    v_x * t.cos().powi(2) + v_y * t.sin().powi(2) + 2.0 * v_xy * t.sin() * t.cos()
                };
                f(*a).total_cmp(&f(*b))
            })
            .unwrap()
    }

    fn angle_distance(a: f64, b: f64) -> f64 {
        let d = (a - b).rem_euclid(PI);
        d.min(PI - d)
    }

    #[test]
    fn theta_optimal_uncoupled() {
        let t = theta_optimal(9.0, 1.0 / 9.0, 0.0);
        assert_eq!(t.antisqueezed, 0.0);
        assert_eq!(t.squeezed, FRAC_PI_2);
        let t = theta_optimal(0.5, 2.0, 0.0);
        assert_eq!(t.squeezed, 0.0);
        assert_eq!(t.antisqueezed, FRAC_PI_2);
    }

    #[test]
    fn theta_optimal_symmetric_covariance() {
        let t = theta_optimal(1.0, 1.0, 0.3);
        assert!((t.antisqueezed - PI / 4.0).abs() < 1e-15);
        assert!((t.squeezed - 3.0 * PI / 4.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn theta_optimal_matches_grid(a in 0.05f64..5.0, b in 0.05f64..5.0, r in -0.95f64..0.95) {
            let v_xy = r * (a * b).sqrt();
            let t = theta_optimal(a, b, v_xy);
            let brute = grid_min(a, b, v_xy, 10_000);
            // grid resolution π/10⁴, plus flatness for nearly isotropic moments
            let f = |t: f64| a * t.cos().powi(2) + b * t.sin().powi(2) + 2.0 * v_xy * t.sin() * t.cos();
            prop_assert!(angle_distance(t.squeezed, brute) < 1e-3 || (f(t.squeezed) - f(brute)).abs() < 1e-9);
            prop_assert!(f(t.squeezed) <= f(brute) + 1e-12);
            prop_assert!((angle_distance(t.squeezed, t.antisqueezed) - FRAC_PI_2).abs() < 1e-12);
        }
    }

    #[test]
    fn vacuum_boundaries() {
        let p = SystemParams::symmetric(1.0, 1.0, 1.0, 0.01);
        for pairing in [Pairing::XMinusYPlus, Pairing::XPlusYMinus] {
            assert_eq!(duan_sum(&p, 0.4, 0.3, pairing).unwrap(), 4.0);
        }
        assert_eq!(epr_product(&p, 0.4, 0.3, Mode::One).unwrap(), 1.0);
        let rec = SpectralPoint::new(&p, 0.0)
            .unwrap()
            .record(0.0, Pairing::XMinusYPlus, Mode::One)
            .unwrap();
        assert_eq!(rec.flags, Flags::default());
        assert_eq!(rec.flags.label(), "none");
    }

    #[test]
    fn detuned_duan_and_epr_at_zero_frequency() {
        let p = detuned(10.0);
        let d = duan_sum(&p, 0.0, 0.0, Pairing::XMinusYPlus).unwrap();
        // S_Xm + S_Yp from the combined-mode closed forms
        let expected = (2.0 - 1591.0 / 160600.5625) + 2.0 / 9.0;
        assert!((d - expected).abs() < 1e-12, "{d}");
        let e = epr_product(&p, 0.0, 0.0, Mode::One).unwrap();
        assert!((e - 0.3587).abs() < 1e-3, "{e}");
        let rec = SpectralPoint::new(&p, 0.0)
            .unwrap()
            .record(0.0, Pairing::XMinusYPlus, Mode::One)
            .unwrap();
        assert!(rec.flags.squeezed && rec.flags.entangled && rec.flags.epr);
        assert_eq!(rec.flags.label(), "squeezed|entangled|epr");
    }

    #[test]
    fn no_epr_without_coupling() {
        for (ja, jb) in [(0.0, 1.0), (1.5, 0.0)] {
            let p = resonant(ja, jb, 0.5);
            let pt = SpectralPoint::new(&p, 0.3).unwrap();
            let (sx, sy, _) = pt.single_mode(Mode::One, 0.0);
            let e = pt.epr(0.0, Mode::One).unwrap();
            assert!((e - sx * sy).abs() < 1e-12);
            assert!(e >= 1.0);
        }
    }

    #[test]
    fn epr_same_for_both_modes() {
        let p = resonant(2.0, 1.0, 0.5);
        let pt = SpectralPoint::new(&p, 1.3).unwrap();
        let a = pt.epr(1.1, Mode::One).unwrap();
        let b = pt.epr(1.1, Mode::Two).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn fig2_resonant_entanglement_exists() {
        let p = resonant(1.0, 1.0, 0.5);
        let theta = 67f64.to_radians();
        let min = (0..=200)
            .map(|k| duan_sum(&p, 0.1 * k as f64, theta, Pairing::XMinusYPlus).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert!(min < 4.0, "{min}");
    }

    #[test]
    fn squeezing_optimum_uncoupled_is_y() {
        let p = resonant(0.0, 0.0, 0.5);
        let (t, v) = optimize_angle(&p, 0.0, Objective::Squeezing).unwrap();
        assert!((t - FRAC_PI_2).abs() < 1e-6);
        assert!((v - 1.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn optimizer_agrees_with_analytic_angle() {
        let p = resonant(1.0, 1.0, 0.5);
        for omega in [0.0, 0.9, 2.5] {
            let pt = SpectralPoint::new(&p, omega).unwrap();
            let (sx, sy, v) = pt.single_mode(Mode::One, 0.0);
            let analytic = theta_optimal(sx, sy, v);
            let (t, _) = pt.optimize(Objective::Squeezing).unwrap();
            assert!(angle_distance(t, analytic.squeezed) < 1e-5);
        }
    }

    #[test]
    fn optimizer_invariant_under_half_turn_relabeling() {
        let p = resonant(2.0, 1.0, 0.5);
        let pt = SpectralPoint::new(&p, 1.7).unwrap();
        for obj in [
            Objective::Squeezing,
            Objective::Duan(Pairing::XMinusYPlus),
            Objective::Epr(Mode::One),
        ] {
            let (a, va) = pt.optimize_from(obj, 0.0).unwrap();
            let (b, vb) = pt.optimize_from(obj, PI).unwrap();
            assert!(angle_distance(a, b) < 1e-6, "{obj:?}: {a} vs {b}");
            assert!((va - vb).abs() < 1e-9);
        }
    }

    #[test]
    fn pairing_identity() {
        let p = SystemParams::symmetric(1.0, 1.3, 0.6, 0.01)
            .with_detunings(0.3, -0.4)
            .with_pump_fraction(0.7);
        for omega in [0.0, 0.8, 3.1] {
            let pt = SpectralPoint::new(&p, omega).unwrap();
            for theta in [0.0, 0.5, 2.2] {
                let xp = pt.variance(&QuadratureCombination::x_plus(theta));
                let xm = pt.variance(&QuadratureCombination::x_minus(theta));
                let (s1, _, _) = pt.single_mode(Mode::One, theta);
                let (s2, _, _) = pt.single_mode(Mode::Two, theta);
                assert!((xp + xm - 2.0 * (s1 + s2)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn resonant_quadratures_anticorrelated() {
        let p = resonant(1.4, 0.9, 0.6);
        for omega in [0.0, 0.5, 2.0, 6.0] {
            let pt = SpectralPoint::new(&p, omega).unwrap();
            let x1 = QuadratureCombination::from_name("X1", 0.0).unwrap();
            let x2 = QuadratureCombination::from_name("X2", 0.0).unwrap();
            let y1 = QuadratureCombination::from_name("Y1", 0.0).unwrap();
            let y2 = QuadratureCombination::from_name("Y2", 0.0).unwrap();
            let vx = pt.covariance(&x1, &x2);
            let vy = pt.covariance(&y1, &y2);
            assert!(vx <= 0.0);
            assert!((vx + vy).abs() < 1e-12);
        }
    }

    #[test]
    fn epr_implies_entanglement() {
        for p in [
            resonant(1.0, 1.0, 0.5),
            resonant(5.0, 1.0, 0.5),
            detuned(1.0),
            detuned(10.0),
        ] {
            for omega in [0.0, 1.0, 3.0, 8.0] {
                let pt = SpectralPoint::new(&p, omega).unwrap();
                let (_, epr) = pt.optimize(Objective::Epr(Mode::One)).unwrap();
                if epr < 1.0 {
                    let (_, d1) = pt.optimize(Objective::Duan(Pairing::XMinusYPlus)).unwrap();
                    let (_, d2) = pt.optimize(Objective::Duan(Pairing::XPlusYMinus)).unwrap();
                    assert!(d1.min(d2) < 4.0);
                }
            }
        }
    }

    #[test]
    fn detuned_epr_monotone_in_pump() {
        let base = SystemParams::symmetric(1.0, 10.0, 1.0, 0.01).with_detunings(10.0, 1.0);
        let mut last = f64::INFINITY;
        for k in 0..=90 {
            let p = base.with_pump_fraction(0.01 * k as f64);
            let e = epr_product(&p, 0.0, 0.0, Mode::One).unwrap();
            assert!(
                e <= last + 1e-12,
                "fraction {}: {e} > {last}",
                0.01 * k as f64
            );
            last = e;
        }
    }

    #[test]
    fn degenerate_conditioning_variance() {
        // A hand-made spectrum with S_X2 = 0 at the output.
        let mut s = crate::Matrix8::zeros();
        s[(2, 3)] = crate::C64::new(-0.125, 0.0);
        s[(3, 2)] = crate::C64::new(-0.125, 0.0);
        s[(2, 2)] = crate::C64::new(-0.125, 0.0);
        s[(3, 3)] = crate::C64::new(-0.125, 0.0);
        let pt = SpectralPoint {
            gamma_a: 1.0,
            spectrum: SpectralMatrix {
                omega: 0.0,
                matrix: s,
            },
        };
        let x2 = QuadratureCombination::from_name("X2", 0.0).unwrap();
        assert!(pt.variance(&x2).abs() < 1e-15);
        assert!(matches!(
            pt.epr(0.0, Mode::One),
            Err(Error::DegenerateVariance(_))
        ));
    }
}
