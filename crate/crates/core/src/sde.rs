//! Positive-P stochastic integration of the full nonlinear equations of
//! motion, used as an independent oracle for the linearized spectra.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linearized::{build_linear_model, numeric_eigenvalues, stationary_covariance};
use crate::model::{drift, fixed_point, noise_amplitudes, Regime, SystemParams};
use crate::spectrum::QuadratureCombination;
use crate::C64;

/// Trajectories are flagged once any variable exceeds this multiple of
/// `max(|β_ss|, 1)`.
pub const DIVERGENCE_FACTOR: f64 = 1e6;
/// Upper bound on `dt · max|λ|`.
pub const MAX_STIFFNESS: f64 = 0.1;
/// Number of trajectory batches used for standard errors.
pub const MAX_BATCHES: usize = 32;

const REANCHOR: usize = 1024;
const CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stepper {
    EulerMaruyama,
    /// Iterated implicit midpoint; three fixed-point sweeps per step.
    #[default]
    SemiImplicitMidpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SdeConfig {
    pub dt: f64,
    pub t_transient: f64,
    pub t_measure: f64,
    pub n_traj: usize,
    pub seed: u64,
    pub stepper: Stepper,
    /// Each step's Wiener increment is the sum of this many sub-increments,
    /// drawn in the same order a run with `dt / noise_substeps` would draw
    /// them. Two runs with equal `dt / noise_substeps` and seed therefore
    /// share one Brownian path.
    pub noise_substeps: usize,
}

impl Default for SdeConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            t_transient: 20.0,
            t_measure: 200.0,
            n_traj: 4096,
            seed: 1,
            stepper: Stepper::default(),
            noise_substeps: 1,
        }
    }
}

impl SdeConfig {
    pub fn transient_steps(&self) -> usize {
        (self.t_transient / self.dt).round() as usize
    }

    pub fn measure_steps(&self) -> usize {
        (self.t_measure / self.dt).round() as usize
    }

    /// Checks the config against `p`; returns `dt · max|λ|`.
    pub fn validate(&self, p: &SystemParams) -> Result<f64> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.t_transient >= 0.0 && self.t_measure >= 0.0)
            || !self.t_transient.is_finite()
            || !self.t_measure.is_finite()
        {
            return Err(Error::InvalidConfig(
                "durations must be finite and non-negative".into(),
            ));
        }
        if self.n_traj < 2 {
            return Err(Error::InvalidConfig(format!(
                "n_traj must be at least 2, got {}",
                self.n_traj
            )));
        }
        if self.noise_substeps == 0 {
            return Err(Error::InvalidConfig(
                "noise_substeps must be at least 1".into(),
            ));
        }
        let ss = fixed_point(p)?;
        let eig = numeric_eigenvalues(&build_linear_model(p, &ss))?;
        let stiff = self.dt * eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if stiff >= MAX_STIFFNESS {
            return Err(Error::InvalidConfig(format!(
                "dt·max|eig| = {stiff:.4} exceeds {MAX_STIFFNESS}; reduce dt"
            )));
        }
        Ok(stiff)
    }
}

/// What to record while integrating.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    /// Frequencies at which per-trajectory periodograms are accumulated.
    pub omegas: Vec<f64>,
    pub combos: Vec<QuadratureCombination>,
    /// Keep every `n`-th state (from `t = 0`) for a raw dump.
    pub dump_stride: Option<usize>,
}

#[derive(Debug, Clone)]
struct Trajectory {
    final_state: [C64; 8],
    /// `Re[X(ω) X(−ω)] / T`, combo-major.
    periodogram: Vec<f64>,
    samples: Vec<[C64; 8]>,
    diverged: bool,
}

/// Result of [`integrate`]. Diverged trajectories are excluded from every
/// statistic and listed in `diverged`.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub params: SystemParams,
    pub config: SdeConfig,
    pub probe: Probe,
    pub regime: Regime,
    pub initial_state: [C64; 8],
    pub diverged: Vec<usize>,
    /// Original indices of the surviving trajectories.
    pub survivors: Vec<usize>,
    final_states: Vec<[C64; 8]>,
    periodograms: Vec<Vec<f64>>,
    samples: Vec<Vec<[C64; 8]>>,
}

/// Ensemble mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub mean: C64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEstimate {
    pub omegas: Vec<f64>,
    pub value: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl Ensemble {
    pub fn n_total(&self) -> usize {
        self.config.n_traj
    }

    pub fn diverged_fraction(&self) -> f64 {
        self.diverged.len() as f64 / self.config.n_traj as f64
    }

    pub fn final_states(&self) -> &[[C64; 8]] {
        &self.final_states
    }

    /// Sampled states of surviving trajectory `k`, empty unless a dump
    /// stride was requested.
    pub fn samples(&self, k: usize) -> &[[C64; 8]] {
        &self.samples[k]
    }

    /// Ensemble mean of `f` at the final time.
    pub fn final_mean<F>(&self, f: F) -> MeanEstimate
    where
        F: Fn(&[C64; 8]) -> C64,
    {
        let vals: Vec<C64> = self.final_states.iter().map(f).collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<C64>() / n;
        let var = vals.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / (n - 1.0);
        MeanEstimate {
            mean,
            stderr: (var / n).sqrt(),
        }
    }
}

/// Integrate `cfg.n_traj` trajectories from the below-threshold fixed point.
pub fn integrate(p: &SystemParams, cfg: &SdeConfig, probe: &Probe) -> Result<Ensemble> {
    integrate_with_limit(p, cfg, probe, DIVERGENCE_FACTOR)
}

fn integrate_with_limit(
    p: &SystemParams,
    cfg: &SdeConfig,
    probe: &Probe,
    factor: f64,
) -> Result<Ensemble> {
    cfg.validate(p)?;
    if probe.dump_stride == Some(0) {
        return Err(Error::InvalidConfig(
            "dump stride must be at least 1".into(),
        ));
    }
    let ss = fixed_point(p)?;
    let x0 = ss.as_state();
    let scale = ss.beta1.norm().max(ss.beta2.norm()).max(1.0);
    let limit = factor * scale;
    let coeffs: Vec<[C64; 8]> = probe
        .combos
        .iter()
        .map(|c| {
            let v = c.coefficients();
            std::array::from_fn(|i| v[i])
        })
        .collect();

    let mut ens = Ensemble {
        params: *p,
        config: *cfg,
        probe: probe.clone(),
        regime: ss.regime,
        initial_state: x0,
        diverged: Vec::new(),
        survivors: Vec::new(),
        final_states: Vec::new(),
        periodograms: Vec::new(),
        samples: Vec::new(),
    };
    let mut start = 0;
    while start < cfg.n_traj {
        let end = (start + CHUNK).min(cfg.n_traj);
        let batch: Vec<Trajectory> = (start..end)
            .into_par_iter()
            .map(|k| run_trajectory(p, cfg, probe, &coeffs, x0, limit, k as u64))
            .collect();
        for (k, t) in (start..end).zip(batch) {
            if t.diverged {
                ens.diverged.push(k);
            } else {
                ens.survivors.push(k);
                ens.final_states.push(t.final_state);
                ens.periodograms.push(t.periodogram);
                ens.samples.push(t.samples);
            }
        }
        start = end;
    }
    if ens.survivors.len() < 2 {
        return Err(Error::DivergenceDetected {
            diverged: ens.diverged.len(),
            total: cfg.n_traj,
        });
    }
    Ok(ens)
}

fn run_trajectory(
    p: &SystemParams,
    cfg: &SdeConfig,
    probe: &Probe,
    coeffs: &[[C64; 8]],
    x0: [C64; 8],
    limit: f64,
    index: u64,
) -> Trajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index);

    let dt = cfg.dt;
    let sub_sd = (dt / cfg.noise_substeps as f64).sqrt();
    let n_tr = cfg.transient_steps();
    let n_me = cfg.measure_steps();
    let n_om = probe.omegas.len();
    let n_q = coeffs.len();

    let mut x = x0;
    let mut samples = Vec::new();
    if probe.dump_stride.is_some() {
        samples.push(x);
    }
    let mut plus = vec![C64::new(0.0, 0.0); n_q * n_om];
    let mut minus = plus.clone();
    let steps: Vec<C64> = probe
        .omegas
        .iter()
        .map(|w| C64::from_polar(1.0, w * dt))
        .collect();
    let mut phase = vec![C64::new(1.0, 0.0); n_om];
    let mut diverged = false;

    for n in 1..=n_tr + n_me {
        let mut dw = [0.0f64; 4];
        for _ in 0..cfg.noise_substeps {
            for w in dw.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *w += sub_sd * z;
            }
        }
        x = step(p, cfg.stepper, &x, dt, &dw);
        if x.iter().any(|v| v.norm().is_nan() || v.norm() > limit) {
            diverged = true;
            break;
        }
        if let Some(s) = probe.dump_stride {
            if n % s == 0 {
                samples.push(x);
            }
        }
        if n > n_tr && n_om > 0 {
            let m = n - n_tr;
            if m.is_multiple_of(REANCHOR) {
                for (z, w) in phase.iter_mut().zip(&probe.omegas) {
                    *z = C64::from_polar(1.0, w * dt * m as f64);
                }
            } else {
                for (z, s) in phase.iter_mut().zip(&steps) {
                    *z *= s;
                }
            }
            for (qi, c) in coeffs.iter().enumerate() {
                let q: C64 = c.iter().zip(&x).map(|(a, b)| a * b).sum();
                for (k, z) in phase.iter().enumerate() {
                    plus[qi * n_om + k] += q * z;
                    minus[qi * n_om + k] += q * z.conj();
                }
            }
        }
    }

    let t_meas = n_me as f64 * dt;
    let periodogram = if diverged || n_me == 0 {
        vec![0.0; n_q * n_om]
    } else {
        plus.iter()
            .zip(&minus)
            .map(|(a, b)| (a * b).re * dt * dt / t_meas)
            .collect()
    };
    Trajectory {
        final_state: x,
        periodogram,
        samples,
        diverged,
    }
}

fn axpy(x: &[C64; 8], h: f64, f: &[C64; 8], g: &[C64; 4], dw: &[f64; 4]) -> [C64; 8] {
    let mut y = *x;
    for i in 0..8 {
        y[i] += f[i] * h;
    }
    for i in 0..4 {
        y[i] += g[i] * dw[i];
    }
    y
}

/// One step of the noise-driven equations. The noise amplitudes depend only
/// on the noise-free pump variables, so the Itô and Stratonovich readings
/// coincide and the midpoint rule needs no drift correction.
pub fn step(p: &SystemParams, stepper: Stepper, x: &[C64; 8], dt: f64, dw: &[f64; 4]) -> [C64; 8] {
    match stepper {
        Stepper::EulerMaruyama => axpy(x, dt, &drift(p, x), &noise_amplitudes(p, x), dw),
        Stepper::SemiImplicitMidpoint => {
            let half = [0.5 * dw[0], 0.5 * dw[1], 0.5 * dw[2], 0.5 * dw[3]];
            let mut mid = *x;
            for _ in 0..3 {
                mid = axpy(
                    x,
                    0.5 * dt,
                    &drift(p, &mid),
                    &noise_amplitudes(p, &mid),
                    &half,
                );
            }
            std::array::from_fn(|i| 2.0 * mid[i] - x[i])
        }
    }
}

/// Output spectrum of `ens.probe.combos[combo]` at the probe frequencies,
/// `vacuum + 2γ_a ⟨P⟩` with `P` the per-trajectory periodogram.
pub fn estimate_output_spectrum(ens: &Ensemble, combo: usize) -> Result<SpectrumEstimate> {
    let p = &ens.params;
    let required = 50.0 / p.gamma_a;
    let t_measure = ens.config.measure_steps() as f64 * ens.config.dt;
    if t_measure < required {
        return Err(Error::InsufficientData {
            t_measure,
            required,
        });
    }
    let q = ens
        .probe
        .combos
        .get(combo)
        .ok_or_else(|| Error::InvalidConfig(format!("no quadrature combination {combo}")))?;
    let baseline = q.vacuum_covariance(q);
    let n_om = ens.probe.omegas.len();
    let n = ens.periodograms.len();
    let nb = n.min(MAX_BATCHES);
    let scale = 2.0 * p.gamma_a;

    let mut value = Vec::with_capacity(n_om);
    let mut stderr = Vec::with_capacity(n_om);
    for k in 0..n_om {
        let idx = combo * n_om + k;
        let mut sums = vec![0.0; nb];
        let mut counts = vec![0usize; nb];
        for (i, pg) in ens.periodograms.iter().enumerate() {
            let b = i * nb / n;
            sums[b] += pg[idx];
            counts[b] += 1;
        }
        let means: Vec<f64> = sums
            .iter()
            .zip(&counts)
            .map(|(s, c)| s / *c as f64)
            .collect();
        let mean = ens.periodograms.iter().map(|pg| pg[idx]).sum::<f64>() / n as f64;
        let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (nb - 1) as f64;
        let value_k = baseline + scale * mean;
        if !value_k.is_finite() {
            return Err(Error::DivergenceDetected {
                diverged: ens.diverged.len(),
                total: ens.n_total(),
            });
        }
        value.push(value_k);
        stderr.push(scale * (var / nb as f64).sqrt());
    }
    Ok(SpectrumEstimate {
        omegas: ens.probe.omegas.clone(),
        value,
        stderr,
    })
}

/// Stationary pump amplitudes to second order in the fluctuations: the
/// pump equations are solved with `α_j²` replaced by its linearized
/// stationary moment.
pub fn predicted_pump_means(p: &SystemParams) -> Result<(C64, C64)> {
    use nalgebra::{Matrix2, Vector2};
    let ss = crate::model::steady_state(p)?;
    let cov = stationary_covariance(&build_linear_model(p, &ss))?;
    let i = C64::i();
    let db = C64::new(p.gamma_b, p.delta_b);
    let m = Matrix2::new(db, -i * p.j_b, -i * p.j_b, db);
    let rhs = Vector2::new(
        p.eps1 - 0.5 * p.kappa * cov[(0, 0)],
        p.eps2 - 0.5 * p.kappa * cov[(2, 2)],
    );
    let b = m
        .lu()
        .solve(&rhs)
        .ok_or(Error::SteadyStateFailure(f64::NAN))?;
    Ok((b[0], b[1]))
}

#[derive(Serialize)]
struct DumpSidecar<'a> {
    layout: &'static str,
    variables: [&'static str; 8],
    trajectories: usize,
    samples_per_trajectory: usize,
    sample_stride: usize,
    sample_dt: f64,
    trajectory_indices: &'a [usize],
    diverged: &'a [usize],
    seed: u64,
    config: &'a SdeConfig,
    params: &'a SystemParams,
}

/// Write the sampled states as little-endian `f64` pairs `(re, im)`, eight
/// variables per sample, trajectory-major. A JSON sidecar with the layout
/// is written next to it as `<path>.json`. Returns the sidecar path.
pub fn write_dump(ens: &Ensemble, path: &Path) -> Result<PathBuf> {
    let stride = ens.probe.dump_stride.ok_or_else(|| {
        Error::InvalidConfig("ensemble was integrated without a dump stride".into())
    })?;
    let mut out = BufWriter::new(File::create(path)?);
    for traj in &ens.samples {
        for s in traj {
            for z in s {
                out.write_all(&z.re.to_le_bytes())?;
                out.write_all(&z.im.to_le_bytes())?;
            }
        }
    }
    out.flush()?;

    let sidecar = DumpSidecar {
        layout: "little-endian f64; [trajectory][sample][variable][re, im]",
        variables: crate::linearized::ORDERING,
        trajectories: ens.samples.len(),
        samples_per_trajectory: ens.samples.first().map_or(0, Vec::len),
        sample_stride: stride,
        sample_dt: stride as f64 * ens.config.dt,
        trajectory_indices: &ens.survivors,
        diverged: &ens.diverged,
        seed: ens.config.seed,
        config: &ens.config,
        params: &ens.params,
    };
    let mut side = path.as_os_str().to_owned();
    side.push(".json");
    let side = PathBuf::from(side);
    serde_json::to_writer_pretty(BufWriter::new(File::create(&side)?), &sidecar)?;
    Ok(side)
}
