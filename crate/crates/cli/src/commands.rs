use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use coupled_opo_core::criteria::{Objective, SpectralPoint};
use coupled_opo_core::linearized::LinearModel;
use coupled_opo_core::model::fixed_point;
use coupled_opo_core::sde::{self, Probe};
use coupled_opo_core::{
    build_linear_model, derived_scales, numeric_eigenvalues, spectral_matrix, steady_state,
    threshold_bisection, Error, QuadratureCombination, SystemParams,
};

use crate::config::{ConfigError, RunConfig, SystemSpec, ThetaPolicy};

pub const SPECTRUM_SCHEMA: &str = "coupled-opo/spectrum/1";
pub const STABILITY_SCHEMA: &str = "coupled-opo/stability/1";
pub const ANGLE_SCHEMA: &str = "coupled-opo/optimize-angle/1";
pub const VERIFY_SCHEMA: &str = "coupled-opo/verify/1";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    AboveThreshold(String),
    Verification(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Runtime(_) => 1,
            CliError::AboveThreshold(_) => 2,
            CliError::Verification(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m)
            | CliError::AboveThreshold(m)
            | CliError::Verification(m)
            | CliError::Runtime(m) => m,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.0)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::AboveThreshold { .. } => CliError::AboveThreshold(e.to_string()),
            Error::InvalidParams(_) | Error::InvalidConfig(_) => CliError::Usage(e.to_string()),
            e => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub fn open_output(path: Option<&str>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn below_threshold(spec: &SystemSpec) -> Result<SystemParams, CliError> {
    let p = spec.params()?;
    steady_state(&p)?;
    Ok(p)
}

fn config_echo(cfg: &RunConfig) -> Result<String, CliError> {
    let cfg = RunConfig {
        output: None,
        ..cfg.clone()
    };
    serde_json::to_string(&cfg).map_err(|e| CliError::Runtime(e.to_string()))
}

fn echo_header(
    out: &mut dyn Write,
    schema: &str,
    cfg: &RunConfig,
    curves: &[(String, RunConfig)],
) -> Result<(), CliError> {
    writeln!(out, "# schema: {schema}")?;
    writeln!(out, "# config: {}", config_echo(cfg)?)?;
    for (label, c) in curves {
        let p = c.system.params()?;
        let eps_c = derived_scales(&p)?.eps_crit;
        writeln!(
            out,
            "# series {label:?}: kappa={} gamma_a={} gamma_b={} j_a={} j_b={} delta_a={} delta_b={} eps1={} eps2={} eps_c={eps_c}",
            p.kappa, p.gamma_a, p.gamma_b, p.j_a, p.j_b, p.delta_a, p.delta_b, p.eps1, p.eps2
        )?;
    }
    Ok(())
}

pub fn spectrum(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let curves = cfg.expand_series()?;
    let params = curves
        .iter()
        .map(|(_, c)| below_threshold(&c.system))
        .collect::<Result<Vec<_>, _>>()?;
    echo_header(out, SPECTRUM_SCHEMA, cfg, &curves)?;

    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "omega",
        "theta_deg",
        "S_X",
        "S_Y",
        "cov_XY",
        "duan_sum",
        "epr_product",
        "flags",
        "S_Xp",
        "S_Yp",
        "S_Xm",
        "S_Ym",
        "series",
    ])?;
    for ((label, c), p) in curves.iter().zip(&params) {
        let model = build_linear_model(p, &steady_state(p)?);
        let omegas = c.omega.values();
        let rows =
            coupled_opo_core::spectrum::sweep(&omegas, |w| spectrum_row(&model, p.gamma_a, w, c));
        for row in rows {
            let mut row = row?;
            row.push(label.clone());
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn spectrum_row(
    m: &LinearModel,
    gamma_a: f64,
    omega: f64,
    c: &RunConfig,
) -> Result<Vec<String>, CliError> {
    let pt = SpectralPoint::from_model(m, gamma_a, omega)?;
    let theta = match c.theta {
        ThetaPolicy::Fixed { degrees } => degrees.to_radians(),
        ThetaPolicy::Optimize { objective } => pt.optimize(objective)?.0,
    };
    let r = pt.record(theta, c.criteria.pairing, c.criteria.epr_mode)?;
    let cv = pt.combined(theta);
    Ok(vec![
        r.omega.to_string(),
        r.theta.to_degrees().to_string(),
        r.s_x.to_string(),
        r.s_y.to_string(),
        r.cov_xy.to_string(),
        r.duan_sum.to_string(),
        r.epr_product.to_string(),
        r.flags.label(),
        cv.s_xp.to_string(),
        cv.s_yp.to_string(),
        cv.s_xm.to_string(),
        cv.s_ym.to_string(),
    ])
}

pub fn stability(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let s = &cfg.stability;
    let or = |v: &Vec<f64>, d: f64| if v.is_empty() { vec![d] } else { v.clone() };
    let base_fraction = match (cfg.system.pump_fraction, cfg.system.eps) {
        (Some(f), _) => f,
        (None, Some(e)) => e / derived_scales(&cfg.system.params()?)?.eps_crit,
        (None, None) => 0.0,
    };
    writeln!(out, "# schema: {STABILITY_SCHEMA}")?;
    writeln!(out, "# config: {}", config_echo(cfg)?)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "j_a",
        "j_b",
        "delta_a",
        "delta_b",
        "pump_fraction",
        "eps",
        "min_re_eig",
        "eps_c",
        "eps_c_bisection",
        "below_threshold",
    ])?;
    for ja in or(&s.j_a, cfg.system.j_a) {
        for jb in or(&s.j_b, cfg.system.j_b) {
            for f in or(&s.pump_fractions, base_fraction) {
                let mut spec = SystemSpec {
                    j_a: ja,
                    j_b: jb,
                    pump_fraction: Some(f),
                    eps: None,
                    ..cfg.system.clone()
                };
                if s.match_detuning {
                    spec.delta_a = ja;
                    spec.delta_b = jb;
                }
                let p = spec.params()?;
                let eps_c = derived_scales(&p)?.eps_crit;
                let bisect = threshold_bisection(&p)?;
                let ss = fixed_point(&p)?;
                let eig = numeric_eigenvalues(&build_linear_model(&p, &ss))?;
                let min_re = eig.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
                w.write_record([
                    ja.to_string(),
                    jb.to_string(),
                    p.delta_a.to_string(),
                    p.delta_b.to_string(),
                    f.to_string(),
                    p.eps1.re.to_string(),
                    min_re.to_string(),
                    eps_c.to_string(),
                    bisect.to_string(),
                    (ss.regime == coupled_opo_core::Regime::BelowThreshold).to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn optimize_angle(
    cfg: &RunConfig,
    objective: Objective,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let curves = cfg.expand_series()?;
    let params = curves
        .iter()
        .map(|(_, c)| below_threshold(&c.system))
        .collect::<Result<Vec<_>, _>>()?;
    echo_header(out, ANGLE_SCHEMA, cfg, &curves)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["omega", "objective", "theta_deg", "value", "series"])?;
    let name = serde_json::to_string(&objective).map_err(|e| CliError::Runtime(e.to_string()))?;
    for ((label, _), p) in curves.iter().zip(&params) {
        for &omega in &cfg.optimize_omegas {
            let (theta, value) = coupled_opo_core::optimize_angle(p, omega, objective)?;
            w.write_record([
                omega.to_string(),
                name.clone(),
                theta.to_degrees().to_string(),
                value.to_string(),
                label.clone(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Flip the sign of the parametric gain couplings `κβ` between `α` and `α⁺`.
fn corrupt(m: &mut LinearModel) {
    for (i, j) in [(0, 1), (1, 0), (2, 3), (3, 2)] {
        m.drift[(i, j)] = -m.drift[(i, j)];
    }
}

pub fn verify(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let v = &cfg.verify;
    let p = below_threshold(&cfg.system)?;
    let theta = v.theta_degrees.to_radians();
    let combos = v
        .quadratures
        .iter()
        .map(|n| {
            QuadratureCombination::from_name(n, theta)
                .ok_or_else(|| CliError::Usage(format!("unknown quadrature {n:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let probe = Probe {
        omegas: v.omegas.clone(),
        combos: combos.clone(),
        dump_stride: None,
    };
    let ens = sde::integrate(&p, &cfg.sde, &probe)?;
    let mut model = build_linear_model(&p, &steady_state(&p)?);
    if v.corrupt_drift {
        corrupt(&mut model);
    }

    writeln!(out, "# schema: {VERIFY_SCHEMA}")?;
    writeln!(out, "# config: {}", config_echo(cfg)?)?;
    writeln!(
        out,
        "# trajectories: {} of {} kept, {} diverged",
        ens.survivors.len(),
        ens.n_total(),
        ens.diverged.len()
    )?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["quadrature", "omega", "sde", "stderr", "linearized", "z"])?;
    let mut worst = 0.0f64;
    for (c, (name, q)) in v.quadratures.iter().zip(&combos).enumerate() {
        let est = sde::estimate_output_spectrum(&ens, c)?;
        for (k, &omega) in v.omegas.iter().enumerate() {
            let lin = spectral_matrix(&model, omega)?.output_variance(q, p.gamma_a);
            let diff = est.value[k] - lin;
            let z = if est.stderr[k] > 0.0 {
                diff / est.stderr[k]
            } else if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(z.abs());
            w.write_record([
                name.clone(),
                omega.to_string(),
                est.value[k].to_string(),
                est.stderr[k].to_string(),
                lin.to_string(),
                z.to_string(),
            ])?;
        }
    }
    w.flush()?;
    if worst < 3.0 {
        eprintln!("verify: pass, max |z| = {worst:.2}");
        Ok(())
    } else {
        Err(CliError::Verification(format!(
            "verify: FAIL, max |z| = {worst:.2}"
        )))
    }
}

pub fn sde_dump(cfg: &RunConfig, path: &Path) -> Result<(), CliError> {
    let p = below_threshold(&cfg.system)?;
    let probe = Probe {
        dump_stride: Some(cfg.dump.stride),
        ..Probe::default()
    };
    let ens = sde::integrate(&p, &cfg.sde, &probe)?;
    let side = sde::write_dump(&ens, path)?;
    eprintln!(
        "wrote {} trajectories to {} ({} diverged); layout in {}",
        ens.survivors.len(),
        path.display(),
        ens.diverged.len(),
        side.display()
    );
    Ok(())
}
