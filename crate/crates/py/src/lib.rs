use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use core::criteria::{Objective, Pairing, SpectralPoint};
use core::sde::{self, Probe, SdeConfig, Stepper};
use core::spectrum::Mode;
use core::{QuadratureCombination, C64};
use coupled_opo_core as core;

create_exception!(coupled_opo, AboveThresholdError, PyValueError);

fn err(e: core::Error) -> PyErr {
    match e {
        core::Error::AboveThreshold { .. } => AboveThresholdError::new_err(e.to_string()),
        core::Error::InvalidParams(_)
        | core::Error::InvalidConfig(_)
        | core::Error::Domain(_)
        | core::Error::DetuningMismatch
        | core::Error::InsufficientData { .. } => PyValueError::new_err(e.to_string()),
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

fn pairing(name: &str) -> PyResult<Pairing> {
    match name {
        "x_minus_y_plus" => Ok(Pairing::XMinusYPlus),
        "x_plus_y_minus" => Ok(Pairing::XPlusYMinus),
        _ => Err(PyValueError::new_err(format!("unknown pairing {name:?}"))),
    }
}

fn mode(m: u8) -> PyResult<Mode> {
    match m {
        1 => Ok(Mode::One),
        2 => Ok(Mode::Two),
        _ => Err(PyValueError::new_err("mode must be 1 or 2")),
    }
}

fn quadrature(name: &str, theta: f64) -> PyResult<QuadratureCombination> {
    QuadratureCombination::from_name(name, theta)
        .ok_or_else(|| PyValueError::new_err(format!("unknown quadrature {name:?}")))
}

/// Device parameters. Give the pump as `eps` or as `pump_fraction` of the
/// analytic threshold.
#[pyclass(name = "SystemParams", module = "coupled_opo", skip_from_py_object)]
#[derive(Clone)]
pub struct PySystemParams {
    inner: core::SystemParams,
}

#[pymethods]
impl PySystemParams {
    #[new]
    #[pyo3(signature = (*, kappa=0.01, gamma_a=1.0, gamma_b=1.0, j_a=0.0, j_b=0.0, delta_a=0.0, delta_b=0.0, eps=None, pump_fraction=None, eps2=None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        kappa: f64,
        gamma_a: f64,
        gamma_b: f64,
        j_a: f64,
        j_b: f64,
        delta_a: f64,
        delta_b: f64,
        eps: Option<C64>,
        pump_fraction: Option<f64>,
        eps2: Option<C64>,
    ) -> PyResult<Self> {
        let mut p = core::SystemParams {
            kappa,
            gamma_a,
            gamma_b,
            j_a,
            j_b,
            delta_a,
            delta_b,
            ..Default::default()
        };
        match (eps, pump_fraction) {
            (Some(_), Some(_)) => {
                return Err(PyValueError::new_err("give eps or pump_fraction, not both"))
            }
            (Some(e), None) => {
                p.eps1 = e;
                p.eps2 = e;
            }
            (None, Some(f)) => p = p.with_pump_fraction(f),
            (None, None) => {}
        }
        if let Some(e2) = eps2 {
            p.eps2 = e2;
        }
        p.validate().map_err(err)?;
        Ok(Self { inner: p })
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa
    }
    #[getter]
    fn gamma_a(&self) -> f64 {
        self.inner.gamma_a
    }
    #[getter]
    fn gamma_b(&self) -> f64 {
        self.inner.gamma_b
    }
    #[getter]
    fn j_a(&self) -> f64 {
        self.inner.j_a
    }
    #[getter]
    fn j_b(&self) -> f64 {
        self.inner.j_b
    }
    #[getter]
    fn delta_a(&self) -> f64 {
        self.inner.delta_a
    }
    #[getter]
    fn delta_b(&self) -> f64 {
        self.inner.delta_b
    }
    #[getter]
    fn eps1(&self) -> C64 {
        self.inner.eps1
    }
    #[getter]
    fn eps2(&self) -> C64 {
        self.inner.eps2
    }

    /// Analytic threshold pump amplitude.
    fn eps_crit(&self) -> PyResult<f64> {
        Ok(core::derived_scales(&self.inner).map_err(err)?.eps_crit)
    }

    /// Threshold located by bisection on the smallest eigenvalue real part.
    fn threshold_bisection(&self) -> PyResult<f64> {
        core::threshold_bisection(&self.inner).map_err(err)
    }

    /// `(beta1, beta2)` below threshold.
    fn steady_state(&self) -> PyResult<(C64, C64)> {
        let ss = core::steady_state(&self.inner).map_err(err)?;
        Ok((ss.beta1, ss.beta2))
    }

    fn stability_eigenvalues(&self) -> PyResult<Vec<C64>> {
        Ok(core::stability_eigenvalues(&self.inner)
            .map_err(err)?
            .to_vec())
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "SystemParams(kappa={}, gamma_a={}, gamma_b={}, j_a={}, j_b={}, delta_a={}, delta_b={}, eps1={}, eps2={})",
            p.kappa, p.gamma_a, p.gamma_b, p.j_a, p.j_b, p.delta_a, p.delta_b, p.eps1, p.eps2
        )
    }
}

/// Output spectrum of a named quadrature (`X1`, `Y1`, `X2`, `Y2`, `Xp`,
/// `Yp`, `Xm`, `Ym`) at angle `theta` (radians).
#[pyfunction]
#[pyo3(signature = (params, omega, quadrature_name, theta=0.0))]
fn spectrum(
    params: PyRef<'_, PySystemParams>,
    omega: f64,
    quadrature_name: &str,
    theta: f64,
) -> PyResult<f64> {
    let q = quadrature(quadrature_name, theta)?;
    Ok(SpectralPoint::new(&params.inner, omega)
        .map_err(err)?
        .variance(&q))
}

/// Output covariance of two named quadratures.
#[pyfunction]
#[pyo3(signature = (params, omega, first, second, theta=0.0))]
fn covariance(
    params: PyRef<'_, PySystemParams>,
    omega: f64,
    first: &str,
    second: &str,
    theta: f64,
) -> PyResult<f64> {
    let (u, v) = (quadrature(first, theta)?, quadrature(second, theta)?);
    Ok(SpectralPoint::new(&params.inner, omega)
        .map_err(err)?
        .covariance(&u, &v))
}

#[pyfunction]
#[pyo3(signature = (params, omega, theta=0.0, pairing_name="x_minus_y_plus"))]
fn duan_sum(
    params: PyRef<'_, PySystemParams>,
    omega: f64,
    theta: f64,
    pairing_name: &str,
) -> PyResult<f64> {
    core::duan_sum(&params.inner, omega, theta, pairing(pairing_name)?).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (params, omega, theta=0.0, inferred_mode=1))]
fn epr_product(
    params: PyRef<'_, PySystemParams>,
    omega: f64,
    theta: f64,
    inferred_mode: u8,
) -> PyResult<f64> {
    core::epr_product(&params.inner, omega, theta, mode(inferred_mode)?).map_err(err)
}

/// `(theta, value)` minimising `objective`: `squeezing`,
/// `duan_x_minus_y_plus`, `duan_x_plus_y_minus`, `epr1` or `epr2`.
#[pyfunction]
#[pyo3(signature = (params, omega, objective="squeezing"))]
fn optimize_angle(
    params: PyRef<'_, PySystemParams>,
    omega: f64,
    objective: &str,
) -> PyResult<(f64, f64)> {
    let obj = match objective {
        "squeezing" => Objective::Squeezing,
        "duan_x_minus_y_plus" => Objective::Duan(Pairing::XMinusYPlus),
        "duan_x_plus_y_minus" => Objective::Duan(Pairing::XPlusYMinus),
        "epr1" => Objective::Epr(Mode::One),
        "epr2" => Objective::Epr(Mode::Two),
        _ => {
            return Err(PyValueError::new_err(format!(
                "unknown objective {objective:?}"
            )))
        }
    };
    core::optimize_angle(&params.inner, omega, obj).map_err(err)
}

/// Every criterion at one frequency and angle, as a dict.
#[pyfunction]
#[pyo3(signature = (params, omega, theta=0.0, pairing_name="x_minus_y_plus", inferred_mode=1))]
fn correlation_record<'py>(
    py: Python<'py>,
    params: PyRef<'_, PySystemParams>,
    omega: f64,
    theta: f64,
    pairing_name: &str,
    inferred_mode: u8,
) -> PyResult<Bound<'py, PyDict>> {
    let r = SpectralPoint::new(&params.inner, omega)
        .map_err(err)?
        .record(theta, pairing(pairing_name)?, mode(inferred_mode)?)
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("omega", r.omega)?;
    d.set_item("theta", r.theta)?;
    d.set_item("s_x", r.s_x)?;
    d.set_item("s_y", r.s_y)?;
    d.set_item("cov_xy", r.cov_xy)?;
    d.set_item("duan_sum", r.duan_sum)?;
    d.set_item("epr_product", r.epr_product)?;
    d.set_item("flags", r.flags.label())?;
    Ok(d)
}

/// Closed-form combined-mode spectra `(S_Xp, S_Yp, S_Xm, S_Ym)`; needs
/// `delta_a = j_a`, `delta_b = j_b`.
#[pyfunction]
fn analytic_combined(
    params: PyRef<'_, PySystemParams>,
    omega: f64,
) -> PyResult<(f64, f64, f64, f64)> {
    let c = core::analytic_combined(&params.inner, omega).map_err(err)?;
    Ok((c.s_xp, c.s_yp, c.s_xm, c.s_ym))
}

/// Stochastic estimate of a quadrature spectrum: `(values, stderrs, n_diverged)`.
#[pyfunction]
#[pyo3(signature = (params, omegas, quadrature_name, theta=0.0, *, dt=0.01, t_transient=20.0, t_measure=200.0, n_traj=4096, seed=1, euler=false))]
#[allow(clippy::too_many_arguments)]
fn sde_spectrum(
    py: Python<'_>,
    params: PyRef<'_, PySystemParams>,
    omegas: Vec<f64>,
    quadrature_name: &str,
    theta: f64,
    dt: f64,
    t_transient: f64,
    t_measure: f64,
    n_traj: usize,
    seed: u64,
    euler: bool,
) -> PyResult<(Vec<f64>, Vec<f64>, usize)> {
    let p = params.inner;
    let cfg = SdeConfig {
        dt,
        t_transient,
        t_measure,
        n_traj,
        seed,
        stepper: if euler {
            Stepper::EulerMaruyama
        } else {
            Stepper::SemiImplicitMidpoint
        },
        ..SdeConfig::default()
    };
    let probe = Probe {
        omegas,
        combos: vec![quadrature(quadrature_name, theta)?],
        dump_stride: None,
    };
    let (est, diverged) = py
        .detach(|| -> core::Result<_> {
            let ens = sde::integrate(&p, &cfg, &probe)?;
            Ok((sde::estimate_output_spectrum(&ens, 0)?, ens.diverged.len()))
        })
        .map_err(err)?;
    Ok((est.value, est.stderr, diverged))
}

#[pymodule]
fn coupled_opo(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySystemParams>()?;
    m.add(
        "AboveThresholdError",
        m.py().get_type::<AboveThresholdError>(),
    )?;
    m.add_function(wrap_pyfunction!(spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(covariance, m)?)?;
    m.add_function(wrap_pyfunction!(duan_sum, m)?)?;
    m.add_function(wrap_pyfunction!(epr_product, m)?)?;
    m.add_function(wrap_pyfunction!(optimize_angle, m)?)?;
    m.add_function(wrap_pyfunction!(correlation_record, m)?)?;
    m.add_function(wrap_pyfunction!(analytic_combined, m)?)?;
    m.add_function(wrap_pyfunction!(sde_spectrum, m)?)?;
    Ok(())
}
