//! Linearised fluctuation equations `dδx = −A δx dt + B dW`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{SteadyState, SystemParams};
use crate::{Matrix4, Matrix8, C64};

/// Labels of the fluctuation vector components, in storage order.
pub const ORDERING: [&str; 8] = [
    "alpha1", "alpha1+", "alpha2", "alpha2+", "beta1", "beta1+", "beta2", "beta2+",
];

/// Labels of the combined-mode fluctuation vector.
pub const COMBINED_ORDERING: [&str; 4] = ["A_p", "A_p+", "A_m", "A_m+"];

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    /// Drift matrix `A`.
    pub drift: Matrix8,
    /// Noise matrix `B`; only the first four diagonal entries are nonzero.
    pub noise: Matrix8,
}

impl LinearModel {
    /// Diffusion matrix `B Bᵀ`.
    pub fn diffusion(&self) -> Matrix8 {
        self.noise * self.noise.transpose()
    }
}

/// Drift and noise of the sum/difference low-frequency modes
/// `A_p = α₁ + α₂`, `A_m = α₁ − α₂`, valid when the detunings equal the
/// couplings and the pumps are equal and real.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinedModel {
    pub drift: Matrix4,
    pub noise: Matrix4,
}

impl CombinedModel {
    pub fn diffusion(&self) -> Matrix4 {
        self.noise * self.noise.transpose()
    }
}

/// `A = −∂f/∂x` of the noise-free equations of motion at the doubled state
/// `x`.
pub fn drift_matrix(p: &SystemParams, x: &[C64; 8]) -> Matrix8 {
    let i = C64::i();
    let k = p.kappa;
    let ga = C64::new(p.gamma_a, p.delta_a);
    let gb = C64::new(p.gamma_b, p.delta_b);
    let ja = i * p.j_a;
    let jb = i * p.j_b;
    let [a1, a1p, a2, a2p, b1, b1p, b2, b2p] = *x;
    let mut m = Matrix8::zeros();

    m[(0, 0)] = ga;
    m[(0, 1)] = -k * b1;
    m[(0, 2)] = -ja;
    m[(0, 4)] = -k * a1p;

    m[(1, 0)] = -k * b1p;
    m[(1, 1)] = ga.conj();
    m[(1, 3)] = ja;
    m[(1, 5)] = -k * a1;

    m[(2, 0)] = -ja;
    m[(2, 2)] = ga;
    m[(2, 3)] = -k * b2;
    m[(2, 6)] = -k * a2p;

    m[(3, 1)] = ja;
    m[(3, 2)] = -k * b2p;
    m[(3, 3)] = ga.conj();
    m[(3, 7)] = -k * a2;

    m[(4, 0)] = k * a1;
    m[(4, 4)] = gb;
    m[(4, 6)] = -jb;

    m[(5, 1)] = k * a1p;
    m[(5, 5)] = gb.conj();
    m[(5, 7)] = jb;

    m[(6, 2)] = k * a2;
    m[(6, 4)] = -jb;
    m[(6, 6)] = gb;

    m[(7, 3)] = k * a2p;
    m[(7, 5)] = jb;
    m[(7, 7)] = gb.conj();
    m
}

pub fn build_linear_model(p: &SystemParams, ss: &SteadyState) -> LinearModel {
    let x = ss.as_state();
    let mut noise = Matrix8::zeros();
    for (j, amp) in crate::model::noise_amplitudes(p, &x)
        .into_iter()
        .enumerate()
    {
        noise[(j, j)] = amp;
    }
    LinearModel {
        drift: drift_matrix(p, &x),
        noise,
    }
}

pub fn build_combined_model(p: &SystemParams, ss: &SteadyState) -> Result<CombinedModel> {
    if !p.detuning_matches_coupling(1e-12) || p.equal_real_pump().is_none() {
        return Err(Error::DetuningMismatch);
    }
    if ss.beta1 != ss.beta2 || ss.beta1.im.abs() > 1e-12 * (1.0 + ss.beta1.re.abs()) {
        return Err(Error::DetuningMismatch);
    }
    let g = p.kappa * ss.beta1.re;
    let ga = C64::new(p.gamma_a, 0.0);
    let two_ja = C64::new(0.0, 2.0 * p.j_a);
    let g = C64::new(g, 0.0);
    let z = C64::new(0.0, 0.0);
    #[rustfmt::skip]
    let drift = Matrix4::new(
        ga, -g, z, z,
        -g, ga, z, z,
        z, z, ga + two_ja, -g,
        z, z, -g, ga - two_ja,
    );
    let s = (p.kappa * ss.beta1).sqrt();
    #[rustfmt::skip]
    let noise = Matrix4::new(
        s, z, s, z,
        z, s, z, s,
        s, z, -s, z,
        z, s, z, -s,
    );
    Ok(CombinedModel { drift, noise })
}

/// Sort by real part, then imaginary part; real parts within 1e-9 of each
/// other are treated as tied.
pub fn sort_eigenvalues(eig: &mut [C64]) {
    eig.sort_by(|a, b| {
        if (a.re - b.re).abs() > 1e-9 {
            a.re.total_cmp(&b.re)
        } else {
            a.im.total_cmp(&b.im)
        }
    });
}

/// Eigenvalues of a dense complex 8×8 matrix via the complex Schur form,
/// sorted with [`sort_eigenvalues`].
pub fn eigenvalues_of(m: &Matrix8) -> Result<[C64; 8]> {
    let schur = m
        .try_schur(1e-15, 10_000)
        .ok_or(Error::ConvergenceFailure)?;
    let (_, t) = schur.unpack();
    let mut eig = [C64::new(0.0, 0.0); 8];
    for (i, e) in eig.iter_mut().enumerate() {
        *e = t[(i, i)];
    }
    if eig.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::ConvergenceFailure);
    }
    sort_eigenvalues(&mut eig);
    Ok(eig)
}

pub fn numeric_eigenvalues(m: &LinearModel) -> Result<[C64; 8]> {
    eigenvalues_of(&m.drift)
}

/// Stationary covariance `C = ⟨δx δxᵀ⟩` of the linearised process, the
/// solution of `A C + C Aᵀ = B Bᵀ`.
pub fn stationary_covariance(m: &LinearModel) -> Result<Matrix8> {
    let n = 8;
    let a = DMatrix::from_iterator(n, n, m.drift.iter().cloned());
    let d = m.diffusion();
    let eye = DMatrix::<C64>::identity(n, n);
    // Column-major vec: vec(A C) = (I ⊗ A) vec C, vec(C Aᵀ) = (A ⊗ I) vec C.
    let lhs = eye.kronecker(&a) + a.kronecker(&eye);
    let rhs = DVector::from_iterator(n * n, d.iter().cloned());
    let sol = lhs.lu().solve(&rhs).ok_or(Error::SingularAtFrequency {
        omega: 0.0,
        condition: f64::INFINITY,
    })?;
    Ok(Matrix8::from_iterator(sol.iter().cloned()))
}
