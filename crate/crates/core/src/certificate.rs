//! Method matrices, anti-transposes and the certificate matrix S whose
//! symmetric part must be positive semidefinite.
//!
//! For a method x_{k} − x_{k−1} = −(1/L)Σ_j H_{k,j} g_{j−1}, the gradient
//! bound follows once ν satisfies the flow constraint and
//!
//! S = AᵀH̃^{−A} + κ/(2(1−κ))·B + ½h₀h₀ᵀ − L/(2τ)·h_N h_Nᵀ ⪰ 0,
//!
//! where A and B encode the ν-weighted inner products and squared
//! distances, and h₀, h_N are the first and last rows of H̃^{−A}.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{CertError, Result};
use crate::nu::{build_nu, check_nu, in_pattern, NuDiagnostics, NuMultipliers};
use crate::psd::{
    eigen_verdict, max_abs, pivoted_cholesky_psd, symmetric_part, EigenVerdict, PSD_TOL,
};
use crate::rates::{
    effective_spec, eval_f, eval_t, tau, EffectiveParameters, ProblemSpec, RateResult,
};

/// Decomposition entries may dip this far below zero.
pub const DELTA_TOL: f64 = 1e-12;
/// Reconstruction error allowed relative to 1 + ‖S_sym‖_max.
pub const RECON_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct MethodMatrix {
    pub n: usize,
    pub h: DMatrix<f64>,
}

impl MethodMatrix {
    pub fn new(h: DMatrix<f64>) -> Result<Self> {
        if !h.is_square() || h.nrows() == 0 {
            return Err(CertError::InvalidSpec("method matrix must be square".into()));
        }
        let n = h.nrows();
        for i in 0..n {
            for j in i + 1..n {
                if h[(i, j)] != 0.0 {
                    return Err(CertError::InvalidSpec(format!(
                        "method matrix is not lower triangular at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { n, h })
    }

    /// Gradient descent: H = (γL)·I_N.
    pub fn gradient_descent(n: usize, gamma_l: f64) -> Self {
        Self {
            n,
            h: DMatrix::identity(n, n) * gamma_l,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiftedMatrix {
    pub htilde: DMatrix<f64>,
}

/// H̃: unit diagonal, row k carrying H_{k,1..k} with 1 subtracted from the
/// entry just below the diagonal.
pub fn lift(h: &MethodMatrix) -> LiftedMatrix {
    let n = h.n;
    let mut t = DMatrix::identity(n + 1, n + 1);
    for i in 1..=n {
        for j in 0..i {
            t[(i, j)] = h.h[(i - 1, j)];
        }
        t[(i, i - 1)] -= 1.0;
    }
    LiftedMatrix { htilde: t }
}

/// Reflection over the anti-diagonal: M^A_{i,j} = M_{n−1−j, n−1−i}.
pub fn anti_transpose(m: &DMatrix<f64>) -> DMatrix<f64> {
    assert!(m.is_square());
    let n = m.nrows();
    DMatrix::from_fn(n, n, |i, j| m[(n - 1 - j, n - 1 - i)])
}

/// H̃^{−A} for gradient descent: lower-triangular Toeplitz with entries
/// ρ^{i−j}.
pub fn htilde_inv_at_gd(n: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n + 1, n + 1, |i, j| {
        if i >= j {
            rho.powi((i - j) as i32)
        } else {
            0.0
        }
    })
}

fn check_pattern(nu: &NuMultipliers) -> Result<()> {
    let n = nu.n;
    for i in 0..=n {
        for j in 0..=n {
            if nu.get(i, j) != 0.0 && !in_pattern(n, i, j) {
                return Err(CertError::PatternViolation { i, j });
            }
        }
    }
    Ok(())
}

pub fn build_a(nu: &NuMultipliers) -> Result<DMatrix<f64>> {
    check_pattern(nu)?;
    let n = nu.n;
    let mut a = DMatrix::zeros(n + 1, n + 1);
    for k in 1..=n {
        a[(k, k)] = nu.get(k - 1, k);
    }
    for k in 0..n {
        a[(k, k + 1)] = if k + 2 <= n {
            -nu.get(k + 1, k) - nu.get(n, k)
        } else {
            -nu.get(n, n - 1)
        };
        for m in k + 2..=n {
            a[(k, m)] = -nu.get(n, k);
        }
    }
    Ok(a)
}

pub fn build_b(nu: &NuMultipliers) -> Result<DMatrix<f64>> {
    check_pattern(nu)?;
    let n = nu.n;
    let mut e = vec![0.0; n + 1];
    for k in 1..=n {
        e[k] = e[k - 1] + nu.get(n, k - 1);
    }
    let mut b = DMatrix::zeros(n + 1, n + 1);
    for k in 1..=n {
        b[(k, k)] = if k < n {
            nu.get(k - 1, k) + nu.get(k, k - 1) + e[k]
        } else {
            nu.get(n - 1, n) + e[n]
        };
        for m in k + 1..=n {
            b[(k, m)] = e[k];
            b[(m, k)] = e[k];
        }
    }
    Ok(b)
}

/// S for gradient descent with multipliers `nu`, evaluated at `at`
/// (normally the effective parameters) with τ = L·ρ^{2N}.
pub fn certificate_matrix(at: &ProblemSpec, nu: &NuMultipliers) -> Result<DMatrix<f64>> {
    let n = at.n;
    let rho = at.rho();
    let kappa = at.kappa();
    let hinv = htilde_inv_at_gd(n, rho);
    let tau_eff = at.l * rho.powi(2 * n as i32);
    let h0: DVector<f64> = hinv.row(0).transpose();
    let hn: DVector<f64> = hinv.row(n).transpose();
    let a = build_a(nu)?;
    let b = build_b(nu)?;
    Ok(a.transpose() * &hinv + b * (kappa / (2.0 * (1.0 - kappa))) + &h0 * h0.transpose() * 0.5
        - &hn * hn.transpose() * (at.l / (2.0 * tau_eff)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decomposition {
    /// c = η²(1−ρ)/(2(η−ρ)²)
    pub scale: f64,
    pub delta: Vec<f64>,
    #[serde(skip)]
    pub v: Vec<DVector<f64>>,
}

impl Decomposition {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let dim = self.v[0].len();
        let mut m = DMatrix::zeros(dim, dim);
        for (d, v) in self.delta.iter().zip(&self.v) {
            m += v * v.transpose() * *d;
        }
        m * self.scale
    }

    pub fn min_delta(&self) -> f64 {
        self.delta.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Closed form S_sym = c·Σ_k δ_k v_k v_kᵀ at an optimal stepsize, with
/// δ_1 = T_1 and δ_k = T_k − (F_{N−k}(η)/F_{N−k+1}(η))²·T_{k−1}.
pub fn closed_form_decomposition(at: &ProblemSpec) -> Result<Decomposition> {
    let n = at.n;
    let (rho, eta) = (at.rho(), at.eta());
    let t = |k: usize| -> Result<f64> {
        eval_t(k, rho, eta)?
            .finite()
            .ok_or(CertError::DivisionByZero("T_k at zero"))
    };
    let t_n = t(n)?;
    let scale_n = crate::rates::e_finite(n, rho)?.abs().max(1.0);
    if t_n.abs() > crate::nu::T_N_REL_TOL * scale_n {
        return Err(CertError::NotAtOptimalStepsize { residual: t_n.abs() });
    }
    let scale = eta * eta * (1.0 - rho) / (2.0 * (eta - rho).powi(2));
    let mut delta = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for k in 1..=n {
        let d = if k == 1 {
            t(1)?
        } else {
            let q = eval_f(n - k, eta) / eval_f(n - k + 1, eta);
            t(k)? - q * q * t(k - 1)?
        };
        delta.push(d);
        let mut vk = DVector::zeros(n + 1);
        vk[k] = 1.0;
        if k < n {
            let w = -1.0 / eval_f(n - k, eta);
            for m in k + 1..=n {
                vk[m] = w;
            }
        }
        v.push(vk);
    }
    Ok(Decomposition { scale, delta, v })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub spec: ProblemSpec,
    pub eff: EffectiveParameters,
    pub rate: RateResult,
    pub tau_eff: f64,
    pub nu: NuMultipliers,
    pub nu_check: NuDiagnostics,
    pub s: DMatrix<f64>,
    pub s_sym: DMatrix<f64>,
    pub eigen: EigenVerdict,
    pub factorization_psd: bool,
    pub decomposition: Option<Decomposition>,
    /// ‖S_sym − reconstruction‖_max / (1 + ‖S_sym‖_max)
    pub decomposition_error: Option<f64>,
}

impl Certificate {
    pub fn min_eig(&self) -> f64 {
        self.eigen.min_eig
    }

    pub fn psd(&self) -> bool {
        self.eigen.psd
    }

    pub fn decomposition_ok(&self) -> bool {
        match (&self.decomposition, self.decomposition_error) {
            (Some(d), Some(err)) => err <= RECON_TOL && d.min_delta() >= -DELTA_TOL,
            _ => false,
        }
    }

    /// All verdicts that decide the exit status.
    pub fn all_pass(&self) -> bool {
        self.nu_check.pass && self.psd() && self.factorization_psd && self.decomposition_ok()
    }
}

/// Assembles S from multipliers built at the effective parameters.
pub fn build_s(spec: &ProblemSpec, eff: &EffectiveParameters, nu: NuMultipliers) -> Result<Certificate> {
    let at = spec.with_effective(eff);
    let rate = tau(spec)?;
    let tau_eff = at.l * at.rho().powi(2 * at.n as i32);
    let s = certificate_matrix(&at, &nu)?;
    let s_sym = symmetric_part(&s);
    let eigen = eigen_verdict(&s_sym, PSD_TOL);
    let factorization_psd = pivoted_cholesky_psd(&s_sym, PSD_TOL);
    let (decomposition, decomposition_error) = match closed_form_decomposition(&at) {
        Ok(d) => {
            let err = max_abs(&(&s_sym - d.reconstruct())) / (1.0 + max_abs(&s_sym));
            (Some(d), Some(err))
        }
        Err(e) => {
            log::warn!("closed-form decomposition unavailable: {e}");
            (None, None)
        }
    };
    let nu_check = check_nu(&nu);
    Ok(Certificate {
        spec: *spec,
        eff: *eff,
        rate,
        tau_eff,
        nu,
        nu_check,
        s,
        s_sym,
        eigen,
        factorization_psd,
        decomposition,
        decomposition_error,
    })
}

/// Effective parameters → ν → S, the whole certificate pipeline.
pub fn certify(spec: &ProblemSpec) -> Result<Certificate> {
    let (eff, at) = effective_spec(spec)?;
    let nu = build_nu(at.n, at.rho(), at.eta())?;
    build_s(spec, &eff, nu)
}
