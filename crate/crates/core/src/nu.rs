//! The dual multipliers ν_{i,j} over indices 0..N for gradient descent at
//! its optimal stepsize, with their α/β building blocks and the
//! sign and flow diagnostics.

use log::warn;
use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{CertError, Result};
use crate::rates::{e_finite, eval_f, t_finite};

/// Entries in [−NEG_TOL·(1 + max|entry|), 0) are rounding noise on
/// quantities that are analytically nonnegative.
pub const NEG_TOL: f64 = 1e-12;
/// Flow residuals are compared with FLOW_TOL·(1 + max|entry|).
pub const FLOW_TOL: f64 = 1e-10;

/// `rel`·(1 + largest absolute entry of `m`).
pub fn scaled_tol(rel: f64, m: &DMatrix<f64>) -> f64 {
    rel * (1.0 + m.amax())
}

#[derive(Debug, Clone, PartialEq)]
pub struct NuMultipliers {
    pub n: usize,
    /// (N+1)×(N+1), entry (i, j) is ν_{i,j}.
    pub entries: DMatrix<f64>,
    /// (ρ, η) the table was built at.
    pub built_at: (f64, f64),
}

impl NuMultipliers {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// Table over indices 0..N with no construction point attached.
    pub fn from_entries(entries: DMatrix<f64>) -> Self {
        assert!(entries.is_square() && entries.nrows() >= 2);
        Self {
            n: entries.nrows() - 1,
            entries,
            built_at: (f64::NAN, f64::NAN),
        }
    }
}

/// Whether (i, j) belongs to the sparsity pattern: (k, k+1), (k+1, k) and
/// (N, k) for 0 ≤ k ≤ N−1.
pub fn in_pattern(n: usize, i: usize, j: usize) -> bool {
    (j == i + 1 && i < n) || (i == j + 1) || (i == n && j < n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaBeta {
    /// α_1..α_{N−1}, stored at indices 0..N−2.
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl AlphaBeta {
    pub fn alpha(&self, k: usize) -> f64 {
        self.alpha[k - 1]
    }

    pub fn beta(&self, k: usize) -> f64 {
        self.beta[k - 1]
    }
}

/// R(k) = T_k(ρ, η)/F_{N−k}(η), with R(0) = 0.
fn ratio(n: usize, k: usize, rho: f64, eta: f64) -> Result<f64> {
    if k == 0 {
        return Ok(0.0);
    }
    let f = eval_f(n - k, eta);
    if f == 0.0 {
        return Err(CertError::DivisionByZero("F_{N-k}(eta)"));
    }
    Ok(t_finite(k, rho, eta)? / f)
}

pub fn build_alpha_beta(n: usize, rho: f64, eta: f64) -> Result<AlphaBeta> {
    assert!(n >= 2, "alpha/beta need N >= 2");
    if rho == 0.0 || eta == 0.0 {
        return Err(CertError::DivisionByZero("rho or eta"));
    }
    let r: Vec<f64> = (0..n).map(|k| ratio(n, k, rho, eta)).collect::<Result<_>>()?;
    let mut alpha = Vec::with_capacity(n - 1);
    let mut beta = Vec::with_capacity(n - 1);
    for k in 1..n {
        let a = match k {
            1 => r[1],
            2 => -r[1] / rho + (r[2] - r[1]),
            _ => -(r[k - 1] - r[k - 2]) / rho + (r[k] - r[k - 1]),
        };
        alpha.push(a);
        beta.push((eta - rho) / eta * e_finite(k, rho)? - r[k]);
    }
    Ok(AlphaBeta { alpha, beta })
}

pub fn build_nu(n: usize, rho: f64, eta: f64) -> Result<NuMultipliers> {
    if n == 0 {
        return Err(CertError::InvalidSpec("N must be at least 1".into()));
    }
    if rho == 0.0 || eta == 0.0 || eta == rho {
        return Err(CertError::DivisionByZero("rho, eta or eta - rho"));
    }
    let mut nu = DMatrix::zeros(n + 1, n + 1);
    match n {
        1 => {
            let re = rho * e_finite(1, rho)?;
            nu[(1, 0)] = -re;
            nu[(0, 1)] = 1.0 - re;
        }
        2 => case_two(&mut nu, rho, eta)?,
        _ => case_general(&mut nu, n, rho, eta)?,
    }
    clamp_noise(&mut nu);
    Ok(NuMultipliers {
        n,
        entries: nu,
        built_at: (rho, eta),
    })
}

fn case_two(nu: &mut DMatrix<f64>, rho: f64, eta: f64) -> Result<()> {
    let c = eta * rho / (eta - rho);
    let t1 = t_finite(1, rho, eta)?;
    let a1 = t1 / eval_f(1, eta);
    let b1 = (eta - rho) / eta * e_finite(1, rho)? - a1;
    let tail = -rho * e_finite(2, rho)? + (1.0 + rho) / (eta - rho) * t1;
    nu[(1, 0)] = -c * b1;
    nu[(2, 0)] = -c * a1;
    nu[(0, 1)] = 1.0 - c * (a1 + b1);
    nu[(2, 1)] = tail;
    nu[(1, 2)] = 1.0 - c * a1 + tail;
    Ok(())
}

/// The table for N ≥ 3. Also valid at N = 2, where it must agree with the
/// dedicated two-step table.
fn case_general(nu: &mut DMatrix<f64>, n: usize, rho: f64, eta: f64) -> Result<()> {
    let ab = build_alpha_beta(n, rho, eta)?;
    let c = eta * rho / (eta - rho);
    for j in 0..n - 1 {
        nu[(j + 1, j)] = -c * ab.beta(j + 1);
        nu[(n, j)] = -c * ab.alpha(j + 1);
    }
    let mut alpha_sum = 0.0;
    for j in 1..n {
        alpha_sum += ab.alpha(j);
        nu[(j - 1, j)] = 1.0 - c * (alpha_sum + ab.beta(j));
    }
    let r1 = ratio(n, n - 1, rho, eta)?;
    let r2 = ratio(n, n - 2, rho, eta)?;
    let base = eta / (eta - rho) * (r1 - r2) - rho * e_finite(n, rho)? + c * r1;
    nu[(n, n - 1)] = base;
    nu[(n - 1, n)] = base - c * alpha_sum + 1.0;
    Ok(())
}

fn clamp_noise(nu: &mut DMatrix<f64>) {
    let tol = scaled_tol(NEG_TOL, nu);
    for v in nu.iter_mut() {
        if *v < 0.0 && *v >= -tol {
            warn!("clamping multiplier {v:e} to zero");
            *v = 0.0;
        }
    }
}

/// Column sum minus row sum at every node, compared with the required
/// −1 at node 0 and +1 at node N.
pub fn flow_residuals(nu: &DMatrix<f64>) -> Vec<f64> {
    let n = nu.nrows() - 1;
    (0..=n)
        .map(|k| {
            let target = if k == n {
                1.0
            } else if k == 0 {
                -1.0
            } else {
                0.0
            };
            nu.column(k).sum() - nu.row(k).sum() - target
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NuDiagnostics {
    pub pattern_violations: Vec<(usize, usize)>,
    pub flow_residuals: Vec<f64>,
    pub max_flow_residual: f64,
    pub min_entry: f64,
    pub pass: bool,
}

pub fn check_nu(nu: &NuMultipliers) -> NuDiagnostics {
    let m = &nu.entries;
    let n = nu.n;
    let mut pattern_violations = Vec::new();
    for i in 0..=n {
        for j in 0..=n {
            if m[(i, j)] != 0.0 && !in_pattern(n, i, j) {
                pattern_violations.push((i, j));
            }
        }
    }
    let flow_residuals = flow_residuals(m);
    let max_flow_residual = flow_residuals.iter().fold(0.0_f64, |a, r| a.max(r.abs()));
    let min_entry = m.min();
    let pass = pattern_violations.is_empty()
        && max_flow_residual <= scaled_tol(FLOW_TOL, m)
        && min_entry >= -scaled_tol(NEG_TOL, m)
        && m.iter().all(|v| v.is_finite());
    NuDiagnostics {
        pattern_violations,
        flow_residuals,
        max_flow_residual,
        min_entry,
        pass,
    }
}

/// The sign facts behind nonnegativity of ν at γ*-consistent (ρ, η).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignReport {
    pub rho_in_range: bool,
    pub eta_above_minus_rho: bool,
    /// min_k T_k for k < N
    pub min_t: f64,
    /// |T_N| relative to E_N(ρ)
    pub t_n_relative: f64,
    /// min over k of R(k+1) − R(k)
    pub min_ratio_increment: f64,
    /// min over k of ((η−ρ)/η)E_k(ρ) − R(k)
    pub min_beta: f64,
    /// ν_{N,N−1} from the regrouped expression
    pub nu_last_regrouped: f64,
    /// smallest of its three pieces
    pub nu_last_min_piece: f64,
    pub pass: bool,
}

/// Tolerance on |T_N|/E_N(ρ) at γ*. One float step in γ can move T_N by a
/// few 1e−13·E_N(ρ) when N and L are large.
pub const T_N_REL_TOL: f64 = 1e-11;

pub fn sign_report(n: usize, rho: f64, eta: f64) -> Result<SignReport> {
    let mut min_t = f64::INFINITY;
    for k in 1..n {
        min_t = min_t.min(t_finite(k, rho, eta)?);
    }
    let t_n_relative = t_finite(n, rho, eta)?.abs() / e_finite(n, rho)?.abs().max(1.0);
    let mut min_ratio_increment = f64::INFINITY;
    for k in 1..n.saturating_sub(1) {
        min_ratio_increment =
            min_ratio_increment.min(ratio(n, k + 1, rho, eta)? - ratio(n, k, rho, eta)?);
    }
    let mut min_beta = f64::INFINITY;
    for k in 1..n {
        min_beta = min_beta.min((eta - rho) / eta * e_finite(k, rho)? - ratio(n, k, rho, eta)?);
    }
    // ν_{N,N−1} as −c·β_{N−1} + (η/(η−ρ))(R(N−1) − R(N−2)) − ρ^{2−2N}(1+ρ)/ρ,
    // three pieces that are nonnegative on their own at γ*.
    let (nu_last_regrouped, nu_last_min_piece) = if n >= 2 {
        let c = eta * rho / (eta - rho);
        let r1 = ratio(n, n - 1, rho, eta)?;
        let r2 = ratio(n, n - 2, rho, eta)?;
        let p1 = -c * ((eta - rho) / eta * e_finite(n - 1, rho)? - r1);
        let p2 = eta / (eta - rho) * (r1 - r2);
        let p3 = -rho * (rho.powi(1 - 2 * n as i32) + rho.powi(-2 * n as i32));
        (p1 + p2 + p3, p1.min(p2).min(p3))
    } else {
        let v = -rho * e_finite(1, rho)?;
        (v, v)
    };
    let rho_in_range = rho > -1.0 && rho < 0.0;
    let eta_above_minus_rho = eta > -rho;
    let pass = rho_in_range
        && eta_above_minus_rho
        && min_t >= -NEG_TOL
        && t_n_relative <= T_N_REL_TOL
        && min_ratio_increment >= -NEG_TOL
        && min_beta >= -NEG_TOL
        && nu_last_min_piece >= -NEG_TOL;
    Ok(SignReport {
        rho_in_range,
        eta_above_minus_rho,
        min_t: if n > 1 { min_t } else { 0.0 },
        t_n_relative,
        min_ratio_increment: if n > 2 { min_ratio_increment } else { 0.0 },
        min_beta: if n > 1 { min_beta } else { 0.0 },
        nu_last_regrouped,
        nu_last_min_piece,
        pass,
    })
}
