//! Monte-Carlo checks of the multiplier inequalities over arbitrary point
//! families, and numerical checks of the supporting propositions.
//!
//! Families are indexed by {0..N, *} with * stored last. Function values are
//! sampled freely, not from an actual function. The multiplier inequalities
//! must hold for every family that satisfies the linking constraint, so
//! this is the strongest test available.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::certificate::MethodMatrix;
use crate::error::{CertError, Result};
use crate::lambda::{check_flow, f1_residuals, star, LambdaMultipliers};
use crate::nu::{scaled_tol, NuMultipliers, FLOW_TOL};
use crate::rates::{eval_e, tau, ProblemSpec};

/// Relative slack below which an inequality counts as violated.
pub const SLACK_TOL: f64 = 1e-8;
pub const DEFAULT_DIMENSION: usize = 4;
/// Share of trials drawn at a hundred times the unit scale.
const HEAVY_SHARE: f64 = 0.1;
const HEAVY_SCALE: f64 = 100.0;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Points, gradients and values over {0..N, *}, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointFamily {
    pub d: usize,
    pub x: Vec<f64>,
    pub g: Vec<f64>,
    pub f: Vec<f64>,
}

impl PointFamily {
    pub fn zeros(n: usize, d: usize) -> Self {
        Self {
            d,
            x: vec![0.0; (n + 2) * d],
            g: vec![0.0; (n + 2) * d],
            f: vec![0.0; n + 2],
        }
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    pub fn g(&self, i: usize) -> &[f64] {
        &self.g[i * self.d..(i + 1) * self.d]
    }

    /// Random family obeying x_k − x_{k−1} = −(1/L)Σ_j H_{k,j} g_{j−1}, with
    /// g_* = 0 and unconstrained function values.
    fn sample(n: usize, d: usize, h: &DMatrix<f64>, l: f64, rng: &mut ChaCha8Rng) -> Self {
        let scale = if rng.random::<f64>() < HEAVY_SHARE { HEAVY_SCALE } else { 1.0 };
        let mut gauss = || scale * rng.sample::<f64, _>(StandardNormal);
        let mut fam = Self::zeros(n, d);
        let s = star(n);
        for c in 0..d {
            fam.x[c] = gauss();
            fam.x[s * d + c] = gauss();
        }
        for k in 0..=n {
            for c in 0..d {
                fam.g[k * d + c] = gauss();
            }
        }
        for v in fam.f.iter_mut() {
            *v = gauss();
        }
        for k in 1..=n {
            for c in 0..d {
                let step: f64 = (1..=k).map(|j| h[(k - 1, j - 1)] * fam.g[(j - 1) * d + c]).sum();
                fam.x[k * d + c] = fam.x[(k - 1) * d + c] - step / l;
            }
        }
        fam
    }

    /// gap(x_j, x_i) with this family's data.
    fn gap(&self, j: usize, i: usize, mu: f64, l: f64) -> f64 {
        interpolation_gap(self.x(j), self.x(i), self.g(j), self.g(i), self.f[j], self.f[i], mu, l)
    }
}

/// f(p) − f(q) + ⟨∇f(p), q − p⟩ + ‖∇f(p) − ∇f(q)‖²/(2L)
///   + μL/(2(L−μ))·‖p − q − (∇f(p) − ∇f(q))/L‖².
///
/// Nonpositive for every pair of points of a μ-strongly convex, L-smooth
/// function.
#[allow(clippy::too_many_arguments)]
pub fn interpolation_gap(
    p: &[f64],
    q: &[f64],
    gp: &[f64],
    gq: &[f64],
    fp: f64,
    fq: f64,
    mu: f64,
    l: f64,
) -> f64 {
    let mut inner = 0.0;
    let mut dg2 = 0.0;
    let mut r2 = 0.0;
    for c in 0..p.len() {
        let dx = p[c] - q[c];
        let dg = gp[c] - gq[c];
        inner -= gp[c] * dx;
        dg2 += dg * dg;
        let r = dx - dg / l;
        r2 += r * r;
    }
    let strong = if mu == 0.0 { 0.0 } else { mu * l / (2.0 * (l - mu)) * r2 };
    fp - fq + inner + dg2 / (2.0 * l) + strong
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalityReport {
    pub trials: usize,
    pub dimension: usize,
    pub seed: u64,
    /// Smallest (RHS − LHS)/(1 + Σ|RHS terms|) over the trials.
    pub min_slack: f64,
    pub pass: bool,
}

impl InequalityReport {
    fn from_slacks(slacks: impl ParallelIterator<Item = f64>, trials: usize, d: usize, seed: u64) -> Self {
        let min_slack = slacks.reduce(|| f64::INFINITY, f64::min);
        let min_slack = if trials == 0 { 0.0 } else { min_slack };
        Self {
            trials,
            dimension: d,
            seed,
            min_slack,
            pass: min_slack >= -SLACK_TOL,
        }
    }
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// Σ_{i,j} w_{i,j}·gap(x_j, x_i) together with Σ|terms|.
fn weighted_gaps(w: &DMatrix<f64>, fam: &PointFamily, mu: f64, l: f64) -> (f64, f64) {
    let mut sum = 0.0;
    let mut abs = 0.0;
    for i in 0..w.nrows() {
        for j in 0..w.ncols() {
            let c = w[(i, j)];
            if c != 0.0 {
                let t = c * fam.gap(j, i, mu, l);
                sum += t;
                abs += t.abs();
            }
        }
    }
    (sum, abs)
}

/// f_N − f_* − (τ/2)‖x_0 − x_*‖² ≤ Σ λ_{i,j}·gap(x_j, x_i) over random
/// families linked by `h`.
pub fn verify_f_inequality(
    lam: &LambdaMultipliers,
    spec: &ProblemSpec,
    h: &MethodMatrix,
    trials: usize,
    d: usize,
    seed: u64,
) -> Result<InequalityReport> {
    let n = spec.n;
    if lam.n != n || h.n != n {
        return Err(CertError::InvalidSpec("horizon mismatch".into()));
    }
    let residual = f1_residuals(lam).iter().fold(0.0_f64, |a, r| a.max(r.abs()));
    if residual > scaled_tol(FLOW_TOL, &lam.entries) {
        return Err(CertError::FlowViolation { residual });
    }
    let t = tau(spec)?.tau;
    let s = star(n);
    let slacks = (0..trials).into_par_iter().map(|k| {
        let mut rng = trial_rng(seed, k);
        let fam = PointFamily::sample(n, d, &h.h, spec.l, &mut rng);
        let dist2: f64 = fam.x(0).iter().zip(fam.x(s)).map(|(a, b)| (a - b) * (a - b)).sum();
        let lhs = fam.f[n] - fam.f[s] - 0.5 * t * dist2;
        let (rhs, abs) = weighted_gaps(&lam.entries, &fam, spec.mu, spec.l);
        (rhs - lhs) / (1.0 + abs)
    });
    Ok(InequalityReport::from_slacks(slacks, trials, d, seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GReport {
    /// (1/(2τ) − 1/(2L))‖g_N‖² − f_0 + f_N ≤ Σ ν_{i,j}·gap(y_j, y_i)
    pub sum_interpolation: InequalityReport,
    /// ‖g_N‖²/(2τ) − f_0 + f_* ≤ the same sum extended by ν_{N,*} = 1
    pub modified: InequalityReport,
}

impl GReport {
    pub fn pass(&self) -> bool {
        self.sum_interpolation.pass && self.modified.pass
    }
}

fn extend_with_star(nu: &NuMultipliers) -> DMatrix<f64> {
    let n = nu.n;
    let mut w = DMatrix::zeros(n + 2, n + 2);
    w.view_mut((0, 0), (n + 1, n + 1)).copy_from(&nu.entries);
    w[(n, star(n))] = 1.0;
    w
}

/// Slack of the gradient-side inequality for one family, unnormalised:
/// (RHS − LHS, Σ|RHS terms|).
fn g_side(nu: &DMatrix<f64>, fam: &PointFamily, n: usize, spec: &ProblemSpec, t: f64) -> (f64, f64) {
    let gn2 = dot(fam.g(n), fam.g(n));
    let lhs = (0.5 / t - 0.5 / spec.l) * gn2 - fam.f[0] + fam.f[n];
    let (rhs, abs) = weighted_gaps(nu, fam, spec.mu, spec.l);
    (rhs - lhs, abs)
}

pub fn verify_g_inequality(
    nu: &NuMultipliers,
    spec: &ProblemSpec,
    trials: usize,
    d: usize,
    seed: u64,
) -> Result<GReport> {
    let n = spec.n;
    if nu.n != n {
        return Err(CertError::InvalidSpec("horizon mismatch".into()));
    }
    check_flow(nu)?;
    let t = tau(spec)?.tau;
    let h = DMatrix::identity(n, n) * (spec.gamma * spec.l);
    let ext = extend_with_star(nu);
    let s = star(n);
    let pairs: Vec<(f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = trial_rng(seed, k);
            let fam = PointFamily::sample(n, d, &h, spec.l, &mut rng);
            let (raw, abs) = g_side(&nu.entries, &fam, n, spec, t);
            let first = raw / (1.0 + abs);
            let lhs = dot(fam.g(n), fam.g(n)) / (2.0 * t) - fam.f[0] + fam.f[s];
            let (rhs, abs) = weighted_gaps(&ext, &fam, spec.mu, spec.l);
            (first, (rhs - lhs) / (1.0 + abs))
        })
        .collect();
    Ok(GReport {
        sum_interpolation: InequalityReport::from_slacks(pairs.par_iter().map(|p| p.0), trials, d, seed),
        modified: InequalityReport::from_slacks(pairs.par_iter().map(|p| p.1), trials, d, seed),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StrengtheningReport {
    pub trials: usize,
    pub seed: u64,
    /// min over trials of (slack at true − slack at effective)/(1 + Σ|terms|)
    pub min_margin: f64,
    pub pass: bool,
}

pub const STRENGTHENING_TOL: f64 = 1e-10;

/// Runs the gradient-side inequality at the true and at the effective
/// parameters on the same families. The true-parameter slack may not fall
/// below the effective one, since each interpolation term only grows when
/// L decreases or μ increases.
pub fn strengthening_comparison(
    nu: &NuMultipliers,
    spec: &ProblemSpec,
    eff_spec: &ProblemSpec,
    trials: usize,
    d: usize,
    seed: u64,
) -> Result<StrengtheningReport> {
    let n = spec.n;
    check_flow(nu)?;
    if eff_spec.gamma != spec.gamma || eff_spec.n != n {
        return Err(CertError::InvalidSpec("effective spec must share gamma and N".into()));
    }
    let t_true = tau(spec)?.tau;
    let t_eff = tau(eff_spec)?.tau;
    let h = DMatrix::identity(n, n) * (spec.gamma * spec.l);
    let margins = (0..trials).into_par_iter().map(|k| {
        let mut rng = trial_rng(seed, k);
        let fam = PointFamily::sample(n, d, &h, spec.l, &mut rng);
        let (a, abs_a) = g_side(&nu.entries, &fam, n, spec, t_true);
        let (b, abs_b) = g_side(&nu.entries, &fam, n, eff_spec, t_eff);
        (a - b) / (1.0 + abs_a.max(abs_b))
    });
    let min_margin = margins.reduce(|| f64::INFINITY, f64::min);
    let min_margin = if trials == 0 { 0.0 } else { min_margin };
    Ok(StrengtheningReport {
        trials,
        seed,
        min_margin,
        pass: min_margin >= -STRENGTHENING_TOL,
    })
}

/// f(x) − ‖∇f(x)‖²/(2L) ≥ f_* on random convex quadratics with curvature in
/// [0, L].
pub fn check_prop_trivial(l: f64, trials: usize, d: usize, seed: u64) -> InequalityReport {
    let slacks = (0..trials).into_par_iter().map(|k| {
        let mut rng = trial_rng(seed, k);
        let q = crate::gdlab::random_spectrum_matrix(&mut rng, d, 0.0, l);
        let xs: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let x: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let fstar: f64 = rng.sample(StandardNormal);
        let dx: Vec<f64> = x.iter().zip(&xs).map(|(a, b)| a - b).collect();
        let g: Vec<f64> = (0..d).map(|r| (0..d).map(|c| q[(r, c)] * dx[c]).sum()).collect();
        let fx = 0.5 * dot(&g, &dx) + fstar;
        let g2 = dot(&g, &g) / (2.0 * l);
        (fx - g2 - fstar) / (1.0 + (fx - fstar).abs() + g2)
    });
    InequalityReport::from_slacks(slacks, trials, d, seed)
}

/// The function ψ on [0, N] (N may be fractional).
pub fn psi(t: f64, rho: f64, eta: f64, horizon: f64) -> Result<f64> {
    let (num, den) = if eta == 1.0 {
        (
            1.0 + (1.0 - rho) * (horizon + t),
            1.0 + (1.0 - rho) * (horizon - t),
        )
    } else {
        (
            -(eta - rho) + (1.0 - rho) * eta.powf(-t - horizon),
            -(eta - rho) + (1.0 - rho) * eta.powf(t - horizon),
        )
    };
    let ratio = num / den;
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(CertError::Domain { t });
    }
    Ok(ratio.ln())
}

/// Second differences of ψ on a uniform grid of [0, N] are ≥ −1e−9·scale.
pub fn check_psi_convexity(rho: f64, eta: f64, horizon: f64, grid: usize) -> Result<bool> {
    assert!(grid >= 3, "grid needs at least three points");
    let h = horizon / (grid - 1) as f64;
    let vals: Vec<f64> = (0..grid)
        .map(|k| psi(k as f64 * h, rho, eta, horizon))
        .collect::<Result<_>>()?;
    let scale = 1.0 + vals.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    Ok(vals
        .windows(3)
        .all(|w| w[0] - 2.0 * w[1] + w[2] >= -1e-9 * scale))
}

/// |(1/(2τ) − 1/(2L)) − (γ/2)·min{E_N(η), E_N(ρ)}| relative to the latter.
pub fn tau_min_identity_error(spec: &ProblemSpec) -> Result<f64> {
    let t = tau(spec)?.tau;
    let lhs = 0.5 / t - 0.5 / spec.l;
    let e_eta = eval_e(spec.n, spec.eta());
    let e_rho = eval_e(spec.n, spec.rho());
    let m = if e_eta.total_cmp(&e_rho).is_le() { e_eta } else { e_rho };
    let m = m.finite().ok_or(CertError::DivisionByZero("E_N"))?;
    let rhs = 0.5 * spec.gamma * m;
    Ok((lhs - rhs).abs() / rhs.abs().max(f64::MIN_POSITIVE))
}
