//! Scalar sequences, the exact rate τ, the optimal stepsize γ* and the
//! effective-parameter map used for non-optimal stepsizes.
//!
//! Notation: ρ = 1 − γL, η = 1 − γμ, κ = μ/L and
//!
//! * E_k(x) = Σ_{j=1}^{2k} x^{-j}
//! * F_k(x) = Σ_{j=1}^{k} x^j
//! * T_k(ρ, η) = E_k(η) − E_k(ρ)
//!
//! E and T are summed in double-double arithmetic. Near γ* the two sums in
//! T_N agree to many digits and can be as large as 1e40, so plain `f64`
//! subtraction loses the sign of T_N.

use std::cmp::Ordering;
use std::fmt;

use serde::Serialize;
use twofloat::TwoFloat;

use crate::error::{CertError, Result};

/// Relative distance to γ* under which a stepsize counts as optimal.
pub const TIE_TOL: f64 = 1e-9;

/// Width of the guard bands cut from (1/L, 2/L) when bracketing γ*.
const GUARD: f64 = 1e-12;

/// Maximum number of doublings when bracketing μ' below μ.
const MAX_DOUBLINGS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProblemSpec {
    #[serde(rename = "N")]
    pub n: usize,
    pub mu: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub gamma: f64,
}

impl ProblemSpec {
    pub fn new(n: usize, mu: f64, l: f64, gamma: f64) -> Result<Self> {
        check_class(n, mu, l)?;
        if !(gamma.is_finite() && gamma > 0.0 && gamma < 2.0 / l) {
            return Err(CertError::InvalidSpec(format!(
                "gamma = {gamma} must lie in (0, 2/L) = (0, {})",
                2.0 / l
            )));
        }
        Ok(Self { n, mu, l, gamma })
    }

    /// Spec at the optimal stepsize γ*(N, μ, L).
    pub fn optimal(n: usize, mu: f64, l: f64) -> Result<Self> {
        let gamma = gamma_star(n, mu, l)?;
        Self::new(n, mu, l, gamma)
    }

    pub fn rho(&self) -> f64 {
        1.0 - self.gamma * self.l
    }

    pub fn eta(&self) -> f64 {
        1.0 - self.gamma * self.mu
    }

    pub fn kappa(&self) -> f64 {
        self.mu / self.l
    }

    /// The same stepsize and horizon with the effective (μ', L').
    pub fn with_effective(&self, eff: &EffectiveParameters) -> Self {
        Self {
            n: self.n,
            mu: eff.mu_eff,
            l: eff.l_eff,
            gamma: self.gamma,
        }
    }
}

fn check_class(n: usize, mu: f64, l: f64) -> Result<()> {
    if n == 0 {
        return Err(CertError::InvalidSpec("N must be at least 1".into()));
    }
    if !(l.is_finite() && l > 0.0) {
        return Err(CertError::InvalidSpec(format!("L = {l} must be positive")));
    }
    if !(mu.is_finite() && mu < l) {
        return Err(CertError::InvalidSpec(format!(
            "mu = {mu} must be finite and below L = {l}"
        )));
    }
    Ok(())
}

/// Reals extended by ±∞. E_k(0) is the only source of infinities; sums
/// whose magnitude exceeds the `f64` range saturate to the matching
/// infinity as well.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    NegInfinity,
    Finite(f64),
    PosInfinity,
}

impl ExtReal {
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    fn rank(self) -> (i8, f64) {
        match self {
            ExtReal::NegInfinity => (-1, 0.0),
            ExtReal::Finite(v) => (0, v),
            ExtReal::PosInfinity => (1, 0.0),
        }
    }

    /// Total order; finite values compare with `f64::total_cmp`.
    pub fn total_cmp(&self, other: &Self) -> Ordering {
        let (a, x) = self.rank();
        let (b, y) = other.rank();
        a.cmp(&b).then_with(|| x.total_cmp(&y))
    }

    /// −1, 0 or +1.
    pub fn signum(self) -> i8 {
        match self {
            ExtReal::NegInfinity => -1,
            ExtReal::PosInfinity => 1,
            ExtReal::Finite(v) if v > 0.0 => 1,
            ExtReal::Finite(v) if v < 0.0 => -1,
            ExtReal::Finite(_) => 0,
        }
    }

    fn from_f64(v: f64) -> Self {
        if v == f64::INFINITY {
            ExtReal::PosInfinity
        } else if v == f64::NEG_INFINITY {
            ExtReal::NegInfinity
        } else {
            ExtReal::Finite(v)
        }
    }
}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.total_cmp(other))
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::NegInfinity => write!(f, "-inf"),
            ExtReal::Finite(v) => write!(f, "{v}"),
            ExtReal::PosInfinity => write!(f, "inf"),
        }
    }
}

/// E_k(x) in double-double, `None` for x = 0 or when the sum leaves the
/// `f64` range.
fn e_dd(k: usize, x: f64) -> Option<TwoFloat> {
    if x == 0.0 {
        return None;
    }
    let inv = TwoFloat::from(1.0) / TwoFloat::from(x);
    let mut p = TwoFloat::from(1.0);
    let mut s = TwoFloat::from(0.0);
    for _ in 0..2 * k {
        p *= inv;
        s += p;
        if !s.hi().is_finite() {
            return None;
        }
    }
    Some(s)
}

pub fn eval_e(k: usize, x: f64) -> ExtReal {
    assert!(k >= 1, "E_k needs k >= 1");
    match e_dd(k, x) {
        Some(s) => ExtReal::from_f64(f64::from(s)),
        None => ExtReal::PosInfinity,
    }
}

/// F_k(x); F_0 is the empty sum 0.
pub fn eval_f(k: usize, x: f64) -> f64 {
    let mut p = 1.0;
    let mut s = 0.0;
    for _ in 0..k {
        p *= x;
        s += p;
    }
    s
}

pub fn eval_t(k: usize, rho: f64, eta: f64) -> Result<ExtReal> {
    assert!(k >= 1, "T_k needs k >= 1");
    match (e_dd(k, eta), e_dd(k, rho)) {
        (Some(a), Some(b)) => Ok(ExtReal::from_f64(f64::from(a - b))),
        (Some(_), None) => Ok(ExtReal::NegInfinity),
        (None, Some(_)) => Ok(ExtReal::PosInfinity),
        (None, None) => Err(CertError::UndefinedDifference),
    }
}

/// Finite E_k(x), or an error naming the quantity.
pub(crate) fn e_finite(k: usize, x: f64) -> Result<f64> {
    eval_e(k, x).finite().ok_or(CertError::DivisionByZero("E_k at zero"))
}

pub(crate) fn t_finite(k: usize, rho: f64, eta: f64) -> Result<f64> {
    eval_t(k, rho, eta)?
        .finite()
        .ok_or(CertError::DivisionByZero("T_k at zero"))
}

/// 1/(1 + (1−ρ)·E_N(η)), which is 0 when E_N(η) is infinite.
fn eta_term(n: usize, rho: f64, eta: f64) -> f64 {
    match eval_e(n, eta) {
        ExtReal::Finite(e) => 1.0 / (1.0 + (1.0 - rho) * e),
        _ => 0.0,
    }
}

/// Bounded function with the sign of T_N(ρ, η):
/// φ = ρ^{2N} − 1/(1 + (1−ρ)E_N(η)), using 1/(1 + (1−ρ)E_N(ρ)) = ρ^{2N}.
fn phi(n: usize, rho: f64, eta: f64) -> f64 {
    rho.powi(2 * n as i32) - eta_term(n, rho, eta)
}

/// Sign of T_N(ρ, η), read from φ when it is clearly decided and from the
/// double-double difference otherwise.
fn t_sign(n: usize, rho: f64, eta: f64) -> i8 {
    let a = rho.powi(2 * n as i32);
    let b = eta_term(n, rho, eta);
    let p = a - b;
    if p.abs() > 1e-6 * (a + b) {
        return if p > 0.0 { 1 } else { -1 };
    }
    match eval_t(n, rho, eta) {
        Ok(t) => t.signum(),
        Err(_) => 0,
    }
}

/// Smallest float x in (lo, hi] with T_N ≥ 0 along a parametrisation on
/// which T_N increases. Requires T_N(lo) < 0 ≤ T_N(hi).
///
/// Secant steps with a bisection fallback narrow the bracket on φ, then
/// bisection on the exact sign finishes at adjacent floats.
fn solve_increasing<M>(n: usize, lo: f64, hi: f64, map: M) -> Result<f64>
where
    M: Fn(f64) -> (f64, f64),
{
    let f = |x: f64| {
        let (r, e) = map(x);
        phi(n, r, e)
    };
    let s = |x: f64| {
        let (r, e) = map(x);
        t_sign(n, r, e)
    };
    if s(lo) >= 0 || s(hi) < 0 {
        return Err(CertError::RootNotBracketed { lo, hi });
    }

    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    let mut last_width = b - a;
    for _ in 0..200 {
        let w = b - a;
        if w <= 1e-12 * a.abs().max(b.abs()) || fa >= 0.0 || fb <= 0.0 {
            break;
        }
        let secant = (a * fb - b * fa) / (fb - fa);
        let c = if secant > a + 0.01 * w && secant < b - 0.01 * w && w < 0.5 * last_width {
            secant
        } else {
            0.5 * (a + b)
        };
        last_width = w;
        let fc = f(c);
        if fc < 0.0 {
            a = c;
            fa = fc;
        } else {
            b = c;
            fb = fc;
        }
    }

    // φ can misjudge the sign within a few ulps of the root; widen until the
    // exact sign confirms the bracket.
    let mut step = 4.0 * f64::EPSILON * a.abs().max(b.abs());
    while s(a) >= 0 {
        a = (a - step).max(lo);
        step *= 2.0;
    }
    step = 4.0 * f64::EPSILON * a.abs().max(b.abs());
    while s(b) < 0 {
        b = (b + step).min(hi);
        step *= 2.0;
    }

    loop {
        let m = a + 0.5 * (b - a);
        if m <= a || m >= b {
            return Ok(b);
        }
        if s(m) < 0 {
            a = m;
        } else {
            b = m;
        }
    }
}

/// The optimal stepsize γ*(N, μ, L): the unique γ ∈ (1/L, 2/L) with
/// E_N(1 − γμ) = E_N(1 − γL). The returned float is the smallest one at
/// which T_N ≥ 0 holds in double-double arithmetic.
pub fn gamma_star(n: usize, mu: f64, l: f64) -> Result<f64> {
    check_class(n, mu, l)?;
    let lo = (1.0 + GUARD) / l;
    let hi = (2.0 - GUARD) / l;
    solve_increasing(n, lo, hi, |g| (1.0 - g * l, 1.0 - g * mu))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    EtaBranch,
    RhoBranch,
    Tie,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::EtaBranch => "eta-branch",
            Branch::RhoBranch => "rho-branch",
            Branch::Tie => "tie",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateResult {
    pub tau: f64,
    pub branch: Branch,
    /// 1/(1 + γL·E_N(η))
    pub eta_term: f64,
    /// ρ^{2N}
    pub rho_term: f64,
    pub gamma_star: f64,
}

impl RateResult {
    /// Coefficient of ‖x_0 − x_*‖² in the bound on f(x_N) − f_*.
    pub fn objective_coefficient(&self) -> f64 {
        0.5 * self.tau
    }

    /// Coefficient of f(x_0) − f_* in the bound on ‖∇f(x_N)‖².
    pub fn gradient_coefficient(&self) -> f64 {
        2.0 * self.tau
    }
}

/// τ = L·max{1/(1 + γL·E_N(η)), ρ^{2N}}.
pub fn tau(spec: &ProblemSpec) -> Result<RateResult> {
    let (rho, eta) = (spec.rho(), spec.eta());
    let gs = gamma_star(spec.n, spec.mu, spec.l)?;
    let et = eta_term(spec.n, rho, eta);
    let rt = rho.powi(2 * spec.n as i32);
    let branch = if (spec.gamma - gs).abs() <= TIE_TOL * gs {
        Branch::Tie
    } else if et >= rt {
        Branch::EtaBranch
    } else {
        Branch::RhoBranch
    };
    Ok(RateResult {
        tau: spec.l * et.max(rt),
        branch,
        eta_term: et,
        rho_term: rt,
        gamma_star: gs,
    })
}

/// 1/(1 + γL·E_N(ρ)), the unsimplified form of the ρ-branch.
pub fn rho_term_unsimplified(spec: &ProblemSpec) -> f64 {
    match eval_e(spec.n, spec.rho()) {
        ExtReal::Finite(e) => 1.0 / (1.0 + spec.gamma * spec.l * e),
        _ => 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Moved {
    None,
    LRaised,
    MuLowered,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EffectiveParameters {
    pub mu_eff: f64,
    #[serde(rename = "L_eff")]
    pub l_eff: f64,
    pub which_moved: Moved,
}

/// Parameters (μ', L') with μ' ≤ μ, L' ≥ L at which `spec.gamma` is the
/// optimal stepsize. Below γ* L is raised, above γ* μ is lowered.
pub fn effective_parameters(spec: &ProblemSpec) -> Result<EffectiveParameters> {
    let ProblemSpec { n, mu, l, gamma } = *spec;
    let gs = gamma_star(n, mu, l)?;
    if (gamma - gs).abs() <= TIE_TOL * gs {
        return Ok(EffectiveParameters {
            mu_eff: mu,
            l_eff: l,
            which_moved: Moved::None,
        });
    }
    if gamma < gs {
        let hi = (2.0 - GUARD) / gamma;
        let l_eff = solve_increasing(n, l, hi, |lp| (1.0 - gamma * lp, 1.0 - gamma * mu))
            .map_err(|e| CertError::Internal(format!("raising L: {e}")))?;
        return Ok(EffectiveParameters {
            mu_eff: mu,
            l_eff,
            which_moved: Moved::LRaised,
        });
    }
    let map = |m: f64| (1.0 - gamma * l, 1.0 - gamma * m);
    let mut width = l - mu;
    let mut lo = mu - width;
    let mut doublings = 0;
    while t_sign(n, map(lo).0, map(lo).1) >= 0 {
        if doublings == MAX_DOUBLINGS {
            return Err(CertError::RootNotBracketed { lo, hi: mu });
        }
        width *= 2.0;
        lo = mu - width;
        doublings += 1;
    }
    let mu_eff = solve_increasing(n, lo, mu, map)
        .map_err(|e| CertError::Internal(format!("lowering mu: {e}")))?;
    Ok(EffectiveParameters {
        mu_eff,
        l_eff: l,
        which_moved: Moved::MuLowered,
    })
}

/// Spec at the effective parameters, the one certificates are built at.
pub fn effective_spec(spec: &ProblemSpec) -> Result<(EffectiveParameters, ProblemSpec)> {
    let eff = effective_parameters(spec)?;
    Ok((eff, spec.with_effective(&eff)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn e_examples() {
        assert_eq!(eval_e(1, -1.0), ExtReal::Finite(0.0));
        assert_eq!(eval_e(2, 1.0), ExtReal::Finite(4.0));
        assert_eq!(eval_e(1, -0.5), ExtReal::Finite(-2.0 + 4.0));
        assert_eq!(eval_e(3, 0.0), ExtReal::PosInfinity);
    }

    #[test]
    fn f_examples() {
        assert_eq!(eval_f(1, 0.37), 0.37);
        assert_eq!(eval_f(2, 1.0), 2.0);
        assert_eq!(eval_f(3, 2.0), 14.0);
        assert_eq!(eval_f(0, 2.0), 0.0);
    }

    #[test]
    fn t_examples() {
        assert_eq!(eval_t(3, 0.4, 0.4).unwrap(), ExtReal::Finite(0.0));
        assert_eq!(eval_t(1, -0.5, 1.0).unwrap(), ExtReal::Finite(0.0));
        assert_eq!(eval_t(2, 0.0, 0.5).unwrap(), ExtReal::NegInfinity);
        assert_eq!(eval_t(2, 0.5, 0.0).unwrap(), ExtReal::PosInfinity);
        assert_eq!(eval_t(2, 0.0, 0.0), Err(CertError::UndefinedDifference));
    }

    #[test]
    fn extreal_order_is_total() {
        let v = [
            ExtReal::PosInfinity,
            ExtReal::Finite(1.0),
            ExtReal::NegInfinity,
            ExtReal::Finite(-3.0),
        ];
        let mut s = v.to_vec();
        s.sort_by(|a, b| a.total_cmp(b));
        assert_eq!(
            s,
            vec![
                ExtReal::NegInfinity,
                ExtReal::Finite(-3.0),
                ExtReal::Finite(1.0),
                ExtReal::PosInfinity
            ]
        );
    }

    #[test]
    fn gamma_star_single_step() {
        // 2ρ² − ρ − 1 = 0 on (−1, 0) gives ρ = −1/2.
        assert_relative_eq!(gamma_star(1, 0.0, 1.0).unwrap(), 1.5, max_relative = 1e-12);
        assert_relative_eq!(gamma_star(1, 0.0, 4.0).unwrap(), 1.5 / 4.0, max_relative = 1e-12);
    }

    #[test]
    fn gamma_star_is_upper_root() {
        for &(n, mu) in &[(5, 0.1), (15, 0.9), (8, 0.0), (3, -0.4)] {
            let g = gamma_star(n, mu, 1.0).unwrap();
            let t = eval_t(n, 1.0 - g, 1.0 - g * mu).unwrap();
            assert!(t.signum() >= 0, "{n} {mu}: {t}");
            let below = f64::from_bits(g.to_bits() - 1);
            let tb = eval_t(n, 1.0 - below, 1.0 - below * mu).unwrap();
            assert!(tb.signum() < 0, "{n} {mu}: previous float has {tb}");
        }
    }

    #[test]
    fn tau_examples() {
        for n in [1usize, 2, 7] {
            let s = ProblemSpec::new(n, 0.0, 1.0, 1.0).unwrap();
            let r = tau(&s).unwrap();
            assert_relative_eq!(r.tau, 1.0 / (2.0 * n as f64 + 1.0), max_relative = 1e-14);
            assert_eq!(r.branch, Branch::EtaBranch);
        }
        let r = tau(&ProblemSpec::new(1, 0.0, 1.0, 1.9).unwrap()).unwrap();
        assert_relative_eq!(r.tau, 0.81, max_relative = 1e-14);
        assert_eq!(r.branch, Branch::RhoBranch);
        let r = tau(&ProblemSpec::optimal(4, 0.2, 1.0).unwrap()).unwrap();
        assert_eq!(r.branch, Branch::Tie);
    }

    #[test]
    fn spec_validation() {
        assert!(ProblemSpec::new(0, 0.0, 1.0, 1.0).is_err());
        assert!(ProblemSpec::new(1, 2.0, 1.0, 0.5).is_err());
        assert!(ProblemSpec::new(1, 0.0, 1.0, 2.0).is_err());
        assert!(ProblemSpec::new(1, 0.0, -1.0, 0.5).is_err());
        assert!(ProblemSpec::new(1, -5.0, 1.0, 1.99).is_ok());
    }

    #[test]
    fn effective_raise_l() {
        let s = ProblemSpec::new(1, 0.0, 1.0, 1.2).unwrap();
        let e = effective_parameters(&s).unwrap();
        assert_eq!(e.which_moved, Moved::LRaised);
        assert_eq!(e.mu_eff, 0.0);
        assert_relative_eq!(e.l_eff, 1.25, max_relative = 1e-12);
    }

    #[test]
    fn effective_lower_mu() {
        let s = ProblemSpec::new(1, 0.0, 1.0, 1.8).unwrap();
        let e = effective_parameters(&s).unwrap();
        assert_eq!(e.which_moved, Moved::MuLowered);
        assert_eq!(e.l_eff, 1.0);
        assert!(e.mu_eff < 0.0);
        let lhs = eval_e(1, 1.0 - 1.8 * e.mu_eff).finite().unwrap();
        assert_relative_eq!(lhs, 0.3125, max_relative = 1e-12);
    }

    #[test]
    fn effective_at_optimum_is_identity() {
        let s = ProblemSpec::optimal(6, 0.3, 2.0).unwrap();
        let e = effective_parameters(&s).unwrap();
        assert_eq!(e.which_moved, Moved::None);
        assert_eq!((e.mu_eff, e.l_eff), (0.3, 2.0));
    }
}
