//! Gradient descent on concrete functions: the instances that attain the
//! bound at μ = 0, random quadratics for stress testing, and trace export.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CertError, Result};
use crate::rates::{tau, ProblemSpec};
use crate::verifier::interpolation_gap;

/// Relative excess over a bound still treated as rounding.
pub const BOUND_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// ½⟨Q(x − c), x − c⟩ + offset
    Quadratic {
        q: DMatrix<f64>,
        center: DVector<f64>,
        offset: f64,
    },
    /// One-dimensional s|x| − s²/(2L) outside [−s/L, s/L], ½Lx² inside.
    Huber { l: f64, slope: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionOracle {
    pub objective: Objective,
    pub declared_mu: f64,
    pub declared_l: f64,
    pub minimizer: DVector<f64>,
    pub min_value: f64,
}

impl FunctionOracle {
    pub fn dimension(&self) -> usize {
        self.minimizer.len()
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        match &self.objective {
            Objective::Quadratic { q, center, offset } => {
                let dx = x - center;
                0.5 * dx.dot(&(q * &dx)) + offset
            }
            Objective::Huber { l, slope } => {
                let a = x[0].abs();
                if a >= slope / l {
                    slope * a - slope * slope / (2.0 * l)
                } else {
                    0.5 * l * a * a
                }
            }
        }
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.objective {
            Objective::Quadratic { q, center, .. } => q * (x - center),
            Objective::Huber { l, slope } => {
                let v = x[0];
                let g = if v.abs() >= slope / l {
                    slope * v.signum()
                } else {
                    l * v
                };
                DVector::from_element(1, g)
            }
        }
    }

    pub fn with_declared_mu(mut self, mu: f64) -> Self {
        self.declared_mu = mu;
        self
    }

    /// Largest normalised interpolation gap over `pairs` random point pairs
    /// drawn around the minimizer. Members of the declared class give ≤ 0.
    pub fn membership_gap(&self, pairs: usize, seed: u64) -> f64 {
        let d = self.dimension();
        let (mu, l) = (self.declared_mu, self.declared_l);
        (0..pairs)
            .into_par_iter()
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(k as u64);
                let spread = if k % 2 == 0 { 1.0 } else { 10.0 };
                let p = &self.minimizer + gaussian(&mut rng, d) * spread;
                let q = &self.minimizer + gaussian(&mut rng, d) * spread;
                let (gp, gq) = (self.gradient(&p), self.gradient(&q));
                let (fp, fq) = (self.value(&p), self.value(&q));
                let gap = interpolation_gap(
                    p.as_slice(),
                    q.as_slice(),
                    gp.as_slice(),
                    gq.as_slice(),
                    fp,
                    fq,
                    mu,
                    l,
                );
                gap / (1.0 + fp.abs() + fq.abs())
            })
            .reduce(|| f64::NEG_INFINITY, f64::max)
    }
}

fn gaussian(rng: &mut ChaCha8Rng, d: usize) -> DVector<f64> {
    DVector::from_fn(d, |_, _| rng.sample(StandardNormal))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GDTrace {
    pub iterates: Vec<DVector<f64>>,
    pub gradients: Vec<DVector<f64>>,
    pub values: Vec<f64>,
    /// (f(x_N) − f_*)/‖x_0 − x_*‖², `None` when x_0 = x_*.
    pub criterion_f: Option<f64>,
    /// ‖∇f(x_N)‖²/(f(x_0) − f_*), `None` when f(x_0) = f_*.
    pub criterion_g: Option<f64>,
}

impl GDTrace {
    pub fn last(&self) -> &DVector<f64> {
        self.iterates.last().unwrap()
    }

    /// CSV with columns k, x1..xd, f, grad_norm.
    pub fn to_csv(&self) -> String {
        let d = self.iterates[0].len();
        let mut out = String::from("k");
        for c in 1..=d {
            write!(out, ",x{c}").unwrap();
        }
        out.push_str(",f,grad_norm\n");
        for (k, x) in self.iterates.iter().enumerate() {
            write!(out, "{k}").unwrap();
            for v in x.iter() {
                write!(out, ",{}", crate::format::sig17(*v)).unwrap();
            }
            writeln!(
                out,
                ",{},{}",
                crate::format::sig17(self.values[k]),
                crate::format::sig17(self.gradients[k].norm())
            )
            .unwrap();
        }
        out
    }
}

/// N steps of x_{k+1} = x_k − γ∇f(x_k).
pub fn run_gd(oracle: &FunctionOracle, x0: &DVector<f64>, gamma: f64, n: usize) -> Result<GDTrace> {
    if !(gamma > 0.0 && gamma < 2.0 / oracle.declared_l) {
        return Err(CertError::InvalidSpec(format!(
            "gamma = {gamma} outside (0, 2/L)"
        )));
    }
    if x0.len() != oracle.dimension() {
        return Err(CertError::InvalidSpec("start point has the wrong dimension".into()));
    }
    let mut iterates = Vec::with_capacity(n + 1);
    let mut gradients = Vec::with_capacity(n + 1);
    let mut values = Vec::with_capacity(n + 1);
    let mut x = x0.clone();
    for k in 0..=n {
        let g = oracle.gradient(&x);
        values.push(oracle.value(&x));
        iterates.push(x.clone());
        if k < n {
            x -= &g * gamma;
        }
        gradients.push(g);
    }
    let dist2 = (x0 - &oracle.minimizer).norm_squared();
    let gap0 = values[0] - oracle.min_value;
    let criterion_f = (dist2 > 0.0).then(|| (values[n] - oracle.min_value) / dist2);
    let criterion_g = (gap0 > 0.0).then(|| gradients[n].norm_squared() / gap0);
    Ok(GDTrace {
        iterates,
        gradients,
        values,
        criterion_f,
        criterion_g,
    })
}

/// f(x) = (L/2)‖x‖², declared in the class with μ = 0.
pub fn quadratic_instance(l: f64, d: usize) -> FunctionOracle {
    FunctionOracle {
        objective: Objective::Quadratic {
            q: DMatrix::identity(d, d) * l,
            center: DVector::zeros(d),
            offset: 0.0,
        },
        declared_mu: 0.0,
        declared_l: l,
        minimizer: DVector::zeros(d),
        min_value: 0.0,
    }
}

/// The slope s = L·x0/(2NγL + 1) that maximises (f(x_N) − f_*)/x0² over
/// the Huber family while the iterates stay on the linear piece.
pub fn huber_slope(n: usize, gamma: f64, l: f64, x0_distance: f64) -> f64 {
    l * x0_distance / (2.0 * n as f64 * gamma * l + 1.0)
}

/// Huber instance on which N steps from x0 = `x0_distance` give
/// criterion_f = L/(2(2NγL + 1)).
pub fn huber_tight_instance(n: usize, gamma: f64, l: f64, x0_distance: f64) -> Result<FunctionOracle> {
    if !(gamma > 0.0 && gamma < 2.0 / l && x0_distance > 0.0) {
        return Err(CertError::InvalidSpec("need gamma in (0, 2/L) and x0 > 0".into()));
    }
    let slope = huber_slope(n, gamma, l, x0_distance);
    let x_n = x0_distance - n as f64 * gamma * slope;
    if x_n < slope / l {
        return Err(CertError::Internal(format!(
            "iterate x_N = {x_n} left the linear region"
        )));
    }
    Ok(FunctionOracle {
        objective: Objective::Huber { l, slope },
        declared_mu: 0.0,
        declared_l: l,
        minimizer: DVector::zeros(1),
        min_value: 0.0,
    })
}

/// Symmetric matrix U·diag(λ)·Uᵀ with Haar-like random U; the spectrum
/// contains `hi`, contains `lo` when d ≥ 2, and is otherwise uniform.
pub fn random_spectrum_matrix(rng: &mut ChaCha8Rng, d: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let u = g.qr().q();
    let mut spec = DVector::from_fn(d, |_, _| lo + (hi - lo) * rng.random::<f64>());
    spec[0] = hi;
    if d >= 2 {
        spec[1] = lo;
    }
    let q = &u * DMatrix::from_diagonal(&spec) * u.transpose();
    (&q + q.transpose()) * 0.5
}

/// ½⟨Q(x − x*), x − x*⟩ + c with spectrum of Q in [μ, L].
pub fn random_quadratic_instance(mu: f64, l: f64, d: usize, seed: u64) -> Result<FunctionOracle> {
    if !(mu >= 0.0 && mu < l) {
        return Err(CertError::InvalidSpec("need 0 <= mu < L".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = random_spectrum_matrix(&mut rng, d, mu, l);
    let center = gaussian(&mut rng, d);
    let offset: f64 = rng.sample(StandardNormal);
    Ok(FunctionOracle {
        objective: Objective::Quadratic {
            q,
            center: center.clone(),
            offset,
        },
        declared_mu: mu,
        declared_l: l,
        minimizer: center,
        min_value: offset,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TightnessSummary {
    #[serde(rename = "N")]
    pub n: usize,
    pub gamma: f64,
    #[serde(rename = "L")]
    pub l: f64,
    /// τ/2
    pub bound: f64,
    pub huber_criterion: f64,
    pub quadratic_criterion: f64,
    /// max(huber, quadratic)/bound
    pub ratio: f64,
    pub attained: bool,
}

pub const TIGHTNESS_TOL: f64 = 1e-9;

/// Runs both extremal instances at μ = 0 and compares the larger criterion
/// with τ/2.
pub fn tightness_summary(n: usize, gamma: f64, l: f64) -> Result<TightnessSummary> {
    let spec = ProblemSpec::new(n, 0.0, l, gamma)?;
    let bound = 0.5 * tau(&spec)?.tau;
    let x0 = DVector::from_element(1, 1.0);
    let huber = huber_tight_instance(n, gamma, l, 1.0)?;
    let hc = run_gd(&huber, &x0, gamma, n)?.criterion_f.unwrap();
    let quad = quadratic_instance(l, 1);
    let qc = run_gd(&quad, &x0, gamma, n)?.criterion_f.unwrap();
    let ratio = hc.max(qc) / bound;
    Ok(TightnessSummary {
        n,
        gamma,
        l,
        bound,
        huber_criterion: hc,
        quadratic_criterion: qc,
        ratio,
        attained: (ratio - 1.0).abs() <= TIGHTNESS_TOL,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StressReport {
    pub instances: usize,
    pub seed: u64,
    /// max criterion_f/(τ/2)
    pub max_f_ratio: f64,
    /// max criterion_g/(2τ)
    pub max_g_ratio: f64,
    /// max ‖x_N − x_*‖/(max{|η|, |ρ|}^N‖x_0 − x_*‖)
    pub max_distance_ratio: f64,
    pub pass: bool,
}

/// GD on `instances` random quadratics in the class, from random starts.
pub fn stress_random_quadratics(spec: &ProblemSpec, instances: usize, d: usize, seed: u64) -> Result<StressReport> {
    if spec.mu < 0.0 {
        return Err(CertError::InvalidSpec("stress test needs mu >= 0".into()));
    }
    let t = tau(spec)?.tau;
    let contraction = spec.eta().abs().max(spec.rho().abs()).powi(spec.n as i32);
    let ratios: Vec<(f64, f64, f64)> = (0..instances)
        .into_par_iter()
        .map(|k| -> Result<(f64, f64, f64)> {
            let inst_seed = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k as u64);
            let f = random_quadratic_instance(spec.mu, spec.l, d, inst_seed)?;
            let mut rng = ChaCha8Rng::seed_from_u64(inst_seed);
            rng.set_stream(1);
            let x0 = &f.minimizer + gaussian(&mut rng, d);
            let tr = run_gd(&f, &x0, spec.gamma, spec.n)?;
            let rf = tr.criterion_f.unwrap_or(0.0) / (0.5 * t);
            let rg = tr.criterion_g.unwrap_or(0.0) / (2.0 * t);
            let dist = (tr.last() - &f.minimizer).norm() / (contraction * (&x0 - &f.minimizer).norm());
            Ok((rf, rg, dist))
        })
        .collect::<Result<_>>()?;
    let max3 = ratios.iter().fold((0.0_f64, 0.0_f64, 0.0_f64), |a, r| {
        (a.0.max(r.0), a.1.max(r.1), a.2.max(r.2))
    });
    Ok(StressReport {
        instances,
        seed,
        max_f_ratio: max3.0,
        max_g_ratio: max3.1,
        max_distance_ratio: max3.2,
        pass: max3.0 <= 1.0 + BOUND_TOL && max3.1 <= 1.0 + BOUND_TOL && max3.2 <= 1.0 + 1e-12,
    })
}
