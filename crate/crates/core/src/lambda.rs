//! Conversion of ν multipliers into λ multipliers for the
//! distance-to-objective analysis, in the general and restricted patterns.
//!
//! λ tables are (N+2)×(N+2) over the index set {0..N, *}; the star index is
//! stored at position N+1 (see [`star`]). ν tables keep their (N+1)×(N+1)
//! shape, with the single star entry ν_{N,*} = 1 left implicit.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{CertError, Result};
use crate::nu::{flow_residuals, scaled_tol, NuMultipliers, FLOW_TOL, NEG_TOL};

/// Position of the star index in a λ table for horizon `n`.
pub fn star(n: usize) -> usize {
    n + 1
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaMultipliers {
    pub n: usize,
    pub entries: DMatrix<f64>,
}

impl LambdaMultipliers {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            entries: DMatrix::zeros(n + 2, n + 2),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// Row/column labels in display order: *, 0, 1, ..., N.
    pub fn display_order(&self) -> Vec<(String, usize)> {
        std::iter::once(("*".to_string(), star(self.n)))
            .chain((0..=self.n).map(|k| (k.to_string(), k)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConversionSequences {
    /// A_1..A_N at indices 0..N−1
    pub a: Vec<f64>,
    /// B_1..B_N at indices 0..N−1, with B_N = 0
    pub b: Vec<f64>,
}

impl ConversionSequences {
    pub fn n(&self) -> usize {
        self.a.len()
    }

    /// A_k for 1 ≤ k ≤ N.
    pub fn a(&self, k: usize) -> f64 {
        self.a[k - 1]
    }

    pub fn b(&self, k: usize) -> f64 {
        self.b[k - 1]
    }

    fn ab(&self, k: usize) -> f64 {
        self.a(k) + self.b(k)
    }
}

fn general_pattern(n: usize, i: usize, j: usize) -> bool {
    crate::nu::in_pattern(n, i, j)
}

/// A_k = 1 + Σ_{j<k} ν_{N,j} and B_k = ν_{k,k−1} (B_N = 0).
pub fn conversion_sequences(nu: &NuMultipliers) -> Result<ConversionSequences> {
    let n = nu.n;
    for i in 0..=n {
        for j in 0..=n {
            if nu.get(i, j) != 0.0 && !general_pattern(n, i, j) {
                return Err(CertError::PatternViolation { i, j });
            }
        }
    }
    let mut a = Vec::with_capacity(n);
    let mut acc = 1.0;
    for k in 1..=n {
        acc += nu.get(n, k - 1);
        a.push(acc);
    }
    let b = (1..=n)
        .map(|k| if k < n { nu.get(k, k - 1) } else { 0.0 })
        .collect();
    Ok(ConversionSequences { a, b })
}

/// M (1-based indices stored 0-based): A_i + B_i on the diagonal,
/// A_i − A_{i+1} − B_{i+1} just above it and A_i − A_{i+1} further right.
pub fn build_m(seq: &ConversionSequences) -> DMatrix<f64> {
    let n = seq.n();
    DMatrix::from_fn(n, n, |r, c| {
        let (i, j) = (r + 1, c + 1);
        if j == i {
            seq.ab(i)
        } else if j == i + 1 {
            seq.a(i) - seq.a(i + 1) - seq.b(i + 1)
        } else if j > i + 1 {
            seq.a(i) - seq.a(i + 1)
        } else {
            0.0
        }
    })
}

/// Π_{k=lo}^{hi} B_k/(A_{k+1} + B_{k+1}); empty products are 1.
fn tail_product(seq: &ConversionSequences, lo: usize, hi: usize) -> f64 {
    (lo..=hi).fold(1.0, |p, k| p * seq.b(k) / seq.ab(k + 1))
}

/// Π_{k=lo}^{hi} B_k/(A_k + B_k); empty products are 1.
fn head_product(seq: &ConversionSequences, lo: usize, hi: usize) -> f64 {
    (lo..=hi).fold(1.0, |p, k| p * seq.b(k) / seq.ab(k))
}

/// Closed-form M⁻¹.
pub fn build_m_inverse(seq: &ConversionSequences) -> Result<DMatrix<f64>> {
    let n = seq.n();
    for i in 1..=n {
        if seq.ab(i) <= 0.0 {
            return Err(CertError::SingularM { index: i });
        }
    }
    Ok(DMatrix::from_fn(n, n, |r, c| {
        let (i, j) = (r + 1, c + 1);
        if j < i {
            return 0.0;
        }
        let d = 1.0 / seq.ab(i);
        if j == i {
            return d;
        }
        let lead = d * seq.a(i) / seq.ab(i + 1);
        d - (i + 1..=j).map(|l| lead * tail_product(seq, i + 1, l - 1)).sum::<f64>()
    }))
}

/// λ from ν using the closed forms in A_k and B_k.
pub fn nu_to_lambda(nu: &NuMultipliers) -> Result<LambdaMultipliers> {
    let seq = conversion_sequences(nu)?;
    build_m_inverse(&seq)?;
    let n = nu.n;
    let s = star(n);
    let mut lam = LambdaMultipliers::zeros(n);
    let m = &mut lam.entries;
    for j in 0..n {
        let k0 = n - j;
        let d = 1.0 / seq.ab(k0);
        let lead = if j > 0 { d * seq.a(k0) / seq.ab(k0 + 1) } else { 0.0 };
        let mut used = 0.0;
        for i in 0..j {
            let v = lead * tail_product(&seq, k0 + 1, n - i - 1);
            m[(i, j)] = v;
            used += v;
        }
        m[(s, j)] = d - used;
    }
    let mut col = 0.0;
    for i in 0..n {
        let v = head_product(&seq, 1, n - i - 1) / seq.ab(n - i);
        m[(i, n)] = v;
        col += v;
    }
    m[(s, n)] = 1.0 - col;
    Ok(lam)
}

/// λ from ν through explicit differences of M⁻¹ entries, the form before
/// the closed-form substitution. Used as an independent cross-check.
pub fn nu_to_lambda_via_m_inverse(nu: &NuMultipliers) -> Result<LambdaMultipliers> {
    let seq = conversion_sequences(nu)?;
    let mi = build_m_inverse(&seq)?;
    let n = nu.n;
    let s = star(n);
    // 1-based access into M⁻¹
    let at = |i: usize, j: usize| mi[(i - 1, j - 1)];
    let column_n = |i: usize| {
        at(n - i, n - i) - (1..n - i).map(|k| at(k, n - i - 1) - at(k, n - i)).sum::<f64>()
    };
    let mut lam = LambdaMultipliers::zeros(n);
    let m = &mut lam.entries;
    for j in 0..n {
        for i in 0..j {
            m[(i, j)] = at(n - j, n - i - 1) - at(n - j, n - i);
        }
        m[(s, j)] = at(n - j, n);
    }
    for i in 0..n {
        m[(i, n)] = column_n(i);
    }
    m[(s, n)] = 1.0 - (0..n).map(column_n).sum::<f64>();
    Ok(lam)
}

/// (F1): column sum minus row sum is +1 at N, −1 at *, 0 elsewhere.
pub fn f1_residuals(lam: &LambdaMultipliers) -> Vec<f64> {
    let n = lam.n;
    let m = &lam.entries;
    (0..n + 2)
        .map(|k| {
            let target = if k == n {
                1.0
            } else if k == star(n) {
                -1.0
            } else {
                0.0
            };
            m.column(k).sum() - m.row(k).sum() - target
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaDiagnostics {
    pub min_entry: f64,
    pub max_f1_residual: f64,
    /// Largest |λ_{i,j}λ_{i',j'} − λ_{i',j}λ_{i,j'}| relative to the larger
    /// product, over quadruples whose entries all exceed the floor.
    pub grimmer_max_defect: f64,
    pub grimmer_quadruples: usize,
    pub grimmer_ok: bool,
    pub pass: bool,
}

pub const GRIMMER_FLOOR: f64 = 1e-10;
pub const GRIMMER_TOL: f64 = 1e-9;

pub fn check_lambda(lam: &LambdaMultipliers) -> LambdaDiagnostics {
    check_lambda_with(lam, GRIMMER_TOL)
}

/// As [`check_lambda`] with a caller-chosen tolerance for the ratio
/// property, for tables that were rounded before checking.
pub fn check_lambda_with(lam: &LambdaMultipliers, grimmer_tol: f64) -> LambdaDiagnostics {
    let n = lam.n;
    let min_entry = lam.entries.min();
    let max_f1_residual = f1_residuals(lam).iter().fold(0.0_f64, |a, r| a.max(r.abs()));
    let mut defect = 0.0_f64;
    let mut count = 0;
    for j in 1..=n {
        for jp in j + 1..=n {
            for i in 0..j {
                for ip in i + 1..j {
                    let vals = [lam.get(i, j), lam.get(ip, jp), lam.get(ip, j), lam.get(i, jp)];
                    if vals.iter().any(|&v| v <= GRIMMER_FLOOR) {
                        continue;
                    }
                    let p = vals[0] * vals[1];
                    let q = vals[2] * vals[3];
                    defect = defect.max((p - q).abs() / p.abs().max(q.abs()));
                    count += 1;
                }
            }
        }
    }
    let grimmer_ok = defect <= grimmer_tol;
    LambdaDiagnostics {
        min_entry,
        max_f1_residual,
        grimmer_max_defect: defect,
        grimmer_quadruples: count,
        grimmer_ok,
        pass: min_entry >= -scaled_tol(NEG_TOL, &lam.entries)
            && max_f1_residual <= scaled_tol(FLOW_TOL, &lam.entries)
            && grimmer_ok,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowerBoundReport {
    /// min over j < N of λ_{*,j} minus its lower bound
    pub star_row_margin: f64,
    /// λ_{*,N} minus Π_k B_k/(1 + B_k)
    pub star_last_margin: f64,
}

/// Margins of the star-row entries above their analytic lower bounds.
pub fn lower_bound_margins(nu: &NuMultipliers, lam: &LambdaMultipliers) -> Result<LowerBoundReport> {
    let seq = conversion_sequences(nu)?;
    let n = nu.n;
    let s = star(n);
    let mut star_row_margin = f64::INFINITY;
    for j in 0..n {
        let k0 = n - j;
        let a0 = seq.a(k0);
        let bound = (k0 + 1..=n).fold(1.0 / seq.ab(k0), |p, k| p * seq.b(k) / (a0 + seq.b(k)));
        star_row_margin = star_row_margin.min(lam.get(s, j) - bound);
    }
    let last = (1..=n).fold(1.0, |p, k| p * seq.b(k) / (1.0 + seq.b(k)));
    Ok(LowerBoundReport {
        star_row_margin,
        star_last_margin: lam.get(s, n) - last,
    })
}

/// ν in the restricted pattern (k, k+1), (N, k) generated by a
/// nondecreasing A_1..A_N ≥ 1.
pub fn restricted_nu_from_a(a: &[f64]) -> NuMultipliers {
    let n = a.len();
    let mut m = DMatrix::zeros(n + 1, n + 1);
    for j in 1..=n {
        m[(j - 1, j)] = a[j - 1];
    }
    m[(n, 0)] = a[0] - 1.0;
    for j in 1..n {
        m[(n, j)] = a[j] - a[j - 1];
    }
    NuMultipliers::from_entries(m)
}

/// λ in the restricted pattern (k, k+1), (*, k) generated by A_1..A_N.
pub fn restricted_lambda_from_a(a: &[f64]) -> LambdaMultipliers {
    let n = a.len();
    let big_a = |k: usize| a[k - 1];
    let s = star(n);
    let mut lam = LambdaMultipliers::zeros(n);
    let m = &mut lam.entries;
    for j in 1..=n {
        m[(j - 1, j)] = 1.0 / big_a(n - j + 1);
    }
    m[(s, 0)] = 1.0 / big_a(n);
    for j in 1..n {
        m[(s, j)] = 1.0 / big_a(n - j) - 1.0 / big_a(n - j + 1);
    }
    m[(s, n)] = 1.0 - 1.0 / big_a(1);
    lam
}

fn restricted_nu_pattern(n: usize, i: usize, j: usize) -> bool {
    (j == i + 1 && i < n) || (i == n && j < n)
}

fn restricted_lambda_pattern(n: usize, i: usize, j: usize) -> bool {
    (j == i + 1 && i < n) || i == star(n) && j <= n
}

pub fn a_from_restricted_nu(nu: &NuMultipliers) -> Result<Vec<f64>> {
    let n = nu.n;
    for i in 0..=n {
        for j in 0..=n {
            if nu.get(i, j) != 0.0 && !restricted_nu_pattern(n, i, j) {
                return Err(CertError::PatternViolation { i, j });
            }
        }
    }
    let mut acc = 1.0;
    Ok((1..=n)
        .map(|k| {
            acc += nu.get(n, k - 1);
            acc
        })
        .collect())
}

/// A_k = 1/Σ_{j=0}^{N−k} λ_{*,j}.
pub fn a_from_restricted_lambda(lam: &LambdaMultipliers) -> Result<Vec<f64>> {
    let n = lam.n;
    for i in 0..n + 2 {
        for j in 0..n + 2 {
            if lam.get(i, j) != 0.0 && !restricted_lambda_pattern(n, i, j) {
                return Err(CertError::PatternViolation { i, j });
            }
        }
    }
    let s = star(n);
    Ok((1..=n)
        .map(|k| 1.0 / (0..=n - k).map(|j| lam.get(s, j)).sum::<f64>())
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub enum RestrictedTable {
    Nu(NuMultipliers),
    Lambda(LambdaMultipliers),
}

/// ν → λ → ν or λ → ν → λ through the shared A_k parametrisation; the
/// direction follows the input's side.
pub fn restricted_round_trip(table: &RestrictedTable) -> Result<RestrictedTable> {
    match table {
        RestrictedTable::Nu(nu) => {
            let lam = restricted_lambda_from_a(&a_from_restricted_nu(nu)?);
            Ok(RestrictedTable::Nu(restricted_nu_from_a(&a_from_restricted_lambda(&lam)?)))
        }
        RestrictedTable::Lambda(lam) => {
            let nu = restricted_nu_from_a(&a_from_restricted_lambda(lam)?);
            Ok(RestrictedTable::Lambda(restricted_lambda_from_a(&a_from_restricted_nu(&nu)?)))
        }
    }
}

/// Tolerance for residuals of the mapped equations, relative to the
/// magnitude of the sampled points times that of ν.
pub const DUAL_MAP_TOL: f64 = 1e-9;

/// Largest relative residual of the ν-side equations after solving the
/// λ-side map for y from random x, over `trials` trials of dimension `d`.
pub fn dual_map_residual(
    nu: &NuMultipliers,
    lam: &LambdaMultipliers,
    trials: usize,
    d: usize,
    seed: u64,
) -> Result<f64> {
    let n = nu.n;
    if lam.n != n {
        return Err(CertError::InvalidSpec("nu and lambda horizons differ".into()));
    }
    let s = star(n);
    // ν over {0..N, *} with ν_{N,*} = 1
    let mut nus = DMatrix::zeros(n + 2, n + 2);
    nus.view_mut((0, 0), (n + 1, n + 1)).copy_from(&nu.entries);
    nus[(n, s)] = 1.0;
    let lm = &lam.entries;

    let mut worst = 0.0_f64;
    for t in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t as u64);
        let mut gauss = || -> DVector<f64> {
            DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng))
        };
        let xp: Vec<DVector<f64>> = (0..n + 2).map(|_| gauss()).collect();
        let y_star = gauss();

        let weighted = |w: &DMatrix<f64>, pts: &[DVector<f64>], c: usize| -> DVector<f64> {
            let mut acc = DVector::zeros(d);
            for i in 0..n + 2 {
                if w[(i, c)] != 0.0 {
                    acc += (&pts[i] - &pts[c]) * w[(i, c)];
                }
            }
            acc
        };

        // y_k⁺ − y_{k−1}⁺ = Σ_i λ_{i,N−k}(x_i⁺ − x_{N−k}⁺)
        let mut dk = vec![DVector::zeros(d)];
        for k in 1..=n {
            let step = weighted(lm, &xp, n - k);
            let next = &dk[k - 1] + step;
            dk.push(next);
        }
        // (y_0⁺ + y_*⁺)/2 − y_N⁺ = (x_N⁺ − x_*⁺)/2 + Σ_i λ_{i,*}(x_i⁺ − x_*⁺)
        let r = (&xp[n] - &xp[s]) * 0.5 + weighted(lm, &xp, s);
        let y0 = &y_star - (&r + &dk[n]) * 2.0;
        let mut yp: Vec<DVector<f64>> = dk.iter().map(|v| &y0 + v).collect();
        yp.push(y_star.clone());

        let star_check = (&yp[0] + &yp[s]) * 0.5 - &yp[n] - &r;
        if star_check.amax() > 1e-9 * (1.0 + r.amax()) {
            return Err(CertError::InconsistentSystem {
                residual: star_check.amax(),
            });
        }

        let scale = (1.0 + xp.iter().chain(&yp).map(|v| v.amax()).fold(0.0, f64::max)) * (1.0 + nus.amax());
        let mut res = 0.0_f64;
        for k in 1..n {
            let lhs = &xp[k] - &xp[k - 1];
            res = res.max((lhs - weighted(&nus, &yp, n - k)).amax());
        }
        let lhs = &xp[0] - &xp[s];
        res = res.max((lhs - weighted(&nus, &yp, n)).amax());
        let lhs = (&xp[s] - &xp[n]) * 0.5;
        let rhs = (&yp[s] - &yp[0]) * 0.5 + weighted(&nus, &yp, s);
        res = res.max((lhs - rhs).amax());
        worst = worst.max(res / scale);
    }
    Ok(worst)
}

/// Whether the two linear maps are equivalent on `trials` random samples.
pub fn dual_map_equivalence(
    nu: &NuMultipliers,
    lam: &LambdaMultipliers,
    trials: usize,
    d: usize,
    seed: u64,
) -> Result<bool> {
    Ok(dual_map_residual(nu, lam, trials, d, seed)? <= DUAL_MAP_TOL)
}

/// Checks that ν satisfies the flow constraint before conversion.
pub fn check_flow(nu: &NuMultipliers) -> Result<()> {
    let r = flow_residuals(&nu.entries).iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if r > scaled_tol(FLOW_TOL, &nu.entries) {
        return Err(CertError::FlowViolation { residual: r });
    }
    Ok(())
}
