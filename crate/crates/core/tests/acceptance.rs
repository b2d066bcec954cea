//! Acceptance run: one line per criterion, nonzero exit if any fails.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use gdcert::certificate::{certify, MethodMatrix};
use gdcert::gdlab::{stress_random_quadratics, tightness_summary};
use gdcert::lambda::{
    a_from_restricted_lambda, a_from_restricted_nu, check_lambda, dual_map_equivalence, nu_to_lambda,
    restricted_lambda_from_a, restricted_nu_from_a, star, LambdaMultipliers,
};
use gdcert::nu::{build_nu, sign_report, NuMultipliers};
use gdcert::psd::max_abs;
use gdcert::rates::{effective_spec, eval_e, eval_t, gamma_star, tau, ProblemSpec};
use gdcert::verifier::{
    check_psi_convexity, strengthening_comparison, verify_f_inequality, verify_g_inequality,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const KAPPAS: [f64; 5] = [0.0, 0.01, 0.1, 0.5, 0.9];
const STEPS: [f64; 5] = [0.2, 0.6, 1.0, 1.4, 1.8];

type Outcome = Result<String, String>;
type Criterion = (&'static str, u64, fn() -> Outcome);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn pipeline(spec: &ProblemSpec) -> (ProblemSpec, NuMultipliers, LambdaMultipliers) {
    let (_, at) = effective_spec(spec).unwrap();
    let nu = build_nu(spec.n, at.rho(), at.eta()).unwrap();
    let lam = nu_to_lambda(&nu).unwrap();
    (at, nu, lam)
}

fn small_grid() -> Vec<(usize, f64)> {
    [1, 2, 5, 10].iter().flat_map(|&n| KAPPAS.iter().map(move |&k| (n, k))).collect()
}

fn golden_lambda() -> Outcome {
    const REFERENCE: [[&str; 7]; 7] = [
        ["0.0000", "0.0384", "0.0621", "0.1063", "0.1873", "0.3342", "0.2718"],
        ["0.0000", "0.0000", "0.0182", "0.0119", "0.0060", "0.0020", "0.0003"],
        ["0.0000", "0.0000", "0.0000", "0.0472", "0.0237", "0.0080", "0.0013"],
        ["0.0000", "0.0000", "0.0000", "0.0000", "0.1186", "0.0401", "0.0067"],
        ["0.0000", "0.0000", "0.0000", "0.0000", "0.0000", "0.2876", "0.0479"],
        ["0.0000", "0.0000", "0.0000", "0.0000", "0.0000", "0.0000", "0.6719"],
        ["0.0000", "0.0000", "0.0000", "0.0000", "0.0000", "0.0000", "0.0000"],
    ];
    let out = Command::new(env!("CARGO_BIN_EXE_gdcert"))
        .args(["table", "--N", "5", "--mu", "0.1", "--L", "1", "--format", "csv"])
        .env_remove("GDCERT_OUTPUT_DIR")
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), "table command failed")?;
    let mut rd = csv::Reader::from_reader(out.stdout.as_slice());
    let rows: Vec<Vec<f64>> = rd
        .records()
        .map(|r| r.unwrap().iter().skip(1).map(|x| x.parse().unwrap()).collect())
        .collect();
    ensure(rows.len() == 7, "expected 7 rows")?;
    let mut worst = 0.0_f64;
    for (p, row) in REFERENCE.iter().enumerate() {
        for (q, s) in row.iter().enumerate() {
            let want: f64 = s.parse().unwrap();
            let got = rows[p][q];
            // zero pattern: strictly lower part and the * column are exact zeros
            if q == 0 || q <= p {
                ensure(got == 0.0, format!("entry ({p},{q}) = {got}, expected exact zero"))?;
            }
            worst = worst.max((got - want).abs());
        }
    }
    ensure(worst <= 5e-5, format!("max deviation {worst:.2e}"))?;
    Ok(format!("max deviation {worst:.2e}"))
}

fn rate_closed_forms() -> Outcome {
    let mut worst = 0.0_f64;
    for n in 1..=50 {
        for l in [0.5, 1.0, 4.0] {
            let t = tau(&ProblemSpec::new(n, 0.0, l, 1.0 / l).unwrap()).unwrap().tau;
            let want = l / (2 * n + 1) as f64;
            worst = worst.max((t - want).abs() / want);
        }
    }
    ensure(worst <= 1e-14, format!("closed form rel err {worst:.2e}"))?;
    let mut cross = 0.0_f64;
    for (n, k) in small_grid() {
        let gs = gamma_star(n, k, 1.0).unwrap();
        // the switch point of the max, read off the two computed terms
        let rho_wins = |g: f64| {
            let r = tau(&ProblemSpec::new(n, k, 1.0, g).unwrap()).unwrap();
            r.rho_term > r.eta_term
        };
        let (mut a, mut b) = (1.0 + 1e-12, 2.0 - 1e-12);
        ensure(!rho_wins(a) && rho_wins(b), "branches not bracketed")?;
        for _ in 0..100 {
            let m = 0.5 * (a + b);
            if rho_wins(m) {
                b = m;
            } else {
                a = m;
            }
        }
        cross = cross.max((0.5 * (a + b) - gs).abs());
    }
    ensure(cross <= 1e-9, format!("crossover offset {cross:.2e}"))?;
    Ok(format!("closed form rel err {worst:.2e}, crossover offset {cross:.2e}"))
}

fn optimal_stepsize() -> Outcome {
    let g = gamma_star(1, 0.0, 1.0).unwrap();
    ensure((g - 1.5).abs() <= 1e-12, format!("gamma*(1,0,1) = {g}"))?;
    let (mut worst, mut worst_rel, mut at) = (0.0_f64, 0.0_f64, (0, 0.0));
    for (n, k) in small_grid() {
        let g = gamma_star(n, k, 1.0).unwrap();
        ensure(g > 1.0 && g < 2.0, format!("gamma* L = {g} at N={n} kappa={k}"))?;
        let t = eval_t(n, 1.0 - g, 1.0 - g * k).unwrap().finite().unwrap().abs();
        let e = eval_e(n, 1.0 - g).finite().unwrap();
        if t > worst {
            worst = t;
            at = (n, k);
        }
        worst_rel = worst_rel.max(t / e);
    }
    let msg = format!(
        "max |E_N(eta) - E_N(rho)| = {worst:.2e} at N={} kappa={} (relative to E_N: {worst_rel:.1e})",
        at.0, at.1
    );
    ensure(worst <= 1e-12, msg.clone())?;
    Ok(msg)
}

fn psd_sweep() -> Outcome {
    let mut worst = f64::INFINITY;
    let mut count = 0;
    for n in 1..=15 {
        for k in KAPPAS {
            for gl in STEPS {
                let c = certify(&ProblemSpec::new(n, k, 1.0, gl).unwrap()).map_err(|e| e.to_string())?;
                let rel = c.min_eig() / (1.0 + max_abs(&c.s_sym));
                ensure(c.psd() && rel >= -1e-9, format!("N={n} kappa={k} gamma={gl}: min_eig {}", c.min_eig()))?;
                worst = worst.min(rel);
                count += 1;
            }
        }
    }
    Ok(format!("{count} certificates PSD, worst min_eig/(1+|S|) = {worst:.2e}"))
}

fn decomposition() -> Outcome {
    let (mut err, mut min_delta) = (0.0_f64, f64::INFINITY);
    for n in 1..=15 {
        for k in KAPPAS {
            let c = certify(&ProblemSpec::optimal(n, k, 1.0).unwrap()).map_err(|e| e.to_string())?;
            let d = c.decomposition.as_ref().ok_or("no decomposition at gamma*")?;
            let r = c.decomposition_error.unwrap();
            ensure(r <= 1e-10, format!("N={n} kappa={k}: reconstruction error {r:.2e}"))?;
            ensure(d.min_delta() >= -1e-12, format!("N={n} kappa={k}: min delta {}", d.min_delta()))?;
            err = err.max(r);
            min_delta = min_delta.min(d.min_delta());
        }
    }
    Ok(format!("max reconstruction error {err:.2e}, min delta {min_delta:.3e}"))
}

fn specs_for_monte_carlo() -> Vec<ProblemSpec> {
    let mut v = vec![ProblemSpec::optimal(5, 0.1, 1.0).unwrap()];
    for gl in [0.5, 1.2, 1.9] {
        v.push(ProblemSpec::new(5, 0.1, 1.0, gl).unwrap());
    }
    v
}

fn f_side() -> Outcome {
    let mut worst = f64::INFINITY;
    for spec in specs_for_monte_carlo() {
        let (_, _, lam) = pipeline(&spec);
        let h = MethodMatrix::gradient_descent(spec.n, spec.gamma * spec.l);
        let r = verify_f_inequality(&lam, &spec, &h, 10_000, 4, 1).map_err(|e| e.to_string())?;
        ensure(r.min_slack >= -1e-8, format!("gamma={}: min slack {:.2e}", spec.gamma, r.min_slack))?;
        worst = worst.min(r.min_slack);
    }
    // move λ_{N−1,N} onto the route through *, which keeps flow balance
    let spec = ProblemSpec::optimal(5, 0.1, 1.0).unwrap();
    let (_, _, mut lam) = pipeline(&spec);
    let (n, s) = (lam.n, star(lam.n));
    let w = lam.entries[(n - 1, n)];
    lam.entries[(n - 1, n)] = 0.0;
    lam.entries[(s, n)] += w;
    lam.entries[(n - 1, s)] += w;
    let h = MethodMatrix::gradient_descent(n, spec.gamma);
    let r = verify_f_inequality(&lam, &spec, &h, 1000, 4, 1).map_err(|e| e.to_string())?;
    ensure(!r.pass, "fault-injected lambda was not detected")?;
    Ok(format!("min slack {worst:.2e}; fault detected with slack {:.2e}", r.min_slack))
}

fn g_side() -> Outcome {
    let mut worst = f64::INFINITY;
    let mut margin = f64::INFINITY;
    for spec in specs_for_monte_carlo() {
        let (at, nu, _) = pipeline(&spec);
        let r = verify_g_inequality(&nu, &spec, 10_000, 4, 2).map_err(|e| e.to_string())?;
        let m = r.sum_interpolation.min_slack.min(r.modified.min_slack);
        ensure(m >= -1e-8, format!("gamma={}: min slack {m:.2e}", spec.gamma))?;
        worst = worst.min(m);
        if at != spec {
            let s = strengthening_comparison(&nu, &spec, &at, 10_000, 4, 2).map_err(|e| e.to_string())?;
            ensure(s.pass, format!("gamma={}: strengthening margin {:.2e}", spec.gamma, s.min_margin))?;
            margin = margin.min(s.min_margin);
        }
    }
    let spec = ProblemSpec::optimal(5, 0.1, 1.0).unwrap();
    let (_, mut nu, _) = pipeline(&spec);
    let w = 0.5 * nu.entries[(5, 4)];
    nu.entries[(5, 4)] -= w;
    nu.entries[(4, 5)] -= w;
    let r = verify_g_inequality(&nu, &spec, 1000, 4, 2).map_err(|e| e.to_string())?;
    ensure(!r.pass(), "fault-injected nu was not detected")?;
    Ok(format!("min slack {worst:.2e}, min strengthening margin {margin:.2e}; fault detected"))
}

fn tightness() -> Outcome {
    let mut worst = 0.0_f64;
    for n in [1, 3, 8] {
        for gl in [0.3, 0.8, 1.0, 1.3, 1.7] {
            let s = tightness_summary(n, gl, 1.0).map_err(|e| e.to_string())?;
            let huber = 1.0 / (2.0 * (2.0 * n as f64 * gl + 1.0));
            let quad = 0.5 * (1.0 - gl).powi(2 * n as i32);
            let e1 = (s.huber_criterion - huber).abs() / huber;
            let e2 = (s.quadratic_criterion - quad).abs() / quad;
            let e3 = (s.ratio - 1.0).abs();
            let e = e1.max(e2).max(e3);
            ensure(e <= 1e-9, format!("N={n} gamma={gl}: rel err {e:.2e}"))?;
            worst = worst.max(e);
        }
    }
    Ok(format!("max rel err {worst:.2e}"))
}

fn property_suites() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut rt = 0.0_f64;
    for _ in 0..100 {
        let n = rng.random_range(1..10);
        let mut a: Vec<f64> = (0..n).map(|_| 1.0 + 9.0 * rng.random::<f64>()).collect();
        a.sort_by(f64::total_cmp);
        let from_nu = a_from_restricted_nu(&restricted_nu_from_a(&a)).map_err(|e| e.to_string())?;
        let from_lam = a_from_restricted_lambda(&restricted_lambda_from_a(&a)).map_err(|e| e.to_string())?;
        for ((x, y), z) in a.iter().zip(&from_nu).zip(&from_lam) {
            rt = rt.max((x - y).abs() / x).max((x - z).abs() / x);
        }
    }
    ensure(rt <= 1e-12, format!("round trip rel err {rt:.2e}"))?;

    let spec = ProblemSpec::optimal(5, 0.1, 1.0).unwrap();
    let (_, nu, lam) = pipeline(&spec);
    ensure(dual_map_equivalence(&nu, &lam, 100, 3, 4).map_err(|e| e.to_string())?, "dual maps disagree")?;

    let mut tables = 0;
    for n in 1..=15 {
        for k in KAPPAS {
            let mut specs: Vec<ProblemSpec> = STEPS.iter().map(|&g| ProblemSpec::new(n, k, 1.0, g).unwrap()).collect();
            specs.push(ProblemSpec::optimal(n, k, 1.0).unwrap());
            for spec in specs {
                let d = check_lambda(&pipeline(&spec).2);
                ensure(d.pass && d.grimmer_ok, format!("N={n} kappa={k} gamma={}: {d:?}", spec.gamma))?;
                tables += 1;
            }
            let opt = ProblemSpec::optimal(n, k, 1.0).unwrap();
            let sr = sign_report(n, opt.rho(), opt.eta()).map_err(|e| e.to_string())?;
            ensure(sr.pass, format!("sign facts fail at N={n} kappa={k}"))?;
        }
    }

    let mut combos = 0;
    for rho in [-0.9, -0.6, -0.3, -0.05] {
        for eta in [0.3, 0.9, 1.0, 1.1, 2.5] {
            let n = 1.0 + (combos % 7) as f64;
            ensure(
                check_psi_convexity(rho, eta, n, 200).map_err(|e| e.to_string())?,
                format!("psi not convex at rho={rho} eta={eta} N={n}"),
            )?;
            combos += 1;
        }
    }
    Ok(format!(
        "round trip {rt:.1e}; dual maps agree; {tables} tables pass ratio checks; {combos} psi combos convex; sign facts hold"
    ))
}

fn stress() -> Outcome {
    let mut worst = 0.0_f64;
    for (n, k, gl) in [(5, 0.1, None), (3, 0.0, Some(1.0)), (8, 0.3, Some(0.6)), (4, 0.2, Some(1.9))] {
        let spec = match gl {
            Some(g) => ProblemSpec::new(n, k, 1.0, g).unwrap(),
            None => ProblemSpec::optimal(n, k, 1.0).unwrap(),
        };
        let r = stress_random_quadratics(&spec, 1000, 4, 3).map_err(|e| e.to_string())?;
        ensure(r.pass, format!("{r:?}"))?;
        worst = worst.max(r.max_f_ratio).max(r.max_g_ratio);
    }
    Ok(format!("max criterion/bound = {worst:.6}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("golden lambda table", 1, golden_lambda),
        ("rate closed forms", 1, rate_closed_forms),
        ("optimal stepsize", 1, optimal_stepsize),
        ("certificate PSD sweep", 30, psd_sweep),
        ("closed-form decomposition", 5, decomposition),
        ("F-side Monte Carlo", 10, f_side),
        ("G-side Monte Carlo", 10, g_side),
        ("tightness at mu = 0", 5, tightness),
        ("property suites", 20, property_suites),
        ("upper-bound stress", 10, stress),
    ];
    let mut failed = 0;
    for (k, (name, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        let in_time = took <= Duration::from_secs(*limit);
        let (ok, detail) = match outcome {
            Ok(d) => (in_time, d),
            Err(d) => (false, d),
        };
        let timing = format!("{:.2}s of {limit}s", took.as_secs_f64());
        println!(
            "[{}] criterion {} {name}: {detail} ({timing}{})",
            if ok { "PASS" } else { "FAIL" },
            k + 1,
            if in_time { "" } else { ", over time" }
        );
        if !ok {
            failed += 1;
        }
    }
    println!("{} of 10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
