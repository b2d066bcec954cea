//! Command-line front end. Exit status: 0 success, 1 a check failed,
//! 2 usage or parameter error.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use nalgebra::DMatrix;
use serde_json::Value;

use crate::certificate::{build_s, Certificate, MethodMatrix};
use crate::error::{CertError, Result};
use crate::format::{self, num, object, to_value};
use crate::gdlab::{
    huber_tight_instance, random_quadratic_instance, run_gd, stress_random_quadratics, tightness_summary,
    BOUND_TOL,
};
use crate::lambda::{
    check_lambda, dual_map_residual, lower_bound_margins, nu_to_lambda, nu_to_lambda_via_m_inverse,
    LambdaMultipliers, DUAL_MAP_TOL,
};
use crate::nu::{build_nu, sign_report, NuMultipliers};
use crate::psd::max_abs;
use crate::rates::{effective_spec, eval_t, gamma_star, tau, EffectiveParameters, Moved, ProblemSpec};
use crate::verifier::{
    check_prop_trivial, check_psi_convexity, strengthening_comparison, tau_min_identity_error,
    verify_f_inequality, verify_g_inequality, DEFAULT_DIMENSION,
};

/// Directory used for output files when `--output` is not given.
pub const OUTPUT_DIR_VAR: &str = "GDCERT_OUTPUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "gdcert", version, about = "Worst-case rates and certificates for gradient descent")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Rate τ, active branch and both criterion coefficients
    Rate(RunConfig),
    /// Optimal stepsize γ*
    GammaStar(RunConfig),
    /// Certificate document with every verdict
    Certificate(CertificateArgs),
    /// λ multipliers with diagnostics
    Lambda(RunConfig),
    /// Monte-Carlo inequality suites and proposition checks
    Verify(RunConfig),
    /// Gradient descent on tight instances and random quadratics
    Simulate(RunConfig),
    /// λ table as a grid or CSV
    Table(RunConfig),
}

#[derive(Args, Debug, Clone)]
pub struct RunConfig {
    /// Number of steps
    #[arg(long = "N")]
    pub n: usize,
    /// Strong convexity parameter
    #[arg(long, allow_negative_numbers = true)]
    pub mu: f64,
    /// Smoothness parameter
    #[arg(long = "L", allow_negative_numbers = true)]
    pub l: f64,
    /// Stepsize; defaults to γ*
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    #[arg(long, default_value_t = DEFAULT_DIMENSION)]
    pub dimension: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file; without it, output goes to $GDCERT_OUTPUT_DIR/<command>.<ext> if set, else stdout
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
}

#[derive(Args, Debug, Clone)]
pub struct CertificateArgs {
    #[command(flatten)]
    pub cfg: RunConfig,
    /// Corrupt ν with a flow-preserving 2-cycle before building S
    #[arg(long, hide = true)]
    pub inject_fault: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
    Pretty,
}

impl OutputFormat {
    fn extension(self) -> &'static str {
        match self {
            Self::Json => "json",
            Self::Csv => "csv",
            Self::Pretty => "txt",
        }
    }
}

/// Rendered command output and whether every check passed.
struct Outcome {
    text: String,
    ok: bool,
}

/// Parses `args` and runs the command, returning the exit status.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let _ = e.print();
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> i32 {
    let (cfg, name, default) = match &cli.command {
        Command::Rate(c) => (c, "rate", OutputFormat::Pretty),
        Command::GammaStar(c) => (c, "gamma-star", OutputFormat::Pretty),
        Command::Certificate(c) => (&c.cfg, "certificate", OutputFormat::Json),
        Command::Lambda(c) => (c, "lambda", OutputFormat::Json),
        Command::Verify(c) => (c, "verify", OutputFormat::Pretty),
        Command::Simulate(c) => (c, "simulate", OutputFormat::Pretty),
        Command::Table(c) => (c, "table", OutputFormat::Pretty),
    };
    let fmt = cfg.format.unwrap_or(default);
    let result = resolve(cfg).and_then(|spec| match &cli.command {
        Command::Rate(_) => cmd_rate(&spec, fmt),
        Command::GammaStar(_) => cmd_gamma_star(&spec, fmt),
        Command::Certificate(c) => cmd_certificate(&spec, cfg, c.inject_fault, fmt),
        Command::Lambda(_) | Command::Table(_) => cmd_lambda(&spec, fmt),
        Command::Verify(_) => cmd_verify(&spec, cfg, fmt),
        Command::Simulate(_) => cmd_simulate(&spec, cfg, fmt),
    });
    match result {
        Ok(out) => match emit(cfg, name, fmt, &out.text) {
            Ok(()) if out.ok => EXIT_OK,
            Ok(()) => EXIT_FAILED,
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_FAILED
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CertError::InvalidSpec(_) => EXIT_USAGE,
                _ => EXIT_FAILED,
            }
        }
    }
}

fn emit(cfg: &RunConfig, name: &str, fmt: OutputFormat, text: &str) -> std::io::Result<()> {
    let path = cfg.output.clone().or_else(|| {
        std::env::var_os(OUTPUT_DIR_VAR).map(|d| PathBuf::from(d).join(format!("{name}.{}", fmt.extension())))
    });
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(&p, text)?;
            eprintln!("wrote {}", p.display());
            Ok(())
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Validates parameters; a missing stepsize becomes γ*.
fn resolve(cfg: &RunConfig) -> Result<ProblemSpec> {
    if cfg.mu.is_nan() || cfg.mu < 0.0 {
        return Err(CertError::InvalidSpec(format!("mu = {} must be >= 0", cfg.mu)));
    }
    if cfg.dimension == 0 {
        return Err(CertError::InvalidSpec("dimension must be positive".into()));
    }
    let spec = match cfg.gamma {
        Some(g) => ProblemSpec::new(cfg.n, cfg.mu, cfg.l, g)?,
        None => ProblemSpec::optimal(cfg.n, cfg.mu, cfg.l)?,
    };
    info!("resolved {spec:?}");
    Ok(spec)
}

fn spec_line(spec: &ProblemSpec) -> String {
    format!("N = {}, mu = {}, L = {}, gamma = {}", spec.n, spec.mu, spec.l, spec.gamma)
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn cmd_rate(spec: &ProblemSpec, fmt: OutputFormat) -> Result<Outcome> {
    let r = tau(spec)?;
    let text = match fmt {
        OutputFormat::Json => format::pretty(&object(vec![
            ("spec", to_value(spec)),
            ("tau", num(r.tau)),
            ("branch", to_value(&r.branch)),
            ("eta_term", num(r.eta_term)),
            ("rho_term", num(r.rho_term)),
            ("objective_coefficient", num(r.objective_coefficient())),
            ("gradient_coefficient", num(r.gradient_coefficient())),
            ("gamma_star", num(r.gamma_star)),
        ])),
        OutputFormat::Csv => format!(
            "N,mu,L,gamma,tau,branch,objective_coefficient,gradient_coefficient,gamma_star\n{},{},{},{},{},{},{},{},{}\n",
            spec.n,
            format::sig17(spec.mu),
            format::sig17(spec.l),
            format::sig17(spec.gamma),
            format::sig17(r.tau),
            to_value(&r.branch).as_str().unwrap_or_default(),
            format::sig17(r.objective_coefficient()),
            format::sig17(r.gradient_coefficient()),
            format::sig17(r.gamma_star),
        ),
        OutputFormat::Pretty => {
            let mut s = String::new();
            writeln!(s, "{}", spec_line(spec)).unwrap();
            writeln!(s, "tau = {} ({})", r.tau, to_value(&r.branch).as_str().unwrap_or_default()).unwrap();
            writeln!(s, "f(x_N) - f_* <= {} * ||x_0 - x_*||^2", r.objective_coefficient()).unwrap();
            writeln!(s, "||grad f(x_N)||^2 <= {} * (f(x_0) - f_*)", r.gradient_coefficient()).unwrap();
            writeln!(s, "gamma* = {} (gamma* L = {})", r.gamma_star, r.gamma_star * spec.l).unwrap();
            s
        }
    };
    Ok(Outcome { text, ok: true })
}

fn cmd_gamma_star(spec: &ProblemSpec, fmt: OutputFormat) -> Result<Outcome> {
    let g = gamma_star(spec.n, spec.mu, spec.l)?;
    let at = ProblemSpec::new(spec.n, spec.mu, spec.l, g)?;
    let t = eval_t(spec.n, at.rho(), at.eta())?.finite().unwrap_or(f64::NAN);
    let text = match fmt {
        OutputFormat::Json => format::pretty(&object(vec![
            ("N", Value::from(spec.n)),
            ("mu", num(spec.mu)),
            ("L", num(spec.l)),
            ("gamma_star", num(g)),
            ("gamma_star_times_L", num(g * spec.l)),
            ("rho", num(at.rho())),
            ("eta", num(at.eta())),
            ("t_n", num(t)),
        ])),
        OutputFormat::Csv => format!(
            "N,mu,L,gamma_star,rho,eta,t_n\n{},{},{},{},{},{},{}\n",
            spec.n,
            format::sig17(spec.mu),
            format::sig17(spec.l),
            format::sig17(g),
            format::sig17(at.rho()),
            format::sig17(at.eta()),
            format::sig17(t),
        ),
        OutputFormat::Pretty => format!(
            "gamma* = {g} (gamma* L = {}, rho = {}, eta = {})\n",
            g * spec.l,
            at.rho(),
            at.eta()
        ),
    };
    Ok(Outcome { text, ok: true })
}

/// Multipliers built at the effective parameters, optionally corrupted.
fn pipeline_nu(spec: &ProblemSpec, inject_fault: bool) -> Result<(EffectiveParameters, ProblemSpec, NuMultipliers)> {
    let (eff, at) = effective_spec(spec)?;
    let mut nu = build_nu(at.n, at.rho(), at.eta())?;
    if inject_fault {
        let n = nu.n;
        let w = 0.5 * nu.entries[(n, n - 1)];
        nu.entries[(n, n - 1)] -= w;
        nu.entries[(n - 1, n)] -= w;
        log::warn!("injected a 2-cycle of weight {w} into nu");
    }
    Ok((eff, at, nu))
}

fn lambda_display(lam: &LambdaMultipliers) -> (Vec<String>, DMatrix<f64>) {
    let order = lam.display_order();
    let m = DMatrix::from_fn(order.len(), order.len(), |i, j| lam.get(order[i].1, order[j].1));
    (order.into_iter().map(|(l, _)| l).collect(), m)
}

fn error_value(e: &CertError) -> Value {
    object(vec![("error", Value::from(e.to_string())), ("pass", Value::from(false))])
}

fn passed(v: &Value) -> bool {
    v.get("pass").and_then(Value::as_bool).unwrap_or(false)
}

fn with_pass<T: serde::Serialize>(t: &T, pass: bool) -> Value {
    let mut v = to_value(t);
    if let Value::Object(m) = &mut v {
        m.insert("pass".into(), Value::from(pass));
    }
    v
}

fn certificate_core(cert: &Certificate) -> Vec<(&'static str, Value)> {
    let decomposition = match (&cert.decomposition, cert.decomposition_error) {
        (Some(d), Some(err)) => object(vec![
            ("scale", num(d.scale)),
            ("min_delta", num(d.min_delta())),
            ("reconstruction_error", num(err)),
            ("pass", Value::from(cert.decomposition_ok())),
        ]),
        _ => Value::Null,
    };
    vec![
        ("spec", to_value(&cert.spec)),
        ("eff", to_value(&cert.eff)),
        ("tau_true", num(cert.rate.tau)),
        ("tau_eff", num(cert.tau_eff)),
        ("nu_entries", format::matrix(&cert.nu.entries)),
        ("S_sym", format::matrix(&cert.s_sym)),
        ("min_eig", num(cert.min_eig())),
        ("psd", Value::from(cert.psd())),
        (
            "delta",
            cert.decomposition.as_ref().map_or(Value::Null, |d| format::vector(&d.delta)),
        ),
        ("decomposition", decomposition),
    ]
}

fn cmd_certificate(spec: &ProblemSpec, cfg: &RunConfig, inject_fault: bool, fmt: OutputFormat) -> Result<Outcome> {
    if inject_fault && spec.n < 1 {
        return Err(CertError::InvalidSpec("fault injection needs N >= 1".into()));
    }
    let (eff, at, nu) = pipeline_nu(spec, inject_fault)?;
    let cert = build_s(spec, &eff, nu)?;
    let (d, trials, seed) = (cfg.dimension, cfg.trials, cfg.seed);

    let lam = nu_to_lambda(&cert.nu);
    let lambda_check = match &lam {
        Ok(l) => {
            let c = check_lambda(l);
            with_pass(&c, c.pass)
        }
        Err(e) => error_value(e),
    };
    let h = MethodMatrix::gradient_descent(spec.n, spec.gamma * spec.l);
    let f_report = match lam.as_ref().map_err(Clone::clone).and_then(|l| verify_f_inequality(l, spec, &h, trials, d, seed)) {
        Ok(r) => to_value(&r),
        Err(e) => error_value(&e),
    };
    let g_report = match verify_g_inequality(&cert.nu, spec, trials, d, seed) {
        Ok(r) => with_pass(&r, r.pass()),
        Err(e) => error_value(&e),
    };
    let strengthening = if eff.which_moved == Moved::None {
        Value::Null
    } else {
        match strengthening_comparison(&cert.nu, spec, &at, trials, d, seed) {
            Ok(r) => to_value(&r),
            Err(e) => error_value(&e),
        }
    };
    let tightness = if spec.mu == 0.0 {
        let t = tightness_summary(spec.n, spec.gamma, spec.l)?;
        with_pass(&t, t.attained)
    } else {
        Value::Null
    };

    let nu_check = with_pass(&cert.nu_check, cert.nu_check.pass);
    let eigen = with_pass(&cert.eigen, cert.eigen.psd);
    let optional_ok = |v: &Value| v.is_null() || passed(v);
    let ok = cert.nu_check.pass
        && cert.psd()
        && cert.factorization_psd
        && (cert.decomposition.is_none() || cert.decomposition_ok())
        && passed(&lambda_check)
        && passed(&f_report)
        && passed(&g_report)
        && optional_ok(&strengthening)
        && optional_ok(&tightness);

    let mut fields = certificate_core(&cert);
    fields.insert(0, ("fault_injected", Value::from(inject_fault)));
    fields.push((
        "verdicts",
        object(vec![
            ("nu_check", nu_check),
            ("psd_eigen", eigen),
            ("psd_factorization", Value::from(cert.factorization_psd)),
            ("lambda_check", lambda_check),
            ("f_inequality", f_report),
            ("g_inequality", g_report),
            ("strengthening", strengthening),
            ("tightness", tightness),
            ("all_pass", Value::from(ok)),
        ]),
    ));
    let doc = object(fields);
    let n = cert.s_sym.nrows();
    let labels: Vec<String> = (0..n).map(|k| k.to_string()).collect();
    let text = match fmt {
        OutputFormat::Json => format::pretty(&doc),
        OutputFormat::Csv => format::labeled_csv("S_sym", &labels, &cert.s_sym),
        OutputFormat::Pretty => {
            let mut s = String::new();
            writeln!(s, "{}", spec_line(spec)).unwrap();
            writeln!(s, "tau = {}, tau_eff = {}, moved = {:?}", cert.rate.tau, cert.tau_eff, eff.which_moved).unwrap();
            writeln!(s, "min eigenvalue of S_sym = {:e} (|S_sym|_max = {:e})", cert.min_eig(), max_abs(&cert.s_sym)).unwrap();
            writeln!(s, "S_sym:").unwrap();
            s.push_str(&format::grid(&labels, &cert.s_sym));
            writeln!(s, "[{}] overall", verdict(ok)).unwrap();
            s
        }
    };
    Ok(Outcome { text, ok })
}

fn cmd_lambda(spec: &ProblemSpec, fmt: OutputFormat) -> Result<Outcome> {
    let (eff, _, nu) = pipeline_nu(spec, false)?;
    let lam = nu_to_lambda(&nu)?;
    let diag = check_lambda(&lam);
    let (labels, m) = lambda_display(&lam);
    let text = match fmt {
        OutputFormat::Pretty => format::grid(&labels, &m),
        OutputFormat::Csv => format::labeled_csv("lambda", &labels, &m),
        OutputFormat::Json => {
            let alt = nu_to_lambda_via_m_inverse(&nu)?;
            let bounds = lower_bound_margins(&nu, &lam)?;
            format::pretty(&object(vec![
                ("spec", to_value(spec)),
                ("eff", to_value(&eff)),
                ("labels", Value::from(labels)),
                ("lambda", format::matrix(&m)),
                ("diagnostics", with_pass(&diag, diag.pass)),
                ("lower_bounds", to_value(&bounds)),
                ("m_inverse_max_difference", num(max_abs(&(&lam.entries - &alt.entries)))),
            ]))
        }
    };
    Ok(Outcome { text, ok: diag.pass })
}

fn cmd_verify(spec: &ProblemSpec, cfg: &RunConfig, fmt: OutputFormat) -> Result<Outcome> {
    let (eff, at, nu) = pipeline_nu(spec, false)?;
    let (d, trials, seed) = (cfg.dimension, cfg.trials, cfg.seed);
    let lam = nu_to_lambda(&nu)?;
    let h = MethodMatrix::gradient_descent(spec.n, spec.gamma * spec.l);
    let mut suites: Vec<(&str, Value, String)> = Vec::new();

    let c = crate::nu::check_nu(&nu);
    suites.push(("nu_check", with_pass(&c, c.pass), format!("max flow residual {:e}", c.max_flow_residual)));
    let c = check_lambda(&lam);
    suites.push(("lambda_check", with_pass(&c, c.pass), format!("min entry {:e}", c.min_entry)));
    let c = sign_report(at.n, at.rho(), at.eta())?;
    suites.push(("sign_facts", with_pass(&c, c.pass), format!("min T_k {:e}", c.min_t)));
    let r = verify_f_inequality(&lam, spec, &h, trials, d, seed)?;
    suites.push(("f_inequality", to_value(&r), format!("min slack {:e}", r.min_slack)));
    let r = verify_g_inequality(&nu, spec, trials, d, seed)?;
    let line = format!(
        "min slacks {:e} / {:e}",
        r.sum_interpolation.min_slack, r.modified.min_slack
    );
    suites.push(("g_inequality", with_pass(&r, r.pass()), line));
    if eff.which_moved != Moved::None {
        let r = strengthening_comparison(&nu, spec, &at, trials, d, seed)?;
        suites.push(("strengthening", to_value(&r), format!("min margin {:e}", r.min_margin)));
    }
    let r = check_prop_trivial(spec.l, trials, d, seed);
    suites.push(("prop_trivial", to_value(&r), format!("min slack {:e}", r.min_slack)));
    let err = tau_min_identity_error(spec)?;
    suites.push((
        "tau_min_identity",
        object(vec![("relative_error", num(err)), ("pass", Value::from(err <= 1e-12))]),
        format!("relative error {err:e}"),
    ));
    let (rho, eta) = (at.rho(), at.eta());
    if rho > -1.0 && rho < 0.0 && eta > 0.0 {
        let ok = check_psi_convexity(rho, eta, spec.n as f64, 200)?;
        suites.push(("psi_convexity", object(vec![("pass", Value::from(ok))]), "200-point grid".into()));
    }
    let dual_trials = trials.min(100);
    let res = dual_map_residual(&nu, &lam, dual_trials, 3, seed)?;
    suites.push((
        "dual_map",
        object(vec![
            ("trials", Value::from(dual_trials)),
            ("max_residual", num(res)),
            ("pass", Value::from(res <= DUAL_MAP_TOL)),
        ]),
        format!("max residual {res:e}"),
    ));

    let ok = suites.iter().all(|(_, v, _)| passed(v));
    let text = match fmt {
        OutputFormat::Json => {
            let mut fields = vec![("spec", to_value(spec)), ("eff", to_value(&eff))];
            fields.extend(suites.iter().map(|(k, v, _)| (*k, v.clone())));
            fields.push(("all_pass", Value::from(ok)));
            format::pretty(&object(fields))
        }
        OutputFormat::Csv => {
            let mut s = String::from("suite,pass,summary\n");
            for (k, v, line) in &suites {
                writeln!(s, "{k},{},{line}", passed(v)).unwrap();
            }
            s
        }
        OutputFormat::Pretty => {
            let mut s = format!("{} (trials = {trials}, d = {d}, seed = {seed})\n", spec_line(spec));
            for (k, v, line) in &suites {
                writeln!(s, "[{}] {k}: {line}", verdict(passed(v))).unwrap();
            }
            s
        }
    };
    Ok(Outcome { text, ok })
}

fn cmd_simulate(spec: &ProblemSpec, cfg: &RunConfig, fmt: OutputFormat) -> Result<Outcome> {
    let tight = if spec.mu == 0.0 {
        Some(tightness_summary(spec.n, spec.gamma, spec.l)?)
    } else {
        None
    };
    let stress = stress_random_quadratics(spec, cfg.trials, cfg.dimension, cfg.seed)?;
    let rate = tau(spec)?;
    // classical bound 2L/(N+4) at γ = 1/L, μ = 0
    let baseline = tight
        .filter(|_| (spec.gamma * spec.l - 1.0).abs() <= 1e-15)
        .map(|t| {
            let b = 2.0 * spec.l / (spec.n as f64 + 4.0);
            (b, t.huber_criterion.max(t.quadratic_criterion) <= b * (1.0 + BOUND_TOL))
        });
    let ok = stress.pass && tight.is_none_or(|t| t.attained) && baseline.is_none_or(|b| b.1);

    let text = match fmt {
        OutputFormat::Csv => {
            let (oracle, x0) = if spec.mu == 0.0 {
                (huber_tight_instance(spec.n, spec.gamma, spec.l, 1.0)?, nalgebra::DVector::from_element(1, 1.0))
            } else {
                let f = random_quadratic_instance(spec.mu, spec.l, cfg.dimension, cfg.seed)?;
                let x0 = &f.minimizer + nalgebra::DVector::from_element(cfg.dimension, 1.0);
                (f, x0)
            };
            run_gd(&oracle, &x0, spec.gamma, spec.n)?.to_csv()
        }
        OutputFormat::Json => format::pretty(&object(vec![
            ("spec", to_value(spec)),
            ("tau", num(rate.tau)),
            ("tightness", tight.as_ref().map_or(Value::Null, to_value)),
            ("stress", to_value(&stress)),
            (
                "baseline",
                baseline.map_or(Value::Null, |(b, pass)| {
                    object(vec![("bound", num(b)), ("pass", Value::from(pass))])
                }),
            ),
            ("all_pass", Value::from(ok)),
        ])),
        OutputFormat::Pretty => {
            let mut s = format!("{}\n", spec_line(spec));
            match &tight {
                Some(t) => {
                    writeln!(s, "huber criterion_f = {}, quadratic criterion_f = {}", t.huber_criterion, t.quadratic_criterion).unwrap();
                    writeln!(s, "[{}] tightness: max ratio / bound = {:.12}", verdict(t.attained), t.ratio).unwrap();
                }
                None => writeln!(s, "[n/a] tightness: n/a (mu>0)").unwrap(),
            }
            if let Some((b, pass)) = baseline {
                writeln!(s, "[{}] classical bound 2L/(N+4) = {b}", verdict(pass)).unwrap();
            }
            writeln!(
                s,
                "[{}] {} random quadratics: max criterion_f/bound = {:.6}, max criterion_g/bound = {:.6}, max distance ratio = {:.6}",
                verdict(stress.pass),
                stress.instances,
                stress.max_f_ratio,
                stress.max_g_ratio,
                stress.max_distance_ratio
            )
            .unwrap();
            s
        }
    };
    Ok(Outcome { text, ok })
}
