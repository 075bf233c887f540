use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use dnls_core::decay::{
    fit_rate, log_space, lower_bound_cert, upper_bound_cert, Abscissa, Bump, DecayCurve, RateModel, ThetaProfile,
    ThetaShape,
};
use dnls_core::nonlinearity::{classify as classify_nu, DissipativityClass, NuPolynomial, DEFAULT_TOL};
use dnls_core::ode::OdeConfig;
use dnls_core::profile::{
    bracket_sq, log_time_grid, run_lemma21_harness, uniform_grid, Lemma21Params, RemainderSpec,
    ThetaFamily, TimeCoord,
};
use dnls_core::solver::{run_experiment, DtChoice, RunConfig, Schedule};
use dnls_core::CubicNonlinearity;

use crate::config::{initial_data, read_text, ExperimentConfig};
use crate::error::CliError;
use crate::output::{alpha_table, create_dir, diagnostics_table, profile_from_table, read_json, write_json};
use crate::pipeline::{run_pipeline, ClassifySummary, ComparisonReport};
use crate::plots::emit_plots;
use crate::table::Table;
use crate::GlobalArgs;

/// Writes `table` to `<out>/<name>` and prints the verdict, or prints the CSV
/// to stdout and the verdict to stderr when there is no output directory.
fn emit(table: &Table, out: Option<&Path>, name: &str, verdict: &str) -> Result<(), CliError> {
    match out {
        Some(dir) => {
            create_dir(dir)?;
            table.write(&dir.join(name))?;
            println!("{verdict}");
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(table.to_csv().as_bytes())
                .map_err(|e| CliError::io("<stdout>", e))?;
            eprintln!("{verdict}");
        }
    }
    Ok(())
}

fn parse_triple(text: &str, what: &str) -> Result<(f64, f64, usize), CliError> {
    let bad = || CliError::Invalid(format!("{what}: expected `min:max:n`, got `{text}`"));
    let parts: Vec<&str> = text.split(':').map(str::trim).collect();
    let [a, b, n] = parts.as_slice() else { return Err(bad()) };
    let (a, b): (f64, f64) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
    let n: usize = n.parse().map_err(|_| bad())?;
    if !(b > a) || n < 2 {
        return Err(bad());
    }
    Ok((a, b, n))
}

fn parse_window(text: &str) -> Result<(f64, f64), CliError> {
    let bad = || CliError::Invalid(format!("--window: expected `lo:hi`, got `{text}`"));
    let (lo, hi) = text.split_once(':').ok_or_else(bad)?;
    let (lo, hi): (f64, f64) = (lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?);
    if !(hi > lo) {
        return Err(bad());
    }
    Ok((lo, hi))
}

// ---------------------------------------------------------------- classify

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Coefficient file with `key = re,im` lines (a1..a3, b1..b3, c1..c5, lambda1..lambda6).
    #[arg(required_unless_present = "nu")]
    pub coeffs: Option<PathBuf>,
    /// Inline symbol `c0;c1;c2;c3` (complex `re,im` coefficients of ξ^k) instead of a file.
    #[arg(long, conflicts_with = "coeffs", allow_hyphen_values = true)]
    pub nu: Option<String>,
    #[arg(long)]
    pub json: bool,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
}

pub fn classify(a: &ClassifyArgs, _g: &GlobalArgs) -> Result<(), CliError> {
    let nu = match (&a.coeffs, &a.nu) {
        (_, Some(inline)) => inline.parse::<NuPolynomial>()?,
        (Some(path), None) => CubicNonlinearity::parse_coefficients(&read_text(path)?)?.nu(),
        (None, None) => unreachable!("clap requires one of the inputs"),
    };
    let report = classify_nu(&nu, a.tol)?;
    if a.json {
        let summary = ClassifySummary {
            nu: nu.to_string(),
            coefficients: nu,
            report,
        };
        println!("{}", serde_json::to_string_pretty(&summary).expect("serializable"));
        return Ok(());
    }
    println!("nu(ξ) = {nu}");
    println!("class: {}", report.class);
    let show = |name: &str, v: Option<f64>| {
        if let Some(v) = v {
            println!("{name} = {v:e}");
        }
    };
    show("c0", report.c0);
    show("xi0", report.xi0);
    show("sup_im_nu", report.sup_im_nu);
    show("best_c_star", report.best_c_star);
    println!("tolerance = {:e} (scale {:e})", report.tolerance_used, report.scale);
    if report.class == DissipativityClass::DissipativeNonStrict {
        println!("note: no cubic symbol lands here in exact arithmetic; the input sits on a tolerance edge or is synthetic");
    }
    Ok(())
}

// ----------------------------------------------------------------- profile

#[derive(Debug, Args)]
pub struct ProfileArgs {
    /// Inline `c0;c1;c2;c3` or a coefficient file.
    #[arg(long, allow_hyphen_values = true)]
    pub mu: String,
    /// `gaussian`, `lorentzian`, or a CSV file with columns xi,re,im.
    #[arg(long, default_value = "gaussian")]
    pub theta0: String,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.2)]
    pub kappa: f64,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    #[arg(long, default_value_t = 1e6)]
    pub tmax: f64,
    #[arg(long, default_value = "-6:6:49", allow_hyphen_values = true)]
    pub xi_grid: String,
    /// Number of log-spaced output times on [1, tmax].
    #[arg(long, default_value_t = 61)]
    pub t_count: usize,
    /// End time of the (P, Q) run used for the asymptotic data.
    #[arg(long, default_value_t = 1e10)]
    pub t_extend: f64,
    /// Amplitude of ρ = amp·e^{iωt}/(⟨ξ⟩² t^{1+κ}); defaults to eps³.
    #[arg(long)]
    pub rho_amp: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub omega: f64,
}

fn mu_from(text: &str) -> Result<NuPolynomial, CliError> {
    let path = Path::new(text);
    if path.is_file() {
        Ok(CubicNonlinearity::parse_coefficients(&read_text(path)?)?.nu())
    } else {
        Ok(text.parse()?)
    }
}

pub fn profile(a: &ProfileArgs, g: &GlobalArgs) -> Result<(), CliError> {
    let mu = mu_from(&a.mu)?;
    let (lo, hi, n) = parse_triple(&a.xi_grid, "--xi-grid")?;
    let grid = uniform_grid(lo, hi, n);
    let theta0 = match a.theta0.as_str() {
        "gaussian" => ThetaFamily::Gaussian.field(a.eps, grid),
        "lorentzian" => ThetaFamily::Lorentzian.field(a.eps, grid),
        file => {
            let t = Table::read(Path::new(file))?;
            profile_from_table(&t, file, f64::INFINITY, TimeCoord::T(1.0))?.with_envelope(a.eps)
        }
    };
    let rho = RemainderSpec::oscillating(a.kappa, a.rho_amp.unwrap_or(a.eps.powi(3)), a.omega)?;
    if !(a.tmax > 1.0) || a.t_count < 2 {
        return Err(CliError::Invalid("--tmax must exceed 1 and --t-count must be >= 2".into()));
    }
    let params = Lemma21Params {
        eps: a.eps,
        kappa: a.kappa,
        delta: a.delta,
        window: (a.tmax.sqrt().min(1e2), a.tmax),
    };
    let ts = log_time_grid(a.tmax, a.t_count);
    let out = run_lemma21_harness(&theta0, &mu, &rho, &ts, a.t_extend, &params, &OdeConfig::default())?;

    let mut table = Table::new(&["t", "xi", "re_beta", "im_beta", "abs_A", "weighted_err"]);
    let decay = a.kappa - a.delta;
    for (beta, amod) in out.beta_run.iter().zip(&out.a_run) {
        let t = beta.time.t();
        for k in 0..beta.len() {
            let xi = beta.xi_grid[k];
            let (b, av) = (beta.values[k], amod.values[k]);
            let w = bracket_sq(xi) * t.powf(decay) * (b - av).norm() / a.eps.powi(3);
            table.push(vec![t, xi, b.re, b.im, av.norm(), w]);
        }
    }
    let r = &out.report;
    let verdict = format!(
        "profile: {} | sup W = {:.6e}, log-log slope {:.4}, late/early ratio {:.4}, max tail bound {:.3e} ({})",
        if r.bounded { "bounded" } else { "GROWING" },
        r.sup,
        r.trend_slope,
        r.growth_ratio,
        out.asymptotics.tail_bound.iter().fold(0.0_f64, |m, b| m.max(*b)),
        if out.asymptotics.tail_certified.iter().all(|c| *c) { "certified" } else { "not certified" }
    );
    emit(&table, g.out.as_deref(), "profile.csv", &verdict)?;
    if r.bounded {
        Ok(())
    } else {
        Err(CliError::Verdict("weighted profile error grows inside the window".into()))
    }
}

// ------------------------------------------------------------------- decay

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Cert {
    Upper,
    Lower,
    Both,
}

#[derive(Debug, Args)]
pub struct DecayArgs {
    /// `gaussian`, `constant`, `indicator`, or a CSV file (xi with abs2, or xi,re,im).
    #[arg(long, default_value = "gaussian")]
    pub theta: String,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub xi0: f64,
    /// Height of the built-in families.
    #[arg(long, default_value_t = 1.0)]
    pub height: f64,
    /// Gaussian width, or indicator half-width, centred at xi0.
    #[arg(long, default_value_t = 1.0)]
    pub width: f64,
    /// Half-width of the interval around xi0 used by the lower bound.
    #[arg(long, default_value_t = 0.5)]
    pub half_width: f64,
    /// Log-spaced τ values `a:b:n`.
    #[arg(long, default_value = "1:1e6:25")]
    pub taus: String,
    #[arg(long, value_enum, default_value_t = Cert::Both)]
    pub cert: Cert,
}

fn theta_profile(a: &DecayArgs) -> Result<ThetaProfile, CliError> {
    let shape = match a.theta.as_str() {
        "gaussian" => ThetaShape::Gaussian(Bump {
            amp: a.height,
            center: a.xi0,
            width: a.width,
        }),
        "constant" => ThetaShape::Constant { value: a.height },
        "indicator" => ThetaShape::Indicator {
            lo: a.xi0 - a.width,
            hi: a.xi0 + a.width,
            height: a.height,
        },
        file => {
            let t = Table::read(Path::new(file))?;
            let xi = t.require("xi", file)?;
            let abs2 = match t.column("abs2") {
                Some(v) => v,
                None => {
                    let (re, im) = (t.require("re", file)?, t.require("im", file)?);
                    re.iter().zip(&im).map(|(r, i)| r * r + i * i).collect()
                }
            };
            ThetaShape::Tabulated { xi, abs2 }
        }
    };
    Ok(ThetaProfile::new(shape, a.xi0)?)
}

pub fn decay(a: &DecayArgs, g: &GlobalArgs) -> Result<(), CliError> {
    let (lo, hi, n) = parse_triple(&a.taus, "--taus")?;
    let taus = log_space(lo, hi, n);
    let mut theta = theta_profile(a)?;
    let upper = matches!(a.cert, Cert::Upper | Cert::Both)
        .then(|| upper_bound_cert(&theta, &taus))
        .transpose()?;
    let lower = if matches!(a.cert, Cert::Lower | Cert::Both) {
        theta = theta.with_interval(a.xi0 - a.half_width, a.xi0 + a.half_width)?;
        Some(lower_bound_cert(&theta, &taus, None)?)
    } else {
        None
    };
    let s_values = match (&upper, &lower) {
        (Some(u), _) => u.s_values.clone(),
        (None, Some(l)) => l.s_values.clone(),
        (None, None) => unreachable!("at least one certificate runs"),
    };
    let mut table = Table::new(&["tau", "s", "sqrt_tau_s", "upper_ratio", "lower_ratio"]);
    for (k, (&tau, &s)) in taus.iter().zip(&s_values).enumerate() {
        let ur = upper.as_ref().and_then(|u| u.ratios[k]).unwrap_or(f64::NAN);
        let lr = lower.as_ref().map_or(f64::NAN, |l| l.ratios[k]);
        table.push(vec![tau, s, tau.sqrt() * s, ur, lr]);
    }
    let mut parts = Vec::new();
    if let Some(u) = &upper {
        let max = u.ratios.iter().flatten().fold(0.0_f64, |m, r| m.max(*r));
        parts.push(format!("upper bound S <= 4‖θ‖∞ τ^(-1/2) holds (max ratio {max:.4})"));
    }
    if let Some(l) = &lower {
        let min = l.ratios.iter().fold(f64::INFINITY, |m, r| m.min(*r));
        parts.push(format!("lower bound S >= C2 τ^(-1/2) holds (C2 = {:.6e}, min ratio {min:.4})", l.c2));
    }
    emit(&table, g.out.as_deref(), "decay.csv", &format!("decay: {}", parts.join("; ")))
}

// --------------------------------------------------------------------- fit

#[derive(Debug, Args)]
pub struct FitArgs {
    /// CSV with columns `t,value` (or `tau,value`).
    pub input: PathBuf,
    #[arg(long, default_value = "log_power", value_parser = clap::value_parser!(RateModel))]
    pub model: RateModel,
    /// Fit window `lo:hi` in τ = log t; defaults to τ >= 1.
    #[arg(long)]
    pub window: Option<String>,
    /// Expected exponent; a miss beyond --tol is a verdict failure.
    #[arg(long, allow_hyphen_values = true)]
    pub expect: Option<f64>,
    #[arg(long, default_value_t = 0.02)]
    pub tol: f64,
}

pub fn fit(a: &FitArgs, g: &GlobalArgs) -> Result<(), CliError> {
    let source = a.input.display().to_string();
    let t = Table::read(&a.input)?;
    let values = t.require("value", &source)?;
    let curve = match (t.column("t"), t.column("tau")) {
        (Some(ts), _) => DecayCurve::new(Abscissa::T, ts, values, &source)?,
        (None, Some(taus)) => DecayCurve::new(Abscissa::Tau, taus, values, &source)?,
        (None, None) => return Err(CliError::Invalid(format!("{source}: needs a `t` or `tau` column"))),
    };
    let window = match &a.window {
        Some(w) => parse_window(w)?,
        None => (1.0, f64::INFINITY),
    };
    let f = fit_rate(&curve, a.model, window)?;
    let mut table = Table::new(&["exponent", "prefactor", "residual", "tau_lo", "tau_hi", "points", "eps_eff"]);
    table.push(vec![
        f.exponent,
        f.prefactor,
        f.residual,
        f.window.0,
        f.window.1,
        f.points as f64,
        f.eps_eff.unwrap_or(f64::NAN),
    ]);
    let model = match a.model {
        RateModel::LogPower => "log_power",
        RateModel::Theorem11Form => "theorem11_form",
    };
    let mut verdict = format!(
        "fit {model}: exponent {:.6} over τ ∈ [{:.4e}, {:.4e}] ({} points, rms {:.3e})",
        f.exponent, f.window.0, f.window.1, f.points, f.residual
    );
    if let Some(e) = f.eps_eff {
        verdict.push_str(&format!(", eps_eff {e:.6e}"));
    }
    let miss = a.expect.filter(|e| (f.exponent - e).abs() > a.tol);
    if let Some(e) = a.expect {
        verdict.push_str(&format!(" | expected {e} ± {}: {}", a.tol, if miss.is_some() { "FAIL" } else { "ok" }));
    }
    emit(&table, g.out.as_deref(), "fit.csv", &verdict)?;
    match miss {
        Some(e) => Err(CliError::Verdict(format!("exponent {} differs from {e} by more than {}", f.exponent, a.tol))),
        None => Ok(()),
    }
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub coeffs: PathBuf,
    /// `gaussian`, `sech`, or a CSV file with `x,re,im` rows.
    #[arg(long, default_value = "gaussian")]
    pub psi: String,
    /// σ for gaussian, w for sech.
    #[arg(long, default_value_t = 2.0)]
    pub width: f64,
    #[arg(long, default_value_t = 0.3)]
    pub eps: f64,
    #[arg(long = "L", default_value_t = 1024.0)]
    pub length: f64,
    #[arg(long, default_value_t = 4096)]
    pub n: usize,
    #[arg(long, conflicts_with = "auto_dt")]
    pub dt: Option<f64>,
    /// Choose dt with the stability probe (the default when --dt is absent).
    #[arg(long)]
    pub auto_dt: bool,
    #[arg(long, default_value_t = 100.0)]
    pub tmax: f64,
    #[arg(long, default_value = "log:1:tmax:40")]
    pub snapshots: String,
    #[arg(long, default_value = "lin:0:tmax:101")]
    pub diagnostics: String,
    #[arg(long)]
    pub allow_unsafe_boundary: bool,
}

pub fn simulate(a: &SimulateArgs, g: &GlobalArgs) -> Result<(), CliError> {
    let out_dir = g.out.clone().unwrap_or_else(|| PathBuf::from("simulate-out"));
    let cfg = RunConfig {
        nl: CubicNonlinearity::parse_coefficients(&read_text(&a.coeffs)?)?,
        psi: initial_data(&a.psi, a.width, None)?,
        eps: a.eps,
        length: a.length,
        n: a.n,
        dt: a.dt.map_or(DtChoice::auto(), DtChoice::Fixed),
        t_max: a.tmax,
        diag_times: Schedule::parse(&a.diagnostics, a.tmax)?.times(),
        snapshot_times: Schedule::parse(&a.snapshots, a.tmax)?.times(),
        allow_unsafe_boundary: a.allow_unsafe_boundary,
    };
    let out = run_experiment(&cfg)?;
    let alpha_dir = out_dir.join("alpha");
    create_dir(&alpha_dir)?;
    diagnostics_table(&out.diagnostics).write(&out_dir.join("diagnostics.csv"))?;
    let mut index = Table::new(&["k", "t"]);
    for (k, snap) in out.snapshots.iter().enumerate() {
        alpha_table(snap).write(&alpha_dir.join(format!("alpha_{k:04}.csv")))?;
        index.push(vec![k as f64, snap.t]);
    }
    index.write(&out_dir.join("alpha_index.csv"))?;
    write_json(
        &out_dir.join("manifest.json"),
        &serde_json::json!({
            "command": "simulate",
            "version": env!("CARGO_PKG_VERSION"),
            "seed": g.seed.unwrap_or(0),
            "coeffs_file": a.coeffs,
            "run": cfg,
            "dt_used": out.dt,
            "steps": out.steps,
            "boundary": out.boundary,
            "boundary_ok": out.boundary.ok(),
        }),
    )?;
    println!("{}", out.boundary);
    println!(
        "simulate: t = {} reached in {} steps of {:e}; ‖u‖ {:.10e} → {:.10e}",
        a.tmax,
        out.steps,
        out.dt,
        out.initial.l2_norm(),
        out.final_state.l2_norm()
    );
    Ok(())
}

// ---------------------------------------------------------- pipeline/plots

pub fn pipeline(g: &GlobalArgs) -> Result<(), CliError> {
    let path = g
        .config
        .as_ref()
        .ok_or_else(|| CliError::Invalid("pipeline needs --config".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(out) = &g.out {
        cfg.out = out.clone();
    }
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    let report = run_pipeline(&cfg)?;
    print_report(&report);
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Verdict(format!("see {}", cfg.out.join("report.json").display())))
    }
}

fn print_report(r: &ComparisonReport) {
    let s = &r.settings;
    println!("class: {}", s.class);
    println!(
        "profile exponent {:.6} (τ ∈ [{:e}, {:e}]); PDE exponent {}",
        r.profile_fit.exponent,
        r.profile_fit.window.0,
        r.profile_fit.window.1,
        r.pde_fit.map_or("n/a".into(), |f| format!("{:.6}", f.exponent))
    );
    println!("max PDE/profile gap {:.4e}; seeding gap {:.4e}", r.max_gap, r.seeding_gap);
    for v in &r.verdicts {
        println!("[{}] {}: {:.6e} ({})", if v.passed { "PASS" } else { "FAIL" }, v.name, v.value, v.rule);
    }
}

pub fn plots(g: &GlobalArgs) -> Result<(), CliError> {
    let dir = g
        .out
        .as_ref()
        .ok_or_else(|| CliError::Invalid("plots needs --out pointing at a pipeline directory".into()))?;
    let report: ComparisonReport = read_json(&dir.join("report.json"))?;
    for p in emit_plots(&report, dir)? {
        println!("{}", p.display());
    }
    Ok(())
}
