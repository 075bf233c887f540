//! classify → simulate → profile → report, with per-stage markers so a rerun
//! resumes after the last completed stage.

use std::f64::consts::E;
use std::fs;
use std::path::{Path, PathBuf};

use dnls_core::decay::{fit_rate, log_space, predicted_l2_tau, Abscissa, DecayCurve, RateFit, RateModel};
use dnls_core::nonlinearity::{classify, DissipativityClass, DissipativityReport, NuPolynomial, DEFAULT_TOL};
use dnls_core::profile::TimeCoord;
use dnls_core::solver::{run_experiment, DtChoice, RunConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, VerdictSection};
use crate::error::CliError;
use crate::output::{
    create_dir, diagnostics_table, envelope_table, profile_from_table, read_json, write_json, alpha_table,
};
use crate::plots::emit_plots;
use crate::table::Table;

pub const STAGES: [(&str, &[&str]); 4] = [
    ("classify", &["classify.json", "nu.csv"]),
    (
        "simulate",
        &["diagnostics.csv", "alpha_initial.csv", "alpha_seed.csv", "alpha_envelope.csv", "manifest.json"],
    ),
    ("profile", &["profile.csv"]),
    ("report", &["report.csv", "report.json"]),
];

/// `log t` of the time at which the profile is seeded from `α`.
pub const SEED_LOG_T: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifySummary {
    pub nu: String,
    pub coefficients: NuPolynomial,
    pub report: DissipativityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub rule: String,
    pub value: f64,
    pub passed: bool,
}

/// Everything the verdicts depend on besides the table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSettings {
    pub class: DissipativityClass,
    pub c0: Option<f64>,
    pub xi0: Option<f64>,
    pub tolerances: VerdictSection,
    pub compare_from: f64,
    pub tau_window: (f64, f64),
    pub model: RateModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub settings: ReportSettings,
    pub max_gap: f64,
    /// Largest relative gap between the `α(e)` seeding and the `εψ̂` seeding.
    pub seeding_gap: f64,
    pub profile_fit: RateFit,
    pub pde_fit: Option<RateFit>,
    pub verdicts: Vec<Verdict>,
}

pub const REPORT_COLUMNS: [&str; 6] = ["t", "log_t", "pde_l2", "profile_l2", "gap", "profile_l2_psi_hat"];

impl ComparisonReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    /// Recomputes fits and verdicts from a `report.csv` table.
    pub fn evaluate(settings: ReportSettings, table: &Table) -> Result<Self, CliError> {
        let col = |name| table.require(name, "report table");
        let (log_t, pde, prof, gap, psi) =
            (col("log_t")?, col("pde_l2")?, col("profile_l2")?, col("gap")?, col("profile_l2_psi_hat")?);
        let from = settings.compare_from.ln();
        let compared: Vec<usize> = (0..log_t.len()).filter(|&k| pde[k].is_finite() && log_t[k] >= from).collect();
        if compared.is_empty() {
            return Err(CliError::Invalid("report table has no PDE rows to compare".into()));
        }
        let max_gap = compared.iter().map(|&k| gap[k]).fold(0.0, f64::max);
        let seeding_gap = compared
            .iter()
            .map(|&k| (prof[k] - psi[k]).abs() / prof[k])
            .fold(0.0, f64::max);

        let (taus, vals): (Vec<f64>, Vec<f64>) = (0..log_t.len())
            .map(|k| (log_t[k] - SEED_LOG_T, prof[k]))
            .filter(|(tau, _)| *tau >= settings.tau_window.0 && *tau <= settings.tau_window.1)
            .unzip();
        let curve = DecayCurve::new(Abscissa::Tau, taus, vals, "profile")?;
        let profile_fit = fit_rate(&curve, settings.model, settings.tau_window)?;

        let (ts, vs): (Vec<f64>, Vec<f64>) = compared.iter().map(|&k| (log_t[k].exp(), pde[k])).unzip();
        let pde_fit = DecayCurve::new(Abscissa::T, ts, vs, "pde")
            .ok()
            .and_then(|c| fit_rate(&c, RateModel::LogPower, (from, f64::INFINITY)).ok());

        let tol = &settings.tolerances;
        let mut verdicts = vec![Verdict {
            name: "pde_profile_gap".into(),
            rule: format!("max relative gap for t >= {} must be <= {}", settings.compare_from, tol.gap_tol),
            value: max_gap,
            passed: max_gap <= tol.gap_tol,
        }];
        let p = profile_fit.exponent;
        use DissipativityClass::*;
        let exponent = match settings.class {
            WeaklyDissipative => Some((format!("|p + 0.25| <= {}", tol.exponent_tol), (p + 0.25).abs() <= tol.exponent_tol)),
            StrictlyDissipative | StronglyDissipative => {
                Some((format!("p >= -0.5 - {}", tol.exponent_tol), p >= -0.5 - tol.exponent_tol))
            }
            NullImaginary => Some((format!("|p| <= {}", tol.exponent_tol), p.abs() <= tol.exponent_tol)),
            DissipativeNonStrict | Indefinite => None,
        };
        if let Some((rule, passed)) = exponent {
            verdicts.push(Verdict {
                name: "profile_exponent".into(),
                rule,
                value: p,
                passed,
            });
        }
        Ok(Self {
            settings,
            max_gap,
            seeding_gap,
            profile_fit,
            pde_fit,
            verdicts,
        })
    }
}

struct Workspace {
    dir: PathBuf,
    fingerprint: String,
}

impl Workspace {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn marker(&self, stage: &str) -> PathBuf {
        self.dir.join(".stages").join(format!("{stage}.done"))
    }

    fn is_done(&self, stage: &str, outputs: &[&str]) -> bool {
        fs::read_to_string(self.marker(stage)).is_ok_and(|m| m == self.fingerprint)
            && outputs.iter().all(|o| self.path(o).exists())
    }

    fn mark(&self, stage: &str) -> Result<(), CliError> {
        let m = self.marker(stage);
        create_dir(m.parent().expect("marker has a parent"))?;
        fs::write(&m, &self.fingerprint).map_err(|e| CliError::io(&m, e))
    }

    fn invalidate(&self, stage: &str) {
        // A missing marker is already the desired state.
        let _ = fs::remove_file(self.marker(stage));
    }
}

/// Runs every stage that is not already complete for this exact config.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<ComparisonReport, CliError> {
    let boundary = cfg.validate()?;
    log::info!("{boundary}");
    create_dir(&cfg.out)?;
    let ws = Workspace {
        dir: cfg.out.clone(),
        fingerprint: cfg.to_toml_string(),
    };
    let mut stale = false;
    for (stage, outputs) in STAGES {
        if !stale && ws.is_done(stage, outputs) {
            log::info!("stage {stage}: up to date");
            continue;
        }
        stale = true;
        ws.invalidate(stage);
        log::info!("stage {stage}: running");
        let result = match stage {
            "classify" => stage_classify(cfg, &ws),
            "simulate" => stage_simulate(cfg, &ws),
            "profile" => stage_profile(cfg, &ws),
            _ => stage_report(cfg, &ws),
        };
        result.map_err(|e| e.in_stage(stage))?;
        ws.mark(stage)?;
    }
    read_json(&ws.path("report.json"))
}

fn stage_classify(cfg: &ExperimentConfig, ws: &Workspace) -> Result<(), CliError> {
    let nu = cfg.nonlinearity()?.nu();
    let report = classify(&nu, DEFAULT_TOL)?;
    if report.class == DissipativityClass::Indefinite {
        return Err(CliError::Invalid(format!("Im ν = {nu} is indefinite; no profile prediction exists")));
    }
    write_json(
        &ws.path("classify.json"),
        &ClassifySummary {
            nu: nu.to_string(),
            coefficients: nu,
            report,
        },
    )?;
    let mut t = Table::new(&["xi", "re_nu", "im_nu"]);
    for x in dnls_core::profile::uniform_grid(-cfg.profile.xi_max, cfg.profile.xi_max, 401) {
        t.push(vec![x, nu.re(x), nu.im(x)]);
    }
    t.write(&ws.path("nu.csv"))
}

fn stage_simulate(cfg: &ExperimentConfig, ws: &Workspace) -> Result<(), CliError> {
    let s = &cfg.solver;
    let mut snapshots = log_space(1.0, s.t_max, s.snapshot_count.max(2));
    snapshots.extend([0.0, E]);
    let run_cfg = RunConfig {
        nl: cfg.nonlinearity()?,
        psi: cfg.initial_data()?,
        eps: cfg.initial.eps,
        length: s.length,
        n: s.n,
        dt: match s.dt {
            Some(dt) if !s.auto_dt => DtChoice::Fixed(dt),
            _ => DtChoice::auto(),
        },
        t_max: s.t_max,
        diag_times: log_space(1.0, s.t_max, s.diag_count),
        snapshot_times: snapshots,
        allow_unsafe_boundary: false,
    };
    let out = run_experiment(&run_cfg)?;
    diagnostics_table(&out.diagnostics).write(&ws.path("diagnostics.csv"))?;
    let at = |t: f64| {
        out.snapshot_at(t)
            .ok_or_else(|| CliError::Numerical(format!("no α snapshot at t = {t}")))
    };
    alpha_table(at(0.0)?).write(&ws.path("alpha_initial.csv"))?;
    alpha_table(at(E)?).write(&ws.path("alpha_seed.csv"))?;
    let mut envelope: Vec<_> = out.snapshots.iter().filter(|a| a.t >= 1.0).cloned().collect();
    envelope.sort_by(|a, b| a.t.total_cmp(&b.t));
    envelope.dedup_by(|a, b| a.t == b.t);
    envelope_table(&envelope, cfg.profile.xi_max, 256).write(&ws.path("alpha_envelope.csv"))?;
    write_json(
        &ws.path("manifest.json"),
        &serde_json::json!({
            "command": "pipeline",
            "version": env!("CARGO_PKG_VERSION"),
            "config": cfg,
            "run": run_cfg,
            "dt_used": out.dt,
            "steps": out.steps,
            "boundary": out.boundary,
            "boundary_ok": out.boundary.ok(),
        }),
    )
}

fn stage_profile(cfg: &ExperimentConfig, ws: &Workspace) -> Result<(), CliError> {
    let summary: ClassifySummary = read_json(&ws.path("classify.json"))?;
    let nu = summary.coefficients;
    let load = |name: &str, time| {
        let p = ws.path(name);
        profile_from_table(&Table::read(&p)?, &p.display().to_string(), cfg.profile.xi_max, time)
    };
    let seed = load("alpha_seed.csv", TimeCoord::T(E))?;
    let initial = load("alpha_initial.csv", TimeCoord::T(0.0))?;
    let diag = Table::read(&ws.path("diagnostics.csv"))?;
    let mut times: Vec<(f64, f64)> = diag
        .require("t", "diagnostics.csv")?
        .into_iter()
        .filter(|t| *t >= E)
        .map(|t| (t, t.ln()))
        .collect();
    let p = &cfg.profile;
    times.extend(log_space(p.tau_min, p.tau_max, p.tau_count).into_iter().map(|tau| {
        let lt = tau + SEED_LOG_T;
        (lt.exp(), lt)
    }));
    let rows = times
        .par_iter()
        .map(|&(t, lt)| {
            let prof = predicted_l2_tau(&seed, &nu, (lt - SEED_LOG_T).max(0.0))?;
            let psi = predicted_l2_tau(&initial, &nu, lt)?;
            Ok(vec![t, lt, prof, psi])
        })
        .collect::<Result<Vec<_>, dnls_core::decay::DecayError>>()?;
    let mut t = Table::new(&["t", "log_t", "profile_l2", "profile_l2_psi_hat"]);
    rows.into_iter().for_each(|r| t.push(r));
    t.write(&ws.path("profile.csv"))
}

fn stage_report(cfg: &ExperimentConfig, ws: &Workspace) -> Result<(), CliError> {
    let summary: ClassifySummary = read_json(&ws.path("classify.json"))?;
    let diag = Table::read(&ws.path("diagnostics.csv"))?;
    let prof = Table::read(&ws.path("profile.csv"))?;
    let (d_t, d_l2) = (diag.require("t", "diagnostics.csv")?, diag.require("l2", "diagnostics.csv")?);
    let mut table = Table::new(&REPORT_COLUMNS);
    for row in &prof.rows {
        let (t, log_t, profile_l2, psi) = (row[0], row[1], row[2], row[3]);
        let pde = d_t
            .iter()
            .position(|dt| dt.ln().to_bits() == log_t.to_bits())
            .map_or(f64::NAN, |k| d_l2[k]);
        let gap = (pde - profile_l2).abs() / profile_l2;
        table.push(vec![t, log_t, pde, profile_l2, gap, psi]);
    }
    let settings = ReportSettings {
        class: summary.report.class,
        c0: summary.report.c0,
        xi0: summary.report.xi0,
        tolerances: cfg.verdict.clone(),
        compare_from: cfg.profile.compare_from,
        tau_window: (cfg.profile.tau_min, cfg.profile.tau_max),
        model: cfg.profile.model,
    };
    let report = ComparisonReport::evaluate(settings, &table)?;
    table.write(&ws.path("report.csv"))?;
    write_json(&ws.path("report.json"), &report)?;
    emit_plots(&report, &ws.dir)?;
    Ok(())
}

/// Rebuilds the report from `report.csv` and the settings in `report.json`.
pub fn recheck(dir: &Path) -> Result<ComparisonReport, CliError> {
    let stored: ComparisonReport = read_json(&dir.join("report.json"))?;
    ComparisonReport::evaluate(stored.settings, &Table::read(&dir.join("report.csv"))?)
}
