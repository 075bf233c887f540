use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{
    boundary_check, compute_alpha, diagnostics, AlphaField, BoundaryCheck, DiagnosticsRecord, Evolver,
    InitialData, SolverError, SpectralGrid, SpectralState,
};
use crate::decay::{Abscissa, DecayCurve};
use crate::nonlinearity::CubicNonlinearity;
use crate::profile::least_squares_slope;

/// Sampling times, written `log:a:b:n`, `lin:a:b:n` or a comma list. The
/// token `tmax` stands for the run's final time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Schedule {
    Log { start: f64, end: f64, count: usize },
    Linear { start: f64, end: f64, count: usize },
    List(Vec<f64>),
}

impl Schedule {
    pub fn parse(text: &str, t_max: f64) -> Result<Self, SolverError> {
        let bad = || SolverError::BadSchedule(text.to_string());
        let num = |s: &str| -> Result<f64, SolverError> {
            match s.trim() {
                "tmax" => Ok(t_max),
                "e" => Ok(std::f64::consts::E),
                v => v.parse().map_err(|_| bad()),
            }
        };
        let parts: Vec<&str> = text.trim().split(':').collect();
        let s = match parts.as_slice() {
            [kind @ ("log" | "lin"), a, b, n] => {
                let (start, end) = (num(a)?, num(b)?);
                let count: usize = n.trim().parse().map_err(|_| bad())?;
                if count == 0 || !(end >= start) {
                    return Err(bad());
                }
                if *kind == "log" {
                    if !(start > 0.0) {
                        return Err(bad());
                    }
                    Self::Log { start, end, count }
                } else {
                    Self::Linear { start, end, count }
                }
            }
            [list] => Self::List(list.split(',').map(num).collect::<Result<_, _>>()?),
            _ => return Err(bad()),
        };
        Ok(s)
    }

    pub fn times(&self) -> Vec<f64> {
        let spaced = |a: f64, b: f64, n: usize, f: &dyn Fn(f64) -> f64, g: &dyn Fn(f64) -> f64| -> Vec<f64> {
            if n == 1 {
                return vec![a];
            }
            let (fa, fb) = (f(a), f(b));
            let mut v: Vec<f64> = (0..n).map(|k| g(fa + (fb - fa) * k as f64 / (n - 1) as f64)).collect();
            v[0] = a;
            v[n - 1] = b;
            v
        };
        let mut v = match self {
            Self::Log { start, end, count } => spaced(*start, *end, *count, &f64::ln, &f64::exp),
            Self::Linear { start, end, count } => spaced(*start, *end, *count, &|x| x, &|x| x),
            Self::List(v) => v.clone(),
        };
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DtChoice {
    Fixed(f64),
    /// Halve from `start` until two probes over `[0, 1]` agree to `tol`.
    Auto { start: f64, tol: f64 },
}

impl DtChoice {
    pub fn auto() -> Self {
        Self::Auto { start: 0.1, tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub nl: CubicNonlinearity,
    pub psi: InitialData,
    pub eps: f64,
    pub length: f64,
    pub n: usize,
    pub dt: DtChoice,
    pub t_max: f64,
    pub diag_times: Vec<f64>,
    pub snapshot_times: Vec<f64>,
    /// Run even if the boundary check fails (the result records it).
    pub allow_unsafe_boundary: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub boundary: BoundaryCheck,
    pub dt: f64,
    pub steps: usize,
    pub diagnostics: Vec<DiagnosticsRecord>,
    pub snapshots: Vec<AlphaField>,
    pub initial: SpectralState,
    pub final_state: SpectralState,
}

impl RunOutput {
    /// `‖u(t)‖` at every positive diagnostic time.
    pub fn l2_curve(&self, label: &str) -> DecayCurve {
        let (ts, vs): (Vec<f64>, Vec<f64>) = self
            .diagnostics
            .iter()
            .filter(|d| d.t > 0.0)
            .map(|d| (d.t, d.l2))
            .unzip();
        DecayCurve::new(Abscissa::T, ts, vs, label).expect("norms of a nonzero solution are positive")
    }

    pub fn snapshot_at(&self, t: f64) -> Option<&AlphaField> {
        self.snapshots.iter().find(|a| (a.t - t).abs() <= 1e-9 * t.max(1.0))
    }
}

/// Steps `state` forward to exactly `target`, shortening the last step if
/// needed. Returns the number of steps taken.
pub fn advance_to(ev: &mut Evolver, state: &mut SpectralState, target: f64) -> Result<usize, SolverError> {
    let dt = ev.dt();
    let mut steps = 0;
    while state.t < target {
        let remaining = target - state.t;
        let next = if remaining <= dt * (1.0 + 1e-9) {
            let mut s = if (remaining - dt).abs() <= 1e-9 * dt {
                ev.step(state)?
            } else {
                ev.step_by(state, remaining)?
            };
            s.t = target;
            s
        } else {
            ev.step(state)?
        };
        *state = next;
        steps += 1;
    }
    Ok(steps)
}

/// Largest `dt = start / 2^k` whose solution at `t_probe` agrees with that of
/// `dt/2` to `tol` relative to `max|u|`.
pub fn probe_dt(
    initial: &SpectralState,
    nl: &CubicNonlinearity,
    start: f64,
    tol: f64,
    t_probe: f64,
) -> Result<f64, SolverError> {
    let target = initial.t + t_probe;
    let run = |dt: f64| -> Result<SpectralState, SolverError> {
        let mut ev = Evolver::new(initial.grid.clone(), *nl, dt)?;
        let mut s = initial.clone();
        advance_to(&mut ev, &mut s, target)?;
        Ok(s)
    };
    let mut dt = start;
    let mut coarse = run(dt)?;
    while dt > 1e-6 {
        let fine = run(0.5 * dt)?;
        let sup = fine.u.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let diff = coarse
            .u
            .iter()
            .zip(&fine.u)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        if diff <= tol * sup.max(f64::MIN_POSITIVE) {
            return Ok(dt);
        }
        log::debug!("dt probe: dt = {dt} differs by {diff:e}");
        dt *= 0.5;
        coarse = fine;
    }
    Err(SolverError::ProbeFailed(dt))
}

/// Evolves `u(0) = εψ` to `t_max`, recording diagnostics and `α` snapshots.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunOutput, SolverError> {
    let grid: Arc<SpectralGrid> = SpectralGrid::new(cfg.length, cfg.n)?;
    let boundary = boundary_check(&cfg.psi, &grid, cfg.t_max);
    if !boundary.ok() && !cfg.allow_unsafe_boundary {
        return Err(SolverError::BoundaryUnsafe(boundary));
    }
    let eps = cfg.eps;
    let initial = SpectralState::from_fn(grid.clone(), 0.0, |x| cfg.psi.eval(x) * eps);
    let dt = match cfg.dt {
        DtChoice::Fixed(dt) => dt,
        DtChoice::Auto { start, tol } => probe_dt(&initial, &cfg.nl, start, tol, 1.0)?,
    };
    let mut ev = Evolver::new(grid, cfg.nl, dt)?;

    let in_range = |t: &f64| *t >= 0.0 && *t <= cfg.t_max;
    let mut events: Vec<f64> = cfg
        .diag_times
        .iter()
        .chain(&cfg.snapshot_times)
        .copied()
        .filter(in_range)
        .chain([cfg.t_max])
        .collect();
    events.sort_by(f64::total_cmp);
    events.dedup();
    let wanted = |set: &[f64], t: f64| set.contains(&t);

    let mut state = initial.clone();
    let mut steps = 0;
    let mut records = Vec::new();
    let mut snapshots = Vec::new();
    for &t in &events {
        steps += advance_to(&mut ev, &mut state, t)?;
        if wanted(&cfg.diag_times, t) {
            records.push(diagnostics(&state, &cfg.nl));
        }
        if wanted(&cfg.snapshot_times, t) {
            snapshots.push(compute_alpha(&state));
        }
        log::debug!("t = {t}: ‖u‖ = {}", state.l2_norm());
    }
    Ok(RunOutput {
        boundary,
        dt,
        steps,
        diagnostics: records,
        snapshots,
        initial,
        final_state: state,
    })
}

/// Least-squares exponent `γ` of `value ≈ C(1+t)^γ` over the records.
pub fn growth_exponent<F: Fn(&DiagnosticsRecord) -> f64>(records: &[DiagnosticsRecord], field: F) -> f64 {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| field(r) > 0.0)
        .map(|r| ((1.0 + r.t).ln(), field(r).ln()))
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    least_squares_slope(&pts)
}

/// `εψ̂` sampled on the frequencies of `alpha` (closed-form families only).
pub fn scaled_hat(psi: &InitialData, eps: f64, xi: &[f64]) -> Option<Vec<Complex64>> {
    xi.iter().map(|&x| psi.hat(x).map(|v| v * eps)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedules() {
        let s = Schedule::parse("log:1:tmax:4", 1000.0).unwrap();
        let t = s.times();
        assert_eq!(t[0], 1.0);
        assert_eq!(t[3], 1000.0);
        assert!((t[1] - 10.0).abs() < 1e-12);
        assert_eq!(Schedule::parse("lin:0:1:3", 5.0).unwrap().times(), vec![0.0, 0.5, 1.0]);
        assert_eq!(Schedule::parse("3,1,e", 5.0).unwrap().times(), vec![1.0, std::f64::consts::E, 3.0]);
        for bad in ["log:0:1:3", "log:1:2", "lin:2:1:3", "x:y", "log:1:2:0"] {
            assert!(Schedule::parse(bad, 1.0).is_err(), "{bad}");
        }
    }

    fn small_config() -> RunConfig {
        RunConfig {
            nl: CubicNonlinearity::gauge_invariant(4, Complex64::new(0.0, -1.0)),
            psi: InitialData::Gaussian { sigma: 2.0 },
            eps: 0.3,
            length: 128.0,
            n: 512,
            dt: DtChoice::Fixed(0.05),
            t_max: 5.0,
            diag_times: vec![0.0, 1.0, 2.5, 5.0],
            snapshot_times: vec![1.0],
            allow_unsafe_boundary: false,
        }
    }

    #[test]
    fn experiment_records_schedule() {
        let out = run_experiment(&small_config()).unwrap();
        let ts: Vec<f64> = out.diagnostics.iter().map(|d| d.t).collect();
        assert_eq!(ts, vec![0.0, 1.0, 2.5, 5.0]);
        assert_eq!(out.snapshots.len(), 1);
        assert!(out.snapshot_at(1.0).is_some());
        assert_eq!(out.final_state.t, 5.0);
        assert_eq!(out.steps, 100);
        assert!(out.diagnostics.windows(2).all(|w| w[1].l2 < w[0].l2));
        assert!(out.diagnostics.iter().all(|d| d.mass_flux < 0.0));
        assert_eq!(out.l2_curve("pde").points, vec![1.0, 2.5, 5.0]);
    }

    #[test]
    fn unsafe_boundary_is_refused() {
        let mut cfg = small_config();
        cfg.t_max = 100.0;
        assert!(matches!(run_experiment(&cfg), Err(SolverError::BoundaryUnsafe(_))));
        cfg.allow_unsafe_boundary = true;
        cfg.t_max = 0.1;
        cfg.diag_times.clear();
        assert!(run_experiment(&cfg).is_ok());
    }

    #[test]
    fn auto_dt_probe() {
        let mut cfg = small_config();
        cfg.dt = DtChoice::auto();
        cfg.t_max = 1.0;
        let out = run_experiment(&cfg).unwrap();
        assert!(out.dt <= 0.1 && out.dt > 1e-4);
    }

    #[test]
    fn growth_exponent_of_power() {
        let recs: Vec<DiagnosticsRecord> = [1.0, 10.0, 100.0]
            .iter()
            .map(|&t: &f64| DiagnosticsRecord {
                t,
                l2: 1.0,
                h3: (1.0 + t).powf(0.08),
                j_h2: 1.0,
                mass_flux: 0.0,
                alpha_env: 1.0,
            })
            .collect();
        assert!((growth_exponent(&recs, |r| r.h3) - 0.08).abs() < 1e-12);
    }
}
