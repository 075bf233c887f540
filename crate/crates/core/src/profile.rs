//! The profile equation `i∂_t β = (μ(ξ)/t)|β|²β + ρ(t, ξ)` for `t >= 1`,
//! its `(P, Q)` reformulation `β = P/√Q`, the explicit asymptotic profile
//! `A(τ, ξ)`, and a harness that measures `|β(t) − A(log t)|`.
//!
//! Everything is integrated in `τ = log t`, where the equation reads
//! `i∂_τ β = μ|β|²β + e^τ ρ(e^τ, ξ)`; each frequency is independent.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nonlinearity::NuPolynomial;
use crate::ode::{self, OdeConfig, OdeError};

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("time grid must be strictly increasing")]
    NonMonotoneGrid,
    #[error("time grid must start at t = 1 (got {0})")]
    GridStart(f64),
    #[error("frequency grid must be strictly increasing and match the values")]
    BadFrequencyGrid,
    #[error("integration failed at ξ = {xi}: {source}")]
    Integration {
        xi: f64,
        #[source]
        source: OdeError,
    },
    #[error("Q fell below 1 (Q = {q}) at ξ = {xi}, t = {t}")]
    QBelowOne { xi: f64, t: f64, q: f64 },
    #[error("remainder violates its envelope at t = {t}, ξ = {xi}: |ρ| = {value:e} > {bound:e}")]
    EnvelopeViolation {
        t: f64,
        xi: f64,
        value: f64,
        bound: f64,
    },
    #[error("kappa must lie in (0, 1/4), got {0}")]
    BadKappa(f64),
    #[error("delta must lie in (0, kappa), got {0}")]
    BadDelta(f64),
    #[error("nonpositive radicand {value:e} at ξ = {xi}")]
    NonPositiveRadicand { xi: f64, value: f64 },
    #[error("runs are sampled on different grids")]
    MismatchedGrids,
}

/// `⟨ξ⟩² = 1 + ξ²`.
pub fn bracket_sq(xi: f64) -> f64 {
    1.0 + xi * xi
}

/// Which clock a profile snapshot refers to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TimeCoord {
    /// Slow time `τ = log t`.
    Tau(f64),
    /// Physical time `t`.
    T(f64),
}

impl TimeCoord {
    pub fn t(self) -> f64 {
        match self {
            Self::Tau(tau) => tau.exp(),
            Self::T(t) => t,
        }
    }

    pub fn tau(self) -> f64 {
        match self {
            Self::Tau(tau) => tau,
            Self::T(t) => t.ln(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProfileMeta {
    pub nu: Option<NuPolynomial>,
    pub c0: Option<f64>,
    pub xi0: Option<f64>,
    pub eps: Option<f64>,
    /// Smallest `C` with `|values| <= C ε ⟨ξ⟩^{-2}` on the grid.
    pub envelope_c: Option<f64>,
}

/// Complex samples of a profile on a sorted frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileField {
    pub xi_grid: Vec<f64>,
    pub values: Vec<Complex64>,
    pub time: TimeCoord,
    pub meta: ProfileMeta,
}

impl ProfileField {
    pub fn new(xi_grid: Vec<f64>, values: Vec<Complex64>, time: TimeCoord) -> Result<Self, ProfileError> {
        if xi_grid.len() != values.len() || xi_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ProfileError::BadFrequencyGrid);
        }
        Ok(Self {
            xi_grid,
            values,
            time,
            meta: ProfileMeta::default(),
        })
    }

    pub fn from_fn<F: Fn(f64) -> Complex64>(xi_grid: Vec<f64>, f: F, time: TimeCoord) -> Result<Self, ProfileError> {
        let values = xi_grid.iter().map(|&x| f(x)).collect();
        Self::new(xi_grid, values, time)
    }

    /// Records the envelope constant `C = max ⟨ξ⟩²|v|/ε`.
    pub fn with_envelope(mut self, eps: f64) -> Self {
        let c = self
            .xi_grid
            .iter()
            .zip(&self.values)
            .map(|(&x, v)| bracket_sq(x) * v.norm() / eps)
            .fold(0.0, f64::max);
        self.meta.eps = Some(eps);
        self.meta.envelope_c = Some(c);
        self
    }

    /// True iff `|values[k]| <= c ε ⟨ξ_k⟩^{-2}` everywhere.
    pub fn satisfies_envelope(&self, eps: f64, c: f64) -> bool {
        self.xi_grid
            .iter()
            .zip(&self.values)
            .all(|(&x, v)| v.norm() <= c * eps / bracket_sq(x) * (1.0 + 1e-12))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `|value|²` linearly interpolated between nodes, zero off the grid.
    pub fn abs2_at(&self, xi: f64) -> f64 {
        let g = &self.xi_grid;
        if g.is_empty() || xi < g[0] || xi > g[g.len() - 1] {
            return 0.0;
        }
        let k = g.partition_point(|&x| x <= xi);
        if k == 0 {
            return self.values[0].norm_sqr();
        }
        if k >= g.len() {
            return self.values[g.len() - 1].norm_sqr();
        }
        let (x0, x1) = (g[k - 1], g[k]);
        let (w0, w1) = (self.values[k - 1].norm_sqr(), self.values[k].norm_sqr());
        w0 + (w1 - w0) * (xi - x0) / (x1 - x0)
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Trapezoidal `L²` norm over the grid.
    pub fn l2_norm(&self) -> f64 {
        let g = &self.xi_grid;
        let s: f64 = g
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(x, v)| 0.5 * (x[1] - x[0]) * (v[0].norm_sqr() + v[1].norm_sqr()))
            .sum();
        s.sqrt()
    }
}

/// `n` equispaced points on `[min, max]`.
pub fn uniform_grid(min: f64, max: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![min],
        _ => (0..n)
            .map(|k| min + (max - min) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Built-in initial profiles `θ₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ThetaFamily {
    /// `ε e^{−ξ²/2}`
    Gaussian,
    /// `ε ⟨ξ⟩^{-2}`
    Lorentzian,
}

impl ThetaFamily {
    pub fn eval(self, eps: f64, xi: f64) -> Complex64 {
        let v = match self {
            Self::Gaussian => eps * (-0.5 * xi * xi).exp(),
            Self::Lorentzian => eps / bracket_sq(xi),
        };
        Complex64::new(v, 0.0)
    }

    pub fn field(self, eps: f64, xi_grid: Vec<f64>) -> ProfileField {
        ProfileField::from_fn(xi_grid, |x| self.eval(eps, x), TimeCoord::T(1.0))
            .expect("grid is validated by the caller")
            .with_envelope(eps)
    }
}

pub type RemainderFn = Arc<dyn Fn(f64, f64) -> Complex64 + Send + Sync>;

/// Shape of the forcing term `ρ(t, ξ)`.
#[derive(Clone)]
pub enum RemainderShape {
    Zero,
    /// `amplitude · e^{iωt} / (⟨ξ⟩² t^{1+κ})`, saturating the envelope.
    Oscillating { omega: f64 },
    /// Arbitrary `(t, ξ) ↦ ρ`.
    Custom(RemainderFn),
    /// Row-major `values[i * xi.len() + j] = ρ(t[i], xi[j])`, interpolated
    /// bilinearly in `(log t, ξ)` and zero outside the table.
    Tabulated {
        t: Vec<f64>,
        xi: Vec<f64>,
        values: Vec<Complex64>,
    },
}

impl fmt::Debug for RemainderShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "Zero"),
            Self::Oscillating { omega } => write!(f, "Oscillating {{ omega: {omega} }}"),
            Self::Custom(_) => write!(f, "Custom(..)"),
            Self::Tabulated { t, xi, .. } => write!(f, "Tabulated({}x{})", t.len(), xi.len()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RemainderSpec {
    pub kappa: f64,
    pub amplitude: f64,
    pub shape: RemainderShape,
}

impl RemainderSpec {
    pub fn new(kappa: f64, amplitude: f64, shape: RemainderShape) -> Result<Self, ProfileError> {
        if !(kappa > 0.0 && kappa < 0.25) {
            return Err(ProfileError::BadKappa(kappa));
        }
        Ok(Self {
            kappa,
            amplitude,
            shape,
        })
    }

    pub fn zero() -> Self {
        Self {
            kappa: 0.2,
            amplitude: 0.0,
            shape: RemainderShape::Zero,
        }
    }

    pub fn oscillating(kappa: f64, amplitude: f64, omega: f64) -> Result<Self, ProfileError> {
        Self::new(kappa, amplitude, RemainderShape::Oscillating { omega })
    }

    pub fn is_zero(&self) -> bool {
        match self.shape {
            RemainderShape::Zero => true,
            RemainderShape::Oscillating { .. } => self.amplitude == 0.0,
            _ => false,
        }
    }

    /// `amplitude / (⟨ξ⟩² t^{1+κ})`
    pub fn envelope(&self, t: f64, xi: f64) -> f64 {
        self.amplitude / (bracket_sq(xi) * t.powf(1.0 + self.kappa))
    }

    pub fn eval(&self, t: f64, xi: f64) -> Complex64 {
        match &self.shape {
            RemainderShape::Zero => Complex64::new(0.0, 0.0),
            RemainderShape::Oscillating { omega } => {
                Complex64::from_polar(self.envelope(t, xi), omega * t)
            }
            RemainderShape::Custom(f) => f(t, xi),
            RemainderShape::Tabulated { t: ts, xi: xs, values } => bilinear(ts, xs, values, t, xi),
        }
    }

    /// `t ρ(t, ξ)` written in `τ`, avoiding the overflow-prone product.
    fn forcing_tau(&self, tau: f64, xi: f64) -> Complex64 {
        match &self.shape {
            RemainderShape::Zero => Complex64::new(0.0, 0.0),
            RemainderShape::Oscillating { omega } => {
                let modulus = self.amplitude / bracket_sq(xi) * (-self.kappa * tau).exp();
                Complex64::from_polar(modulus, omega * tau.exp())
            }
            _ => {
                let t = tau.exp();
                self.eval(t, xi) * t
            }
        }
    }

    /// Verifies `|ρ| <= envelope` on the sample points (tabulated shapes are
    /// checked at every table entry instead).
    pub fn check_envelope(&self, xi_grid: &[f64], t_samples: &[f64]) -> Result<(), ProfileError> {
        let check = |t: f64, xi: f64, v: Complex64| {
            let bound = self.envelope(t, xi);
            if v.norm() > bound * (1.0 + 1e-12) {
                Err(ProfileError::EnvelopeViolation {
                    t,
                    xi,
                    value: v.norm(),
                    bound,
                })
            } else {
                Ok(())
            }
        };
        match &self.shape {
            RemainderShape::Zero | RemainderShape::Oscillating { .. } => Ok(()),
            RemainderShape::Tabulated { t, xi, values } => {
                for (i, &ti) in t.iter().enumerate() {
                    for (j, &xj) in xi.iter().enumerate() {
                        check(ti, xj, values[i * xi.len() + j])?;
                    }
                }
                Ok(())
            }
            RemainderShape::Custom(f) => {
                for &t in t_samples {
                    for &xi in xi_grid {
                        check(t, xi, f(t, xi))?;
                    }
                }
                Ok(())
            }
        }
    }
}

fn bilinear(ts: &[f64], xs: &[f64], values: &[Complex64], t: f64, xi: f64) -> Complex64 {
    let zero = Complex64::new(0.0, 0.0);
    let (nt, nx) = (ts.len(), xs.len());
    if nt == 0 || nx == 0 || t < ts[0] || t > ts[nt - 1] || xi < xs[0] || xi > xs[nx - 1] {
        return zero;
    }
    let locate = |grid: &[f64], x: f64| -> (usize, f64) {
        if grid.len() == 1 {
            return (0, 0.0);
        }
        let k = grid.partition_point(|&g| g <= x).clamp(1, grid.len() - 1);
        (k - 1, (x - grid[k - 1]) / (grid[k] - grid[k - 1]))
    };
    let (i, ft) = if nt == 1 {
        (0, 0.0)
    } else {
        let lt: Vec<f64> = ts.iter().map(|v| v.ln()).collect();
        locate(&lt, t.ln())
    };
    let (j, fx) = locate(xs, xi);
    let at = |a: usize, b: usize| values[a.min(nt - 1) * nx + b.min(nx - 1)];
    let (i1, j1) = ((i + 1).min(nt - 1), (j + 1).min(nx - 1));
    at(i, j) * (1.0 - ft) * (1.0 - fx)
        + at(i1, j) * ft * (1.0 - fx)
        + at(i, j1) * (1.0 - ft) * fx
        + at(i1, j1) * ft * fx
}

fn validate_time_grid(t_grid: &[f64]) -> Result<Vec<f64>, ProfileError> {
    match t_grid.first() {
        None => return Err(ProfileError::NonMonotoneGrid),
        Some(&t0) if t0 != 1.0 => return Err(ProfileError::GridStart(t0)),
        _ => {}
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ProfileError::NonMonotoneGrid);
    }
    Ok(t_grid.iter().map(|t| t.ln()).collect())
}

fn assemble<T: Clone>(per_xi: Vec<Vec<T>>, n_t: usize) -> Vec<Vec<T>> {
    (0..n_t)
        .map(|k| per_xi.iter().map(|col| col[k].clone()).collect())
        .collect()
}

/// Integrates the profile equation from `β(1, ξ) = θ₀(ξ)` and samples it at
/// each `t` in `t_grid` (which must start at 1).
pub fn integrate_beta(
    theta0: &ProfileField,
    mu: &NuPolynomial,
    rho: &RemainderSpec,
    t_grid: &[f64],
    cfg: &OdeConfig,
) -> Result<Vec<ProfileField>, ProfileError> {
    let taus = validate_time_grid(t_grid)?;
    rho.check_envelope(&theta0.xi_grid, t_grid)?;

    let columns: Vec<Vec<Complex64>> = theta0
        .xi_grid
        .par_iter()
        .zip(theta0.values.par_iter())
        .map(|(&xi, &b0)| {
            let m = mu.eval(xi);
            let rhs = |tau: f64, y: &[f64; 2]| {
                let b = Complex64::new(y[0], y[1]);
                // ∂τβ = −i(μ|β|²β + e^τ ρ)
                let d = -Complex64::i() * (m * b.norm_sqr() * b + rho.forcing_tau(tau, xi));
                [d.re, d.im]
            };
            let (ys, _) = ode::integrate(rhs, 0.0, [b0.re, b0.im], &taus, cfg)
                .map_err(|source| ProfileError::Integration { xi, source })?;
            Ok(ys.into_iter().map(|y| Complex64::new(y[0], y[1])).collect())
        })
        .collect::<Result<_, ProfileError>>()?;

    let rows = assemble(columns, t_grid.len());
    Ok(rows
        .into_iter()
        .zip(t_grid)
        .map(|(values, &t)| ProfileField {
            xi_grid: theta0.xi_grid.clone(),
            values,
            time: TimeCoord::T(t),
            meta: ProfileMeta {
                nu: Some(*mu),
                ..theta0.meta.clone()
            },
        })
        .collect())
}

/// One frequency of the `(P, Q)` system, with the phase `Ψ` and the running
/// integral `∫|P|² dτ` carried along for the asymptotic harness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PqState {
    pub p: Complex64,
    pub q: f64,
    pub psi: f64,
    pub p_mass: f64,
}

impl PqState {
    pub fn beta(&self) -> Complex64 {
        self.p / self.q.sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PqField {
    pub t: f64,
    pub xi_grid: Vec<f64>,
    pub states: Vec<PqState>,
}

impl PqField {
    /// `β = P/√Q` on the grid.
    pub fn reconstruct_beta(&self) -> ProfileField {
        ProfileField {
            xi_grid: self.xi_grid.clone(),
            values: self.states.iter().map(PqState::beta).collect(),
            time: TimeCoord::T(self.t),
            meta: ProfileMeta::default(),
        }
    }
}

/// Integrates
///
/// ```text
/// ∂τP = −i Re μ |P|²/Q · P − i √Q e^τ ρ,   ∂τQ = −2 Im μ |P|²,
/// ∂τΨ = Re μ |P|²/Q,                       ∂τM = |P|²,
/// ```
///
/// from `P = θ₀, Q = 1, Ψ = M = 0` at `t = 1`.
pub fn integrate_pq(
    theta0: &ProfileField,
    mu: &NuPolynomial,
    rho: &RemainderSpec,
    t_grid: &[f64],
    cfg: &OdeConfig,
) -> Result<Vec<PqField>, ProfileError> {
    let taus = validate_time_grid(t_grid)?;
    rho.check_envelope(&theta0.xi_grid, t_grid)?;

    let columns: Vec<Vec<PqState>> = theta0
        .xi_grid
        .par_iter()
        .zip(theta0.values.par_iter())
        .map(|(&xi, &p0)| {
            let m = mu.eval(xi);
            let rhs = |tau: f64, y: &[f64; 5]| {
                let p = Complex64::new(y[0], y[1]);
                let q = y[2];
                let p2 = p.norm_sqr();
                let i = Complex64::i();
                let dp = -i * m.re * p2 / q * p - i * q.sqrt() * rho.forcing_tau(tau, xi);
                [dp.re, dp.im, -2.0 * m.im * p2, m.re * p2 / q, p2]
            };
            let (ys, _) = ode::integrate(rhs, 0.0, [p0.re, p0.im, 1.0, 0.0, 0.0], &taus, cfg)
                .map_err(|source| ProfileError::Integration { xi, source })?;
            ys.into_iter()
                .zip(t_grid)
                .map(|(y, &t)| {
                    if y[2] < 1.0 - 1e-12 {
                        return Err(ProfileError::QBelowOne { xi, t, q: y[2] });
                    }
                    Ok(PqState {
                        p: Complex64::new(y[0], y[1]),
                        q: y[2],
                        psi: y[3],
                        p_mass: y[4],
                    })
                })
                .collect()
        })
        .collect::<Result<_, ProfileError>>()?;

    let rows = assemble(columns, t_grid.len());
    Ok(rows
        .into_iter()
        .zip(t_grid)
        .map(|(states, &t)| PqField {
            t,
            xi_grid: theta0.xi_grid.clone(),
            states,
        })
        .collect())
}

/// `∫₀^τ dσ / (b + aσ)`, assuming `b > 0` and `b + aτ > 0`.
pub fn phase_integral(a: f64, b: f64, tau: f64) -> f64 {
    let x = a * tau / b;
    if x.abs() < 1e-6 {
        tau / b * (1.0 - x / 2.0 + x * x / 3.0 - x * x * x / 4.0)
    } else {
        x.ln_1p() / a
    }
}

/// Explicit solution of `i∂τA = μ|A|²A`:
///
/// ```text
/// A(τ) = θ∞ exp(−i|θ∞|² Re μ ∫₀^τ dσ/D(σ)) / √D(τ),
/// D(σ) = 1 − 2 Im μ (|θ∞|² σ + Λ).
/// ```
pub fn closed_form_a(
    theta_inf: &ProfileField,
    lambda: &[f64],
    mu: &NuPolynomial,
    tau: f64,
) -> Result<ProfileField, ProfileError> {
    if lambda.len() != theta_inf.len() {
        return Err(ProfileError::MismatchedGrids);
    }
    let values = theta_inf
        .xi_grid
        .iter()
        .zip(&theta_inf.values)
        .zip(lambda)
        .map(|((&xi, &th), &lam)| {
            let m = mu.eval(xi);
            let th2 = th.norm_sqr();
            let a = -2.0 * m.im * th2;
            let b = 1.0 - 2.0 * m.im * lam;
            let radicand = b + a * tau;
            if !(b > 0.0 && radicand > 0.0) {
                return Err(ProfileError::NonPositiveRadicand {
                    xi,
                    value: b.min(radicand),
                });
            }
            let phase = -th2 * m.re * phase_integral(a, b, tau);
            Ok(th * Complex64::from_polar(1.0, phase) / radicand.sqrt())
        })
        .collect::<Result<_, _>>()?;
    Ok(ProfileField {
        xi_grid: theta_inf.xi_grid.clone(),
        values,
        time: TimeCoord::Tau(tau),
        meta: ProfileMeta {
            nu: Some(*mu),
            ..theta_inf.meta.clone()
        },
    })
}

/// Limits of the `(P, Q)` dynamics evaluated at the end of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticData {
    pub tau_end: f64,
    pub p_inf: Vec<Complex64>,
    pub theta_inf: ProfileField,
    pub lambda: Vec<f64>,
    /// `∫₁^T Φ dt`, the phase correction separating `θ∞` from `P∞`.
    pub phi_integral: Vec<f64>,
    /// Bound on `|P∞ − P(T)e^{iΨ(T)}|` from the forcing envelope.
    pub tail_bound: Vec<f64>,
    /// Whether the growth of `Q` beyond `T` is slow enough for the bound.
    pub tail_certified: Vec<bool>,
}

impl AsymptoticData {
    /// `A(0, ξ) = θ∞ / √(1 − 2 Im μ Λ)`.
    pub fn a_at_zero(&self, mu: &NuPolynomial) -> Result<ProfileField, ProfileError> {
        closed_form_a(&self.theta_inf, &self.lambda, mu, 0.0)
    }
}

/// Builds `P∞`, `Λ`, `∫Φ` and `θ∞` from the final state of a `(P, Q)` run.
///
/// With `T` the last time of the run:
/// `P∞ ≈ P(T)e^{iΨ(T)}`, `Λ ≈ ∫₀^{log T}|P|²dτ − |P∞|² log T`,
/// `∫Φ ≈ Ψ(T) − Re μ |P∞|² ∫₀^{log T} dσ/Q∞(σ)` and `θ∞ = P∞ e^{−i∫Φ}`.
pub fn asymptotic_data(
    last: &PqField,
    mu: &NuPolynomial,
    rho: &RemainderSpec,
    delta: f64,
) -> Result<AsymptoticData, ProfileError> {
    if !(delta > 0.0 && delta < rho.kappa) {
        return Err(ProfileError::BadDelta(delta));
    }
    let tau_end = last.t.ln();
    let n = last.states.len();
    let mut p_inf = Vec::with_capacity(n);
    let mut theta = Vec::with_capacity(n);
    let mut lambda = Vec::with_capacity(n);
    let mut phi = Vec::with_capacity(n);
    let mut tail = Vec::with_capacity(n);
    let mut certified = Vec::with_capacity(n);

    for (&xi, s) in last.xi_grid.iter().zip(&last.states) {
        let m = mu.eval(xi);
        let pinf = s.p * Complex64::from_polar(1.0, s.psi);
        let p2 = pinf.norm_sqr();
        let lam = s.p_mass - p2 * tau_end;
        let a = -2.0 * m.im * p2;
        let b = 1.0 - 2.0 * m.im * lam;
        if !(b > 0.0 && b + a * tau_end > 0.0) {
            return Err(ProfileError::NonPositiveRadicand { xi, value: b });
        }
        let phi_int = s.psi - m.re * p2 * phase_integral(a, b, tau_end);

        let t_end = last.t;
        let tb = if rho.is_zero() {
            0.0
        } else {
            rho.amplitude * s.q.sqrt() / (bracket_sq(xi) * (rho.kappa - delta) * t_end.powf(rho.kappa - delta))
        };
        let growth = 2.0 * m.im.abs() * (s.p.norm() + tb).powi(2);

        p_inf.push(pinf);
        theta.push(pinf * Complex64::from_polar(1.0, -phi_int));
        lambda.push(lam);
        phi.push(phi_int);
        tail.push(tb);
        certified.push(growth <= 2.0 * delta * s.q);
    }
    Ok(AsymptoticData {
        tau_end,
        p_inf,
        theta_inf: ProfileField {
            xi_grid: last.xi_grid.clone(),
            values: theta,
            time: TimeCoord::Tau(f64::INFINITY),
            meta: ProfileMeta {
                nu: Some(*mu),
                ..ProfileMeta::default()
            },
        },
        lambda,
        phi_integral: phi,
        tail_bound: tail,
        tail_certified: certified,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lemma21Params {
    pub eps: f64,
    pub kappa: f64,
    pub delta: f64,
    /// Times over which the weighted error must show no growth.
    pub window: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma21Report {
    pub ts: Vec<f64>,
    /// `sup_ξ ⟨ξ⟩² t^{κ−δ} |β − A(log t)| / ε³` at each time.
    pub weighted_sup: Vec<f64>,
    /// `sup_ξ |β − A(log t)|` at each time.
    pub raw_sup: Vec<f64>,
    pub sup: f64,
    /// Least-squares slope of `log W` against `log t` inside the window.
    pub trend_slope: f64,
    /// Max of `W` over the later half of the window divided by the max over
    /// the earlier half.
    pub growth_ratio: f64,
    pub bounded: bool,
}

/// Allowed ratio between late and early maxima of the weighted error.
pub const LEMMA21_GROWTH_LIMIT: f64 = 1.1;

/// Compares a `β` run with `A(log t)` sampled at the same times.
pub fn verify_lemma21(
    beta_run: &[ProfileField],
    a_run: &[ProfileField],
    params: &Lemma21Params,
) -> Result<Lemma21Report, ProfileError> {
    let Lemma21Params {
        eps,
        kappa,
        delta,
        window,
    } = *params;
    if !(delta > 0.0 && delta < kappa) {
        return Err(ProfileError::BadDelta(delta));
    }
    if beta_run.len() != a_run.len() {
        return Err(ProfileError::MismatchedGrids);
    }
    let mut ts = Vec::with_capacity(beta_run.len());
    let mut weighted = Vec::with_capacity(beta_run.len());
    let mut raw = Vec::with_capacity(beta_run.len());
    for (b, a) in beta_run.iter().zip(a_run) {
        let t = b.time.t();
        if b.xi_grid != a.xi_grid || (a.time.tau() - b.time.tau()).abs() > 1e-9 * b.time.tau().abs().max(1.0) {
            return Err(ProfileError::MismatchedGrids);
        }
        let w = t.powf(kappa - delta) / eps.powi(3);
        let mut sup_w = 0.0_f64;
        let mut sup_r = 0.0_f64;
        for ((&xi, vb), va) in b.xi_grid.iter().zip(&b.values).zip(&a.values) {
            let d = (vb - va).norm();
            sup_r = sup_r.max(d);
            sup_w = sup_w.max(bracket_sq(xi) * w * d);
        }
        ts.push(t);
        weighted.push(sup_w);
        raw.push(sup_r);
    }
    let sup = weighted.iter().copied().fold(0.0, f64::max);

    let idx: Vec<usize> = (0..ts.len())
        .filter(|&k| ts[k] >= window.0 && ts[k] <= window.1)
        .collect();
    let (trend_slope, growth_ratio) = if idx.len() >= 2 {
        let pts: Vec<(f64, f64)> = idx
            .iter()
            .map(|&k| (ts[k].ln(), weighted[k].max(f64::MIN_POSITIVE).ln()))
            .collect();
        let half = idx.len() / 2;
        let early = idx[..half.max(1)].iter().map(|&k| weighted[k]).fold(0.0, f64::max);
        let late = idx[half.max(1)..].iter().map(|&k| weighted[k]).fold(0.0, f64::max);
        let ratio = if early > 0.0 { late / early } else if late > 0.0 { f64::INFINITY } else { 1.0 };
        (least_squares_slope(&pts), ratio)
    } else {
        (0.0, 1.0)
    };
    let bounded = sup.is_finite() && growth_ratio <= LEMMA21_GROWTH_LIMIT;
    Ok(Lemma21Report {
        ts,
        weighted_sup: weighted,
        raw_sup: raw,
        sup,
        trend_slope,
        growth_ratio,
        bounded,
    })
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Everything produced by one pass of the harness.
#[derive(Debug, Clone)]
pub struct Lemma21Outcome {
    pub report: Lemma21Report,
    pub asymptotics: AsymptoticData,
    pub beta_run: Vec<ProfileField>,
    pub a_run: Vec<ProfileField>,
}

/// Runs the `(P, Q)` system out to `t_extend` (at least the end of
/// `t_grid`) to build `θ∞, Λ`, integrates `β` independently on `t_grid`, and
/// compares it with `A(log t)`.
pub fn run_lemma21_harness(
    theta0: &ProfileField,
    mu: &NuPolynomial,
    rho: &RemainderSpec,
    t_grid: &[f64],
    t_extend: f64,
    params: &Lemma21Params,
    cfg: &OdeConfig,
) -> Result<Lemma21Outcome, ProfileError> {
    validate_time_grid(t_grid)?;
    let t_last = *t_grid.last().expect("validated as nonempty");
    let mut pq_grid = vec![1.0];
    if t_extend.max(t_last) > 1.0 {
        pq_grid.push(t_extend.max(t_last));
    }
    let pq = integrate_pq(theta0, mu, rho, &pq_grid, cfg)?;
    let asymptotics = asymptotic_data(pq.last().expect("nonempty"), mu, rho, params.delta)?;
    let beta_run = integrate_beta(theta0, mu, rho, t_grid, cfg)?;
    let a_run = t_grid
        .iter()
        .map(|t| closed_form_a(&asymptotics.theta_inf, &asymptotics.lambda, mu, t.ln()))
        .collect::<Result<Vec<_>, _>>()?;
    let report = verify_lemma21(&beta_run, &a_run, params)?;
    Ok(Lemma21Outcome {
        report,
        asymptotics,
        beta_run,
        a_run,
    })
}

/// `n` log-spaced times from `1` to `t_max` (inclusive).
pub fn log_time_grid(t_max: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![1.0];
    }
    let lt = t_max.ln();
    let mut g: Vec<f64> = (0..n).map(|k| (lt * k as f64 / (n - 1) as f64).exp()).collect();
    g[0] = 1.0;
    g[n - 1] = t_max;
    g
}
