//! Integrating-factor pseudospectral solver for
//! `i u_t + ½ u_xx = N(u, u_x)` on a periodic box `[−L/2, L/2)`.
//!
//! The linear flow `e^{−iξ²t/2}` is applied exactly in Fourier space and the
//! nonlinear term is advanced with classical RK4 in the interaction picture
//! (Lawson's scheme). Every nonlinear evaluation is dealiased with the 2/3
//! rule.

mod initial;
mod run;

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nonlinearity::CubicNonlinearity;

pub use initial::{boundary_check, BoundaryCheck, InitialData};
pub use run::{
    advance_to, growth_exponent, probe_dt, run_experiment, scaled_hat, DtChoice, RunConfig,
    RunOutput, Schedule,
};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("grid size must be a power of two >= 8, got {0}")]
    BadGridSize(usize),
    #[error("domain length must be positive, got {0}")]
    BadLength(f64),
    #[error("time step must be positive, got {0}")]
    BadStep(f64),
    #[error("state has {got} samples but the grid has {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("non-finite values after the step ending at t = {t}")]
    NonFinite { t: f64, last_finite: Box<SpectralState> },
    #[error("{0}")]
    BoundaryUnsafe(BoundaryCheck),
    #[error("no time step down to {0:e} passes the stability probe")]
    ProbeFailed(f64),
    #[error("bad schedule `{0}`")]
    BadSchedule(String),
    #[error("invalid initial data: {0}")]
    BadInitialData(String),
}

/// Uniform periodic grid and its FFT plans.
pub struct SpectralGrid {
    pub n: usize,
    pub length: f64,
    pub dx: f64,
    pub x: Vec<f64>,
    /// Angular frequencies in FFT order.
    pub xi: Vec<f64>,
    /// `true` for modes kept by the 2/3 rule (`|k| <= n/3`).
    pub keep: Vec<bool>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("n", &self.n)
            .field("length", &self.length)
            .finish()
    }
}

impl SpectralGrid {
    pub fn new(length: f64, n: usize) -> Result<Arc<Self>, SolverError> {
        if n < 8 || !n.is_power_of_two() {
            return Err(SolverError::BadGridSize(n));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(SolverError::BadLength(length));
        }
        let dx = length / n as f64;
        let x = (0..n).map(|j| -0.5 * length + dx * j as f64).collect();
        let signed = |k: usize| -> i64 {
            if k < n / 2 {
                k as i64
            } else {
                k as i64 - n as i64
            }
        };
        let xi = (0..n).map(|k| 2.0 * PI * signed(k) as f64 / length).collect();
        let keep = (0..n).map(|k| 3 * signed(k).unsigned_abs() as usize <= n).collect();
        let mut planner = FftPlanner::new();
        Ok(Arc::new(Self {
            n,
            length,
            dx,
            x,
            xi,
            keep,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }))
    }

    pub fn d_xi(&self) -> f64 {
        2.0 * PI / self.length
    }

    /// Largest retained `|ξ|`.
    pub fn xi_cutoff(&self) -> f64 {
        2.0 * PI * (self.n / 3) as f64 / self.length
    }

    pub fn fft(&self, data: &mut [Complex64]) {
        self.forward.process(data);
    }

    /// Normalized inverse (`ifft(fft(v)) = v`).
    pub fn ifft(&self, data: &mut [Complex64]) {
        self.inverse.process(data);
        let s = 1.0 / self.n as f64;
        data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn dealias(&self, data: &mut [Complex64]) {
        for (v, &k) in data.iter_mut().zip(&self.keep) {
            if !k {
                *v = ZERO;
            }
        }
    }

    /// `∫|u|² dx` by the rectangle rule (spectrally exact for band-limited u).
    pub fn mass(&self, u: &[Complex64]) -> f64 {
        self.dx * u.iter().map(|v| v.norm_sqr()).sum::<f64>()
    }

    /// Free propagator `e^{−iξ²h/2}` for every mode.
    pub fn propagator(&self, h: f64) -> Vec<Complex64> {
        self.xi.iter().map(|x| Complex64::from_polar(1.0, -0.5 * x * x * h)).collect()
    }
}

/// Solution snapshot with physical and Fourier representations kept in sync.
#[derive(Debug, Clone)]
pub struct SpectralState {
    pub grid: Arc<SpectralGrid>,
    pub t: f64,
    pub u: Vec<Complex64>,
    /// Unnormalized DFT of `u`.
    pub u_hat: Vec<Complex64>,
}

impl SpectralState {
    /// Samples `u0` on the grid and removes the aliased modes.
    pub fn from_fn<F: Fn(f64) -> Complex64>(grid: Arc<SpectralGrid>, t: f64, u0: F) -> Self {
        let u: Vec<Complex64> = grid.x.iter().map(|&x| u0(x)).collect();
        Self::from_physical(grid, t, u).expect("length matches by construction")
    }

    pub fn from_physical(grid: Arc<SpectralGrid>, t: f64, u: Vec<Complex64>) -> Result<Self, SolverError> {
        if u.len() != grid.n {
            return Err(SolverError::SizeMismatch {
                expected: grid.n,
                got: u.len(),
            });
        }
        let mut u_hat = u;
        grid.fft(&mut u_hat);
        grid.dealias(&mut u_hat);
        Ok(Self::from_spectral(grid, t, u_hat))
    }

    pub fn from_spectral(grid: Arc<SpectralGrid>, t: f64, u_hat: Vec<Complex64>) -> Self {
        let mut u = u_hat.clone();
        grid.ifft(&mut u);
        Self { grid, t, u, u_hat }
    }

    pub fn l2_norm(&self) -> f64 {
        self.grid.mass(&self.u).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.u_hat.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// `u_x` by spectral differentiation.
    pub fn derivative(&self) -> Vec<Complex64> {
        let mut d: Vec<Complex64> = self
            .u_hat
            .iter()
            .zip(&self.grid.xi)
            .map(|(v, &x)| Complex64::new(0.0, x) * v)
            .collect();
        self.grid.ifft(&mut d);
        d
    }

    /// Applies the exact free flow for time `h`.
    pub fn free_evolve(&self, h: f64) -> Self {
        let hat = self
            .u_hat
            .iter()
            .zip(self.grid.propagator(h))
            .map(|(v, e)| v * e)
            .collect();
        Self::from_spectral(self.grid.clone(), self.t + h, hat)
    }
}

/// Free-flow-factored profile `α(t, ξ) = F[U(−t)u(t)](ξ)` on the retained
/// modes, sorted by frequency, in the unitary continuum normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaField {
    pub t: f64,
    pub xi: Vec<f64>,
    pub alpha: Vec<Complex64>,
    pub d_xi: f64,
}

impl AlphaField {
    /// `(∫|α|² dξ)^{1/2}` by the rectangle rule.
    pub fn l2_norm(&self) -> f64 {
        (self.d_xi * self.alpha.iter().map(|a| a.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// `max ⟨ξ⟩²|α|`.
    pub fn envelope(&self) -> f64 {
        self.xi
            .iter()
            .zip(&self.alpha)
            .map(|(x, a)| (1.0 + x * x) * a.norm())
            .fold(0.0, f64::max)
    }
}

/// `α_k = (dx/√(2π)) (−1)^k e^{itξ_k²/2} û_k`; the sign accounts for the grid
/// starting at `−L/2`, and the scale makes `‖α‖_{L²_ξ} = ‖u‖_{L²_x}`.
pub fn compute_alpha(state: &SpectralState) -> AlphaField {
    let g = &state.grid;
    let scale = g.dx / (2.0 * PI).sqrt();
    let mut pairs: Vec<(f64, Complex64)> = (0..g.n)
        .filter(|&k| g.keep[k])
        .map(|k| {
            let xi = g.xi[k];
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let phase = Complex64::from_polar(scale * sign, 0.5 * state.t * xi * xi);
            (xi, phase * state.u_hat[k])
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (xi, alpha) = pairs.into_iter().unzip();
    AlphaField {
        t: state.t,
        xi,
        alpha,
        d_xi: g.d_xi(),
    }
}

/// `2 Im ∫ ū N(u, u_x) dx`, the rate of change of `‖u‖²`.
pub fn mass_flux(state: &SpectralState, nl: &CubicNonlinearity) -> f64 {
    let ux = state.derivative();
    let s: f64 = state
        .u
        .iter()
        .zip(&ux)
        .map(|(u, d)| (u.conj() * nl.evaluate(*u, *d)).im)
        .sum();
    2.0 * state.grid.dx * s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub l2: f64,
    pub h3: f64,
    /// `‖Ju‖_{H²}` with `Ju = x u + i t u_x`.
    pub j_h2: f64,
    pub mass_flux: f64,
    pub alpha_env: f64,
}

fn sobolev_norm(grid: &SpectralGrid, hat: &[Complex64], order: i32) -> f64 {
    let s: f64 = hat
        .iter()
        .zip(&grid.xi)
        .map(|(v, x)| (1.0 + x * x).powi(order) * v.norm_sqr())
        .sum();
    (grid.length / (grid.n * grid.n) as f64 * s).sqrt()
}

pub fn diagnostics(state: &SpectralState, nl: &CubicNonlinearity) -> DiagnosticsRecord {
    let g = &state.grid;
    let ux = state.derivative();
    let mut ju: Vec<Complex64> = g
        .x
        .iter()
        .zip(&state.u)
        .zip(&ux)
        .map(|((&x, u), d)| x * u + Complex64::new(0.0, state.t) * d)
        .collect();
    g.fft(&mut ju);
    DiagnosticsRecord {
        t: state.t,
        l2: state.l2_norm(),
        h3: sobolev_norm(g, &state.u_hat, 3),
        j_h2: sobolev_norm(g, &ju, 2),
        mass_flux: mass_flux(state, nl),
        alpha_env: compute_alpha(state).envelope(),
    }
}

/// Lawson RK4 stepper with cached propagators for one step size.
pub struct Evolver {
    grid: Arc<SpectralGrid>,
    nl: CubicNonlinearity,
    dt: f64,
    half: Vec<Complex64>,
    full: Vec<Complex64>,
    work_u: Vec<Complex64>,
    work_ux: Vec<Complex64>,
}

impl Evolver {
    pub fn new(grid: Arc<SpectralGrid>, nl: CubicNonlinearity, dt: f64) -> Result<Self, SolverError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SolverError::BadStep(dt));
        }
        let n = grid.n;
        Ok(Self {
            half: grid.propagator(0.5 * dt),
            full: grid.propagator(dt),
            grid,
            nl,
            dt,
            work_u: vec![ZERO; n],
            work_ux: vec![ZERO; n],
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn nonlinearity(&self) -> &CubicNonlinearity {
        &self.nl
    }

    /// `−i · mask · FFT[N(u, u_x)]` for the spectral state `hat`.
    fn rhs(&mut self, hat: &[Complex64], out: &mut [Complex64]) {
        let g = &self.grid;
        self.work_u.copy_from_slice(hat);
        for ((d, v), &x) in self.work_ux.iter_mut().zip(hat).zip(&g.xi) {
            *d = Complex64::new(0.0, x) * v;
        }
        g.ifft(&mut self.work_u);
        g.ifft(&mut self.work_ux);
        for ((o, u), d) in out.iter_mut().zip(&self.work_u).zip(&self.work_ux) {
            *o = self.nl.evaluate(*u, *d);
        }
        g.fft(out);
        for (o, &k) in out.iter_mut().zip(&g.keep) {
            *o = if k { Complex64::new(o.im, -o.re) } else { ZERO };
        }
    }

    /// Advances by the cached step `dt`.
    pub fn step(&mut self, state: &SpectralState) -> Result<SpectralState, SolverError> {
        let (half, full) = (std::mem::take(&mut self.half), std::mem::take(&mut self.full));
        let r = self.step_with(state, self.dt, &half, &full);
        self.half = half;
        self.full = full;
        r
    }

    /// Advances by an arbitrary `h > 0` (propagators built on the fly).
    pub fn step_by(&mut self, state: &SpectralState, h: f64) -> Result<SpectralState, SolverError> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(SolverError::BadStep(h));
        }
        if h == self.dt {
            return self.step(state);
        }
        let half = self.grid.propagator(0.5 * h);
        let full = self.grid.propagator(h);
        self.step_with(state, h, &half, &full)
    }

    fn step_with(
        &mut self,
        state: &SpectralState,
        h: f64,
        half: &[Complex64],
        full: &[Complex64],
    ) -> Result<SpectralState, SolverError> {
        let n = self.grid.n;
        let v = &state.u_hat;
        let mut k1 = vec![ZERO; n];
        let mut k2 = vec![ZERO; n];
        let mut k3 = vec![ZERO; n];
        let mut k4 = vec![ZERO; n];
        let mut tmp = vec![ZERO; n];

        self.rhs(v, &mut k1);
        for i in 0..n {
            tmp[i] = half[i] * (v[i] + 0.5 * h * k1[i]);
        }
        self.rhs(&tmp, &mut k2);
        for i in 0..n {
            tmp[i] = half[i] * v[i] + 0.5 * h * k2[i];
        }
        self.rhs(&tmp, &mut k3);
        for i in 0..n {
            tmp[i] = full[i] * v[i] + h * half[i] * k3[i];
        }
        self.rhs(&tmp, &mut k4);
        let mut next = vec![ZERO; n];
        for i in 0..n {
            next[i] = full[i] * v[i]
                + h / 6.0 * (full[i] * k1[i] + 2.0 * half[i] * (k2[i] + k3[i]) + k4[i]);
        }
        let out = SpectralState::from_spectral(self.grid.clone(), state.t + h, next);
        if !out.is_finite() {
            return Err(SolverError::NonFinite {
                t: out.t,
                last_finite: Box::new(state.clone()),
            });
        }
        Ok(out)
    }
}

/// One step of size `dt` with a fresh [`Evolver`].
pub fn step(state: &SpectralState, dt: f64, nl: &CubicNonlinearity) -> Result<SpectralState, SolverError> {
    Evolver::new(state.grid.clone(), *nl, dt)?.step(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_state(grid: &Arc<SpectralGrid>, sigma: f64, eps: f64) -> SpectralState {
        SpectralState::from_fn(grid.clone(), 0.0, |x| Complex64::new(eps * (-x * x / (2.0 * sigma * sigma)).exp(), 0.0))
    }

    /// `σ/√(σ²+it) · exp(−x²/(2(σ²+it)))`
    fn free_gaussian(sigma: f64, t: f64, x: f64) -> Complex64 {
        let s2 = Complex64::new(sigma * sigma, t);
        sigma / s2.sqrt() * (-(x * x) / (2.0 * s2)).exp()
    }

    #[test]
    fn grid_validation() {
        assert!(matches!(SpectralGrid::new(10.0, 100), Err(SolverError::BadGridSize(100))));
        assert!(matches!(SpectralGrid::new(-1.0, 64), Err(SolverError::BadLength(_))));
        let g = SpectralGrid::new(2.0 * PI, 16).unwrap();
        assert_eq!(g.xi[1], 1.0);
        assert_eq!(g.xi[15], -1.0);
        assert_eq!(g.keep.iter().filter(|k| **k).count(), 11);
    }

    #[test]
    fn transform_round_trip() {
        let g = SpectralGrid::new(40.0, 256).unwrap();
        let s = gaussian_state(&g, 1.5, 0.7);
        let mut back = s.u_hat.clone();
        g.ifft(&mut back);
        let sup = s.u.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let err = back.iter().zip(&s.u).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err <= 1e-12 * sup);
    }

    #[test]
    fn derivative_of_gaussian() {
        let g = SpectralGrid::new(40.0, 256).unwrap();
        let s = gaussian_state(&g, 1.0, 1.0);
        let d = s.derivative();
        for (x, v) in g.x.iter().zip(&d) {
            assert!((v.re + x * (-x * x / 2.0).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn free_step_matches_exact_solution() {
        let g = SpectralGrid::new(64.0, 256).unwrap();
        let s0 = gaussian_state(&g, 1.0, 1.0);
        let mut ev = Evolver::new(g.clone(), CubicNonlinearity::zero(), 0.05).unwrap();
        let mut s = s0.clone();
        for _ in 0..40 {
            s = ev.step(&s).unwrap();
        }
        assert!((s.t - 2.0).abs() < 1e-12);
        for (x, v) in g.x.iter().zip(&s.u) {
            assert!((v - free_gaussian(1.0, s.t, *x)).norm() < 1e-10);
        }
        let a0 = compute_alpha(&s0);
        let a1 = compute_alpha(&s);
        let drift = a0.alpha.iter().zip(&a1.alpha).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        assert!(drift < 1e-10);
    }

    #[test]
    fn alpha_normalization() {
        let g = SpectralGrid::new(60.0, 512).unwrap();
        let s = gaussian_state(&g, 2.0, 0.3);
        let a = compute_alpha(&s);
        assert!((a.l2_norm() - s.l2_norm()).abs() < 1e-12 * s.l2_norm());
        // F[ε e^{−x²/(2σ²)}] = ε σ e^{−σ²ξ²/2}
        for (xi, v) in a.xi.iter().zip(&a.alpha) {
            let exact = 0.3 * 2.0 * (-2.0 * xi * xi).exp();
            assert!((v - exact).norm() < 1e-12, "xi {xi}");
        }
    }

    #[test]
    fn mass_flux_examples() {
        let g = SpectralGrid::new(40.0, 256).unwrap();
        let s = gaussian_state(&g, 1.0, 0.5);
        assert_eq!(mass_flux(&s, &CubicNonlinearity::zero()), 0.0);
        let real = CubicNonlinearity::gauge_invariant(1, Complex64::new(2.0, 0.0));
        assert!(mass_flux(&s, &real).abs() < 1e-15);
        let damp = CubicNonlinearity::gauge_invariant(1, Complex64::new(0.0, -1.0));
        let quartic = g.dx * s.u.iter().map(|v| v.norm_sqr().powi(2)).sum::<f64>();
        assert!((mass_flux(&s, &damp) + 2.0 * quartic).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_step() {
        let g = SpectralGrid::new(40.0, 64).unwrap();
        let s = gaussian_state(&g, 1.0, 0.5);
        assert!(matches!(step(&s, 0.0, &CubicNonlinearity::zero()), Err(SolverError::BadStep(_))));
        assert!(matches!(step(&s, -1.0, &CubicNonlinearity::zero()), Err(SolverError::BadStep(_))));
    }

    #[test]
    fn blowup_returns_last_finite_state() {
        // Anti-damping with a huge amplitude overflows within a few steps.
        let g = SpectralGrid::new(40.0, 64).unwrap();
        let s0 = gaussian_state(&g, 1.0, 1e100);
        let nl = CubicNonlinearity::gauge_invariant(1, Complex64::new(0.0, 1.0));
        let mut ev = Evolver::new(g, nl, 0.1).unwrap();
        let mut s = s0;
        let mut hit = None;
        for _ in 0..50 {
            match ev.step(&s) {
                Ok(next) => s = next,
                Err(SolverError::NonFinite { t, last_finite }) => {
                    hit = Some((t, last_finite));
                    break;
                }
                Err(e) => panic!("{e}"),
            }
        }
        let (t, last) = hit.expect("overflow expected");
        assert!(last.is_finite());
        assert!(last.t < t);
    }
}
