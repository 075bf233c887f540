//! The decay integral `S(τ) = ∫ |θ|²/(1 + (ξ−ξ0)²|θ|²τ) dξ`, its upper and
//! lower certificates, profile-level `L²` decay curves and rate fits.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nonlinearity::{classify, DissipativityClass, NuPolynomial, DEFAULT_TOL};
use crate::profile::ProfileField;
use crate::quad::{self, QuadConfig, QuadError};

#[derive(Debug, Error)]
pub enum DecayError {
    #[error("tau must be >= 1, got {0}")]
    TauBelowOne(f64),
    #[error("t must be >= e, got {0}")]
    TimeBelowE(f64),
    #[error("profile is unbounded or non-finite; the integral diverges")]
    DivergentTail,
    #[error("quadrature failed: {0}")]
    Quadrature(#[from] QuadError),
    #[error("upper bound violated at tau = {tau}: S = {s:e} > {bound:e}")]
    UpperBoundViolated { tau: f64, s: f64, bound: f64 },
    #[error("lower bound violated at tau = {tau}: S = {s:e} < {bound:e}")]
    LowerBoundViolated { tau: f64, s: f64, bound: f64 },
    #[error("profile has no interval with a positive infimum")]
    MissingInterval,
    #[error("interval [{lo}, {hi}] does not contain xi0 = {xi0}")]
    IntervalMissesCenter { lo: f64, hi: f64, xi0: f64 },
    #[error("infimum of |θ|² on the interval must be positive, got {0}")]
    NonPositiveInf(f64),
    #[error("{0} has no finite decay prediction")]
    UnsupportedClass(DissipativityClass),
    #[error("fit window holds {0} points; at least 8 are needed")]
    DegenerateWindow(usize),
    #[error("curve values must be positive (found {0} at index {1})")]
    NonPositiveValue(f64, usize),
    #[error("curve abscissae and values differ in length or are not increasing")]
    MalformedCurve,
    #[error("invalid profile description: {0}")]
    InvalidProfile(String),
}

/// One Gaussian bump `amp · exp(−(ξ−center)²/(2 width²))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub amp: f64,
    pub center: f64,
    pub width: f64,
}

impl Bump {
    fn eval(&self, xi: f64) -> f64 {
        let z = (xi - self.center) / self.width;
        self.amp * (-0.5 * z * z).exp()
    }
}

/// How `|θ(ξ)|` is represented.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ThetaShape {
    Constant { value: f64 },
    Indicator { lo: f64, hi: f64, height: f64 },
    Gaussian(Bump),
    /// Sum of nonnegative bumps.
    Bumps(Vec<Bump>),
    /// `|θ|²` at sorted nodes, linear in between and zero outside.
    Tabulated { xi: Vec<f64>, abs2: Vec<f64> },
}

impl ThetaShape {
    pub fn abs2(&self, xi: f64) -> f64 {
        match self {
            Self::Constant { value } => value * value,
            Self::Indicator { lo, hi, height } => {
                if xi >= *lo && xi <= *hi {
                    height * height
                } else {
                    0.0
                }
            }
            Self::Gaussian(b) => b.eval(xi).powi(2),
            Self::Bumps(bs) => bs.iter().map(|b| b.eval(xi)).sum::<f64>().powi(2),
            Self::Tabulated { xi: xs, abs2 } => {
                let n = xs.len();
                if n == 0 || xi < xs[0] || xi > xs[n - 1] {
                    return 0.0;
                }
                let k = xs.partition_point(|&x| x <= xi);
                if k == 0 {
                    return abs2[0];
                }
                if k >= n {
                    return abs2[n - 1];
                }
                let f = (xi - xs[k - 1]) / (xs[k] - xs[k - 1]);
                abs2[k - 1] + f * (abs2[k] - abs2[k - 1])
            }
        }
    }

    /// Finite support, if any.
    fn support(&self) -> Option<(f64, f64)> {
        match self {
            Self::Indicator { lo, hi, .. } => Some((*lo, *hi)),
            Self::Tabulated { xi, .. } if !xi.is_empty() => Some((xi[0], xi[xi.len() - 1])),
            _ => None,
        }
    }

    fn sup_norm(&self) -> f64 {
        match self {
            Self::Constant { value } => value.abs(),
            Self::Indicator { height, .. } => height.abs(),
            Self::Gaussian(b) => b.amp.abs(),
            Self::Bumps(bs) => bumps_sup(bs),
            Self::Tabulated { abs2, .. } => abs2.iter().copied().fold(0.0, f64::max).sqrt(),
        }
    }

    fn inf_abs2_on(&self, lo: f64, hi: f64) -> f64 {
        match self {
            Self::Constant { value } => value * value,
            Self::Indicator { lo: a, hi: b, height } => {
                if lo >= *a && hi <= *b {
                    height * height
                } else {
                    0.0
                }
            }
            Self::Gaussian(_) => self.abs2(lo).min(self.abs2(hi)),
            Self::Bumps(_) => {
                let n = 4001;
                (0..n)
                    .map(|k| self.abs2(lo + (hi - lo) * k as f64 / (n - 1) as f64))
                    .fold(f64::INFINITY, f64::min)
            }
            Self::Tabulated { xi, abs2 } => {
                let inner = xi
                    .iter()
                    .zip(abs2)
                    .filter(|(x, _)| **x > lo && **x < hi)
                    .map(|(_, w)| *w);
                inner.fold(self.abs2(lo).min(self.abs2(hi)), f64::min)
            }
        }
    }
}

fn bumps_sup(bs: &[Bump]) -> f64 {
    if bs.is_empty() {
        return 0.0;
    }
    let f = |x: f64| bs.iter().map(|b| b.eval(x)).sum::<f64>();
    let lo = bs.iter().map(|b| b.center - 4.0 * b.width).fold(f64::INFINITY, f64::min);
    let hi = bs.iter().map(|b| b.center + 4.0 * b.width).fold(f64::NEG_INFINITY, f64::max);
    let n = 20_001;
    let h = (hi - lo) / (n - 1) as f64;
    let mut best = (0.0, lo);
    for x in (0..n).map(|k| lo + h * k as f64).chain(bs.iter().map(|b| b.center)) {
        let v = f(x);
        if v > best.0 {
            best = (v, x);
        }
    }
    // Golden-section polish around the best sample.
    let (mut a, mut b) = (best.1 - h, best.1 + h);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    best.0.max(f(0.5 * (a + b)))
}

/// `|θ|` with the center `ξ0` and the constants the lemmas use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaProfile {
    pub shape: ThetaShape,
    pub xi0: f64,
    pub sup_norm: f64,
    /// `(lo, hi, inf_{[lo,hi]} |θ|²)`.
    pub inf_on_interval: Option<(f64, f64, f64)>,
}

impl ThetaProfile {
    pub fn new(shape: ThetaShape, xi0: f64) -> Result<Self, DecayError> {
        if let ThetaShape::Tabulated { xi, abs2 } = &shape {
            if xi.len() != abs2.len() || xi.windows(2).any(|w| w[1] <= w[0]) {
                return Err(DecayError::InvalidProfile("table nodes must be sorted and match values".into()));
            }
            if abs2.iter().any(|w| *w < 0.0) {
                return Err(DecayError::InvalidProfile("tabulated |θ|² must be nonnegative".into()));
            }
        }
        if let ThetaShape::Bumps(bs) = &shape {
            if bs.iter().any(|b| b.amp < 0.0 || b.width <= 0.0) {
                return Err(DecayError::InvalidProfile("bumps need amp >= 0 and width > 0".into()));
            }
        }
        let sup_norm = shape.sup_norm();
        Ok(Self {
            shape,
            xi0,
            sup_norm,
            inf_on_interval: None,
        })
    }

    pub fn constant(value: f64, xi0: f64) -> Self {
        Self::new(ThetaShape::Constant { value }, xi0).expect("valid")
    }

    pub fn indicator(lo: f64, hi: f64, height: f64, xi0: f64) -> Self {
        Self::new(ThetaShape::Indicator { lo, hi, height }, xi0).expect("valid")
    }

    /// Records `inf |θ|²` over `[lo, hi]`, which must contain `ξ0`.
    pub fn with_interval(mut self, lo: f64, hi: f64) -> Result<Self, DecayError> {
        if !(lo <= self.xi0 && self.xi0 <= hi) {
            return Err(DecayError::IntervalMissesCenter { lo, hi, xi0: self.xi0 });
        }
        self.inf_on_interval = Some((lo, hi, self.shape.inf_abs2_on(lo, hi)));
        Ok(self)
    }

    pub fn abs2(&self, xi: f64) -> f64 {
        self.shape.abs2(xi)
    }
}

fn decay_quad() -> QuadConfig {
    QuadConfig {
        rel_tol: 1e-12,
        max_intervals: 40_000,
        ..Default::default()
    }
}

/// `∫ w/(1 + q·w·τ) dξ` with `w = |θ|²`, `q = (ξ−ξ0)²`, split at
/// `ξ0 ± m τ^{−1/2}` where `m = 1/‖θ‖∞`.
pub fn eval_s(theta: &ThetaProfile, tau: f64) -> Result<f64, DecayError> {
    eval_s_with(theta, tau, &decay_quad())
}

pub fn eval_s_with(theta: &ThetaProfile, tau: f64, cfg: &QuadConfig) -> Result<f64, DecayError> {
    if !(tau >= 1.0) {
        return Err(DecayError::TauBelowOne(tau));
    }
    if !theta.sup_norm.is_finite() {
        return Err(DecayError::DivergentTail);
    }
    if theta.sup_norm == 0.0 {
        return Ok(0.0);
    }
    let xi0 = theta.xi0;
    let half = tau.sqrt().recip() / theta.sup_norm;
    let mut cuts = vec![xi0 - half, xi0, xi0 + half];
    match &theta.shape {
        ThetaShape::Indicator { lo, hi, .. } => cuts.extend([*lo, *hi]),
        ThetaShape::Tabulated { xi, .. } if xi.len() <= 2048 => cuts.extend(xi.iter().copied()),
        ThetaShape::Bumps(bs) => cuts.extend(bs.iter().map(|b| b.center)),
        ThetaShape::Gaussian(b) => cuts.push(b.center),
        _ => {}
    }
    let (a, b) = theta.shape.support().unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let integrand = |xi: f64| {
        let w = theta.abs2(xi);
        let d = xi - xi0;
        w / (1.0 + d * d * w * tau)
    };
    Ok(quad::integrate(integrand, a, b, &cuts, cfg)?.value)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpperBoundReport {
    pub taus: Vec<f64>,
    pub s_values: Vec<f64>,
    /// `S(τ)√τ / (4‖θ‖∞)`, absent for the zero profile.
    pub ratios: Vec<Option<f64>>,
    pub trivial: bool,
}

/// Checks `S(τ) <= 4‖θ‖∞ τ^{−1/2}` at every `τ`.
pub fn upper_bound_cert(theta: &ThetaProfile, taus: &[f64]) -> Result<UpperBoundReport, DecayError> {
    let slack = 1.0 + decay_quad().rel_tol * 10.0;
    let mut s_values = Vec::with_capacity(taus.len());
    let mut ratios = Vec::with_capacity(taus.len());
    for &tau in taus {
        let s = eval_s(theta, tau)?;
        let bound = 4.0 * theta.sup_norm / tau.sqrt();
        if s > bound * slack {
            return Err(DecayError::UpperBoundViolated { tau, s, bound });
        }
        s_values.push(s);
        ratios.push((bound > 0.0).then(|| s / bound));
    }
    Ok(UpperBoundReport {
        taus: taus.to_vec(),
        s_values,
        ratios,
        trivial: theta.sup_norm == 0.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBoundReport {
    pub c2: f64,
    pub m: f64,
    pub a: f64,
    pub b: f64,
    pub taus: Vec<f64>,
    pub s_values: Vec<f64>,
    /// `S(τ)√τ / C₂`.
    pub ratios: Vec<f64>,
}

/// `C₂ = ∫_{−m}^{m} b/(1 + aη²) dη = (2b/√a) arctan(m√a)`.
pub fn lower_constant(a: f64, b: f64, m: f64) -> f64 {
    if a == 0.0 {
        2.0 * b * m
    } else {
        2.0 * b / a.sqrt() * (m * a.sqrt()).atan()
    }
}

/// Checks `S(τ) >= C₂ τ^{−1/2}`. `m` defaults to the largest half-width with
/// `[ξ0−m, ξ0+m]` inside the recorded interval.
pub fn lower_bound_cert(theta: &ThetaProfile, taus: &[f64], m: Option<f64>) -> Result<LowerBoundReport, DecayError> {
    let (lo, hi, b) = theta.inf_on_interval.ok_or(DecayError::MissingInterval)?;
    if !(b > 0.0) {
        return Err(DecayError::NonPositiveInf(b));
    }
    let max_m = (theta.xi0 - lo).min(hi - theta.xi0);
    let m = m.map_or(max_m, |m| m.min(max_m));
    let a = theta.sup_norm * theta.sup_norm;
    let c2 = lower_constant(a, b, m);
    let slack = 1.0 - decay_quad().rel_tol * 10.0;
    let mut s_values = Vec::with_capacity(taus.len());
    let mut ratios = Vec::with_capacity(taus.len());
    for &tau in taus {
        let s = eval_s(theta, tau)?;
        let bound = c2 / tau.sqrt();
        if s < bound * slack {
            return Err(DecayError::LowerBoundViolated { tau, s, bound });
        }
        s_values.push(s);
        ratios.push(s / bound);
    }
    Ok(LowerBoundReport {
        c2,
        m,
        a,
        b,
        taus: taus.to_vec(),
        s_values,
        ratios,
    })
}

/// `‖A(τ)‖` from the modulus law
/// `|A(τ,ξ)|² = |A0|²/(1 − 2 Im ν |A0|² τ)`, with `|A0|²` linear between
/// grid nodes.
pub fn predicted_l2_tau(a0: &ProfileField, nu: &NuPolynomial, tau: f64) -> Result<f64, DecayError> {
    let report = classify(nu, DEFAULT_TOL).expect("default tolerance is positive");
    if report.class == DissipativityClass::Indefinite {
        return Err(DecayError::UnsupportedClass(report.class));
    }
    let g = &a0.xi_grid;
    if g.len() < 2 {
        return Ok(a0.values.first().map_or(0.0, |v| v.norm()));
    }
    let integrand = |xi: f64| {
        let w = a0.abs2_at(xi);
        // Guard the tolerance band of the classifier against tiny positive Im ν.
        let im = nu.im(xi).min(0.0);
        w / (1.0 - 2.0 * im * w * tau)
    };
    let cfg = QuadConfig {
        rel_tol: 1e-11,
        max_intervals: 200_000,
        ..Default::default()
    };
    let mut cuts: Vec<f64> = g.clone();
    if let Some(x0) = report.xi0 {
        cuts.push(x0);
    }
    Ok(quad::integrate(integrand, g[0], g[g.len() - 1], &cuts, &cfg)?.value.sqrt())
}

/// `predicted_l2_tau` at `τ = log t`, for `t >= e`.
pub fn predicted_l2(a0: &ProfileField, nu: &NuPolynomial, t: f64) -> Result<f64, DecayError> {
    if !(t >= std::f64::consts::E) {
        return Err(DecayError::TimeBelowE(t));
    }
    predicted_l2_tau(a0, nu, t.ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Abscissa {
    /// `τ = log t`
    Tau,
    /// physical time `t`
    T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    pub abscissa: Abscissa,
    pub points: Vec<f64>,
    pub values: Vec<f64>,
    pub label: String,
}

impl DecayCurve {
    pub fn new(abscissa: Abscissa, points: Vec<f64>, values: Vec<f64>, label: impl Into<String>) -> Result<Self, DecayError> {
        if points.len() != values.len() || points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(DecayError::MalformedCurve);
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(DecayError::NonPositiveValue(*v, i));
        }
        Ok(Self {
            abscissa,
            points,
            values,
            label: label.into(),
        })
    }

    pub fn taus(&self) -> Vec<f64> {
        match self.abscissa {
            Abscissa::Tau => self.points.clone(),
            Abscissa::T => self.points.iter().map(|t| t.ln()).collect(),
        }
    }
}

/// Samples `predicted_l2_tau` at each `τ`.
pub fn predicted_curve(a0: &ProfileField, nu: &NuPolynomial, taus: &[f64], label: &str) -> Result<DecayCurve, DecayError> {
    use rayon::prelude::*;
    let values = taus
        .par_iter()
        .map(|&tau| predicted_l2_tau(a0, nu, tau))
        .collect::<Result<Vec<_>, _>>()?;
    DecayCurve::new(Abscissa::Tau, taus.to_vec(), values, label)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateModel {
    /// `value ≈ K τ^p` with `τ = log t`.
    LogPower,
    /// `value ≈ C ε (1 + ε² log(t+1))^{−1/4}`.
    Theorem11Form,
}

impl std::str::FromStr for RateModel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "log_power" => Ok(Self::LogPower),
            "theorem11_form" => Ok(Self::Theorem11Form),
            _ => Err(format!("unknown model '{s}' (expected log_power or theorem11_form)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub model: RateModel,
    pub exponent: f64,
    pub prefactor: f64,
    /// RMS of the log-space residuals.
    pub residual: f64,
    /// Window in `τ`.
    pub window: (f64, f64),
    pub points: usize,
    /// Fitted `ε` for the `Theorem11Form` model.
    pub eps_eff: Option<f64>,
}

/// Fits a decay law to the curve restricted to `τ ∈ window`.
pub fn fit_rate(curve: &DecayCurve, model: RateModel, window: (f64, f64)) -> Result<RateFit, DecayError> {
    let taus = curve.taus();
    let pts: Vec<(f64, f64)> = taus
        .iter()
        .zip(&curve.values)
        .filter(|(t, _)| **t >= window.0 && **t <= window.1)
        .map(|(t, v)| (*t, *v))
        .collect();
    if pts.len() < 8 {
        return Err(DecayError::DegenerateWindow(pts.len()));
    }
    if let Some((i, (_, v))) = pts.iter().enumerate().find(|(_, (_, v))| !(*v > 0.0)) {
        return Err(DecayError::NonPositiveValue(*v, i));
    }
    if pts[0].0 < 1.0 {
        return Err(DecayError::TauBelowOne(pts[0].0));
    }
    let used = (pts[0].0, pts[pts.len() - 1].0);
    match model {
        RateModel::LogPower => {
            let xy: Vec<(f64, f64)> = pts.iter().map(|(t, v)| (t.ln(), v.ln())).collect();
            let (slope, intercept) = linear_fit(&xy);
            let residual = rms(xy.iter().map(|(x, y)| y - (intercept + slope * x)));
            Ok(RateFit {
                model,
                exponent: slope,
                prefactor: intercept.exp(),
                residual,
                window: used,
                points: pts.len(),
                eps_eff: None,
            })
        }
        RateModel::Theorem11Form => {
            // L = log(t+1) = τ + log(1 + e^{−τ})
            let data: Vec<(f64, f64)> = pts.iter().map(|(t, v)| (t + (-t).exp().ln_1p(), v.ln())).collect();
            // For fixed e = ε², ln K is the mean of ln v + ¼ ln(1 + eL).
            let profile = |ln_e: f64| -> (f64, f64) {
                let e = ln_e.exp();
                let shifted: Vec<f64> = data.iter().map(|(l, y)| y + 0.25 * (e * l).ln_1p()).collect();
                let ln_k = shifted.iter().sum::<f64>() / shifted.len() as f64;
                (ln_k, rms(shifted.iter().map(|s| s - ln_k)))
            };
            let (mut lo, mut hi) = (-40.0, 20.0);
            let n = 241;
            let mut best = (f64::INFINITY, lo);
            for k in 0..n {
                let u = lo + (hi - lo) * k as f64 / (n - 1) as f64;
                let r = profile(u).1;
                if r < best.0 {
                    best = (r, u);
                }
            }
            let step = (hi - lo) / (n - 1) as f64;
            lo = best.1 - step;
            hi = best.1 + step;
            let g = 0.5 * (5f64.sqrt() - 1.0);
            for _ in 0..100 {
                let c = hi - g * (hi - lo);
                let d = lo + g * (hi - lo);
                if profile(c).1 < profile(d).1 {
                    hi = d;
                } else {
                    lo = c;
                }
            }
            let ln_e = 0.5 * (lo + hi);
            let (ln_k, residual) = profile(ln_e);
            let eps_eff = (0.5 * ln_e).exp();
            Ok(RateFit {
                model,
                exponent: -0.25,
                prefactor: ln_k.exp() / eps_eff,
                residual,
                window: used,
                points: pts.len(),
                eps_eff: Some(eps_eff),
            })
        }
    }
}

fn linear_fit(xy: &[(f64, f64)]) -> (f64, f64) {
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

fn rms(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), r| (s + r * r, n + 1));
    if n == 0 {
        0.0
    } else {
        (s / n as f64).sqrt()
    }
}

/// `n` log-spaced values on `[a, b]`.
pub fn log_space(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    let mut v: Vec<f64> = (0..n).map(|k| (la + (lb - la) * k as f64 / (n - 1) as f64).exp()).collect();
    v[0] = a;
    v[n - 1] = b;
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{uniform_grid, TimeCoord};
    use num_complex::Complex64;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn constant_profile_closed_form() {
        let th = ThetaProfile::constant(1.0, 0.0);
        for tau in [1.0, 10.0, 1e3, 1e6] {
            let s = eval_s(&th, tau).unwrap();
            assert!((s * tau.sqrt() - PI).abs() < 1e-9, "tau {tau}: {s}");
        }
        let r = upper_bound_cert(&th, &[1.0, 1e6]).unwrap();
        assert!(r.ratios.iter().all(|x| (x.unwrap() - PI / 4.0).abs() < 1e-9));
    }

    #[test]
    fn tabulated_wide_constant() {
        let xi = uniform_grid(-1e4, 1e4, 3);
        let th = ThetaProfile::new(ThetaShape::Tabulated { xi, abs2: vec![1.0; 3] }, 0.0).unwrap();
        let s = eval_s(&th, 1.0).unwrap();
        // The table truncates the 1/ξ² tails: π − 2 arctan-tail ≈ π − 2e-4.
        assert!((s - (PI - 2.0 * (1e-4f64).atan())).abs() < 1e-9);
    }

    #[test]
    fn indicator_closed_form() {
        let th = ThetaProfile::indicator(-1.0, 1.0, 1.0, 0.0).with_interval(-1.0, 1.0).unwrap();
        for tau in [1.0f64, 4.0, 1e3, 1e6] {
            let exact = 2.0 / tau.sqrt() * tau.sqrt().atan();
            assert!((eval_s(&th, tau).unwrap() - exact).abs() < 1e-12 * exact.max(1.0));
        }
        let r = lower_bound_cert(&th, &[1.0, 10.0, 1e6], None).unwrap();
        assert!((r.c2 - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn lower_bound_on_constant() {
        let th = ThetaProfile::constant(1.0, 0.0).with_interval(-1.0, 1.0).unwrap();
        let r = lower_bound_cert(&th, &[1.0, 1e3], Some(1.0)).unwrap();
        assert!((r.c2 - FRAC_PI_2).abs() < 1e-15);
        assert!(r.ratios.iter().all(|x| (x - 2.0).abs() < 1e-8));
    }

    #[test]
    fn errors() {
        let th = ThetaProfile::constant(1.0, 0.0);
        assert!(matches!(eval_s(&th, 0.5), Err(DecayError::TauBelowOne(_))));
        assert!(matches!(lower_bound_cert(&th, &[1.0], None), Err(DecayError::MissingInterval)));
        assert!(matches!(th.clone().with_interval(1.0, 2.0), Err(DecayError::IntervalMissesCenter { .. })));
        let g = ThetaProfile::new(ThetaShape::Gaussian(Bump { amp: 1.0, center: 5.0, width: 0.1 }), 0.0)
            .unwrap()
            .with_interval(-0.1, 0.1)
            .unwrap();
        assert!(matches!(lower_bound_cert(&g, &[1.0], None), Err(DecayError::NonPositiveInf(_))));
        let unbounded = ThetaProfile::constant(f64::INFINITY, 0.0);
        assert!(matches!(eval_s(&unbounded, 1.0), Err(DecayError::DivergentTail)));
    }

    #[test]
    fn zero_profile_is_trivial() {
        let th = ThetaProfile::constant(0.0, 0.0);
        let r = upper_bound_cert(&th, &[1.0, 10.0]).unwrap();
        assert!(r.trivial);
        assert!(r.ratios.iter().all(Option::is_none));
    }

    #[test]
    fn bumps_sup_is_located() {
        let bs = vec![
            Bump { amp: 1.0, center: 0.0, width: 1.0 },
            Bump { amp: 1.0, center: 0.5, width: 1.0 },
        ];
        // Symmetric pair: max at 0.25 equals 2 e^{−1/32}.
        let th = ThetaProfile::new(ThetaShape::Bumps(bs), 0.0).unwrap();
        assert!((th.sup_norm - 2.0 * (-1.0f64 / 32.0).exp()).abs() < 1e-12);
    }

    fn gaussian_a0(amp: f64) -> ProfileField {
        ProfileField::from_fn(uniform_grid(-12.0, 12.0, 2401), |x| Complex64::new(amp * (-0.5 * x * x).exp(), 0.0), TimeCoord::Tau(0.0)).unwrap()
    }

    #[test]
    fn predicted_l2_null_is_constant() {
        let a0 = gaussian_a0(1.0);
        let nu = NuPolynomial::from_parts([1.0, 0.0, 0.0, 0.0], [0.0; 4]);
        let base = predicted_l2(&a0, &nu, std::f64::consts::E).unwrap();
        assert!((base - PI.sqrt().sqrt()).abs() < 1e-6);
        for t in [1e2, 1e6, 1e300] {
            assert!((predicted_l2(&a0, &nu, t).unwrap() - base).abs() < 1e-14);
        }
    }

    #[test]
    fn predicted_l2_rejects_indefinite() {
        let nu = NuPolynomial::imaginary([0.0, 0.0, 1.0, 0.0]);
        assert!(matches!(predicted_l2(&gaussian_a0(1.0), &nu, 10.0), Err(DecayError::UnsupportedClass(_))));
        assert!(matches!(predicted_l2(&gaussian_a0(1.0), &nu, 2.0), Err(DecayError::TimeBelowE(_))));
    }

    #[test]
    fn fit_recovers_generators() {
        let taus = log_space(1e2, 1e6, 41);
        let c = DecayCurve::new(Abscissa::Tau, taus.clone(), taus.iter().map(|t| t.powf(-0.25)).collect(), "a").unwrap();
        let f = fit_rate(&c, RateModel::LogPower, (1e2, 1e6)).unwrap();
        assert!((f.exponent + 0.25).abs() < 1e-12 && f.residual < 1e-12);
        let c = DecayCurve::new(Abscissa::Tau, taus.clone(), taus.iter().map(|t| 3.0 * t.powf(-0.5)).collect(), "b").unwrap();
        let f = fit_rate(&c, RateModel::LogPower, (1e2, 1e6)).unwrap();
        assert!((f.exponent + 0.5).abs() < 1e-12 && (f.prefactor - 3.0).abs() < 1e-10);
    }

    #[test]
    fn theorem11_fit_recovers_parameters() {
        let ts = log_space(10.0, 1e12, 30);
        let (c, eps) = (2.0, 0.3);
        let vals = ts.iter().map(|t| c * eps * (1.0 + eps * eps * (t + 1.0f64).ln()).powf(-0.25)).collect();
        let curve = DecayCurve::new(Abscissa::T, ts, vals, "x").unwrap();
        let f = fit_rate(&curve, RateModel::Theorem11Form, (0.0, f64::INFINITY)).unwrap();
        assert!((f.eps_eff.unwrap() - eps).abs() < 1e-6, "{f:?}");
        assert!((f.prefactor - c).abs() < 1e-5);
        assert!(f.residual < 1e-10);
    }

    #[test]
    fn fit_errors() {
        let c = DecayCurve::new(Abscissa::Tau, vec![1.0, 2.0, 3.0], vec![1.0; 3], "x").unwrap();
        assert!(matches!(fit_rate(&c, RateModel::LogPower, (1.0, 3.0)), Err(DecayError::DegenerateWindow(3))));
        assert!(matches!(DecayCurve::new(Abscissa::Tau, vec![1.0], vec![0.0], "x"), Err(DecayError::NonPositiveValue(..))));
        assert!("nope".parse::<RateModel>().is_err());
    }
}
