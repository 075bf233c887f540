//! Dormand–Prince 5(4) integrator for small fixed-size real systems.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("output abscissae must be nondecreasing and start at or after the initial point")]
    BadOutputGrid,
    #[error("step budget of {max_steps} exhausted at x = {x}")]
    TooManySteps { x: f64, max_steps: usize },
    #[error("step size underflow at x = {x} (h = {h:e})")]
    StepUnderflow { x: f64, h: f64 },
    #[error("non-finite state at x = {0}")]
    NonFinite(f64),
}

#[derive(Debug, Clone, Copy)]
pub struct OdeConfig {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Optional cap on the step size (useful when the forcing oscillates).
    pub h_max: f64,
}

impl Default for OdeConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-14,
            max_steps: 2_000_000,
            h_max: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Difference between the 5th- and embedded 4th-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn lin<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// Integrates `y' = f(x, y)` from `(x0, y0)` and returns the state at each
/// requested abscissa (which must be nondecreasing and `>= x0`).
pub fn integrate<const N: usize, F>(
    f: F,
    x0: f64,
    y0: [f64; N],
    outputs: &[f64],
    cfg: &OdeConfig,
) -> Result<(Vec<[f64; N]>, OdeStats), OdeError>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    if outputs.first().is_some_and(|&x| x < x0) || outputs.windows(2).any(|w| w[1] < w[0]) {
        return Err(OdeError::BadOutputGrid);
    }
    let mut stats = OdeStats::default();
    let mut res = Vec::with_capacity(outputs.len());
    let mut x = x0;
    let mut y = y0;
    let mut k1 = f(x, &y);
    stats.evaluations += 1;

    let span = outputs.last().map_or(0.0, |&e| e - x0);
    let mut h = initial_step(&y, &k1, span, cfg);
    let mut steps = 0usize;

    for &target in outputs {
        while x < target {
            if steps >= cfg.max_steps {
                return Err(OdeError::TooManySteps {
                    x,
                    max_steps: cfg.max_steps,
                });
            }
            let remaining = target - x;
            let mut h_try = h.min(remaining).min(cfg.h_max);
            // Avoid leaving a sliver step before the output point.
            if remaining - h_try < 1e-3 * h_try {
                h_try = remaining;
            }
            if h_try <= 1e-14 * x.abs().max(1.0) {
                return Err(OdeError::StepUnderflow { x, h: h_try });
            }

            let k2 = f(x + C2 * h_try, &lin(&y, h_try, &[(A21, &k1)]));
            let k3 = f(x + C3 * h_try, &lin(&y, h_try, &[(A31, &k1), (A32, &k2)]));
            let k4 = f(
                x + C4 * h_try,
                &lin(&y, h_try, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
            );
            let k5 = f(
                x + C5 * h_try,
                &lin(&y, h_try, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            );
            let k6 = f(
                x + h_try,
                &lin(
                    &y,
                    h_try,
                    &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                ),
            );
            let y_new = lin(
                &y,
                h_try,
                &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
            );
            let x_new = if h_try == remaining { target } else { x + h_try };
            let k7 = f(x_new, &y_new);
            stats.evaluations += 6;
            steps += 1;

            let mut err_sq = 0.0;
            for i in 0..N {
                let e = h_try
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = cfg.atol + cfg.rtol * y[i].abs().max(y_new[i].abs());
                err_sq += (e / sc) * (e / sc);
            }
            let err = (err_sq / N as f64).sqrt();
            if !err.is_finite() {
                if y_new.iter().all(|v| v.is_finite()) {
                    h = 0.1 * h_try;
                    stats.rejected += 1;
                    continue;
                }
                return Err(OdeError::NonFinite(x_new));
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if err <= 1.0 {
                let clipped = h_try < h;
                x = x_new;
                y = y_new;
                k1 = k7;
                stats.accepted += 1;
                // A step shortened to land on an output says little about
                // the natural step size.
                h = if clipped { (h_try * factor).max(h) } else { h_try * factor };
            } else {
                stats.rejected += 1;
                h = h_try * factor.min(1.0);
            }
        }
        res.push(y);
    }
    Ok((res, stats))
}

fn initial_step<const N: usize>(y: &[f64; N], dy: &[f64; N], span: f64, cfg: &OdeConfig) -> f64 {
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for i in 0..N {
        let sc = cfg.atol + cfg.rtol * y[i].abs();
        d0 += (y[i] / sc).powi(2);
        d1 += (dy[i] / sc).powi(2);
    }
    let (d0, d1) = ((d0 / N as f64).sqrt(), (d1 / N as f64).sqrt());
    let h = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h = h.min(cfg.h_max);
    if span > 0.0 {
        h.min(span)
    } else {
        h.max(1e-6)
    }
}
