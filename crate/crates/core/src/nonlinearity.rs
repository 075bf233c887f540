//! Cubic derivative nonlinearities `N(u, u_x)`, their resonant symbol `ν(ξ)`
//! and the dissipative-structure taxonomy read off from `Im ν`.
//!
//! A nonlinearity is stored in the 17-term basis of cubic monomials in
//! `(u, ū, u_x, ū_x)` that satisfy `N(e^{iθ}, 0) = e^{iθ} N(1, 0)`; the three
//! monomials `u³`, `ū³` and `uū²` are not representable.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Default equality band for the classifier.
pub const DEFAULT_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum NonlinearityError {
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("unknown coefficient key `{0}`")]
    UnknownKey(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Coefficients of `N(u, u_x)`; see [`CubicNonlinearity::evaluate`] for the
/// monomial attached to each field.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CubicNonlinearity {
    pub a: [Complex64; 3],
    pub b: [Complex64; 3],
    pub c: [Complex64; 5],
    pub lambda: [Complex64; 6],
}

impl CubicNonlinearity {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Only `lambda_k` set (1-based index, matching `lambda1..lambda6`).
    pub fn gauge_invariant(k: usize, value: Complex64) -> Self {
        let mut nl = Self::zero();
        nl.lambda[k - 1] = value;
        nl
    }

    /// Evaluates
    ///
    /// ```text
    /// a1 u²u_x + a2 u u_x² + a3 u_x³
    ///   + b1 conj(u²u_x) + b2 conj(u u_x²) + b3 conj(u_x³)
    ///   + c1 ū² u_x + c2 |u|² ū_x + c3 u ū_x² + c4 |u_x|² ū + c5 |u_x|² ū_x
    ///   + λ1 |u|²u + λ2 |u|²u_x + λ3 u² ū_x + λ4 |u_x|²u + λ5 ū u_x² + λ6 |u_x|²u_x
    /// ```
    pub fn evaluate(&self, u: Complex64, ux: Complex64) -> Complex64 {
        let ub = u.conj();
        let uxb = ux.conj();
        let abs_u2 = u.norm_sqr();
        let abs_ux2 = ux.norm_sqr();

        let [a1, a2, a3] = self.a;
        let [b1, b2, b3] = self.b;
        let [c1, c2, c3, c4, c5] = self.c;
        let [l1, l2, l3, l4, l5, l6] = self.lambda;

        let non_gauge = a1 * u * u * ux + a2 * u * ux * ux + a3 * ux * ux * ux;
        let conj_cubed = b1 * ub * ub * uxb + b2 * ub * uxb * uxb + b3 * uxb * uxb * uxb;
        let mixed = c1 * ub * ub * ux
            + c2 * abs_u2 * uxb
            + c3 * u * uxb * uxb
            + c4 * abs_ux2 * ub
            + c5 * abs_ux2 * uxb;
        let gauge = l1 * abs_u2 * u
            + l2 * abs_u2 * ux
            + l3 * u * u * uxb
            + l4 * abs_ux2 * u
            + l5 * ub * ux * ux
            + l6 * abs_ux2 * ux;
        non_gauge + conj_cubed + mixed + gauge
    }

    /// Closed-form symbol `ν(ξ) = λ1 + i(λ2−λ3)ξ + (λ4−λ5)ξ² + iλ6ξ³`.
    pub fn nu(&self) -> NuPolynomial {
        let [l1, l2, l3, l4, l5, l6] = self.lambda;
        let d23 = l2 - l3;
        let d45 = l4 - l5;
        NuPolynomial {
            re_part: [l1.re, -d23.im, d45.re, -l6.im],
            im_part: [l1.im, d23.re, d45.im, l6.re],
        }
    }

    /// `ν(ξ)` by the trapezoidal rule applied to
    /// `(1/2π) ∫₀^{2π} N(e^{iθ}, iξe^{iθ}) e^{−iθ} dθ`.
    ///
    /// The integrand is a trigonometric polynomial of degree at most 4 in
    /// `e^{iθ}`, so the rule is exact (to rounding) for `quad_points >= 8`.
    pub fn nu_contour(&self, xi: f64, quad_points: usize) -> Complex64 {
        let m = quad_points.max(8);
        let mut acc = ZERO;
        for j in 0..m {
            let theta = 2.0 * PI * j as f64 / m as f64;
            let z = Complex64::from_polar(1.0, theta);
            acc += self.evaluate(z, I * xi * z) * z.conj();
        }
        acc / m as f64
    }

    /// Coefficient lookup by the textual key used in coefficient files.
    pub fn coefficient_mut(&mut self, key: &str) -> Result<&mut Complex64, NonlinearityError> {
        let unknown = || NonlinearityError::UnknownKey(key.to_string());
        let (family, idx) = split_key(key).ok_or_else(unknown)?;
        let slot = match family {
            "a" => self.a.get_mut(idx),
            "b" => self.b.get_mut(idx),
            "c" => self.c.get_mut(idx),
            "lambda" | "l" => self.lambda.get_mut(idx),
            _ => None,
        };
        slot.ok_or_else(unknown)
    }

    fn named(&self) -> Vec<(String, Complex64)> {
        let mut out = Vec::with_capacity(17);
        for (name, xs) in [
            ("a", &self.a[..]),
            ("b", &self.b[..]),
            ("c", &self.c[..]),
            ("lambda", &self.lambda[..]),
        ] {
            out.extend(
                xs.iter()
                    .enumerate()
                    .map(|(k, v)| (format!("{name}{}", k + 1), *v)),
            );
        }
        out
    }

    /// Parses the flat `key = re,im` coefficient format. Blank lines and `#`
    /// comments are ignored; missing keys default to zero.
    pub fn parse_coefficients(text: &str) -> Result<Self, NonlinearityError> {
        let mut nl = Self::zero();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() || line.starts_with('[') {
                continue;
            }
            let parse_err = |msg: &str| NonlinearityError::Parse {
                line: lineno + 1,
                msg: msg.to_string(),
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err("expected `key = re,im`"))?;
            let value = parse_complex(value.trim().trim_matches('"'))
                .ok_or_else(|| parse_err("value must be `re,im`"))?;
            *nl.coefficient_mut(key.trim())? = value;
        }
        Ok(nl)
    }

    /// Writes every nonzero coefficient in the `key = re,im` format.
    pub fn to_coefficient_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.named() {
            if v != ZERO {
                s.push_str(&format!("{k} = {:?},{:?}\n", v.re, v.im));
            }
        }
        s
    }
}

fn split_key(key: &str) -> Option<(&str, usize)> {
    let pos = key.find(|c: char| c.is_ascii_digit())?;
    let (family, digits) = key.split_at(pos);
    let idx: usize = digits.parse().ok()?;
    if idx == 0 {
        return None;
    }
    Some((family, idx - 1))
}

/// Parses `re,im` (a bare real is accepted as `re,0`).
pub fn parse_complex(s: &str) -> Option<Complex64> {
    match s.split_once(',') {
        Some((re, im)) => Some(Complex64::new(
            re.trim().parse().ok()?,
            im.trim().parse().ok()?,
        )),
        None => Some(Complex64::new(s.trim().parse().ok()?, 0.0)),
    }
}

/// True iff `|f(e^{iθ},0) − e^{iθ} f(1,0)| <= tol` at `samples` equispaced
/// angles. Works on any evaluator so that forbidden monomials can be probed.
pub fn gauge_condition_holds<F>(f: F, samples: usize, tol: f64) -> bool
where
    F: Fn(Complex64, Complex64) -> Complex64,
{
    let samples = samples.max(3);
    let base = f(Complex64::new(1.0, 0.0), ZERO);
    (0..samples).all(|j| {
        let z = Complex64::from_polar(1.0, 2.0 * PI * j as f64 / samples as f64);
        (f(z, ZERO) - z * base).norm() <= tol
    })
}

/// Structural self-test of the gauge condition for a basis nonlinearity.
pub fn check_gauge_condition(nl: &CubicNonlinearity, samples: usize) -> bool {
    let scale = nl
        .a
        .iter()
        .chain(&nl.b)
        .chain(&nl.c)
        .chain(&nl.lambda)
        .map(|c| c.norm())
        .fold(1.0, f64::max);
    gauge_condition_holds(|u, ux| nl.evaluate(u, ux), samples, 1e-13 * scale)
}

/// `ν(ξ)` as real and imaginary cubic polynomials in `ξ` (ascending powers).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NuPolynomial {
    pub re_part: [f64; 4],
    pub im_part: [f64; 4],
}

fn horner(c: &[f64; 4], x: f64) -> f64 {
    ((c[3] * x + c[2]) * x + c[1]) * x + c[0]
}

impl NuPolynomial {
    pub fn from_parts(re_part: [f64; 4], im_part: [f64; 4]) -> Self {
        Self { re_part, im_part }
    }

    /// Purely imaginary symbol `i·(p0 + p1ξ + p2ξ² + p3ξ³)`.
    pub fn imaginary(im_part: [f64; 4]) -> Self {
        Self {
            re_part: [0.0; 4],
            im_part,
        }
    }

    pub fn eval(&self, xi: f64) -> Complex64 {
        Complex64::new(self.re(xi), self.im(xi))
    }

    pub fn re(&self, xi: f64) -> f64 {
        horner(&self.re_part, xi)
    }

    pub fn im(&self, xi: f64) -> f64 {
        horner(&self.im_part, xi)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            re_part: self.re_part.map(|c| c * s),
            im_part: self.im_part.map(|c| c * s),
        }
    }

    /// Parses `c0;c1;c2;c3` where each `ck` is a complex `re,im` coefficient
    /// of `ξ^k`. Fewer than four terms are zero-padded.
    pub fn parse_inline(s: &str) -> Option<Self> {
        let mut nu = Self::default();
        let terms: Vec<&str> = s.split(';').map(str::trim).collect();
        if terms.is_empty() || terms.len() > 4 {
            return None;
        }
        for (k, t) in terms.iter().enumerate() {
            let c = parse_complex(t)?;
            nu.re_part[k] = c.re;
            nu.im_part[k] = c.im;
        }
        Some(nu)
    }
}

impl fmt::Display for NuPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut terms = Vec::new();
        for k in 0..4 {
            let c = Complex64::new(self.re_part[k], self.im_part[k]);
            if c == ZERO {
                continue;
            }
            let coef = match (c.re, c.im) {
                (re, 0.0) => format!("{re}"),
                (0.0, im) => format!("{im}i"),
                (re, im) => format!("({re}{im:+}i)"),
            };
            terms.push(match k {
                0 => coef,
                1 => format!("{coef}·ξ"),
                _ => format!("{coef}·ξ^{k}"),
            });
        }
        if terms.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", terms.join(" + "))
        }
    }
}

impl FromStr for NuPolynomial {
    type Err = NonlinearityError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse_inline(s).ok_or(NonlinearityError::Parse {
            line: 1,
            msg: format!("cannot parse polynomial `{s}`"),
        })
    }
}

/// Taxonomy of `Im ν`, listed from strongest to weakest label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DissipativityClass {
    /// `Im ν <= −C(1+ξ²)` for some `C > 0`.
    StronglyDissipative,
    /// `sup Im ν < 0`.
    StrictlyDissipative,
    /// `Im ν = −c0(ξ−ξ0)²` with `c0 > 0`.
    WeaklyDissipative,
    /// `Im ν ≡ 0`.
    NullImaginary,
    /// `Im ν <= 0` but none of the above; unreachable for exact cubic
    /// symbols, kept for synthetic or tolerance-edge inputs.
    DissipativeNonStrict,
    /// `Im ν > 0` somewhere.
    Indefinite,
}

impl DissipativityClass {
    pub fn is_dissipative(self) -> bool {
        !matches!(self, Self::Indefinite)
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::StronglyDissipative => "StronglyDissipative",
            Self::StrictlyDissipative => "StrictlyDissipative",
            Self::WeaklyDissipative => "WeaklyDissipative",
            Self::NullImaginary => "NullImaginary",
            Self::DissipativeNonStrict => "DissipativeNonStrict",
            Self::Indefinite => "Indefinite",
        }
    }
}

impl fmt::Display for DissipativityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DissipativityReport {
    pub class: DissipativityClass,
    pub c0: Option<f64>,
    pub xi0: Option<f64>,
    pub sup_im_nu: Option<f64>,
    pub best_c_star: Option<f64>,
    pub tolerance_used: f64,
    /// Coefficient normalization `max(1, max_k |p_k|)`.
    pub scale: f64,
}

impl DissipativityReport {
    fn bare(class: DissipativityClass, tol: f64, scale: f64) -> Self {
        Self {
            class,
            c0: None,
            xi0: None,
            sup_im_nu: None,
            best_c_star: None,
            tolerance_used: tol,
            scale,
        }
    }

    /// `−sup Im ν` when the supremum is negative.
    pub fn c_star(&self) -> Option<f64> {
        self.sup_im_nu.filter(|s| *s < 0.0).map(|s| -s)
    }
}

/// Classifies `Im ν(ξ) = p0 + p1ξ + p2ξ² + p3ξ³`.
///
/// Coefficients are normalized by `scale = max(1, max|p_k|)` and compared
/// against `tol`. The quadratic case is decided by the normalized vertex
/// value `(p0 − p1²/(4p2))/scale`, which has the sign of the discriminant.
pub fn classify(nu: &NuPolynomial, tol: f64) -> Result<DissipativityReport, NonlinearityError> {
    if !(tol > 0.0) {
        return Err(NonlinearityError::BadTolerance(tol));
    }
    let p = nu.im_part;
    let scale = p.iter().fold(1.0_f64, |m, c| m.max(c.abs()));
    let q = p.map(|c| c / scale);
    let is_zero = |x: f64| x.abs() <= tol;
    use DissipativityClass::*;

    if q.iter().all(|&c| is_zero(c)) {
        let mut r = DissipativityReport::bare(NullImaginary, tol, scale);
        r.sup_im_nu = Some(0.0);
        return Ok(r);
    }
    if !is_zero(q[3]) {
        return Ok(DissipativityReport::bare(Indefinite, tol, scale));
    }
    if q[2] < -tol {
        let (p0, p1, p2) = (p[0], p[1], p[2]);
        let vertex = p0 - p1 * p1 / (4.0 * p2);
        let v = vertex / scale;
        let mut r = DissipativityReport::bare(Indefinite, tol, scale);
        if is_zero(v) {
            r.class = WeaklyDissipative;
            r.c0 = Some(-p2);
            r.xi0 = Some(-p1 / (2.0 * p2));
            r.sup_im_nu = Some(0.0);
        } else if v < 0.0 {
            r.class = StronglyDissipative;
            r.sup_im_nu = Some(vertex);
            r.best_c_star = Some(-max_ratio_over_bracket(p0, p1, p2));
        } else {
            r.sup_im_nu = Some(vertex);
        }
        return Ok(r);
    }
    if is_zero(q[2]) && is_zero(q[1]) {
        // Constant imaginary part: q0 is nonzero here.
        let mut r = DissipativityReport::bare(Indefinite, tol, scale);
        r.sup_im_nu = Some(p[0]);
        if q[0] < 0.0 {
            r.class = StrictlyDissipative;
        }
        return Ok(r);
    }
    // Leftover: p2 > 0, or p2 ≈ 0 with a nonzero linear term. Both are
    // positive somewhere for exact polynomials; the sampled check only guards
    // tolerance-edge inputs.
    let nonpositive = sample_max(nu, 1e3, 20_001) <= tol * scale;
    let class = if nonpositive {
        DissipativeNonStrict
    } else {
        Indefinite
    };
    Ok(DissipativityReport::bare(class, tol, scale))
}

/// `max_ξ (p0 + p1ξ + p2ξ²)/(1 + ξ²)`, including the limit `ξ → ±∞`.
///
/// With `x = (1, ξ)` the ratio is the Rayleigh quotient of
/// `[[p0, p1/2], [p1/2, p2]]`, so the maximum is its largest eigenvalue.
pub fn max_ratio_over_bracket(p0: f64, p1: f64, p2: f64) -> f64 {
    let mean = 0.5 * (p0 + p2);
    let half_diff = 0.5 * (p0 - p2);
    mean + half_diff.hypot(0.5 * p1)
}

fn sample_max(nu: &NuPolynomial, half_width: f64, n: usize) -> f64 {
    (0..n)
        .map(|k| -half_width + 2.0 * half_width * k as f64 / (n - 1) as f64)
        .map(|x| nu.im(x))
        .fold(f64::NEG_INFINITY, f64::max)
}
