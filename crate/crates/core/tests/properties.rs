use num_complex::Complex64;
use proptest::prelude::*;

use dnls_core::decay::{
    eval_s, eval_s_with, fit_rate, log_space, lower_bound_cert, predicted_curve, predicted_l2_tau, Bump,
    RateModel, ThetaProfile, ThetaShape,
};
use dnls_core::nonlinearity::{
    check_gauge_condition, classify, CubicNonlinearity, DissipativityClass, NuPolynomial, DEFAULT_TOL,
};
use dnls_core::ode::OdeConfig;
use dnls_core::profile::{
    integrate_beta, integrate_pq, log_time_grid, uniform_grid, ProfileField, RemainderSpec, TimeCoord,
};
use dnls_core::quad::QuadConfig;

fn complex() -> impl Strategy<Value = Complex64> {
    (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(re, im)| Complex64::new(re, im))
}

fn nonlinearity() -> impl Strategy<Value = CubicNonlinearity> {
    prop::collection::vec(complex(), 17).prop_map(|v| CubicNonlinearity {
        a: [v[0], v[1], v[2]],
        b: [v[3], v[4], v[5]],
        c: [v[6], v[7], v[8], v[9], v[10]],
        lambda: [v[11], v[12], v[13], v[14], v[15], v[16]],
    })
}

/// Coefficients that are either exactly zero or clearly away from it.
fn coefficient() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), 0.01..1.0f64, -1.0..-0.01f64]
}

fn im_polynomial() -> impl Strategy<Value = NuPolynomial> {
    prop_oneof![
        [coefficient(), coefficient(), coefficient(), coefficient()].prop_map(NuPolynomial::imaginary),
        // Weakly dissipative by construction.
        (0.01..5.0f64, -5.0..5.0f64).prop_map(|(c0, x0)| NuPolynomial::imaginary([-c0 * x0 * x0, 2.0 * c0 * x0, -c0, 0.0])),
        // Strongly dissipative: −c0(ξ−ξ0)² − d.
        (0.01..5.0f64, -5.0..5.0f64, 0.01..3.0f64)
            .prop_map(|(c0, x0, d)| NuPolynomial::imaginary([-c0 * x0 * x0 - d, 2.0 * c0 * x0, -c0, 0.0])),
    ]
}

fn dense_grid() -> Vec<f64> {
    let mut g = uniform_grid(-1e3, 1e3, 200_001);
    g.extend(uniform_grid(-10.0, 10.0, 20_001));
    g
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn contour_matches_closed_form(nl in nonlinearity(), xi in -10.0..10.0f64) {
        let scale = 1.0 + xi.abs().powi(3);
        prop_assert!((nl.nu_contour(xi, 16) - nl.nu().eval(xi)).norm() <= 1e-12 * scale * 10.0);
    }

    #[test]
    fn symbol_ignores_non_gauge_terms(mut nl in nonlinearity(), xi in -10.0..10.0f64) {
        nl.lambda = [Complex64::new(0.0, 0.0); 6];
        prop_assert_eq!(nl.nu(), NuPolynomial::default());
        prop_assert!(nl.nu_contour(xi, 16).norm() <= 1e-12 * (1.0 + xi.abs().powi(3)) * 10.0);
    }

    #[test]
    fn every_instance_satisfies_gauge_condition(nl in nonlinearity()) {
        prop_assert!(check_gauge_condition(&nl, 64));
    }

    #[test]
    fn weakly_round_trip(c0 in 1e-3..1e3f64, x0 in -50.0..50.0f64) {
        let p = NuPolynomial::imaginary([-c0 * x0 * x0, 2.0 * c0 * x0, -c0, 0.0]);
        let r = classify(&p, DEFAULT_TOL).unwrap();
        prop_assert_eq!(r.class, DissipativityClass::WeaklyDissipative);
        prop_assert!((r.c0.unwrap() - c0).abs() <= 1e-9 * c0);
        prop_assert!((r.xi0.unwrap() - x0).abs() <= 1e-9 * x0.abs().max(1.0));
    }

    #[test]
    fn scaling_covariance(p in im_polynomial(), s in 0.1..10.0f64) {
        let r = classify(&p, DEFAULT_TOL).unwrap();
        let q = classify(&p.scaled(s), DEFAULT_TOL).unwrap();
        prop_assert_eq!(r.class, q.class);
        let close = |a: Option<f64>, b: Option<f64>, f: f64| match (a, b) {
            (Some(a), Some(b)) => (a * f - b).abs() <= 1e-9 * (a * f).abs().max(1e-12),
            (None, None) => true,
            _ => false,
        };
        prop_assert!(close(r.c0, q.c0, s));
        prop_assert!(close(r.sup_im_nu, q.sup_im_nu, s));
        prop_assert!(close(r.best_c_star, q.best_c_star, s));
        prop_assert!(close(r.xi0, q.xi0, 1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn classifier_soundness(p in im_polynomial()) {
        let tol = DEFAULT_TOL;
        let r = classify(&p, tol).unwrap();
        let band = |x: f64| 10.0 * tol * r.scale * (1.0 + x * x);
        let grid = dense_grid();
        use DissipativityClass::*;
        match r.class {
            NullImaginary => prop_assert!(grid.iter().all(|&x| p.im(x).abs() <= band(x) * (1.0 + x.abs()))),
            WeaklyDissipative => {
                let (c0, x0) = (r.c0.unwrap(), r.xi0.unwrap());
                prop_assert!(c0 > 0.0);
                prop_assert!(grid.iter().all(|&x| (p.im(x) + c0 * (x - x0).powi(2)).abs() <= band(x)));
            }
            StronglyDissipative => {
                let c = r.best_c_star.unwrap();
                prop_assert!(c > 0.0);
                prop_assert!(grid.iter().all(|&x| p.im(x) <= -c * (1.0 + x * x) + band(x)));
            }
            StrictlyDissipative => {
                let s = r.sup_im_nu.unwrap();
                prop_assert!(s < 0.0);
                prop_assert!(grid.iter().all(|&x| p.im(x) <= s + band(x)));
            }
            DissipativeNonStrict => prop_assert!(grid.iter().all(|&x| p.im(x) <= band(x))),
            Indefinite => {
                let [_, p1, p2, _] = p.im_part;
                let vertex = if p2 != 0.0 { -p1 / (2.0 * p2) } else { 0.0 };
                prop_assert!(grid.iter().chain([vertex].iter()).any(|&x| p.im(x) > 0.0));
            }
        }
    }
}

fn dissipative_mu() -> impl Strategy<Value = NuPolynomial> {
    (0.0..2.0f64, -2.0..2.0f64, 0.0..1.0f64, [-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -0.2..0.2f64])
        .prop_map(|(c0, x0, d, re)| NuPolynomial::from_parts(re, [-c0 * x0 * x0 - d, 2.0 * c0 * x0, -c0, 0.0]))
}

fn theta0(eps: f64, width: f64) -> ProfileField {
    ProfileField::from_fn(
        uniform_grid(-4.0, 4.0, 9),
        |x| Complex64::from_polar(eps * (-x * x / (2.0 * width * width)).exp(), 0.3 * x),
        TimeCoord::T(1.0),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn profile_dissipation_laws(mu in dissipative_mu(), eps in 0.05..1.5f64, width in 0.5..3.0f64) {
        let th = theta0(eps, width);
        let ts = log_time_grid(1e6, 13);
        let cfg = OdeConfig::default();
        let beta = integrate_beta(&th, &mu, &RemainderSpec::zero(), &ts, &cfg).unwrap();
        let pq = integrate_pq(&th, &mu, &RemainderSpec::zero(), &ts, &cfg).unwrap();
        for k in 0..th.len() {
            let xi = th.xi_grid[k];
            let w0 = th.values[k].norm_sqr();
            for j in 0..ts.len() {
                let b = beta[j].values[k];
                // Exact modulus law.
                let exact = w0 / (1.0 - 2.0 * mu.im(xi) * w0 * ts[j].ln());
                prop_assert!((b.norm_sqr() - exact).abs() <= 1e-8 * exact);
                // Cross-oracle against P/√Q.
                let rec = pq[j].states[k].beta();
                prop_assert!((rec - b).norm() <= 1e-8 * th.values[k].norm().max(1e-300));
                if j > 0 {
                    prop_assert!(b.norm() <= beta[j - 1].values[k].norm() * (1.0 + 1e-9));
                    prop_assert!(pq[j].states[k].q >= pq[j - 1].states[k].q * (1.0 - 1e-12));
                }
                prop_assert!(pq[j].states[k].q >= 1.0 - 1e-12);
            }
        }
    }
}

fn bump_profile() -> impl Strategy<Value = ThetaProfile> {
    (prop::collection::vec((0.05..3.0f64, -4.0..4.0f64, 0.05..2.0f64), 1..4), 0.1..2.0f64).prop_map(|(bs, w)| {
        // Center on the first bump so that an interval with positive infimum exists.
        let xi0 = bs[0].1;
        let bumps = bs.into_iter().map(|(amp, center, width)| Bump { amp, center, width }).collect();
        ThetaProfile::new(ThetaShape::Bumps(bumps), xi0)
            .unwrap()
            .with_interval(xi0 - 0.25 * w, xi0 + 0.25 * w)
            .unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn s_is_pinched_and_monotone(theta in bump_profile()) {
        let taus = [1.0, 3.0, 10.0, 1e2, 1e3, 1e4, 1e6];
        let low = lower_bound_cert(&theta, &taus, None).unwrap();
        let mut prev = f64::INFINITY;
        for (&tau, &s) in taus.iter().zip(&low.s_values) {
            prop_assert!(s <= prev * (1.0 + 1e-11));
            prev = s;
            let scaled = s * tau.sqrt();
            prop_assert!(scaled >= low.c2 * (1.0 - 1e-11));
            prop_assert!(scaled <= 4.0 * theta.sup_norm * (1.0 + 1e-11));
        }
    }

    #[test]
    fn quadrature_refinement_is_stable(theta in bump_profile(), log_tau in 0.0..14.0f64) {
        let tau = log_tau.exp();
        let base = eval_s(&theta, tau).unwrap();
        let doubled = eval_s_with(&theta, tau, &QuadConfig { initial_splits: 2, rel_tol: 1e-13, max_intervals: 80_000, ..Default::default() }).unwrap();
        prop_assert!((base - doubled).abs() <= 1e-9 * base);
    }
}

fn gaussian_a0(amp: f64, width: f64, shift: f64) -> ProfileField {
    ProfileField::from_fn(
        uniform_grid(-15.0, 15.0, 1201),
        |x| Complex64::new(amp * (-(x - shift).powi(2) / (2.0 * width * width)).exp(), 0.0),
        TimeCoord::Tau(0.0),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn predicted_l2_is_nonincreasing(mu in dissipative_mu(), amp in 0.1..3.0f64, width in 0.3..2.0f64) {
        let a0 = gaussian_a0(amp, width, 0.5);
        let mut prev = f64::INFINITY;
        for tau in log_space(1.0, 1e6, 13) {
            let v = predicted_l2_tau(&a0, &mu, tau).unwrap();
            prop_assert!(v <= prev * (1.0 + 1e-10));
            prev = v;
        }
    }

    #[test]
    fn null_class_is_constant(re in [-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64], amp in 0.1..3.0f64) {
        let nu = NuPolynomial::from_parts(re, [0.0; 4]);
        let a0 = gaussian_a0(amp, 1.0, 0.0);
        let base = predicted_l2_tau(&a0, &nu, 0.0).unwrap();
        for tau in [1.0, 1e3, 1e6] {
            prop_assert!((predicted_l2_tau(&a0, &nu, tau).unwrap() - base).abs() <= 1e-12 * base);
        }
    }

    #[test]
    fn strictly_dissipative_rate_floor(c_star in 0.1..5.0f64, amp in 0.1..10.0f64, width in 0.3..3.0f64, shift in -2.0..2.0f64) {
        let a0 = gaussian_a0(amp, width, shift);
        let nu = NuPolynomial::imaginary([-c_star, 0.0, 0.0, 0.0]);
        let taus = log_space(1e2, 1e6, 41);
        let curve = predicted_curve(&a0, &nu, &taus, "strict").unwrap();
        let fit = fit_rate(&curve, RateModel::LogPower, (1e2, 1e6)).unwrap();
        prop_assert!(fit.exponent >= -0.5 - 0.03, "exponent {}", fit.exponent);
    }
}
