mod common;

use num_complex::Complex64;

use common::f;
use singlab_core::odegrowth::{
    construct_equation, eqc_rays, equation_residual, hyper_order_estimate, integrate_ray, run_rays, Controls,
    ODEProblem, TraceStatus,
};

#[test]
fn constructed_equations_have_small_residuals() {
    let sets: &[&[&str]] = &[
        &["z", "z^2"],
        &["exp(1/z)", "z*exp(1/z)"],
        &["exp(z^-2)", "exp(-z^-2)"],
        &["exp(1/z)/(z-0.5)", "z^3"],
        &["z", "z^2", "exp(z)"],
        &["1", "exp(1/z)", "exp(-1/z)"],
    ];
    for set in sets {
        let sols: Vec<_> = set.iter().map(|s| f(s)).collect();
        let p = construct_equation(&sols).unwrap();
        assert_eq!(p.k, sols.len());
        for s in &sols {
            let res = equation_residual(&p, s).unwrap();
            assert!(res <= 1e-9, "{set:?}: residual {res:e} for {s}");
        }
    }
}

#[test]
fn trace_is_consistent_with_its_own_log_derivative() {
    // Δ ln|f| must equal Re ∫ u dz = Re ∫ u z d(ln r) along the ray
    let p: ODEProblem = "2;-z^-4;2*z^-1".parse().unwrap();
    let controls = Controls {
        samples: 801,
        ..Controls::default()
    };
    for phi in [0.0, 0.7, -1.2] {
        let one = Complex64::new(1.0, 0.0);
        let t = integrate_ray(&p, phi, 0.5, 0.05, &[one], &controls).unwrap();
        assert_eq!(t.status, TraceStatus::Ok);
        let s = &t.samples;
        let g = |i: usize| (s[i].u.to_complex() * Complex64::from_polar(s[i].r, phi)).re;
        let mut integral = 0.0;
        for i in 1..s.len() {
            integral += 0.5 * (g(i) + g(i - 1)) * (s[i].r / s[i - 1].r).ln();
        }
        let delta = s.last().unwrap().log_abs_f - s[0].log_abs_f;
        assert!(
            (integral - delta).abs() <= 2e-4 * (1.0 + delta.abs()),
            "phi {phi}: {integral} vs {delta}"
        );
    }
}

#[test]
fn hyper_order_grows_with_the_pole_order() {
    let one = Complex64::new(1.0, 0.0);
    let c = Controls::default();
    let sigma = |eq: &str, n: u32, r_end: f64| {
        let p: ODEProblem = eq.parse().unwrap();
        let traces = run_rays(&p, &eqc_rays(one, n), 0.5, r_end, &c).unwrap();
        hyper_order_estimate(&traces).unwrap().estimate.sigma
    };
    let s1 = sigma("2;exp(1/z);z", 1, 0.04);
    let s2 = sigma("2;exp(1/z^2);z", 2, 0.2);
    assert!(s2 >= s1 + 0.5, "{s1} then {s2}");
}

#[test]
fn entire_coefficients_give_no_hyper_growth() {
    let p: ODEProblem = "2;1;z".parse().unwrap();
    let traces = run_rays(&p, &[0.0, 1.0], 0.5, 0.04, &Controls::default()).unwrap();
    assert!(hyper_order_estimate(&traces).is_err());
}
