//! Coefficient recursion and G-function checked against an exact rational
//! re-evaluation and against finite differences.

use nhrabi::gfunction::{compute_recursion, compute_recursion_extended, evaluate_g_with, Derivatives, SeriesOptions};
use nhrabi::{evaluate_g, Error, ModelParams, Parity};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Exact `(e_n, f_n)` for rational parameters and a real rational energy.
fn rational_table(half_delta: &BigRational, g: &BigRational, energy: &BigRational, max_n: usize) -> Vec<(BigRational, BigRational)> {
    let g2 = g * g;
    let three = ratio(3, 1);
    let mut f_prev = BigRational::zero();
    let mut f = ratio(1, 1);
    let mut out = Vec::with_capacity(max_n + 1);
    for n in 0..=max_n {
        let nr = ratio(n as i64, 1);
        let e = half_delta * &f / (&nr + &g2 - energy);
        let np1 = ratio(n as i64 + 1, 1);
        let next = (-(half_delta * &e) + (&nr - &three * &g2 - energy) * &f) / (ratio(2, 1) * g * &np1) + &f_prev / &np1;
        out.push((e, f.clone()));
        f_prev = std::mem::replace(&mut f, next);
    }
    out
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(1e-300)
}

#[test]
fn table_matches_exact_rational_recursion() {
    let params = ModelParams::new(0.5, 0.25).unwrap();
    let exact = rational_table(&ratio(1, 4), &ratio(1, 4), &ratio(-1, 5), 60);
    let fast = compute_recursion(&params, Complex64::new(-0.2, 0.0), 60, false).unwrap();
    let extended = compute_recursion_extended(&params, Complex64::new(-0.2, 0.0), 60).unwrap();
    // the double -0.2 is not -1/5; the extended path is held to the exact value of its input
    let binary = rational_table(&ratio(1, 4), &ratio(1, 4), &BigRational::from_float(-0.2f64).unwrap(), 60);
    assert_eq!(fast.f[0], Complex64::new(1.0, 0.0));
    assert!((fast.e[0].re - 0.25 / 0.2625).abs() < 1e-15);
    for (n, (e, f)) in exact.iter().enumerate() {
        let (e, f) = (e.to_f64().unwrap(), f.to_f64().unwrap());
        for table in [&fast, &extended] {
            assert!(close(table.e[n].re, e, 1e-12), "e_{n}: {} vs {e}", table.e[n].re);
            assert!(close(table.f[n].re, f, 1e-12), "f_{n}: {} vs {f}", table.f[n].re);
            assert_eq!(table.e[n].im, 0.0);
        }
        let (be, bf) = (binary[n].0.to_f64().unwrap(), binary[n].1.to_f64().unwrap());
        assert!(close(extended.e[n].re, be, 4.0 * f64::EPSILON), "e_{n} extended");
        assert!(close(extended.f[n].re, bf, 4.0 * f64::EPSILON), "f_{n} extended");
    }
}

#[test]
fn tables_satisfy_first_relation() {
    let params = ModelParams::new(2.5, 0.7).unwrap();
    let energy = Complex64::new(0.9, 0.3);
    let t = compute_recursion(&params, energy, 80, false).unwrap();
    for n in 0..=80 {
        let lhs = t.e[n] * (n as f64 + 0.49 - energy);
        assert!((lhs - 1.25 * t.f[n]).norm() <= 1e-14 * (1.0 + t.f[n].norm()));
    }
}

#[test]
fn zero_tunneling_gives_vanishing_e() {
    let params = ModelParams::new(0.0, 0.4).unwrap();
    let t = compute_recursion(&params, Complex64::new(0.3, 0.2), 40, true).unwrap();
    assert!(t.e.iter().chain(&t.de).all(|e| *e == Complex64::new(0.0, 0.0)));
}

#[test]
fn derivative_tables_match_finite_differences() {
    let params = ModelParams::new(2.5, 0.45).unwrap();
    let energy = Complex64::new(0.7, 0.15);
    let h = 1e-6;
    let t = compute_recursion(&params, energy, 30, true).unwrap();
    let up = compute_recursion_extended(&params, energy + h, 30).unwrap();
    let down = compute_recursion_extended(&params, energy - h, 30).unwrap();
    for n in 0..=30 {
        let fd_e = (up.e[n] - down.e[n]) / (2.0 * h);
        let fd_f = (up.f[n] - down.f[n]) / (2.0 * h);
        assert!((fd_e - t.de[n]).norm() <= 1e-6 * t.de[n].norm().max(1e-12), "de_{n}");
        assert!((fd_f - t.df[n]).norm() <= 1e-6 * t.df[n].norm().max(1e-12), "df_{n}");
    }
}

#[test]
fn second_derivative_matches_differenced_first() {
    let params = ModelParams::new(2.5, 0.63).unwrap();
    let opts = SeriesOptions::default();
    let energy = Complex64::new(0.6, 0.0);
    let h = 1e-5;
    let mid = evaluate_g_with(&params, energy, &opts, Derivatives::Second).unwrap();
    let up = evaluate_g_with(&params, energy + h, &opts, Derivatives::First).unwrap();
    let down = evaluate_g_with(&params, energy - h, &opts, Derivatives::First).unwrap();
    for p in Parity::BOTH {
        let fd = (up.derivative(p) - down.derivative(p)) / (2.0 * h);
        let exact = mid.second_derivative(p);
        assert!((fd - exact).norm() <= 1e-6 * exact.norm(), "{p:?}: {fd} vs {exact}");
    }
}

#[test]
fn weak_coupling_example_value() {
    let params = ModelParams::new(0.5, 0.25).unwrap();
    let g = evaluate_g(&params, Complex64::new(-0.2, 0.0)).unwrap();
    assert!(g.converged);
    assert!(g.tail_estimate < 1e-14);
    // the series for G₊ - G₋ = -2 Σ f_n gⁿ, recomputed exactly
    let exact = rational_table(&ratio(1, 4), &ratio(1, 4), &ratio(-1, 5), 60);
    let mut sum = BigRational::zero();
    let mut power = ratio(1, 1);
    for (_, f) in &exact {
        sum += f * &power;
        power *= ratio(1, 4);
    }
    let diff = (g.g_plus - g.g_minus).re;
    assert!((diff + 2.0 * sum.to_f64().unwrap()).abs() < 1e-13);
}

#[test]
fn magnitude_grows_towards_pole() {
    let params = ModelParams::new(0.5, 0.25).unwrap();
    let pole = 1.0 + 0.0625;
    let sizes: Vec<f64> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|d| {
            let v = evaluate_g(&params, Complex64::new(pole - d, 0.0)).unwrap();
            v.g_plus.norm().max(v.g_minus.norm())
        })
        .collect();
    for w in sizes.windows(2) {
        let growth = w[1] / w[0];
        assert!((5.0..20.0).contains(&growth), "growth {growth}");
    }
}

#[test]
fn pole_guard_is_a_typed_error() {
    let params = ModelParams::new(0.5, 0.25).unwrap();
    let at = Complex64::new(2.0625 + 1e-10, 0.0);
    assert!(matches!(evaluate_g(&params, at), Err(Error::PoleProximity { n: 2, .. })));
    assert!(matches!(compute_recursion(&params, at, 10, false), Err(Error::PoleProximity { .. })));
}

#[test]
fn zero_coupling_is_unsupported() {
    let params = ModelParams::new(0.5, 0.0).unwrap();
    assert!(matches!(evaluate_g(&params, Complex64::new(0.3, 0.0)), Err(Error::UnsupportedParameter(_))));
}

#[test]
fn capped_series_reports_non_convergence() {
    let params = ModelParams::new(2.5, 0.9).unwrap();
    let opts = SeriesOptions { max_terms: 6, ..SeriesOptions::default() };
    let v = evaluate_g_with(&params, Complex64::new(0.4, 0.0), &opts, Derivatives::None).unwrap();
    assert!(!v.converged);
    assert!(v.tail_estimate > opts.tolerance);
    assert!(matches!(v.ensure_converged(), Err(Error::SeriesNotConverged { .. })));
}
