mod common;

use std::f64::consts::PI;

use mobius_core::lfunc::{completed_lambda, hardy_z, l_derivative, l_eval, root_number};
use mobius_core::zeros::scan_zeros;
use mobius_core::{build_group, AbelianField, Complex64, DirichletCharacter, PrecisionPolicy};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn chi4() -> DirichletCharacter {
    build_group(4).unwrap().characters()[1].clone()
}

#[test]
fn oracle_reproduces_known_constants() {
    assert!((common::zeta(c(2.0, 0.0)) - PI * PI / 6.0).norm() < 1e-14);
    assert!((common::beta(c(1.0, 0.0)) - PI / 4.0).norm() < 1e-14);
    // Catalan's constant
    assert!((common::beta(c(2.0, 0.0)).re - 0.915_965_594_177_219).abs() < 1e-14);
}

#[test]
fn zeta_matches_borwein_in_the_strip() {
    let p = PrecisionPolicy::default();
    let zeta = DirichletCharacter::trivial();
    for &sigma in &[0.1, 0.5, 0.9, 1.5, 2.5] {
        for &t in &[0.0, 1.0, 7.3, 14.13, 30.0, 50.0] {
            if sigma == 0.9 && t == 0.0 {
                continue;
            }
            let s = c(sigma, t);
            let want = common::zeta(s);
            let got = l_eval(s, &zeta, &p).unwrap();
            assert!((got.value - want).norm() <= 1e-10 * want.norm().max(1.0), "{s}: {} vs {want}", got.value);
            assert!(got.error_estimate < 1e-9);
        }
    }
}

#[test]
fn beta_matches_accelerated_series() {
    let p = PrecisionPolicy::default();
    let chi = chi4();
    for &sigma in &[0.2, 0.5, 1.0, 2.0] {
        for &t in &[0.0, 2.5, 6.02, 21.0, 45.0] {
            let s = c(sigma, t);
            let want = common::beta(s);
            let got = l_eval(s, &chi, &p).unwrap().value;
            assert!((got - want).norm() <= 1e-10 * want.norm().max(1.0), "{s}: {got} vs {want}");
        }
    }
}

#[test]
fn derivatives_match_finite_differences_of_the_oracle() {
    let p = PrecisionPolicy::default();
    let zeta = DirichletCharacter::trivial();
    let d = l_derivative(c(2.0, 0.0), &zeta, 1, &p).unwrap().value;
    let want = common::derivative(|x| common::zeta(c(x, 0.0)).re, 2.0);
    assert!((d.re - want).abs() < 1e-9, "{d} vs {want}");
    // frozen from the line above
    assert!((d.re + 0.937_548_254_315_843_8).abs() < 1e-12);
    let d = l_derivative(c(0.7, 3.0), &chi4(), 1, &p).unwrap().value;
    let re = common::derivative(|x| common::beta(c(x, 3.0)).re, 0.7);
    let im = common::derivative(|x| common::beta(c(x, 3.0)).im, 0.7);
    assert!((d - c(re, im)).norm() < 1e-8);
}

#[test]
fn first_zeros_agree_with_golden_section_oracle() {
    let p = PrecisionPolicy::default();
    let g_zeta = common::golden_zero(common::zeta, 13.5, 14.5);
    let g_beta = common::golden_zero(common::beta, 5.5, 6.5);
    // frozen oracle output
    assert!((g_zeta - 14.134_725_141_734_69).abs() < 1e-8);
    assert!((g_beta - 6.020_948_904_697_6).abs() < 1e-8);
    let z = scan_zeros(&DirichletCharacter::trivial(), 20.0, &p).unwrap();
    assert!((z.records[0].gamma - g_zeta).abs() < 1e-6);
    let b = scan_zeros(&chi4(), 10.0, &p).unwrap();
    assert!((b.records[0].gamma - g_beta).abs() < 1e-6);
}

#[test]
fn hardy_z_is_real_and_changes_sign_at_zeros() {
    let p = PrecisionPolicy::default();
    let zeta = DirichletCharacter::trivial();
    let a = hardy_z(14.0, &zeta, &p).unwrap();
    let b = hardy_z(14.3, &zeta, &p).unwrap();
    assert!(a * b < 0.0);
    // |Z| = |zeta| on the line
    let z = hardy_z(17.0, &zeta, &p).unwrap().abs();
    assert!((z - common::zeta(c(0.5, 17.0)).norm()).abs() < 1e-10);
}

#[test]
fn root_numbers_are_unimodular_and_functional_equation_holds() {
    let p = PrecisionPolicy::default();
    for q in [3, 4, 5, 7, 8, 12] {
        for chi in build_group(q).unwrap().primitive() {
            let eps = root_number(chi).unwrap();
            assert!((eps.norm() - 1.0).abs() < 1e-12, "{}", chi.label());
            for s in [c(0.3, 4.0), c(-0.5, 11.0), c(1.7, -20.0)] {
                let lhs = completed_lambda(s, chi, &p).unwrap();
                let rhs = eps * completed_lambda(1.0 - s, &chi.conj(), &p).unwrap();
                assert!((lhs - rhs).norm() < 1e-9 * lhs.norm(), "{} at {s}", chi.label());
            }
        }
    }
}

#[test]
fn conjugate_symmetry() {
    let p = PrecisionPolicy::default();
    let g = build_group(7).unwrap();
    for chi in g.iter() {
        let s = c(0.4, 9.0);
        let a = l_eval(s, chi, &p).unwrap().value;
        let b = l_eval(s.conj(), &chi.conj(), &p).unwrap().value.conj();
        assert!((a - b).norm() < 1e-11 * a.norm().max(1.0));
    }
}

#[test]
fn dedekind_factors_for_gaussian_field() {
    let p = PrecisionPolicy::default();
    let k = AbelianField::gaussian();
    let s = c(0.5, 12.0);
    let got = mobius_core::lfunc::dedekind_eval(s, &k, &p).unwrap().value;
    let want = common::zeta(s) * common::beta(s);
    assert!((got - want).norm() < 1e-10 * want.norm());
}
