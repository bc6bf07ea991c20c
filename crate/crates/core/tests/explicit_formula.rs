mod common;

use std::f64::consts::E;
use std::sync::OnceLock;

use mobius_core::explicit::*;
use mobius_core::finite_euler::build_product;
use mobius_core::lfunc::{dedekind_eval, l_derivative, l_eval};
use mobius_core::sieve::{field_coefficients, mobius_sieve, summatory_progression, MobiusTable};
use mobius_core::{build_group, AbelianField, Complex64, DirichletCharacter, MemoryZeroStore, PrecisionPolicy};

fn settings() -> FormulaSettings {
    FormulaSettings::default()
}

fn store() -> &'static MemoryZeroStore {
    static S: OnceLock<MemoryZeroStore> = OnceLock::new();
    S.get_or_init(|| MemoryZeroStore::new(PrecisionPolicy::default()))
}

fn table() -> &'static MobiusTable {
    static T: OnceLock<MobiusTable> = OnceLock::new();
    T.get_or_init(|| mobius_sieve(20_000).unwrap())
}

fn chi4() -> DirichletCharacter {
    build_group(4).unwrap().characters()[1].clone()
}

fn chi6() -> DirichletCharacter {
    build_group(6).unwrap().iter().find(|c| !c.is_principal()).unwrap().clone()
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn closed_forms_match_quadrature() {
    let p = PrecisionPolicy::default();
    for q in [3, 4, 5] {
        for chi in build_group(q).unwrap().primitive() {
            for x in [2.0, 10.0, 100.0] {
                for l in 0..=6u32 {
                    let closed = trivial_residue_primitive(x, chi, l, &p).unwrap();
                    let pole = c(-(l as f64), 0.0);
                    let quad = residue_quadrature(x, pole, quadrature_radius(x, 1.0), Integrand::Character(chi), closed.kind, &p)
                        .unwrap();
                    assert!(closed.agrees_with(&quad), "{} l={l} x={x}: {} vs {}", chi.label(), closed.value, quad.value);
                    if l > 0 && !has_trivial_zero(chi, l) {
                        assert!(quad.value.norm() < 1e-10, "{} l={l}: {}", chi.label(), quad.value);
                    }
                }
            }
        }
    }
}

#[test]
fn quadrature_converges_geometrically() {
    let q = contour_integral(|s| Ok(s.exp() / (s * s)), c(0.0, 0.0), 0.4).unwrap();
    assert!((q.value - 1.0).norm() < 1e-12);
    let d = &q.differences;
    for w in d.windows(2).filter(|w| w[0] > 1e-13) {
        assert!(w[1] < 0.5 * w[0], "{d:?}");
    }
}

#[test]
fn s_zero_term_for_imprimitive_character_is_reciprocal_of_l_at_zero() {
    let p = PrecisionPolicy::default();
    let chi = chi6();
    let f = build_product(&chi);
    assert_eq!(f.r(), 0);
    let axis = imaginary_axis_sum(E, &f, &chi, 1.0, &p).unwrap();
    let l0 = l_eval(c(0.0, 0.0), &chi, &p).unwrap().value;
    assert!((axis.s_zero - 1.0 / l0).norm() < 1e-9);
    // lattice starts at pi / log 2, so nothing below T_* = 1
    assert_eq!(axis.points, 0);
    assert_eq!(axis.lattice_sum, c(0.0, 0.0));
}

#[test]
fn lattice_sum_is_real_for_real_characters() {
    let p = PrecisionPolicy::default();
    let chi = chi6();
    let axis = imaginary_axis_sum(100.5, &build_product(&chi), &chi, 40.0, &p).unwrap();
    assert!(axis.points > 0);
    assert!(axis.lattice_sum.im.abs() < 1e-12);
}

#[test]
fn theorem1_example_and_small_x() {
    let s = settings();
    let chi = chi4();
    let r = assemble_theorem1(100.5, &chi, 40.0, store(), table(), &s).unwrap();
    let m = perron_model(100.5, r.t_nu, |n| chi.value(n).re);
    assert!((r.residual.re - m).abs() < 5.0 / r.t_nu, "{}", r.breakdown());
    assert!(r.residual.norm() <= 0.5, "{}", r.breakdown());
    assert!(r.within_budget);
    let r = assemble_theorem1(0.5, &chi4(), 40.0, store(), table(), &s).unwrap();
    assert_eq!(r.sieve_truth, c(0.0, 0.0));
    assert!(r.within_budget, "{}", r.breakdown());
}

#[test]
fn theorem2_example() {
    let r = assemble_theorem2(100.5, &chi6(), 40.0, store(), table(), &settings()).unwrap();
    assert!(r.residual.norm() <= 0.5, "{}", r.breakdown());
    assert!(r.within_budget);
    assert!(r.trivial_terms_used > 0);
}

#[test]
fn theorem2_rejects_trivial_product() {
    let chi5 = build_group(5).unwrap().characters()[1].clone();
    assert!(assemble_theorem2(100.5, &chi5, 40.0, store(), table(), &settings()).is_err());
}

#[test]
fn corollary1_example_and_partition() {
    let s = settings();
    let r3 = assemble_corollary1(100.5, 4, 3, 40.0, store(), table(), &s).unwrap();
    assert!(r3.residual.norm() <= 0.5, "{}", r3.breakdown());
    assert!(r3.formula_total.im.abs() < 1e-8);
    assert!(r3.within_budget);
    let a1 = summatory_progression(100.5, 4, 1, table()).unwrap();
    let a3 = summatory_progression(100.5, 4, 3, table()).unwrap();
    let odd: i64 = (1..=100).filter(|n| n % 2 == 1).map(common::mobius_naive).sum();
    assert!((a1 + a3 - odd as f64).abs() < 1e-12);
    assert!(matches!(
        assemble_corollary1(100.5, 4, 2, 40.0, store(), table(), &s),
        Err(mobius_core::Error::NotCoprime { .. })
    ));
}

#[test]
fn corollary1_commutes_with_character_average() {
    let s = settings();
    for (q, a) in [(4u64, 3u64), (5, 2)] {
        let heights = heights_progression(q, 30.0, &s).unwrap();
        let whole = assemble_corollary1_at(50.5, q, a, &heights, store(), table(), &s).unwrap();
        let group = build_group(q).unwrap();
        let phi = group.euler_phi() as f64;
        let mut avg = c(0.0, 0.0);
        for chi in group.iter() {
            let r = assemble_character_at(50.5, chi, &heights, store(), table(), &s).unwrap();
            avg += chi.value(a).conj() * r.formula_total / phi;
        }
        assert!((whole.formula_total - avg).norm() < 1e-9, "q={q}: {} vs {avg}", whole.formula_total);
    }
}

#[test]
fn theorem3_over_rationals_matches_theorem1() {
    let s = settings();
    let q = AbelianField::rationals();
    let coeffs = field_coefficients(&q, 2_000).unwrap();
    let k = assemble_theorem3(100.5, &q, 40.0, store(), &coeffs, &s).unwrap();
    let one = assemble_theorem1(100.5, &DirichletCharacter::trivial(), 40.0, store(), table(), &s).unwrap();
    assert_eq!(k.t_nu, one.t_nu);
    assert!((k.formula_total - one.formula_total).norm() < 1e-10, "{} vs {}", k.formula_total, one.formula_total);
    assert!((k.sieve_truth - one.sieve_truth).norm() < 1e-12);
}

#[test]
fn theorem3_gaussian_field() {
    let s = settings();
    let k = AbelianField::gaussian();
    let coeffs = field_coefficients(&k, 2_000).unwrap();
    let r = assemble_theorem3(100.5, &k, 40.0, store(), &coeffs, &s).unwrap();
    assert!((r.s_zero_term - c(-4.0, 0.0)).norm() < 1e-6, "{}", r.s_zero_term);
    assert!((r.leading_term.as_ref().unwrap().value.re + 4.0).abs() < 1e-12);
    assert!(r.residual.norm() <= 1.0, "{}", r.breakdown());
    assert!(r.within_budget);
}

/// Model of the truncation error, good to O(1/T_nu): each `n < 10x` sees the cut Perron kernel
/// `1/2 + Si(T log(x/n))/pi` instead of a step.
fn perron_model(x: f64, t_nu: f64, coeff: impl Fn(u64) -> f64) -> f64 {
    let mut e = 0.0;
    for n in 1..(10.0 * x) as u64 {
        let a = coeff(n) * common::mobius_naive(n) as f64;
        if a != 0.0 {
            let step = if (n as f64) < x { 1.0 } else { 0.0 };
            e += a * (step - common::perron_window(x / n as f64, t_nu));
        }
    }
    e
}

#[test]
fn residuals_follow_the_truncated_perron_kernel() {
    let s = settings();
    for x in [50.5, 100.5, 250.5] {
        let chi = chi4();
        let r = assemble_theorem1(x, &chi, 50.0, store(), table(), &s).unwrap();
        let m = perron_model(x, r.t_nu, |n| chi.value(n).re);
        assert!((r.residual.re - m).abs() < 5.0 / r.t_nu, "x={x}: {} vs model {m}", r.residual.re);
        let chi = chi6();
        let r = assemble_theorem2(x, &chi, 50.0, store(), table(), &s).unwrap();
        let m = perron_model(x, r.t_nu, |n| chi.value(n).re);
        assert!((r.residual.re - m).abs() < 5.0 / r.t_nu, "x={x}: {} vs model {m}", r.residual.re);
    }
}

#[test]
fn trivial_series_tail_is_negligible() {
    let p = PrecisionPolicy::default();
    for chi in [chi4(), build_group(5).unwrap().characters()[2].clone()] {
        for x in [2.0, 10.0] {
            let r = assemble_theorem1(x, &chi, 20.0, store(), table(), &settings()).unwrap();
            let mut long = c(0.0, 0.0);
            for l in 1..=(2 * r.trivial_terms_used + 40) {
                long += trivial_residue_primitive(x, &chi, l, &p).unwrap().value;
            }
            assert!((long - r.trivial_sum).norm() < 1e-12, "{}: {} vs {}", chi.label(), long, r.trivial_sum);
        }
    }
}

#[test]
fn derivative_sum_basics() {
    let s = settings();
    let p = PrecisionPolicy::default();
    let empty = derivative_sum(&chi4(), 1.0, store(), &s).unwrap();
    assert_eq!(empty.sum, c(0.0, 0.0));
    assert!(empty.trajectory.is_empty());

    let r = derivative_sum(&chi4(), 6.5, store(), &s).unwrap();
    let (first, _) = r.partial_at(7.0);
    let rho = c(0.5, r.trajectory[0].gamma);
    let chi = chi4();
    let quad = contour_integral(|z| Ok(l_eval(z, &chi, &p)?.value.inv()), rho, 0.3).unwrap();
    assert!((first - quad.value).norm() < 1e-8);
    assert!((first - l_derivative(rho, &chi, 1, &p).unwrap().value.inv()).norm() < 1e-12);

    let r = derivative_sum(&chi4(), 60.0, store(), &s).unwrap();
    for pt in &r.trajectory {
        assert!(pt.abs_partial + 1e-12 >= pt.partial.norm());
    }
}

#[test]
fn field_derivative_sum_uses_the_right_factor() {
    let s = settings();
    let p = PrecisionPolicy::default();
    let k = AbelianField::gaussian();
    let r = derivative_sum_field(&k, 12.0, store(), &s).unwrap();
    assert!(r.trajectory.len() >= 3);
    let mut prev = c(0.0, 0.0);
    for pt in r.trajectory.iter().take(3) {
        let term = pt.partial - prev;
        prev = pt.partial;
        let rho = c(0.5, pt.gamma);
        let quad = contour_integral(|z| Ok(dedekind_eval(z, &k, &p)?.value.inv()), rho, 0.2).unwrap();
        assert!((term - quad.value).norm() < 1e-8 * term.norm().max(1.0), "gamma {}", pt.gamma);
    }
    let q = derivative_sum_field(&AbelianField::rationals(), 15.0, store(), &s).unwrap();
    let one = q.trajectory.first().unwrap();
    let zeta = DirichletCharacter::trivial();
    let d = l_derivative(c(0.5, one.gamma), &zeta, 1, &p).unwrap().value;
    assert!((one.partial - d.inv()).norm() < 1e-12);
}
