mod common;

use std::collections::HashMap;
use std::f64::consts::{E, PI};

use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use mobius_core::arith::{gcd, euler_phi};
use mobius_core::finite_euler::build_product;
use mobius_core::lfunc::{l_derivative, l_eval, l_eval_direct};
use mobius_core::sieve::{
    field_coefficients, mobius_sieve, progression_via_characters, summatory_progression, summatory_twisted,
};
use mobius_core::zeros::{find_t_nu, scan_with_step};
use mobius_core::{build_group, AbelianField, Angle, Complex64, DirichletCharacter, PrecisionPolicy};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn orthogonality_is_exact() {
    for q in 1..=60u64 {
        let g = build_group(q).unwrap();
        for a in (1..=q).filter(|&a| gcd(a, q) == 1) {
            for n in 1..=1000u64 {
                // angle of chi(n) chi(a)^{-1} for every chi
                let mut counts: HashMap<Angle, usize> = HashMap::new();
                let mut unit = true;
                for chi in g.iter() {
                    match (chi.angle(n), chi.angle(a)) {
                        (Some(x), Some(y)) => *counts.entry(x.add(y.neg())).or_default() += 1,
                        _ => unit = false,
                    }
                }
                let congruent = n % q == a % q;
                if !unit {
                    assert!(!congruent);
                    continue;
                }
                if congruent {
                    assert_eq!(counts.len(), 1);
                    assert!(counts.keys().next().unwrap().is_one());
                } else {
                    // a nontrivial character of the group takes each value of its image equally often
                    let first = *counts.values().next().unwrap();
                    assert!(counts.len() > 1 && counts.values().all(|&v| v == first), "q={q} a={a} n={n}");
                    assert_eq!(counts.len() * first, g.euler_phi() as usize);
                }
            }
        }
    }
}

#[test]
fn gauss_sum_identities() {
    for q in 1..=60u64 {
        for chi in build_group(q).unwrap().primitive() {
            let tau = chi.gauss_sum();
            assert!((tau.norm() - (q as f64).sqrt()).abs() < 1e-12, "{}", chi.label());
            let minus_one = chi.value(q - 1 + if q == 1 { 1 } else { 0 });
            let lhs = chi.conj().gauss_sum();
            assert!((lhs - minus_one * tau.conj()).norm() < 1e-12, "{}", chi.label());
        }
    }
}

#[test]
fn progression_identity() {
    let table = mobius_sieve(1000).unwrap();
    for q in 1..=30u64 {
        for a in (1..=q).filter(|&a| gcd(a, q) == 1) {
            for x in [10.0, 100.0, 1000.0, 997.0] {
                let direct = summatory_progression(x, q, a, &table).unwrap();
                let avg = progression_via_characters(x, q, a, &table).unwrap();
                assert!((avg - direct).norm() < 1e-9, "q={q} a={a} x={x}");
            }
        }
    }
}

#[test]
fn mobius_is_multiplicative() {
    let table = mobius_sieve(1_000_000).unwrap();
    let mut rng = StdRng::seed_from_u64(7);
    let mut checked = 0;
    while checked < 10_000 {
        let m = rng.gen_range(1..1000u64);
        let n = rng.gen_range(1..1000u64);
        if gcd(m, n) != 1 {
            continue;
        }
        assert_eq!(table.mu(m * n) as i32, table.mu(m) as i32 * table.mu(n) as i32);
        checked += 1;
    }
    for n in 1..3000 {
        assert_eq!(table.mu(n) as i64, common::mobius_naive(n));
    }
}

#[test]
fn half_weight_at_squarefree_integers() {
    let table = mobius_sieve(1000).unwrap();
    let chi = build_group(5).unwrap().characters()[1].clone();
    for n in (2..200u64).filter(|&n| table.is_squarefree(n) && gcd(n, 5) == 1) {
        let at = summatory_twisted(n as f64, &chi, &table).unwrap();
        let lo = summatory_twisted(n as f64 - 0.25, &chi, &table).unwrap();
        let hi = summatory_twisted(n as f64 + 0.25, &chi, &table).unwrap();
        assert!((at - 0.5 * (lo + hi)).norm() < 1e-12, "n={n}");
    }
}

#[test]
fn field_coefficients_invert_exactly() {
    for k in [AbelianField::gaussian(), AbelianField::real_quadratic_5(), AbelianField::cyclotomic(5).unwrap()] {
        let f = field_coefficients(&k, 10_000).unwrap();
        for n in 1..=10_000u64 {
            assert!(f.ideal_count(n) >= 0);
            let mut conv = 0i64;
            let mut d = 1;
            while d * d <= n {
                if n % d == 0 {
                    conv += f.ideal_count(d) * f.mobius_coeff(n / d);
                    if d * d != n {
                        conv += f.ideal_count(n / d) * f.mobius_coeff(d);
                    }
                }
                d += 1;
            }
            assert_eq!(conv, i64::from(n == 1), "{} n={n}", k.label());
        }
    }
}

#[test]
fn gaussian_ideal_counts_are_divisor_sums() {
    let k = AbelianField::gaussian();
    let f = field_coefficients(&k, 10_000).unwrap();
    let chi = |d: u64| match d % 4 {
        1 => 1,
        3 => -1,
        _ => 0,
    };
    for n in 1..=10_000u64 {
        let s: i64 = (1..=n).filter(|d| n % d == 0).map(chi).sum();
        assert_eq!(f.ideal_count(n), s);
    }
}

#[test]
fn euler_product_at_three() {
    let p = PrecisionPolicy::default();
    let sieve = mobius_sieve(10_000).unwrap();
    let primes: Vec<u64> = (2..=10_000).filter(|&n| sieve.smallest_prime_factor(n) == Some(n as u32)).collect();
    for q in [1u64, 3, 4, 5, 7, 12] {
        for chi in build_group(q).unwrap().iter() {
            for t in [0.0, 5.0, 20.0] {
                let s = c(3.0, t);
                let mut prod = c(1.0, 0.0);
                for &pr in &primes {
                    prod /= 1.0 - chi.value(pr) * (-s * (pr as f64).ln()).exp();
                }
                let l = l_eval(s, chi, &p).unwrap().value;
                assert!((prod - l).norm() < 1e-8, "{} at {s}", chi.label());
            }
        }
    }
}

#[test]
fn magnitude_law_on_the_left() {
    let p = PrecisionPolicy::default();
    for q in [3, 4, 5] {
        for chi in build_group(q).unwrap().primitive() {
            for t in [5.0, -5.0, 20.0, -20.0] {
                for sigma in [-0.5, 0.0, 0.25] {
                    let s = c(sigma, t);
                    let qs = q as f64 * s.norm();
                    let scale = (2.0 * PI * E / qs).powf(sigma) * qs.sqrt() * (t.abs() * ((1.0 - sigma) / t.abs()).atan()).exp();
                    let other = l_eval(1.0 - s, &chi.conj(), &p).unwrap().value.norm();
                    let ratio = l_eval(s, chi, &p).unwrap().value.norm() / (scale * other);
                    assert!((0.1..=10.0).contains(&ratio), "{} at {s}: {ratio}", chi.label());
                }
            }
        }
    }
}

#[test]
fn derivatives_agree_with_finite_differences_on_random_points() {
    let p = PrecisionPolicy::default();
    let mut rng = StdRng::seed_from_u64(11);
    let chars: Vec<DirichletCharacter> =
        [3u64, 4, 5, 7].iter().flat_map(|&q| build_group(q).unwrap().characters().to_vec()).collect();
    for _ in 0..20 {
        let chi = &chars[rng.gen_range(0..chars.len())];
        let s = c(rng.gen_range(0.05..0.95), rng.gen_range(2.0..40.0));
        let d = l_derivative(s, chi, 1, &p).unwrap().value;
        let h = 1e-4;
        let f = |z: Complex64| l_eval(z, chi, &p).unwrap().value;
        let fd = (8.0 * (f(s + h) - f(s - h)) - (f(s + 2.0 * h) - f(s - 2.0 * h))) / (12.0 * h);
        assert!((d - fd).norm() < 1e-6 * d.norm().max(1e-3), "{} at {s}", chi.label());
    }
}

#[test]
fn imprimitive_values_factor_through_the_inducer() {
    let p = PrecisionPolicy::default();
    let mut rng = StdRng::seed_from_u64(3);
    for q in 2..=30u64 {
        for chi in build_group(q).unwrap().iter().filter(|c| !c.is_primitive() && !c.is_principal()) {
            let f = build_product(chi);
            let star = chi.primitive_inducer();
            for _ in 0..100 {
                let s = c(rng.gen_range(0.0..1.0), rng.gen_range(-30.0..30.0));
                let direct = l_eval_direct(s, chi, &p).unwrap().value;
                let factored = l_eval(s, &star, &p).unwrap().value * f.eval(s);
                assert!((direct - factored).norm() <= 1e-9 * direct.norm().max(1e-6), "{} at {s}", chi.label());
            }
        }
    }
}

#[test]
fn lattice_is_complete_and_symmetric() {
    for q in [4u64, 6, 10, 12, 30] {
        for chi in build_group(q).unwrap().iter() {
            let f = build_product(chi);
            if f.is_trivial() {
                continue;
            }
            let lattice: Vec<f64> = f.zero_lattice(51.0).iter().map(|z| z.eta).collect();
            for &eta in &lattice {
                assert!(f.eval(c(0.0, eta)).norm() < 1e-12);
            }
            // local minima of |F(it)| on a fine grid, refined by golden section
            let at = |t: f64| f.eval(c(0.0, t)).norm();
            let step = 1e-3;
            let mut t = step;
            while t < 50.0 {
                if at(t) < at(t - step) && at(t) <= at(t + step) && at(t) < 1e-2 {
                    let root = common::golden_zero(|s| f.eval(c(0.0, s.im)), t - step, t + step);
                    if at(root) < 1e-9 {
                        assert!(lattice.iter().any(|e| (e - root).abs() < 1e-9), "{} root {root}", chi.label());
                    }
                }
                t += step;
            }
            let fbar = build_product(&chi.conj());
            let mirrored: Vec<f64> = fbar.zero_lattice(51.0).iter().map(|z| -z.eta).collect();
            for eta in &lattice {
                assert!(mirrored.iter().any(|m| (m - eta).abs() < 1e-9));
            }
        }
    }
}

#[test]
fn zero_lists_are_stable_under_refinement() {
    let p = PrecisionPolicy::default();
    let chi = build_group(4).unwrap().characters()[1].clone();
    let coarse = scan_with_step(&chi, 40.0, 0.03, &p).unwrap();
    let fine = scan_with_step(&chi, 40.0, 0.01, &p).unwrap();
    assert_eq!(coarse.len(), fine.len());
    for (a, b) in coarse.records.iter().zip(&fine.records) {
        assert!((a.gamma - b.gamma).abs() < 1e-8);
        let lo = mobius_core::lfunc::hardy_z(a.gamma - a.half_width - 1e-9, &chi, &p).unwrap();
        let hi = mobius_core::lfunc::hardy_z(a.gamma + a.half_width + 1e-9, &chi, &p).unwrap();
        assert!(lo * hi <= 0.0);
    }
    let s = [chi.clone()];
    assert_eq!(find_t_nu(30.0, &s, 0.1, 0.1, &p).unwrap(), find_t_nu(30.0, &s, 0.1, 0.1, &p).unwrap());
}

#[test]
fn residue_of_gaussian_field_matches_counting_slope() {
    let k = AbelianField::gaussian();
    assert!((k.kappa() - PI / 4.0).abs() < 1e-9);
    let f = field_coefficients(&k, 100_000).unwrap();
    let slope = f.ideal_count_sum(100_000) as f64 / 1e5;
    assert!((slope / k.kappa() - 1.0).abs() < 0.01);
    let d: Vec<i128> = [AbelianField::rationals(), k, AbelianField::real_quadratic_5()]
        .iter()
        .map(|k| k.discriminant().abs())
        .collect();
    assert_eq!(d, vec![1, 4, 5]);
    assert_eq!(AbelianField::cyclotomic(5).unwrap().discriminant().abs(), 125);
    assert_eq!(euler_phi(5), 4);
}

proptest! {
    #[test]
    fn characters_are_completely_multiplicative(q in 1u64..80, m in 1u64..5000, n in 1u64..5000, pick in 0usize..64) {
        let g = build_group(q).unwrap();
        let chi = &g.characters()[pick % g.characters().len()];
        let lhs = chi.value(m * n);
        let rhs = chi.value(m) * chi.value(n);
        prop_assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn conjugate_character_gives_conjugate_values(q in 2u64..40, sigma in 0.0f64..2.0, t in -40.0f64..40.0, pick in 0usize..64) {
        let p = PrecisionPolicy::default();
        let g = build_group(q).unwrap();
        let chi = &g.characters()[pick % g.characters().len()];
        prop_assume!(!(chi.is_principal() && (sigma - 1.0).abs() < 0.05 && t.abs() < 0.05));
        let s = c(sigma, t);
        let a = l_eval(s, chi, &p).unwrap().value;
        let b = l_eval(s.conj(), &chi.conj(), &p).unwrap().value.conj();
        prop_assert!((a - b).norm() <= 1e-10 * a.norm().max(1.0));
    }

    #[test]
    fn zero_count_bound_holds(t in -200.0f64..200.0, h in 0.01f64..50.0, pick in 0usize..64) {
        for q in [4u64, 6, 10, 12] {
            let g = build_group(q).unwrap();
            let f = build_product(&g.characters()[pick % g.characters().len()]);
            let n = f.count_zeros(t, h).unwrap();
            prop_assert!(n.holds(), "q={} t={} h={} count={} bound={}", q, t, h, n.count, n.bound);
        }
    }

    #[test]
    fn zero_cache_round_trips(gammas in proptest::collection::vec(0.1f64..500.0, 0..40)) {
        let chi = DirichletCharacter::trivial();
        let mut cache = mobius_core::ZeroCache::empty(&chi, 500.0, &PrecisionPolicy::default());
        let mut gs = gammas;
        gs.sort_by(f64::total_cmp);
        cache.records = gs.iter().map(|&g| mobius_core::ZeroRecord { gamma: g, half_width: 1e-10, multiplicity: 1 }).collect();
        let mut buf = Vec::new();
        cache.write_to(&mut buf).unwrap();
        let back = mobius_core::ZeroCache::read_from(buf.as_slice()).unwrap();
        prop_assert_eq!(back, cache);
    }
}
