//! Reference implementations that share no code with the library.
#![allow(dead_code)]

use num_complex::Complex64;

/// Dirichlet eta by Borwein's alternating-series acceleration.
pub fn eta(s: Complex64) -> Complex64 {
    let n = 110usize;
    // d_k = n sum_{i<=k} (n+i-1)! 4^i / ((n-i)! (2i)!)
    let mut d = vec![0.0f64; n + 1];
    let mut term = 1.0 / n as f64; // i = 0: (n-1)!/n! = 1/n
    let mut acc = term;
    d[0] = n as f64 * acc;
    for i in 1..=n {
        let (nf, i_f) = (n as f64, i as f64);
        term *= (nf + i_f - 1.0) * 4.0 * (nf - i_f + 1.0) / ((2.0 * i_f - 1.0) * (2.0 * i_f));
        acc += term;
        d[i] = nf * acc;
    }
    let mut sum = Complex64::new(0.0, 0.0);
    for k in 0..n {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * (d[k] - d[n]) * (-s * ((k + 1) as f64).ln()).exp();
    }
    -sum / d[n]
}

pub fn zeta(s: Complex64) -> Complex64 {
    eta(s) / (1.0 - ((1.0 - s) * std::f64::consts::LN_2).exp())
}

/// Cohen, Rodriguez Villegas and Zagier acceleration of `sum (-1)^k a_k`.
pub fn alternating(a: impl Fn(usize) -> Complex64) -> Complex64 {
    let n = 110usize;
    let mut d = (3.0 + 8f64.sqrt()).powi(n as i32);
    d = (d + 1.0 / d) / 2.0;
    let mut b = -1.0;
    let mut c = -d;
    let mut s = Complex64::new(0.0, 0.0);
    for k in 0..n {
        c = b - c;
        s += c * a(k);
        let (kf, nf) = (k as f64, n as f64);
        b *= (kf + nf) * (kf - nf) / ((kf + 0.5) * (kf + 1.0));
    }
    s / d
}

/// `L(s, chi_{-4})`.
pub fn beta(s: Complex64) -> Complex64 {
    alternating(|k| (-s * ((2 * k + 1) as f64).ln()).exp())
}

/// Minimizes `|f(1/2 + it)|` on `[lo, hi]` by golden-section search.
pub fn golden_zero(f: impl Fn(Complex64) -> Complex64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let at = |t: f64| f(Complex64::new(0.5, t)).norm();
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (at(a), at(b));
    while hi - lo > 1e-11 {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = at(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = at(b);
        }
    }
    0.5 * (lo + hi)
}

/// Richardson-extrapolated central difference.
pub fn derivative(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let d = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
    let h = 1e-3;
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

pub fn mobius_naive(n: u64) -> i64 {
    let mut m = n;
    let mut k = 0;
    let mut p = 2;
    while p * p <= m {
        if m % p == 0 {
            m /= p;
            if m % p == 0 {
                return 0;
            }
            k += 1;
        }
        p += 1;
    }
    if m > 1 {
        k += 1;
    }
    if k % 2 == 0 {
        1
    } else {
        -1
    }
}

/// `x^s/s` Perron integral over `|t| <= t_cut` on the imaginary axis, near `y = 1`:
/// `1/2 + Si(T log y)/pi`.
pub fn perron_window(y: f64, t_cut: f64) -> f64 {
    0.5 + sine_integral(t_cut * y.ln()) / std::f64::consts::PI
}

/// `Si(z)` by composite Simpson quadrature of `sin t / t`.
pub fn sine_integral(z: f64) -> f64 {
    let n = 2 * (1000 + (200.0 * z.abs()) as usize);
    let h = z / n as f64;
    let f = |t: f64| if t == 0.0 { 1.0 } else { t.sin() / t };
    let mut acc = f(0.0) + f(z);
    for i in 1..n {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    acc * h / 3.0
}
