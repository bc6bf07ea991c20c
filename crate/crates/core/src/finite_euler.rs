//! The finite Euler product `F(s) = prod_{p | q} (1 - chi*(p) p^{-s})` that links an
//! imprimitive `L(s, chi)` to `L(s, chi*)`.
//!
//! All zeros sit on the imaginary axis, in one arithmetic lattice per active prime,
//! so they are enumerated exactly instead of searched for.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::Serialize;

use crate::arith::{prime_divisors, radical};
use crate::characters::{Angle, DirichletCharacter};
use crate::error::{Error, Result};
use crate::lfunc::jet::Jet;

/// Points closer than this (relative to `max(1, |eta|)`) are treated as one zero.
pub const COLLISION_TOLERANCE: f64 = 1e-12;

/// Engineering constant standing in for the unstated implied constants.
pub const BUDGET_CONSTANT: f64 = 5.0;

#[derive(Clone, Debug)]
pub struct FiniteEulerProduct {
    q: u64,
    chi_star: DirichletCharacter,
    active: Vec<ActivePrime>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ActivePrime {
    pub p: u64,
    /// `chi*(p)` as a fraction of a full turn.
    pub angle: Angle,
}

impl ActivePrime {
    /// `theta_p = arg chi*(p)` in `[0, 2 pi)`.
    pub fn theta(&self) -> f64 {
        self.angle.radians()
    }

    pub fn spacing(&self) -> f64 {
        TAU / (self.p as f64).ln()
    }

    fn value(&self) -> Complex64 {
        self.angle.to_complex()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LatticeZero {
    pub eta: f64,
    pub primes: Vec<u64>,
    pub multiplicity: u32,
}

impl LatticeZero {
    pub fn is_collision(&self) -> bool {
        self.multiplicity > 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ZeroCount {
    pub count: u64,
    pub bound: f64,
}

impl ZeroCount {
    pub fn holds(&self) -> bool {
        self.count as f64 <= self.bound + 1e-12
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LogDerivativeCheck {
    pub residual: f64,
    pub budget: f64,
    pub local_zeros: usize,
}

impl LogDerivativeCheck {
    pub fn holds(&self) -> bool {
        self.residual <= self.budget
    }
}

/// Product for an arbitrary character mod `q` (principal included).
pub fn build_product(chi: &DirichletCharacter) -> FiniteEulerProduct {
    FiniteEulerProduct::new(chi.modulus(), chi.primitive_inducer())
        .expect("inducer conductor always divides the modulus")
}

impl FiniteEulerProduct {
    pub fn new(q: u64, chi_star: DirichletCharacter) -> Result<Self> {
        let d = chi_star.modulus();
        if !chi_star.is_primitive() {
            return Err(Error::NotPrimitive(chi_star.label().to_string()));
        }
        if q == 0 || q % d != 0 {
            return Err(Error::invalid(format!("conductor {d} does not divide {q}")));
        }
        let active = prime_divisors(q)
            .into_iter()
            .filter(|p| d % p != 0)
            .map(|p| ActivePrime { p, angle: chi_star.angle(p).expect("p coprime to conductor") })
            .collect();
        Ok(FiniteEulerProduct { q, chi_star, active })
    }

    pub fn modulus(&self) -> u64 {
        self.q
    }

    pub fn chi_star(&self) -> &DirichletCharacter {
        &self.chi_star
    }

    pub fn active_primes(&self) -> &[ActivePrime] {
        &self.active
    }

    pub fn unit_primes(&self) -> Vec<u64> {
        self.active.iter().filter(|a| a.angle.is_one()).map(|a| a.p).collect()
    }

    /// Order of the zero at `s = 0`.
    pub fn r(&self) -> u32 {
        self.active.iter().filter(|a| a.angle.is_one()).count() as u32
    }

    /// Number of active primes, `omega(q'/d')`.
    pub fn omega(&self) -> usize {
        self.active.len()
    }

    /// `log(q'/d')`, the log of the product of the active primes.
    pub fn log_radical_ratio(&self) -> f64 {
        let qr = radical(self.q) as f64;
        let dr = radical(self.chi_star.modulus()) as f64;
        (qr / dr).ln()
    }

    /// True when `F` is identically one.
    pub fn is_trivial(&self) -> bool {
        self.active.is_empty()
    }

    pub fn require_nontrivial(&self) -> Result<()> {
        if self.is_trivial() {
            Err(Error::TrivialProduct(format!("q = {}, chi* = {}", self.q, self.chi_star.label())))
        } else {
            Ok(())
        }
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.active
            .iter()
            .map(|a| Complex64::new(1.0, 0.0) - a.value() * (-s * (a.p as f64).ln()).exp())
            .product()
    }

    /// `F'(s) / F(s)`.
    pub fn log_derivative(&self, s: Complex64) -> Complex64 {
        self.active
            .iter()
            .map(|a| {
                let lp = (a.p as f64).ln();
                let w = a.value() * (-s * lp).exp();
                w * lp / (1.0 - w)
            })
            .sum()
    }

    pub fn derivative(&self, s: Complex64) -> Complex64 {
        // product rule; avoids dividing by F near a zero
        let mut total = Complex64::new(0.0, 0.0);
        for (i, a) in self.active.iter().enumerate() {
            let lp = (a.p as f64).ln();
            let mut term = a.value() * (-s * lp).exp() * lp;
            for (j, b) in self.active.iter().enumerate() {
                if i != j {
                    term *= 1.0 - b.value() * (-s * (b.p as f64).ln()).exp();
                }
            }
            total += term;
        }
        total
    }

    /// Taylor jet of `F` at `s0` with `len` coefficients.
    pub fn jet(&self, s0: Complex64, len: usize) -> Jet {
        let mut out = Jet::constant(Complex64::new(1.0, 0.0), len);
        for a in &self.active {
            let lp = (a.p as f64).ln();
            let pow = Jet::power_of_base((-s0 * lp).exp(), lp, len);
            let factor = &Jet::constant(Complex64::new(1.0, 0.0), len) - &pow.scale(a.value());
            out = &out * &factor;
        }
        out
    }

    /// Nonzero lattice ordinates in `(-t, t)`, merged across primes.
    pub fn zero_lattice(&self, t: f64) -> Vec<LatticeZero> {
        self.lattice_in(-t, t, false)
    }

    fn lattice_in(&self, lo: f64, hi: f64, closed: bool) -> Vec<LatticeZero> {
        let mut pts: Vec<(f64, u64)> = Vec::new();
        for a in &self.active {
            let lp = (a.p as f64).ln();
            let theta = a.theta();
            let k_lo = ((lo * lp - theta) / TAU).floor() as i64 - 1;
            let k_hi = ((hi * lp - theta) / TAU).ceil() as i64 + 1;
            for k in k_lo..=k_hi {
                if a.angle.is_one() && k == 0 {
                    continue;
                }
                let eta = (theta + TAU * k as f64) / lp;
                let inside = if closed { eta >= lo && eta <= hi } else { eta > lo && eta < hi };
                if inside && eta != 0.0 {
                    pts.push((eta, a.p));
                }
            }
        }
        pts.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut out: Vec<LatticeZero> = Vec::with_capacity(pts.len());
        for (eta, p) in pts {
            if let Some(last) = out.last_mut() {
                if (eta - last.eta).abs() <= COLLISION_TOLERANCE * eta.abs().max(1.0) {
                    log::warn!("lattice collision near eta = {eta} (primes {:?} and {p})", last.primes);
                    last.primes.push(p);
                    last.multiplicity += 1;
                    continue;
                }
            }
            out.push(LatticeZero { eta, primes: vec![p], multiplicity: 1 });
        }
        out
    }

    /// Linear coefficient of the Hadamard factorization, in closed form.
    pub fn b_constant(&self) -> Complex64 {
        let mut im = 0.0;
        for a in &self.active {
            if a.angle.is_one() {
                continue;
            }
            let c = a.value();
            im += c.im / (2.0 - 2.0 * c.re) * (a.p as f64).ln();
        }
        Complex64::new(-0.5 * self.log_radical_ratio(), im)
    }

    /// `|s^r e^{a + b s} prod (1 - s/(i eta)) e^{s/(i eta)} / F(s) - 1|` with the product
    /// over lattice indices `|k| <= k_max` per active prime and `a` fixed at `s = 1`.
    pub fn hadamard_check(&self, s: Complex64, k_max: u64) -> Result<f64> {
        self.require_nontrivial()?;
        let etas = self.hadamard_points(k_max);
        let r = self.r() as i32;
        let b = self.b_constant();
        let log_prod = |z: Complex64| -> Complex64 {
            let mut acc = crate::numeric::CompensatedSum::new();
            for &eta in &etas {
                let w = z / Complex64::new(0.0, eta);
                acc.add((1.0 - w).ln() + w);
            }
            acc.value()
        };
        let one = Complex64::new(1.0, 0.0);
        let a = self.eval(one).ln() - b - log_prod(one);
        let model = (a + b * s + log_prod(s)).exp() * s.powi(r);
        let direct = self.eval(s);
        if direct.norm() == 0.0 {
            return Err(Error::invalid("hadamard_check evaluated at a zero of F"));
        }
        Ok((model / direct - 1.0).norm())
    }

    fn hadamard_points(&self, k_max: u64) -> Vec<f64> {
        let k_max = k_max as i64;
        let mut etas = Vec::new();
        for a in &self.active {
            let lp = (a.p as f64).ln();
            let theta = a.theta();
            for k in -k_max..=k_max {
                if a.angle.is_one() && k == 0 {
                    continue;
                }
                etas.push((theta + TAU * k as f64) / lp);
            }
        }
        etas.sort_by(|x, y| x.abs().total_cmp(&y.abs()).then(x.total_cmp(y)));
        etas
    }

    /// Zeros on `i[t, t + h]` with multiplicity (the zero at 0 counts `r` times),
    /// together with the counting bound.
    pub fn count_zeros(&self, t: f64, h: f64) -> Result<ZeroCount> {
        if !(h > 0.0) {
            return Err(Error::invalid("h must be positive"));
        }
        let mut count: u64 = self
            .lattice_in(t, t + h, true)
            .iter()
            .map(|z| z.multiplicity as u64)
            .sum();
        if t <= 0.0 && 0.0 <= t + h {
            count += self.r() as u64;
        }
        let r = self.r() as f64;
        let bound = self.omega() as f64 + 0.5 * h * self.log_radical_ratio() + h * h / (h * h + t * t) * r;
        Ok(ZeroCount { count, bound })
    }

    /// `1/|F(s)| <= exp(2 omega(q) log q)`, valid for `sigma >= 1/log q`.
    pub fn upper_bound_check(&self, sigma: f64, t: f64) -> Result<BoundCheck> {
        let lq = (self.q as f64).ln();
        if self.q < 2 || sigma < 1.0 / lq {
            return Err(Error::invalid(format!("upper bound regime needs sigma >= 1/log q, got {sigma}")));
        }
        let lhs = 1.0 / self.eval(Complex64::new(sigma, t)).norm();
        let rhs = (2.0 * crate::arith::omega(self.q) as f64 * lq).exp();
        Ok(BoundCheck { lhs, rhs, holds: lhs <= rhs })
    }

    /// `|F(s)| >= |sigma|^omega log 2` for `sigma <= -h`, with omega the number of active primes.
    pub fn lower_bound_check(&self, sigma: f64, t: f64, h: f64) -> Result<BoundCheck> {
        if !(h > 0.0) || sigma > -h {
            return Err(Error::invalid(format!("lower bound regime needs sigma <= -h, got sigma = {sigma}, h = {h}")));
        }
        let lhs = self.eval(Complex64::new(sigma, t)).norm();
        let rhs = sigma.abs().powi(self.omega() as i32) * 2f64.ln();
        Ok(BoundCheck { lhs, rhs, holds: lhs >= rhs })
    }

    /// Compare `F'/F(s)` with `r/s + sum_{|t - eta| <= h} 1/(s - i eta)`.
    pub fn log_derivative_check(&self, s: Complex64, h: f64) -> Result<LogDerivativeCheck> {
        if !(h > 0.0) || s.re.abs() > h {
            return Err(Error::invalid("log_derivative_check needs |sigma| <= h"));
        }
        let f = self.eval(s);
        if f.norm() < 1e-300 {
            return Err(Error::invalid("s is a zero of F"));
        }
        let r = self.r() as f64;
        let local = self.lattice_in(s.im - h, s.im + h, true);
        let mut model = if r > 0.0 { Complex64::new(r, 0.0) / s } else { Complex64::new(0.0, 0.0) };
        for z in &local {
            model += z.multiplicity as f64 / (s - Complex64::new(0.0, z.eta));
        }
        let residual = (self.log_derivative(s) - model).norm();
        let budget = BUDGET_CONSTANT
            * (self.omega() as f64 / h + self.log_radical_ratio() + r / (s.im.abs() + h));
        Ok(LogDerivativeCheck { residual, budget, local_zeros: local.len() })
    }

    /// Smallest nonzero `|eta|` on the lattice.
    pub fn min_abs_eta(&self) -> f64 {
        self.active
            .iter()
            .map(|a| {
                let theta = a.theta();
                first_positive_eta(theta, a.p).min(if theta > 0.0 { (TAU - theta) / (a.p as f64).ln() } else { f64::INFINITY })
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Zero ordinates in `[lo, hi]`, including 0 when `r > 0`.
    pub fn lattice_ordinates_near(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut v: Vec<f64> = self.lattice_in(lo, hi, true).into_iter().map(|z| z.eta).collect();
        if lo <= 0.0 && hi >= 0.0 && self.r() > 0 {
            v.push(0.0);
            v.sort_by(f64::total_cmp);
        }
        v
    }

    pub fn lattice_csv(&self, t: f64) -> String {
        let mut out = String::from("eta,prime,multiplicity\n");
        for z in self.zero_lattice(t) {
            let primes: Vec<String> = z.primes.iter().map(|p| p.to_string()).collect();
            let _ = writeln!(out, "{:.15e},{},{}", z.eta, primes.join("+"), z.multiplicity);
        }
        out
    }
}

/// First positive lattice point for a single factor with `chi*(p) = e^{i theta}`.
pub fn first_positive_eta(theta: f64, p: u64) -> f64 {
    let lp = (p as f64).ln();
    if theta > 0.0 {
        theta / lp
    } else {
        TAU / lp
    }
}
