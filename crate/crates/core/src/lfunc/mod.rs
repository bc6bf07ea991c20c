//! Dirichlet L-functions: values, derivatives, the completed function, the
//! reflected left half-plane and the Hardy rotation on the critical line.
//!
//! Direct evaluation splits `L(s, chi) = q^{-s} sum_a chi(a) zeta(s, a/q)` and runs
//! Euler–Maclaurin on every Hurwitz zeta with a common cutoff. The whole expression
//! is carried through [`jet::Jet`] arithmetic so that derivatives of any order come
//! out of the same code path.

pub mod gamma;
pub mod jet;

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock, RwLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::characters::DirichletCharacter;
use crate::error::{Error, Result};
use crate::field::AbelianField;
use crate::finite_euler::build_product;
use crate::numeric::CompensatedSum;

use self::gamma::{is_gamma_pole, ln_gamma};
use self::jet::Jet;

/// Below this real part [`l_eval`] switches to the functional equation.
pub const DIRECT_SIGMA_FLOOR: f64 = -3.0;

const MAX_ORDER: u32 = 26;

// B_2, B_4, ..., B_28
const BERNOULLI_EVEN: [f64; 14] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
    854513.0 / 138.0,
    -236364091.0 / 2730.0,
    8553103.0 / 6.0,
    -23749461029.0 / 870.0,
];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrecisionPolicy {
    pub target_relative_error: f64,
    /// Highest Bernoulli index used in the Euler–Maclaurin tail.
    pub euler_maclaurin_order: u32,
    pub cutoff_scale: f64,
    pub cutoff_base: f64,
}

impl Default for PrecisionPolicy {
    fn default() -> Self {
        PrecisionPolicy {
            target_relative_error: 1e-11,
            euler_maclaurin_order: 12,
            cutoff_scale: 1.3,
            cutoff_base: 30.0,
        }
    }
}

impl PrecisionPolicy {
    pub fn validate(&self) -> Result<()> {
        let m = self.euler_maclaurin_order;
        if m < 2 || m % 2 != 0 || m > MAX_ORDER {
            return Err(Error::invalid(format!(
                "euler_maclaurin_order must be even and in [2, {MAX_ORDER}], got {m}"
            )));
        }
        if !(self.cutoff_base >= 10.0) || !(self.cutoff_scale >= 0.0) {
            return Err(Error::invalid("series cutoff must be at least 10 terms"));
        }
        if !(self.target_relative_error > 0.0) {
            return Err(Error::invalid("target_relative_error must be positive"));
        }
        Ok(())
    }

    /// Number of terms per residue class before the Euler–Maclaurin tail.
    pub fn cutoff(&self, t: f64) -> u64 {
        (t.abs() * self.cutoff_scale + self.cutoff_base).ceil() as u64
    }

    /// Short fingerprint used to invalidate caches built under another policy.
    pub fn fingerprint(&self) -> String {
        format!(
            "em{}-c{}x{}-r{:e}",
            self.euler_maclaurin_order, self.cutoff_scale, self.cutoff_base, self.target_relative_error
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EvalResult {
    pub value: Complex64,
    /// Last-term heuristic plus a roundoff allowance; not a rigorous bound.
    pub error_estimate: f64,
    /// Set when the point is a trivial zero and the value is exactly 0.
    pub trivial_zero: bool,
}

impl EvalResult {
    fn new(value: Complex64, error_estimate: f64) -> Self {
        EvalResult { value, error_estimate, trivial_zero: false }
    }
}

struct CharData {
    epsilon: Complex64,
    epsilon_sqrt_inv: Complex64,
}

fn char_data(chi: &DirichletCharacter) -> Result<Arc<CharData>> {
    static CACHE: OnceLock<RwLock<HashMap<String, Arc<CharData>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(d) = cache.read().expect("character cache poisoned").get(chi.label()) {
        return Ok(d.clone());
    }
    let epsilon = chi.epsilon_factor()?;
    let data = Arc::new(CharData { epsilon, epsilon_sqrt_inv: epsilon.sqrt().inv() });
    let mut w = cache.write().expect("character cache poisoned");
    Ok(w.entry(chi.label().to_string()).or_insert(data).clone())
}

/// Root number `epsilon(chi)` of a primitive character (cached).
pub fn root_number(chi: &DirichletCharacter) -> Result<Complex64> {
    Ok(char_data(chi)?.epsilon)
}

fn phi_jet(z0: Complex64, dz: f64, len: usize) -> Jet {
    // (e^z - 1)/z along z = z0 + dz * eps
    if z0.norm() < 0.5 {
        let mut coeffs = Vec::with_capacity(len);
        let mut dzp = 1.0;
        for j in 0..len {
            let mut fact = 1.0;
            for i in 2..=(j + 1) {
                fact *= i as f64;
            }
            let mut term = Complex64::new(1.0 / fact, 0.0);
            let mut acc = term;
            for m in j..j + 60 {
                term = term * z0 * ((m + 1) as f64 / (m + 1 - j) as f64) / (m + 2) as f64;
                acc += term;
                if term.norm() < 1e-18 * acc.norm() {
                    break;
                }
            }
            coeffs.push(acc * dzp);
            dzp *= dz;
        }
        Jet(coeffs)
    } else {
        let mut z = Jet::constant(z0, len);
        if len > 1 {
            z.0[1] = Complex64::new(dz, 0.0);
        }
        let num = &z.exp() - &Jet::constant(Complex64::new(1.0, 0.0), len);
        &num * &z.recip()
    }
}

fn bernoulli_coefficients(count: usize) -> Vec<f64> {
    // B_{2j} / (2j)!
    let mut fact = 1.0;
    let mut out = Vec::with_capacity(count);
    for (j, b) in BERNOULLI_EVEN.iter().enumerate().take(count) {
        let n = 2 * (j + 1);
        fact *= ((n - 1) * n) as f64;
        out.push(b / fact);
    }
    out
}

/// Euler–Maclaurin evaluation for any character at its own modulus.
fn hurwitz_jet(s0: Complex64, chi: &DirichletCharacter, len: usize, policy: &PrecisionPolicy) -> Result<(Jet, f64)> {
    policy.validate()?;
    let q = chi.modulus();
    let n = policy.cutoff(s0.im);
    let m_terms = (policy.euler_maclaurin_order / 2) as usize;
    let principal = chi.is_principal();
    if principal && s0 == Complex64::new(1.0, 0.0) {
        return Err(Error::Pole(format!("L(s, {}) at s = 1", chi.label())));
    }
    let chival: Vec<Option<Complex64>> = (0..q).map(|r| chi.angle(r).map(|a| a.to_complex())).collect();

    let mut sums: Vec<CompensatedSum> = vec![CompensatedSum::new(); len];
    let mut abs_sum = 0.0;
    let top = n * q;
    for m in 1..=top {
        let Some(c) = chival[(m % q) as usize] else { continue };
        let lm = (m as f64).ln();
        let mag = (-s0.re * lm).exp();
        let (si, co) = (s0.im * lm).sin_cos();
        let mut term = c * Complex64::new(mag * co, -mag * si);
        abs_sum += mag;
        sums[0].add(term);
        for (k, acc) in sums.iter_mut().enumerate().skip(1) {
            term = term * (-lm / k as f64);
            acc.add(term);
        }
    }
    let mut total = Jet(sums.iter().map(|s| s.value()).collect());

    let coef = bernoulli_coefficients(m_terms + 1);
    let s_jet = Jet::variable(s0, len);
    let mut poch = Vec::with_capacity(m_terms + 1);
    let mut p = s_jet.clone();
    for j in 0..=m_terms {
        poch.push(p.clone());
        let a = &s_jet + &Jet::constant(Complex64::new((2 * j + 1) as f64, 0.0), len);
        let b = &s_jet + &Jet::constant(Complex64::new((2 * j + 2) as f64, 0.0), len);
        p = &(&p * &a) * &b;
    }
    let mut poch_next_abs = 1.0;
    for i in 0..=(2 * m_terms) {
        poch_next_abs *= (s0 + i as f64).norm();
    }
    let inv_s_minus_1 = if principal {
        Some((&s_jet - &Jet::constant(Complex64::new(1.0, 0.0), len)).recip())
    } else {
        None
    };

    let mut remainder = 0.0;
    let mut tail_abs = 0.0;
    for a in 1..=q {
        let Some(c) = chival[(a % q) as usize] else { continue };
        let w = (top + a) as f64;
        let v = w / q as f64;
        let lw = w.ln();
        let wpow0 = (-s0 * lw).exp();
        let wpow = Jet::power_of_base(wpow0, lw, len);
        let mut bracket = Jet::constant(Complex64::new(0.5, 0.0), len);
        let mut vpow = 1.0 / v;
        for j in 0..m_terms {
            bracket.add_scaled(&poch[j], Complex64::new(coef[j] * vpow, 0.0));
            vpow /= v * v;
        }
        let mut term = &wpow * &bracket;
        match &inv_s_minus_1 {
            Some(inv) => {
                let pole = &wpow * inv;
                term.add_scaled(&pole, Complex64::new(v, 0.0));
            }
            None => {
                let z0 = (1.0 - s0) * lw;
                let phi = phi_jet(z0, -lw, len);
                term.add_scaled(&phi, Complex64::new(-lw / q as f64, 0.0));
            }
        }
        total.add_scaled(&term, c);
        remainder += coef[m_terms].abs() * poch_next_abs * wpow0.norm() * vpow;
        tail_abs += wpow0.norm() * v;
    }
    let roundoff = 4.0 * f64::EPSILON * (abs_sum + tail_abs);
    let lmax = (top as f64 + q as f64).ln().max(1.0);
    let err = (remainder + roundoff) * lmax.powi(len as i32 - 1);
    Ok((total, err))
}

/// Jet of `L(s, chi)` at `s0` with `len` Taylor coefficients.
pub fn l_jet(s0: Complex64, chi: &DirichletCharacter, len: usize, policy: &PrecisionPolicy) -> Result<(Jet, f64)> {
    if chi.is_principal() && chi.modulus() > 1 {
        if s0 == Complex64::new(1.0, 0.0) {
            return Err(Error::Pole(format!("L(s, {}) at s = 1", chi.label())));
        }
        let (z, err) = hurwitz_jet(s0, &DirichletCharacter::trivial(), len, policy)?;
        let f = build_product(chi).jet(s0, len);
        let scale = f.0.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1.0);
        return Ok((&z * &f, err * scale));
    }
    hurwitz_jet(s0, chi, len, policy)
}

/// `L(s, chi)`. Uses the functional equation of the inducer for `sigma < -3`.
pub fn l_eval(s: Complex64, chi: &DirichletCharacter, policy: &PrecisionPolicy) -> Result<EvalResult> {
    if s.re < DIRECT_SIGMA_FLOOR {
        let star = chi.primitive_inducer();
        let r = reflect_eval(s, &star, policy)?;
        let f = build_product(chi).eval(s);
        return Ok(EvalResult {
            value: r.value * f,
            error_estimate: r.error_estimate * f.norm(),
            trivial_zero: r.trivial_zero,
        });
    }
    let (j, err) = l_jet(s, chi, 1, policy)?;
    let res = EvalResult::new(j.value(), err);
    if res.error_estimate > policy.target_relative_error * res.value.norm() {
        log::debug!(
            "L(s, {}) at s = {s}: error estimate {:e} above target for |L| = {:e}",
            chi.label(),
            res.error_estimate,
            res.value.norm()
        );
    }
    Ok(res)
}

/// `k`-th derivative of `L(s, chi)`; `order = 0` is [`l_eval`].
pub fn l_derivative(s: Complex64, chi: &DirichletCharacter, order: usize, policy: &PrecisionPolicy) -> Result<EvalResult> {
    if order == 0 {
        return l_eval(s, chi, policy);
    }
    let (j, err) = l_jet(s, chi, order + 1, policy)?;
    let d = j.derivatives();
    let mut fact = 1.0;
    for i in 2..=order {
        fact *= i as f64;
    }
    Ok(EvalResult::new(d[order], err * fact))
}

/// Direct Euler–Maclaurin evaluation at the character's own modulus, bypassing the
/// `zeta * F` assembly for principal characters.
pub fn l_eval_direct(s: Complex64, chi: &DirichletCharacter, policy: &PrecisionPolicy) -> Result<EvalResult> {
    let (j, err) = hurwitz_jet(s, chi, 1, policy)?;
    Ok(EvalResult::new(j.value(), err))
}

/// `L(s, chi*) F(s)`.
pub fn l_eval_via_inducer(s: Complex64, chi: &DirichletCharacter, policy: &PrecisionPolicy) -> Result<EvalResult> {
    let star = chi.primitive_inducer();
    let l = l_eval(s, &star, policy)?;
    let f = build_product(chi).eval(s);
    Ok(EvalResult { value: l.value * f, error_estimate: l.error_estimate * f.norm(), trivial_zero: l.trivial_zero })
}

/// `log G(s)` with `G(s) = (q/pi)^{(s+kappa)/2} Gamma((s+kappa)/2)`.
pub fn ln_gamma_factor(s: Complex64, chi: &DirichletCharacter) -> Complex64 {
    let kappa = chi.kappa() as f64;
    let z = (s + kappa) / 2.0;
    z * (chi.modulus() as f64 / PI).ln() + ln_gamma(z)
}

fn require_primitive(chi: &DirichletCharacter) -> Result<()> {
    if chi.is_primitive() {
        Ok(())
    } else {
        Err(Error::NotPrimitive(chi.label().to_string()))
    }
}

/// `L(s, chi) = epsilon G(1-s)/G(s) L(1-s, conj chi)` for `sigma <= -1`.
pub fn reflect_eval(s: Complex64, chi: &DirichletCharacter, policy: &PrecisionPolicy) -> Result<EvalResult> {
    require_primitive(chi)?;
    if s.re > -1.0 {
        return Err(Error::invalid(format!("reflect_eval needs sigma <= -1, got {}", s.re)));
    }
    let kappa = chi.kappa() as f64;
    if is_gamma_pole((s + kappa) / 2.0) {
        return Ok(EvalResult { value: Complex64::new(0.0, 0.0), error_estimate: 0.0, trivial_zero: true });
    }
    let dual = l_eval(1.0 - s, &chi.conj(), policy)?;
    let ratio = (ln_gamma_factor(1.0 - s, chi) - ln_gamma_factor(s, chi)).exp();
    let eps = char_data(chi)?.epsilon;
    let value = eps * ratio * dual.value;
    let rel = dual.error_estimate / dual.value.norm().max(f64::MIN_POSITIVE) + 1e-14 * (1.0 + s.norm().ln());
    Ok(EvalResult::new(value, rel * value.norm()))
}

/// `Lambda(s, chi) = G(s) L(s, chi)` for primitive `chi`.
pub fn completed_lambda(s: Complex64, chi: &DirichletCharacter, policy: &PrecisionPolicy) -> Result<Complex64> {
    require_primitive(chi)?;
    let kappa = chi.kappa() as f64;
    if is_gamma_pole((s + kappa) / 2.0) {
        if chi.modulus() == 1 {
            return Err(Error::Pole("completed zeta at s = 0".into()));
        }
        // G has a pole where L has its trivial zero; use the other side
        let eps = char_data(chi)?.epsilon;
        return Ok(eps * completed_lambda(1.0 - s, &chi.conj(), policy)?);
    }
    if chi.modulus() == 1 && s == Complex64::new(1.0, 0.0) {
        return Err(Error::Pole("completed zeta at s = 1".into()));
    }
    let l = l_eval(s, chi, policy)?;
    Ok(ln_gamma_factor(s, chi).exp() * l.value)
}

/// Hardy function with its imaginary residue, before the reality check.
pub fn hardy_z_complex(t: f64, chi: &DirichletCharacter, policy: &PrecisionPolicy) -> Result<(Complex64, f64)> {
    require_primitive(chi)?;
    let s = Complex64::new(0.5, t);
    let l = l_eval(s, chi, policy)?;
    let theta = ln_gamma_factor(s, chi).im;
    let rot = char_data(chi)?.epsilon_sqrt_inv * Complex64::from_polar(1.0, theta);
    Ok((rot * l.value, l.error_estimate))
}

/// Real-valued `Z_chi(t)`, a positive multiple of `epsilon^{-1/2} Lambda(1/2 + it)`.
pub fn hardy_z(t: f64, chi: &DirichletCharacter, policy: &PrecisionPolicy) -> Result<f64> {
    let (z, err) = hardy_z_complex(t, chi, policy)?;
    // absolute floor keeps the check meaningful next to a zero
    let tol = 1e-9 * z.norm() + 10.0 * err.max(1e-14);
    if z.im.abs() > tol {
        return Err(Error::ImaginaryPart { t, im: z.im });
    }
    Ok(z.re)
}

/// `zeta_K(s) = prod_{chi in X(K)} L(s, chi*)`.
pub fn dedekind_eval(s: Complex64, field: &AbelianField, policy: &PrecisionPolicy) -> Result<EvalResult> {
    if s == Complex64::new(1.0, 0.0) {
        return Err(Error::Pole(format!("zeta_K for {} at s = 1", field.label())));
    }
    let mut value = Complex64::new(1.0, 0.0);
    let mut rel = 0.0;
    let mut trivial_zero = false;
    for chi in field.inducers() {
        let r = l_eval(s, chi, policy)?;
        trivial_zero |= r.trivial_zero;
        rel += r.error_estimate / r.value.norm().max(f64::MIN_POSITIVE);
        value *= r.value;
    }
    Ok(EvalResult { value, error_estimate: rel * value.norm(), trivial_zero })
}

/// Taylor jet of `zeta_K` at `s0`.
pub fn dedekind_jet(s0: Complex64, field: &AbelianField, len: usize, policy: &PrecisionPolicy) -> Result<Jet> {
    let mut out = Jet::constant(Complex64::new(1.0, 0.0), len);
    for chi in field.inducers() {
        let (j, _) = l_jet(s0, chi, len, policy)?;
        out = &out * &j;
    }
    Ok(out)
}
