//! Residues of `x^s / (s L(s))`-type integrands: closed forms for primitive
//! characters and a trapezoid contour integral that does not care about pole order.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::characters::DirichletCharacter;
use crate::error::{Error, Result};
use crate::field::AbelianField;
use crate::finite_euler::build_product;
use crate::lfunc::gamma::ln_gamma;
use crate::lfunc::{dedekind_eval, l_derivative, l_eval, PrecisionPolicy};
use crate::numeric::EULER_GAMMA;

pub const QUADRATURE_TOLERANCE: f64 = 1e-10;
const MIN_LEVEL: u32 = 4;
const MAX_LEVEL: u32 = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidueKind {
    NontrivialZero,
    TrivialZero,
    SZero,
    ImaginaryAxis,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidueMethod {
    ClosedForm,
    ContourQuadrature,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ResidueTerm {
    pub location: Complex64,
    pub kind: ResidueKind,
    pub value: Complex64,
    pub method: ResidueMethod,
    pub multiplicity_used: u32,
}

impl ResidueTerm {
    /// `|a - b| <= 1e-8 (1 + |a|)`.
    pub fn agrees_with(&self, other: &ResidueTerm) -> bool {
        (self.value - other.value).norm() <= 1e-8 * (1.0 + self.value.norm())
    }
}

/// The `1/L`-type factor multiplying `x^s / s`.
#[derive(Clone, Copy, Debug)]
pub enum Integrand<'a> {
    /// `1 / L(s, chi)`.
    Character(&'a DirichletCharacter),
    /// `1 / (L(s, chi*) F(s))`, assembled from the inducer.
    Factored(&'a DirichletCharacter),
    /// `L_{-1}(s; q, a) = phi(q)^{-1} sum_chi conj(chi(a)) / L(s, chi)`.
    Progression { characters: &'a [DirichletCharacter], a: u64 },
    /// `1 / zeta_K(s)`.
    Field(&'a AbelianField),
}

impl Integrand<'_> {
    pub fn eval(&self, s: Complex64, policy: &PrecisionPolicy) -> Result<Complex64> {
        match *self {
            Integrand::Character(chi) => Ok(l_eval(s, chi, policy)?.value.inv()),
            Integrand::Factored(chi) => {
                let star = chi.primitive_inducer();
                let l = l_eval(s, &star, policy)?.value;
                Ok((l * build_product(chi).eval(s)).inv())
            }
            Integrand::Progression { characters, a } => {
                let mut acc = Complex64::new(0.0, 0.0);
                for chi in characters {
                    let w = chi.value(a).conj();
                    acc += w / l_eval(s, chi, policy)?.value;
                }
                Ok(acc / characters.len() as f64)
            }
            Integrand::Field(k) => Ok(dedekind_eval(s, k, policy)?.value.inv()),
        }
    }
}

/// Outcome of a contour integration, with the convergence history.
#[derive(Clone, Debug)]
pub struct Quadrature {
    pub value: Complex64,
    pub radius: f64,
    pub nodes: usize,
    /// `|I_{2n} - I_n|` for each doubling.
    pub differences: Vec<f64>,
}

/// `(1/2 pi i) \oint f` over the circle `|s - center| = radius` by the trapezoid rule,
/// doubling nodes from 16 until successive values agree to `1e-10`.
pub fn contour_integral<F>(f: F, center: Complex64, radius: f64) -> Result<Quadrature>
where
    F: Fn(Complex64) -> Result<Complex64> + Sync,
{
    let node = |j: usize, n: usize| -> Complex64 { Complex64::from_polar(1.0, 2.0 * PI * j as f64 / n as f64) };
    let mut n = 1usize << MIN_LEVEL;
    // sum of f(s_j) e^{i theta_j} over all current nodes
    let mut acc: Complex64 = (0..n)
        .into_par_iter()
        .map(|j| {
            let e = node(j, n);
            Ok(f(center + e * radius)? * e)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    let mut value = acc * radius / n as f64;
    let mut differences = Vec::new();
    for _ in MIN_LEVEL..MAX_LEVEL {
        let m = 2 * n;
        let fresh: Complex64 = (0..n)
            .into_par_iter()
            .map(|j| {
                let e = node(2 * j + 1, m);
                Ok(f(center + e * radius)? * e)
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .sum();
        acc += fresh;
        n = m;
        let next = acc * radius / n as f64;
        let diff = (next - value).norm();
        differences.push(diff);
        value = next;
        if diff <= QUADRATURE_TOLERANCE * value.norm().max(1.0) {
            return Ok(Quadrature { value, radius, nodes: n, differences });
        }
    }
    Err(Error::QuadratureNonConvergence(format!(
        "center {center}, radius {radius}, last difference {:e}",
        differences.last().copied().unwrap_or(f64::NAN)
    )))
}

/// Default radius `min(1/2, 1/log(x+3))`, capped below half the distance to the
/// nearest other singularity.
pub fn quadrature_radius(x: f64, nearest_other: f64) -> f64 {
    (1.0 / (x + 3.0).ln()).min(0.5).min(0.45 * nearest_other)
}

/// Residue of `x^s f(s) / s` at `pole`, halving the radius once on non-convergence.
pub fn residue_quadrature(
    x: f64,
    pole: Complex64,
    radius: f64,
    integrand: Integrand<'_>,
    kind: ResidueKind,
    policy: &PrecisionPolicy,
) -> Result<ResidueTerm> {
    let lx = x.ln();
    let f = |s: Complex64| -> Result<Complex64> { Ok((s * lx).exp() / s * integrand.eval(s, policy)?) };
    let q = match contour_integral(&f, pole, radius) {
        Ok(q) => q,
        Err(Error::QuadratureNonConvergence(msg)) => {
            log::warn!("quadrature at {pole} did not settle ({msg}); halving the radius");
            contour_integral(&f, pole, radius / 2.0)?
        }
        Err(e) => return Err(e),
    };
    Ok(ResidueTerm {
        location: pole,
        kind,
        value: q.value,
        method: ResidueMethod::ContourQuadrature,
        multiplicity_used: 0,
    })
}

/// Closed-form residue of `x^s / (L(s, chi) s)` at `s = -l` (`l = 0` is the pole at
/// the origin) for a primitive character.
///
/// Even characters use the sign `(-1)^{k+1}` at `s = -2k`, which is what the
/// functional equation gives.
pub fn trivial_residue_primitive(x: f64, chi: &DirichletCharacter, l: u32, policy: &PrecisionPolicy) -> Result<ResidueTerm> {
    if !chi.is_primitive() {
        return Err(Error::NotPrimitive(chi.label().to_string()));
    }
    if !(x > 0.0) {
        return Err(Error::invalid("x must be positive"));
    }
    let q = chi.modulus() as f64;
    let odd = chi.is_odd();
    let tau = chi.gauss_sum();
    let cbar = chi.conj();
    let ln_y = (q * x / (2.0 * PI)).ln();
    let i = Complex64::new(0.0, 1.0);
    let real = |v: f64| Complex64::new(v, 0.0);
    let value = if l == 0 {
        if chi.modulus() == 1 {
            real(-2.0)
        } else {
            let l1 = l_eval(real(1.0), &cbar, policy)?.value;
            if odd {
                PI * i / (tau * l1)
            } else {
                let d1 = l_derivative(real(1.0), &cbar, 1, policy)?.value;
                2.0 / (tau * l1) * (ln_y + d1 / l1 - EULER_GAMMA)
            }
        }
    } else if (l % 2 == 1) != odd {
        real(0.0)
    } else if odd {
        let k = (l + 1) / 2;
        let lf = l as f64;
        let mag = (-lf * ln_y - lf.ln() - ln_gamma(real(lf + 1.0)).re).exp();
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let lk = l_eval(real(2.0 * k as f64), &cbar, policy)?.value;
        sign * 2.0 * i * mag / (tau * lk)
    } else {
        let k = l / 2;
        let kf = k as f64;
        let mag = (-2.0 * kf * ln_y - kf.ln() - ln_gamma(real(2.0 * kf + 1.0)).re).exp();
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        let lk = l_eval(real(2.0 * kf + 1.0), &cbar, policy)?.value;
        sign * mag / (tau * lk)
    };
    Ok(ResidueTerm {
        location: real(-(l as f64)),
        kind: if l == 0 { ResidueKind::SZero } else { ResidueKind::TrivialZero },
        value,
        method: ResidueMethod::ClosedForm,
        multiplicity_used: if l == 0 { if odd || chi.modulus() == 1 { 1 } else { 2 } } else { 1 },
    })
}

/// True when `L(s, chi)` for primitive `chi` vanishes at `s = -l`, `l >= 1`.
pub fn has_trivial_zero(chi: &DirichletCharacter, l: u32) -> bool {
    (l % 2 == 1) == chi.is_odd()
}

/// Leading `s = 0` term `-2^{r1+r2} pi^{r2} (log x)^{r1+r2-1} / (sqrt|d_K| kappa_K)`.
pub fn field_s_zero_leading(x: f64, field: &AbelianField) -> f64 {
    let (r1, r2) = field.signature();
    let e = (r1 + r2) as i32 - 1;
    -(2f64.powi((r1 + r2) as i32)) * PI.powi(r2 as i32) * x.ln().powi(e)
        / ((field.discriminant().unsigned_abs() as f64).sqrt() * field.kappa())
}
