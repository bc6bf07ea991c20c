//! Truncated explicit formulas for `M*(x, chi)`, `M*(x; q, a)` and `M_K*(x)`, and the
//! sums `sum 1/L'(rho)` over critical zeros.
//!
//! Every assembly returns an [`ExplicitFormulaReport`] that carries the individual
//! pieces, the sieve value it should reproduce, and the inputs of the truncation
//! error budget.

pub mod residue;

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::arith::{euler_phi, gcd};
use crate::characters::{build_group, DirichletCharacter};
use crate::error::{Error, Result};
use crate::field::{good_ordinate_field, AbelianField};
use crate::finite_euler::{build_product, FiniteEulerProduct};
use crate::lfunc::{l_derivative, l_eval, PrecisionPolicy};
use crate::numeric::CompensatedSum;
use crate::sieve::{
    nearest_active_norm, nearest_squarefree_coprime, summatory_field, summatory_progression, summatory_twisted,
    FieldCoefficients, MobiusTable,
};
use crate::zeros::{find_t_nu, find_t_star, GoodOrdinate, TStar, ZeroSource};

pub use residue::{
    contour_integral, field_s_zero_leading, has_trivial_zero, quadrature_radius, residue_quadrature,
    trivial_residue_primitive, Integrand, Quadrature, ResidueKind, ResidueMethod, ResidueTerm,
};

/// Safety ceiling on the trivial-zero series.
pub const TRIVIAL_CEILING: u32 = 200;
/// Relative size below which the trivial-zero series stops.
pub const TRIVIAL_STOP: f64 = 1e-16;
/// `|L'(rho)|` below this is treated as a possible multiple zero.
pub const MULTIPLE_ZERO_THRESHOLD: f64 = 1e-12;
/// Ordinates of different factors closer than this are handled as one pole.
pub const COINCIDENCE_TOLERANCE: f64 = 1e-9;
/// Residuals up to this multiple of the unit-constant budget pass.
pub const BUDGET_FACTOR: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FormulaSettings {
    pub policy: PrecisionPolicy,
    pub sigma_step: f64,
    pub t_step: f64,
}

impl Default for FormulaSettings {
    fn default() -> Self {
        FormulaSettings { policy: PrecisionPolicy::default(), sigma_step: 0.1, t_step: 0.1 }
    }
}

/// Heights at which the contour is cut.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Heights {
    pub t_requested: f64,
    pub good: GoodOrdinate,
    pub t_star: Option<TStar>,
}

impl Heights {
    pub fn t_nu(&self) -> f64 {
        self.good.t_nu
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BudgetInputs {
    pub x_over_t: f64,
    pub log_term: f64,
    /// `max 1/|L|` on the grid at `T_nu`.
    pub attained_bound: f64,
    /// `exp((log log T)^2)` with unit constant.
    pub exp_term: f64,
    /// `<x>` or `|x - n_x|`.
    pub nearest_distance: f64,
    pub boundary_term: f64,
    /// `Phi_0(K)` for field formulas.
    pub phi0: Option<f64>,
    pub budget: f64,
    /// Whether `T >= exp(q^{1/3})` holds; recorded, not enforced.
    pub height_condition_met: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LeadingTerm {
    pub description: String,
    pub value: Complex64,
    /// Fitted power of `log x` in the `s = 0` residue, when measured.
    pub fitted_exponent: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExplicitFormulaReport {
    pub formula: String,
    pub label: String,
    pub x: f64,
    pub t_requested: f64,
    pub t_nu: f64,
    pub t_star: Option<f64>,
    pub zero_sum: Complex64,
    pub imaginary_axis_sum: Complex64,
    pub trivial_sum: Complex64,
    pub s_zero_term: Complex64,
    pub formula_total: Complex64,
    pub sieve_truth: Complex64,
    pub residual: Complex64,
    pub zeros_used: usize,
    pub lattice_points_used: usize,
    pub trivial_terms_used: u32,
    pub budget: BudgetInputs,
    pub within_budget: bool,
    pub leading_term: Option<LeadingTerm>,
    pub notes: Vec<String>,
}

impl ExplicitFormulaReport {
    #[allow(clippy::too_many_arguments)]
    fn finish(
        formula: &str,
        label: &str,
        x: f64,
        heights: &Heights,
        parts: Parts,
        sieve_truth: Complex64,
        budget: BudgetInputs,
        leading_term: Option<LeadingTerm>,
        notes: Vec<String>,
    ) -> Self {
        let formula_total = parts.zero_sum + parts.imaginary_axis_sum + parts.trivial_sum + parts.s_zero_term;
        let residual = sieve_truth - formula_total;
        ExplicitFormulaReport {
            formula: formula.to_string(),
            label: label.to_string(),
            x,
            t_requested: heights.t_requested,
            t_nu: heights.t_nu(),
            t_star: heights.t_star.map(|t| t.t_star),
            zero_sum: parts.zero_sum,
            imaginary_axis_sum: parts.imaginary_axis_sum,
            trivial_sum: parts.trivial_sum,
            s_zero_term: parts.s_zero_term,
            formula_total,
            sieve_truth,
            residual,
            zeros_used: parts.zeros_used,
            lattice_points_used: parts.lattice_points_used,
            trivial_terms_used: parts.trivial_terms_used,
            within_budget: residual.norm() <= BUDGET_FACTOR * budget.budget,
            budget,
            leading_term,
            notes,
        }
    }

    /// Multi-line breakdown printed when a residual check fails.
    pub fn breakdown(&self) -> String {
        format!(
            "{} {} x={} T={} T_nu={} T_*={:?}\n  zero_sum={} ({} zeros)\n  imaginary_axis_sum={} ({} points)\n  \
             trivial_sum={} ({} terms)\n  s_zero_term={}\n  total={}\n  truth={}\n  residual={} (|r| = {:.3e})\n  \
             budget={:.3e} [x/T={:.3e}, log={:.3}, bound={:.3e}, exp={:.3e}, dist={}, boundary={:.3e}]",
            self.formula,
            self.label,
            self.x,
            self.t_requested,
            self.t_nu,
            self.t_star,
            self.zero_sum,
            self.zeros_used,
            self.imaginary_axis_sum,
            self.lattice_points_used,
            self.trivial_sum,
            self.trivial_terms_used,
            self.s_zero_term,
            self.formula_total,
            self.sieve_truth,
            self.residual,
            self.residual.norm(),
            self.budget.budget,
            self.budget.x_over_t,
            self.budget.log_term,
            self.budget.attained_bound,
            self.budget.exp_term,
            self.budget.nearest_distance,
            self.budget.boundary_term,
        )
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct Parts {
    zero_sum: Complex64,
    imaginary_axis_sum: Complex64,
    trivial_sum: Complex64,
    s_zero_term: Complex64,
    zeros_used: usize,
    lattice_points_used: usize,
    trivial_terms_used: u32,
}

fn xpow(x: f64, s: Complex64) -> Complex64 {
    (s * x.ln()).exp()
}

fn height_condition(t: f64, q: u64) -> bool {
    t.ln() >= (q as f64).cbrt()
}

fn classical_budget(x: f64, heights: &Heights, nearest: f64, q: u64) -> BudgetInputs {
    let t = heights.t_requested;
    let x_over_t = x / t;
    let log_term = (x + 3.0).ln();
    let exp_term = (t.ln().ln().powi(2)).exp();
    let boundary_term = (x / (t * nearest)).min(1.0);
    BudgetInputs {
        x_over_t,
        log_term,
        attained_bound: heights.good.attained_bound,
        exp_term,
        nearest_distance: nearest,
        boundary_term,
        phi0: None,
        budget: x_over_t * (log_term + exp_term) + boundary_term,
        height_condition_met: height_condition(t, q),
    }
}

/// Sums `x^rho / (D(rho) rho)` over `0 < gamma < t_nu` for one family of zeros,
/// with `D` the derivative of the full denominator at `rho`.
///
/// Terms whose derivative is tiny are redone by contour quadrature of `integrand`.
fn zero_terms<D>(
    x: f64,
    ordinates: &[f64],
    derivative: D,
    integrand: Integrand<'_>,
    policy: &PrecisionPolicy,
) -> Result<Vec<(f64, Complex64)>>
where
    D: Fn(Complex64) -> Result<Complex64> + Sync,
{
    ordinates
        .par_iter()
        .enumerate()
        .map(|(i, &g)| {
            let rho = Complex64::new(0.5, g);
            let d = derivative(rho)?;
            if d.norm() >= MULTIPLE_ZERO_THRESHOLD {
                return Ok((g, xpow(x, rho) / (d * rho)));
            }
            log::warn!("|L'(rho)| = {:e} at gamma = {g}; using quadrature", d.norm());
            let mut gap = f64::INFINITY;
            if i > 0 {
                gap = gap.min(g - ordinates[i - 1]);
            }
            if i + 1 < ordinates.len() {
                gap = gap.min(ordinates[i + 1] - g);
            }
            let r = residue_quadrature(x, rho, quadrature_radius(x, gap.min(g)), integrand, ResidueKind::NontrivialZero, policy)?;
            Ok((g, r.value))
        })
        .collect()
}

/// Merges positive-ordinate terms and conjugated mirror terms, summing by `|gamma|`.
fn ordered_sum(mut pos: Vec<(f64, Complex64)>, neg: Vec<(f64, Complex64)>) -> Complex64 {
    pos.extend(neg.into_iter().map(|(g, v)| (g, v.conj())));
    pos.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut acc = CompensatedSum::new();
    for (_, v) in pos {
        acc.add(v);
    }
    acc.value()
}

/// Zero sum of `x^s / (L(s, chi) s)` over `|gamma| < t_nu` for primitive `chi`.
///
/// Ordinates below the real axis come from the conjugate character's cache.
pub fn zero_sum(
    x: f64,
    cache: &crate::zeros::ZeroCache,
    conj_cache: &crate::zeros::ZeroCache,
    chi: &DirichletCharacter,
    t_nu: f64,
    policy: &PrecisionPolicy,
) -> Result<(Complex64, usize)> {
    cache.require_verified(t_nu)?;
    conj_cache.require_verified(t_nu)?;
    let cbar = chi.conj();
    let pos = cache.ordinates_below(t_nu);
    let neg = conj_cache.ordinates_below(t_nu);
    let n = pos.len() + neg.len();
    let a = zero_terms(x, &pos, |r| Ok(l_derivative(r, chi, 1, policy)?.value), Integrand::Character(chi), policy)?;
    let b = zero_terms(x, &neg, |r| Ok(l_derivative(r, &cbar, 1, policy)?.value), Integrand::Character(&cbar), policy)?;
    Ok((ordered_sum(a, b), n))
}

/// Zero sum for an imprimitive character: zeros of `L(s, chi*)` with `L'(rho, chi) = L'(rho, chi*) F(rho)`.
fn zero_sum_imprimitive(
    x: f64,
    chi: &DirichletCharacter,
    t_nu: f64,
    zeros: &dyn ZeroSource,
    policy: &PrecisionPolicy,
) -> Result<(Complex64, usize)> {
    let star = chi.primitive_inducer();
    let cbar = chi.conj();
    let star_bar = star.conj();
    let cache = zeros.zeros(&star, t_nu)?;
    let conj_cache = zeros.zeros(&star_bar, t_nu)?;
    cache.require_verified(t_nu)?;
    conj_cache.require_verified(t_nu)?;
    let f = build_product(chi);
    let fbar = build_product(&cbar);
    let pos = cache.ordinates_below(t_nu);
    let neg = conj_cache.ordinates_below(t_nu);
    let n = pos.len() + neg.len();
    let a = zero_terms(
        x,
        &pos,
        |r| Ok(l_derivative(r, &star, 1, policy)?.value * f.eval(r)),
        Integrand::Factored(chi),
        policy,
    )?;
    let b = zero_terms(
        x,
        &neg,
        |r| Ok(l_derivative(r, &star_bar, 1, policy)?.value * fbar.eval(r)),
        Integrand::Factored(&cbar),
        policy,
    )?;
    Ok((ordered_sum(a, b), n))
}

/// Sums `term(l)` for `l = 1, 2, ...`; `None` marks a term that vanishes identically
/// and does not take part in the stopping test.
fn trivial_series<F>(mut term: F) -> Result<(Complex64, u32)>
where
    F: FnMut(u32) -> Result<Option<Complex64>>,
{
    let mut acc = CompensatedSum::new();
    let mut used = 0;
    for l in 1..=TRIVIAL_CEILING {
        let Some(v) = term(l)? else { continue };
        acc.add(v);
        used += 1;
        if v.norm() < TRIVIAL_STOP * (1.0 + acc.value().norm()) {
            break;
        }
    }
    Ok((acc.value(), used))
}

fn with_conjugates(chars: &[DirichletCharacter]) -> Vec<DirichletCharacter> {
    let mut out: Vec<DirichletCharacter> = Vec::new();
    for c in chars.iter().flat_map(|c| [c.clone(), c.conj()]) {
        if !out.iter().any(|o| o.label() == c.label()) {
            out.push(c);
        }
    }
    out
}

/// Every primitive character of modulus at most `q`; `T_nu` is chosen uniformly over them.
pub fn primitive_characters_up_to(q: u64) -> Result<Vec<DirichletCharacter>> {
    let mut out = Vec::new();
    for d in 1..=q.max(1) {
        out.extend(build_group(d)?.primitive().cloned());
    }
    Ok(out)
}

/// `T_nu` for modulus `q`, uniform over the primitive characters of modulus at most `q`.
pub fn heights_theorem1(chi: &DirichletCharacter, t: f64, settings: &FormulaSettings) -> Result<Heights> {
    let set = primitive_characters_up_to(chi.modulus())?;
    let good = find_t_nu(t, &set, settings.sigma_step, settings.t_step, &settings.policy)?;
    Ok(Heights { t_requested: t, good, t_star: None })
}

pub fn assemble_theorem1(
    x: f64,
    chi: &DirichletCharacter,
    t: f64,
    zeros: &dyn ZeroSource,
    table: &MobiusTable,
    settings: &FormulaSettings,
) -> Result<ExplicitFormulaReport> {
    if !chi.is_primitive() {
        return Err(Error::NotPrimitive(chi.label().to_string()));
    }
    let heights = heights_theorem1(chi, t, settings)?;
    assemble_theorem1_at(x, chi, &heights, zeros, table, settings)
}

/// Theorem-1 assembly at fixed heights.
pub fn assemble_theorem1_at(
    x: f64,
    chi: &DirichletCharacter,
    heights: &Heights,
    zeros: &dyn ZeroSource,
    table: &MobiusTable,
    settings: &FormulaSettings,
) -> Result<ExplicitFormulaReport> {
    let policy = &settings.policy;
    let parts = theorem1_parts(x, chi, heights, zeros, policy)?;
    let truth = summatory_twisted(x, chi, table)?;
    let nearest = nearest_squarefree_coprime(x, chi.modulus(), table)?;
    let budget = classical_budget(x, heights, nearest, chi.modulus());
    let mut notes = Vec::new();
    if !budget.height_condition_met {
        notes.push(format!("T = {} is below exp(q^(1/3)); condition recorded, not enforced", heights.t_requested));
    }
    Ok(ExplicitFormulaReport::finish("theorem1", chi.label(), x, heights, parts, truth, budget, None, notes))
}

fn theorem1_parts(
    x: f64,
    chi: &DirichletCharacter,
    heights: &Heights,
    zeros: &dyn ZeroSource,
    policy: &PrecisionPolicy,
) -> Result<Parts> {
    let t_nu = heights.t_nu();
    let cache = zeros.zeros(chi, t_nu)?;
    let conj_cache = zeros.zeros(&chi.conj(), t_nu)?;
    let (zero_sum, zeros_used) = zero_sum(x, &cache, &conj_cache, chi, t_nu, policy)?;
    let s_zero_term = trivial_residue_primitive(x, chi, 0, policy)?.value;
    let (trivial_sum, trivial_terms_used) = trivial_series(|l| {
        if !has_trivial_zero(chi, l) {
            return Ok(None);
        }
        Ok(Some(trivial_residue_primitive(x, chi, l, policy)?.value))
    })?;
    Ok(Parts { zero_sum, s_zero_term, trivial_sum, trivial_terms_used, zeros_used, ..Parts::default() })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ImaginaryAxisSum {
    /// Residue at `s = 0`, by quadrature.
    pub s_zero: Complex64,
    /// Sum over lattice points `0 < |eta| < T_*`.
    pub lattice_sum: Complex64,
    pub points: usize,
    pub quadrature_points: usize,
}

/// Residues of `x^s / (L(s, chi) s)` on the imaginary axis for imprimitive `chi`.
pub fn imaginary_axis_sum(
    x: f64,
    f: &FiniteEulerProduct,
    chi: &DirichletCharacter,
    t_star: f64,
    policy: &PrecisionPolicy,
) -> Result<ImaginaryAxisSum> {
    f.require_nontrivial()?;
    let star = chi.primitive_inducer();
    let lattice = f.zero_lattice(t_star);
    let first = f.min_abs_eta();
    let r0 = quadrature_radius(x, first.min(1.0));
    let s_zero = residue_quadrature(x, Complex64::new(0.0, 0.0), r0, Integrand::Factored(chi), ResidueKind::SZero, policy)?.value;
    let etas: Vec<f64> = lattice.iter().map(|z| z.eta).collect();
    let terms: Vec<(Complex64, bool)> = lattice
        .par_iter()
        .enumerate()
        .map(|(i, z)| -> Result<(Complex64, bool)> {
            let s = Complex64::new(0.0, z.eta);
            let l = l_eval(s, &star, policy)?.value;
            if !z.is_collision() && l.norm() > 1e-8 {
                return Ok((xpow(x, s) / (l * f.derivative(s) * s), false));
            }
            if l.norm() <= 1e-8 {
                log::warn!("L(i eta, chi*) = {l} at eta = {}; using quadrature", z.eta);
            }
            let mut gap = z.eta.abs();
            if i > 0 {
                gap = gap.min(z.eta - etas[i - 1]);
            }
            if i + 1 < etas.len() {
                gap = gap.min(etas[i + 1] - z.eta);
            }
            let r = residue_quadrature(x, s, quadrature_radius(x, gap.min(1.0)), Integrand::Factored(chi), ResidueKind::ImaginaryAxis, policy)?;
            Ok((r.value, true))
        })
        .collect::<Result<_>>()?;
    // pair by |eta| for a fixed association order
    let mut order: Vec<usize> = (0..terms.len()).collect();
    order.sort_by(|&a, &b| etas[a].abs().total_cmp(&etas[b].abs()).then(etas[a].total_cmp(&etas[b])));
    let mut acc = CompensatedSum::new();
    for &i in &order {
        acc.add(terms[i].0);
    }
    Ok(ImaginaryAxisSum {
        s_zero,
        lattice_sum: acc.value(),
        points: terms.len(),
        quadrature_points: terms.iter().filter(|t| t.1).count(),
    })
}

/// `T_nu` as for a primitive character of the same modulus, then `T_*` from the lattice.
pub fn heights_theorem2(chi: &DirichletCharacter, t: f64, settings: &FormulaSettings) -> Result<Heights> {
    let f = build_product(chi);
    f.require_nontrivial()?;
    let set = primitive_characters_up_to(chi.modulus())?;
    let good = find_t_nu(t, &set, settings.sigma_step, settings.t_step, &settings.policy)?;
    let t_star = find_t_star(good.t_nu, &[f])?;
    Ok(Heights { t_requested: t, good, t_star: Some(t_star) })
}

pub fn assemble_theorem2(
    x: f64,
    chi: &DirichletCharacter,
    t: f64,
    zeros: &dyn ZeroSource,
    table: &MobiusTable,
    settings: &FormulaSettings,
) -> Result<ExplicitFormulaReport> {
    let heights = heights_theorem2(chi, t, settings)?;
    assemble_theorem2_at(x, chi, &heights, zeros, table, settings)
}

pub fn assemble_theorem2_at(
    x: f64,
    chi: &DirichletCharacter,
    heights: &Heights,
    zeros: &dyn ZeroSource,
    table: &MobiusTable,
    settings: &FormulaSettings,
) -> Result<ExplicitFormulaReport> {
    let policy = &settings.policy;
    let f = build_product(chi);
    f.require_nontrivial()?;
    let t_star = heights.t_star.ok_or_else(|| Error::invalid("theorem 2 needs T_*"))?.t_star;
    let star = chi.primitive_inducer();
    let (zero_sum, zeros_used) = zero_sum_imprimitive(x, chi, heights.t_nu(), zeros, policy)?;
    let axis = imaginary_axis_sum(x, &f, chi, t_star, policy)?;
    let (trivial_sum, trivial_terms_used) = trivial_series(|l| {
        if !has_trivial_zero(&star, l) {
            return Ok(None);
        }
        let s = Complex64::new(-(l as f64), 0.0);
        Ok(Some(trivial_residue_primitive(x, &star, l, policy)?.value / f.eval(s)))
    })?;
    let parts = Parts {
        zero_sum,
        imaginary_axis_sum: axis.lattice_sum,
        trivial_sum,
        s_zero_term: axis.s_zero,
        zeros_used,
        lattice_points_used: axis.points,
        trivial_terms_used,
    };
    let truth = summatory_twisted(x, chi, table)?;
    let nearest = nearest_squarefree_coprime(x, chi.modulus(), table)?;
    let budget = classical_budget(x, heights, nearest, chi.modulus());
    let mut notes = Vec::new();
    let leading = if star.modulus() == 1 {
        notes.push("inducer is trivial: s = 0 pole order differs from r + 1 - kappa; quadrature value only".into());
        None
    } else {
        let m = f.r() as usize + 1 - star.kappa() as usize;
        let d = l_derivative(Complex64::new(0.0, 0.0), chi, m, policy)?.value;
        Some(LeadingTerm {
            description: format!("(log x)^{m} / L^({m})(0, chi)"),
            value: Complex64::new(x.ln().powi(m as i32), 0.0) / d,
            fitted_exponent: None,
        })
    };
    if !budget.height_condition_met {
        notes.push(format!("T = {} is below exp(q^(1/3)); condition recorded, not enforced", heights.t_requested));
    }
    Ok(ExplicitFormulaReport::finish("theorem2", chi.label(), x, heights, parts, truth, budget, leading, notes))
}

/// Per-character assembly used by the progression formula and its consistency test.
pub fn assemble_character_at(
    x: f64,
    chi: &DirichletCharacter,
    heights: &Heights,
    zeros: &dyn ZeroSource,
    table: &MobiusTable,
    settings: &FormulaSettings,
) -> Result<ExplicitFormulaReport> {
    if chi.is_primitive() {
        assemble_theorem1_at(x, chi, heights, zeros, table, settings)
    } else {
        assemble_theorem2_at(x, chi, heights, zeros, table, settings)
    }
}

/// Shared `T_nu` over every primitive inducer mod `q`, and `T_*` over every
/// nontrivial finite product.
pub fn heights_progression(q: u64, t: f64, settings: &FormulaSettings) -> Result<Heights> {
    let group = build_group(q)?;
    let inducers: Vec<DirichletCharacter> = group.iter().map(|c| c.primitive_inducer()).collect();
    let set = with_conjugates(&inducers);
    let good = find_t_nu(t, &set, settings.sigma_step, settings.t_step, &settings.policy)?;
    let products: Vec<FiniteEulerProduct> =
        group.iter().map(build_product).filter(|f| !f.is_trivial()).collect();
    let t_star = if products.is_empty() { None } else { Some(find_t_star(good.t_nu, &products)?) };
    Ok(Heights { t_requested: t, good, t_star })
}

pub fn assemble_corollary1(
    x: f64,
    q: u64,
    a: u64,
    t: f64,
    zeros: &dyn ZeroSource,
    table: &MobiusTable,
    settings: &FormulaSettings,
) -> Result<ExplicitFormulaReport> {
    if q == 0 {
        return Err(Error::ZeroModulus);
    }
    let g = gcd(a, q);
    if g != 1 {
        return Err(Error::NotCoprime { a, q, gcd: g });
    }
    let heights = heights_progression(q, t, settings)?;
    assemble_corollary1_at(x, q, a, &heights, zeros, table, settings)
}

pub fn assemble_corollary1_at(
    x: f64,
    q: u64,
    a: u64,
    heights: &Heights,
    zeros: &dyn ZeroSource,
    table: &MobiusTable,
    settings: &FormulaSettings,
) -> Result<ExplicitFormulaReport> {
    let policy = &settings.policy;
    let group = build_group(q)?;
    let chars = group.characters();
    let phi = euler_phi(q) as f64;
    let mut zero_acc = Complex64::new(0.0, 0.0);
    let mut axis_acc = Complex64::new(0.0, 0.0);
    let mut zeros_used = 0;
    let mut points = 0;
    let mut min_eta = f64::INFINITY;
    for chi in chars {
        let w = chi.value(a).conj() / phi;
        let (zs, n) = if chi.is_primitive() {
            let cache = zeros.zeros(chi, heights.t_nu())?;
            let conj_cache = zeros.zeros(&chi.conj(), heights.t_nu())?;
            zero_sum(x, &cache, &conj_cache, chi, heights.t_nu(), policy)?
        } else {
            zero_sum_imprimitive(x, chi, heights.t_nu(), zeros, policy)?
        };
        zero_acc += w * zs;
        zeros_used += n;
        let f = build_product(chi);
        if !f.is_trivial() {
            let t_star = heights.t_star.ok_or_else(|| Error::invalid("progression needs T_*"))?.t_star;
            let axis = imaginary_axis_sum(x, &f, chi, t_star, policy)?;
            axis_acc += w * axis.lattice_sum;
            points += axis.points;
            min_eta = min_eta.min(f.min_abs_eta());
        }
    }
    let integrand = Integrand::Progression { characters: chars, a };
    let origin = Complex64::new(0.0, 0.0);
    let r0 = quadrature_radius(x, min_eta.min(1.0));
    let s_zero_term = residue_quadrature(x, origin, r0, integrand, ResidueKind::SZero, policy)?.value;
    let rl = quadrature_radius(x, 1.0);
    let (trivial_sum, trivial_terms_used) = trivial_series(|l| {
        let pole = Complex64::new(-(l as f64), 0.0);
        let v = residue_quadrature(x, pole, rl, integrand, ResidueKind::TrivialZero, policy)?.value;
        // quadrature noise at a regular point is not a term
        Ok(if v.norm() == 0.0 { None } else { Some(v) })
    })?;
    let parts = Parts {
        zero_sum: zero_acc,
        imaginary_axis_sum: axis_acc,
        trivial_sum,
        s_zero_term,
        zeros_used,
        lattice_points_used: points,
        trivial_terms_used,
    };
    let truth = Complex64::new(summatory_progression(x, q, a, table)?, 0.0);
    let nearest = nearest_squarefree_coprime(x, q, table)?;
    let budget = classical_budget(x, heights, nearest, q);
    let mut notes = Vec::new();
    let total = parts.zero_sum + parts.imaginary_axis_sum + parts.trivial_sum + parts.s_zero_term;
    if total.im.abs() >= 1e-8 {
        notes.push(format!("imaginary part {:e} of a real target", total.im));
    }
    let fitted = fitted_s_zero_exponent(integrand, policy)?;
    let leading = LeadingTerm {
        description: "s = 0 residue of L_{-1}; fitted power of log x".into(),
        value: s_zero_term,
        fitted_exponent: Some(fitted),
    };
    if !budget.height_condition_met {
        notes.push(format!("T = {} is below exp(q^(1/3)); condition recorded, not enforced", heights.t_requested));
    }
    Ok(ExplicitFormulaReport::finish(
        "corollary1",
        &format!("{q}:{a}"),
        x,
        heights,
        parts,
        truth,
        budget,
        Some(leading),
        notes,
    ))
}

/// Growth exponent of the `s = 0` residue in `log x`, from `x = e^{40}` and `x = e^{80}`.
pub fn fitted_s_zero_exponent(integrand: Integrand<'_>, policy: &PrecisionPolicy) -> Result<f64> {
    let origin = Complex64::new(0.0, 0.0);
    let at = |u: f64| -> Result<f64> {
        let x = u.exp();
        Ok(residue_quadrature(x, origin, 0.5 / u.max(1.0), integrand, ResidueKind::SZero, policy)?.value.norm())
    };
    let (a, b) = (at(40.0)?, at(80.0)?);
    Ok((b / a).log2())
}

pub fn assemble_theorem3(
    x: f64,
    field: &AbelianField,
    t: f64,
    zeros: &dyn ZeroSource,
    coeffs: &FieldCoefficients,
    settings: &FormulaSettings,
) -> Result<ExplicitFormulaReport> {
    let good = good_ordinate_field(field, t, settings)?;
    let heights = Heights { t_requested: t, good, t_star: None };
    assemble_theorem3_at(x, field, &heights, zeros, coeffs, settings)
}

/// Positive ordinates of `zeta_K` below `t_nu`, tagged with the factor they belong to.
fn field_ordinates(field: &AbelianField, t_nu: f64, zeros: &dyn ZeroSource) -> Result<Vec<(f64, usize)>> {
    let mut all = Vec::new();
    for (j, chi) in field.inducers().iter().enumerate() {
        let cache = zeros.zeros(chi, t_nu)?;
        cache.require_verified(t_nu)?;
        all.extend(cache.ordinates_below(t_nu).into_iter().map(|g| (g, j)));
    }
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(all)
}

/// `zeta_K'(rho)` for a zero of the `j`-th factor.
fn field_derivative(field: &AbelianField, j: usize, rho: Complex64, policy: &PrecisionPolicy) -> Result<Complex64> {
    let mut d = l_derivative(rho, &field.inducers()[j], 1, policy)?.value;
    for (i, chi) in field.inducers().iter().enumerate() {
        if i != j {
            d *= l_eval(rho, chi, policy)?.value;
        }
    }
    Ok(d)
}

/// Groups ordinates that coincide across factors; returns `(gamma, factors)`.
fn group_coincident(ordinates: &[(f64, usize)]) -> Vec<(f64, Vec<usize>)> {
    let mut out: Vec<(f64, Vec<usize>)> = Vec::new();
    for &(g, j) in ordinates {
        if let Some(last) = out.last_mut() {
            if (g - last.0).abs() <= COINCIDENCE_TOLERANCE {
                last.1.push(j);
                continue;
            }
        }
        out.push((g, vec![j]));
    }
    out
}

pub fn assemble_theorem3_at(
    x: f64,
    field: &AbelianField,
    heights: &Heights,
    zeros: &dyn ZeroSource,
    coeffs: &FieldCoefficients,
    settings: &FormulaSettings,
) -> Result<ExplicitFormulaReport> {
    let policy = &settings.policy;
    let t_nu = heights.t_nu();
    let grouped = group_coincident(&field_ordinates(field, t_nu, zeros)?);
    let integrand = Integrand::Field(field);
    let terms: Vec<Complex64> = grouped
        .par_iter()
        .enumerate()
        .map(|(i, (g, js))| -> Result<Complex64> {
            let rho = Complex64::new(0.5, *g);
            if js.len() == 1 {
                let d = field_derivative(field, js[0], rho, policy)?;
                if d.norm() >= MULTIPLE_ZERO_THRESHOLD {
                    return Ok(xpow(x, rho) / (d * rho));
                }
            }
            let mut gap = *g;
            if i > 0 {
                gap = gap.min(g - grouped[i - 1].0);
            }
            if i + 1 < grouped.len() {
                gap = gap.min(grouped[i + 1].0 - g);
            }
            Ok(residue_quadrature(x, rho, quadrature_radius(x, gap), integrand, ResidueKind::NontrivialZero, policy)?.value)
        })
        .collect::<Result<_>>()?;
    let mut acc = CompensatedSum::new();
    for v in &terms {
        acc.add(*v);
    }
    let zero_sum = Complex64::new(2.0 * acc.value().re, 0.0);
    let zeros_used = 2 * grouped.iter().map(|(_, js)| js.len()).sum::<usize>();

    let origin = Complex64::new(0.0, 0.0);
    let rl = quadrature_radius(x, 1.0);
    let s_zero_term = residue_quadrature(x, origin, rl, integrand, ResidueKind::SZero, policy)?.value;
    let (trivial_sum, trivial_terms_used) = trivial_series(|l| {
        let pole = Complex64::new(-(l as f64), 0.0);
        Ok(Some(residue_quadrature(x, pole, rl, integrand, ResidueKind::TrivialZero, policy)?.value))
    })?;
    let parts = Parts { zero_sum, s_zero_term, trivial_sum, trivial_terms_used, zeros_used, ..Parts::default() };

    let truth = Complex64::new(summatory_field(x, coeffs)?, 0.0);
    let nx = nearest_active_norm(x, coeffs)?;
    let phi0 = crate::sieve::ideal_count_error_scan(field, coeffs);
    let t = heights.t_requested;
    let n = field.degree() as f64;
    let lx = (x + 2.0).ln();
    let first = ((n / x).exp() * lx.powf(n)).min(field.kappa() * lx + phi0 / (1.0 / lx + 1.0 / n));
    let exp_term = (n * field.characters().len() as f64 * t.ln().ln().powi(2)).exp();
    let boundary_term = nx.ideal_count as f64 * (x / (t * nx.distance)).min(1.0);
    let budget = BudgetInputs {
        x_over_t: x / t,
        log_term: first,
        attained_bound: heights.good.attained_bound,
        exp_term,
        nearest_distance: nx.distance,
        boundary_term,
        phi0: Some(phi0),
        budget: x / t * (first + exp_term) + boundary_term,
        height_condition_met: height_condition(t, field.conductor()),
    };
    let leading = LeadingTerm {
        description: "-2^(r1+r2) pi^r2 (log x)^(r1+r2-1) / (sqrt|d_K| kappa_K)".into(),
        value: Complex64::new(field_s_zero_leading(x, field), 0.0),
        fitted_exponent: None,
    };
    let mut notes = Vec::new();
    if nx.secondary_tie {
        notes.push(format!("n_x = {} chosen by the smaller-n rule among equal a_n", nx.n));
    }
    if grouped.iter().any(|(_, js)| js.len() > 1) {
        notes.push("coincident ordinates across factors handled by quadrature".into());
    }
    if !budget.height_condition_met {
        notes.push(format!("T = {t} is below exp(m^(1/3)); condition recorded, not enforced"));
    }
    Ok(ExplicitFormulaReport::finish("theorem3", field.label(), x, heights, parts, truth, budget, Some(leading), notes))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub gamma: f64,
    pub partial: Complex64,
    pub abs_partial: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DerivativeSumReport {
    pub label: String,
    pub t_requested: f64,
    pub t_nu: f64,
    pub sum: Complex64,
    /// `sum 1/|L'(rho)|` over the same zeros.
    pub abs_sum: f64,
    pub target: f64,
    pub difference: Complex64,
    pub trajectory: Vec<TrajectoryPoint>,
}

impl DerivativeSumReport {
    /// Partial sums over `0 < gamma < t`.
    pub fn partial_at(&self, t: f64) -> (Complex64, f64) {
        self.trajectory
            .iter()
            .take_while(|p| p.gamma < t)
            .last()
            .map_or((Complex64::new(0.0, 0.0), 0.0), |p| (p.partial, p.abs_partial))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("gamma,re_partial,im_partial,abs_partial,t_over_2pi\n");
        for p in &self.trajectory {
            out.push_str(&format!(
                "{:.12},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                p.gamma,
                p.partial.re,
                p.partial.im,
                p.abs_partial,
                p.gamma / (2.0 * PI)
            ));
        }
        out
    }
}

fn derivative_report<D>(label: &str, t: f64, t_nu: f64, ordinates: &[f64], derivative: D) -> Result<DerivativeSumReport>
where
    D: Fn(Complex64) -> Result<Complex64> + Sync,
{
    let inv: Vec<Complex64> = ordinates
        .par_iter()
        .map(|&g| {
            let d = derivative(Complex64::new(0.5, g))?;
            if d.norm() < MULTIPLE_ZERO_THRESHOLD {
                return Err(Error::SuspectedMultipleZero(format!("{label} at gamma = {g}: |L'| = {:e}", d.norm())));
            }
            Ok(d.inv())
        })
        .collect::<Result<_>>()?;
    let mut acc = CompensatedSum::new();
    let mut abs = 0.0;
    let mut trajectory = Vec::with_capacity(inv.len());
    for (&g, v) in ordinates.iter().zip(&inv) {
        acc.add(*v);
        abs += v.norm();
        trajectory.push(TrajectoryPoint { gamma: g, partial: acc.value(), abs_partial: abs });
    }
    let target = t_nu / (2.0 * PI);
    let sum = acc.value();
    Ok(DerivativeSumReport {
        label: label.to_string(),
        t_requested: t,
        t_nu,
        sum,
        abs_sum: abs,
        target,
        difference: sum - target,
        trajectory,
    })
}

/// `sum_{0 < gamma < T_nu} 1/L'(rho, chi)` with the running partial sums.
pub fn derivative_sum(
    chi: &DirichletCharacter,
    t: f64,
    zeros: &dyn ZeroSource,
    settings: &FormulaSettings,
) -> Result<DerivativeSumReport> {
    if !chi.is_primitive() {
        return Err(Error::NotPrimitive(chi.label().to_string()));
    }
    let heights = heights_theorem1(chi, t, settings)?;
    let t_nu = heights.t_nu();
    let cache = zeros.zeros(chi, t_nu)?;
    cache.require_verified(t_nu)?;
    let policy = &settings.policy;
    derivative_report(chi.label(), t, t_nu, &cache.ordinates_below(t_nu), |r| {
        Ok(l_derivative(r, chi, 1, policy)?.value)
    })
}

/// `sum_{0 < gamma < T_nu} 1/zeta_K'(rho)`, the derivative taken by the product rule.
pub fn derivative_sum_field(
    field: &AbelianField,
    t: f64,
    zeros: &dyn ZeroSource,
    settings: &FormulaSettings,
) -> Result<DerivativeSumReport> {
    let good = good_ordinate_field(field, t, settings)?;
    let t_nu = good.t_nu;
    let policy = &settings.policy;
    let ords = field_ordinates(field, t_nu, zeros)?;
    let grouped = group_coincident(&ords);
    if let Some((g, _)) = grouped.iter().find(|(_, js)| js.len() > 1) {
        return Err(Error::SuspectedMultipleZero(format!("{}: coincident ordinates at {g}", field.label())));
    }
    let gammas: Vec<f64> = ords.iter().map(|o| o.0).collect();
    let owner: Vec<usize> = ords.iter().map(|o| o.1).collect();
    let lookup = |rho: Complex64| -> usize {
        let i = gammas.partition_point(|&g| g < rho.im);
        owner[i.min(owner.len() - 1)]
    };
    derivative_report(field.label(), t, t_nu, &gammas, |r| field_derivative(field, lookup(r), r, policy))
}
