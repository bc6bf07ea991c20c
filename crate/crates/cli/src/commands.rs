use std::fmt::Write as _;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Result;
use mobius_core::arith::gcd;
use mobius_core::explicit::{
    assemble_character_at, assemble_corollary1_at, assemble_theorem3_at, derivative_sum, derivative_sum_field,
    heights_progression, heights_theorem1, heights_theorem2, Heights,
};
use mobius_core::field::good_ordinate_field;
use mobius_core::lfunc::{dedekind_eval, l_eval};
use mobius_core::sieve::{summatory_field, summatory_progression, summatory_twisted};
use mobius_core::{
    build_product, AbelianField, Complex64, DirichletCharacter, Error as CoreError, ExplicitFormulaReport, PrecisionPolicy,
    ZeroSource,
};
use serde::Serialize;

use crate::config::{parse_range, Format, RunConfig};
use crate::store::{CacheSummary, Caches};
use crate::Usage;

pub const SCHEMA: &str = "efr-1";

pub struct Output {
    pub body: String,
    pub code: u8,
}

#[derive(Serialize)]
struct Provenance {
    policy: PrecisionPolicy,
    policy_fingerprint: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    sieve_limit: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    coefficient_limit: Option<u64>,
    zero_caches: Vec<CacheSummary>,
}

#[derive(Serialize)]
struct Envelope<'a, R: Serialize> {
    schema: &'static str,
    /// Seconds since the Unix epoch; the only field that differs between reruns.
    generated_at: u64,
    tool: &'static str,
    version: &'static str,
    config: &'a RunConfig,
    provenance: Provenance,
    exit_code: u8,
    result: R,
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    caches: Caches,
    sieve_limit: Option<u64>,
    coefficient_limit: Option<u64>,
}

impl<'a> Ctx<'a> {
    fn new(cfg: &'a RunConfig) -> Self {
        Ctx { cfg, caches: Caches::new(cfg.cache_dir(), cfg.policy()), sieve_limit: None, coefficient_limit: None }
    }

    fn json<R: Serialize>(&self, result: R, code: u8) -> Result<Output> {
        let policy = self.cfg.policy();
        let env = Envelope {
            schema: SCHEMA,
            generated_at: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            tool: "mobius",
            version: env!("CARGO_PKG_VERSION"),
            config: self.cfg,
            provenance: Provenance {
                policy,
                policy_fingerprint: policy.fingerprint(),
                sieve_limit: self.sieve_limit,
                coefficient_limit: self.coefficient_limit,
                zero_caches: self.caches.used(),
            },
            exit_code: code,
            result,
        };
        let mut body = serde_json::to_string_pretty(&env)?;
        body.push('\n');
        Ok(Output { body, code })
    }

    /// Comment header for CSV output.
    fn csv_header(&self) -> String {
        format!("# schema {SCHEMA}\n# config {}\n", self.cfg.to_json())
    }
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

pub fn parse_character(label: &str) -> Result<DirichletCharacter> {
    DirichletCharacter::from_label(label).map_err(|e| usage(format!("character {label:?}: {e}")))
}

pub fn parse_field(spec: &str) -> Result<AbelianField> {
    if let Some(f) = AbelianField::preset(spec) {
        return Ok(f);
    }
    if let Some(m) = spec.strip_prefix("Qzeta") {
        let m: u64 = m.parse().map_err(|_| usage(format!("bad cyclotomic level in {spec:?}")))?;
        return Ok(AbelianField::cyclotomic(m)?);
    }
    if let Some(list) = spec.strip_prefix("gen:") {
        let gens = list.split(',').map(|l| parse_character(l.trim())).collect::<Result<Vec<_>>>()?;
        let m = gens.first().map(|c| c.modulus()).ok_or_else(|| usage("gen: needs at least one character"))?;
        return Ok(AbelianField::from_generators(m, &gens)?);
    }
    let path = std::path::Path::new(spec);
    if path.is_file() {
        let text = std::fs::read_to_string(path)?;
        return AbelianField::from_text(&text).map_err(|e| usage(format!("{spec}: {e}")));
    }
    Err(usage(format!("unknown field {spec:?}")))
}

fn require_coprime(q: u64, a: u64) -> Result<()> {
    if q == 0 {
        return Err(CoreError::ZeroModulus.into());
    }
    let g = gcd(a, q);
    if g > 1 {
        return Err(CoreError::NotCoprime { a, q, gcd: g }.into());
    }
    Ok(())
}

/// Table size for a list of x: room for the nearest-integer searches above max x.
fn table_limit(xs: &[f64], floor: u64) -> u64 {
    let max = xs.iter().copied().fold(0.0, f64::max);
    ((2.0 * max).ceil() as u64 + 64).max(floor)
}

enum Target {
    Character(DirichletCharacter),
    Progression(u64, u64),
    Field(AbelianField),
    Plain,
}

fn target(cfg: &RunConfig) -> Result<Target> {
    let k = &cfg.knobs;
    let given = [k.character.is_some(), k.modulus.is_some() || k.a.is_some(), k.field.is_some()];
    if given.iter().filter(|&&g| g).count() > 1 {
        return Err(usage("give only one of --character, --modulus/--a, --field"));
    }
    if let Some(label) = &k.character {
        return Ok(Target::Character(parse_character(label)?));
    }
    if let Some(spec) = &k.field {
        return Ok(Target::Field(parse_field(spec)?));
    }
    match (k.modulus, k.a) {
        (Some(q), Some(a)) => {
            require_coprime(q, a)?;
            Ok(Target::Progression(q, a))
        }
        (Some(_), None) | (None, Some(_)) => Err(usage("--modulus and --a go together")),
        (None, None) => Ok(Target::Plain),
    }
}

#[derive(Serialize)]
struct SieveValue {
    x: f64,
    value: Complex64,
}

#[derive(Serialize)]
struct SieveResult {
    target: String,
    limit: u64,
    mertens_at_limit: i64,
    values: Vec<SieveValue>,
}

pub fn sieve(cfg: &RunConfig) -> Result<Output> {
    let mut ctx = Ctx::new(cfg);
    let xs = cfg.knobs.x.clone().unwrap_or_default();
    if xs.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(usage("x values must be positive"));
    }
    let limit = match cfg.knobs.limit {
        Some(l) => l,
        None if !xs.is_empty() => xs.iter().copied().fold(0.0, f64::max).ceil() as u64,
        None => return Err(usage("sieve needs --limit or --x")),
    };
    let limit = limit.max(1);
    let table = ctx.caches.mobius(limit)?;
    // a larger cached table gives the same values; report what was asked for
    ctx.sieve_limit = Some(limit);
    let real = |v: f64| Complex64::new(v, 0.0);
    let (name, values) = match target(cfg)? {
        Target::Character(chi) => {
            let v = xs.iter().map(|&x| Ok(SieveValue { x, value: summatory_twisted(x, &chi, &table)? })).collect::<Result<_>>()?;
            (chi.label().to_string(), v)
        }
        Target::Progression(q, a) => {
            let v = xs
                .iter()
                .map(|&x| Ok(SieveValue { x, value: real(summatory_progression(x, q, a, &table)?) }))
                .collect::<Result<_>>()?;
            (format!("{a} mod {q}"), v)
        }
        Target::Field(field) => {
            let coeffs = ctx.caches.field(&field, limit)?;
            ctx.coefficient_limit = Some(limit);
            let v = xs
                .iter()
                .map(|&x| Ok(SieveValue { x, value: real(summatory_field(x, &coeffs)?) }))
                .collect::<Result<_>>()?;
            (field.label().to_string(), v)
        }
        Target::Plain => {
            let chi = DirichletCharacter::trivial();
            let v = xs.iter().map(|&x| Ok(SieveValue { x, value: summatory_twisted(x, &chi, &table)? })).collect::<Result<_>>()?;
            ("1".to_string(), v)
        }
    };
    let result = SieveResult { target: name, limit, mertens_at_limit: table.mertens(limit), values };
    match cfg.format() {
        Format::Json => ctx.json(result, 0),
        Format::Csv | Format::Text => {
            let mut body = ctx.csv_header();
            body.push_str("x,re,im\n");
            for v in &result.values {
                let _ = writeln!(body, "{},{:.15e},{:.15e}", v.x, v.value.re, v.value.im);
            }
            Ok(Output { body, code: 0 })
        }
    }
}

/// Characters whose zeros a target needs: the character (or its inducer) and its
/// conjugate, or the nontrivial inducers of a field.
fn zero_characters(t: &Target) -> Result<Vec<DirichletCharacter>> {
    let mut out: Vec<DirichletCharacter> = Vec::new();
    let mut push = |c: DirichletCharacter| {
        if !out.iter().any(|o| o.label() == c.label()) {
            out.push(c);
        }
    };
    match t {
        Target::Character(chi) => {
            let star = chi.primitive_inducer();
            push(star.conj());
            push(star);
        }
        Target::Field(k) => {
            for c in k.inducers() {
                push(c.clone());
            }
        }
        Target::Progression(q, _) => {
            for c in mobius_core::build_group(*q)?.iter() {
                push(c.primitive_inducer());
            }
        }
        Target::Plain => push(DirichletCharacter::trivial()),
    }
    out.sort_by(|a, b| a.modulus().cmp(&b.modulus()).then(a.exponents().cmp(b.exponents())));
    Ok(out)
}

#[derive(Serialize)]
struct ZeroListing {
    character: String,
    ordinates: Vec<f64>,
}

pub fn zeros(cfg: &RunConfig) -> Result<Output> {
    let ctx = Ctx::new(cfg);
    let t = cfg.height()?;
    let chars = zero_characters(&target(cfg)?)?;
    let mut listings = Vec::new();
    for chi in &chars {
        let cache = ctx.caches.zeros(chi, t)?;
        listings.push(ZeroListing { character: chi.label().to_string(), ordinates: cache.ordinates_below(t) });
    }
    match cfg.format() {
        Format::Json => ctx.json(listings, 0),
        Format::Csv | Format::Text => {
            let mut body = ctx.csv_header();
            body.push_str("character,gamma\n");
            for l in &listings {
                for g in &l.ordinates {
                    let _ = writeln!(body, "{},{g:.12}", l.character);
                }
            }
            Ok(Output { body, code: 0 })
        }
    }
}

#[derive(Serialize)]
struct VerifyResult {
    heights: Heights,
    reports: Vec<ExplicitFormulaReport>,
    all_within_budget: bool,
}

pub fn verify(cfg: &RunConfig) -> Result<Output> {
    let mut ctx = Ctx::new(cfg);
    let settings = cfg.settings()?;
    let t = cfg.height()?;
    let xs = cfg.xs()?;
    let target = target(cfg)?;
    let (heights, reports) = match &target {
        Target::Field(field) => {
            let limit = table_limit(&xs, 10_000);
            let coeffs = ctx.caches.field(field, limit)?;
            ctx.coefficient_limit = Some(limit);
            let good = good_ordinate_field(field, t, &settings)?;
            let heights = Heights { t_requested: t, good, t_star: None };
            let reports = xs
                .iter()
                .map(|&x| Ok(assemble_theorem3_at(x, field, &heights, &ctx.caches, &coeffs, &settings)?))
                .collect::<Result<Vec<_>>>()?;
            (heights, reports)
        }
        Target::Progression(q, a) => {
            let limit = table_limit(&xs, 1_000);
            let table = ctx.caches.mobius(limit)?;
            ctx.sieve_limit = Some(limit);
            let heights = heights_progression(*q, t, &settings)?;
            let reports = xs
                .iter()
                .map(|&x| Ok(assemble_corollary1_at(x, *q, *a, &heights, &ctx.caches, &table, &settings)?))
                .collect::<Result<Vec<_>>>()?;
            (heights, reports)
        }
        Target::Character(chi) => {
            let limit = table_limit(&xs, 1_000);
            let table = ctx.caches.mobius(limit)?;
            ctx.sieve_limit = Some(limit);
            let heights =
                if chi.is_primitive() { heights_theorem1(chi, t, &settings)? } else { heights_theorem2(chi, t, &settings)? };
            let reports = xs
                .iter()
                .map(|&x| Ok(assemble_character_at(x, chi, &heights, &ctx.caches, &table, &settings)?))
                .collect::<Result<Vec<_>>>()?;
            (heights, reports)
        }
        Target::Plain => return Err(usage("verify needs --character, --modulus and --a, or --field")),
    };
    let all_within_budget = reports.iter().all(|r| r.within_budget);
    let code = if all_within_budget { 0 } else { 1 };
    match cfg.format() {
        Format::Json => ctx.json(VerifyResult { heights, reports, all_within_budget }, code),
        Format::Text => {
            let mut body = String::new();
            for r in &reports {
                body.push_str(&r.breakdown());
                body.push('\n');
            }
            Ok(Output { body, code })
        }
        Format::Csv => {
            let mut body = ctx.csv_header();
            body.push_str(
                "formula,label,x,t,t_nu,re_total,im_total,re_truth,im_truth,re_residual,im_residual,abs_residual,budget,within_budget\n",
            );
            for r in &reports {
                let _ = writeln!(
                    body,
                    "{},{},{},{},{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.6e},{:.6e},{}",
                    r.formula,
                    r.label,
                    r.x,
                    r.t_requested,
                    r.t_nu,
                    r.formula_total.re,
                    r.formula_total.im,
                    r.sieve_truth.re,
                    r.sieve_truth.im,
                    r.residual.re,
                    r.residual.im,
                    r.residual.norm(),
                    r.budget.budget,
                    r.within_budget
                );
            }
            Ok(Output { body, code })
        }
    }
}

pub fn derivsum(cfg: &RunConfig) -> Result<Output> {
    let ctx = Ctx::new(cfg);
    let settings = cfg.settings()?;
    let t = cfg.height()?;
    let report = match target(cfg)? {
        Target::Character(chi) => derivative_sum(&chi, t, &ctx.caches, &settings)?,
        Target::Field(field) => derivative_sum_field(&field, t, &ctx.caches, &settings)?,
        _ => return Err(usage("derivsum needs --character or --field")),
    };
    match cfg.format() {
        Format::Json => ctx.json(report, 0),
        Format::Csv | Format::Text => Ok(Output { body: ctx.csv_header() + &report.to_csv(), code: 0 }),
    }
}

#[derive(Serialize)]
struct CountRow {
    t: f64,
    h: f64,
    count: u64,
    bound: f64,
    holds: bool,
}

#[derive(Serialize)]
struct LogDerivativeRow {
    sigma: f64,
    t: f64,
    h: f64,
    log_derivative: Complex64,
    residual: f64,
    budget: f64,
    local_zeros: usize,
    holds: bool,
}

#[derive(Serialize)]
struct ActivePrimeRow {
    p: u64,
    angle: String,
    theta: f64,
    spacing: f64,
}

#[derive(Serialize)]
struct ProductResult {
    character: String,
    inducer: String,
    modulus: u64,
    active_primes: Vec<ActivePrimeRow>,
    unit_primes: Vec<u64>,
    r: u32,
    omega: usize,
    log_radical_ratio: f64,
    b: Complex64,
    lattice: Vec<mobius_core::finite_euler::LatticeZero>,
    zero_counts: Vec<CountRow>,
    log_derivative: Vec<LogDerivativeRow>,
    all_hold: bool,
}

pub fn fproduct(cfg: &RunConfig) -> Result<Output> {
    let ctx = Ctx::new(cfg);
    let t = cfg.height()?;
    let Target::Character(chi) = target(cfg)? else {
        return Err(usage("fproduct needs --character"));
    };
    let f = build_product(&chi);
    let mut zero_counts = Vec::new();
    for i in -10..=10 {
        let t0 = t * i as f64 / 10.0;
        for h in [0.5, 1.0, 5.0] {
            let c = f.count_zeros(t0, h)?;
            zero_counts.push(CountRow { t: t0, h, count: c.count, bound: c.bound, holds: c.holds() });
        }
    }
    let mut log_derivative = Vec::new();
    let h = 1.0;
    for i in 0..=20 {
        let t0 = t * i as f64 / 20.0 + 0.25;
        for sigma in [-0.5, 0.25, 0.5] {
            let s = Complex64::new(sigma, t0);
            match f.log_derivative_check(s, h) {
                Ok(c) => log_derivative.push(LogDerivativeRow {
                    sigma,
                    t: t0,
                    h,
                    log_derivative: f.log_derivative(s),
                    residual: c.residual,
                    budget: c.budget,
                    local_zeros: c.local_zeros,
                    holds: c.holds(),
                }),
                Err(e) => log::info!("skipping log-derivative check at {s}: {e}"),
            }
        }
    }
    let all_hold = zero_counts.iter().all(|c| c.holds) && log_derivative.iter().all(|c| c.holds);
    let code = if all_hold { 0 } else { 1 };
    if cfg.format() != Format::Json {
        return Ok(Output { body: ctx.csv_header() + &f.lattice_csv(t), code });
    }
    let result = ProductResult {
        character: chi.label().to_string(),
        inducer: f.chi_star().label().to_string(),
        modulus: f.modulus(),
        active_primes: f
            .active_primes()
            .iter()
            .map(|a| ActivePrimeRow { p: a.p, angle: a.angle.to_string(), theta: a.theta(), spacing: a.spacing() })
            .collect(),
        unit_primes: f.unit_primes(),
        r: f.r(),
        omega: f.omega(),
        log_radical_ratio: f.log_radical_ratio(),
        b: f.b_constant(),
        lattice: f.zero_lattice(t),
        zero_counts,
        log_derivative,
        all_hold,
    };
    ctx.json(result, code)
}

pub fn lgrid(cfg: &RunConfig) -> Result<Output> {
    let ctx = Ctx::new(cfg);
    if cfg.format() == Format::Json {
        return Err(usage("lgrid writes CSV only"));
    }
    let policy = cfg.policy();
    let sigmas = parse_range(cfg.knobs.sigma_range.as_deref().ok_or_else(|| usage("missing --sigma-range"))?, "sigma_range")?;
    let ts = parse_range(cfg.knobs.t_range.as_deref().ok_or_else(|| usage("missing --t-range"))?, "t_range")?;
    let eval: Box<dyn Fn(Complex64) -> mobius_core::Result<mobius_core::EvalResult>> = match target(cfg)? {
        Target::Character(chi) => Box::new(move |s| l_eval(s, &chi, &policy)),
        Target::Field(field) => Box::new(move |s| dedekind_eval(s, &field, &policy)),
        _ => return Err(usage("lgrid needs --character or --field")),
    };
    let mut rows = String::from("sigma,t,re,im,error_estimate\n");
    for &sigma in &sigmas {
        for &t in &ts {
            match eval(Complex64::new(sigma, t)) {
                Ok(v) => {
                    let _ = writeln!(rows, "{sigma},{t},{:.15e},{:.15e},{:.3e}", v.value.re, v.value.im, v.error_estimate);
                }
                // the pole of zeta at s = 1
                Err(CoreError::Pole(_)) => {
                    let _ = writeln!(rows, "{sigma},{t},inf,inf,inf");
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
    Ok(Output { body: ctx.csv_header() + &rows, code: 0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_specs() {
        assert_eq!(parse_field("Qi").unwrap().degree(), 2);
        assert_eq!(parse_field("Qzeta7").unwrap().degree(), 6);
        assert_eq!(parse_field("gen:5.2").unwrap().discriminant(), 5);
        assert!(parse_field("nonsense").is_err());
    }

    #[test]
    fn coprimality() {
        assert!(require_coprime(4, 3).is_ok());
        let e = require_coprime(6, 4).unwrap_err();
        assert!(matches!(e.downcast_ref::<CoreError>(), Some(CoreError::NotCoprime { gcd: 2, .. })));
    }
}
