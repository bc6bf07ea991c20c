//! Critical-line zeros: sign-change scan of the Hardy function, bisection,
//! argument-principle verification, a small binary cache, and the grid searches
//! for good ordinates.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::characters::DirichletCharacter;
use crate::error::{Error, Result};
use crate::finite_euler::FiniteEulerProduct;
use crate::lfunc::{hardy_z, l_eval, PrecisionPolicy};

pub const CACHE_MAGIC: &[u8; 4] = b"LZC1";
pub const SCAN_STEP: f64 = 0.03;
pub const BISECTION_TOLERANCE: f64 = 1e-9;
pub const BISECTION_BUDGET: u32 = 60;
const RESCANS: u32 = 3;

/// Lower edge of the counting rectangle. Keeps `s = 0` and `s = 1` off the contour.
pub const CONTOUR_FLOOR: f64 = 0.05;
const CONTOUR_LEFT: f64 = -0.5;
const CONTOUR_RIGHT: f64 = 1.5;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ZeroRecord {
    pub gamma: f64,
    pub half_width: f64,
    pub multiplicity: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ZeroCache {
    pub character_label: String,
    pub t_max: f64,
    pub records: Vec<ZeroRecord>,
    pub count_verified: bool,
    pub policy_fingerprint: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GoodOrdinate {
    pub t_nu: f64,
    pub attained_bound: f64,
    pub grid_step: f64,
    pub sigma_step: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TStar {
    pub t_star: f64,
    /// Distance from `t_star` to the nearest imaginary-axis zero ordinate.
    pub distance: f64,
}

impl ZeroCache {
    pub fn empty(chi: &DirichletCharacter, t_max: f64, policy: &PrecisionPolicy) -> Self {
        ZeroCache {
            character_label: chi.label().to_string(),
            t_max,
            records: Vec::new(),
            count_verified: false,
            policy_fingerprint: policy.fingerprint(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn ordinates(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.gamma)
    }

    /// Ordinates with `0 < gamma < t`.
    pub fn ordinates_below(&self, t: f64) -> Vec<f64> {
        self.ordinates().filter(|&g| g > 0.0 && g < t).collect()
    }

    pub fn require_verified(&self, upto: f64) -> Result<()> {
        if !self.count_verified {
            return Err(Error::UnverifiedCache(self.character_label.clone()));
        }
        if self.t_max + 1e-12 < upto {
            return Err(Error::UnverifiedCache(format!(
                "{} scanned to {} but {} requested",
                self.character_label, self.t_max, upto
            )));
        }
        Ok(())
    }

    pub fn is_valid_for(&self, policy: &PrecisionPolicy) -> bool {
        self.policy_fingerprint == policy.fingerprint()
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(CACHE_MAGIC)?;
        write_str(&mut w, &self.character_label)?;
        w.write_all(&self.t_max.to_le_bytes())?;
        w.write_all(&(self.records.len() as u64).to_le_bytes())?;
        for r in &self.records {
            w.write_all(&r.gamma.to_le_bytes())?;
            w.write_all(&r.half_width.to_le_bytes())?;
        }
        w.write_all(&[self.count_verified as u8])?;
        write_str(&mut w, &self.policy_fingerprint)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != CACHE_MAGIC {
            return Err(Error::Format("not a zero cache".into()));
        }
        let character_label = read_str(&mut r)?;
        let t_max = read_f64(&mut r)?;
        let mut buf = [0u8; 8];
        r.read_exact(&mut buf)?;
        let n = u64::from_le_bytes(buf);
        if n > 1 << 32 {
            return Err(Error::Format(format!("implausible record count {n}")));
        }
        let mut records = Vec::with_capacity(n as usize);
        for _ in 0..n {
            let gamma = read_f64(&mut r)?;
            let half_width = read_f64(&mut r)?;
            records.push(ZeroRecord { gamma, half_width, multiplicity: 1 });
        }
        let mut flag = [0u8; 1];
        r.read_exact(&mut flag)?;
        let policy_fingerprint = read_str(&mut r)?;
        if records.windows(2).any(|w| w[0].gamma >= w[1].gamma) {
            return Err(Error::Format("ordinates not strictly increasing".into()));
        }
        Ok(ZeroCache { character_label, t_max, records, count_verified: flag[0] == 1, policy_fingerprint })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(fs::read(path)?.as_slice())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,gamma,half_width\n");
        for r in &self.records {
            let _ = writeln!(out, "{},{:.15},{:.3e}", self.character_label, r.gamma, r.half_width);
        }
        out
    }
}

fn write_str<W: Write>(w: &mut W, s: &str) -> Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_str<R: Read>(r: &mut R) -> Result<String> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    let n = u32::from_le_bytes(buf) as usize;
    if n > 4096 {
        return Err(Error::Format("string field too long".into()));
    }
    let mut s = vec![0u8; n];
    r.read_exact(&mut s)?;
    String::from_utf8(s).map_err(|e| Error::Format(e.to_string()))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

fn bisect(chi: &DirichletCharacter, mut a: f64, mut za: f64, mut b: f64, policy: &PrecisionPolicy) -> Result<ZeroRecord> {
    for _ in 0..BISECTION_BUDGET {
        if (b - a) / 2.0 <= BISECTION_TOLERANCE {
            break;
        }
        let m = 0.5 * (a + b);
        let zm = hardy_z(m, chi, policy)?;
        if zm == 0.0 {
            a = m;
            b = m;
            break;
        }
        if (zm > 0.0) == (za > 0.0) {
            a = m;
            za = zm;
        } else {
            b = m;
        }
    }
    Ok(ZeroRecord { gamma: 0.5 * (a + b), half_width: 0.5 * (b - a), multiplicity: 1 })
}

/// Minimizes `sign * Z` on `[a, b]` by golden section; returns `(t, Z(t))`.
fn dip_minimum(chi: &DirichletCharacter, a: f64, b: f64, sign: f64, policy: &PrecisionPolicy) -> Result<(f64, f64)> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = sign * hardy_z(x1, chi, policy)?;
    let mut f2 = sign * hardy_z(x2, chi, policy)?;
    for _ in 0..40 {
        if f1 < 0.0 {
            return Ok((x1, sign * f1));
        }
        if f2 < 0.0 {
            return Ok((x2, sign * f2));
        }
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = sign * hardy_z(x1, chi, policy)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = sign * hardy_z(x2, chi, policy)?;
        }
    }
    let (x, f) = if f1 < f2 { (x1, f1) } else { (x2, f2) };
    Ok((x, sign * f))
}

/// Sign-change scan of `Z` on `(0, t_max]` at the given step, without verification.
pub fn scan_with_step(chi: &DirichletCharacter, t_max: f64, step: f64, policy: &PrecisionPolicy) -> Result<ZeroCache> {
    if !chi.is_primitive() {
        return Err(Error::NotPrimitive(chi.label().to_string()));
    }
    if !(t_max > 0.0) || !(step > 0.0) {
        return Err(Error::invalid("scan height and step must be positive"));
    }
    let n = (t_max / step).ceil() as usize;
    let grid: Vec<f64> = (0..=n).map(|i| (i as f64 * step).min(t_max)).collect();
    let values: Vec<f64> = grid.par_iter().map(|&t| hardy_z(t, chi, policy)).collect::<Result<_>>()?;

    // brackets: plain sign changes plus sign-preserving dips that hide a pair
    let mut brackets: Vec<(f64, f64, f64)> = Vec::new();
    let mut exact: Vec<f64> = Vec::new();
    let mut dips: Vec<usize> = Vec::new();
    for i in 0..n {
        let (a, b) = (values[i], values[i + 1]);
        if a == 0.0 && grid[i] > 0.0 {
            exact.push(grid[i]);
        } else if a != 0.0 && b != 0.0 && (a > 0.0) != (b > 0.0) {
            brackets.push((grid[i], a, grid[i + 1]));
        }
        if i > 0 {
            let prev = values[i - 1];
            if (prev > 0.0) == (a > 0.0) && (a > 0.0) == (b > 0.0) && a.abs() < prev.abs() && a.abs() < b.abs() {
                dips.push(i);
            }
        }
    }
    let dip_results: Vec<Option<(f64, f64, f64)>> = dips
        .par_iter()
        .map(|&i| -> Result<Option<(f64, f64, f64)>> {
            let sign = values[i].signum();
            let (tm, zm) = dip_minimum(chi, grid[i - 1], grid[i + 1], sign, policy)?;
            if (zm > 0.0) == (sign > 0.0) && zm != 0.0 {
                let scale = values[i - 1].abs().max(values[i + 1].abs());
                if zm.abs() < 1e-8 * scale {
                    log::warn!("{}: |Z| dips to {zm:e} near t = {tm} without a sign change", chi.label());
                }
                return Ok(None);
            }
            Ok(Some((grid[i - 1], tm, grid[i + 1])))
        })
        .collect::<Result<_>>()?;
    for (a, m, b) in dip_results.into_iter().flatten() {
        let za = hardy_z(a, chi, policy)?;
        brackets.push((a, za, m));
        let zm = hardy_z(m, chi, policy)?;
        brackets.push((m, zm, b));
    }

    let mut records: Vec<ZeroRecord> = brackets
        .par_iter()
        .map(|&(a, za, b)| bisect(chi, a, za, b, policy))
        .collect::<Result<_>>()?;
    records.extend(exact.into_iter().map(|g| ZeroRecord { gamma: g, half_width: 0.0, multiplicity: 1 }));
    records.sort_by(|x, y| x.gamma.total_cmp(&y.gamma));
    records.dedup_by(|b, a| (b.gamma - a.gamma).abs() <= 2.0 * BISECTION_TOLERANCE);
    records.retain(|r| r.gamma > 0.0);
    Ok(ZeroCache {
        character_label: chi.label().to_string(),
        t_max,
        records,
        count_verified: false,
        policy_fingerprint: policy.fingerprint(),
    })
}

/// Scans `(0, t_max]`, verifies the count by the argument principle, and rescans at
/// a quarter of the step (up to three times) on a mismatch.
pub fn scan_zeros(chi: &DirichletCharacter, t_max: f64, policy: &PrecisionPolicy) -> Result<ZeroCache> {
    let mut step = SCAN_STEP;
    let mut last = None;
    for attempt in 0..=RESCANS {
        let mut cache = scan_with_step(chi, t_max, step, policy)?;
        let expected = argument_principle_count(chi, t_max, &cache, policy)?;
        let scanned = cache.records.iter().filter(|r| r.gamma > CONTOUR_FLOOR).count();
        if expected == scanned as i64 {
            cache.count_verified = true;
            return Ok(cache);
        }
        log::warn!(
            "{}: scan found {} zeros, contour count {expected} (attempt {attempt}, step {step})",
            chi.label(),
            scanned
        );
        last = Some((scanned, expected));
        step /= 4.0;
    }
    let (scanned, expected) = last.expect("at least one attempt");
    Err(Error::CountMismatch { label: chi.label().to_string(), scanned, expected })
}

/// True iff the contour count on `[-1/2, 3/2] x [0.05, t_max]` equals the number of
/// records; sets `count_verified` accordingly.
pub fn verify_count(cache: &mut ZeroCache, chi: &DirichletCharacter, policy: &PrecisionPolicy) -> Result<bool> {
    if cache.character_label != chi.label() {
        return Err(Error::invalid(format!("cache is for {}, not {}", cache.character_label, chi.label())));
    }
    let n = argument_principle_count(chi, cache.t_max, cache, policy)?;
    let inside = cache.records.iter().filter(|r| r.gamma > CONTOUR_FLOOR && r.gamma <= cache.t_max).count();
    cache.count_verified = n == inside as i64;
    Ok(cache.count_verified)
}

/// Zeros in the rectangle `[-1/2, 3/2] x [floor, t_max]` by the argument principle.
pub fn argument_principle_count(chi: &DirichletCharacter, t_max: f64, cache: &ZeroCache, policy: &PrecisionPolicy) -> Result<i64> {
    let mut top = t_max;
    // keep the top edge away from detected ordinates
    for _ in 0..10 {
        if cache.records.iter().any(|r| (r.gamma - top).abs() < 1e-3) {
            top += 1e-2;
        } else {
            break;
        }
    }
    if top > t_max && cache.records.iter().any(|r| r.gamma > t_max && r.gamma <= top) {
        return Err(Error::invalid("nudged contour swallowed an extra ordinate"));
    }
    let corners = [
        Complex64::new(CONTOUR_RIGHT, CONTOUR_FLOOR),
        Complex64::new(CONTOUR_RIGHT, top),
        Complex64::new(CONTOUR_LEFT, top),
        Complex64::new(CONTOUR_LEFT, CONTOUR_FLOOR),
    ];
    let f = |s: Complex64| -> Result<Complex64> { Ok(l_eval(s, chi, policy)?.value) };
    let mut total = 0.0;
    for k in 0..4 {
        total += phase_change(&f, corners[k], corners[(k + 1) % 4])?;
    }
    let winding = total / TAU;
    let rounded = winding.round();
    if (winding - rounded).abs() > 0.1 {
        return Err(Error::invalid(format!("winding number {winding} is not close to an integer")));
    }
    Ok(rounded as i64)
}

/// Total change of `arg f` along the segment, with adaptive subdivision.
fn phase_change<F>(f: &F, a: Complex64, b: Complex64) -> Result<f64>
where
    F: Fn(Complex64) -> Result<Complex64> + Sync,
{
    let len = (b - a).norm();
    let pieces = (len / 0.25).ceil().max(1.0) as usize;
    let nodes: Vec<Complex64> = (0..=pieces).map(|i| a + (b - a) * (i as f64 / pieces as f64)).collect();
    let vals: Vec<Complex64> = nodes.par_iter().map(|&s| f(s)).collect::<Result<_>>()?;
    let parts: Vec<f64> = (0..pieces)
        .into_par_iter()
        .map(|i| refine_phase(f, nodes[i], vals[i], nodes[i + 1], vals[i + 1], 0))
        .collect::<Result<_>>()?;
    Ok(parts.iter().sum())
}

fn refine_phase<F>(f: &F, a: Complex64, fa: Complex64, b: Complex64, fb: Complex64, depth: u32) -> Result<f64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let d = (fb / fa).arg();
    if d.abs() < 0.5 || depth >= 30 {
        if depth >= 30 {
            return Err(Error::invalid(format!("phase tracking failed to resolve near {a}")));
        }
        // confirm with a midpoint so a full turn cannot hide inside the step
        let m = 0.5 * (a + b);
        let fm = f(m)?;
        let d1 = (fm / fa).arg();
        let d2 = (fb / fm).arg();
        if (d1 + d2 - d).abs() < 1e-9 && d1.abs() < 0.5 && d2.abs() < 0.5 {
            return Ok(d);
        }
        return Ok(refine_phase(f, a, fa, m, fm, depth + 1)? + refine_phase(f, m, fm, b, fb, depth + 1)?);
    }
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    Ok(refine_phase(f, a, fa, m, fm, depth + 1)? + refine_phase(f, m, fm, b, fb, depth + 1)?)
}

/// Grid minimizer of `max_sigma 1/|f(sigma + it)|` over `t in [t_lo, 2 t_lo]`.
///
/// `f` returns the modulus to be bounded below; grid points where it vanishes are skipped.
pub fn good_ordinate<F>(t_lo: f64, sigma_step: f64, t_step: f64, f: F) -> Result<GoodOrdinate>
where
    F: Fn(Complex64) -> Result<f64> + Sync,
{
    if !(t_lo > 0.0) || !(sigma_step > 0.0) || !(t_step > 0.0) {
        return Err(Error::invalid("grid parameters must be positive"));
    }
    let nt = (t_lo / t_step).floor() as usize;
    let ns = (1.5 / sigma_step + 1e-9).floor() as usize;
    let sigmas: Vec<f64> = (0..=ns).map(|j| 0.5 + j as f64 * sigma_step).collect();
    let bounds: Vec<Option<f64>> = (0..=nt)
        .into_par_iter()
        .map(|i| -> Result<Option<f64>> {
            let t = t_lo + i as f64 * t_step;
            let mut worst: f64 = 0.0;
            for &sigma in &sigmas {
                let m = f(Complex64::new(sigma, t))?;
                if m == 0.0 {
                    return Ok(None);
                }
                worst = worst.max(1.0 / m);
            }
            Ok(Some(worst))
        })
        .collect::<Result<_>>()?;
    let mut best: Option<(f64, f64)> = None;
    for (i, b) in bounds.iter().enumerate() {
        let Some(b) = *b else { continue };
        if best.map_or(true, |(_, bb)| b < bb) {
            best = Some((t_lo + i as f64 * t_step, b));
        }
    }
    let (t_nu, attained_bound) = best.ok_or_else(|| Error::invalid("every grid point hit a zero"))?;
    Ok(GoodOrdinate { t_nu, attained_bound, grid_step: t_step, sigma_step })
}

/// Good ordinate for a set of primitive characters.
pub fn find_t_nu(
    t: f64,
    characters: &[DirichletCharacter],
    sigma_step: f64,
    t_step: f64,
    policy: &PrecisionPolicy,
) -> Result<GoodOrdinate> {
    if characters.is_empty() {
        return Err(Error::invalid("find_t_nu needs at least one character"));
    }
    for c in characters {
        if !c.is_primitive() {
            return Err(Error::NotPrimitive(c.label().to_string()));
        }
    }
    good_ordinate(t, sigma_step, t_step, |s| {
        let mut m = f64::INFINITY;
        for c in characters {
            m = m.min(l_eval(s, c, policy)?.value.norm());
        }
        Ok(m)
    })
}

/// Point of `[t_nu, t_nu + 1]` farthest from every imaginary-axis zero of the products.
pub fn find_t_star(t_nu: f64, products: &[FiniteEulerProduct]) -> Result<TStar> {
    if products.is_empty() {
        return Err(Error::invalid("find_t_star needs at least one product"));
    }
    let (lo, hi) = (t_nu, t_nu + 1.0);
    let mut pts: Vec<f64> = Vec::new();
    for p in products {
        // neighbours just outside the window still constrain the endpoints
        let reach = p.active_primes().iter().map(|a| a.spacing()).fold(0.0, f64::max);
        pts.extend(p.lattice_ordinates_near(lo - reach, hi + reach));
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let dist = |t: f64| pts.iter().map(|e| (t - e).abs()).fold(f64::INFINITY, f64::min);
    if !pts.iter().any(|&e| e >= lo && e <= hi) {
        let mid = 0.5 * (lo + hi);
        return Ok(TStar { t_star: mid, distance: dist(mid) });
    }
    let mut candidates = vec![lo, hi];
    for w in pts.windows(2) {
        let m = 0.5 * (w[0] + w[1]);
        if m > lo && m < hi {
            candidates.push(m);
        }
    }
    candidates.sort_by(f64::total_cmp);
    let mut best = (candidates[0], dist(candidates[0]));
    for &c in &candidates[1..] {
        let d = dist(c);
        if d > best.1 {
            best = (c, d);
        }
    }
    Ok(TStar { t_star: best.0, distance: best.1 })
}

/// Supplies verified zero caches on demand.
pub trait ZeroSource: Sync {
    /// Zeros of `L(s, chi)` with `0 < gamma <= upto`, count-verified.
    fn zeros(&self, chi: &DirichletCharacter, upto: f64) -> Result<Arc<ZeroCache>>;
}

/// Scans on first request and keeps the caches in memory.
pub struct MemoryZeroStore {
    policy: PrecisionPolicy,
    caches: Mutex<HashMap<String, Arc<ZeroCache>>>,
}

impl MemoryZeroStore {
    pub fn new(policy: PrecisionPolicy) -> Self {
        MemoryZeroStore { policy, caches: Mutex::new(HashMap::new()) }
    }

    pub fn insert(&self, cache: ZeroCache) {
        self.caches.lock().expect("zero store").insert(cache.character_label.clone(), Arc::new(cache));
    }
}

impl ZeroSource for MemoryZeroStore {
    fn zeros(&self, chi: &DirichletCharacter, upto: f64) -> Result<Arc<ZeroCache>> {
        if let Some(c) = self.caches.lock().expect("zero store").get(chi.label()) {
            if c.t_max >= upto && c.count_verified {
                return Ok(c.clone());
            }
        }
        // scan a little past the request so nearby heights reuse it
        let cache = Arc::new(scan_zeros(chi, (upto * 1.25).ceil(), &self.policy)?);
        self.caches.lock().expect("zero store").insert(chi.label().to_string(), cache.clone());
        Ok(cache)
    }
}
