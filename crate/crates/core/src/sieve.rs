//! Ground truth by direct sieving.
//!
//! Möbius values come from a linear sieve (with a segmented path for large
//! limits); twisted and progression sums use the half-weight convention at
//! integer `x`. Field coefficients are the Dirichlet coefficients of
//! `prod_{chi in X(K)} L(s, chi*)` and of its reciprocal.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::arith::{binomial, gcd, lcm};
use crate::characters::DirichletCharacter;
use crate::error::{Error, Result};
use crate::field::AbelianField;
use crate::numeric::csum;

/// Largest limit handled by the linear sieve; above this the segmented path is used.
pub const LINEAR_SIEVE_LIMIT: u64 = 100_000_000;
/// Default ceiling on table entries (one byte each for the Möbius codes).
pub const DEFAULT_MEMORY_BUDGET: u64 = 500_000_000;

const CACHE_MAGIC: &[u8; 4] = b"MBT1";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MobiusTable {
    limit: u64,
    /// `mu[n]` for `0 <= n <= limit`; index 0 is unused and set to 0.
    mu: Vec<i8>,
    /// Smallest prime factor, empty when the table came from a cache file or
    /// the segmented path.
    spf: Vec<u32>,
}

impl MobiusTable {
    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn mu(&self, n: u64) -> i8 {
        self.mu[n as usize]
    }

    pub fn values(&self) -> &[i8] {
        &self.mu
    }

    pub fn smallest_prime_factor(&self, n: u64) -> Option<u32> {
        self.spf.get(n as usize).copied().filter(|&p| p != 0)
    }

    pub fn is_squarefree(&self, n: u64) -> bool {
        self.mu[n as usize] != 0
    }

    /// Plain Mertens function `M(n)` (no half weight).
    pub fn mertens(&self, n: u64) -> i64 {
        self.mu[1..=n as usize].iter().map(|&m| m as i64).sum()
    }

    fn check_x(&self, x: f64) -> Result<()> {
        if !(x.is_finite()) || x > self.limit as f64 {
            return Err(Error::OutOfRange {
                value: x,
                limit: self.limit,
            });
        }
        Ok(())
    }

    /// Binary cache: `MBT1`, little-endian u64 limit, then 2-bit codes for
    /// `n = 1..=limit` (0 -> 0, 1 -> +1, 2 -> -1), four per byte, low bits first.
    pub fn write_cache<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(CACHE_MAGIC)?;
        w.write_all(&self.limit.to_le_bytes())?;
        let mut packed = vec![0u8; (self.limit as usize).div_ceil(4)];
        for n in 1..=self.limit as usize {
            let code: u8 = match self.mu[n] {
                0 => 0,
                1 => 1,
                _ => 2,
            };
            let i = n - 1;
            packed[i / 4] |= code << (2 * (i % 4));
        }
        w.write_all(&packed)?;
        Ok(())
    }

    pub fn read_cache<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != CACHE_MAGIC {
            return Err(Error::Format("missing MBT1 magic".into()));
        }
        let mut lim = [0u8; 8];
        r.read_exact(&mut lim)?;
        let limit = u64::from_le_bytes(lim);
        let mut packed = vec![0u8; (limit as usize).div_ceil(4)];
        r.read_exact(&mut packed)?;
        let mut mu = vec![0i8; limit as usize + 1];
        for n in 1..=limit as usize {
            let i = n - 1;
            mu[n] = match (packed[i / 4] >> (2 * (i % 4))) & 3 {
                0 => 0,
                1 => 1,
                2 => -1,
                c => return Err(Error::Format(format!("invalid code {c} at n = {n}"))),
            };
        }
        Ok(MobiusTable {
            limit,
            mu,
            spf: Vec::new(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_cache(std::io::BufWriter::new(f))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_cache(std::io::BufReader::new(f))
    }
}

/// Möbius table up to `n` within the default memory budget.
pub fn mobius_sieve(n: u64) -> Result<MobiusTable> {
    mobius_sieve_with_budget(n, DEFAULT_MEMORY_BUDGET)
}

pub fn mobius_sieve_with_budget(n: u64, budget: u64) -> Result<MobiusTable> {
    if n == 0 {
        return Err(Error::invalid("sieve limit must be at least 1"));
    }
    if n > budget {
        return Err(Error::MemoryBudget {
            requested: n,
            budget,
            bytes: n.saturating_mul(if n <= LINEAR_SIEVE_LIMIT { 5 } else { 1 }),
        });
    }
    if n > LINEAR_SIEVE_LIMIT {
        let mu = segmented_mobius(0, n + 1);
        return Ok(MobiusTable {
            limit: n,
            mu,
            spf: Vec::new(),
        });
    }
    Ok(linear_sieve(n))
}

fn linear_sieve(n: u64) -> MobiusTable {
    let size = n as usize + 1;
    let mut mu = vec![0i8; size];
    let mut spf = vec![0u32; size];
    let mut primes: Vec<u32> = Vec::new();
    if n >= 1 {
        mu[1] = 1;
    }
    for i in 2..size {
        if spf[i] == 0 {
            spf[i] = i as u32;
            mu[i] = -1;
            primes.push(i as u32);
        }
        for &p in &primes {
            let m = i * p as usize;
            if p > spf[i] || m >= size {
                break;
            }
            spf[m] = p;
            mu[m] = if i % p as usize == 0 { 0 } else { -mu[i] };
        }
    }
    MobiusTable { limit: n, mu, spf }
}

fn small_primes(limit: u64) -> Vec<u64> {
    let limit = limit as usize;
    let mut composite = vec![false; limit + 1];
    let mut out = Vec::new();
    for i in 2..=limit {
        if !composite[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= limit {
                composite[j] = true;
                j += i;
            }
        }
    }
    out
}

/// Möbius values on `[lo, hi)` by segmented Eratosthenes; entry 0 (if present) is 0.
pub fn segmented_mobius(lo: u64, hi: u64) -> Vec<i8> {
    const BLOCK: u64 = 1 << 18;
    let root = (hi as f64).sqrt() as u64 + 2;
    let primes = small_primes(root);
    let mut out = Vec::with_capacity((hi - lo) as usize);
    let mut start = lo;
    while start < hi {
        let end = (start + BLOCK).min(hi);
        let len = (end - start) as usize;
        let mut mu = vec![1i8; len];
        let mut rest: Vec<u64> = (start..end).collect();
        for &p in &primes {
            if p * p >= end {
                break;
            }
            let first = start.div_ceil(p) * p;
            let mut m = first.max(p);
            while m < end {
                let i = (m - start) as usize;
                mu[i] = -mu[i];
                rest[i] /= p;
                m += p;
            }
            let pp = p * p;
            let mut m = start.div_ceil(pp) * pp;
            while m < end {
                mu[(m - start) as usize] = 0;
                m += pp;
            }
        }
        for i in 0..len {
            let n = start + i as u64;
            if n == 0 {
                mu[i] = 0;
            } else if mu[i] != 0 && rest[i] > 1 {
                mu[i] = -mu[i];
            }
        }
        out.extend(mu);
        start = end;
    }
    out
}

/// `M(n) = sum_{k <= n} mu(k)` without materializing a full table.
pub fn segmented_mertens(n: u64) -> i64 {
    const CHUNK: u64 = 1 << 22;
    let mut total = 0i64;
    let mut lo = 1;
    while lo <= n {
        let hi = (lo + CHUNK).min(n + 1);
        total += segmented_mobius(lo, hi).iter().map(|&m| m as i64).sum::<i64>();
        lo = hi;
    }
    total
}

/// Integer range below `x` at full weight and the boundary index at half weight.
fn split_x(x: f64) -> (u64, Option<u64>) {
    if x < 1.0 {
        return (0, None);
    }
    let fl = x.floor();
    if fl == x {
        (fl as u64 - 1, Some(fl as u64))
    } else {
        (fl as u64, None)
    }
}

/// `M*(x, chi) = sum'_{n <= x} chi(n) mu(n)`, summed exactly per root of unity.
pub fn summatory_twisted(x: f64, chi: &DirichletCharacter, table: &MobiusTable) -> Result<Complex64> {
    table.check_x(x)?;
    let (full, half) = split_x(x);
    let big = chi.group().exponent();
    // doubled weights so the half-weighted boundary stays integral
    let mut hist = vec![0i64; big as usize];
    let mut bump = |n: u64, w: i64| {
        let m = table.mu(n);
        if m != 0 {
            if let Some(a) = chi.angle(n) {
                hist[(a.num() * (big / a.den())) as usize] += w * m as i64;
            }
        }
    };
    for n in 1..=full {
        bump(n, 2);
    }
    if let Some(n) = half {
        bump(n, 1);
    }
    Ok(csum(hist.iter().enumerate().filter(|(_, &c)| c != 0).map(|(k, &c)| {
        crate::characters::Angle::new(k as u64, big).to_complex() * (c as f64 / 2.0)
    })))
}

/// `M*(x; q, a) = sum'_{n <= x, n = a mod q} mu(n)`.
pub fn summatory_progression(x: f64, q: u64, a: u64, table: &MobiusTable) -> Result<f64> {
    if q == 0 {
        return Err(Error::ZeroModulus);
    }
    let g = gcd(a, q);
    if g != 1 {
        return Err(Error::NotCoprime { a, q, gcd: g });
    }
    table.check_x(x)?;
    let (full, half) = split_x(x);
    let r = a % q;
    let mut doubled = 0i64;
    let mut n = if r == 0 { q } else { r };
    while n <= full {
        doubled += 2 * table.mu(n) as i64;
        n += q;
    }
    if let Some(h) = half {
        if h % q == r {
            doubled += table.mu(h) as i64;
        }
    }
    Ok(doubled as f64 / 2.0)
}

/// The same progression sum assembled as `(1/phi(q)) sum_chi conj(chi(a)) M*(x, chi)`.
pub fn progression_via_characters(x: f64, q: u64, a: u64, table: &MobiusTable) -> Result<Complex64> {
    let g = gcd(a, q);
    if g != 1 {
        return Err(Error::NotCoprime { a, q, gcd: g });
    }
    let group = crate::characters::build_group(q)?;
    let phi = group.euler_phi() as f64;
    let parts = group
        .iter()
        .map(|chi| {
            let w = chi.value(a).conj();
            summatory_twisted(x, chi, table).map(|m| w * m)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(csum(parts) / phi)
}

const WINDOW_START: u64 = 64;

/// Scan outward from `x` for the nearest `n != x` with `accept(n)`; returns the
/// distance and the candidates achieving it, in increasing order.
fn nearest_scan(x: f64, limit: u64, accept: impl Fn(u64) -> bool) -> Result<(f64, Vec<u64>)> {
    let mut w = WINDOW_START;
    loop {
        let lo = (x - w as f64).ceil().max(1.0) as u64;
        let hi = ((x + w as f64).floor() as u64).min(limit);
        let mut best = f64::INFINITY;
        let mut hits = Vec::new();
        for n in lo..=hi {
            if n as f64 == x || !accept(n) {
                continue;
            }
            let d = (x - n as f64).abs();
            if d < best {
                best = d;
                hits.clear();
                hits.push(n);
            } else if d == best {
                hits.push(n);
            }
        }
        if best.is_finite() && x + best <= limit as f64 {
            return Ok((best, hits));
        }
        if x + (w as f64) >= limit as f64 {
            return Err(Error::WidenWindow { x });
        }
        w *= 2;
    }
}

/// `<x>`: distance from `x` to the nearest square-free `n != x` coprime to `q`.
pub fn nearest_squarefree_coprime(x: f64, q: u64, table: &MobiusTable) -> Result<f64> {
    if q == 0 {
        return Err(Error::ZeroModulus);
    }
    table.check_x(x)?;
    nearest_scan(x, table.limit, |n| table.is_squarefree(n) && gcd(n, q) == 1).map(|(d, _)| d)
}

/// Local splitting data of a rational prime in an Abelian field.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Splitting {
    pub ramification: u64,
    pub residue_degree: u64,
    pub prime_count: u64,
}

/// Splitting type of `p` read off the character group: the characters not
/// ramified at `p` form a subgroup `Y` with `e = |X|/|Y|`; `f` is the order of
/// Frobenius on `Y`, and `g = |Y|/f`.
pub fn splitting(p: u64, inducers: &[DirichletCharacter]) -> Splitting {
    let unram: Vec<_> = inducers.iter().filter_map(|c| c.angle(p)).collect();
    let y = unram.len() as u64;
    let f = unram.iter().fold(1, |acc, a| lcm(acc, a.order()));
    Splitting {
        ramification: inducers.len() as u64 / y,
        residue_degree: f,
        prime_count: y / f,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldCoefficients {
    limit: u64,
    ideal_counts: Vec<i64>,
    mobius_coeffs: Vec<i64>,
    squarefree_counts: Vec<u64>,
}

impl FieldCoefficients {
    pub fn limit(&self) -> u64 {
        self.limit
    }

    /// `a_n`: number of integral ideals of norm `n`.
    pub fn ideal_count(&self, n: u64) -> i64 {
        self.ideal_counts[n as usize]
    }

    /// `m_n = sum_{N(a) = n} mu_K(a)`.
    pub fn mobius_coeff(&self, n: u64) -> i64 {
        self.mobius_coeffs[n as usize]
    }

    /// Number of square-free ideals of norm `n`.
    pub fn squarefree_count(&self, n: u64) -> u64 {
        self.squarefree_counts[n as usize]
    }

    pub fn ideal_counts(&self) -> &[i64] {
        &self.ideal_counts
    }

    pub fn mobius_coeffs(&self) -> &[i64] {
        &self.mobius_coeffs
    }

    /// `A(x) = #{a : N(a) <= x}` for integer `x`.
    pub fn ideal_count_sum(&self, x: u64) -> i64 {
        self.ideal_counts[1..=x as usize].iter().sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,a_n,m_n\n");
        for n in 1..=self.limit as usize {
            out.push_str(&format!(
                "{n},{},{}\n",
                self.ideal_counts[n], self.mobius_coeffs[n]
            ));
        }
        out
    }
}

fn dirichlet_convolve(acc: &[Complex64], seq: &[Complex64]) -> Vec<Complex64> {
    let n = acc.len() - 1;
    let mut out = vec![Complex64::new(0.0, 0.0); n + 1];
    for d in 1..=n {
        if acc[d] == Complex64::new(0.0, 0.0) {
            continue;
        }
        let mut k = 1;
        while d * k <= n {
            out[d * k] += acc[d] * seq[k];
            k += 1;
        }
    }
    out
}

fn round_exact(values: &[Complex64]) -> Result<Vec<i64>> {
    values
        .iter()
        .enumerate()
        .map(|(n, v)| {
            if n == 0 {
                return Ok(0);
            }
            let r = v.re.round();
            if (v.re - r).abs() > 1e-6 || v.im.abs() > 1e-6 {
                return Err(Error::RoundingResidue {
                    n: n as u64,
                    value: v.re,
                });
            }
            Ok(r as i64)
        })
        .collect()
}

/// Ideal counts and Möbius coefficients of `K` up to `n` by Dirichlet convolution.
pub fn field_coefficients(field: &AbelianField, n: u64) -> Result<FieldCoefficients> {
    if n == 0 {
        return Err(Error::invalid("coefficient limit must be at least 1"));
    }
    let table = mobius_sieve(n)?;
    let size = n as usize + 1;
    let mut delta = vec![Complex64::new(0.0, 0.0); size];
    delta[1] = Complex64::new(1.0, 0.0);
    let mut a = delta.clone();
    let mut m = delta;
    for chi in field.inducers() {
        let vals: Vec<Complex64> = (0..size as u64)
            .map(|k| if k == 0 { Complex64::new(0.0, 0.0) } else { chi.value(k) })
            .collect();
        let muvals: Vec<Complex64> = vals
            .iter()
            .enumerate()
            .map(|(k, v)| v * table.mu[k] as f64)
            .collect();
        a = dirichlet_convolve(&a, &vals);
        m = dirichlet_convolve(&m, &muvals);
    }
    let ideal_counts = round_exact(&a)?;
    let mobius_coeffs = round_exact(&m)?;

    // square-free ideal counts, multiplicative from the splitting types
    let mut squarefree_counts = vec![0u64; size];
    squarefree_counts[1] = 1;
    for k in 2..size {
        let p = table.spf[k] as usize;
        let mut rest = k;
        let mut j = 0u64;
        while rest % p == 0 {
            rest /= p;
            j += 1;
        }
        let sp = splitting(p as u64, field.inducers());
        let local = if j % sp.residue_degree == 0 {
            binomial(sp.prime_count, j / sp.residue_degree)
        } else {
            0
        };
        squarefree_counts[k] = local * squarefree_counts[rest];
    }
    Ok(FieldCoefficients {
        limit: n,
        ideal_counts,
        mobius_coeffs,
        squarefree_counts,
    })
}

/// `M_K*(x) = sum'_{N(a) <= x} mu_K(a)`.
pub fn summatory_field(x: f64, coeffs: &FieldCoefficients) -> Result<f64> {
    if !x.is_finite() || x > coeffs.limit as f64 {
        return Err(Error::OutOfRange {
            value: x,
            limit: coeffs.limit,
        });
    }
    let (full, half) = split_x(x);
    let mut doubled: i64 = coeffs.mobius_coeffs[1..=full as usize].iter().map(|m| 2 * m).sum();
    if let Some(h) = half {
        doubled += coeffs.mobius_coeffs[h as usize];
    }
    Ok(doubled as f64 / 2.0)
}

/// Result of the `n_x` search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NearestNorm {
    pub n: u64,
    pub ideal_count: i64,
    pub distance: f64,
    /// Several equidistant norms shared the largest ideal count; the smallest was taken.
    pub secondary_tie: bool,
}

/// `n_x`: the nearest norm `n != x` carrying a square-free ideal; ties go to the
/// larger ideal count, then to the smaller `n`.
pub fn nearest_active_norm(x: f64, coeffs: &FieldCoefficients) -> Result<NearestNorm> {
    if !x.is_finite() || x > coeffs.limit as f64 {
        return Err(Error::OutOfRange {
            value: x,
            limit: coeffs.limit,
        });
    }
    let (distance, hits) = nearest_scan(x, coeffs.limit, |n| coeffs.squarefree_counts[n as usize] > 0)?;
    let top = hits
        .iter()
        .map(|&n| coeffs.ideal_counts[n as usize])
        .max()
        .expect("at least one candidate");
    let best: Vec<u64> = hits
        .into_iter()
        .filter(|&n| coeffs.ideal_counts[n as usize] == top)
        .collect();
    Ok(NearestNorm {
        n: best[0],
        ideal_count: top,
        distance,
        secondary_tie: best.len() > 1,
    })
}

/// Empirical `sup_{x <= limit} |A(x) - kappa_K x| / x^{1 - 1/n_K}` over integers.
pub fn ideal_count_error_scan(field: &AbelianField, coeffs: &FieldCoefficients) -> f64 {
    ideal_count_error_scan_upto(field, coeffs, coeffs.limit)
}

pub fn ideal_count_error_scan_upto(field: &AbelianField, coeffs: &FieldCoefficients, upto: u64) -> f64 {
    let kappa = field.kappa();
    let expo = 1.0 - 1.0 / field.degree() as f64;
    let mut count = 0i64;
    let mut sup = 0.0f64;
    for x in 1..=upto.min(coeffs.limit) {
        count += coeffs.ideal_counts[x as usize];
        let xf = x as f64;
        let stat = (count as f64 - kappa * xf).abs() / xf.powf(expo);
        sup = sup.max(stat);
    }
    sup
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characters::build_group;

    fn chi4() -> DirichletCharacter {
        build_group(4).unwrap().characters()[1].clone()
    }

    #[test]
    fn small_mobius_values() {
        let t = mobius_sieve(10).unwrap();
        assert_eq!(&t.values()[1..], &[1, -1, -1, 0, -1, 1, -1, 0, 0, 1]);
        assert_eq!(t.mu(4), 0);
        assert_eq!(t.smallest_prime_factor(9), Some(3));
        assert!(mobius_sieve(0).is_err());
    }

    #[test]
    fn memory_budget_is_enforced() {
        let err = mobius_sieve_with_budget(1_000, 100).unwrap_err();
        assert!(matches!(err, Error::MemoryBudget { .. }));
        assert!(err.to_string().contains("memory budget"));
    }

    #[test]
    fn segmented_matches_linear() {
        let t = mobius_sieve(5000).unwrap();
        let seg = segmented_mobius(0, 5001);
        assert_eq!(t.values(), &seg[..]);
        let window = segmented_mobius(3000, 3100);
        assert_eq!(&t.values()[3000..3100], &window[..]);
        assert_eq!(segmented_mertens(5000), t.mertens(5000));
    }

    #[test]
    fn twisted_sums() {
        let t = mobius_sieve(100).unwrap();
        let triv = DirichletCharacter::trivial();
        assert_eq!(summatory_twisted(1.0, &triv, &t).unwrap(), Complex64::new(0.5, 0.0));
        // M(10) = -1 with mu(10) = 1 half-weighted
        assert_eq!(summatory_twisted(10.0, &triv, &t).unwrap(), Complex64::new(-1.5, 0.0));
        assert_eq!(summatory_twisted(10.5, &chi4(), &t).unwrap(), Complex64::new(2.0, 0.0));
        assert_eq!(summatory_twisted(0.5, &chi4(), &t).unwrap(), Complex64::new(0.0, 0.0));
        assert!(summatory_twisted(101.0, &triv, &t).is_err());
    }

    #[test]
    fn progression_sums() {
        let t = mobius_sieve(100).unwrap();
        assert_eq!(summatory_progression(10.0, 4, 1, &t).unwrap(), 0.0);
        assert_eq!(summatory_progression(10.0, 4, 3, &t).unwrap(), -2.0);
        assert_eq!(summatory_progression(1.0, 3, 1, &t).unwrap(), 0.5);
        assert!(matches!(
            summatory_progression(10.0, 4, 2, &t),
            Err(Error::NotCoprime { .. })
        ));
    }

    #[test]
    fn nearest_squarefree() {
        let t = mobius_sieve(1000).unwrap();
        assert_eq!(nearest_squarefree_coprime(4.0, 1, &t).unwrap(), 1.0);
        assert_eq!(nearest_squarefree_coprime(7.5, 1, &t).unwrap(), 0.5);
        assert_eq!(nearest_squarefree_coprime(9.0, 10, &t).unwrap(), 2.0);
        let small = mobius_sieve(10).unwrap();
        // everything up to 10 coprime to 2*3*5*7 besides 1 is missing
        assert!(matches!(
            nearest_squarefree_coprime(9.5, 210, &small),
            Err(Error::WidenWindow { .. })
        ));
    }

    #[test]
    fn cache_round_trip() {
        let t = mobius_sieve(1001).unwrap();
        let mut buf = Vec::new();
        t.write_cache(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"MBT1");
        assert_eq!(u64::from_le_bytes(buf[4..12].try_into().unwrap()), 1001);
        assert_eq!(buf.len(), 12 + 251);
        let back = MobiusTable::read_cache(&buf[..]).unwrap();
        assert_eq!(back.values(), t.values());
        assert!(MobiusTable::read_cache(&b"XXXX"[..]).is_err());
    }
}
