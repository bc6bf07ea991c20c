//! Dirichlet characters with exact values.
//!
//! A character mod `q` is stored as an exponent vector on a fixed set of
//! generators of `(Z/qZ)*`: one primitive root per odd prime power, and the
//! pair `{-1, 5}` for `2^e` with `e >= 3` (just `-1` for `e = 2`). Values are
//! rational angles `k/L` standing for `exp(2*pi*i*k/L)`; complex numbers are
//! only produced by [`Angle::to_complex`].

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, OnceLock, RwLock};

use num_complex::Complex64;

use crate::arith::{euler_phi, factorize, gcd, lcm, pow_mod};
use crate::error::{Error, Result};
use crate::numeric::csum;

/// A root of unity `exp(2*pi*i*num/den)` with `num < den`, reduced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub struct Angle {
    num: u64,
    den: u64,
}

impl Angle {
    pub const ZERO: Angle = Angle { num: 0, den: 1 };

    pub fn new(num: u64, den: u64) -> Self {
        assert!(den > 0, "angle denominator must be positive");
        let num = num % den;
        let g = gcd(num, den);
        Angle {
            num: num / g,
            den: den / g,
        }
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    /// Multiplicative order of the root of unity.
    pub fn order(&self) -> u64 {
        self.den
    }

    pub fn is_one(&self) -> bool {
        self.num == 0
    }

    /// Product of the two roots of unity.
    pub fn add(self, other: Angle) -> Angle {
        let den = lcm(self.den, other.den);
        Angle::new(
            self.num * (den / self.den) + other.num * (den / other.den),
            den,
        )
    }

    pub fn neg(self) -> Angle {
        Angle::new(self.den - self.num, self.den)
    }

    /// Radian argument in `[0, 2*pi)`.
    pub fn radians(&self) -> f64 {
        2.0 * PI * self.num as f64 / self.den as f64
    }

    pub fn to_complex(&self) -> Complex64 {
        // fourth roots of unity are returned exactly
        if 4 % self.den == 0 {
            return match self.num * (4 / self.den) {
                0 => Complex64::new(1.0, 0.0),
                1 => Complex64::new(0.0, 1.0),
                2 => Complex64::new(-1.0, 0.0),
                _ => Complex64::new(0.0, -1.0),
            };
        }
        let turns = if 2 * self.num > self.den {
            -((self.den - self.num) as f64) / self.den as f64
        } else {
            self.num as f64 / self.den as f64
        };
        let (s, c) = (2.0 * PI * turns).sin_cos();
        Complex64::new(c, s)
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Generator decomposition and discrete-log table for `(Z/qZ)*`.
#[derive(Debug)]
pub struct UnitGroup {
    modulus: u64,
    generators: Vec<u64>,
    orders: Vec<u64>,
    /// Prime-power component owning each generator: (p, e).
    components: Vec<(u64, u32)>,
    exponent: u64,
    /// Flattened `modulus x generators.len()` table; `u32::MAX` marks non-units.
    dlog: Vec<u32>,
}

const NON_UNIT: u32 = u32::MAX;

fn primitive_root_prime_power(p: u64, e: u32) -> u64 {
    let pe = p.pow(e);
    let phi = euler_phi(pe);
    let factors: Vec<u64> = factorize(phi).into_iter().map(|(r, _)| r).collect();
    (2..pe)
        .find(|&g| gcd(g, p) == 1 && factors.iter().all(|&r| pow_mod(g, phi / r, pe) != 1))
        .unwrap_or(1)
}

/// Chinese-remainder lift of `residue mod pe` to a unit mod `q` that is 1 on the other components.
fn crt_lift(residue: u64, pe: u64, q: u64) -> u64 {
    let rest = q / pe;
    if rest == 1 {
        return residue % q;
    }
    // n = residue (mod pe), n = 1 (mod rest)
    (0..pe)
        .map(|k| 1 + k * rest)
        .find(|n| n % pe == residue % pe)
        .expect("CRT lift exists for coprime moduli")
}

impl UnitGroup {
    fn build(q: u64) -> Self {
        let mut generators = Vec::new();
        let mut orders = Vec::new();
        let mut components = Vec::new();
        // per component: (pe, local dlog table of vectors)
        let mut local_tables: Vec<(u64, Vec<Option<Vec<u32>>>)> = Vec::new();

        for (p, e) in factorize(q) {
            let pe = p.pow(e);
            let mut table: Vec<Option<Vec<u32>>> = vec![None; pe as usize];
            if p == 2 {
                match e {
                    1 => table[1] = Some(vec![]),
                    2 => {
                        generators.push(crt_lift(3, pe, q));
                        orders.push(2);
                        components.push((p, e));
                        table[1] = Some(vec![0]);
                        table[3] = Some(vec![1]);
                    }
                    _ => {
                        let half = pe / 4;
                        generators.push(crt_lift(pe - 1, pe, q));
                        orders.push(2);
                        components.push((p, e));
                        generators.push(crt_lift(5, pe, q));
                        orders.push(half);
                        components.push((p, e));
                        for a in 0..2u64 {
                            let sign = if a == 0 { 1 } else { pe - 1 };
                            let mut x = sign;
                            for b in 0..half {
                                table[x as usize] = Some(vec![a as u32, b as u32]);
                                x = x * 5 % pe;
                            }
                        }
                    }
                }
            } else {
                let g = primitive_root_prime_power(p, e);
                let phi = euler_phi(pe);
                generators.push(crt_lift(g, pe, q));
                orders.push(phi);
                components.push((p, e));
                let mut x = 1u64;
                for k in 0..phi {
                    table[x as usize] = Some(vec![k as u32]);
                    x = x * g % pe;
                }
            }
            local_tables.push((pe, table));
        }

        let ngen = generators.len();
        let mut dlog = vec![NON_UNIT; (q as usize) * ngen.max(1)];
        for n in 0..q {
            if gcd(n, q) != 1 {
                continue;
            }
            let mut row = Vec::with_capacity(ngen);
            for (pe, table) in &local_tables {
                row.extend(
                    table[(n % pe) as usize]
                        .as_ref()
                        .expect("unit has a local discrete log"),
                );
            }
            if ngen == 0 {
                dlog[n as usize] = 0;
            } else {
                dlog[n as usize * ngen..(n as usize + 1) * ngen].copy_from_slice(&row);
            }
        }
        let exponent = orders.iter().fold(1, |acc, &o| lcm(acc, o));
        UnitGroup {
            modulus: q,
            generators,
            orders,
            components,
            exponent,
            dlog,
        }
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn generators(&self) -> &[u64] {
        &self.generators
    }

    pub fn orders(&self) -> &[u64] {
        &self.orders
    }

    /// Least common multiple of the generator orders.
    pub fn exponent(&self) -> u64 {
        self.exponent
    }

    /// Exponent vector of `n` on the generators, or `None` when `n` is not a unit.
    pub fn discrete_log(&self, n: u64) -> Option<&[u32]> {
        let n = (n % self.modulus) as usize;
        let ngen = self.generators.len();
        if ngen == 0 {
            return (self.dlog[n] != NON_UNIT).then_some(&[]);
        }
        let row = &self.dlog[n * ngen..(n + 1) * ngen];
        (row[0] != NON_UNIT).then_some(row)
    }
}

static GROUPS: OnceLock<RwLock<HashMap<u64, Arc<UnitGroup>>>> = OnceLock::new();

/// Shared unit-group structure for modulus `q`, built once per process.
pub fn unit_group(q: u64) -> Result<Arc<UnitGroup>> {
    if q == 0 {
        return Err(Error::ZeroModulus);
    }
    let map = GROUPS.get_or_init(|| RwLock::new(HashMap::new()));
    if let Some(g) = map.read().expect("group cache poisoned").get(&q) {
        return Ok(Arc::clone(g));
    }
    let built = Arc::new(UnitGroup::build(q));
    let mut w = map.write().expect("group cache poisoned");
    Ok(Arc::clone(w.entry(q).or_insert(built)))
}

/// A Dirichlet character modulo `q`.
#[derive(Clone)]
pub struct DirichletCharacter {
    group: Arc<UnitGroup>,
    exponents: Vec<u32>,
    conductor: u64,
    kappa: u8,
    label: String,
}

impl fmt::Debug for DirichletCharacter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DirichletCharacter")
            .field("label", &self.label)
            .field("conductor", &self.conductor)
            .field("kappa", &self.kappa)
            .finish()
    }
}

impl PartialEq for DirichletCharacter {
    fn eq(&self, other: &Self) -> bool {
        self.modulus() == other.modulus() && self.exponents == other.exponents
    }
}

impl Eq for DirichletCharacter {}

fn make_label(q: u64, exponents: &[u32]) -> String {
    if exponents.is_empty() {
        return format!("{q}.0");
    }
    let parts: Vec<String> = exponents.iter().map(|a| a.to_string()).collect();
    format!("{q}.{}", parts.join("."))
}

fn v_p(mut n: u64, p: u64) -> u32 {
    let mut v = 0;
    while n % p == 0 && n > 0 {
        n /= p;
        v += 1;
    }
    v
}

impl DirichletCharacter {
    /// Character with the given exponent vector on the generators of `(Z/qZ)*`.
    pub fn from_exponents(q: u64, exponents: &[u32]) -> Result<Self> {
        let group = unit_group(q)?;
        if exponents.len() != group.orders.len() {
            return Err(Error::invalid(format!(
                "modulus {q} has {} generators, got {} exponents",
                group.orders.len(),
                exponents.len()
            )));
        }
        let exponents: Vec<u32> = exponents
            .iter()
            .zip(&group.orders)
            .map(|(&a, &o)| (a as u64 % o) as u32)
            .collect();
        Ok(Self::assemble(group, exponents))
    }

    fn assemble(group: Arc<UnitGroup>, exponents: Vec<u32>) -> Self {
        let conductor = Self::conductor_of(&group, &exponents);
        let label = make_label(group.modulus, &exponents);
        let mut chi = DirichletCharacter {
            group,
            exponents,
            conductor,
            kappa: 0,
            label,
        };
        let minus_one = chi.modulus() - 1;
        chi.kappa = match chi.angle(minus_one) {
            Some(a) if !a.is_one() => 1,
            _ => 0,
        };
        chi
    }

    fn conductor_of(group: &UnitGroup, exponents: &[u32]) -> u64 {
        let mut conductor = 1u64;
        let mut i = 0;
        while i < exponents.len() {
            let (p, e) = group.components[i];
            if p == 2 && e >= 3 {
                let a0 = exponents[i] as u64;
                let a1 = exponents[i + 1] as u64;
                let half = group.orders[i + 1];
                let f = if a1 != 0 {
                    let o1 = half / gcd(a1, half);
                    v_p(o1, 2) + 2
                } else if a0 != 0 {
                    2
                } else {
                    0
                };
                conductor *= 2u64.pow(f);
                i += 2;
            } else {
                let a = exponents[i] as u64;
                let order = group.orders[i];
                if a != 0 {
                    let o = order / gcd(a, order);
                    let f = if p == 2 { 2 } else { v_p(o, p) + 1 };
                    conductor *= p.pow(f);
                }
                let _ = e;
                i += 1;
            }
        }
        conductor
    }

    /// The trivial character modulo 1.
    pub fn trivial() -> Self {
        Self::principal(1).expect("modulus 1 is valid")
    }

    pub fn principal(q: u64) -> Result<Self> {
        let group = unit_group(q)?;
        let n = group.orders.len();
        Ok(Self::assemble(group, vec![0; n]))
    }

    /// Parse a label of the form `q.a1.a2...`.
    pub fn from_label(label: &str) -> Result<Self> {
        let mut parts = label.trim().split('.');
        let q: u64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::invalid(format!("bad character label '{label}'")))?;
        let exps: Vec<u32> = parts
            .map(|s| s.parse::<u32>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::invalid(format!("bad character label '{label}'")))?;
        let group = unit_group(q)?;
        if group.orders.is_empty() {
            if exps.iter().any(|&a| a != 0) || exps.len() > 1 {
                return Err(Error::invalid(format!("bad character label '{label}'")));
            }
            return Self::from_exponents(q, &[]);
        }
        if exps.len() != group.orders.len() || exps.iter().zip(&group.orders).any(|(&a, &o)| a as u64 >= o) {
            return Err(Error::invalid(format!("bad character label '{label}'")));
        }
        Self::from_exponents(q, &exps)
    }

    pub fn modulus(&self) -> u64 {
        self.group.modulus
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exponents
    }

    pub fn conductor(&self) -> u64 {
        self.conductor
    }

    /// 0 for even characters, 1 for odd ones.
    pub fn kappa(&self) -> u8 {
        self.kappa
    }

    pub fn is_odd(&self) -> bool {
        self.kappa == 1
    }

    pub fn is_primitive(&self) -> bool {
        self.conductor == self.modulus()
    }

    pub fn is_principal(&self) -> bool {
        self.exponents.iter().all(|&a| a == 0)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn group(&self) -> &Arc<UnitGroup> {
        &self.group
    }

    /// Order of the character in the character group.
    pub fn order(&self) -> u64 {
        self.exponents
            .iter()
            .zip(&self.group.orders)
            .fold(1, |acc, (&a, &o)| lcm(acc, o / gcd(a as u64, o)))
    }

    pub fn is_real(&self) -> bool {
        self.order() <= 2
    }

    /// `chi(n)` as an exact angle, `None` when `gcd(n, q) > 1`.
    pub fn angle(&self, n: u64) -> Option<Angle> {
        let logs = self.group.discrete_log(n)?;
        let big = self.group.exponent;
        let num = logs
            .iter()
            .zip(&self.exponents)
            .zip(&self.group.orders)
            .fold(0u64, |acc, ((&k, &a), &o)| {
                (acc + (k as u64 * a as u64 % o) * (big / o)) % big
            });
        Some(Angle::new(num, big))
    }

    /// `chi(n)` for a signed argument.
    pub fn angle_i64(&self, n: i64) -> Option<Angle> {
        let q = self.modulus() as i64;
        self.angle(n.rem_euclid(q) as u64)
    }

    pub fn value(&self, n: u64) -> Complex64 {
        self.angle(n).map_or(Complex64::new(0.0, 0.0), |a| a.to_complex())
    }

    pub fn conj(&self) -> Self {
        let exps: Vec<u32> = self
            .exponents
            .iter()
            .zip(&self.group.orders)
            .map(|(&a, &o)| ((o - a as u64) % o) as u32)
            .collect();
        Self::assemble(Arc::clone(&self.group), exps)
    }

    /// Pointwise product of two characters with the same modulus.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.modulus() != other.modulus() {
            return Err(Error::invalid("characters have different moduli"));
        }
        let exps: Vec<u32> = self
            .exponents
            .iter()
            .zip(&other.exponents)
            .zip(&self.group.orders)
            .map(|((&a, &b), &o)| ((a as u64 + b as u64) % o) as u32)
            .collect();
        Ok(Self::assemble(Arc::clone(&self.group), exps))
    }

    /// The primitive character `chi*` of modulus `conductor(chi)` inducing `chi`.
    pub fn primitive_inducer(&self) -> Self {
        if self.is_primitive() {
            return self.clone();
        }
        let q = self.modulus();
        let d = self.conductor;
        let target = unit_group(d).expect("conductor is positive");
        let exps: Vec<u32> = target
            .generators
            .iter()
            .zip(&target.orders)
            .map(|(&g, &o)| {
                let lift = (0..)
                    .map(|k| g + k * d)
                    .find(|&n| gcd(n, q) == 1)
                    .expect("a coprime lift exists");
                let a = self.angle(lift).expect("lift is a unit");
                debug_assert_eq!((a.num() * o) % a.den(), 0);
                (a.num() * o / a.den()) as u32
            })
            .collect();
        Self::assemble(target, exps)
    }

    /// Induce this character up to modulus `q` (a multiple of its modulus).
    pub fn induce(&self, q: u64) -> Result<Self> {
        if q == 0 || q % self.modulus() != 0 {
            return Err(Error::invalid(format!(
                "{q} is not a multiple of {}",
                self.modulus()
            )));
        }
        let target = unit_group(q)?;
        let exps: Vec<u32> = target
            .generators
            .iter()
            .zip(&target.orders)
            .map(|(&g, &o)| {
                let a = self.angle(g).expect("unit mod q is a unit mod d");
                (a.num() * o / a.den()) as u32
            })
            .collect();
        Ok(Self::assemble(target, exps))
    }

    /// `tau(chi) = sum_{a=1}^{q} chi(a) exp(2 pi i a / q)`.
    pub fn gauss_sum(&self) -> Complex64 {
        let q = self.modulus();
        csum((1..=q).filter_map(|a| {
            self.angle(a)
                .map(|ang| ang.add(Angle::new(a, q)).to_complex())
        }))
    }

    /// Root number `tau(chi) / (i^kappa sqrt(q))`; primitive characters only.
    pub fn epsilon_factor(&self) -> Result<Complex64> {
        if !self.is_primitive() {
            return Err(Error::NotPrimitive(self.label.clone()));
        }
        let ik = if self.kappa == 1 {
            Complex64::new(0.0, 1.0)
        } else {
            Complex64::new(1.0, 0.0)
        };
        Ok(self.gauss_sum() / (ik * (self.modulus() as f64).sqrt()))
    }

    /// CSV value table with columns `n,re,im` for `n = 1..=limit`.
    pub fn values_csv(&self, limit: u64) -> String {
        let mut out = String::from("n,re,im\n");
        for n in 1..=limit {
            let v = self.value(n);
            out.push_str(&format!("{n},{:.17e},{:.17e}\n", v.re, v.im));
        }
        out
    }
}

impl fmt::Display for DirichletCharacter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

/// All `phi(q)` characters modulo `q`, ordered by exponent vector.
#[derive(Clone, Debug)]
pub struct CharacterGroup {
    modulus: u64,
    characters: Vec<DirichletCharacter>,
}

impl CharacterGroup {
    pub fn build(q: u64) -> Result<Self> {
        let group = unit_group(q)?;
        let mut vectors: Vec<Vec<u32>> = vec![vec![]];
        for &o in &group.orders {
            vectors = vectors
                .into_iter()
                .flat_map(|v| {
                    (0..o as u32).map(move |a| {
                        let mut w = v.clone();
                        w.push(a);
                        w
                    })
                })
                .collect();
        }
        let characters = vectors
            .into_iter()
            .map(|v| DirichletCharacter::assemble(Arc::clone(&group), v))
            .collect();
        Ok(CharacterGroup {
            modulus: q,
            characters,
        })
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn euler_phi(&self) -> u64 {
        self.characters.len() as u64
    }

    pub fn characters(&self) -> &[DirichletCharacter] {
        &self.characters
    }

    pub fn iter(&self) -> std::slice::Iter<'_, DirichletCharacter> {
        self.characters.iter()
    }

    pub fn principal(&self) -> &DirichletCharacter {
        &self.characters[0]
    }

    pub fn primitive(&self) -> impl Iterator<Item = &DirichletCharacter> {
        self.characters.iter().filter(|c| c.is_primitive())
    }

    pub fn find(&self, label: &str) -> Option<&DirichletCharacter> {
        self.characters.iter().find(|c| c.label() == label)
    }
}

/// Shorthand for [`CharacterGroup::build`].
pub fn build_group(q: u64) -> Result<CharacterGroup> {
    CharacterGroup::build(q)
}
