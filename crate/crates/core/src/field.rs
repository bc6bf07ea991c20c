//! Abelian number fields described by their character groups.
//!
//! A field `K` inside the cyclotomic field of level `m` is given by the group
//! `X(K)` of characters mod `m` that cut it out. Every invariant needed downstream
//! (degree, signature, discriminant, residue of `zeta_K` at 1) follows from `X(K)`.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::Serialize;

use crate::arith::lcm;
use crate::characters::DirichletCharacter;
use crate::error::{Error, Result};
use crate::explicit::FormulaSettings;
use crate::lfunc::{dedekind_eval, l_eval, PrecisionPolicy};
use crate::zeros::{good_ordinate, GoodOrdinate};

#[derive(Clone, Debug)]
pub struct AbelianField {
    label: String,
    m: u64,
    characters: Vec<DirichletCharacter>,
    inducers: Vec<DirichletCharacter>,
    signature: (u32, u32),
    discriminant: i128,
    kappa: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FieldSummary {
    pub label: String,
    pub m: u64,
    pub conductor: u64,
    pub characters: Vec<String>,
    pub degree: usize,
    pub signature: (u32, u32),
    pub discriminant: i128,
    pub kappa: f64,
}

/// Field generated by `generators` (characters mod `m`).
pub fn build_field(m: u64, generators: &[DirichletCharacter]) -> Result<AbelianField> {
    AbelianField::from_generators(m, generators)
}

impl AbelianField {
    pub fn from_generators(m: u64, generators: &[DirichletCharacter]) -> Result<Self> {
        for g in generators {
            if g.modulus() != m {
                return Err(Error::NotSubgroup(format!("{} is not a character mod {m}", g.label())));
            }
        }
        let principal = DirichletCharacter::principal(m)?;
        let mut seen: BTreeSet<Vec<u32>> = BTreeSet::new();
        let mut members = vec![principal.clone()];
        seen.insert(principal.exponents().to_vec());
        let mut i = 0;
        while i < members.len() {
            for g in generators {
                let c = members[i].mul(g)?;
                if seen.insert(c.exponents().to_vec()) {
                    members.push(c);
                }
            }
            i += 1;
        }
        Self::from_character_set(m, members)
    }

    /// Accepts an explicit set; rejects anything that is not a subgroup.
    pub fn from_character_set(m: u64, set: Vec<DirichletCharacter>) -> Result<Self> {
        let mut keys: BTreeSet<Vec<u32>> = BTreeSet::new();
        for c in &set {
            if c.modulus() != m {
                return Err(Error::NotSubgroup(format!("{} is not a character mod {m}", c.label())));
            }
            if !keys.insert(c.exponents().to_vec()) {
                return Err(Error::NotSubgroup(format!("{} listed twice", c.label())));
            }
        }
        if !set.iter().any(|c| c.is_principal()) {
            return Err(Error::NotSubgroup("principal character missing".into()));
        }
        for a in &set {
            if !keys.contains(a.conj().exponents()) {
                return Err(Error::NotSubgroup(format!("not closed under inversion at {}", a.label())));
            }
            for b in &set {
                if !keys.contains(a.mul(b)?.exponents()) {
                    return Err(Error::NotSubgroup(format!("{} * {} not in the set", a.label(), b.label())));
                }
            }
        }
        let mut characters = set;
        characters.sort_by(|a, b| a.exponents().cmp(b.exponents()));
        let inducers: Vec<DirichletCharacter> = characters.iter().map(|c| c.primitive_inducer()).collect();
        let n = characters.len() as u32;
        let odd = characters.iter().filter(|c| c.is_odd()).count() as u32;
        let signature = if odd == 0 { (n, 0) } else { (0, n / 2) };
        let abs_disc: i128 = inducers.iter().map(|c| c.modulus() as i128).product();
        let discriminant = if signature.1 % 2 == 0 { abs_disc } else { -abs_disc };
        let policy = PrecisionPolicy::default();
        let mut kappa = Complex64::new(1.0, 0.0);
        for chi in inducers.iter().filter(|c| c.modulus() > 1) {
            kappa *= l_eval(Complex64::new(1.0, 0.0), chi, &policy)?.value;
        }
        if kappa.im.abs() > 1e-9 * kappa.norm() || kappa.re <= 0.0 {
            return Err(Error::invalid(format!("residue came out as {kappa}")));
        }
        let label = default_label(m, &characters);
        Ok(AbelianField { label, m, characters, inducers, signature, discriminant, kappa: kappa.re })
    }

    /// The rationals.
    pub fn rationals() -> Self {
        Self::from_generators(1, &[]).expect("trivial group").with_label("Q")
    }

    /// `Q(i)`, cut out by the odd character mod 4.
    pub fn gaussian() -> Self {
        let chi = DirichletCharacter::from_exponents(4, &[1]).expect("mod 4");
        Self::from_generators(4, &[chi]).expect("order 2").with_label("Qi")
    }

    /// `Q(sqrt 5)`, cut out by the Legendre symbol mod 5.
    pub fn real_quadratic_5() -> Self {
        let chi = DirichletCharacter::from_exponents(5, &[2]).expect("mod 5");
        Self::from_generators(5, &[chi]).expect("order 2").with_label("Qsqrt5")
    }

    /// The full cyclotomic field of level `m`.
    pub fn cyclotomic(m: u64) -> Result<Self> {
        let group = crate::characters::build_group(m)?;
        Ok(Self::from_character_set(m, group.characters().to_vec())?.with_label(&format!("Qzeta{m}")))
    }

    /// Named fields used by the command-line front end.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "Q" => Some(Self::rationals()),
            "Qi" => Some(Self::gaussian()),
            "Qsqrt5" => Some(Self::real_quadratic_5()),
            "Qzeta5" => Self::cyclotomic(5).ok(),
            _ => None,
        }
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = label.to_string();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn modulus(&self) -> u64 {
        self.m
    }

    /// Smallest level `m` with `K` inside the `m`-th cyclotomic field.
    pub fn conductor(&self) -> u64 {
        self.inducers.iter().fold(1, |acc, c| lcm(acc, c.modulus()))
    }

    pub fn characters(&self) -> &[DirichletCharacter] {
        &self.characters
    }

    /// Primitive inducers of `X(K)`, in the same order.
    pub fn inducers(&self) -> &[DirichletCharacter] {
        &self.inducers
    }

    pub fn degree(&self) -> usize {
        self.characters.len()
    }

    pub fn signature(&self) -> (u32, u32) {
        self.signature
    }

    pub fn discriminant(&self) -> i128 {
        self.discriminant
    }

    /// Residue of `zeta_K` at `s = 1`.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn summary(&self) -> FieldSummary {
        FieldSummary {
            label: self.label.clone(),
            m: self.m,
            conductor: self.conductor(),
            characters: self.characters.iter().map(|c| c.label().to_string()).collect(),
            degree: self.degree(),
            signature: self.signature,
            discriminant: self.discriminant,
            kappa: self.kappa,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "field {}", self.label);
        let _ = writeln!(out, "m {}", self.m);
        let labels: Vec<&str> = self.characters.iter().map(|c| c.label()).collect();
        let _ = writeln!(out, "characters {}", labels.join(" "));
        let _ = writeln!(out, "degree {}", self.degree());
        let _ = writeln!(out, "signature {} {}", self.signature.0, self.signature.1);
        let _ = writeln!(out, "discriminant {}", self.discriminant);
        let _ = writeln!(out, "kappa {:.17e}", self.kappa);
        out
    }

    /// Parses [`to_text`](Self::to_text) output. Derived constants are recomputed and
    /// must agree with the stored ones.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut label = None;
        let mut m = None;
        let mut chars = None;
        let mut kappa = None;
        let mut disc = None;
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
            match key {
                "field" => label = Some(rest.to_string()),
                "m" => m = Some(rest.parse::<u64>().map_err(|e| Error::Format(format!("m: {e}")))?),
                "characters" => {
                    chars = Some(
                        rest.split_whitespace()
                            .map(DirichletCharacter::from_label)
                            .collect::<Result<Vec<_>>>()?,
                    )
                }
                "kappa" => kappa = Some(rest.parse::<f64>().map_err(|e| Error::Format(format!("kappa: {e}")))?),
                "discriminant" => {
                    disc = Some(rest.parse::<i128>().map_err(|e| Error::Format(format!("discriminant: {e}")))?)
                }
                "degree" | "signature" => {}
                other => return Err(Error::Format(format!("unknown field key {other}"))),
            }
        }
        let (Some(m), Some(chars)) = (m, chars) else {
            return Err(Error::Format("field descriptor needs m and characters".into()));
        };
        let mut f = Self::from_character_set(m, chars)?;
        if let Some(l) = label {
            f.label = l;
        }
        if let Some(k) = kappa {
            if (k - f.kappa).abs() > 1e-9 * f.kappa {
                return Err(Error::Format(format!("stored kappa {k} disagrees with {}", f.kappa)));
            }
        }
        if let Some(d) = disc {
            if d != f.discriminant {
                return Err(Error::Format(format!("stored discriminant {d} disagrees with {}", f.discriminant)));
            }
        }
        Ok(f)
    }
}

/// Good ordinate for `zeta_K`: grid minimizer of `max_sigma 1/|zeta_K|` on `[T, 2T]`.
pub fn good_ordinate_field(field: &AbelianField, t: f64, settings: &FormulaSettings) -> Result<GoodOrdinate> {
    let policy = settings.policy;
    good_ordinate(t, settings.sigma_step, settings.t_step, |s| Ok(dedekind_eval(s, field, &policy)?.value.norm()))
}

fn default_label(m: u64, chars: &[DirichletCharacter]) -> String {
    let mut s = format!("K{m}");
    for c in chars.iter().filter(|c| !c.is_principal()) {
        let e: Vec<String> = c.exponents().iter().map(|x| x.to_string()).collect();
        let _ = write!(s, "-{}", e.join("."));
    }
    s
}
